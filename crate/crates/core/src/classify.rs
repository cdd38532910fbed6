//! Vertex categorization into free, fixed and non-interested classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexClass {
    Free,
    Fixed,
    NonInterested,
}

/// Per-vertex class and diffusion weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexClassification {
    classes: Vec<VertexClass>,
    lambda: Vec<f64>,
}

impl VertexClassification {
    /// Builds a classification from explicit classes with unit weights.
    pub fn from_classes(classes: Vec<VertexClass>) -> Self {
        let lambda = vec![1.0; classes.len()];
        Self { classes, lambda }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class(&self, i: usize) -> VertexClass {
        self.classes[i]
    }

    pub fn classes(&self) -> &[VertexClass] {
        &self.classes
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn is_interested(&self, i: usize) -> bool {
        self.classes[i] != VertexClass::NonInterested
    }

    pub fn interested_mask(&self) -> Vec<bool> {
        self.classes
            .iter()
            .map(|&c| c != VertexClass::NonInterested)
            .collect()
    }

    fn indices_of(&self, class: VertexClass) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&i| self.classes[i] == class)
            .collect()
    }

    pub fn free_vertices(&self) -> Vec<usize> {
        self.indices_of(VertexClass::Free)
    }

    pub fn fixed_vertices(&self) -> Vec<usize> {
        self.indices_of(VertexClass::Fixed)
    }

    /// n_f, the number of fixed vertices.
    pub fn fixed_count(&self) -> usize {
        self.classes
            .iter()
            .filter(|&&c| c == VertexClass::Fixed)
            .count()
    }

    pub fn free_count(&self) -> usize {
        self.classes
            .iter()
            .filter(|&&c| c == VertexClass::Free)
            .count()
    }

    /// Replaces the diffusion weights. Interested vertices need λ > 0.
    pub fn set_lambda(&mut self, lambda: Vec<f64>) -> Result<()> {
        if lambda.len() != self.classes.len() {
            return Err(Error::Dimension {
                expected: self.classes.len(),
                found: lambda.len(),
            });
        }
        for (i, &l) in lambda.iter().enumerate() {
            if self.is_interested(i) && !(l > 0.0 && l.is_finite()) {
                return Err(Error::Parameter(format!(
                    "lambda at vertex {i} must be positive and finite, got {l}"
                )));
            }
        }
        self.lambda = lambda;
        Ok(())
    }
}

/// Labels every vertex of `mesh`.
///
/// Fixed vertices are the landmarks, interested vertices on the mesh
/// boundary, and interested vertices adjacent to a non-interested one.
/// All remaining interested vertices are free. Weights start at 1.
pub fn classify_vertices(
    mesh: &Mesh,
    landmarks: &[usize],
    non_interested: &[usize],
) -> Result<VertexClassification> {
    let n = mesh.n_vertices();
    for &i in landmarks.iter().chain(non_interested) {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
    }

    let mut classes = vec![VertexClass::Free; n];
    for &i in non_interested {
        classes[i] = VertexClass::NonInterested;
    }
    for &i in landmarks {
        if classes[i] == VertexClass::NonInterested {
            return Err(Error::ClassConflict(i));
        }
        classes[i] = VertexClass::Fixed;
    }
    for i in 0..n {
        if classes[i] != VertexClass::Free {
            continue;
        }
        let on_interface = mesh
            .one_ring(i)
            .iter()
            .any(|&j| classes[j] == VertexClass::NonInterested);
        if mesh.is_boundary_vertex(i) || on_interface {
            classes[i] = VertexClass::Fixed;
        }
    }
    Ok(VertexClassification::from_classes(classes))
}
