//! Global diffusion of preliminary offsets.
//!
//! The smoothing problem leads to the sparse system `B O = C` with
//! `B = I + A`, where row `i` of `A` carries `lambda_i * N_i` on the diagonal
//! and `-lambda_i` for each neighbour. Fixed vertices keep their rows but
//! lose their columns, so the system becomes over-determined and is solved
//! in the least-squares sense through the normal equations
//! `B_f^T B_f O = B_f^T C`.
//!
//! The normal matrix is reordered and factorized once when the system is
//! built. Every solve is a forward/back substitution, followed by one round
//! of iterative refinement when the residual is not already negligible.

use std::fmt;

use serde::{Deserialize, Serialize};
use sprs::{CsMat, FillInReduction, SymmetryCheck, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};

use crate::classify::{VertexClass, VertexClassification};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, NeighborGraph, Vec3};

/// Parameters of the weight decay `lambda = max * exp(-d / sigma) + min`
/// where `sigma = sigma_scale * mean_edge_length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaParams {
    pub max: f64,
    pub min: f64,
    pub sigma_scale: f64,
}

impl Default for LambdaParams {
    fn default() -> Self {
        Self {
            max: 1.0,
            min: 0.1,
            sigma_scale: 5.0,
        }
    }
}

impl LambdaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max >= 0.0 && self.max.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda max must be >= 0, got {}",
                self.max
            )));
        }
        if !(self.min > 0.0 && self.min.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda min must be > 0, got {}",
                self.min
            )));
        }
        if !(self.sigma_scale > 0.0 && self.sigma_scale.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda sigma scale must be > 0, got {}",
                self.sigma_scale
            )));
        }
        Ok(())
    }

    pub fn weight(&self, distance: f64, sigma: f64) -> f64 {
        self.max * (-distance / sigma).exp() + self.min
    }
}

/// Sets weights that decay with geodesic distance to the fixed vertices.
pub fn assign_lambda(
    mesh: &Mesh,
    classification: &VertexClassification,
    geodesic_to_fixed: &[f64],
    params: &LambdaParams,
) -> Result<VertexClassification> {
    params.validate()?;
    if geodesic_to_fixed.len() != mesh.n_vertices() {
        return Err(Error::Dimension {
            expected: mesh.n_vertices(),
            found: geodesic_to_fixed.len(),
        });
    }
    let sigma = params.sigma_scale * mesh.mean_edge_length();
    if !(sigma > 0.0) {
        return Err(Error::Degenerate("mesh has zero mean edge length".into()));
    }
    let lambda = geodesic_to_fixed
        .iter()
        .map(|&d| params.weight(d, sigma))
        .collect();
    let mut out = classification.clone();
    out.set_lambda(lambda)?;
    Ok(out)
}

/// Relative residual above which one round of iterative refinement runs.
const REFINE_ABOVE: f64 = 1e-12;

fn residual_ratio(applied: &[f64], rhs: &[f64], scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    applied
        .iter()
        .zip(rhs)
        .fold(0.0f64, |m, (ax, b)| m.max((b - ax).abs()))
        / scale
}

/// Factor of the normal matrix. The sparse LDL backend needs at least two
/// unknowns, so a single free vertex is handled as a scalar.
enum Factor {
    Scalar(f64),
    Ldl(Box<LdlNumeric<f64, usize>>),
}

impl Factor {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            Factor::Scalar(d) => vec![rhs[0] / d],
            Factor::Ldl(ldl) => ldl.solve(&rhs.to_vec()),
        }
    }
}

/// Prefactorized diffusion system over a subset of mesh vertices.
pub struct DiffusionSystem {
    n_vertices: usize,
    /// Mesh vertex of each system row.
    rows: Vec<usize>,
    /// Mesh vertex of each unknown.
    free: Vec<usize>,
    fixed_count: usize,
    coefficient: CsMat<f64>,
    reduced: CsMat<f64>,
    normal: CsMat<f64>,
    factor: Option<Factor>,
}

impl fmt::Debug for DiffusionSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSystem")
            .field("rows", &self.rows.len())
            .field("free", &self.free.len())
            .field("fixed", &self.fixed_count)
            .field("normal_nnz", &self.normal.nnz())
            .finish()
    }
}

/// Builds and factorizes the system over all interested vertices.
pub fn build_system(
    graph: &NeighborGraph,
    classification: &VertexClassification,
) -> Result<DiffusionSystem> {
    let members: Vec<usize> = (0..classification.len())
        .filter(|&i| classification.is_interested(i))
        .collect();
    let fixed: Vec<bool> = classification
        .classes()
        .iter()
        .map(|&c| c == VertexClass::Fixed)
        .collect();
    DiffusionSystem::for_subset(graph, &members, &fixed, classification.lambda())
}

impl DiffusionSystem {
    /// Builds the system over `members`. Neighbours outside `members` are
    /// ignored; `fixed[i]` marks members that receive no unknown.
    pub fn for_subset(
        graph: &NeighborGraph,
        members: &[usize],
        fixed: &[bool],
        lambda: &[f64],
    ) -> Result<Self> {
        let n = graph.len();
        if fixed.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: fixed.len(),
            });
        }
        if lambda.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: lambda.len(),
            });
        }

        let mut row_of = vec![usize::MAX; n];
        let mut rows = members.to_vec();
        rows.sort_unstable();
        rows.dedup();
        for (r, &i) in rows.iter().enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            row_of[i] = r;
        }
        let mask: Vec<bool> = row_of.iter().map(|&r| r != usize::MAX).collect();
        let graph = graph.restrict(&mask);
        if !graph.is_symmetric() {
            return Err(Error::Parameter("neighbor graph must be symmetric".into()));
        }

        let mut col_of = vec![usize::MAX; n];
        let mut free = Vec::new();
        for &i in &rows {
            if !(lambda[i] > 0.0 && lambda[i].is_finite()) {
                return Err(Error::Parameter(format!(
                    "lambda at vertex {i} must be positive, got {}",
                    lambda[i]
                )));
            }
            if !fixed[i] {
                col_of[i] = free.len();
                free.push(i);
            }
        }
        let fixed_count = rows.len() - free.len();

        let m = rows.len();
        let mut b = TriMat::new((m, m));
        let mut bf = TriMat::new((m, free.len()));
        for (r, &i) in rows.iter().enumerate() {
            let nbrs = graph.neighbors(i);
            let diag = 1.0 + lambda[i] * nbrs.len() as f64;
            b.add_triplet(r, r, diag);
            if col_of[i] != usize::MAX {
                bf.add_triplet(r, col_of[i], diag);
            }
            for &j in nbrs {
                b.add_triplet(r, row_of[j], -lambda[i]);
                if col_of[j] != usize::MAX {
                    bf.add_triplet(r, col_of[j], -lambda[i]);
                }
            }
        }
        let coefficient: CsMat<f64> = b.to_csr();
        let reduced: CsMat<f64> = bf.to_csr();

        // B_f^T B_f accumulated row by row of B_f.
        let mut normal = TriMat::new((free.len(), free.len()));
        for row in reduced.outer_iterator() {
            for (a, &va) in row.iter() {
                for (c, &vc) in row.iter() {
                    normal.add_triplet(a, c, va * vc);
                }
            }
        }
        let normal: CsMat<f64> = normal.to_csc();

        let factor = match free.len() {
            0 => None,
            1 => {
                let d = normal.get(0, 0).copied().unwrap_or(0.0);
                if d <= 0.0 {
                    return Err(Error::Factorization { pivot: 0 });
                }
                Some(Factor::Scalar(d))
            }
            _ => {
                let ldl = Ldl::new()
                    .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
                    .check_symmetry(SymmetryCheck::DontCheckSymmetry)
                    .numeric(normal.view())
                    .map_err(|e| match e {
                        sprs::errors::LinalgError::SingularMatrix(info) => {
                            Error::Factorization { pivot: info.index }
                        }
                        other => Error::Parameter(format!("factorization failed: {other}")),
                    })?;
                Some(Factor::Ldl(Box::new(ldl)))
            }
        };

        Ok(Self {
            n_vertices: n,
            rows,
            free,
            fixed_count,
            coefficient,
            reduced,
            normal,
            factor,
        })
    }

    /// Coefficient matrix `B` over the system rows (row order = [`Self::rows`]).
    pub fn coefficient(&self) -> &CsMat<f64> {
        &self.coefficient
    }

    /// `B` with fixed columns removed (column order = [`Self::free_vertices`]).
    pub fn reduced_coefficient(&self) -> &CsMat<f64> {
        &self.reduced
    }

    /// `B_f^T B_f`.
    pub fn normal_matrix(&self) -> &CsMat<f64> {
        &self.normal
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    pub fn fixed_count(&self) -> usize {
        self.fixed_count
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    fn normal_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (col, column) in self.normal.outer_iterator().enumerate() {
            for (row, &v) in column.iter() {
                out[row] += v * x[col];
            }
        }
        out
    }

    /// Least-squares offsets for the free vertices given the per-vertex
    /// right-hand side `p_i - v_i` (indexed by mesh vertex; only system rows
    /// are read).
    pub fn diffuse(&self, rhs: &[Vec3]) -> Result<RegularizedOffsets> {
        if rhs.len() != self.n_vertices {
            return Err(Error::Dimension {
                expected: self.n_vertices,
                found: rhs.len(),
            });
        }
        let Some(factor) = &self.factor else {
            return Ok(RegularizedOffsets {
                vertices: Vec::new(),
                offsets: Vec::new(),
                relative_residual: 0.0,
            });
        };

        let f = self.free.len();
        let mut solution = vec![Vec3::zeros(); f];
        let mut worst: f64 = 0.0;
        for axis in 0..3 {
            let mut projected = vec![0.0; f];
            for (r, row) in self.reduced.outer_iterator().enumerate() {
                let c = rhs[self.rows[r]][axis];
                if c != 0.0 {
                    for (col, &v) in row.iter() {
                        projected[col] += v * c;
                    }
                }
            }
            let scale = projected.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut x: Vec<f64> = factor.solve(&projected);
            let mut relative = residual_ratio(&self.normal_apply(&x), &projected, scale);
            if relative > REFINE_ABOVE {
                let residual: Vec<f64> = self
                    .normal_apply(&x)
                    .iter()
                    .zip(&projected)
                    .map(|(ax, b)| b - ax)
                    .collect();
                let correction: Vec<f64> = factor.solve(&residual);
                for (xi, dx) in x.iter_mut().zip(&correction) {
                    *xi += dx;
                }
                relative = residual_ratio(&self.normal_apply(&x), &projected, scale);
            }
            worst = worst.max(relative);
            for (s, v) in solution.iter_mut().zip(&x) {
                s[axis] = *v;
            }
        }

        Ok(RegularizedOffsets {
            vertices: self.free.clone(),
            offsets: solution,
            relative_residual: worst,
        })
    }

    /// Diffuses the dividing-step output directly.
    pub fn diffusing_step(
        &self,
        offsets: &crate::rigid::PreliminaryOffsets,
    ) -> Result<RegularizedOffsets> {
        self.diffuse(&offsets.offsets)
    }
}

/// Solver output aligned with the system's free vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedOffsets {
    pub vertices: Vec<usize>,
    pub offsets: Vec<Vec3>,
    /// `max |B^T C - B^T B O| / max |B^T C|` over the three axes.
    pub relative_residual: f64,
}

impl RegularizedOffsets {
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Vec3)> {
        self.vertices.iter().copied().zip(&self.offsets)
    }
}
