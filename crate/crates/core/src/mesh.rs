//! Indexed triangle meshes and vertex adjacency.
//!
//! A [`Mesh`] owns its vertex positions and shares an immutable
//! [`Topology`] through an `Arc`, so a template and any number of
//! corresponded targets can carry the same faces, edges and 1-ring lists
//! without copying them.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Connectivity derived from a face list.
#[derive(Debug, PartialEq)]
pub struct Topology {
    n_vertices: usize,
    faces: Vec<[usize; 3]>,
    /// Canonical `(min, max)` pairs, sorted lexicographically.
    edges: Vec<[usize; 2]>,
    /// Number of faces incident to each edge (1 or 2).
    edge_face_count: Vec<u8>,
    one_ring: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
}

impl Topology {
    fn build(n_vertices: usize, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mut incidence: HashMap<[usize; 2], u8> = HashMap::with_capacity(faces.len() * 2);
        for face in &faces {
            for &index in face {
                if index >= n_vertices {
                    return Err(Error::IndexOutOfRange {
                        index,
                        len: n_vertices,
                    });
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::Degenerate(format!(
                    "face {:?} repeats a vertex index",
                    face
                )));
            }
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let count = incidence.entry(key).or_insert(0);
                *count += 1;
                if *count > 2 {
                    return Err(Error::NonManifold(key[0], key[1]));
                }
            }
        }

        let mut edges: Vec<[usize; 2]> = incidence.keys().copied().collect();
        edges.sort_unstable();
        let edge_face_count: Vec<u8> = edges.iter().map(|e| incidence[e]).collect();

        let mut one_ring = vec![Vec::new(); n_vertices];
        let mut boundary_vertex = vec![false; n_vertices];
        for (edge, &count) in edges.iter().zip(&edge_face_count) {
            one_ring[edge[0]].push(edge[1]);
            one_ring[edge[1]].push(edge[0]);
            if count == 1 {
                boundary_vertex[edge[0]] = true;
                boundary_vertex[edge[1]] = true;
            }
        }
        for ring in &mut one_ring {
            ring.sort_unstable();
        }

        Ok(Self {
            n_vertices,
            faces,
            edges,
            edge_face_count,
            one_ring,
            boundary_vertex,
        })
    }
}

/// Indexed triangle surface.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    topology: Arc<Topology>,
}

impl Mesh {
    /// Builds a mesh, deriving edges and 1-rings from the faces.
    ///
    /// Faces with repeated indices and edges shared by more than two faces
    /// are rejected.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let topology = Topology::build(vertices.len(), faces)?;
        Ok(Self {
            vertices,
            topology: Arc::new(topology),
        })
    }

    /// A mesh with the same topology and new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Dimension {
                expected: self.vertices.len(),
                found: vertices.len(),
            });
        }
        Ok(Self {
            vertices,
            topology: Arc::clone(&self.topology),
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vec3 {
        self.vertices[i]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.topology.faces
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.topology.edges
    }

    pub fn one_ring(&self, i: usize) -> &[usize] {
        &self.topology.one_ring[i]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.topology.faces.len()
    }

    pub fn n_edges(&self) -> usize {
        self.topology.edges.len()
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    /// Edges with exactly one incident face.
    pub fn boundary_edges(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        self.topology
            .edges
            .iter()
            .zip(&self.topology.edge_face_count)
            .filter(|(_, &c)| c == 1)
            .map(|(e, _)| *e)
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.topology
            .edge_face_count
            .iter()
            .filter(|&&c| c == 1)
            .count()
    }

    pub fn is_boundary_vertex(&self, i: usize) -> bool {
        self.topology.boundary_vertex[i]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices())
            .filter(|&i| self.topology.boundary_vertex[i])
            .collect()
    }

    /// Meshes are topologically identical when they have the same vertex
    /// count and face list.
    pub fn same_topology(&self, other: &Mesh) -> bool {
        Arc::ptr_eq(&self.topology, &other.topology)
            || (self.n_vertices() == other.n_vertices()
                && self.topology.faces == other.topology.faces)
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let [a, b] = self.topology.edges[edge];
        (self.vertices[a] - self.vertices[b]).norm()
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.n_edges()).map(|e| self.edge_length(e)).collect()
    }

    /// Arithmetic mean of all edge lengths, 0 for an edgeless mesh.
    pub fn mean_edge_length(&self) -> f64 {
        if self.n_edges() == 0 {
            return 0.0;
        }
        self.edge_lengths().iter().sum::<f64>() / self.n_edges() as f64
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.topology.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Area-weighted vertex normals, normalized; zero where undefined.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut normals = vec![Vec3::zeros(); self.n_vertices()];
        for face in self.faces() {
            let [a, b, c] = *face;
            // Cross product magnitude is twice the area.
            let n =
                (self.vertices[b] - self.vertices[a]).cross(&(self.vertices[c] - self.vertices[a]));
            for &v in face {
                normals[v] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }

    /// The native 1-ring adjacency as a neighbor graph.
    pub fn neighbor_graph(&self) -> NeighborGraph {
        NeighborGraph {
            lists: self.topology.one_ring.clone(),
        }
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }
}

/// Per-vertex neighbor lists over a mesh's vertex index space.
///
/// Lists are sorted and free of self-loops and duplicates. Vertices outside
/// the graph's active subset simply have empty lists.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NeighborGraph {
    lists: Vec<Vec<usize>>,
}

impl NeighborGraph {
    pub fn from_lists(mut lists: Vec<Vec<usize>>) -> Result<Self> {
        let n = lists.len();
        for (i, list) in lists.iter_mut().enumerate() {
            if let Some(&bad) = list.iter().find(|&&j| j >= n) {
                return Err(Error::IndexOutOfRange { index: bad, len: n });
            }
            list.retain(|&j| j != i);
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { lists })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            lists: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.lists[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.lists[i].len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.lists.iter().enumerate().all(|(i, list)| {
            list.iter()
                .all(|&j| self.lists[j].binary_search(&i).is_ok())
        })
    }

    /// Adds every missing reverse edge.
    pub fn symmetrize(&mut self) {
        let mut extra: Vec<(usize, usize)> = Vec::new();
        for (i, list) in self.lists.iter().enumerate() {
            for &j in list {
                if self.lists[j].binary_search(&i).is_err() {
                    extra.push((j, i));
                }
            }
        }
        for (j, i) in extra {
            self.lists[j].push(i);
        }
        for list in &mut self.lists {
            list.sort_unstable();
            list.dedup();
        }
    }

    /// Keeps only edges whose endpoints are both inside `mask`.
    pub fn restrict(&self, mask: &[bool]) -> Self {
        let lists = self
            .lists
            .iter()
            .enumerate()
            .map(|(i, list)| {
                if mask[i] {
                    list.iter().copied().filter(|&j| mask[j]).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        Self { lists }
    }

    pub fn edge_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Template and target sharing one topology, plus the raw target surface
/// that refined vertices are projected onto.
#[derive(Debug, Clone)]
pub struct CorrespondedPair {
    pub template: Mesh,
    pub target: Mesh,
    /// May have any topology.
    pub raw_target_surface: Mesh,
}

impl CorrespondedPair {
    pub fn new(template: Mesh, target: Mesh, raw_target_surface: Mesh) -> Result<Self> {
        if !template.same_topology(&target) {
            return Err(Error::TopologyMismatch);
        }
        Ok(Self {
            template,
            target,
            raw_target_surface,
        })
    }
}
