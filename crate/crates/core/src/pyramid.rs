//! Multi-resolution vertex pyramid built by farthest point sampling.
//!
//! Free vertices are ordered once by FPS seeded with the fixed vertices.
//! Level `j < k` unlocks the prefix of that order up to `N1 / 4^(k-1-j)`;
//! its free vertices are the newly unlocked ones and everything included
//! earlier is held fixed. Level `k` is the full mesh with its native 1-ring
//! adjacency.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::VertexClassification;
use crate::error::{Error, Result};
use crate::geodesic::{farthest_point_order, EdgeGraph};
use crate::mesh::{Mesh, NeighborGraph};

const INTERIOR_NEIGHBORS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidLevel {
    pub free: Vec<usize>,
    pub fixed: Vec<usize>,
    pub graph: NeighborGraph,
}

impl PyramidLevel {
    /// Sorted union of free and fixed vertices.
    pub fn vertices(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.free.iter().chain(&self.fixed).copied().collect();
        all.sort_unstable();
        all
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPyramid {
    /// Fingerprint of the template and classification this was built for.
    pub fingerprint: String,
    pub levels: Vec<PyramidLevel>,
}

impl ResolutionPyramid {
    /// Number of decimated levels, k.
    pub fn k(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)
            .map_err(|e| Error::Parameter(format!("cannot serialize pyramid: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            line: e.line(),
            message: format!("invalid pyramid file: {e}"),
        })
    }

    /// Loads a pyramid and checks it was built for this template and
    /// classification.
    pub fn load_for(
        path: impl AsRef<Path>,
        mesh: &Mesh,
        classification: &VertexClassification,
    ) -> Result<Self> {
        let pyramid = Self::load(path)?;
        if pyramid.fingerprint != fingerprint(mesh, classification) {
            return Err(Error::Parameter(
                "pyramid file was built for a different template or classification".into(),
            ));
        }
        Ok(pyramid)
    }
}

/// SHA-256 over vertex coordinates, faces and vertex classes.
pub fn fingerprint(mesh: &Mesh, classification: &VertexClassification) -> String {
    let mut hasher = Sha256::new();
    for v in mesh.vertices() {
        for c in v.iter() {
            hasher.update(c.to_le_bytes());
        }
    }
    for f in mesh.faces() {
        for &i in f {
            hasher.update((i as u64).to_le_bytes());
        }
    }
    for c in classification.classes() {
        hasher.update([*c as u8]);
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Number of free vertices included up to level `j` (cumulative).
pub fn cumulative_free_counts(n_free: usize, k: usize) -> Vec<usize> {
    (0..k)
        .map(|j| n_free / 4usize.pow((k - 1 - j) as u32))
        .collect()
}

/// Walks the boundary loop from `start` through `first` until an included
/// vertex is met.
fn boundary_walk(
    boundary_adj: &[Vec<usize>],
    included: &[bool],
    start: usize,
    first: usize,
) -> Option<usize> {
    let (mut prev, mut cur) = (start, first);
    for _ in 0..boundary_adj.len() {
        if cur == start {
            return None;
        }
        if included[cur] {
            return Some(cur);
        }
        let next = boundary_adj[cur].iter().copied().find(|&w| w != prev)?;
        prev = cur;
        cur = next;
    }
    None
}

fn level_graph(
    mesh: &Mesh,
    geodesic: &EdgeGraph,
    boundary_adj: &[Vec<usize>],
    members: &[usize],
    included: &[bool],
) -> NeighborGraph {
    let mut lists = vec![Vec::new(); mesh.n_vertices()];
    for &v in members {
        let list = &mut lists[v];
        if mesh.is_boundary_vertex(v) {
            for &b in &boundary_adj[v] {
                if let Some(w) = boundary_walk(boundary_adj, included, v, b) {
                    list.push(w);
                }
            }
            geodesic.expand(v, |w, _| {
                if w != v && included[w] && !mesh.is_boundary_vertex(w) {
                    list.push(w);
                    return false;
                }
                true
            });
        } else {
            geodesic.expand(v, |w, _| {
                if w != v && included[w] {
                    list.push(w);
                }
                list.len() < INTERIOR_NEIGHBORS
            });
        }
    }
    let mut graph = NeighborGraph::from_lists(lists).expect("indices come from the mesh");
    graph.symmetrize();
    graph
}

/// Builds the pyramid with `k` decimated levels plus the full-resolution
/// level.
pub fn build_pyramid(
    mesh: &Mesh,
    classification: &VertexClassification,
    k: usize,
) -> Result<ResolutionPyramid> {
    if k == 0 {
        return Err(Error::Parameter("pyramid needs k >= 1".into()));
    }
    if classification.len() != mesh.n_vertices() {
        return Err(Error::Dimension {
            expected: mesh.n_vertices(),
            found: classification.len(),
        });
    }
    let free = classification.free_vertices();
    let fixed = classification.fixed_vertices();
    let n_free = free.len();
    let coarsest = 4usize
        .checked_pow((k - 1) as u32)
        .ok_or_else(|| Error::Parameter(format!("k = {k} is too large")))?;
    if n_free < coarsest {
        return Err(Error::Parameter(format!(
            "k = {k} needs at least {coarsest} free vertices, found {n_free}"
        )));
    }

    let interested = classification.interested_mask();
    let geodesic = EdgeGraph::new(mesh, Some(&interested));
    let mut candidates = vec![false; mesh.n_vertices()];
    for &i in &free {
        candidates[i] = true;
    }
    let order = farthest_point_order(&geodesic, &fixed, &candidates, n_free)?;

    let mut boundary_adj = vec![Vec::new(); mesh.n_vertices()];
    for [a, b] in mesh.boundary_edges() {
        if interested[a] && interested[b] {
            boundary_adj[a].push(b);
            boundary_adj[b].push(a);
        }
    }

    let counts = cumulative_free_counts(n_free, k);
    let mut levels = Vec::with_capacity(k + 1);
    let mut included = vec![false; mesh.n_vertices()];
    for &i in &fixed {
        included[i] = true;
    }
    let mut previous = 0;
    for &count in &counts {
        let level_free: Vec<usize> = order[previous..count].to_vec();
        let mut level_fixed: Vec<usize> = fixed.iter().chain(&order[..previous]).copied().collect();
        level_fixed.sort_unstable();
        for &i in &level_free {
            included[i] = true;
        }
        let members: Vec<usize> = (0..mesh.n_vertices()).filter(|&i| included[i]).collect();
        let graph = level_graph(mesh, &geodesic, &boundary_adj, &members, &included);
        let mut level_free = level_free;
        level_free.sort_unstable();
        levels.push(PyramidLevel {
            free: level_free,
            fixed: level_fixed,
            graph,
        });
        previous = count;
    }
    levels.push(PyramidLevel {
        free,
        fixed,
        graph: mesh.neighbor_graph().restrict(&interested),
    });

    Ok(ResolutionPyramid {
        fingerprint: fingerprint(mesh, classification),
        levels,
    })
}
