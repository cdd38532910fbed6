//! Geodesic distances on a template mesh and farthest point sampling.
//!
//! The default backend measures shortest paths along mesh edges with
//! Euclidean edge weights. A heat-flow backend is available for smoother
//! fields that do not follow the edge directions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use sprs::{CsMat, FillInReduction, SymmetryCheck, TriMat};
use sprs_ldl::Ldl;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeodesicBackend {
    #[default]
    Graph,
    Heat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    pub distances: Vec<f64>,
    /// Vertices with no path to any source (distance is +inf).
    pub unreachable: Vec<usize>,
}

/// Edge graph with Euclidean edge weights, optionally restricted to a
/// vertex subset.
#[derive(Debug, Clone)]
pub struct EdgeGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl EdgeGraph {
    pub fn new(mesh: &Mesh, mask: Option<&[bool]>) -> Self {
        let keep = |i: usize| mask.is_none_or(|m| m[i]);
        let mut adjacency = vec![Vec::new(); mesh.n_vertices()];
        for (e, &[a, b]) in mesh.edges().iter().enumerate() {
            if keep(a) && keep(b) {
                let w = mesh.edge_length(e);
                adjacency[a].push((b, w));
                adjacency[b].push((a, w));
            }
        }
        Self { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Multi-source shortest-path distances.
    pub fn distances_from(&self, sources: &[usize]) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            dist[s] = 0.0;
            heap.push(MinEntry {
                dist: 0.0,
                vertex: s,
            });
        }
        self.relax(&mut dist, heap);
        dist
    }

    /// Lowers `dist` wherever a path from `source` is shorter and returns
    /// the vertices that changed.
    pub fn lower_from(&self, dist: &mut [f64], source: usize) -> Vec<usize> {
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(MinEntry {
            dist: 0.0,
            vertex: source,
        });
        self.relax(dist, heap)
    }

    fn relax(&self, dist: &mut [f64], mut heap: BinaryHeap<MinEntry>) -> Vec<usize> {
        let mut touched = Vec::new();
        while let Some(MinEntry { dist: d, vertex: v }) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            touched.push(v);
            for &(w, len) in &self.adjacency[v] {
                let nd = d + len;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(MinEntry {
                        dist: nd,
                        vertex: w,
                    });
                }
            }
        }
        touched
    }

    /// Visits vertices in order of increasing distance from `source`, ties
    /// by vertex index, until `visit` returns `false`.
    pub fn expand(&self, source: usize, mut visit: impl FnMut(usize, f64) -> bool) {
        let mut dist: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
        let mut done = std::collections::HashSet::new();
        let mut heap = BinaryHeap::new();
        dist.insert(source, 0.0);
        heap.push(MinEntry {
            dist: 0.0,
            vertex: source,
        });
        while let Some(MinEntry { dist: d, vertex: v }) = heap.pop() {
            if !done.insert(v) {
                continue;
            }
            if !visit(v, d) {
                return;
            }
            for &(w, len) in &self.adjacency[v] {
                let nd = d + len;
                if dist.get(&w).is_none_or(|&old| nd < old) {
                    dist.insert(w, nd);
                    heap.push(MinEntry {
                        dist: nd,
                        vertex: w,
                    });
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct MinEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for MinEntry {}

impl Ord for MinEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so BinaryHeap pops the smallest (dist, vertex).
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for MinEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_sources(mesh: &Mesh, sources: &[usize]) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::Empty("geodesic sources"));
    }
    if let Some(&bad) = sources.iter().find(|&&s| s >= mesh.n_vertices()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: mesh.n_vertices(),
        });
    }
    Ok(())
}

/// Distance from every vertex to the nearest source along mesh edges.
pub fn geodesic_field(mesh: &Mesh, sources: &[usize]) -> Result<GeodesicField> {
    geodesic_field_with(mesh, sources, GeodesicBackend::Graph, None)
}

/// Distance field with a chosen backend. With a mask, only vertices inside
/// it (and edges or faces entirely inside it) take part; masked-out
/// vertices report +inf.
pub fn geodesic_field_with(
    mesh: &Mesh,
    sources: &[usize],
    backend: GeodesicBackend,
    mask: Option<&[bool]>,
) -> Result<GeodesicField> {
    check_sources(mesh, sources)?;
    let distances = match backend {
        GeodesicBackend::Graph => EdgeGraph::new(mesh, mask).distances_from(sources),
        GeodesicBackend::Heat => heat_distances(mesh, sources, mask)?,
    };
    let unreachable = (0..distances.len())
        .filter(|&i| distances[i].is_infinite())
        .collect();
    Ok(GeodesicField {
        distances,
        unreachable,
    })
}

fn cot(a: &Vec3, b: &Vec3) -> f64 {
    let cross = a.cross(b).norm();
    if cross <= f64::EPSILON * a.norm() * b.norm() {
        0.0
    } else {
        a.dot(b) / cross
    }
}

/// Heat-flow distance: diffuse a spike for time `h^2`, normalize the
/// negated gradient, then recover the potential by a Poisson solve.
fn heat_distances(mesh: &Mesh, sources: &[usize], mask: Option<&[bool]>) -> Result<Vec<f64>> {
    let n = mesh.n_vertices();
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    let faces: Vec<[usize; 3]> = mesh
        .faces()
        .iter()
        .copied()
        .filter(|f| f.iter().all(|&v| keep(v)))
        .collect();
    let p = mesh.vertices();

    let mut lap = TriMat::new((n, n));
    let mut mass = vec![0.0; n];
    for f in &faces {
        let area = 0.5 * (p[f[1]] - p[f[0]]).cross(&(p[f[2]] - p[f[0]])).norm();
        for k in 0..3 {
            let (i, j, o) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let w = 0.5 * cot(&(p[i] - p[o]), &(p[j] - p[o]));
            lap.add_triplet(i, j, -w);
            lap.add_triplet(j, i, -w);
            lap.add_triplet(i, i, w);
            lap.add_triplet(j, j, w);
            mass[f[k]] += area / 3.0;
        }
    }
    let isolated: Vec<bool> = mass.iter().map(|&m| m == 0.0).collect();
    for (i, &iso) in isolated.iter().enumerate() {
        if iso {
            // Keeps the system nonsingular; such vertices are reported as +inf.
            mass[i] = 1.0;
        }
    }
    let lap: CsMat<f64> = lap.to_csc();
    let h = mesh.mean_edge_length();
    let t = h * h;

    let shifted = |scale: f64, diag: &[f64]| -> CsMat<f64> {
        let mut m = TriMat::new((n, n));
        for (col, column) in lap.outer_iterator().enumerate() {
            for (row, &v) in column.iter() {
                m.add_triplet(row, col, scale * v);
            }
        }
        for (i, &d) in diag.iter().enumerate() {
            m.add_triplet(i, i, d);
        }
        m.to_csc()
    };
    let factor = |m: &CsMat<f64>| {
        Ldl::new()
            .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
            .check_symmetry(SymmetryCheck::DontCheckSymmetry)
            .numeric(m.view())
            .map_err(|_| Error::Degenerate("heat-method system is singular".into()))
    };

    let heat = factor(&shifted(t, &mass))?;
    let mut spike = vec![0.0; n];
    for &s in sources {
        spike[s] = 1.0;
    }
    let u: Vec<f64> = heat.solve(&spike);

    let mut divergence = vec![0.0; n];
    for f in &faces {
        let (a, b, c) = (p[f[0]], p[f[1]], p[f[2]]);
        let normal = (b - a).cross(&(c - a));
        let double_area = normal.norm();
        if double_area == 0.0 {
            continue;
        }
        let nn = normal / double_area;
        let mut grad = Vec3::zeros();
        for k in 0..3 {
            let opposite = p[f[(k + 2) % 3]] - p[f[(k + 1) % 3]];
            grad += nn.cross(&opposite) * u[f[k]];
        }
        grad /= double_area;
        let len = grad.norm();
        if len == 0.0 {
            continue;
        }
        let field = -grad / len;
        for k in 0..3 {
            let (i, j, o) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let e1 = p[j] - p[i];
            let e2 = p[o] - p[i];
            let cot_o = cot(&(p[i] - p[o]), &(p[j] - p[o]));
            let cot_j = cot(&(p[i] - p[j]), &(p[o] - p[j]));
            divergence[i] += 0.5 * (cot_o * e1.dot(&field) + cot_j * e2.dot(&field));
        }
    }

    // Positive semidefinite operator: L phi = -div X.
    let reg: Vec<f64> = mass.iter().map(|m| 1e-10 * m).collect();
    let poisson = factor(&shifted(1.0, &reg))?;
    let rhs: Vec<f64> = divergence.iter().map(|d| -d).collect();
    let phi: Vec<f64> = poisson.solve(&rhs);

    let base = sources.iter().map(|&s| phi[s]).sum::<f64>() / sources.len() as f64;
    let reach = EdgeGraph::new(mesh, mask).distances_from(sources);
    let mut out: Vec<f64> = phi
        .iter()
        .zip(&reach)
        .map(|(&v, &r)| {
            if r.is_finite() {
                (v - base).max(0.0)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    for &s in sources {
        out[s] = 0.0;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct MaxEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for MaxEntry {}

impl Ord for MaxEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Largest distance first, then lowest index.
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for MaxEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy max-min sampling of `count` vertices among `candidates`, starting
/// from the `seed` set. The distance field is lowered incrementally after
/// each insertion. With an empty seed the lowest-index candidate goes first.
pub fn farthest_point_order(
    graph: &EdgeGraph,
    seed: &[usize],
    candidates: &[bool],
    count: usize,
) -> Result<Vec<usize>> {
    let n = graph.len();
    let mut selected = vec![false; n];
    for &s in seed {
        if s >= n {
            return Err(Error::IndexOutOfRange { index: s, len: n });
        }
        selected[s] = true;
    }
    let available = (0..n).filter(|&i| candidates[i] && !selected[i]).count();
    if count > available {
        return Err(Error::Parameter(format!(
            "cannot sample {count} vertices, only {available} available"
        )));
    }

    let mut dist = if seed.is_empty() {
        vec![f64::INFINITY; n]
    } else {
        graph.distances_from(seed)
    };
    let mut heap: BinaryHeap<MaxEntry> = (0..n)
        .filter(|&i| candidates[i] && !selected[i])
        .map(|i| MaxEntry {
            dist: dist[i],
            vertex: i,
        })
        .collect();

    let mut order = Vec::with_capacity(count);
    while order.len() < count {
        let entry = heap.pop().expect("enough candidates remain");
        let v = entry.vertex;
        if selected[v] || entry.dist != dist[v] {
            continue;
        }
        selected[v] = true;
        order.push(v);
        for w in graph.lower_from(&mut dist, v) {
            if candidates[w] && !selected[w] {
                heap.push(MaxEntry {
                    dist: dist[w],
                    vertex: w,
                });
            }
        }
    }
    Ok(order)
}

/// Farthest point sampling over all non-seed vertices of `mesh`.
pub fn farthest_point_sample(mesh: &Mesh, seed: &[usize], count: usize) -> Result<Vec<usize>> {
    let graph = EdgeGraph::new(mesh, None);
    let candidates = vec![true; mesh.n_vertices()];
    farthest_point_order(&graph, seed, &candidates, count)
}
