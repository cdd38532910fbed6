//! Axis-aligned bounding-box tree for exact closest-point queries on a
//! triangle surface.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};

const LEAF_CAPACITY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn of_triangle(tri: &[Vec3; 3]) -> Self {
        Self {
            min: tri[0].inf(&tri[1]).inf(&tri[2]),
            max: tri[0].sup(&tri[1]).sup(&tri[2]),
        }
    }

    fn merge(&self, other: &Aabb) -> Self {
        Self {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }

    fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let excess = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d += excess * excess;
        }
        d
    }

    fn longest_axis(&self) -> usize {
        let e = self.max - self.min;
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    /// Range into the tree's permuted triangle list.
    Leaf {
        start: usize,
        end: usize,
    },
    Inner {
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Closest point on a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub point: Vec3,
    pub triangle: usize,
    pub distance: f64,
}

/// Bounding volume hierarchy over a mesh's triangles.
#[derive(Debug, Clone)]
pub struct AabbTree {
    nodes: Vec<Node>,
    triangles: Vec<usize>,
    corners: Vec<[Vec3; 3]>,
}

impl AabbTree {
    /// Median split on the longest axis of each node's box.
    pub fn build(surface: &Mesh) -> Result<Self> {
        if surface.n_faces() == 0 {
            return Err(Error::Empty("surface has no triangles"));
        }
        let corners: Vec<[Vec3; 3]> = (0..surface.n_faces())
            .map(|f| surface.triangle(f))
            .collect();
        let boxes: Vec<Aabb> = corners.iter().map(Aabb::of_triangle).collect();
        let centroids: Vec<Vec3> = corners.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();

        let mut tree = Self {
            nodes: Vec::with_capacity(2 * surface.n_faces() / LEAF_CAPACITY + 1),
            triangles: (0..surface.n_faces()).collect(),
            corners,
        };
        tree.build_node(0, surface.n_faces(), &boxes, &centroids);
        Ok(tree)
    }

    fn build_node(
        &mut self,
        start: usize,
        end: usize,
        boxes: &[Aabb],
        centroids: &[Vec3],
    ) -> usize {
        let bounds = self.triangles[start..end]
            .iter()
            .fold(Aabb::empty(), |acc, &t| acc.merge(&boxes[t]));
        let index = self.nodes.len();
        self.nodes.push(Node {
            bounds,
            kind: NodeKind::Leaf { start, end },
        });
        if end - start <= LEAF_CAPACITY {
            return index;
        }

        let axis = bounds.longest_axis();
        let mid = start + (end - start) / 2;
        self.triangles[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis]
                .total_cmp(&centroids[b][axis])
                .then(a.cmp(&b))
        });
        let left = self.build_node(start, mid, boxes, centroids);
        let right = self.build_node(mid, end, boxes, centroids);
        self.nodes[index].kind = NodeKind::Inner { left, right };
        index
    }

    pub fn root_bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Triangle indices grouped by leaf, in depth-first order.
    pub fn leaves(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            match self.nodes[i].kind {
                NodeKind::Leaf { start, end } => out.push(self.triangles[start..end].to_vec()),
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// Checks that every node box contains its children and triangles.
    pub fn is_well_formed(&self) -> bool {
        self.nodes.iter().all(|node| match node.kind {
            NodeKind::Leaf { start, end } => self.triangles[start..end]
                .iter()
                .all(|&t| node.bounds.contains(&Aabb::of_triangle(&self.corners[t]))),
            NodeKind::Inner { left, right } => {
                node.bounds.contains(&self.nodes[left].bounds)
                    && node.bounds.contains(&self.nodes[right].bounds)
            }
        })
    }

    /// Exact closest point over all triangles. Ties go to the lowest
    /// triangle index.
    pub fn closest_point(&self, query: &Vec3) -> ClosestPoint {
        let mut best = (f64::INFINITY, usize::MAX, Vec3::zeros());
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bounds.distance_squared(query) > best.0 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &t in &self.triangles[start..end] {
                        let p = closest_on_triangle(query, &self.corners[t]);
                        let d = (p - query).norm_squared();
                        if d < best.0 || (d == best.0 && t < best.1) {
                            best = (d, t, p);
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared(query);
                    let dr = self.nodes[right].bounds.distance_squared(query);
                    // Visit the nearer child first.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        ClosestPoint {
            point: best.2,
            triangle: best.1,
            distance: best.0.sqrt(),
        }
    }
}

/// Closest point on triangle `tri` to `p`, by Voronoi-region
/// classification of the query against vertices, edges and the face.
pub fn closest_on_triangle(p: &Vec3, tri: &[Vec3; 3]) -> Vec3 {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
