//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use meshdiff::{Mesh, Vec3};
use nalgebra::{DMatrix, DVector, Rotation3};

/// Sum of squared residuals of the best translation for a fixed rotation.
pub fn residual_for_rotation(rotation: &Rotation3<f64>, source: &[Vec3], dest: &[Vec3]) -> f64 {
    let n = source.len() as f64;
    let cs = source.iter().sum::<Vec3>() / n;
    let cd = dest.iter().sum::<Vec3>() / n;
    source
        .iter()
        .zip(dest)
        .map(|(s, d)| (rotation * (s - cs) - (d - cd)).norm_squared())
        .sum()
}

fn euler(a: f64, b: f64, c: f64) -> Rotation3<f64> {
    Rotation3::from_euler_angles(a, b, c)
}

/// Minimum rigid residual found by a dense grid over Euler angles followed
/// by a shrinking pattern search around the best grid points.
pub fn rotation_grid_search(source: &[Vec3], dest: &[Vec3]) -> f64 {
    use std::f64::consts::PI;
    let steps = 24;
    let mut candidates: Vec<(f64, [f64; 3])> = Vec::new();
    for i in 0..steps {
        for j in 0..=steps / 2 {
            for k in 0..steps {
                let angles = [
                    -PI + 2.0 * PI * i as f64 / steps as f64,
                    -PI / 2.0 + PI * j as f64 / (steps / 2) as f64,
                    -PI + 2.0 * PI * k as f64 / steps as f64,
                ];
                let r =
                    residual_for_rotation(&euler(angles[0], angles[1], angles[2]), source, dest);
                candidates.push((r, angles));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = f64::INFINITY;
    for &(r0, start) in candidates.iter().take(8) {
        let mut x = start;
        let mut fx = r0;
        let mut step = 2.0 * PI / steps as f64;
        while step > 1e-9 {
            let mut improved = false;
            for axis in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut y = x;
                    y[axis] += sign * step;
                    let fy = residual_for_rotation(&euler(y[0], y[1], y[2]), source, dest);
                    if fy < fx {
                        x = y;
                        fx = fy;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.min(fx);
    }
    best
}

/// Dense coefficient matrix `B = I + A` with `B_ii = 1 + lambda_i N_i` and
/// `B_ij = -lambda_i` for each neighbour.
pub fn dense_coefficient(lists: &[Vec<usize>], lambda: &[f64]) -> DMatrix<f64> {
    let n = lists.len();
    let mut b = DMatrix::identity(n, n);
    for (i, list) in lists.iter().enumerate() {
        b[(i, i)] += lambda[i] * list.len() as f64;
        for &j in list {
            b[(i, j)] -= lambda[i];
        }
    }
    b
}

/// Least-squares solution of `B_f O = C` (fixed columns removed) through an
/// SVD, one column per axis. Returns offsets for the free vertices in
/// ascending index order.
pub fn dense_least_squares(
    lists: &[Vec<usize>],
    lambda: &[f64],
    fixed: &[bool],
    rhs: &[Vec3],
) -> Vec<Vec3> {
    let b = dense_coefficient(lists, lambda);
    let free: Vec<usize> = (0..lists.len()).filter(|&i| !fixed[i]).collect();
    let bf = DMatrix::from_fn(lists.len(), free.len(), |r, c| b[(r, free[c])]);
    let svd = bf.svd(true, true);
    let mut out = vec![Vec3::zeros(); free.len()];
    for axis in 0..3 {
        let c = DVector::from_iterator(rhs.len(), rhs.iter().map(|v| v[axis]));
        let x = svd.solve(&c, 1e-14).expect("svd solve");
        for (o, v) in out.iter_mut().zip(x.iter()) {
            o[axis] = *v;
        }
    }
    out
}

fn closest_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    a + ab * t
}

/// Point-to-triangle distance: plane projection when the foot lies inside,
/// otherwise the nearest of the three edges.
pub fn point_triangle_distance(p: &Vec3, tri: &[Vec3; 3]) -> f64 {
    let [a, b, c] = tri;
    let n = (b - a).cross(&(c - a));
    let foot = p - n * (p - a).dot(&n) / n.norm_squared();
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|(u, v)| (*v - *u).cross(&(foot - *u)).dot(&n) >= 0.0);
    if inside {
        return (p - foot).norm();
    }
    [(a, b), (b, c), (c, a)]
        .iter()
        .map(|(u, v)| (p - closest_on_segment(p, u, v)).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Distance from `p` to the surface by scanning every triangle.
pub fn brute_force_distance(mesh: &Mesh, p: &Vec3) -> f64 {
    (0..mesh.n_faces())
        .map(|f| point_triangle_distance(p, &mesh.triangle(f)))
        .fold(f64::INFINITY, f64::min)
}

/// Random symmetric graph on `n` vertices with edge probability `p`.
pub fn random_graph(rng: &mut impl rand::Rng, n: usize, p: f64) -> Vec<Vec<usize>> {
    let mut lists = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                lists[i].push(j);
                lists[j].push(i);
            }
        }
    }
    lists
}

/// Per-edge `log(e_mesh / e_reference)` computed from raw coordinates.
pub fn brute_embedding(mesh: &Mesh, reference: &Mesh) -> Vec<f64> {
    mesh.edges()
        .iter()
        .map(|&[a, b]| {
            let e = (mesh.vertex(a) - mesh.vertex(b)).norm();
            let e0 = (reference.vertex(a) - reference.vertex(b)).norm();
            (e / e0).ln()
        })
        .collect()
}

/// `(1/m) sum w_i |log(e1_i / e2_i)|` from raw coordinates, weights from
/// the reference.
pub fn brute_global_distance(t1: &Mesh, t2: &Mesh, reference: &Mesh) -> f64 {
    let m = reference.n_edges();
    let sq: Vec<f64> = reference
        .edges()
        .iter()
        .map(|&[a, b]| (reference.vertex(a) - reference.vertex(b)).norm_squared())
        .collect();
    let total: f64 = sq.iter().sum();
    reference
        .edges()
        .iter()
        .zip(&sq)
        .map(|(&[a, b], s)| {
            let e1 = (t1.vertex(a) - t1.vertex(b)).norm();
            let e2 = (t2.vertex(a) - t2.vertex(b)).norm();
            s / total * (e1 / e2).ln().abs()
        })
        .sum::<f64>()
        / m as f64
}
