//! Local rigid alignment of 1-ring neighborhoods.
//!
//! [`fit_rigid`] solves the orthogonal Procrustes problem with the usual
//! centroid / cross-covariance / SVD construction. [`dividing_step`] runs
//! it for every active vertex, mapping the template neighborhood onto the
//! target neighborhood and predicting where the center vertex should sit.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{NeighborGraph, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Sum of squared distances between transformed sources and targets.
    pub fn residual(&self, source: &[Vec3], dest: &[Vec3]) -> f64 {
        source
            .iter()
            .zip(dest)
            .map(|(s, d)| (self.apply(s) - d).norm_squared())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidFit {
    pub transform: RigidTransform,
    /// Source points are (numerically) collinear; rotation about their line
    /// is not determined by the data.
    pub degenerate: bool,
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

/// Column `k` is flipped together in `u` and `v` when the largest-magnitude
/// entry of `u`'s column is negative. The product `u * diag * v^T` is
/// unchanged.
fn canonicalize_signs(u: &mut Matrix3<f64>, v: &mut Matrix3<f64>) {
    for k in 0..3 {
        let col = u.column(k);
        let mut pivot = 0;
        for r in 1..3 {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        if col[pivot] < 0.0 {
            u.column_mut(k).neg_mut();
            v.column_mut(k).neg_mut();
        }
    }
}

/// Least-squares rotation and translation taking `source` onto `dest`.
pub fn fit_rigid(source: &[Vec3], dest: &[Vec3]) -> Result<RigidFit> {
    if source.len() != dest.len() {
        return Err(Error::Dimension {
            expected: source.len(),
            found: dest.len(),
        });
    }
    if source.len() < 3 {
        return Err(Error::Underdetermined(source.len()));
    }

    let cs = centroid(source);
    let cd = centroid(dest);
    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for (s, d) in source.iter().zip(dest) {
        let ds = s - cs;
        cross += ds * (d - cd).transpose();
        scatter += ds * ds.transpose();
    }

    let mut eig = SymmetricEigen::new(scatter).eigenvalues.as_slice().to_vec();
    eig.sort_by(|a, b| b.total_cmp(a));
    let degenerate = eig[0] <= 0.0 || eig[1] <= 1e-12 * eig[0];

    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut u_sorted = Matrix3::zeros();
    let mut v_sorted = Matrix3::zeros();
    let v = v_t.transpose();
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v.column(src));
    }
    canonicalize_signs(&mut u_sorted, &mut v_sorted);

    if (v_sorted * u_sorted.transpose()).determinant() < 0.0 {
        v_sorted.column_mut(2).neg_mut();
    }
    let rotation = v_sorted * u_sorted.transpose();
    let translation = cd - rotation * cs;
    Ok(RigidFit {
        transform: RigidTransform {
            rotation,
            translation,
        },
        degenerate,
    })
}

/// Output of the dividing step, indexed by mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct PreliminaryOffsets {
    /// `p_i - v_i` for active vertices, zero elsewhere.
    pub offsets: Vec<Vec3>,
    /// Predicted positions `R_i v_i^s + T_i`; equal to the current target
    /// position where no fit was made.
    pub predicted: Vec<Vec3>,
    /// Active vertices with fewer than three neighbours; their offset is 0.
    pub flagged: Vec<usize>,
}

/// Fits each active vertex's neighborhood from template to target and
/// records the offset of the predicted center from the current target.
///
/// The fit uses the neighbours only, never the center vertex itself.
pub fn dividing_step(
    template: &[Vec3],
    target: &[Vec3],
    active: &[usize],
    graph: &NeighborGraph,
) -> Result<PreliminaryOffsets> {
    let n = template.len();
    if target.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: target.len(),
        });
    }
    if graph.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: graph.len(),
        });
    }
    if let Some(&bad) = active.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }

    let fits: Vec<Option<Vec3>> = active
        .par_iter()
        .map(|&i| {
            let ring = graph.neighbors(i);
            if ring.len() < 3 {
                return None;
            }
            let src: Vec<Vec3> = ring.iter().map(|&j| template[j]).collect();
            let dst: Vec<Vec3> = ring.iter().map(|&j| target[j]).collect();
            fit_rigid(&src, &dst)
                .ok()
                .map(|fit| fit.transform.apply(&template[i]))
        })
        .collect();

    let mut offsets = vec![Vec3::zeros(); n];
    let mut predicted = target.to_vec();
    let mut flagged = Vec::new();
    for (&i, fit) in active.iter().zip(fits) {
        match fit {
            Some(p) => {
                predicted[i] = p;
                offsets[i] = p - target[i];
            }
            None => flagged.push(i),
        }
    }
    Ok(PreliminaryOffsets {
        offsets,
        predicted,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn tetra_points() -> Vec<Vec3> {
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.2, 0.0),
            Vec3::new(0.1, 1.3, 0.0),
            Vec3::new(0.3, 0.4, 0.9),
        ]
    }

    #[test]
    fn identity_fit() {
        let p = tetra_points();
        let fit = fit_rigid(&p, &p).unwrap();
        assert!((fit.transform.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(fit.transform.translation.norm() < 1e-12);
        assert!(!fit.degenerate);
    }

    #[test]
    fn recovers_known_motion() {
        let p = tetra_points();
        let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), std::f64::consts::FRAC_PI_2);
        let t = Vec3::new(1.0, 2.0, 3.0);
        let q: Vec<Vec3> = p.iter().map(|x| rot * x + t).collect();
        let fit = fit_rigid(&p, &q).unwrap();
        assert!((fit.transform.rotation - rot.matrix()).norm() < 1e-10);
        assert!((fit.transform.translation - t).norm() < 1e-10);
    }

    #[test]
    fn mirrored_input_yields_proper_rotation() {
        let p = tetra_points();
        let q: Vec<Vec3> = p.iter().map(|x| Vec3::new(x.x, x.y, -x.z)).collect();
        let fit = fit_rigid(&p, &q).unwrap();
        let r = fit.transform.rotation;
        assert!((r.determinant() - 1.0).abs() < 1e-10);
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-10);
    }

    #[test]
    fn too_few_points() {
        let p = vec![Vec3::zeros(), Vec3::x()];
        assert!(matches!(fit_rigid(&p, &p), Err(Error::Underdetermined(2))));
    }

    #[test]
    fn collinear_points_flagged_but_deterministic() {
        let p: Vec<Vec3> = (0..4).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let q: Vec<Vec3> = p.iter().map(|x| x + Vec3::new(0.0, 1.0, 0.0)).collect();
        let a = fit_rigid(&p, &q).unwrap();
        let b = fit_rigid(&p, &q).unwrap();
        assert!(a.degenerate);
        assert_eq!(a, b);
        assert!(a.transform.residual(&p, &q) < 1e-20);
    }

    #[test]
    fn residual_not_worse_than_identity() {
        let p = tetra_points();
        let q: Vec<Vec3> = p
            .iter()
            .enumerate()
            .map(|(i, x)| x * 1.3 + Vec3::new(0.1 * i as f64, -0.2, 0.05))
            .collect();
        let fit = fit_rigid(&p, &q).unwrap();
        assert!(fit.transform.residual(&p, &q) <= RigidTransform::identity().residual(&p, &q));
    }

    fn star() -> (Vec<Vec3>, NeighborGraph) {
        let mut pts = vec![Vec3::zeros()];
        for k in 0..5 {
            let a = k as f64 * 2.0 * std::f64::consts::PI / 5.0;
            pts.push(Vec3::new(a.cos(), a.sin(), 0.0));
        }
        let mut lists = vec![vec![1, 2, 3, 4, 5]];
        for k in 1..=5 {
            lists.push(vec![
                0,
                if k == 5 { 1 } else { k + 1 },
                if k == 1 { 5 } else { k - 1 },
            ]);
        }
        (pts, NeighborGraph::from_lists(lists).unwrap())
    }

    #[test]
    fn tangential_center_displacement_is_undone() {
        let (template, graph) = star();
        let d = Vec3::new(0.07, -0.03, 0.0);
        let mut target = template.clone();
        target[0] += d;
        let out = dividing_step(&template, &target, &[0], &graph).unwrap();
        assert!((out.offsets[0] + d).norm() < 1e-10);
    }

    #[test]
    fn identical_meshes_give_zero_offsets() {
        let (template, graph) = star();
        let all: Vec<usize> = (0..6).collect();
        let out = dividing_step(&template, &template, &all, &graph).unwrap();
        assert!(out.offsets.iter().all(|o| o.norm() < 1e-12));
        assert!(out.flagged.is_empty());
    }

    #[test]
    fn low_valence_vertices_are_flagged() {
        let template = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let graph = NeighborGraph::from_lists(vec![vec![1, 2], vec![0, 2], vec![0, 1]]).unwrap();
        let out = dividing_step(&template, &template, &[0, 1, 2], &graph).unwrap();
        assert_eq!(out.flagged, vec![0, 1, 2]);
        assert!(out.offsets.iter().all(|o| *o == Vec3::zeros()));
    }
}
