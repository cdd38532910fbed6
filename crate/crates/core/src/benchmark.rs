//! Synthetic registration problems with known answers.

use crate::classify::{classify_vertices, VertexClassification};
use crate::mesh::{CorrespondedPair, Vec3};
use crate::spatial::AabbTree;
use crate::synth;

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub pair: CorrespondedPair,
    pub classification: VertexClassification,
    /// Exact refined positions where a closed form exists.
    pub expected: Option<Vec<Vec3>>,
}

/// Monotone warp of `[0, 1]` onto itself that keeps both ends in place.
/// Strictly monotone for `|amount| < 1`.
pub fn warp(u: f64, amount: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    u + amount * (tau * u).sin() / tau
}

/// A unit-spaced `n` × `n` template grid, a target plane stretched by 2
/// with interior vertices warped away from their proportional positions,
/// and the stretched plane as raw surface. The boundary is fixed, so the
/// exact answer is twice the template coordinates.
pub fn stretched_grid(n: usize, warp_amount: f64) -> Benchmark {
    let template = synth::grid(n, n, 1.0);
    let raw = synth::scaled(&template, 2.0);
    let side = (n - 1) as f64;
    let target: Vec<Vec3> = template
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if template.is_boundary_vertex(i) {
                return 2.0 * p;
            }
            let x = warp(p.x / side, warp_amount) * side;
            let y = warp(p.y / side, -0.5 * warp_amount) * side;
            Vec3::new(2.0 * x, 2.0 * y, 0.0)
        })
        .collect();
    let classification = classify_vertices(&template, &[], &[]).expect("grid classification");
    Benchmark {
        pair: CorrespondedPair::new(
            template.clone(),
            template.with_vertices(target).unwrap(),
            raw.clone(),
        )
        .expect("same topology"),
        classification,
        expected: Some(raw.vertices().to_vec()),
    }
}

/// Profile of the synthetic target face: wider and with a taller ridge than
/// the template.
pub fn target_face_profile(x: f64, y: f64) -> f64 {
    1.3 * synth::face_profile(x / 1.2, y) + 0.03 * (3.0 * y).sin()
}

/// Template is an `n` × `n` face height field over the unit square. The raw
/// surface is a different face over `[0, 1.2] × [0, 1]` sampled at
/// `raw_resolution`. The initial target maps template vertices through a
/// warped parameterization and projects them onto the raw surface; the
/// boundary and a nose landmark are mapped proportionally and fixed.
pub fn synthetic_face(n: usize, raw_resolution: usize, warp_amount: f64) -> Benchmark {
    let template = synth::height_field(n, n, 1.0, 1.0, synth::face_profile);
    let raw = synth::height_field(
        raw_resolution,
        raw_resolution,
        1.2,
        1.0,
        target_face_profile,
    );
    let tree = AabbTree::build(&raw).expect("raw face is non-empty");

    let nose = (n / 2) * n + n / 2;
    let classification = classify_vertices(&template, &[nose], &[]).expect("face classification");
    let target: Vec<Vec3> = template
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let proportional = template.is_boundary_vertex(i) || i == nose;
            let (u, v) = if proportional {
                (p.x, p.y)
            } else {
                (warp(p.x, warp_amount), warp(p.y, -0.6 * warp_amount))
            };
            let (x, y) = (1.2 * u, v);
            tree.closest_point(&Vec3::new(x, y, target_face_profile(x, y)))
                .point
        })
        .collect();
    Benchmark {
        pair: CorrespondedPair::new(
            template.clone(),
            template.with_vertices(target).unwrap(),
            raw,
        )
        .expect("same topology"),
        classification,
        expected: None,
    }
}
