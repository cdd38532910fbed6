//! Proportional division of a target line by iterated dividing and
//! diffusing.
//!
//! This is the one-dimensional model of the surface algorithm. Each sweep
//! places every moving point so that it splits its two neighbours in the
//! template's ratio, then smooths the resulting offsets with a
//! `(1, 2, 1) / 4` stencil. The closed-form answer is available through
//! [`line_ground_truth`], which makes the 1D case a convenient oracle.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LineConfig {
    template: Vec<f64>,
    target: Vec<f64>,
    threshold: f64,
    max_iterations: usize,
}

impl LineConfig {
    /// Checks the template is strictly ascending with at least three points
    /// and that both lists agree in length. The threshold defaults to
    /// `1e-6 * |b_N - b_1|` and the iteration cap to 10 000.
    pub fn new(template: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if template.len() < 3 {
            return Err(Error::Parameter(format!(
                "a line needs at least 3 points, got {}",
                template.len()
            )));
        }
        if template.len() != target.len() {
            return Err(Error::Dimension {
                expected: template.len(),
                found: target.len(),
            });
        }
        if template.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Parameter(
                "template points must be strictly ascending".into(),
            ));
        }
        if target.iter().chain(&template).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("line points must be finite".into()));
        }
        let span = (target[target.len() - 1] - target[0]).abs();
        let threshold = if span > 0.0 { 1e-6 * span } else { 1e-12 };
        Ok(Self {
            template,
            target,
            threshold,
            max_iterations: 10_000,
        })
    }

    /// Template `{0, 3, 7, 10, 12}` with target initialized at `{0, 4, 6, 8, 9}`.
    pub fn table1() -> Self {
        Self::new(
            vec![0.0, 3.0, 7.0, 10.0, 12.0],
            vec![0.0, 4.0, 6.0, 8.0, 9.0],
        )
        .expect("preset is valid")
    }

    /// Same template with the target's second and third points swapped
    /// past each other.
    pub fn self_intersected() -> Self {
        Self::new(
            vec![0.0, 3.0, 7.0, 10.0, 12.0],
            vec![0.0, 5.5, 3.0, 8.0, 9.0],
        )
        .expect("preset is valid")
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::Parameter("threshold must be positive".into()));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Result<Self> {
        if max_iterations == 0 {
            return Err(Error::Parameter("max_iterations must be positive".into()));
        }
        self.max_iterations = max_iterations;
        Ok(self)
    }

    pub fn template(&self) -> &[f64] {
        &self.template
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }

    pub fn ground_truth(&self) -> Vec<f64> {
        let n = self.target.len();
        line_ground_truth(&self.template, self.target[0], self.target[n - 1])
            .expect("validated template")
    }
}

/// Position of the middle point that splits `[b_i, b_i2]` in the ratio of
/// `[a_i, a_i1]` to `[a_i1, a_i2]`. Works for reversed targets as well.
pub fn divide_point(a_i: f64, a_i1: f64, a_i2: f64, b_i: f64, b_i2: f64) -> Result<f64> {
    let span = a_i2 - a_i;
    if span == 0.0 {
        return Err(Error::Degenerate("template triplet has zero span".into()));
    }
    Ok(b_i + (b_i2 - b_i) * (a_i1 - a_i) / span)
}

/// Smooths interior offsets with the `(1, 2, 1) / 4` stencil, treating the
/// fixed endpoints as zero offsets.
pub fn diffuse_offsets(offsets: &[f64]) -> Vec<f64> {
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= offsets.len() {
            0.0
        } else {
            offsets[i as usize]
        }
    };
    (0..offsets.len() as isize)
        .map(|i| (at(i - 1) + 2.0 * at(i) + at(i + 1)) / 4.0)
        .collect()
}

/// Closed-form proportional division of `[b1, bn]` following the template.
pub fn line_ground_truth(template: &[f64], b1: f64, bn: f64) -> Result<Vec<f64>> {
    let (first, last) = match (template.first(), template.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::Empty("template")),
    };
    if last == first {
        return Err(Error::Degenerate("template has zero length".into()));
    }
    Ok(template
        .iter()
        .map(|&a| b1 + (bn - b1) * (a - first) / (last - first))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSnapshot {
    /// Sweep number in full mode; tier pass number in multi-resolution mode.
    pub iteration: usize,
    pub points: Vec<f64>,
    /// Sum of absolute diffused offsets of the last sweep (O_t).
    pub total_offset: f64,
    /// Sum of absolute interior deviations from the closed form (E_g).
    pub ground_truth_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineRun {
    pub snapshots: Vec<LineSnapshot>,
    pub converged: bool,
    /// Total number of divide/diffuse sweeps performed.
    pub sweeps: usize,
    /// Number of resolution tiers processed (1 in full mode).
    pub tier_passes: usize,
}

impl LineRun {
    pub fn final_points(&self) -> &[f64] {
        &self.snapshots.last().expect("at least one snapshot").points
    }
}

/// Binary-midpoint tiers of the interior index range `1..n-1`.
fn midpoint_tiers(n: usize) -> Vec<Vec<usize>> {
    let mut tiers = Vec::new();
    let mut intervals = vec![(0usize, n - 1)];
    loop {
        let mut tier = Vec::new();
        let mut next = Vec::new();
        for &(lo, hi) in &intervals {
            if hi - lo >= 2 {
                let mid = (lo + hi) / 2;
                tier.push(mid);
                next.push((lo, mid));
                next.push((mid, hi));
            }
        }
        if tier.is_empty() {
            break;
        }
        tiers.push(tier);
        intervals = next;
    }
    tiers
}

fn ground_truth_error(points: &[f64], truth: &[f64]) -> f64 {
    let n = points.len();
    (1..n - 1).map(|i| (points[i] - truth[i]).abs()).sum()
}

/// One divide + diffuse sweep over `moving` points, reading neighbours from
/// the `included` ordering. Returns the total absolute diffused offset.
fn sweep(template: &[f64], points: &mut [f64], included: &[usize], moving: &[bool]) -> Result<f64> {
    // Jacobi: every division reads the previous iterate.
    let mut raw = vec![0.0; included.len()];
    for k in 1..included.len() - 1 {
        let (l, i, r) = (included[k - 1], included[k], included[k + 1]);
        if moving[i] {
            raw[k] = divide_point(template[l], template[i], template[r], points[l], points[r])?
                - points[i];
        }
    }
    let mut total = 0.0;
    for k in 1..included.len() - 1 {
        let i = included[k];
        if moving[i] {
            let diffused = (raw[k - 1] + 2.0 * raw[k] + raw[k + 1]) / 4.0;
            points[i] += diffused;
            total += diffused.abs();
        }
    }
    Ok(total)
}

/// Runs the iterative segmentation.
///
/// With `multi_resolution`, interior points are unlocked in binary-midpoint
/// tiers; each tier is iterated to the threshold with all previously placed
/// points held, and one snapshot is recorded per tier.
pub fn segment_line(config: &LineConfig, multi_resolution: bool) -> Result<LineRun> {
    let template = &config.template;
    let n = template.len();
    let truth = config.ground_truth();
    let mut points = config.target.clone();

    let mut snapshots = vec![LineSnapshot {
        iteration: 0,
        points: points.clone(),
        total_offset: 0.0,
        ground_truth_error: ground_truth_error(&points, &truth),
    }];

    let tiers = if multi_resolution {
        midpoint_tiers(n)
    } else {
        vec![(1..n - 1).collect()]
    };

    let mut included_mask = vec![false; n];
    included_mask[0] = true;
    included_mask[n - 1] = true;
    let mut sweeps = 0;
    let mut converged = true;

    for (tier_index, tier) in tiers.iter().enumerate() {
        let mut moving = vec![false; n];
        for &i in tier {
            moving[i] = true;
            included_mask[i] = true;
        }
        let included: Vec<usize> = (0..n).filter(|&i| included_mask[i]).collect();

        let mut tier_converged = false;
        let mut last_offset = 0.0;
        for _ in 0..config.max_iterations {
            last_offset = sweep(template, &mut points, &included, &moving)?;
            sweeps += 1;
            if !multi_resolution {
                snapshots.push(LineSnapshot {
                    iteration: sweeps,
                    points: points.clone(),
                    total_offset: last_offset,
                    ground_truth_error: ground_truth_error(&points, &truth),
                });
            }
            if last_offset < config.threshold {
                tier_converged = true;
                break;
            }
        }
        converged &= tier_converged;
        if multi_resolution {
            snapshots.push(LineSnapshot {
                iteration: tier_index + 1,
                points: points.clone(),
                total_offset: last_offset,
                ground_truth_error: ground_truth_error(&points, &truth),
            });
        }
    }

    Ok(LineRun {
        snapshots,
        converged,
        sweeps,
        tier_passes: tiers.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRUTH: [f64; 5] = [0.0, 2.25, 5.25, 7.5, 9.0];

    #[test]
    fn divide_point_examples() {
        assert_eq!(divide_point(0.0, 3.0, 7.0, 0.0, 7.0).unwrap(), 3.0);
        assert_eq!(divide_point(0.0, 3.0, 7.0, 0.0, 14.0).unwrap(), 6.0);
        assert!((divide_point(3.0, 7.0, 10.0, 2.25, 7.5).unwrap() - 5.25).abs() < 1e-15);
        // Reversed target keeps the sign.
        assert_eq!(divide_point(0.0, 1.0, 2.0, 4.0, 0.0).unwrap(), 2.0);
        assert!(matches!(
            divide_point(1.0, 1.0, 1.0, 0.0, 1.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn diffuse_examples() {
        assert_eq!(diffuse_offsets(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(diffuse_offsets(&[0.0, 4.0, 0.0]), vec![1.0, 2.0, 1.0]);
        // Hand substitution of the stencil.
        let out = diffuse_offsets(&[-0.64, -0.26, -0.03]);
        let expected = [
            (0.0 + 2.0 * -0.64 + -0.26) / 4.0,
            (-0.64 + 2.0 * -0.26 + -0.03) / 4.0,
            (-0.26 + 2.0 * -0.03 + 0.0) / 4.0,
        ];
        for (a, b) in out.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((out[0] - -0.385).abs() < 1e-12);
        assert!((out[1] - -0.2975).abs() < 1e-12);
        assert!((out[2] - -0.08).abs() < 1e-12);
    }

    #[test]
    fn ground_truth_examples() {
        let gt = line_ground_truth(&[0.0, 3.0, 7.0, 10.0, 12.0], 0.0, 9.0).unwrap();
        for (a, b) in gt.iter().zip(TRUTH) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(
            line_ground_truth(&[0.0, 1.0, 2.0], 0.0, 2.0).unwrap(),
            vec![0.0, 1.0, 2.0]
        );
        assert_eq!(
            line_ground_truth(&[0.0, 1.0, 4.0], 10.0, 18.0).unwrap(),
            vec![10.0, 12.0, 18.0]
        );
        assert!(line_ground_truth(&[1.0, 1.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(LineConfig::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(LineConfig::new(vec![0.0, 2.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
        assert!(LineConfig::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0]).is_err());
        assert!(LineConfig::table1().with_threshold(0.0).is_err());
        assert!(LineConfig::table1().with_max_iterations(0).is_err());
    }

    #[test]
    fn table1_intermediate_rows() {
        // Expected rows, rounded to two decimals.
        let run = segment_line(&LineConfig::table1(), false).unwrap();
        let rows: [(usize, [f64; 5]); 5] = [
            (1, [0.0, 3.36, 5.74, 7.97, 9.0]),
            (2, [0.0, 2.97, 5.57, 7.90, 9.0]),
            (5, [0.0, 2.48, 5.35, 7.69, 9.0]),
            (10, [0.0, 2.29, 5.27, 7.54, 9.0]),
            (18, [0.0, 2.25, 5.25, 7.50, 9.0]),
        ];
        for (iteration, expected) in rows {
            let snap = &run.snapshots[iteration];
            assert_eq!(snap.iteration, iteration);
            for (a, b) in snap.points.iter().zip(expected) {
                assert!(
                    (a - b).abs() < 0.005 + 1e-12,
                    "iteration {iteration}: {a} vs {b}"
                );
            }
        }
        assert!(run.converged);
    }

    #[test]
    fn table1_multi_resolution_rows() {
        let run = segment_line(&LineConfig::table1(), true).unwrap();
        assert_eq!(run.tier_passes, 2);
        assert_eq!(run.snapshots.len(), 3);
        let first = &run.snapshots[1].points;
        assert_eq!(first[1], 4.0);
        assert_eq!(first[3], 8.0);
        assert!((first[2] - 5.25).abs() < 1e-5);
        for (a, b) in run.final_points().iter().zip(TRUTH) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn total_offset_decays_after_third_iteration() {
        let run = segment_line(&LineConfig::table1(), false).unwrap();
        for w in run.snapshots[3..].windows(2) {
            assert!(w[1].total_offset <= w[0].total_offset);
        }
    }

    #[test]
    fn endpoints_never_move() {
        for mr in [false, true] {
            let run = segment_line(&LineConfig::self_intersected(), mr).unwrap();
            for snap in &run.snapshots {
                assert_eq!(snap.points[0], 0.0);
                assert_eq!(snap.points[4], 9.0);
            }
        }
    }

    #[test]
    fn midpoint_tiers_cover_interior_once() {
        for n in 3..40 {
            let tiers = midpoint_tiers(n);
            let mut all: Vec<usize> = tiers.concat();
            all.sort_unstable();
            assert_eq!(all, (1..n - 1).collect::<Vec<_>>());
        }
        assert_eq!(midpoint_tiers(5), vec![vec![2], vec![1, 3]]);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let config = LineConfig::table1().with_max_iterations(3).unwrap();
        let run = segment_line(&config, false).unwrap();
        assert!(!run.converged);
        assert_eq!(run.sweeps, 3);
    }
}
