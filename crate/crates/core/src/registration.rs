//! Iterative dividing and diffusing on a surface.
//!
//! Each iteration fits every active vertex's neighbourhood rigidly from the
//! template to the current target, diffuses the resulting offsets with the
//! prefactorized system, moves the free vertices and projects them back onto
//! the raw target surface. Iteration stops once the mean displacement of the
//! free vertices drops below `epsilon` times the template mean edge length.
//!
//! In multi-resolution mode the same loop runs once per pyramid level, from
//! the coarsest to the full-resolution level.

use std::time::Instant;

use rayon::prelude::*;

use crate::classify::{VertexClass, VertexClassification};
use crate::diffuse::{assign_lambda, DiffusionSystem, LambdaParams};
use crate::error::{Error, Result};
use crate::geodesic::{geodesic_field_with, GeodesicBackend};
use crate::mesh::{CorrespondedPair, Mesh, NeighborGraph, Vec3};
use crate::pyramid::{build_pyramid, ResolutionPyramid};
use crate::rigid::dividing_step;
use crate::spatial::AabbTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Full,
    MultiRes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationConfig {
    /// Convergence threshold on the mean offset, as a fraction of the
    /// template mean edge length.
    pub epsilon: f64,
    /// Iteration cap for each level.
    pub max_iterations: usize,
    pub mode: Mode,
    pub lambda: LambdaParams,
    /// Number of decimated pyramid levels in multi-resolution mode.
    pub levels: usize,
    /// When set, the dividing-step offsets of fixed vertices enter the
    /// diffusion right-hand side. By default their rows are kept in the
    /// system with a zero offset, which anchors neighbouring free vertices
    /// to the fixed positions.
    pub fixed_reaction: bool,
    /// Backend for the distance-to-fixed field that shapes lambda.
    pub geodesic: GeodesicBackend,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.001,
            max_iterations: 1000,
            mode: Mode::Full,
            lambda: LambdaParams::default(),
            levels: 4,
            fixed_reaction: false,
            geodesic: GeodesicBackend::Graph,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Parameter("max_iterations must be >= 1".into()));
        }
        if self.mode == Mode::MultiRes && self.levels == 0 {
            return Err(Error::Parameter("pyramid levels must be >= 1".into()));
        }
        self.lambda.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub level: usize,
    /// 1-based within the level.
    pub iteration: usize,
    /// Mean displacement of the level's free vertices, in mesh units.
    pub mean_offset: f64,
    /// Wall time since the start of the run.
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub free_count: usize,
    pub iterations: usize,
    pub status: Status,
    /// Vertices passed to the dividing step over all iterations.
    pub dividing_visits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationTrace {
    pub records: Vec<IterationRecord>,
    pub levels: Vec<LevelSummary>,
    /// `Converged` only if every level converged.
    pub status: Status,
    /// The absolute threshold `epsilon * h` that was applied.
    pub threshold: f64,
    pub elapsed_ms: f64,
}

impl RegistrationTrace {
    pub fn dividing_visits(&self) -> usize {
        self.levels.iter().map(|l| l.dividing_visits).sum()
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_mean_offset(&self) -> Option<f64> {
        self.records.last().map(|r| r.mean_offset)
    }
}

#[derive(Debug)]
struct Stage {
    level: usize,
    free: Vec<usize>,
    /// Vertices whose offsets are computed in the dividing step.
    active: Vec<usize>,
    graph: NeighborGraph,
    system: DiffusionSystem,
}

/// Everything that depends only on the template and its classification:
/// lambda weights, neighbour graphs and factorized systems for every stage.
/// Shareable across threads to refine many targets.
#[derive(Debug)]
pub struct TemplateModel {
    template: Mesh,
    classification: VertexClassification,
    config: RegistrationConfig,
    mean_edge_length: f64,
    stages: Vec<Stage>,
}

impl TemplateModel {
    /// Builds the model, constructing a pyramid if the mode needs one.
    pub fn new(
        template: &Mesh,
        classification: &VertexClassification,
        config: &RegistrationConfig,
    ) -> Result<Self> {
        let pyramid = match config.mode {
            Mode::Full => None,
            Mode::MultiRes => Some(build_pyramid(template, classification, config.levels)?),
        };
        Self::build(template, classification, config, pyramid.as_ref())
    }

    /// Uses a previously built pyramid in multi-resolution mode.
    pub fn with_pyramid(
        template: &Mesh,
        classification: &VertexClassification,
        config: &RegistrationConfig,
        pyramid: &ResolutionPyramid,
    ) -> Result<Self> {
        if pyramid.fingerprint != crate::pyramid::fingerprint(template, classification) {
            return Err(Error::Parameter(
                "pyramid was built for a different template or classification".into(),
            ));
        }
        let pyramid = (config.mode == Mode::MultiRes).then_some(pyramid);
        Self::build(template, classification, config, pyramid)
    }

    fn build(
        template: &Mesh,
        classification: &VertexClassification,
        config: &RegistrationConfig,
        pyramid: Option<&ResolutionPyramid>,
    ) -> Result<Self> {
        config.validate()?;
        let n = template.n_vertices();
        if classification.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: classification.len(),
            });
        }
        let h = template.mean_edge_length();
        if !(h > 0.0) {
            return Err(Error::Degenerate(
                "template has zero mean edge length".into(),
            ));
        }

        let interested = classification.interested_mask();
        let fixed = classification.fixed_vertices();
        let distance = if fixed.is_empty() {
            vec![f64::INFINITY; n]
        } else {
            geodesic_field_with(template, &fixed, config.geodesic, Some(&interested))?.distances
        };
        let classification = assign_lambda(template, classification, &distance, &config.lambda)?;

        let mut stages = Vec::new();
        match pyramid {
            None => {
                let graph = template.neighbor_graph().restrict(&interested);
                let is_fixed: Vec<bool> = classification
                    .classes()
                    .iter()
                    .map(|&c| c == VertexClass::Fixed)
                    .collect();
                stages.push(Self::stage(
                    0,
                    classification.free_vertices(),
                    fixed,
                    graph,
                    &is_fixed,
                    &classification,
                    config,
                )?);
            }
            Some(p) => {
                for (level, l) in p.levels.iter().enumerate() {
                    if l.free.is_empty() {
                        continue;
                    }
                    let mut is_fixed = vec![false; n];
                    for &i in &l.fixed {
                        is_fixed[i] = true;
                    }
                    stages.push(Self::stage(
                        level,
                        l.free.clone(),
                        l.fixed.clone(),
                        l.graph.clone(),
                        &is_fixed,
                        &classification,
                        config,
                    )?);
                }
            }
        }

        Ok(Self {
            template: template.clone(),
            classification,
            config: config.clone(),
            mean_edge_length: h,
            stages,
        })
    }

    fn stage(
        level: usize,
        free: Vec<usize>,
        fixed: Vec<usize>,
        graph: NeighborGraph,
        is_fixed: &[bool],
        classification: &VertexClassification,
        config: &RegistrationConfig,
    ) -> Result<Stage> {
        let mut members: Vec<usize> = free.iter().chain(&fixed).copied().collect();
        members.sort_unstable();
        let system =
            DiffusionSystem::for_subset(&graph, &members, is_fixed, classification.lambda())?;
        let active = if config.fixed_reaction {
            members
        } else {
            free.clone()
        };
        Ok(Stage {
            level,
            free,
            active,
            graph,
            system,
        })
    }

    pub fn template(&self) -> &Mesh {
        &self.template
    }

    /// Classification with the lambda weights that were assigned.
    pub fn classification(&self) -> &VertexClassification {
        &self.classification
    }

    pub fn config(&self) -> &RegistrationConfig {
        &self.config
    }

    pub fn mean_edge_length(&self) -> f64 {
        self.mean_edge_length
    }

    /// Refines `target` (same topology as the template) against the raw
    /// surface indexed by `surface`.
    pub fn refine(&self, target: &Mesh, surface: &AabbTree) -> Result<(Mesh, RegistrationTrace)> {
        if !self.template.same_topology(target) {
            return Err(Error::TopologyMismatch);
        }
        let start = Instant::now();
        let threshold = self.config.epsilon * self.mean_edge_length;
        let template = self.template.vertices();
        let mut positions = target.vertices().to_vec();
        let mut records = Vec::new();
        let mut levels = Vec::with_capacity(self.stages.len());

        for stage in &self.stages {
            let mut summary = LevelSummary {
                level: stage.level,
                free_count: stage.free.len(),
                iterations: 0,
                status: Status::MaxIterations,
                dividing_visits: 0,
            };
            while summary.iterations < self.config.max_iterations {
                summary.iterations += 1;
                summary.dividing_visits += stage.active.len();

                let preliminary = dividing_step(template, &positions, &stage.active, &stage.graph)?;
                let regularized = stage.system.diffuse(&preliminary.offsets)?;
                if !regularized
                    .offsets
                    .iter()
                    .all(|o| o.iter().all(|c| c.is_finite()))
                {
                    return Err(Error::Degenerate(
                        "diffusion produced non-finite offsets".into(),
                    ));
                }

                let moved: Vec<(Vec3, f64)> = regularized
                    .vertices
                    .par_iter()
                    .zip(&regularized.offsets)
                    .map(|(&v, o)| {
                        let foot = surface.closest_point(&(positions[v] + o)).point;
                        (foot, (foot - positions[v]).norm())
                    })
                    .collect();
                let mut total = 0.0;
                for (&v, &(foot, step)) in regularized.vertices.iter().zip(&moved) {
                    positions[v] = foot;
                    total += step;
                }
                let mean = total / stage.free.len() as f64;

                records.push(IterationRecord {
                    level: stage.level,
                    iteration: summary.iterations,
                    mean_offset: mean,
                    elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
                });
                if mean < threshold {
                    summary.status = Status::Converged;
                    break;
                }
            }
            levels.push(summary);
        }

        let status = if levels.iter().all(|l| l.status == Status::Converged) {
            Status::Converged
        } else {
            Status::MaxIterations
        };
        let refined = target.with_vertices(positions)?;
        Ok((
            refined,
            RegistrationTrace {
                records,
                levels,
                status,
                threshold,
                elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            },
        ))
    }
}

/// Refines the pair's target toward its raw surface.
pub fn refine(
    pair: &CorrespondedPair,
    classification: &VertexClassification,
    config: &RegistrationConfig,
) -> Result<(Mesh, RegistrationTrace)> {
    let model = TemplateModel::new(&pair.template, classification, config)?;
    let tree = AabbTree::build(&pair.raw_target_surface)?;
    model.refine(&pair.target, &tree)
}

/// Mean norm of `offsets[i]` over `free`.
pub fn mean_offset(offsets: &[Vec3], free: &[usize]) -> Result<f64> {
    if free.is_empty() {
        return Err(Error::Empty("free vertex set"));
    }
    let mut total = 0.0;
    for &i in free {
        let o = offsets.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: offsets.len(),
        })?;
        total += o.norm();
    }
    Ok(total / free.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceStats {
    pub distances: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Per-vertex distances between two results of the same topology,
/// optionally divided by `normalizer` (typically a mean edge length).
pub fn compare_refinements(a: &Mesh, b: &Mesh, normalizer: Option<f64>) -> Result<DistanceStats> {
    if !a.same_topology(b) {
        return Err(Error::TopologyMismatch);
    }
    let scale = match normalizer {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::Parameter(format!("normalizer must be > 0, got {s}"))),
        None => 1.0,
    };
    let distances: Vec<f64> = a
        .vertices()
        .iter()
        .zip(b.vertices())
        .map(|(p, q)| (p - q).norm() / scale)
        .collect();
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    let var = distances.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    Ok(DistanceStats {
        distances,
        mean,
        std: var.sqrt(),
    })
}
