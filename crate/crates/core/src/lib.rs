//! Dense correspondence refinement for triangle meshes.
//!
//! A template mesh is deformed toward a target surface by alternating a
//! local rigid dividing step with a global diffusing step, optionally over a
//! coarse-to-fine vertex pyramid. The crate also provides a local scaling
//! metric between corresponded meshes and evaluation helpers.

pub mod benchmark;
pub mod classify;
pub mod diffuse;
pub mod error;
pub mod evaluation;
pub mod geodesic;
pub mod line;
pub mod mesh;
pub mod metric;
pub mod obj;
pub mod pyramid;
pub mod registration;
pub mod rigid;
pub mod spatial;
pub mod synth;

pub use classify::{classify_vertices, VertexClass, VertexClassification};
pub use diffuse::{assign_lambda, build_system, DiffusionSystem, LambdaParams, RegularizedOffsets};
pub use error::{Error, Result};
pub use evaluation::{
    batch_global_metric, compactness, fit_pca, generalization, noise_sweep, specificity,
    tangential_noise, MeshCorpus, PcaModel,
};
pub use geodesic::{farthest_point_sample, geodesic_field, GeodesicBackend, GeodesicField};
pub use line::{segment_line, LineConfig, LineRun, LineSnapshot};
pub use mesh::{CorrespondedPair, Mesh, NeighborGraph, Topology, Vec3};
pub use metric::{
    global_distance, local_distance, scale_embedding, similarity_scores, EdgeWeights,
};
pub use obj::{load_obj, save_obj};
pub use pyramid::{build_pyramid, ResolutionPyramid};
pub use registration::{
    compare_refinements, mean_offset, refine, Mode, RegistrationConfig, RegistrationTrace, Status,
    TemplateModel,
};
pub use rigid::{dividing_step, fit_rigid, PreliminaryOffsets, RigidTransform};
pub use spatial::AabbTree;
