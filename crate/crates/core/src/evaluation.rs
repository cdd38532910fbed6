//! Batch experiments: corpus-level metric statistics, PCA shape-model
//! quality measures and noise-robustness sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::classify::VertexClassification;
use crate::error::{Error, Result};
use crate::mesh::{CorrespondedPair, Mesh, Vec3};
use crate::metric::{global_distance, EdgeWeights};
use crate::obj::load_obj;
use crate::registration::{compare_refinements, RegistrationConfig, Status, TemplateModel};
use crate::spatial::AabbTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub id: String,
    pub path: PathBuf,
    pub split: Option<Split>,
}

/// A list of mesh files, read from a manifest of `id<TAB>path` lines with an
/// optional third `train` or `test` column. Relative paths are resolved
/// against the manifest's directory; blank lines and `#` comments are
/// skipped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeshCorpus {
    pub entries: Vec<CorpusEntry>,
}

impl MeshCorpus {
    pub fn read_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_manifest(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn parse_manifest(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |message: String| Error::Format {
                line: k + 1,
                message,
            };
            if cols.len() < 2 || cols.len() > 3 || cols[0].is_empty() || cols[1].is_empty() {
                return Err(bad("expected `id<TAB>path[<TAB>train|test]`".into()));
            }
            let split = match cols.get(2).map(|s| s.trim()) {
                None => None,
                Some("train") => Some(Split::Train),
                Some("test") => Some(Split::Test),
                Some(other) => return Err(bad(format!("unknown split `{other}`"))),
            };
            let p = Path::new(cols[1]);
            entries.push(CorpusEntry {
                id: cols[0].to_string(),
                path: if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    base.join(p)
                },
                split,
            });
        }
        Ok(Self { entries })
    }

    /// Entries whose split matches. Entries without a split belong to both.
    pub fn subset(&self, split: Split) -> MeshCorpus {
        MeshCorpus {
            entries: self
                .entries
                .iter()
                .filter(|e| e.split.is_none_or(|s| s == split))
                .cloned()
                .collect(),
        }
    }

    /// Loads every mesh, failing on the first unreadable file.
    pub fn load(&self) -> Result<Vec<(String, Mesh)>> {
        self.entries
            .iter()
            .map(|e| Ok((e.id.clone(), load_obj(&e.path)?)))
            .collect()
    }
}

/// Requires every mesh to share the first mesh's topology.
fn check_uniform(meshes: &[Mesh]) -> Result<()> {
    if let Some(first) = meshes.first() {
        if meshes.iter().any(|m| !m.same_topology(first)) {
            return Err(Error::TopologyMismatch);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub values: Vec<(String, f64)>,
    /// Identifiers skipped for a topology mismatch or degenerate edge, with
    /// the reason.
    pub skipped: Vec<(String, String)>,
    /// Mean of `values`; `None` when nothing was measured.
    pub mean: Option<f64>,
}

impl BatchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,global_distance\n");
        for (id, d) in &self.values {
            let _ = writeln!(out, "{id},{d:?}");
        }
        out
    }
}

/// Global distance of every sample to the template, weighted by the
/// template's edges.
pub fn batch_global_metric(samples: &[(String, Mesh)], template: &Mesh) -> Result<BatchReport> {
    let weights = EdgeWeights::from_reference(template)?;
    let mut values = Vec::new();
    let mut skipped = Vec::new();
    for (id, mesh) in samples {
        match global_distance(template, mesh, &weights) {
            Ok(d) => values.push((id.clone(), d)),
            Err(e @ (Error::TopologyMismatch | Error::Degenerate(_))) => {
                skipped.push((id.clone(), e.to_string()))
            }
            Err(e) => return Err(e),
        }
    }
    let mean = (!values.is_empty())
        .then(|| values.iter().map(|(_, d)| d).sum::<f64>() / values.len() as f64);
    Ok(BatchReport {
        values,
        skipped,
        mean,
    })
}

/// Linear shape model over stacked vertex coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// `3n` coordinates `x0, y0, z0, x1, ...`.
    pub mean: DVector<f64>,
    /// Orthonormal columns ordered by decreasing variance.
    pub components: DMatrix<f64>,
    pub variances: Vec<f64>,
    /// Sum of all sample variances, including any discarded null directions.
    pub total_variance: f64,
}

fn stack(mesh: &Mesh) -> DVector<f64> {
    DVector::from_iterator(
        3 * mesh.n_vertices(),
        mesh.vertices().iter().flat_map(|v| v.iter().copied()),
    )
}

fn mean_vertex_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() / 3;
    (0..n)
        .map(|v| (a.fixed_rows::<3>(3 * v) - b.fixed_rows::<3>(3 * v)).norm())
        .sum::<f64>()
        / n as f64
}

/// Relative eigenvalue cutoff below which a direction carries no variance.
const NULL_VARIANCE: f64 = 1e-12;

/// Mean-centred PCA through the eigendecomposition of the sample Gram
/// matrix. Only directions with non-zero variance are kept, so at most
/// `min(3n, samples - 1)` components come back.
pub fn fit_pca(samples: &[Mesh]) -> Result<PcaModel> {
    if samples.len() < 2 {
        return Err(Error::Parameter(format!(
            "PCA needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    check_uniform(samples)?;
    let s = samples.len();
    let dim = 3 * samples[0].n_vertices();
    let rows: Vec<DVector<f64>> = samples.iter().map(stack).collect();
    let mean = rows.iter().fold(DVector::zeros(dim), |acc, r| acc + r) / s as f64;
    let mut centred = DMatrix::zeros(dim, s);
    for (j, r) in rows.iter().enumerate() {
        centred.set_column(j, &(r - &mean));
    }

    let dof = (s - 1) as f64;
    let gram = centred.transpose() * &centred / dof;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let total_variance = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum::<f64>();
    let largest = eig.eigenvalues[order[0]].max(0.0);

    let mut columns = Vec::new();
    let mut variances = Vec::new();
    for &k in order.iter().take(dim.min(s - 1)) {
        let lambda = eig.eigenvalues[k];
        if !(lambda > NULL_VARIANCE * largest) || largest == 0.0 {
            break;
        }
        let mut c = &centred * eig.eigenvectors.column(k);
        c /= c.norm();
        // Deterministic sign: the largest-magnitude entry is positive.
        let pivot = c.iamax();
        if c[pivot] < 0.0 {
            c = -c;
        }
        columns.push(c);
        variances.push(lambda);
    }
    let components = if columns.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&columns)
    };
    Ok(PcaModel {
        mean,
        components,
        variances,
        total_variance,
    })
}

impl PcaModel {
    pub fn component_count(&self) -> usize {
        self.variances.len()
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    fn check_components(&self, k: usize) -> Result<()> {
        if k > self.component_count() {
            return Err(Error::Parameter(format!(
                "requested {k} components, model has {}",
                self.component_count()
            )));
        }
        Ok(())
    }

    /// Coordinates of `mesh` in the first `k` components.
    pub fn project(&self, mesh: &Mesh, k: usize) -> Result<DVector<f64>> {
        self.check_components(k)?;
        let x = stack(mesh);
        if x.len() != self.dimension() {
            return Err(Error::Dimension {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        Ok(self.components.columns(0, k).transpose() * (x - &self.mean))
    }

    /// Stacked coordinates `mean + sum_j coefficients_j * component_j`.
    pub fn synthesize(&self, coefficients: &DVector<f64>) -> DVector<f64> {
        &self.mean + self.components.columns(0, coefficients.len()) * coefficients
    }

    pub fn reconstruct(&self, mesh: &Mesh, k: usize) -> Result<Vec<Vec3>> {
        let y = self.synthesize(&self.project(mesh, k)?);
        Ok((0..mesh.n_vertices())
            .map(|v| Vec3::new(y[3 * v], y[3 * v + 1], y[3 * v + 2]))
            .collect())
    }
}

/// Fraction of the total variance carried by the first `k` components.
pub fn compactness(model: &PcaModel, k: usize) -> Result<f64> {
    model.check_components(k)?;
    if k == model.component_count() {
        return Ok(1.0);
    }
    if model.total_variance <= 0.0 {
        return Ok(0.0);
    }
    Ok((model.variances[..k].iter().sum::<f64>() / model.total_variance).min(1.0))
}

/// Mean over test meshes of the mean per-vertex distance between each mesh
/// and its reconstruction from `k` components.
pub fn generalization(model: &PcaModel, test: &[Mesh], k: usize) -> Result<f64> {
    model.check_components(k)?;
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mut total = 0.0;
    for mesh in test {
        let x = stack(mesh);
        let y = model.synthesize(&model.project(mesh, k)?);
        total += mean_vertex_distance(&x, &y);
    }
    Ok(total / test.len() as f64)
}

/// Draws `num_samples` shapes with Gaussian coefficients on the first `k`
/// components and averages each one's mean per-vertex distance to the
/// closest test mesh.
pub fn specificity(
    model: &PcaModel,
    test: &[Mesh],
    k: usize,
    num_samples: usize,
    seed: u64,
) -> Result<f64> {
    model.check_components(k)?;
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if num_samples == 0 {
        return Err(Error::Parameter(
            "specificity needs at least one sample".into(),
        ));
    }
    let test: Vec<DVector<f64>> = test.iter().map(stack).collect();
    if let Some(t) = test.iter().find(|t| t.len() != model.dimension()) {
        return Err(Error::Dimension {
            expected: model.dimension(),
            found: t.len(),
        });
    }
    let normals: Vec<Normal<f64>> = model.variances[..k]
        .iter()
        .map(|v| Normal::new(0.0, v.sqrt()).expect("variances are non-negative"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..num_samples {
        let c = DVector::from_iterator(k, normals.iter().map(|d| d.sample(&mut rng)));
        let y = model.synthesize(&c);
        total += test
            .iter()
            .map(|t| mean_vertex_distance(&y, t))
            .fold(f64::INFINITY, f64::min);
    }
    Ok(total / num_samples as f64)
}

/// Noise vectors in the tangent plane of each listed vertex (area-weighted
/// normal of `mesh`) with magnitude uniform in `[0, sigma * sqrt(3)]` and a
/// uniformly random direction. Other vertices get zero.
pub fn tangential_noise(
    mesh: &Mesh,
    vertices: &[usize],
    sigma: f64,
    rng: &mut impl Rng,
) -> Vec<Vec3> {
    let normals = mesh.vertex_normals();
    let mut noise = vec![Vec3::zeros(); mesh.n_vertices()];
    let limit = sigma * 3f64.sqrt();
    for &i in vertices {
        let magnitude = rng.random_range(0.0..=1.0) * limit;
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let n = normals[i];
        if n.norm() == 0.0 {
            continue;
        }
        let helper = if n.x.abs() < 0.9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        let u = n.cross(&helper).normalize();
        let w = n.cross(&u);
        noise[i] = (u * angle.cos() + w * angle.sin()) * magnitude;
    }
    noise
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRow {
    /// In units of the template mean edge length.
    pub sigma: f64,
    /// Mean per-vertex distance to the clean result, in units of the
    /// template mean edge length.
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReport {
    pub clean_status: Status,
    pub rows: Vec<NoiseRow>,
}

impl NoiseReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sigma,mean_error,std_error,max_error,converged\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?},{}",
                r.sigma,
                r.mean,
                r.std,
                r.max,
                r.status == Status::Converged
            );
        }
        out
    }
}

/// For each `sigma` (in template mean edge lengths) perturbs the free
/// target vertices tangentially, refines, and compares with the refinement
/// of the clean target. Every sigma reuses the same seed, so the noise
/// fields differ only in scale.
pub fn noise_sweep(
    pair: &CorrespondedPair,
    classification: &VertexClassification,
    config: &RegistrationConfig,
    sigmas: &[f64],
    seed: u64,
) -> Result<NoiseReport> {
    if let Some(s) = sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::Parameter(format!(
            "noise level must be >= 0, got {s}"
        )));
    }
    let model = TemplateModel::new(&pair.template, classification, config)?;
    let tree = AabbTree::build(&pair.raw_target_surface)?;
    let h = model.mean_edge_length();
    let (clean, clean_trace) = model.refine(&pair.target, &tree)?;
    let free = classification.free_vertices();

    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = tangential_noise(&pair.target, &free, sigma * h, &mut rng);
        let noisy: Vec<Vec3> = pair
            .target
            .vertices()
            .iter()
            .zip(&noise)
            .map(|(p, d)| p + d)
            .collect();
        let (refined, trace) = model.refine(&pair.target.with_vertices(noisy)?, &tree)?;
        let stats = compare_refinements(&refined, &clean, Some(h))?;
        rows.push(NoiseRow {
            sigma,
            mean: stats.mean,
            std: stats.std,
            max: stats.distances.iter().copied().fold(0.0, f64::max),
            status: trace.status,
        });
    }
    Ok(NoiseReport {
        clean_status: clean_trace.status,
        rows,
    })
}
