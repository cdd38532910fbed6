//! Edge-length based local scaling metric between corresponded meshes.
//!
//! Every mesh sharing the reference topology is embedded as the vector of
//! per-edge log length ratios against the reference. Distances between two
//! meshes are taken entrywise in that embedding, so the reference cancels
//! out and the result is invariant to rigid motions of either mesh.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

fn check_topology(a: &Mesh, b: &Mesh) -> Result<()> {
    if a.same_topology(b) {
        Ok(())
    } else {
        Err(Error::TopologyMismatch)
    }
}

fn log_lengths(mesh: &Mesh, role: &str) -> Result<Vec<f64>> {
    mesh.edge_lengths()
        .into_iter()
        .enumerate()
        .map(|(e, len)| {
            if len > 0.0 && len.is_finite() {
                Ok(len.ln())
            } else {
                let [a, b] = mesh.edges()[e];
                Err(Error::Degenerate(format!(
                    "{role} edge {e} ({a}, {b}) has length {len}"
                )))
            }
        })
        .collect()
}

/// Per-edge ratios `e_target / e_template`.
pub fn similarity_scores(template: &Mesh, target: &Mesh) -> Result<Vec<f64>> {
    check_topology(template, target)?;
    template
        .edge_lengths()
        .into_iter()
        .zip(target.edge_lengths())
        .enumerate()
        .map(|(e, (base, len))| {
            if base > 0.0 {
                Ok(len / base)
            } else {
                Err(Error::Degenerate(format!(
                    "template edge {e} has zero length"
                )))
            }
        })
        .collect()
}

/// Log edge-length ratios of a mesh against a reference template.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEmbedding {
    pub values: Vec<f64>,
    /// Mean edge length of the reference, kept to tell references apart.
    pub reference_scale: f64,
}

pub fn scale_embedding(mesh: &Mesh, reference: &Mesh) -> Result<ScaleEmbedding> {
    check_topology(mesh, reference)?;
    let own = log_lengths(mesh, "mesh")?;
    let base = log_lengths(reference, "reference")?;
    Ok(ScaleEmbedding {
        values: own.iter().zip(&base).map(|(a, b)| a - b).collect(),
        reference_scale: reference.mean_edge_length(),
    })
}

/// `w_i = |e_i|^2 / sum_j |e_j|^2` over the reference edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    weights: Vec<f64>,
}

impl EdgeWeights {
    pub fn from_reference(reference: &Mesh) -> Result<Self> {
        let squares: Vec<f64> = reference.edge_lengths().iter().map(|l| l * l).collect();
        let total: f64 = squares.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate(
                "reference has no positive-length edges".into(),
            ));
        }
        Ok(Self {
            weights: squares.iter().map(|s| s / total).collect(),
        })
    }

    /// Uses the given weights after checking they are non-negative and sum
    /// to one.
    pub fn from_values(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(
                "edge weights must be non-negative and sum to 1".into(),
            ));
        }
        Ok(Self { weights })
    }

    pub fn values(&self) -> &[f64] {
        &self.weights
    }
}

/// Signed per-edge `log(e2 / e1)`: positive where `t2` is stretched
/// relative to `t1`.
pub fn signed_log_ratios(t1: &Mesh, t2: &Mesh) -> Result<Vec<f64>> {
    check_topology(t1, t2)?;
    let a = log_lengths(t1, "first mesh")?;
    let b = log_lengths(t2, "second mesh")?;
    Ok(a.iter().zip(&b).map(|(x, y)| y - x).collect())
}

/// Per-edge `|log(e1 / e2)|`.
pub fn local_distance(t1: &Mesh, t2: &Mesh) -> Result<Vec<f64>> {
    Ok(signed_log_ratios(t1, t2)?
        .into_iter()
        .map(f64::abs)
        .collect())
}

/// `(1/m) * sum_i w_i |log(e1_i / e2_i)|`.
///
/// Both the `1/m` factor and the normalized weights are applied, so a
/// uniform scaling by `s` gives `|log s| / m`.
pub fn global_distance(t1: &Mesh, t2: &Mesh, weights: &EdgeWeights) -> Result<f64> {
    let d = local_distance(t1, t2)?;
    if weights.weights.len() != d.len() {
        return Err(Error::Dimension {
            expected: d.len(),
            found: weights.weights.len(),
        });
    }
    let m = d.len() as f64;
    Ok(d.iter()
        .zip(&weights.weights)
        .map(|(di, wi)| wi * di)
        .sum::<f64>()
        / m)
}

/// Distance in embedding space, for callers that already hold embeddings.
pub fn embedding_distance(
    a: &ScaleEmbedding,
    b: &ScaleEmbedding,
    weights: &EdgeWeights,
) -> Result<f64> {
    if a.values.len() != b.values.len() || a.values.len() != weights.weights.len() {
        return Err(Error::Dimension {
            expected: a.values.len(),
            found: b.values.len().min(weights.weights.len()),
        });
    }
    let m = a.values.len() as f64;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .zip(&weights.weights)
        .map(|((x, y), w)| w * (x - y).abs())
        .sum::<f64>()
        / m)
}

/// Paths written by [`heatmap_export`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapFiles {
    pub edges: PathBuf,
    pub vertices: PathBuf,
}

/// Writes `<prefix>_edges.csv` (edge, v0, v1, d, signed_log) and
/// `<prefix>_vertices.csv` (vertex, mean_d, mean_signed_log), where the
/// vertex columns average over incident edges.
pub fn heatmap_export(t1: &Mesh, t2: &Mesh, prefix: impl AsRef<Path>) -> Result<HeatmapFiles> {
    let signed = signed_log_ratios(t1, t2)?;
    let n = t1.n_vertices();
    let mut sum_abs = vec![0.0; n];
    let mut sum_signed = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (&[a, b], &s) in t1.edges().iter().zip(&signed) {
        for v in [a, b] {
            sum_abs[v] += s.abs();
            sum_signed[v] += s;
            count[v] += 1;
        }
    }

    let prefix = prefix.as_ref();
    let with_suffix = |suffix: &str| {
        let mut name = prefix.as_os_str().to_owned();
        name.push(suffix);
        PathBuf::from(name)
    };
    let files = HeatmapFiles {
        edges: with_suffix("_edges.csv"),
        vertices: with_suffix("_vertices.csv"),
    };

    let write =
        |path: &Path, body: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| -> Result<()> {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path, e))
        };

    write(&files.edges, &|w| {
        writeln!(w, "edge,v0,v1,d,signed_log")?;
        for (e, (&[a, b], &s)) in t1.edges().iter().zip(&signed).enumerate() {
            writeln!(w, "{e},{a},{b},{:?},{:?}", s.abs(), s)?;
        }
        Ok(())
    })?;
    write(&files.vertices, &|w| {
        writeln!(w, "vertex,mean_d,mean_signed_log")?;
        for v in 0..n {
            let (a, s) = if count[v] > 0 {
                (
                    sum_abs[v] / count[v] as f64,
                    sum_signed[v] / count[v] as f64,
                )
            } else {
                (0.0, 0.0)
            };
            writeln!(w, "{v},{a:?},{s:?}")?;
        }
        Ok(())
    })?;
    Ok(files)
}
