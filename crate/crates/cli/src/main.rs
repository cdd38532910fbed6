//! Command-line front end for mesh refinement, metrics and experiments.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RegistrationArgs;
use meshdiff::evaluation::{self, Split};
use meshdiff::line::{segment_line, LineConfig};
use meshdiff::metric::heatmap_export;
use meshdiff::obj::read_index_list;
use meshdiff::pyramid::build_pyramid;
use meshdiff::{
    classify_vertices, compare_refinements, global_distance, load_obj, save_obj, similarity_scores,
    AabbTree, CorrespondedPair, EdgeWeights, Mesh, MeshCorpus, Mode, ResolutionPyramid, Status,
    TemplateModel, VertexClassification,
};

#[derive(Debug, Parser)]
#[command(
    name = "meshdiff",
    version,
    about = "Dense mesh correspondence refinement"
)]
struct Cli {
    /// Worker thread cap (falls back to MESHDIFF_THREADS).
    #[arg(long, global = true, env = "MESHDIFF_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Refine a corresponded target toward its raw surface.
    Refine(RefineArgs),
    /// Local scaling metric between two corresponded meshes.
    Metric(MetricArgs),
    /// One-dimensional segmentation demo.
    LineDemo(LineDemoArgs),
    /// Build and save a multi-resolution pyramid.
    Pyramid(PyramidArgs),
    /// Batch experiments.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Args)]
struct ClassArgs {
    /// Template mesh (OBJ).
    #[arg(long)]
    template: PathBuf,
    /// Landmark vertex indices, one per line.
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// Non-interested vertex indices, one per line.
    #[arg(long)]
    non_interested: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PairArgs {
    #[command(flatten)]
    class: ClassArgs,
    /// Initial target mesh with the template's topology.
    #[arg(long)]
    target: PathBuf,
    /// Raw target surface the refined vertices are projected onto.
    #[arg(long)]
    raw: PathBuf,
}

#[derive(Debug, Args)]
struct RefineArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    registration: RegistrationArgs,
    /// Prebuilt pyramid (from `pyramid`) for multi-resolution mode.
    #[arg(long)]
    pyramid: Option<PathBuf>,
    /// Refined target output (OBJ).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Exit with status 2 if any level fails to converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct MetricArgs {
    /// Reference template defining the edge weights.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Write `<prefix>_edges.csv` and `<prefix>_vertices.csv`.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Preset {
    Table1,
    SelfIntersected,
}

#[derive(Debug, Args)]
struct LineDemoArgs {
    #[arg(long, value_enum, default_value = "table1")]
    preset: Preset,
    /// Unlock points in binary-midpoint tiers.
    #[arg(long)]
    mr: bool,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PyramidArgs {
    #[command(flatten)]
    class: ClassArgs,
    /// Number of decimated levels.
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// Pyramid output (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Global distance of every corpus mesh to the template.
    MetricBatch(MetricBatchArgs),
    /// PCA compactness, generalization and specificity.
    Pca(PcaArgs),
    /// Refinement stability under tangential noise.
    NoiseSweep(NoiseSweepArgs),
}

#[derive(Debug, Args)]
struct MetricBatchArgs {
    #[arg(long)]
    template: PathBuf,
    /// Manifest of `id<TAB>path` lines.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PcaArgs {
    /// Manifest of `id<TAB>path[<TAB>train|test]` lines.
    #[arg(long)]
    manifest: PathBuf,
    /// Separate test manifest; otherwise the `test` split is used.
    #[arg(long)]
    test_manifest: Option<PathBuf>,
    /// Random shapes drawn per specificity point.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NoiseSweepArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    registration: RegistrationArgs,
    /// Comma-separated noise levels in template mean edge lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.25, 0.5])]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures are either the caller's (bad flags or files) or numerical.
enum Failure {
    User(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<meshdiff::Error>() {
            Some(meshdiff::Error::Factorization { .. }) => Failure::Numerical(e),
            _ => Failure::User(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Refine(a) => refine(a),
        Command::Metric(a) => metric(a).map_err(Failure::from),
        Command::LineDemo(a) => line_demo(a).map_err(Failure::from),
        Command::Pyramid(a) => pyramid(a).map_err(Failure::from),
        Command::Eval(EvalCommand::MetricBatch(a)) => metric_batch(a).map_err(Failure::from),
        Command::Eval(EvalCommand::Pca(a)) => pca(a).map_err(Failure::from),
        Command::Eval(EvalCommand::NoiseSweep(a)) => noise_sweep(a).map_err(Failure::from),
    }
}

fn load(flag: &str, path: &Path) -> Result<Mesh> {
    load_obj(path).with_context(|| format!("{flag}: cannot load {}", path.display()))
}

fn indices(flag: &str, path: Option<&PathBuf>) -> Result<Vec<usize>> {
    match path {
        Some(p) => {
            read_index_list(p).with_context(|| format!("{flag}: cannot read {}", p.display()))
        }
        None => Ok(Vec::new()),
    }
}

fn classify(args: &ClassArgs, template: &Mesh) -> Result<VertexClassification> {
    let landmarks = indices("--landmarks", args.landmarks.as_ref())?;
    let non_interested = indices("--non-interested", args.non_interested.as_ref())?;
    Ok(classify_vertices(template, &landmarks, &non_interested)?)
}

fn load_pair(args: &PairArgs) -> Result<(CorrespondedPair, VertexClassification)> {
    let template = load("--template", &args.class.template)?;
    let target = load("--target", &args.target)?;
    let raw = load("--raw", &args.raw)?;
    let classification = classify(&args.class, &template)?;
    let pair = CorrespondedPair::new(template, target, raw)
        .context("--target: topology differs from --template")?;
    Ok((pair, classification))
}

fn write_output(flag: &str, path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("{flag}: cannot write {}", path.display()))
}

fn emit(flag: &str, out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_output(flag, p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn refine(args: RefineArgs) -> Result<(), Failure> {
    let (pair, classification) = load_pair(&args.pair)?;
    let config = args.registration.resolve()?;
    let model = match (&args.pyramid, config.mode) {
        (Some(path), Mode::MultiRes) => {
            let pyramid = ResolutionPyramid::load_for(path, &pair.template, &classification)
                .with_context(|| format!("--pyramid: {}", path.display()))?;
            TemplateModel::with_pyramid(&pair.template, &classification, &config, &pyramid)
        }
        (Some(_), Mode::Full) => {
            return Err(Failure::User(anyhow!("--pyramid requires --mode mr")))
        }
        (None, _) => TemplateModel::new(&pair.template, &classification, &config),
    }
    .map_err(anyhow::Error::from)?;
    let tree = AabbTree::build(&pair.raw_target_surface)
        .map_err(anyhow::Error::from)
        .context("--raw")?;
    let (refined, trace) = model
        .refine(&pair.target, &tree)
        .map_err(anyhow::Error::from)?;

    if let Some(path) = &args.out {
        save_obj(&refined, path)
            .map_err(anyhow::Error::from)
            .with_context(|| format!("--out: cannot write {}", path.display()))?;
    }
    if let Some(path) = &args.trace {
        let mut csv = String::from("level,iteration,mean_offset,elapsed_ms\n");
        for r in &trace.records {
            let _ = writeln!(
                csv,
                "{},{},{:?},{:.3}",
                r.level, r.iteration, r.mean_offset, r.elapsed_ms
            );
        }
        write_output("--trace", path, &csv)?;
    }

    let h = model.mean_edge_length();
    let weights = EdgeWeights::from_reference(&pair.template).map_err(anyhow::Error::from)?;
    let before =
        global_distance(&pair.template, &pair.target, &weights).map_err(anyhow::Error::from)?;
    let after = global_distance(&pair.template, &refined, &weights).map_err(anyhow::Error::from)?;
    let moved = compare_refinements(&pair.target, &refined, None).map_err(anyhow::Error::from)?;
    let status = match trace.status {
        Status::Converged => "converged",
        Status::MaxIterations => "max-iterations",
    };
    println!("status: {status}");
    for l in &trace.levels {
        println!(
            "level {}: free {} iterations {} dividing visits {}",
            l.level, l.free_count, l.iterations, l.dividing_visits
        );
    }
    if let Some(o) = trace.final_mean_offset() {
        println!("final mean offset: {o:.6e} ({:.6e} edge lengths)", o / h);
    }
    println!(
        "mean vertex displacement: {:.6e} ({:.6e} edge lengths)",
        moved.mean,
        moved.mean / h
    );
    println!("global distance to template: {before:.6e} -> {after:.6e}");
    println!("elapsed: {:.1} ms", trace.elapsed_ms);

    if args.strict && trace.status != Status::Converged {
        return Err(Failure::Numerical(anyhow!(
            "did not converge within {} iterations per level",
            config.max_iterations
        )));
    }
    Ok(())
}

fn metric(args: MetricArgs) -> Result<()> {
    let reference = load("--reference", &args.reference)?;
    let a = load("--a", &args.a)?;
    let b = load("--b", &args.b)?;
    if !reference.same_topology(&a) || !reference.same_topology(&b) {
        bail!("--a and --b must share the topology of --reference");
    }
    let weights = EdgeWeights::from_reference(&reference)?;
    let q = similarity_scores(&a, &b)?;
    let d = global_distance(&a, &b, &weights)?;
    let h = reference.mean_edge_length();
    let moved = compare_refinements(&a, &b, None)?;
    let qmin = q.iter().copied().fold(f64::INFINITY, f64::min);
    let qmax = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let qmean = q.iter().sum::<f64>() / q.len() as f64;
    println!("edges: {}", q.len());
    println!("similarity b/a: min {qmin:.6} mean {qmean:.6} max {qmax:.6}");
    println!("D = {d}");
    println!(
        "mean vertex distance: {:.6e} ({:.6e} edge lengths)",
        moved.mean,
        moved.mean / h
    );
    if let Some(prefix) = &args.heatmap {
        let files = heatmap_export(&a, &b, prefix).context("--heatmap")?;
        println!(
            "heatmap: {} {}",
            files.edges.display(),
            files.vertices.display()
        );
    }
    Ok(())
}

fn line_demo(args: LineDemoArgs) -> Result<()> {
    let config = match args.preset {
        Preset::Table1 => LineConfig::table1(),
        Preset::SelfIntersected => LineConfig::self_intersected(),
    };
    let run = segment_line(&config, args.mr)?;
    let n = config.template().len();
    let mut csv = String::from("iteration");
    for i in 1..=n {
        let _ = write!(csv, ",b{i}");
    }
    csv.push_str(",O_t,E_g\n");
    for s in &run.snapshots {
        let _ = write!(csv, "{}", s.iteration);
        for p in &s.points {
            let _ = write!(csv, ",{p:.6}");
        }
        let _ = writeln!(csv, ",{:.6},{:.6}", s.total_offset, s.ground_truth_error);
    }
    emit("--out", args.out.as_ref(), &csv)?;
    if !run.converged {
        eprintln!(
            "warning: did not converge within {} sweeps",
            config.max_iterations()
        );
    }
    Ok(())
}

fn pyramid(args: PyramidArgs) -> Result<()> {
    let template = load("--template", &args.class.template)?;
    let classification = classify(&args.class, &template)?;
    let pyramid = build_pyramid(&template, &classification, args.levels).context("--levels")?;
    pyramid
        .save(&args.out)
        .with_context(|| format!("--out: cannot write {}", args.out.display()))?;
    println!("level,free,fixed,graph_edges");
    for (j, l) in pyramid.levels.iter().enumerate() {
        println!(
            "{j},{},{},{}",
            l.free.len(),
            l.fixed.len(),
            l.graph.edge_count()
        );
    }
    Ok(())
}

fn metric_batch(args: MetricBatchArgs) -> Result<()> {
    let template = load("--template", &args.template)?;
    let corpus = MeshCorpus::read_manifest(&args.manifest).context("--manifest")?;
    let mut samples = Vec::new();
    let mut unreadable = 0;
    for e in &corpus.entries {
        match load_obj(&e.path) {
            Ok(m) => samples.push((e.id.clone(), m)),
            Err(err) => {
                eprintln!("warning: skipping {}: {err}", e.id);
                unreadable += 1;
            }
        }
    }
    let report = evaluation::batch_global_metric(&samples, &template)?;
    for (id, reason) in &report.skipped {
        eprintln!("warning: skipping {id}: {reason}");
    }
    emit("--out", args.out.as_ref(), &report.to_csv())?;
    if args.out.is_some() {
        match report.mean {
            Some(m) => println!("mean D over {} meshes: {m:.6e}", report.values.len()),
            None => println!("no meshes measured"),
        }
    }
    let skipped = report.skipped.len() + unreadable;
    if skipped > 0 {
        eprintln!("skipped {skipped} of {} meshes", corpus.entries.len());
    }
    Ok(())
}

fn load_meshes(corpus: &MeshCorpus, flag: &str) -> Result<Vec<Mesh>> {
    Ok(corpus
        .load()
        .with_context(|| flag.to_string())?
        .into_iter()
        .map(|(_, m)| m)
        .collect())
}

fn pca(args: PcaArgs) -> Result<()> {
    let corpus = MeshCorpus::read_manifest(&args.manifest).context("--manifest")?;
    let (train, test) = match &args.test_manifest {
        Some(p) => (
            corpus,
            MeshCorpus::read_manifest(p).context("--test-manifest")?,
        ),
        None => (corpus.subset(Split::Train), corpus.subset(Split::Test)),
    };
    let train = load_meshes(&train, "--manifest")?;
    let test = load_meshes(&test, "--test-manifest")?;
    let model = evaluation::fit_pca(&train)?;
    let mut csv = String::from("components,compactness,generalization,specificity\n");
    for k in 0..=model.component_count() {
        let c = evaluation::compactness(&model, k)?;
        let g = evaluation::generalization(&model, &test, k)?;
        let s = evaluation::specificity(&model, &test, k, args.samples, args.seed)?;
        let _ = writeln!(csv, "{k},{c:?},{g:?},{s:?}");
    }
    emit("--out", args.out.as_ref(), &csv)
}

fn noise_sweep(args: NoiseSweepArgs) -> Result<()> {
    let (pair, classification) = load_pair(&args.pair)?;
    let config = args.registration.resolve()?;
    let report = evaluation::noise_sweep(&pair, &classification, &config, &args.sigmas, args.seed)?;
    if report.clean_status != Status::Converged {
        eprintln!("warning: the clean refinement did not converge");
    }
    emit("--out", args.out.as_ref(), &report.to_csv())
}
