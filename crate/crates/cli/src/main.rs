mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meshspectra::experiments::{
    export_cumulative_series, export_spectrum, make_octave_bands, run_noise_sweep, write_provenance,
    write_sweep_csv, NoiseModel, NoiseSweepConfig, Provenance, RESIDUAL_CSV,
};
use meshspectra::mesh::{
    build_graph, make_disc_fixture, make_icosphere, read_obj, validate, write_obj_file,
};
use meshspectra::metrics::{
    chamfer_distance, frequency_loss_with, gradient_check, mpjpe, msnr, per_vertex_error,
    snap_to_surface, total_loss, write_msnr_csv, ChamferMode, FrequencyLossOptions, LevelInput,
    LevelTerms, LogBase, LossWeights, GRADCHECK_MAX_SIZE,
};
use meshspectra::spectral::{
    build_laplacian, eigendecompose_dense, BasisCache, BasisMode, DenseOptions,
};
use meshspectra::subdiv::{load_model_json, model_to_json, subdivide_mesh, subdivide_model};
use meshspectra::{Error, ErrorClass, Result, SpectralBasis, TriangleMesh, TOOL_VERSION};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use config::{resolve, RunConfig, Settings};

#[derive(Debug, Parser)]
#[command(name = "meshspectra", version, about = "Graph-spectral analysis of triangle meshes")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Permit dense decompositions above the ceiling.
    #[arg(long, global = true)]
    allow_large: bool,
    /// Largest vertex count decomposed densely without --allow-large.
    #[arg(long, global = true, value_name = "N")]
    dense_ceiling: Option<usize>,
    /// Logarithm used by the frequency loss.
    #[arg(long, global = true, value_parser = parse_log_base)]
    log_base: Option<LogBase>,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic fixture mesh.
    Fixture(FixtureArgs),
    /// Report topology statistics of a mesh.
    Validate { mesh: PathBuf },
    /// Spectrum profile and cumulative low-pass reconstructions.
    Decompose(DecomposeArgs),
    /// Compare a predicted mesh against ground truth.
    Metrics(MetricsArgs),
    /// Loop-subdivide a mesh or a parametric model.
    Subdivide(SubdivideArgs),
    /// Band-limited noise sensitivity sweep.
    NoiseSweep(SweepArgs),
    /// Check the frequency-loss gradient against central differences.
    Gradcheck(GradcheckArgs),
    /// Move template vertices onto the closest points of a target surface.
    Snap(SnapArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FixtureKind {
    Disc,
    Icosphere,
}

#[derive(Debug, Args)]
struct FixtureArgs {
    kind: FixtureKind,
    #[arg(long, default_value_t = 778)]
    vertices: usize,
    #[arg(long, default_value_t = 1538)]
    faces: usize,
    #[arg(long, default_value_t = 16)]
    boundary: usize,
    #[arg(long, default_value_t = 2)]
    level: usize,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Destination OBJ (default: <out>/<kind>.obj).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    mesh: PathBuf,
    /// Write spectrum.csv.
    #[arg(long)]
    spectrum: bool,
    /// Ascending cut frequencies for cumulative reconstructions.
    #[arg(long, value_delimiter = ',')]
    cuts: Vec<usize>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    pred: PathBuf,
    gt: PathBuf,
    /// Loss weights as JSON, e.g. '{"lambda_J":1,"lambda_v":[1,1,1],"lambda_F":[60,60,100]}'.
    #[arg(long)]
    weights: Option<String>,
    /// Further resolution levels as PRED,GT pairs for the total loss.
    #[arg(long = "level", value_name = "PRED,GT")]
    levels: Vec<String>,
    /// Joint positions, JSON arrays of [x,y,z].
    #[arg(long, requires = "gt_joints")]
    pred_joints: Option<PathBuf>,
    #[arg(long, requires = "pred_joints")]
    gt_joints: Option<PathBuf>,
    #[arg(long, value_parser = parse_chamfer_mode)]
    chamfer_mode: Option<ChamferMode>,
    /// Write the per-frequency S_f values to this CSV.
    #[arg(long)]
    sf_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SubdivideArgs {
    /// OBJ mesh or model JSON.
    input: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    levels: u32,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    mesh: PathBuf,
    /// `canonical` requires at least 12337 vertices; `auto` scales smaller meshes.
    #[arg(long)]
    bands: Option<String>,
    #[arg(long, value_delimiter = ',')]
    amplitudes: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_parser = parse_noise_model)]
    model: Option<NoiseModel>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, hide = true)]
    corrupt: bool,
}

#[derive(Debug, Args)]
struct SnapArgs {
    template: PathBuf,
    target: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_log_base(s: &str) -> std::result::Result<LogBase, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_chamfer_mode(s: &str) -> std::result::Result<ChamferMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_noise_model(s: &str) -> std::result::Result<NoiseModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn arg_error(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}

fn emit(mut value: Value) -> Result<()> {
    if let Value::Object(map) = &mut value {
        map.insert("tool_version".into(), json!(TOOL_VERSION));
    }
    let text = serde_json::to_string_pretty(&value).map_err(|e| Error::Format(e.to_string()))?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}").and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn full_basis(settings: &Settings, mesh: &TriangleMesh) -> Result<SpectralBasis> {
    let laplacian = build_laplacian(&build_graph(mesh));
    let options = DenseOptions { ceiling: settings.dense_ceiling, allow_large: settings.allow_large };
    if laplacian.dimension() > options.ceiling && !options.allow_large {
        // Fail before touching the cache directory.
        return eigendecompose_dense(&laplacian, options);
    }
    BasisCache::new(settings.cache_dir()).load_or_compute(&laplacian, BasisMode::Full, || {
        eigendecompose_dense(&laplacian, options)
    })
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "mesh".to_string(), |s| s.to_string_lossy().into_owned())
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn cmd_fixture(settings: &Settings, args: &FixtureArgs) -> Result<()> {
    let (mesh, name) = match args.kind {
        FixtureKind::Disc => (make_disc_fixture(args.vertices, args.faces, args.boundary)?, "disc"),
        FixtureKind::Icosphere => (make_icosphere(args.level, args.radius)?, "icosphere"),
    };
    let path = args.output.clone().unwrap_or_else(|| settings.out.join(format!("{name}.obj")));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_obj_file(&mesh, &path)?;
    emit(json!({
        "path": display(&path),
        "vertices": mesh.vertex_count(),
        "faces": mesh.face_count(),
        "mesh_hash": mesh.content_hash(),
    }))
}

fn cmd_validate(mesh_path: &Path) -> Result<()> {
    let mesh = read_obj(mesh_path)?;
    let report = validate(&mesh);
    emit(json!({
        "vertices": mesh.vertex_count(),
        "faces": mesh.face_count(),
        "edges": build_graph(&mesh).edge_count(),
        "is_manifold": report.is_manifold(),
        "report": report,
        "mesh_hash": mesh.content_hash(),
    }))
}

fn cmd_decompose(settings: &Settings, args: &DecomposeArgs) -> Result<()> {
    if !args.spectrum && args.cuts.is_empty() {
        return Err(arg_error("decompose needs --spectrum and/or --cuts"));
    }
    let mesh = read_obj(&args.mesh)?;
    let basis = full_basis(settings, &mesh)?;
    fs::create_dir_all(&settings.out)?;
    let mut summary = json!({ "vertices": mesh.vertex_count(), "mesh_hash": mesh.content_hash() });
    if args.spectrum {
        let path = settings.out.join("spectrum.csv");
        let rows = export_spectrum(&mesh, &basis, &path)?;
        summary["spectrum"] = json!({ "path": display(&path), "rows": rows });
    }
    if !args.cuts.is_empty() {
        let cuts = export_cumulative_series(&mesh, &basis, &args.cuts, &settings.out)?;
        summary["cuts"] = cuts
            .iter()
            .map(|c| json!({ "cut": c.cut, "residual_frobenius_mm": c.residual_frobenius_mm, "path": display(&c.path) }))
            .collect();
        summary["residuals"] = json!(display(&settings.out.join(RESIDUAL_CSV)));
    }
    write_provenance(
        &settings.out,
        &Provenance::new(
            &mesh,
            None,
            "decompose",
            json!({ "mesh": display(&args.mesh), "spectrum": args.spectrum, "cuts": args.cuts }),
        ),
    )?;
    emit(summary)
}

fn read_joints(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let rows: Vec<[f64; 3]> = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: expected [[x,y,z],...]: {e}", path.display())))?;
    Ok(DMatrix::from_fn(rows.len(), 3, |r, c| rows[r][c]))
}

fn spectral_pair(pred: &TriangleMesh, gt: &TriangleMesh, what: &str) -> Result<()> {
    if pred.vertex_count() != gt.vertex_count() {
        return Err(arg_error(format!(
            "{what}: prediction has {} vertices, ground truth {}; spectral metrics need equal counts \
             (run `meshspectra subdivide` to bring both meshes to the same resolution)",
            pred.vertex_count(),
            gt.vertex_count()
        )));
    }
    Ok(())
}

fn cmd_metrics(settings: &Settings, config: &RunConfig, args: &MetricsArgs) -> Result<()> {
    let pred = read_obj(&args.pred)?;
    let gt = read_obj(&args.gt)?;
    spectral_pair(&pred, &gt, "metrics")?;
    let weights = match &args.weights {
        Some(text) => serde_json::from_str::<LossWeights>(text)
            .map_err(|e| Error::Format(format!("--weights: {e}")))?,
        None => config.metrics.weights.unwrap_or_default(),
    };
    weights.validate()?;
    let mode = match (args.chamfer_mode, &config.metrics.chamfer_mode) {
        (Some(m), _) => m,
        (None, Some(s)) => s.parse()?,
        (None, None) => ChamferMode::default(),
    };

    let basis = full_basis(settings, &gt)?;
    let (p, g) = (pred.vertex_matrix(), gt.vertex_matrix());
    let loss_options = FrequencyLossOptions { log_base: settings.log_base, ..Default::default() };
    let mpve = per_vertex_error(&p, &g)?;
    let report = msnr(&basis, &p, &g)?;
    let freq = frequency_loss_with(&basis, &p, &g, &loss_options)?;
    let chamfer = chamfer_distance(&pred, &gt, mode)?;
    if let Some(path) = &args.sf_csv {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, write_msnr_csv(&report))?;
    }

    let joints = match (&args.pred_joints, &args.gt_joints) {
        (Some(a), Some(b)) => Some((read_joints(a)?, read_joints(b)?)),
        _ => None,
    };
    let joint_error = joints.as_ref().map(|(a, b)| mpjpe(a, b)).transpose()?;

    // Extra resolution levels for the total loss.
    let mut levels = vec![(p, g, basis)];
    for spec in &args.levels {
        let (a, b) = spec
            .split_once(',')
            .ok_or_else(|| arg_error(format!("--level expects PRED,GT, got `{spec}`")))?;
        let (lp, lg) = (read_obj(a)?, read_obj(b)?);
        spectral_pair(&lp, &lg, "--level")?;
        let lb = full_basis(settings, &lg)?;
        levels.push((lp.vertex_matrix(), lg.vertex_matrix(), lb));
    }
    if levels.len() > 3 {
        return Err(arg_error("at most three resolution levels are supported"));
    }
    let loss = match (&joints, levels.len()) {
        (Some((pj, gj)), 3) => {
            let inputs: Vec<LevelInput> = levels
                .iter()
                .map(|(p, g, b)| LevelInput { pred: p, gt: g, basis: b })
                .collect();
            serde_json::to_value(total_loss(&inputs, pj, gj, &weights, settings.log_base)?)
                .map_err(|e| Error::Format(e.to_string()))?
        }
        _ => {
            let mut terms = Vec::new();
            for (l, (p, g, b)) in levels.iter().enumerate() {
                let vertex_loss = per_vertex_error(p, g)?;
                let frequency_loss = frequency_loss_with(b, p, g, &loss_options)?;
                terms.push(LevelTerms {
                    vertex_loss,
                    frequency_loss,
                    weighted_vertex: weights.lambda_v[l] * vertex_loss,
                    weighted_frequency: weights.lambda_f[l] * frequency_loss,
                });
            }
            json!({
                "weights": weights,
                "joint_loss": joint_error,
                "weighted_joint": joint_error.map(|j| j * weights.lambda_j),
                "levels": terms,
                "total": null,
            })
        }
    };

    emit(json!({
        "mpve_mm": mpve,
        "mpjpe_mm": joint_error,
        "chamfer_mm": chamfer,
        "chamfer_mode": mode,
        "msnr": { "mean": report.mean, "clamp_count": report.clamp_count },
        "frequency_loss": freq,
        "log_base": settings.log_base,
        "loss": loss,
    }))
}

fn cmd_subdivide(settings: &Settings, args: &SubdivideArgs) -> Result<()> {
    let levels = args.levels as usize;
    let is_model = args.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let name = format!("{}_subdiv{levels}", stem(&args.input));
    fs::create_dir_all(&settings.out)?;
    if is_model {
        let text = fs::read_to_string(&args.input)?;
        let model = load_model_json(&text, args.input.parent())?;
        let refined = subdivide_model(&model, levels)?;
        let path = args.output.clone().unwrap_or_else(|| settings.out.join(format!("{name}.json")));
        fs::write(&path, model_to_json(&refined))?;
        let template = refined.template();
        emit(json!({
            "path": display(&path),
            "vertices": template.vertex_count(),
            "faces": template.face_count(),
            "joints": refined.joints().len(),
            "mesh_hash": template.content_hash(),
        }))
    } else {
        let mesh = read_obj(&args.input)?;
        let refined = subdivide_mesh(&mesh, levels)?;
        let path = args.output.clone().unwrap_or_else(|| settings.out.join(format!("{name}.obj")));
        write_obj_file(&refined, &path)?;
        emit(json!({
            "path": display(&path),
            "vertices": refined.vertex_count(),
            "faces": refined.face_count(),
            "mesh_hash": refined.content_hash(),
        }))
    }
}

fn cmd_noise_sweep(settings: &Settings, config: &RunConfig, args: &SweepArgs) -> Result<()> {
    let mesh = read_obj(&args.mesh)?;
    let defaults = NoiseSweepConfig::default();
    let band_choice = args
        .bands
        .clone()
        .or_else(|| config.noise_sweep.bands.clone())
        .unwrap_or_else(|| "auto".into());
    let octave = make_octave_bands(mesh.vertex_count())?;
    match band_choice.as_str() {
        "auto" => {}
        "canonical" if octave.canonical => {}
        "canonical" => {
            return Err(arg_error(format!(
                "canonical bands need at least 12337 vertices, mesh has {}; use --bands auto",
                mesh.vertex_count()
            )))
        }
        other => return Err(arg_error(format!("--bands must be canonical or auto, got `{other}`"))),
    }
    let model = match (args.model, &config.noise_sweep.model) {
        (Some(m), _) => m,
        (None, Some(s)) => s.parse()?,
        (None, None) => defaults.model,
    };
    let sweep = NoiseSweepConfig {
        bands: octave.bands.clone(),
        amplitudes: args
            .amplitudes
            .clone()
            .or_else(|| config.noise_sweep.amplitudes.clone())
            .unwrap_or(defaults.amplitudes),
        trials: args.trials.or(config.noise_sweep.trials).unwrap_or(defaults.trials),
        seed: settings.seed,
        model,
    };
    if let Some(a) = sweep.amplitudes.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(arg_error(format!("amplitude {a} must be finite and >= 0")));
    }
    let basis = full_basis(settings, &mesh)?;
    let report = run_noise_sweep(&mesh, &basis, &sweep)?;
    fs::create_dir_all(&settings.out)?;
    let csv = settings.out.join("noise_sweep.csv");
    fs::write(&csv, write_sweep_csv(&report))?;
    write_provenance(
        &settings.out,
        &Provenance::new(
            &mesh,
            Some(settings.seed),
            "noise-sweep",
            json!({
                "mesh": display(&args.mesh),
                "bands": sweep.bands,
                "canonical_bands": octave.canonical,
                "amplitudes": sweep.amplitudes,
                "trials": sweep.trials,
                "model": sweep.model,
            }),
        ),
    )?;
    emit(json!({
        "path": display(&csv),
        "rows": report.rows.len(),
        "canonical_bands": octave.canonical,
        "seed": settings.seed,
        "mesh_hash": report.mesh_hash,
    }))
}

fn cmd_gradcheck(settings: &Settings, config: &RunConfig, args: &GradcheckArgs) -> Result<()> {
    let size = args.size.or(config.gradcheck.size).unwrap_or(30);
    if size > GRADCHECK_MAX_SIZE {
        return Err(arg_error(format!("--size must be at most {GRADCHECK_MAX_SIZE}")));
    }
    let report = gradient_check(settings.seed, size, args.corrupt)?;
    emit(serde_json::to_value(&report).map_err(|e| Error::Format(e.to_string()))?)?;
    if report.passed {
        eprintln!("gradcheck passed: relative error {:e}", report.relative_error);
        Ok(())
    } else {
        Err(Error::Numerical {
            message: format!("gradient check exceeded tolerance {:e}", report.tolerance),
            residual: report.relative_error,
        })
    }
}

fn cmd_snap(settings: &Settings, args: &SnapArgs) -> Result<()> {
    let template = read_obj(&args.template)?;
    let target = read_obj(&args.target)?;
    let snapped = snap_to_surface(&template, &target)?;
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| settings.out.join(format!("{}_snapped.obj", stem(&args.template))));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_obj_file(&snapped, &path)?;
    emit(json!({
        "path": display(&path),
        "vertices": snapped.vertex_count(),
        "mesh_hash": snapped.content_hash(),
    }))
}

fn run(cli: Cli) -> Result<()> {
    let config = RunConfig::load(cli.config.as_deref())?;
    let settings = resolve(&config, cli.seed, cli.out, cli.dense_ceiling, cli.allow_large, cli.log_base);
    match &cli.command {
        Command::Fixture(a) => cmd_fixture(&settings, a),
        Command::Validate { mesh } => cmd_validate(mesh),
        Command::Decompose(a) => cmd_decompose(&settings, a),
        Command::Metrics(a) => cmd_metrics(&settings, &config, a),
        Command::Subdivide(a) => cmd_subdivide(&settings, a),
        Command::NoiseSweep(a) => cmd_noise_sweep(&settings, &config, a),
        Command::Gradcheck(a) => cmd_gradcheck(&settings, &config, a),
        Command::Snap(a) => cmd_snap(&settings, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Input => 1,
                ErrorClass::Numerical => 2,
                ErrorClass::Io => 3,
            })
        }
    }
}
