use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use glassnerf::dataset::{Dataset, DatasetError, DatasetManifest, Split};
use glassnerf::eval::{
    evaluate, extract_glass_surface, surface_error, EvalError, EvalOptions, GlassPointCloud, MetricReport, OffsetStats,
    SurfaceError, DEFAULT_HIGHLIGHT_THRESHOLD, DEFAULT_THRESHOLD,
};
use glassnerf::geometry::Mat4;
use glassnerf::io::{write_depth_png, write_rgb_png, write_xyz, IoError};
use glassnerf::oracle::{generate_dataset, GenerateConfig, OracleError, SceneSpec, SplitCounts, DEPTH_SCALE};
use glassnerf::render::{render_image, Camera, RenderError};
use glassnerf::train::{train, Checkpoint, LogRow, TrainConfig, TrainError, TrainOptions, CHECKPOINT_FILE};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Environment variable holding the default worker-thread count.
const THREADS_ENV: &str = "GLASSNERF_THREADS";

#[derive(Parser)]
#[command(name = "glassnerf", version, about = "Radiance fields for scenes seen through glass")]
struct Cli {
    /// Worker threads for rendering and evaluation (training is single-threaded).
    #[arg(long, global = true, env = THREADS_ENV, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a posed dataset of an analytic scene.
    Generate(GenerateArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Render colour, decomposition and depth images from a checkpoint.
    Render(RenderArgs),
    /// Score a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Write the learned glass surface as an XYZ point cloud.
    ExtractGlass(ExtractArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Preset name (slab-checker, no-glass, showcase) or a scene JSON file.
    #[arg(long, default_value = "slab-checker")]
    scene: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SplitCounts::DESK.train)]
    train: usize,
    #[arg(long, default_value_t = SplitCounts::DESK.val)]
    val: usize,
    #[arg(long, default_value_t = SplitCounts::DESK.test)]
    test: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Large,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ablation {
    /// Glass network and view-dependent branch.
    Full,
    /// Plain radiance field.
    Vanilla,
    /// Straight rays, keep the view-dependent branch.
    NoGlass,
    /// Glass network, no view-dependent branch.
    NoViewDependent,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Built-in defaults to start from.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// Partial JSON configuration applied over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    ablation: Option<Ablation>,
    /// Weight of the offset regularizer.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    final_learning_rate: Option<f64>,
    #[arg(long)]
    rays: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Continue from a checkpoint; its stored configuration is used.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Leave wall-clock time out of the metrics log.
    #[arg(long)]
    deterministic: bool,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pose file: {camera_angle_x, width, height, frames: [{transform_matrix}]}.
    #[arg(long, conflicts_with = "data")]
    poses: Option<PathBuf>,
    /// Render the poses of a dataset split instead.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: SplitArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Glass-extraction threshold on ‖w·Δx‖ (cm).
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_HIGHLIGHT_THRESHOLD)]
    highlight_threshold: f64,
    /// Score raw float renders instead of 8-bit quantized ones.
    #[arg(long)]
    float: bool,
    /// Directory for gt | render | C_vd | C_vi | depth comparison grids.
    #[arg(long)]
    grids: Option<PathBuf>,
    /// Report path (printed to stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: SplitArg,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    State(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::State(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Render(e) => e.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Checkpoint(_) => CliError::State(e.to_string()),
            TrainError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| IoError::file(path, e).into())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Ok(Checkpoint::load(path)?)
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let scene = if Path::new(&args.scene).is_file() {
        let text = fs::read_to_string(&args.scene).map_err(|e| IoError::file(Path::new(&args.scene), e))?;
        SceneSpec::from_json(&text)?
    } else {
        SceneSpec::preset(&args.scene)?
    };
    let config = GenerateConfig {
        counts: SplitCounts {
            train: args.train,
            val: args.val,
            test: args.test,
        },
        width: args.width,
        height: args.height,
        seed: args.seed,
    };
    let manifest = generate_dataset(&scene, &config, &args.out)?;
    println!(
        "wrote {} views of `{}` at {}x{} to {}",
        manifest.frames.len(),
        scene.name,
        manifest.width,
        manifest.height,
        args.out.display()
    );
    Ok(())
}

fn train_config(args: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut config = match args.preset {
        Preset::Desk => TrainConfig::desk(),
        Preset::Large => TrainConfig::large(),
    };
    if let Some(path) = &args.config {
        let patch: serde_json::Value = read_json(path)?;
        config = config.with_overrides(&patch)?;
    }
    match args.ablation {
        Some(Ablation::Full) => {
            config.disable_glass = false;
            config.disable_view_dependent = false;
        }
        Some(Ablation::Vanilla) => config = config.vanilla(),
        Some(Ablation::NoGlass) => config.disable_glass = true,
        Some(Ablation::NoViewDependent) => config.disable_view_dependent = true,
        None => {}
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.final_learning_rate {
        config.final_learning_rate = v;
    }
    if let Some(v) = args.rays {
        config.rays_per_batch = v;
    }
    if let Some(v) = args.width {
        config.field.width = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let dataset = Dataset::load(&args.data, Split::Train)?;
    let resume = args.resume.as_deref().map(load_checkpoint).transpose()?;
    let config = match &resume {
        Some(ck) => ck.config.clone(),
        None => train_config(&args)?.fitted_to(&dataset.manifest),
    };
    write_json(
        &args.out.join("config.json"),
        &json!({ "dataset": args.data, "deterministic": args.deterministic, "train": config }),
    )?;
    let quiet = args.quiet;
    let total = config.iterations;
    let mut progress = |row: &LogRow| {
        if !quiet {
            eprintln!(
                "[{}/{}] loss {:.5} (render {:.5}, offset {:.4e}) lr {:.3e}",
                row.iteration, total, row.total_loss, row.render_loss, row.offset_loss, row.lr
            );
        }
    };
    let outcome = train(
        &dataset,
        &config,
        TrainOptions {
            out_dir: Some(&args.out),
            resume,
            deterministic: args.deterministic,
            stop_at: None,
            progress: Some(&mut progress),
        },
    )?;
    println!(
        "trained {} iterations; checkpoint {}",
        outcome.checkpoint.iteration,
        args.out.join(CHECKPOINT_FILE).display()
    );
    Ok(())
}

#[derive(Deserialize)]
struct PoseFrame {
    transform_matrix: Mat4,
}

#[derive(Deserialize)]
struct PoseFile {
    camera_angle_x: f64,
    width: usize,
    height: usize,
    frames: Vec<PoseFrame>,
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let cameras: Vec<Camera> = match (&args.poses, &args.data) {
        (Some(path), _) => {
            let poses: PoseFile = read_json(path)?;
            if poses.frames.is_empty() {
                return Err(CliError::Input(format!("{}: no frames", path.display())));
            }
            poses
                .frames
                .iter()
                .map(|f| {
                    let cam = Camera::from_fov(poses.width, poses.height, poses.camera_angle_x, f.transform_matrix);
                    cam.validate().map(|_| cam)
                })
                .collect::<Result<_, _>>()?
        }
        (None, Some(data)) => {
            let (manifest, _) = DatasetManifest::load(data)?;
            manifest
                .frames_in(args.split.into())
                .map(|(_, f)| manifest.camera(f))
                .collect()
        }
        (None, None) => return Err(CliError::Input("either --poses or --data is required".into())),
    };
    let render = ck.config.render_config();
    fs::create_dir_all(&args.out).map_err(|e| IoError::file(&args.out, e))?;
    for (i, cam) in cameras.iter().enumerate() {
        let img = render_image(&ck.model, cam, &render, |_, _, _| Ok(()))?;
        let (w, h) = (img.width, img.height);
        let stem = format!("{i:03}");
        write_rgb_png(&args.out.join(format!("{stem}_color.png")), w, h, &img.color)?;
        write_rgb_png(&args.out.join(format!("{stem}_vi.png")), w, h, &img.color_vi)?;
        if render.view_dependent {
            write_rgb_png(&args.out.join(format!("{stem}_vd.png")), w, h, &img.color_vd)?;
        }
        write_depth_png(
            &args.out.join(format!("{stem}_depth.png")),
            w,
            h,
            &img.depth,
            DEPTH_SCALE,
        )?;
    }
    write_json(
        &args.out.join("render.json"),
        &json!({
            "checkpoint": args.checkpoint,
            "views": cameras.len(),
            "depth_scale": DEPTH_SCALE,
            "view_dependent": render.view_dependent,
            "train": ck.config,
        }),
    )?;
    println!("rendered {} views to {}", cameras.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct GlassReport {
    threshold: f64,
    points: usize,
    offsets: OffsetStats,
    /// Absent when the dataset carries no glass ground truth or the cloud
    /// is empty.
    surface_error: Option<SurfaceError>,
    /// `surface_error.mean` relative to the scene extent.
    relative_error: Option<f64>,
}

#[derive(Serialize)]
struct EvalReport {
    checkpoint: PathBuf,
    dataset: PathBuf,
    metrics: MetricReport,
    glass: Option<GlassReport>,
    train: TrainConfig,
}

fn glass_report(
    ck: &Checkpoint,
    dataset: &Dataset,
    threshold: f64,
) -> Result<(Option<GlassReport>, GlassPointCloud), CliError> {
    let render = ck.config.render_config();
    if !render.use_glass {
        return Ok((None, GlassPointCloud::default()));
    }
    let cams: Vec<Camera> = dataset.views.iter().map(|v| v.camera.clone()).collect();
    let (cloud, offsets) = extract_glass_surface(&ck.model, &cams, &render, threshold)?;
    let slabs = dataset
        .manifest
        .ground_truth
        .as_ref()
        .map(|g| g.slabs.as_slice())
        .unwrap_or(&[]);
    let surface_error = if slabs.is_empty() {
        eprintln!("warning: dataset has no glass ground truth; surface error omitted");
        None
    } else if cloud.points.is_empty() {
        eprintln!("warning: no sample exceeded the glass threshold; surface error omitted");
        None
    } else {
        Some(surface_error(&cloud.points, slabs)?)
    };
    let report = GlassReport {
        threshold,
        points: cloud.points.len(),
        offsets,
        relative_error: surface_error.map(|e| e.mean / dataset.manifest.extent()),
        surface_error,
    };
    Ok((Some(report), cloud))
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let dataset = Dataset::load(&args.data, Split::Test)?;
    let options = EvalOptions {
        quantize: !args.float,
        highlight_threshold: args.highlight_threshold,
        grid_dir: args.grids.clone(),
    };
    let metrics = evaluate(&ck.model, &dataset, &ck.config.render_config(), &options)?;
    let (glass, _) = glass_report(&ck, &dataset, args.threshold)?;
    let report = EvalReport {
        checkpoint: args.checkpoint,
        dataset: args.data,
        metrics,
        glass,
        train: ck.config,
    };
    match &args.out {
        Some(path) => {
            write_json(path, &report)?;
            println!(
                "PSNR {:.3} dB, SSIM {:.4}; report {}",
                report.metrics.mean_psnr,
                report.metrics.mean_ssim,
                path.display()
            );
        }
        None => println!("{}", serde_json::to_string_pretty(&report).expect("serializable")),
    }
    Ok(())
}

fn cmd_extract(args: ExtractArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let dataset = Dataset::load(&args.data, args.split.into())?;
    if !ck.config.render_config().use_glass {
        return Err(CliError::Input(
            "checkpoint was trained without the glass network".into(),
        ));
    }
    let (report, cloud) = glass_report(&ck, &dataset, args.threshold)?;
    write_xyz(&args.out, &cloud.points)?;
    let report = report.expect("glass network enabled");
    write_json(
        &args.out.with_extension("json"),
        &json!({ "checkpoint": args.checkpoint, "dataset": args.data, "glass": report, "train": ck.config }),
    )?;
    println!("{} glass points written to {}", report.points, args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::Input("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::State(e.to_string()))?;
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Render(a) => cmd_render(a),
        Command::Eval(a) => cmd_eval(a),
        Command::ExtractGlass(a) => cmd_extract(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
