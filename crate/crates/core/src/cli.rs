//! The `riverwatch` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (bad or missing
//! input), 3 internal error. Logs go to stderr; only results go to stdout.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classes::ClassRaster;
use crate::error::{Error, Result};
use crate::forest::{
    cross_validate, load_model, save_model, train_forest, training_set_from_scene, Hyperparams,
};
use crate::fsutil::{write_atomic, StagedDir};
use crate::indices::{compute_feature_stack, compute_index, FeatureMode, IndexKind};
use crate::monitor::{Aoi, Monitor, MonitorConfig};
use crate::morphology::Kernel;
use crate::pipeline::{self, PipelineKind};
use crate::raster::{load_scene, save_scene, BandLabel, Raster};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "riverwatch",
    version,
    about = "Waste detection and monitoring over multispectral scenes"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a spectral index, or the whole feature stack, as a scene.
    Index(IndexArgs),
    /// Train a random forest on labeled pixels and write the model JSON.
    Train(TrainArgs),
    /// Stratified k-fold cross-validation; prints a JSON report.
    Cv(CvArgs),
    /// Classify every pixel; writes a class_id/confidence scene.
    Classify(ClassifyArgs),
    /// Landfill hot-spot detection.
    Hotspot(PipelineArgs),
    /// River-blockage detection with morphological cleaning.
    Blockage(BlockageArgs),
    /// Render overlay.png and heatmap.png from a classified scene.
    Render(RenderArgs),
    /// Monitor store operations.
    #[command(subcommand)]
    Monitor(MonitorCommand),
    /// Serve the monitor HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Input scene directory.
    #[arg(long)]
    pub scene: PathBuf,
    /// Index to compute; omit to write every feature of --features.
    #[arg(long)]
    pub index: Option<IndexKind>,
    /// Feature layout when --index is omitted: cross-sensor or sentinel-full.
    #[arg(long, default_value_t = FeatureMode::CrossSensor)]
    pub features: FeatureMode,
    /// Output scene directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForestArgs {
    /// Feature layout: cross-sensor or sentinel-full.
    #[arg(long, default_value_t = FeatureMode::CrossSensor)]
    pub features: FeatureMode,
    /// Number of trees.
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// Maximum tree depth (default: unbounded).
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Minimum samples per leaf.
    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,
    /// Features tried per split (default: floor(sqrt(F))).
    #[arg(long)]
    pub mtry: Option<usize>,
    /// Random seed.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl ForestArgs {
    fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            n_trees: self.trees,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            mtry: self.mtry,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Input scene directory.
    #[arg(long)]
    pub scene: PathBuf,
    /// Single-band label scene: 0 unlabeled, 1..5 class id + 1.
    #[arg(long)]
    pub labels: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub forest: ForestArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Input scene directory.
    #[arg(long)]
    pub scene: PathBuf,
    /// Single-band label scene: 0 unlabeled, 1..5 class id + 1.
    #[arg(long)]
    pub labels: PathBuf,
    /// Number of folds.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub forest: ForestArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Input scene directory.
    #[arg(long)]
    pub scene: PathBuf,
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Output scene directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Input scene directory.
    #[arg(long)]
    pub scene: PathBuf,
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory: report.json, classified/, overlay.png, heatmap.png.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BlockageArgs {
    #[command(flatten)]
    pub common: PipelineArgs,
    /// Side of the square structuring element (odd).
    #[arg(long, default_value_t = 5)]
    pub kernel_size: usize,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Classified scene directory (class_id and optional confidence bands).
    #[arg(long)]
    pub classified: PathBuf,
    /// Output directory for overlay.png and heatmap.png.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum MonitorCommand {
    /// Ingest every new scene of every AOI once; prints a JSON summary.
    Poll(MonitorRoot),
    /// Register an AOI from a JSON file.
    Register(RegisterArgs),
}

#[derive(Debug, Args)]
pub struct MonitorRoot {
    /// Monitor root holding store/, outbox/ and artifacts/.
    #[arg(long)]
    pub root: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[command(flatten)]
    pub root: MonitorRoot,
    /// AOI definition (JSON object).
    #[arg(long)]
    pub aoi: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub root: MonitorRoot,
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.threads {
        Some(n) => crate::with_threads(n as usize, || run(cli.command)),
        None => run(cli.command),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log::error!("{e}");
            if e.is_data_error() {
                EXIT_DATA
            } else {
                EXIT_INTERNAL
            }
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Index(a) => index(&a),
        Command::Train(a) => train(&a),
        Command::Cv(a) => cv(&a),
        Command::Classify(a) => classify(&a),
        Command::Hotspot(a) => run_pipeline(PipelineKind::Hotspot, &a, Kernel::default()),
        Command::Blockage(a) => {
            let kernel = Kernel::new(a.kernel_size)?;
            run_pipeline(PipelineKind::Blockage, &a.common, kernel)
        }
        Command::Render(a) => render(&a),
        Command::Monitor(MonitorCommand::Poll(a)) => {
            let monitor = Monitor::open(MonitorConfig::under(&a.root))?;
            let summary = monitor.poll_once()?;
            monitor.wait_for_dispatch();
            print_json(&summary)
        }
        Command::Monitor(MonitorCommand::Register(a)) => {
            let text = std::fs::read_to_string(&a.aoi).map_err(|e| Error::io(&a.aoi, e))?;
            let aoi: Aoi = serde_json::from_str(&text).map_err(|e| Error::json(&a.aoi, e))?;
            let monitor = Monitor::open(MonitorConfig::under(&a.root.root))?;
            print_json(&monitor.register_aoi(aoi)?)
        }
        Command::Serve(a) => {
            let monitor = Monitor::open(MonitorConfig::under(&a.root.root))?;
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::io("tokio runtime", e))?;
            rt.block_on(crate::monitor::serve(monitor, a.addr))
                .map_err(|e| Error::io(a.addr.to_string(), e))
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).expect("serializable");
    writeln!(out).map_err(|e| Error::io("stdout", e))
}

fn save_scene_staged(raster: &Raster, out: &Path) -> Result<()> {
    let stage = StagedDir::new(out)?;
    save_scene(raster, stage.path())?;
    stage.commit()?;
    Ok(())
}

fn index(a: &IndexArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let mut meta = scene.metadata().clone();
    meta.nodata = f32::NAN;
    let planes = match a.index {
        Some(kind) => {
            let plane = compute_index(&scene, kind)?;
            meta.band_labels = vec![BandLabel::Other(kind.name().into())];
            vec![plane.values]
        }
        None => {
            let stack = compute_feature_stack(&scene, a.features)?;
            meta.band_labels = stack
                .feature_names()
                .iter()
                .map(|n| n.parse())
                .collect::<Result<_>>()?;
            let valid = stack.valid().bits();
            stack
                .planes()
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(valid)
                        .map(|(&v, &ok)| if ok { v } else { f32::NAN })
                        .collect()
                })
                .collect()
        }
    };
    save_scene_staged(&Raster::from_planes(meta, planes)?, &a.out)
}

fn training_data(
    scene: &Path,
    labels: &Path,
    mode: FeatureMode,
) -> Result<crate::forest::TrainingSet> {
    let scene = load_scene(scene)?;
    let labels = load_scene(labels)?;
    training_set_from_scene(&scene, &labels, mode)
}

fn train(a: &TrainArgs) -> Result<()> {
    let data = training_data(&a.scene, &a.labels, a.forest.features)?;
    let hp = a.forest.hyperparams();
    log::info!(
        "training {} trees on {} samples (seed {})",
        hp.n_trees,
        data.len(),
        hp.seed
    );
    let forest = train_forest(&data, &hp)?;
    save_model(&forest, &a.out)
}

fn cv(a: &CvArgs) -> Result<()> {
    let data = training_data(&a.scene, &a.labels, a.forest.features)?;
    let report = cross_validate(&data, &a.forest.hyperparams(), a.k)?;
    log::info!(
        "{}-fold accuracy {:.4} (seed {})",
        report.k,
        report.accuracy,
        report.seed
    );
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_atomic(out, json.as_bytes())?;
    }
    print_json(&report)
}

fn classify(a: &ClassifyArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let forest = load_model(&a.model)?;
    let classes = pipeline::classify(&scene, &forest)?;
    save_scene_staged(&classes.to_raster(scene.metadata())?, &a.out)
}

fn run_pipeline(kind: PipelineKind, a: &PipelineArgs, kernel: Kernel) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let forest = load_model(&a.model)?;
    let (classification, report) = pipeline::run(kind, &scene, &forest, kernel)?;
    pipeline::write_outputs(&a.out, scene.metadata(), &classification, &report)?;
    print_json(&report)
}

fn render(a: &RenderArgs) -> Result<()> {
    let raster = load_scene(&a.classified)?;
    let classes = ClassRaster::from_raster(&raster, crate::classes::default_class_names())?;
    let stage = StagedDir::new(&a.out)?;
    pipeline::write_renders(stage.path(), &classes)?;
    stage.commit()?;
    Ok(())
}
