//! Command-line driver. `run` parses arguments, executes one subcommand
//! inside an exclusively locked output directory and writes a run manifest
//! next to the artifacts.

pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::database::{build_database_with, BuildOptions, Database, DatabaseError, ParameterGrid};
use crate::eos::{EosError, EosParams};
use crate::features::{
    features_from_radiographs, features_from_sequence, FeatureError, FeatureSet, DEFAULT_FIT_CELLS,
    DEFAULT_SMOOTHING_PX,
};
use crate::hydro::{run_and_sample, DensitySequence, HydroError, ImplosionSetup, SequenceIoError, SnapshotSchedule};
use crate::manifold::{
    estimate_parameters, fit_shock_kinematics, ood_score, Aggregate, KinematicsCloud, ManifoldError, Metric,
};
use crate::neural::{
    critic_scores, generate_ensemble, pretrain_feature_net, train_cgan_df, train_cwgan, GanConfig, GeneratorModel,
    LossHistory, NeuralError, Normalization, TrainingSet,
};
use crate::radiography::{
    abel_invert, add_scatter, forward_transmission, AttenuationModel, DensityProfile, Radiograph, RadiographyError,
    RadiographyGeometry, DEFAULT_SCATTER_BLUR_PX,
};
use plot::Series;
use report::{evaluate_case, perturbation_study, EvaluationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const LOCK_FILE: &str = ".hydrorad.lock";
pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Eos(#[from] EosError),
    #[error(transparent)]
    Hydro(#[from] HydroError),
    #[error(transparent)]
    Sequence(#[from] SequenceIoError),
    #[error(transparent)]
    Radiography(#[from] RadiographyError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Database(#[from] DatabaseError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error("IoFailure: {0}")]
    Io(#[from] std::io::Error),
    #[error("ParseFailure: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("MissingArtifact: {0}")]
    MissingArtifact(String),
    #[error("Locked: {0} is in use by another invocation")]
    Locked(String),
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub levels: usize,
    /// Fractional half-width of the hypercube around nominal.
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            half_width: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterConfig {
    /// Scatter added to synthetic radiographs.
    pub fraction: f64,
    /// Scatter fraction assumed when inverting.
    pub descatter_fraction: f64,
    pub blur_px: f64,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            fraction: 0.0,
            descatter_fraction: 0.0,
            blur_px: DEFAULT_SCATTER_BLUR_PX,
        }
    }
}

/// Every tunable of a run. Loaded from `--config` and then overridden by
/// flags; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub setup: ImplosionSetup,
    pub schedule: SnapshotSchedule,
    pub grid: GridConfig,
    pub gan: GanConfig,
    pub geometry: RadiographyGeometry,
    pub attenuation: AttenuationModel,
    pub scatter: ScatterConfig,
    pub normalization: Normalization,
    pub fit_cells: usize,
    pub smoothing_px: f64,
    pub metric: Metric,
    pub aggregate: Aggregate,
    pub ensemble_size: usize,
    pub dropout_at_test: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            setup: ImplosionSetup::default(),
            schedule: SnapshotSchedule::default(),
            grid: GridConfig::default(),
            gan: GanConfig::default(),
            geometry: RadiographyGeometry::default(),
            attenuation: AttenuationModel::default(),
            scatter: ScatterConfig::default(),
            normalization: Normalization::default(),
            fit_cells: DEFAULT_FIT_CELLS,
            smoothing_px: DEFAULT_SMOOTHING_PX,
            metric: Metric::L2,
            aggregate: Aggregate::Mean,
            ensemble_size: 1000,
            dropout_at_test: false,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn parameter_grid(&self) -> ParameterGrid {
        ParameterGrid::uniform(self.grid.levels, self.grid.half_width)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hydrorad",
    version,
    about = "Density reconstruction from radiograph features"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub grid_levels: Option<usize>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub lambda_gp: Option<f64>,
    #[arg(long, global = true)]
    pub metric: Option<Metric>,
    #[arg(long, global = true)]
    pub scatter_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub dropout_at_test: bool,
}

fn parse_offsets(s: &str) -> std::result::Result<[f64; 5], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected 5 values, got {}", v.len()))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one implosion and extract its features.
    Simulate {
        /// Fractional offsets of (T0, cs, s1, Γ0, cV), comma separated.
        #[arg(long, value_parser = parse_offsets, allow_hyphen_values = true)]
        offsets: Option<[f64; 5]>,
    },
    /// Build or resume the simulation database.
    Sweep {
        #[arg(long)]
        db: Option<PathBuf>,
        /// Stop after this many new records.
        #[arg(long)]
        max_new: Option<usize>,
    },
    /// Synthesize radiographs, extract their features and Abel-invert them.
    Radiograph {
        #[arg(long)]
        sequence: PathBuf,
    },
    /// Subpixel features of a density sequence or of radiographs.
    Extract {
        #[arg(long, conflicts_with = "radiographs")]
        sequence: Option<PathBuf>,
        /// Directory of radiograph_<n>.csv files.
        #[arg(long)]
        radiographs: Option<PathBuf>,
    },
    /// Train the Wasserstein cGAN with gradient penalty.
    TrainCwgan {
        #[arg(long)]
        db: PathBuf,
        /// Record indices withheld from training.
        #[arg(long, value_delimiter = ',')]
        holdout: Vec<usize>,
    },
    /// Pretrain the feature surrogate and train the data-fidelity cGAN.
    TrainCgandf {
        #[arg(long)]
        db: PathBuf,
        #[arg(long, value_delimiter = ',')]
        holdout: Vec<usize>,
    },
    /// Ensemble reconstruction from features.
    Reconstruct {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Project a sequence onto the database.
    Project {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Three-way comparison of truth, reconstruction and projection.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        reconstruction: PathBuf,
        #[arg(long)]
        projected: PathBuf,
        #[arg(long, default_value = "case")]
        case: String,
    },
    /// Sensitivity of the ensemble mean to feature perturbations.
    Perturb {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 300.0)]
        shock_um: f64,
        #[arg(long, default_value_t = 100.0)]
        edge_um: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Render SVG plots from stored artifacts.
    Plot {
        /// Loss-history CSV; one plot per term.
        #[arg(long)]
        losses: Option<PathBuf>,
        /// Density sequences to overlay.
        #[arg(long, value_delimiter = ',')]
        sequences: Vec<PathBuf>,
        /// Critic-score CSV for a histogram.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Database for the (v, a) kinematics scatter.
        #[arg(long)]
        db: Option<PathBuf>,
        /// Feature sets marked on the kinematics scatter.
        #[arg(long, value_delimiter = ',')]
        features: Vec<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Sweep { .. } => "sweep",
            Command::Radiograph { .. } => "radiograph",
            Command::Extract { .. } => "extract",
            Command::TrainCwgan { .. } => "train-cwgan",
            Command::TrainCgandf { .. } => "train-cgandf",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Project { .. } => "project",
            Command::Evaluate { .. } => "evaluate",
            Command::Perturb { .. } => "perturb",
            Command::Plot { .. } => "plot",
        }
    }
}

#[derive(Debug, Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    args: Vec<String>,
    config_hash: String,
    seed: u64,
    config: &'a RunConfig,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
}

/// Artifacts touched by one invocation.
struct Ctx {
    out: PathBuf,
    cfg: RunConfig,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
}

impl Ctx {
    fn input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingArtifact(path.display().to_string()),
            _ => CliError::Io(e),
        })?;
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    fn input_dir(&mut self, dir: &Path) -> Result<()> {
        if !dir.is_dir() {
            return Err(CliError::MissingArtifact(dir.display().to_string()));
        }
        self.inputs.push(InputRecord {
            path: dir.display().to_string(),
            sha256: String::new(),
        });
        Ok(())
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        fs::write(p, bytes)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s)
    }

    fn sequence(&mut self, path: &Path) -> Result<DensitySequence> {
        Ok(DensitySequence::from_bytes(&self.input(path)?)?)
    }

    fn features(&mut self, path: &Path) -> Result<FeatureSet> {
        Ok(serde_json::from_slice(&self.input(path)?)?)
    }
}

/// Holds the output-directory lock for the lifetime of a run.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(out: &Path) -> Result<Self> {
        fs::create_dir_all(out)?;
        let path = out.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked(out.display().to_string())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => {
            let bytes = fs::read(p).map_err(|_| CliError::MissingArtifact(p.display().to_string()))?;
            serde_json::from_slice(&bytes)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
        cfg.gan.seed = s;
    }
    if let Some(l) = g.grid_levels {
        cfg.grid.levels = l;
    }
    if let Some(e) = g.epochs {
        cfg.gan.epochs = e;
    }
    if let Some(l) = g.lambda_gp {
        cfg.gan.lambda_gp = l;
    }
    if let Some(m) = g.metric {
        cfg.metric = m;
    }
    if let Some(f) = g.scatter_fraction {
        cfg.scatter.fraction = f;
    }
    if g.dropout_at_test {
        cfg.dropout_at_test = true;
    }
    cfg.gan.validate()?;
    Ok(cfg)
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    // A bad configuration is a usage error, like a bad flag.
    let cfg = match resolve_config(&cli.global) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: --config: {e}");
            return EXIT_USAGE;
        }
    };
    match execute(cli, cfg, args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DOMAIN
        }
    }
}

fn execute(cli: Cli, cfg: RunConfig, args: Vec<String>) -> Result<()> {
    let out = cli.global.out.clone();
    let _lock = DirLock::acquire(&out)?;
    let name = cli.command.name();
    let mut ctx = Ctx {
        out,
        cfg,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    if let Some(p) = &cli.global.config {
        ctx.input(p)?;
    }
    dispatch(&mut ctx, cli.command)?;
    let manifest = RunManifest {
        tool: "hydrorad",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: name,
        args,
        config_hash: ctx.cfg.hash(),
        seed: ctx.cfg.seed,
        config: &ctx.cfg,
        inputs: std::mem::take(&mut ctx.inputs),
        outputs: std::mem::take(&mut ctx.outputs),
    };
    let mut s = serde_json::to_string_pretty(&manifest)?;
    s.push('\n');
    fs::write(ctx.out.join(RUN_MANIFEST), s)?;
    Ok(())
}

fn load_split(ctx: &mut Ctx, db: &Path, holdout: &[usize]) -> Result<TrainingSet> {
    ctx.input_dir(db)?;
    let db = Database::open(db)?;
    let records: Vec<_> = db
        .load_all()?
        .into_iter()
        .filter(|r| !holdout.contains(&r.index))
        .collect();
    Ok(TrainingSet::from_records(&records, ctx.cfg.normalization)?)
}

fn load_generator(ctx: &mut Ctx, path: &Path) -> Result<GeneratorModel> {
    ctx.input(path)?;
    Ok(crate::neural::load_generator(path)?)
}

fn dispatch(ctx: &mut Ctx, command: Command) -> Result<()> {
    let cfg = ctx.cfg.clone();
    match command {
        Command::Simulate { offsets } => {
            let nominal = EosParams::nominal();
            let params = match offsets {
                Some(o) => nominal.with_offsets(o),
                None => nominal,
            };
            params.validate()?;
            let seq = run_and_sample(&cfg.setup, &params, &cfg.schedule)?;
            let features = features_from_sequence(&seq, cfg.fit_cells)?;
            ctx.write("sequence.ds", seq.to_bytes()?)?;
            ctx.write_json("features.json", &features)?;
            ctx.write_json("params.json", &params)?;
        }
        Command::Sweep { db, max_new } => {
            let dir = db.unwrap_or_else(|| ctx.out.join("db"));
            fs::create_dir_all(&dir)?;
            let opts = BuildOptions {
                max_new,
                ..BuildOptions::default()
            };
            let manifest = build_database_with(&cfg.parameter_grid(), &cfg.setup, &cfg.schedule, &dir, &opts)?;
            ctx.outputs.push(dir.display().to_string());
            ctx.write_json(
                "sweep_summary.json",
                &serde_json::json!({
                    "records": manifest.record_count,
                    "failures": manifest.failures.len(),
                    "complete": manifest.is_complete(),
                    "config_hash": manifest.config_hash,
                }),
            )?;
        }
        Command::Radiograph { sequence } => {
            let seq = ctx.sequence(&sequence)?;
            let mut rads = Vec::with_capacity(seq.snapshots());
            let mut inverted = Vec::with_capacity(seq.data.len());
            for n in 0..seq.snapshots() {
                let direct = forward_transmission(
                    DensityProfile::new(seq.snapshot(n), seq.dr),
                    &cfg.geometry,
                    &cfg.attenuation,
                )?;
                let rad = add_scatter(&direct, cfg.scatter.fraction, cfg.scatter.blur_px)?;
                let p = ctx.path(&format!("radiograph_{n}.csv"));
                rad.write_csv(&p)?;
                inverted.extend(abel_invert(
                    &rad,
                    &cfg.attenuation,
                    cfg.scatter.descatter_fraction,
                    cfg.scatter.blur_px,
                    seq.points,
                    seq.dr,
                )?);
                rads.push(rad);
            }
            let features = features_from_radiographs(&rads, &seq.times, cfg.smoothing_px)?;
            ctx.write_json("radiograph_features.json", &features)?;
            let abel = DensitySequence::new(seq.points, seq.dr, seq.times.clone(), inverted);
            ctx.write("abel_sequence.ds", abel.to_bytes()?)?;
        }
        Command::Extract { sequence, radiographs } => {
            let features = match (sequence, radiographs) {
                (Some(s), _) => {
                    let seq = ctx.sequence(&s)?;
                    features_from_sequence(&seq, cfg.fit_cells)?
                }
                (None, Some(dir)) => {
                    let mut rads: Vec<Radiograph> = Vec::new();
                    for n in 0..cfg.schedule.count {
                        let p = dir.join(format!("radiograph_{n}.csv"));
                        ctx.input(&p)?;
                        rads.push(Radiograph::read_csv(&p, cfg.geometry.clone())?);
                    }
                    features_from_radiographs(&rads, &cfg.schedule.times(), cfg.smoothing_px)?
                }
                (None, None) => {
                    return Err(CliError::InvalidArgument(
                        "extract needs --sequence or --radiographs".into(),
                    ))
                }
            };
            ctx.write_json("features.json", &features)?;
        }
        Command::TrainCwgan { db, holdout } => {
            let set = load_split(ctx, &db, &holdout)?;
            let (model, history) = train_cwgan(&set, &cfg.gan)?;
            let p = ctx.path("cwgan.hrnw");
            model.save(&p)?;
            ctx.write("cwgan_losses.csv", history.to_csv())?;
            let scores = critic_scores(&model, &set)?;
            let mut csv = String::from("record,score\n");
            for (i, s) in set.source.iter().zip(&scores) {
                csv.push_str(&format!("{i},{s:?}\n"));
            }
            ctx.write("critic_scores.csv", csv)?;
        }
        Command::TrainCgandf { db, holdout } => {
            let set = load_split(ctx, &db, &holdout)?;
            let (fnet, fhist) = pretrain_feature_net(&set, &cfg.gan)?;
            let p = ctx.path("feature_net.hrnw");
            fnet.save(&p)?;
            ctx.write("feature_losses.csv", fhist.to_csv())?;
            let (model, history) = train_cgan_df(&set, &fnet, cfg.setup.shell_mass(), &cfg.gan)?;
            let p = ctx.path("cgandf.hrnw");
            model.save(&p)?;
            ctx.write("cgandf_losses.csv", history.to_csv())?;
        }
        Command::Reconstruct { model, features, n } => {
            let gen = load_generator(ctx, &model)?;
            let feats = ctx.features(&features)?;
            let n = n.unwrap_or(cfg.ensemble_size);
            let ens = generate_ensemble(&gen, &feats, n, cfg.dropout_at_test, cfg.seed)?;
            ctx.write("reconstruction.ds", ens.mean.to_bytes()?)?;
            let masses: Vec<f64> = (0..ens.mean.snapshots()).map(|k| ens.mean.mass(k)).collect();
            ctx.write_json(
                "reconstruction_summary.json",
                &serde_json::json!({
                    "samples": n,
                    "dropout_at_test": cfg.dropout_at_test,
                    "spread_g_per_cc": ens.spread(),
                    "mass_g": masses,
                }),
            )?;
        }
        Command::Project { db, sequence, top_k } => {
            ctx.input_dir(&db)?;
            let target = ctx.sequence(&sequence)?;
            let records = Database::open(&db)?.load_all()?;
            let result = estimate_parameters(&records, &target, cfg.metric, cfg.aggregate)?;
            ctx.write_json("projection.json", &result.to_json(top_k))?;
            ctx.write("projected.ds", result.projected.to_bytes()?)?;
        }
        Command::Evaluate {
            truth,
            reconstruction,
            projected,
            case,
        } => {
            let t = ctx.sequence(&truth)?;
            let r = ctx.sequence(&reconstruction)?;
            let p = ctx.sequence(&projected)?;
            let rho_ref = cfg.normalization.rho_ref;
            let report = EvaluationReport {
                rho_ref,
                rows: vec![evaluate_case(&case, &t, &r, &p, rho_ref)?],
            };
            ctx.write_json("report.json", &report)?;
            ctx.write("report.csv", report.to_csv())?;
        }
        Command::Perturb {
            model,
            features,
            truth,
            shock_um,
            edge_um,
            n,
        } => {
            let gen = load_generator(ctx, &model)?;
            let feats = ctx.features(&features)?;
            let t = ctx.sequence(&truth)?;
            let rep = perturbation_study(&gen, &feats, &t, shock_um, edge_um, n, cfg.dropout_at_test, cfg.seed)?;
            ctx.write_json("perturbation.json", &rep)?;
        }
        Command::Plot {
            losses,
            sequences,
            scores,
            db,
            features,
        } => emit_plots(ctx, losses, sequences, scores, db, features)?,
    }
    Ok(())
}

fn emit_plots(
    ctx: &mut Ctx,
    losses: Option<PathBuf>,
    sequences: Vec<PathBuf>,
    scores: Option<PathBuf>,
    db: Option<PathBuf>,
    features: Vec<PathBuf>,
) -> Result<()> {
    if let Some(p) = losses {
        let text = String::from_utf8_lossy(&ctx.input(&p)?).into_owned();
        let history = LossHistory::from_csv(&text)?;
        for term in history.terms() {
            let pts = history.series(&term).into_iter().map(|(e, v)| (e as f64, v)).collect();
            let svg = plot::line_plot(
                &term,
                "epoch",
                "loss",
                &[Series {
                    label: term.clone(),
                    points: pts,
                }],
            );
            ctx.write(&format!("loss_{term}.svg"), svg)?;
        }
    }
    if !sequences.is_empty() {
        let seqs = sequences.iter().map(|p| ctx.sequence(p)).collect::<Result<Vec<_>>>()?;
        for n in 0..seqs[0].snapshots() {
            let series: Vec<Series> = seqs
                .iter()
                .zip(&sequences)
                .map(|(s, p)| Series {
                    label: p
                        .file_stem()
                        .map(|x| x.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    points: s.radii().into_iter().zip(s.snapshot(n).iter().copied()).collect(),
                })
                .collect();
            let title = format!("density at {} us", seqs[0].times[n]);
            ctx.write(
                &format!("density_{n}.svg"),
                plot::line_plot(&title, "r [cm]", "rho [g/cc]", &series),
            )?;
        }
    }
    if let Some(p) = scores {
        let text = String::from_utf8_lossy(&ctx.input(&p)?).into_owned();
        let values: Vec<f64> = text
            .lines()
            .skip(1)
            .filter_map(|l| l.split(',').nth(1).and_then(|v| v.parse().ok()))
            .collect();
        ctx.write(
            "critic_histogram.svg",
            plot::histogram("critic scores", "score", &values, 30, &[]),
        )?;
    }
    if let Some(dir) = db {
        ctx.input_dir(&dir)?;
        let records = Database::open(&dir)?.load_all()?;
        let cloud = KinematicsCloud::from_features(records.iter().map(|r| &r.features))?;
        let pts: Vec<(f64, f64)> = cloud.points.iter().map(|p| (p[0], p[1])).collect();
        let mut marked = Vec::new();
        let mut scores = Vec::new();
        for p in &features {
            let f = ctx.features(p)?;
            let kin = fit_shock_kinematics(&f)?;
            let label = p
                .file_stem()
                .map(|x| x.to_string_lossy().into_owned())
                .unwrap_or_default();
            scores.push((label.clone(), ood_score(&cloud, &kin)));
            marked.push((label, (kin.v_cm_per_us, kin.a_cm_per_us2)));
        }
        ctx.write(
            "kinematics.svg",
            plot::scatter("shock kinematics", "v [cm/us]", "a [cm/us^2]", &pts, &marked),
        )?;
        ctx.write_json("ood_scores.json", &scores)?;
    }
    if ctx.outputs.is_empty() {
        return Err(CliError::InvalidArgument("plot needs at least one artifact".into()));
    }
    Ok(())
}
