//! Command-line front end: `synth`, `features`, `rank-channels` and `run`.
//!
//! Every command is a pure function of its inputs and seed. Output files
//! carry no timestamps or timings, so reruns are byte-identical.

use crate::corpus::{load_manifest, Group, SyntheticCohort, SyntheticSpec};
use crate::model::{save_checkpoint, Modality, ModelConfig};
use crate::pipeline::{
    manifest_features, matrix_subsets, needs_ranking, prepare_cohort, reference_importance, resolve_subset,
    PipelineError, Result,
};
use crate::selection::{ChannelSpec, ImportanceReport};
use crate::spectral::{BandPowerTable, SpectralParams};
use crate::trainer::{render_table, run_cell, run_matrix_with_models, CellSpec, PreparedCohort, TrainConfig};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable read when no seed is given on the command line or in the config.
pub const SEED_ENV: &str = "BISAM_SEED";

/// `println!` that tolerates a closed stdout (for example when piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "bisam", version, about = "Freezing-of-gait classification from EEG band powers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort (manifest plus signal files).
    Synth(SynthArgs),
    /// Extract band-power features for every participant of a manifest.
    Features(FeaturesArgs),
    /// Train the all-channel reference model and write channel importances.
    RankChannels(RunArgs),
    /// Train and evaluate one model, or the full nine-model matrix.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for `manifest.json` and `signals/`.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON generator spec; fields left out take their defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Override the effect size from --spec (0 gives identical PDFOG+/- distributions).
    #[arg(long)]
    pub effect_size: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output CSV (`subject_id,channel,theta,alpha,beta,gamma`).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub nw: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Window length in seconds.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run config; command-line flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Precomputed feature CSV; skips extraction.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Run directory for every output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// eeg, dv or multimodal.
    #[arg(long)]
    pub modality: Option<Modality>,
    /// all, paper16, paper8, paper4 or computed:K.
    #[arg(long)]
    pub channels: Option<ChannelSpec>,
    /// Concurrent matrix cells; 0 uses every core.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Permutation repetitions for channel ranking.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Run all nine modality and channel-count combinations.
    #[arg(long)]
    pub matrix: bool,
}

/// Everything a `run` or `rank-channels` invocation depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub features: Option<PathBuf>,
    /// Not echoed into the resolved config, so runs in different directories
    /// produce identical files.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    pub modality: Modality,
    pub channels: ChannelSpec,
    pub spectral: SpectralParams,
    pub split_ratio: f64,
    pub importance_repetitions: usize,
    /// Architecture template; modality, channels and seed are set per model.
    pub model: ModelConfig,
    /// Optimiser settings; the seed is set per model.
    pub train: TrainConfig,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub matrix: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            features: None,
            output_dir: PathBuf::from("runs/latest"),
            modality: Modality::MultiModal,
            channels: ChannelSpec::Paper8,
            spectral: SpectralParams::default(),
            split_ratio: 0.8,
            importance_repetitions: 10,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            seed: None,
            jobs: 1,
            matrix: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| PipelineError::Json { path: path.into(), source })
    }

    /// Config file (if any) with flag overrides applied and the seed resolved.
    pub fn resolve(args: &RunArgs, env_seed: Option<&str>) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        macro_rules! set {
            ($($field:ident <- $value:expr),*) => { $(if let Some(v) = $value.clone() { cfg.$field = v; })* };
        }
        set!(manifest <- args.manifest.clone().map(Some), features <- args.features.clone().map(Some),
             output_dir <- args.out, modality <- args.modality, channels <- args.channels,
             jobs <- args.jobs, importance_repetitions <- args.repetitions);
        if let Some(e) = args.epochs {
            cfg.train.epochs = e;
        }
        cfg.matrix |= args.matrix;
        cfg.seed = match (args.seed, cfg.seed, env_seed) {
            (Some(s), _, _) | (None, Some(s), _) => Some(s),
            (None, None, Some(text)) => Some(
                text.trim()
                    .parse()
                    .map_err(|_| PipelineError::Config(format!("{SEED_ENV}={text:?} is not an unsigned integer")))?,
            ),
            (None, None, None) => None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.seed.is_none() {
            return bad(format!("no seed given; pass --seed, set \"seed\" in the config or export {SEED_ENV}"));
        }
        match &self.manifest {
            None => return bad("no cohort manifest given; pass --manifest or set \"manifest\"".into()),
            Some(p) if !p.is_file() => return bad(format!("manifest {} not found", p.display())),
            _ => {}
        }
        if let Some(p) = self.features.as_ref().filter(|p| !p.is_file()) {
            return bad(format!("feature table {} not found", p.display()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio {} outside (0, 1)", self.split_ratio));
        }
        // Channels are filled in per model, so only the architecture is checked here.
        ModelConfig { modality: Modality::DescriptiveOnly, ..self.model.clone() }.validate()?;
        self.train.validate()?;
        Ok(())
    }

    pub fn master_seed(&self) -> u64 {
        self.seed.expect("validated")
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| PipelineError::Io { path: path.into(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| PipelineError::Json { path: path.into(), source })?;
    text.push('\n');
    write_file(path, text)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| PipelineError::Io { path: path.into(), source })
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if jobs == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?
        .install(f)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let seed =
        args.seed.ok_or_else(|| PipelineError::Config(format!("no seed given; pass --seed or export {SEED_ENV}")))?;
    let mut spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| PipelineError::Io { path: p.clone(), source })?;
            serde_json::from_str(&text).map_err(|source| PipelineError::Json { path: p.clone(), source })?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(e) = args.effect_size {
        spec.effect_size = e;
    }
    let cohort = SyntheticCohort::generate(&spec, seed)?;
    let manifest = cohort.write(&args.out)?;
    say!("wrote {} participants to {}", manifest.participants.len(), args.out.display());
    for group in [Group::HealthyControl, Group::PdFogMinus, Group::PdFogPlus] {
        let idx: Vec<usize> = (0..cohort.len()).filter(|&i| cohort.participants[i].group == group).collect();
        if idx.is_empty() {
            continue;
        }
        let secs: Vec<f64> = idx.iter().map(|&i| cohort.n_samples(i) as f64 / spec.sampling_rate_hz).collect();
        let mean = secs.iter().sum::<f64>() / secs.len() as f64;
        let (lo, hi) = secs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
        say!("  {:<9} n={:<3} recording {:.1} s mean, {:.1}-{:.1} s range", group.code(), idx.len(), mean, lo, hi);
    }
    Ok(())
}

pub fn cmd_features(args: &FeaturesArgs) -> Result<()> {
    let mut params = SpectralParams::default();
    params.nw = args.nw.unwrap_or(params.nw);
    params.k = args.k.unwrap_or(params.k);
    params.window_s = args.window.unwrap_or(params.window_s);
    params.overlap = args.overlap.unwrap_or(params.overlap);
    let manifest = load_manifest(&args.manifest)?;
    let table = with_pool(args.jobs, || manifest_features(&manifest, &params))?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let file =
        std::fs::File::create(&args.out).map_err(|source| PipelineError::Io { path: args.out.clone(), source })?;
    table.write_csv(std::io::BufWriter::new(file))?;
    say!(
        "wrote {} rows ({} subjects x {} channels) to {}",
        table.subject_ids().len() * table.channels().len(),
        table.subject_ids().len(),
        table.channels().len(),
        args.out.display()
    );
    Ok(())
}

/// Loads the cohort, obtains features and applies the split.
fn load_prepared(cfg: &RunConfig) -> Result<PreparedCohort> {
    let manifest = load_manifest(cfg.manifest.as_ref().expect("validated"))?;
    let table = match &cfg.features {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
            let table = BandPowerTable::read_csv(std::io::BufReader::new(file))?;
            if table.channels() != manifest.channel_names.as_slice() {
                return Err(PipelineError::Config(format!(
                    "{}: channels differ from the manifest's channel list",
                    path.display()
                )));
            }
            table
        }
        None => {
            eprintln!("extracting features for {} participants", manifest.participants.len());
            manifest_features(&manifest, &cfg.spectral)?
        }
    };
    prepare_cohort(&table, &manifest.participants, cfg.split_ratio, cfg.master_seed())
}

fn rank(cfg: &RunConfig, data: &PreparedCohort, out: &Path) -> Result<(crate::model::Bisam, ImportanceReport)> {
    eprintln!("training the {}-channel reference model for channel ranking", data.channels.len());
    let (model, report) =
        reference_importance(data, &cfg.model, &cfg.train, cfg.importance_repetitions, cfg.master_seed())?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_file(&out.join("importance.csv"), csv)?;
    Ok((model, report))
}

pub fn cmd_rank_channels(cfg: &RunConfig) -> Result<()> {
    let out = &cfg.output_dir;
    create_dir(out)?;
    write_json(&out.join("config.resolved.json"), cfg)?;
    with_pool(cfg.jobs, || {
        let data = load_prepared(cfg)?;
        let (model, report) = rank(cfg, &data, out)?;
        save_checkpoint(&model, out.join("checkpoint.json"))?;
        for (ch, score, r) in report.ranked().into_iter().take(16) {
            say!("{r:>2}  {ch:<5} {score:.4}");
        }
        Ok(())
    })
}

/// Summary written to `metrics.json` by a single-model run.
#[derive(Debug, Serialize)]
struct SingleRunReport<'a> {
    master_seed: u64,
    test_ids: &'a [String],
    #[serde(flatten)]
    cell: &'a crate::trainer::CellResult,
}

pub fn cmd_run(cfg: &RunConfig) -> Result<()> {
    let out = &cfg.output_dir;
    create_dir(out)?;
    write_json(&out.join("config.resolved.json"), cfg)?;
    let data = with_pool(0, || load_prepared(cfg))?;
    let report = if needs_ranking(cfg.channels) { Some(rank(cfg, &data, out)?.1) } else { None };
    let seed = cfg.master_seed();

    if cfg.matrix {
        let subsets = matrix_subsets(cfg.channels, report.as_ref(), &data.channels)?;
        eprintln!("training 9 models");
        let (result, models) = run_matrix_with_models(&data, &subsets, &cfg.model, &cfg.train, seed, cfg.jobs)?;
        write_json(&out.join("metrics.json"), &result)?;
        let table = result.render_table();
        write_file(&out.join("table.txt"), &table)?;
        let dir = out.join("checkpoints");
        create_dir(&dir)?;
        // The row number keeps names unique when two subsets have the same size.
        for (row, (model, cell)) in models.iter().zip(&result.cells).enumerate() {
            save_checkpoint(model, dir.join(format!("{}-{}-{}.json", row + 1, cell.modality.code(), cell.model)))?;
        }
        say!("{}", table.trim_end());
    } else {
        let subset = match cfg.modality {
            Modality::DescriptiveOnly => None,
            _ => Some(resolve_subset(cfg.channels, report.as_ref(), &data.channels)?),
        };
        let cell = CellSpec { modality: cfg.modality, subset };
        let (model, log, result) = with_pool(cfg.jobs, || Ok(run_cell(&data, &cell, &cfg.model, &cfg.train, seed)?))?;
        let summary = SingleRunReport { master_seed: seed, test_ids: &data.split.test_ids, cell: &result };
        write_json(&out.join("metrics.json"), &summary)?;
        write_json(&out.join("train_log.json"), &log)?;
        let table = render_table(std::slice::from_ref(&result));
        write_file(&out.join("table.txt"), &table)?;
        save_checkpoint(&model, out.join("checkpoint.json"))?;
        say!("{}", table.trim_end());
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 for usage and validation errors, 2 for numerical failures.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Features(a) => cmd_features(a),
        Command::RankChannels(a) => RunConfig::resolve(a, env_seed.as_deref()).and_then(|c| cmd_rank_channels(&c)),
        Command::Run(a) => RunConfig::resolve(a, env_seed.as_deref()).and_then(|c| cmd_run(&c)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
