use super::{evaluate, train, PreparedCohort, Result, TrainConfig, TrainError, TrainLog};
use crate::model::{Bisam, Modality, ModelConfig};
use crate::rng;
use crate::selection::ChannelSubset;
use crate::stats::MetricReport;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// One model of the experiment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub modality: Modality,
    /// `None` for the descriptive-only model.
    pub subset: Option<ChannelSubset>,
}

impl CellSpec {
    pub fn config(&self, template: &ModelConfig) -> ModelConfig {
        ModelConfig {
            modality: self.modality,
            channel_subset: self.subset.as_ref().map(|s| s.channels.clone()).unwrap_or_default(),
            ..template.clone()
        }
    }

    /// Seed of this cell, fixed by the master seed and the cell's identity.
    pub fn seed(&self, master: u64) -> u64 {
        let channels = self.subset.as_ref().map(|s| s.channels.join("+")).unwrap_or_default();
        rng::derive_seed(master, &format!("cell/{}/{}", self.modality.code(), channels))
    }
}

/// Signal-only cells for each subset, then the descriptive-only cell, then
/// multimodal cells for each subset.
pub fn matrix_cells(subsets: &[ChannelSubset]) -> Vec<CellSpec> {
    let with = |modality| subsets.iter().map(move |s| CellSpec { modality, subset: Some(s.clone()) });
    with(Modality::SignalOnly)
        .chain(std::iter::once(CellSpec { modality: Modality::DescriptiveOnly, subset: None }))
        .chain(with(Modality::MultiModal))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub modality: Modality,
    pub model: String,
    pub channels: Vec<String>,
    pub seed: u64,
    pub metrics: MetricReport,
    pub final_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

/// Trains and evaluates one cell. Returns the fitted model, its training log
/// and the test-set summary.
pub fn run_cell(
    data: &PreparedCohort,
    cell: &CellSpec,
    template: &ModelConfig,
    train_cfg: &TrainConfig,
    master_seed: u64,
) -> Result<(Bisam, TrainLog, CellResult)> {
    let seed = cell.seed(master_seed);
    let mut cfg = cell.config(template);
    cfg.seed = rng::derive_seed(seed, "model");
    let tcfg = TrainConfig { seed: rng::derive_seed(seed, "train"), ..train_cfg.clone() };
    let (x_train, y_train) = data.inputs(&data.train, &cfg)?;
    let (x_test, y_test) = data.inputs(&data.test, &cfg)?;
    let mut model = Bisam::new(cfg)?;
    let log = train(&mut model, &x_train, &y_train, &tcfg)?;
    let metrics = evaluate(&model, &x_test, &y_test)?;
    let result = CellResult {
        modality: cell.modality,
        model: model.config.name(),
        channels: model.config.channel_subset.clone(),
        seed,
        metrics,
        final_loss: log.final_loss().unwrap_or(f64::NAN),
        epochs_run: log.epochs.len(),
        stopped_early: log.stopped_early,
    };
    Ok((model, log, result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixResult {
    pub master_seed: u64,
    pub test_ids: Vec<String>,
    pub cells: Vec<CellResult>,
}

impl MatrixResult {
    pub fn cell(&self, modality: Modality, model: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.modality == modality && c.model == model)
    }

    pub fn render_table(&self) -> String {
        render_table(&self.cells)
    }
}

/// Runs every cell on the shared split. Cells are independent, so `jobs`
/// only changes wall-clock time: 1 runs them in sequence, 0 uses the current
/// rayon pool and larger values a dedicated pool of that size.
pub fn run_matrix(
    data: &PreparedCohort,
    subsets: &[ChannelSubset],
    template: &ModelConfig,
    train_cfg: &TrainConfig,
    master_seed: u64,
    jobs: usize,
) -> Result<MatrixResult> {
    run_matrix_with_models(data, subsets, template, train_cfg, master_seed, jobs).map(|(r, _)| r)
}

/// [`run_matrix`], also returning the fitted model of every cell.
pub fn run_matrix_with_models(
    data: &PreparedCohort,
    subsets: &[ChannelSubset],
    template: &ModelConfig,
    train_cfg: &TrainConfig,
    master_seed: u64,
    jobs: usize,
) -> Result<(MatrixResult, Vec<Bisam>)> {
    let cells = matrix_cells(subsets);
    let run = |cell: &CellSpec| run_cell(data, cell, template, train_cfg, master_seed).map(|(m, _, r)| (m, r));
    let outputs: Vec<(Bisam, CellResult)> = match jobs {
        1 => cells.iter().map(run).collect::<Result<_>>()?,
        0 => cells.par_iter().map(run).collect::<Result<_>>()?,
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| TrainError::Config(format!("thread pool: {e}")))?
            .install(|| cells.par_iter().map(run).collect::<Result<_>>())?,
    };
    let (models, results) = outputs.into_iter().unzip();
    Ok((MatrixResult { master_seed, test_ids: data.split.test_ids.clone(), cells: results }, models))
}

/// Plain-text results table with percentages to one decimal.
pub fn render_table(cells: &[CellResult]) -> String {
    let header = ["Modality", "Model", "Accuracy", "Recall", "Precision", "F1-Score", "Kappa"];
    let rows: Vec<[String; 7]> = cells
        .iter()
        .map(|c| {
            let pct = |v: f64| format!("{:.1}", 100.0 * v);
            let m = &c.metrics;
            [
                c.modality.title().to_string(),
                c.model.clone(),
                pct(m.accuracy),
                pct(m.recall_pos),
                pct(m.precision_pos),
                pct(m.f1_pos),
                pct(m.kappa),
            ]
        })
        .collect();
    let widths: Vec<usize> =
        (0..7).map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0)).collect();
    let mut out = String::new();
    let line = |out: &mut String, cols: &[&str]| {
        let mut text = String::new();
        for (i, c) in cols.iter().enumerate() {
            if i < 2 {
                let _ = write!(text, "{:<w$}  ", c, w = widths[i]);
            } else {
                let _ = write!(text, "{:>w$}  ", c, w = widths[i]);
            }
        }
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(&mut out, &header);
    let total: usize = widths.iter().sum::<usize>() + 2 * 6;
    out.push_str(&"-".repeat(total));
    out.push('\n');
    let mut last_modality = String::new();
    for r in &rows {
        let modality = if r[0] == last_modality { String::new() } else { r[0].clone() };
        last_modality = r[0].clone();
        let cols: Vec<&str> = std::iter::once(modality.as_str()).chain(r[1..].iter().map(String::as_str)).collect();
        line(&mut out, &cols);
    }
    out
}
