//! Repeated runs and the two sweeps.
//!
//! Output layout of a single experiment directory:
//!
//! ```text
//! run_<seed>.csv              per-epoch log
//! run_<seed>.ckpt             final model
//! run_<seed>_epoch<e>.pgm     adjacency heatmap at each snapshot epoch
//! run_<seed>_gt.pgm           heatmap of the reference graph, when present
//! run_<seed>.failed           diagnostic of a run that did not finish
//! summary.json, summary.txt
//! ```
//!
//! Every run derives its randomness from its own seed only, so results do not
//! depend on the order or concurrency of runs.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use glnn_core::dataset::{downsample, make_split, Dataset, SplitKind};
use glnn_core::gcn::GlnnModel;
use glnn_core::train::{evaluate, train, write_records_csv, SplitSet, TrainOutcome};

use crate::config::ExperimentSpec;
use crate::heatmap::export_heatmap;
use crate::output::{write_atomic, write_atomic_with};
use crate::presets::{locate, preset};
use crate::{HarnessError, Result};

pub const LAMBDA0_GRID: [f64; 6] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 0.0];
pub const LABEL_RATES: [f64; 5] = [0.005, 0.010, 0.015, 0.020, 0.025];

/// Loads the spec's dataset, either from explicit files or from the preset's
/// files under the data directory.
pub fn load_dataset(spec: &ExperimentSpec) -> Result<Dataset> {
    if let Some(source) = &spec.source {
        return source.load();
    }
    let p = preset(&spec.dataset).ok_or_else(|| {
        HarnessError::Config(format!(
            "{:?} is not a built-in dataset; give content and cites files",
            spec.dataset
        ))
    })?;
    locate(&spec.data_dir, p)?.load()
}

/// Applies downsampling, feature normalization and the split for one run.
pub fn prepare(base: &Dataset, spec: &ExperimentSpec, run_seed: u64) -> Result<Dataset> {
    let split = spec.split_for(run_seed);
    let mut ds = match spec.downsample {
        Some(n) if n < base.num_nodes() => downsample(base, n, split.seed)?,
        _ => base.clone(),
    };
    if spec.normalize_features {
        ds.normalize_feature_rows();
    }
    Ok(make_split(&ds, &split)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub train_nodes: usize,
    pub epochs_run: usize,
    pub train_acc: Option<f64>,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub final_total: Option<f64>,
    pub gt_rel_frob: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub lambda0: f64,
    pub disable_glr: bool,
    pub runs: Vec<RunResult>,
    pub test_acc_mean: Option<f64>,
    pub test_acc_std: Option<f64>,
    pub failed: usize,
}

impl Summary {
    fn new(spec: &ExperimentSpec, runs: Vec<RunResult>) -> Self {
        let accs: Vec<f64> = runs.iter().filter_map(|r| r.test_acc).collect();
        let (mean, std) = mean_std(&accs);
        Summary {
            dataset: spec.dataset.clone(),
            lambda0: spec.train.weights.lambda0,
            disable_glr: spec.train.disable_glr,
            failed: runs.iter().filter(|r| r.error.is_some()).count(),
            runs,
            test_acc_mean: mean,
            test_acc_std: std,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.failed == 0
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "dataset {}  lambda0 {}{}\n",
            self.dataset,
            self.lambda0,
            if self.disable_glr { "  (no GLR)" } else { "" }
        );
        for r in &self.runs {
            match (&r.error, r.test_acc) {
                (Some(e), _) => writeln!(s, "seed {:>4}  FAILED  {e}", r.seed).unwrap(),
                (None, Some(acc)) => writeln!(
                    s,
                    "seed {:>4}  test {:.2}%  epochs {}",
                    r.seed,
                    acc * 100.0,
                    r.epochs_run
                )
                .unwrap(),
                (None, None) => writeln!(s, "seed {:>4}  no test split", r.seed).unwrap(),
            }
        }
        match (self.test_acc_mean, self.test_acc_std) {
            (Some(m), Some(sd)) => {
                writeln!(s, "test accuracy {:.2} +/- {:.2} %", m * 100.0, sd * 100.0).unwrap()
            }
            _ => s.push_str("test accuracy n/a\n"),
        }
        if self.failed > 0 {
            writeln!(s, "{} of {} runs failed", self.failed, self.runs.len()).unwrap();
        }
        s
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (Some(mean), Some(var.sqrt()))
}

fn write_run(dir: &Path, spec: &ExperimentSpec, ds: &Dataset, out: &TrainOutcome, seed: u64) -> Result<()> {
    write_atomic_with(&dir.join(format!("run_{seed}.csv")), |w| {
        write_records_csv(&out.records, w).map_err(std::io::Error::other)
    })?;
    write_atomic_with(&dir.join(format!("run_{seed}.ckpt")), |w| {
        out.model.write_checkpoint(w).map_err(std::io::Error::other)
    })?;
    for snap in &out.snapshots {
        let window = spec.window.clipped_to(&snap.a_out);
        let path = dir.join(format!("run_{seed}_epoch{}.pgm", snap.epoch));
        export_heatmap(&snap.a_out, window, &path)?;
    }
    if let Some(gt) = &ds.gt {
        let window = spec.window.clipped_to(&gt.normalized);
        export_heatmap(&gt.normalized, window, &dir.join(format!("run_{seed}_gt.pgm")))?;
    }
    Ok(())
}

fn run_one(spec: &ExperimentSpec, base: &Dataset, seed: u64) -> RunResult {
    let dir = &spec.output_dir;
    let mut result = RunResult {
        seed,
        train_nodes: 0,
        epochs_run: 0,
        train_acc: None,
        val_acc: None,
        test_acc: None,
        final_total: None,
        gt_rel_frob: None,
        error: None,
    };
    let attempt = (|| -> Result<()> {
        let ds = prepare(base, spec, seed)?;
        result.train_nodes = ds.train_idx.len();
        let mut cfg = spec.train.clone();
        cfg.seed = seed;
        if cfg.use_gt_loss && ds.gt.is_none() {
            cfg.use_gt_loss = false;
        }
        let out = train(&ds, &cfg)?;
        write_run(dir, spec, &ds, &out, seed)?;
        let last = out.records.last().expect("at least one epoch");
        result.epochs_run = out.records.len();
        result.train_acc = Some(last.train_acc);
        result.val_acc = last.val_acc;
        result.test_acc = last.test_acc;
        result.final_total = Some(last.total);
        result.gt_rel_frob = last.gt_rel_frob;
        Ok(())
    })();
    if let Err(e) = attempt {
        let msg = e.to_string();
        let marker = dir.join(format!("run_{seed}.failed"));
        let _ = write_atomic(&marker, format!("{msg}\n").as_bytes());
        result.error = Some(msg);
    }
    result
}

/// Trains `spec.repeats` models with consecutive seeds and writes per-run
/// outputs plus a summary. A failing run is recorded in the summary and
/// marked on disk; the other runs still complete.
pub fn run_single(spec: &ExperimentSpec, base: &Dataset) -> Result<Summary> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.output_dir)?;
    let seeds: Vec<u64> = spec.run_seeds().collect();
    let runs: Vec<RunResult> = if spec.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        pool.install(|| seeds.par_iter().map(|&s| run_one(spec, base, s)).collect())
    } else {
        seeds.iter().map(|&s| run_one(spec, base, s)).collect()
    };
    let summary = Summary::new(spec, runs);
    write_atomic(
        &spec.output_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    write_atomic(&spec.output_dir.join("summary.txt"), summary.text().as_bytes())?;
    Ok(summary)
}

fn cell_dir(prefix: &str, v: f64) -> String {
    format!("{prefix}_{v}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Row {
    pub dataset: String,
    pub lambda0: f64,
    pub mean_test_acc: Option<f64>,
    pub std_test_acc: Option<f64>,
    pub runs: usize,
    pub failed: usize,
}

/// One experiment per `lambda0` value, each in its own subdirectory, plus a
/// table in `lambda0_sweep.csv` and `lambda0_sweep.txt`.
pub fn run_lambda0_sweep(spec: &ExperimentSpec, base: &Dataset, values: &[f64]) -> Result<Vec<Summary>> {
    if values.is_empty() {
        return Err(HarnessError::Config("no lambda0 values given".into()));
    }
    let mut summaries = Vec::new();
    for &v in values {
        let mut cell = spec.clone();
        cell.train.weights.lambda0 = v;
        cell.output_dir = spec.output_dir.join(cell_dir("lambda0", v));
        summaries.push(run_single(&cell, base)?);
    }
    let rows: Vec<Lambda0Row> = summaries
        .iter()
        .map(|s| Lambda0Row {
            dataset: s.dataset.clone(),
            lambda0: s.lambda0,
            mean_test_acc: s.test_acc_mean,
            std_test_acc: s.test_acc_std,
            runs: s.runs.len(),
            failed: s.failed,
        })
        .collect();
    write_table(&spec.output_dir.join("lambda0_sweep.csv"), &rows)?;

    let mut text = format!("{:<16}", "lambda0");
    for s in &summaries {
        write!(text, "{:>10}", s.lambda0).unwrap();
    }
    write!(text, "\n{:<16}", spec.dataset).unwrap();
    for s in &summaries {
        match s.test_acc_mean {
            Some(m) => write!(text, "{:>10.1}", m * 100.0).unwrap(),
            None => write!(text, "{:>10}", "n/a").unwrap(),
        }
    }
    text.push('\n');
    write_atomic(&spec.output_dir.join("lambda0_sweep.txt"), text.as_bytes())?;
    Ok(summaries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rate: f64,
    pub scheme: String,
    pub train_nodes: usize,
    pub mean_test_acc: Option<f64>,
    pub std_test_acc: Option<f64>,
    pub runs: usize,
    pub failed: usize,
}

/// Label-rate sweep. For each rate the test set is the same (it is drawn
/// before the training nodes from the run's seed). With `with_baseline`, each
/// rate is also run with the Laplacian regularizer removed. Writes
/// `labelrate_sweep.csv`.
pub fn run_robustness_sweep(
    spec: &ExperimentSpec,
    base: &Dataset,
    rates: &[f64],
    with_baseline: bool,
) -> Result<Vec<CurvePoint>> {
    if rates.is_empty() || rates.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(HarnessError::Config("label rates must lie in (0, 1)".into()));
    }
    let (val, test) = match spec.split {
        SplitKind::LabelRate { val, test, .. } => (val, test),
        _ => (0, 1000),
    };
    let mut points = Vec::new();
    for &rate in rates {
        let schemes: &[&str] = if with_baseline { &["glnn", "baseline"] } else { &["glnn"] };
        for &scheme in schemes {
            let mut cell = spec.clone();
            cell.split = SplitKind::LabelRate { rate, val, test };
            if scheme == "baseline" {
                cell.train.weights.lambda0 = 0.0;
                cell.train.disable_glr = true;
            }
            cell.output_dir = spec.output_dir.join(cell_dir("rate", rate)).join(scheme);
            let s = run_single(&cell, base)?;
            points.push(CurvePoint {
                rate,
                scheme: scheme.to_string(),
                train_nodes: s.runs.iter().map(|r| r.train_nodes).max().unwrap_or(0),
                mean_test_acc: s.test_acc_mean,
                std_test_acc: s.test_acc_std,
                runs: s.runs.len(),
                failed: s.failed,
            });
        }
    }
    write_table(&spec.output_dir.join("labelrate_sweep.csv"), &points)?;
    Ok(points)
}

fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic_with(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        for r in rows {
            wtr.serialize(r).map_err(std::io::Error::other)?;
        }
        wtr.flush()
    })?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
}

/// Scores a saved model on the split its run would have used.
pub fn evaluate_checkpoint(spec: &ExperimentSpec, base: &Dataset, ckpt: &Path, seed: u64) -> Result<EvalReport> {
    let ds = prepare(base, spec, seed)?;
    let model = GlnnModel::load(ckpt)?;
    let dims = model.dims();
    if (dims.nodes, dims.features, dims.classes) != (ds.num_nodes(), ds.num_features(), ds.num_classes()) {
        return Err(HarnessError::Config(format!(
            "checkpoint has N={} C={} F={} but the dataset has N={} C={} F={}",
            dims.nodes,
            dims.features,
            dims.classes,
            ds.num_nodes(),
            ds.num_features(),
            ds.num_classes()
        )));
    }
    let score = |set: SplitSet| -> Result<Option<f64>> {
        if set.indices(&ds).is_empty() {
            Ok(None)
        } else {
            Ok(Some(evaluate(&model, &ds, set)?))
        }
    };
    Ok(EvalReport {
        train_acc: evaluate(&model, &ds, SplitSet::Train)?,
        val_acc: score(SplitSet::Val)?,
        test_acc: score(SplitSet::Test)?,
    })
}
