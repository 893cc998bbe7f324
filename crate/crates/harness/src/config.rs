//! Experiment configuration from `key = value` pairs.
//!
//! Pairs come from a config file and from command-line flags; later pairs
//! override earlier ones, so flags are appended after the file. Keys accept
//! `-` or `_` as separator. A `dataset` naming a built-in preset supplies
//! that dataset's default split, `lambda0` and downsampling before any other
//! key is applied.

use std::path::PathBuf;

use glnn_core::dataset::{SplitKind, SplitSpec};
use glnn_core::loss::{CeReduction, GlrMode};
use glnn_core::train::TrainConfig;

use crate::heatmap::Window;
use crate::presets::{preset, DataSource};
use crate::{HarnessError, Result};

pub type Pairs = Vec<(String, String)>;

pub const KEYS: &[&str] = &[
    "dataset",
    "data_dir",
    "content",
    "cites",
    "cache",
    "out",
    "seed",
    "repeats",
    "jobs",
    "epochs",
    "lr",
    "lr_adjacency",
    "lr_weights",
    "lambda0",
    "lambda1",
    "lambda2",
    "lambda3",
    "lambda4",
    "alpha",
    "snapshot_epochs",
    "use_gt_loss",
    "clamp_nonneg",
    "early_stop_patience",
    "hidden",
    "dropout",
    "weight_decay",
    "glr_mode",
    "ce_reduction",
    "disable_glr",
    "split",
    "per_class",
    "train",
    "val",
    "test",
    "rate",
    "split_seed",
    "downsample",
    "normalize_features",
    "heatmap_row0",
    "heatmap_col0",
    "heatmap_size",
];

/// Everything needed to run one configuration `repeats` times.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub dataset: String,
    /// Explicit dataset files; when absent the preset is located under
    /// `data_dir`.
    pub source: Option<DataSource>,
    pub data_dir: PathBuf,
    pub split: SplitKind,
    /// Seed for splitting and downsampling. Defaults to each run's own seed.
    pub split_seed: Option<u64>,
    pub downsample: Option<usize>,
    pub normalize_features: bool,
    /// Run `r` uses seed `train.seed + r`.
    pub train: TrainConfig,
    pub repeats: usize,
    /// Number of runs trained concurrently.
    pub jobs: usize,
    pub output_dir: PathBuf,
    pub window: Window,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            dataset: String::new(),
            source: None,
            data_dir: PathBuf::from("data"),
            split: SplitSpec::planetoid(0).kind,
            split_seed: None,
            downsample: None,
            normalize_features: false,
            train: TrainConfig::default(),
            repeats: 1,
            jobs: 1,
            output_dir: PathBuf::from("runs"),
            window: Window::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn split_for(&self, run_seed: u64) -> SplitSpec {
        SplitSpec {
            kind: self.split,
            seed: self.split_seed.unwrap_or(run_seed),
        }
    }

    pub fn run_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.repeats as u64).map(|r| self.train.seed + r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(HarnessError::Config("repeats must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(HarnessError::Config("jobs must be at least 1".into()));
        }
        if self.window.size == 0 {
            return Err(HarnessError::Config("heatmap size must be positive".into()));
        }
        self.train.validate()?;
        Ok(())
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_").to_ascii_lowercase()
}

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// skipped.
pub fn parse_pairs(text: &str) -> Result<Pairs> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("line {}: expected key = value, got {line:?}", i + 1))
        })?;
        pairs.push((normalize_key(k), v.trim().to_string()));
    }
    Ok(pairs)
}

fn bad(key: &str, value: &str, what: &str) -> HarnessError {
    HarnessError::Config(format!("{key} = {value:?}: expected {what}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, "a number"))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.to_ascii_lowercase().as_str() {
        "" | "none" => Ok(None),
        _ => num(key, value).map(Some),
    }
}

#[derive(Default)]
struct SplitParams {
    kind: Option<String>,
    per_class: Option<usize>,
    train: Option<usize>,
    val: Option<usize>,
    test: Option<usize>,
    rate: Option<f64>,
}

impl SplitParams {
    fn resolve(self, base: SplitKind) -> Result<SplitKind> {
        let base = match self.kind.as_deref() {
            None => base,
            Some(k) => match (k.replace(['-', '_'], "").as_str(), base) {
                ("planetoid", b @ SplitKind::Planetoid { .. }) => b,
                ("counts", b @ SplitKind::Counts { .. }) => b,
                ("labelrate", b @ SplitKind::LabelRate { .. }) => b,
                ("planetoid", _) => SplitSpec::planetoid(0).kind,
                ("counts", _) => SplitKind::Counts {
                    train: 0,
                    val: 0,
                    test: 0,
                },
                ("labelrate", _) => SplitKind::LabelRate {
                    rate: 0.0,
                    val: 0,
                    test: 1000,
                },
                _ => return Err(bad("split", k, "planetoid, counts or label-rate")),
            },
        };
        let misplaced = |key: &str| {
            HarnessError::Config(format!("{key} does not apply to a {base:?} split"))
        };
        Ok(match base {
            SplitKind::Planetoid {
                per_class,
                val,
                test,
            } => {
                if self.train.is_some() || self.rate.is_some() {
                    return Err(misplaced(if self.train.is_some() { "train" } else { "rate" }));
                }
                SplitKind::Planetoid {
                    per_class: self.per_class.unwrap_or(per_class),
                    val: self.val.unwrap_or(val),
                    test: self.test.unwrap_or(test),
                }
            }
            SplitKind::Counts { train, val, test } => {
                if self.per_class.is_some() || self.rate.is_some() {
                    return Err(misplaced(if self.rate.is_some() { "rate" } else { "per_class" }));
                }
                SplitKind::Counts {
                    train: self.train.unwrap_or(train),
                    val: self.val.unwrap_or(val),
                    test: self.test.unwrap_or(test),
                }
            }
            SplitKind::LabelRate { rate, val, test } => {
                if self.per_class.is_some() || self.train.is_some() {
                    return Err(misplaced(if self.train.is_some() { "train" } else { "per_class" }));
                }
                SplitKind::LabelRate {
                    rate: self.rate.unwrap_or(rate),
                    val: self.val.unwrap_or(val),
                    test: self.test.unwrap_or(test),
                }
            }
        })
    }
}

/// Builds a spec from pairs applied in order over the defaults.
pub fn build_spec(pairs: &[(String, String)]) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    for (k, _) in pairs {
        if !KEYS.contains(&k.as_str()) {
            return Err(HarnessError::Config(format!("unknown key {k:?}")));
        }
    }
    if let Some((_, name)) = pairs.iter().rev().find(|(k, _)| k == "dataset") {
        spec.dataset = name.clone();
        if let Some(p) = preset(name) {
            spec.dataset = p.name.to_string();
            spec.train.weights.lambda0 = p.lambda0;
            spec.split = p.split;
            spec.downsample = p.downsample;
        }
    }

    let mut split = SplitParams::default();
    let (mut content, mut cites, mut cache) = (None, None, None);
    let mut snapshots_set = false;
    let t = &mut spec.train;
    for (key, value) in pairs {
        let (key, v) = (key.as_str(), value.as_str());
        match key {
            "dataset" => {}
            "data_dir" => spec.data_dir = PathBuf::from(v),
            "content" => content = Some(PathBuf::from(v)),
            "cites" => cites = Some(PathBuf::from(v)),
            "cache" => cache = Some(PathBuf::from(v)),
            "out" => spec.output_dir = PathBuf::from(v),
            "seed" => t.seed = num(key, v)?,
            "repeats" => spec.repeats = num(key, v)?,
            "jobs" => spec.jobs = num(key, v)?,
            "epochs" => t.epochs = num(key, v)?,
            "lr" => t.lr = num(key, v)?,
            "lr_adjacency" => t.lr_adjacency = optional(key, v)?,
            "lr_weights" => t.lr_weights = optional(key, v)?,
            "lambda0" => t.weights.lambda0 = num(key, v)?,
            "lambda1" => t.weights.lambda1 = num(key, v)?,
            "lambda2" => t.weights.lambda2 = num(key, v)?,
            "lambda3" => t.weights.lambda3 = num(key, v)?,
            "lambda4" => t.weights.lambda4 = num(key, v)?,
            "alpha" => t.weights.alpha = num(key, v)?,
            "snapshot_epochs" => {
                snapshots_set = true;
                t.snapshot_epochs = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_>>()?;
            }
            "use_gt_loss" => t.use_gt_loss = flag(key, v)?,
            "clamp_nonneg" => t.clamp_nonneg = flag(key, v)?,
            "early_stop_patience" => t.early_stop_patience = optional(key, v)?,
            "hidden" => t.hidden = num(key, v)?,
            "dropout" => t.dropout = num(key, v)?,
            "weight_decay" => t.weight_decay = num(key, v)?,
            "glr_mode" => {
                t.glr_mode = match v {
                    "squared" => GlrMode::Squared,
                    "linear" => GlrMode::Linear,
                    _ => return Err(bad(key, v, "squared or linear")),
                }
            }
            "ce_reduction" => {
                t.ce_reduction = match v {
                    "mean" => CeReduction::Mean,
                    "sum" => CeReduction::Sum,
                    _ => return Err(bad(key, v, "mean or sum")),
                }
            }
            "disable_glr" => t.disable_glr = flag(key, v)?,
            "split" => split.kind = Some(v.to_ascii_lowercase()),
            "per_class" => split.per_class = Some(num(key, v)?),
            "train" => split.train = Some(num(key, v)?),
            "val" => split.val = Some(num(key, v)?),
            "test" => split.test = Some(num(key, v)?),
            "rate" => split.rate = Some(num(key, v)?),
            "split_seed" => spec.split_seed = optional(key, v)?,
            "downsample" => spec.downsample = optional(key, v)?,
            "normalize_features" => spec.normalize_features = flag(key, v)?,
            "heatmap_row0" => spec.window.row0 = num(key, v)?,
            "heatmap_col0" => spec.window.col0 = num(key, v)?,
            "heatmap_size" => spec.window.size = num(key, v)?,
            _ => unreachable!("key list checked above"),
        }
    }
    if !snapshots_set {
        let epochs = spec.train.epochs;
        spec.train.snapshot_epochs.retain(|&e| e <= epochs);
    }
    spec.split = split.resolve(spec.split)?;
    spec.source = match (content, cites, cache) {
        (None, None, None) => None,
        (None, None, Some(path)) => Some(DataSource::Cache(path)),
        (Some(content), Some(cites), None) => Some(DataSource::Linqs { content, cites }),
        _ => {
            return Err(HarnessError::Config(
                "give either both content and cites, or cache".into(),
            ))
        }
    };
    if spec.dataset.is_empty() {
        spec.dataset = match &spec.source {
            Some(DataSource::Linqs { content, .. }) => stem(content),
            Some(DataSource::Cache(path)) => stem(path),
            None => return Err(HarnessError::Config("no dataset given".into())),
        };
    }
    spec.validate()?;
    Ok(spec)
}

fn stem(path: &std::path::Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}
