//! Full-batch training of the adjacency and the classifier weights on the
//! combined objective
//!
//! ```text
//! total = CE + (GLR + sparsity + properties) + alpha * ||A_out - A_gt||^2
//! ```
//!
//! Loss columns of a [`TrainRecord`] and `gt_rel_frob` describe the
//! parameters entering the epoch (the adjacency snapshot for that epoch);
//! accuracy columns describe the parameters after the epoch's update.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::adam::{AdamConfig, AdamState};
use crate::dataset::Dataset;
use crate::error::{GlnnError, Result};
use crate::gcn::{chain_symmetrize, init_model, predict, GlnnModel, Mode, DEFAULT_DROPOUT, DEFAULT_HIDDEN, DEFAULT_WEIGHT_DECAY};
use crate::graph::symmetrize;
use crate::loss::{
    graph_learning_loss_with, gt_loss, masked_cross_entropy_with, softmax_cross_entropy_grad,
    sparsity_loss, properties_loss, CeReduction, GlrMode, GraphLearningLoss, LossReport, LossWeights,
};
use crate::matrix::{Matrix, Rng};

/// Column order of the per-epoch CSV log.
pub const RECORD_HEADER: [&str; 11] = [
    "epoch",
    "glr",
    "sparsity",
    "properties",
    "gt",
    "cross_entropy",
    "total",
    "train_acc",
    "val_acc",
    "test_acc",
    "gt_rel_frob",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub weights: LossWeights,
    pub lr: f64,
    /// Overrides `lr` for the adjacency.
    pub lr_adjacency: Option<f64>,
    /// Overrides `lr` for `w0` and `w1`.
    pub lr_weights: Option<f64>,
    pub seed: u64,
    /// 1-based epochs at which the symmetrized adjacency is kept.
    pub snapshot_epochs: Vec<usize>,
    pub use_gt_loss: bool,
    /// Clamp adjacency entries at zero after every update.
    pub clamp_nonneg: bool,
    /// Stop after this many epochs without a new best validation loss.
    pub early_stop_patience: Option<usize>,
    pub hidden: usize,
    pub dropout: f64,
    pub weight_decay: f64,
    pub glr_mode: GlrMode,
    pub ce_reduction: CeReduction,
    /// Skip the Laplacian regularizer altogether.
    pub disable_glr: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            weights: LossWeights::default(),
            lr: 0.01,
            lr_adjacency: None,
            lr_weights: None,
            seed: 0,
            snapshot_epochs: vec![1, 5, 15, 50],
            use_gt_loss: true,
            clamp_nonneg: false,
            early_stop_patience: None,
            hidden: DEFAULT_HIDDEN,
            dropout: DEFAULT_DROPOUT,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            glr_mode: GlrMode::Squared,
            ce_reduction: CeReduction::Mean,
            disable_glr: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GlnnError::InvalidArgument(msg));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if let Some(&e) = self.snapshot_epochs.iter().find(|&&e| e == 0 || e > self.epochs) {
            return bad(format!("snapshot epoch {e} outside 1..={}", self.epochs));
        }
        for lr in [Some(self.lr), self.lr_adjacency, self.lr_weights].into_iter().flatten() {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("learning rate {lr} must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay {} must be nonnegative", self.weight_decay));
        }
        if self.hidden == 0 {
            return bad("hidden width must be positive".into());
        }
        if self.early_stop_patience == Some(0) {
            return bad("early-stop patience must be positive".into());
        }
        self.weights.validate(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub glr: f64,
    pub sparsity: f64,
    pub properties: f64,
    pub gt: f64,
    pub cross_entropy: f64,
    pub total: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
    /// `||A_out - A_gt||_F / ||A_gt||_F` when a ground-truth graph exists.
    pub gt_rel_frob: Option<f64>,
}

impl TrainRecord {
    pub fn losses(&self) -> LossReport {
        LossReport {
            glr: self.glr,
            sparsity: self.sparsity,
            properties: self.properties,
            gt: self.gt,
            cross_entropy: self.cross_entropy,
            total: self.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub epoch: usize,
    pub a_out: Matrix,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GlnnModel,
    pub records: Vec<TrainRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Epoch at which early stopping fired, if it did.
    pub stopped_at: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSet {
    Train,
    Val,
    Test,
}

impl SplitSet {
    pub fn indices(self, ds: &Dataset) -> &[usize] {
        match self {
            SplitSet::Train => &ds.train_idx,
            SplitSet::Val => &ds.val_idx,
            SplitSet::Test => &ds.test_idx,
        }
    }
}

pub fn accuracy(probs: &Matrix, labels: &[usize], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(GlnnError::invalid("cannot score an empty split"));
    }
    let pred = predict(probs);
    let hits = idx.iter().filter(|&&i| pred[i] == labels[i]).count();
    Ok(hits as f64 / idx.len() as f64)
}

/// Accuracy of the model's evaluation-mode predictions on one split.
pub fn evaluate(model: &GlnnModel, ds: &Dataset, which: SplitSet) -> Result<f64> {
    let probs = model.forward_eval(&ds.x)?.probs;
    accuracy(&probs, &ds.labels, which.indices(ds))
}

/// Epoch-by-epoch driver; [`train`] runs it to completion.
pub struct Trainer<'a> {
    ds: &'a Dataset,
    cfg: TrainConfig,
    model: GlnnModel,
    rng: Rng,
    adam_a: AdamState,
    adam_w0: AdamState,
    adam_w1: AdamState,
    gt_norm: Option<f64>,
    epoch: usize,
    best_val: f64,
    since_best: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(ds: &'a Dataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        ds.validate_splits()?;
        if cfg.use_gt_loss && ds.gt.is_none() {
            return Err(GlnnError::invalid(
                "ground-truth loss requested but the dataset has no graph",
            ));
        }
        if cfg.early_stop_patience.is_some() && ds.val_idx.is_empty() {
            return Err(GlnnError::invalid("early stopping needs a validation split"));
        }
        let mut rng = Rng::new(cfg.seed);
        let mut model = init_model(
            &mut rng,
            ds.num_nodes(),
            ds.num_features(),
            cfg.hidden,
            ds.num_classes(),
            cfg.weights,
        )?;
        model.dropout_rate = cfg.dropout;
        model.weight_decay = cfg.weight_decay;
        let adam = |lr: Option<f64>| AdamConfig {
            lr: lr.unwrap_or(cfg.lr),
            ..AdamConfig::default()
        };
        let adam_a = AdamState::for_param(&model.a_raw, adam(cfg.lr_adjacency));
        let adam_w0 = AdamState::for_param(&model.w0, adam(cfg.lr_weights));
        let adam_w1 = AdamState::for_param(&model.w1, adam(cfg.lr_weights));
        let gt_norm = ds.gt.as_ref().map(|g| g.normalized.frobenius_sq().sqrt());
        Ok(Trainer {
            ds,
            cfg,
            model,
            rng,
            adam_a,
            adam_w0,
            adam_w1,
            gt_norm,
            epoch: 0,
            best_val: f64::INFINITY,
            since_best: 0,
        })
    }

    pub fn model(&self) -> &GlnnModel {
        &self.model
    }

    pub fn into_model(self) -> GlnnModel {
        self.model
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    fn graph_terms(&self, a_out: &Matrix) -> Result<GraphLearningLoss> {
        let w = &self.cfg.weights;
        if !self.cfg.disable_glr {
            return graph_learning_loss_with(&self.ds.x, a_out, w, self.cfg.glr_mode);
        }
        let sparsity = sparsity_loss(a_out, w.lambda1);
        let properties = properties_loss(a_out, w)?;
        let mut grad = sparsity.grad;
        grad.add_scaled(&properties.grad, 1.0)?;
        Ok(GraphLearningLoss {
            glr: 0.0,
            sparsity: sparsity.value,
            properties: properties.value,
            grad,
        })
    }

    /// Runs one epoch and returns its record. The symmetrized adjacency the
    /// epoch started from is returned alongside for snapshotting.
    pub fn step(&mut self) -> Result<(TrainRecord, Matrix)> {
        self.epoch += 1;
        let epoch = self.epoch;
        let ds = self.ds;
        let a_out = symmetrize(&self.model.a_raw)?;

        let cache = self.model.forward_with(a_out, &ds.x, Mode::Train, &mut self.rng)?;
        let ce = masked_cross_entropy_with(&cache.probs, &ds.y, &ds.train_idx, self.cfg.ce_reduction)?;
        let grad_logits =
            softmax_cross_entropy_grad(&cache.probs, &ds.y, &ds.train_idx, self.cfg.ce_reduction)?;
        let grads = self.model.backward(&cache, &grad_logits)?;
        let a_out = cache.a_out;

        let gl = self.graph_terms(&a_out)?;
        let gt_term = match (&ds.gt, self.cfg.use_gt_loss) {
            (Some(g), true) => Some(gt_loss(&a_out, &g.normalized)?),
            _ => None,
        };
        let alpha = self.cfg.weights.alpha;
        let report = LossReport::assemble(
            gl.glr,
            gl.sparsity,
            gl.properties,
            gt_term.as_ref().map_or(0.0, |t| t.value),
            alpha,
            ce.value,
        );
        if let Some(term) = report.non_finite_term() {
            return Err(GlnnError::NonFinite { epoch, term });
        }
        let gt_rel_frob = match (&ds.gt, self.gt_norm) {
            (Some(g), Some(norm)) if norm > 0.0 => {
                let dist = match &gt_term {
                    Some(t) => t.value,
                    None => a_out.sub(&g.normalized)?.frobenius_sq(),
                };
                Some(dist.sqrt() / norm)
            }
            _ => None,
        };

        let mut grad_a_out = grads.a_out;
        grad_a_out.add_scaled(&gl.grad, 1.0)?;
        if let Some(t) = &gt_term {
            grad_a_out.add_scaled(&t.grad, alpha)?;
        }
        let grad_a_raw = chain_symmetrize(&grad_a_out)?;

        self.adam_a.step(&mut self.model.a_raw, &grad_a_raw)?;
        self.adam_w0.step(&mut self.model.w0, &grads.w0)?;
        self.adam_w1.step(&mut self.model.w1, &grads.w1)?;
        if self.cfg.clamp_nonneg {
            self.model.a_raw.map_inplace(|v| v.max(0.0));
        }
        if !self.model.all_finite() {
            return Err(GlnnError::NonFinite {
                epoch,
                term: "parameters",
            });
        }

        let eval = self.model.forward_eval(&ds.x)?;
        let score = |idx: &[usize]| -> Result<Option<f64>> {
            if idx.is_empty() {
                Ok(None)
            } else {
                accuracy(&eval.probs, &ds.labels, idx).map(Some)
            }
        };
        if !ds.val_idx.is_empty() {
            let val_loss =
                masked_cross_entropy_with(&eval.probs, &ds.y, &ds.val_idx, self.cfg.ce_reduction)?
                    .value;
            if val_loss < self.best_val {
                self.best_val = val_loss;
                self.since_best = 0;
            } else {
                self.since_best += 1;
            }
        }
        let record = TrainRecord {
            epoch,
            glr: report.glr,
            sparsity: report.sparsity,
            properties: report.properties,
            gt: report.gt,
            cross_entropy: report.cross_entropy,
            total: report.total,
            train_acc: accuracy(&eval.probs, &ds.labels, &ds.train_idx)?,
            val_acc: score(&ds.val_idx)?,
            test_acc: score(&ds.test_idx)?,
            gt_rel_frob,
        };
        Ok((record, a_out))
    }

    fn should_stop(&self) -> bool {
        self.cfg
            .early_stop_patience
            .is_some_and(|p| self.since_best >= p)
    }
}

/// Trains a fresh model on `ds` for `cfg.epochs` epochs (or until early
/// stopping fires).
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(ds, cfg.clone())?;
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut snapshots = Vec::new();
    let mut stopped_at = None;
    for _ in 0..cfg.epochs {
        let (record, a_out) = trainer.step()?;
        if cfg.snapshot_epochs.contains(&record.epoch) {
            snapshots.push(Snapshot {
                epoch: record.epoch,
                a_out,
            });
        }
        records.push(record);
        if trainer.should_stop() {
            stopped_at = Some(trainer.epoch());
            break;
        }
    }
    Ok(TrainOutcome {
        model: trainer.into_model(),
        records,
        snapshots,
        stopped_at,
    })
}

/// Writes records as CSV with the [`RECORD_HEADER`] columns. Absent values
/// are empty cells; reals use shortest round-trip formatting.
pub fn write_records_csv<W: Write>(records: &[TrainRecord], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(RECORD_HEADER)?;
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<TrainRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RECORD_HEADER {
        return Err(GlnnError::Format(format!("unexpected CSV header {header:?}")));
    }
    rdr.deserialize()
        .map(|row| row.map_err(GlnnError::from))
        .collect()
}
