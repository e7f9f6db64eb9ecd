//! Equilibrium Propagation: two-phase gradient estimation and SGD training.
//!
//! For one sample, every restart relaxes the free phase (`beta = 0`) from a
//! random start to `x0`, then relaxes the nudged phase starting from `x0`.
//! The restart contributes
//!
//! ```text
//! (dE/dtheta(x_beta) - dE/dtheta(x0)) / beta
//! ```
//!
//! or, with symmetric nudging, `(dE/dtheta(x_+beta) - dE/dtheta(x_-beta)) / (2 beta)`.
//! Restarts where any phase failed to converge are dropped and the average is
//! taken over the rest.
//!
//! With tangent nudging the frozen force can be stronger than anything the
//! couplings can hold (typically when an output sits almost opposite its
//! target); the spin then never settles. Such a restart is nudged again with
//! the standard force, which always admits a steady state.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{accumulate_parameter_gradient, distance, external_cost, Drive, NudgeMode, DEFAULT_BETA};
use crate::error::{Error, Result};
use crate::graph::Network;
use crate::relax::{relax, relax_multistart, RelaxConfig};
use crate::seed;
use crate::tasks::{predict, Sample};

/// How mini-batches are drawn each epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Every batch is drawn uniformly with replacement.
    #[default]
    Replacement,
    /// The dataset is shuffled once per epoch and cut into consecutive batches.
    Shuffle,
}

/// How per-sample gradients are combined into one batch update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BatchReduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpConfig {
    pub beta: f64,
    /// Nudging for the nudged phase: `standard` or `tangent`.
    pub nudge: NudgeMode,
    pub symmetric: bool,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Updates per epoch; `None` means `ceil(len / batch_size)`.
    pub batches_per_epoch: Option<usize>,
    pub sampling: Sampling,
    pub reduction: BatchReduction,
    /// Evaluate every this many epochs (and at the start and end).
    pub eval_interval: usize,
    /// Include the training set in evaluations. Turning it off saves time on
    /// large training sets when only held-out metrics matter.
    pub eval_train: bool,
    pub train_biases: bool,
    pub relax: RelaxConfig,
}

impl Default for EpConfig {
    fn default() -> Self {
        EpConfig {
            beta: DEFAULT_BETA,
            nudge: NudgeMode::Standard,
            symmetric: false,
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 1,
            batches_per_epoch: None,
            sampling: Sampling::Replacement,
            reduction: BatchReduction::Mean,
            eval_interval: 10,
            eval_train: true,
            train_biases: true,
            relax: RelaxConfig::default(),
        }
    }
}

impl EpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta == 0.0 || !(self.beta.abs() <= 1.0) {
            return Err(Error::InvalidConfig(format!("beta must satisfy 0 < |beta| <= 1, got {}", self.beta)));
        }
        if self.nudge == NudgeMode::Free {
            return Err(Error::InvalidConfig("nudged phase cannot use the free mode".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!("invalid learning rate {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.eval_interval == 0 || self.batches_per_epoch == Some(0) {
            return Err(Error::InvalidConfig(
                "batch_size, eval_interval and batches_per_epoch must be at least 1".into(),
            ));
        }
        self.relax.validate()
    }
}

/// Averaged EP gradient for one sample, in parameter-block layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub grad: Vec<f64>,
    pub restarts: usize,
    pub free_converged: usize,
    /// Restarts whose nudged phase(s) also converged; these are averaged.
    pub used: usize,
    /// Mean cost at the free steady states that were used.
    pub free_cost: f64,
    /// Tangent-mode nudged relaxations redone with the standard force.
    pub fallbacks: usize,
}

/// EP gradient estimate for one sample.
pub fn ep_gradient(net: &Network, sample: &Sample, cfg: &EpConfig, seed: u64) -> Result<GradientEstimate> {
    cfg.validate()?;
    sample.validate(net)?;
    let clamp = &sample.inputs;
    let free = relax_multistart(net, clamp, &Drive::Free, &cfg.relax, seed)?;
    let mut acc = vec![0.0; net.n_params()];
    let mut used = 0;
    let mut cost = 0.0;
    let mut fallbacks = 0;
    for run in free.converged() {
        let mut nudged = |beta: f64| -> Result<_> {
            let drive = Drive::new(cfg.nudge, beta, &sample.targets, Some(&run.state))?;
            let r = relax(net, run.state.clone(), clamp, &drive, &cfg.relax)?;
            if r.converged || cfg.nudge != NudgeMode::Tangent {
                return Ok(r);
            }
            fallbacks += 1;
            let drive = Drive::new(NudgeMode::Standard, beta, &sample.targets, None)?;
            relax(net, run.state.clone(), clamp, &drive, &cfg.relax)
        };
        let plus = nudged(cfg.beta)?;
        if !plus.converged {
            continue;
        }
        if cfg.symmetric {
            let minus = nudged(-cfg.beta)?;
            if !minus.converged {
                continue;
            }
            let scale = 1.0 / (2.0 * cfg.beta);
            let mut diff = vec![0.0; net.n_params()];
            accumulate_parameter_gradient(net, &plus.state, 1.0, &mut diff);
            accumulate_parameter_gradient(net, &minus.state, -1.0, &mut diff);
            for (a, d) in acc.iter_mut().zip(diff) {
                *a += d * scale;
            }
        } else {
            let mut diff = vec![0.0; net.n_params()];
            accumulate_parameter_gradient(net, &plus.state, 1.0, &mut diff);
            accumulate_parameter_gradient(net, &run.state, -1.0, &mut diff);
            for (a, d) in acc.iter_mut().zip(diff) {
                *a += d / cfg.beta;
            }
        }
        cost += external_cost(net, &run.state, &sample.targets)?;
        used += 1;
    }
    let free_converged = free.converged_count();
    if used == 0 {
        return Err(Error::NoConvergence {
            restarts: free.runs.len(),
            free_converged,
        });
    }
    let n = used as f64;
    for a in &mut acc {
        *a /= n;
    }
    if !cfg.train_biases {
        acc[net.n_slots()..].fill(0.0);
    }
    Ok(GradientEstimate {
        grad: acc,
        restarts: free.runs.len(),
        free_converged,
        used,
        free_cost: cost / n,
        fallbacks,
    })
}

/// `theta <- theta - eta * grad`. Shared slots are stored once, so every
/// member of a sharing group moves together.
pub fn sgd_step(net: &mut Network, grad: &[f64], learning_rate: f64) -> Result<()> {
    if grad.len() != net.n_params() {
        return Err(Error::LengthMismatch {
            expected: net.n_params(),
            got: grad.len(),
        });
    }
    for (p, g) in net.params_mut().iter_mut().zip(grad) {
        *p -= learning_rate * g;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Evaluation metrics over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean over samples and restarts of `1/2 sum (1 - cos(phi - tau))`.
    pub mean_distance: f64,
    /// Fraction of (sample, restart) pairs classified correctly, when labelled.
    pub accuracy: Option<f64>,
    pub converged_fraction: f64,
}

/// Free-phase evaluation. Restart seeds depend only on `seed` and the sample
/// index, so repeated evaluations of the same network agree exactly.
pub fn evaluate(net: &Network, data: &[Sample], relax_cfg: &RelaxConfig, seed: u64) -> Result<Metrics> {
    let per_sample = data
        .par_iter()
        .enumerate()
        .map(|(k, sample)| -> Result<(f64, usize, usize, usize)> {
            let set = relax_multistart(net, &sample.inputs, &Drive::Free, relax_cfg, seed::derive(seed, &[k as u64]))?;
            let mut dist = 0.0;
            let mut correct = 0;
            for run in &set.runs {
                dist += distance(&run.state, &sample.targets);
                if let Some(label) = sample.label {
                    let outputs: Vec<_> = sample.targets.iter().map(|t| t.0).collect();
                    if predict(&run.state, &outputs) == label {
                        correct += 1;
                    }
                }
            }
            Ok((dist, correct, set.converged_count(), set.runs.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let runs: usize = per_sample.iter().map(|r| r.3).sum();
    if runs == 0 {
        return Ok(Metrics {
            mean_distance: 0.0,
            accuracy: None,
            converged_fraction: 1.0,
        });
    }
    let labelled = data.iter().all(|s| s.label.is_some());
    let total = runs as f64;
    Ok(Metrics {
        mean_distance: per_sample.iter().map(|r| r.0).sum::<f64>() / total,
        accuracy: labelled.then(|| per_sample.iter().map(|r| r.1).sum::<usize>() as f64 / total),
        converged_fraction: per_sample.iter().map(|r| r.2).sum::<usize>() as f64 / total,
    })
}

/// One evaluation row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub split: Split,
    pub mean_distance: f64,
    pub accuracy: Option<f64>,
    pub converged_fraction: f64,
    pub wall_ms: u64,
}

/// Receives training progress. Every method defaults to doing nothing.
pub trait TrainObserver {
    fn record(&mut self, _record: &TrainRecord) -> Result<()> {
        Ok(())
    }

    /// Called after epoch `epoch` (1-based) is complete, and with `epoch = 0`
    /// before training starts.
    fn epoch_end(&mut self, _epoch: usize, _net: &Network) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for Vec<TrainRecord> {
    fn record(&mut self, record: &TrainRecord) -> Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// Appends records as CSV: `epoch,split,mean_distance,accuracy,converged_fraction,wall_ms`.
pub struct CsvRecorder<W: std::io::Write> {
    writer: csv::Writer<W>,
    wall_clock: bool,
}

pub const RECORD_HEADER: [&str; 6] = ["epoch", "split", "mean_distance", "accuracy", "converged_fraction", "wall_ms"];

impl<W: std::io::Write> CsvRecorder<W> {
    /// With `wall_clock = false` the `wall_ms` column is written as 0 so the
    /// file is reproducible byte for byte.
    pub fn new(inner: W, wall_clock: bool) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(RECORD_HEADER)?;
        writer.flush()?;
        Ok(CsvRecorder { writer, wall_clock })
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

impl<W: std::io::Write> TrainObserver for CsvRecorder<W> {
    fn record(&mut self, r: &TrainRecord) -> Result<()> {
        let wall = if self.wall_clock { r.wall_ms } else { 0 };
        self.writer.write_record([
            r.epoch.to_string(),
            r.split.as_str().to_string(),
            r.mean_distance.to_string(),
            r.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            r.converged_fraction.to_string(),
            wall.to_string(),
        ])?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Fans one observer call out to two observers.
pub struct Tee<'a, A: ?Sized, B: ?Sized>(pub &'a mut A, pub &'a mut B);

impl<A: TrainObserver + ?Sized, B: TrainObserver + ?Sized> TrainObserver for Tee<'_, A, B> {
    fn record(&mut self, r: &TrainRecord) -> Result<()> {
        self.0.record(r)?;
        self.1.record(r)
    }

    fn epoch_end(&mut self, epoch: usize, net: &Network) -> Result<()> {
        self.0.epoch_end(epoch, net)?;
        self.1.epoch_end(epoch, net)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSummary {
    pub epochs: usize,
    pub updates: usize,
    /// Samples whose gradient was averaged over fewer restarts than requested.
    pub partial_samples: usize,
    /// Samples left out of their batch because no restart converged in both
    /// phases.
    pub skipped_samples: usize,
}

/// Draws the batches of one epoch as index lists.
pub fn epoch_batches(n: usize, cfg: &EpConfig, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let per_epoch = cfg.batches_per_epoch.unwrap_or_else(|| n.div_ceil(cfg.batch_size));
    let mut rng = seed::rng(seed::derive(seed, &[0xba7c, epoch as u64]));
    match cfg.sampling {
        Sampling::Replacement => (0..per_epoch)
            .map(|_| (0..cfg.batch_size).map(|_| rng.random_range(0..n)).collect())
            .collect(),
        Sampling::Shuffle => {
            let mut order: Vec<usize> = Vec::with_capacity(per_epoch * cfg.batch_size);
            while order.len() < per_epoch * cfg.batch_size {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                order.extend(perm);
            }
            order
                .chunks(cfg.batch_size)
                .take(per_epoch)
                .map(|c| c.to_vec())
                .collect()
        }
    }
}

/// Seed `train` passes to [`evaluate`] for a given training seed. Evaluating a
/// saved network with it reproduces the logged metrics exactly.
pub fn evaluation_seed(training_seed: u64) -> u64 {
    seed::derive(training_seed, &[0xe7a1])
}

/// Trains `net` in place with mini-batch SGD on EP gradients.
///
/// A sample without a single usable restart is left out of its batch (and
/// counted in [`TrainSummary::skipped_samples`]); a batch with no usable
/// sample makes no update.
///
/// Evaluations run before the first epoch, every `eval_interval` epochs and
/// after the last epoch, on the training set (unless `eval_train` is off) and
/// the test set when one is given.
pub fn train(
    net: &mut Network,
    train_set: &[Sample],
    test_set: Option<&[Sample]>,
    cfg: &EpConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<TrainSummary> {
    cfg.validate()?;
    net.check_trainable()?;
    if train_set.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    for s in train_set.iter().chain(test_set.unwrap_or(&[])) {
        s.validate(net)?;
    }
    let start = Instant::now();
    let eval_seed = evaluation_seed(seed);
    let emit = |net: &Network, epoch: usize, observer: &mut dyn TrainObserver| -> Result<()> {
        let mut splits = Vec::with_capacity(2);
        if cfg.eval_train {
            splits.push((Split::Train, train_set));
        }
        if let Some(test) = test_set {
            splits.push((Split::Test, test));
        }
        for (split, data) in splits {
            let m = evaluate(net, data, &cfg.relax, eval_seed)?;
            observer.record(&TrainRecord {
                epoch,
                split,
                mean_distance: m.mean_distance,
                accuracy: m.accuracy,
                converged_fraction: m.converged_fraction,
                wall_ms: start.elapsed().as_millis() as u64,
            })?;
        }
        Ok(())
    };

    emit(net, 0, observer)?;
    observer.epoch_end(0, net)?;
    let mut updates = 0;
    let mut partial = 0;
    let mut skipped = 0;
    for epoch in 1..=cfg.epochs {
        for (b, batch) in epoch_batches(train_set.len(), cfg, seed, epoch).into_iter().enumerate() {
            let estimates = batch
                .par_iter()
                .enumerate()
                .map(|(pos, &idx)| {
                    let s = seed::derive(seed, &[epoch as u64, b as u64, pos as u64]);
                    ep_gradient(net, &train_set[idx], cfg, s)
                })
                .collect::<Vec<_>>();
            let mut usable = Vec::with_capacity(estimates.len());
            for est in estimates {
                match est {
                    Ok(e) => usable.push(e),
                    Err(Error::NoConvergence { .. }) => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            if usable.is_empty() {
                continue;
            }
            let estimates = usable;
            let mut grad = vec![0.0; net.n_params()];
            for est in &estimates {
                if est.used < est.restarts {
                    partial += 1;
                }
                for (g, e) in grad.iter_mut().zip(&est.grad) {
                    *g += e;
                }
            }
            if cfg.reduction == BatchReduction::Mean {
                let n = estimates.len() as f64;
                grad.iter_mut().for_each(|g| *g /= n);
            }
            sgd_step(net, &grad, cfg.learning_rate)?;
            updates += 1;
            if net.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite { epoch });
            }
        }
        if epoch % cfg.eval_interval == 0 || epoch == cfg.epochs {
            emit(net, epoch, observer)?;
        }
        observer.epoch_end(epoch, net)?;
    }
    Ok(TrainSummary {
        epochs: cfg.epochs,
        updates,
        partial_samples: partial,
        skipped_samples: skipped,
    })
}
