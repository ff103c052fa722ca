//! Minibatch training loop shared by pre-training and continual training.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NclError, Result};
use crate::harness::energy::ActivityCounts;
use crate::network::{run_layers, NetworkTopology, ThresholdPolicy};
use crate::par;
use crate::spike::LabeledTrain;
use crate::training::bptt::{bptt_backward, GradientSet};
use crate::training::loss::{masked_readout_loss, LossReport};
use crate::training::optim::Optimizer;

/// Which part of the network a training pass runs and updates.
#[derive(Debug, Clone)]
pub struct PassSetup<'a> {
    /// 1-based layer receiving the samples (1 = raw input).
    pub start_layer: usize,
    pub first_learning_layer: usize,
    pub policy: &'a ThresholdPolicy,
    /// Logit per unit spike rate; the loss sees `count * readout_scale / T`.
    pub readout_scale: f64,
    /// Output neurons taking part in the softmax; all of them when `None`.
    pub class_mask: Option<&'a [bool]>,
}

/// Per-sample output of a forward + backward pass.
#[derive(Debug, Clone)]
pub struct SampleResult {
    pub grads: GradientSet,
    pub report: LossReport,
    pub activity: ActivityCounts,
}

pub fn sample_gradient(net: &NetworkTopology, sample: &LabeledTrain, setup: &PassSetup<'_>) -> Result<SampleResult> {
    let layers = &net.layers[setup.start_layer - 1..];
    let run = run_layers(layers, &sample.train, setup.policy)?;
    let scale = setup.readout_scale / sample.train.timesteps().max(1) as f64;
    let report = masked_readout_loss(&run.output, sample.label, scale, setup.class_mask)?;
    let grads = bptt_backward(net, &run.traces, setup.start_layer, &report.count_grad, setup.first_learning_layer)?;
    Ok(SampleResult {
        grads,
        report,
        activity: ActivityCounts::from_traces(layers, &run.traces),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Fraction of samples predicted correctly during the pass.
    pub train_accuracy: f64,
    #[serde(skip)]
    pub losses: Vec<f64>,
    #[serde(skip)]
    pub activity: ActivityCounts,
}

/// One pass over `samples` in the given `order`, updating after every batch.
///
/// Per-sample gradients may be computed in parallel; they are summed in batch order
/// so the update is independent of scheduling.
pub fn train_epoch(
    net: &mut NetworkTopology,
    opt: &mut Optimizer,
    samples: &[LabeledTrain],
    order: &[usize],
    batch_size: usize,
    setup: &PassSetup<'_>,
) -> Result<EpochStats> {
    if batch_size == 0 {
        return Err(NclError::contract("batch size must be positive"));
    }
    let mut losses = Vec::with_capacity(order.len());
    let mut correct = 0usize;
    let mut activity = ActivityCounts::default();
    for batch in order.chunks(batch_size) {
        let frozen: &NetworkTopology = net;
        let results = par::try_map_collect(batch, |&i| sample_gradient(frozen, &samples[i], setup))?;
        let mut total: Option<GradientSet> = None;
        for (r, &i) in results.into_iter().zip(batch) {
            losses.push(r.report.loss);
            correct += (r.report.predicted == samples[i].label) as usize;
            activity += r.activity;
            match total.as_mut() {
                Some(t) => t.add_assign(&r.grads),
                None => total = Some(r.grads),
            }
        }
        let mut total = total.expect("chunks are non-empty");
        if batch.len() > 1 {
            total.scale(1.0 / batch.len() as f64);
        }
        opt.apply_update(net, &total)?;
    }
    let n = order.len().max(1) as f64;
    Ok(EpochStats {
        epoch: 0,
        mean_loss: losses.iter().sum::<f64>() / n,
        train_accuracy: correct as f64 / n,
        losses,
        activity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub readout_scale: f64,
    /// Restrict the softmax to classes that occur in the training data, leaving
    /// the outputs of classes yet to be learned untouched.
    pub mask_absent_classes: bool,
}

/// Trains every layer on `data` with fixed thresholds, reshuffling each epoch.
pub fn pretrain<R: Rng + ?Sized>(
    net: &mut NetworkTopology,
    opt: &mut Optimizer,
    data: &[LabeledTrain],
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<Vec<EpochStats>> {
    if data.is_empty() {
        return Err(NclError::contract("pre-training set is empty"));
    }
    let out = net.output_width();
    if let Some(bad) = data.iter().find(|s| s.label >= out) {
        return Err(NclError::contract(format!("label {} exceeds output width {}", bad.label, out)));
    }
    net.layers.iter_mut().for_each(|l| l.frozen = false);
    let policy = ThresholdPolicy::Fixed;
    let mut present = vec![false; out];
    data.iter().for_each(|s| present[s.label] = true);
    let setup = PassSetup {
        start_layer: 1,
        first_learning_layer: 1,
        policy: &policy,
        readout_scale: cfg.readout_scale,
        class_mask: cfg.mask_absent_classes.then_some(present.as_slice()),
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut stats = train_epoch(net, opt, data, &order, cfg.batch_size, &setup)?;
        stats.epoch = epoch + 1;
        history.push(stats);
    }
    Ok(history)
}
