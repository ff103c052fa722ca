//! Network preparation and the continual training phase.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::continual::config::RunConfig;
use crate::continual::threshold::SchedulerMode;
use crate::error::{NclError, Result};
use crate::harness::energy::ActivityCounts;
use crate::harness::eval::{evaluate_trains, InferencePlan};
use crate::harness::report::{combined_accuracy, ExperimentRow};
use crate::network::{run_layers, NetworkTopology, ThresholdPolicy};
use crate::par;
use crate::replay::generate::generate_latent;
use crate::replay::split::ReplaySplit;
use crate::replay::store::LatentStore;
use crate::spike::LabeledTrain;
use crate::training::optim::Optimizer;
use crate::training::trainer::{train_epoch, PassSetup};

/// Threshold policy of a phase under `cfg`.
pub fn phase_policy(cfg: &RunConfig, mode: SchedulerMode) -> ThresholdPolicy {
    if cfg.adaptive_threshold {
        ThresholdPolicy::Adaptive {
            mode,
            adjust_interval: cfg.adjust_interval,
        }
    } else {
        ThresholdPolicy::Fixed
    }
}

/// Inference plan for the network after splitting: frozen layers keep their
/// thresholds, learning layers follow the continual-phase policy.
pub fn continual_plan(cfg: &RunConfig, split: &ReplaySplit) -> InferencePlan {
    InferencePlan {
        boundary: split.l_ins,
        learning_policy: phase_policy(cfg, SchedulerMode::Ncl),
    }
}

/// Builds the latent store from `replay` (trains rasterised at `cfg.t_step`).
///
/// Latent generation is repeated for `e_pre` epochs under the prepare-mode
/// scheduler; the last epoch's store is kept.
pub fn prepare_replay(
    net: &NetworkTopology,
    split: &ReplaySplit,
    replay: &[LabeledTrain],
    cfg: &RunConfig,
) -> Result<(LatentStore, ActivityCounts)> {
    if replay.is_empty() {
        return Err(NclError::contract("replay set is empty"));
    }
    if split.l_ins != cfg.l_ins || split.depth != net.depth() {
        return Err(NclError::contract("split does not match the run config"));
    }
    if let Some(bad) = replay.iter().find(|s| s.train.timesteps() != cfg.t_step) {
        return Err(NclError::contract(format!(
            "replay train has {} timesteps, config expects {}",
            bad.train.timesteps(),
            cfg.t_step
        )));
    }
    let policy = phase_policy(cfg, SchedulerMode::Prepare);
    let mut result = None;
    for _ in 0..cfg.e_pre.max(1) {
        result = Some(generate_latent(
            split.frozen(net),
            replay,
            &policy,
            cfg.codec,
            cfg.effective_chunk(),
            split.l_ins,
        )?);
    }
    Ok(result.expect("at least one epoch"))
}

/// Where each element of a continual training stream comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamItem {
    New(usize),
    Replay(usize),
}

/// One epoch's shuffled union of new-task activations and replay entries.
pub fn build_stream<R: Rng + ?Sized>(n_new: usize, n_replay: usize, rng: &mut R) -> Vec<StreamItem> {
    let mut items: Vec<StreamItem> = (0..n_new)
        .map(StreamItem::New)
        .chain((0..n_replay).map(StreamItem::Replay))
        .collect();
    items.shuffle(rng);
    items
}

/// Samples the continual phase trains on and is scored against.
pub struct ContinualData<'a> {
    /// New-task training samples at `t_step`, raw input.
    pub new_task: &'a [LabeledTrain],
    /// Old-task samples at `t_step` for the per-epoch old accuracy.
    pub old_eval: &'a [LabeledTrain],
}

/// Trains the learning layers on new-task activations plus decompressed replay
/// entries for `cfg.e_cl` epochs; returns one row per epoch.
///
/// Frozen-layer weights are checked against their starting hashes after every
/// epoch. `opt` is normally fresh, built from `cfg.optimizer_config(cfg.effective_eta_cl())`.
#[allow(clippy::too_many_arguments)]
pub fn ncl_train<R: Rng + ?Sized>(
    net: &mut NetworkTopology,
    split: &ReplaySplit,
    store: Option<&LatentStore>,
    data: &ContinualData<'_>,
    cfg: &RunConfig,
    opt: &mut Optimizer,
    rng: &mut R,
) -> Result<Vec<ExperimentRow>> {
    let ins_width = split.insertion_width(net);
    if let Some(s) = store {
        if s.timesteps != cfg.t_step || s.width != ins_width || s.codec != cfg.codec || s.l_ins != split.l_ins {
            return Err(NclError::contract(format!(
                "store (T={}, width={}, {}, l_ins={}) does not match run (T={}, width={}, {}, l_ins={})",
                s.timesteps, s.width, s.codec, s.l_ins, cfg.t_step, ins_width, cfg.codec, split.l_ins
            )));
        }
    }
    if data.new_task.is_empty() {
        return Err(NclError::contract("new-task set is empty"));
    }
    if cfg.e_cl == 0 {
        return Ok(Vec::new());
    }
    for (i, l) in net.layers.iter_mut().enumerate() {
        l.frozen = i + 1 < split.l_ins;
    }
    let frozen_hashes: Vec<[u8; 32]> = split.frozen(net).iter().map(|l| l.weight_hash()).collect();
    let replay = match store {
        Some(s) => s.decompress_all()?,
        None => Vec::new(),
    };
    let latent_bytes = store.map_or(0, LatentStore::total_bytes) as u64;
    let policy = phase_policy(cfg, SchedulerMode::Ncl);
    let plan = continual_plan(cfg, split);
    let setup = PassSetup {
        start_layer: split.l_ins,
        first_learning_layer: split.l_ins,
        policy: &policy,
        readout_scale: cfg.readout_scale,
        class_mask: None,
    };
    let mut rows = Vec::with_capacity(cfg.e_cl);

    for epoch in 1..=cfg.e_cl {
        let started = Instant::now();
        let frozen = split.frozen(net);
        let a_new = par::try_map_collect(data.new_task, |s| {
            let run = run_layers(frozen, &s.train, &ThresholdPolicy::Fixed)?;
            let act = ActivityCounts::from_traces(frozen, &run.traces);
            Ok::<_, NclError>((
                LabeledTrain {
                    train: run.output,
                    label: s.label,
                },
                act,
            ))
        })?;
        let mut activity: ActivityCounts = a_new.iter().map(|(_, a)| *a).sum();
        let stream_items = build_stream(a_new.len(), replay.len(), rng);
        let mut samples: Vec<LabeledTrain> = a_new.into_iter().map(|(s, _)| s).collect();
        samples.extend(replay.iter().cloned());
        let order: Vec<usize> = stream_items
            .iter()
            .map(|item| match *item {
                StreamItem::New(i) => i,
                StreamItem::Replay(j) => data.new_task.len() + j,
            })
            .collect();
        let stats = train_epoch(net, opt, &samples, &order, cfg.effective_cl_batch_size(), &setup)?;
        activity += stats.activity;
        let wall = started.elapsed().as_secs_f64();

        let now: Vec<[u8; 32]> = split.frozen(net).iter().map(|l| l.weight_hash()).collect();
        if now != frozen_hashes {
            return Err(NclError::contract(format!("frozen layer weights changed in epoch {epoch}")));
        }

        let old = if data.old_eval.is_empty() {
            None
        } else {
            Some(evaluate_trains(net, data.old_eval, &plan)?)
        };
        let new = evaluate_trains(net, data.new_task, &plan)?;
        let (old_acc, n_old) = old.as_ref().map_or((0.0, 0), |r| (r.accuracy(), r.total));
        rows.push(ExperimentRow {
            epoch,
            old_top1: old_acc,
            new_top1: new.accuracy(),
            combined_top1: combined_accuracy(old_acc, n_old, new.accuracy(), new.total),
            wall_latency: wall,
            dense_ops: activity.dense_ops,
            synop_count: activity.synops,
            neuron_updates: activity.neuron_updates,
            energy_proxy: activity.energy(&cfg.energy),
            latent_bytes,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn stream_is_a_permutation_of_the_union() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for epoch in 0..5 {
            let s = build_stream(7, 4 + epoch, &mut rng);
            let set: BTreeSet<StreamItem> = s.iter().copied().collect();
            assert_eq!(s.len(), 11 + epoch);
            assert_eq!(set.len(), s.len());
            assert!((0..7).all(|i| set.contains(&StreamItem::New(i))));
            assert!((0..4 + epoch).all(|j| set.contains(&StreamItem::Replay(j))));
        }
    }
}
