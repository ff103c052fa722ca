//! End-to-end runs: pre-train, split, prepare replay, continual training.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::continual::config::{ExperimentMode, RunConfig};
use crate::continual::ncl::{continual_plan, ncl_train, prepare_replay, ContinualData};
use crate::continual::tasks::{make_task_split, TaskSplit};
use crate::data::events::{Dataset, DatasetManifest};
use crate::data::raster::rasterize_all;
use crate::error::{NclError, Result};
use crate::harness::eval::evaluate_trains;
use crate::harness::report::{combined_accuracy, ExperimentRow};
use crate::network::NetworkTopology;
use crate::replay::split::split_network;
use crate::replay::store::LatentStore;
use crate::training::checkpoint::Checkpoint;
use crate::training::optim::Optimizer;
use crate::training::trainer::{pretrain, EpochStats, PretrainConfig};

const STREAM_INIT: u64 = 1;
const STREAM_PRETRAIN: u64 = 2;
const STREAM_CONTINUAL: u64 = 3;

pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Task split for a run: hold out `cfg.held_out_class`, or the last class.
pub fn task_split(cfg: &RunConfig, data: &Dataset) -> Result<TaskSplit> {
    let held_out = cfg.held_out_class.unwrap_or(data.classes().saturating_sub(1));
    make_task_split(data, held_out, cfg.replay_fraction, cfg.seed)
}

/// Random initialisation plus pre-training on `ts_pre` at `cfg.t_pre` timesteps.
pub fn pretrain_stage(cfg: &RunConfig, data: &Dataset, split: &TaskSplit) -> Result<(Checkpoint, Vec<EpochStats>)> {
    cfg.validate()?;
    let out = *cfg.network.layer_widths.last().expect("validated");
    if out < data.classes() {
        return Err(NclError::Config(format!(
            "output width {} is smaller than the class count {}",
            out,
            data.classes()
        )));
    }
    let net = NetworkTopology::random(data.channels(), &cfg.network, &mut seeded(cfg.seed, STREAM_INIT))?;
    let train = rasterize_all(data, &split.ts_pre, cfg.t_pre)?;
    let mut rng = seeded(cfg.seed, STREAM_PRETRAIN);
    let mut optimizer = Optimizer::new(cfg.optimizer_config(cfg.eta_pre));
    let mut net = net;
    let history = pretrain(
        &mut net,
        &mut optimizer,
        &train,
        &PretrainConfig {
            epochs: cfg.e_pre,
            batch_size: cfg.batch_size,
            readout_scale: cfg.readout_scale,
            mask_absent_classes: cfg.mask_absent_classes,
        },
        &mut rng,
    )?;
    Ok((Checkpoint { net, optimizer, rng }, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub mode: ExperimentMode,
    /// Settings actually used, after applying the mode.
    pub config: RunConfig,
    /// Epoch 0 is the pre-continual evaluation.
    pub rows: Vec<ExperimentRow>,
    pub pretrain: Vec<EpochStats>,
    pub store: Option<LatentStore>,
    /// Network, optimizer and RNG as they stand after the continual phase.
    pub final_state: Checkpoint,
    pub frozen_hashes_before: Vec<[u8; 32]>,
    pub frozen_hashes_after: Vec<[u8; 32]>,
}

impl ExperimentReport {
    pub fn final_row(&self) -> &ExperimentRow {
        self.rows.last().expect("at least the epoch-0 row")
    }

    pub fn pre_cl(&self) -> &ExperimentRow {
        &self.rows[0]
    }

    /// Sum of per-epoch wall latency over the continual phase.
    pub fn continual_latency(&self) -> f64 {
        self.rows.iter().skip(1).map(|r| r.wall_latency).sum()
    }

    pub fn continual_energy(&self) -> f64 {
        self.rows.iter().skip(1).map(|r| r.energy_proxy).sum()
    }

    pub fn continual_neuron_updates(&self) -> u64 {
        self.rows.iter().skip(1).map(|r| r.neuron_updates).sum()
    }

    pub fn frozen_intact(&self) -> bool {
        self.frozen_hashes_before == self.frozen_hashes_after
    }

    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        self.final_state.to_bytes()
    }
}

/// Continual phase of a run, starting from a pre-trained checkpoint.
///
/// Replay modes build their latent store from `ts_replay` unless `prebuilt`
/// supplies one.
pub fn run_continual(
    base: &RunConfig,
    mode: ExperimentMode,
    data: &Dataset,
    split: &TaskSplit,
    pretrained: &Checkpoint,
    pretrain_history: Vec<EpochStats>,
    prebuilt: Option<LatentStore>,
) -> Result<ExperimentReport> {
    let cfg = base.for_mode(mode);
    cfg.validate()?;
    let mut net = pretrained.net.clone();
    let replay_split = split_network(&mut net, cfg.l_ins).map_err(|e| e.in_stage("split"))?;
    let t = cfg.t_step;
    let old_eval = rasterize_all(data, &split.ts_pre, t)?;
    let new_task = rasterize_all(data, &split.ts_cl, t)?;

    let store = if !mode.uses_replay() {
        None
    } else if let Some(store) = prebuilt {
        Some(store)
    } else {
        let replay = rasterize_all(data, &split.ts_replay, t)?;
        let (store, _) = prepare_replay(&net, &replay_split, &replay, &cfg).map_err(|e| e.in_stage("prepare-replay"))?;
        Some(store)
    };

    let plan = continual_plan(&cfg, &replay_split);
    let old0 = evaluate_trains(&net, &old_eval, &plan)?;
    let new0 = evaluate_trains(&net, &new_task, &plan)?;
    let latent_bytes = store.as_ref().map_or(0, LatentStore::total_bytes) as u64;
    let mut rows = vec![ExperimentRow {
        epoch: 0,
        old_top1: old0.accuracy(),
        new_top1: new0.accuracy(),
        combined_top1: combined_accuracy(old0.accuracy(), old0.total, new0.accuracy(), new0.total),
        wall_latency: 0.0,
        dense_ops: 0,
        synop_count: 0,
        neuron_updates: 0,
        energy_proxy: 0.0,
        latent_bytes,
    }];

    let before: Vec<[u8; 32]> = replay_split.frozen(&net).iter().map(|l| l.weight_hash()).collect();
    let mut rng = seeded(cfg.seed, STREAM_CONTINUAL);
    let mut optimizer = Optimizer::new(cfg.optimizer_config(cfg.effective_eta_cl()));
    let cl_rows = ncl_train(
        &mut net,
        &replay_split,
        store.as_ref(),
        &ContinualData {
            new_task: &new_task,
            old_eval: &old_eval,
        },
        &cfg,
        &mut optimizer,
        &mut rng,
    )
    .map_err(|e| e.in_stage("continual training"))?;
    rows.extend(cl_rows);
    let after = replay_split.frozen(&net).iter().map(|l| l.weight_hash()).collect();

    Ok(ExperimentReport {
        mode,
        config: cfg,
        rows,
        pretrain: pretrain_history,
        store,
        final_state: Checkpoint { net, optimizer, rng },
        frozen_hashes_before: before,
        frozen_hashes_after: after,
    })
}

/// Full pipeline for one mode.
pub fn run_experiment(cfg: &RunConfig, data: &Dataset, mode: ExperimentMode) -> Result<ExperimentReport> {
    let split = task_split(cfg, data).map_err(|e| e.in_stage("task split"))?;
    let (ckpt, history) = pretrain_stage(cfg, data, &split).map_err(|e| e.in_stage("pre-training"))?;
    run_continual(cfg, mode, data, &split, &ckpt, history, None)
}

/// Reproducibility record written next to every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub mode: String,
    pub parallel: bool,
    pub dataset_hash: String,
    pub dataset: DatasetManifest,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn new(cfg: &RunConfig, mode: ExperimentMode, data: &Dataset) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            mode: mode.name().to_string(),
            parallel: crate::par::is_parallel(),
            dataset_hash: data.content_hash(),
            dataset: data.manifest.clone(),
            config: cfg.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serialises")
    }
}
