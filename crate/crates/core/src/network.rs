//! Layer stacks, forward simulation and threshold policies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::continual::threshold::{SchedulerMode, ThresholdSchedulerState};
use crate::error::{NclError, Result};
use crate::lif::{layer_forward, LayerRunner, LayerTrace, LifLayer, LifParams};
use crate::spike::SpikeTrain;

/// Shape and initialisation of a network; the input width comes from the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Widths of every layer after the input, output layer last.
    pub layer_widths: Vec<usize>,
    pub params: LifParams,
    pub ff_gain: f64,
    pub recurrent: bool,
    pub rec_gain: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            layer_widths: vec![48, 32, 24, 8],
            params: LifParams::default(),
            ff_gain: 3.0,
            recurrent: true,
            rec_gain: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub layers: Vec<LifLayer>,
}

impl NetworkTopology {
    pub fn new(layers: Vec<LifLayer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(NclError::contract("a network needs at least two layers"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_width() != pair[1].in_width() {
                return Err(NclError::contract(format!(
                    "layer {} emits width {} but layer {} expects {}",
                    i + 1,
                    pair[0].out_width(),
                    i + 2,
                    pair[1].in_width()
                )));
            }
        }
        Ok(NetworkTopology { layers })
    }

    pub fn random<R: Rng + ?Sized>(input_width: usize, cfg: &NetworkConfig, rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(cfg.layer_widths.len());
        let mut prev = input_width;
        for &w in &cfg.layer_widths {
            let rec = cfg.recurrent.then_some(cfg.rec_gain);
            layers.push(LifLayer::random(prev, w, cfg.params, cfg.ff_gain, rec, rng)?);
            prev = w;
        }
        NetworkTopology::new(layers)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].in_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].out_width()
    }

    /// Neuron count of every layer.
    pub fn layer_widths(&self) -> Vec<usize> {
        self.layers.iter().map(LifLayer::out_width).collect()
    }

    /// Width of the activations entering layer `l` (1-based); `l = 1` is the raw input.
    pub fn width_into(&self, l: usize) -> usize {
        self.layers[l - 1].in_width()
    }

    pub fn weight_hashes(&self) -> Vec<[u8; 32]> {
        self.layers.iter().map(LifLayer::weight_hash).collect()
    }
}

/// How each timestep's threshold potential is chosen during a forward run.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdPolicy {
    /// Every layer uses its own `params.v_thr`.
    Fixed,
    /// One potential per timestep, shared by all layers in the run.
    Schedule(Vec<f64>),
    /// Potentials follow the adaptive scheduler, which watches the aggregate spikes
    /// of the layers in the run. Step 0 uses the first layer's `params.v_thr`.
    Adaptive {
        mode: SchedulerMode,
        adjust_interval: usize,
    },
}

/// Output of a forward run over a contiguous block of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardRun {
    pub output: SpikeTrain,
    pub traces: Vec<LayerTrace>,
    /// Threshold applied at each timestep (the first layer's, under `Fixed`).
    pub thresholds: Vec<f64>,
}

/// Runs `layers` timestep-major on `input` under `policy`.
///
/// With an empty layer slice the input is returned untouched.
pub fn run_layers(layers: &[LifLayer], input: &SpikeTrain, policy: &ThresholdPolicy) -> Result<ForwardRun> {
    let t_total = input.timesteps();
    if let Some(first) = layers.first() {
        if first.in_width() != input.width() {
            return Err(NclError::contract(format!(
                "input width {} does not match layer input width {}",
                input.width(),
                first.in_width()
            )));
        }
    }
    if let ThresholdPolicy::Schedule(s) = policy {
        if s.len() != t_total {
            return Err(NclError::contract(format!(
                "threshold schedule has {} entries for {} timesteps",
                s.len(),
                t_total
            )));
        }
    }
    if layers.is_empty() {
        return Ok(ForwardRun {
            output: input.clone(),
            traces: Vec::new(),
            thresholds: Vec::new(),
        });
    }

    let mut runners: Vec<LayerRunner> = layers.iter().map(|l| LayerRunner::new(l, t_total)).collect();
    let mut out = SpikeTrain::zeros(t_total, layers[layers.len() - 1].out_width());
    let mut scheduler = match policy {
        ThresholdPolicy::Adaptive { adjust_interval, .. } => Some(ThresholdSchedulerState::new(
            t_total,
            *adjust_interval,
            layers[0].params.v_thr,
        )),
        _ => None,
    };
    let mut thresholds = Vec::with_capacity(t_total);
    let mut row: Vec<u8> = Vec::new();

    for t in 0..t_total {
        let shared = match policy {
            ThresholdPolicy::Fixed => None,
            ThresholdPolicy::Schedule(s) => Some(s[t]),
            ThresholdPolicy::Adaptive { .. } => scheduler.as_ref().map(|s| s.current_v_thr),
        };
        thresholds.push(shared.unwrap_or(layers[0].params.v_thr));
        row.clear();
        row.extend_from_slice(input.row(t));
        let mut any_spike = false;
        for (layer, runner) in layers.iter().zip(runners.iter_mut()) {
            let thr = shared.unwrap_or(layer.params.v_thr);
            let spikes = runner.step(layer, &row, thr);
            any_spike |= spikes.iter().any(|&b| b != 0);
            row.clear();
            row.extend_from_slice(spikes);
        }
        out.row_mut(t).copy_from_slice(&row);
        if let (Some(s), ThresholdPolicy::Adaptive { mode, .. }) = (scheduler.as_mut(), policy) {
            s.threshold_step(any_spike, *mode)?;
        }
    }

    Ok(ForwardRun {
        output: out,
        traces: runners.into_iter().map(LayerRunner::finish).collect(),
        thresholds,
    })
}

/// Chains [`layer_forward`] from `start_layer` (1-based) through the output layer.
///
/// Starting mid-network lets stored activations be injected at that layer.
pub fn network_forward(
    net: &NetworkTopology,
    input: &SpikeTrain,
    start_layer: usize,
    v_thr_schedule: Option<&[f64]>,
) -> Result<(SpikeTrain, Vec<LayerTrace>)> {
    if start_layer == 0 || start_layer > net.depth() {
        return Err(NclError::contract(format!(
            "start layer {} outside 1..={}",
            start_layer,
            net.depth()
        )));
    }
    let expected = net.width_into(start_layer);
    if input.width() != expected {
        return Err(NclError::Injection {
            layer: start_layer,
            expected,
            actual: input.width(),
        });
    }
    let mut current = input.clone();
    let mut traces = Vec::with_capacity(net.depth() - start_layer + 1);
    for layer in &net.layers[start_layer - 1..] {
        let (next, trace) = layer_forward(layer, &current, v_thr_schedule)?;
        traces.push(trace);
        current = next;
    }
    Ok((current, traces))
}
