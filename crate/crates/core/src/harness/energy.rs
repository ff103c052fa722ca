//! Spike-driven energy proxy: synaptic events plus neuron updates.

use serde::{Deserialize, Serialize};

use crate::lif::{LayerTrace, LifLayer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyModel {
    /// Energy per synaptic operation (one spike delivered to one target).
    pub e_synop: f64,
    /// Energy per neuron-timestep update.
    pub e_neuron: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            e_synop: 1.0,
            e_neuron: 0.1,
        }
    }
}

/// Exact operation counts gathered from forward traces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityCounts {
    /// Spikes times fan-out, feedforward and recurrent.
    pub synops: u64,
    pub neuron_updates: u64,
    /// Multiply-accumulates a dense simulator would issue; the deterministic latency model.
    pub dense_ops: u64,
}

impl ActivityCounts {
    pub fn from_trace(layer: &LifLayer, trace: &LayerTrace) -> Self {
        let out = layer.out_width() as u64;
        let t = trace.timesteps as u64;
        let mut synops = trace.input_spike_count() * out;
        let mut fan_in = layer.in_width() as u64;
        if layer.recurrent {
            synops += trace.output_spike_count() * out;
            fan_in += out;
        }
        ActivityCounts {
            synops,
            neuron_updates: out * t,
            dense_ops: t * fan_in * out,
        }
    }

    /// Counts for a run over `layers`, paired with their traces.
    pub fn from_traces(layers: &[LifLayer], traces: &[LayerTrace]) -> Self {
        layers
            .iter()
            .zip(traces)
            .map(|(l, t)| ActivityCounts::from_trace(l, t))
            .fold(ActivityCounts::default(), |a, b| a + b)
    }

    pub fn energy(&self, m: &EnergyModel) -> f64 {
        m.e_synop * self.synops as f64 + m.e_neuron * self.neuron_updates as f64
    }
}

impl std::ops::Add for ActivityCounts {
    type Output = ActivityCounts;
    fn add(self, o: ActivityCounts) -> ActivityCounts {
        ActivityCounts {
            synops: self.synops + o.synops,
            neuron_updates: self.neuron_updates + o.neuron_updates,
            dense_ops: self.dense_ops + o.dense_ops,
        }
    }
}

impl std::ops::AddAssign for ActivityCounts {
    fn add_assign(&mut self, o: ActivityCounts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ActivityCounts {
    fn sum<I: Iterator<Item = ActivityCounts>>(iter: I) -> Self {
        iter.fold(ActivityCounts::default(), |a, b| a + b)
    }
}

/// `e_synop * Σ(spikes × fan-out) + e_neuron * Σ(neuron-timestep updates)`.
pub fn energy_estimate(layers: &[LifLayer], traces: &[LayerTrace], m: &EnergyModel) -> f64 {
    ActivityCounts::from_traces(layers, traces).energy(m)
}
