use serde::{Deserialize, Serialize};

use crate::error::{NclError, Result};
use crate::matrix::Matrix;
use crate::network::NetworkTopology;
use crate::training::bptt::GradientSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    /// Adaptive first/second moment estimates with bias correction.
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub eta: f64,
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerConfig {
    pub fn sgd(eta: f64) -> Self {
        OptimizerConfig {
            eta,
            kind: OptimizerKind::Sgd,
            ..Self::adam(eta)
        }
    }

    pub fn adam(eta: f64) -> Self {
        OptimizerConfig {
            eta,
            kind: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(NclError::Config(format!("learning rate {} must be finite and >= 0", self.eta)));
        }
        Ok(())
    }
}

/// Moment estimates, one pair of matrices per weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: GradientSet,
    pub v: GradientSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    pub adam: Option<AdamState>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer { config, adam: None }
    }

    /// Applies one update to every non-frozen layer.
    ///
    /// Nothing is written when a gradient is non-finite or a frozen layer carries a
    /// nonzero gradient.
    pub fn apply_update(&mut self, net: &mut NetworkTopology, grads: &GradientSet) -> Result<()> {
        if grads.dw.len() != net.depth() || grads.dv.len() != net.depth() {
            return Err(NclError::contract("gradient set depth differs from network"));
        }
        for (i, layer) in net.layers.iter().enumerate() {
            if !grads.dw[i].same_shape(&layer.w) || !grads.dv[i].same_shape(&layer.v) {
                return Err(NclError::contract(format!("gradient shape mismatch at layer {}", i + 1)));
            }
            if layer.frozen && !(grads.dw[i].is_zero() && grads.dv[i].is_zero()) {
                return Err(NclError::contract(format!("nonzero gradient for frozen layer {}", i + 1)));
            }
        }
        if !grads.is_finite() {
            return Err(NclError::numeric("non-finite gradient, update aborted"));
        }

        let cfg = self.config;
        match cfg.kind {
            OptimizerKind::Sgd => {
                for (i, layer) in net.layers.iter_mut().enumerate().filter(|(_, l)| !l.frozen) {
                    sgd(&mut layer.w, &grads.dw[i], cfg.eta);
                    if layer.recurrent {
                        sgd(&mut layer.v, &grads.dv[i], cfg.eta);
                    }
                }
            }
            OptimizerKind::Adam => {
                let state = self.adam.get_or_insert_with(|| AdamState {
                    step: 0,
                    m: GradientSet::zeros_like(net),
                    v: GradientSet::zeros_like(net),
                });
                state.step += 1;
                let bc1 = 1.0 - cfg.beta1.powi(state.step as i32);
                let bc2 = 1.0 - cfg.beta2.powi(state.step as i32);
                for (i, layer) in net.layers.iter_mut().enumerate().filter(|(_, l)| !l.frozen) {
                    adam(&mut layer.w, &grads.dw[i], &mut state.m.dw[i], &mut state.v.dw[i], &cfg, bc1, bc2);
                    if layer.recurrent {
                        adam(&mut layer.v, &grads.dv[i], &mut state.m.dv[i], &mut state.v.dv[i], &cfg, bc1, bc2);
                    }
                }
            }
        }
        Ok(())
    }
}

fn sgd(w: &mut Matrix, g: &Matrix, eta: f64) {
    for (w, g) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *w -= eta * g;
    }
}

fn adam(w: &mut Matrix, g: &Matrix, m: &mut Matrix, v: &mut Matrix, cfg: &OptimizerConfig, bc1: f64, bc2: f64) {
    let it = w
        .as_mut_slice()
        .iter_mut()
        .zip(g.as_slice())
        .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
    for ((w, &g), (m, v)) in it {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        *w -= cfg.eta * (*m / bc1) / ((*v / bc2).sqrt() + cfg.epsilon);
    }
}
