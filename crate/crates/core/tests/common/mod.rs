#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use snn_replay::lif::LifParams;
use snn_replay::network::{NetworkConfig, NetworkTopology};
use snn_replay::training::bptt::bptt_backward;
use snn_replay::training::proxy::proxy_loss;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small random recurrent network: 2..=3 layers of 2..=6 neurons, T in 2..=5.
pub struct ProxyCase {
    pub net: NetworkTopology,
    pub input: Vec<f64>,
    pub timesteps: usize,
    pub label: usize,
}

pub fn proxy_case(seed: u64) -> ProxyCase {
    let mut r = rng(seed);
    let depth = r.gen_range(2..=3);
    let input_width = r.gen_range(2..=6);
    let layer_widths: Vec<usize> = (0..depth).map(|_| r.gen_range(2..=6)).collect();
    let cfg = NetworkConfig {
        layer_widths,
        params: LifParams {
            surrogate_slope: 5.0,
            ..LifParams::default()
        },
        ff_gain: 3.0,
        recurrent: true,
        rec_gain: 0.5,
    };
    let net = NetworkTopology::random(input_width, &cfg, &mut r).unwrap();
    let timesteps = r.gen_range(2..=5);
    let input = (0..timesteps * input_width).map(|_| r.gen_range(0.0..1.5)).collect();
    let label = r.gen_range(0..net.output_width());
    ProxyCase {
        net,
        input,
        timesteps,
        label,
    }
}

/// Every weight gradient next to its central-difference estimate,
/// as `(analytic, numeric)` pairs.
pub fn gradient_pairs(case: &ProxyCase, scale: f64, h: f64) -> Vec<(f64, f64)> {
    let (_, grad, traces) = proxy_loss(&case.net, &case.input, case.timesteps, case.label, scale);
    let g = bptt_backward(&case.net, &traces, 1, &grad, 1).unwrap();
    let loss_at = |net: &NetworkTopology| proxy_loss(net, &case.input, case.timesteps, case.label, scale).0;
    let mut out = Vec::new();
    for l in 0..case.net.depth() {
        for recurrent in [false, true] {
            let n = if recurrent {
                case.net.layers[l].v.as_slice().len()
            } else {
                case.net.layers[l].w.as_slice().len()
            };
            for k in 0..n {
                let mut plus = case.net.clone();
                let mut minus = case.net.clone();
                *weight_mut(&mut plus, l, recurrent, k) += h;
                *weight_mut(&mut minus, l, recurrent, k) -= h;
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                let analytic = if recurrent {
                    g.dv[l].as_slice()[k]
                } else {
                    g.dw[l].as_slice()[k]
                };
                out.push((analytic, numeric));
            }
        }
    }
    out
}

fn weight_mut(net: &mut NetworkTopology, l: usize, recurrent: bool, k: usize) -> &mut f64 {
    let layer = &mut net.layers[l];
    let m = if recurrent { &mut layer.v } else { &mut layer.w };
    &mut m.as_mut_slice()[k]
}

/// Relative error with an absolute floor for coordinates that are both ~0.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    let m = a.abs().max(b.abs());
    if m < 1e-7 {
        0.0
    } else {
        d / m
    }
}
