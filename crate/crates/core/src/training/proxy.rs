//! Smoothed stand-in for the spiking forward pass.
//!
//! The step nonlinearity is replaced by `fast_sigmoid(u - thr)`, whose exact
//! derivative is the surrogate used by [`bptt_backward`](super::bptt::bptt_backward).
//! Backpropagating through proxy traces therefore gives the true gradient of the
//! proxy loss, which finite differences can check.

use crate::lif::{fast_sigmoid, LayerTrace};
use crate::network::NetworkTopology;
use crate::training::loss::softmax_cross_entropy;

/// Forward pass of the proxy network on a real-valued `T x input_width` input.
pub fn proxy_forward(net: &NetworkTopology, input: &[f64], timesteps: usize) -> Vec<LayerTrace> {
    let mut traces = Vec::with_capacity(net.depth());
    let mut x = input.to_vec();
    for layer in &net.layers {
        let p = &layer.params;
        let (n_in, n_out) = (layer.in_width(), layer.out_width());
        let mut tr = LayerTrace::with_capacity(timesteps, n_in, n_out);
        let mut m = vec![p.v_rst; n_out];
        let mut s_prev = vec![0.0; n_out];
        for t in 0..timesteps {
            let xt = &x[t * n_in..(t + 1) * n_in];
            let mut z = vec![0.0; n_out];
            layer.w.accumulate_transposed(xt, &mut z);
            if layer.recurrent {
                layer.v.accumulate_transposed(&s_prev, &mut z);
            }
            tr.input.extend_from_slice(xt);
            for n in 0..n_out {
                let u = p.beta * (m[n] - p.v_rst) + p.v_rst + z[n];
                let s = fast_sigmoid(u - p.v_thr, p.surrogate_slope);
                tr.membrane.push(u);
                tr.spikes.push(s);
                m[n] = u - (u - p.v_rst) * s;
                s_prev[n] = s;
            }
            tr.thresholds.push(p.v_thr);
            tr.timesteps += 1;
        }
        x = tr.spikes.clone();
        traces.push(tr);
    }
    traces
}

/// Summed proxy outputs per output neuron.
pub fn proxy_readout(traces: &[LayerTrace]) -> Vec<f64> {
    let last = traces.last().expect("at least one layer");
    let mut r = vec![0.0; last.width];
    for t in 0..last.timesteps {
        for (a, s) in r.iter_mut().zip(last.spike_row(t)) {
            *a += s;
        }
    }
    r
}

/// Proxy loss and its gradient with respect to the readout.
pub fn proxy_loss(net: &NetworkTopology, input: &[f64], timesteps: usize, label: usize, scale: f64) -> (f64, Vec<f64>, Vec<LayerTrace>) {
    let traces = proxy_forward(net, input, timesteps);
    let (loss, grad) = softmax_cross_entropy(&proxy_readout(&traces), label, scale);
    (loss, grad, traces)
}
