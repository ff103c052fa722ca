//! Backpropagation through time with the fast-sigmoid surrogate.
//!
//! Per layer and timestep the forward pass computes
//!
//! ```text
//! u(t)     = beta * (m(t-1) - v_rst) + v_rst + wᵀ x(t) + vᵀ s(t-1)
//! s(t)     = spike(u(t) - thr(t))
//! m(t)     = u(t) - (u(t) - v_rst) * s(t)
//! ```
//!
//! and the backward pass differentiates this recurrence exactly, with
//! `d spike / du` replaced by [`surrogate_grad`]. Thresholds are treated as constants.

use crate::error::{NclError, Result};
use crate::lif::{surrogate_grad, LayerTrace, LifLayer};
use crate::matrix::Matrix;
use crate::network::NetworkTopology;

/// Weight gradients for every layer of a network; frozen layers stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub dw: Vec<Matrix>,
    pub dv: Vec<Matrix>,
}

impl GradientSet {
    pub fn zeros_like(net: &NetworkTopology) -> Self {
        GradientSet {
            dw: net.layers.iter().map(|l| Matrix::zeros(l.w.rows(), l.w.cols())).collect(),
            dv: net.layers.iter().map(|l| Matrix::zeros(l.v.rows(), l.v.cols())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.dw.iter_mut().zip(&other.dw) {
            a.add_assign(b);
        }
        for (a, b) in self.dv.iter_mut().zip(&other.dv) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.dw.iter_mut().chain(self.dv.iter_mut()).for_each(|m| m.scale(factor));
    }

    pub fn is_finite(&self) -> bool {
        self.dw.iter().chain(&self.dv).all(Matrix::is_finite)
    }

    pub fn is_zero(&self) -> bool {
        self.dw.iter().chain(&self.dv).all(Matrix::is_zero)
    }

    /// Sums per-sample gradients in slice order, so the result does not depend on
    /// how the samples were computed.
    pub fn sum_ordered(net: &NetworkTopology, parts: &[GradientSet]) -> GradientSet {
        let mut total = GradientSet::zeros_like(net);
        for p in parts {
            total.add_assign(p);
        }
        total
    }
}

/// Backward pass for one layer. `ext_grad` is dL/ds from above, `T x width`.
/// Returns dL/dx (`T x in_width`) when `want_input_grad`.
fn layer_backward(
    layer: &LifLayer,
    trace: &LayerTrace,
    ext_grad: &[f64],
    dw: &mut Matrix,
    dv: &mut Matrix,
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let (t_total, width, in_width) = (trace.timesteps, trace.width, trace.in_width);
    let p = &layer.params;
    let mut g_next = vec![0.0; width];
    let mut g_u = vec![0.0; width];
    let mut ds = vec![0.0; width];
    let mut dx = want_input_grad.then(|| vec![0.0; t_total * in_width]);

    for t in (0..t_total).rev() {
        ds.copy_from_slice(&ext_grad[t * width..(t + 1) * width]);
        if layer.recurrent {
            for (k, d) in ds.iter_mut().enumerate() {
                *d += layer.v.row(k).iter().zip(&g_next).map(|(v, g)| v * g).sum::<f64>();
            }
        }
        let u = trace.membrane_row(t);
        let s = trace.spike_row(t);
        let thr = trace.thresholds[t];
        for n in 0..width {
            let dm = p.beta * g_next[n];
            let sg = surrogate_grad(u[n] - thr, p.surrogate_slope);
            g_u[n] = dm * (1.0 - s[n]) + (ds[n] - dm * (u[n] - p.v_rst)) * sg;
        }
        for (i, &xi) in trace.input_row(t).iter().enumerate() {
            if xi != 0.0 {
                for (d, g) in dw.row_mut(i).iter_mut().zip(&g_u) {
                    *d += xi * g;
                }
            }
        }
        if layer.recurrent && t > 0 {
            for (k, &sk) in trace.spike_row(t - 1).iter().enumerate() {
                if sk != 0.0 {
                    for (d, g) in dv.row_mut(k).iter_mut().zip(&g_u) {
                        *d += sk * g;
                    }
                }
            }
        }
        if let Some(dx) = dx.as_mut() {
            let row = &mut dx[t * in_width..(t + 1) * in_width];
            for (i, r) in row.iter_mut().enumerate() {
                *r = layer.w.row(i).iter().zip(&g_u).map(|(w, g)| w * g).sum();
            }
        }
        std::mem::swap(&mut g_next, &mut g_u);
    }
    dx
}

/// Reverse-time gradients of a loss defined on output spike counts.
///
/// `traces` come from a forward run over layers `start_layer..=depth` (1-based) and
/// `count_grad` is dLoss/dcount per output neuron. Only layers at or after
/// `first_learning_layer` receive gradients.
pub fn bptt_backward(
    net: &NetworkTopology,
    traces: &[LayerTrace],
    start_layer: usize,
    count_grad: &[f64],
    first_learning_layer: usize,
) -> Result<GradientSet> {
    let depth = net.depth();
    if start_layer == 0 || start_layer > depth || traces.len() != depth - start_layer + 1 {
        return Err(NclError::contract(format!(
            "{} traces do not cover layers {}..={}",
            traces.len(),
            start_layer,
            depth
        )));
    }
    if first_learning_layer < start_layer || first_learning_layer > depth + 1 {
        return Err(NclError::contract(format!(
            "first learning layer {} has no trace (run started at {})",
            first_learning_layer, start_layer
        )));
    }
    let t_total = traces[0].timesteps;
    for (idx, (layer, tr)) in net.layers[start_layer - 1..].iter().zip(traces).enumerate() {
        let ok = tr.timesteps == t_total
            && tr.width == layer.out_width()
            && tr.in_width == layer.in_width()
            && tr.membrane.len() == t_total * tr.width
            && tr.spikes.len() == t_total * tr.width
            && tr.input.len() == t_total * tr.in_width
            && tr.thresholds.len() == t_total;
        if !ok {
            return Err(NclError::contract(format!(
                "trace for layer {} does not match the network",
                start_layer + idx
            )));
        }
    }
    if count_grad.len() != net.output_width() {
        return Err(NclError::contract("loss gradient width differs from output width"));
    }

    let mut grads = GradientSet::zeros_like(net);
    let mut ext: Vec<f64> = (0..t_total).flat_map(|_| count_grad.iter().copied()).collect();
    for l in (first_learning_layer..=depth).rev() {
        let trace = &traces[l - start_layer];
        let want_dx = l > first_learning_layer;
        let (dw, dv) = (&mut grads.dw[l - 1], &mut grads.dv[l - 1]);
        match layer_backward(&net.layers[l - 1], trace, &ext, dw, dv, want_dx) {
            Some(dx) => ext = dx,
            None => break,
        }
    }
    if !grads.is_finite() {
        return Err(NclError::numeric("non-finite gradient"));
    }
    Ok(grads)
}
