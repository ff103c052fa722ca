//! Leaky integrate-and-fire dynamics and single-layer simulation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{NclError, Result};
use crate::matrix::Matrix;
use crate::spike::SpikeTrain;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifParams {
    pub v_thr: f64,
    pub v_rst: f64,
    /// Per-timestep membrane decay, `exp(-dt / tau)` with `dt = 1`.
    pub beta: f64,
    /// Steepness `k` of the fast-sigmoid surrogate.
    pub surrogate_slope: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            v_thr: 1.0,
            v_rst: 0.0,
            beta: 0.9,
            surrogate_slope: 25.0,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(NclError::contract(format!("beta {} not in (0, 1]", self.beta)));
        }
        if !(self.v_thr > self.v_rst) {
            return Err(NclError::contract(format!(
                "v_thr {} must exceed v_rst {}",
                self.v_thr, self.v_rst
            )));
        }
        if !(self.surrogate_slope > 0.0) {
            return Err(NclError::contract("surrogate slope must be positive"));
        }
        Ok(())
    }
}

/// Fast-sigmoid derivative `1 / (1 + k|x|)^2`, standing in for the step function's derivative.
pub fn surrogate_grad(x: f64, k: f64) -> f64 {
    let d = 1.0 + k * x.abs();
    1.0 / (d * d)
}

/// The smooth function whose derivative is [`surrogate_grad`]: `x / (1 + k|x|)`.
pub fn fast_sigmoid(x: f64, k: f64) -> f64 {
    x / (1.0 + k * x.abs())
}

/// Membrane state of one layer between timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub v_mem: Vec<f64>,
    pub spike_out: Vec<u8>,
}

impl LayerState {
    pub fn new(width: usize, p: &LifParams) -> Self {
        LayerState {
            v_mem: vec![p.v_rst; width],
            spike_out: vec![0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.v_mem.len()
    }
}

/// One LIF update. Integrates `z`, fires where the membrane reaches threshold and
/// hard-resets those neurons to `v_rst`. Returns the emitted spike vector.
pub fn lif_step<'a>(
    state: &'a mut LayerState,
    z: &[f64],
    p: &LifParams,
    v_thr_override: Option<f64>,
) -> Result<&'a [u8]> {
    if z.len() != state.v_mem.len() || state.spike_out.len() != state.v_mem.len() {
        return Err(NclError::contract(format!(
            "input current has width {}, state has width {}",
            z.len(),
            state.v_mem.len()
        )));
    }
    if let Some(i) = z.iter().position(|x| !x.is_finite()) {
        return Err(NclError::numeric(format!("non-finite input current at neuron {i}")));
    }
    let thr = v_thr_override.unwrap_or(p.v_thr);
    for n in 0..z.len() {
        let u = integrate(state.v_mem[n], z[n], p);
        let fired = u >= thr;
        state.spike_out[n] = fired as u8;
        state.v_mem[n] = if fired { p.v_rst } else { u };
    }
    Ok(&state.spike_out)
}

#[inline]
fn integrate(v_mem: f64, z: f64, p: &LifParams) -> f64 {
    p.beta * (v_mem - p.v_rst) + p.v_rst + z
}

/// A fully connected LIF layer with optional one-step-delayed recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct LifLayer {
    /// Feedforward weights, `in_width x out_width`.
    pub w: Matrix,
    /// Recurrent weights, `out_width x out_width`; all zero when `recurrent` is off.
    pub v: Matrix,
    pub params: LifParams,
    pub frozen: bool,
    pub recurrent: bool,
}

impl LifLayer {
    pub fn new(w: Matrix, v: Matrix, params: LifParams, recurrent: bool) -> Result<Self> {
        params.validate()?;
        if v.rows() != w.cols() || v.cols() != w.cols() {
            return Err(NclError::contract(format!(
                "recurrent matrix {}x{} does not match layer width {}",
                v.rows(),
                v.cols(),
                w.cols()
            )));
        }
        if !w.is_finite() || !v.is_finite() {
            return Err(NclError::numeric("non-finite initial weights"));
        }
        if !recurrent && !v.is_zero() {
            return Err(NclError::contract("non-recurrent layer with nonzero v"));
        }
        Ok(LifLayer {
            w,
            v,
            params,
            frozen: false,
            recurrent,
        })
    }

    /// Uniform init scaled by fan-in: `U(-g, g) / sqrt(fan_in)`.
    pub fn random<R: Rng + ?Sized>(
        in_width: usize,
        out_width: usize,
        params: LifParams,
        ff_gain: f64,
        rec_gain: Option<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let ff_scale = ff_gain / (in_width.max(1) as f64).sqrt();
        let w = Matrix::from_vec(
            in_width,
            out_width,
            (0..in_width * out_width)
                .map(|_| rng.gen_range(-1.0..1.0) * ff_scale)
                .collect(),
        )
        .expect("shape");
        let v = match rec_gain {
            Some(g) => {
                let s = g / (out_width.max(1) as f64).sqrt();
                Matrix::from_vec(
                    out_width,
                    out_width,
                    (0..out_width * out_width)
                        .map(|_| rng.gen_range(-1.0..1.0) * s)
                        .collect(),
                )
                .expect("shape")
            }
            None => Matrix::zeros(out_width, out_width),
        };
        LifLayer::new(w, v, params, rec_gain.is_some())
    }

    pub fn in_width(&self) -> usize {
        self.w.rows()
    }

    pub fn out_width(&self) -> usize {
        self.w.cols()
    }

    /// SHA-256 over the little-endian bytes of `w` then `v`.
    pub fn weight_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for x in self.w.as_slice().iter().chain(self.v.as_slice()) {
            h.update(x.to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Everything the backward pass needs from one layer's forward run.
///
/// `membrane` holds the pre-reset potential at every step, so spiking steps keep
/// the value that crossed threshold. `spikes` is 0/1 for the real network and
/// real-valued for the smoothed proxy used in gradient checks.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub timesteps: usize,
    pub in_width: usize,
    pub width: usize,
    pub input: Vec<f64>,
    pub membrane: Vec<f64>,
    pub spikes: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl LayerTrace {
    pub fn with_capacity(timesteps: usize, in_width: usize, width: usize) -> Self {
        LayerTrace {
            timesteps: 0,
            in_width,
            width,
            input: Vec::with_capacity(timesteps * in_width),
            membrane: Vec::with_capacity(timesteps * width),
            spikes: Vec::with_capacity(timesteps * width),
            thresholds: Vec::with_capacity(timesteps),
        }
    }

    pub fn input_row(&self, t: usize) -> &[f64] {
        &self.input[t * self.in_width..(t + 1) * self.in_width]
    }

    pub fn membrane_row(&self, t: usize) -> &[f64] {
        &self.membrane[t * self.width..(t + 1) * self.width]
    }

    pub fn spike_row(&self, t: usize) -> &[f64] {
        &self.spikes[t * self.width..(t + 1) * self.width]
    }

    /// Output spikes as a binary train (only meaningful for the real network).
    pub fn output_train(&self) -> SpikeTrain {
        let data = self.spikes.iter().map(|&s| (s != 0.0) as u8).collect();
        SpikeTrain::from_vec(self.timesteps, self.width, data).expect("binary trace")
    }

    pub fn input_spike_count(&self) -> u64 {
        self.input.iter().filter(|&&x| x != 0.0).count() as u64
    }

    pub fn output_spike_count(&self) -> u64 {
        self.spikes.iter().filter(|&&x| x != 0.0).count() as u64
    }
}

/// Steps a layer one timestep at a time while recording its trace.
pub(crate) struct LayerRunner {
    state: LayerState,
    z: Vec<f64>,
    pub(crate) trace: LayerTrace,
}

impl LayerRunner {
    pub(crate) fn new(layer: &LifLayer, timesteps: usize) -> Self {
        LayerRunner {
            state: LayerState::new(layer.out_width(), &layer.params),
            z: vec![0.0; layer.out_width()],
            trace: LayerTrace::with_capacity(timesteps, layer.in_width(), layer.out_width()),
        }
    }

    /// Advances one timestep on a binary input row; returns the emitted spikes.
    pub(crate) fn step(&mut self, layer: &LifLayer, input: &[u8], thr: f64) -> &[u8] {
        self.z.iter_mut().for_each(|z| *z = 0.0);
        for (i, _) in input.iter().enumerate().filter(|(_, &b)| b != 0) {
            for (z, &w) in self.z.iter_mut().zip(layer.w.row(i)) {
                *z += w;
            }
        }
        if layer.recurrent {
            for (k, _) in self.state.spike_out.iter().enumerate().filter(|(_, &b)| b != 0) {
                for (z, &v) in self.z.iter_mut().zip(layer.v.row(k)) {
                    *z += v;
                }
            }
        }
        let p = &layer.params;
        let tr = &mut self.trace;
        tr.input.extend(input.iter().map(|&b| b as f64));
        for n in 0..self.z.len() {
            let u = integrate(self.state.v_mem[n], self.z[n], p);
            let fired = u >= thr;
            tr.membrane.push(u);
            tr.spikes.push(fired as u8 as f64);
            self.state.spike_out[n] = fired as u8;
            self.state.v_mem[n] = if fired { p.v_rst } else { u };
        }
        tr.thresholds.push(thr);
        tr.timesteps += 1;
        &self.state.spike_out
    }

    pub(crate) fn finish(self) -> LayerTrace {
        self.trace
    }
}

/// Runs a layer over a whole input train.
///
/// `z(t) = wᵀ·input(t) + vᵀ·spike_out(t-1)` with `spike_out(-1) = 0`. A threshold
/// schedule, when given, supplies one potential per timestep.
pub fn layer_forward(
    layer: &LifLayer,
    input: &SpikeTrain,
    v_thr_schedule: Option<&[f64]>,
) -> Result<(SpikeTrain, LayerTrace)> {
    if input.width() != layer.in_width() {
        return Err(NclError::contract(format!(
            "input width {} does not match layer input width {}",
            input.width(),
            layer.in_width()
        )));
    }
    if let Some(s) = v_thr_schedule {
        if s.len() != input.timesteps() {
            return Err(NclError::contract(format!(
                "threshold schedule has {} entries for {} timesteps",
                s.len(),
                input.timesteps()
            )));
        }
    }
    let t_total = input.timesteps();
    let mut runner = LayerRunner::new(layer, t_total);
    let mut out = SpikeTrain::zeros(t_total, layer.out_width());
    for t in 0..t_total {
        let thr = v_thr_schedule.map_or(layer.params.v_thr, |s| s[t]);
        let spikes = runner.step(layer, input.row(t), thr);
        out.row_mut(t).copy_from_slice(spikes);
    }
    Ok((out, runner.finish()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p09() -> LifParams {
        LifParams {
            beta: 0.9,
            ..LifParams::default()
        }
    }

    #[test]
    fn step_threshold_equality_fires() {
        let mut s = LayerState {
            v_mem: vec![1.0],
            spike_out: vec![0],
        };
        // beta * 1.0 + 0 = 0.9 < 1, so inject exactly enough to land on threshold
        let spikes = lif_step(&mut s, &[0.1], &p09(), None).unwrap().to_vec();
        assert_eq!(spikes, vec![1]);
        assert_eq!(s.v_mem, vec![0.0]);

        // beta = 1 keeps v_mem = 1.0 exactly
        let p = LifParams { beta: 1.0, ..p09() };
        let mut s = LayerState {
            v_mem: vec![1.0],
            spike_out: vec![0],
        };
        assert_eq!(lif_step(&mut s, &[0.0], &p, None).unwrap(), &[1]);
        assert_eq!(s.v_mem[0], 0.0);
    }

    #[test]
    fn step_decay_without_spike() {
        let mut s = LayerState {
            v_mem: vec![0.5],
            spike_out: vec![0],
        };
        assert_eq!(lif_step(&mut s, &[0.0], &p09(), None).unwrap(), &[0]);
        assert!((s.v_mem[0] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn step_crossing_resets() {
        let p = LifParams { beta: 1.0, ..p09() };
        let mut s = LayerState {
            v_mem: vec![0.95],
            spike_out: vec![0],
        };
        assert_eq!(lif_step(&mut s, &[0.2], &p, None).unwrap(), &[1]);
        assert_eq!(s.v_mem[0], 0.0);
    }

    #[test]
    fn step_override_and_errors() {
        let mut s = LayerState::new(2, &p09());
        assert_eq!(lif_step(&mut s, &[0.3, 0.1], &p09(), Some(0.25)).unwrap(), &[1, 0]);
        assert!(matches!(
            lif_step(&mut s, &[0.3], &p09(), None),
            Err(NclError::Contract(_))
        ));
        assert!(matches!(
            lif_step(&mut s, &[f64::NAN, 0.0], &p09(), None),
            Err(NclError::Numeric(_))
        ));
    }

    #[test]
    fn geometric_decay_to_rest() {
        let p = LifParams {
            v_rst: -0.2,
            beta: 0.8,
            ..LifParams::default()
        };
        let mut s = LayerState {
            v_mem: vec![0.7],
            spike_out: vec![0],
        };
        let mut expected = 0.7 - p.v_rst;
        for _ in 0..100 {
            lif_step(&mut s, &[0.0], &p, None).unwrap();
            expected *= p.beta;
            assert!((s.v_mem[0] - p.v_rst - expected).abs() <= 1e-15);
        }
    }

    #[test]
    fn surrogate_values() {
        assert_eq!(surrogate_grad(0.0, 25.0), 1.0);
        assert!((surrogate_grad(0.04, 25.0) - 0.25).abs() < 1e-12);
        for &x in &[0.3, 1.7, 1e-4, 12.0] {
            assert_eq!(surrogate_grad(x, 25.0), surrogate_grad(-x, 25.0));
        }
    }

    #[test]
    fn fast_sigmoid_derivative_matches_surrogate() {
        let k = 7.0;
        for &x in &[-0.8, -0.05, 0.02, 0.4, 2.0] {
            let h = 1e-6;
            let fd = (fast_sigmoid(x + h, k) - fast_sigmoid(x - h, k)) / (2.0 * h);
            assert!((fd - surrogate_grad(x, k)).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_input_stays_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = LifLayer::random(4, 3, p09(), 2.0, Some(0.5), &mut rng).unwrap();
        let input = SpikeTrain::zeros(12, 4);
        let (out, trace) = layer_forward(&layer, &input, None).unwrap();
        assert_eq!(out.total_spikes(), 0);
        assert!(trace.membrane.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_spike() {
        let p = LifParams {
            v_thr: 0.5,
            ..p09()
        };
        let layer = LifLayer::new(Matrix::identity(3), Matrix::zeros(3, 3), p, false).unwrap();
        let mut input = SpikeTrain::zeros(4, 3);
        input.set(0, 1, true);
        let (out, _) = layer_forward(&layer, &input, None).unwrap();
        assert!(out.get(0, 1));
        assert_eq!(out.total_spikes(), 1);
    }

    #[test]
    fn layer_forward_matches_step_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = p09();
        let layer = LifLayer::random(3, 3, p, 3.0, Some(1.0), &mut rng).unwrap();
        let mut input = SpikeTrain::zeros(8, 3);
        for t in 0..8 {
            for n in 0..3 {
                input.set(t, n, rng.gen_bool(0.5));
            }
        }
        let (out, _) = layer_forward(&layer, &input, None).unwrap();

        // literal per-timestep reimplementation over lif_step
        let mut state = LayerState::new(3, &p);
        for t in 0..8 {
            let mut z = vec![0.0; 3];
            for j in 0..3 {
                for i in 0..3 {
                    z[j] += layer.w[(i, j)] * input.get(t, i) as u8 as f64;
                }
                for i in 0..3 {
                    z[j] += layer.v[(i, j)] * state.spike_out[i] as f64;
                }
            }
            let s = lif_step(&mut state, &z, &p, None).unwrap().to_vec();
            assert_eq!(s.as_slice(), out.row(t), "timestep {t}");
        }
    }

    #[test]
    fn schedule_length_checked() {
        let layer =
            LifLayer::new(Matrix::identity(2), Matrix::zeros(2, 2), p09(), false).unwrap();
        let input = SpikeTrain::zeros(5, 2);
        assert!(layer_forward(&layer, &input, Some(&[1.0; 4])).is_err());
        assert!(layer_forward(&layer, &input, Some(&[1.0; 5])).is_ok());
    }
}
