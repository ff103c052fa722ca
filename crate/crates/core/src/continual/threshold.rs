//! Adaptive threshold potential driven by recent spike timing.

use serde::{Deserialize, Serialize};

use crate::error::{NclError, Result};

/// Adjustment interval used by the reduced-timestep strategy.
pub const DEFAULT_ADJUST_INTERVAL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerMode {
    /// Latent generation: the spike-timing rule only fires on interval boundaries.
    Prepare,
    /// Continual training: the spike-timing rule fires whenever the window saw spikes.
    Ncl,
}

/// Sigmoidal branch, used while no recent spikes were seen.
pub fn sigmoid_threshold(t: usize) -> f64 {
    1.0 / (1.0 + (-0.001 * t as f64).exp())
}

/// Spike-timing branch: earlier average spike times give a higher threshold.
pub fn timing_threshold(t_step: usize, avg_spike_time: f64) -> f64 {
    1.0 + 0.01 * (t_step as f64 - avg_spike_time)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSchedulerState {
    pub adjust_interval: usize,
    /// Timesteps within the current window at which any watched neuron spiked.
    pub spike_timing: Vec<usize>,
    pub current_v_thr: f64,
    pub t: usize,
    pub t_step: usize,
}

impl ThresholdSchedulerState {
    pub fn new(t_step: usize, adjust_interval: usize, initial_v_thr: f64) -> Self {
        ThresholdSchedulerState {
            adjust_interval: adjust_interval.max(1),
            spike_timing: Vec::new(),
            current_v_thr: initial_v_thr,
            t: 0,
            t_step,
        }
    }

    /// Records whether timestep `t` produced spikes, recomputes the threshold for the
    /// following step, then advances `t`.
    ///
    /// The spike window covers the last `adjust_interval` timesteps, `t` included.
    pub fn threshold_step(&mut self, spikes_this_step: bool, mode: SchedulerMode) -> Result<f64> {
        if self.t >= self.t_step {
            return Err(NclError::contract(format!(
                "scheduler stepped past t_step = {}",
                self.t_step
            )));
        }
        let t = self.t;
        if spikes_this_step {
            self.spike_timing.push(t);
        }
        let oldest = (t + 1).saturating_sub(self.adjust_interval);
        self.spike_timing.retain(|&s| s >= oldest);

        let avg = (!self.spike_timing.is_empty()).then(|| {
            self.spike_timing.iter().sum::<usize>() as f64 / self.spike_timing.len() as f64
        });
        match mode {
            SchedulerMode::Prepare => {
                if t % self.adjust_interval == 0 {
                    if let Some(avg) = avg {
                        self.current_v_thr = timing_threshold(self.t_step, avg);
                    }
                } else {
                    self.current_v_thr = sigmoid_threshold(t);
                }
            }
            SchedulerMode::Ncl => {
                self.current_v_thr = match avg {
                    Some(avg) => timing_threshold(self.t_step, avg),
                    None => sigmoid_threshold(t),
                };
            }
        }
        self.t += 1;
        Ok(self.current_v_thr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state_at(t: usize, t_step: usize, timing: &[usize]) -> ThresholdSchedulerState {
        ThresholdSchedulerState {
            adjust_interval: t_step, // wide window so the listed timings all count
            spike_timing: timing.to_vec(),
            current_v_thr: 1.0,
            t,
            t_step,
        }
    }

    #[test]
    fn ncl_without_spikes_at_zero_is_half() {
        let mut s = ThresholdSchedulerState::new(20, 5, 1.0);
        assert_eq!(s.threshold_step(false, SchedulerMode::Ncl).unwrap(), 0.5);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn timing_branch_values() {
        let mut s = state_at(15, 20, &[5, 15]);
        assert_eq!(s.threshold_step(false, SchedulerMode::Ncl).unwrap(), 1.1);
        let mut s = state_at(15, 20, &[0, 10]);
        let early = s.threshold_step(false, SchedulerMode::Ncl).unwrap();
        assert_eq!(early, 1.0 + 0.01 * 15.0);
        assert!(early > 1.1);
    }

    #[test]
    fn prepare_mode_interval_nesting() {
        // boundary with no spikes: unchanged
        let mut s = ThresholdSchedulerState::new(20, 5, 0.77);
        assert_eq!(s.threshold_step(false, SchedulerMode::Prepare).unwrap(), 0.77);
        // off boundary: sigmoid regardless of spikes
        assert_eq!(
            s.threshold_step(true, SchedulerMode::Prepare).unwrap(),
            sigmoid_threshold(1)
        );
        for _ in 2..5 {
            s.threshold_step(false, SchedulerMode::Prepare).unwrap();
        }
        // t = 5 boundary, spike at 1 is outside the window [1..5]? window is t-4..=t = 1..=5
        let v = s.threshold_step(false, SchedulerMode::Prepare).unwrap();
        assert_eq!(v, timing_threshold(20, 1.0));
    }

    #[test]
    fn window_drops_old_spikes() {
        let mut s = ThresholdSchedulerState::new(20, 5, 1.0);
        s.threshold_step(true, SchedulerMode::Ncl).unwrap();
        for _ in 1..5 {
            s.threshold_step(false, SchedulerMode::Ncl).unwrap();
        }
        assert_eq!(s.spike_timing, vec![0]);
        // t = 5: spike at 0 leaves the window
        assert_eq!(
            s.threshold_step(false, SchedulerMode::Ncl).unwrap(),
            sigmoid_threshold(5)
        );
        assert!(s.spike_timing.is_empty());
    }

    #[test]
    fn stepping_past_end_is_rejected() {
        let mut s = ThresholdSchedulerState::new(1, 5, 1.0);
        s.threshold_step(false, SchedulerMode::Ncl).unwrap();
        assert!(s.threshold_step(false, SchedulerMode::Ncl).is_err());
    }
}
