use crate::error::{NclError, Result};
use crate::spike::SpikeTrain;

/// Outcome of scoring one output train against its label.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub counts: Vec<u32>,
    pub predicted: usize,
    /// dLoss/dcount for each output neuron.
    pub count_grad: Vec<f64>,
}

/// Index of the largest value, lowest index on ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax cross-entropy of `readout * scale` against `label`; returns the loss and
/// its gradient with respect to each readout entry.
pub fn softmax_cross_entropy(readout: &[f64], label: usize, scale: f64) -> (f64, Vec<f64>) {
    masked_softmax_cross_entropy(readout, label, scale, None)
}

/// As [`softmax_cross_entropy`], with the softmax restricted to entries where
/// `active` is set. Inactive entries get zero gradient.
pub fn masked_softmax_cross_entropy(readout: &[f64], label: usize, scale: f64, active: Option<&[bool]>) -> (f64, Vec<f64>) {
    let on = |j: usize| active.is_none_or(|a| a[j]);
    let logits: Vec<f64> = readout.iter().map(|r| r * scale).collect();
    let max = logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| on(j))
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(j, l)| if on(j) { (l - max).exp() } else { 0.0 })
        .collect();
    let sum: f64 = exps.iter().sum();
    let loss = -(logits[label] - max - sum.ln());
    let grad = exps
        .iter()
        .enumerate()
        .map(|(j, e)| if on(j) { scale * (e / sum - (j == label) as u8 as f64) } else { 0.0 })
        .collect();
    (loss, grad)
}

/// Spike-count readout with softmax cross-entropy on `count * scale`.
pub fn readout_loss(output: &SpikeTrain, label: usize, scale: f64) -> Result<LossReport> {
    masked_readout_loss(output, label, scale, None)
}

/// Readout loss over the output neurons marked in `active` only; the prediction is
/// also restricted to them.
pub fn masked_readout_loss(output: &SpikeTrain, label: usize, scale: f64, active: Option<&[bool]>) -> Result<LossReport> {
    if label >= output.width() {
        return Err(NclError::contract(format!(
            "label {} out of range for {} output neurons",
            label,
            output.width()
        )));
    }
    if let Some(a) = active {
        if a.len() != output.width() || !a[label] {
            return Err(NclError::contract("class mask must cover the output and include the label"));
        }
    }
    let counts = output.counts_per_neuron();
    let readout: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (loss, count_grad) = masked_softmax_cross_entropy(&readout, label, scale, active);
    if !loss.is_finite() {
        return Err(NclError::numeric("non-finite loss"));
    }
    Ok(LossReport {
        loss,
        predicted: match active {
            None => argmax(&counts),
            Some(a) => {
                let masked: Vec<i64> = counts.iter().zip(a).map(|(&c, &on)| if on { c as i64 } else { -1 }).collect();
                argmax(&masked)
            }
        },
        counts,
        count_grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn train_with_counts(counts: &[usize], t: usize) -> SpikeTrain {
        let mut s = SpikeTrain::zeros(t, counts.len());
        for (n, &c) in counts.iter().enumerate() {
            for ti in 0..c {
                s.set(ti, n, true);
            }
        }
        s
    }

    #[test]
    fn silent_output_is_uniform() {
        let r = readout_loss(&SpikeTrain::zeros(10, 4), 2, 0.5).unwrap();
        assert!((r.loss - 4f64.ln()).abs() < 1e-12);
        assert_eq!(r.predicted, 0);
    }

    #[test]
    fn hand_computed_three_class() {
        let r = readout_loss(&train_with_counts(&[5, 2, 0], 6), 0, 1.0).unwrap();
        let z: f64 = [5f64, 2.0, 0.0].iter().map(|x| x.exp()).sum();
        let expected = -(5f64.exp() / z).ln();
        assert!((r.loss - expected).abs() < 1e-12);
        assert_eq!(r.predicted, 0);
        assert_eq!(r.counts, vec![5, 2, 0]);
    }

    #[test]
    fn correct_label_has_minimal_loss() {
        let out = train_with_counts(&[0, 0, 4, 0], 5);
        let losses: Vec<f64> = (0..4).map(|l| readout_loss(&out, l, 0.8).unwrap().loss).collect();
        assert_eq!(argmax(&losses.iter().map(|l| -l).collect::<Vec<_>>()), 2);
        assert_eq!(readout_loss(&out, 2, 0.8).unwrap().predicted, 2);
    }

    #[test]
    fn label_range_checked() {
        assert!(readout_loss(&SpikeTrain::zeros(3, 2), 2, 1.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let r = [1.5, -0.2, 0.7];
        let (_, g) = softmax_cross_entropy(&r, 1, 0.9);
        for j in 0..3 {
            let mut a = r;
            let mut b = r;
            a[j] += 1e-6;
            b[j] -= 1e-6;
            let fd = (softmax_cross_entropy(&a, 1, 0.9).0 - softmax_cross_entropy(&b, 1, 0.9).0) / 2e-6;
            assert!((fd - g[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn masked_entries_are_ignored() {
        let (l_full, _) = softmax_cross_entropy(&[3.0, 1.0], 0, 1.0);
        let (l, g) = masked_softmax_cross_entropy(&[3.0, 1.0, 50.0], 0, 1.0, Some(&[true, true, false]));
        assert_eq!(l, l_full);
        assert_eq!(g[2], 0.0);
        let r = masked_readout_loss(&train_with_counts(&[1, 2, 5], 6), 1, 1.0, Some(&[true, true, false])).unwrap();
        assert_eq!(r.predicted, 1);
        assert!(masked_readout_loss(&train_with_counts(&[1, 2, 5], 6), 2, 1.0, Some(&[true, true, false])).is_err());
    }
}
