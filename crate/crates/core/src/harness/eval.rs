use crate::data::events::Dataset;
use crate::data::raster::rasterize_all;
use crate::error::{NclError, Result};
use crate::network::{run_layers, NetworkTopology, ThresholdPolicy};
use crate::par;
use crate::spike::{LabeledTrain, SpikeTrain};
use crate::training::loss::argmax;

/// How a trained network is run at inference time: layers before `boundary`
/// (1-based) keep their own thresholds, the rest follow `learning_policy`.
#[derive(Debug, Clone, PartialEq)]
pub struct InferencePlan {
    pub boundary: usize,
    pub learning_policy: ThresholdPolicy,
}

impl InferencePlan {
    pub fn fixed() -> Self {
        InferencePlan {
            boundary: 1,
            learning_policy: ThresholdPolicy::Fixed,
        }
    }

    /// Output spikes of the whole network for one input train.
    pub fn infer(&self, net: &NetworkTopology, input: &SpikeTrain) -> Result<SpikeTrain> {
        let b = self.boundary.clamp(1, net.depth());
        let mid = run_layers(&net.layers[..b - 1], input, &ThresholdPolicy::Fixed)?;
        Ok(run_layers(&net.layers[b - 1..], &mid.output, &self.learning_policy)?.output)
    }

    pub fn predict(&self, net: &NetworkTopology, input: &SpikeTrain) -> Result<usize> {
        Ok(argmax(&self.infer(net, input)?.counts_per_neuron()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub correct: usize,
    pub total: usize,
    /// `confusion[label][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalResult {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Top-1 accuracy of spike-count argmax over pre-rasterised samples.
pub fn evaluate_trains(net: &NetworkTopology, samples: &[LabeledTrain], plan: &InferencePlan) -> Result<EvalResult> {
    if samples.is_empty() {
        return Err(NclError::contract("nothing to evaluate"));
    }
    let classes = net.output_width();
    let preds = par::try_map_collect(samples, |s| plan.predict(net, &s.train))?;
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut correct = 0;
    for (s, p) in samples.iter().zip(preds) {
        if s.label < classes {
            confusion[s.label][p] += 1;
        }
        correct += (s.label == p) as usize;
    }
    Ok(EvalResult {
        correct,
        total: samples.len(),
        confusion,
    })
}

/// Rasterises `data` at `t_step`, keeps the classes in `class_filter` (all when
/// `None`) and scores the network on them.
pub fn evaluate(
    net: &NetworkTopology,
    data: &Dataset,
    t_step: usize,
    class_filter: Option<&[usize]>,
    plan: &InferencePlan,
) -> Result<EvalResult> {
    let idx: Vec<usize> = (0..data.len())
        .filter(|&i| class_filter.is_none_or(|f| f.contains(&data.samples[i].label)))
        .collect();
    if idx.is_empty() {
        return Err(NclError::contract("class filter leaves no samples"));
    }
    evaluate_trains(net, &rasterize_all(data, &idx, t_step)?, plan)
}
