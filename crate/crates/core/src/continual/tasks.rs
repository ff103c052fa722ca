use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::events::Dataset;
use crate::error::{NclError, Result};

/// Class-incremental partition of a dataset, as sample indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSplit {
    pub held_out_class: usize,
    pub old_classes: Vec<usize>,
    pub ts_pre: Vec<usize>,
    pub ts_cl: Vec<usize>,
    /// Subset of `ts_pre` whose activations are stored for replay.
    pub ts_replay: Vec<usize>,
}

/// Holds out one class for the continual phase and draws `ceil(fraction * n)` replay
/// samples uniformly from each remaining class.
pub fn make_task_split(data: &Dataset, held_out_class: usize, replay_fraction: f64, seed: u64) -> Result<TaskSplit> {
    if !(replay_fraction > 0.0 && replay_fraction <= 1.0) {
        return Err(NclError::contract(format!("replay fraction {replay_fraction} outside (0, 1]")));
    }
    let (ts_cl, ts_pre): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&i| data.samples[i].label == held_out_class);
    if ts_cl.is_empty() {
        return Err(NclError::contract(format!("class {held_out_class} has no samples")));
    }
    let mut old_classes: Vec<usize> = ts_pre.iter().map(|&i| data.samples[i].label).collect();
    old_classes.sort_unstable();
    old_classes.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5eed_5711);
    let mut ts_replay = Vec::new();
    for &c in &old_classes {
        let mut members: Vec<usize> = ts_pre.iter().copied().filter(|&i| data.samples[i].label == c).collect();
        let k = ((replay_fraction * members.len() as f64).ceil() as usize).clamp(1, members.len());
        members.shuffle(&mut rng);
        ts_replay.extend_from_slice(&members[..k]);
    }
    ts_replay.sort_unstable();
    Ok(TaskSplit {
        held_out_class,
        old_classes,
        ts_pre,
        ts_cl,
        ts_replay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{synth_generate, SynthConfig};

    fn data(classes: usize) -> Dataset {
        synth_generate(&SynthConfig {
            classes,
            samples_per_class: 10,
            channels: 4,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn twenty_classes_hold_out_last() {
        let d = data(20);
        let s = make_task_split(&d, 19, 0.1, 1).unwrap();
        assert_eq!(s.old_classes, (0..19).collect::<Vec<_>>());
        assert_eq!(s.ts_cl.len(), 10);
        assert_eq!(s.ts_pre.len(), 190);
        assert_eq!(s.ts_replay.len(), 19);
        assert!(s.ts_replay.iter().all(|i| s.ts_pre.contains(i)));
    }

    #[test]
    fn full_fraction_replays_everything() {
        let d = data(3);
        let s = make_task_split(&d, 0, 1.0, 1).unwrap();
        assert_eq!(s.ts_replay, s.ts_pre);
    }

    #[test]
    fn seeded_and_validated() {
        let d = data(4);
        assert_eq!(make_task_split(&d, 2, 0.3, 9).unwrap(), make_task_split(&d, 2, 0.3, 9).unwrap());
        assert!(make_task_split(&d, 7, 0.3, 9).is_err());
        assert!(make_task_split(&d, 1, 0.0, 9).is_err());
    }
}
