use crate::error::{NclError, Result};
use crate::harness::energy::ActivityCounts;
use crate::lif::LifLayer;
use crate::network::{run_layers, ThresholdPolicy};
use crate::par;
use crate::replay::codec::{compress_latent, Codec};
use crate::replay::store::LatentStore;
use crate::spike::LabeledTrain;

/// Runs each replay sample through the frozen layers and stores the compressed
/// activations they emit. With no frozen layers the input trains are stored as-is.
///
/// Samples are processed independently, so each entry depends only on its sample.
pub fn generate_latent(
    frozen: &[LifLayer],
    replay: &[LabeledTrain],
    policy: &ThresholdPolicy,
    codec: Codec,
    chunk: usize,
    l_ins: usize,
) -> Result<(LatentStore, ActivityCounts)> {
    let first = replay
        .first()
        .ok_or_else(|| NclError::contract("replay set is empty"))?;
    let timesteps = first.train.timesteps();
    if let ThresholdPolicy::Schedule(s) = policy {
        if s.len() != timesteps {
            return Err(NclError::contract(format!(
                "threshold schedule has {} entries, replay trains have {} timesteps",
                s.len(),
                timesteps
            )));
        }
    }
    let width = frozen.last().map_or(first.train.width(), LifLayer::out_width);
    let encoded = par::try_map_collect(replay, |sample| {
        let run = run_layers(frozen, &sample.train, policy)?;
        let entry = compress_latent(&run.output, sample.label, codec, chunk)?;
        Ok::<_, NclError>((entry, ActivityCounts::from_traces(frozen, &run.traces)))
    })?;
    let mut store = LatentStore::new(codec, chunk, timesteps, width, l_ins);
    let mut activity = ActivityCounts::default();
    for (entry, a) in encoded {
        store.push(entry)?;
        activity += a;
    }
    Ok((store, activity))
}
