use crate::data::events::{Dataset, EventSample};
use crate::error::{NclError, Result};
use crate::par;
use crate::spike::{LabeledTrain, SpikeTrain};

/// Bin index `floor(time * t_step / duration)`, computed exactly.
///
/// `time * t_step` and `bin * duration` are exact in f64 for f32 inputs and
/// `t_step < 2^29`, so the correction steps make the floor exact.
fn bin_of(time: f32, duration: f32, t_step: usize) -> usize {
    let a = time as f64 * t_step as f64;
    let d = duration as f64;
    let mut b = (a / d).floor().max(0.0) as usize;
    if b as f64 * d > a {
        b -= 1;
    } else if (b + 1) as f64 * d <= a {
        b += 1;
    }
    b.min(t_step - 1)
}

/// Bins a sample into `t_step` equal windows; a bin is 1 if its channel fired at all.
pub fn rasterize(sample: &EventSample, channels: usize, t_step: usize) -> Result<SpikeTrain> {
    if t_step == 0 {
        return Err(NclError::contract("t_step must be >= 1"));
    }
    let mut train = SpikeTrain::zeros(t_step, channels);
    for e in &sample.events {
        let ch = e.channel as usize;
        if ch >= channels {
            return Err(NclError::contract(format!("channel {ch} >= {channels}")));
        }
        train.set(bin_of(e.time, sample.duration, t_step), ch, true);
    }
    Ok(train)
}

pub fn rasterize_all(data: &Dataset, indices: &[usize], t_step: usize) -> Result<Vec<LabeledTrain>> {
    let channels = data.channels();
    par::try_map_collect(indices, |&i| {
        let s = &data.samples[i];
        Ok(LabeledTrain {
            train: rasterize(s, channels, t_step)?,
            label: s.label,
        })
    })
}
