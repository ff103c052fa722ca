//! Binary spike tensors indexed by (timestep, neuron).

use crate::error::{NclError, Result};

/// Binary spike raster, stored row-major: one row of `width` entries per timestep.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeTrain {
    timesteps: usize,
    width: usize,
    data: Vec<u8>,
}

impl SpikeTrain {
    pub fn zeros(timesteps: usize, width: usize) -> Self {
        SpikeTrain {
            timesteps,
            width,
            data: vec![0; timesteps * width],
        }
    }

    /// Builds a train from raw row-major data; every entry must be 0 or 1.
    pub fn from_vec(timesteps: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != timesteps * width {
            return Err(NclError::contract(format!(
                "spike data has {} entries, expected {}x{}",
                data.len(),
                timesteps,
                width
            )));
        }
        if let Some(pos) = data.iter().position(|&b| b > 1) {
            return Err(NclError::contract(format!(
                "non-binary spike value {} at index {}",
                data[pos], pos
            )));
        }
        Ok(SpikeTrain {
            timesteps,
            width,
            data,
        })
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, t: usize, n: usize) -> bool {
        self.data[t * self.width + n] != 0
    }

    pub fn set(&mut self, t: usize, n: usize, spike: bool) {
        self.data[t * self.width + n] = spike as u8;
    }

    /// Spike row at timestep `t`.
    pub fn row(&self, t: usize) -> &[u8] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [u8] {
        &mut self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn total_spikes(&self) -> u64 {
        self.data.iter().map(|&b| b as u64).sum()
    }

    /// Spike count of each neuron over the whole window.
    pub fn counts_per_neuron(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.width];
        for row in self.data.chunks_exact(self.width.max(1)) {
            for (c, &b) in counts.iter_mut().zip(row) {
                *c += b as u32;
            }
        }
        counts
    }

    /// Indices of neurons spiking at timestep `t`.
    pub fn active(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(t)
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| (b != 0).then_some(i))
    }

    /// Merges groups of `factor` consecutive timesteps with a logical OR.
    pub fn downsample_or(&self, factor: usize) -> Result<SpikeTrain> {
        if factor == 0 || self.timesteps % factor != 0 {
            return Err(NclError::contract(format!(
                "downsample factor {} does not divide {} timesteps",
                factor, self.timesteps
            )));
        }
        let mut out = SpikeTrain::zeros(self.timesteps / factor, self.width);
        for t in 0..self.timesteps {
            let dst = t / factor;
            for n in self.active(t).collect::<Vec<_>>() {
                out.set(dst, n, true);
            }
        }
        Ok(out)
    }
}

/// A spike train paired with its class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTrain {
    pub train: SpikeTrain,
    pub label: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_binary() {
        assert!(SpikeTrain::from_vec(1, 2, vec![0, 2]).is_err());
        assert!(SpikeTrain::from_vec(1, 2, vec![0]).is_err());
    }

    #[test]
    fn counts_and_downsample() {
        let mut s = SpikeTrain::zeros(4, 2);
        s.set(0, 0, true);
        s.set(1, 0, true);
        s.set(3, 1, true);
        assert_eq!(s.counts_per_neuron(), vec![2, 1]);
        let d = s.downsample_or(2).unwrap();
        assert_eq!(d.as_slice(), &[1, 0, 0, 1]);
        assert!(s.downsample_or(3).is_err());
    }
}
