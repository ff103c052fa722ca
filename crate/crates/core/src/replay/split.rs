use crate::error::{NclError, Result};
use crate::lif::LifLayer;
use crate::network::NetworkTopology;

/// Division of a network at the insertion layer `l_ins` (1-based).
///
/// Layers `1..l_ins` form the frozen part, `l_ins..=L` the learning part. The split
/// only records the boundary; weights stay in the network it was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplaySplit {
    pub l_ins: usize,
    pub depth: usize,
}

/// Marks layers before `l_ins` frozen and the rest learnable.
pub fn split_network(net: &mut NetworkTopology, l_ins: usize) -> Result<ReplaySplit> {
    let depth = net.depth();
    if l_ins == 0 || l_ins > depth {
        return Err(NclError::contract(format!("insertion layer {l_ins} outside 1..={depth}")));
    }
    for (i, layer) in net.layers.iter_mut().enumerate() {
        layer.frozen = i + 1 < l_ins;
    }
    Ok(ReplaySplit { l_ins, depth })
}

impl ReplaySplit {
    pub fn frozen<'a>(&self, net: &'a NetworkTopology) -> &'a [LifLayer] {
        &net.layers[..self.l_ins - 1]
    }

    pub fn learning<'a>(&self, net: &'a NetworkTopology) -> &'a [LifLayer] {
        &net.layers[self.l_ins - 1..]
    }

    /// Width of the activations stored for replay and injected at `l_ins`.
    pub fn insertion_width(&self, net: &NetworkTopology) -> usize {
        net.width_into(self.l_ins)
    }

    /// 1-based indices of the frozen layers.
    pub fn frozen_layers(&self) -> std::ops::Range<usize> {
        1..self.l_ins
    }

    pub fn learning_layers(&self) -> std::ops::RangeInclusive<usize> {
        self.l_ins..=self.depth
    }
}
