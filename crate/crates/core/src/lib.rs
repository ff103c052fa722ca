//! Spiking networks with latent replay for class-incremental learning.
//!
//! The pipeline: pre-train a recurrent LIF network with surrogate-gradient
//! BPTT, freeze the layers below an insertion point, store compressed latent
//! spike trains for a replay subset, then train the upper layers on new-class
//! data interleaved with decoded latents at a reduced timestep count.

pub mod error;
pub mod lif;
pub mod matrix;
pub mod network;
pub mod par;
pub mod spike;

pub mod training {
    pub mod bptt;
    pub mod checkpoint;
    pub mod loss;
    pub mod optim;
    pub mod proxy;
    pub mod trainer;
}

pub mod replay {
    pub mod codec;
    pub mod generate;
    pub mod split;
    pub mod store;
}

pub mod continual {
    pub mod config;
    pub mod ncl;
    pub mod tasks;
    pub mod threshold;
}

pub mod data {
    pub mod events;
    pub mod raster;
    pub mod synth;
}

pub mod harness {
    pub mod energy;
    pub mod eval;
    pub mod experiment;
    pub mod report;
    pub mod sweep;
}

pub use continual::config::{ExperimentMode, RunConfig};
pub use data::events::Dataset;
pub use error::{NclError, Result};
pub use harness::experiment::{run_experiment, ExperimentReport};
pub use lif::{LifLayer, LifParams};
pub use network::{NetworkConfig, NetworkTopology, ThresholdPolicy};
pub use spike::SpikeTrain;
