//! Per-epoch report rows and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One epoch of the continual phase. Epoch 0 is the evaluation before any
/// continual training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub epoch: usize,
    pub old_top1: f64,
    pub new_top1: f64,
    pub combined_top1: f64,
    /// Seconds spent on the epoch's inference and training, evaluation excluded.
    pub wall_latency: f64,
    /// Deterministic latency model: dense multiply-accumulates of the epoch.
    pub dense_ops: u64,
    pub synop_count: u64,
    pub neuron_updates: u64,
    pub energy_proxy: f64,
    pub latent_bytes: u64,
}

impl ExperimentRow {
    /// Copy with the machine-dependent latency zeroed, for determinism checks.
    pub fn without_latency(&self) -> ExperimentRow {
        ExperimentRow {
            wall_latency: 0.0,
            ..self.clone()
        }
    }
}

/// `(old * n_old + new * n_new) / (n_old + n_new)`.
pub fn combined_accuracy(old: f64, n_old: usize, new: f64, n_new: usize) -> f64 {
    let n = (n_old + n_new) as f64;
    if n == 0.0 {
        0.0
    } else {
        (old * n_old as f64 + new * n_new as f64) / n
    }
}

pub fn write_rows<W: Write>(writer: W, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<ExperimentRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// A report row tagged with the sweep axis value it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: usize,
    pub mode: String,
    #[serde(flatten)]
    pub row: ExperimentRow,
}

pub fn write_sweep_rows<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    // flatten is not supported by the csv serializer, so write the header by hand
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record([
        "axis",
        "value",
        "mode",
        "epoch",
        "old_top1",
        "new_top1",
        "combined_top1",
        "wall_latency",
        "dense_ops",
        "synop_count",
        "neuron_updates",
        "energy_proxy",
        "latent_bytes",
    ])?;
    for s in rows {
        let r = &s.row;
        w.serialize((
            &s.axis,
            s.value,
            &s.mode,
            r.epoch,
            r.old_top1,
            r.new_top1,
            r.combined_top1,
            r.wall_latency,
            r.dense_ops,
            r.synop_count,
            r.neuron_updates,
            r.energy_proxy,
            r.latent_bytes,
        ))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_rows<R: Read>(reader: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let (axis, value, mode, epoch, old_top1, new_top1, combined_top1, wall_latency, dense_ops, synop_count, neuron_updates, energy_proxy, latent_bytes): (
            String,
            usize,
            String,
            usize,
            f64,
            f64,
            f64,
            f64,
            u64,
            u64,
            u64,
            f64,
            u64,
        ) = rec?;
        out.push(SweepRow {
            axis,
            value,
            mode,
            row: ExperimentRow {
                epoch,
                old_top1,
                new_top1,
                combined_top1,
                wall_latency,
                dense_ops,
                synop_count,
                neuron_updates,
                energy_proxy,
                latent_bytes,
            },
        });
    }
    Ok(out)
}
