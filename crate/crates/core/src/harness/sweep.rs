use crate::continual::config::{ExperimentMode, RunConfig};
use crate::data::events::Dataset;
use crate::error::{NclError, Result};
use crate::harness::experiment::{pretrain_stage, run_continual, task_split, ExperimentReport};
use crate::harness::report::SweepRow;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepAxis {
    TStep(Vec<usize>),
    LIns(Vec<usize>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::TStep(_) => "t_step",
            SweepAxis::LIns(_) => "l_ins",
        }
    }

    pub fn values(&self) -> &[usize] {
        match self {
            SweepAxis::TStep(v) | SweepAxis::LIns(v) => v,
        }
    }

    fn apply(&self, base: &RunConfig, value: usize) -> RunConfig {
        match self {
            SweepAxis::TStep(_) => RunConfig { t_step: value, ..base.clone() },
            SweepAxis::LIns(_) => RunConfig { l_ins: value, ..base.clone() },
        }
    }
}

/// Runs one experiment per axis value with a shared seed.
///
/// Pre-training depends on neither axis, so it runs once and every value starts
/// from the same checkpoint, exactly as separate runs with that seed would.
pub fn sweep(base: &RunConfig, axis: &SweepAxis, data: &Dataset, mode: ExperimentMode) -> Result<Vec<(usize, ExperimentReport)>> {
    if axis.values().is_empty() {
        return Err(NclError::Config("sweep axis has no values".into()));
    }
    let split = task_split(base, data)?;
    let (ckpt, history) = pretrain_stage(base, data, &split).map_err(|e| e.in_stage("pre-training"))?;
    axis.values()
        .iter()
        .map(|&v| {
            let cfg = axis.apply(base, v);
            run_continual(&cfg, mode, data, &split, &ckpt, history.clone(), None).map(|r| (v, r))
        })
        .collect()
}

/// Flattens sweep results into rows keyed by axis value.
pub fn sweep_rows(axis: &SweepAxis, results: &[(usize, ExperimentReport)]) -> Vec<SweepRow> {
    results
        .iter()
        .flat_map(|(v, rep)| {
            rep.rows.iter().map(move |row| SweepRow {
                axis: axis.name().to_string(),
                value: *v,
                mode: rep.mode.name().to_string(),
                row: row.clone(),
            })
        })
        .collect()
}
