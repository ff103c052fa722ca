use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use snn_replay::continual::ncl::prepare_replay;
use snn_replay::data::events::{load_events, write_events};
use snn_replay::data::raster::rasterize_all;
use snn_replay::data::synth::{synth_generate, SynthConfig};
use snn_replay::harness::eval::InferencePlan;
use snn_replay::harness::experiment::{pretrain_stage, run_continual, task_split, ExperimentReport, RunManifest};
use snn_replay::harness::report::{write_rows, write_sweep_rows};
use snn_replay::harness::sweep::{sweep, sweep_rows, SweepAxis};
use snn_replay::replay::codec::Codec;
use snn_replay::replay::split::split_network;
use snn_replay::replay::store::LatentStore;
use snn_replay::training::checkpoint::Checkpoint;
use snn_replay::{harness, Dataset, ExperimentMode, NclError, Result, RunConfig};

#[derive(Parser)]
#[command(name = "snn-replay", version, about = "Latent replay for continual learning in spiking networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic event dataset.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        classes: usize,
        #[arg(long, default_value_t = 40)]
        samples_per_class: usize,
        #[arg(long, default_value_t = 64)]
        channels: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Pre-train on every class except the held-out one.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the compressed latent store from a pre-trained checkpoint.
    PrepareReplay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Continual training from a checkpoint, optionally with a prepared store.
    ClTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::AdaptiveReplay)]
        mode: ModeArg,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Accuracy of a checkpoint on the whole dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Pre-training plus continual training in one go.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ModeArg::AdaptiveReplay)]
        mode: ModeArg,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// One continual run per value of an axis, sharing pre-training.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long, value_enum, default_value_t = ModeArg::AdaptiveReplay)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// EVT1 dataset; a default synthetic dataset is generated when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// TOML run config. Flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_step: Option<usize>,
    #[arg(long)]
    l_ins: Option<usize>,
    #[arg(long)]
    e_pre: Option<usize>,
    #[arg(long)]
    e_cl: Option<usize>,
    #[arg(long)]
    eta_pre: Option<f64>,
    #[arg(long)]
    codec: Option<Codec>,
    #[arg(long)]
    held_out_class: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    AdaptiveReplay,
    StaticReplay,
    NoReplay,
}

impl From<ModeArg> for ExperimentMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::AdaptiveReplay => ExperimentMode::AdaptiveReplay,
            ModeArg::StaticReplay => ExperimentMode::StaticReplay,
            ModeArg::NoReplay => ExperimentMode::NoReplay,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    TStep,
    LIns,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_toml(&fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f.clone() { cfg.$f = v; })* };
        }
        set!(seed, t_step, l_ins, e_pre, e_cl, eta_pre, codec);
        if self.held_out_class.is_some() {
            cfg.held_out_class = self.held_out_class;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn dataset(&self) -> Result<Dataset> {
        match &self.data {
            Some(p) => load_events(p),
            None => synth_generate(&SynthConfig::default()),
        }
    }
}

fn write_report(dir: &Path, report: &ExperimentReport, data: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_rows(fs::File::create(dir.join("report.csv"))?, &report.rows)?;
    fs::write(dir.join("manifest.toml"), RunManifest::new(&report.config, report.mode, data).to_toml())?;
    fs::write(dir.join("checkpoint.nck"), report.checkpoint_bytes())?;
    if let Some(store) = &report.store {
        store.save(dir.join("latents.lrs"))?;
    }
    let last = report.final_row();
    println!(
        "{}: old {:.3} -> {:.3}, new {:.3} -> {:.3}, latency {:.2}s, energy {:.3e}",
        report.mode,
        report.pre_cl().old_top1,
        last.old_top1,
        report.pre_cl().new_top1,
        last.new_top1,
        report.continual_latency(),
        report.continual_energy()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            out,
            classes,
            samples_per_class,
            channels,
            seed,
        } => {
            let data = synth_generate(&SynthConfig {
                classes,
                samples_per_class,
                channels,
                seed,
                ..SynthConfig::default()
            })?;
            write_events(&out, &data)?;
            println!("{} samples, sha256 {}", data.len(), data.content_hash());
        }
        Command::Pretrain { common, out } => {
            let (cfg, data) = (common.config()?, common.dataset()?);
            let split = task_split(&cfg, &data)?;
            let (ckpt, history) = pretrain_stage(&cfg, &data, &split)?;
            ckpt.save(&out)?;
            if let Some(last) = history.last() {
                println!("epoch {}: loss {:.4}, train accuracy {:.3}", last.epoch, last.mean_loss, last.train_accuracy);
            }
        }
        Command::PrepareReplay { common, checkpoint, out } => {
            let (cfg, data) = (common.config()?, common.dataset()?);
            let split = task_split(&cfg, &data)?;
            let mut net = Checkpoint::load(&checkpoint)?.net;
            let rs = split_network(&mut net, cfg.l_ins)?;
            let replay = rasterize_all(&data, &split.ts_replay, cfg.t_step)?;
            let (store, _) = prepare_replay(&net, &rs, &replay, &cfg)?;
            store.save(&out)?;
            println!("{} entries, {} bytes", store.len(), store.total_bytes());
        }
        Command::ClTrain {
            common,
            checkpoint,
            store,
            mode,
            out_dir,
        } => {
            let (cfg, data) = (common.config()?, common.dataset()?);
            let split = task_split(&cfg, &data)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let store = store.map(LatentStore::load).transpose()?;
            let report = run_continual(&cfg, mode.into(), &data, &split, &ckpt, Vec::new(), store)?;
            write_report(&out_dir, &report, &data)?;
        }
        Command::Eval { common, checkpoint } => {
            let (cfg, data) = (common.config()?, common.dataset()?);
            let net = Checkpoint::load(&checkpoint)?.net;
            let all: Vec<usize> = (0..data.len()).collect();
            let trains = rasterize_all(&data, &all, cfg.t_step)?;
            let res = harness::eval::evaluate_trains(&net, &trains, &InferencePlan::fixed())?;
            println!("top-1 {:.4} ({}/{})", res.accuracy(), res.correct, res.total);
        }
        Command::Run { common, mode, out_dir } => {
            let (cfg, data) = (common.config()?, common.dataset()?);
            let report = snn_replay::run_experiment(&cfg, &data, mode.into())?;
            write_report(&out_dir, &report, &data)?;
        }
        Command::Sweep {
            common,
            axis,
            values,
            mode,
            out,
        } => {
            let (cfg, data) = (common.config()?, common.dataset()?);
            let axis = match axis {
                AxisArg::TStep => SweepAxis::TStep(values),
                AxisArg::LIns => SweepAxis::LIns(values),
            };
            let results = sweep(&cfg, &axis, &data, mode.into())?;
            for (v, rep) in &results {
                let last = rep.final_row();
                println!("{}={v}: old {:.3}, new {:.3}", axis.name(), last.old_top1, last.new_top1);
            }
            write_sweep_rows(fs::File::create(&out)?, &sweep_rows(&axis, &results))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let root: &NclError = e.root();
            ExitCode::from(root.exit_code() as u8)
        }
    }
}
