//! Acceptance criteria, run in order by a plain `main` (no test harness) so that
//! wall-clock measurements are not disturbed by concurrent tests and the result
//! lines are always shown.
//!
//! Each criterion prints one `PASS`/`FAIL` line; the process exits nonzero if any fails.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;

use snn_replay::continual::config::lr_policy;
use snn_replay::continual::threshold::{timing_threshold, SchedulerMode, ThresholdSchedulerState};
use snn_replay::data::synth::{synth_generate, SynthConfig};
use snn_replay::harness::experiment::{pretrain_stage, run_continual, run_experiment, task_split, ExperimentReport};
use snn_replay::replay::codec::{compress_latent, decompress_latent, Codec, ENTRY_HEADER_BYTES};
use snn_replay::replay::store::{analytic_store_bytes, latent_memory_report, STORE_HEADER_BYTES};
use snn_replay::{Dataset, ExperimentMode, RunConfig, SpikeTrain};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Ledger {
    failed: Vec<usize>,
}

impl Ledger {
    fn record(&mut self, id: usize, name: &str, budget: Duration, started: Instant, o: Outcome) {
        let elapsed = started.elapsed();
        let pass = o.pass && elapsed <= budget;
        println!(
            "criterion {id:>2} {:<4} {name}: {} [{:.2}s, budget {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if !pass {
            self.failed.push(id);
        }
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

/// Desk-scale benchmark: 8 synthetic classes, class 7 held out for the continual phase.
fn benchmark_data() -> Dataset {
    synth_generate(&SynthConfig {
        samples_per_class: 160,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn benchmark_config() -> RunConfig {
    RunConfig {
        eta_pre: 0.01,
        cl_batch_size: 1,
        l_ins: 2,
        seed: 1,
        ..RunConfig::default()
    }
}

fn thresholds() -> Outcome {
    let mut s = ThresholdSchedulerState::new(20, 5, 1.0);
    let first = s.threshold_step(false, SchedulerMode::Ncl).unwrap();

    // Spikes at t = 8..=12 fill the 5-step window with mean spike time 10.
    let mut s = ThresholdSchedulerState::new(20, 5, 1.0);
    let mut at_12 = f64::NAN;
    for t in 0..=12 {
        at_12 = s.threshold_step(t >= 8, SchedulerMode::Ncl).unwrap();
    }
    let direct = timing_threshold(20, 10.0);
    let lr = lr_policy(1e-3);
    outcome(
        first == 0.5 && at_12 == 1.1 && direct == 1.1 && lr == 1e-5,
        format!("t=0 no spikes -> {first}; T=20 mean 10 -> {at_12}; lr_policy(1e-3) = {lr:e}"),
    )
}

fn gradients() -> Outcome {
    let nets = 24;
    let (mut total, mut good) = (0usize, 0usize);
    for seed in 0..nets {
        let case = common::proxy_case(1000 + seed);
        for (a, n) in common::gradient_pairs(&case, 1.0, 1e-6) {
            total += 1;
            good += (common::rel_err(a, n) < 1e-3) as usize;
        }
    }
    let frac = good as f64 / total as f64;
    outcome(
        frac >= 0.95,
        format!("{nets} proxy nets, {good}/{total} coordinates ({:.2}%) within 1e-3", 100.0 * frac),
    )
}

fn codecs() -> Outcome {
    let mut rng = common::rng(99);
    let mut ok = true;
    for _ in 0..1000 {
        let (t, w) = (rng.gen_range(1..=100), rng.gen_range(1..=64));
        let density: f64 = rng.gen_range(0.0..1.0);
        let bits: Vec<u8> = (0..t * w).map(|_| rng.gen_bool(density) as u8).collect();
        let train = SpikeTrain::from_vec(t, w, bits).unwrap();
        let chunk = rng.gen_range(1..=t);

        let bp = compress_latent(&train, 0, Codec::Bitpack, chunk).unwrap();
        ok &= decompress_latent(&bp).unwrap() == train;
        ok &= bp.encoded_len() == (t * w).div_ceil(8) + ENTRY_HEADER_BYTES;

        let rc = compress_latent(&train, 0, Codec::Ratechunk, chunk).unwrap();
        let back = decompress_latent(&rc).unwrap();
        for start in (0..t).step_by(chunk) {
            let end = (start + chunk).min(t);
            for n in 0..w {
                let a = (start..end).filter(|&i| train.get(i, n)).count();
                let b = (start..end).filter(|&i| back.get(i, n)).count();
                ok &= a == b;
            }
        }
    }
    outcome(ok, "1000 random trains: bitpack exact, ratechunk window counts exact, bitpack size = ceil(T*N/8) + 16")
}

struct Runs {
    adaptive: Vec<(usize, ExperimentReport)>,
    static_: Vec<(usize, ExperimentReport)>,
    no_replay: ExperimentReport,
}

fn paired_runs(data: &Dataset, cfg: &RunConfig) -> Runs {
    let split = task_split(cfg, data).unwrap();
    let (ckpt, history) = pretrain_stage(cfg, data, &split).unwrap();
    let run = |mode, l_ins| {
        let c = RunConfig { l_ins, ..cfg.clone() };
        run_continual(&c, mode, data, &split, &ckpt, history.clone(), None).unwrap()
    };
    let no_replay = run(ExperimentMode::NoReplay, cfg.l_ins);
    let mut adaptive = Vec::new();
    let mut static_ = Vec::new();
    for l in [1, 2] {
        adaptive.push((l, run(ExperimentMode::AdaptiveReplay, l)));
        static_.push((l, run(ExperimentMode::StaticReplay, l)));
    }
    Runs {
        adaptive,
        static_,
        no_replay,
    }
}

fn forgetting(runs: &Runs, l_ins: usize) -> Outcome {
    let base = &runs.no_replay;
    let rep = &runs.adaptive.iter().find(|(l, _)| *l == l_ins).unwrap().1;
    let drop = base.pre_cl().old_top1 - base.final_row().old_top1;
    let margin = rep.final_row().old_top1 - base.final_row().old_top1;
    outcome(
        drop >= 0.40 && margin >= 0.30,
        format!(
            "no-replay old {:.3} -> {:.3} (drop {:.1} pts, need >= 40); adaptive-replay old {:.3} (+{:.1} pts over baseline, need >= 30)",
            base.pre_cl().old_top1,
            base.final_row().old_top1,
            100.0 * drop,
            rep.final_row().old_top1,
            100.0 * margin
        ),
    )
}

fn new_task(runs: &Runs) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (l, rep) in &runs.adaptive {
        let first = rep.rows.iter().skip(1).find(|r| r.new_top1 == 1.0).map(|r| r.epoch);
        ok &= first.is_some_and(|e| e <= 50);
        parts.push(match first {
            Some(e) => format!("l_ins={l}: 100% at epoch {e}"),
            None => format!("l_ins={l}: best {:.3}", rep.rows.iter().map(|r| r.new_top1).fold(0.0, f64::max)),
        });
    }
    outcome(ok, parts.join("; "))
}

fn latency(runs: &Runs) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for ((l, a), (_, s)) in runs.adaptive.iter().zip(&runs.static_) {
        let ratio = s.continual_latency() / a.continual_latency();
        ok &= (3.0..=6.5).contains(&ratio);
        parts.push(format!(
            "l_ins={l}: T=100 {:.2}s / T=20 {:.2}s = {ratio:.2}",
            s.continual_latency(),
            a.continual_latency()
        ));
    }
    outcome(ok, format!("{} (need [3.0, 6.5])", parts.join("; ")))
}

fn memory(runs: &Runs) -> Outcome {
    let rep = &runs.adaptive.iter().find(|(l, _)| *l == 2).unwrap().1;
    let store = rep.store.as_ref().unwrap();
    let (n, w, chunk) = (store.len(), store.width, store.chunk);
    let alternates = [
        (100, Codec::Ratechunk, chunk),
        (20, Codec::Bitpack, chunk),
        (100, Codec::Bitpack, chunk),
    ];
    let report = latent_memory_report(store, &alternates);
    let mut ok = report.total_bytes == analytic_store_bytes(n, store.timesteps, w, store.codec, chunk)
        && report.total_bytes == report.payload_bytes + report.header_bytes
        && report.per_sample.iter().sum::<usize>() == report.total_bytes
        && store.to_bytes().len() == STORE_HEADER_BYTES + report.total_bytes;
    for (row, &(t, codec, c)) in report.alternates.iter().zip(&alternates) {
        ok &= row.total_bytes == analytic_store_bytes(n, t, w, codec, c);
    }
    let mut parts = Vec::new();
    for codec in [Codec::Ratechunk, Codec::Bitpack] {
        let p20 = codec.payload_size(20, w, chunk) as f64;
        let p100 = codec.payload_size(100, w, chunk) as f64;
        let with_headers = analytic_store_bytes(n, 20, w, codec, chunk) as f64 / analytic_store_bytes(n, 100, w, codec, chunk) as f64;
        ok &= p20 / p100 == 0.2;
        parts.push(format!("{codec}: payload {:.4}, with headers {with_headers:.4}", p20 / p100));
    }
    outcome(
        ok,
        format!("{n} entries x {w} neurons, {} bytes = analytic; size(T=20)/size(T=100): {}", report.total_bytes, parts.join(", ")),
    )
}

fn energy(runs: &Runs) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for ((l, a), (_, s)) in runs.adaptive.iter().zip(&runs.static_) {
        let (ea, es) = (a.continual_energy(), s.continual_energy());
        let (na, ns) = (a.continual_neuron_updates(), s.continual_neuron_updates());
        ok &= ea < es && ns == 5 * na;
        parts.push(format!("l_ins={l}: energy {:.3e} < {:.3e}, neuron updates {ns}/{na}", ea, es));
    }
    outcome(ok, parts.join("; "))
}

fn determinism() -> Outcome {
    let data = synth_generate(&SynthConfig::default()).unwrap();
    let cfg = RunConfig {
        e_pre: 3,
        e_cl: 3,
        eta_pre: 0.01,
        cl_batch_size: 4,
        seed: 5,
        ..RunConfig::default()
    };
    let a = run_experiment(&cfg, &data, ExperimentMode::AdaptiveReplay).unwrap();
    let b = run_experiment(&cfg, &data, ExperimentMode::AdaptiveReplay).unwrap();
    let rows = |r: &ExperimentReport| r.rows.iter().map(|x| x.without_latency()).collect::<Vec<_>>();
    let same_rows = rows(&a) == rows(&b) && a.pretrain == b.pretrain;
    let same_ckpt = a.checkpoint_bytes() == b.checkpoint_bytes();
    let same_store = a.store.as_ref().unwrap().to_bytes() == b.store.as_ref().unwrap().to_bytes();
    outcome(
        same_rows && same_ckpt && same_store,
        format!("reports equal: {same_rows}, checkpoints byte-equal: {same_ckpt}, latent stores byte-equal: {same_store}"),
    )
}

fn frozen(reports: &[&ExperimentReport]) -> Outcome {
    let intact = reports.iter().filter(|r| r.frozen_intact()).count();
    let layers: usize = reports.iter().map(|r| r.frozen_hashes_before.len()).sum();
    outcome(
        intact == reports.len(),
        format!("{intact}/{} runs with identical frozen hashes ({layers} frozen layers checked)", reports.len()),
    )
}

fn main() {
    let mut ledger = Ledger { failed: Vec::new() };

    let t = Instant::now();
    ledger.record(1, "threshold and learning-rate rules", secs(1), t, thresholds());

    let t = Instant::now();
    ledger.record(2, "BPTT vs finite differences", secs(60), t, gradients());

    let t = Instant::now();
    ledger.record(3, "codec contracts", secs(30), t, codecs());

    let data = benchmark_data();
    let cfg = benchmark_config();
    let t = Instant::now();
    let runs = paired_runs(&data, &cfg);
    let experiments = t.elapsed();
    println!("(shared pre-training and 5 continual runs: {:.1}s)", experiments.as_secs_f64());

    let t = Instant::now() - experiments;
    ledger.record(4, "catastrophic forgetting", secs(15 * 60), t, forgetting(&runs, cfg.l_ins));
    ledger.record(5, "new-task learning", secs(15 * 60), t, new_task(&runs));
    ledger.record(6, "latency scaling", secs(10 * 60), t, latency(&runs));

    let t = Instant::now();
    ledger.record(7, "memory accounting", secs(1), t, memory(&runs));

    let t = Instant::now() - experiments;
    ledger.record(8, "energy proxy", secs(10 * 60), t, energy(&runs));

    let t = Instant::now();
    ledger.record(9, "determinism", secs(15 * 60), t, determinism());

    let mut all: Vec<&ExperimentReport> = vec![&runs.no_replay];
    all.extend(runs.adaptive.iter().map(|(_, r)| r));
    all.extend(runs.static_.iter().map(|(_, r)| r));
    let t = Instant::now();
    ledger.record(10, "frozen layers untouched", secs(15 * 60), t, frozen(&all));

    if !ledger.failed.is_empty() {
        eprintln!("failed criteria: {:?}", ledger.failed);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
