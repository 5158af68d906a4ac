//! Experiment execution: one training run and grid sweeps over a config axis.

use super::config::ExperimentConfig;
use crate::analysis::{rank1_records, write_rank1_csv, Rank1ErrorRecord};
use crate::comm::{measured_cost, write_cost_csv, CostReport, Simulation};
use crate::error::{Error, Result};
use crate::net::write_checkpoint;
use crate::net::Network;
use crate::optim::Optimizer;
use crate::rng::Rng;
use crate::sched::Scheduler;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const LOSS_CSV: &str = "loss.csv";
pub const COST_CSV: &str = "cost.csv";
pub const CHECKPOINT: &str = "model.ckpt";
pub const SUMMARY_JSON: &str = "summary.json";
pub const RANK1_CSV: &str = "rank1.csv";
pub const PLOT_SCRIPT: &str = "plot.py";
pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Debug, Clone, Serialize)]
struct LossRow {
    iter: u64,
    loss: f64,
    eval_loss: Option<f64>,
    lr: f64,
    synced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config: BTreeMap<String, String>,
    pub iterations: u64,
    pub final_loss: f64,
    pub final_eval_loss: f64,
    pub best_eval_loss: f64,
    /// First evaluated iteration whose full-dataset loss reached `target_loss`.
    pub reached_target_at: Option<u64>,
    pub sync_events: usize,
    pub switched_at: Option<usize>,
    pub knee_events: Vec<u64>,
    pub cost: CostReport,
}

/// In-memory results of a run, alongside what was written to disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub net: Network,
    pub loss_trace: Vec<f64>,
    pub rank1: Vec<Rank1ErrorRecord>,
}

fn eval_loss(net: &Network, data: &crate::data::Dataset, cfg: &ExperimentConfig) -> Result<f64> {
    let l = net.loss(&data.inputs, &data.targets, cfg.loss)?;
    if l.is_finite() {
        Ok(l)
    } else {
        Err(Error::NonFinite("evaluation loss"))
    }
}

/// Trains without touching the filesystem.
pub fn train(cfg: &ExperimentConfig) -> Result<(RunOutput, Vec<u8>)> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let data = cfg.load_dataset()?;
    let shards = data.shard(cfg.workers, seed ^ 0x5eed)?;
    let specs = cfg.layer_specs(data.input_dim(), data.target_dim());
    let net = Network::init(&specs, &mut Rng::new(seed))?;
    let optimizer = cfg.build_optimizer(&net)?;
    let mut sched = cfg.build_scheduler()?;
    let mut sim = Simulation::new(net, optimizer, shards, cfg.batch_size, cfg.loss)?;

    let mut rows = Vec::with_capacity(cfg.iterations as usize);
    let mut rank1 = Vec::new();
    let mut loss_trace = Vec::with_capacity(cfg.iterations as usize);
    let mut best = f64::INFINITY;
    let mut last_eval = f64::NAN;
    let mut reached = None;
    for t in 0..cfg.iterations {
        let out = sim.step()?;
        if cfg.rank1_every > 0 && t % cfg.rank1_every == 0 {
            rank1.extend(rank1_records(t, &out.captures)?);
        }
        let last = t + 1 == cfg.iterations;
        let eval = if (cfg.eval_every > 0 && (t + 1) % cfg.eval_every == 0) || last {
            let e = eval_loss(sim.net(), &data, cfg)?;
            best = best.min(e);
            last_eval = e;
            if reached.is_none() && cfg.target_loss.is_some_and(|target| e <= target) {
                reached = Some(t + 1);
            }
            Some(e)
        } else {
            None
        };
        rows.push(LossRow {
            iter: t,
            loss: out.loss,
            eval_loss: eval,
            lr: out.lr,
            synced: out.cost.synced,
        });
        loss_trace.push(out.loss);
        let lr = sched.next_lr(t + 1, out.loss);
        sim.set_lr(lr);
    }
    if cfg.iterations == 0 {
        last_eval = eval_loss(sim.net(), &data, cfg)?;
        best = last_eval;
    }

    let mut loss_csv = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut loss_csv);
        if rows.is_empty() {
            w.write_record(["iter", "loss", "eval_loss", "lr", "synced"])?;
        }
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }

    let switched_at = match sim.optimizer() {
        Optimizer::Mkor(m) => m.hybrid.as_ref().and_then(|h| h.switched_at),
        _ => None,
    };
    let knee_events = match &sched {
        Scheduler::Knee(k) => k.events.clone(),
        _ => Vec::new(),
    };
    let summary = RunSummary {
        config: cfg.to_map(),
        iterations: cfg.iterations,
        final_loss: loss_trace.last().copied().unwrap_or(last_eval),
        final_eval_loss: last_eval,
        best_eval_loss: best,
        reached_target_at: reached,
        sync_events: sim.trace.sync_events(),
        switched_at,
        knee_events,
        cost: measured_cost(&sim.trace, cfg.timing),
    };
    Ok((
        RunOutput {
            summary,
            net: sim.net().clone(),
            loss_trace,
            rank1,
        },
        loss_csv,
    ))
}

/// Runs one experiment and writes `loss.csv`, `cost.csv`, `model.ckpt`,
/// `summary.json`, `plot.py` and, when rank-1 profiling is on, `rank1.csv`
/// into `out_dir`. Without `timing` every file is a pure function of the
/// configuration.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    let (output, loss_csv) = train(cfg)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(LOSS_CSV), loss_csv)?;
    write_cost_csv(
        File::create(out_dir.join(COST_CSV))?,
        std::slice::from_ref(&output.summary.cost),
    )?;
    let mut ck = BufWriter::new(File::create(out_dir.join(CHECKPOINT))?);
    write_checkpoint(&output.net, &mut ck)?;
    ck.flush()?;
    let mut js = serde_json::to_vec_pretty(&output.summary)?;
    js.push(b'\n');
    fs::write(out_dir.join(SUMMARY_JSON), js)?;
    if cfg.rank1_every > 0 {
        write_rank1_csv(File::create(out_dir.join(RANK1_CSV))?, &output.rank1)?;
    }
    fs::write(out_dir.join(PLOT_SCRIPT), plot_script(cfg.rank1_every > 0))?;
    Ok(output)
}

fn plot_script(rank1: bool) -> String {
    let mut s = String::from(
        "# Plots the CSV artifacts in this directory.\n\
         import sys\n\
         import pandas as pd\n\
         import matplotlib.pyplot as plt\n\
         \n\
         d = sys.argv[1] if len(sys.argv) > 1 else \".\"\n\
         loss = pd.read_csv(f\"{d}/loss.csv\")\n\
         fig, ax = plt.subplots()\n\
         ax.semilogy(loss[\"iter\"], loss[\"loss\"], label=\"batch\")\n\
         ev = loss.dropna(subset=[\"eval_loss\"])\n\
         ax.semilogy(ev[\"iter\"], ev[\"eval_loss\"], label=\"full dataset\")\n\
         ax.set_xlabel(\"iteration\")\n\
         ax.set_ylabel(\"loss\")\n\
         ax.legend()\n\
         fig.savefig(f\"{d}/loss.png\", dpi=120)\n",
    );
    if rank1 {
        s.push_str(
            "\n\
             r1 = pd.read_csv(f\"{d}/rank1.csv\")\n\
             fig, ax = plt.subplots()\n\
             for (layer, kind), g in r1.groupby([\"layer\", \"kind\"]):\n    \
                 ax.plot(g[\"iter\"], g[\"rel_error_mean_vec\"], label=f\"{kind} {layer}\")\n\
             ax.set_xlabel(\"iteration\")\n\
             ax.set_ylabel(\"relative rank-1 error\")\n\
             ax.legend()\n\
             fig.savefig(f\"{d}/rank1.png\", dpi=120)\n",
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    InversionPeriod,
    Lr,
    Workers,
    /// Width of every hidden layer; synthetic inputs follow it too.
    D,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inversion_period" | "f" => Some(SweepAxis::InversionPeriod),
            "lr" => Some(SweepAxis::Lr),
            "workers" => Some(SweepAxis::Workers),
            "d" => Some(SweepAxis::D),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::InversionPeriod => "inversion_period",
            SweepAxis::Lr => "lr",
            SweepAxis::Workers => "workers",
            SweepAxis::D => "d",
        }
    }

    /// The configuration with this axis set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut c = cfg.clone();
        match self {
            SweepAxis::InversionPeriod => c.set("optim.inversion_period", value)?,
            SweepAxis::Lr => c.set("optim.lr", value)?,
            SweepAxis::Workers => c.set("workers", value)?,
            SweepAxis::D => {
                let d: usize = value
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid value `{value}` for `d`")))?;
                if d == 0 {
                    return Err(Error::Config("d must be positive".into()));
                }
                c.hidden = vec![d; c.hidden.len().max(1)];
                if let super::config::DataSource::Synth(s) = &mut c.data {
                    s.dim = d;
                }
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub optimizer: String,
    /// `ok`, `diverged` (loss above its starting value) or `numerical_error`.
    pub status: String,
    pub final_eval_loss: Option<f64>,
    pub best_eval_loss: Option<f64>,
    pub reached_target_at: Option<u64>,
    pub sync_events: Option<usize>,
    pub flops_factor: Option<u64>,
    pub flops_precondition: Option<u64>,
    pub flops_update: Option<u64>,
    pub comm_elements: Option<u64>,
    pub memory_elements: Option<u64>,
    pub wall_ms_per_iter: Option<f64>,
}

/// Number of sweep cells run concurrently: `KRONOPT_THREADS` when set,
/// otherwise the available parallelism.
pub fn sweep_threads() -> usize {
    std::env::var("KRONOPT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn cell_dir(out_dir: &Path, i: usize, axis: SweepAxis, value: &str) -> PathBuf {
    let clean: String = value
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    out_dir.join(format!("cell{i:02}_{}_{clean}", axis.name()))
}

fn run_cell(cfg: &ExperimentConfig, axis: SweepAxis, value: &str, dir: &Path) -> Result<SweepRow> {
    let c = axis.apply(cfg, value)?;
    let mut row = SweepRow {
        axis: axis.name().into(),
        value: value.into(),
        optimizer: c.optimizer.name().into(),
        status: String::new(),
        final_eval_loss: None,
        best_eval_loss: None,
        reached_target_at: None,
        sync_events: None,
        flops_factor: None,
        flops_precondition: None,
        flops_update: None,
        comm_elements: None,
        memory_elements: None,
        wall_ms_per_iter: None,
    };
    match run_experiment(&c, dir) {
        Ok(out) => {
            let s = &out.summary;
            let first = out.loss_trace.first().copied().unwrap_or(f64::INFINITY);
            row.status = if s.final_eval_loss > first { "diverged" } else { "ok" }.into();
            row.final_eval_loss = Some(s.final_eval_loss);
            row.best_eval_loss = Some(s.best_eval_loss);
            row.reached_target_at = s.reached_target_at;
            row.sync_events = Some(s.sync_events);
            row.flops_factor = Some(s.cost.flops_factor_update);
            row.flops_precondition = Some(s.cost.flops_precondition);
            row.flops_update = Some(s.cost.flops_update);
            row.comm_elements = Some(s.cost.comm_elements);
            row.memory_elements = Some(s.cost.memory_elements);
            row.wall_ms_per_iter = s.cost.wall_ms.map(|w| w / s.iterations.max(1) as f64);
        }
        Err(e) if e.is_numerical() => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("error.txt"), format!("{e}\n"))?;
            row.status = "numerical_error".into();
        }
        Err(e) => return Err(e),
    }
    Ok(row)
}

/// Grid over one axis: each value runs a full experiment in its own
/// subdirectory with the shared seed, and `sweep.csv` collects one row per
/// cell in grid order. Cells that hit a numerical failure are recorded as
/// such instead of aborting the sweep; configuration errors abort it.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[String], out_dir: &Path) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    for v in values {
        axis.apply(cfg, v)?.validate()?;
    }
    fs::create_dir_all(out_dir)?;
    let threads = sweep_threads().min(values.len());
    let mut results: Vec<Option<Result<SweepRow>>> = (0..values.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= values.len() {
                    break;
                }
                let r = run_cell(cfg, axis, &values[i], &cell_dir(out_dir, i, axis, &values[i]));
                slots.lock().expect("sweep result lock")[i] = Some(r);
            });
        }
    });
    let rows: Vec<SweepRow> = results
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(File::create(out_dir.join(SWEEP_CSV))?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_cfg() -> ExperimentConfig {
        ExperimentConfig::parse("seed = 1\noptimizer = sgd\niterations = 50\nbatch_size = 4\nlr = 0.1\n").unwrap()
    }

    #[test]
    fn train_is_deterministic() {
        let (a, ca) = train(&xor_cfg()).unwrap();
        let (b, cb) = train(&xor_cfg()).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.summary, b.summary);
        assert!(a.summary.final_eval_loss.is_finite());
    }

    #[test]
    fn axis_apply() {
        let c = SweepAxis::D.apply(&xor_cfg(), "16").unwrap();
        assert_eq!(c.hidden, vec![16]);
        assert!(SweepAxis::Lr.apply(&xor_cfg(), "fast").is_err());
    }
}
