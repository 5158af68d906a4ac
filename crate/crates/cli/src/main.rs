//! `kronopt`: experiment driver.
//!
//! Exit codes: 0 success, 1 I/O or file-format failure (or a failed check
//! under `verify-lemmas --strict`), 2 configuration error, 3 numerical
//! failure during a run.

use clap::{Args, Parser, Subcommand};
use kronopt::analysis::MatrixKind;
use kronopt::comm::{analytic_cost, write_cost_csv, CostReport};
use kronopt::harness::config::ExperimentConfig;
use kronopt::harness::lemmas::{run_lemma_suite, LemmaSuiteConfig};
use kronopt::harness::run::{run_experiment, sweep, train, SweepAxis};
use kronopt::net::{read_checkpoint, Network};
use kronopt::prune::{empirical_factors, greedy_prune, prune_and_measure, PruneMode};
use kronopt::{Error, Result};
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "kronopt", version, about = "Kronecker-factored optimizer laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Experiment configuration (flat key = value with [section] prefixes).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured optimizer (sgd, mkor, mkor-h, kfac, sngd).
    #[arg(long)]
    optimizer: Option<String>,
    /// Per-key override, repeatable: --set optim.lr=0.1
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self, base: Option<&str>) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, base) {
            (Some(p), _) => ExperimentConfig::from_file(p)?,
            (None, Some(text)) => ExperimentConfig::parse(text)?,
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        if let Some(o) = &self.optimizer {
            cfg.set("optimizer", o)?;
        }
        for kv in &self.set {
            cfg.apply_override(kv)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one configuration and write its artifacts.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Run the configuration once per value of one axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// inversion_period, lr, workers or d.
        #[arg(long)]
        axis: String,
        /// Comma-separated grid, e.g. 1,10,100.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Analytic per-iteration cost table, optionally with measured counters.
    CostReport {
        #[command(flatten)]
        common: Common,
        /// Layer widths.
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        d: Vec<usize>,
        /// Per-worker batch size.
        #[arg(long, default_value_t = 32)]
        b: usize,
        /// Optimizer tags for the analytic table.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "mkor,mkor-h,mkor-fp32,kfac,sngd,eva,sgd,adam,lamb"
        )]
        optimizers: Vec<String>,
        /// Also train each implemented optimizer at every width and report
        /// the counted operations.
        #[arg(long)]
        measured: bool,
        /// Iterations per measured run.
        #[arg(long, default_value_t = 20)]
        iterations: u64,
    },
    /// Train while recording rank-1 approximation errors of the factors.
    Rank1Profile {
        #[command(flatten)]
        common: Common,
        /// Record every N iterations.
        #[arg(long, default_value_t = 10)]
        every: u64,
    },
    /// Prune one layer with the Kronecker-factored Taylor score.
    Prune {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to prune; trains the configuration first when absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        layer: usize,
        /// Number of units (entries or tiles) to remove.
        #[arg(long)]
        k: usize,
        /// Tile shape ROWSxCOLS for block pruning.
        #[arg(long)]
        block: Option<String>,
        /// Diagonal added to both factors.
        #[arg(long, default_value_t = 1e-3)]
        damping: f64,
    },
    /// Run the numerical checks of the factor-inverse update.
    VerifyLemmas {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Steps per positive-definiteness chain.
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        /// Writes lemmas.json here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 1 if any check fails.
        #[arg(long)]
        strict: bool,
    },
}

/// Built-in base for `cost-report --measured` without a config file.
const COST_BASE: &str = "seed = 0\n\
    iterations = 20\n\
    eval_every = 0\n\
    [data]\n\
    kind = random-autoencoder\n\
    latent = 8\n\
    [net]\n\
    hidden = 64, 64\n";

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut js = serde_json::to_vec_pretty(value)?;
    js.push(b'\n');
    fs::write(path, js)?;
    Ok(())
}

fn cmd_train(common: &Common) -> Result<()> {
    let cfg = common.load(None)?;
    let out = common.out_dir("runs/train");
    let r = run_experiment(&cfg, &out)?;
    let s = &r.summary;
    println!(
        "{} iterations, final loss {:.6e}, full-dataset loss {:.6e}, {} syncs; artifacts in {}",
        s.iterations,
        s.final_loss,
        s.final_eval_loss,
        s.sync_events,
        out.display()
    );
    if let Some(t) = s.switched_at {
        println!("switched to the first-order backend at iteration {t}");
    }
    Ok(())
}

fn cmd_sweep(common: &Common, axis: &str, values: &[String]) -> Result<()> {
    let axis = SweepAxis::parse(axis).ok_or_else(|| {
        Error::Config(format!(
            "unknown sweep axis `{axis}` (inversion_period, lr, workers, d)"
        ))
    })?;
    let cfg = common.load(None)?;
    let out = common.out_dir("runs/sweep");
    let rows = sweep(&cfg, axis, values, &out)?;
    for r in &rows {
        let loss = r.final_eval_loss.map_or("-".to_string(), |l| format!("{l:.6e}"));
        println!("{}={:<8} {:<16} loss {loss}", r.axis, r.value, r.status);
    }
    println!("sweep.csv written to {}", out.display());
    Ok(())
}

fn cmd_cost_report(
    common: &Common,
    ds: &[usize],
    b: usize,
    optimizers: &[String],
    measured: bool,
    iterations: u64,
) -> Result<()> {
    if ds.is_empty() || ds.contains(&0) || b == 0 {
        return Err(Error::Config("d and b must be positive".into()));
    }
    let mut analytic = Vec::new();
    for tag in optimizers {
        for &d in ds {
            analytic.push(analytic_cost(tag, d, b).map_err(|e| Error::Config(e.to_string()))?);
        }
    }
    let mut measured_rows: Vec<CostReport> = Vec::new();
    if measured {
        let mut base = common.load(Some(COST_BASE))?;
        base.batch_size = b;
        base.iterations = iterations;
        let implemented = ["sgd", "mkor", "mkor-h", "kfac", "sngd"];
        for tag in optimizers.iter().filter(|t| implemented.contains(&t.as_str())) {
            for &d in ds {
                let mut cfg = SweepAxis::D.apply(&base, &d.to_string())?;
                cfg.set("optimizer", tag)?;
                if let kronopt::harness::config::DataSource::Synth(s) = &mut cfg.data {
                    s.n = s.n.max(b * cfg.workers);
                }
                cfg.validate()?;
                measured_rows.push(train(&cfg)?.0.summary.cost);
            }
        }
    }
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write_cost_csv(File::create(dir.join("cost_analytic.csv"))?, &analytic)?;
            if measured {
                write_cost_csv(File::create(dir.join("cost_measured.csv"))?, &measured_rows)?;
            }
            println!("cost tables written to {}", dir.display());
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            writeln!(lock, "# analytic")?;
            write_cost_csv(&mut lock, &analytic)?;
            if measured {
                writeln!(lock, "# measured ({iterations} iterations)")?;
                write_cost_csv(&mut lock, &measured_rows)?;
            }
        }
    }
    Ok(())
}

fn cmd_rank1(common: &Common, every: u64) -> Result<()> {
    if every == 0 {
        return Err(Error::Config("--every must be positive".into()));
    }
    let mut cfg = common.load(None)?;
    cfg.rank1_every = every;
    let out = common.out_dir("runs/rank1");
    let r = run_experiment(&cfg, &out)?;
    for kind in [MatrixKind::Activation, MatrixKind::Gradient] {
        let recs: Vec<_> = r.rank1.iter().filter(|x| x.kind == kind).collect();
        if recs.is_empty() {
            continue;
        }
        let n = recs.len() as f64;
        let mean_vec = recs.iter().map(|x| x.rel_error_mean_vec).sum::<f64>() / n;
        let best = recs.iter().map(|x| x.rel_error_best_rank1).sum::<f64>() / n;
        println!(
            "{kind:?}: {} records, mean relative error {mean_vec:.4} (mean vector), {best:.4} (best rank-1)",
            recs.len()
        );
    }
    let violations = r
        .rank1
        .iter()
        .filter(|x| x.rel_error_best_rank1 > x.rel_error_mean_vec)
        .count();
    println!(
        "best rank-1 worse than mean vector on {violations} of {} records",
        r.rank1.len()
    );
    println!("rank1.csv written to {}", out.display());
    Ok(())
}

fn parse_block(s: &str) -> Result<PruneMode> {
    let bad = || Error::Config(format!("--block expects ROWSxCOLS, got `{s}`"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let rows: usize = r.trim().parse().map_err(|_| bad())?;
    let cols: usize = c.trim().parse().map_err(|_| bad())?;
    if rows == 0 || cols == 0 {
        return Err(bad());
    }
    Ok(PruneMode::Block { rows, cols })
}

#[derive(serde::Serialize)]
struct PruneReport {
    layer: usize,
    k: usize,
    mode: String,
    damping: f64,
    pruned_entries: Vec<(usize, usize)>,
    predicted_delta: f64,
    loss_before: f64,
    loss_after: f64,
    true_delta: f64,
}

fn cmd_prune(
    common: &Common,
    checkpoint: Option<&Path>,
    layer: usize,
    k: usize,
    block: Option<&str>,
    damping: f64,
) -> Result<()> {
    let cfg = common.load(None)?;
    let mode = block.map_or(Ok(PruneMode::Element), parse_block)?;
    if !(damping >= 0.0 && damping.is_finite()) {
        return Err(Error::Config("--damping must be non-negative".into()));
    }
    let data = cfg.load_dataset()?;
    let net: Network = match checkpoint {
        Some(p) => read_checkpoint(BufReader::new(File::open(p)?))?,
        None => train(&cfg)?.0.net,
    };
    if layer >= net.layers.len() {
        return Err(Error::Config(format!(
            "network has {} layers, no layer {layer}",
            net.layers.len()
        )));
    }
    let (_, caps) = net.gradients(&data.inputs, &data.targets, cfg.loss)?;
    let (l, r) = empirical_factors(&caps[layer], damping)?;
    let w0 = &net.layers[layer].weight;
    let (mask, predicted) = greedy_prune(w0, &caps[layer].w_grad, &l, &r, k, mode)?;
    let (pruned, outcome) = prune_and_measure(&net, layer, &data, &mask, &l, &r, cfg.loss)?;

    let out = common.out_dir("runs/prune");
    fs::create_dir_all(&out)?;
    mask.write(File::create(out.join("mask.bin"))?)?;
    let mut ck = io::BufWriter::new(File::create(out.join("pruned.ckpt"))?);
    kronopt::net::write_checkpoint(&pruned, &mut ck)?;
    ck.flush()?;
    let report = PruneReport {
        layer,
        k,
        mode: match mode {
            PruneMode::Element => "element".into(),
            PruneMode::Block { rows, cols } => format!("block {rows}x{cols}"),
        },
        damping,
        pruned_entries: mask.entries(),
        predicted_delta: predicted,
        loss_before: outcome.loss_before,
        loss_after: outcome.loss_after,
        true_delta: outcome.true_delta,
    };
    write_json(&out.join("prune.json"), &report)?;
    println!(
        "pruned {} weights of layer {layer}: predicted Δloss {:.6e}, measured {:.6e}; mask in {}",
        mask.count(),
        predicted,
        outcome.true_delta,
        out.display()
    );
    Ok(())
}

fn cmd_verify(seed: u64, steps: usize, out: Option<&Path>, strict: bool) -> Result<bool> {
    let cfg = LemmaSuiteConfig {
        seed,
        chain_steps: steps,
        ..Default::default()
    };
    let report = run_lemma_suite(&cfg)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for s in &report.sm {
        println!(
            "info γ={}: mkor update vs direct inverse, relative ‖·‖∞ max {:.3e}, mean {:.3e}",
            s.gamma, s.mkor_max_rel_error, s.mkor_mean_rel_error
        );
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("lemmas.json"), &report)?;
    }
    Ok(!strict || report.all_passed())
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Train { common } => cmd_train(common)?,
        Command::Sweep { common, axis, values } => cmd_sweep(common, axis, values)?,
        Command::CostReport {
            common,
            d,
            b,
            optimizers,
            measured,
            iterations,
        } => cmd_cost_report(common, d, *b, optimizers, *measured, *iterations)?,
        Command::Rank1Profile { common, every } => cmd_rank1(common, *every)?,
        Command::Prune {
            common,
            checkpoint,
            layer,
            k,
            block,
            damping,
        } => cmd_prune(common, checkpoint.as_deref(), *layer, *k, block.as_deref(), *damping)?,
        Command::VerifyLemmas {
            seed,
            steps,
            out,
            strict,
        } => return cmd_verify(*seed, *steps, out.as_deref(), *strict),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("kronopt: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
