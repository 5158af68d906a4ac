//! Cost accounting and a deterministic logical multi-worker simulator.
//!
//! Costs are element counts. Analytic rows reproduce the leading terms of
//! the per-layer complexity table; measured rows come from the per-phase
//! flop counters and the simulator's communication tally.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::flops::{self, FlopCounts, Phase};
use crate::linalg::Vector;
use crate::net::{LayerCapture, LossKind, Network};
use crate::optim::{mean_matrices, Optimizer, SyncPayload};
use serde::Serialize;
use std::io::Write;
use std::time::Instant;

/// Bytes per element of the analytic rows (single precision).
pub const ANALYTIC_WORD_BYTES: u64 = 4;
/// Bytes per element of the simulator (double precision).
pub const MEASURED_WORD_BYTES: u64 = 8;
pub const HALF_WORD_BYTES: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub optimizer: String,
    pub d: usize,
    pub b: usize,
    pub workers: usize,
    pub iterations: u64,
    pub flops_factor_update: u64,
    pub flops_precondition: u64,
    pub flops_update: u64,
    pub flops_other: u64,
    /// Optimizer synchronization traffic (excludes gradient averaging).
    pub comm_elements: u64,
    pub comm_bytes: u64,
    /// Gradient-averaging traffic, tallied apart from the optimizer's.
    pub grad_comm_elements: u64,
    pub memory_elements: u64,
    pub wall_ms: Option<f64>,
}

impl CostReport {
    fn empty(optimizer: &str, d: usize, b: usize) -> Self {
        CostReport {
            optimizer: optimizer.to_string(),
            d,
            b,
            workers: 1,
            iterations: 0,
            flops_factor_update: 0,
            flops_precondition: 0,
            flops_update: 0,
            flops_other: 0,
            comm_elements: 0,
            comm_bytes: 0,
            grad_comm_elements: 0,
            memory_elements: 0,
            wall_ms: None,
        }
    }

    pub fn flops(&self, phase: Phase) -> u64 {
        match phase {
            Phase::Factor => self.flops_factor_update,
            Phase::Precondition => self.flops_precondition,
            Phase::Update => self.flops_update,
            Phase::Other => self.flops_other,
        }
    }
}

/// Leading-order per-layer costs for a `d × d` layer and batch `b`.
///
/// Tags: `mkor`, `mkor-h`, `mkor-fp32`, `kfac`, `sngd`, `eva`, `sgd`, `adam`,
/// `lamb`. MKOR rows count bytes at binary16 width except `mkor-fp32`.
/// The compute term is reported as factor-update flops.
pub fn analytic_cost(optimizer: &str, d: usize, b: usize) -> Result<CostReport> {
    if d == 0 || b == 0 {
        return Err(Error::InvalidArgument("analytic cost needs d, b ≥ 1".into()));
    }
    let (d64, b64) = (d as u64, b as u64);
    let mut r = CostReport::empty(optimizer, d, b);
    let mut width = ANALYTIC_WORD_BYTES;
    let (compute, memory, comm) = match optimizer {
        "mkor" | "mkor-h" => {
            width = HALF_WORD_BYTES;
            (d64 * d64 + b64 * d64, 2 * d64 * d64, 2 * d64)
        }
        "mkor-fp32" => (d64 * d64 + b64 * d64, 2 * d64 * d64, 2 * d64),
        "kfac" => (d64.pow(3), 4 * d64 * d64, 4 * d64 * d64),
        "sngd" => {
            let m = 2 * b64 * d64 + b64 * b64;
            (b64.pow(3), m, m)
        }
        "eva" => (d64 * d64 + b64 * d64, 2 * d64, 2 * d64),
        "sgd" | "adam" | "lamb" => (0, d64 * d64, 0),
        other => return Err(Error::InvalidArgument(format!("unknown optimizer tag `{other}`"))),
    };
    r.flops_factor_update = compute;
    r.memory_elements = memory;
    r.comm_elements = comm;
    r.comm_bytes = comm * width;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationCost {
    pub flops: FlopCounts,
    pub comm_elements: u64,
    pub comm_bytes: u64,
    pub grad_comm_elements: u64,
    pub synced: bool,
    pub wall_ns: u64,
}

/// Per-iteration instrumentation of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub optimizer: String,
    pub d: usize,
    pub b: usize,
    pub workers: usize,
    pub memory_elements: u64,
    pub iterations: Vec<IterationCost>,
}

impl RunTrace {
    /// Iterations on which the optimizer synchronized.
    pub fn sync_events(&self) -> usize {
        self.iterations.iter().filter(|i| i.synced).count()
    }
}

/// Totals over the run; `wall_ms` is left empty unless `with_wall` is set,
/// which keeps reports bitwise reproducible by default.
pub fn measured_cost(trace: &RunTrace, with_wall: bool) -> CostReport {
    let mut r = CostReport::empty(&trace.optimizer, trace.d, trace.b);
    r.workers = trace.workers;
    r.iterations = trace.iterations.len() as u64;
    r.memory_elements = trace.memory_elements;
    let mut wall = 0u64;
    for it in &trace.iterations {
        r.flops_factor_update += it.flops.factor;
        r.flops_precondition += it.flops.precondition;
        r.flops_update += it.flops.update;
        r.flops_other += it.flops.other;
        r.comm_elements += it.comm_elements;
        r.comm_bytes += it.comm_bytes;
        r.grad_comm_elements += it.grad_comm_elements;
        wall += it.wall_ns;
    }
    if with_wall {
        r.wall_ms = Some(wall as f64 / 1e6);
    }
    r
}

#[derive(Debug, Serialize)]
struct CostRow<'a> {
    optimizer: &'a str,
    phase: &'a str,
    d: usize,
    b: usize,
    workers: usize,
    flops: u64,
    comm_elements: Option<u64>,
    comm_bytes: Option<u64>,
    memory_elements: Option<u64>,
    wall_ms: Option<f64>,
}

/// CSV with columns `optimizer,phase,d,b,workers,flops,comm_elements,
/// comm_bytes,memory_elements,wall_ms`: one row per phase with its flops,
/// then a `total` row carrying the run-level quantities.
pub fn write_cost_csv<W: Write>(out: W, reports: &[CostReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        for (phase, flops) in [
            ("factor", r.flops_factor_update),
            ("precondition", r.flops_precondition),
            ("update", r.flops_update),
            ("other", r.flops_other),
        ] {
            w.serialize(CostRow {
                optimizer: &r.optimizer,
                phase,
                d: r.d,
                b: r.b,
                workers: r.workers,
                flops,
                comm_elements: None,
                comm_bytes: None,
                memory_elements: None,
                wall_ms: None,
            })?;
        }
        w.serialize(CostRow {
            optimizer: &r.optimizer,
            phase: "total",
            d: r.d,
            b: r.b,
            workers: r.workers,
            flops: r.flops_factor_update + r.flops_precondition + r.flops_update + r.flops_other,
            comm_elements: Some(r.comm_elements),
            comm_bytes: Some(r.comm_bytes),
            memory_elements: Some(r.memory_elements),
            wall_ms: r.wall_ms,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Result of one simulated iteration.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub iter: u64,
    /// Mean of the workers' batch losses before the update.
    pub loss: f64,
    pub lr: f64,
    /// Worker 0's captures with the averaged gradients.
    pub captures: Vec<LayerCapture>,
    pub cost: IterationCost,
}

/// Logical data-parallel training: every worker holds a replica of the
/// network and the optimizer, computes captures on its own shard, and only
/// the optimizer's designated payload crosses the worker boundary. Workers
/// run sequentially and all reductions are in ascending worker order.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub nets: Vec<Network>,
    pub optimizers: Vec<Optimizer>,
    pub shards: Vec<Dataset>,
    pub batch_size: usize,
    pub loss: LossKind,
    pub trace: RunTrace,
    iter: u64,
}

impl Simulation {
    pub fn new(
        net: Network,
        optimizer: Optimizer,
        shards: Vec<Dataset>,
        batch_size: usize,
        loss: LossKind,
    ) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::InvalidArgument("simulation needs at least one shard".into()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        for s in &shards {
            if s.input_dim() != net.input_dim() || s.target_dim() != net.output_dim() {
                return Err(Error::dims("simulation", "shard shape does not match the network"));
            }
        }
        let workers = shards.len();
        let d = net
            .layers
            .iter()
            .map(|l| l.spec.in_dim.max(l.spec.out_dim))
            .max()
            .unwrap_or(0);
        let b = shards.iter().map(|s| batch_size.min(s.len())).max().unwrap_or(0);
        let trace = RunTrace {
            optimizer: optimizer.kind().name().to_string(),
            d,
            b,
            workers,
            memory_elements: optimizer.memory_elements(&net) as u64,
            iterations: Vec::new(),
        };
        Ok(Simulation {
            nets: vec![net; workers],
            optimizers: vec![optimizer; workers],
            shards,
            batch_size,
            loss,
            trace,
            iter: 0,
        })
    }

    pub fn workers(&self) -> usize {
        self.shards.len()
    }

    pub fn iteration(&self) -> u64 {
        self.iter
    }

    pub fn net(&self) -> &Network {
        &self.nets[0]
    }

    pub fn optimizer(&self) -> &Optimizer {
        &self.optimizers[0]
    }

    pub fn set_lr(&mut self, lr: f64) {
        for o in &mut self.optimizers {
            o.set_lr(lr);
        }
    }

    pub fn step(&mut self) -> Result<IterationOutcome> {
        let start = Instant::now();
        let before = flops::snapshot();
        let n = self.workers();
        let mut losses = Vec::with_capacity(n);
        let mut captures = Vec::with_capacity(n);
        for (net, shard) in self.nets.iter().zip(&self.shards) {
            let batch = shard.batch(self.iter, self.batch_size);
            let (loss, caps) = net.gradients(&batch.inputs, &batch.targets, self.loss)?;
            losses.push(loss);
            captures.push(caps);
        }
        let loss = losses.iter().sum::<f64>() / n as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        let grad_elements = average_gradients(&mut captures)?;
        for o in &mut self.optimizers {
            o.observe_loss(loss);
        }
        let mut payloads: Vec<SyncPayload> = Vec::with_capacity(n);
        for (o, caps) in self.optimizers.iter_mut().zip(&captures) {
            payloads.push(o.local_payload(caps)?);
        }
        let mut report = None;
        for ((o, net), caps) in self.optimizers.iter_mut().zip(self.nets.iter_mut()).zip(&captures) {
            let r = o.step(net, caps, &payloads)?;
            report.get_or_insert(r);
        }
        let report = report.unwrap_or_default();
        let mut cost = IterationCost {
            flops: flops::snapshot().since(&before),
            comm_elements: 0,
            comm_bytes: 0,
            grad_comm_elements: if n > 1 { grad_elements as u64 } else { 0 },
            synced: report.synced,
            wall_ns: 0,
        };
        if report.synced {
            let p = &payloads[0];
            let width = if p.half_precision {
                HALF_WORD_BYTES
            } else {
                MEASURED_WORD_BYTES
            };
            cost.comm_elements = (p.elements() + report.broadcast_elements) as u64;
            cost.comm_bytes = p.elements() as u64 * width + report.broadcast_elements as u64 * MEASURED_WORD_BYTES;
        }
        cost.wall_ns = start.elapsed().as_nanos() as u64;
        self.trace.iterations.push(cost);
        let outcome = IterationOutcome {
            iter: self.iter,
            loss,
            lr: self.optimizers[0].lr(),
            captures: captures.swap_remove(0),
            cost,
        };
        self.iter += 1;
        Ok(outcome)
    }

    /// True when every replica holds bitwise-identical weights.
    pub fn replicas_agree(&self) -> bool {
        self.nets.windows(2).all(|w| w[0] == w[1])
    }
}

/// Replaces every worker's gradients by the mean over workers. Returns the
/// number of gradient elements per worker.
fn average_gradients(captures: &mut [Vec<LayerCapture>]) -> Result<usize> {
    let n = captures.len();
    let layers = captures[0].len();
    let mut elements = 0;
    for l in 0..layers {
        let ws: Vec<_> = captures.iter().map(|c| &c[l].w_grad).collect();
        let w = mean_matrices(&ws)?;
        elements += w.len();
        let b = match captures[0][l].b_grad.as_ref() {
            Some(first) => {
                let bs: Vec<_> = captures
                    .iter()
                    .filter_map(|c| c[l].b_grad.as_ref().map(|b| b.to_matrix()))
                    .collect();
                let refs: Vec<_> = bs.iter().collect();
                elements += first.dim();
                Some(Vector::from_vec(mean_matrices(&refs)?.into_vec()))
            }
            None => None,
        };
        if n > 1 {
            for c in captures.iter_mut() {
                c[l].w_grad = w.clone();
                c[l].b_grad = b.clone();
            }
        }
    }
    Ok(elements)
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub loss_trace: Vec<f64>,
    pub cost: CostReport,
    pub trace: RunTrace,
    pub nets: Vec<Network>,
}

/// Runs `iters` iterations over the given shards (one per worker).
pub fn simulate_workers(
    net: Network,
    optimizer: Optimizer,
    shards: Vec<Dataset>,
    batch_size: usize,
    loss: LossKind,
    iters: u64,
) -> Result<SimResult> {
    let mut sim = Simulation::new(net, optimizer, shards, batch_size, loss)?;
    let mut loss_trace = Vec::with_capacity(iters as usize);
    for _ in 0..iters {
        loss_trace.push(sim.step()?.loss);
    }
    debug_assert!(sim.replicas_agree());
    Ok(SimResult {
        loss_trace,
        cost: measured_cost(&sim.trace, false),
        trace: sim.trace,
        nets: sim.nets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_rows() {
        assert_eq!(analytic_cost("mkor", 1024, 32).unwrap().comm_elements, 2048);
        assert_eq!(analytic_cost("mkor", 1024, 32).unwrap().comm_bytes, 4096);
        assert_eq!(analytic_cost("kfac", 1024, 32).unwrap().comm_elements, 4 * 1024 * 1024);
        assert_eq!(
            analytic_cost("sngd", 1024, 32).unwrap().comm_elements,
            2 * 32 * 1024 + 32 * 32
        );
        assert_eq!(analytic_cost("sgd", 8, 2).unwrap().comm_elements, 0);
        assert!(analytic_cost("shampoo", 8, 2).is_err());
    }

    #[test]
    fn cost_csv_header() {
        let mut buf = Vec::new();
        write_cost_csv(&mut buf, &[analytic_cost("mkor", 4, 2).unwrap()]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("optimizer,phase,d,b,workers,flops,comm_elements,comm_bytes,memory_elements,wall_ms\n"));
        assert!(s.contains("mkor,total,4,2,1,24,8,16,32,\n"));
    }
}
