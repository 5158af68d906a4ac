//! Optimizers operating on [`LayerCapture`]s.
//!
//! Every optimizer follows the same two-phase protocol so that the worker
//! simulator in [`crate::comm`] can sit between the phases:
//!
//! 1. [`Optimizer::local_payload`] returns what this worker contributes to
//!    the synchronization (possibly nothing).
//! 2. [`Optimizer::step`] receives the payloads of all workers in ascending
//!    worker order, reduces them, and applies the update.
//!
//! A single process calls [`Optimizer::step_local`], which feeds its own
//! payload back as the only one.

pub mod factor;
pub mod fp16;
pub mod hybrid;
pub mod kfac;
pub mod mkor;
pub mod sgd;
pub mod sngd;

pub use factor::{
    allreduce_mean, allreduce_rank1, precondition, rank1_reduce, rescale, sm_update, sm_update_exact, stabilize,
    FactorState, SmFormula,
};
pub use fp16::{fp16_roundtrip, round_f16};
pub use hybrid::{mkorh_maybe_switch, HybridMode, HybridState};
pub use kfac::{kfac_step, Kfac, KfacConfig, KfacState};
pub use mkor::{mkor_step, Mkor, MkorConfig};
pub use sgd::{gradient_updates, sgd_momentum_step, SgdMomentum};
pub use sngd::{sngd_direction, sngd_precondition, Sngd, SngdConfig, SNGD_MAX_BATCH};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::net::{LayerCapture, Network};
use serde::Serialize;
use std::fmt;

/// Step applied to one layer: `W ← W − lr·weight` (through the backend).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerUpdate {
    pub weight: Matrix,
    pub bias: Option<Vector>,
}

/// How often a periodic factor computation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Period {
    /// On iterations where `iter % n == 0`; `n ≥ 1`.
    Every(u64),
    Never,
}

impl Period {
    pub fn fires(self, iter: u64) -> bool {
        match self {
            Period::Every(n) => iter.is_multiple_of(n.max(1)),
            Period::Never => false,
        }
    }

    /// Accepts a positive integer, or `inf` / `never`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inf" | "never" => Some(Period::Never),
            _ => s.parse::<u64>().ok().filter(|&n| n > 0).map(Period::Every),
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Every(n) => write!(f, "{n}"),
            Period::Never => f.write_str("inf"),
        }
    }
}

/// Layers that receive second-order updates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LayerSelection {
    #[default]
    All,
    Only(Vec<usize>),
}

impl LayerSelection {
    pub fn contains(&self, layer: usize) -> bool {
        match self {
            LayerSelection::All => true,
            LayerSelection::Only(v) => v.contains(&layer),
        }
    }

    /// `all`, or a comma-separated list of layer indices.
    pub fn parse(s: &str) -> Option<Self> {
        if s == "all" {
            return Some(LayerSelection::All);
        }
        let idx: std::result::Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse()).collect();
        idx.ok().map(LayerSelection::Only)
    }
}

impl fmt::Display for LayerSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSelection::All => f.write_str("all"),
            LayerSelection::Only(v) => {
                let parts: Vec<String> = v.iter().map(|i| i.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

/// Data one worker contributes to a synchronization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SyncPayload {
    pub vectors: Vec<Vector>,
    pub matrices: Vec<Matrix>,
    /// Elements travel as binary16.
    pub half_precision: bool,
}

impl SyncPayload {
    pub fn elements(&self) -> usize {
        self.vectors.iter().map(|v| v.dim()).sum::<usize>() + self.matrices.iter().map(|m| m.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty() && self.matrices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepReport {
    /// The payloads were reduced on this iteration.
    pub synced: bool,
    /// Elements sent back from a root after the reduction (cached inverses,
    /// kernel inverse).
    pub broadcast_elements: usize,
    /// A preconditioned update was applied.
    pub second_order: bool,
}

/// Mean of equally-shaped matrices, summed in the given order.
pub fn mean_matrices(ms: &[&Matrix]) -> Result<Matrix> {
    let first = ms
        .first()
        .ok_or_else(|| Error::InvalidArgument("mean over zero matrices".into()))?;
    if ms.len() == 1 {
        return Ok((*first).clone());
    }
    let mut sum = Matrix::zeros(first.rows(), first.cols());
    for m in ms {
        crate::linalg::axpy_in_place(&mut sum, 1.0, m)?;
    }
    Ok(crate::linalg::scale(&sum, 1.0 / ms.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Mkor,
    MkorH,
    Kfac,
    Sngd,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::Sgd,
        OptimizerKind::Mkor,
        OptimizerKind::MkorH,
        OptimizerKind::Kfac,
        OptimizerKind::Sngd,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "sgd" => OptimizerKind::Sgd,
            "mkor" => OptimizerKind::Mkor,
            "mkor-h" | "mkorh" | "mkor_h" => OptimizerKind::MkorH,
            "kfac" => OptimizerKind::Kfac,
            "sngd" => OptimizerKind::Sngd,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Mkor => "mkor",
            OptimizerKind::MkorH => "mkor-h",
            OptimizerKind::Kfac => "kfac",
            OptimizerKind::Sngd => "sngd",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd(SgdMomentum),
    /// MKOR, or MKOR-H when its hybrid state is set.
    Mkor(Box<Mkor>),
    Kfac(Box<Kfac>),
    Sngd(Sngd),
}

impl Optimizer {
    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Sgd(_) => OptimizerKind::Sgd,
            Optimizer::Mkor(m) if m.hybrid.is_some() => OptimizerKind::MkorH,
            Optimizer::Mkor(_) => OptimizerKind::Mkor,
            Optimizer::Kfac(_) => OptimizerKind::Kfac,
            Optimizer::Sngd(_) => OptimizerKind::Sngd,
        }
    }

    pub fn lr(&self) -> f64 {
        match self {
            Optimizer::Sgd(s) => s.lr,
            Optimizer::Mkor(m) => m.config.lr,
            Optimizer::Kfac(k) => k.config.lr,
            Optimizer::Sngd(s) => s.config.lr,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        match self {
            Optimizer::Sgd(s) => s.lr = lr,
            Optimizer::Mkor(m) => m.set_lr(lr),
            Optimizer::Kfac(k) => k.set_lr(lr),
            Optimizer::Sngd(s) => s.set_lr(lr),
        }
    }

    /// Feeds the current loss to loss-driven switches (MKOR-H).
    pub fn observe_loss(&mut self, loss: f64) {
        if let Optimizer::Mkor(m) = self {
            m.observe_loss(loss);
        }
    }

    pub fn local_payload(&mut self, captures: &[LayerCapture]) -> Result<SyncPayload> {
        match self {
            Optimizer::Sgd(_) => Ok(SyncPayload::default()),
            Optimizer::Mkor(m) => m.local_payload(captures),
            Optimizer::Kfac(k) => k.local_payload(captures),
            Optimizer::Sngd(s) => Ok(s.local_payload(captures)),
        }
    }

    pub fn step(
        &mut self,
        net: &mut Network,
        captures: &[LayerCapture],
        payloads: &[SyncPayload],
    ) -> Result<StepReport> {
        match self {
            Optimizer::Sgd(s) => {
                s.apply(net, &gradient_updates(captures))?;
                Ok(StepReport::default())
            }
            Optimizer::Mkor(m) => m.step(net, captures, payloads),
            Optimizer::Kfac(k) => k.step(net, captures, payloads),
            Optimizer::Sngd(s) => s.step(net, captures, payloads),
        }
    }

    pub fn step_local(&mut self, net: &mut Network, captures: &[LayerCapture]) -> Result<StepReport> {
        let payload = self.local_payload(captures)?;
        self.step(net, captures, std::slice::from_ref(&payload))
    }

    /// Elements of optimizer state beyond the weights themselves, counting
    /// the backend velocity.
    pub fn memory_elements(&self, net: &Network) -> usize {
        let weights: usize = net
            .layers
            .iter()
            .map(|l| l.weight.len() + l.bias.as_ref().map_or(0, |b| b.dim()))
            .sum();
        match self {
            Optimizer::Sgd(_) => weights,
            Optimizer::Mkor(m) => {
                weights
                    + m.states
                        .iter()
                        .flatten()
                        .map(|s| s.l_inv.len() + s.r_inv.len() + s.a_bar.dim() + s.g_bar.dim())
                        .sum::<usize>()
            }
            Optimizer::Kfac(k) => {
                weights
                    + k.states
                        .iter()
                        .flatten()
                        .map(|s| s.l.len() + s.r.len() + s.l_inv.len() + s.r_inv.len())
                        .sum::<usize>()
            }
            Optimizer::Sngd(_) => weights,
        }
    }
}
