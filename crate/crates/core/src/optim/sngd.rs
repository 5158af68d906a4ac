//! Natural gradient through the Woodbury identity on a `b × b` kernel.
//!
//! With per-sample gradients `u_i = vec(g_i a_iᵀ)` collected in `U`, the
//! damped inverse `(UUᵀ + μI)⁻¹` applied to `vec(∇W)` equals
//! `(1/μ)(I − U(K + μI)⁻¹Uᵀ)·vec(∇W)` where `K = AᵀA ⊙ GᵀG`.

use super::kfac::check_layers;
use super::sgd::SgdMomentum;
use super::{LayerSelection, LayerUpdate, StepReport, SyncPayload};
use crate::error::{Error, Result};
use crate::flops::{self, Phase};
use crate::linalg::{add_identity, direct_inverse, hadamard, matmul, matvec, scale, sub, transpose, Matrix, Vector};
use crate::net::{LayerCapture, Network};

/// Largest batch accepted by the kernel solve.
pub const SNGD_MAX_BATCH: usize = 64;

/// Woodbury-preconditioned gradient from activations `a` (`in × b`),
/// pre-activation gradients `g` (`out × b`) and the gradient `w_grad`.
pub fn sngd_direction(a: &Matrix, g: &Matrix, w_grad: &Matrix, damping: f64) -> Result<Matrix> {
    let b = a.cols();
    if g.cols() != b || w_grad.shape() != (g.rows(), a.rows()) {
        return Err(Error::dims(
            "sngd",
            "activations, gradients and weight gradient disagree",
        ));
    }
    if b > SNGD_MAX_BATCH {
        return Err(Error::InvalidArgument(format!(
            "sngd kernel batch {b} exceeds {SNGD_MAX_BATCH}"
        )));
    }
    if !(damping > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sngd damping {damping} must be positive"
        )));
    }
    let (kernel_inv, y) = {
        let _phase = flops::enter(Phase::Factor);
        let at = transpose(a);
        let k = hadamard(&matmul(&at, a)?, &matmul(&transpose(g), g)?)?;
        let kernel_inv = direct_inverse(&add_identity(&k, damping)?)?;
        // y_i = g_iᵀ ∇W a_i
        let gw = matmul(&transpose(g), w_grad)?;
        let y: Vec<f64> = (0..b)
            .map(|i| gw.row(i).iter().zip(at.row(i)).map(|(x, y)| x * y).sum())
            .collect();
        flops::add(2 * (b * a.rows()) as u64);
        (kernel_inv, Vector::from_vec(y))
    };
    let _phase = flops::enter(Phase::Precondition);
    let z = matvec(&kernel_inv, &y)?;
    let mut gz = g.clone();
    for r in 0..gz.rows() {
        for (x, &zi) in gz.row_mut(r).iter_mut().zip(z.as_slice()) {
            *x *= zi;
        }
    }
    let correction = matmul(&gz, &transpose(a))?;
    Ok(scale(&sub(w_grad, &correction)?, 1.0 / damping))
}

/// Per-layer Woodbury directions computed from each capture's own batch.
pub fn sngd_precondition(captures: &[LayerCapture], damping: f64) -> Result<Vec<Matrix>> {
    captures
        .iter()
        .map(|c| sngd_direction(&c.a_prev, &c.g, &c.w_grad, damping))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SngdConfig {
    pub damping: f64,
    pub lr: f64,
    pub momentum: f64,
    pub second_order_layers: LayerSelection,
}

impl Default for SngdConfig {
    fn default() -> Self {
        SngdConfig {
            damping: 1.0,
            lr: 0.1,
            momentum: 0.9,
            second_order_layers: LayerSelection::All,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sngd {
    pub config: SngdConfig,
    backend: SgdMomentum,
}

impl Sngd {
    pub fn new(config: SngdConfig) -> Result<Self> {
        if !(config.damping > 0.0 && config.lr > 0.0) {
            return Err(Error::Config("sngd damping and lr must be positive".into()));
        }
        let backend = SgdMomentum::new(config.lr, config.momentum);
        Ok(Sngd { config, backend })
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
        self.backend.lr = lr;
    }

    /// Local activations and gradients of every second-order layer; the
    /// workers' batches are concatenated into one kernel.
    pub fn local_payload(&self, captures: &[LayerCapture]) -> SyncPayload {
        let mut payload = SyncPayload::default();
        for (i, c) in captures.iter().enumerate() {
            if self.config.second_order_layers.contains(i) {
                payload.matrices.push(c.a_prev.clone());
                payload.matrices.push(c.g.clone());
            }
        }
        payload
    }

    pub fn step(
        &mut self,
        net: &mut Network,
        captures: &[LayerCapture],
        payloads: &[SyncPayload],
    ) -> Result<StepReport> {
        check_layers(captures.len(), net.layers.len())?;
        let mut report = StepReport {
            synced: true,
            second_order: true,
            ..StepReport::default()
        };
        let mut updates = Vec::with_capacity(captures.len());
        let mut k = 0;
        for (i, c) in captures.iter().enumerate() {
            let weight = if self.config.second_order_layers.contains(i) {
                let a = concat_columns(payloads.iter().map(|p| &p.matrices[k]))?;
                let g = concat_columns(payloads.iter().map(|p| &p.matrices[k + 1]))?;
                k += 2;
                report.broadcast_elements += a.cols() * a.cols();
                sngd_direction(&a, &g, &c.w_grad, self.config.damping)?
            } else {
                c.w_grad.clone()
            };
            updates.push(LayerUpdate {
                weight,
                bias: c.b_grad.clone(),
            });
        }
        if updates.iter().any(|u| !u.weight.is_finite()) {
            return Err(Error::NonFinite("sngd preconditioning"));
        }
        self.backend.apply(net, &updates)?;
        Ok(report)
    }
}

fn concat_columns<'a>(parts: impl Iterator<Item = &'a Matrix>) -> Result<Matrix> {
    let parts: Vec<&Matrix> = parts.collect();
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("no worker payloads".into()))?;
    if parts.len() == 1 {
        return Ok((*first).clone());
    }
    let rows = first.rows();
    if parts.iter().any(|p| p.rows() != rows) {
        return Err(Error::dims("sngd gather", "row counts differ across workers"));
    }
    let cols: usize = parts.iter().map(|p| p.cols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut offset = 0;
    for p in parts {
        for r in 0..rows {
            out.row_mut(r)[offset..offset + p.cols()].copy_from_slice(p.row(r));
        }
        offset += p.cols();
    }
    Ok(out)
}
