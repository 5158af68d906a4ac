//! KFAC with momentum-averaged covariance factors and periodic explicit
//! inversion.

use super::sgd::SgdMomentum;
use super::{mean_matrices, LayerSelection, LayerUpdate, Period, StepReport, SyncPayload};
use crate::error::{Error, Result};
use crate::flops::{self, Phase};
use crate::linalg::{add_identity, direct_inverse, lincomb, matmul, matmul_transpose_b, scale, Matrix};
use crate::net::{LayerCapture, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct KfacConfig {
    /// Factor momentum.
    pub gamma: f64,
    /// Damping `μ` added to both factors before inversion.
    pub damping: f64,
    pub inversion_period: Period,
    pub lr: f64,
    /// Heavy-ball momentum of the backend update.
    pub momentum: f64,
    pub second_order_layers: LayerSelection,
}

impl Default for KfacConfig {
    fn default() -> Self {
        KfacConfig {
            gamma: 0.95,
            damping: 1e-3,
            inversion_period: Period::Every(100),
            lr: 0.01,
            momentum: 0.9,
            second_order_layers: LayerSelection::All,
        }
    }
}

impl KfacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("kfac gamma {} outside (0, 1)", self.gamma)));
        }
        if !(self.damping > 0.0) {
            return Err(Error::Config(format!("kfac damping {} must be positive", self.damping)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("kfac lr {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// Running factors and their cached damped inverses. Factors start at the
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub struct KfacState {
    /// Output-side factor, `out_dim × out_dim`.
    pub l: Matrix,
    /// Input-side factor, `in_dim × in_dim`.
    pub r: Matrix,
    pub l_inv: Matrix,
    pub r_inv: Matrix,
}

impl KfacState {
    pub fn new(in_dim: usize, out_dim: usize, damping: f64) -> Self {
        KfacState {
            l: Matrix::identity(out_dim),
            r: Matrix::identity(in_dim),
            l_inv: scale(&Matrix::identity(out_dim), 1.0 / (1.0 + damping)),
            r_inv: scale(&Matrix::identity(in_dim), 1.0 / (1.0 + damping)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Kfac {
    pub config: KfacConfig,
    pub states: Vec<Option<KfacState>>,
    backend: SgdMomentum,
    iter: u64,
}

impl Kfac {
    pub fn new(config: KfacConfig, net: &Network) -> Result<Self> {
        config.validate()?;
        let states = net
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                config
                    .second_order_layers
                    .contains(i)
                    .then(|| KfacState::new(l.spec.in_dim, l.spec.out_dim, config.damping))
            })
            .collect();
        let backend = SgdMomentum::new(config.lr, config.momentum);
        Ok(Kfac {
            config,
            states,
            backend,
            iter: 0,
        })
    }

    pub fn iteration(&self) -> u64 {
        self.iter
    }

    pub fn is_inversion_iteration(&self) -> bool {
        self.config.inversion_period.fires(self.iter)
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
        self.backend.lr = lr;
    }

    /// Folds this iteration's covariances into the local factors. On
    /// inversion iterations the factors are returned for averaging.
    pub fn local_payload(&mut self, captures: &[LayerCapture]) -> Result<SyncPayload> {
        check_layers(captures.len(), self.states.len())?;
        let _phase = flops::enter(Phase::Factor);
        let gamma = self.config.gamma;
        let sync = self.is_inversion_iteration();
        let mut payload = SyncPayload::default();
        for (st, cap) in self.states.iter_mut().zip(captures) {
            let Some(st) = st else { continue };
            let b = cap.batch() as f64;
            let gg = scale(&matmul_transpose_b(&cap.g, &cap.g)?, 1.0 / b);
            let aa = scale(&matmul_transpose_b(&cap.a_prev, &cap.a_prev)?, 1.0 / b);
            st.l = lincomb(gamma, &st.l, 1.0 - gamma, &gg)?;
            st.r = lincomb(gamma, &st.r, 1.0 - gamma, &aa)?;
            if sync {
                payload.matrices.push(st.l.clone());
                payload.matrices.push(st.r.clone());
            }
        }
        Ok(payload)
    }

    /// `L⁻¹·∇W·R⁻¹` with the cached inverses; raw gradients elsewhere.
    pub fn preconditioned(&self, captures: &[LayerCapture]) -> Result<Vec<LayerUpdate>> {
        check_layers(captures.len(), self.states.len())?;
        let _phase = flops::enter(Phase::Precondition);
        let mut updates = Vec::with_capacity(captures.len());
        for (st, cap) in self.states.iter().zip(captures) {
            let weight = match st {
                Some(st) => matmul(&matmul(&st.l_inv, &cap.w_grad)?, &st.r_inv)?,
                None => cap.w_grad.clone(),
            };
            updates.push(LayerUpdate {
                weight,
                bias: cap.b_grad.clone(),
            });
        }
        Ok(updates)
    }

    /// `payloads` holds every worker's [`Kfac::local_payload`] in worker
    /// order.
    pub fn step(
        &mut self,
        net: &mut Network,
        captures: &[LayerCapture],
        payloads: &[SyncPayload],
    ) -> Result<StepReport> {
        check_layers(captures.len(), self.states.len())?;
        let mut report = StepReport::default();
        if self.is_inversion_iteration() {
            let _phase = flops::enter(Phase::Factor);
            let mu = self.config.damping;
            let mut k = 0;
            for st in self.states.iter_mut().flatten() {
                let ls: Vec<&Matrix> = payloads.iter().map(|p| &p.matrices[k]).collect();
                let rs: Vec<&Matrix> = payloads.iter().map(|p| &p.matrices[k + 1]).collect();
                k += 2;
                st.l = mean_matrices(&ls)?;
                st.r = mean_matrices(&rs)?;
                st.l_inv = direct_inverse(&add_identity(&st.l, mu)?)?;
                st.r_inv = direct_inverse(&add_identity(&st.r, mu)?)?;
                report.broadcast_elements += st.l_inv.len() + st.r_inv.len();
            }
            report.synced = true;
        }
        let updates = self.preconditioned(captures)?;
        if updates.iter().any(|u| !u.weight.is_finite()) {
            return Err(Error::NonFinite("kfac preconditioning"));
        }
        self.backend.apply(net, &updates)?;
        self.iter += 1;
        report.second_order = true;
        Ok(report)
    }
}

pub(crate) fn check_layers(captures: usize, states: usize) -> Result<()> {
    if captures != states {
        return Err(Error::dims(
            "optimizer",
            format!("{captures} captures for {states} layers"),
        ));
    }
    Ok(())
}

/// Single-process KFAC iteration.
pub fn kfac_step(net: &mut Network, captures: &[LayerCapture], kfac: &mut Kfac) -> Result<StepReport> {
    let payload = kfac.local_payload(captures)?;
    kfac.step(net, captures, std::slice::from_ref(&payload))
}
