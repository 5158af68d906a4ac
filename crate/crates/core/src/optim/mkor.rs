//! MKOR: rank-1 factor statistics, Sherman-Morrison factor-inverse updates,
//! norm-based stabilization and norm-matched preconditioned steps.

use super::factor::{allreduce_rank1, precondition, rank1_reduce, rescale, stabilize, FactorState, SmFormula};
use super::hybrid::HybridState;
use super::kfac::check_layers;
use super::sgd::SgdMomentum;
use super::{LayerSelection, LayerUpdate, Period, StepReport, SyncPayload};
use crate::error::{Error, Result};
use crate::flops::{self, Phase};
use crate::linalg::Vector;
use crate::net::{LayerCapture, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct MkorConfig {
    /// Factor momentum `γ` in (0, 1).
    pub gamma: f64,
    /// Stabilizer blend `ζ` in (0, 1].
    pub zeta: f64,
    /// Infinity-norm threshold that triggers the stabilizer.
    pub epsilon_norm: f64,
    /// Period of the factor-inverse updates.
    pub inversion_period: Period,
    pub lr: f64,
    /// Heavy-ball momentum of the backend update.
    pub momentum: f64,
    pub second_order_layers: LayerSelection,
    /// Round the synchronized vectors through binary16.
    pub half_precision_comm: bool,
    pub sm_formula: SmFormula,
}

impl Default for MkorConfig {
    fn default() -> Self {
        MkorConfig {
            gamma: 0.9,
            zeta: 0.95,
            epsilon_norm: 100.0,
            inversion_period: Period::Every(10),
            lr: 0.01,
            momentum: 0.9,
            second_order_layers: LayerSelection::All,
            half_precision_comm: false,
            sm_formula: SmFormula::Mkor,
        }
    }
}

impl MkorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("mkor gamma {} outside (0, 1)", self.gamma)));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::Config(format!("mkor zeta {} outside (0, 1]", self.zeta)));
        }
        if !(self.epsilon_norm > 0.0) {
            return Err(Error::Config(format!(
                "mkor epsilon_norm {} must be positive",
                self.epsilon_norm
            )));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("mkor lr {} must be positive", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Mkor {
    pub config: MkorConfig,
    /// One state per second-order layer, `None` elsewhere.
    pub states: Vec<Option<FactorState>>,
    /// Present for the hybrid variant.
    pub hybrid: Option<HybridState>,
    backend: SgdMomentum,
    iter: u64,
}

impl Mkor {
    pub fn new(config: MkorConfig, net: &Network) -> Result<Self> {
        config.validate()?;
        let states = net
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                config
                    .second_order_layers
                    .contains(i)
                    .then(|| FactorState::new(l.spec.in_dim, l.spec.out_dim))
            })
            .collect();
        let backend = SgdMomentum::new(config.lr, config.momentum);
        Ok(Mkor {
            config,
            states,
            hybrid: None,
            backend,
            iter: 0,
        })
    }

    /// MKOR-H: falls back to the backend once the loss stagnates.
    pub fn hybrid(config: MkorConfig, net: &Network, state: HybridState) -> Result<Self> {
        let mut m = Mkor::new(config, net)?;
        m.hybrid = Some(state);
        Ok(m)
    }

    pub fn iteration(&self) -> u64 {
        self.iter
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
        self.backend.lr = lr;
    }

    pub fn observe_loss(&mut self, loss: f64) {
        if let Some(h) = self.hybrid.as_mut() {
            h.observe(loss);
        }
    }

    pub fn is_first_order(&self) -> bool {
        self.hybrid.as_ref().is_some_and(|h| h.is_first_order())
    }

    /// True when this iteration refreshes the factor inverses.
    pub fn is_update_iteration(&self) -> bool {
        !self.is_first_order() && self.config.inversion_period.fires(self.iter)
    }

    /// Rank-1 statistics `(a_bar, g_bar)` of every second-order layer, or
    /// nothing on iterations without a factor update.
    pub fn local_payload(&self, captures: &[LayerCapture]) -> Result<SyncPayload> {
        check_layers(captures.len(), self.states.len())?;
        let mut payload = SyncPayload {
            half_precision: self.config.half_precision_comm,
            ..SyncPayload::default()
        };
        if !self.is_update_iteration() {
            return Ok(payload);
        }
        let _phase = flops::enter(Phase::Factor);
        for (st, cap) in self.states.iter().zip(captures) {
            if st.is_some() {
                let (a, g) = rank1_reduce(cap);
                payload.vectors.push(a);
                payload.vectors.push(g);
            }
        }
        Ok(payload)
    }

    /// Synchronizes the payloads of all workers (ascending worker order),
    /// refreshes the factor inverses when due, and applies the update.
    pub fn step(
        &mut self,
        net: &mut Network,
        captures: &[LayerCapture],
        payloads: &[SyncPayload],
    ) -> Result<StepReport> {
        check_layers(captures.len(), self.states.len())?;
        let mut report = StepReport::default();
        if self.is_first_order() {
            let updates = super::sgd::gradient_updates(captures);
            self.backend.apply(net, &updates)?;
            self.iter += 1;
            return Ok(report);
        }
        if self.is_update_iteration() {
            let _phase = flops::enter(Phase::Factor);
            let mut k = 0;
            for st in self.states.iter_mut().flatten() {
                let pairs: Vec<(Vector, Vector)> = payloads
                    .iter()
                    .map(|p| (p.vectors[k].clone(), p.vectors[k + 1].clone()))
                    .collect();
                k += 2;
                let (a, g) = allreduce_rank1(&pairs, self.config.half_precision_comm)?;
                update_factors(st, a, g, &self.config)?;
            }
            report.synced = true;
        }
        let updates = self.preconditioned(captures)?;
        self.backend.apply(net, &updates)?;
        self.iter += 1;
        report.second_order = true;
        Ok(report)
    }

    /// Rescaled `L⁻¹·∇W·R⁻¹` for second-order layers, raw gradients
    /// elsewhere. Biases always take their raw gradient.
    pub fn preconditioned(&self, captures: &[LayerCapture]) -> Result<Vec<LayerUpdate>> {
        check_layers(captures.len(), self.states.len())?;
        let _phase = flops::enter(Phase::Precondition);
        let mut updates = Vec::with_capacity(captures.len());
        for (st, cap) in self.states.iter().zip(captures) {
            let weight = match st {
                Some(st) => {
                    let delta_hat = precondition(&st.l_inv, &cap.w_grad, &st.r_inv)?;
                    rescale(&delta_hat, &cap.w_grad)?
                }
                None => cap.w_grad.clone(),
            };
            if !weight.is_finite() {
                return Err(Error::NonFinite("mkor preconditioning"));
            }
            updates.push(LayerUpdate {
                weight,
                bias: cap.b_grad.clone(),
            });
        }
        Ok(updates)
    }
}

/// Stabilize, then apply the rank-1 inverse update to both factors.
pub fn update_factors(st: &mut FactorState, a: Vector, g: Vector, config: &MkorConfig) -> Result<()> {
    let l_hat = stabilize(&st.l_inv, config.epsilon_norm, config.zeta)?;
    let r_hat = stabilize(&st.r_inv, config.epsilon_norm, config.zeta)?;
    let l_inv = config.sm_formula.apply(&l_hat, &g, config.gamma)?;
    let r_inv = config.sm_formula.apply(&r_hat, &a, config.gamma)?;
    if !l_inv.is_finite() || !r_inv.is_finite() {
        return Err(Error::NonFinite("mkor factor update"));
    }
    st.l_inv = l_inv;
    st.r_inv = r_inv;
    st.a_bar = a;
    st.g_bar = g;
    st.iter += 1;
    Ok(())
}

/// Single-process MKOR iteration.
pub fn mkor_step(net: &mut Network, captures: &[LayerCapture], mkor: &mut Mkor) -> Result<StepReport> {
    let payload = mkor.local_payload(captures)?;
    mkor.step(net, captures, std::slice::from_ref(&payload))
}
