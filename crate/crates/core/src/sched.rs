//! Learning-rate schedules.

use crate::error::{Error, Result};

/// Default epoch milestones of the step schedule.
pub const DEFAULT_MILESTONES: [u64; 7] = [25, 35, 40, 45, 50, 55, 56];

/// `base_lr · factor^k` where `k` counts milestones `≤ epoch`.
pub fn step_decay(base_lr: f64, epoch: u64, milestones: &[u64], factor: f64) -> f64 {
    let k = milestones.iter().filter(|&&m| epoch >= m).count();
    base_lr * factor.powi(k as i32)
}

/// Decays the learning rate when the smoothed per-iteration loss decrease
/// drops below `beta` times the mean decrease since the current rate was
/// set.
#[derive(Debug, Clone, PartialEq)]
pub struct KneePointState {
    pub beta: f64,
    pub ema_rate: f64,
    /// Mean per-iteration decrease since the current lr was set.
    pub baseline_gain: f64,
    pub lr: f64,
    pub decay_factor: f64,
    pub ema_decay: f64,
    /// Minimum number of iterations between two decays.
    pub hysteresis: u64,
    prev: Option<f64>,
    anchor: Option<f64>,
    since_anchor: u64,
    seen: u64,
    /// Iterations (metric indices) at which the rate was decayed.
    pub events: Vec<u64>,
}

impl KneePointState {
    pub fn new(lr: f64, beta: f64, decay_factor: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Config(format!("knee beta {beta} outside (0, 1)")));
        }
        if !(decay_factor > 0.0 && decay_factor < 1.0) {
            return Err(Error::Config(format!(
                "knee decay_factor {decay_factor} outside (0, 1)"
            )));
        }
        if !(lr > 0.0) {
            return Err(Error::Config(format!("knee lr {lr} must be positive")));
        }
        Ok(KneePointState {
            beta,
            ema_rate: 0.0,
            baseline_gain: 0.0,
            lr,
            decay_factor,
            ema_decay: 0.9,
            hysteresis: 10,
            prev: None,
            anchor: None,
            since_anchor: 0,
            seen: 0,
            events: Vec::new(),
        })
    }

    /// Feeds one loss value and returns the learning rate to use next.
    pub fn update(&mut self, metric: f64) -> f64 {
        let index = self.seen;
        self.seen += 1;
        let Some(prev) = self.prev.replace(metric) else {
            self.anchor = Some(metric);
            return self.lr;
        };
        let decrease = prev - metric;
        self.ema_rate = if index == 1 {
            decrease
        } else {
            self.ema_decay * self.ema_rate + (1.0 - self.ema_decay) * decrease
        };
        self.since_anchor += 1;
        let anchor = self.anchor.unwrap_or(prev);
        self.baseline_gain = (anchor - metric) / self.since_anchor as f64;
        if self.since_anchor >= self.hysteresis
            && self.baseline_gain > 0.0
            && self.ema_rate < self.beta * self.baseline_gain
        {
            self.lr *= self.decay_factor;
            self.anchor = Some(metric);
            self.since_anchor = 0;
            self.events.push(index);
            log::info!("knee point at iteration {index}: lr -> {}", self.lr);
        }
        self.lr
    }
}

pub fn knee_point_update(state: &mut KneePointState, metric: f64) -> f64 {
    state.update(metric)
}

/// Learning-rate policy of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Scheduler {
    Constant(f64),
    StepDecay {
        base_lr: f64,
        milestones: Vec<u64>,
        factor: f64,
        iters_per_epoch: u64,
    },
    Knee(KneePointState),
}

impl Scheduler {
    /// Learning rate for iteration `iter` after observing `loss`.
    pub fn next_lr(&mut self, iter: u64, loss: f64) -> f64 {
        match self {
            Scheduler::Constant(lr) => *lr,
            Scheduler::StepDecay {
                base_lr,
                milestones,
                factor,
                iters_per_epoch,
            } => step_decay(*base_lr, iter / (*iters_per_epoch).max(1), milestones, *factor),
            Scheduler::Knee(k) => k.update(loss),
        }
    }
}
