//! Loss-decrease-rate switch from second- to first-order updates.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridMode {
    SecondOrder,
    FirstOrder,
}

/// Tracks an EMA of the per-iteration loss decrease and compares it with
/// the mean decrease over the first `window` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub mode: HybridMode,
    pub loss_ema: f64,
    pub loss_ema_decay: f64,
    pub switch_ratio: f64,
    pub window: usize,
    prev_loss: Option<f64>,
    observed: usize,
    first_window_sum: f64,
    /// Iteration (count of observed losses minus one) when the switch fired.
    pub switched_at: Option<usize>,
}

impl HybridState {
    pub fn new(window: usize, switch_ratio: f64, loss_ema_decay: f64) -> Self {
        assert!(window > 0, "window must be positive");
        HybridState {
            mode: HybridMode::SecondOrder,
            loss_ema: 0.0,
            loss_ema_decay,
            switch_ratio,
            window,
            prev_loss: None,
            observed: 0,
            first_window_sum: 0.0,
            switched_at: None,
        }
    }

    /// Mean decrease over the first `window` decreases, once available.
    pub fn reference(&self) -> Option<f64> {
        (self.observed >= self.window).then(|| self.first_window_sum / self.window as f64)
    }

    pub fn is_first_order(&self) -> bool {
        self.mode == HybridMode::FirstOrder
    }

    /// Feeds the loss of the current iteration; returns the mode that the
    /// next update should use.
    pub fn observe(&mut self, loss: f64) -> HybridMode {
        if self.mode == HybridMode::FirstOrder {
            return self.mode;
        }
        let index = self.observed;
        if let Some(prev) = self.prev_loss {
            let decrease = prev - loss;
            self.observed += 1;
            self.loss_ema = if self.observed == 1 {
                decrease
            } else {
                self.loss_ema_decay * self.loss_ema + (1.0 - self.loss_ema_decay) * decrease
            };
            if self.observed <= self.window {
                self.first_window_sum += decrease;
            } else {
                let reference = self.first_window_sum / self.window as f64;
                // No decrease at all during the reference window means the
                // second-order phase has nothing to offer.
                let ratio = if reference > 0.0 {
                    self.loss_ema / reference
                } else {
                    f64::NEG_INFINITY
                };
                if !(ratio >= self.switch_ratio) {
                    log::info!("switching to first-order updates after {} iterations", index + 1);
                    self.mode = HybridMode::FirstOrder;
                    self.switched_at = Some(index + 1);
                }
            }
        }
        self.prev_loss = Some(loss);
        self.mode
    }
}

impl Default for HybridState {
    fn default() -> Self {
        HybridState::new(50, 0.1, 0.9)
    }
}

pub fn mkorh_maybe_switch(mut state: HybridState, loss: f64) -> HybridState {
    state.observe(loss);
    state
}
