//! Heavy-ball SGD, used directly and as the backend of the preconditioned
//! optimizers.

use super::LayerUpdate;
use crate::error::{Error, Result};
use crate::flops::{self, Phase};
use crate::linalg::{axpy_in_place, axpy_vec_in_place, Matrix, Vector};
use crate::net::{LayerCapture, Network};

/// `v ← μ·v + ΔW`, `W ← W − lr·v`, with zero-initialized velocity.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Option<(Matrix, Option<Vector>)>>,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64) -> Self {
        SgdMomentum {
            lr,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn apply(&mut self, net: &mut Network, updates: &[LayerUpdate]) -> Result<()> {
        if updates.len() != net.layers.len() {
            return Err(Error::dims(
                "sgd",
                format!("{} updates for {} layers", updates.len(), net.layers.len()),
            ));
        }
        let _phase = flops::enter(Phase::Update);
        self.velocity.resize(net.layers.len(), None);
        let mu = self.momentum;
        for ((layer, up), vel) in net.layers.iter_mut().zip(updates).zip(self.velocity.iter_mut()) {
            if up.weight.shape() != layer.weight.shape() {
                return Err(Error::dims("sgd", "update shape differs from weight"));
            }
            let (vw, vb) = vel.get_or_insert_with(|| {
                (
                    Matrix::zeros(up.weight.rows(), up.weight.cols()),
                    layer.bias.as_ref().map(|b| Vector::zeros(b.dim())),
                )
            });
            heavy_ball(vw.as_mut_slice(), up.weight.as_slice(), mu);
            axpy_in_place(&mut layer.weight, -self.lr, vw)?;
            if let (Some(bias), Some(vb), Some(db)) = (layer.bias.as_mut(), vb.as_mut(), up.bias.as_ref()) {
                if db.dim() != bias.dim() {
                    return Err(Error::dims("sgd", "bias update shape differs from bias"));
                }
                heavy_ball(vb.as_mut_slice(), db.as_slice(), mu);
                axpy_vec_in_place(bias, -self.lr, vb)?;
            }
        }
        Ok(())
    }
}

fn heavy_ball(v: &mut [f64], g: &[f64], mu: f64) {
    for (vi, &gi) in v.iter_mut().zip(g) {
        *vi = mu * *vi + gi;
    }
    flops::add(2 * v.len() as u64);
}

/// Raw gradients as updates.
pub fn gradient_updates(captures: &[LayerCapture]) -> Vec<LayerUpdate> {
    captures
        .iter()
        .map(|c| LayerUpdate {
            weight: c.w_grad.clone(),
            bias: c.b_grad.clone(),
        })
        .collect()
}

pub fn sgd_momentum_step(net: &mut Network, updates: &[LayerUpdate], state: &mut SgdMomentum) -> Result<()> {
    state.apply(net, updates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, LayerSpec};

    fn scalar_net(w: f64) -> Network {
        Network::from_weights(
            &[LayerSpec::new(1, 1, Activation::Identity, false)],
            vec![Matrix::from_rows(&[[w]])],
        )
        .unwrap()
    }

    fn up(g: f64) -> Vec<LayerUpdate> {
        vec![LayerUpdate {
            weight: Matrix::from_rows(&[[g]]),
            bias: None,
        }]
    }

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut net = scalar_net(0.7);
        let mut s = SgdMomentum::new(0.1, 0.9);
        s.apply(&mut net, &up(0.0)).unwrap();
        assert_eq!(net.layers[0].weight.get(0, 0), 0.7);
    }

    #[test]
    fn two_step_hand_trace() {
        let mut net = scalar_net(1.0);
        let mut s = SgdMomentum::new(0.1, 0.9);
        s.apply(&mut net, &up(1.0)).unwrap();
        assert!((net.layers[0].weight.get(0, 0) - 0.9).abs() < 1e-15);
        s.apply(&mut net, &up(1.0)).unwrap();
        assert!((net.layers[0].weight.get(0, 0) - 0.71).abs() < 1e-15);
    }

    #[test]
    fn zero_momentum_is_plain_sgd() {
        let mut net = scalar_net(1.0);
        let mut s = SgdMomentum::new(0.5, 0.0);
        s.apply(&mut net, &up(2.0)).unwrap();
        s.apply(&mut net, &up(-1.0)).unwrap();
        assert_eq!(net.layers[0].weight.get(0, 0), 1.0 - 1.0 + 0.5);
    }
}
