//! Random networks and the finite-difference gradient check.

use super::*;
use kronopt::net::{Activation, LayerSpec, LossKind, Network};
use kronopt::{Matrix, Rng};

const ACTS: [Activation; 3] = [Activation::Identity, Activation::Tanh, Activation::Sigmoid];

pub fn random_net(rng: &mut Rng, max_dim: usize, max_layers: usize) -> (Network, LossKind) {
    let layers = 1 + rng.below(max_layers);
    let mut dims: Vec<usize> = (0..=layers).map(|_| 1 + rng.below(max_dim)).collect();
    let loss = if rng.below(2) == 0 {
        LossKind::Mse
    } else {
        LossKind::SoftmaxCrossEntropy
    };
    if loss == LossKind::SoftmaxCrossEntropy && dims[layers] < 2 {
        dims[layers] = 2;
    }
    let specs: Vec<LayerSpec> = (0..layers)
        .map(|i| LayerSpec::new(dims[i], dims[i + 1], ACTS[rng.below(ACTS.len())], rng.below(2) == 0))
        .collect();
    let mut net = Network::init(&specs, rng).unwrap();
    for l in &mut net.layers {
        if let Some(b) = &mut l.bias {
            for x in b.as_mut_slice() {
                *x = 0.3 * rng.normal();
            }
        }
    }
    (net, loss)
}

pub fn targets(rng: &mut Rng, dim: usize, b: usize, loss: LossKind) -> Matrix {
    match loss {
        LossKind::Mse => Matrix::random_normal(dim, b, 1.0, rng),
        LossKind::SoftmaxCrossEntropy => {
            let mut t = Matrix::zeros(dim, b);
            for s in 0..b {
                t.set(rng.below(dim), s, 1.0);
            }
            t
        }
    }
}

/// Largest entry error relative to the largest gradient entry of the layer.
pub fn rel_error(got: &[Vec<f64>], want: &[Vec<f64>]) -> f64 {
    let scale = inf_abs(want).max(inf_abs(got)).max(1e-8);
    max_abs_diff(got, want) / scale
}

fn inf_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()))
}

pub fn gradient_check_error(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (net, loss) = random_net(&mut rng, 16, 3);
    let b = 1 + rng.below(8);
    let x = Matrix::random_normal(net.input_dim(), b, 1.0, &mut rng);
    let t = targets(&mut rng, net.output_dim(), b, loss);
    let (_, caps) = net.gradients(&x, &t, loss).unwrap();
    let mut worst = 0.0f64;
    for (li, cap) in caps.iter().enumerate() {
        let w0 = to_rows(&net.layers[li].weight);
        let fd = central_differences(&w0, 1e-5, |w| {
            let mut n = net.clone();
            n.layers[li].weight = from_rows(w);
            n.loss(&x, &t, loss).unwrap()
        });
        worst = worst.max(rel_error(&to_rows(&cap.w_grad), &fd));
        if let (Some(bg), Some(b0)) = (&cap.b_grad, &net.layers[li].bias) {
            let fd = central_differences(&[b0.as_slice().to_vec()], 1e-5, |bv| {
                let mut n = net.clone();
                n.layers[li].bias = Some(vector(&bv[0]));
                n.loss(&x, &t, loss).unwrap()
            });
            worst = worst.max(rel_error(&[bg.as_slice().to_vec()], &fd));
        }
    }
    worst
}
