//! Building blocks of the rank-1 factor-inverse update.

use super::fp16::round_f16;
use crate::error::{Error, Result};
use crate::linalg::{
    dot, frobenius_norm, inf_norm, lincomb, matmul, matvec, mean_columns, outer, scale, symmetrize, Matrix, Vector,
};
use crate::net::LayerCapture;
use serde::{Deserialize, Serialize};

/// Inverse factors of one layer plus the last synchronized rank-1 vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState {
    /// Inverse left factor, `out_dim × out_dim`.
    pub l_inv: Matrix,
    /// Inverse right factor, `in_dim × in_dim`.
    pub r_inv: Matrix,
    pub a_bar: Vector,
    pub g_bar: Vector,
    /// Number of factor updates applied so far.
    pub iter: u64,
}

impl FactorState {
    /// Identity factors.
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        FactorState {
            l_inv: Matrix::identity(out_dim),
            r_inv: Matrix::identity(in_dim),
            a_bar: Vector::zeros(in_dim),
            g_bar: Vector::zeros(out_dim),
            iter: 0,
        }
    }
}

/// Which closed form the factor-inverse update uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmFormula {
    /// `γF̂⁻¹ + (1−γ)/(γ²(1 + γ(1−γ)vᵀF̂⁻¹v))·F̂⁻¹vvᵀF̂⁻¹`, see [`sm_update`].
    Mkor,
    /// Exact inverse of `γF + (1−γ)vvᵀ`, see [`sm_update_exact`].
    Exact,
}

impl SmFormula {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mkor" => Some(SmFormula::Mkor),
            "exact" => Some(SmFormula::Exact),
            _ => None,
        }
    }

    pub fn apply(self, f_inv: &Matrix, v: &Vector, gamma: f64) -> Result<Matrix> {
        match self {
            SmFormula::Mkor => sm_update(f_inv, v, gamma),
            SmFormula::Exact => sm_update_exact(f_inv, v, gamma),
        }
    }
}

/// Column means of the captured activations and gradients.
pub fn rank1_reduce(capture: &LayerCapture) -> (Vector, Vector) {
    (mean_columns(&capture.a_prev), mean_columns(&capture.g))
}

/// Elementwise mean over workers in ascending worker order, optionally
/// passing every vector through binary16 first.
pub fn allreduce_mean(vectors: &[&Vector], half_precision: bool) -> Result<Vector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidArgument("allreduce over zero workers".into()))?;
    let d = first.dim();
    let mut sum = vec![0.0; d];
    for v in vectors {
        if v.dim() != d {
            return Err(Error::dims("allreduce", format!("{} vs {}", v.dim(), d)));
        }
        for (s, &x) in sum.iter_mut().zip(v.as_slice()) {
            *s += if half_precision { round_f16(x) } else { x };
        }
    }
    crate::flops::add((vectors.len() * d + d) as u64);
    let n = vectors.len() as f64;
    Ok(Vector::from_vec(sum.into_iter().map(|s| s / n).collect()))
}

/// Synchronizes `(a_bar, g_bar)` pairs across workers.
pub fn allreduce_rank1(workers: &[(Vector, Vector)], half_precision: bool) -> Result<(Vector, Vector)> {
    let a: Vec<&Vector> = workers.iter().map(|(a, _)| a).collect();
    let g: Vec<&Vector> = workers.iter().map(|(_, g)| g).collect();
    Ok((allreduce_mean(&a, half_precision)?, allreduce_mean(&g, half_precision)?))
}

/// Blends `f_inv` toward the identity when its infinity norm exceeds
/// `epsilon_norm`: `ζ·F⁻¹ + (1−ζ)·I`.
pub fn stabilize(f_inv: &Matrix, epsilon_norm: f64, zeta: f64) -> Result<Matrix> {
    if !f_inv.is_square() {
        return Err(Error::dims("stabilize", "factor must be square"));
    }
    if inf_norm(f_inv) > epsilon_norm {
        lincomb(zeta, f_inv, 1.0 - zeta, &Matrix::identity(f_inv.rows()))
    } else {
        Ok(f_inv.clone())
    }
}

fn quadratic(f_inv: &Matrix, v: &Vector) -> Result<(Vector, f64)> {
    let u = matvec(f_inv, v)?;
    let s = dot(v, &u)?;
    Ok((u, s))
}

/// Factor-inverse update used by MKOR (the default formula):
///
/// `γ·F̂⁻¹ + [(1−γ) / (γ²·(1 + γ(1−γ)·vᵀF̂⁻¹v))]·F̂⁻¹vvᵀF̂⁻¹`
///
/// The result is symmetrized. Both terms are positive (semi)definite, so
/// the update preserves positive-definiteness in exact arithmetic. Note the
/// leading coefficient and the sign of the rank-1 term differ from the exact
/// inverse of `γF + (1−γ)vvᵀ`; see [`sm_update_exact`].
pub fn sm_update(f_inv: &Matrix, v: &Vector, gamma: f64) -> Result<Matrix> {
    let (u, s) = quadratic(f_inv, v)?;
    let denom = 1.0 + gamma * (1.0 - gamma) * s;
    debug_assert!(!(denom < 1.0 - 1e-12 * s.abs()), "denominator {denom} below 1");
    let coef = (1.0 - gamma) / (gamma * gamma * denom);
    let r = lincomb(gamma, f_inv, coef, &outer(&u, &u))?;
    symmetrize(&r)
}

/// Exact Sherman-Morrison inverse of `γF + (1−γ)vvᵀ` given `F⁻¹`:
///
/// `F⁻¹/γ − (1−γ)/(γ(γ + (1−γ)·vᵀF⁻¹v))·F⁻¹vvᵀF⁻¹`
pub fn sm_update_exact(f_inv: &Matrix, v: &Vector, gamma: f64) -> Result<Matrix> {
    let (u, s) = quadratic(f_inv, v)?;
    let coef = (1.0 - gamma) / (gamma * (gamma + (1.0 - gamma) * s));
    let r = lincomb(1.0 / gamma, f_inv, -coef, &outer(&u, &u))?;
    symmetrize(&r)
}

/// `L⁻¹ · ∇W · R⁻¹`.
pub fn precondition(l_inv: &Matrix, w_grad: &Matrix, r_inv: &Matrix) -> Result<Matrix> {
    matmul(&matmul(l_inv, w_grad)?, r_inv)
}

/// Scales `delta_hat` so its Frobenius norm equals that of `grad`. Returns
/// `grad` itself when `‖delta_hat‖ < 1e-30`.
pub fn rescale(delta_hat: &Matrix, grad: &Matrix) -> Result<Matrix> {
    if delta_hat.shape() != grad.shape() {
        return Err(Error::dims("rescale", "update and gradient shapes differ"));
    }
    let nd = frobenius_norm(delta_hat);
    if nd < 1e-30 {
        return Ok(grad.clone());
    }
    let ng = frobenius_norm(grad);
    Ok(scale(delta_hat, ng / nd))
}
