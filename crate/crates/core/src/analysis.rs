//! Diagnostics: rank-1 approximation quality of the covariance factors,
//! factor spectra, and numerical checks of the stabilized update.

use crate::error::{Error, Result};
use crate::linalg::{
    direct_inverse, dot, frobenius_norm, inf_norm, lincomb, matmul, matmul_transpose_b, matvec, mean_columns, outer,
    power_iteration, power_iteration_extremes, scale, start_vector, sub, Matrix, Vector,
};
use crate::net::LayerCapture;
use crate::optim::{round_f16, sm_update, sm_update_exact, stabilize, SmFormula};
use crate::rng::Rng;
use serde::Serialize;
use std::io::Write;

/// `‖C − αvvᵀ‖_F / ‖C‖_F` with the least-squares `α = vᵀCv / ‖v‖⁴`.
///
/// Zero `C` gives 0; zero `v` with nonzero `C` gives 1.
pub fn rank1_error(c: &Matrix, v: &Vector) -> Result<f64> {
    if !c.is_square() || c.rows() != v.dim() {
        return Err(Error::dims("rank1_error", "square matrix and matching vector"));
    }
    let nc = frobenius_norm(c);
    if nc == 0.0 {
        return Ok(0.0);
    }
    let vv = dot(v, v)?;
    if vv == 0.0 {
        return Ok(1.0);
    }
    let alpha = dot(v, &matvec(c, v)?)? / (vv * vv);
    let approx = scale(&crate::linalg::outer(v, v), alpha);
    Ok(frobenius_norm(&sub(c, &approx)?) / nc)
}

/// Dominant eigenpair by power iteration (1000 iterations or `1e-12`
/// relative residual).
pub fn best_rank1(c: &Matrix) -> Result<(f64, Vector)> {
    best_rank1_from(c, &start_vector(c.rows()))
}

/// [`best_rank1`] started from `start`. For a PSD matrix the Rayleigh
/// quotient never decreases along the iteration, so the result is at least
/// as good a rank-1 approximation as `start` itself.
pub fn best_rank1_from(c: &Matrix, start: &Vector) -> Result<(f64, Vector)> {
    power_iteration(c, start, 1000, 1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Activation,
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rank1ErrorRecord {
    pub iter: u64,
    pub layer: usize,
    pub kind: MatrixKind,
    pub rel_error_mean_vec: f64,
    pub rel_error_best_rank1: f64,
}

fn covariance_record(iter: u64, layer: usize, kind: MatrixKind, x: &Matrix) -> Result<Rank1ErrorRecord> {
    let c = scale(&matmul_transpose_b(x, x)?, 1.0 / x.cols() as f64);
    let mean = mean_columns(x);
    let (_, top) = best_rank1_from(&c, &mean)?;
    let mean_err = rank1_error(&c, &mean)?;
    // The mean vector is itself a rank-1 candidate; taking the smaller error
    // only matters at rounding level, where the two can swap order.
    let best_err = rank1_error(&c, &top)?.min(mean_err);
    Ok(Rank1ErrorRecord {
        iter,
        layer,
        kind,
        rel_error_mean_vec: mean_err,
        rel_error_best_rank1: best_err,
    })
}

/// Mean-vector and optimal rank-1 errors of `(1/b)AAᵀ` and `(1/b)GGᵀ` for
/// every layer.
pub fn rank1_records(iter: u64, captures: &[LayerCapture]) -> Result<Vec<Rank1ErrorRecord>> {
    let mut out = Vec::with_capacity(2 * captures.len());
    for (layer, cap) in captures.iter().enumerate() {
        out.push(covariance_record(iter, layer, MatrixKind::Activation, &cap.a_prev)?);
        out.push(covariance_record(iter, layer, MatrixKind::Gradient, &cap.g)?);
    }
    Ok(out)
}

/// CSV with header `iter,layer,kind,rel_error_mean_vec,rel_error_best_rank1`.
pub fn write_rank1_csv<W: Write>(out: W, records: &[Rank1ErrorRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// `lambda_max / max(lambda_min, 1e-300)`.
    pub condition_number: f64,
}

pub fn factor_spectrum_report(f: &Matrix) -> Result<SpectrumReport> {
    let (lambda_max, lambda_min) = power_iteration_extremes(f, 2000)?;
    Ok(SpectrumReport {
        lambda_max,
        lambda_min,
        condition_number: lambda_max / lambda_min.max(1e-300),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub d: usize,
    pub gamma: f64,
    pub steps: usize,
    /// Steps whose result passed strict Cholesky.
    pub steps_ok: usize,
    /// First step whose result was not positive-definite (or not finite).
    pub first_failure: Option<usize>,
    /// Largest infinity norm of the inverse seen before any failure.
    pub max_inf_norm: f64,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Starting from the identity, alternates [`stabilize`] and the chosen
/// factor-inverse update with standard-normal vectors, checking strict
/// positive-definiteness after every step. Stops at the first failure.
pub fn lemma1_chain(
    d: usize,
    steps: usize,
    gamma: f64,
    formula: SmFormula,
    epsilon_norm: f64,
    zeta: f64,
    rng: &mut Rng,
) -> Result<ChainReport> {
    let mut f_inv = Matrix::identity(d);
    let mut report = ChainReport {
        d,
        gamma,
        steps,
        steps_ok: 0,
        first_failure: None,
        max_inf_norm: 1.0,
    };
    for step in 0..steps {
        let v = Vector::random_normal(d, 1.0, rng);
        let next = stabilize(&f_inv, epsilon_norm, zeta).and_then(|h| formula.apply(&h, &v, gamma));
        match next {
            Ok(m) if m.is_finite() && crate::linalg::cholesky_strict(&m).is_ok() => {
                report.max_inf_norm = report.max_inf_norm.max(inf_norm(&m));
                report.steps_ok += 1;
                f_inv = m;
            }
            _ => {
                report.first_failure = Some(step);
                break;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmDiscrepancyReport {
    pub trials: usize,
    pub max_d: usize,
    pub gamma: f64,
    /// Largest `‖exact − direct‖∞ / d` over trials.
    pub exact_max_error_per_d: f64,
    /// Largest `‖mkor − direct‖∞ / ‖direct‖∞` over trials.
    pub mkor_max_rel_error: f64,
    pub mkor_mean_rel_error: f64,
}

/// Compares both factor-inverse updates with the directly inverted
/// `γF + (1−γ)vvᵀ` on random positive-definite `F` of size `1..=max_d`.
pub fn sm_discrepancy_report(max_d: usize, trials: usize, gamma: f64, rng: &mut Rng) -> Result<SmDiscrepancyReport> {
    if max_d == 0 || trials == 0 {
        return Err(Error::InvalidArgument(
            "discrepancy report needs max_d, trials > 0".into(),
        ));
    }
    let mut exact_max = 0.0f64;
    let mut mkor_max = 0.0f64;
    let mut mkor_sum = 0.0;
    for _ in 0..trials {
        let d = 1 + rng.below(max_d);
        let f = Matrix::random_spd(d, 2 * d, 0.5, rng);
        let f_inv = direct_inverse(&f)?;
        let v = Vector::random_normal(d, 1.0, rng);
        let updated = lincomb(gamma, &f, 1.0 - gamma, &outer(&v, &v))?;
        let direct = direct_inverse(&updated)?;
        let exact = sm_update_exact(&f_inv, &v, gamma)?;
        let mkor = sm_update(&f_inv, &v, gamma)?;
        exact_max = exact_max.max(inf_norm(&sub(&exact, &direct)?) / d as f64);
        let rel = inf_norm(&sub(&mkor, &direct)?) / inf_norm(&direct);
        mkor_max = mkor_max.max(rel);
        mkor_sum += rel;
    }
    Ok(SmDiscrepancyReport {
        trials,
        max_d,
        gamma,
        exact_max_error_per_d: exact_max,
        mkor_max_rel_error: mkor_max,
        mkor_mean_rel_error: mkor_sum / trials as f64,
    })
}

/// One factor-inverse update evaluated with every input, product and
/// running sum rounded by `q`.
pub fn sm_update_rounded(f_inv: &Matrix, v: &Vector, gamma: f64, q: impl Fn(f64) -> f64) -> Matrix {
    let d = v.dim();
    let f = f_inv.map(&q);
    let v: Vec<f64> = v.as_slice().iter().map(|&x| q(x)).collect();
    let u: Vec<f64> = (0..d)
        .map(|i| f.row(i).iter().zip(&v).fold(0.0, |acc, (a, b)| q(acc + q(a * b))))
        .collect();
    let s = v.iter().zip(&u).fold(0.0, |acc, (a, b)| q(acc + q(a * b)));
    let denom = q(1.0 + q(q(gamma * (1.0 - gamma)) * s));
    let coef = q((1.0 - gamma) / q(gamma * gamma * denom));
    let g = q(gamma);
    Matrix::from_fn(d, d, |i, j| q(q(g * f.get(i, j)) + q(coef * q(u[i] * u[j]))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizationReport {
    pub d: usize,
    pub gamma: f64,
    pub trials: usize,
    /// Unit roundoff of the emulated format.
    pub epsilon: f64,
    /// Largest entrywise error over all trials.
    pub max_error: f64,
    /// `max(error / ((γ + 4((1−γ)/γ²)·m³d²)·ε))` over trials.
    pub fitted_constant: f64,
}

/// Compares the update in double precision against binary16 emulation
/// (`half = true`) or against itself (`half = false`, `ε = 0`).
pub fn quantization_error_report(
    d: usize,
    gamma: f64,
    trials: usize,
    half: bool,
    rng: &mut Rng,
) -> Result<QuantizationReport> {
    if d == 0 || trials == 0 {
        return Err(Error::InvalidArgument("quantization report needs d, trials > 0".into()));
    }
    let eps = if half { 2f64.powi(-11) } else { 0.0 };
    let mut max_error = 0.0f64;
    let mut fitted = 0.0f64;
    for _ in 0..trials {
        // Entries of order one keep every intermediate inside the binary16 range.
        let f_inv = scale(&Matrix::random_spd(d, 2 * d, 0.5, rng), 1.0 / d as f64);
        let v = Vector::random_normal(d, 1.0, rng);
        let exact = sm_update(&f_inv, &v, gamma)?;
        let approx = if half {
            sm_update_rounded(&f_inv, &v, gamma, round_f16)
        } else {
            sm_update_rounded(&f_inv, &v, gamma, |x| x)
        };
        let err = sub(&exact, &approx)?.max_abs();
        let m = f_inv.max_abs().max(v.max_abs());
        let bound = (gamma + 4.0 * (1.0 - gamma) / (gamma * gamma) * m.powi(3) * (d * d) as f64) * eps;
        max_error = max_error.max(err);
        if bound > 0.0 {
            fitted = fitted.max(err / bound);
        } else if err > 0.0 {
            fitted = f64::INFINITY;
        }
    }
    Ok(QuantizationReport {
        d,
        gamma,
        trials,
        epsilon: eps,
        max_error,
        fitted_constant: fitted,
    })
}

/// Dense Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Matrix::from_fn(ar * br, ac * bc, |i, j| a.get(i / br, j / bc) * b.get(i % br, j % bc))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma3Report {
    pub trials: usize,
    /// Trials with `∇ℒᵀΔw > 0`.
    pub descent: usize,
    pub min_descent: f64,
    /// Largest deviation of the four-term expansion from the blended
    /// preconditioner, over both the Kronecker and the matrix form.
    pub max_expansion_error: f64,
}

impl Lemma3Report {
    pub fn passed(&self, tol: f64) -> bool {
        self.descent == self.trials && self.max_expansion_error <= tol
    }
}

/// Random quadratics `½wᵀ(L⊗R)w + cᵀw` with PD factors: checks the
/// first-order decrease of the blended step and the expansion
/// `ζ²L⁻¹⊗R⁻¹ + ζ(1−ζ)(L⁻¹⊗I + I⊗R⁻¹) + (1−ζ)²I`.
pub fn lemma3_check(dl: usize, dr: usize, zeta: f64, trials: usize, rng: &mut Rng) -> Result<Lemma3Report> {
    if dl == 0 || dr == 0 || dl * dr > 64 {
        return Err(Error::InvalidArgument(format!(
            "lemma 3 check needs 0 < dL·dR ≤ 64, got {dl}×{dr}"
        )));
    }
    if !(0.0..=1.0).contains(&zeta) {
        return Err(Error::InvalidArgument(format!("zeta {zeta} outside [0, 1]")));
    }
    let mut report = Lemma3Report {
        trials,
        descent: 0,
        min_descent: f64::INFINITY,
        max_expansion_error: 0.0,
    };
    let n = dl * dr;
    for _ in 0..trials {
        let l = Matrix::random_spd(dl, dl + 1, 0.1, rng);
        let r = Matrix::random_spd(dr, dr + 1, 0.1, rng);
        let l_inv = crate::linalg::direct_inverse(&l)?;
        let r_inv = crate::linalg::direct_inverse(&r)?;
        let w0 = Vector::random_normal(n, 1.0, rng);
        let c = Vector::random_normal(n, 1.0, rng);
        let h = kron(&l, &r);
        let grad = crate::linalg::add_vec(&matvec(&h, &w0)?, &c)?;

        let il = Matrix::identity(dl);
        let ir = Matrix::identity(dr);
        let l_hat = lincomb(zeta, &l_inv, 1.0 - zeta, &il)?;
        let r_hat = lincomb(zeta, &r_inv, 1.0 - zeta, &ir)?;
        let p = kron(&l_hat, &r_hat);
        let z1 = zeta * (1.0 - zeta);
        let mut expansion = scale(&kron(&l_inv, &r_inv), zeta * zeta);
        expansion = lincomb(1.0, &expansion, z1, &kron(&l_inv, &ir))?;
        expansion = lincomb(1.0, &expansion, z1, &kron(&il, &r_inv))?;
        expansion = lincomb(1.0, &expansion, (1.0 - zeta).powi(2), &Matrix::identity(n))?;
        let mut err = inf_norm(&sub(&p, &expansion)?);

        // Matrix form on the gradient reshaped to dL × dR.
        let g = Matrix::from_vec(dl, dr, grad.as_slice().to_vec())?;
        let blended = matmul(&matmul(&l_hat, &g)?, &r_hat)?;
        let mut terms = scale(&matmul(&matmul(&l_inv, &g)?, &r_inv)?, zeta * zeta);
        terms = lincomb(1.0, &terms, z1, &matmul(&l_inv, &g)?)?;
        terms = lincomb(1.0, &terms, z1, &matmul(&g, &r_inv)?)?;
        terms = lincomb(1.0, &terms, (1.0 - zeta).powi(2), &g)?;
        err = err.max(inf_norm(&sub(&blended, &terms)?));
        report.max_expansion_error = report.max_expansion_error.max(err);

        let step = matvec(&p, &grad)?;
        let descent = dot(&grad, &step)?;
        report.min_descent = report.min_descent.min(descent);
        if descent > 0.0 {
            report.descent += 1;
        }
    }
    Ok(report)
}
