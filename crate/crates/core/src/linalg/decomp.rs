use super::ops::{inf_norm, matvec, symmetrize};
use super::{Matrix, Vector};
use crate::error::{Error, Result};
use crate::flops;

/// Inverse by Gauss-Jordan elimination with partial pivoting on the
/// augmented matrix `[m | I]`.
///
/// Elimination runs over the full `2n` augmented width, so the cost is
/// `4n³ + O(n²)` flops regardless of sparsity in the right half.
pub fn direct_inverse(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::dims("direct_inverse", "matrix must be square"));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("direct_inverse input"));
    }
    let n = m.rows();
    let w = 2 * n;
    let scale = inf_norm(m);
    if scale == 0.0 {
        return Err(Error::SingularMatrix);
    }
    let tol = n as f64 * f64::EPSILON * scale;

    let mut aug = vec![0.0; n * w];
    for i in 0..n {
        aug[i * w..i * w + n].copy_from_slice(m.row(i));
        aug[i * w + n + i] = 1.0;
    }

    let mut ops = 0u64;
    for k in 0..n {
        let mut piv = k;
        let mut best = aug[k * w + k].abs();
        for i in (k + 1)..n {
            let v = aug[i * w + k].abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best <= tol {
            flops::add(ops);
            return Err(Error::SingularMatrix);
        }
        if piv != k {
            for j in 0..w {
                aug.swap(k * w + j, piv * w + j);
            }
        }
        let inv_p = 1.0 / aug[k * w + k];
        for j in 0..w {
            aug[k * w + j] *= inv_p;
        }
        ops += 1 + w as u64;
        let (head, rest) = aug.split_at_mut(k * w);
        let (pivot_row, tail) = rest.split_at_mut(w);
        for row in head.chunks_exact_mut(w).chain(tail.chunks_exact_mut(w)) {
            let f = row[k];
            for (x, p) in row.iter_mut().zip(pivot_row.iter()) {
                *x -= f * *p;
            }
        }
        ops += 2 * (w * (n - 1)) as u64;
    }
    flops::add(ops);

    let mut inv = Matrix::zeros(n, n);
    for i in 0..n {
        inv.row_mut(i).copy_from_slice(&aug[i * w + n..(i + 1) * w]);
    }
    if !inv.is_finite() {
        return Err(Error::SingularMatrix);
    }
    Ok(inv)
}

fn cholesky_impl(m: &Matrix, strict: bool) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::dims("cholesky", "matrix must be square"));
    }
    if !m.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    let a = symmetrize(m)?;
    let n = a.rows();
    let scale = inf_norm(&a);
    let tol = 1e-10 * scale;
    let off_tol = (tol * scale).sqrt();
    flops::add((n * n * n / 3 + n * n) as u64);

    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut s = a.get(j, j);
        for k in 0..j {
            s -= l.get(j, k) * l.get(j, k);
        }
        if strict {
            if !(s > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
        } else if s < -tol {
            return Err(Error::NotPositiveDefinite);
        }
        if s <= tol && !strict {
            // Semidefinite pivot: the rest of the column must vanish too.
            for i in (j + 1)..n {
                let mut num = a.get(i, j);
                for k in 0..j {
                    num -= l.get(i, k) * l.get(j, k);
                }
                if num.abs() > off_tol {
                    return Err(Error::NotPositiveDefinite);
                }
            }
            continue;
        }
        let d = s.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut num = a.get(i, j);
            for k in 0..j {
                num -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, num / d);
        }
    }
    Ok(l)
}

/// Lower-triangular `C` with `C·Cᵀ ≈ (m + mᵀ)/2`.
///
/// Pivots within `1e-10·‖m‖∞` of zero are accepted as semidefinite, so the
/// factorization succeeds exactly when the smallest eigenvalue is above
/// `-1e-10·‖m‖∞` (up to rounding).
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    cholesky_impl(m, false)
}

/// Cholesky that requires every pivot to be strictly positive and finite.
pub fn cholesky_strict(m: &Matrix) -> Result<Matrix> {
    cholesky_impl(m, true)
}

pub fn is_positive_definite(m: &Matrix) -> bool {
    cholesky_strict(m).is_ok()
}

/// Deterministic, non-degenerate start vector for power iterations.
pub fn start_vector(n: usize) -> Vector {
    Vector::from_vec((0..n).map(|i| 1.0 + 0.5 * ((i + 1) as f64).sin()).collect())
}

/// Power iteration for the dominant eigenpair of a symmetric PSD matrix.
///
/// Stops after `max_iters` iterations or once `‖m v − λ v‖ ≤ tol·|λ|`.
/// Returns the Rayleigh quotient and the unit eigenvector estimate.
pub fn power_iteration(m: &Matrix, start: &Vector, max_iters: usize, tol: f64) -> Result<(f64, Vector)> {
    if !m.is_square() || start.dim() != m.rows() {
        return Err(Error::dims(
            "power_iteration",
            "square matrix and matching start vector",
        ));
    }
    let n = m.rows();
    let mut v = start.clone();
    let mut nv = v.norm();
    if nv == 0.0 {
        v = start_vector(n);
        nv = v.norm();
    }
    v = Vector::from_vec(v.as_slice().iter().map(|x| x / nv).collect());
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let w = matvec(m, &v)?;
        lambda = w.as_slice().iter().zip(v.as_slice()).map(|(a, b)| a * b).sum::<f64>();
        let resid = w
            .as_slice()
            .iter()
            .zip(v.as_slice())
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        flops::add(6 * n as u64);
        let nw = w.norm();
        if nw == 0.0 {
            return Ok((0.0, v));
        }
        let next = Vector::from_vec(w.as_slice().iter().map(|x| x / nw).collect());
        if resid <= tol * lambda.abs() {
            v = next;
            break;
        }
        v = next;
    }
    Ok((lambda, v))
}

/// Shift applied before inverting for the smallest eigenvalue:
/// `δ = 1e-12·max(‖m‖∞, 1e-300)`.
pub fn inverse_shift(m: &Matrix) -> f64 {
    1e-12 * inf_norm(m).max(1e-300)
}

/// Largest and smallest eigenvalue estimates of a symmetric PSD matrix.
///
/// The largest comes from power iteration on `m`; the smallest from power
/// iteration on `(m + δI)⁻¹` with `δ` from [`inverse_shift`], reported as
/// `1/μ − δ`. If the shifted matrix cannot be inverted the smallest
/// eigenvalue is reported as 0.
pub fn power_iteration_extremes(m: &Matrix, iters: usize) -> Result<(f64, f64)> {
    if !m.is_square() {
        return Err(Error::dims("power_iteration_extremes", "matrix must be square"));
    }
    let n = m.rows();
    let start = start_vector(n);
    let (lambda_max, _) = power_iteration(m, &start, iters, 1e-13)?;
    let delta = inverse_shift(m);
    let shifted = super::ops::add_identity(m, delta)?;
    let lambda_min = match direct_inverse(&shifted) {
        Ok(inv) => {
            let (mu, _) = power_iteration(&inv, &start, iters, 1e-13)?;
            if mu > 0.0 && mu.is_finite() {
                (1.0 / mu - delta).max(0.0)
            } else {
                0.0
            }
        }
        Err(Error::SingularMatrix) => 0.0,
        Err(e) => return Err(e),
    };
    Ok((lambda_max, lambda_min))
}
