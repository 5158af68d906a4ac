//! Reference implementations used only by the tests. Each one is written
//! independently of the library code it checks.
#![allow(dead_code, clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod nets;

use kronopt::{Matrix, Rng, Vector};

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows)
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let k = b.len();
    let m = b[0].len();
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            c[i][j] = s;
        }
    }
    c
}

pub fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

pub fn inf_norm(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Gauss-Jordan with partial pivoting.
pub fn inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        let d = m[c][c];
        for x in m[c].iter_mut() {
            *x /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[r][j] -= f * m[c][j];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Lower-triangular factor, or `None` when a pivot is not positive.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `a ⊗ b`, row-major.
pub fn kron(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (ar, ac, br, bc) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut k = vec![vec![0.0; ac * bc]; ar * br];
    for i in 0..ar {
        for j in 0..ac {
            for p in 0..br {
                for q in 0..bc {
                    k[i * br + p][j * bc + q] = a[i][j] * b[p][q];
                }
            }
        }
    }
    k
}

/// Binary16 encoding with round-to-nearest-even, saturating at ±65504
/// instead of overflowing. Built from the format definition.
pub fn f16_bits(x: f64) -> u16 {
    let sign: u16 = if x.is_sign_negative() { 0x8000 } else { 0 };
    let a = x.abs().min(65504.0);
    if a == 0.0 {
        return sign;
    }
    let round_even = |q: f64| {
        let n = q.floor();
        let frac = q - n;
        if frac > 0.5 || (frac == 0.5 && n % 2.0 == 1.0) {
            n + 1.0
        } else {
            n
        }
    };
    let min_normal = 2f64.powi(-14);
    if a < min_normal {
        let n = round_even(a / 2f64.powi(-24)) as u16;
        // n == 1024 rolls over into the smallest normal, which has the same bits.
        return sign | n;
    }
    let mut e = 0i32;
    let mut m = a;
    while m >= 2.0 {
        m /= 2.0;
        e += 1;
    }
    while m < 1.0 {
        m *= 2.0;
        e -= 1;
    }
    let mut frac = round_even((m - 1.0) * 1024.0) as u32;
    if frac == 1024 {
        frac = 0;
        e += 1;
    }
    let biased = (e + 15) as u32;
    assert!(biased <= 30, "saturation keeps the exponent finite");
    sign | ((biased << 10) as u16) | frac as u16
}

pub fn f16_value(bits: u16) -> f64 {
    let sign = if bits & 0x8000 != 0 { -1.0 } else { 1.0 };
    let e = ((bits >> 10) & 0x1f) as i32;
    let f = (bits & 0x3ff) as f64;
    match e {
        0 => sign * f * 2f64.powi(-24),
        31 => {
            if f == 0.0 {
                sign * f64::INFINITY
            } else {
                f64::NAN
            }
        }
        _ => sign * (1.0 + f / 1024.0) * 2f64.powi(e - 15),
    }
}

pub fn f16_round(x: f64) -> f64 {
    f16_value(f16_bits(x))
}

pub fn random_rows(rows: usize, cols: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| rng.normal()).collect()).collect()
}

/// `XXᵀ/n + shift·I` with `X` of shape `d × n`.
pub fn random_spd(d: usize, n: usize, shift: f64, rng: &mut Rng) -> Vec<Vec<f64>> {
    let x = random_rows(d, n, rng);
    let mut m = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            m[i][j] = (0..n).map(|k| x[i][k] * x[j][k]).sum::<f64>() / n as f64;
        }
        m[i][i] += shift;
    }
    m
}

pub fn vector(v: &[f64]) -> Vector {
    Vector::from_vec(v.to_vec())
}

/// Taylor model `Σ δ·g + δᵀ(L ⊗ R)δ` on the row-major vectorization.
pub fn dense_taylor(delta: &[Vec<f64>], grad: &[Vec<f64>], l: &[Vec<f64>], r: &[Vec<f64>]) -> f64 {
    let flat = |m: &[Vec<f64>]| m.iter().flatten().copied().collect::<Vec<f64>>();
    let d = flat(delta);
    let g = flat(grad);
    let k = kron(l, r);
    let lin: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
    let mut quad = 0.0;
    for i in 0..d.len() {
        for j in 0..d.len() {
            quad += d[i] * k[i][j] * d[j];
        }
    }
    lin + quad
}

/// Minimum of the Taylor model over every set of exactly `k` entries
/// set to zero.
pub fn exhaustive_prune(w0: &[Vec<f64>], grad: &[Vec<f64>], l: &[Vec<f64>], r: &[Vec<f64>], k: usize) -> f64 {
    let (m, n) = (w0.len(), w0[0].len());
    let cells = m * n;
    let mut best = f64::INFINITY;
    let mut pick = vec![0usize; k];
    fn rec(start: usize, depth: usize, pick: &mut Vec<usize>, cells: usize, eval: &mut dyn FnMut(&[usize])) {
        if depth == pick.len() {
            eval(pick);
            return;
        }
        for c in start..cells {
            pick[depth] = c;
            rec(c + 1, depth + 1, pick, cells, eval);
        }
    }
    let mut eval = |set: &[usize]| {
        let mut delta = vec![vec![0.0; n]; m];
        for &c in set {
            delta[c / n][c % n] = -w0[c / n][c % n];
        }
        best = best.min(dense_taylor(&delta, grad, l, r));
    };
    rec(0, 0, &mut pick, cells, &mut eval);
    best
}

/// Central differences of `f` at every entry of `w`.
pub fn central_differences(w: &[Vec<f64>], h: f64, mut f: impl FnMut(&[Vec<f64>]) -> f64) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; w[0].len()]; w.len()];
    let mut x = w.to_vec();
    for i in 0..w.len() {
        for j in 0..w[0].len() {
            let orig = x[i][j];
            x[i][j] = orig + h;
            let up = f(&x);
            x[i][j] = orig - h;
            let down = f(&x);
            x[i][j] = orig;
            out[i][j] = (up - down) / (2.0 * h);
        }
    }
    out
}
