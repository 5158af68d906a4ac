use super::{Matrix, Vector};
use crate::error::{Error, Result};
use crate::flops;

/// `a · b`. Each output entry accumulates its products in ascending `k`
/// starting from zero, so results do not depend on loop blocking.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.rows() {
        return Err(Error::dims(
            "matmul",
            format!("{}x{} times {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    flops::add(2 * (m * k * n) as u64);
    let mut c = Matrix::zeros(m, n);
    let bs = b.as_slice();
    for i in 0..m {
        let arow = a.row(i);
        let crow = c.row_mut(i);
        for (p, &aip) in arow.iter().enumerate() {
            let brow = &bs[p * n..(p + 1) * n];
            for (cij, &bpj) in crow.iter_mut().zip(brow) {
                *cij += aip * bpj;
            }
        }
    }
    Ok(c)
}

/// `a · bᵀ` without materializing the transpose.
pub fn matmul_transpose_b(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::dims(
            "matmul_transpose_b",
            format!("{}x{} times ({}x{})ᵀ", a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.rows());
    flops::add(2 * (m * k * n) as u64);
    let mut c = Matrix::zeros(m, n);
    for i in 0..m {
        let arow = a.row(i);
        for j in 0..n {
            let brow = b.row(j);
            let mut s = 0.0;
            for p in 0..k {
                s += arow[p] * brow[p];
            }
            c.set(i, j, s);
        }
    }
    Ok(c)
}

pub fn matvec(a: &Matrix, x: &Vector) -> Result<Vector> {
    if a.cols() != x.dim() {
        return Err(Error::dims(
            "matvec",
            format!("{}x{} times vector of dim {}", a.rows(), a.cols(), x.dim()),
        ));
    }
    flops::add(2 * a.len() as u64);
    let xs = x.as_slice();
    let out = (0..a.rows())
        .map(|i| {
            let mut s = 0.0;
            for (aij, xj) in a.row(i).iter().zip(xs) {
                s += aij * xj;
            }
            s
        })
        .collect();
    Ok(Vector::from_vec(out))
}

pub fn dot(u: &Vector, v: &Vector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::dims("dot", format!("{} vs {}", u.dim(), v.dim())));
    }
    flops::add(2 * u.dim() as u64);
    let mut s = 0.0;
    for (a, b) in u.as_slice().iter().zip(v.as_slice()) {
        s += a * b;
    }
    Ok(s)
}

/// `u vᵀ`.
pub fn outer(u: &Vector, v: &Vector) -> Matrix {
    flops::add((u.dim() * v.dim()) as u64);
    Matrix::from_fn(u.dim(), v.dim(), |i, j| u.get(i) * v.get(j))
}

pub fn transpose(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.cols(), a.rows(), |i, j| a.get(j, i))
}

pub fn scale(a: &Matrix, s: f64) -> Matrix {
    flops::add(a.len() as u64);
    a.map(|x| s * x)
}

pub fn scale_vec(v: &Vector, s: f64) -> Vector {
    flops::add(v.dim() as u64);
    Vector::from_vec(v.as_slice().iter().map(|x| s * x).collect())
}

fn same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dims(
            op,
            format!("{}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    Ok(())
}

pub fn add(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    same_shape("add", a, b)?;
    flops::add(a.len() as u64);
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + y).collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

pub fn sub(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    same_shape("sub", a, b)?;
    flops::add(a.len() as u64);
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x - y).collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

/// `a + s·b`.
pub fn axpy(a: &Matrix, s: f64, b: &Matrix) -> Result<Matrix> {
    same_shape("axpy", a, b)?;
    flops::add(2 * a.len() as u64);
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + s * y).collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

/// In-place `a ← a + s·b`.
pub fn axpy_in_place(a: &mut Matrix, s: f64, b: &Matrix) -> Result<()> {
    same_shape("axpy_in_place", a, b)?;
    flops::add(2 * a.len() as u64);
    for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *x += s * y;
    }
    Ok(())
}

/// `α·a + β·b`.
pub fn lincomb(alpha: f64, a: &Matrix, beta: f64, b: &Matrix) -> Result<Matrix> {
    same_shape("lincomb", a, b)?;
    flops::add(3 * a.len() as u64);
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| alpha * x + beta * y)
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

pub fn add_vec(u: &Vector, v: &Vector) -> Result<Vector> {
    if u.dim() != v.dim() {
        return Err(Error::dims("add_vec", format!("{} vs {}", u.dim(), v.dim())));
    }
    flops::add(u.dim() as u64);
    Ok(Vector::from_vec(
        u.as_slice().iter().zip(v.as_slice()).map(|(a, b)| a + b).collect(),
    ))
}

/// In-place `u ← u + s·v`.
pub fn axpy_vec_in_place(u: &mut Vector, s: f64, v: &Vector) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::dims("axpy_vec_in_place", format!("{} vs {}", u.dim(), v.dim())));
    }
    flops::add(2 * u.dim() as u64);
    for (a, b) in u.as_mut_slice().iter_mut().zip(v.as_slice()) {
        *a += s * b;
    }
    Ok(())
}

/// Adds `s` to every diagonal entry.
pub fn add_identity(a: &Matrix, s: f64) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::dims("add_identity", "matrix must be square"));
    }
    flops::add(a.rows() as u64);
    let mut out = a.clone();
    for i in 0..a.rows() {
        out.set(i, i, out.get(i, i) + s);
    }
    Ok(out)
}

/// `(a + aᵀ) / 2`.
pub fn symmetrize(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::dims("symmetrize", "matrix must be square"));
    }
    let n = a.rows();
    flops::add((n * n) as u64);
    let mut out = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}

pub fn frobenius_norm(a: &Matrix) -> f64 {
    flops::add(2 * a.len() as u64);
    a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Maximum absolute row sum.
pub fn inf_norm(a: &Matrix) -> f64 {
    flops::add(a.len() as u64);
    (0..a.rows())
        .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Mean over columns: entry `i` is `(1/cols)·Σ_j a[i][j]`, summed in
/// ascending `j`.
pub fn mean_columns(a: &Matrix) -> Vector {
    flops::add((a.len() + a.rows()) as u64);
    let b = a.cols() as f64;
    Vector::from_vec(
        (0..a.rows())
            .map(|i| {
                let mut s = 0.0;
                for x in a.row(i) {
                    s += x;
                }
                s / b
            })
            .collect(),
    )
}

/// Elementwise product.
pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    same_shape("hadamard", a, b)?;
    flops::add(a.len() as u64);
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

/// `Σ a ⊙ b`.
pub fn inner(a: &Matrix, b: &Matrix) -> Result<f64> {
    same_shape("inner", a, b)?;
    flops::add(2 * a.len() as u64);
    let mut s = 0.0;
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        s += x * y;
    }
    Ok(s)
}
