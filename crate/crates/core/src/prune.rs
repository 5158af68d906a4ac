//! Kronecker-factored Taylor pruning.
//!
//! The loss model for a weight perturbation `ΔW` is
//! `ℒ₀ + Σ(ΔW ⊙ ∇ℒ) + Σ(ΔW ⊙ (L·ΔW·R))`, without a ½ on the quadratic
//! term. Pruning a set of entries sets `ΔW = −W₀` on them.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{add_identity, direct_inverse, matmul, matmul_transpose_b, scale, Matrix};
use crate::net::{LayerCapture, LossKind, Network};
use crate::optim::FactorState;
use serde::Serialize;
use std::io::{Read, Write};

pub const MASK_MAGIC: &str = "KRONOPT-MASK v1";

/// Predicted loss change of pruning one unit given the units already
/// pruned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PruneScore {
    /// Row and column of the unit's top-left entry.
    pub i: usize,
    pub j: usize,
    pub delta_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneMode {
    Element,
    /// Tiles of `rows × cols` starting at the origin; edge tiles may be
    /// smaller.
    Block {
        rows: usize,
        cols: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMask {
    rows: usize,
    cols: usize,
    tile: Option<(usize, usize)>,
    pruned: Vec<bool>,
}

impl PruneMask {
    pub fn empty(rows: usize, cols: usize, tile: Option<(usize, usize)>) -> Self {
        PruneMask {
            rows,
            cols,
            tile,
            pruned: vec![false; rows * cols],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn tile(&self) -> Option<(usize, usize)> {
        self.tile
    }

    pub fn is_pruned(&self, i: usize, j: usize) -> bool {
        self.pruned[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, pruned: bool) {
        self.pruned[i * self.cols + j] = pruned;
    }

    pub fn count(&self) -> usize {
        self.pruned.iter().filter(|&&p| p).count()
    }

    /// `(i, j)` of every pruned entry in row-major order.
    pub fn entries(&self) -> Vec<(usize, usize)> {
        (0..self.rows * self.cols)
            .filter(|&k| self.pruned[k])
            .map(|k| (k / self.cols, k % self.cols))
            .collect()
    }

    /// In block mode, true when every tile is entirely kept or pruned.
    pub fn respects_tiles(&self) -> bool {
        let Some((tr, tc)) = self.tile else { return true };
        tiles(self.rows, self.cols, tr, tc).iter().all(|unit| {
            let first = self.is_pruned(unit[0].0, unit[0].1);
            unit.iter().all(|&(i, j)| self.is_pruned(i, j) == first)
        })
    }

    /// `W` with pruned entries zeroed.
    pub fn apply(&self, w: &Matrix) -> Result<Matrix> {
        if w.shape() != self.shape() {
            return Err(Error::dims("mask", "mask and weight shapes differ"));
        }
        let mut out = w.clone();
        for (x, &p) in out.as_mut_slice().iter_mut().zip(&self.pruned) {
            if p {
                *x = 0.0;
            }
        }
        Ok(out)
    }

    /// `−W₀` on pruned entries, zero elsewhere.
    pub fn delta(&self, w0: &Matrix) -> Result<Matrix> {
        if w0.shape() != self.shape() {
            return Err(Error::dims("mask", "mask and weight shapes differ"));
        }
        Ok(Matrix::from_fn(self.rows, self.cols, |i, j| {
            if self.is_pruned(i, j) {
                -w0.get(i, j)
            } else {
                0.0
            }
        }))
    }

    /// One ASCII header line `KRONOPT-MASK v1 <rows> <cols> <tile_rows>
    /// <tile_cols>` (tile `0 0` in element mode), then the row-major bitmap
    /// packed LSB-first, 1 meaning pruned.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let (tr, tc) = self.tile.unwrap_or((0, 0));
        writeln!(out, "{MASK_MAGIC} {} {} {tr} {tc}", self.rows, self.cols)?;
        let mut bytes = vec![0u8; self.pruned.len().div_ceil(8)];
        for (k, &p) in self.pruned.iter().enumerate() {
            if p {
                bytes[k / 8] |= 1 << (k % 8);
            }
        }
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        let nl = buf
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("mask header missing".into()))?;
        let header = std::str::from_utf8(&buf[..nl]).map_err(|_| Error::Format("mask header is not text".into()))?;
        let rest = header
            .strip_prefix(MASK_MAGIC)
            .ok_or_else(|| Error::Format("not a mask file".into()))?;
        let nums: std::result::Result<Vec<usize>, _> = rest.split_whitespace().map(str::parse).collect();
        let nums = nums.map_err(|_| Error::Format("bad mask header".into()))?;
        let [rows, cols, tr, tc] = nums[..] else {
            return Err(Error::Format("mask header needs four numbers".into()));
        };
        if rows == 0 || cols == 0 || (tr == 0) != (tc == 0) {
            return Err(Error::Format("bad mask shape".into()));
        }
        let body = &buf[nl + 1..];
        let n = rows * cols;
        if body.len() != n.div_ceil(8) {
            return Err(Error::Format(format!(
                "mask body has {} bytes, expected {}",
                body.len(),
                n.div_ceil(8)
            )));
        }
        let pruned = (0..n).map(|k| body[k / 8] >> (k % 8) & 1 == 1).collect();
        let mask = PruneMask {
            rows,
            cols,
            tile: (tr > 0).then_some((tr, tc)),
            pruned,
        };
        if !mask.respects_tiles() {
            return Err(Error::Format("mask is not constant within its tiles".into()));
        }
        Ok(mask)
    }
}

fn tiles(rows: usize, cols: usize, tr: usize, tc: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for bi in (0..rows).step_by(tr) {
        for bj in (0..cols).step_by(tc) {
            let mut unit = Vec::new();
            for i in bi..(bi + tr).min(rows) {
                for j in bj..(bj + tc).min(cols) {
                    unit.push((i, j));
                }
            }
            out.push(unit);
        }
    }
    out
}

fn check_shapes(w0: &Matrix, grad: &Matrix, l: &Matrix, r: &Matrix) -> Result<()> {
    let (m, n) = w0.shape();
    if grad.shape() != (m, n) || l.shape() != (m, m) || r.shape() != (n, n) {
        return Err(Error::dims(
            "taylor model",
            format!(
                "W {m}×{n}, grad {:?}, L {:?}, R {:?}",
                grad.shape(),
                l.shape(),
                r.shape()
            ),
        ));
    }
    Ok(())
}

/// `ℒ₀ + Σ(ΔW ⊙ ∇ℒ) + Σ(ΔW ⊙ (L·ΔW·R))`.
pub fn taylor_predicted_loss(l0: f64, dw: &Matrix, grad: &Matrix, l: &Matrix, r: &Matrix) -> Result<f64> {
    check_shapes(dw, grad, l, r)?;
    let q = matmul(&matmul(l, dw)?, r)?;
    let lin: f64 = dw.as_slice().iter().zip(grad.as_slice()).map(|(a, b)| a * b).sum();
    let quad: f64 = dw.as_slice().iter().zip(q.as_slice()).map(|(a, b)| a * b).sum();
    Ok(l0 + lin + quad)
}

fn is_symmetric(m: &Matrix) -> bool {
    let tol = 1e-12 * m.max_abs().max(1.0);
    (0..m.rows()).all(|i| (0..i).all(|j| (m.get(i, j) - m.get(j, i)).abs() <= tol))
}

/// Greedy selection of `k` units minimizing the Taylor model, re-scoring
/// every remaining unit against the entries already removed. Ties go to
/// the unit whose top-left entry is lowest in `(i, j)` order. Returns the
/// mask and the model's predicted loss change.
pub fn greedy_prune(
    w0: &Matrix,
    grad: &Matrix,
    l: &Matrix,
    r: &Matrix,
    k: usize,
    mode: PruneMode,
) -> Result<(PruneMask, f64)> {
    check_shapes(w0, grad, l, r)?;
    if !is_symmetric(l) || !is_symmetric(r) {
        return Err(Error::InvalidArgument("pruning factors must be symmetric".into()));
    }
    let (m, n) = w0.shape();
    let (units, tile) = match mode {
        PruneMode::Element => (tiles(m, n, 1, 1), None),
        PruneMode::Block { rows, cols } => {
            if rows == 0 || cols == 0 {
                return Err(Error::InvalidArgument("tile dimensions must be positive".into()));
            }
            (tiles(m, n, rows, cols), Some((rows, cols)))
        }
    };
    if k > units.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot prune {k} of {} units",
            units.len()
        )));
    }
    let mut mask = PruneMask::empty(m, n, tile);
    let mut taken = vec![false; units.len()];
    // `lwr` tracks L·ΔW·R for the current mask.
    let mut lwr = Matrix::zeros(m, n);
    let mut total = 0.0;
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (u, unit) in units.iter().enumerate() {
            if taken[u] {
                continue;
            }
            let score = unit_increment(unit, w0, grad, l, r, &lwr);
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((u, score));
            }
        }
        let (u, score) = best.expect("k ≤ number of units");
        taken[u] = true;
        total += score;
        for &(i, j) in &units[u] {
            mask.set(i, j, true);
            let delta = -w0.get(i, j);
            if delta == 0.0 {
                continue;
            }
            for p in 0..m {
                let lp = l.get(p, i) * delta;
                for (q, x) in lwr.row_mut(p).iter_mut().enumerate() {
                    *x += lp * r.get(j, q);
                }
            }
        }
        crate::flops::add((2 * m * n * units[u].len()) as u64);
    }
    Ok((mask, total))
}

/// Model change from adding `unit` to the current mask:
/// `Σ δ·g + 2Σ δ·(LΔWR) + Σ_{u,v} δ_u δ_v L_{iu,iv} R_{ju,jv}`.
fn unit_increment(unit: &[(usize, usize)], w0: &Matrix, grad: &Matrix, l: &Matrix, r: &Matrix, lwr: &Matrix) -> f64 {
    let mut s = 0.0;
    for &(i, j) in unit {
        let d = -w0.get(i, j);
        s += d * grad.get(i, j) + 2.0 * d * lwr.get(i, j);
    }
    for &(i, j) in unit {
        let d = -w0.get(i, j);
        if d == 0.0 {
            continue;
        }
        for &(p, q) in unit {
            s += d * -w0.get(p, q) * l.get(i, p) * r.get(j, q);
        }
    }
    s
}

/// Scores of every single entry in isolation, row-major.
pub fn element_scores(w0: &Matrix, grad: &Matrix, l: &Matrix, r: &Matrix) -> Result<Vec<PruneScore>> {
    check_shapes(w0, grad, l, r)?;
    let (m, n) = w0.shape();
    let zero = Matrix::zeros(m, n);
    Ok((0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| PruneScore {
            i,
            j,
            delta_loss: unit_increment(&[(i, j)], w0, grad, l, r, &zero),
        })
        .collect())
}

/// Scoring factors `(L, R)` recovered from MKOR's stored inverses.
pub fn factors_from_state(state: &FactorState) -> Result<(Matrix, Matrix)> {
    Ok((direct_inverse(&state.l_inv)?, direct_inverse(&state.r_inv)?))
}

/// Empirical Kronecker factors of one layer's curvature for the quadratic
/// model above: `L = G·Gᵀ/(2b) + λI` and `R = A·Aᵀ/b + λI`. The ½ of the
/// second-order Taylor term is folded into `L`.
pub fn empirical_factors(capture: &LayerCapture, damping: f64) -> Result<(Matrix, Matrix)> {
    let b = capture.batch() as f64;
    let l = matmul_transpose_b(&capture.g, &capture.g)?;
    let r = matmul_transpose_b(&capture.a_prev, &capture.a_prev)?;
    Ok((
        add_identity(&scale(&l, 0.5 / b), damping)?,
        add_identity(&scale(&r, 1.0 / b), damping)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PruneOutcome {
    pub loss_before: f64,
    pub loss_after: f64,
    pub true_delta: f64,
    pub predicted_delta: f64,
}

/// Applies `mask` to layer `layer` and compares the true loss change on
/// `data` with the Taylor prediction from the gradient at the current
/// weights and the factors `(l, r)`.
pub fn prune_and_measure(
    net: &Network,
    layer: usize,
    data: &Dataset,
    mask: &PruneMask,
    l: &Matrix,
    r: &Matrix,
    kind: LossKind,
) -> Result<(Network, PruneOutcome)> {
    let w0 = &net
        .layers
        .get(layer)
        .ok_or_else(|| Error::InvalidArgument(format!("no layer {layer}")))?
        .weight;
    let (loss_before, caps) = net.gradients(&data.inputs, &data.targets, kind)?;
    let dw = mask.delta(w0)?;
    let predicted = taylor_predicted_loss(0.0, &dw, &caps[layer].w_grad, l, r)?;
    let mut pruned = net.clone();
    pruned.layers[layer].weight = mask.apply(w0)?;
    let loss_after = pruned.loss(&data.inputs, &data.targets, kind)?;
    Ok((
        pruned,
        PruneOutcome {
            loss_before,
            loss_after,
            true_delta: loss_after - loss_before,
            predicted_delta: predicted,
        },
    ))
}
