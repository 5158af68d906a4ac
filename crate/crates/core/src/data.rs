//! In-memory datasets stored column-per-sample.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `features × n`.
    pub inputs: Matrix,
    /// `targets × n`.
    pub targets: Matrix,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.cols() != targets.cols() {
            return Err(Error::dims(
                "dataset",
                format!("{} inputs but {} targets", inputs.cols(), targets.cols()),
            ));
        }
        Ok(Dataset { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.rows()
    }

    pub fn target_dim(&self) -> usize {
        self.targets.rows()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select_columns(idx),
            targets: self.targets.select_columns(idx),
        }
    }

    /// Batch `t` of size `b` in cyclic order: samples `(t·b + k) mod n`.
    /// Batches larger than the dataset are clipped to the whole dataset.
    pub fn batch(&self, t: u64, b: usize) -> Dataset {
        let n = self.len();
        let b = b.min(n);
        let start = (t as u128 * b as u128 % n as u128) as usize;
        let idx: Vec<usize> = (0..b).map(|k| (start + k) % n).collect();
        self.select(&idx)
    }

    /// Shuffled by `seed`, then dealt into `workers` contiguous shards of
    /// equal size. The remainder is dropped.
    pub fn shard(&self, workers: usize, seed: u64) -> Result<Vec<Dataset>> {
        if workers == 0 {
            return Err(Error::InvalidArgument("zero workers".into()));
        }
        let per = self.len() / workers;
        if per == 0 {
            return Err(Error::InvalidArgument(format!(
                "{} samples cannot fill {workers} shards",
                self.len()
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        Rng::new(seed).shuffle(&mut idx);
        Ok((0..workers)
            .map(|w| self.select(&idx[w * per..(w + 1) * per]))
            .collect())
    }
}
