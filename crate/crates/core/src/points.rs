use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QmcError, Result};

/// How a batch was produced; carried into sidecar files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub generator: String,
    pub order: String,
    pub randomization: String,
    pub seed: Option<u64>,
}

/// `reps x n x d` unit-cube coordinates stored row-major as `(r, i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBatch {
    reps: usize,
    n: usize,
    d: usize,
    data: Vec<f64>,
    pub meta: BatchMeta,
}

impl PointBatch {
    pub fn new(reps: usize, n: usize, d: usize, data: Vec<f64>, meta: BatchMeta) -> Result<Self> {
        let expected = reps * n * d;
        if data.len() != expected {
            return Err(QmcError::Length {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            reps,
            n,
            d,
            data,
            meta,
        })
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, i: usize, j: usize) -> f64 {
        self.data[(r * self.n + i) * self.d + j]
    }

    pub fn point(&self, r: usize, i: usize) -> &[f64] {
        let start = (r * self.n + i) * self.d;
        &self.data[start..start + self.d]
    }

    /// All `n x d` coordinates of replication `r`.
    pub fn replication(&self, r: usize) -> &[f64] {
        let len = self.n * self.d;
        &self.data[r * len..(r + 1) * len]
    }
}

/// A randomized point generator whose replications can be filled
/// independently, in any order, and extended without regenerating.
pub trait PointGenerator: Sync {
    fn dim(&self) -> usize;

    fn replications(&self) -> usize;

    /// Maximum number of points per replication.
    fn capacity(&self) -> u128;

    fn meta(&self) -> BatchMeta;

    /// Writes points `start..start + out.len() / dim` of replication `rep`.
    fn fill(&self, rep: usize, start: u64, out: &mut [f64]) -> Result<()>;

    fn check_range(&self, start: u64, count: usize) -> Result<()> {
        let end = start as u128 + count as u128;
        if end > self.capacity() {
            return Err(QmcError::Exhausted {
                requested: end,
                capacity: self.capacity(),
            });
        }
        Ok(())
    }

    /// First `n` points of every replication.
    fn batch(&self, n: usize) -> Result<PointBatch> {
        self.check_range(0, n)?;
        let d = self.dim();
        let reps = self.replications();
        let mut data = vec![0.0; reps * n * d];
        if n > 0 && d > 0 {
            data.par_chunks_mut(n * d)
                .enumerate()
                .try_for_each(|(r, chunk)| self.fill(r, 0, chunk))?;
        }
        PointBatch::new(reps, n, d, data, self.meta())
    }
}
