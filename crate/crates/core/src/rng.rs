//! Seeded operand generation.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::matrix::Int16Matrix;

/// Deterministic source of test operands.
///
/// Values are uniform in `[-128, 127]` by default, which keeps products far
/// from the saturation limits; the `full_range` variants cover all of `i16`.
pub struct OperandRng {
    inner: SplitMix64,
}

impl OperandRng {
    pub fn new(seed: u64) -> Self {
        OperandRng {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn small(&mut self) -> i16 {
        self.inner.random_range(-128..=127)
    }

    pub fn full(&mut self) -> i16 {
        self.inner.random()
    }

    pub fn value(&mut self, full_range: bool) -> i16 {
        if full_range {
            self.full()
        } else {
            self.small()
        }
    }

    pub fn values(&mut self, len: usize, full_range: bool) -> Vec<i16> {
        (0..len).map(|_| self.value(full_range)).collect()
    }

    pub fn matrix(&mut self, rows: usize, cols: usize, full_range: bool) -> Int16Matrix {
        Int16Matrix::from_fn(rows, cols, |_, _| self.value(full_range))
    }

    pub fn small_matrix(&mut self, rows: usize, cols: usize) -> Int16Matrix {
        self.matrix(rows, cols, false)
    }

    pub fn full_range_matrix(&mut self, rows: usize, cols: usize) -> Int16Matrix {
        self.matrix(rows, cols, true)
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.random_range(lo..=hi)
    }
}
