//! Row-major `i16` matrices, problem and blocking descriptors, and the
//! triple-loop reference GEMM.

use std::fmt;

use crate::scalar::{acc48_mac, writeback, Acc48, WritebackMode};
use crate::{Error, Result};

/// Element datatypes known to the machine and cost models.
///
/// Arithmetic is implemented for [`DType::Int16`] only; the other tags carry
/// peak rates and element sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DType {
    Int8,
    #[default]
    Int16,
    Fp32,
}

impl DType {
    pub const ALL: [DType; 3] = [DType::Int8, DType::Int16, DType::Fp32];

    pub const fn elem_bytes(self) -> usize {
        match self {
            DType::Int8 => 1,
            DType::Int16 => 2,
            DType::Fp32 => 4,
        }
    }

    /// Numeric tag used in the pre-packed weight file.
    pub const fn code(self) -> u32 {
        match self {
            DType::Int16 => 0,
            DType::Int8 => 1,
            DType::Fp32 => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<DType> {
        DType::ALL.into_iter().find(|d| d.code() == code)
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DType::Int8 => "INT8",
            DType::Int16 => "INT16",
            DType::Fp32 => "FP32",
        })
    }
}

/// Dense row-major matrix of `i16` with an explicit leading dimension.
#[derive(Clone)]
pub struct Int16Matrix {
    rows: usize,
    cols: usize,
    ld: usize,
    data: Vec<i16>,
}

impl Int16Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Int16Matrix {
            rows,
            cols,
            ld: cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<i16>) -> Result<Self> {
        Self::with_ld(rows, cols, cols, data)
    }

    pub fn with_ld(rows: usize, cols: usize, ld: usize, data: Vec<i16>) -> Result<Self> {
        if ld < cols {
            return Err(Error::invalid(format!(
                "leading dimension {ld} is smaller than column count {cols}"
            )));
        }
        if data.len() < rows * ld {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix with ld {ld} needs {} elements, got {}",
                rows * ld,
                data.len()
            )));
        }
        Ok(Int16Matrix { rows, cols, ld, data })
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows<R: AsRef<[i16]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Int16Matrix {
            rows: rows.len(),
            cols,
            ld: cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> i16) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| i16::from(i == j))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn ld(&self) -> usize {
        self.ld
    }

    /// Backing storage, including any padding between rows.
    pub fn as_slice(&self) -> &[i16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i16 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.ld + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: i16) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.ld + j] = value;
    }

    pub fn row(&self, i: usize) -> &[i16] {
        &self.data[i * self.ld..i * self.ld + self.cols]
    }

    /// Elements in logical row-major order, without padding.
    pub fn to_vec(&self) -> Vec<i16> {
        (0..self.rows).flat_map(|i| self.row(i).iter().copied()).collect()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

impl PartialEq for Int16Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape() && (0..self.rows).all(|i| self.row(i) == other.row(i))
    }
}

impl Eq for Int16Matrix {}

impl fmt::Debug for Int16Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Int16Matrix {}x{} (ld {}) ", self.rows, self.cols, self.ld)?;
        f.debug_list()
            .entries((0..self.rows.min(8)).map(|i| self.row(i)))
            .finish()
    }
}

/// GEMM problem size: A is m×k, B is k×n, C is m×n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProblemDims {
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

impl ProblemDims {
    pub fn new(m: usize, n: usize, k: usize) -> Result<Self> {
        if m == 0 || n == 0 || k == 0 {
            return Err(Error::invalid(format!(
                "problem dimensions must be positive, got m={m} n={n} k={k}"
            )));
        }
        Ok(ProblemDims { m, n, k })
    }

    pub fn macs(&self) -> u64 {
        self.m as u64 * self.n as u64 * self.k as u64
    }

    /// Checks that the three operands have the shapes these dims describe.
    pub fn check_operands(&self, a: (usize, usize), b: (usize, usize), c: (usize, usize)) -> Result<()> {
        if a != (self.m, self.k) || b != (self.k, self.n) || c != (self.m, self.n) {
            return Err(Error::invalid(format!(
                "operand shapes A{a:?} B{b:?} C{c:?} do not match m={} n={} k={}",
                self.m, self.n, self.k
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ProblemDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.m, self.n, self.k)
    }
}

/// Cache configuration parameters and micro-kernel shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockParams {
    pub mc: usize,
    pub nc: usize,
    pub kc: usize,
    pub mr: usize,
    pub nr: usize,
}

impl BlockParams {
    /// Micro-kernel rows of the reference AIE kernel.
    pub const REF_MR: usize = 16;
    /// Micro-kernel columns of the reference AIE kernel.
    pub const REF_NR: usize = 4;

    pub fn new(mc: usize, nc: usize, kc: usize, mr: usize, nr: usize) -> Result<Self> {
        let p = BlockParams { mc, nc, kc, mr, nr };
        p.check()?;
        Ok(p)
    }

    /// Reference 16×4 micro-kernel with the given cache parameters.
    pub fn reference(mc: usize, nc: usize, kc: usize) -> Result<Self> {
        Self::new(mc, nc, kc, Self::REF_MR, Self::REF_NR)
    }

    pub fn is_reference_shape(&self) -> bool {
        self.mr == Self::REF_MR && self.nr == Self::REF_NR
    }

    fn check(&self) -> Result<()> {
        let BlockParams { mc, nc, kc, mr, nr } = *self;
        if [mc, nc, kc, mr, nr].contains(&0) {
            return Err(Error::invalid(format!("blocking parameters must be positive: {self}")));
        }
        if mr > mc || nr > nc {
            return Err(Error::invalid(format!("micro-tile exceeds block: {self}")));
        }
        if mc % mr != 0 || nc % nr != 0 {
            return Err(Error::invalid(format!(
                "mc must be a multiple of mr and nc a multiple of nr: {self}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for BlockParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mc={} nc={} kc={} mr={} nr={}",
            self.mc, self.nc, self.kc, self.mr, self.nr
        )
    }
}

/// Triple-loop `C + A·B` with 48-bit accumulation, returning a new matrix.
///
/// This is the correctness reference for every blocked path.
pub fn naive_gemm_oracle(
    a: &Int16Matrix,
    b: &Int16Matrix,
    c: &Int16Matrix,
    mode: WritebackMode,
) -> Result<Int16Matrix> {
    let (m, k) = a.shape();
    let n = b.cols();
    if b.rows() != k || c.shape() != (m, n) {
        return Err(Error::invalid(format!(
            "dimension mismatch: A {:?}, B {:?}, C {:?}",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    let mut out = Int16Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let mut acc = Acc48::from_i16(c.get(i, j));
            for p in 0..k {
                acc = acc48_mac(acc, a.get(i, p), b.get(p, j));
            }
            out.set(i, j, writeback(acc, mode));
        }
    }
    Ok(out)
}
