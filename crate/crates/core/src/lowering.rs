//! Convolution as GEMM through IM2ROW lowering.
//!
//! With filters as A (co × ci·kh·kw) and the lowered input as B
//! (ci·kh·kw × oh·ow), one GEMM produces the output activations C
//! (co × oh·ow). Column `oy·ow + ox` of B holds the input patch under output
//! pixel (oy, ox), rows ordered by (ci, ky, kx).

use std::io::{Read, Write};

use crate::costmodel::CostConstants;
use crate::driver::{gemm_blocked, GemmOptions, GemmRun};
use crate::machine::MachineModel;
use crate::matrix::{BlockParams, Int16Matrix, ProblemDims};
use crate::scalar::{acc48_mac, writeback, Acc48, WritebackMode};
use crate::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 6] = b"T3I16\n";

/// Channel-major 3-D tensor: value `(ch, y, x)` at `(ch·h + y)·w + x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor3 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<i16>,
}

impl Tensor3 {
    pub fn new(c: usize, h: usize, w: usize, data: Vec<i16>) -> Result<Self> {
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::invalid(format!("tensor dims must be positive, got {c}x{h}x{w}")));
        }
        if data.len() != c * h * w {
            return Err(Error::invalid(format!(
                "{c}x{h}x{w} tensor needs {} values, got {}",
                c * h * w,
                data.len()
            )));
        }
        Ok(Tensor3 { c, h, w, data })
    }

    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Tensor3 {
            c,
            h,
            w,
            data: vec![0; c * h * w],
        }
    }

    #[inline]
    pub fn get(&self, ch: usize, y: usize, x: usize) -> i16 {
        self.data[(ch * self.h + y) * self.w + x]
    }

    /// Reads a tensor in the `T3I16` binary format.
    pub fn read_from(mut source: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |offset: usize, message: String| Error::Format {
            offset: offset as u64,
            message,
        };
        if !bytes.starts_with(TENSOR_MAGIC) {
            return Err(fail(0, "bad magic, expected \"T3I16\\n\"".into()));
        }
        let start = TENSOR_MAGIC.len();
        let nl = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| fail(start, "missing dimension line".into()))?;
        let line = std::str::from_utf8(&bytes[start..start + nl]).map_err(|_| fail(start, "dimension line is not ASCII".into()))?;
        let dims: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| fail(start, format!("bad dimension line {line:?}")))?;
        let [c, h, w] = dims[..] else {
            return Err(fail(start, format!("expected three dimensions, got {line:?}")));
        };
        if c == 0 || h == 0 || w == 0 {
            return Err(fail(start, format!("dimensions must be positive, got {line:?}")));
        }
        let payload = start + nl + 1;
        let expected = 2 * c * h * w;
        let available = bytes.len() - payload;
        if available < expected {
            return Err(fail(bytes.len(), format!("truncated payload: {available} of {expected} bytes")));
        }
        if available > expected {
            return Err(fail(payload + expected, format!("{} trailing bytes", available - expected)));
        }
        let data = bytes[payload..]
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]))
            .collect();
        Ok(Tensor3 { c, h, w, data })
    }

    pub fn write_to(&self, mut sink: impl Write) -> Result<()> {
        let mut buf = Vec::with_capacity(32 + 2 * self.data.len());
        buf.extend_from_slice(TENSOR_MAGIC);
        buf.extend_from_slice(format!("{} {} {}\n", self.c, self.h, self.w).as_bytes());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf)?;
        Ok(())
    }
}

/// Convolution filters, `co × ci × kh × kw`, row-major in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterBank {
    pub co: usize,
    pub ci: usize,
    pub kh: usize,
    pub kw: usize,
    pub data: Vec<i16>,
}

impl FilterBank {
    pub fn new(co: usize, ci: usize, kh: usize, kw: usize, data: Vec<i16>) -> Result<Self> {
        if [co, ci, kh, kw].contains(&0) {
            return Err(Error::invalid(format!("filter dims must be positive, got {co}x{ci}x{kh}x{kw}")));
        }
        if data.len() != co * ci * kh * kw {
            return Err(Error::invalid(format!(
                "{co}x{ci}x{kh}x{kw} filter bank needs {} values, got {}",
                co * ci * kh * kw,
                data.len()
            )));
        }
        Ok(FilterBank { co, ci, kh, kw, data })
    }

    #[inline]
    pub fn get(&self, o: usize, ch: usize, ky: usize, kx: usize) -> i16 {
        self.data[((o * self.ci + ch) * self.kh + ky) * self.kw + kx]
    }

    /// The filters as the GEMM's A operand, co × ci·kh·kw.
    pub fn as_matrix(&self) -> Int16Matrix {
        Int16Matrix::from_vec(self.co, self.ci * self.kh * self.kw, self.data.clone()).expect("sizes checked at construction")
    }
}

/// Output extent along one axis, if the window tiles the padded input exactly.
pub fn output_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 || kernel == 0 {
        return Err(Error::invalid("stride and kernel extent must be positive"));
    }
    let padded = input + 2 * pad;
    if padded < kernel {
        return Err(Error::invalid(format!(
            "kernel extent {kernel} exceeds padded input {padded}"
        )));
    }
    if !(padded - kernel).is_multiple_of(stride) {
        return Err(Error::invalid(format!(
            "output extent ({input} + 2·{pad} - {kernel}) / {stride} + 1 is not integral"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Lowers `x` into the (ci·kh·kw) × (oh·ow) patch matrix.
pub fn im2row(x: &Tensor3, kh: usize, kw: usize, stride: usize, pad: usize) -> Result<Int16Matrix> {
    let oh = output_extent(x.h, kh, stride, pad)?;
    let ow = output_extent(x.w, kw, stride, pad)?;
    let mut out = Int16Matrix::zeros(x.c * kh * kw, oh * ow);
    for ch in 0..x.c {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ch * kh + ky) * kw + kx;
                for oy in 0..oh {
                    let Some(y) = (oy * stride + ky).checked_sub(pad).filter(|&y| y < x.h) else {
                        continue;
                    };
                    for ox in 0..ow {
                        if let Some(xx) = (ox * stride + kx).checked_sub(pad).filter(|&xx| xx < x.w) {
                            out.set(row, oy * ow + ox, x.get(ch, y, xx));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn check_shapes(x: &Tensor3, f: &FilterBank, stride: usize, pad: usize) -> Result<(usize, usize)> {
    if x.c != f.ci {
        return Err(Error::invalid(format!(
            "input has {} channels, filters expect {}",
            x.c, f.ci
        )));
    }
    Ok((output_extent(x.h, f.kh, stride, pad)?, output_extent(x.w, f.kw, stride, pad)?))
}

/// Direct convolution with 48-bit accumulation, used as the reference.
pub fn conv_direct_oracle(x: &Tensor3, f: &FilterBank, stride: usize, pad: usize, mode: WritebackMode) -> Result<Tensor3> {
    let (oh, ow) = check_shapes(x, f, stride, pad)?;
    let mut y = Tensor3::zeros(f.co, oh, ow);
    for o in 0..f.co {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = Acc48::ZERO;
                for ch in 0..f.ci {
                    for ky in 0..f.kh {
                        for kx in 0..f.kw {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= x.h as isize || ix >= x.w as isize {
                                continue;
                            }
                            acc = acc48_mac(acc, f.get(o, ch, ky, kx), x.get(ch, iy as usize, ix as usize));
                        }
                    }
                }
                y.data[(o * oh + oy) * ow + ox] = writeback(acc, mode);
            }
        }
    }
    Ok(y)
}

/// GEMM problem size of a convolution: (co, oh·ow, ci·kh·kw).
pub fn conv_dims(x: &Tensor3, f: &FilterBank, stride: usize, pad: usize) -> Result<ProblemDims> {
    let (oh, ow) = check_shapes(x, f, stride, pad)?;
    ProblemDims::new(f.co, oh * ow, f.ci * f.kh * f.kw)
}

/// Convolution through `im2row` and the blocked GEMM.
#[allow(clippy::too_many_arguments)]
pub fn conv_gemm(
    x: &Tensor3,
    f: &FilterBank,
    stride: usize,
    pad: usize,
    params: &BlockParams,
    mode: WritebackMode,
    machine: &MachineModel,
    constants: &CostConstants,
) -> Result<(Tensor3, GemmRun)> {
    let (oh, ow) = check_shapes(x, f, stride, pad)?;
    let dims = conv_dims(x, f, stride, pad)?;
    let a = f.as_matrix();
    let b = im2row(x, f.kh, f.kw, stride, pad)?;
    let c = Int16Matrix::zeros(dims.m, dims.n);
    let options = GemmOptions { mode, pack_bc: true };
    let run = gemm_blocked(&a, &b, &c, &dims, params, &options, machine, constants)?;
    let y = Tensor3::new(f.co, oh, ow, run.c.to_vec())?;
    Ok((y, run))
}
