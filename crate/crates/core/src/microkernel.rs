//! Bit-exact emulation of the AIE micro-kernel (loop L6).
//!
//! The tile exposes four 768-bit accumulator registers, each viewed as 16
//! lanes of 48 bits. The `mac16` intrinsic performs 32 INT16 MACs per cycle:
//! a 16-lane vector times a scalar, twice, into one accumulator register. The
//! 16×4 kernel maps output column `j` of `Cr` to register `j` and consumes two
//! k-steps per `mac16` call.

use crate::costmodel::{predict_ukr_cycles, CostConstants};
use crate::machine::MachineModel;
use crate::matrix::DType;
use crate::scalar::{acc48_mac, writeback, Acc48, WritebackMode};
use crate::{Error, Result};

/// Lanes per accumulator register.
pub const LANES: usize = 16;
/// Accumulator registers per tile.
pub const ACC_REGS: usize = 4;
/// INT16 MACs performed by one `mac16` call.
pub const MACS_PER_MAC16: u64 = 32;

pub type Lanes = [Acc48; LANES];

/// The tile's four accumulator registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccRegisterFile {
    pub regs: [Lanes; ACC_REGS],
}

impl Default for AccRegisterFile {
    fn default() -> Self {
        AccRegisterFile {
            regs: [[Acc48::ZERO; LANES]; ACC_REGS],
        }
    }
}

impl AccRegisterFile {
    /// Loads a 16×4 row-major micro-tile, column `j` into register `j`.
    pub fn load_16x4(cr: &[i16]) -> Self {
        let mut file = Self::default();
        for (j, reg) in file.regs.iter_mut().enumerate() {
            for (i, lane) in reg.iter_mut().enumerate() {
                *lane = Acc48::from_i16(cr[i * ACC_REGS + j]);
            }
        }
        file
    }

    /// Stores the registers back as a 16×4 row-major tile.
    pub fn store_16x4(&self, mode: WritebackMode) -> Vec<i16> {
        let mut cr = vec![0; LANES * ACC_REGS];
        for (j, reg) in self.regs.iter().enumerate() {
            for (i, lane) in reg.iter().enumerate() {
                cr[i * ACC_REGS + j] = writeback(*lane, mode);
            }
        }
        cr
    }
}

/// Micro-kernel dimensions and element type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MicroKernelShape {
    pub mr: usize,
    pub nr: usize,
    pub dtype: DType,
}

impl MicroKernelShape {
    pub const REFERENCE: MicroKernelShape = MicroKernelShape {
        mr: 16,
        nr: 4,
        dtype: DType::Int16,
    };

    pub fn new(mr: usize, nr: usize) -> Result<Self> {
        if mr == 0 || nr == 0 || mr * nr > 1 << 20 {
            return Err(Error::invalid(format!("unsupported micro-kernel shape {mr}x{nr}")));
        }
        Ok(MicroKernelShape {
            mr,
            nr,
            dtype: DType::Int16,
        })
    }

    pub fn is_reference(&self) -> bool {
        self.mr == 16 && self.nr == 4 && self.dtype == DType::Int16
    }

    pub fn tile_len(&self) -> usize {
        self.mr * self.nr
    }
}

/// Register-resource accounting for a micro-kernel shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceReport {
    pub acc_lanes_needed: usize,
    pub acc_lanes_available: usize,
    pub spill: bool,
    /// `min(1, needed / available)`.
    pub acc_utilization: f64,
    /// `needed / available`, unclamped.
    pub acc_ratio: f64,
    /// Bytes of A and B operands held in vector registers per unrolled
    /// iteration (four k-steps). Descriptive only.
    pub vreg_bytes_estimate: usize,
    pub vreg_ratio: f64,
}

/// Accumulator and vector-register demand of `shape` on `machine`.
pub fn resource_check(shape: &MicroKernelShape, machine: &MachineModel) -> ResourceReport {
    let needed = shape.mr * shape.nr;
    let available = machine.acc_lanes as usize;
    let ratio = needed as f64 / available as f64;
    let vreg = 4 * (shape.mr + shape.nr) * shape.dtype.elem_bytes();
    ResourceReport {
        acc_lanes_needed: needed,
        acc_lanes_available: available,
        spill: needed > available,
        acc_utilization: ratio.min(1.0),
        acc_ratio: ratio,
        vreg_bytes_estimate: vreg,
        vreg_ratio: vreg as f64 / machine.reg_bytes as f64,
    }
}

/// Output of one micro-kernel invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UkrResult {
    /// Updated mr×nr micro-tile, row-major.
    pub cr: Vec<i16>,
    /// Cycle estimate from the cost model, overhead and spill included.
    pub emulated_cycles: u64,
    /// One cycle per `mac16` issued (zero for the scalar kernel).
    pub nominal_cycles: u64,
    pub mac_count: u64,
    pub spill: bool,
}

/// One `mac16`: `acc[l] += a0[l]·b0 + a1[l]·b1` for every lane, 48-bit wrap.
#[inline]
pub fn mac16_emu(acc: Lanes, a0: &[i16; LANES], a1: &[i16; LANES], b0: i16, b1: i16) -> Lanes {
    let mut out = acc;
    for l in 0..LANES {
        out[l] = acc48_mac(acc48_mac(out[l], a0[l], b0), a1[l], b1);
    }
    out
}

fn check_panels(shape: &MicroKernelShape, ar: &[i16], br: &[i16], cr: &[i16], kc: usize) -> Result<()> {
    if kc == 0 {
        return Err(Error::invalid("kc must be at least 1"));
    }
    let (mr, nr) = (shape.mr, shape.nr);
    if ar.len() != mr * kc || br.len() != kc * nr || cr.len() != mr * nr {
        return Err(Error::invalid(format!(
            "panel sizes Ar={} Br={} Cr={} do not match {mr}x{nr} kernel with kc={kc} (expected {}, {}, {})",
            ar.len(),
            br.len(),
            cr.len(),
            mr * kc,
            kc * nr,
            mr * nr
        )));
    }
    Ok(())
}

/// The reference 16×4 micro-kernel built from `mac16` calls.
///
/// `ar` is a packed 16×kc micro-panel (16 contiguous elements per k index),
/// `br` a packed kc×4 micro-panel (4 contiguous elements per k index), and
/// `cr` a 16×4 row-major micro-tile. `kc` must be even.
pub fn ukr_16x4(
    ar: &[i16],
    br: &[i16],
    cr: &[i16],
    kc: usize,
    mode: WritebackMode,
    constants: &CostConstants,
    machine: &MachineModel,
) -> Result<UkrResult> {
    let shape = MicroKernelShape::REFERENCE;
    check_panels(&shape, ar, br, cr, kc)?;
    if !kc.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "kc={kc} is odd; the 16x4 kernel consumes two k-steps per mac16"
        )));
    }
    let mut file = AccRegisterFile::load_16x4(cr);
    let mut mac16_calls = 0u64;
    for (a_pair, b_pair) in ar.chunks_exact(2 * LANES).zip(br.chunks_exact(2 * ACC_REGS)) {
        let (a0, a1) = a_pair.split_at(LANES);
        let a0: &[i16; LANES] = a0.try_into().expect("lane width");
        let a1: &[i16; LANES] = a1.try_into().expect("lane width");
        let (b0, b1) = b_pair.split_at(ACC_REGS);
        for j in 0..ACC_REGS {
            file.regs[j] = mac16_emu(file.regs[j], a0, a1, b0[j], b1[j]);
            mac16_calls += 1;
        }
    }
    debug_assert_eq!(mac16_calls, 2 * kc as u64);
    Ok(UkrResult {
        cr: file.store_16x4(mode),
        emulated_cycles: predict_ukr_cycles(kc, &shape, constants, machine),
        nominal_cycles: mac16_calls,
        mac_count: mac16_calls * MACS_PER_MAC16,
        spill: false,
    })
}

/// Scalar micro-kernel for any mr×nr shape and any kc.
#[allow(clippy::too_many_arguments)]
pub fn ukr_generic(
    shape: &MicroKernelShape,
    ar: &[i16],
    br: &[i16],
    cr: &[i16],
    kc: usize,
    mode: WritebackMode,
    constants: &CostConstants,
    machine: &MachineModel,
) -> Result<UkrResult> {
    check_panels(shape, ar, br, cr, kc)?;
    let (mr, nr) = (shape.mr, shape.nr);
    let mut acc: Vec<Acc48> = cr.iter().map(|&v| Acc48::from_i16(v)).collect();
    for (a_col, b_row) in ar.chunks_exact(mr).zip(br.chunks_exact(nr)) {
        for (i, &a) in a_col.iter().enumerate() {
            for (j, &b) in b_row.iter().enumerate() {
                let lane = &mut acc[i * nr + j];
                *lane = acc48_mac(*lane, a, b);
            }
        }
    }
    Ok(UkrResult {
        cr: acc.into_iter().map(|v| writeback(v, mode)).collect(),
        emulated_cycles: predict_ukr_cycles(kc, shape, constants, machine),
        nominal_cycles: 0,
        mac_count: (mr * nr * kc) as u64,
        spill: resource_check(shape, machine).spill,
    })
}
