//! The five-loop blocked GEMM around the micro-kernel, with data-movement
//! accounting per memory level.
//!
//! Loop order, outermost first:
//!
//! ```text
//! L1  jc over n  step nc    Bc buffer in DDR
//! L2  pc over k  step kc    pack Bc
//! L3  ic over m  step mc    pack Ac (or take the pre-packed block)
//! L4  jr over nc step nr    copy Br into local memory
//! L5  ir over mc step mr    micro-kernel on (Ar, Br, Cr)
//! ```

use std::borrow::Cow;

use crate::costmodel::{predict_gemm, CostConstants, GemmPrediction};
use crate::error::Violation;
use crate::machine::{validate_params, MachineModel};
use crate::matrix::{BlockParams, DType, Int16Matrix, ProblemDims};
use crate::microkernel::{ukr_16x4, ukr_generic, MicroKernelShape};
use crate::packing::{pack_ac, pack_bc, AcBlock, PackedA};
use crate::scalar::WritebackMode;
use crate::{Error, Result};

const ELEM: u64 = 2;

/// Left operand: a plain matrix packed on the fly, or pre-packed weights.
#[derive(Debug, Clone, Copy)]
pub enum AOperand<'a> {
    Matrix(&'a Int16Matrix),
    Prepacked(&'a PackedA),
}

impl<'a> From<&'a Int16Matrix> for AOperand<'a> {
    fn from(a: &'a Int16Matrix) -> Self {
        AOperand::Matrix(a)
    }
}

impl<'a> From<&'a PackedA> for AOperand<'a> {
    fn from(a: &'a PackedA) -> Self {
        AOperand::Prepacked(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GemmOptions {
    pub mode: WritebackMode,
    /// Pack each kc×nc block of B into a Bc buffer. When off, every Br is
    /// gathered straight from B.
    pub pack_bc: bool,
}

impl Default for GemmOptions {
    fn default() -> Self {
        GemmOptions {
            mode: WritebackMode::Wrap16,
            pack_bc: true,
        }
    }
}

/// Bytes moved between memory levels during one GEMM, and peak occupancy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransferStats {
    /// DDR → local memory, one Br per L4 iteration.
    pub bytes_br_copied: u64,
    /// FPGA RAM → vector registers, one Ar per micro-kernel call.
    pub bytes_ar_streamed: u64,
    /// DDR → accumulators.
    pub bytes_cr_loaded: u64,
    /// Accumulators → DDR.
    pub bytes_cr_stored: u64,
    /// A → Ac packing traffic; zero with pre-packed weights.
    pub bytes_ac_packed: u64,
    /// B → Bc packing traffic.
    pub bytes_bc_packed: u64,
    pub ukr_invocations: u64,
    /// Number of Br copies, i.e. L4 iterations.
    pub br_copies: u64,
    pub mac16_calls: u64,
    /// Sum of the micro-kernels' emulated cycles.
    pub ukr_cycles: u64,
    pub peak_local_bytes: u64,
    pub peak_fpga_bytes: u64,
    pub peak_ddr_bc_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct GemmRun {
    pub c: Int16Matrix,
    pub stats: TransferStats,
    pub prediction: GemmPrediction,
    /// Non-fatal validation findings, such as accumulator spill.
    pub warnings: Vec<Violation>,
}

impl GemmRun {
    pub fn predicted_cycles(&self) -> u64 {
        self.prediction.cycles
    }

    pub fn macs_per_cycle(&self) -> f64 {
        self.prediction.macs_per_cycle
    }

    pub fn pct_peak(&self) -> f64 {
        self.prediction.pct_peak
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kernel {
    /// `ukr_16x4` for the reference shape, scalar kernel otherwise.
    Native,
    /// Always the scalar kernel.
    Generic,
}

/// Blocked `C + A·B`. Bit-identical to the naive oracle under `Wrap16`.
#[allow(clippy::too_many_arguments)]
pub fn gemm_blocked<'a>(
    a: impl Into<AOperand<'a>>,
    b: &Int16Matrix,
    c: &Int16Matrix,
    dims: &ProblemDims,
    params: &BlockParams,
    options: &GemmOptions,
    machine: &MachineModel,
    constants: &CostConstants,
) -> Result<GemmRun> {
    let (out, stats, warnings) = run_blocked(a.into(), b, c, dims, params, options, machine, constants, Kernel::Native)?;
    Ok(GemmRun {
        c: out,
        stats,
        prediction: predict_gemm(dims, params, constants, machine),
        warnings,
    })
}

/// The same loop nest driven by the scalar kernel only.
pub fn gemm_reference_blocked(
    a: &Int16Matrix,
    b: &Int16Matrix,
    c: &Int16Matrix,
    dims: &ProblemDims,
    params: &BlockParams,
    mode: WritebackMode,
) -> Result<Int16Matrix> {
    let options = GemmOptions { mode, pack_bc: true };
    let machine = MachineModel::default();
    let constants = CostConstants::default();
    let (out, _, _) = run_blocked(
        AOperand::Matrix(a),
        b,
        c,
        dims,
        params,
        &options,
        &machine,
        &constants,
        Kernel::Generic,
    )?;
    Ok(out)
}

/// Appends zero k-steps so a panel reaches `kc_to` depth.
fn pad_panel(panel: &[i16], width: usize, kc_to: usize) -> Cow<'_, [i16]> {
    if panel.len() == width * kc_to {
        Cow::Borrowed(panel)
    } else {
        let mut v = panel.to_vec();
        v.resize(width * kc_to, 0);
        Cow::Owned(v)
    }
}

#[allow(clippy::too_many_arguments)]
fn run_blocked(
    a: AOperand<'_>,
    b: &Int16Matrix,
    c: &Int16Matrix,
    dims: &ProblemDims,
    params: &BlockParams,
    options: &GemmOptions,
    machine: &MachineModel,
    constants: &CostConstants,
    kernel: Kernel,
) -> Result<(Int16Matrix, TransferStats, Vec<Violation>)> {
    let a_shape = match a {
        AOperand::Matrix(a) => a.shape(),
        AOperand::Prepacked(p) => (p.m, p.k),
    };
    dims.check_operands(a_shape, b.shape(), c.shape())?;
    let warnings = validate_params(params, dims, DType::Int16, machine).into_result()?;
    if let AOperand::Prepacked(p) = a {
        if !p.matches(dims, params) {
            return Err(Error::invalid(format!(
                "pre-packed A (m={} k={} mc={} kc={} mr={}) does not match {dims} with {params}",
                p.m, p.k, p.mc, p.kc, p.mr
            )));
        }
    }

    let &BlockParams { mc, nc, kc, mr, nr } = params;
    let ProblemDims { m, n, k } = *dims;
    let shape = MicroKernelShape {
        mr,
        nr,
        dtype: DType::Int16,
    };
    let use_16x4 = kernel == Kernel::Native && shape.is_reference();
    let mut out = Int16Matrix::from_fn(m, n, |i, j| c.get(i, j));
    let mut stats = TransferStats::default();
    let mut cr = vec![0i16; mr * nr];

    for jc in (0..n).step_by(nc) {
        let nc_eff = nc.min(n - jc);
        for pc in (0..k).step_by(kc) {
            let kc_eff = kc.min(k - pc);
            let ukr_kc = if use_16x4 { kc_eff.next_multiple_of(2) } else { kc_eff };
            let bc = if options.pack_bc {
                let bc = pack_bc(b, pc, jc, kc, nc, nr)?;
                let bytes = bc.payload.len() as u64 * ELEM;
                stats.bytes_bc_packed += bytes;
                stats.peak_ddr_bc_bytes = stats.peak_ddr_bc_bytes.max(bytes);
                Some(bc)
            } else {
                None
            };
            for ic in (0..m).step_by(mc) {
                let mc_eff = mc.min(m - ic);
                let ac: Cow<'_, AcBlock> = match a {
                    AOperand::Prepacked(p) => Cow::Borrowed(p.block(pc / kc, ic / mc)),
                    AOperand::Matrix(a) => {
                        let blk = pack_ac(a, ic, pc, mc, kc, mr)?;
                        stats.bytes_ac_packed += blk.payload.len() as u64 * ELEM;
                        Cow::Owned(blk)
                    }
                };
                stats.peak_fpga_bytes = stats.peak_fpga_bytes.max(ac.payload.len() as u64 * ELEM);

                for jr in 0..nc_eff.div_ceil(nr) {
                    let j0 = jc + jr * nr;
                    let gathered;
                    let br: &[i16] = match &bc {
                        Some(bc) => bc.panel(jr),
                        None => {
                            gathered = pack_bc(b, pc, j0, kc, nr, nr)?;
                            &gathered.payload
                        }
                    };
                    let br_bytes = br.len() as u64 * ELEM;
                    stats.bytes_br_copied += br_bytes;
                    stats.br_copies += 1;
                    stats.peak_local_bytes = stats.peak_local_bytes.max(br_bytes);
                    let br = pad_panel(br, nr, ukr_kc);
                    let cols = nr.min(n - j0);

                    for ir in 0..mc_eff.div_ceil(mr) {
                        let i0 = ic + ir * mr;
                        let rows = mr.min(m - i0);
                        cr.fill(0);
                        for i in 0..rows {
                            cr[i * nr..i * nr + cols].copy_from_slice(&out.row(i0 + i)[j0..j0 + cols]);
                        }
                        let ar = pad_panel(ac.panel(ir), mr, ukr_kc);
                        let res = if use_16x4 {
                            ukr_16x4(&ar, &br, &cr, ukr_kc, options.mode, constants, machine)?
                        } else {
                            ukr_generic(&shape, &ar, &br, &cr, ukr_kc, options.mode, constants, machine)?
                        };
                        for i in 0..rows {
                            for j in 0..cols {
                                out.set(i0 + i, j0 + j, res.cr[i * nr + j]);
                            }
                        }
                        stats.ukr_invocations += 1;
                        stats.mac16_calls += res.nominal_cycles;
                        stats.ukr_cycles += res.emulated_cycles;
                        stats.bytes_ar_streamed += (mr * kc_eff) as u64 * ELEM;
                        stats.bytes_cr_loaded += (mr * nr) as u64 * ELEM;
                        stats.bytes_cr_stored += (mr * nr) as u64 * ELEM;
                    }
                }
            }
        }
    }
    Ok((out, stats, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::naive_gemm_oracle;
    use crate::packing::prepack_a;
    use crate::rng::OperandRng;

    fn run(
        a: &Int16Matrix,
        b: &Int16Matrix,
        c: &Int16Matrix,
        dims: ProblemDims,
        params: BlockParams,
        options: GemmOptions,
    ) -> Result<GemmRun> {
        gemm_blocked(a, b, c, &dims, &params, &options, &MachineModel::default(), &CostConstants::default())
    }

    #[test]
    fn one_tile_problem() {
        let mut rng = OperandRng::new(1);
        let (a, b, c) = (rng.small_matrix(16, 2), rng.small_matrix(2, 4), rng.small_matrix(16, 4));
        let dims = ProblemDims::new(16, 4, 2).unwrap();
        let r = run(&a, &b, &c, dims, BlockParams::reference(16, 4, 2).unwrap(), GemmOptions::default()).unwrap();
        assert_eq!(r.stats.ukr_invocations, 1);
        assert_eq!(r.c, naive_gemm_oracle(&a, &b, &c, WritebackMode::Wrap16).unwrap());
    }

    #[test]
    fn seeded_64_cube() {
        let mut rng = OperandRng::new(64);
        let (a, b, c) = (rng.full_range_matrix(64, 64), rng.full_range_matrix(64, 64), rng.full_range_matrix(64, 64));
        let dims = ProblemDims::new(64, 64, 64).unwrap();
        let params = BlockParams::reference(32, 16, 16).unwrap();
        let r = run(&a, &b, &c, dims, params, GemmOptions::default()).unwrap();
        assert_eq!(r.c, naive_gemm_oracle(&a, &b, &c, WritebackMode::Wrap16).unwrap());
        // 4 (jc) · 4 (pc) · 2 (ic) · 4 (jr) L4 iterations, 2 ukr calls each.
        assert_eq!(r.stats.br_copies, 128);
        assert_eq!(r.stats.ukr_invocations, 256);
        assert_eq!(r.stats.mac16_calls, 256 * 32);
        assert_eq!(r.stats.bytes_br_copied, 128 * 16 * 4 * 2);
        assert_eq!(r.stats.bytes_cr_loaded, 256 * 64 * 2);
        assert_eq!(r.stats.bytes_ar_streamed, 256 * 16 * 16 * 2);
        assert_eq!(r.stats.ukr_cycles, r.prediction.ukr_cycles);
        assert_eq!(r.prediction.ukr_invocations, r.stats.ukr_invocations);
    }

    #[test]
    fn odd_k_and_ragged_edges() {
        let mut rng = OperandRng::new(9);
        for (m, n, k, kc) in [(17, 5, 3, 2), (33, 9, 7, 4), (5, 3, 1, 2), (40, 13, 29, 6)] {
            let (a, b, c) = (rng.full_range_matrix(m, k), rng.full_range_matrix(k, n), rng.full_range_matrix(m, n));
            let dims = ProblemDims::new(m, n, k).unwrap();
            let expect = naive_gemm_oracle(&a, &b, &c, WritebackMode::Wrap16).unwrap();
            for pack_bc in [true, false] {
                let r = run(&a, &b, &c, dims, BlockParams::reference(32, 8, kc).unwrap(), GemmOptions { pack_bc, ..Default::default() })
                    .unwrap();
                assert_eq!(r.c, expect, "{m}x{n}x{k} kc={kc} pack_bc={pack_bc}");
            }
        }
    }

    #[test]
    fn prepacked_matches_direct() {
        let mut rng = OperandRng::new(12);
        let (a, b, c) = (rng.small_matrix(50, 30), rng.small_matrix(30, 11), rng.small_matrix(50, 11));
        let dims = ProblemDims::new(50, 11, 30).unwrap();
        let params = BlockParams::reference(32, 8, 10).unwrap();
        let packed = prepack_a(&a, &dims, &params).unwrap();
        let opts = GemmOptions::default();
        let m = MachineModel::default();
        let k = CostConstants::default();
        let direct = gemm_blocked(&a, &b, &c, &dims, &params, &opts, &m, &k).unwrap();
        let pre = gemm_blocked(&packed, &b, &c, &dims, &params, &opts, &m, &k).unwrap();
        assert_eq!(direct.c, pre.c);
        assert_eq!(pre.stats.bytes_ac_packed, 0);
        assert!(direct.stats.bytes_ac_packed > 0);
        assert_eq!(direct.stats.bytes_ar_streamed, pre.stats.bytes_ar_streamed);

        let other = BlockParams::reference(16, 8, 10).unwrap();
        assert!(gemm_blocked(&packed, &b, &c, &dims, &other, &opts, &m, &k).is_err());
    }

    #[test]
    fn capacity_violations_are_errors() {
        let a = Int16Matrix::zeros(16, 300);
        let b = Int16Matrix::zeros(300, 4);
        let c = Int16Matrix::zeros(16, 4);
        let dims = ProblemDims::new(16, 4, 300).unwrap();
        let err = run(&a, &b, &c, dims, BlockParams::reference(16, 4, 292).unwrap(), GemmOptions::default()).unwrap_err();
        match err {
            Error::Capacity(v) => assert!(v[0].message.contains("kc_max=290")),
            other => panic!("{other:?}"),
        }
        assert!(run(&a, &b, &Int16Matrix::zeros(16, 5), dims, BlockParams::reference(16, 4, 2).unwrap(), GemmOptions::default()).is_err());
    }

    #[test]
    fn spill_shape_runs_with_warning() {
        let mut rng = OperandRng::new(3);
        let (a, b, c) = (rng.small_matrix(64, 20), rng.small_matrix(20, 8), rng.small_matrix(64, 8));
        let dims = ProblemDims::new(64, 8, 20).unwrap();
        let r = run(&a, &b, &c, dims, BlockParams::new(64, 8, 20, 32, 4).unwrap(), GemmOptions::default()).unwrap();
        assert_eq!(r.c, naive_gemm_oracle(&a, &b, &c, WritebackMode::Wrap16).unwrap());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn reference_path_examples() {
        let mut rng = OperandRng::new(21);
        let b = rng.small_matrix(20, 9);
        let c = rng.small_matrix(20, 9);
        let dims = ProblemDims::new(20, 9, 20).unwrap();
        let params = BlockParams::reference(16, 8, 6).unwrap();
        let out = gemm_reference_blocked(&Int16Matrix::identity(20), &b, &c, &dims, &params, WritebackMode::Wrap16).unwrap();
        assert_eq!(out, Int16Matrix::from_fn(20, 9, |i, j| c.get(i, j).wrapping_add(b.get(i, j))));
        let a = rng.small_matrix(20, 20);
        let out = gemm_reference_blocked(&a, &Int16Matrix::zeros(20, 9), &c, &dims, &params, WritebackMode::Wrap16).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn saturating_single_slab_matches_oracle() {
        let mut rng = OperandRng::new(77);
        let mode = WritebackMode::saturate(6).unwrap();
        let (a, b, c) = (rng.full_range_matrix(40, 24), rng.full_range_matrix(24, 12), rng.full_range_matrix(40, 12));
        let dims = ProblemDims::new(40, 12, 24).unwrap();
        let r = run(&a, &b, &c, dims, BlockParams::reference(32, 8, 24).unwrap(), GemmOptions { mode, pack_bc: true }).unwrap();
        assert_eq!(r.c, naive_gemm_oracle(&a, &b, &c, mode).unwrap());
    }
}
