//! Analytical cycle model for the micro-kernel and the blocked GEMM.
//!
//! A micro-kernel call costs its MAC cycles at peak rate plus a fixed
//! overhead for loading, updating and storing `Cr`; shapes that exceed the
//! accumulator file pay a multiplicative spill penalty. Each iteration of
//! loop L4 copies one `Br` micro-panel from DDR into local memory, of which
//! only the fraction `1 - ω` is exposed; the rest overlaps with compute.
//!
//! All cycle counts are integers: every fractional quantity is rounded up.

mod calibrate;
mod dataset;
mod sweep;

pub use calibrate::{calibrate, Calibration, Residual};
pub use dataset::{CalibrationDataset, CopyAnchor, KcPoint, McPoint, UkrAnchor, PUBLISHED_DATASET_CSV};
pub use sweep::{fmt_sig6, sweep, SweepConfig, SweepParam, SweepRow, SweepTable, SWEEP_CSV_HEADER};

use crate::machine::MachineModel;
use crate::matrix::{BlockParams, DType, ProblemDims};
use crate::microkernel::{resource_check, MicroKernelShape};

/// Lanes of the reference 16×4 tile; the `Cr` overhead scales with tile size.
const REFERENCE_TILE_LANES: f64 = 64.0;

/// Calibrated parameters of the cycle model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConstants {
    /// Fixed cycles per 16×4 micro-kernel call outside the MAC stream
    /// (`Cr` load/update/store, loop prologue).
    pub ukr_overhead_cycles: f64,
    /// Br copy cost per element, DDR to local memory.
    pub br_copy_cycles_per_element: f64,
    pub br_copy_fixed_cycles: f64,
    /// Fraction of the Br copy hidden behind micro-kernel execution.
    pub copy_overlap_fraction: f64,
    /// Slowdown applied when the micro-tile does not fit the accumulators.
    pub spill_penalty_factor: f64,
    /// Charge the Bc packing pass to the GEMM total.
    pub include_bc_packing: bool,
    pub bc_pack_cycles_per_element: f64,
}

impl Default for CostConstants {
    fn default() -> Self {
        CostConstants {
            ukr_overhead_cycles: 84.0,
            br_copy_cycles_per_element: 8309.0 / 1160.0,
            br_copy_fixed_cycles: 0.0,
            copy_overlap_fraction: 0.9135,
            spill_penalty_factor: 1429.0 / 1192.0,
            include_bc_packing: false,
            bc_pack_cycles_per_element: 1.0,
        }
    }
}

impl CostConstants {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.ukr_overhead_cycles >= 0.0
            && self.br_copy_cycles_per_element >= 0.0
            && self.br_copy_fixed_cycles >= 0.0
            && (0.0..=1.0).contains(&self.copy_overlap_fraction)
            && self.spill_penalty_factor >= 1.0
            && self.bc_pack_cycles_per_element >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::invalid(format!("cost constants out of range: {self:?}")))
        }
    }
}

/// Rounds a non-negative cycle estimate up to an integer.
///
/// Values within 1e-9 of an integer count as that integer, so products such
/// as `(8309 / 1160) · 1160` land on 8309 rather than 8310.
pub fn ceil_cycles(x: f64) -> u64 {
    (x - 1e-9).ceil().max(0.0) as u64
}

fn mac_cycles(macs: u64, peak: u32) -> u64 {
    macs.div_ceil(u64::from(peak))
}

/// Cycles of one micro-kernel call over a kc-deep panel pair.
pub fn predict_ukr_cycles(kc: usize, shape: &MicroKernelShape, constants: &CostConstants, machine: &MachineModel) -> u64 {
    let tile = (shape.mr * shape.nr) as f64;
    let macs = (shape.mr * shape.nr * kc) as u64;
    let peak = machine.peak_macs_per_cycle(shape.dtype);
    let base = mac_cycles(macs, peak) as f64 + constants.ukr_overhead_cycles * tile / REFERENCE_TILE_LANES;
    let base = ceil_cycles(base);
    if resource_check(shape, machine).spill {
        ceil_cycles(constants.spill_penalty_factor * base as f64)
    } else {
        base
    }
}

/// Cycles to copy one kc×nr micro-panel from DDR into local memory.
pub fn predict_br_copy_cycles(kc: usize, nr: usize, constants: &CostConstants) -> u64 {
    ceil_cycles(constants.br_copy_fixed_cycles + constants.br_copy_cycles_per_element * (kc * nr) as f64)
}

/// Cycle prediction for a whole blocked GEMM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GemmPrediction {
    pub cycles: u64,
    pub macs_per_cycle: f64,
    pub pct_peak: f64,
    /// Some dimension is not a multiple of its block; partial blocks are
    /// costed with ceilings, outside the model's calibrated domain.
    pub extrapolated: bool,
    /// Cycles spent inside micro-kernel calls.
    pub ukr_cycles: u64,
    /// Br copy cycles as if fully serialized.
    pub br_copy_raw_cycles: u64,
    /// Br copy cycles left after overlap.
    pub br_copy_exposed_cycles: u64,
    pub bc_pack_cycles: u64,
    pub ukr_invocations: u64,
    pub l4_iterations: u64,
}

/// `(block extent, number of blocks)` classes covering `total` in steps of `step`.
fn blocks(total: usize, step: usize) -> impl Iterator<Item = (usize, u64)> {
    let full = (total / step) as u64;
    let rem = total % step;
    [(step, full), (rem, u64::from(rem > 0))]
        .into_iter()
        .filter(|&(len, count)| len > 0 && count > 0)
}

/// Predicts cycles, MACs/cycle and percentage of peak for the five-loop GEMM.
pub fn predict_gemm(dims: &ProblemDims, params: &BlockParams, constants: &CostConstants, machine: &MachineModel) -> GemmPrediction {
    let shape = MicroKernelShape {
        mr: params.mr,
        nr: params.nr,
        dtype: DType::Int16,
    };
    let exposed = 1.0 - constants.copy_overlap_fraction;
    let mut p = GemmPrediction {
        cycles: 0,
        macs_per_cycle: 0.0,
        pct_peak: 0.0,
        extrapolated: [
            dims.m % params.mc,
            dims.n % params.nc,
            dims.k % params.kc,
            dims.m % params.mr,
            dims.n % params.nr,
        ]
        .iter()
        .any(|&r| r != 0),
        ukr_cycles: 0,
        br_copy_raw_cycles: 0,
        br_copy_exposed_cycles: 0,
        bc_pack_cycles: 0,
        ukr_invocations: 0,
        l4_iterations: 0,
    };
    for (nc_eff, n_blocks) in blocks(dims.n, params.nc) {
        let jr_iters = nc_eff.div_ceil(params.nr) as u64;
        for (kc_eff, k_blocks) in blocks(dims.k, params.kc) {
            let outer = n_blocks * k_blocks;
            if constants.include_bc_packing {
                p.bc_pack_cycles += outer * ceil_cycles(constants.bc_pack_cycles_per_element * (kc_eff * nc_eff) as f64);
            }
            // The 16×4 kernel runs odd slabs with one zero k-step appended.
            let ukr_kc = if shape.is_reference() { kc_eff.next_multiple_of(2) } else { kc_eff };
            let ukr = predict_ukr_cycles(ukr_kc, &shape, constants, machine);
            let raw = predict_br_copy_cycles(kc_eff, params.nr, constants);
            let hidden = ceil_cycles(exposed * raw as f64);
            for (mc_eff, m_blocks) in blocks(dims.m, params.mc) {
                let l4 = outer * m_blocks * jr_iters;
                let ir_iters = mc_eff.div_ceil(params.mr) as u64;
                p.l4_iterations += l4;
                p.ukr_invocations += l4 * ir_iters;
                p.ukr_cycles += l4 * ir_iters * ukr;
                p.br_copy_raw_cycles += l4 * raw;
                p.br_copy_exposed_cycles += l4 * hidden;
            }
        }
    }
    p.cycles = p.ukr_cycles + p.br_copy_exposed_cycles + p.bc_pack_cycles;
    p.macs_per_cycle = dims.macs() as f64 / p.cycles as f64;
    p.pct_peak = 100.0 * p.macs_per_cycle / f64::from(machine.peak_macs_per_cycle(DType::Int16));
    p
}

/// Percentage of peak of one isolated micro-kernel call.
pub fn ukr_pct_peak(kc: usize, shape: &MicroKernelShape, constants: &CostConstants, machine: &MachineModel) -> f64 {
    let cycles = predict_ukr_cycles(kc, shape, constants, machine);
    let macs = (shape.mr * shape.nr * kc) as f64;
    100.0 * macs / cycles as f64 / f64::from(machine.peak_macs_per_cycle(shape.dtype))
}

/// Where the GEMM loses performance, in percentage points of peak.
///
/// `total = ukr_overhead + br_copy - overlap_recovered`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// Loss of the micro-kernel itself (`Cr` traffic, loop overhead, padding).
    pub ukr_overhead_points: f64,
    /// Loss the Br copies would cause if serialized with compute.
    pub br_copy_points: f64,
    /// Part of `br_copy_points` won back by overlapping the copy.
    pub overlap_recovered_points: f64,
    /// Br copy loss that remains after overlap.
    pub br_copy_exposed_points: f64,
    pub bc_pack_points: f64,
    pub total_loss_points: f64,
}

pub fn loss_breakdown(dims: &ProblemDims, params: &BlockParams, constants: &CostConstants, machine: &MachineModel) -> LossBreakdown {
    let p = predict_gemm(dims, params, constants, machine);
    let ideal = dims.macs() as f64 / f64::from(machine.peak_macs_per_cycle(DType::Int16));
    let eff = |cycles: u64| 100.0 * ideal / cycles as f64;
    let u = p.ukr_cycles;
    let ukr_only = eff(u);
    let serialized = eff(u + p.br_copy_raw_cycles);
    let overlapped = eff(u + p.br_copy_exposed_cycles);
    let total = eff(p.cycles);
    LossBreakdown {
        ukr_overhead_points: 100.0 - ukr_only,
        br_copy_points: ukr_only - serialized,
        overlap_recovered_points: overlapped - serialized,
        br_copy_exposed_points: ukr_only - overlapped,
        bc_pack_points: overlapped - total,
        total_loss_points: 100.0 - total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> (CostConstants, MachineModel) {
        (CostConstants::default(), MachineModel::default())
    }

    #[test]
    fn ukr_anchors() {
        let (c, m) = env();
        let s = MicroKernelShape::REFERENCE;
        assert_eq!(predict_ukr_cycles(256, &s, &c, &m), 596);
        assert_eq!(predict_ukr_cycles(64, &s, &c, &m), 212);
        let wide = MicroKernelShape::new(32, 4).unwrap();
        assert_eq!(predict_ukr_cycles(256, &wide, &c, &m), 1429);
    }

    #[test]
    fn copy_model() {
        let (c, _) = env();
        assert_eq!(predict_br_copy_cycles(290, 4, &c), 8309);
        assert_eq!(predict_br_copy_cycles(1, 1, &c), 8);
        let flat = CostConstants {
            br_copy_cycles_per_element: 0.0,
            br_copy_fixed_cycles: 17.0,
            ..c
        };
        assert_eq!(predict_br_copy_cycles(290, 4, &flat), 17);
    }

    #[test]
    fn single_tile_with_full_overlap_is_one_ukr() {
        let (c, m) = env();
        let c = CostConstants {
            copy_overlap_fraction: 1.0,
            ..c
        };
        for kc in [2, 64, 256] {
            let dims = ProblemDims::new(16, 4, kc).unwrap();
            let params = BlockParams::reference(16, 4, kc).unwrap();
            let p = predict_gemm(&dims, &params, &c, &m);
            assert_eq!(p.cycles, predict_ukr_cycles(kc, &MicroKernelShape::REFERENCE, &c, &m));
            assert!(!p.extrapolated);
        }
    }

    #[test]
    fn mc_sweep_endpoints() {
        let (c, m) = env();
        let dims = ProblemDims::new(4096, 4096, 290).unwrap();
        for (mc, measured) in [(4096, 27.74), (128, 24.62)] {
            let p = predict_gemm(&dims, &BlockParams::reference(mc, 4096, 290).unwrap(), &c, &m);
            assert!((p.pct_peak - 100.0 * measured / 32.0).abs() <= 0.5, "mc={mc}: {}", p.macs_per_cycle);
        }
    }

    #[test]
    fn closed_form_counts() {
        let (c, m) = env();
        let dims = ProblemDims::new(4096, 4096, 290).unwrap();
        let p = predict_gemm(&dims, &BlockParams::reference(4096, 4096, 290).unwrap(), &c, &m);
        assert_eq!(p.ukr_invocations, 262_144);
        assert_eq!(p.l4_iterations, 1024);
        assert_eq!(p.ukr_cycles, 262_144 * 664);
    }

    #[test]
    fn partial_blocks_are_extrapolated() {
        let (c, m) = env();
        let dims = ProblemDims::new(20, 6, 7).unwrap();
        let p = predict_gemm(&dims, &BlockParams::reference(16, 4, 4).unwrap(), &c, &m);
        assert!(p.extrapolated);
        // 2 n-blocks × 2 k-blocks × 2 m-blocks, one panel each.
        assert_eq!(p.ukr_invocations, 8);
        assert_eq!(p.l4_iterations, 8);
    }

    #[test]
    fn bc_packing_toggle_adds_cycles() {
        let (c, m) = env();
        let dims = ProblemDims::new(64, 64, 64).unwrap();
        let params = BlockParams::reference(32, 16, 16).unwrap();
        let off = predict_gemm(&dims, &params, &c, &m);
        let on = predict_gemm(&dims, &params, &CostConstants { include_bc_packing: true, ..c }, &m);
        assert_eq!(off.bc_pack_cycles, 0);
        assert_eq!(on.bc_pack_cycles, 64 * 64);
        assert_eq!(on.cycles, off.cycles + 64 * 64);
    }

    #[test]
    fn loss_breakdown_sums() {
        let (c, m) = env();
        let dims = ProblemDims::new(4096, 4096, 290).unwrap();
        let l = loss_breakdown(&dims, &BlockParams::reference(4096, 4096, 290).unwrap(), &c, &m);
        let sum = l.ukr_overhead_points + l.br_copy_points - l.overlap_recovered_points + l.bc_pack_points;
        assert!((sum - l.total_loss_points).abs() < 1e-9);
        assert!((l.br_copy_points - l.overlap_recovered_points - l.br_copy_exposed_points).abs() < 1e-9);
    }

    #[test]
    fn ceil_cycles_tolerates_rounding_noise() {
        assert_eq!(ceil_cycles(8309.000000000002), 8309);
        assert_eq!(ceil_cycles(8309.01), 8310);
        assert_eq!(ceil_cycles(0.0), 0);
        assert_eq!(ceil_cycles(-3.0), 0);
    }
}
