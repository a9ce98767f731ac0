//! Model-driven selection of the cache configuration parameters.

use std::cmp::Ordering;

use crate::costmodel::{predict_gemm, CostConstants, GemmPrediction};
use crate::machine::{kc_max, mc_max, validate_params, MachineModel};
use crate::matrix::{BlockParams, DType, ProblemDims};
use crate::{Error, Result};

const MR: usize = BlockParams::REF_MR;
const NR: usize = BlockParams::REF_NR;

/// Result of [`tune`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuned {
    pub params: BlockParams,
    pub prediction: GemmPrediction,
}

fn even_floor(v: usize) -> usize {
    v & !1
}

/// kc values worth trying: even divisors of k within the Br bound, the
/// clamp `min(k, kc_max)` rounded down to even, and, when k is odd and fits,
/// the single-slab value k + 1.
fn kc_candidates(k: usize, bound: usize) -> Vec<usize> {
    if bound < 2 {
        return Vec::new();
    }
    let mut out: Vec<usize> = (2..=k.min(bound)).step_by(2).filter(|d| k.is_multiple_of(*d)).collect();
    let clamp = even_floor(k.min(bound));
    if clamp >= 2 {
        out.push(clamp);
    }
    let single = k.next_multiple_of(2);
    if single <= bound {
        out.push(single);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Every feasible reference-shape configuration for `dims`, ordered by kc,
/// then mc.
pub fn grid_candidates(dims: &ProblemDims, machine: &MachineModel) -> Vec<BlockParams> {
    let dtype = DType::Int16;
    let nc = dims.n.next_multiple_of(NR);
    let mut out = Vec::new();
    for kc in kc_candidates(dims.k, kc_max(NR, dtype, machine)) {
        let mc_cap = (mc_max(kc, dtype, machine) / MR) * MR;
        let mc_limit = dims.m.next_multiple_of(MR).min(mc_cap);
        for mc in (MR..=mc_limit).step_by(MR) {
            let params = BlockParams { mc, nc, kc, mr: MR, nr: NR };
            if validate_params(&params, dims, dtype, machine).is_ok() {
                out.push(params);
            }
        }
    }
    out
}

/// Orders candidates best first: fewer predicted cycles (the MAC count is
/// fixed, so this is higher efficiency), then kc dividing k, larger kc,
/// larger mc, smaller nc.
pub fn compare_candidates(dims: &ProblemDims, a: (&BlockParams, &GemmPrediction), b: (&BlockParams, &GemmPrediction)) -> Ordering {
    let (pa, ea) = a;
    let (pb, eb) = b;
    ea.cycles
        .cmp(&eb.cycles)
        .then_with(|| dims.k.is_multiple_of(pb.kc).cmp(&dims.k.is_multiple_of(pa.kc)))
        .then_with(|| pb.kc.cmp(&pa.kc))
        .then_with(|| pb.mc.cmp(&pa.mc))
        .then_with(|| pa.nc.cmp(&pb.nc))
}

/// Chooses (mc, nc, kc) for the 16×4 micro-kernel maximising predicted
/// efficiency under the machine's capacity limits.
pub fn tune(dims: &ProblemDims, dtype: DType, machine: &MachineModel, constants: &CostConstants) -> Result<Tuned> {
    if dtype != DType::Int16 {
        return Err(Error::invalid(format!("tuning is implemented for INT16 only, got {dtype}")));
    }
    let grid = grid_candidates(dims, machine);
    if grid.is_empty() {
        return Err(Error::Infeasible(format!(
            "no configuration of the 16x4 kernel fits {dims}: kc_max={}, Br budget {} B, Ac budget {} B",
            kc_max(NR, dtype, machine),
            machine.br_local_budget_bytes,
            machine.ac_fpga_budget_bytes
        )));
    }

    // Capacity-driven starting point: largest kc, then largest mc.
    let start = *grid.iter().max_by_key(|p| (p.kc, p.mc)).expect("grid non-empty");
    let mut best = Tuned {
        params: start,
        prediction: predict_gemm(dims, &start, constants, machine),
    };
    for params in &grid {
        let prediction = predict_gemm(dims, params, constants, machine);
        if compare_candidates(dims, (params, &prediction), (&best.params, &best.prediction)) == Ordering::Less {
            best = Tuned {
                params: *params,
                prediction,
            };
        }
    }
    Ok(best)
}
