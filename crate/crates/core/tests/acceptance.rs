//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Expected values and tolerances are fixed here, computed by the
//! oracles below rather than by the library under test.

use std::time::{Duration, Instant};

use aie_gemm::costmodel::{predict_ukr_cycles, sweep, SweepConfig, SweepParam};
use aie_gemm::microkernel::MicroKernelShape;
use aie_gemm::packing::AcBlock;
use aie_gemm::{
    calibrate, conv_gemm, deserialize_prepacked, gemm_blocked, kc_max, loss_breakdown, predict_gemm, prepack_a,
    serialize_prepacked, tune, validate_params, BlockParams, CalibrationDataset, CostConstants, DType, Error,
    FilterBank, GemmOptions, Int16Matrix, MachineModel, OperandRng, PackedA, ProblemDims, Tensor3, ViolationKind,
    WritebackMode,
};

/// Published micro-kernel efficiency (% of peak) against kc.
const KC_REFERENCE: [(usize, f64); 6] = [(8, 16.16), (16, 27.59), (32, 43.24), (64, 60.38), (128, 75.29), (290, 87.61)];
const KC_TOLERANCE_POINTS: f64 = 1.0;
const KC_ASYMPTOTE: (f64, f64) = (86.5, 88.5);

/// Published GEMM MACs/cycle against mc at (4096, 4096, 290).
const MC_REFERENCE: [(usize, f64); 6] = [
    (128, 24.62),
    (256, 26.23),
    (512, 27.03),
    (1024, 27.44),
    (2048, 27.64),
    (4096, 27.74),
];
const MC_TOLERANCE: f64 = 0.2;
const MC_BUDGET: Duration = Duration::from_secs(1);

const UKR_16X4_KC256: u64 = 596;
const UKR_16X4_KC64: u64 = 212;
const UKR_32X4_KC256: f64 = 1429.0;
const SPILL_TOLERANCE: f64 = 0.01;

const KC_MAX_DEFAULT: usize = 290;

const UKR_LOSS_RANGE: (f64, f64) = (12.0, 15.0);
const COPY_LOSS_RANGE: (f64, f64) = (3.0, 6.0);

const GEMM_TRIALS: usize = 1000;
const CONV_TRIALS: usize = 200;
const TUNER_PROBLEMS: usize = 50;
const PREPACK_TRIALS: usize = 100;
const SLOW_BUDGET: Duration = Duration::from_secs(60);

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// C + A·B in i64, truncated to the low 16 bits.
fn oracle_gemm(a: &Int16Matrix, b: &Int16Matrix, c: &Int16Matrix) -> Vec<i16> {
    let (m, k) = a.shape();
    let n = b.cols();
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let mut acc = c.get(i, j) as i64;
            for p in 0..k {
                acc += a.get(i, p) as i64 * b.get(p, j) as i64;
            }
            out.push(acc as i16);
        }
    }
    out
}

fn random_params(rng: &mut OperandRng, dims: &ProblemDims) -> BlockParams {
    let reference = rng.range(0, 3) > 0;
    let (mr, nr) = if reference {
        (16, 4)
    } else {
        ([1, 2, 4, 8, 16, 32][rng.range(0, 5)], [1, 2, 4, 8][rng.range(0, 3)])
    };
    let mc = mr * rng.range(1, dims.m.div_ceil(mr));
    let nc = nr * rng.range(1, dims.n.div_ceil(nr));
    let mut kc = rng.range(1, dims.k);
    if (mr, nr) == (16, 4) {
        kc = (kc + 1) & !1;
    }
    BlockParams::new(mc, nc, kc, mr, nr).expect("valid params")
}

fn c1_bit_exact() -> Outcome {
    let machine = MachineModel::default();
    let constants = CostConstants::default();
    let mut rng = OperandRng::new(0xACCE_0001);
    let start = Instant::now();
    let mut ragged = 0;
    for trial in 0..GEMM_TRIALS {
        let (m, n, k) = (rng.range(1, 96), rng.range(1, 96), rng.range(1, 96));
        let dims = ProblemDims::new(m, n, k).unwrap();
        let params = random_params(&mut rng, &dims);
        if m % params.mc != 0 || n % params.nc != 0 || k % params.kc != 0 || m % params.mr != 0 || n % params.nr != 0 {
            ragged += 1;
        }
        let full = trial % 2 == 1;
        let a = rng.matrix(m, k, full);
        let b = rng.matrix(k, n, full);
        let c = rng.matrix(m, n, full);
        let run = match gemm_blocked(&a, &b, &c, &dims, &params, &GemmOptions::default(), &machine, &constants) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("trial {trial} {dims} {params}: {e}")),
        };
        if run.c.to_vec() != oracle_gemm(&a, &b, &c) {
            return outcome(false, format!("trial {trial} {dims} {params}: result differs from oracle"));
        }
    }
    let t = start.elapsed();
    outcome(
        t < SLOW_BUDGET,
        format!("{GEMM_TRIALS} trials bit-exact ({ragged} with ragged edges) in {:.1}s", t.as_secs_f64()),
    )
}

fn c2_cycle_anchors() -> Outcome {
    let machine = MachineModel::default();
    let constants = CostConstants::default();
    let r = predict_ukr_cycles(256, &MicroKernelShape::REFERENCE, &constants, &machine);
    let r64 = predict_ukr_cycles(64, &MicroKernelShape::REFERENCE, &constants, &machine);
    let spill = predict_ukr_cycles(256, &MicroKernelShape::new(32, 4).unwrap(), &constants, &machine) as f64;
    let spill_err = (spill - UKR_32X4_KC256).abs() / UKR_32X4_KC256;
    outcome(
        r == UKR_16X4_KC256 && r64 == UKR_16X4_KC64 && spill_err <= SPILL_TOLERANCE,
        format!("16x4 kc=256 -> {r}, kc=64 -> {r64}, 32x4 kc=256 -> {spill} ({:+.2}%)", 100.0 * (spill - UKR_32X4_KC256) / UKR_32X4_KC256),
    )
}

fn c3_kc_sweep() -> Outcome {
    let machine = MachineModel::default();
    let values: Vec<usize> = KC_REFERENCE.iter().map(|p| p.0).collect();
    let table = sweep(
        SweepParam::Kc,
        &values,
        &SweepConfig::default(),
        &CostConstants::default(),
        &machine,
        &CalibrationDataset::default(),
    )
    .expect("kc sweep");
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for ((kc, want), row) in KC_REFERENCE.iter().zip(&table.rows) {
        assert_eq!(*kc, row.value);
        let d = row.pct_peak - want;
        worst = worst.max(d.abs());
        pass &= d.abs() <= KC_TOLERANCE_POINTS;
    }
    let at290 = table.rows.last().unwrap().pct_peak;
    pass &= (KC_ASYMPTOTE.0..=KC_ASYMPTOTE.1).contains(&at290);
    outcome(pass, format!("max |model - measured| = {worst:.2} points, pct_peak(290) = {at290:.2}"))
}

fn c4_mc_sweep() -> Outcome {
    let start = Instant::now();
    let machine = MachineModel::default();
    let constants = calibrate(&CalibrationDataset::published(), &machine).expect("calibrate").constants;
    let values: Vec<usize> = MC_REFERENCE.iter().map(|p| p.0).collect();
    let table = sweep(
        SweepParam::Mc,
        &values,
        &SweepConfig::default(),
        &constants,
        &machine,
        &CalibrationDataset::default(),
    )
    .expect("mc sweep");
    let t = start.elapsed();
    let mut worst: f64 = 0.0;
    for ((mc, want), row) in MC_REFERENCE.iter().zip(&table.rows) {
        assert_eq!(*mc, row.value);
        worst = worst.max((row.macs_per_cycle - want).abs());
    }
    outcome(
        worst <= MC_TOLERANCE && t < MC_BUDGET,
        format!(
            "max |model - measured| = {worst:.3} MACs/cycle (omega={:.4}, O={:.3}) in {} ms",
            constants.copy_overlap_fraction,
            constants.ukr_overhead_cycles,
            t.as_millis()
        ),
    )
}

fn c5_capacity_gate() -> Outcome {
    let machine = MachineModel::default();
    let bound = kc_max(4, DType::Int16, &machine);
    let dims = ProblemDims::new(4096, 4096, 4096).unwrap();
    let check = |kc| validate_params(&BlockParams::reference(4096, 4096, kc).unwrap(), &dims, DType::Int16, &machine);
    let ok290 = check(KC_MAX_DEFAULT).is_ok();
    let rejects291 = check(KC_MAX_DEFAULT + 1).has(ViolationKind::BrExceedsLocalBudget);
    let mut rng = OperandRng::new(5);
    let a = rng.small_matrix(16, 291);
    let b = rng.small_matrix(291, 4);
    let c = Int16Matrix::zeros(16, 4);
    let driver_rejects = matches!(
        gemm_blocked(
            &a,
            &b,
            &c,
            &ProblemDims::new(16, 4, 291).unwrap(),
            &BlockParams::new(16, 4, 291, 16, 4).unwrap(),
            &GemmOptions::default(),
            &machine,
            &CostConstants::default()
        ),
        Err(Error::Capacity(_))
    );
    outcome(
        bound == KC_MAX_DEFAULT && ok290 && rejects291 && driver_rejects,
        format!("kc_max = {bound}; kc=290 accepted: {ok290}; kc=291 rejected: {rejects291} (driver: {driver_rejects})"),
    )
}

fn c6_loss_decomposition() -> Outcome {
    let machine = MachineModel::default();
    let constants = calibrate(&CalibrationDataset::published(), &machine).expect("calibrate").constants;
    let dims = ProblemDims::new(4096, 4096, 290).unwrap();
    let params = BlockParams::reference(4096, 4096, 290).unwrap();
    let loss = loss_breakdown(&dims, &params, &constants, &machine);
    let in_range = |v: f64, r: (f64, f64)| (r.0..=r.1).contains(&v);
    outcome(
        in_range(loss.ukr_overhead_points, UKR_LOSS_RANGE) && in_range(loss.br_copy_points, COPY_LOSS_RANGE),
        format!(
            "micro-kernel {:.2} points, Br copy {:.2} points serialized ({:.2} exposed after overlap)",
            loss.ukr_overhead_points, loss.br_copy_points, loss.br_copy_exposed_points
        ),
    )
}

/// Direct convolution with zero padding, i64 accumulation, low 16 bits kept.
fn oracle_conv(x: &Tensor3, f: &FilterBank, stride: usize, pad: usize) -> (usize, usize, Vec<i16>) {
    let oh = (x.h + 2 * pad - f.kh) / stride + 1;
    let ow = (x.w + 2 * pad - f.kw) / stride + 1;
    let mut out = Vec::with_capacity(f.co * oh * ow);
    for o in 0..f.co {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0i64;
                for ch in 0..f.ci {
                    for ky in 0..f.kh {
                        for kx in 0..f.kw {
                            let y = (oy * stride + ky) as isize - pad as isize;
                            let xx = (ox * stride + kx) as isize - pad as isize;
                            if y < 0 || xx < 0 || y >= x.h as isize || xx >= x.w as isize {
                                continue;
                            }
                            acc += x.get(ch, y as usize, xx as usize) as i64 * f.get(o, ch, ky, kx) as i64;
                        }
                    }
                }
                out.push(acc as i16);
            }
        }
    }
    (oh, ow, out)
}

fn c7_conv() -> Outcome {
    let machine = MachineModel::default();
    let constants = CostConstants::default();
    let mut rng = OperandRng::new(0xC0_4E);
    let start = Instant::now();
    let mut done = 0;
    while done < CONV_TRIALS {
        let (kh, kw) = (rng.range(1, 5), rng.range(1, 5));
        let (stride, pad) = (rng.range(1, 2), rng.range(0, 2));
        let (ci, co) = (rng.range(1, 16), rng.range(1, 16));
        let (h, w) = (rng.range(1, 16), rng.range(1, 16));
        if h + 2 * pad < kh || w + 2 * pad < kw || (h + 2 * pad - kh) % stride != 0 || (w + 2 * pad - kw) % stride != 0 {
            continue;
        }
        let full = done % 3 == 0;
        let x = Tensor3::new(ci, h, w, rng.values(ci * h * w, full)).unwrap();
        let f = FilterBank::new(co, ci, kh, kw, rng.values(co * ci * kh * kw, full)).unwrap();
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (w + 2 * pad - kw) / stride + 1;
        let dims = ProblemDims::new(co, oh * ow, ci * kh * kw).unwrap();
        let params = random_params(&mut rng, &dims);
        let (y, _) = match conv_gemm(&x, &f, stride, pad, &params, WritebackMode::Wrap16, &machine, &constants) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("shape {done}: {e}")),
        };
        let (eh, ew, expect) = oracle_conv(&x, &f, stride, pad);
        if (y.c, y.h, y.w) != (co, eh, ew) || y.data != expect {
            return outcome(
                false,
                format!("shape {done}: x {ci}x{h}x{w}, f {co}x{kh}x{kw}, stride {stride}, pad {pad}: mismatch"),
            );
        }
        done += 1;
    }
    let t = start.elapsed();
    outcome(t < SLOW_BUDGET, format!("{CONV_TRIALS} conv shapes bit-exact in {:.1}s", t.as_secs_f64()))
}

/// The candidate grid rebuilt from its definition.
fn oracle_grid(dims: &ProblemDims, bound: usize, machine: &MachineModel) -> Vec<BlockParams> {
    let limit = dims.k.min(bound);
    let mut kcs: Vec<usize> = (1..=limit).filter(|d| d % 2 == 0 && dims.k.is_multiple_of(*d)).collect();
    if limit >= 2 {
        kcs.push(limit - limit % 2);
    }
    if dims.k % 2 == 1 && dims.k < bound {
        kcs.push(dims.k + 1);
    }
    kcs.sort();
    kcs.dedup();
    let nc = dims.n.div_ceil(4) * 4;
    let mut out = Vec::new();
    for kc in kcs {
        let mut mc = 16;
        while mc < dims.m + 16 {
            let p = BlockParams::reference(mc, nc, kc).unwrap();
            if (mc * kc * 2) as u64 <= machine.ac_fpga_budget_bytes {
                out.push(p);
            }
            mc += 16;
        }
    }
    out
}

fn c8_tuner() -> Outcome {
    let machine = MachineModel::default();
    let constants = CostConstants::default();
    let mut rng = OperandRng::new(0x7E5E);
    for i in 0..TUNER_PROBLEMS {
        let dims = ProblemDims::new(rng.range(1, 300), rng.range(1, 300), rng.range(1, 700)).unwrap();
        let t = tune(&dims, DType::Int16, &machine, &constants).expect("tune");
        let grid = oracle_grid(&dims, KC_MAX_DEFAULT, &machine);
        let best = grid
            .iter()
            .map(|p| predict_gemm(&dims, p, &constants, &machine).macs_per_cycle)
            .fold(f64::MIN, f64::max);
        if t.prediction.macs_per_cycle != best {
            return outcome(
                false,
                format!("problem {i} {dims}: tune gives {} MACs/cycle, grid max {best}", t.prediction.macs_per_cycle),
            );
        }
        if !grid.contains(&t.params) {
            return outcome(false, format!("problem {i} {dims}: {} is outside the grid", t.params));
        }
        for _ in 0..3 {
            if tune(&dims, DType::Int16, &machine, &constants).unwrap().params != t.params {
                return outcome(false, format!("problem {i} {dims}: repeat run chose differently"));
            }
        }
    }
    outcome(true, format!("{TUNER_PROBLEMS} problems: tuned efficiency equals grid maximum; repeat runs identical"))
}

/// Packs A block by block from the layout definition.
fn oracle_prepack(a: &Int16Matrix, mc: usize, kc: usize, mr: usize) -> Vec<Vec<i16>> {
    let (m, k) = a.shape();
    let mut blocks = Vec::new();
    for pc in (0..k).step_by(kc) {
        for ic in (0..m).step_by(mc) {
            let (me, ke) = (mc.min(m - ic), kc.min(k - pc));
            let mut payload = Vec::new();
            for r in (0..me).step_by(mr) {
                for p in 0..ke {
                    for i in 0..mr {
                        payload.push(if r + i < me { a.get(ic + r + i, pc + p) } else { 0 });
                    }
                }
            }
            blocks.push(payload);
        }
    }
    blocks
}

fn c9_prepack() -> Outcome {
    let machine = MachineModel::default();
    let constants = CostConstants::default();
    let mut rng = OperandRng::new(0x9A_C4);
    let dir = tempfile::tempdir().expect("tempdir");
    for trial in 0..PREPACK_TRIALS {
        let (m, n, k) = (rng.range(1, 80), rng.range(1, 40), rng.range(1, 80));
        let dims = ProblemDims::new(m, n, k).unwrap();
        let params = random_params(&mut rng, &dims);
        let a = rng.full_range_matrix(m, k);
        let packed: PackedA = prepack_a(&a, &dims, &params).unwrap();
        let payloads: Vec<Vec<i16>> = packed.blocks.iter().map(|b: &AcBlock| b.payload.clone()).collect();
        if payloads != oracle_prepack(&a, params.mc, params.kc, params.mr) {
            return outcome(false, format!("trial {trial}: packed layout differs from definition"));
        }
        let path = dir.path().join(format!("a{trial}.bin"));
        serialize_prepacked(&packed, std::fs::File::create(&path).unwrap()).unwrap();
        let back = deserialize_prepacked(std::fs::File::open(&path).unwrap()).unwrap();
        if back != packed {
            return outcome(false, format!("trial {trial}: round trip changed the value"));
        }
        let b = rng.full_range_matrix(k, n);
        let c = rng.full_range_matrix(m, n);
        let opts = GemmOptions::default();
        let direct = gemm_blocked(&a, &b, &c, &dims, &params, &opts, &machine, &constants).unwrap();
        let via_file = gemm_blocked(&back, &b, &c, &dims, &params, &opts, &machine, &constants).unwrap();
        if direct.c != via_file.c || direct.c.to_vec() != oracle_gemm(&a, &b, &c) {
            return outcome(false, format!("trial {trial}: pre-packed GEMM differs from direct path"));
        }
    }
    outcome(true, format!("{PREPACK_TRIALS} round trips exact; pre-packed GEMM identical to direct"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("bit-exact blocked GEMM", c1_bit_exact),
        ("micro-kernel cycle anchors", c2_cycle_anchors),
        ("kc sweep", c3_kc_sweep),
        ("mc sweep after calibration", c4_mc_sweep),
        ("capacity gate", c5_capacity_gate),
        ("loss decomposition", c6_loss_decomposition),
        ("convolution equivalence", c7_conv),
        ("tuner optimality", c8_tuner),
        ("prepack round trip", c9_prepack),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("[{}] {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
