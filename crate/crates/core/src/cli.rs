//! `vgemm` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid flags or parameters, 3 capacity
//! violation or infeasible tuning, 4 file I/O or file format error, 5 a
//! blocked result that disagrees with its oracle.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::costmodel::{calibrate, sweep, CalibrationDataset, CostConstants, SweepConfig, SweepParam};
use crate::driver::{gemm_blocked, AOperand, GemmOptions, GemmRun};
use crate::lowering::{conv_dims, conv_direct_oracle, conv_gemm, FilterBank, Tensor3};
use crate::machine::MachineModel;
use crate::matrix::{naive_gemm_oracle, BlockParams, DType, Int16Matrix, ProblemDims};
use crate::microkernel::MicroKernelShape;
use crate::packing::{deserialize_prepacked, prepack_a, serialize_prepacked, PackedA};
use crate::rng::OperandRng;
use crate::scalar::WritebackMode;
use crate::tuner::tune;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

/// Environment variable naming the default machine description file.
pub const MACHINE_FILE_ENV: &str = "GEMM_MACHINE_FILE";

#[derive(Parser, Debug)]
#[command(name = "vgemm", version, about = "Blocked INT16 GEMM with an emulated AIE micro-kernel and cycle model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the blocked GEMM on seeded operands and verify it against the naive oracle.
    Gemm(GemmArgs),
    /// Evaluate the cycle model over a range of kc or mc values and emit CSV.
    Sweep(SweepArgs),
    /// Pick mc, nc, kc for a problem.
    Tune(TuneArgs),
    /// Fit the cost constants to a measurement dataset.
    Calibrate(CalibrateArgs),
    /// Pack a seeded weight matrix offline into a pre-packed file.
    Prepack(PrepackArgs),
    /// Run a convolution through IM2ROW + GEMM and verify it against direct convolution.
    Conv(ConvArgs),
}

#[derive(Args, Debug)]
struct MachineArgs {
    /// Machine description (`name = integer` lines). Defaults to $GEMM_MACHINE_FILE, then built-in values.
    #[arg(long, value_name = "FILE")]
    machine: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OperandArgs {
    /// PRNG seed for the operands.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw operands from the whole i16 range instead of [-128, 127].
    #[arg(long)]
    full_range: bool,
}

#[derive(Args, Debug)]
struct BlockArgs {
    #[arg(long)]
    mc: Option<usize>,
    #[arg(long)]
    nc: Option<usize>,
    #[arg(long)]
    kc: Option<usize>,
    #[arg(long, default_value_t = 16)]
    mr: usize,
    #[arg(long, default_value_t = 4)]
    nr: usize,
}

#[derive(Args, Debug)]
struct GemmArgs {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    block: BlockArgs,
    #[command(flatten)]
    operands: OperandArgs,
    /// Writeback mode: `wrap` or `srs:<shift>`.
    #[arg(long, default_value = "wrap", value_parser = parse_mode)]
    mode: WritebackMode,
    /// Use weights from a pre-packed file produced by `prepack`.
    #[arg(long, value_name = "FILE")]
    prepacked: Option<PathBuf>,
    /// Gather each Br straight from B instead of packing Bc.
    #[arg(long)]
    no_pack_bc: bool,
    #[command(flatten)]
    machine: MachineArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Parameter to sweep: `kc` (isolated micro-kernel) or `mc` (full GEMM).
    #[arg(long, value_parser = parse_sweep_param)]
    param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', conflicts_with = "range", required_unless_present = "range")]
    values: Vec<usize>,
    /// Inclusive range `start:end:step`.
    #[arg(long, value_parser = parse_range)]
    range: Option<ValueRange>,
    /// Problem rows for the mc sweep.
    #[arg(long, default_value_t = 4096)]
    m: usize,
    #[arg(long, default_value_t = 4096)]
    n: usize,
    #[arg(long, default_value_t = 290)]
    k: usize,
    /// Fixed nc for the mc sweep (default: n).
    #[arg(long)]
    nc: Option<usize>,
    /// Fixed kc for the mc sweep (default: k).
    #[arg(long)]
    kc: Option<usize>,
    #[arg(long, default_value_t = 16)]
    mr: usize,
    #[arg(long, default_value_t = 4)]
    nr: usize,
    /// Measurement CSV (`param,metric,value`) for reference columns and `--calibrated`.
    #[arg(long, value_name = "FILE.csv")]
    dataset: Option<PathBuf>,
    /// Use constants fitted to the dataset instead of the defaults.
    #[arg(long)]
    calibrated: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE.csv")]
    out: Option<PathBuf>,
    #[command(flatten)]
    machine: MachineArgs,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    machine: MachineArgs,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Measurement CSV; the embedded published dataset by default.
    #[arg(long, value_name = "FILE.csv")]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    machine: MachineArgs,
}

#[derive(Args, Debug)]
struct PrepackArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    mc: usize,
    #[arg(long)]
    kc: usize,
    #[arg(long, default_value_t = 16)]
    mr: usize,
    #[command(flatten)]
    operands: OperandArgs,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[command(flatten)]
    machine: MachineArgs,
}

#[derive(Args, Debug)]
struct ConvArgs {
    /// Input tensor in T3I16 format; seeded random otherwise.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Input channels (ignored with --input).
    #[arg(long, default_value_t = 4)]
    c: usize,
    #[arg(long, default_value_t = 8)]
    h: usize,
    #[arg(long, default_value_t = 8)]
    w: usize,
    /// Output channels.
    #[arg(long, default_value_t = 8)]
    co: usize,
    #[arg(long, default_value_t = 3)]
    kh: usize,
    #[arg(long, default_value_t = 3)]
    kw: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 0)]
    pad: usize,
    #[command(flatten)]
    block: BlockArgs,
    #[command(flatten)]
    operands: OperandArgs,
    /// Write the output tensor here in T3I16 format.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(flatten)]
    machine: MachineArgs,
}

fn parse_mode(s: &str) -> Result<WritebackMode, String> {
    match s {
        "wrap" => Ok(WritebackMode::Wrap16),
        _ => {
            let shift = s
                .strip_prefix("srs:")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| format!("expected `wrap` or `srs:<shift>`, got {s:?}"))?;
            WritebackMode::saturate(shift).map_err(|e| e.to_string())
        }
    }
}

fn parse_sweep_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone)]
struct ValueRange(Vec<usize>);

fn parse_range(s: &str) -> Result<ValueRange, String> {
    let parts: Vec<usize> = s
        .split(':')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("expected start:end:step, got {s:?}"))?;
    let [start, end, step] = parts[..] else {
        return Err(format!("expected start:end:step, got {s:?}"));
    };
    if step == 0 || start > end {
        return Err(format!("empty or invalid range {s:?}"));
    }
    Ok(ValueRange((start..=end).step_by(step).collect()))
}

/// A failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) | Error::Calibration(_) => EXIT_USAGE,
            Error::Capacity(_) | Error::Infeasible(_) => EXIT_CAPACITY,
            Error::Io(_) | Error::Format { .. } => EXIT_IO,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn load_machine(args: &MachineArgs) -> Result<MachineModel, Failure> {
    let path = args.machine.clone().or_else(|| std::env::var_os(MACHINE_FILE_ENV).map(PathBuf::from));
    match path {
        Some(p) => MachineModel::from_file(&p).map_err(|e| {
            let mut f = Failure::from(e);
            f.message = format!("{}: {}", p.display(), f.message);
            if f.code == EXIT_USAGE {
                f.code = EXIT_IO;
            }
            f
        }),
        None => Ok(MachineModel::default()),
    }
}

fn load_dataset(path: &Option<PathBuf>) -> Result<CalibrationDataset, Failure> {
    match path {
        Some(p) => CalibrationDataset::from_csv_file(p).map_err(Failure::from),
        None => Ok(CalibrationDataset::published()),
    }
}

fn resolve_params(block: &BlockArgs, dims: &ProblemDims, machine: &MachineModel, constants: &CostConstants) -> Result<BlockParams, Failure> {
    match (block.mc, block.nc, block.kc) {
        (Some(mc), Some(nc), Some(kc)) => Ok(BlockParams::new(mc, nc, kc, block.mr, block.nr)?),
        (None, None, None) => {
            if (block.mr, block.nr) != (BlockParams::REF_MR, BlockParams::REF_NR) {
                return Err(usage("automatic tuning supports only mr=16 nr=4; pass --mc --nc --kc"));
            }
            Ok(tune(dims, DType::Int16, machine, constants)?.params)
        }
        _ => Err(usage("pass all of --mc --nc --kc, or none to tune them")),
    }
}

fn print_run(out: &mut dyn Write, run: &GemmRun) -> std::io::Result<()> {
    let s = &run.stats;
    writeln!(out, "predicted_cycles   {}", run.predicted_cycles())?;
    writeln!(out, "macs_per_cycle     {:.4}", run.macs_per_cycle())?;
    writeln!(out, "pct_peak           {:.2}", run.pct_peak())?;
    if run.prediction.extrapolated {
        writeln!(out, "note               partial blocks: prediction is extrapolated")?;
    }
    writeln!(out, "ukr_invocations    {}", s.ukr_invocations)?;
    writeln!(out, "br_copies          {}", s.br_copies)?;
    writeln!(out, "mac16_calls        {}", s.mac16_calls)?;
    writeln!(out, "bytes_br_copied    {}", s.bytes_br_copied)?;
    writeln!(out, "bytes_ar_streamed  {}", s.bytes_ar_streamed)?;
    writeln!(out, "bytes_cr_loaded    {}", s.bytes_cr_loaded)?;
    writeln!(out, "bytes_cr_stored    {}", s.bytes_cr_stored)?;
    writeln!(out, "bytes_ac_packed    {}", s.bytes_ac_packed)?;
    writeln!(out, "bytes_bc_packed    {}", s.bytes_bc_packed)?;
    for w in &run.warnings {
        writeln!(out, "{w}")?;
    }
    Ok(())
}

fn cmd_gemm(args: GemmArgs, out: &mut dyn Write) -> CmdResult {
    let machine = load_machine(&args.machine)?;
    let constants = CostConstants::default();
    let packed: Option<PackedA> = match &args.prepacked {
        Some(p) => Some(deserialize_prepacked(File::open(p)?)?),
        None => None,
    };
    let (m, k) = match (&packed, args.m, args.k) {
        (Some(p), m, k) => {
            if m.is_some_and(|m| m != p.m) || k.is_some_and(|k| k != p.k) {
                return Err(usage(format!("--m/--k disagree with pre-packed file (m={} k={})", p.m, p.k)));
            }
            (p.m, p.k)
        }
        (None, Some(m), Some(k)) => (m, k),
        _ => return Err(usage("--m and --k are required without --prepacked")),
    };
    let dims = ProblemDims::new(m, args.n, k)?;
    let params = match &packed {
        Some(p) => {
            let nc = args.block.nc.unwrap_or_else(|| args.n.next_multiple_of(args.block.nr));
            if args.block.mc.is_some_and(|v| v != p.mc) || args.block.kc.is_some_and(|v| v != p.kc) || args.block.mr != p.mr {
                return Err(usage(format!(
                    "blocking flags disagree with pre-packed file (mc={} kc={} mr={})",
                    p.mc, p.kc, p.mr
                )));
            }
            BlockParams::new(p.mc, nc, p.kc, p.mr, args.block.nr)?
        }
        None => resolve_params(&args.block, &dims, &machine, &constants)?,
    };

    let mut rng = OperandRng::new(args.operands.seed);
    let generated_a = rng.matrix(m, k, args.operands.full_range);
    let b = rng.matrix(k, args.n, args.operands.full_range);
    let c = rng.matrix(m, args.n, args.operands.full_range);
    let (a_operand, a_matrix) = match &packed {
        Some(p) => (AOperand::Prepacked(p), unpack_all(p)),
        None => (AOperand::Matrix(&generated_a), generated_a.clone()),
    };

    writeln!(out, "gemm {dims} {params} mode={}", args.mode)?;
    let options = GemmOptions {
        mode: args.mode,
        pack_bc: !args.no_pack_bc,
    };
    let run = gemm_blocked(a_operand, &b, &c, &dims, &params, &options, &machine, &constants)?;
    print_run(out, &run)?;
    let expect = naive_gemm_oracle(&a_matrix, &b, &c, args.mode)?;
    // Saturation is applied per k-slab, so multi-slab srs runs are not
    // expected to match the single-pass oracle.
    let comparable = args.mode == WritebackMode::Wrap16 || k <= params.kc;
    if !comparable {
        writeln!(out, "UNVERIFIED (srs writeback with {} k-slabs)", k.div_ceil(params.kc))?;
        return Ok(());
    }
    if run.c != expect {
        let bad = (0..m)
            .flat_map(|i| (0..args.n).map(move |j| (i, j)))
            .find(|&(i, j)| run.c.get(i, j) != expect.get(i, j))
            .expect("matrices differ");
        return Err(Failure {
            code: EXIT_MISMATCH,
            message: format!(
                "MISMATCH at {bad:?}: blocked {} vs oracle {}",
                run.c.get(bad.0, bad.1),
                expect.get(bad.0, bad.1)
            ),
        });
    }
    writeln!(out, "VERIFIED")?;
    Ok(())
}

fn unpack_all(p: &PackedA) -> Int16Matrix {
    let mut a = Int16Matrix::zeros(p.m, p.k);
    for blk in &p.blocks {
        let sub = blk.unpack();
        for i in 0..blk.mc_eff {
            for j in 0..blk.kc_eff {
                a.set(blk.ic + i, blk.pc + j, sub.get(i, j));
            }
        }
    }
    a
}

fn cmd_sweep(args: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let machine = load_machine(&args.machine)?;
    let dataset = load_dataset(&args.dataset)?;
    let constants = if args.calibrated {
        calibrate(&dataset, &machine)?.constants
    } else {
        CostConstants::default()
    };
    let values = args.range.clone().map_or(args.values.clone(), |r| r.0);
    let config = SweepConfig {
        shape: MicroKernelShape::new(args.mr, args.nr)?,
        dims: ProblemDims::new(args.m, args.n, args.k)?,
        nc: args.nc,
        kc: args.kc,
    };
    let table = sweep(args.param, &values, &config, &constants, &machine, &dataset)?;
    for row in table.rows.iter().filter(|r| !r.violations.is_empty()) {
        writeln!(err, "warning: {}={} infeasible: {}", args.param.name(), row.value, row.violations.join("; "))?;
    }
    match &args.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            table.write_csv(&mut f)?;
            f.flush()?;
            write!(out, "{table}")?;
        }
        None => table.write_csv(out)?,
    }
    Ok(())
}

fn cmd_tune(args: TuneArgs, out: &mut dyn Write) -> CmdResult {
    let machine = load_machine(&args.machine)?;
    let dims = ProblemDims::new(args.m, args.n, args.k)?;
    let t = tune(&dims, DType::Int16, &machine, &CostConstants::default())?;
    let p = t.params;
    writeln!(out, "kc={} mc={} nc={} mr={} nr={}", p.kc, p.mc, p.nc, p.mr, p.nr)?;
    writeln!(
        out,
        "predicted_cycles={} macs_per_cycle={:.4} pct_peak={:.2}{}",
        t.prediction.cycles,
        t.prediction.macs_per_cycle,
        t.prediction.pct_peak,
        if t.prediction.extrapolated { " (extrapolated)" } else { "" }
    )?;
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs, out: &mut dyn Write) -> CmdResult {
    let machine = load_machine(&args.machine)?;
    let dataset = load_dataset(&args.dataset)?;
    let cal = calibrate(&dataset, &machine)?;
    let c = cal.constants;
    let tag = |fitted: bool| if fitted { "fitted" } else { "default" };
    writeln!(out, "O  ukr_overhead_cycles         = {:.4} ({})", c.ukr_overhead_cycles, tag(cal.fitted_overhead))?;
    writeln!(out, "c1 br_copy_cycles_per_element  = {:.6} ({})", c.br_copy_cycles_per_element, tag(cal.fitted_copy))?;
    writeln!(out, "c0 br_copy_fixed_cycles        = {:.4} (default)", c.br_copy_fixed_cycles)?;
    writeln!(out, "w  copy_overlap_fraction       = {:.5} ({})", c.copy_overlap_fraction, tag(cal.fitted_overlap))?;
    writeln!(out, "s  spill_penalty_factor        = {:.5} ({})", c.spill_penalty_factor, tag(cal.fitted_spill))?;
    writeln!(out, "residuals:")?;
    for r in &cal.residuals {
        writeln!(out, "  {r}")?;
    }
    Ok(())
}

fn cmd_prepack(args: PrepackArgs, out: &mut dyn Write) -> CmdResult {
    let machine = load_machine(&args.machine)?;
    // n does not affect the packing of A; nr only needs to be valid.
    let dims = ProblemDims::new(args.m, 1, args.k)?;
    let params = BlockParams::new(args.mc, 4, args.kc, args.mr, 4)?;
    let ac_bytes = args.mc.min(args.m).next_multiple_of(args.mr) as u64 * args.kc.min(args.k) as u64 * 2;
    if ac_bytes > machine.ac_fpga_budget_bytes {
        return Err(Error::Capacity(vec![crate::error::Violation {
            kind: crate::error::ViolationKind::AcExceedsFpgaBudget,
            message: format!("Ac block needs {ac_bytes} B of {} B FPGA budget", machine.ac_fpga_budget_bytes),
        }])
        .into());
    }
    let mut rng = OperandRng::new(args.operands.seed);
    let a = rng.matrix(args.m, args.k, args.operands.full_range);
    let packed = prepack_a(&a, &dims, &params)?;
    let mut f = BufWriter::new(File::create(&args.out)?);
    serialize_prepacked(&packed, &mut f)?;
    f.flush()?;
    writeln!(
        out,
        "wrote {} ({} blocks, {} payload bytes, largest Ac {} B)",
        args.out.display(),
        packed.blocks.len(),
        packed.payload_bytes(),
        packed.max_block_bytes()
    )?;
    Ok(())
}

fn cmd_conv(args: ConvArgs, out: &mut dyn Write) -> CmdResult {
    let machine = load_machine(&args.machine)?;
    let constants = CostConstants::default();
    let mut rng = OperandRng::new(args.operands.seed);
    let x = match &args.input {
        Some(p) => Tensor3::read_from(File::open(p)?)?,
        None => Tensor3::new(args.c, args.h, args.w, rng.values(args.c * args.h * args.w, args.operands.full_range))?,
    };
    let f = FilterBank::new(
        args.co,
        x.c,
        args.kh,
        args.kw,
        rng.values(args.co * x.c * args.kh * args.kw, args.operands.full_range),
    )?;
    let dims = conv_dims(&x, &f, args.stride, args.pad)?;
    let params = resolve_params(&args.block, &dims, &machine, &constants)?;
    writeln!(
        out,
        "conv {}x{}x{} * {}x{}x{}x{} stride={} pad={} -> gemm {dims} {params}",
        x.c, x.h, x.w, f.co, f.ci, f.kh, f.kw, args.stride, args.pad
    )?;
    let (y, run) = conv_gemm(&x, &f, args.stride, args.pad, &params, WritebackMode::Wrap16, &machine, &constants)?;
    print_run(out, &run)?;
    let expect = conv_direct_oracle(&x, &f, args.stride, args.pad, WritebackMode::Wrap16)?;
    if y != expect {
        return Err(Failure {
            code: EXIT_MISMATCH,
            message: "MISMATCH between GEMM convolution and direct convolution".into(),
        });
    }
    if let Some(p) = &args.output {
        let mut w = BufWriter::new(File::create(p)?);
        y.write_to(&mut w)?;
        w.flush()?;
    }
    writeln!(out, "output {}x{}x{}", y.c, y.h, y.w)?;
    writeln!(out, "VERIFIED")?;
    Ok(())
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Gemm(a) => cmd_gemm(a, out),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::Tune(a) => cmd_tune(a, out),
        Command::Calibrate(a) => cmd_calibrate(a, out),
        Command::Prepack(a) => cmd_prepack(a, out),
        Command::Conv(a) => cmd_conv(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("vgemm").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(parse_mode("wrap"), Ok(WritebackMode::Wrap16));
        assert_eq!(parse_mode("srs:12"), Ok(WritebackMode::SaturateSrs { shift: 12 }));
        assert!(parse_mode("srs:48").is_err());
        assert!(parse_mode("sat").is_err());
    }

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("8:32:8").unwrap().0, vec![8, 16, 24, 32]);
        assert!(parse_range("8:4:1").is_err());
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("1:4:0").is_err());
    }

    #[test]
    fn gemm_verified() {
        let (code, out, _) = call(&["gemm", "--m", "64", "--n", "64", "--k", "64", "--mc", "32", "--nc", "16", "--kc", "16", "--seed", "7"]);
        assert_eq!(code, 0);
        assert!(out.contains("VERIFIED"));
    }

    #[test]
    fn gemm_capacity_and_usage_errors() {
        let (code, _, err) = call(&["gemm", "--m", "64", "--n", "64", "--k", "300", "--mc", "32", "--nc", "16", "--kc", "291", "--nr", "4"]);
        assert_eq!(code, EXIT_CAPACITY);
        assert!(err.contains("kc_max=290"), "{err}");
        assert_eq!(call(&["gemm", "--m", "0", "--n", "4", "--k", "4"]).0, EXIT_USAGE);
        assert_eq!(call(&["gemm", "--m", "4", "--n", "4", "--k", "4", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(call(&["gemm", "--m", "4", "--n", "4", "--k", "4", "--mc", "16"]).0, EXIT_USAGE);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_lists_flags() {
        let (code, out, _) = call(&["gemm", "--help"]);
        assert_eq!(code, 0);
        for flag in ["--m", "--n", "--k", "--mc", "--nc", "--kc", "--mr", "--nr", "--seed", "--mode", "--prepacked", "--full-range"] {
            assert!(out.contains(flag), "missing {flag}");
        }
    }

    #[test]
    fn tune_and_calibrate() {
        let (code, out, _) = call(&["tune", "--m", "4096", "--n", "4096", "--k", "290"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("kc=290 mc=4096 nc=4096"), "{out}");
        let (code, out, _) = call(&["calibrate"]);
        assert_eq!(code, 0);
        assert!(out.contains("ukr_overhead_cycles         = 83.6"), "{out}");
    }

    #[test]
    fn missing_machine_file_is_io_error() {
        assert_eq!(call(&["tune", "--m", "4", "--n", "4", "--k", "4", "--machine", "/nonexistent/m.txt"]).0, EXIT_IO);
    }
}
