use std::fmt;
use std::io::Write;

use super::dataset::CalibrationDataset;
use super::{predict_gemm, predict_ukr_cycles, CostConstants};
use crate::machine::{kc_max, validate_params, MachineModel};
use crate::matrix::{BlockParams, ProblemDims};
use crate::microkernel::MicroKernelShape;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Isolated micro-kernel, varying the panel depth.
    Kc,
    /// Full GEMM, varying the Ac block height.
    Mc,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Kc => "kc",
            SweepParam::Mc => "mc",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kc" => Ok(SweepParam::Kc),
            "mc" => Ok(SweepParam::Mc),
            _ => Err(Error::invalid(format!("sweep parameter must be kc or mc, got {s:?}"))),
        }
    }
}

/// Everything held fixed during a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub shape: MicroKernelShape,
    /// Problem of the mc sweep.
    pub dims: ProblemDims,
    /// nc of the mc sweep; `None` means `n` rounded up to a multiple of nr.
    pub nc: Option<usize>,
    /// kc of the mc sweep; `None` means `k`.
    pub kc: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            shape: MicroKernelShape::REFERENCE,
            dims: ProblemDims { m: 4096, n: 4096, k: 290 },
            nc: None,
            kc: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: usize,
    pub cycles: u64,
    pub macs_per_cycle: f64,
    pub pct_peak: f64,
    pub reference_pct_peak: Option<f64>,
    /// Capacity or parameter violations; the row is still computed.
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub param: SweepParam,
    /// Ascending by `value`, no duplicates.
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str = "param,value,cycles,macs_per_cycle,pct_peak,reference_pct_peak";

/// Formats with six significant digits, trailing zeros removed.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.truncate(s.trim_end_matches('0').trim_end_matches('.').len());
    }
    s
}

impl SweepTable {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(SWEEP_CSV_HEADER.as_bytes())?;
        out.write_all(b"\n")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.param.name(),
                r.value,
                r.cycles,
                fmt_sig6(r.macs_per_cycle),
                fmt_sig6(r.pct_peak),
                r.reference_pct_peak.map(fmt_sig6).unwrap_or_default()
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii")
    }
}

impl fmt::Display for SweepTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6} {:>14} {:>10} {:>8} {:>10}", self.param.name(), "cycles", "MACs/cyc", "%peak", "ref %peak")?;
        for r in &self.rows {
            write!(
                f,
                "{:>6} {:>14} {:>10.3} {:>8.2} {:>10}",
                r.value,
                r.cycles,
                r.macs_per_cycle,
                r.pct_peak,
                r.reference_pct_peak.map(|v| format!("{v:.2}")).unwrap_or_default()
            )?;
            if !r.violations.is_empty() {
                write!(f, "  [{}]", r.violations.join("; "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Evaluates the model at each value of `param`.
///
/// The kc sweep reports the isolated micro-kernel; the mc sweep reports the
/// full GEMM on `config.dims`. Published values from `reference` are attached
/// where the value matches a measured point.
pub fn sweep(
    param: SweepParam,
    values: &[usize],
    config: &SweepConfig,
    constants: &CostConstants,
    machine: &MachineModel,
    reference: &CalibrationDataset,
) -> Result<SweepTable> {
    let mut values: Vec<usize> = values.to_vec();
    values.sort_unstable();
    values.dedup();
    if values.is_empty() {
        return Err(Error::invalid("sweep range is empty"));
    }
    if values[0] == 0 {
        return Err(Error::invalid("sweep values must be positive"));
    }
    let shape = config.shape;
    let peak = f64::from(machine.peak_macs_per_cycle(shape.dtype));
    let rows = values
        .into_iter()
        .map(|value| match param {
            SweepParam::Kc => {
                let cycles = predict_ukr_cycles(value, &shape, constants, machine);
                let mpc = (shape.mr * shape.nr * value) as f64 / cycles as f64;
                let mut violations = Vec::new();
                let bound = kc_max(shape.nr, shape.dtype, machine);
                if value > bound {
                    violations.push(format!("Br exceeds local budget (kc_max={bound})"));
                }
                if shape.is_reference() && value % 2 != 0 {
                    violations.push("odd kc for the 16x4 micro-kernel".into());
                }
                SweepRow {
                    value,
                    cycles,
                    macs_per_cycle: mpc,
                    pct_peak: 100.0 * mpc / peak,
                    reference_pct_peak: if shape.is_reference() { reference.kc_reference(value) } else { None },
                    violations,
                }
            }
            SweepParam::Mc => {
                let dims = config.dims;
                let params = BlockParams {
                    mc: value,
                    nc: config.nc.unwrap_or_else(|| dims.n.next_multiple_of(shape.nr)),
                    kc: config.kc.unwrap_or(dims.k),
                    mr: shape.mr,
                    nr: shape.nr,
                };
                let pred = predict_gemm(&dims, &params, constants, machine);
                let report = validate_params(&params, &dims, shape.dtype, machine);
                SweepRow {
                    value,
                    cycles: pred.cycles,
                    macs_per_cycle: pred.macs_per_cycle,
                    pct_peak: pred.pct_peak,
                    reference_pct_peak: reference.mc_reference(value, &dims),
                    violations: report.errors().map(|v| v.to_string()).collect(),
                }
            }
        })
        .collect();
    Ok(SweepTable { param, rows })
}
