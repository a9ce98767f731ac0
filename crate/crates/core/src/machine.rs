//! Memory hierarchy and compute description of a VCK190-class board, and the
//! capacity bounds it places on the blocking parameters.

use std::fmt;
use std::path::Path;

use crate::error::{Violation, ViolationKind};
use crate::matrix::{BlockParams, DType, ProblemDims};
use crate::{Error, Result};

/// Capacities (bytes) and peak MAC rates of one AIE tile and its surroundings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineModel {
    /// Vector register file.
    pub reg_bytes: u64,
    /// AIE tile local memory.
    pub local_bytes: u64,
    /// FPGA block/ultra RAM.
    pub fpga_bytes: u64,
    /// DDR4 global memory.
    pub ddr_bytes: u64,
    pub peak_int8: u32,
    pub peak_int16: u32,
    pub peak_fp32: u32,
    /// 48-bit accumulator lanes (4 registers × 16 lanes).
    pub acc_lanes: u32,
    /// Part of local memory usable for the Br micro-panel.
    pub br_local_budget_bytes: u64,
    /// Part of FPGA RAM usable for the Ac buffer.
    pub ac_fpga_budget_bytes: u64,
}

impl Default for MachineModel {
    fn default() -> Self {
        let fpga_bytes = 20 << 20;
        MachineModel {
            reg_bytes: 2048,
            local_bytes: 32 * 1024,
            fpga_bytes,
            ddr_bytes: 2 << 30,
            peak_int8: 128,
            peak_int16: 32,
            peak_fp32: 8,
            acc_lanes: 64,
            // 290 · 4 · 2: the largest Br (nr = 4, INT16) the tile accepts.
            br_local_budget_bytes: 2320,
            ac_fpga_budget_bytes: fpga_bytes,
        }
    }
}

/// Memory level an operand lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MemLevel {
    Registers,
    Local,
    Fpga,
    Ddr,
}

impl fmt::Display for MemLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MemLevel::Registers => "registers",
            MemLevel::Local => "local memory",
            MemLevel::Fpga => "FPGA RAM",
            MemLevel::Ddr => "DDR",
        })
    }
}

/// Where each operand of the blocked GEMM resides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub a: MemLevel,
    pub bc: MemLevel,
    pub br: MemLevel,
    pub c: MemLevel,
    pub cr: MemLevel,
}

impl Placement {
    /// A pre-packed in FPGA RAM, Bc and C in DDR, Br in local memory, Cr in
    /// the accumulators.
    pub const REFERENCE: Placement = Placement {
        a: MemLevel::Fpga,
        bc: MemLevel::Ddr,
        br: MemLevel::Local,
        c: MemLevel::Ddr,
        cr: MemLevel::Registers,
    };

    /// Only the reference placement is supported.
    pub fn check(&self) -> Result<()> {
        if *self == Self::REFERENCE {
            Ok(())
        } else {
            Err(Error::invalid(format!("unsupported operand placement {self:?}")))
        }
    }
}

impl Default for Placement {
    fn default() -> Self {
        Self::REFERENCE
    }
}

const KEYS: [&str; 11] = [
    "reg_bytes",
    "local_bytes",
    "fpga_bytes",
    "ddr_bytes",
    "peak_int8",
    "peak_int16",
    "peak_fp32",
    "acc_lanes",
    "br_local_budget_bytes",
    "ac_fpga_budget_bytes",
    "vreg_budget_bytes",
];

impl MachineModel {
    pub fn peak_macs_per_cycle(&self, dtype: DType) -> u32 {
        match dtype {
            DType::Int8 => self.peak_int8,
            DType::Int16 => self.peak_int16,
            DType::Fp32 => self.peak_fp32,
        }
    }

    pub fn capacity(&self, level: MemLevel) -> u64 {
        match level {
            MemLevel::Registers => self.reg_bytes,
            MemLevel::Local => self.local_bytes,
            MemLevel::Fpga => self.fpga_bytes,
            MemLevel::Ddr => self.ddr_bytes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let caps = [
            ("reg_bytes", self.reg_bytes),
            ("local_bytes", self.local_bytes),
            ("fpga_bytes", self.fpga_bytes),
            ("ddr_bytes", self.ddr_bytes),
            ("peak_int8", self.peak_int8.into()),
            ("peak_int16", self.peak_int16.into()),
            ("peak_fp32", self.peak_fp32.into()),
            ("acc_lanes", self.acc_lanes.into()),
            ("br_local_budget_bytes", self.br_local_budget_bytes),
            ("ac_fpga_budget_bytes", self.ac_fpga_budget_bytes),
        ];
        if let Some((name, _)) = caps.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("machine field {name} must be positive")));
        }
        if self.br_local_budget_bytes > self.local_bytes {
            return Err(Error::invalid(format!(
                "br_local_budget_bytes {} exceeds local_bytes {}",
                self.br_local_budget_bytes, self.local_bytes
            )));
        }
        if self.ac_fpga_budget_bytes > self.fpga_bytes {
            return Err(Error::invalid(format!(
                "ac_fpga_budget_bytes {} exceeds fpga_bytes {}",
                self.ac_fpga_budget_bytes, self.fpga_bytes
            )));
        }
        Ok(())
    }

    /// Parses a `name = integer` description on top of the defaults.
    ///
    /// Blank lines and `#` comments are allowed; unknown keys are rejected.
    /// `vreg_budget_bytes` is accepted as an alias of `reg_bytes`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = MachineModel::default();
        let mut explicit_ac_budget = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::invalid(format!("machine file line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `name = integer`, got {line:?}")))?;
            let key = key.trim();
            let value: u64 = value
                .trim()
                .replace('_', "")
                .parse()
                .map_err(|_| bad(format!("value for {key} is not a non-negative integer")))?;
            let small = |v: u64| u32::try_from(v).map_err(|_| bad(format!("{key} out of range")));
            match key {
                "reg_bytes" | "vreg_budget_bytes" => m.reg_bytes = value,
                "local_bytes" => m.local_bytes = value,
                "fpga_bytes" => m.fpga_bytes = value,
                "ddr_bytes" => m.ddr_bytes = value,
                "peak_int8" => m.peak_int8 = small(value)?,
                "peak_int16" => m.peak_int16 = small(value)?,
                "peak_fp32" => m.peak_fp32 = small(value)?,
                "acc_lanes" => m.acc_lanes = small(value)?,
                "br_local_budget_bytes" => m.br_local_budget_bytes = value,
                "ac_fpga_budget_bytes" => {
                    m.ac_fpga_budget_bytes = value;
                    explicit_ac_budget = true;
                }
                _ => {
                    return Err(bad(format!(
                        "unknown key {key:?} (expected one of {})",
                        KEYS.join(", ")
                    )))
                }
            }
        }
        if !explicit_ac_budget {
            m.ac_fpga_budget_bytes = m.fpga_bytes;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Renders the model in the format accepted by [`MachineModel::parse`].
    pub fn to_text(&self) -> String {
        format!(
            "reg_bytes = {}\nlocal_bytes = {}\nfpga_bytes = {}\nddr_bytes = {}\n\
             peak_int8 = {}\npeak_int16 = {}\npeak_fp32 = {}\nacc_lanes = {}\n\
             br_local_budget_bytes = {}\nac_fpga_budget_bytes = {}\n",
            self.reg_bytes,
            self.local_bytes,
            self.fpga_bytes,
            self.ddr_bytes,
            self.peak_int8,
            self.peak_int16,
            self.peak_fp32,
            self.acc_lanes,
            self.br_local_budget_bytes,
            self.ac_fpga_budget_bytes
        )
    }
}

/// Largest kc for which a kc×nr micro-panel fits the Br budget.
pub fn kc_max(nr: usize, dtype: DType, machine: &MachineModel) -> usize {
    (machine.br_local_budget_bytes / (nr.max(1) * dtype.elem_bytes()) as u64) as usize
}

/// Largest mc for which an mc×kc buffer fits the Ac budget.
pub fn mc_max(kc: usize, dtype: DType, machine: &MachineModel) -> usize {
    (machine.ac_fpga_budget_bytes / (kc.max(1) * dtype.elem_bytes()) as u64) as usize
}

/// Outcome of [`validate_params`]: every violated check, warnings included.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    /// No hard violations. Warnings are allowed.
    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| !v.kind.is_warning())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.kind.is_warning())
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    /// Converts hard violations into [`Error::Capacity`].
    pub fn into_result(self) -> Result<Vec<Violation>> {
        if self.is_ok() {
            Ok(self.violations)
        } else {
            Err(Error::Capacity(self.violations.into_iter().filter(|v| !v.kind.is_warning()).collect()))
        }
    }
}

/// Checks blocking parameters against the machine capacities.
///
/// All checks run; the report lists every violation rather than the first.
pub fn validate_params(
    params: &BlockParams,
    _dims: &ProblemDims,
    dtype: DType,
    machine: &MachineModel,
) -> ValidationReport {
    let mut out = Vec::new();
    let mut push = |kind, message: String| out.push(Violation { kind, message });
    let BlockParams { mc, nc, kc, mr, nr } = *params;
    let elem = dtype.elem_bytes() as u64;

    if [mc, nc, kc, mr, nr].contains(&0) {
        push(ViolationKind::ZeroParameter, format!("all blocking parameters must be positive ({params})"));
        return ValidationReport { violations: out };
    }
    let kc_bound = kc_max(nr, dtype, machine);
    if kc > kc_bound {
        push(
            ViolationKind::BrExceedsLocalBudget,
            format!(
                "Br exceeds local budget: kc={kc} with nr={nr} needs {} B of {} B (kc_max={kc_bound})",
                kc as u64 * nr as u64 * elem,
                machine.br_local_budget_bytes
            ),
        );
    }
    let ac_bytes = mc as u64 * kc as u64 * elem;
    if ac_bytes > machine.ac_fpga_budget_bytes {
        push(
            ViolationKind::AcExceedsFpgaBudget,
            format!(
                "Ac exceeds FPGA budget: mc={mc} kc={kc} needs {ac_bytes} B of {} B (mc_max={})",
                machine.ac_fpga_budget_bytes,
                mc_max(kc, dtype, machine)
            ),
        );
    }
    let bc_bytes = kc as u64 * nc as u64 * elem;
    if bc_bytes > machine.ddr_bytes {
        push(
            ViolationKind::BcExceedsDdr,
            format!("Bc exceeds DDR: kc={kc} nc={nc} needs {bc_bytes} B of {} B", machine.ddr_bytes),
        );
    }
    if (mr * nr) as u64 > u64::from(machine.acc_lanes) {
        push(
            ViolationKind::AccumulatorSpill,
            format!(
                "accumulator spill: {mr}x{nr} micro-tile needs {} lanes, {} available",
                mr * nr,
                machine.acc_lanes
            ),
        );
    }
    if mr > mc || nr > nc {
        push(ViolationKind::MicroTileExceedsBlock, format!("micro-tile {mr}x{nr} exceeds block {mc}x{nc}"));
    }
    if mc % mr != 0 {
        push(ViolationKind::McNotMultipleOfMr, format!("mc={mc} is not a multiple of mr={mr}"));
    }
    if nc % nr != 0 {
        push(ViolationKind::NcNotMultipleOfNr, format!("nc={nc} is not a multiple of nr={nr}"));
    }
    if params.is_reference_shape() && kc % 2 != 0 {
        push(ViolationKind::OddKcFor16x4, format!("kc={kc} must be even for the 16x4 micro-kernel"));
    }
    ValidationReport { violations: out }
}
