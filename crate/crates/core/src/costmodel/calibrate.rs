use std::fmt;

use super::dataset::CalibrationDataset;
use super::{predict_br_copy_cycles, predict_gemm, predict_ukr_cycles, CostConstants, REFERENCE_TILE_LANES};
use crate::machine::MachineModel;
use crate::matrix::{BlockParams, DType};
use crate::microkernel::{resource_check, MicroKernelShape};
use crate::{Error, Result};

/// Resolution of the overlap-fraction search.
const OVERLAP_GRID_STEPS: u32 = 100_000;
const OVERLAP_COARSE_STRIDE: u32 = 100;

/// Difference between one measurement and the fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub label: String,
    pub unit: &'static str,
    pub measured: f64,
    pub model: f64,
}

impl Residual {
    pub fn error(&self) -> f64 {
        self.model - self.measured
    }
}

impl fmt::Display for Residual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<28} measured {:>10.4} {:<14} model {:>10.4}  residual {:+.4}",
            self.label,
            self.measured,
            self.unit,
            self.model,
            self.error()
        )
    }
}

/// Fitted constants, which of them the data determined, and per-point residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub constants: CostConstants,
    pub fitted_overhead: bool,
    pub fitted_copy: bool,
    pub fitted_overlap: bool,
    pub fitted_spill: bool,
    pub residuals: Vec<Residual>,
}

fn shape(mr: usize, nr: usize) -> MicroKernelShape {
    MicroKernelShape {
        mr,
        nr,
        dtype: DType::Int16,
    }
}

/// Fits the cost constants to `data` on `machine`.
///
/// * overhead `O`: least squares of `cycles = mr·nr·kc/peak + O·mr·nr/64`
///   over every non-spilling kc-sweep point and micro-kernel anchor;
/// * Br copy slope: least squares through `c0` over the copy anchors;
/// * spill penalty: mean ratio of measured to unpenalized cycles over the
///   spilling anchors;
/// * overlap `ω`: grid search minimising the squared MACs/cycle error over
///   the mc sweep, using the constants fitted above.
///
/// Constants without supporting data keep their defaults and are reported
/// as not fitted. An empty dataset is an error.
pub fn calibrate(data: &CalibrationDataset, machine: &MachineModel) -> Result<Calibration> {
    if data.kc_sweep.is_empty() && data.mc_sweep.is_empty() && data.ukr_anchors.is_empty() && data.copy_anchors.is_empty() {
        return Err(Error::Calibration("dataset has no points to fit".into()));
    }
    let peak = f64::from(machine.peak_macs_per_cycle(DType::Int16));
    let mut constants = CostConstants::default();

    // (shape, kc, measured cycles) for every micro-kernel observation.
    let mut ukr_obs: Vec<(MicroKernelShape, usize, f64)> = Vec::new();
    for p in &data.kc_sweep {
        let macs = (p.mr * p.nr * p.kc) as f64;
        let mpc = match (p.macs_per_cycle, p.pct_peak) {
            (Some(mpc), _) => mpc,
            (None, Some(pct)) => pct / 100.0 * peak,
            (None, None) => continue,
        };
        if mpc <= 0.0 {
            return Err(Error::Calibration(format!("kc={} has non-positive throughput", p.kc)));
        }
        ukr_obs.push((shape(p.mr, p.nr), p.kc, macs / mpc));
    }
    for a in &data.ukr_anchors {
        ukr_obs.push((shape(a.mr, a.nr), a.kc, a.cycles as f64));
    }

    let overhead_samples: Vec<f64> = ukr_obs
        .iter()
        .filter(|(s, _, _)| !resource_check(s, machine).spill)
        .map(|(s, kc, cycles)| {
            let tile = (s.mr * s.nr) as f64;
            (cycles - tile * *kc as f64 / peak) * REFERENCE_TILE_LANES / tile
        })
        .collect();
    let fitted_overhead = !overhead_samples.is_empty();
    if fitted_overhead {
        constants.ukr_overhead_cycles = (overhead_samples.iter().sum::<f64>() / overhead_samples.len() as f64).max(0.0);
    }

    let fitted_copy = !data.copy_anchors.is_empty();
    if fitted_copy {
        let (sxy, sxx) = data.copy_anchors.iter().fold((0.0, 0.0), |(sxy, sxx), a| {
            let x = (a.kc * a.nr) as f64;
            (sxy + x * (a.cycles as f64 - constants.br_copy_fixed_cycles), sxx + x * x)
        });
        constants.br_copy_cycles_per_element = sxy / sxx;
    }

    let unpenalized = CostConstants {
        spill_penalty_factor: 1.0,
        ..constants
    };
    let spill_ratios: Vec<f64> = ukr_obs
        .iter()
        .filter(|(s, _, _)| resource_check(s, machine).spill)
        .map(|(s, kc, cycles)| cycles / predict_ukr_cycles(*kc, s, &unpenalized, machine) as f64)
        .collect();
    let fitted_spill = !spill_ratios.is_empty();
    if fitted_spill {
        constants.spill_penalty_factor = (spill_ratios.iter().sum::<f64>() / spill_ratios.len() as f64).max(1.0);
    }

    // (dims, params, measured MACs/cycle) for the mc sweep.
    let mut mc_obs = Vec::new();
    for p in &data.mc_sweep {
        let mpc = match (p.macs_per_cycle, p.pct_peak) {
            (Some(mpc), _) => mpc,
            (None, Some(pct)) => pct / 100.0 * peak,
            (None, None) => continue,
        };
        let params = BlockParams::reference(p.mc, p.nc.next_multiple_of(4), p.kc)
            .map_err(|e| Error::Calibration(format!("mc point {}: {e}", p.mc)))?;
        mc_obs.push((p.dims, params, mpc));
    }
    let fitted_overlap = !mc_obs.is_empty();
    if fitted_overlap {
        let sse = |omega: f64| {
            let c = CostConstants {
                copy_overlap_fraction: omega,
                ..constants
            };
            mc_obs
                .iter()
                .map(|(dims, params, mpc)| (predict_gemm(dims, params, &c, machine).macs_per_cycle - mpc).powi(2))
                .sum::<f64>()
        };
        let argmin = |steps: &mut dyn Iterator<Item = u32>| {
            let mut best = (f64::INFINITY, 0u32);
            for step in steps {
                let err = sse(f64::from(step) / f64::from(OVERLAP_GRID_STEPS));
                if err < best.0 {
                    best = (err, step);
                }
            }
            best.1
        };
        // Coarse pass, then full resolution around its minimum.
        let coarse = argmin(&mut (0..=OVERLAP_GRID_STEPS).step_by(OVERLAP_COARSE_STRIDE as usize));
        let lo = coarse.saturating_sub(2 * OVERLAP_COARSE_STRIDE);
        let hi = (coarse + 2 * OVERLAP_COARSE_STRIDE).min(OVERLAP_GRID_STEPS);
        let fine = argmin(&mut (lo..=hi));
        constants.copy_overlap_fraction = f64::from(fine) / f64::from(OVERLAP_GRID_STEPS);
    }

    let mut residuals = Vec::new();
    for p in &data.kc_sweep {
        let s = shape(p.mr, p.nr);
        let cycles = predict_ukr_cycles(p.kc, &s, &constants, machine) as f64;
        let model_mpc = (p.mr * p.nr * p.kc) as f64 / cycles;
        if let Some(pct) = p.pct_peak {
            residuals.push(Residual {
                label: format!("kc={} pct_peak", p.kc),
                unit: "% of peak",
                measured: pct,
                model: 100.0 * model_mpc / peak,
            });
        }
        if let Some(mpc) = p.macs_per_cycle {
            residuals.push(Residual {
                label: format!("kc={} macs_per_cycle", p.kc),
                unit: "MACs/cycle",
                measured: mpc,
                model: model_mpc,
            });
        }
    }
    for p in &data.mc_sweep {
        let params = BlockParams::reference(p.mc, p.nc.next_multiple_of(4), p.kc)
            .map_err(|e| Error::Calibration(format!("mc point {}: {e}", p.mc)))?;
        let pred = predict_gemm(&p.dims, &params, &constants, machine);
        if let Some(pct) = p.pct_peak {
            residuals.push(Residual {
                label: format!("mc={} pct_peak", p.mc),
                unit: "% of peak",
                measured: pct,
                model: pred.pct_peak,
            });
        }
        if let Some(mpc) = p.macs_per_cycle {
            residuals.push(Residual {
                label: format!("mc={} macs_per_cycle", p.mc),
                unit: "MACs/cycle",
                measured: mpc,
                model: pred.macs_per_cycle,
            });
        }
    }
    for a in &data.ukr_anchors {
        residuals.push(Residual {
            label: format!("ukr {}x{} kc={}", a.mr, a.nr, a.kc),
            unit: "cycles",
            measured: a.cycles as f64,
            model: predict_ukr_cycles(a.kc, &shape(a.mr, a.nr), &constants, machine) as f64,
        });
    }
    for a in &data.copy_anchors {
        residuals.push(Residual {
            label: format!("Br copy kc={} nr={}", a.kc, a.nr),
            unit: "cycles",
            measured: a.cycles as f64,
            model: predict_br_copy_cycles(a.kc, a.nr, &constants) as f64,
        });
    }

    Ok(Calibration {
        constants,
        fitted_overhead,
        fitted_copy,
        fitted_overlap,
        fitted_spill,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_fit_ranges() {
        let cal = calibrate(&CalibrationDataset::published(), &MachineModel::default()).unwrap();
        let c = cal.constants;
        assert!((80.0..=88.0).contains(&c.ukr_overhead_cycles), "{c:?}");
        assert!((0.89..=0.94).contains(&c.copy_overlap_fraction), "{c:?}");
        assert!((c.br_copy_cycles_per_element - 8309.0 / 1160.0).abs() < 1e-12);
        assert!(cal.fitted_overhead && cal.fitted_copy && cal.fitted_overlap && cal.fitted_spill);
    }

    #[test]
    fn single_anchor_gives_exact_overhead() {
        let d = CalibrationDataset::from_csv_str("param,metric,value\nkc=256;mr=16;nr=4,ukr_cycles,596\n").unwrap();
        let cal = calibrate(&d, &MachineModel::default()).unwrap();
        assert_eq!(cal.constants.ukr_overhead_cycles, 84.0);
        assert!(cal.fitted_overhead && !cal.fitted_copy && !cal.fitted_overlap && !cal.fitted_spill);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(
            calibrate(&CalibrationDataset::default(), &MachineModel::default()),
            Err(Error::Calibration(_))
        ));
    }
}
