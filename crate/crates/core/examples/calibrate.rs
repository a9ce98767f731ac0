// Fit the cost constants, first to the built-in measurements, then to a
// small hand-written CSV.

use aie_gemm::{calibrate, CalibrationDataset, MachineModel};

const MINI: &str = "\
param,metric,value
kc=256;mr=16;nr=4,ukr_cycles,600
kc=64;mr=16;nr=4,ukr_cycles,216
kc=290;nr=4,br_copy_cycles,8000
";

pub fn run_example() -> aie_gemm::Result<()> {
    let machine = MachineModel::default();
    let full = calibrate(&CalibrationDataset::published(), &machine)?;
    let c = full.constants;
    println!(
        "built-in: O={:.3} c1={:.4} w={:.4} s={:.4}",
        c.ukr_overhead_cycles, c.br_copy_cycles_per_element, c.copy_overlap_fraction, c.spill_penalty_factor
    );
    let worst = full.residuals.iter().map(|r| r.error().abs()).fold(0.0, f64::max);
    println!("  {} residuals, largest |error| {worst:.4}", full.residuals.len());

    let mini = calibrate(&CalibrationDataset::from_csv_str(MINI)?, &machine)?;
    println!(
        "mini: O={:.3} (fitted {}), w={:.4} (fitted {})",
        mini.constants.ukr_overhead_cycles, mini.fitted_overhead, mini.constants.copy_overlap_fraction, mini.fitted_overlap
    );
    for r in &mini.residuals {
        println!("  {r}");
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
