// Micro-kernel efficiency as kc grows, next to the measured points.

use aie_gemm::costmodel::{sweep, SweepConfig, SweepParam};
use aie_gemm::{kc_max, CalibrationDataset, CostConstants, DType, MachineModel};

pub fn run_example() -> aie_gemm::Result<()> {
    let machine = MachineModel::default();
    let limit = kc_max(4, DType::Int16, &machine);
    let values = [8, 16, 32, 64, 128, 192, 256, limit];
    let table = sweep(
        SweepParam::Kc,
        &values,
        &SweepConfig::default(),
        &CostConstants::default(),
        &machine,
        &CalibrationDataset::published(),
    )?;
    print!("{}", table.to_csv());
    let last = table.rows.last().expect("rows");
    println!("# kc_max={limit}: {:.2}% of peak", last.pct_peak);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
