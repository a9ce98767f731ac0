// GEMM efficiency as mc grows (kc=290), with constants fitted to the
// measurements, and where the lost cycles go.

use aie_gemm::costmodel::{sweep, SweepConfig, SweepParam};
use aie_gemm::{calibrate, loss_breakdown, BlockParams, CalibrationDataset, MachineModel};

pub fn run_example() -> aie_gemm::Result<()> {
    let machine = MachineModel::default();
    let data = CalibrationDataset::published();
    let constants = calibrate(&data, &machine)?.constants;
    let config = SweepConfig::default();
    let table = sweep(SweepParam::Mc, &[128, 256, 512, 1024, 2048, 4096], &config, &constants, &machine, &data)?;
    print!("{table}");

    let params = BlockParams::reference(4096, 4096, 290)?;
    let loss = loss_breakdown(&config.dims, &params, &constants, &machine);
    println!("loss at mc=4096 (points of peak):");
    println!("  micro-kernel overhead  {:6.2}", loss.ukr_overhead_points);
    println!("  Br copy, serialized    {:6.2}", loss.br_copy_points);
    println!("  hidden by overlap      {:6.2}", loss.overlap_recovered_points);
    println!("  Br copy, exposed       {:6.2}", loss.br_copy_exposed_points);
    println!("  total                  {:6.2}", loss.total_loss_points);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
