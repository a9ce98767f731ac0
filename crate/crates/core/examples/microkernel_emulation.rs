// One 16x4 micro-kernel call on packed panels, checked against a plain
// triple loop, plus the accumulator budget of a few other tile shapes.

use aie_gemm::costmodel::predict_ukr_cycles;
use aie_gemm::microkernel::{resource_check, ukr_16x4, MicroKernelShape};
use aie_gemm::{CostConstants, MachineModel, OperandRng, WritebackMode};

pub fn run_example() -> aie_gemm::Result<()> {
    let machine = MachineModel::default();
    let constants = CostConstants::default();
    let kc = 256;
    let mut rng = OperandRng::new(42);
    let ar = rng.values(16 * kc, false);
    let br = rng.values(kc * 4, false);
    let cr = rng.values(16 * 4, false);

    let res = ukr_16x4(&ar, &br, &cr, kc, WritebackMode::Wrap16, &constants, &machine)?;

    for i in 0..16 {
        for j in 0..4 {
            let mut acc = cr[i * 4 + j] as i64;
            for p in 0..kc {
                acc += ar[p * 16 + i] as i64 * br[p * 4 + j] as i64;
            }
            assert_eq!(res.cr[i * 4 + j], acc as i16, "lane ({i},{j})");
        }
    }
    println!(
        "16x4 kc={kc}: {} mac16 calls, {} MACs, {} modelled cycles",
        res.nominal_cycles, res.mac_count, res.emulated_cycles
    );

    for (mr, nr) in [(16, 4), (8, 8), (32, 4), (16, 8)] {
        let shape = MicroKernelShape::new(mr, nr)?;
        let r = resource_check(&shape, &machine);
        println!(
            "{mr:>2}x{nr}: {:>3}/{} accumulator lanes{}  kc=256 -> {} cycles",
            r.acc_lanes_needed,
            r.acc_lanes_available,
            if r.spill { " (spills)" } else { "" },
            predict_ukr_cycles(256, &shape, &constants, &machine)
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
