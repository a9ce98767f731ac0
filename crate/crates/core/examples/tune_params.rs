// Let the model pick mc, nc, kc for a few problems.

use aie_gemm::{tune, CostConstants, DType, MachineModel, ProblemDims};

pub fn run_example() -> aie_gemm::Result<()> {
    let machine = MachineModel::default();
    let constants = CostConstants::default();
    for (m, n, k) in [(4096, 4096, 290), (1024, 1024, 1024), (64, 64, 512), (300, 17, 75), (16, 4, 2)] {
        let dims = ProblemDims::new(m, n, k)?;
        let t = tune(&dims, DType::Int16, &machine, &constants)?;
        println!(
            "{:<20} -> kc={:<4} mc={:<5} nc={:<5} {:6.2}% of peak",
            dims.to_string(),
            t.params.kc, t.params.mc, t.params.nc, t.prediction.pct_peak
        );
    }

    // A scratchpad too small for any Br panel.
    let cramped = MachineModel { br_local_budget_bytes: 8, ..machine };
    let err = tune(&ProblemDims::new(64, 64, 64)?, DType::Int16, &cramped, &constants).unwrap_err();
    println!("cramped machine: {err}");
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
