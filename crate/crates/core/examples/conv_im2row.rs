// A padded, strided convolution lowered to GEMM.

use aie_gemm::lowering::conv_dims;
use aie_gemm::{
    conv_direct_oracle, conv_gemm, im2row, tune, CostConstants, DType, FilterBank, MachineModel, OperandRng, Tensor3,
    WritebackMode,
};

pub fn run_example() -> aie_gemm::Result<()> {
    let mut rng = OperandRng::new(5);
    let x = Tensor3::new(3, 15, 15, rng.values(3 * 15 * 15, false))?;
    let f = FilterBank::new(24, 3, 3, 3, rng.values(24 * 3 * 3 * 3, false))?;
    let (stride, pad) = (2, 1);

    let patches = im2row(&x, 3, 3, stride, pad)?;
    println!("im2row: {}x{} patch matrix", patches.rows(), patches.cols());

    let machine = MachineModel::default();
    let constants = CostConstants::default();
    let dims = conv_dims(&x, &f, stride, pad)?;
    let params = tune(&dims, DType::Int16, &machine, &constants)?.params;
    let (y, run) = conv_gemm(&x, &f, stride, pad, &params, WritebackMode::Wrap16, &machine, &constants)?;

    assert_eq!(y, conv_direct_oracle(&x, &f, stride, pad, WritebackMode::Wrap16)?);
    println!(
        "output {}x{}x{} via {dims} {params}: matches direct convolution, {} micro-kernel calls",
        y.c, y.h, y.w, run.stats.ukr_invocations
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
