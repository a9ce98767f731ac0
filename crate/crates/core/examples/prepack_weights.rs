// Pack a weight matrix once, write it to disk, read it back and run GEMM
// from the pre-packed blocks.

use aie_gemm::{
    deserialize_prepacked, gemm_blocked, prepack_a, serialize_prepacked, BlockParams, CostConstants, GemmOptions,
    MachineModel, OperandRng, ProblemDims,
};

pub fn run_example() -> aie_gemm::Result<()> {
    let (m, n, k) = (96, 40, 130);
    let mut rng = OperandRng::new(11);
    let w = rng.small_matrix(m, k);
    let x = rng.small_matrix(k, n);
    let c = rng.small_matrix(m, n);
    let dims = ProblemDims::new(m, n, k)?;
    let params = BlockParams::reference(48, 16, 64)?;

    let packed = prepack_a(&w, &dims, &params)?;
    let mut file = Vec::new();
    serialize_prepacked(&packed, &mut file)?;
    let path = std::env::temp_dir().join(format!("prepack_weights_{}.bin", std::process::id()));
    std::fs::write(&path, &file)?;
    let loaded = deserialize_prepacked(std::fs::File::open(&path)?)?;
    std::fs::remove_file(&path)?;
    assert_eq!(loaded, packed);

    let machine = MachineModel::default();
    let constants = CostConstants::default();
    let opts = GemmOptions::default();
    let direct = gemm_blocked(&w, &x, &c, &dims, &params, &opts, &machine, &constants)?;
    let from_file = gemm_blocked(&loaded, &x, &c, &dims, &params, &opts, &machine, &constants)?;
    assert_eq!(direct.c, from_file.c);
    println!(
        "{} blocks, {} bytes on disk; Ac packing at run time: {} B direct vs {} B pre-packed",
        loaded.blocks.len(),
        file.len(),
        direct.stats.bytes_ac_packed,
        from_file.stats.bytes_ac_packed
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
