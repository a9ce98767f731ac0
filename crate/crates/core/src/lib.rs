//! Blocked INT16 matrix multiplication for a VLIW/SIMD vector tile with a
//! small local scratchpad, a large FPGA buffer and DDR behind it.
//!
//! The pieces:
//!
//! - [`packing`]: `Ac`/`Bc` buffers and micro-panels, plus the offline
//!   pre-packed weight file.
//! - [`microkernel`]: a bit-exact emulation of the 16×4 `mac16` kernel with
//!   48-bit accumulators.
//! - [`driver`]: the five-loop blocked GEMM with data-transfer accounting.
//! - [`machine`]: capacities, peak rates and placement validation.
//! - [`costmodel`]: cycle prediction, sweeps and calibration.
//! - [`tuner`]: picks `mc`, `nc`, `kc` from the model.
//! - [`lowering`]: convolution via IM2ROW.
//!
//! ```
//! use aie_gemm::{gemm_blocked, naive_gemm_oracle, BlockParams, CostConstants, GemmOptions,
//!                   MachineModel, OperandRng, ProblemDims};
//!
//! let mut rng = OperandRng::new(1);
//! let (a, b, c) = (rng.small_matrix(40, 24), rng.small_matrix(24, 12), rng.small_matrix(40, 12));
//! let dims = ProblemDims::new(40, 12, 24).unwrap();
//! let params = BlockParams::reference(32, 8, 10).unwrap();
//! let run = gemm_blocked(&a, &b, &c, &dims, &params, &GemmOptions::default(),
//!                        &MachineModel::default(), &CostConstants::default()).unwrap();
//! assert_eq!(run.c, naive_gemm_oracle(&a, &b, &c, Default::default()).unwrap());
//! ```

pub mod cli;
pub mod costmodel;
pub mod driver;
pub mod error;
pub mod lowering;
pub mod machine;
pub mod matrix;
pub mod microkernel;
pub mod packing;
pub mod rng;
pub mod scalar;
pub mod tuner;

pub use costmodel::{calibrate, loss_breakdown, predict_gemm, CalibrationDataset, CostConstants, GemmPrediction, LossBreakdown};
pub use driver::{gemm_blocked, gemm_reference_blocked, AOperand, GemmOptions, GemmRun, TransferStats};
pub use error::{Error, Result, Violation, ViolationKind};
pub use lowering::{conv_direct_oracle, conv_gemm, im2row, FilterBank, Tensor3};
pub use machine::{kc_max, mc_max, validate_params, MachineModel};
pub use matrix::{naive_gemm_oracle, BlockParams, DType, Int16Matrix, ProblemDims};
pub use microkernel::{resource_check, ukr_16x4, ukr_generic, MicroKernelShape};
pub use packing::{deserialize_prepacked, prepack_a, serialize_prepacked, PackedA};
pub use rng::OperandRng;
pub use scalar::{Acc48, WritebackMode};
pub use tuner::{tune, Tuned};
