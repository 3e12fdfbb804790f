//! Label refinement for semi-supervised classification with a Gaussian
//! process over a memory bank of labeled features.
//!
//! The numeric core is generic over [`Scalar`]; the aliases at the crate root
//! fix the scalar to `f64`, which is what the CLI and the demos use.
//!
//! ```
//! use gplabel::{GpConfig, GpState, KernelParams, Matrix, MemoryBank};
//! use gplabel::bank::BankMode;
//!
//! let kernel = KernelParams::new(1.0, 1.0, None).unwrap();
//! let config = GpConfig::new(kernel, 0.1, 1.0, 256).unwrap();
//! let mut bank = MemoryBank::new(4, 2, 2, BankMode::Fifo).unwrap();
//! let feats = Matrix::from_rows(&[[0.0, 0.0], [3.0, 3.0]]).unwrap();
//! bank.insert_batch(&feats, &[0, 1]).unwrap();
//! let state = GpState::warmup(config, bank).unwrap();
//! let out = state.posterior_logits(&Matrix::from_rows(&[[0.1, 0.0]]).unwrap()).unwrap();
//! assert!(out.logits[(0, 0)] > out.logits[(0, 1)]);
//! ```

pub mod bank;
pub mod bench;
pub mod demo;
pub mod error;
pub mod gp;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod pipeline;
pub mod refine;
pub mod rng;
pub mod scalar;
pub mod toydata;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::DenseMatrix<f64>;
pub type KernelParams = kernel::KernelParams<f64>;
pub type MemoryBank = bank::MemoryBank<f64>;
pub type GpConfig = gp::GpConfig<f64>;
pub type GpState = gp::GpState<f64>;
pub type LinearModel = gp::LinearModel<f64>;
pub type SoftLabel = refine::SoftLabel<f64>;
pub type RefinementPolicy = refine::RefinementPolicy<f64>;
pub type LabeledDataset = toydata::LabeledDataset<f64>;
pub type ExperimentConfig = io::ExperimentConfig<f64>;
