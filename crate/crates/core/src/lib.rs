//! Exact, enumerable benchmark machinery for parity-supervised IQP Born
//! machines.
//!
//! Everything in this crate works on dense tables over all `2^n` bitstrings
//! (`n <= 24`). The crate is `no_std` and only needs `alloc`; IO, the CLI and
//! the result store live in the `paritybench-harness` crate.
//!
//! Bit convention: bit `x_i` of a bitstring written `x_1 x_2 ... x_n` is bit
//! `i - 1` of its integer encoding. [`BitString::from_literal`] and the
//! `Display` impls follow the same convention.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod benchmark;
mod error;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod spectral;
pub mod train;
pub mod walsh;

pub use error::{Error, Result};

pub use benchmark::{
    make_instance, sample_training_set, score, target_distribution, valid_support,
    BenchmarkConfig, Instance, StateSet,
};
pub use metrics::{
    coverage_report, expected_discoveries, forward_kl, kl_decomposition, CoverageReport,
    KlBreakdown, KlValue,
};
pub use models::{
    BornModel, IqpParams, IsingDenseParams, IsingSparseParams, MaxEntParams, ModelClass,
    ModelParams,
};
pub use spectral::{
    linear_reconstruction, region_visibility, spectral_projection, spectral_proxy, SpectralProxy,
};
pub use train::{
    cross_entropy_loss, mse_loss, objective_and_gradient, parity_loss, train, Adam, LossKind,
    LossSpec, OptimizerConfig, TrainOutcome, TrainableModel,
};
pub use walsh::{
    bernoulli_rate, empirical_moments, fwht, sample_band, spectrum_of, table_from_spectrum,
    walsh_character, BitString, Mask, ParityBand, ProbabilityTable, WalshSpectrum,
};
