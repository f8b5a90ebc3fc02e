//! Trainable model classes with exact distributions and exact gradients.
//!
//! Every model maps its parameters to a dense [`ProbabilityTable`]; gradients
//! are vector-Jacobian products of that map, so any loss defined on tables
//! can be chained onto any model.

mod gibbs;
mod iqp;

use core::fmt;
use core::str::FromStr;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::walsh::ProbabilityTable;

pub use gibbs::{
    ising_distribution, ising_gradient, maxent_distribution, maxent_objective_and_gradient,
    GibbsTape, IsingDenseParams, IsingSparseParams, MaxEntParams,
};
pub use iqp::{iqp_distribution, iqp_gradient, ring_edges, IqpParams, IqpTape};

/// A parameterized distribution over `{0,1}^n` with an exact pullback.
pub trait BornModel: Clone {
    /// Intermediate values kept from the forward pass for [`pullback`](Self::pullback).
    type Tape;

    const ARCHITECTURE: &'static str;

    fn n(&self) -> u32;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn forward(&self) -> (ProbabilityTable, Self::Tape);

    /// `d Loss / d params` given `cotangent[x] = d Loss / d q(x)`.
    fn pullback(&self, tape: &Self::Tape, table: &ProbabilityTable, cotangent: &[f64]) -> Vec<f64>;

    fn distribution(&self) -> ProbabilityTable {
        self.forward().0
    }

    fn gradient(&self, cotangent: &[f64]) -> Vec<f64> {
        let (table, tape) = self.forward();
        self.pullback(&tape, &table, cotangent)
    }
}

/// The compared model classes, including the untrained references.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ModelClass {
    IqpParity,
    IqpMse,
    IsingSparse,
    IsingDense,
    Maxent,
    SpectralProxy,
    /// Uniform over the whole cube.
    Uniform,
    /// Uniform over the valid support.
    UniformSupport,
}

impl ModelClass {
    pub const ALL: [ModelClass; 8] = [
        ModelClass::IqpParity,
        ModelClass::IqpMse,
        ModelClass::IsingSparse,
        ModelClass::IsingDense,
        ModelClass::Maxent,
        ModelClass::SpectralProxy,
        ModelClass::Uniform,
        ModelClass::UniformSupport,
    ];

    /// The trained classes compared in the cross-class ranking.
    pub const TRAINED_BASELINES: [ModelClass; 4] =
        [ModelClass::IqpParity, ModelClass::IsingSparse, ModelClass::IsingDense, ModelClass::Maxent];

    pub fn name(self) -> &'static str {
        match self {
            ModelClass::IqpParity => "iqp-parity",
            ModelClass::IqpMse => "iqp-mse",
            ModelClass::IsingSparse => "ising-sparse",
            ModelClass::IsingDense => "ising-dense",
            ModelClass::Maxent => "maxent",
            ModelClass::SpectralProxy => "spectral-proxy",
            ModelClass::Uniform => "uniform",
            ModelClass::UniformSupport => "uniform-support",
        }
    }

    pub fn is_trained(self) -> bool {
        !matches!(self, ModelClass::SpectralProxy | ModelClass::Uniform | ModelClass::UniformSupport)
    }

    /// Whether the class consumes the parity band.
    pub fn uses_band(self) -> bool {
        matches!(
            self,
            ModelClass::IqpParity | ModelClass::IsingSparse | ModelClass::Maxent | ModelClass::SpectralProxy
        )
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Domain(alloc::format!("unknown model class {s:?}")))
    }
}

/// Trained parameters of any class, tagged for serialization.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "architecture", rename_all = "kebab-case"))]
pub enum ModelParams {
    Iqp(IqpParams),
    IsingSparse(IsingSparseParams),
    IsingDense(IsingDenseParams),
    MaxEnt(MaxEntParams),
}

impl ModelParams {
    pub fn distribution(&self) -> ProbabilityTable {
        match self {
            ModelParams::Iqp(p) => p.distribution(),
            ModelParams::IsingSparse(p) => p.distribution(),
            ModelParams::IsingDense(p) => p.distribution(),
            ModelParams::MaxEnt(p) => p.distribution(),
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            ModelParams::Iqp(p) => p.params(),
            ModelParams::IsingSparse(p) => p.params(),
            ModelParams::IsingDense(p) => p.params(),
            ModelParams::MaxEnt(p) => p.params(),
        }
    }
}
