//! Exponential-family models whose sufficient statistics are Walsh characters.
//!
//! Ising couplings `s_j s_k` and fields `s_j` (with `s = (-1)^x`) are the
//! characters of two-bit and one-bit masks, and the MaxEnt model uses the band
//! masks directly, so all three share one engine: the log-weight vector is a
//! single Walsh synthesis and every moment needed by the gradient is read off
//! one transform.

use alloc::vec;
use alloc::vec::Vec;

use super::iqp::ring_edges;
use super::BornModel;
use crate::error::{Error, Result};
use crate::walsh::{check_width, fwht_in_place, walsh_synthesis, Mask, ParityBand, ProbabilityTable};

fn gibbs_forward(n: u32, masks: impl Iterator<Item = u32>, weights: &[f64]) -> (ProbabilityTable, f64) {
    let log_w = walsh_synthesis(n, masks.zip(weights.iter().copied()));
    ProbabilityTable::from_log_weights(n, log_w).expect("finite log-weights")
}

/// `d/dw_i sum_x c[x] q(x) = sum_x c[x] q(x) (f_i(x) - E_q f_i)`.
fn gibbs_pullback(masks: impl Iterator<Item = u32>, table: &ProbabilityTable, cotangent: &[f64]) -> Vec<f64> {
    assert_eq!(cotangent.len(), table.mass().len(), "cotangent length");
    let mut weighted: Vec<f64> = table.mass().iter().zip(cotangent).map(|(q, c)| q * c).collect();
    let total = crate::walsh::neumaier_sum(&weighted);
    fwht_in_place(&mut weighted).expect("power-of-two length");
    let mut moments = table.mass().to_vec();
    fwht_in_place(&mut moments).expect("power-of-two length");
    masks.map(|m| weighted[m as usize] - total * moments[m as usize]).collect()
}

/// Forward-pass record for the Gibbs models.
pub struct GibbsTape {
    pub log_partition: f64,
}

fn pair_mask(j: u32, k: u32) -> u32 {
    (1 << j) ^ (1 << k)
}

/// Ising model with cyclic nearest- and next-nearest-neighbour couplings and
/// local fields. Parameters are laid out as `[couplings (2n) | fields (n)]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IsingSparseParams {
    n: u32,
    params: Vec<f64>,
}

impl IsingSparseParams {
    pub fn zeros(n: u32) -> Result<Self> {
        check_width(n)?;
        Ok(Self { n, params: vec![0.0; 3 * n as usize] })
    }

    pub fn new(n: u32, couplings: Vec<f64>, fields: Vec<f64>) -> Result<Self> {
        check_width(n)?;
        if couplings.len() != 2 * n as usize {
            return Err(Error::LengthMismatch { expected: 2 * n as usize, actual: couplings.len() });
        }
        if fields.len() != n as usize {
            return Err(Error::LengthMismatch { expected: n as usize, actual: fields.len() });
        }
        let mut params = couplings;
        params.extend(fields);
        Ok(Self { n, params })
    }

    pub fn edges(&self) -> Vec<(u32, u32)> {
        ring_edges(self.n)
    }

    pub fn couplings(&self) -> &[f64] {
        &self.params[..2 * self.n as usize]
    }

    pub fn fields(&self) -> &[f64] {
        &self.params[2 * self.n as usize..]
    }

    fn width(&self) -> u32 {
        self.n
    }

    fn masks(&self) -> impl Iterator<Item = u32> {
        let n = self.n;
        ring_edges(n).into_iter().map(|(j, k)| pair_mask(j, k)).chain((0..n).map(|j| 1 << j))
    }
}

/// Ising model with every pairwise coupling `j < k` (lexicographic) and local
/// fields. Parameters are laid out as `[couplings (n(n-1)/2) | fields (n)]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IsingDenseParams {
    n: u32,
    params: Vec<f64>,
}

impl IsingDenseParams {
    pub fn pair_count(n: u32) -> usize {
        (n * n.saturating_sub(1) / 2) as usize
    }

    pub fn zeros(n: u32) -> Result<Self> {
        check_width(n)?;
        Ok(Self { n, params: vec![0.0; Self::pair_count(n) + n as usize] })
    }

    pub fn new(n: u32, couplings: Vec<f64>, fields: Vec<f64>) -> Result<Self> {
        check_width(n)?;
        let pairs = Self::pair_count(n);
        if couplings.len() != pairs {
            return Err(Error::LengthMismatch { expected: pairs, actual: couplings.len() });
        }
        if fields.len() != n as usize {
            return Err(Error::LengthMismatch { expected: n as usize, actual: fields.len() });
        }
        let mut params = couplings;
        params.extend(fields);
        Ok(Self { n, params })
    }

    pub fn pairs(&self) -> Vec<(u32, u32)> {
        let n = self.n;
        (0..n).flat_map(|j| (j + 1..n).map(move |k| (j, k))).collect()
    }

    pub fn couplings(&self) -> &[f64] {
        &self.params[..Self::pair_count(self.n)]
    }

    pub fn fields(&self) -> &[f64] {
        &self.params[Self::pair_count(self.n)..]
    }

    fn width(&self) -> u32 {
        self.n
    }

    fn masks(&self) -> impl Iterator<Item = u32> {
        let n = self.n;
        self.pairs().into_iter().map(|(j, k)| pair_mask(j, k)).chain((0..n).map(|j| 1 << j))
    }
}

/// `q(x) ∝ exp(sum_k theta_k (-1)^(alpha_k . x))` over the full cube.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaxEntParams {
    masks: Vec<Mask>,
    theta: Vec<f64>,
}

impl MaxEntParams {
    /// Zero natural parameters aligned with the band's masks.
    pub fn zeros(band: &ParityBand) -> Self {
        Self { masks: band.masks.clone(), theta: vec![0.0; band.k()] }
    }

    pub fn new(band: &ParityBand, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != band.k() {
            return Err(Error::LengthMismatch { expected: band.k(), actual: theta.len() });
        }
        Ok(Self { masks: band.masks.clone(), theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    fn width(&self) -> u32 {
        self.masks[0].n()
    }

    fn mask_values(&self) -> impl Iterator<Item = u32> + '_ {
        self.masks.iter().map(|m| m.value())
    }
}

macro_rules! gibbs_model {
    ($ty:ty, $arch:literal, $params:ident, $masks:ident) => {
        impl BornModel for $ty {
            type Tape = GibbsTape;

            const ARCHITECTURE: &'static str = $arch;

            fn n(&self) -> u32 {
                self.width()
            }

            fn params(&self) -> &[f64] {
                &self.$params
            }

            fn params_mut(&mut self) -> &mut [f64] {
                &mut self.$params
            }

            fn forward(&self) -> (ProbabilityTable, GibbsTape) {
                let (table, log_partition) = gibbs_forward(self.n(), self.$masks(), &self.$params);
                (table, GibbsTape { log_partition })
            }

            fn pullback(&self, _tape: &GibbsTape, table: &ProbabilityTable, cotangent: &[f64]) -> Vec<f64> {
                gibbs_pullback(self.$masks(), table, cotangent)
            }
        }
    };
}

gibbs_model!(IsingSparseParams, "ising-sparse", params, masks);
gibbs_model!(IsingDenseParams, "ising-dense", params, masks);
gibbs_model!(MaxEntParams, "maxent", theta, mask_values);

/// Normalized Gibbs distribution of either Ising variant.
pub fn ising_distribution<M: BornModel<Tape = GibbsTape>>(params: &M) -> ProbabilityTable {
    params.distribution()
}

/// Gradient of `cotangent . q` through either Ising variant.
pub fn ising_gradient<M: BornModel<Tape = GibbsTape>>(params: &M, cotangent: &[f64]) -> Result<Vec<f64>> {
    let expected = 1usize << params.n();
    if cotangent.len() != expected {
        return Err(Error::LengthMismatch { expected, actual: cotangent.len() });
    }
    Ok(params.gradient(cotangent))
}

pub fn maxent_distribution(params: &MaxEntParams, band: &ParityBand) -> Result<ProbabilityTable> {
    check_alignment(params, band)?;
    Ok(params.distribution())
}

fn check_alignment(params: &MaxEntParams, band: &ParityBand) -> Result<()> {
    if params.theta.len() != band.k() {
        return Err(Error::LengthMismatch { expected: band.k(), actual: params.theta.len() });
    }
    if params.masks != band.masks {
        return Err(Error::Domain("parameters were built for a different band".into()));
    }
    Ok(())
}

/// Convex dual objective `log Z(theta) - theta . z_hat` and its gradient
/// `q_hat_theta(alpha_k) - z_hat_k`.
pub fn maxent_objective_and_gradient(params: &MaxEntParams, band: &ParityBand) -> Result<(f64, Vec<f64>)> {
    check_alignment(params, band)?;
    let (table, tape) = params.forward();
    let mut moments = table.into_mass();
    fwht_in_place(&mut moments).expect("power-of-two length");
    let linear: f64 = params.theta.iter().zip(&band.target_moments).map(|(t, z)| t * z).sum();
    let gradient = params
        .mask_values()
        .zip(&band.target_moments)
        .map(|(m, z)| moments[m as usize] - z)
        .collect();
    Ok((tape.log_partition - linear, gradient))
}
