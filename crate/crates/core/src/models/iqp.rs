use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::BornModel;
use crate::error::{domain, Error, Result};
use crate::walsh::{check_width, fwht_in_place, walsh_synthesis, ProbabilityTable};

/// Nearest-neighbour then next-nearest-neighbour pairs on a ring of `n` qubits.
pub fn ring_edges(n: u32) -> Vec<(u32, u32)> {
    let nn = (0..n).map(|i| (i, (i + 1) % n));
    let nnn = (0..n).map(|i| (i, (i + 2) % n));
    nn.chain(nnn).collect()
}

/// Angles of the `H^n D(theta) H^n` circuit with one `ZZ` phase per edge.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IqpParams {
    n: u32,
    edges: Vec<(u32, u32)>,
    theta: Vec<f64>,
}

impl IqpParams {
    pub fn new(n: u32, edges: Vec<(u32, u32)>, theta: Vec<f64>) -> Result<Self> {
        check_width(n)?;
        if edges.len() != theta.len() {
            return Err(Error::LengthMismatch { expected: edges.len(), actual: theta.len() });
        }
        if edges.iter().any(|&(j, k)| j >= n || k >= n) {
            return Err(domain("edge endpoint outside the register"));
        }
        Ok(Self { n, edges, theta })
    }

    /// Ring circuit with all angles zero.
    pub fn ring(n: u32) -> Result<Self> {
        let edges = ring_edges(n);
        let theta = vec![0.0; edges.len()];
        Self::new(n, edges, theta)
    }

    /// Ring circuit with i.i.d. `N(0, std^2)` angles.
    pub fn ring_random<R: Rng + ?Sized>(n: u32, std: f64, rng: &mut R) -> Result<Self> {
        let mut p = Self::ring(n)?;
        let normal = Normal::new(0.0, std).map_err(|e| domain(alloc::format!("{e}")))?;
        p.theta.iter_mut().for_each(|t| *t = normal.sample(rng));
        Ok(p)
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn edge_masks(&self) -> impl Iterator<Item = u32> + '_ {
        self.edges.iter().map(|&(j, k)| (1u32 << j) ^ (1u32 << k))
    }
}

/// Diagonal phases and output amplitudes of one forward pass.
pub struct IqpTape {
    phase: Vec<Complex64>,
    amplitude: Vec<Complex64>,
}

impl BornModel for IqpParams {
    type Tape = IqpTape;

    const ARCHITECTURE: &'static str = "iqp";

    fn n(&self) -> u32 {
        self.n
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn forward(&self) -> (ProbabilityTable, IqpTape) {
        // D|z> = exp(i sum_e theta_e s_j(z) s_k(z)) |z>, and s_j s_k is the
        // Walsh character of the edge mask, so the phase angle is a synthesis.
        let angle = walsh_synthesis(self.n, self.edge_masks().zip(self.theta.iter().copied()));
        let phase: Vec<Complex64> = angle
            .iter()
            .map(|&a| {
                let (s, c) = libm::sincos(a);
                Complex64::new(c, s)
            })
            .collect();
        let mut amplitude = phase.clone();
        fwht_in_place(&mut amplitude).expect("power-of-two length");
        let scale = 1.0 / amplitude.len() as f64;
        amplitude.iter_mut().for_each(|a| *a *= scale);
        let mass: Vec<f64> = amplitude.iter().map(|a| a.norm_sqr()).collect();
        let table = ProbabilityTable::from_weights(self.n, mass).expect("unitary output");
        (table, IqpTape { phase, amplitude })
    }

    fn pullback(&self, tape: &IqpTape, _table: &ProbabilityTable, cotangent: &[f64]) -> Vec<f64> {
        // dL/dtheta_e = sum_x c[x] 2 Re(conj(psi[x]) dpsi[x]), with
        // dpsi = 2^-n H (i chi_e . phase). Moving H onto the adjoint side:
        // G = 2^-n H (c . conj(psi)) and dL/dtheta_e = -2 sum_z chi_e(z) Im(G[z] phase[z]).
        assert_eq!(cotangent.len(), tape.amplitude.len(), "cotangent length");
        let mut adjoint: Vec<Complex64> =
            tape.amplitude.iter().zip(cotangent).map(|(a, &c)| a.conj() * c).collect();
        fwht_in_place(&mut adjoint).expect("power-of-two length");
        let scale = 1.0 / adjoint.len() as f64;
        let mut weighted: Vec<f64> =
            adjoint.iter().zip(&tape.phase).map(|(g, p)| (g * p).im * scale).collect();
        fwht_in_place(&mut weighted).expect("power-of-two length");
        self.edge_masks().map(|m| -2.0 * weighted[m as usize]).collect()
    }
}

/// Born distribution of the IQP circuit.
pub fn iqp_distribution(params: &IqpParams) -> ProbabilityTable {
    params.distribution()
}

/// Exact gradient of `cotangent . q(theta)` with respect to the edge angles.
pub fn iqp_gradient(params: &IqpParams, cotangent: &[f64]) -> Result<Vec<f64>> {
    let expected = 1usize << params.n;
    if cotangent.len() != expected {
        return Err(Error::LengthMismatch { expected, actual: cotangent.len() });
    }
    Ok(params.gradient(cotangent))
}
