//! Bitstrings, masks, Walsh characters and the fast Walsh-Hadamard transform.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Sub};

use rand::Rng;

use crate::error::{domain, Error, Result};

/// Largest supported bit count; dense tables beyond this do not fit memory.
pub const MAX_BITS: u32 = 24;

/// Absolute tolerance on the total mass of a [`ProbabilityTable`].
pub const MASS_TOLERANCE: f64 = 1e-12;

pub(crate) fn check_width(n: u32) -> Result<()> {
    if n == 0 || n > MAX_BITS {
        return Err(Error::UnsupportedWidth(n));
    }
    Ok(())
}

/// `+1.0` if `popcount(mask & x)` is even, `-1.0` otherwise.
#[inline(always)]
pub fn parity_sign(mask: u32, x: u32) -> f64 {
    if (mask & x).count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

macro_rules! bit_word {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        #[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
        pub struct $name {
            value: u32,
            n: u32,
        }

        impl $name {
            pub fn new(value: u32, n: u32) -> Result<Self> {
                check_width(n)?;
                if n < 32 && value >> n != 0 {
                    return Err(Error::ValueOutOfRange { value, n });
                }
                Ok(Self { value, n })
            }

            /// Parses `x_1 x_2 ... x_n` written left to right, e.g. `"0110"`.
            pub fn from_literal(literal: &str) -> Result<Self> {
                let n = literal.len() as u32;
                check_width(n)?;
                let mut value = 0u32;
                for (i, c) in literal.chars().enumerate() {
                    match c {
                        '0' => {}
                        '1' => value |= 1 << i,
                        other => return Err(domain(alloc::format!("not a bit: {other:?}"))),
                    }
                }
                Ok(Self { value, n })
            }

            #[inline]
            pub fn value(self) -> u32 {
                self.value
            }

            #[inline]
            pub fn n(self) -> u32 {
                self.n
            }

            /// Bit `x_i` for `i` in `1..=n`.
            pub fn bit(self, i: u32) -> bool {
                assert!((1..=self.n).contains(&i), "bit index {i} out of 1..={}", self.n);
                (self.value >> (i - 1)) & 1 == 1
            }

            pub fn weight(self) -> u32 {
                self.value.count_ones()
            }

            pub fn to_literal(self) -> String {
                (1..=self.n).map(|i| if self.bit(i) { '1' } else { '0' }).collect()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_literal())
            }
        }
    };
}

bit_word! {
    /// A point `x` of the Boolean cube `{0,1}^n`.
    BitString
}

bit_word! {
    /// A Walsh mask `alpha`, selecting the bits whose parity a character measures.
    Mask
}

impl Mask {
    pub fn is_zero(self) -> bool {
        self.value == 0
    }
}

/// `(-1)^(alpha . x)`.
pub fn walsh_character(alpha: Mask, x: BitString) -> Result<i32> {
    if alpha.n() != x.n() {
        return Err(Error::WidthMismatch { left: alpha.n(), right: x.n() });
    }
    Ok(if (alpha.value() & x.value()).count_ones() % 2 == 0 { 1 } else { -1 })
}

/// Unnormalized natural-order Walsh-Hadamard transform, in place.
///
/// `out[a] = sum_x v[x] * (-1)^popcount(a & x)`. Applying it twice multiplies
/// by the length.
pub fn fwht_in_place<T>(data: &mut [T]) -> Result<()>
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    let len = data.len();
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    let mut half = 1;
    while half < len {
        for block in data.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half <<= 1;
    }
    Ok(())
}

/// Copying variant of [`fwht_in_place`].
pub fn fwht(vec: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Dense length-`2^n` vector with `weights[m] += w` for every `(m, w)`, then
/// transformed. Evaluates `x -> sum_k w_k (-1)^(m_k . x)` on the whole cube.
pub(crate) fn walsh_synthesis(n: u32, terms: impl IntoIterator<Item = (u32, f64)>) -> Vec<f64> {
    let mut dense = vec![0.0; 1usize << n];
    for (mask, w) in terms {
        dense[mask as usize] += w;
    }
    fwht_in_place(&mut dense).expect("power-of-two length");
    dense
}

/// A normalized distribution over `{0,1}^n`, indexed by bitstring value.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbabilityTable {
    n: u32,
    mass: Vec<f64>,
}

impl ProbabilityTable {
    /// Validates nonnegativity and unit total mass (within [`MASS_TOLERANCE`]).
    pub fn new(n: u32, mass: Vec<f64>) -> Result<Self> {
        check_width(n)?;
        let expected = 1usize << n;
        if mass.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: mass.len() });
        }
        if let Some((i, v)) = mass.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::InvalidTable(alloc::format!("entry {i} is {v}")));
        }
        let total = neumaier_sum(&mass);
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidTable(alloc::format!("total mass {total}")));
        }
        Ok(Self { n, mass })
    }

    /// Normalizes nonnegative weights with a positive, finite total.
    pub fn from_weights(n: u32, mut weights: Vec<f64>) -> Result<Self> {
        check_width(n)?;
        let expected = 1usize << n;
        if weights.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: weights.len() });
        }
        if let Some((i, v)) = weights.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidTable(alloc::format!("weight {i} is {v}")));
        }
        let total = neumaier_sum(&weights);
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Degenerate(alloc::format!("total weight {total}")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { n, mass: weights })
    }

    /// Normalized `exp(log_weights)`, evaluated with max-subtraction.
    ///
    /// Returns the table and `log Z = log sum_x exp(log_weights[x])`.
    pub fn from_log_weights(n: u32, mut log_weights: Vec<f64>) -> Result<(Self, f64)> {
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Degenerate(alloc::format!("max log-weight {max}")));
        }
        log_weights.iter_mut().for_each(|w| *w = libm::exp(*w - max));
        let total = neumaier_sum(&log_weights);
        let log_z = max + libm::log(total);
        Ok((Self::from_weights(n, log_weights)?, log_z))
    }

    pub fn uniform(n: u32) -> Result<Self> {
        check_width(n)?;
        let len = 1usize << n;
        Ok(Self { n, mass: vec![1.0 / len as f64; len] })
    }

    /// Uniform over `states` (values must be `< 2^n`).
    pub fn uniform_on(n: u32, states: &[u32]) -> Result<Self> {
        check_width(n)?;
        let mut weights = vec![0.0; 1usize << n];
        for &x in states {
            *weights
                .get_mut(x as usize)
                .ok_or(Error::ValueOutOfRange { value: x, n })? = 1.0;
        }
        Self::from_weights(n, weights)
    }

    pub fn point_mass(x: BitString) -> Self {
        let mut mass = vec![0.0; 1usize << x.n()];
        mass[x.value() as usize] = 1.0;
        Self { n: x.n(), mass }
    }

    /// Sample frequencies of a multiset of bitstring values.
    pub fn empirical(n: u32, sample: &[u32]) -> Result<Self> {
        if sample.is_empty() {
            return Err(domain("empty sample"));
        }
        let mut counts = vec![0.0; 1usize << n];
        for &x in sample {
            *counts
                .get_mut(x as usize)
                .ok_or(Error::ValueOutOfRange { value: x, n })? += 1.0;
        }
        Self::from_weights(n, counts)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn into_mass(self) -> Vec<f64> {
        self.mass
    }

    pub fn get(&self, x: u32) -> f64 {
        self.mass[x as usize]
    }

    /// Total mass on a set of states.
    pub fn mass_on(&self, states: &[u32]) -> f64 {
        neumaier_sum_iter(states.iter().map(|&x| self.mass[x as usize]))
    }
}

/// The full set of parity moments of a table, indexed by mask value.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WalshSpectrum {
    n: u32,
    coeff: Vec<f64>,
}

impl WalshSpectrum {
    pub fn new(n: u32, coeff: Vec<f64>) -> Result<Self> {
        check_width(n)?;
        let expected = 1usize << n;
        if coeff.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: coeff.len() });
        }
        Ok(Self { n, coeff })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn coeff(&self) -> &[f64] {
        &self.coeff
    }

    pub fn at(&self, alpha: Mask) -> f64 {
        self.coeff[alpha.value() as usize]
    }
}

/// `r_hat(alpha) = sum_x r(x) (-1)^(alpha . x)` for every mask at once.
pub fn spectrum_of(table: &ProbabilityTable) -> WalshSpectrum {
    let mut coeff = table.mass.clone();
    fwht_in_place(&mut coeff).expect("table length is a power of two");
    WalshSpectrum { n: table.n, coeff }
}

/// Inverse transform `r(x) = 2^-n sum_alpha r_hat(alpha) (-1)^(alpha . x)`.
///
/// The result is signed in general; it is a distribution only if `spec` is
/// the spectrum of one.
pub fn table_from_spectrum(spec: &WalshSpectrum) -> Vec<f64> {
    let mut out = spec.coeff.clone();
    fwht_in_place(&mut out).expect("spectrum length is a power of two");
    let scale = 1.0 / out.len() as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// Per-bit inclusion probability `p = (1 - exp(-1 / (2 sigma^2))) / 2` of the
/// product-Bernoulli mask distribution.
pub fn bernoulli_rate(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(domain(alloc::format!("sigma must be positive and finite, got {sigma}")));
    }
    Ok(0.5 * -libm::expm1(-1.0 / (2.0 * sigma * sigma)))
}

/// Draws `k` nonzero masks with i.i.d. `Bernoulli(p_sigma)` bits.
///
/// An all-zero draw is discarded and the whole mask redrawn. Duplicates are
/// kept.
pub fn sample_band<R: Rng + ?Sized>(sigma: f64, k: usize, n: u32, rng: &mut R) -> Result<Vec<Mask>> {
    check_width(n)?;
    if k == 0 {
        return Err(domain("band needs at least one mask"));
    }
    let p = bernoulli_rate(sigma)?;
    let mut masks = Vec::with_capacity(k);
    while masks.len() < k {
        let mut value = 0u32;
        for j in 0..n {
            if rng.random_bool(p) {
                value |= 1 << j;
            }
        }
        if value != 0 {
            masks.push(Mask { value, n });
        }
    }
    Ok(masks)
}

/// `(1/m) sum_{x in sample} (-1)^(alpha_k . x)` for each mask, with
/// multiplicity.
pub fn empirical_moments(masks: &[Mask], sample: &[BitString]) -> Result<Vec<f64>> {
    let first = sample.first().ok_or_else(|| domain("empty sample"))?;
    let n = first.n();
    if let Some(x) = sample.iter().find(|x| x.n() != n) {
        return Err(Error::WidthMismatch { left: n, right: x.n() });
    }
    if let Some(a) = masks.iter().find(|a| a.n() != n) {
        return Err(Error::WidthMismatch { left: n, right: a.n() });
    }
    let m = sample.len() as f64;
    Ok(masks
        .iter()
        .map(|alpha| {
            let odd = sample
                .iter()
                .filter(|x| (alpha.value() & x.value()).count_ones() & 1 == 1)
                .count() as f64;
            (m - 2.0 * odd) / m
        })
        .collect())
}

/// A sampled band of nonzero masks with the moments it is asked to match.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParityBand {
    pub sigma: f64,
    pub masks: Vec<Mask>,
    pub target_moments: Vec<f64>,
}

impl ParityBand {
    pub fn new(sigma: f64, masks: Vec<Mask>, target_moments: Vec<f64>) -> Result<Self> {
        if masks.is_empty() {
            return Err(domain("band needs at least one mask"));
        }
        if masks.len() != target_moments.len() {
            return Err(Error::LengthMismatch { expected: masks.len(), actual: target_moments.len() });
        }
        let n = masks[0].n();
        if let Some(a) = masks.iter().find(|a| a.n() != n) {
            return Err(Error::WidthMismatch { left: n, right: a.n() });
        }
        if masks.iter().any(|a| a.is_zero()) {
            return Err(domain("band contains the zero mask"));
        }
        if let Some(z) = target_moments.iter().find(|z| !(z.abs() <= 1.0)) {
            return Err(domain(alloc::format!("target moment {z} outside [-1, 1]")));
        }
        Ok(Self { sigma, masks, target_moments })
    }

    /// Samples masks and sets their targets to the sample's empirical moments.
    pub fn from_sample<R: Rng + ?Sized>(
        sigma: f64,
        k: usize,
        sample: &[BitString],
        rng: &mut R,
    ) -> Result<Self> {
        let n = sample.first().ok_or_else(|| domain("empty sample"))?.n();
        let masks = sample_band(sigma, k, n, rng)?;
        let target_moments = empirical_moments(&masks, sample)?;
        Self::new(sigma, masks, target_moments)
    }

    pub fn n(&self) -> u32 {
        self.masks[0].n()
    }

    pub fn k(&self) -> usize {
        self.masks.len()
    }

    pub(crate) fn mask_values(&self) -> impl Iterator<Item = u32> + '_ {
        self.masks.iter().map(|m| m.value())
    }
}

/// Compensated (Neumaier) summation; keeps reductions over `2^24` entries
/// accurate and order-stable.
pub fn neumaier_sum(values: &[f64]) -> f64 {
    neumaier_sum_iter(values.iter().copied())
}

pub fn neumaier_sum_iter(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
