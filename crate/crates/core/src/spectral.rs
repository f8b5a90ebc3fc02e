//! Parameter-free band-limited reconstruction and region visibility.

use alloc::vec::Vec;

use crate::benchmark::StateSet;
use crate::error::{Error, Result};
use crate::walsh::{check_width, fwht_in_place, neumaier_sum_iter, walsh_synthesis, ParityBand, ProbabilityTable};

/// `q_lin(x) = 2^-n (1 + sum_k z_k (-1)^(alpha_k . x))`.
///
/// Duplicate masks add their moments onto the same coefficient.
pub fn linear_reconstruction(band: &ParityBand, n: u32) -> Result<Vec<f64>> {
    check_width(n)?;
    if band.n() != n {
        return Err(Error::WidthMismatch { left: band.n(), right: n });
    }
    let terms = core::iter::once((0u32, 1.0)).chain(band.mask_values().zip(band.target_moments.iter().copied()));
    let mut q = walsh_synthesis(n, terms);
    let scale = 1.0 / q.len() as f64;
    q.iter_mut().for_each(|v| *v *= scale);
    Ok(q)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectralProxy {
    /// Signed reconstruction over the whole cube.
    pub linear: Vec<f64>,
    /// Clipped and renormalized table.
    pub projected: ProbabilityTable,
    /// Total magnitude of the negative entries removed by clipping.
    pub negative_mass_clipped: f64,
}

/// Clips `linear` at zero and renormalizes.
///
/// With `support = Some(S)` the projection keeps only entries on `S` and
/// normalizes by the clipped mass on `S`; with `None` it normalizes over the
/// whole cube.
pub fn spectral_projection(linear: &[f64], support: Option<&StateSet>) -> Result<SpectralProxy> {
    let len = linear.len();
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    let n = len.trailing_zeros();
    let keep = support.map(|s| s.indicator());
    let negative_mass_clipped = neumaier_sum_iter(linear.iter().map(|&v| (-v).max(0.0)));
    let clipped: Vec<f64> = linear
        .iter()
        .enumerate()
        .map(|(x, &v)| match &keep {
            Some(k) if !k[x] => 0.0,
            _ => v.max(0.0),
        })
        .collect();
    if !clipped.iter().any(|&v| v > 0.0) {
        return Err(Error::Degenerate("reconstruction has no positive entry".into()));
    }
    let projected = ProbabilityTable::from_weights(n, clipped)?;
    Ok(SpectralProxy { linear: linear.to_vec(), projected, negative_mass_clipped })
}

/// Builds `q_lin` and projects it onto `support`.
pub fn spectral_proxy(band: &ParityBand, support: Option<&StateSet>) -> Result<SpectralProxy> {
    let linear = linear_reconstruction(band, band.n())?;
    spectral_projection(&linear, support)
}

/// Splits `q_lin(A)` into the uniform baseline `|A| / 2^n` and the band's
/// visibility `sum_k z_k phibar_A(alpha_k)`, with
/// `phibar_A(alpha) = 2^-n sum_{x in A} (-1)^(alpha . x)`.
pub fn region_visibility(band: &ParityBand, region: &StateSet, n: u32) -> Result<(f64, f64)> {
    check_width(n)?;
    if band.n() != n || region.n() != n {
        return Err(Error::WidthMismatch { left: band.n(), right: n });
    }
    if region.is_empty() {
        return Ok((0.0, 0.0));
    }
    let size = (1usize << n) as f64;
    let mut phibar: Vec<f64> = region.indicator().into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect();
    fwht_in_place(&mut phibar)?;
    let visibility = neumaier_sum_iter(
        band.mask_values().zip(&band.target_moments).map(|(m, z)| z * phibar[m as usize] / size),
    );
    Ok((region.len() as f64 / size, visibility))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{make_instance, BenchmarkConfig};
    use crate::walsh::{parity_sign, sample_band, Mask};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: u32, k: usize, seed: u64) -> ParityBand {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let masks = sample_band(1.0, k, n, &mut rng).unwrap();
        let z = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        ParityBand::new(1.0, masks, z).unwrap()
    }

    #[test]
    fn zero_moments_give_uniform() {
        let band = ParityBand::new(1.0, vec![Mask::new(3, 4).unwrap(), Mask::new(9, 4).unwrap()], vec![0.0, 0.0]).unwrap();
        let q = linear_reconstruction(&band, 4).unwrap();
        assert!(q.iter().all(|&v| (v - 1.0 / 16.0).abs() < 1e-16));
    }

    #[test]
    fn reconstruction_has_unit_total() {
        for seed in 0..10 {
            let band = random_band(7, 40, seed);
            let q = linear_reconstruction(&band, 7).unwrap();
            assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_matches_double_loop() {
        let band = random_band(6, 25, 3);
        let q = linear_reconstruction(&band, 6).unwrap();
        for x in 0..64u32 {
            let direct = (1.0
                + band.masks.iter().zip(&band.target_moments).map(|(m, z)| z * parity_sign(m.value(), x)).sum::<f64>())
                / 64.0;
            assert!((q[x as usize] - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruction_reproduces_distinct_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut values: Vec<u32> = (1..64).collect();
        values.shuffle(&mut rng);
        let masks: Vec<Mask> = values[..10].iter().map(|&v| Mask::new(v, 6).unwrap()).collect();
        let z: Vec<f64> = (0..10).map(|_| rng.random_range(-0.3..0.3)).collect();
        let band = ParityBand::new(1.0, masks, z).unwrap();
        let q = linear_reconstruction(&band, 6).unwrap();
        let mut spec = q.clone();
        fwht_in_place(&mut spec).unwrap();
        for (m, z) in band.masks.iter().zip(&band.target_moments) {
            assert!((spec[m.value() as usize] - z).abs() < 1e-14);
        }
    }

    #[test]
    fn projection_examples() {
        let p = spectral_projection(&[0.75, -0.25, 0.25, 0.25], None).unwrap();
        let want = [0.6, 0.0, 0.2, 0.2];
        for (a, b) in p.projected.mass().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(p.negative_mass_clipped, 0.25);

        let valid = [0.1, 0.2, 0.3, 0.4];
        let p = spectral_projection(&valid, None).unwrap();
        assert_eq!(p.projected.mass(), &valid);
        assert_eq!(p.negative_mass_clipped, 0.0);

        assert!(spectral_projection(&[0.0, -1.0, 0.0, 0.0], None).is_err());
        assert!(spectral_projection(&[0.5, 0.5, 0.0], None).is_err());
    }

    #[test]
    fn projection_onto_support() {
        let support = StateSet::new(2, vec![0, 3]).unwrap();
        let p = spectral_projection(&[0.3, 0.4, -0.2, 0.5], Some(&support)).unwrap();
        assert!((p.projected.get(0) - 0.375).abs() < 1e-15);
        assert!((p.projected.get(3) - 0.625).abs() < 1e-15);
        assert_eq!(p.projected.get(1), 0.0);
    }

    #[test]
    fn proxy_on_reference_instance_is_valid() {
        let inst = make_instance(&BenchmarkConfig::default()).unwrap();
        for support in [None, Some(&inst.support)] {
            let proxy = spectral_proxy(&inst.band, support).unwrap();
            let t = &proxy.projected;
            assert!(t.mass().iter().all(|&v| v >= 0.0));
            assert!((t.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(proxy.negative_mass_clipped >= 0.0);
        }
    }

    #[test]
    fn visibility_examples() {
        let band = random_band(5, 12, 5);
        let origin = StateSet::new(5, vec![0]).unwrap();
        let (u, vis) = region_visibility(&band, &origin, 5).unwrap();
        assert_eq!(u, 1.0 / 32.0);
        let expected: f64 = band.target_moments.iter().sum::<f64>() / 32.0;
        assert!((vis - expected).abs() < 1e-15);

        let zero = ParityBand::new(1.0, band.masks.clone(), vec![0.0; 12]).unwrap();
        let region = StateSet::new(5, vec![1, 4, 9, 30]).unwrap();
        assert_eq!(region_visibility(&zero, &region, 5).unwrap().1, 0.0);
        assert_eq!(region_visibility(&band, &StateSet::new(5, vec![]).unwrap(), 5).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn visibility_identity_on_unseen_elite() {
        let inst = make_instance(&BenchmarkConfig::default()).unwrap();
        let q = linear_reconstruction(&inst.band, 12).unwrap();
        let (u, vis) = region_visibility(&inst.band, &inst.unseen_elite, 12).unwrap();
        let direct: f64 = inst.unseen_elite.states().iter().map(|&x| q[x as usize]).sum();
        assert!((u + vis - direct).abs() < 1e-12);
    }
}
