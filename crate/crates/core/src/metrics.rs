//! Exact forward KL, its four-term split and occupancy-based discovery metrics.
//!
//! All logarithms are natural (nats).

use alloc::vec::Vec;

use crate::benchmark::StateSet;
use crate::error::{domain, Error, Result};
use crate::walsh::{neumaier_sum_iter, ProbabilityTable};

/// Model probabilities below this are clamped inside `log` and flagged.
pub const KL_FLOOR: f64 = 1e-300;

/// Tolerance on target mass outside the declared support.
const SUPPORT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KlValue {
    pub value: f64,
    /// Some model probability fell below [`KL_FLOOR`] where the target is positive.
    pub clamped: bool,
}

fn check_widths(target: &ProbabilityTable, model: &ProbabilityTable, support: &StateSet) -> Result<()> {
    if target.n() != model.n() || target.n() != support.n() {
        return Err(Error::WidthMismatch { left: target.n(), right: model.n().max(support.n()) });
    }
    let inside = target.mass_on(support.states());
    if (1.0 - inside).abs() > SUPPORT_TOLERANCE {
        return Err(domain(alloc::format!("target has mass {} outside the support", 1.0 - inside)));
    }
    Ok(())
}

/// `sum_{x in support} p(x) log(p(x) / q(x))`, terms with `p(x) = 0` dropped.
pub fn forward_kl(target: &ProbabilityTable, model: &ProbabilityTable, support: &StateSet) -> Result<KlValue> {
    check_widths(target, model, support)?;
    Ok(kl_terms(support.states().iter().map(|&x| (target.get(x), model.get(x))), 1.0, 1.0))
}

/// KL between `p / p_total` and `q / q_total` over the given pairs.
fn kl_terms(pairs: impl Iterator<Item = (f64, f64)>, p_total: f64, q_total: f64) -> KlValue {
    let mut clamped = false;
    let value = neumaier_sum_iter(pairs.filter(|(p, _)| *p > 0.0).map(|(p, q)| {
        let p = p / p_total;
        let mut q = q / q_total;
        if !(q >= KL_FLOOR) {
            clamped = true;
            q = KL_FLOOR;
        }
        p * libm::log(p / q)
    }));
    KlValue { value, clamped }
}

/// `KL(Bern(a) || Bern(b))` with `0 log 0 = 0`.
fn bernoulli_kl(a: f64, b: f64) -> f64 {
    let term = |p: f64, q: f64| if p > 0.0 { p * libm::log(p / q.max(KL_FLOOR)) } else { 0.0 };
    term(a, b) + term(1.0 - a, 1.0 - b)
}

/// Forward KL split into support leakage, observed/unobserved mass split and
/// the two conditional shape errors.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KlBreakdown {
    pub total: f64,
    /// `log 1 / q(S)`.
    pub support_leakage: f64,
    /// `KL(Bern(a) || Bern(b))`.
    pub mass_split: f64,
    /// `a KL(p_U || q_U)`.
    pub unseen_shape: f64,
    /// `(1 - a) KL(p_O || q_O)`.
    pub observed_shape: f64,
    /// Target mass on the unobserved states.
    pub a: f64,
    /// Model mass on the unobserved states relative to its support mass.
    pub b: f64,
    pub clamped: bool,
}

impl KlBreakdown {
    pub fn term_sum(&self) -> f64 {
        self.support_leakage + self.mass_split + self.unseen_shape + self.observed_shape
    }
}

pub fn kl_decomposition(
    target: &ProbabilityTable,
    model: &ProbabilityTable,
    observed: &StateSet,
    support: &StateSet,
) -> Result<KlBreakdown> {
    check_widths(target, model, support)?;
    if !observed.is_subset(support) {
        return Err(domain("observed states must lie in the support"));
    }
    let unobserved = support.difference(observed);
    let total = forward_kl(target, model, support)?;
    let q_support = model.mass_on(support.states());
    if !(q_support > 0.0) {
        return Err(Error::Degenerate("model has no mass on the support".into()));
    }
    let a = target.mass_on(unobserved.states()).clamp(0.0, 1.0);
    let q_unseen = model.mass_on(unobserved.states());
    let q_seen = model.mass_on(observed.states());
    let b = q_unseen / q_support;

    let pairs = |set: &StateSet| -> Vec<(f64, f64)> { set.states().iter().map(|&x| (target.get(x), model.get(x))).collect() };
    let unseen = if a > 0.0 { kl_terms(pairs(&unobserved).into_iter(), a, q_unseen) } else { KlValue { value: 0.0, clamped: false } };
    let seen = if a < 1.0 { kl_terms(pairs(observed).into_iter(), 1.0 - a, q_seen) } else { KlValue { value: 0.0, clamped: false } };

    Ok(KlBreakdown {
        total: total.value,
        support_leakage: -libm::log(q_support),
        mass_split: bernoulli_kl(a, b),
        unseen_shape: a * unseen.value,
        observed_shape: (1.0 - a) * seen.value,
        a,
        b,
        clamped: total.clamped || unseen.clamped || seen.clamped,
    })
}

/// `sum_{x in elite} [1 - (1 - q(x))^Q]`, via `expm1`/`log1p` so tiny `q`
/// keep full precision.
pub fn expected_discoveries(model: &ProbabilityTable, elite: &StateSet, budget: u64) -> Result<f64> {
    if budget == 0 {
        return Err(domain("budget must be >= 1"));
    }
    let q_budget = budget as f64;
    Ok(neumaier_sum_iter(elite.states().iter().map(|&x| {
        let q = model.get(x).min(1.0);
        -libm::expm1(q_budget * libm::log1p(-q))
    })))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageReport {
    pub budgets: Vec<u64>,
    /// Expected distinct elite states discovered, `M_q(Q)`.
    pub expected_discoveries: Vec<f64>,
    /// Discoveries per sample, `M_q(Q) / Q`.
    pub coverage: Vec<f64>,
    /// Fraction of the elite recovered, `M_q(Q) / |E|`.
    pub recovery: Vec<f64>,
    pub elite_size: usize,
}

impl CoverageReport {
    pub fn coverage_at(&self, budget: u64) -> Option<f64> {
        self.budgets.iter().position(|&b| b == budget).map(|i| self.coverage[i])
    }

    pub fn recovery_at(&self, budget: u64) -> Option<f64> {
        self.budgets.iter().position(|&b| b == budget).map(|i| self.recovery[i])
    }
}

pub fn coverage_report(model: &ProbabilityTable, elite: &StateSet, budgets: &[u64]) -> Result<CoverageReport> {
    if elite.is_empty() {
        return Err(domain("unseen elite is empty; check tau"));
    }
    let size = elite.len() as f64;
    let found = budgets.iter().map(|&q| expected_discoveries(model, elite, q)).collect::<Result<Vec<f64>>>()?;
    Ok(CoverageReport {
        budgets: budgets.to_vec(),
        coverage: found.iter().zip(budgets).map(|(m, &q)| m / q as f64).collect(),
        recovery: found.iter().map(|m| m / size).collect(),
        expected_discoveries: found,
        elite_size: elite.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::valid_support;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_on(n: u32, support: &StateSet, rng: &mut ChaCha8Rng) -> ProbabilityTable {
        let mut w = alloc::vec![0.0; 1 << n];
        for &x in support.states() {
            w[x as usize] = rng.random::<f64>() + 0.01;
        }
        ProbabilityTable::from_weights(n, w).unwrap()
    }

    fn random_full(n: u32, rng: &mut ChaCha8Rng) -> ProbabilityTable {
        ProbabilityTable::from_weights(n, (0..1 << n).map(|_| rng.random::<f64>() + 1e-3).collect()).unwrap()
    }

    #[test]
    fn kl_examples() {
        let s = valid_support(12).unwrap();
        let u = ProbabilityTable::uniform_on(12, s.states()).unwrap();
        assert_eq!(forward_kl(&u, &u, &s).unwrap().value, 0.0);
        let x0 = s.states()[17];
        let mut w = alloc::vec![0.0; 4096];
        w[x0 as usize] = 1.0;
        let point = ProbabilityTable::new(12, w).unwrap();
        let kl = forward_kl(&point, &u, &s).unwrap();
        assert!((kl.value - 2048f64.ln()).abs() < 1e-12);
        assert!((kl.value - 7.6246).abs() < 1e-4);
        assert!(!kl.clamped);
    }

    #[test]
    fn kl_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = valid_support(6).unwrap();
        let p = random_on(6, &s, &mut rng);
        let q = random_full(6, &mut rng);
        let brute: f64 = s.states().iter().map(|&x| p.get(x) * (p.get(x) / q.get(x)).ln()).sum();
        assert!((forward_kl(&p, &q, &s).unwrap().value - brute).abs() < 1e-12);
    }

    #[test]
    fn zero_model_mass_is_flagged_not_infinite() {
        let s = valid_support(4).unwrap();
        let p = ProbabilityTable::uniform_on(4, s.states()).unwrap();
        let q = ProbabilityTable::uniform_on(4, &[0, 3, 5]).unwrap();
        let kl = forward_kl(&p, &q, &s).unwrap();
        assert!(kl.value.is_finite() && kl.value > 100.0);
        assert!(kl.clamped);
    }

    #[test]
    fn target_off_support_is_rejected() {
        let s = valid_support(4).unwrap();
        let u = ProbabilityTable::uniform(4).unwrap();
        assert!(forward_kl(&u, &u, &s).is_err());
    }

    #[test]
    fn gibbs_inequality_under_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = valid_support(6).unwrap();
        for _ in 0..50 {
            let p = random_on(6, &s, &mut rng);
            assert!(forward_kl(&p, &p, &s).unwrap().value.abs() < 1e-10);
            let mut w = p.mass().to_vec();
            for &x in s.states() {
                w[x as usize] *= 1.0 + 0.05 * rng.random_range(-1.0..1.0);
            }
            let q = ProbabilityTable::from_weights(6, w).unwrap();
            assert!(forward_kl(&p, &q, &s).unwrap().value > 0.0);
        }
    }

    #[test]
    fn decomposition_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = valid_support(6).unwrap();
        for _ in 0..100 {
            let p = random_on(6, &s, &mut rng);
            let q = random_full(6, &mut rng);
            let observed: alloc::vec::Vec<u32> = s.states().iter().copied().filter(|_| rng.random_bool(0.4)).collect();
            let o = StateSet::new(6, observed).unwrap();
            let d = kl_decomposition(&p, &q, &o, &s).unwrap();
            assert!((d.total - d.term_sum()).abs() < 1e-10);
            assert!(d.support_leakage >= 0.0 && d.mass_split >= 0.0);
            assert!(d.unseen_shape >= -1e-15 && d.observed_shape >= -1e-15);
        }
    }

    #[test]
    fn decomposition_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = valid_support(6).unwrap();
        let p = random_on(6, &s, &mut rng);
        let q = random_full(6, &mut rng);
        let d = kl_decomposition(&p, &q, &s, &s).unwrap();
        assert_eq!(d.a, 0.0);
        assert_eq!(d.unseen_shape, 0.0);
        assert!((d.mass_split - bernoulli_kl(0.0, d.b)).abs() < 1e-15);
        assert!((d.total - d.term_sum()).abs() < 1e-10);

        let o = StateSet::new(6, s.states()[..10].to_vec()).unwrap();
        let d = kl_decomposition(&p, &p, &o, &s).unwrap();
        for t in [d.support_leakage, d.mass_split, d.unseen_shape, d.observed_shape] {
            assert!(t.abs() < 1e-12);
        }

        let off = ProbabilityTable::uniform_on(6, &[1]).unwrap();
        assert!(kl_decomposition(&p, &off, &o, &s).is_err());
    }

    #[test]
    fn discovery_examples() {
        let elite = StateSet::new(4, alloc::vec![3]).unwrap();
        let point = ProbabilityTable::uniform_on(4, &[3]).unwrap();
        assert_eq!(expected_discoveries(&point, &elite, 1).unwrap(), 1.0);
        let elsewhere = ProbabilityTable::uniform_on(4, &[0]).unwrap();
        assert_eq!(expected_discoveries(&elsewhere, &elite, 1000).unwrap(), 0.0);
        assert!(expected_discoveries(&point, &elite, 0).is_err());
    }

    #[test]
    fn uniform_on_elite_discovers_one_per_first_sample() {
        let elite = StateSet::new(8, (0..40).map(|i| i * 3).collect()).unwrap();
        let q = ProbabilityTable::uniform_on(8, elite.states()).unwrap();
        let r = coverage_report(&q, &elite, &[1, 10_000_000]).unwrap();
        assert!((r.expected_discoveries[0] - 1.0).abs() < 1e-12);
        assert!((r.coverage[0] - 1.0).abs() < 1e-12);
        assert!((r.recovery[1] - 1.0).abs() < 1e-12);
        assert!(coverage_report(&q, &StateSet::new(8, alloc::vec![]).unwrap(), &[1]).is_err());
    }

    #[test]
    fn discoveries_are_monotone_and_concave() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_full(8, &mut rng);
        let elite = StateSet::new(8, (0..256).filter(|_| rng.random_bool(0.2)).collect()).unwrap();
        let m: alloc::vec::Vec<f64> = (1..200).map(|b| expected_discoveries(&q, &elite, b).unwrap()).collect();
        assert!(m.windows(2).all(|w| w[1] >= w[0]));
        assert!(m.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] <= 1e-12));
        assert!(m.iter().all(|&v| v <= elite.len() as f64));
    }

    #[test]
    fn tiny_probabilities_keep_precision() {
        let mut w = alloc::vec![0.0; 4];
        w[0] = 1.0;
        w[1] = 1e-18;
        let q = ProbabilityTable::from_weights(2, w).unwrap();
        let elite = StateSet::new(2, alloc::vec![1]).unwrap();
        let m = expected_discoveries(&q, &elite, 1000).unwrap();
        assert!((m - 1e-15).abs() < 1e-27);
    }
}
