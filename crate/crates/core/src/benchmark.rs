//! The parity-structured target family and paired-instance construction.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::rng::{self, Stream};
use crate::walsh::{check_width, BitString, ParityBand, ProbabilityTable};

/// A set of bitstring values, kept sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateSet {
    n: u32,
    states: Vec<u32>,
}

impl StateSet {
    pub fn new(n: u32, mut states: Vec<u32>) -> Result<Self> {
        check_width(n)?;
        states.sort_unstable();
        states.dedup();
        if let Some(&x) = states.last() {
            if x >> n != 0 {
                return Err(Error::ValueOutOfRange { value: x, n });
            }
        }
        Ok(Self { n, states })
    }

    pub fn full(n: u32) -> Result<Self> {
        check_width(n)?;
        Ok(Self { n, states: (0..1u32 << n).collect() })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, x: u32) -> bool {
        self.states.binary_search(&x).is_ok()
    }

    /// Dense membership vector of length `2^n`.
    pub fn indicator(&self) -> Vec<bool> {
        let mut out = vec![false; 1usize << self.n];
        for &x in &self.states {
            out[x as usize] = true;
        }
        out
    }

    pub fn difference(&self, other: &StateSet) -> StateSet {
        let states = self.states.iter().copied().filter(|&x| !other.contains(x)).collect();
        StateSet { n: self.n, states }
    }

    pub fn intersection(&self, other: &StateSet) -> StateSet {
        let states = self.states.iter().copied().filter(|&x| other.contains(x)).collect();
        StateSet { n: self.n, states }
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.states.iter().all(|&x| other.contains(x))
    }
}

/// Even-parity strings, `|S| = 2^(n-1)`.
pub fn valid_support(n: u32) -> Result<StateSet> {
    check_width(n)?;
    if n < 2 {
        return Err(domain("valid support needs n >= 2"));
    }
    let states = (0..1u32 << n).filter(|x| x.count_ones() % 2 == 0).collect();
    Ok(StateSet { n, states })
}

/// Length of the longest run of zeros with a one on both sides.
///
/// The string is read linearly (no wrap-around); strings with fewer than two
/// ones score 0.
pub fn score(x: BitString) -> u32 {
    score_value(x.value())
}

pub(crate) fn score_value(mut v: u32) -> u32 {
    if v.count_ones() < 2 {
        return 0;
    }
    // Drop zeros outside the outermost ones; they are not bracketed.
    v >>= v.trailing_zeros();
    let mut best = 0;
    while v != 0 {
        // v is odd here; skip its low block of ones, then measure the gap.
        v >>= (!v).trailing_zeros();
        if v == 0 {
            break;
        }
        let gap = v.trailing_zeros();
        best = best.max(gap);
        v >>= gap;
    }
    best
}

/// Boltzmann target `p(x) ∝ exp(beta * score(x))` on the even-parity support,
/// zero elsewhere.
pub fn target_distribution(n: u32, beta: f64) -> Result<ProbabilityTable> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(domain(alloc::format!("beta must be finite and >= 0, got {beta}")));
    }
    let support = valid_support(n)?;
    let mut log_w = vec![f64::NEG_INFINITY; 1usize << n];
    for &x in support.states() {
        log_w[x as usize] = beta * score_value(x) as f64;
    }
    Ok(ProbabilityTable::from_log_weights(n, log_w)?.0)
}

/// `m` i.i.d. draws by inverse CDF over the dense table.
pub fn sample_training_set<R: Rng + ?Sized>(
    target: &ProbabilityTable,
    m: usize,
    rng: &mut R,
) -> Result<Vec<BitString>> {
    if m == 0 {
        return Err(domain("training set size must be >= 1"));
    }
    let n = target.n();
    let mut cdf = Vec::with_capacity(target.mass().len());
    let mut acc = 0.0;
    for &p in target.mass() {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let last_positive = target.mass().iter().rposition(|&p| p > 0.0).expect("table has mass");
    (0..m)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            // First index whose cumulative mass exceeds u; never a zero-mass state.
            let idx = cdf.partition_point(|&c| c <= u).min(last_positive);
            BitString::new(idx as u32, n)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BenchmarkConfig {
    pub n: u32,
    pub beta: f64,
    pub seed: u64,
    /// Training-sample size.
    pub m: usize,
    pub sigma: f64,
    /// Band width.
    pub k: usize,
    /// High-value quantile.
    pub tau: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self { n: 12, beta: 0.9, seed: 111, m: 200, sigma: 1.0, k: 512, tau: 0.1 }
    }
}

impl BenchmarkConfig {
    pub const REFERENCE_SEEDS: core::ops::RangeInclusive<u64> = 111..=120;

    /// `0.1, 0.2, ..., 2.0`.
    pub fn reference_betas() -> Vec<f64> {
        (1..=20).map(|i| i as f64 / 10.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        check_width(self.n)?;
        if self.n < 2 {
            return Err(domain("benchmark needs n >= 2"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(domain(alloc::format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.m == 0 || self.k == 0 {
            return Err(domain("m and K must be >= 1"));
        }
        Ok(())
    }

    pub fn key(&self) -> [u8; 32] {
        rng::instance_key(self.seed, self.n, self.beta)
    }
}

/// One paired experimental unit: shared data, shared band and the derived
/// observed / unobserved / high-value sets.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Instance {
    pub config: BenchmarkConfig,
    pub target: ProbabilityTable,
    pub train: Vec<BitString>,
    pub band: ParityBand,
    pub support: StateSet,
    pub observed: StateSet,
    pub unobserved: StateSet,
    pub high_value: StateSet,
    pub unseen_elite: StateSet,
    /// Discrete `(1 - tau)`-quantile of the score over the support.
    pub score_threshold: u32,
}

impl Instance {
    pub fn n(&self) -> u32 {
        self.config.n
    }

    pub fn train_values(&self) -> Vec<u32> {
        self.train.iter().map(|x| x.value()).collect()
    }

    /// Sample frequencies of the training multiset.
    pub fn train_table(&self) -> ProbabilityTable {
        ProbabilityTable::empirical(self.n(), &self.train_values()).expect("nonempty training set")
    }

    /// Sorted `(value, count)` pairs of the training multiset.
    pub fn train_counts(&self) -> Vec<(u32, u32)> {
        let mut values = self.train_values();
        values.sort_unstable();
        let mut out: Vec<(u32, u32)> = Vec::new();
        for v in values {
            match out.last_mut() {
                Some((last, c)) if *last == v => *c += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }
}

/// `min{s : |{x in S : score(x) <= s}| >= (1 - tau) |S|}`.
pub fn score_quantile(support: &StateSet, tau: f64) -> u32 {
    let max_level = support.n();
    let mut counts = vec![0usize; max_level as usize + 1];
    for &x in support.states() {
        counts[score_value(x) as usize] += 1;
    }
    let needed = (1.0 - tau) * support.len() as f64;
    let mut cumulative = 0usize;
    for (level, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        cumulative += c;
        if cumulative as f64 >= needed {
            return level as u32;
        }
    }
    max_level
}

pub fn make_instance(config: &BenchmarkConfig) -> Result<Instance> {
    config.validate()?;
    let n = config.n;
    let key = config.key();
    let target = target_distribution(n, config.beta)?;
    let train = sample_training_set(&target, config.m, &mut rng::stream(key, Stream::TrainSample))?;
    let band = ParityBand::from_sample(config.sigma, config.k, &train, &mut rng::stream(key, Stream::Band))?;

    let support = valid_support(n)?;
    let observed = StateSet::new(n, train.iter().map(|x| x.value()).collect())?;
    if !observed.is_subset(&support) {
        return Err(Error::Degenerate(alloc::string::String::from("training sample left the support")));
    }
    let unobserved = support.difference(&observed);
    let score_threshold = score_quantile(&support, config.tau);
    let high_value = StateSet {
        n,
        states: support.states().iter().copied().filter(|&x| score_value(x) >= score_threshold).collect(),
    };
    if high_value.is_empty() {
        return Err(Error::Degenerate(alloc::format!("empty high-value region at tau = {}", config.tau)));
    }
    let unseen_elite = high_value.intersection(&unobserved);
    Ok(Instance {
        config: config.clone(),
        target,
        train,
        band,
        support,
        observed,
        unobserved,
        high_value,
        unseen_elite,
        score_threshold,
    })
}
