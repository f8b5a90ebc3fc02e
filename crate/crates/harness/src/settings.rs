use paritybench_core::{BenchmarkConfig, ModelClass, OptimizerConfig};
use serde::{Deserialize, Serialize};

/// Bumped whenever a change alters the numbers a run produces.
pub const CONFIG_VERSION: u32 = 1;

pub const REFERENCE_BUDGETS: [u64; 3] = [1000, 2000, 5000];
pub const ABLATION_SIGMAS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];
pub const ABLATION_KS: [usize; 3] = [128, 256, 512];

/// Training constants shared by every trained model of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub optimizer: OptimizerConfig,
    /// Standard deviation of the Gaussian IQP angle initialization.
    pub iqp_init_std: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { optimizer: OptimizerConfig::default(), iqp_init_std: 0.1 }
    }
}

/// A crossed design: every `n` x beta x seed x band cell is one instance and
/// every instance is run for every model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ns: Vec<u32>,
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `(sigma, K)` pairs.
    pub bands: Vec<(f64, usize)>,
    pub models: Vec<ModelClass>,
    pub budgets: Vec<u64>,
    /// Training-sample size.
    pub m: usize,
    pub tau: f64,
    pub train: TrainSettings,
}

impl Default for SweepSpec {
    /// The 200-instance reference sweep.
    fn default() -> Self {
        let base = BenchmarkConfig::default();
        Self {
            ns: vec![base.n],
            betas: BenchmarkConfig::reference_betas(),
            seeds: BenchmarkConfig::REFERENCE_SEEDS.collect(),
            bands: vec![(base.sigma, base.k)],
            models: vec![
                ModelClass::IqpParity,
                ModelClass::IqpMse,
                ModelClass::IsingSparse,
                ModelClass::IsingDense,
                ModelClass::Maxent,
                ModelClass::SpectralProxy,
                ModelClass::Uniform,
                ModelClass::UniformSupport,
            ],
            budgets: REFERENCE_BUDGETS.to_vec(),
            m: base.m,
            tau: base.tau,
            train: TrainSettings::default(),
        }
    }
}

impl SweepSpec {
    /// Fixed beta = 0.9, the 4 x 3 `(sigma, K)` grid.
    pub fn band_ablation() -> Self {
        let bands = ABLATION_SIGMAS.iter().flat_map(|&s| ABLATION_KS.iter().map(move |&k| (s, k))).collect();
        Self {
            betas: vec![0.9],
            bands,
            models: vec![ModelClass::IqpParity, ModelClass::IqpMse, ModelClass::SpectralProxy, ModelClass::Uniform],
            ..Self::default()
        }
    }

    /// Fixed beta = 0.9 over `n = 10..=20`, same hyperparameters at every size.
    pub fn n_sweep() -> Self {
        Self {
            ns: (10..=20).collect(),
            betas: vec![0.9],
            models: vec![ModelClass::IqpParity, ModelClass::IsingSparse, ModelClass::IsingDense, ModelClass::Maxent],
            ..Self::default()
        }
    }

    /// Every instance configuration of the design, in a fixed order.
    pub fn instances(&self) -> Vec<BenchmarkConfig> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &(sigma, k) in &self.bands {
                for &beta in &self.betas {
                    for &seed in &self.seeds {
                        out.push(BenchmarkConfig { n, beta, seed, m: self.m, sigma, k, tau: self.tau });
                    }
                }
            }
        }
        out
    }

    pub fn task_count(&self) -> usize {
        self.instances().len() * self.models.len()
    }
}
