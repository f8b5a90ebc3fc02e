//! Aggregation of run records into the summary tables and plot data.
//!
//! Confidence intervals use the normal approximation
//! `mean +- 1.96 * sd / sqrt(count)` with the sample standard deviation.

use std::collections::BTreeMap;

use paritybench_core::{BenchmarkConfig, ModelClass};
use serde::{Deserialize, Serialize};

use crate::record::RunRecord;

pub const COVERAGE_BUDGET: u64 = 1000;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

pub fn ci95(values: &[f64]) -> f64 {
    1.96 * sample_sd(values) / (values.len() as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn mean_of_some(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| mean(&v))
}

/// Orderable identity of an instance (all fields are nonnegative, so the bit
/// patterns of the floats sort like the floats).
type InstanceId = (u32, u64, u64, u64, usize, usize, u64);

fn instance_id(c: &BenchmarkConfig) -> InstanceId {
    (c.n, c.sigma.to_bits(), c.k as u64, c.beta.to_bits(), c.m, c.seed as usize, c.tau.to_bits())
}

fn evaluated<'a, 'b>(records: &'b [&'a RunRecord]) -> impl Iterator<Item = &'a RunRecord> + 'b {
    records.iter().copied().filter(|r| r.metrics.is_some())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummaryRow {
    pub model: ModelClass,
    pub mean_kl: f64,
    pub ci95: f64,
    pub median_kl: f64,
    /// Empty for classes outside the compared set.
    pub kl_wins: Option<usize>,
    pub mean_coverage_1000: Option<f64>,
    #[serde(skip)]
    pub instances: usize,
    /// Wins decided by a tie broken on model-name order.
    #[serde(skip)]
    pub tied_wins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinRow {
    pub n: u32,
    pub beta: f64,
    pub seed: u64,
    pub sigma: f64,
    pub k: usize,
    pub winner: ModelClass,
    pub winner_kl: f64,
    pub tied: bool,
    pub contenders: usize,
}

/// Per-instance lowest-KL model among `compared`. Exact ties go to the
/// lexicographically first model name and are flagged.
pub fn win_table(records: &[&RunRecord], compared: &[ModelClass]) -> Vec<WinRow> {
    let mut by_instance: BTreeMap<InstanceId, Vec<&RunRecord>> = BTreeMap::new();
    for r in evaluated(records).filter(|r| compared.contains(&r.model)) {
        by_instance.entry(instance_id(&r.instance)).or_default().push(r);
    }
    by_instance
        .into_values()
        .map(|mut group| {
            group.sort_by(|a, b| a.kl().unwrap().total_cmp(&b.kl().unwrap()).then(a.model.name().cmp(b.model.name())));
            let best = group[0];
            let tied = group.get(1).is_some_and(|r| r.kl() == best.kl());
            let c = &best.instance;
            WinRow {
                n: c.n,
                beta: c.beta,
                seed: c.seed,
                sigma: c.sigma,
                k: c.k,
                winner: best.model,
                winner_kl: best.kl().unwrap(),
                tied,
                contenders: group.len(),
            }
        })
        .collect()
}

/// One row per model present, wins counted among `compared`.
pub fn model_summary(records: &[&RunRecord], compared: &[ModelClass]) -> Vec<ModelSummaryRow> {
    let wins = win_table(records, compared);
    let mut by_model: BTreeMap<ModelClass, Vec<&RunRecord>> = BTreeMap::new();
    for r in evaluated(records) {
        by_model.entry(r.model).or_default().push(r);
    }
    by_model
        .into_iter()
        .map(|(model, group)| {
            let kls: Vec<f64> = group.iter().map(|r| r.kl().unwrap()).collect();
            let in_compared = compared.contains(&model);
            ModelSummaryRow {
                model,
                mean_kl: mean(&kls),
                ci95: ci95(&kls),
                median_kl: median(&kls),
                kl_wins: in_compared.then(|| wins.iter().filter(|w| w.winner == model).count()),
                mean_coverage_1000: mean_of_some(group.iter().map(|r| r.coverage_at(COVERAGE_BUDGET))),
                instances: kls.len(),
                tied_wins: wins.iter().filter(|w| w.winner == model && w.tied).count(),
            }
        })
        .collect()
}

/// Mean / median KL and coverage per (model, n, band, beta) cell; the per-beta
/// curves of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaPoint {
    pub model: ModelClass,
    pub n: u32,
    pub sigma: f64,
    pub k: usize,
    pub beta: f64,
    pub count: usize,
    pub mean_kl: f64,
    pub ci95: f64,
    pub median_kl: f64,
    pub mean_coverage_1000: Option<f64>,
    pub mean_recovery_1000: Option<f64>,
}

type CellId = (ModelClass, u32, u64, u64, u64);

fn cells<'a>(records: &[&'a RunRecord]) -> BTreeMap<CellId, Vec<&'a RunRecord>> {
    let mut out: BTreeMap<CellId, Vec<&RunRecord>> = BTreeMap::new();
    for r in evaluated(records) {
        let c = &r.instance;
        out.entry((r.model, c.n, c.sigma.to_bits(), c.k as u64, c.beta.to_bits())).or_default().push(r);
    }
    out
}

pub fn beta_curves(records: &[&RunRecord]) -> Vec<BetaPoint> {
    cells(records)
        .into_iter()
        .map(|((model, n, sigma, k, beta), group)| {
            let kls: Vec<f64> = group.iter().map(|r| r.kl().unwrap()).collect();
            BetaPoint {
                model,
                n,
                sigma: f64::from_bits(sigma),
                k: k as usize,
                beta: f64::from_bits(beta),
                count: kls.len(),
                mean_kl: mean(&kls),
                ci95: ci95(&kls),
                median_kl: median(&kls),
                mean_coverage_1000: mean_of_some(group.iter().map(|r| r.coverage_at(COVERAGE_BUDGET))),
                mean_recovery_1000: mean_of_some(group.iter().map(|r| r.recovery_at(COVERAGE_BUDGET))),
            }
        })
        .collect()
}

/// One `(sigma, K)` cell of the band grid at a fixed beta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandCell {
    pub model: ModelClass,
    pub n: u32,
    pub beta: f64,
    pub sigma: f64,
    pub k: usize,
    pub count: usize,
    pub mean_kl: f64,
    pub ci95: f64,
    pub mean_recovery_1000: Option<f64>,
}

pub fn band_grid(records: &[&RunRecord]) -> Vec<BandCell> {
    let mut out: Vec<BandCell> = beta_curves(records)
        .into_iter()
        .map(|p| BandCell {
            model: p.model,
            n: p.n,
            beta: p.beta,
            sigma: p.sigma,
            k: p.k,
            count: p.count,
            mean_kl: p.mean_kl,
            ci95: p.ci95,
            mean_recovery_1000: p.mean_recovery_1000,
        })
        .collect();
    out.sort_by(|a, b| {
        (a.model, a.n)
            .cmp(&(b.model, b.n))
            .then(a.beta.total_cmp(&b.beta))
            .then(a.sigma.total_cmp(&b.sigma))
            .then(a.k.cmp(&b.k))
    });
    out
}

/// Recovery and coverage against budget, averaged over the instances of a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub model: ModelClass,
    pub n: u32,
    pub sigma: f64,
    pub k: usize,
    pub beta: f64,
    pub budget: u64,
    pub count: usize,
    pub mean_recovery: f64,
    pub sd_recovery: f64,
    pub mean_coverage: f64,
}

pub fn recovery_curves(records: &[&RunRecord]) -> Vec<RecoveryPoint> {
    let mut out = Vec::new();
    for ((model, n, sigma, k, beta), group) in cells(records) {
        let budgets = group[0].metrics.as_ref().unwrap().coverage.budgets.clone();
        for budget in budgets {
            let rec: Vec<f64> = group.iter().filter_map(|r| r.recovery_at(budget)).collect();
            let cov: Vec<f64> = group.iter().filter_map(|r| r.coverage_at(budget)).collect();
            if rec.is_empty() {
                continue;
            }
            out.push(RecoveryPoint {
                model,
                n,
                sigma: f64::from_bits(sigma),
                k: k as usize,
                beta: f64::from_bits(beta),
                budget,
                count: rec.len(),
                mean_recovery: mean(&rec),
                sd_recovery: sample_sd(&rec),
                mean_coverage: mean(&cov),
            });
        }
    }
    out
}

/// KL by system size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub model: ModelClass,
    pub n: u32,
    pub count: usize,
    pub median_kl: f64,
    pub mean_kl: f64,
}

pub fn kl_by_size(records: &[&RunRecord]) -> Vec<SizeRow> {
    let mut by: BTreeMap<(ModelClass, u32), Vec<f64>> = BTreeMap::new();
    for r in evaluated(records) {
        by.entry((r.model, r.instance.n)).or_default().push(r.kl().unwrap());
    }
    by.into_iter()
        .map(|((model, n), kls)| SizeRow { model, n, count: kls.len(), median_kl: median(&kls), mean_kl: mean(&kls) })
        .collect()
}
