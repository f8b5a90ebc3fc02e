use std::sync::Mutex;

use anyhow::Context;
use paritybench_core::{make_instance, BenchmarkConfig, ModelClass};
use rayon::prelude::*;
use serde::Serialize;

use crate::record::{record_key, RunRecord};
use crate::runner::run_model;
use crate::settings::SweepSpec;
use crate::store::Store;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SweepReport {
    pub total: usize,
    /// Already in the store before the sweep started.
    pub skipped: usize,
    pub computed: usize,
    /// Computed records that carry a failure.
    pub failed: usize,
}

/// Runs every pending (instance, model) task of `spec` on `workers` threads,
/// appending each record as soon as it finishes.
///
/// Records already in the store are skipped, so an interrupted sweep resumes
/// where it stopped. Every task is single-threaded and seeded from its
/// instance alone, so the final record set does not depend on `workers` or on
/// completion order.
pub fn run_sweep(
    spec: &SweepSpec,
    workers: usize,
    store: &mut Store,
    on_record: &(dyn Fn(&RunRecord) + Sync),
) -> anyhow::Result<SweepReport> {
    let mut report = SweepReport::default();
    let mut pending: Vec<(BenchmarkConfig, Vec<ModelClass>)> = Vec::new();
    for config in spec.instances() {
        let models: Vec<ModelClass> = spec
            .models
            .iter()
            .copied()
            .filter(|&m| !store.contains(&record_key(&config, m, &spec.train, &spec.budgets)))
            .collect();
        report.total += spec.models.len();
        report.skipped += spec.models.len() - models.len();
        if !models.is_empty() {
            pending.push((config, models));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let shared = Mutex::new((store, 0usize, 0usize));
    pool.install(|| {
        pending.par_iter().try_for_each(|(config, models)| -> anyhow::Result<()> {
            let instance = make_instance(config).with_context(|| format!("building instance {config:?}"))?;
            for &model in models {
                let record = run_model(&instance, model, &spec.train, &spec.budgets);
                on_record(&record);
                let mut guard = shared.lock().expect("store lock");
                let failed = record.failure.is_some();
                if guard.0.append(record)? {
                    guard.1 += 1;
                    guard.2 += usize::from(failed);
                }
            }
            Ok(())
        })
    })?;
    let (_, computed, failed) = shared.into_inner().expect("store lock");
    report.computed = computed;
    report.failed = failed;
    Ok(report)
}
