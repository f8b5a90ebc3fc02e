use std::time::Instant;

use anyhow::Context;
use paritybench_core::rng::{stream, Stream};
use paritybench_core::{
    coverage_report, forward_kl, kl_decomposition, spectral_proxy, train, Instance, IqpParams,
    IsingDenseParams, IsingSparseParams, LossSpec, MaxEntParams, ModelClass, ModelParams,
    ProbabilityTable, TrainableModel,
};

use crate::instance::{band_checksum, train_checksum};
use crate::record::{record_key, MetricsRecord, RunRecord};
use crate::settings::TrainSettings;
use crate::SOFTWARE_VERSION;

/// What a model run hands to evaluation.
struct Fitted {
    table: ProbabilityTable,
    params: Option<ModelParams>,
    trace: Vec<f64>,
    final_loss: Option<f64>,
    negative_mass_clipped: Option<f64>,
}

struct Failed {
    message: String,
    trace: Vec<f64>,
}

fn fit<M: TrainableModel>(
    init: M,
    loss: &LossSpec<'_>,
    settings: &TrainSettings,
    wrap: fn(M) -> ModelParams,
) -> Result<Fitted, Failed> {
    match train(&init, loss, &settings.optimizer) {
        Ok(out) => Ok(Fitted {
            table: out.model.distribution(),
            params: Some(wrap(out.model)),
            trace: out.trace,
            final_loss: Some(out.final_loss),
            negative_mass_clipped: None,
        }),
        Err(paritybench_core::Error::Diverged { step, what, trace }) => {
            Err(Failed { message: format!("non-finite {what} at step {step}"), trace })
        }
        Err(e) => Err(Failed { message: e.to_string(), trace: Vec::new() }),
    }
}

fn untrained(table: ProbabilityTable) -> Fitted {
    Fitted { table, params: None, trace: Vec::new(), final_loss: None, negative_mass_clipped: None }
}

fn fit_model(inst: &Instance, class: ModelClass, settings: &TrainSettings) -> Result<Fitted, Failed> {
    let n = inst.n();
    let key = inst.config.key();
    let setup = |e: paritybench_core::Error| Failed { message: e.to_string(), trace: Vec::new() };
    match class {
        ModelClass::IqpParity | ModelClass::IqpMse => {
            // Both IQP variants start from the same angles on a given instance.
            let init = IqpParams::ring_random(n, settings.iqp_init_std, &mut stream(key, Stream::IqpInit))
                .map_err(setup)?;
            let table = inst.train_table();
            let loss = match class {
                ModelClass::IqpParity => LossSpec::parity(&inst.band),
                _ => LossSpec::mse(&table, &inst.support),
            };
            fit(init, &loss, settings, ModelParams::Iqp)
        }
        ModelClass::IsingSparse => {
            let init = IsingSparseParams::zeros(n).map_err(setup)?;
            fit(init, &LossSpec::parity(&inst.band), settings, ModelParams::IsingSparse)
        }
        ModelClass::IsingDense => {
            let init = IsingDenseParams::zeros(n).map_err(setup)?;
            let table = inst.train_table();
            fit(init, &LossSpec::cross_entropy(&table), settings, ModelParams::IsingDense)
        }
        ModelClass::Maxent => {
            let init = MaxEntParams::zeros(&inst.band);
            fit(init, &LossSpec::maxent_dual(&inst.band), settings, ModelParams::MaxEnt)
        }
        ModelClass::SpectralProxy => {
            let proxy = spectral_proxy(&inst.band, None).map_err(setup)?;
            let mut fitted = untrained(proxy.projected);
            fitted.negative_mass_clipped = Some(proxy.negative_mass_clipped);
            Ok(fitted)
        }
        ModelClass::Uniform => Ok(untrained(ProbabilityTable::uniform(n).map_err(setup)?)),
        ModelClass::UniformSupport => {
            Ok(untrained(ProbabilityTable::uniform_on(n, inst.support.states()).map_err(setup)?))
        }
    }
}

/// KL, its decomposition and coverage of `table` on `inst`.
pub fn evaluate(inst: &Instance, table: &ProbabilityTable, budgets: &[u64]) -> anyhow::Result<MetricsRecord> {
    let kl = forward_kl(&inst.target, table, &inst.support)?;
    let breakdown = kl_decomposition(&inst.target, table, &inst.observed, &inst.support)?;
    let coverage = coverage_report(table, &inst.unseen_elite, budgets).context("coverage")?;
    Ok(MetricsRecord {
        kl: kl.value,
        kl_clamped: kl.clamped,
        breakdown,
        support_mass: table.mass_on(inst.support.states()),
        coverage,
        negative_mass_clipped: None,
    })
}

/// Trains (where applicable) and evaluates one model on one instance.
pub fn run_model(inst: &Instance, class: ModelClass, settings: &TrainSettings, budgets: &[u64]) -> RunRecord {
    let start = Instant::now();
    let mut record = RunRecord {
        key: record_key(&inst.config, class, settings, budgets),
        config_version: crate::CONFIG_VERSION,
        instance: inst.config.clone(),
        model: class,
        train_settings: settings.clone(),
        train_checksum: train_checksum(inst),
        band_checksum: band_checksum(inst),
        params: None,
        loss_trace: Vec::new(),
        final_loss: None,
        metrics: None,
        failure: None,
        wall_clock_secs: 0.0,
        software_version: SOFTWARE_VERSION.to_string(),
    };
    match fit_model(inst, class, settings) {
        Ok(fitted) => {
            record.params = fitted.params;
            record.loss_trace = fitted.trace;
            record.final_loss = fitted.final_loss;
            match evaluate(inst, &fitted.table, budgets) {
                Ok(mut metrics) => {
                    metrics.negative_mass_clipped = fitted.negative_mass_clipped;
                    record.metrics = Some(metrics);
                }
                Err(e) => record.failure = Some(format!("evaluation: {e:#}")),
            }
        }
        Err(failed) => {
            record.loss_trace = failed.trace;
            record.failure = Some(failed.message);
        }
    }
    record.wall_clock_secs = start.elapsed().as_secs_f64();
    record
}

/// Runs every requested model on the shared instance, in the given order.
pub fn run_instance(inst: &Instance, models: &[ModelClass], settings: &TrainSettings, budgets: &[u64]) -> Vec<RunRecord> {
    models.iter().map(|&m| run_model(inst, m, settings, budgets)).collect()
}
