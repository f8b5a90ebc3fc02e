//! Swap-in training losses and a full-batch Adam loop.

use alloc::vec;
use alloc::vec::Vec;

use crate::benchmark::StateSet;
use crate::error::{domain, Error, Result};
use crate::models::{maxent_objective_and_gradient, BornModel, MaxEntParams};
use crate::walsh::{fwht_in_place, walsh_synthesis, ParityBand, ProbabilityTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossKind {
    Parity,
    Mse,
    CrossEntropy,
    MaxentDual,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Parity => "parity",
            LossKind::Mse => "mse",
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::MaxentDual => "maxent_dual",
        }
    }
}

/// A loss together with the data it needs.
#[derive(Clone, Copy, Debug)]
pub struct LossSpec<'a> {
    pub kind: LossKind,
    pub band: Option<&'a ParityBand>,
    pub train_table: Option<&'a ProbabilityTable>,
    pub support: Option<&'a StateSet>,
}

impl<'a> LossSpec<'a> {
    pub fn parity(band: &'a ParityBand) -> Self {
        Self { kind: LossKind::Parity, band: Some(band), train_table: None, support: None }
    }

    pub fn mse(train_table: &'a ProbabilityTable, support: &'a StateSet) -> Self {
        Self { kind: LossKind::Mse, band: None, train_table: Some(train_table), support: Some(support) }
    }

    pub fn cross_entropy(train_table: &'a ProbabilityTable) -> Self {
        Self { kind: LossKind::CrossEntropy, band: None, train_table: Some(train_table), support: None }
    }

    pub fn maxent_dual(band: &'a ParityBand) -> Self {
        Self { kind: LossKind::MaxentDual, band: Some(band), train_table: None, support: None }
    }

    fn band(&self) -> Result<&'a ParityBand> {
        self.band.ok_or_else(|| domain(alloc::format!("{} loss needs a band", self.kind.name())))
    }

    fn train_table(&self) -> Result<&'a ProbabilityTable> {
        self.train_table
            .ok_or_else(|| domain(alloc::format!("{} loss needs the empirical table", self.kind.name())))
    }

    /// Loss value and `d loss / d q(x)` for a model table.
    pub fn evaluate(&self, table: &ProbabilityTable) -> Result<(f64, Vec<f64>)> {
        match self.kind {
            LossKind::Parity => parity_loss_and_cotangent(table, self.band()?),
            LossKind::Mse => {
                let support = self.support.ok_or_else(|| domain("mse loss needs a support"))?;
                mse_loss_and_cotangent(table, self.train_table()?, support)
            }
            LossKind::CrossEntropy => cross_entropy_and_cotangent(table, self.train_table()?),
            LossKind::MaxentDual => Err(domain("the MaxEnt dual is not a function of the table")),
        }
    }
}

fn same_width(a: &ProbabilityTable, n: u32) -> Result<()> {
    if a.n() != n {
        return Err(Error::WidthMismatch { left: a.n(), right: n });
    }
    Ok(())
}

/// Model moments at the band's masks, read off one transform of the table.
fn band_moments(table: &ProbabilityTable, band: &ParityBand) -> Vec<f64> {
    let mut spectrum = table.mass().to_vec();
    fwht_in_place(&mut spectrum).expect("power-of-two length");
    band.mask_values().map(|m| spectrum[m as usize]).collect()
}

/// `(1/K) sum_k (q_hat(alpha_k) - z_hat_k)^2`.
pub fn parity_loss(model_table: &ProbabilityTable, band: &ParityBand) -> Result<f64> {
    same_width(model_table, band.n())?;
    let moments = band_moments(model_table, band);
    let k = band.k() as f64;
    Ok(moments.iter().zip(&band.target_moments).map(|(q, z)| (q - z) * (q - z)).sum::<f64>() / k)
}

pub fn parity_loss_and_cotangent(model_table: &ProbabilityTable, band: &ParityBand) -> Result<(f64, Vec<f64>)> {
    same_width(model_table, band.n())?;
    let moments = band_moments(model_table, band);
    let k = band.k() as f64;
    let residual: Vec<f64> = moments.iter().zip(&band.target_moments).map(|(q, z)| q - z).collect();
    let value = residual.iter().map(|r| r * r).sum::<f64>() / k;
    // d/dq(x) = (2/K) sum_k r_k (-1)^(alpha_k . x)
    let cotangent = walsh_synthesis(band.n(), band.mask_values().zip(residual.iter().map(|r| 2.0 * r / k)));
    Ok((value, cotangent))
}

/// `(1/|S|) sum_{x in S} (q(x) - p_train(x))^2`.
pub fn mse_loss(model_table: &ProbabilityTable, train_table: &ProbabilityTable, support: &StateSet) -> Result<f64> {
    Ok(mse_loss_and_cotangent(model_table, train_table, support)?.0)
}

pub fn mse_loss_and_cotangent(
    model_table: &ProbabilityTable,
    train_table: &ProbabilityTable,
    support: &StateSet,
) -> Result<(f64, Vec<f64>)> {
    same_width(model_table, train_table.n())?;
    same_width(model_table, support.n())?;
    if support.is_empty() {
        return Err(domain("mse support is empty"));
    }
    let size = support.len() as f64;
    let mut cotangent = vec![0.0; model_table.mass().len()];
    let mut value = 0.0;
    for &x in support.states() {
        let d = model_table.get(x) - train_table.get(x);
        value += d * d;
        cotangent[x as usize] = 2.0 * d / size;
    }
    Ok((value / size, cotangent))
}

/// `-sum_x p_train(x) log q(x)`.
pub fn cross_entropy_loss(model_table: &ProbabilityTable, train_table: &ProbabilityTable) -> Result<f64> {
    Ok(cross_entropy_and_cotangent(model_table, train_table)?.0)
}

pub fn cross_entropy_and_cotangent(
    model_table: &ProbabilityTable,
    train_table: &ProbabilityTable,
) -> Result<(f64, Vec<f64>)> {
    same_width(model_table, train_table.n())?;
    let mut cotangent = vec![0.0; model_table.mass().len()];
    let mut value = 0.0;
    for (x, (&q, &p)) in model_table.mass().iter().zip(train_table.mass()).enumerate() {
        if p > 0.0 {
            if q <= 0.0 {
                return Err(Error::ZeroMassOnObserved(x as u32));
            }
            value -= p * libm::log(q);
            cotangent[x] = -p / q;
        }
    }
    Ok((value, cotangent))
}

/// Objective and parameter gradient of `model` under `loss`.
pub fn objective_and_gradient<M: TrainableModel>(model: &M, loss: &LossSpec<'_>) -> Result<(f64, Vec<f64>)> {
    if loss.kind == LossKind::MaxentDual {
        return model.dual_objective(loss.band()?).unwrap_or(Err(Error::UnsupportedPairing {
            model: M::ARCHITECTURE,
            loss: loss.kind.name(),
        }));
    }
    let (table, tape) = model.forward();
    let (value, cotangent) = loss.evaluate(&table)?;
    Ok((value, model.pullback(&tape, &table, &cotangent)))
}

/// A [`BornModel`] that may additionally expose its own convex dual.
pub trait TrainableModel: BornModel {
    fn dual_objective(&self, _band: &ParityBand) -> Option<Result<(f64, Vec<f64>)>> {
        None
    }
}

impl TrainableModel for crate::models::IqpParams {}
impl TrainableModel for crate::models::IsingSparseParams {}
impl TrainableModel for crate::models::IsingDenseParams {}
impl TrainableModel for MaxEntParams {
    fn dual_objective(&self, band: &ParityBand) -> Option<Result<(f64, Vec<f64>)>> {
        Some(maxent_objective_and_gradient(self, band))
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, steps: 600, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    config: OptimizerConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(dim: usize, config: OptimizerConfig) -> Self {
        Self { config, first: vec![0.0; dim], second: vec![0.0; dim], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.first.len());
        assert_eq!(grad.len(), self.first.len());
        self.t += 1;
        let OptimizerConfig { learning_rate, beta1, beta2, epsilon, .. } = self.config;
        let c1 = 1.0 - libm::pow(beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(beta2, self.t as f64);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.first.iter_mut().zip(self.second.iter_mut())) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m / c1) / (libm::sqrt(*v / c2) + epsilon);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<M> {
    pub model: M,
    /// Objective at the parameters each update was computed from.
    pub trace: Vec<f64>,
    /// Objective at the returned parameters.
    pub final_loss: f64,
}

/// Runs `opt.steps` Adam updates on the exact full-batch objective.
pub fn train<M: TrainableModel>(model: &M, loss: &LossSpec<'_>, opt: &OptimizerConfig) -> Result<TrainOutcome<M>> {
    let mut model = model.clone();
    let mut adam = Adam::new(model.params().len(), opt.clone());
    let mut trace = Vec::with_capacity(opt.steps);
    for step in 0..opt.steps {
        let (value, grad) = objective_and_gradient(&model, loss)?;
        if !value.is_finite() {
            return Err(Error::Diverged { step, what: "loss", trace });
        }
        trace.push(value);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step, what: "gradient", trace });
        }
        adam.step(model.params_mut(), &grad);
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { step, what: "parameters", trace });
        }
    }
    let (final_loss, _) = objective_and_gradient(&model, loss)?;
    if !final_loss.is_finite() {
        return Err(Error::Diverged { step: opt.steps, what: "loss", trace });
    }
    Ok(TrainOutcome { model, trace, final_loss })
}
