//! Empirical stand-ins for the constants the hyperparameter formulas need
//! when a problem has no closed form for them.

use crate::algorithms::{run_adaptive_smd, RunOptions};
use crate::bregman::ProximalFamily;
use crate::error::Result;
use crate::hyper::{HyperParams, OutputRule};
use crate::problems::{estimate_sigma2, FiniteSumProblem};
use crate::proxstep::{prox_step, StepRequest};
use crate::rng::{sample_without_replacement, Purpose, RngStream};
use crate::vector::DenseVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSettings {
    /// Mini-batch of the warm SGD trajectory.
    pub batch: usize,
    /// Length of the warm trajectory.
    pub steps: u64,
    /// Number of trajectory points at which the variance is evaluated.
    pub points: usize,
    /// Proximal gradient steps of the reference run for `F*`.
    pub reference_steps: u64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            batch: 32,
            steps: 400,
            points: 8,
            reference_steps: 2000,
        }
    }
}

/// Points visited by a seeded mini-batch proximal SGD run from `x1`.
pub fn probe_points(
    problem: &FiniteSumProblem,
    x1: &DenseVector,
    seed: u64,
    settings: &ProbeSettings,
) -> Result<Vec<DenseVector>> {
    let n = problem.n();
    let b = settings.batch.clamp(1, n);
    let alpha = 1.0 / problem.constants().lipschitz;
    let every = (settings.steps / settings.points.max(1) as u64).max(1);
    let mut rng = RngStream::for_purpose(seed, Purpose::Probe);
    let mut x = x1.clone();
    let mut out = vec![x.clone()];
    for s in 1..=settings.steps {
        let batch = sample_without_replacement(&mut rng, n, b)?;
        let g = problem.mean_gradient(&batch, &x)?;
        x = prox_step(&StepRequest {
            alpha,
            drift: &g,
            anchor: &x,
            family: &ProximalFamily::Euclidean,
            step: 0,
            regularizer: problem.regularizer(),
        })?;
        if s % every == 0 {
            out.push(x.clone());
        }
    }
    Ok(out)
}

/// `σ²` as the largest exact population variance along a probe trajectory.
pub fn estimate_sigma2_along_path(
    problem: &FiniteSumProblem,
    x1: &DenseVector,
    seed: u64,
    settings: &ProbeSettings,
) -> Result<f64> {
    estimate_sigma2(problem, &probe_points(problem, x1, seed, settings)?)
}

/// Lowest objective seen along a full-batch proximal gradient run from `x1`
/// with step `1/L`.
pub fn reference_best_value(
    problem: &FiniteSumProblem,
    x1: &DenseVector,
    steps: u64,
) -> Result<f64> {
    let hp = HyperParams {
        alpha: 1.0 / problem.constants().lipschitz,
        outer_batch: problem.n(),
        batch: problem.n(),
        inner_steps: 1,
        rounds: steps.max(1),
        output: OutputRule::LastIterate,
    };
    let opts = RunOptions {
        x0: Some(x1.clone()),
        checkpoint_every: (steps / 50).max(1),
        ..RunOptions::default()
    };
    let result = run_adaptive_smd(problem, ProximalFamily::Euclidean, &hp, &opts, 0)?;
    let best = result
        .trace
        .iter()
        .map(|r| r.f_value)
        .fold(f64::INFINITY, f64::min);
    Ok(best.min(problem.value(&result.last)?))
}

/// `Δ_F = F(x1) − F*`, exact when `F*` is known and otherwise measured
/// against the reference run.
pub fn estimate_delta_f(
    problem: &FiniteSumProblem,
    x1: &DenseVector,
    settings: &ProbeSettings,
) -> Result<f64> {
    if let Some(d) = problem.delta_f(x1)? {
        return Ok(d);
    }
    let f1 = problem.value(x1)?;
    Ok((f1 - reference_best_value(problem, x1, settings.reference_steps)?).max(0.0))
}
