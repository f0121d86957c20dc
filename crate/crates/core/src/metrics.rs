//! Evaluation-only quantities: the generalized gradient, P-L diagnostics,
//! the SFO ledger and per-checkpoint trace records.
//!
//! Nothing in here charges the ledger; metrics are computed with the
//! uncounted full-gradient oracle on frozen copies of the proximal state.

use crate::algorithms::RunResult;
use crate::bregman::ProximalFamily;
use crate::error::{Error, Result};
use crate::problems::FiniteSumProblem;
use crate::proxstep::{prox_step, StepRequest};
use crate::vector::DenseVector;

/// Stochastic-first-order-oracle counts for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundCost {
    pub paper: u64,
    pub honest: u64,
}

/// Component-gradient evaluation counts.
///
/// `paper` is the nominal count of the complexity bounds: `B` per round
/// plus `b` per inner step. `honest` counts every component gradient
/// actually evaluated, so the variance-reduced estimator costs `2b` per
/// inner step.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SfoLedger {
    paper: u64,
    honest: u64,
    rounds: Vec<RoundCost>,
    round_start: RoundCost,
}

impl SfoLedger {
    pub fn paper(&self) -> u64 {
        self.paper
    }

    pub fn honest(&self) -> u64 {
        self.honest
    }

    pub fn charge_honest(&mut self, count: u64) {
        self.honest += count;
    }

    pub fn charge_paper(&mut self, count: u64) {
        self.paper += count;
    }

    /// Closes the current round and records its cost.
    pub fn close_round(&mut self) {
        self.rounds.push(RoundCost {
            paper: self.paper - self.round_start.paper,
            honest: self.honest - self.round_start.honest,
        });
        self.round_start = RoundCost {
            paper: self.paper,
            honest: self.honest,
        };
    }

    pub fn rounds(&self) -> &[RoundCost] {
        &self.rounds
    }
}

/// One checkpoint of a run, describing iterate `x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Outer round index of the iterate (`x_1` is the initial point).
    pub t: u64,
    pub sfo_paper: u64,
    pub sfo_honest: u64,
    pub f_value: f64,
    /// `‖g_{X,t}‖²`
    pub gx_sq: f64,
    /// `F(x_t) − F*` when `F*` is known.
    pub gap_opt: Option<f64>,
    pub wall_ms: f64,
}

/// `g_X = (x − x⁺)/α` with `x⁺` the full-gradient proximal step from `x`.
pub fn generalized_gradient(
    problem: &FiniteSumProblem,
    family: &ProximalFamily,
    step: u64,
    alpha: f64,
    x: &DenseVector,
) -> Result<DenseVector> {
    let grad = problem.full_gradient(x)?;
    let next = prox_step(&StepRequest {
        alpha,
        drift: &grad,
        anchor: x,
        family,
        step,
        regularizer: problem.regularizer(),
    })?;
    let diff: Vec<f64> = x
        .iter()
        .zip(next.iter())
        .map(|(a, b)| (a - b) / alpha)
        .collect();
    DenseVector::new(diff)
}

/// Both sides of the generalized P-L inequality `‖g_X‖² ≥ 2μ(F(x) − F*)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlGapCertificate {
    pub lhs: f64,
    pub rhs: f64,
}

impl PlGapCertificate {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs >= self.rhs - slack
    }
}

pub fn pl_gap_certificate(
    problem: &FiniteSumProblem,
    family: &ProximalFamily,
    step: u64,
    alpha: f64,
    x: &DenseVector,
) -> Result<PlGapCertificate> {
    let mu = problem
        .constants()
        .mu
        .ok_or_else(|| Error::Unsupported("problem has no P-L constant".into()))?;
    let gap = problem
        .optimality_gap(x)?
        .ok_or_else(|| Error::Unsupported("F* unknown for this problem".into()))?;
    let lhs = generalized_gradient(problem, family, step, alpha, x)?.norm2_sq();
    Ok(PlGapCertificate {
        lhs,
        rhs: 2.0 * mu * gap,
    })
}

/// Smallest `‖g_X‖² / (2(F − F*))` over the given points: an empirical
/// generalized P-L constant. Points at the optimum are skipped.
pub fn empirical_pl_constant(
    problem: &FiniteSumProblem,
    family: &ProximalFamily,
    alpha: f64,
    points: &[DenseVector],
) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for x in points {
        let Some(gap) = problem.optimality_gap(x)? else {
            return Err(Error::Unsupported("F* unknown for this problem".into()));
        };
        if gap <= 0.0 {
            continue;
        }
        let g = generalized_gradient(problem, family, 0, alpha, x)?.norm2_sq();
        let ratio = g / (2.0 * gap);
        best = Some(best.map_or(ratio, |b: f64| b.min(ratio)));
    }
    Ok(best)
}

/// `‖g_X‖²` at the run's returned point, against the proximal state frozen
/// at the moment that point was produced.
pub fn stationarity_of_output(
    result: &RunResult,
    problem: &FiniteSumProblem,
    alpha: f64,
) -> Result<f64> {
    Ok(generalized_gradient(
        problem,
        &result.output_family,
        result.output_step,
        alpha,
        &result.output,
    )?
    .norm2_sq())
}
