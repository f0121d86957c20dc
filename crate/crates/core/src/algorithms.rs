//! Adaptive stochastic mirror descent and its variance-reduced variant.
//!
//! Both optimizers share one driver. Randomness is drawn from per-purpose
//! streams of the run seed, so the batch used at `(t, k)` depends only on
//! the seed and its position.

use std::time::Instant;

use crate::bregman::ProximalFamily;
use crate::error::{Error, Result};
use crate::hyper::{HyperParams, OutputRule};
use crate::metrics::{generalized_gradient, SfoLedger, TraceRecord};
use crate::problems::FiniteSumProblem;
use crate::proxstep::{prox_step, StepRequest};
use crate::rng::{sample_without_replacement, IndexBatch, Purpose, RngStream};
use crate::schedule::Schedule;
use crate::vector::DenseVector;

/// A per-step size `α / schedule.effective_scale(step, floor)` applied on
/// top of the family. Equivalent to folding the schedule into a
/// scaled-Euclidean family.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    pub schedule: Schedule,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Initial point; zero when absent.
    pub x0: Option<DenseVector>,
    /// Record a trace entry every this many outer rounds (the initial and
    /// final iterates are always recorded).
    pub checkpoint_every: u64,
    pub step_schedule: Option<StepSchedule>,
    /// Stop before a round whose nominal cost would exceed this.
    pub sfo_budget: Option<u64>,
    /// Stop at the first checkpoint with `‖g_X‖² ≤ eps`.
    pub stop_below: Option<f64>,
    /// Fill `wall_ms` in trace records; otherwise it stays 0 so that traces
    /// are byte-reproducible.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            x0: None,
            checkpoint_every: 1,
            step_schedule: None,
            sfo_budget: None,
            stop_below: None,
            timing: false,
        }
    }
}

/// What one inner step saw, handed to observers before the step is taken.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub t: u64,
    pub k: u64,
    /// 0-based global step index.
    pub step: u64,
    /// Current inner iterate `y_k`.
    pub iterate: &'a DenseVector,
    /// `g_t`, the anchor batch gradient (the drift itself for SMD).
    pub anchor_gradient: &'a DenseVector,
    /// The drift `v_k` passed to the proximal step.
    pub drift: &'a DenseVector,
    /// Family state after observing the drift.
    pub family: &'a ProximalFamily,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    /// The returned point, selected per the output rule.
    pub output: DenseVector,
    /// `t*`, the 1-based outer index of `output` (`rounds_run + 1` for the
    /// last iterate).
    pub output_round: u64,
    /// Family state frozen when `output` was produced.
    pub output_family: ProximalFamily,
    pub output_step: u64,
    /// `x_{T+1}` of the executed rounds.
    pub last: DenseVector,
    pub rounds_run: u64,
    pub trace: Vec<TraceRecord>,
    pub ledger: SfoLedger,
}

impl RunResult {
    /// Nominal SFO at the first checkpoint with `‖g_X‖² ≤ eps`.
    pub fn sfo_to_eps(&self, eps: f64) -> Option<u64> {
        self.trace
            .iter()
            .find(|r| r.gx_sq <= eps)
            .map(|r| r.sfo_paper)
    }

    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.trace.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Smd,
    Svramd,
}

fn draw_batch(n: usize, size: usize, seed: u64, purpose: Purpose) -> Result<IndexBatch> {
    if size == n {
        return Ok(IndexBatch::full(n));
    }
    let mut rng = RngStream::for_purpose(seed, purpose);
    sample_without_replacement(&mut rng, n, size)
}

/// `v = (a − c) + g`, skipping the arithmetic when two terms are bitwise
/// equal so that `v_1 = g_t` and full-batch runs stay exact.
fn combine_drift(a: &DenseVector, c: &DenseVector, g: &DenseVector) -> Result<DenseVector> {
    let v = a
        .iter()
        .zip(c.iter())
        .zip(g.iter())
        .map(|((&a, &c), &g)| {
            if a == c {
                g
            } else if c == g {
                a
            } else {
                (a - c) + g
            }
        })
        .collect();
    DenseVector::new(v).map_err(|e| Error::NonFinite(format!("drift: {e}")))
}

struct Driver<'a> {
    problem: &'a FiniteSumProblem,
    hp: &'a HyperParams,
    opts: &'a RunOptions,
    seed: u64,
    started: Instant,
    trace: Vec<TraceRecord>,
}

impl Driver<'_> {
    fn alpha_at(&self, step: u64) -> f64 {
        match &self.opts.step_schedule {
            None => self.hp.alpha,
            Some(s) => self.hp.alpha / s.schedule.effective_scale(step, s.floor),
        }
    }

    /// Records `x_t`; returns whether the stopping threshold was reached.
    fn record(
        &mut self,
        t: u64,
        x: &DenseVector,
        family: &ProximalFamily,
        step: u64,
        ledger: &SfoLedger,
    ) -> Result<bool> {
        let f_value = self.problem.value(x)?;
        let gx_sq = generalized_gradient(self.problem, family, step, self.hp.alpha, x)?.norm2_sq();
        let gap_opt = self.problem.optimality_gap(x)?;
        let wall_ms = if self.opts.timing {
            self.started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        self.trace.push(TraceRecord {
            t,
            sfo_paper: ledger.paper(),
            sfo_honest: ledger.honest(),
            f_value,
            gx_sq,
            gap_opt,
            wall_ms,
        });
        Ok(self.opts.stop_below.is_some_and(|eps| gx_sq <= eps))
    }
}

fn run(
    method: Method,
    problem: &FiniteSumProblem,
    mut family: ProximalFamily,
    hp: &HyperParams,
    opts: &RunOptions,
    seed: u64,
    observer: &mut dyn FnMut(&StepEvent<'_>),
) -> Result<RunResult> {
    let n = problem.n();
    hp.validate(n)?;
    if method == Method::Smd && (hp.inner_steps != 1 || hp.outer_batch != hp.batch) {
        return Err(Error::invalid("SMD takes K = 1 and B = b"));
    }
    if family.strong_convexity_floor()? <= 0.0 {
        return Err(Error::invalid("family floor must be positive"));
    }
    if opts.checkpoint_every == 0 {
        return Err(Error::invalid("checkpoint_every must be at least 1"));
    }
    if let Some(s) = &opts.step_schedule {
        if !(s.floor > 0.0 && s.floor.is_finite()) {
            return Err(Error::invalid("step schedule floor must be positive"));
        }
    }
    let mut x = match &opts.x0 {
        Some(x0) if x0.dim() != problem.dim() => {
            return Err(Error::invalid("x0 dimension differs from the problem"))
        }
        Some(x0) => x0.clone(),
        None => DenseVector::zeros(problem.dim()),
    };
    let mut ledger = SfoLedger::default();
    let mut driver = Driver {
        problem,
        hp,
        opts,
        seed,
        started: Instant::now(),
        trace: Vec::new(),
    };
    let mut select = RngStream::for_purpose(seed, Purpose::OutputSelect);
    let mut chosen: Option<(u64, DenseVector, ProximalFamily, u64)> = None;
    let mut step: u64 = 0;
    let round_cost = hp.paper_cost_per_round(method == Method::Svramd);
    let mut stopped = driver.record(1, &x, &family, step, &ledger)?;
    let mut rounds_run = 0;

    for t in 1..=hp.rounds {
        if stopped {
            break;
        }
        if let Some(budget) = opts.sfo_budget {
            if ledger.paper() + round_cost > budget {
                break;
            }
        }
        if hp.output == OutputRule::UniformSample && (t == 1 || select.below(t as usize) == 0) {
            chosen = Some((t, x.clone(), family.clone(), step));
        }

        let outer = draw_batch(n, hp.outer_batch, driver.seed, Purpose::OuterBatch { t })?;
        let g = problem.batch_gradient(&outer, &x, &mut ledger)?;
        ledger.charge_paper(outer.len() as u64);

        let mut y = x.clone();
        for k in 1..=hp.inner_steps as u64 {
            let v = match method {
                Method::Smd => g.clone(),
                Method::Svramd => {
                    let inner = draw_batch(n, hp.batch, driver.seed, Purpose::InnerBatch { t, k })?;
                    let a = problem.batch_gradient(&inner, &y, &mut ledger)?;
                    let c = problem.batch_gradient(&inner, &x, &mut ledger)?;
                    ledger.charge_paper(inner.len() as u64);
                    combine_drift(&a, &c, &g)?
                }
            };
            family.observe(&v)?;
            let alpha = driver.alpha_at(step);
            observer(&StepEvent {
                t,
                k,
                step,
                iterate: &y,
                anchor_gradient: &g,
                drift: &v,
                family: &family,
                alpha,
            });
            y = prox_step(&StepRequest {
                alpha,
                drift: &v,
                anchor: &y,
                family: &family,
                step,
                regularizer: problem.regularizer(),
            })?;
            step += 1;
        }
        x = y;
        ledger.close_round();
        rounds_run = t;

        if t % opts.checkpoint_every == 0 || t == hp.rounds {
            stopped = driver.record(t + 1, &x, &family, step, &ledger)?;
        }
    }
    // make sure the last executed iterate is on the trace
    if driver.trace.last().map(|r| r.t) != Some(rounds_run + 1) {
        driver.record(rounds_run + 1, &x, &family, step, &ledger)?;
    }

    let (output_round, output, output_family, output_step) = match (hp.output, chosen) {
        (OutputRule::UniformSample, Some(c)) => c,
        _ => (rounds_run + 1, x.clone(), family.clone(), step),
    };
    Ok(RunResult {
        seed,
        output,
        output_round,
        output_family,
        output_step,
        last: x,
        rounds_run,
        trace: driver.trace,
        ledger,
    })
}

/// Adaptive stochastic mirror descent: one mini-batch gradient per step.
pub fn run_adaptive_smd(
    problem: &FiniteSumProblem,
    family: ProximalFamily,
    hp: &HyperParams,
    opts: &RunOptions,
    seed: u64,
) -> Result<RunResult> {
    run(Method::Smd, problem, family, hp, opts, seed, &mut |_| {})
}

/// Variance-reduced adaptive mirror descent.
pub fn run_svramd(
    problem: &FiniteSumProblem,
    family: ProximalFamily,
    hp: &HyperParams,
    opts: &RunOptions,
    seed: u64,
) -> Result<RunResult> {
    run(Method::Svramd, problem, family, hp, opts, seed, &mut |_| {})
}

/// [`run_adaptive_smd`] with a callback invoked before every step.
pub fn run_adaptive_smd_observed(
    problem: &FiniteSumProblem,
    family: ProximalFamily,
    hp: &HyperParams,
    opts: &RunOptions,
    seed: u64,
    observer: &mut dyn FnMut(&StepEvent<'_>),
) -> Result<RunResult> {
    run(Method::Smd, problem, family, hp, opts, seed, observer)
}

/// [`run_svramd`] with a callback invoked before every inner step.
pub fn run_svramd_observed(
    problem: &FiniteSumProblem,
    family: ProximalFamily,
    hp: &HyperParams,
    opts: &RunOptions,
    seed: u64,
    observer: &mut dyn FnMut(&StepEvent<'_>),
) -> Result<RunResult> {
    run(Method::Svramd, problem, family, hp, opts, seed, observer)
}

/// Variance-reduced AdaGrad: the diagonal family with a summed accumulator.
pub fn run_vr_adagrad(
    problem: &FiniteSumProblem,
    hp: &HyperParams,
    opts: &RunOptions,
    seed: u64,
    m: f64,
) -> Result<RunResult> {
    let family = ProximalFamily::adagrad(problem.dim(), m)?;
    run_svramd(problem, family, hp, opts, seed)
}

/// Variance-reduced RMSProp: the diagonal family with an EMA accumulator.
pub fn run_vr_rmsprop(
    problem: &FiniteSumProblem,
    hp: &HyperParams,
    opts: &RunOptions,
    seed: u64,
    m: f64,
    beta: f64,
) -> Result<RunResult> {
    let family = ProximalFamily::rmsprop(problem.dim(), m, beta)?;
    run_svramd(problem, family, hp, opts, seed)
}
