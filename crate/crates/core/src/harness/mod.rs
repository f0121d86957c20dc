//! Experiment harness: build problems and optimizers from a configuration,
//! run one seeded run per seed, and write trace and summary CSV files.

pub mod config;

use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use crate::algorithms::{run_adaptive_smd, run_svramd, RunOptions, RunResult};
use crate::bregman::{DiagonalState, ProximalFamily};
use crate::error::{Error, Result};
use crate::estimate::{estimate_delta_f, estimate_sigma2_along_path, ProbeSettings};
use crate::hyper::{
    derive_hp_smd_nonconvex, derive_hp_smd_pl, derive_hp_svramd_nonconvex, derive_hp_svramd_pl,
    HyperParams, OutputRule, TheoremInputs,
};
use crate::metrics::{stationarity_of_output, TraceRecord};
use crate::problems::{
    make_least_squares, make_pl_quadratic, FiniteSumProblem, Regularizer, SigmoidRegressionSpec,
};
use crate::rng::{Purpose, RngStream};
use crate::schedule::Schedule;
use crate::vector::DenseVector;

pub use config::{
    parse_config, parse_config_str, AlgorithmKind, ExperimentConfig, FamilyKind, FamilySpec,
    HyperMode, HyperSpec, HyperValues, ProblemKind, ProblemSpec, RunSpec, ScheduleSpec, Setting,
};

/// Column header of every trace file.
pub const TRACE_HEADER: &str = "t,sfo_paper,sfo_honest,F,gx_sq,gap_opt,wall_ms";

/// Column header of summary and comparison files.
pub const SUMMARY_HEADER: &str = "label,seeds,failures,reached,median_sfo_to_eps,mean_final_gx_sq,stderr_final_gx_sq,mean_output_gx_sq,stderr_output_gx_sq,mean_final_f,t_star";

pub fn build_problem(spec: &ProblemSpec) -> Result<FiniteSumProblem> {
    let mut rng = RngStream::for_purpose(spec.data_seed, Purpose::Data);
    let problem = match spec.kind {
        ProblemKind::Sigmoid => SigmoidRegressionSpec {
            n: spec.n,
            d: spec.d,
            noise: spec.noise,
            feature_scale: spec.feature_scale,
            signal: spec.signal,
            support: spec.support,
        }
        .build(&mut rng)?,
        ProblemKind::LeastSquares => make_least_squares(&mut rng, spec.n, spec.d, spec.noise)?,
        ProblemKind::PlQuadratic => {
            let mu = spec
                .mu
                .ok_or_else(|| Error::MissingConstant("problem.mu".into()))?;
            let l = spec
                .l
                .ok_or_else(|| Error::MissingConstant("problem.l".into()))?;
            make_pl_quadratic(&mut rng, spec.n, spec.d, mu, l)?
        }
    };
    Ok(if spec.lambda > 0.0 {
        problem.with_regularizer(Regularizer::l1(spec.lambda)?)
    } else {
        problem
    })
}

/// Constants fed to the hyperparameter formulas, with where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConstants {
    pub m: f64,
    pub lipschitz: f64,
    pub sigma2: Option<f64>,
    pub delta_f: Option<f64>,
    pub mu: Option<f64>,
}

/// Everything a seeded run needs, built once per configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub problem: FiniteSumProblem,
    pub hp: HyperParams,
    pub family: ProximalFamily,
    pub constants: ResolvedConstants,
    pub options: RunOptions,
    pub algorithm: AlgorithmKind,
    /// `‖g_X‖²` threshold for SFO-to-ε.
    pub eps: f64,
}

fn theorem_batch(eps: f64, n: usize) -> usize {
    let raw = eps.powf(-2.0 / 3.0);
    let r = raw.round();
    let b = if (raw - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        raw.ceil()
    };
    (b as usize).clamp(1, n)
}

fn resolve_constants(
    config: &ExperimentConfig,
    problem: &FiniteSumProblem,
    x1: &DenseVector,
    need_mu: bool,
) -> Result<ResolvedConstants> {
    let h = &config.hyper;
    let settings = ProbeSettings::default();
    let sigma2 = match (h.sigma2, problem.constants().sigma2) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) if problem.n() >= 2 => {
            estimate_sigma2_along_path(problem, x1, config.problem.data_seed, &settings)?
        }
        _ => 0.0,
    };
    let delta_f = match h.delta_f {
        Some(d) => d,
        None => estimate_delta_f(problem, x1, &settings)?,
    };
    let mu = h.mu.or(problem.constants().mu);
    if need_mu && mu.is_none() {
        return Err(Error::MissingConstant("mu".into()));
    }
    Ok(ResolvedConstants {
        m: config.family.m,
        lipschitz: problem.constants().lipschitz,
        sigma2: Some(sigma2),
        delta_f: Some(delta_f),
        mu,
    })
}

fn apply_values(mut hp: HyperParams, v: &HyperValues, n: usize, vr: bool) -> Result<HyperParams> {
    if let Some(a) = v.alpha {
        hp.alpha = a;
    }
    if let Some(b) = v.batch {
        hp.batch = b;
        if !vr {
            hp.outer_batch = b;
        }
    }
    if let Some(big) = v.outer_batch {
        hp.outer_batch = big;
    }
    if let Some(r) = v.ratio {
        hp.outer_batch = r
            .checked_mul(hp.batch)
            .filter(|&b| b <= n)
            .ok_or_else(|| Error::malformed("hyper.ratio", format!("r * b exceeds n = {n}")))?;
    }
    if let Some(k) = v.inner_steps {
        hp.inner_steps = k;
    }
    if let Some(t) = v.rounds {
        hp.rounds = t;
    }
    if let Some(o) = v.output {
        hp.output = o;
    }
    if !vr && (hp.outer_batch != hp.batch || hp.inner_steps != 1) {
        return Err(Error::malformed("hyper", "smd uses B = b and K = 1"));
    }
    hp.validate(n)?;
    Ok(hp)
}

fn resolve_hyper(
    config: &ExperimentConfig,
    problem: &FiniteSumProblem,
    x1: &DenseVector,
) -> Result<(HyperParams, ResolvedConstants)> {
    let n = problem.n();
    let vr = config.algorithm.is_variance_reduced();
    match &config.hyper.mode {
        HyperMode::Theorem {
            setting,
            batch,
            overrides,
        } => {
            let pl = *setting == Setting::Pl;
            let c = resolve_constants(config, problem, x1, pl)?;
            let inputs = TheoremInputs {
                n,
                m: c.m,
                lipschitz: c.lipschitz,
                sigma2: c.sigma2.unwrap_or(0.0),
                eps: config.hyper.eps,
                delta_f: c.delta_f.unwrap_or(0.0),
            };
            let b = batch.unwrap_or_else(|| theorem_batch(config.hyper.eps, n));
            let mu = c.mu.unwrap_or(0.0);
            let hp = match (vr, pl) {
                (false, false) => derive_hp_smd_nonconvex(&inputs)?,
                (false, true) => derive_hp_smd_pl(&inputs, mu)?,
                (true, false) => derive_hp_svramd_nonconvex(&inputs, b)?,
                (true, true) => derive_hp_svramd_pl(&inputs, mu, b)?,
            };
            Ok((apply_values(hp, overrides, n, vr)?, c))
        }
        HyperMode::Explicit(v) => {
            let b = v
                .batch
                .ok_or_else(|| Error::MissingConstant("hyper.batch".into()))?;
            let base = HyperParams {
                alpha: v
                    .alpha
                    .ok_or_else(|| Error::MissingConstant("hyper.alpha".into()))?,
                outer_batch: if vr { n } else { b },
                batch: b,
                inner_steps: if vr {
                    ((b as f64 / 20.0).sqrt().floor() as usize).max(1)
                } else {
                    1
                },
                rounds: v
                    .rounds
                    .ok_or_else(|| Error::MissingConstant("hyper.rounds".into()))?,
                output: OutputRule::UniformSample,
            };
            let c = ResolvedConstants {
                m: config.family.m,
                lipschitz: problem.constants().lipschitz,
                sigma2: config.hyper.sigma2.or(problem.constants().sigma2),
                delta_f: config.hyper.delta_f,
                mu: config.hyper.mu.or(problem.constants().mu),
            };
            Ok((apply_values(base, v, n, vr)?, c))
        }
    }
}

fn build_family(spec: &FamilySpec, d: usize, steps_per_epoch: u64) -> Result<ProximalFamily> {
    match spec.kind {
        FamilyKind::Euclidean => Ok(ProximalFamily::Euclidean),
        FamilyKind::Scaled => {
            let schedule = match &spec.schedule {
                Some(s) => {
                    Schedule::new(s.kind.clone(), s.steps_per_epoch.unwrap_or(steps_per_epoch))?
                }
                None => Schedule::constant(),
            };
            ProximalFamily::scheduled(schedule, spec.m)
        }
        FamilyKind::Diagonal => Ok(ProximalFamily::Diagonal(DiagonalState::new(
            d,
            spec.m,
            spec.accumulation,
        )?)),
    }
}

/// Builds the problem, resolves constants and hyperparameters, and sets up
/// the family and run options.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let problem = build_problem(&config.problem)?;
    let x1 = match &config.run.x0 {
        Some(x) => DenseVector::new(x.clone())?,
        None => DenseVector::zeros(problem.dim()),
    };
    let (hp, constants) = resolve_hyper(config, &problem, &x1)?;
    let steps_per_epoch = (problem.n() as u64).div_ceil(hp.batch as u64);
    let family = build_family(&config.family, problem.dim(), steps_per_epoch)?;
    let eps = config.run_eps();
    let options = RunOptions {
        x0: config.run.x0.as_ref().map(|_| x1.clone()),
        checkpoint_every: config.run.checkpoint_every,
        step_schedule: None,
        sfo_budget: config.hyper.budget,
        stop_below: config.run.stop_at_eps.then_some(eps),
        timing: config.run.timing,
    };
    Ok(Prepared {
        problem,
        hp,
        family,
        constants,
        options,
        algorithm: config.algorithm,
        eps,
    })
}

impl ExperimentConfig {
    /// The SFO-to-ε threshold: `run.report_eps` if set, else `hyper.eps`.
    pub fn run_eps(&self) -> f64 {
        self.run.report_eps.unwrap_or(self.hyper.eps)
    }
}

/// One seeded run of a prepared experiment.
pub fn run_seed(prepared: &Prepared, seed: u64) -> Result<RunResult> {
    let family = prepared.family.clone();
    if prepared.algorithm.is_variance_reduced() {
        run_svramd(
            &prepared.problem,
            family,
            &prepared.hp,
            &prepared.options,
            seed,
        )
    } else {
        run_adaptive_smd(
            &prepared.problem,
            family,
            &prepared.hp,
            &prepared.options,
            seed,
        )
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trace as CSV text with [`TRACE_HEADER`]; reals carry 17 significant digits.
pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let gap = r.gap_opt.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            r.sfo_paper,
            r.sfo_honest,
            fmt_f64(r.f_value),
            fmt_f64(r.gx_sq),
            gap,
            fmt_f64(r.wall_ms)
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    /// The run, or the error or panic message that ended it.
    pub result: std::result::Result<RunResult, String>,
    /// `‖g_X‖²` at the returned point.
    pub output_gx_sq: Option<f64>,
    pub trace_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub seeds: usize,
    pub failures: usize,
    /// Seeds whose trace reached `‖g_X‖² ≤ ε`.
    pub reached: usize,
    /// Median over seeds of the nominal SFO at the first checkpoint
    /// with `‖g_X‖² ≤ ε`; `None` when the median seed never got there.
    pub median_sfo_to_eps: Option<f64>,
    pub mean_final_gx_sq: f64,
    pub stderr_final_gx_sq: f64,
    pub mean_output_gx_sq: f64,
    pub stderr_output_gx_sq: f64,
    pub mean_final_f: f64,
    pub t_star: Vec<u64>,
}

impl SummaryRow {
    pub fn csv_line(&self) -> String {
        let t_star: Vec<String> = self.t_star.iter().map(u64::to_string).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.label,
            self.seeds,
            self.failures,
            self.reached,
            self.median_sfo_to_eps
                .map(fmt_f64)
                .unwrap_or_else(|| "not reached".into()),
            fmt_f64(self.mean_final_gx_sq),
            fmt_f64(self.stderr_final_gx_sq),
            fmt_f64(self.mean_output_gx_sq),
            fmt_f64(self.stderr_output_gx_sq),
            fmt_f64(self.mean_final_f),
            t_star.join(";")
        )
    }
}

/// Median treating `None` as +∞; `None` if the median itself is infinite.
pub fn median_reached(values: &[Option<u64>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values
        .iter()
        .map(|x| x.map_or(f64::INFINITY, |s| s as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    let m = if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    };
    m.is_finite().then_some(m)
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn summarize(label: &str, runs: &[SeedOutcome], eps: f64) -> SummaryRow {
    let ok: Vec<(&RunResult, Option<f64>)> = runs
        .iter()
        .filter_map(|r| r.result.as_ref().ok().map(|res| (res, r.output_gx_sq)))
        .collect();
    let sfo: Vec<Option<u64>> = ok.iter().map(|(r, _)| r.sfo_to_eps(eps)).collect();
    let finals: Vec<f64> = ok
        .iter()
        .filter_map(|(r, _)| r.final_record().map(|t| t.gx_sq))
        .collect();
    let outputs: Vec<f64> = ok.iter().filter_map(|(_, g)| *g).collect();
    let final_f: Vec<f64> = ok
        .iter()
        .filter_map(|(r, _)| r.final_record().map(|t| t.f_value))
        .collect();
    let (mean_final_gx_sq, stderr_final_gx_sq) = mean_stderr(&finals);
    let (mean_output_gx_sq, stderr_output_gx_sq) = mean_stderr(&outputs);
    SummaryRow {
        label: label.to_string(),
        seeds: runs.len(),
        failures: runs.len() - ok.len(),
        reached: sfo.iter().filter(|s| s.is_some()).count(),
        median_sfo_to_eps: median_reached(&sfo),
        mean_final_gx_sq,
        stderr_final_gx_sq,
        mean_output_gx_sq,
        stderr_output_gx_sq,
        mean_final_f: mean_stderr(&final_f).0,
        t_star: ok.iter().map(|(r, _)| r.output_round).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub label: String,
    pub hp: HyperParams,
    pub constants: ResolvedConstants,
    pub runs: Vec<SeedOutcome>,
    pub summary: SummaryRow,
    pub summary_path: PathBuf,
}

impl ExperimentOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.runs.iter().all(|r| r.result.is_ok())
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

fn execute_seed(prepared: &Prepared, label: &str, out_dir: &Path, seed: u64) -> SeedOutcome {
    let run = catch_unwind(AssertUnwindSafe(|| run_seed(prepared, seed)));
    let result = match run {
        Ok(Ok(r)) => Ok(r),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(format!("panicked: {}", panic_message(p))),
    };
    let mut outcome = SeedOutcome {
        seed,
        result,
        output_gx_sq: None,
        trace_path: None,
    };
    if let Ok(r) = &outcome.result {
        outcome.output_gx_sq = stationarity_of_output(r, &prepared.problem, prepared.hp.alpha).ok();
        let path = out_dir.join(format!("{label}-seed{seed}.csv"));
        match write_file(&path, &trace_csv(&r.trace)) {
            Ok(()) => outcome.trace_path = Some(path),
            Err(e) => outcome.result = Err(e.to_string()),
        }
    }
    outcome
}

fn for_each_seed<F>(seeds: &[u64], parallelism: usize, f: F) -> Result<Vec<SeedOutcome>>
where
    F: Fn(u64) -> SeedOutcome + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism > 1 && seeds.len() > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
        return Ok(pool.install(|| seeds.par_iter().map(|&s| f(s)).collect()));
    }
    let _ = parallelism;
    Ok(seeds.iter().map(|&s| f(s)).collect())
}

/// Runs every seed of `config`, writing one trace file per seed and a
/// summary file into `run.out_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let prepared = prepare(config)?;
    run_prepared(config, &prepared)
}

/// [`run_experiment`] on an already prepared configuration.
pub fn run_prepared(config: &ExperimentConfig, prepared: &Prepared) -> Result<ExperimentOutcome> {
    let out_dir = &config.run.out_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let label = config.label.as_str();
    let runs = for_each_seed(&config.run.seeds, config.run.parallelism, |seed| {
        execute_seed(prepared, label, out_dir, seed)
    })?;
    for r in &runs {
        if let Err(e) = &r.result {
            log::error!("{label} seed {}: {e}", r.seed);
        }
    }
    let summary = summarize(label, &runs, prepared.eps);
    let summary_path = out_dir.join(format!("{label}-summary.csv"));
    write_file(
        &summary_path,
        &format!("{SUMMARY_HEADER}\n{}\n", summary.csv_line()),
    )?;
    Ok(ExperimentOutcome {
        label: config.label.clone(),
        hp: prepared.hp.clone(),
        constants: prepared.constants.clone(),
        runs,
        summary,
        summary_path,
    })
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub eps: f64,
    pub outcomes: Vec<ExperimentOutcome>,
}

impl Comparison {
    pub fn rows(&self) -> Vec<&SummaryRow> {
        self.outcomes.iter().map(|o| &o.summary).collect()
    }

    pub fn csv(&self) -> String {
        let mut out = format!("{SUMMARY_HEADER}\n");
        for r in self.rows() {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }

    /// Fixed-width text table for terminals.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<24} {:>8} {:>6} {:>6} {:>12} {:>22} {:>14}\n",
            "label", "B", "b", "K", "T", "median SFO-to-eps", "final gx_sq"
        );
        for o in &self.outcomes {
            let s = &o.summary;
            let sfo = s
                .median_sfo_to_eps
                .map(|v| format!("{v:.0}"))
                .unwrap_or_else(|| "not reached".into());
            let _ = writeln!(
                out,
                "{:<24} {:>8} {:>6} {:>6} {:>12} {:>22} {:>14.6e}",
                s.label,
                o.hp.outer_batch,
                o.hp.batch,
                o.hp.inner_steps,
                o.hp.rounds,
                sfo,
                s.mean_final_gx_sq
            );
        }
        out
    }
}

/// Runs several configurations over the same problem and reports their
/// SFO-to-ε at a common threshold.
pub fn compare(configs: &[ExperimentConfig], eps: f64) -> Result<Comparison> {
    if configs.len() < 2 {
        return Err(Error::invalid("compare needs at least two configurations"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("eps must be positive"));
    }
    if let Some(c) = configs.iter().find(|c| c.problem != configs[0].problem) {
        return Err(Error::invalid(format!(
            "configuration `{}` uses a different problem than `{}`",
            c.label, configs[0].label
        )));
    }
    let mut outcomes = Vec::with_capacity(configs.len());
    for c in configs {
        let mut c = c.clone();
        c.run.report_eps = Some(eps);
        outcomes.push(run_experiment(&c)?);
    }
    Ok(Comparison { eps, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_with_unreached() {
        assert_eq!(median_reached(&[Some(3), None, Some(1)]), Some(3.0));
        assert_eq!(median_reached(&[Some(3), None, None]), None);
        assert_eq!(median_reached(&[Some(2), Some(4)]), Some(3.0));
        assert_eq!(median_reached(&[]), None);
    }

    #[test]
    fn theorem_batch_of_eps() {
        assert_eq!(theorem_batch(1e-3, 5000), 100);
        assert_eq!(theorem_batch(1e-3, 50), 50);
    }

    #[test]
    fn csv_has_fixed_header_and_round_trips() {
        let rec = TraceRecord {
            t: 1,
            sfo_paper: 10,
            sfo_honest: 20,
            f_value: 0.1,
            gx_sq: 1.0 / 3.0,
            gap_opt: None,
            wall_ms: 0.0,
        };
        let csv = trace_csv(&[rec]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[5], "");
        assert_eq!(fields[4].parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
