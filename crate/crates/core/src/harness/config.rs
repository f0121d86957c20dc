//! Experiment configuration files.
//!
//! The format is TOML with the sections `[problem]`, `[family]`,
//! `[family.schedule]`, `[algorithm]`, `[hyper]`, `[hyper.overrides]` and
//! `[run]`. Unknown keys are rejected; every error names the offending
//! field path. The README documents each key and its default.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::bregman::{Accumulation, DEFAULT_RMSPROP_BETA};
use crate::error::{Error, Result};
use crate::hyper::OutputRule;
use crate::schedule::ScheduleKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Sigmoid,
    PlQuadratic,
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub d: usize,
    pub noise: f64,
    pub feature_scale: f64,
    pub signal: f64,
    pub support: Option<usize>,
    pub mu: Option<f64>,
    pub l: Option<f64>,
    pub lambda: f64,
    pub data_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Euclidean,
    Scaled,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    /// Defaults to `ceil(n / b)`.
    pub steps_per_epoch: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    /// Floor `m`: the additive constant of the diagonal family, the scale
    /// floor of the scaled family, 1 for Euclidean.
    pub m: f64,
    pub accumulation: Accumulation,
    pub schedule: Option<ScheduleSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    Smd,
    Svramd,
    VrAdagrad,
    VrRmsprop,
}

impl AlgorithmKind {
    pub fn is_variance_reduced(self) -> bool {
        self != AlgorithmKind::Smd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    Nonconvex,
    Pl,
}

/// Explicit values; in theorem mode they override the derived ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HyperValues {
    pub alpha: Option<f64>,
    pub outer_batch: Option<usize>,
    /// `B = ratio · b`, an alternative to `outer_batch`.
    pub ratio: Option<usize>,
    pub batch: Option<usize>,
    pub inner_steps: Option<usize>,
    pub rounds: Option<u64>,
    pub output: Option<OutputRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HyperMode {
    Theorem {
        setting: Setting,
        /// Mini-batch for the variance-reduced bounds; `ceil(eps^(-2/3))`
        /// when absent.
        batch: Option<usize>,
        overrides: HyperValues,
    },
    Explicit(HyperValues),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperSpec {
    pub mode: HyperMode,
    pub eps: f64,
    pub sigma2: Option<f64>,
    pub delta_f: Option<f64>,
    pub mu: Option<f64>,
    /// Nominal SFO budget per run.
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub seeds: Vec<u64>,
    pub checkpoint_every: u64,
    pub out_dir: PathBuf,
    pub parallelism: usize,
    pub stop_at_eps: bool,
    pub timing: bool,
    pub x0: Option<Vec<f64>>,
    /// SFO-to-ε threshold when it differs from `hyper.eps`. Set from the
    /// command line, not the file.
    pub report_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub label: String,
    pub problem: ProblemSpec,
    pub family: FamilySpec,
    pub algorithm: AlgorithmKind,
    pub hyper: HyperSpec,
    pub run: RunSpec,
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let default_label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    parse_config_str(&text, &default_label)
}

/// Parses configuration text. `default_label` is used when `run.label` is
/// absent.
pub fn parse_config_str(text: &str, default_label: &str) -> Result<ExperimentConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::malformed("<document>", e.message().to_string()))?;
    let root = Section::new(
        "",
        &root,
        &["problem", "family", "algorithm", "hyper", "run"],
    )?;

    let problem = parse_problem(&root.required_table("problem")?)?;
    let algorithm = match root.optional_table("algorithm", &["name"])? {
        Some(s) => s.required_choice(
            "name",
            &[
                ("smd", AlgorithmKind::Smd),
                ("svramd", AlgorithmKind::Svramd),
                ("vr-adagrad", AlgorithmKind::VrAdagrad),
                ("vr-rmsprop", AlgorithmKind::VrRmsprop),
            ],
        )?,
        None => return Err(Error::MissingConstant("algorithm.name".into())),
    };
    let family = parse_family(root.optional_table("family", FAMILY_KEYS)?, algorithm)?;
    let hyper = parse_hyper(&root.required_table("hyper")?)?;
    let run = parse_run(root.optional_table("run", RUN_KEYS)?, default_label)?;
    let label = run.1;
    let run = run.0;

    if let Some(x0) = &run.x0 {
        if x0.len() != problem.d {
            return Err(Error::malformed(
                "run.x0",
                format!("expected {} entries", problem.d),
            ));
        }
    }
    if let HyperMode::Theorem {
        setting: Setting::Pl,
        ..
    } = hyper.mode
    {
        let analytic_mu = problem.kind == ProblemKind::PlQuadratic && problem.lambda == 0.0;
        if hyper.mu.is_none() && !analytic_mu {
            return Err(Error::MissingConstant("mu".into()));
        }
    }
    Ok(ExperimentConfig {
        label,
        problem,
        family,
        algorithm,
        hyper,
        run,
    })
}

const PROBLEM_KEYS: &[&str] = &[
    "kind",
    "n",
    "d",
    "noise",
    "feature_scale",
    "signal",
    "support",
    "mu",
    "l",
    "lambda",
    "data_seed",
];
const FAMILY_KEYS: &[&str] = &["kind", "m", "accumulation", "beta", "schedule"];
const SCHEDULE_KEYS: &[&str] = &[
    "kind",
    "warmup_epochs",
    "decay_epochs",
    "factor",
    "period_epochs",
    "steps_per_epoch",
];
const HYPER_KEYS: &[&str] = &[
    "mode",
    "setting",
    "eps",
    "b",
    "sigma2",
    "delta_f",
    "mu",
    "budget",
    "overrides",
    "alpha",
    "outer_batch",
    "ratio",
    "batch",
    "inner_steps",
    "rounds",
    "output",
];
const VALUE_KEYS: &[&str] = &[
    "alpha",
    "outer_batch",
    "ratio",
    "batch",
    "inner_steps",
    "rounds",
    "output",
];
const RUN_KEYS: &[&str] = &[
    "seeds",
    "checkpoint_every",
    "out_dir",
    "label",
    "parallelism",
    "stop_at_eps",
    "timing",
    "x0",
];

fn parse_problem(s: &Section<'_>) -> Result<ProblemSpec> {
    s.check_keys(PROBLEM_KEYS)?;
    let kind = s.required_choice(
        "kind",
        &[
            ("sigmoid", ProblemKind::Sigmoid),
            ("pl-quadratic", ProblemKind::PlQuadratic),
            ("least-squares", ProblemKind::LeastSquares),
        ],
    )?;
    let n = s.required_count("n")?;
    let d = s.required_count("d")?;
    let (mu, l) = if kind == ProblemKind::PlQuadratic {
        let mu = s
            .optional_positive("mu")?
            .ok_or_else(|| Error::MissingConstant("problem.mu".into()))?;
        let l = s
            .optional_positive("l")?
            .ok_or_else(|| Error::MissingConstant("problem.l".into()))?;
        if mu > l {
            return Err(Error::malformed("problem.mu", "must not exceed problem.l"));
        }
        (Some(mu), Some(l))
    } else {
        for key in ["mu", "l"] {
            if s.table.contains_key(key) {
                return Err(Error::malformed(s.path(key), "only used by pl-quadratic"));
            }
        }
        (None, None)
    };
    Ok(ProblemSpec {
        kind,
        n,
        d,
        noise: s.optional_nonneg("noise")?.unwrap_or(0.1),
        feature_scale: s.optional_positive("feature_scale")?.unwrap_or(1.0),
        signal: s.optional_nonneg("signal")?.unwrap_or(4.0),
        support: s.optional_count("support")?,
        mu,
        l,
        lambda: s.optional_nonneg("lambda")?.unwrap_or(0.0),
        data_seed: s.optional_u64("data_seed")?.unwrap_or(0),
    })
}

fn parse_family(s: Option<Section<'_>>, algorithm: AlgorithmKind) -> Result<FamilySpec> {
    let forced = match algorithm {
        AlgorithmKind::VrAdagrad => Some(Accumulation::AdaGrad),
        AlgorithmKind::VrRmsprop => Some(Accumulation::Ema {
            beta: DEFAULT_RMSPROP_BETA,
        }),
        _ => None,
    };
    let Some(s) = s else {
        return Ok(FamilySpec {
            kind: if forced.is_some() {
                FamilyKind::Diagonal
            } else {
                FamilyKind::Euclidean
            },
            m: if forced.is_some() { 1e-3 } else { 1.0 },
            accumulation: forced.unwrap_or(Accumulation::AdaGrad),
            schedule: None,
        });
    };
    let kind = s.optional_choice(
        "kind",
        &[
            ("euclidean", FamilyKind::Euclidean),
            ("scaled", FamilyKind::Scaled),
            ("diagonal", FamilyKind::Diagonal),
        ],
    )?;
    let kind = match (kind, forced) {
        (None, Some(_)) => FamilyKind::Diagonal,
        (Some(k), Some(_)) if k != FamilyKind::Diagonal => {
            return Err(Error::malformed(
                s.path("kind"),
                "this algorithm uses the diagonal family",
            ))
        }
        (k, _) => k.unwrap_or(FamilyKind::Euclidean),
    };
    let m = match kind {
        FamilyKind::Euclidean => {
            if s.table.contains_key("m") {
                return Err(Error::malformed(
                    s.path("m"),
                    "the Euclidean family has m = 1",
                ));
            }
            1.0
        }
        FamilyKind::Scaled => s.optional_positive("m")?.unwrap_or(1.0),
        FamilyKind::Diagonal => s.optional_positive("m")?.unwrap_or(1e-3),
    };
    let beta = s.optional_f64("beta")?;
    if let Some(b) = beta {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::malformed(s.path("beta"), "must lie in [0, 1]"));
        }
    }
    let accumulation =
        match s.optional_choice("accumulation", &[("adagrad", 0u8), ("rmsprop", 1u8)])? {
            Some(0) => Accumulation::AdaGrad,
            Some(_) => Accumulation::Ema {
                beta: beta.unwrap_or(DEFAULT_RMSPROP_BETA),
            },
            None => match forced {
                Some(Accumulation::Ema { .. }) => Accumulation::Ema {
                    beta: beta.unwrap_or(DEFAULT_RMSPROP_BETA),
                },
                _ => Accumulation::AdaGrad,
            },
        };
    match (forced, accumulation) {
        (Some(Accumulation::AdaGrad), Accumulation::Ema { .. })
        | (Some(Accumulation::Ema { .. }), Accumulation::AdaGrad) => {
            return Err(Error::malformed(
                s.path("accumulation"),
                "conflicts with the algorithm name",
            ))
        }
        _ => {}
    }
    let schedule = match s.optional_table("schedule", SCHEDULE_KEYS)? {
        Some(t) => {
            if kind != FamilyKind::Scaled {
                return Err(Error::malformed(
                    t.path.clone(),
                    "schedules apply to the scaled family only",
                ));
            }
            Some(parse_schedule(&t)?)
        }
        None => None,
    };
    Ok(FamilySpec {
        kind,
        m,
        accumulation,
        schedule,
    })
}

fn parse_schedule(s: &Section<'_>) -> Result<ScheduleSpec> {
    let kind = match s.required_choice(
        "kind",
        &[("constant", 0u8), ("warmup-step-decay", 1), ("cosine", 2)],
    )? {
        0 => ScheduleKind::Constant,
        1 => ScheduleKind::WarmupStepDecay {
            warmup_epochs: s.optional_nonneg("warmup_epochs")?.unwrap_or(5.0),
            decay_epochs: s.optional_f64_list("decay_epochs")?.unwrap_or_default(),
            factor: s.optional_positive("factor")?.unwrap_or(0.1),
        },
        _ => ScheduleKind::CosineWarmRestart {
            period_epochs: s
                .optional_positive("period_epochs")?
                .ok_or_else(|| Error::MissingConstant(s.path("period_epochs")))?,
        },
    };
    let steps_per_epoch = s.optional_u64("steps_per_epoch")?;
    if steps_per_epoch == Some(0) {
        return Err(Error::malformed(
            s.path("steps_per_epoch"),
            "must be at least 1",
        ));
    }
    // validate shape parameters now so errors carry the section path
    crate::schedule::Schedule::new(kind.clone(), 1)
        .map_err(|e| Error::malformed(s.path.clone(), e.to_string()))?;
    Ok(ScheduleSpec {
        kind,
        steps_per_epoch,
    })
}

fn parse_values(s: &Section<'_>) -> Result<HyperValues> {
    let output = s.optional_choice(
        "output",
        &[
            ("uniform", OutputRule::UniformSample),
            ("last", OutputRule::LastIterate),
        ],
    )?;
    let v = HyperValues {
        alpha: s.optional_positive("alpha")?,
        outer_batch: s.optional_count("outer_batch")?,
        ratio: s.optional_count("ratio")?,
        batch: s.optional_count("batch")?,
        inner_steps: s.optional_count("inner_steps")?,
        rounds: s.optional_count("rounds")?.map(|r| r as u64),
        output,
    };
    if v.outer_batch.is_some() && v.ratio.is_some() {
        return Err(Error::malformed(
            s.path("ratio"),
            "give either outer_batch or ratio",
        ));
    }
    Ok(v)
}

fn parse_hyper(s: &Section<'_>) -> Result<HyperSpec> {
    s.check_keys(HYPER_KEYS)?;
    let theorem = s.required_choice("mode", &[("theorem", true), ("explicit", false)])?;
    let eps = s.optional_positive("eps")?.unwrap_or(1e-3);
    let mode = if theorem {
        for key in VALUE_KEYS {
            if s.table.contains_key(*key) {
                return Err(Error::malformed(
                    s.path(key),
                    "use [hyper.overrides] in theorem mode",
                ));
            }
        }
        let overrides = match s.optional_table("overrides", VALUE_KEYS)? {
            Some(t) => parse_values(&t)?,
            None => HyperValues::default(),
        };
        HyperMode::Theorem {
            setting: s
                .optional_choice(
                    "setting",
                    &[("nonconvex", Setting::Nonconvex), ("pl", Setting::Pl)],
                )?
                .unwrap_or(Setting::Nonconvex),
            batch: s.optional_count("b")?,
            overrides,
        }
    } else {
        for key in ["setting", "b", "overrides"] {
            if s.table.contains_key(key) {
                return Err(Error::malformed(s.path(key), "only used in theorem mode"));
            }
        }
        let v = parse_values(s)?;
        for (key, present) in [
            ("alpha", v.alpha.is_some()),
            ("batch", v.batch.is_some()),
            ("rounds", v.rounds.is_some()),
        ] {
            if !present {
                return Err(Error::MissingConstant(s.path(key)));
            }
        }
        HyperMode::Explicit(v)
    };
    Ok(HyperSpec {
        mode,
        eps,
        sigma2: s.optional_nonneg("sigma2")?,
        delta_f: s.optional_nonneg("delta_f")?,
        mu: s.optional_positive("mu")?,
        budget: s.optional_u64("budget")?,
    })
}

fn parse_run(s: Option<Section<'_>>, default_label: &str) -> Result<(RunSpec, String)> {
    let mut spec = RunSpec {
        seeds: (0..10).collect(),
        checkpoint_every: 1,
        out_dir: PathBuf::from("out"),
        parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
        stop_at_eps: false,
        timing: false,
        x0: None,
        report_eps: None,
    };
    let Some(s) = s else {
        return Ok((spec, default_label.to_string()));
    };
    if let Some(seeds) = s.optional_u64_list("seeds")? {
        if seeds.is_empty() {
            return Err(Error::malformed(
                s.path("seeds"),
                "at least one seed is required",
            ));
        }
        let distinct: BTreeSet<_> = seeds.iter().collect();
        if distinct.len() != seeds.len() {
            return Err(Error::malformed(s.path("seeds"), "seeds must be distinct"));
        }
        spec.seeds = seeds;
    }
    if let Some(c) = s.optional_count("checkpoint_every")? {
        spec.checkpoint_every = c as u64;
    }
    if let Some(p) = s.optional_count("parallelism")? {
        spec.parallelism = p;
    }
    if let Some(dir) = s.optional_str("out_dir")? {
        spec.out_dir = PathBuf::from(dir);
    }
    spec.stop_at_eps = s.optional_bool("stop_at_eps")?.unwrap_or(false);
    spec.timing = s.optional_bool("timing")?.unwrap_or(false);
    spec.x0 = s.optional_f64_list("x0")?;
    let label = s
        .optional_str("label")?
        .unwrap_or(default_label)
        .to_string();
    if label.is_empty() || label.contains(['/', '\\']) {
        return Err(Error::malformed(
            s.path("label"),
            "must be a nonempty file-name-safe string",
        ));
    }
    Ok((spec, label))
}

/// A table plus its dotted path, with typed accessors that report errors
/// against that path.
struct Section<'a> {
    path: String,
    table: &'a Table,
}

impl<'a> Section<'a> {
    fn new(path: &str, table: &'a Table, allowed: &[&str]) -> Result<Self> {
        let s = Section {
            path: path.to_string(),
            table,
        };
        s.check_keys(allowed)?;
        Ok(s)
    }

    fn path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.table.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::UnknownKey(self.path(k))),
            None => Ok(()),
        }
    }

    fn optional_table(&self, key: &str, allowed: &[&str]) -> Result<Option<Section<'a>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Table(t)) => Section::new(&self.path(key), t, allowed).map(Some),
            Some(_) => Err(Error::malformed(self.path(key), "expected a table")),
        }
    }

    fn required_table(&self, key: &str) -> Result<Section<'a>> {
        match self.table.get(key) {
            None => Err(Error::MissingConstant(self.path(key))),
            Some(Value::Table(t)) => Ok(Section {
                path: self.path(key),
                table: t,
            }),
            Some(_) => Err(Error::malformed(self.path(key), "expected a table")),
        }
    }

    fn optional_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) if f.is_finite() => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(Error::malformed(self.path(key), "expected a finite number")),
        }
    }

    fn optional_positive(&self, key: &str) -> Result<Option<f64>> {
        match self.optional_f64(key)? {
            Some(v) if v <= 0.0 => Err(Error::malformed(self.path(key), "must be positive")),
            v => Ok(v),
        }
    }

    fn optional_nonneg(&self, key: &str) -> Result<Option<f64>> {
        match self.optional_f64(key)? {
            Some(v) if v < 0.0 => Err(Error::malformed(self.path(key), "must be nonnegative")),
            v => Ok(v),
        }
    }

    fn optional_u64(&self, key: &str) -> Result<Option<u64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(Error::malformed(
                self.path(key),
                "expected a nonnegative integer",
            )),
        }
    }

    fn optional_count(&self, key: &str) -> Result<Option<usize>> {
        match self.optional_u64(key)? {
            Some(0) => Err(Error::malformed(self.path(key), "must be at least 1")),
            v => Ok(v.map(|v| v as usize)),
        }
    }

    fn required_count(&self, key: &str) -> Result<usize> {
        self.optional_count(key)?
            .ok_or_else(|| Error::MissingConstant(self.path(key)))
    }

    fn optional_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(Error::malformed(self.path(key), "expected true or false")),
        }
    }

    fn optional_str(&self, key: &str) -> Result<Option<&'a str>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(Error::malformed(self.path(key), "expected a string")),
        }
    }

    fn optional_choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<Option<T>> {
        let Some(s) = self.optional_str(key)? else {
            return Ok(None);
        };
        match options.iter().find(|(name, _)| *name == s) {
            Some((_, v)) => Ok(Some(*v)),
            None => {
                let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
                Err(Error::malformed(
                    self.path(key),
                    format!("expected one of {}", names.join(", ")),
                ))
            }
        }
    }

    fn required_choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<T> {
        self.optional_choice(key, options)?
            .ok_or_else(|| Error::MissingConstant(self.path(key)))
    }

    fn optional_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(f) if f.is_finite() => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(Error::malformed(self.path(key), "expected finite numbers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::malformed(self.path(key), "expected an array")),
        }
    }

    fn optional_u64_list(&self, key: &str) -> Result<Option<Vec<u64>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                    _ => Err(Error::malformed(
                        self.path(key),
                        "expected nonnegative integers",
                    )),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::malformed(self.path(key), "expected an array")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[problem]
kind = "sigmoid"
n = 100
d = 5

[algorithm]
name = "svramd"

[hyper]
mode = "theorem"
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config_str(MINIMAL, "min").unwrap();
        assert_eq!(c.label, "min");
        assert_eq!(c.family.kind, FamilyKind::Euclidean);
        assert_eq!(c.family.m, 1.0);
        assert_eq!(c.hyper.eps, 1e-3);
        assert_eq!(c.run.seeds, (0..10).collect::<Vec<_>>());
        assert_eq!(c.run.checkpoint_every, 1);
        assert_eq!(c.problem.lambda, 0.0);
        assert!(matches!(
            c.hyper.mode,
            HyperMode::Theorem {
                setting: Setting::Nonconvex,
                batch: None,
                ..
            }
        ));
    }

    #[test]
    fn missing_mu_in_pl_mode() {
        let text = MINIMAL.replace("mode = \"theorem\"", "mode = \"theorem\"\nsetting = \"pl\"");
        assert_eq!(
            parse_config_str(&text, "x"),
            Err(Error::MissingConstant("mu".into()))
        );
        let text = text.replace("setting = \"pl\"", "setting = \"pl\"\nmu = 0.1");
        assert!(parse_config_str(&text, "x").is_ok());
    }

    #[test]
    fn duplicate_seeds() {
        let text = format!("{MINIMAL}\n[run]\nseeds = [1, 2, 1]\n");
        match parse_config_str(&text, "x") {
            Err(Error::MalformedValue { field, .. }) => assert_eq!(field, "run.seeds"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_carry_paths() {
        let text = MINIMAL.replace("d = 5", "d = 5\ndimension = 3");
        assert_eq!(
            parse_config_str(&text, "x"),
            Err(Error::UnknownKey("problem.dimension".into()))
        );
        let text = format!("{MINIMAL}\n[hyper.overrides]\nspeed = 1\n");
        assert_eq!(
            parse_config_str(&text, "x"),
            Err(Error::UnknownKey("hyper.overrides.speed".into()))
        );
    }

    #[test]
    fn malformed_values() {
        let text = MINIMAL.replace("n = 100", "n = -4");
        assert!(matches!(
            parse_config_str(&text, "x"),
            Err(Error::MalformedValue { field, .. }) if field == "problem.n"
        ));
        let text = MINIMAL.replace("\"svramd\"", "\"adam\"");
        assert!(matches!(
            parse_config_str(&text, "x"),
            Err(Error::MalformedValue { field, .. }) if field == "algorithm.name"
        ));
    }

    #[test]
    fn explicit_mode_requires_values() {
        let text = MINIMAL.replace(
            "mode = \"theorem\"",
            "mode = \"explicit\"\nalpha = 0.5\nbatch = 10",
        );
        assert_eq!(
            parse_config_str(&text, "x"),
            Err(Error::MissingConstant("hyper.rounds".into()))
        );
    }

    #[test]
    fn schedule_only_on_scaled_family() {
        let text = format!(
            "{MINIMAL}\n[family]\nkind = \"scaled\"\nm = 0.5\n[family.schedule]\nkind = \"cosine\"\nperiod_epochs = 2\n"
        );
        let c = parse_config_str(&text, "x").unwrap();
        assert_eq!(c.family.kind, FamilyKind::Scaled);
        let bad = text
            .replace("kind = \"scaled\"", "kind = \"euclidean\"")
            .replace("m = 0.5\n", "");
        assert!(matches!(
            parse_config_str(&bad, "x"),
            Err(Error::MalformedValue { field, .. }) if field == "family.schedule"
        ));
    }

    #[test]
    fn rmsprop_algorithm_implies_diagonal_ema() {
        let text = MINIMAL.replace("\"svramd\"", "\"vr-rmsprop\"");
        let c = parse_config_str(&text, "x").unwrap();
        assert_eq!(c.family.kind, FamilyKind::Diagonal);
        assert_eq!(c.family.m, 1e-3);
        assert_eq!(
            c.family.accumulation,
            Accumulation::Ema {
                beta: DEFAULT_RMSPROP_BETA
            }
        );
    }
}
