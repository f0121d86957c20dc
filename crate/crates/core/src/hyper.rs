//! Hyperparameters and their closed-form derivation from problem constants.

use crate::error::{Error, Result};

/// Which iterate a run returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputRule {
    /// `x_{t*}` with `t*` uniform over the executed outer rounds.
    UniformSample,
    /// `x_{T+1}`.
    LastIterate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub alpha: f64,
    /// Outer batch `B`. Equal to `batch` for the non-variance-reduced method.
    pub outer_batch: usize,
    /// Mini-batch `b`.
    pub batch: usize,
    /// Inner steps `K` per outer round. Always 1 for the non-variance-reduced method.
    pub inner_steps: usize,
    /// Outer rounds `T`.
    pub rounds: u64,
    pub output: OutputRule,
}

impl HyperParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.batch == 0 || self.batch > self.outer_batch || self.outer_batch > n {
            return Err(Error::invalid(format!(
                "need 1 <= b <= B <= n, got b={} B={} n={n}",
                self.batch, self.outer_batch
            )));
        }
        if self.inner_steps == 0 || self.rounds == 0 {
            return Err(Error::invalid("K and T must be at least 1"));
        }
        Ok(())
    }

    /// `r = B / b`.
    pub fn batch_ratio(&self) -> f64 {
        self.outer_batch as f64 / self.batch as f64
    }

    /// Nominal cost of one outer round.
    pub fn paper_cost_per_round(&self, variance_reduced: bool) -> u64 {
        if variance_reduced {
            (self.outer_batch + self.inner_steps * self.batch) as u64
        } else {
            self.batch as u64
        }
    }
}

/// Constants consumed by every complexity bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremInputs {
    pub n: usize,
    /// Strong-convexity floor of the proximal family.
    pub m: f64,
    pub lipschitz: f64,
    pub sigma2: f64,
    pub eps: f64,
    /// `F(x_1) − F*`, or a stand-in for it.
    pub delta_f: f64,
}

impl TheoremInputs {
    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        positive("m", self.m)?;
        positive("L", self.lipschitz)?;
        positive("eps", self.eps)?;
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid("sigma2 must be finite and >= 0"));
        }
        if !self.delta_f.is_finite() {
            return Err(Error::invalid("delta_f must be finite"));
        }
        Ok(())
    }

    fn alpha(&self) -> f64 {
        self.m / self.lipschitz
    }
}

/// Ceiling that ignores floating-point residue just above an integer, so
/// that e.g. `12 / 0.01` maps to 1200.
fn ceil_tol(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

fn batch_from(n: usize, raw: f64) -> usize {
    let c = ceil_tol(raw);
    if c >= n as f64 {
        n
    } else {
        (c as usize).max(1)
    }
}

fn rounds_from(raw: f64) -> u64 {
    let c = ceil_tol(raw);
    if c.is_nan() || c < 1.0 {
        1
    } else if c >= u64::MAX as f64 {
        u64::MAX
    } else {
        c as u64
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("mu must be positive, got {mu}")))
    }
}

fn check_b(n: usize, b: usize) -> Result<()> {
    if b == 0 || b > n {
        Err(Error::invalid(format!(
            "mini-batch must lie in [1, n], got {b}"
        )))
    } else {
        Ok(())
    }
}

/// `γ = 1 − μm²/(2L)` for the non-variance-reduced method.
pub fn gamma_smd(m: f64, lipschitz: f64, mu: f64) -> f64 {
    1.0 - mu * m * m / (2.0 * lipschitz)
}

/// `γ = 1 − m²μ/(4L)` for the variance-reduced method.
pub fn gamma_svramd(m: f64, lipschitz: f64, mu: f64) -> f64 {
    1.0 - m * m * mu / (4.0 * lipschitz)
}

fn log_rounds(delta_f: f64, eps: f64, per_round: f64) -> u64 {
    if delta_f <= 0.0 || per_round <= 0.0 {
        return 1;
    }
    rounds_from((2.0 * delta_f / eps).ln() / per_round)
}

pub fn derive_hp_smd_nonconvex(c: &TheoremInputs) -> Result<HyperParams> {
    c.validate()?;
    let m2 = c.m * c.m;
    let b = batch_from(c.n, 12.0 * c.sigma2 / (m2 * c.eps));
    Ok(HyperParams {
        alpha: c.alpha(),
        outer_batch: b,
        batch: b,
        inner_steps: 1,
        rounds: rounds_from(8.0 * c.delta_f * c.lipschitz / (m2 * c.eps)),
        output: OutputRule::UniformSample,
    })
}

pub fn derive_hp_smd_pl(c: &TheoremInputs, mu: f64) -> Result<HyperParams> {
    c.validate()?;
    check_mu(mu)?;
    let m2 = c.m * c.m;
    let b = batch_from(c.n, 2.0 * (1.0 + m2) * c.sigma2 / (c.eps * m2 * mu));
    let gamma = gamma_smd(c.m, c.lipschitz, mu);
    Ok(HyperParams {
        alpha: c.alpha(),
        outer_batch: b,
        batch: b,
        inner_steps: 1,
        rounds: log_rounds(c.delta_f, c.eps, -gamma.ln()),
        output: OutputRule::LastIterate,
    })
}

/// `B` is raised to `b` when the formula yields a smaller outer batch.
pub fn derive_hp_svramd_nonconvex(c: &TheoremInputs, b: usize) -> Result<HyperParams> {
    c.validate()?;
    check_b(c.n, b)?;
    let m2 = c.m * c.m;
    let big_b = batch_from(c.n, 20.0 * c.sigma2 / (m2 * c.eps)).max(b);
    let k = ((b as f64 / 20.0).sqrt().floor() as usize).max(1);
    Ok(HyperParams {
        alpha: c.alpha(),
        outer_batch: big_b,
        batch: b,
        inner_steps: k,
        rounds: rounds_from(16.0 * c.delta_f * c.lipschitz / (m2 * c.eps * k as f64)),
        output: OutputRule::UniformSample,
    })
}

/// `B` is raised to `b` when the formula yields a smaller outer batch.
pub fn derive_hp_svramd_pl(c: &TheoremInputs, mu: f64, b: usize) -> Result<HyperParams> {
    c.validate()?;
    check_mu(mu)?;
    check_b(c.n, b)?;
    let m2 = c.m * c.m;
    let condition = c.lipschitz / (m2 * mu);
    if condition < (c.n as f64).sqrt() {
        log::warn!(
            "L/(m^2 mu) = {condition:.3} is below sqrt(n) = {:.3}; variance reduction is not expected to help",
            (c.n as f64).sqrt()
        );
    }
    let big_b = batch_from(c.n, 10.0 * c.sigma2 / (c.eps * m2 * mu)).max(b);
    let k = ((b as f64 / 32.0).sqrt().floor() as usize).max(1);
    let gamma = gamma_svramd(c.m, c.lipschitz, mu);
    Ok(HyperParams {
        alpha: c.alpha(),
        outer_batch: big_b,
        batch: b,
        inner_steps: k,
        rounds: log_rounds(c.delta_f, c.eps, k as f64 * -gamma.ln()),
        output: OutputRule::LastIterate,
    })
}
