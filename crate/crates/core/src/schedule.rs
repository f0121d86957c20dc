//! Step-size schedules realized as time-varying proximal scales.
//!
//! A schedule is a shape `s(step) ∈ (0, 1]`. Used through a scaled-Euclidean
//! proximal function `ψ = (c/2)‖x‖²` it sets `c = m / s(step) ≥ m`, so the
//! effective step `α / c` never exceeds `α / m`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    Constant,
    /// Linear ramp from ~0 over the warmup window, then multiply by `factor`
    /// at each decay epoch.
    WarmupStepDecay {
        warmup_epochs: f64,
        decay_epochs: Vec<f64>,
        factor: f64,
    },
    /// `½(1 + cos(π j / P))` where `j` is the step within the current period
    /// of `P` steps; restarts at the top each period.
    CosineWarmRestart {
        period_epochs: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    steps_per_epoch: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self::constant()
    }
}

impl Schedule {
    pub fn constant() -> Self {
        Self {
            kind: ScheduleKind::Constant,
            steps_per_epoch: 1,
        }
    }

    pub fn new(kind: ScheduleKind, steps_per_epoch: u64) -> Result<Self> {
        if steps_per_epoch == 0 {
            return Err(Error::invalid("steps_per_epoch must be at least 1"));
        }
        match &kind {
            ScheduleKind::Constant => {}
            ScheduleKind::WarmupStepDecay {
                warmup_epochs,
                decay_epochs,
                factor,
            } => {
                if !(*warmup_epochs >= 0.0 && warmup_epochs.is_finite()) {
                    return Err(Error::invalid("warmup_epochs must be finite and >= 0"));
                }
                if !(*factor > 0.0 && *factor <= 1.0) {
                    return Err(Error::invalid("decay factor must lie in (0, 1]"));
                }
                if decay_epochs.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
                    return Err(Error::invalid("decay epochs must be finite and >= 0"));
                }
            }
            ScheduleKind::CosineWarmRestart { period_epochs } => {
                if !(*period_epochs > 0.0 && period_epochs.is_finite()) {
                    return Err(Error::invalid("cosine period must be positive"));
                }
            }
        }
        Ok(Self {
            kind,
            steps_per_epoch,
        })
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn steps_per_epoch(&self) -> u64 {
        self.steps_per_epoch
    }

    pub fn is_constant(&self) -> bool {
        self.kind == ScheduleKind::Constant
    }

    /// Shape `s(step) ∈ (0, 1]` at the 0-based global step index.
    pub fn shape(&self, step: u64) -> f64 {
        let spe = self.steps_per_epoch as f64;
        match &self.kind {
            ScheduleKind::Constant => 1.0,
            ScheduleKind::WarmupStepDecay {
                warmup_epochs,
                decay_epochs,
                factor,
            } => {
                let warmup_steps = warmup_epochs * spe;
                let done = (step + 1) as f64;
                let ramp = if done < warmup_steps {
                    done / warmup_steps
                } else {
                    1.0
                };
                let epoch = step as f64 / spe;
                let drops = decay_epochs.iter().filter(|&&e| epoch >= e).count();
                ramp * factor.powi(drops as i32)
            }
            ScheduleKind::CosineWarmRestart { period_epochs } => {
                let period = (period_epochs * spe).ceil().max(1.0) as u64;
                let j = (step % period) as f64;
                0.5 * (1.0 + (PI * j / period as f64).cos())
            }
        }
    }

    /// `c_t = floor / s(step)`: the proximal scale that realizes this
    /// schedule with a fixed step `α`, always at least `floor`.
    pub fn effective_scale(&self, step: u64, floor: f64) -> f64 {
        floor / self.shape(step)
    }
}

/// Free-function form of [`Schedule::effective_scale`].
pub fn schedule_effective_scale(schedule: &Schedule, step: u64, floor: f64) -> f64 {
    schedule.effective_scale(step, floor)
}
