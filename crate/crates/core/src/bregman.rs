//! Proximal families `ψ_tk` and their Bregman divergences.
//!
//! Every supported family is a diagonal quadratic `ψ(x) = ½⟨x, H x⟩`, with
//! `H` the identity (Euclidean), `c_t I` (scaled Euclidean, a time-varying
//! step size), or `diag(√acc + m)` driven by an AdaGrad/RMSProp accumulator.

use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::vector::DenseVector;

/// Default EMA coefficient for the RMSProp accumulator.
pub const DEFAULT_RMSPROP_BETA: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Accumulation {
    /// `acc += v ⊙ v`
    AdaGrad,
    /// `acc ← β acc + (1 − β) v ⊙ v`
    Ema { beta: f64 },
}

/// Accumulator behind an adaptive diagonal proximal function.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalState {
    accumulator: Vec<f64>,
    m: f64,
    rule: Accumulation,
}

impl DiagonalState {
    pub fn new(dim: usize, m: f64, rule: Accumulation) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::invalid(
                "strong-convexity constant m must be positive",
            ));
        }
        if let Accumulation::Ema { beta } = rule {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::invalid("EMA beta must lie in (0, 1]"));
            }
        }
        Ok(Self {
            accumulator: vec![0.0; dim],
            m,
            rule,
        })
    }

    pub fn adagrad(dim: usize, m: f64) -> Result<Self> {
        Self::new(dim, m, Accumulation::AdaGrad)
    }

    pub fn rmsprop(dim: usize, m: f64, beta: f64) -> Result<Self> {
        Self::new(dim, m, Accumulation::Ema { beta })
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.accumulator
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn rule(&self) -> Accumulation {
        self.rule
    }

    /// Folds `v ⊙ v` into the accumulator.
    pub fn update(&mut self, v: &DenseVector) -> Result<()> {
        if v.dim() != self.accumulator.len() {
            return Err(Error::invalid("accumulator/drift dimension mismatch"));
        }
        match self.rule {
            Accumulation::AdaGrad => {
                for (a, vi) in self.accumulator.iter_mut().zip(v.iter()) {
                    *a += vi * vi;
                }
            }
            Accumulation::Ema { beta } => {
                for (a, vi) in self.accumulator.iter_mut().zip(v.iter()) {
                    *a = beta * *a + (1.0 - beta) * vi * vi;
                }
            }
        }
        if self.accumulator.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("diagonal accumulator overflowed".into()));
        }
        Ok(())
    }

    pub fn updated(&self, v: &DenseVector) -> Result<Self> {
        let mut next = self.clone();
        next.update(v)?;
        Ok(next)
    }

    /// Effective diagonal `H_ii = √acc_i + m`.
    pub fn diagonal(&self) -> Vec<f64> {
        self.accumulator.iter().map(|a| a.sqrt() + self.m).collect()
    }
}

/// Where a scaled-Euclidean family takes its scale `c_t` from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleSource {
    /// `c = floor / s(step)` for a schedule shape `s`.
    Schedule { schedule: Schedule, floor: f64 },
    /// `c_step` read from a list; the last entry repeats past the end.
    Explicit(Vec<f64>),
}

/// The curvature `H` of a family at one step.
#[derive(Debug, Clone, PartialEq)]
pub enum Curvature {
    Uniform(f64),
    Diagonal(Vec<f64>),
}

impl Curvature {
    #[inline]
    pub fn at(&self, j: usize) -> f64 {
        match self {
            Curvature::Uniform(c) => *c,
            Curvature::Diagonal(h) => h[j],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProximalFamily {
    /// `ψ = ½‖x‖²`
    Euclidean,
    /// `ψ = (c_t/2)‖x‖²`
    ScaledEuclidean(ScaleSource),
    /// `ψ = ½⟨x, H x⟩`, `H = diag(√acc + m)`
    Diagonal(DiagonalState),
}

impl ProximalFamily {
    pub fn scheduled(schedule: Schedule, floor: f64) -> Result<Self> {
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::invalid("scale floor must be positive"));
        }
        Ok(ProximalFamily::ScaledEuclidean(ScaleSource::Schedule {
            schedule,
            floor,
        }))
    }

    pub fn explicit_scales(scales: Vec<f64>) -> Result<Self> {
        if scales.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("scales must be positive and finite"));
        }
        Ok(ProximalFamily::ScaledEuclidean(ScaleSource::Explicit(
            scales,
        )))
    }

    pub fn adagrad(dim: usize, m: f64) -> Result<Self> {
        Ok(ProximalFamily::Diagonal(DiagonalState::adagrad(dim, m)?))
    }

    pub fn rmsprop(dim: usize, m: f64, beta: f64) -> Result<Self> {
        Ok(ProximalFamily::Diagonal(DiagonalState::rmsprop(
            dim, m, beta,
        )?))
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, ProximalFamily::Diagonal(_))
    }

    /// `H` at the 0-based global step index.
    pub fn curvature(&self, step: u64) -> Result<Curvature> {
        Ok(match self {
            ProximalFamily::Euclidean => Curvature::Uniform(1.0),
            ProximalFamily::ScaledEuclidean(ScaleSource::Schedule { schedule, floor }) => {
                Curvature::Uniform(schedule.effective_scale(step, *floor))
            }
            ProximalFamily::ScaledEuclidean(ScaleSource::Explicit(scales)) => {
                let c = scales
                    .get(step as usize)
                    .or(scales.last())
                    .ok_or_else(|| Error::invalid("empty scale schedule"))?;
                Curvature::Uniform(*c)
            }
            ProximalFamily::Diagonal(state) => Curvature::Diagonal(state.diagonal()),
        })
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if let ProximalFamily::Diagonal(s) = self {
            if s.accumulator.len() != d {
                return Err(Error::invalid("family dimension mismatch"));
            }
        }
        Ok(())
    }

    /// `ψ(x) = ½⟨x, H x⟩`
    pub fn psi(&self, step: u64, x: &DenseVector) -> Result<f64> {
        self.check_dim(x.dim())?;
        let h = self.curvature(step)?;
        Ok(0.5
            * x.iter()
                .enumerate()
                .map(|(j, v)| h.at(j) * v * v)
                .sum::<f64>())
    }

    /// `∇ψ(x) = H x`
    pub fn grad_psi(&self, step: u64, x: &DenseVector) -> Result<DenseVector> {
        self.check_dim(x.dim())?;
        let h = self.curvature(step)?;
        DenseVector::new(x.iter().enumerate().map(|(j, v)| h.at(j) * v).collect())
    }

    /// `B_ψ(x, y) = ψ(x) − ψ(y) − ⟨∇ψ(y), x − y⟩ = ½ (x−y)ᵀ H (x−y)`.
    pub fn bregman_divergence(&self, step: u64, x: &DenseVector, y: &DenseVector) -> Result<f64> {
        if x.dim() != y.dim() {
            return Err(Error::invalid("bregman divergence: dimension mismatch"));
        }
        self.check_dim(x.dim())?;
        let h = self.curvature(step)?;
        Ok(0.5
            * x.iter()
                .zip(y.iter())
                .enumerate()
                .map(|(j, (a, b))| h.at(j) * (a - b) * (a - b))
                .sum::<f64>())
    }

    /// Uniform lower bound `m` on the strong convexity of every `ψ_tk`.
    pub fn strong_convexity_floor(&self) -> Result<f64> {
        match self {
            ProximalFamily::Euclidean => Ok(1.0),
            ProximalFamily::ScaledEuclidean(ScaleSource::Schedule { floor, .. }) => Ok(*floor),
            ProximalFamily::ScaledEuclidean(ScaleSource::Explicit(scales)) => {
                if scales.is_empty() {
                    return Err(Error::invalid("empty scale schedule"));
                }
                Ok(scales.iter().copied().fold(f64::INFINITY, f64::min))
            }
            ProximalFamily::Diagonal(s) => Ok(s.m),
        }
    }

    /// Feeds the current drift to adaptive families; no-op otherwise.
    pub fn observe(&mut self, v: &DenseVector) -> Result<()> {
        match self {
            ProximalFamily::Diagonal(state) => state.update(v),
            _ => Ok(()),
        }
    }
}

pub fn bregman_divergence(
    family: &ProximalFamily,
    step: u64,
    x: &DenseVector,
    y: &DenseVector,
) -> Result<f64> {
    family.bregman_divergence(step, x, y)
}

pub fn strong_convexity_floor(family: &ProximalFamily) -> Result<f64> {
    family.strong_convexity_floor()
}

pub fn update_diagonal_state(state: &DiagonalState, v: &DenseVector) -> Result<DiagonalState> {
    state.updated(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::schedule::ScheduleKind;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    fn literal_divergence(f: &ProximalFamily, step: u64, x: &DenseVector, y: &DenseVector) -> f64 {
        let gy = f.grad_psi(step, y).unwrap();
        f.psi(step, x).unwrap() - f.psi(step, y).unwrap() - gy.dot(&x.sub(y).unwrap()).unwrap()
    }

    #[test]
    fn euclidean_is_half_squared_distance() {
        let mut rng = RngStream::new(1, 1);
        let f = ProximalFamily::Euclidean;
        for _ in 0..100 {
            let x = v(&[rng.normal(), rng.normal(), rng.normal()]);
            let y = v(&[rng.normal(), rng.normal(), rng.normal()]);
            let b = f.bregman_divergence(0, &x, &y).unwrap();
            assert!((b - 0.5 * x.sub(&y).unwrap().norm2_sq()).abs() < 1e-14);
            assert!((b - literal_divergence(&f, 0, &x, &y)).abs() < 1e-12);
            assert_eq!(f.bregman_divergence(0, &x, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn diagonal_hand_value() {
        // H = diag(4, 9) from accumulator (16, 64) with m = 0 is not allowed,
        // so build H = √acc + m with acc = (3.5², 8.5²), m = 0.5.
        let mut s = DiagonalState::adagrad(2, 0.5).unwrap();
        s.update(&v(&[3.5, 8.5])).unwrap();
        assert_eq!(s.diagonal(), vec![4.0, 9.0]);
        let f = ProximalFamily::Diagonal(s);
        let b = f
            .bregman_divergence(0, &v(&[1.0, 1.0]), &v(&[0.0, 0.0]))
            .unwrap();
        assert_eq!(b, 6.5);
    }

    #[test]
    fn adagrad_update_hand_value() {
        let m = 1e-3;
        let s = DiagonalState::adagrad(2, m).unwrap();
        let s = update_diagonal_state(&s, &v(&[3.0, 4.0])).unwrap();
        assert_eq!(s.diagonal(), vec![3.0 + m, 4.0 + m]);
    }

    #[test]
    fn rmsprop_beta_one_is_frozen() {
        let s = DiagonalState::rmsprop(2, 1e-3, 1.0).unwrap();
        let s = s.updated(&v(&[3.0, 4.0])).unwrap();
        assert_eq!(s.accumulator(), &[0.0, 0.0]);
        let r = DiagonalState::rmsprop(2, 1e-3, 0.5).unwrap();
        let r = r.updated(&v(&[2.0, 4.0])).unwrap();
        assert_eq!(r.accumulator(), &[2.0, 8.0]);
    }

    #[test]
    fn adagrad_is_order_independent() {
        let s = DiagonalState::adagrad(3, 0.1).unwrap();
        let a = v(&[0.5, 2.0, -1.0]);
        let b = v(&[0.25, -3.0, 4.0]);
        let ab = s.updated(&a).unwrap().updated(&b).unwrap();
        let ba = s.updated(&b).unwrap().updated(&a).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn floors() {
        assert_eq!(
            ProximalFamily::Euclidean.strong_convexity_floor().unwrap(),
            1.0
        );
        assert_eq!(
            ProximalFamily::adagrad(3, 1e-3)
                .unwrap()
                .strong_convexity_floor()
                .unwrap(),
            1e-3
        );
        let f = ProximalFamily::explicit_scales(vec![3.0, 2.0, 5.0]).unwrap();
        assert_eq!(f.strong_convexity_floor().unwrap(), 2.0);
        let empty = ProximalFamily::ScaledEuclidean(ScaleSource::Explicit(vec![]));
        assert!(empty.strong_convexity_floor().is_err());
        let sched =
            Schedule::new(ScheduleKind::CosineWarmRestart { period_epochs: 3.0 }, 7).unwrap();
        let f = ProximalFamily::scheduled(sched, 0.5).unwrap();
        assert_eq!(f.strong_convexity_floor().unwrap(), 0.5);
    }

    #[test]
    fn explicit_scales_repeat_last() {
        let f = ProximalFamily::explicit_scales(vec![3.0, 2.0]).unwrap();
        assert_eq!(f.curvature(0).unwrap(), Curvature::Uniform(3.0));
        assert_eq!(f.curvature(1).unwrap(), Curvature::Uniform(2.0));
        assert_eq!(f.curvature(9).unwrap(), Curvature::Uniform(2.0));
    }

    #[test]
    fn strong_convexity_floor_on_random_pairs() {
        let mut rng = RngStream::new(2, 2);
        let d = 6;
        let mut adagrad = DiagonalState::adagrad(d, 1e-3).unwrap();
        let mut rms = DiagonalState::rmsprop(d, 1e-3, DEFAULT_RMSPROP_BETA).unwrap();
        for _ in 0..100 {
            let g = DenseVector::new((0..d).map(|_| rng.normal() * 0.01).collect()).unwrap();
            adagrad.update(&g).unwrap();
            rms.update(&g).unwrap();
        }
        let sched = Schedule::new(
            ScheduleKind::WarmupStepDecay {
                warmup_epochs: 2.0,
                decay_epochs: vec![4.0],
                factor: 0.1,
            },
            10,
        )
        .unwrap();
        let families = [
            ProximalFamily::Euclidean,
            ProximalFamily::scheduled(sched, 0.7).unwrap(),
            ProximalFamily::Diagonal(adagrad),
            ProximalFamily::Diagonal(rms),
        ];
        for f in &families {
            let m = f.strong_convexity_floor().unwrap();
            for _ in 0..1000 {
                let x = DenseVector::new((0..d).map(|_| rng.normal()).collect()).unwrap();
                let y = DenseVector::new((0..d).map(|_| rng.normal()).collect()).unwrap();
                let step = rng.below(100) as u64;
                let b = f.bregman_divergence(step, &x, &y).unwrap();
                assert!(b >= 0.5 * m * x.sub(&y).unwrap().norm2_sq() - 1e-12);
                if let Curvature::Diagonal(h) = f.curvature(step).unwrap() {
                    assert!(h.iter().all(|&hi| hi >= m));
                }
            }
        }
    }
}
