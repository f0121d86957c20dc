//! The mirror-descent step
//! `y* = argmin_y { α⟨v, y⟩ + α h(y) + B_ψ(y, anchor) }`
//! in closed form, plus a numerical reference solver used to validate it.

use crate::bregman::{Curvature, ProximalFamily};
use crate::error::{Error, Result};
use crate::problems::Regularizer;
use crate::vector::DenseVector;

/// Operands of one proximal step.
#[derive(Debug, Clone, Copy)]
pub struct StepRequest<'a> {
    pub alpha: f64,
    pub drift: &'a DenseVector,
    pub anchor: &'a DenseVector,
    pub family: &'a ProximalFamily,
    /// 0-based global step index selecting `ψ_tk`.
    pub step: u64,
    pub regularizer: &'a Regularizer,
}

impl StepRequest<'_> {
    fn validate(&self) -> Result<Curvature> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "step size must be positive, got {}",
                self.alpha
            )));
        }
        if self.drift.dim() != self.anchor.dim() {
            return Err(Error::invalid("drift and anchor dimensions differ"));
        }
        if let ProximalFamily::Diagonal(s) = self.family {
            if s.accumulator().len() != self.anchor.dim() {
                return Err(Error::invalid("family dimension differs from anchor"));
            }
        }
        self.family.curvature(self.step)
    }
}

/// `sign(z) · max(|z| − τ, 0)`; ties at `|z| = τ` go to zero.
#[inline]
pub fn soft_threshold(z: f64, tau: f64) -> f64 {
    if z.abs() <= tau {
        0.0
    } else {
        z.signum() * (z.abs() - tau)
    }
}

/// Closed-form minimizer. Separable per coordinate with `η_j = α / H_j`:
/// `y_j = soft(anchor_j − η_j v_j, η_j λ)`.
pub fn prox_step(req: &StepRequest<'_>) -> Result<DenseVector> {
    let h = req.validate()?;
    let lambda = req.regularizer.l1_weight();
    let out: Vec<f64> = req
        .anchor
        .iter()
        .zip(req.drift.iter())
        .enumerate()
        .map(|(j, (&a, &v))| {
            let eta = req.alpha / h.at(j);
            let z = a - eta * v;
            match req.regularizer {
                Regularizer::Zero => z,
                Regularizer::L1 { .. } => soft_threshold(z, eta * lambda),
            }
        })
        .collect();
    DenseVector::new(out).map_err(|e| Error::NonFinite(format!("prox step: {e}")))
}

/// The objective `α⟨v, y⟩ + α h(y) + B_ψ(y, anchor)` minimized by the step.
pub fn prox_objective(req: &StepRequest<'_>, y: &DenseVector) -> Result<f64> {
    req.validate()?;
    let lin = req.alpha * req.drift.dot(y)?;
    let reg = req.alpha * req.regularizer.value(y.as_slice());
    Ok(lin + reg + req.family.bregman_divergence(req.step, y, req.anchor)?)
}

/// Numerical reference for [`prox_step`]: ternary search on each separable
/// coordinate objective `φ(y) = α v y + α λ |y| + ½ H (y − a)²`.
///
/// Comparisons use the algebraically expanded difference `φ(y₁) − φ(y₂)`,
/// which avoids the cancellation that stalls a plain value comparison near
/// the minimum.
pub fn prox_step_reference(req: &StepRequest<'_>) -> Result<DenseVector> {
    let h = req.validate()?;
    let lambda = req.regularizer.l1_weight();
    let alpha = req.alpha;
    let out: Vec<f64> = req
        .anchor
        .iter()
        .zip(req.drift.iter())
        .enumerate()
        .map(|(j, (&a, &v))| {
            let hj = h.at(j);
            // φ(y1) − φ(y2)
            let diff = |y1: f64, y2: f64| {
                alpha * v * (y1 - y2)
                    + alpha * lambda * (y1.abs() - y2.abs())
                    + 0.5 * hj * (y1 - y2) * (y1 + y2 - 2.0 * a)
            };
            // optimality gives |y* − a| <= α(|v| + λ)/H
            let reach = alpha * (v.abs() + lambda) / hj;
            let pad = 1e-9 * (1.0 + a.abs() + reach);
            let (mut lo, mut hi) = (a - reach - pad, a + reach + pad);
            let tol = 1e-14 * (1.0 + a.abs() + reach);
            while hi - lo > tol {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if m1 >= m2 {
                    break;
                }
                let d = diff(m1, m2);
                if d < 0.0 {
                    hi = m2;
                } else if d > 0.0 {
                    lo = m1;
                } else {
                    lo = m1;
                    hi = m2;
                }
            }
            let mid = 0.5 * (lo + hi);
            // the l1 kink is the minimizer whenever it lies inside the final bracket
            if lambda > 0.0 && lo <= 0.0 && hi >= 0.0 {
                0.0
            } else {
                mid
            }
        })
        .collect();
    DenseVector::new(out)
}

/// The subgradient `s ∈ ∂h(y*)` certified by the closed form: `λ sign(y_j)`
/// off the kink, and the value solving the optimality condition on it.
pub fn regularizer_subgradient(req: &StepRequest<'_>, y: &DenseVector) -> Result<DenseVector> {
    let h = req.validate()?;
    let lambda = req.regularizer.l1_weight();
    let s = y
        .iter()
        .enumerate()
        .map(|(j, &yj)| match req.regularizer {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { .. } => {
                if yj != 0.0 {
                    lambda * yj.signum()
                } else {
                    let v = req.drift[j];
                    let a = req.anchor[j];
                    (-(v + h.at(j) * (yj - a) / req.alpha)).clamp(-lambda, lambda)
                }
            }
        })
        .collect();
    DenseVector::new(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::DiagonalState;
    use crate::rng::RngStream;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn euclidean_zero_is_gradient_step() {
        let x = v(&[1.0, -2.0, 0.5]);
        let g = v(&[0.25, 0.5, -1.0]);
        let req = StepRequest {
            alpha: 1.0,
            drift: &g,
            anchor: &x,
            family: &ProximalFamily::Euclidean,
            step: 0,
            regularizer: &Regularizer::Zero,
        };
        assert_eq!(prox_step(&req).unwrap(), x.sub(&g).unwrap());
    }

    #[test]
    fn soft_threshold_kills_small_entries() {
        let x = v(&[0.1, -0.2, 0.3]);
        let zero = DenseVector::zeros(3);
        let reg = Regularizer::l1(0.3).unwrap();
        let req = StepRequest {
            alpha: 1.0,
            drift: &zero,
            anchor: &x,
            family: &ProximalFamily::Euclidean,
            step: 0,
            regularizer: &reg,
        };
        assert_eq!(prox_step(&req).unwrap(), zero);
        assert_eq!(soft_threshold(0.3, 0.3), 0.0);
        assert_eq!(soft_threshold(-1.0, 0.25), -0.75);
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let x = v(&[1.0]);
        for alpha in [0.0, -1.0, f64::NAN] {
            let req = StepRequest {
                alpha,
                drift: &x,
                anchor: &x,
                family: &ProximalFamily::Euclidean,
                step: 0,
                regularizer: &Regularizer::Zero,
            };
            assert!(matches!(prox_step(&req), Err(Error::InvalidArgument(_))));
        }
    }

    fn random_family(rng: &mut RngStream, d: usize) -> ProximalFamily {
        match rng.below(3) {
            0 => ProximalFamily::Euclidean,
            1 => ProximalFamily::explicit_scales(vec![0.1 + 5.0 * rng.uniform()]).unwrap(),
            _ => {
                let mut s = DiagonalState::adagrad(d, 1e-3 + rng.uniform()).unwrap();
                let g = DenseVector::new((0..d).map(|_| rng.normal()).collect()).unwrap();
                s.update(&g).unwrap();
                ProximalFamily::Diagonal(s)
            }
        }
    }

    #[test]
    fn closed_form_matches_reference() {
        let mut rng = RngStream::new(3, 3);
        for _ in 0..500 {
            let d = 1 + rng.below(10);
            let fam = random_family(&mut rng, d);
            let reg = if rng.below(2) == 0 {
                Regularizer::Zero
            } else {
                Regularizer::l1(rng.uniform()).unwrap()
            };
            let x = DenseVector::new((0..d).map(|_| 2.0 * rng.normal()).collect()).unwrap();
            let g = DenseVector::new((0..d).map(|_| rng.normal()).collect()).unwrap();
            let req = StepRequest {
                alpha: 0.01 + 2.0 * rng.uniform(),
                drift: &g,
                anchor: &x,
                family: &fam,
                step: 0,
                regularizer: &reg,
            };
            let y = prox_step(&req).unwrap();
            let r = prox_step_reference(&req).unwrap();
            assert!(y.max_abs_diff(&r).unwrap() <= 1e-8);
            let oy = prox_objective(&req, &y).unwrap();
            let or = prox_objective(&req, &r).unwrap();
            assert!(or <= oy + 1e-12 * (1.0 + oy.abs()));
        }
    }

    #[test]
    fn reference_monotone_in_anchor() {
        let reg = Regularizer::l1(0.4).unwrap();
        let g = v(&[0.3]);
        let mut prev = f64::NEG_INFINITY;
        for i in -200..=200 {
            let a = v(&[i as f64 * 0.01]);
            let req = StepRequest {
                alpha: 0.7,
                drift: &g,
                anchor: &a,
                family: &ProximalFamily::Euclidean,
                step: 0,
                regularizer: &reg,
            };
            let y = prox_step_reference(&req).unwrap()[0];
            assert!(y >= prev - 1e-12);
            prev = y;
        }
    }

    #[test]
    fn subgradient_certifies_optimality() {
        let mut rng = RngStream::new(4, 4);
        for _ in 0..300 {
            let d = 1 + rng.below(6);
            let fam = random_family(&mut rng, d);
            let reg = Regularizer::l1(0.5 * rng.uniform()).unwrap();
            let x = DenseVector::new((0..d).map(|_| rng.normal()).collect()).unwrap();
            let g = DenseVector::new((0..d).map(|_| rng.normal()).collect()).unwrap();
            let req = StepRequest {
                alpha: 0.5,
                drift: &g,
                anchor: &x,
                family: &fam,
                step: 0,
                regularizer: &reg,
            };
            let y = prox_step(&req).unwrap();
            let s = regularizer_subgradient(&req, &y).unwrap();
            let lambda = reg.l1_weight();
            assert!(s.iter().all(|si| si.abs() <= lambda + 1e-15));
            // v + (∇ψ(y) − ∇ψ(x))/α + s = 0 coordinatewise
            let gy = fam.grad_psi(0, &y).unwrap();
            let gx = fam.grad_psi(0, &x).unwrap();
            for j in 0..d {
                let r = g[j] + (gy[j] - gx[j]) / 0.5 + s[j];
                assert!(r.abs() < 1e-9, "residual {r}");
            }
        }
    }
}
