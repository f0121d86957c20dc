//! Executable property checks: the prox oracle cross-check, the batch
//! variance bounds, the mirror-step inequalities, the strong-convexity floor
//! and the exactness of the variance-reduced estimator.
//!
//! Each check returns a [`CheckOutcome`] instead of panicking so the CLI can
//! report all of them.

use std::time::Instant;

use crate::algorithms::{run_adaptive_smd, run_svramd_observed, RunOptions};
use crate::bregman::{DiagonalState, ProximalFamily};
use crate::error::Result;
use crate::hyper::{HyperParams, OutputRule};
use crate::metrics::generalized_gradient;
use crate::problems::{
    make_pl_quadratic, sigmoid_regression_from_data, FiniteSumProblem, Regularizer,
};
use crate::proxstep::{prox_step, prox_step_reference, StepRequest};
use crate::rng::{all_subsets, Purpose, RngStream};
use crate::schedule::{Schedule, ScheduleKind};
use crate::vector::DenseVector;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn outcome(name: &'static str, started: Instant, body: Result<(bool, String)>) -> CheckOutcome {
    let (passed, detail) = match body {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckOutcome {
        name,
        passed,
        detail,
        seconds: started.elapsed().as_secs_f64(),
    }
}

fn normal_vec(rng: &mut RngStream, d: usize, scale: f64) -> DenseVector {
    DenseVector::new((0..d).map(|_| scale * rng.normal()).collect()).expect("finite draws")
}

/// One of the three supported families with random parameters. Diagonal
/// states are evolved by a few random drifts.
fn random_family(rng: &mut RngStream, d: usize, kind: usize) -> Result<ProximalFamily> {
    Ok(match kind % 3 {
        0 => ProximalFamily::Euclidean,
        1 => {
            let schedule = Schedule::new(
                ScheduleKind::CosineWarmRestart {
                    period_epochs: 1.0 + 4.0 * rng.uniform(),
                },
                1 + rng.below(20) as u64,
            )?;
            ProximalFamily::scheduled(schedule, 0.05 + 3.0 * rng.uniform())?
        }
        _ => {
            let m = 0.05 + rng.uniform();
            let mut s = if rng.below(2) == 0 {
                DiagonalState::adagrad(d, m)?
            } else {
                DiagonalState::rmsprop(d, m, 0.5 + 0.49 * rng.uniform())?
            };
            for _ in 0..rng.below(5) {
                s.update(&normal_vec(rng, d, 1.0))?;
            }
            ProximalFamily::Diagonal(s)
        }
    })
}

fn random_regularizer(rng: &mut RngStream) -> Result<Regularizer> {
    Ok(if rng.below(2) == 0 {
        Regularizer::Zero
    } else {
        Regularizer::l1(rng.uniform())?
    })
}

/// Closed-form prox against the ternary-search reference.
pub fn check_prox_oracle(instances: usize, seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let body = (|| {
        let mut rng = RngStream::for_purpose(seed, Purpose::Aux(1));
        let mut worst = 0.0f64;
        for i in 0..instances {
            let d = 1 + rng.below(10);
            let family = random_family(&mut rng, d, i)?;
            let reg = random_regularizer(&mut rng)?;
            let anchor = normal_vec(&mut rng, d, 2.0);
            let drift = normal_vec(&mut rng, d, 1.0);
            let req = StepRequest {
                alpha: 0.01 + 2.0 * rng.uniform(),
                drift: &drift,
                anchor: &anchor,
                family: &family,
                step: rng.below(100) as u64,
                regularizer: &reg,
            };
            let err = prox_step(&req)?.max_abs_diff(&prox_step_reference(&req)?)?;
            worst = worst.max(err);
        }
        Ok((
            worst <= 1e-8,
            format!("{instances} instances, max abs error {worst:.3e}"),
        ))
    })();
    outcome("prox oracle equivalence", started, body)
}

/// Small random sigmoid-regression problem with `n` components.
fn tiny_sigmoid(rng: &mut RngStream, n: usize, d: usize) -> Result<FiniteSumProblem> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.normal()).collect())
        .collect();
    let targets = (0..n).map(|_| rng.uniform()).collect();
    sigmoid_regression_from_data(rows, targets)
}

fn tiny_problems(rng: &mut RngStream) -> Result<Vec<FiniteSumProblem>> {
    let mut out = Vec::new();
    for n in 2..=6 {
        out.push(tiny_sigmoid(rng, n, 3)?);
        out.push(make_pl_quadratic(rng, n, 3, 0.1, 2.0)?);
    }
    Ok(out)
}

/// Exact subset-enumeration check of the mini-batch and variance-reduced
/// estimator variance bounds.
pub fn check_variance_bounds(seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let body = (|| {
        let mut rng = RngStream::for_purpose(seed, Purpose::Aux(2));
        let slack = 1e-12;
        let mut cases = 0;
        let mut violations = 0;
        for p in tiny_problems(&mut rng)? {
            let n = p.n();
            let l = p.constants().lipschitz;
            for _ in 0..3 {
                let x = normal_vec(&mut rng, p.dim(), 1.0);
                let y = x.axpy(0.5, &normal_vec(&mut rng, p.dim(), 1.0))?;
                let full_x = p.full_gradient(&x)?;
                let full_y = p.full_gradient(&y)?;
                let spread = (0..n)
                    .map(|i| Ok(p.component_gradient(i, &x)?.sub(&full_x)?.norm2_sq()))
                    .sum::<Result<f64>>()?;
                let sigma2 = spread / n as f64;
                for b in 1..=n {
                    let subsets = all_subsets(n, b);
                    // mini-batch variance
                    let mut mean_dev = 0.0;
                    for s in &subsets {
                        mean_dev += p.mean_gradient(s, &x)?.sub(&full_x)?.norm2_sq();
                    }
                    mean_dev /= subsets.len() as f64;
                    let bound = if b < n { spread / (b * n) as f64 } else { 0.0 };
                    cases += 1;
                    if mean_dev > bound + slack {
                        violations += 1;
                    }
                    // variance-reduced estimator, enumerated over both batches
                    for big_b in b..=n {
                        let outers = all_subsets(n, big_b);
                        let mut total = 0.0;
                        for o in &outers {
                            let g = p.mean_gradient(o, &x)?;
                            for s in &subsets {
                                let v = p
                                    .mean_gradient(s, &y)?
                                    .sub(&p.mean_gradient(s, &x)?)?
                                    .add(&g)?;
                                total += full_y.sub(&v)?.norm2_sq();
                            }
                        }
                        let expect = total / (outers.len() * subsets.len()) as f64;
                        let outer_term = if big_b < n {
                            sigma2 / big_b as f64
                        } else {
                            0.0
                        };
                        let bound = l * l / b as f64 * y.sub(&x)?.norm2_sq() + outer_term;
                        cases += 1;
                        if expect > bound + slack {
                            violations += 1;
                        }
                    }
                }
            }
        }
        Ok((
            violations == 0,
            format!("{cases} enumerated cases, {violations} violations"),
        ))
    })();
    outcome("batch variance bounds", started, body)
}

/// Inner-product bound, drift contraction and the generalized-gradient
/// difference bound on random instances.
pub fn check_step_inequalities(instances: usize, seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let body = (|| {
        let mut rng = RngStream::for_purpose(seed, Purpose::Aux(3));
        let slack = 1e-10;
        let (mut inner, mut contraction, mut difference) = (0, 0, 0);
        let problems = [
            tiny_sigmoid(&mut rng, 20, 4)?,
            make_pl_quadratic(&mut rng, 20, 4, 0.1, 1.0)?,
        ];
        for i in 0..instances {
            let d = 1 + rng.below(10);
            let family = random_family(&mut rng, d, i)?;
            let m = family.strong_convexity_floor()?;
            let reg = random_regularizer(&mut rng)?;
            let alpha = 0.01 + 2.0 * rng.uniform();
            let step = rng.below(50) as u64;
            let anchor = normal_vec(&mut rng, d, 2.0);
            let v = normal_vec(&mut rng, d, 1.0);
            let v2 = normal_vec(&mut rng, d, 1.0);
            let req = |drift| StepRequest {
                alpha,
                drift,
                anchor: &anchor,
                family: &family,
                step,
                regularizer: &reg,
            };
            let y = prox_step(&req(&v))?;
            let g = anchor.sub(&y)?.scale(1.0 / alpha)?;
            let lhs = v.dot(&g)?;
            let rhs =
                m * g.norm2_sq() + (reg.value(y.as_slice()) - reg.value(anchor.as_slice())) / alpha;
            if lhs < rhs - slack {
                inner += 1;
            }
            let y2 = prox_step(&req(&v2))?;
            if y.sub(&y2)?.norm2() > alpha / m * v.sub(&v2)?.norm2() + slack {
                contraction += 1;
            }

            // generalized gradient with the full gradient vs a batch gradient
            let p = problems[i % 2].clone().with_regularizer(reg);
            let pd = p.dim();
            let fam = random_family(&mut rng, pd, i)?;
            let m = fam.strong_convexity_floor()?;
            let x = normal_vec(&mut rng, pd, 1.0);
            let size = 1 + rng.below(p.n());
            let batch = crate::rng::sample_without_replacement(&mut rng, p.n(), size)?;
            let gb = p.mean_gradient(&batch, &x)?;
            let gx = generalized_gradient(&p, &fam, step, alpha, &x)?;
            let xb = prox_step(&StepRequest {
                alpha,
                drift: &gb,
                anchor: &x,
                family: &fam,
                step,
                regularizer: &reg,
            })?;
            let gxb = x.sub(&xb)?.scale(1.0 / alpha)?;
            let full = p.full_gradient(&x)?;
            if gx.sub(&gxb)?.norm2() > full.sub(&gb)?.norm2() / m + slack {
                difference += 1;
            }
        }
        Ok((
            inner + contraction + difference == 0,
            format!(
                "{instances} instances each; violations: inner-product {inner}, contraction {contraction}, difference {difference}"
            ),
        ))
    })();
    outcome("mirror step inequalities", started, body)
}

/// `B_ψ(x, y) ≥ (m/2)‖x − y‖²` for every family, including an AdaGrad and an
/// RMSProp state evolved by 100 random drifts with `m = 1e-3`.
pub fn check_strong_convexity_floor(pairs: usize, seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let body = (|| {
        let mut rng = RngStream::for_purpose(seed, Purpose::Aux(4));
        let d = 8;
        let mut families = vec![
            ProximalFamily::Euclidean,
            ProximalFamily::scheduled(
                Schedule::new(
                    ScheduleKind::WarmupStepDecay {
                        warmup_epochs: 5.0,
                        decay_epochs: vec![50.0, 75.0],
                        factor: 0.1,
                    },
                    10,
                )?,
                0.5,
            )?,
            ProximalFamily::scheduled(
                Schedule::new(ScheduleKind::CosineWarmRestart { period_epochs: 3.0 }, 10)?,
                0.5,
            )?,
            ProximalFamily::explicit_scales(vec![2.0, 3.0, 5.0])?,
        ];
        let mut ada = DiagonalState::adagrad(d, 1e-3)?;
        let mut rms = DiagonalState::rmsprop(d, 1e-3, 0.999)?;
        for _ in 0..100 {
            let v = normal_vec(&mut rng, d, 1.0);
            ada.update(&v)?;
            rms.update(&v)?;
        }
        families.push(ProximalFamily::Diagonal(ada));
        families.push(ProximalFamily::Diagonal(rms));
        families.push(ProximalFamily::adagrad(d, 1e-3)?);

        let mut violations = 0;
        let mut min_floor_entry = f64::INFINITY;
        for f in &families {
            let m = f.strong_convexity_floor()?;
            for _ in 0..pairs {
                let step = rng.below(2000) as u64;
                let x = normal_vec(&mut rng, d, 3.0);
                let y = normal_vec(&mut rng, d, 3.0);
                let b = f.bregman_divergence(step, &x, &y)?;
                if b < 0.5 * m * x.sub(&y)?.norm2_sq() - 1e-12 {
                    violations += 1;
                }
                let c = f.curvature(step)?;
                for j in 0..d {
                    min_floor_entry = min_floor_entry.min(c.at(j) / m);
                }
            }
        }
        Ok((
            violations == 0 && min_floor_entry >= 1.0,
            format!(
                "{} families x {pairs} pairs, {violations} violations, min H/m {min_floor_entry:.6}",
                families.len()
            ),
        ))
    })();
    outcome("strong-convexity floor", started, body)
}

/// `v_1 = g_t` in every round, full-batch runs reproduce gradient descent
/// bit for bit, and the ledger matches the closed-form counts.
pub fn check_estimator_exactness(seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let body = (|| {
        let mut rng = RngStream::for_purpose(seed, Purpose::Aux(5));
        let mut notes = Vec::new();
        let mut ok = true;

        // anchor cancellation
        let p = tiny_sigmoid(&mut rng, 200, 6)?.with_regularizer(Regularizer::l1(1e-3)?);
        let hp = HyperParams {
            alpha: 0.5 / p.constants().lipschitz,
            outer_batch: 60,
            batch: 10,
            inner_steps: 4,
            rounds: 25,
            output: OutputRule::UniformSample,
        };
        let mut mismatched = 0;
        let mut firsts = 0;
        run_svramd_observed(
            &p,
            ProximalFamily::adagrad(6, 1e-3)?,
            &hp,
            &RunOptions::default(),
            seed,
            &mut |e| {
                if e.k == 1 {
                    firsts += 1;
                    if e.drift != e.anchor_gradient {
                        mismatched += 1;
                    }
                }
            },
        )?;
        ok &= mismatched == 0 && firsts == 25;
        notes.push(format!(
            "v_1 = g_t in {}/{} rounds",
            firsts - mismatched,
            firsts
        ));

        // full-batch runs against plain gradient descent
        let q = make_pl_quadratic(&mut rng, 40, 5, 0.1, 1.0)?;
        let alpha = 0.7;
        let mut x = DenseVector::zeros(5);
        let mut gd = vec![x.clone()];
        for _ in 0..30 {
            let g = q.full_gradient(&x)?;
            x = DenseVector::new(x.iter().zip(g.iter()).map(|(a, b)| a - alpha * b).collect())?;
            gd.push(x.clone());
        }
        let mut iterates = Vec::new();
        let full = HyperParams {
            alpha,
            outer_batch: 40,
            batch: 40,
            inner_steps: 1,
            rounds: 30,
            output: OutputRule::LastIterate,
        };
        let inner = HyperParams {
            inner_steps: 3,
            rounds: 10,
            ..full.clone()
        };
        let r = run_svramd_observed(
            &q,
            ProximalFamily::Euclidean,
            &inner,
            &RunOptions::default(),
            seed,
            &mut |e| iterates.push(e.iterate.clone()),
        )?;
        iterates.push(r.last.clone());
        let smd = run_adaptive_smd(
            &q,
            ProximalFamily::Euclidean,
            &full,
            &RunOptions::default(),
            seed,
        )?;
        let exact = iterates == gd && smd.last == gd[30];
        ok &= exact;
        notes.push(format!("full-batch runs match gradient descent: {exact}"));

        // ledger
        let mut ledger_ok = true;
        for _ in 0..20 {
            let b = 1 + rng.below(20);
            let hp = HyperParams {
                alpha: 0.1,
                outer_batch: b + rng.below(200 - b),
                batch: b,
                inner_steps: 1 + rng.below(6),
                rounds: 1 + rng.below(10) as u64,
                output: OutputRule::UniformSample,
            };
            let r = crate::algorithms::run_svramd(
                &p,
                ProximalFamily::Euclidean,
                &hp,
                &RunOptions::default(),
                seed,
            )?;
            let (t, big, k, b) = (
                hp.rounds,
                hp.outer_batch as u64,
                hp.inner_steps as u64,
                b as u64,
            );
            ledger_ok &= r.ledger.paper() == t * big + t * k * b;
            ledger_ok &= r.ledger.honest() == t * big + 2 * t * k * b;
            let smd_hp = HyperParams {
                outer_batch: hp.batch,
                inner_steps: 1,
                ..hp.clone()
            };
            let r = run_adaptive_smd(
                &p,
                ProximalFamily::Euclidean,
                &smd_hp,
                &RunOptions::default(),
                seed,
            )?;
            ledger_ok &= r.ledger.paper() == t * b && r.ledger.honest() == t * b;
        }
        ok &= ledger_ok;
        notes.push(format!("ledger matches closed form: {ledger_ok}"));
        Ok((ok, notes.join("; ")))
    })();
    outcome("estimator exactness", started, body)
}

/// Every check with its default size.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        check_prox_oracle(1000, seed),
        check_variance_bounds(seed),
        check_step_inequalities(1000, seed),
        check_strong_convexity_floor(1000, seed),
        check_estimator_exactness(seed),
    ]
}
