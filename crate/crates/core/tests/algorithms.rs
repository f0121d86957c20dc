use statrs::distribution::{ChiSquared, ContinuousCDF};

use svramd::algorithms::{
    run_adaptive_smd, run_adaptive_smd_observed, run_svramd, run_svramd_observed, run_vr_adagrad,
    RunOptions, RunResult, StepSchedule,
};
use svramd::bregman::ProximalFamily;
use svramd::hyper::{HyperParams, OutputRule};
use svramd::problems::{
    make_least_squares, make_pl_quadratic, make_sigmoid_regression, pl_quadratic_from_data,
    FiniteSumProblem, PlQuadratic, Regularizer,
};
use svramd::rng::{all_subsets, sample_without_replacement, IndexBatch, Purpose, RngStream};
use svramd::schedule::{Schedule, ScheduleKind};
use svramd::DenseVector;

fn hp(alpha: f64, outer: usize, batch: usize, inner: usize, rounds: u64) -> HyperParams {
    HyperParams {
        alpha,
        outer_batch: outer,
        batch,
        inner_steps: inner,
        rounds,
        output: OutputRule::UniformSample,
    }
}

fn quadratic(n: usize, d: usize, seed: u64) -> FiniteSumProblem {
    make_pl_quadratic(&mut RngStream::new(seed, 7), n, d, 0.1, 1.0).unwrap()
}

fn sigmoid(n: usize, d: usize, seed: u64) -> FiniteSumProblem {
    make_sigmoid_regression(&mut RngStream::new(seed, 9), n, d, 0.1)
        .unwrap()
        .with_regularizer(Regularizer::l1(0.01).unwrap())
}

fn x0(d: usize) -> DenseVector {
    DenseVector::new((0..d).map(|j| 0.5 - 0.3 * j as f64).collect()).unwrap()
}

fn opts(d: usize) -> RunOptions {
    RunOptions {
        x0: Some(x0(d)),
        ..RunOptions::default()
    }
}

fn gradient_descent(problem: &FiniteSumProblem, alpha: f64, steps: usize, d: usize) -> DenseVector {
    let mut x = x0(d);
    for _ in 0..steps {
        let g = problem.full_gradient(&x).unwrap();
        let next: Vec<f64> = x.iter().zip(g.iter()).map(|(a, g)| a - alpha * g).collect();
        x = DenseVector::new(next).unwrap();
    }
    x
}

#[test]
fn full_batch_smd_is_gradient_descent() {
    let p = quadratic(30, 4, 1);
    let res = run_adaptive_smd(
        &p,
        ProximalFamily::Euclidean,
        &hp(0.7, 30, 30, 1, 25),
        &opts(4),
        3,
    )
    .unwrap();
    assert_eq!(res.last, gradient_descent(&p, 0.7, 25, 4));
}

#[test]
fn full_batch_svramd_is_gradient_descent() {
    let p = quadratic(30, 4, 2);
    let res = run_svramd(
        &p,
        ProximalFamily::Euclidean,
        &hp(0.7, 30, 30, 3, 8),
        &opts(4),
        5,
    )
    .unwrap();
    assert_eq!(res.last, gradient_descent(&p, 0.7, 24, 4));
}

#[test]
fn smd_ledger_is_rounds_times_batch() {
    let p = sigmoid(50, 3, 1);
    let res = run_adaptive_smd(
        &p,
        ProximalFamily::Euclidean,
        &hp(0.5, 7, 7, 1, 13),
        &opts(3),
        0,
    )
    .unwrap();
    assert_eq!(res.ledger.paper(), 13 * 7);
    assert_eq!(res.ledger.honest(), 13 * 7);
    assert_eq!(res.ledger.rounds().len(), 13);
}

#[test]
fn svramd_ledger_closed_forms() {
    let p = sigmoid(50, 3, 2);
    for (big, b, k, t) in [(20, 4, 3, 6), (50, 50, 1, 2), (10, 1, 5, 4)] {
        let res = run_svramd(
            &p,
            ProximalFamily::Euclidean,
            &hp(0.5, big, b, k, t),
            &opts(3),
            1,
        )
        .unwrap();
        let (big, b, k) = (big as u64, b as u64, k as u64);
        assert_eq!(res.ledger.paper(), t * big + t * k * b);
        assert_eq!(res.ledger.honest(), t * big + 2 * t * k * b);
    }
}

/// Prox-SGD with one sampled component per step, written against the
/// problem's component oracle.
fn prox_sgd_reference(
    problem: &FiniteSumProblem,
    alpha: f64,
    lambda: f64,
    rounds: u64,
    seed: u64,
) -> DenseVector {
    let mut x = x0(problem.dim());
    for t in 1..=rounds {
        let mut rng = RngStream::for_purpose(seed, Purpose::OuterBatch { t });
        let i = sample_without_replacement(&mut rng, problem.n(), 1)
            .unwrap()
            .indices()[0];
        let g = problem.component_gradient(i, &x).unwrap();
        let next = x
            .iter()
            .zip(g.iter())
            .map(|(&a, &g)| {
                let z = a - alpha * g;
                let tau = alpha * lambda;
                if z.abs() <= tau {
                    0.0
                } else {
                    z.signum() * (z.abs() - tau)
                }
            })
            .collect();
        x = DenseVector::new(next).unwrap();
    }
    x
}

#[test]
fn single_sample_smd_is_prox_sgd() {
    let p = sigmoid(40, 3, 3);
    for seed in [0, 11] {
        let res = run_adaptive_smd(
            &p,
            ProximalFamily::Euclidean,
            &hp(0.3, 1, 1, 1, 60),
            &opts(3),
            seed,
        )
        .unwrap();
        assert_eq!(res.last, prox_sgd_reference(&p, 0.3, 0.01, 60, seed));
    }
}

#[test]
fn first_inner_drift_is_anchor_gradient() {
    let p = sigmoid(60, 4, 4);
    let mut seen = 0;
    let mut check = |e: &svramd::algorithms::StepEvent<'_>| {
        if e.k == 1 {
            assert_eq!(e.drift, e.anchor_gradient);
            seen += 1;
        }
    };
    let mut fam = ProximalFamily::adagrad(4, 1e-2).unwrap();
    run_svramd_observed(
        &p,
        fam.clone(),
        &hp(0.05, 20, 5, 4, 9),
        &opts(4),
        2,
        &mut check,
    )
    .unwrap();
    fam = ProximalFamily::Euclidean;
    run_svramd_observed(&p, fam, &hp(0.5, 60, 5, 4, 9), &opts(4), 2, &mut check).unwrap();
    assert_eq!(seen, 18);
}

#[test]
fn scaled_family_matches_per_step_sizes() {
    let p = sigmoid(80, 3, 5);
    let schedule = Schedule::new(
        ScheduleKind::WarmupStepDecay {
            warmup_epochs: 1.0,
            decay_epochs: vec![3.0],
            factor: 0.5,
        },
        6,
    )
    .unwrap();
    let params = hp(0.4, 40, 8, 3, 12);
    let scaled = ProximalFamily::scheduled(schedule.clone(), 1.0).unwrap();
    let stepped = RunOptions {
        step_schedule: Some(StepSchedule {
            schedule,
            floor: 1.0,
        }),
        ..opts(3)
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    let ra = run_svramd_observed(&p, scaled, &params, &opts(3), 4, &mut |e| {
        a.push(e.iterate.clone())
    })
    .unwrap();
    let rb = run_svramd_observed(
        &p,
        ProximalFamily::Euclidean,
        &params,
        &stepped,
        4,
        &mut |e| b.push(e.iterate.clone()),
    )
    .unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.last, rb.last);
    assert_eq!(a.len(), 36);
}

fn trace_at(res: &RunResult, t: u64) -> &svramd::metrics::TraceRecord {
    res.trace.iter().find(|r| r.t == t).unwrap()
}

#[test]
fn checkpoint_cadence_does_not_change_the_run() {
    let p = sigmoid(60, 4, 6);
    let fam = ProximalFamily::adagrad(4, 0.05).unwrap();
    let params = hp(0.05, 30, 6, 2, 23);
    let every = |k| RunOptions {
        checkpoint_every: k,
        ..opts(4)
    };
    let dense = run_svramd(&p, fam.clone(), &params, &every(1), 9).unwrap();
    let sparse = run_svramd(&p, fam, &params, &every(10), 9).unwrap();
    assert_eq!(dense.last, sparse.last);
    assert_eq!(dense.output, sparse.output);
    assert_eq!(dense.ledger, sparse.ledger);
    let shared: Vec<u64> = sparse.trace.iter().map(|r| r.t).collect();
    assert_eq!(shared, vec![1, 11, 21, 24]);
    for t in shared {
        assert_eq!(trace_at(&dense, t), trace_at(&sparse, t));
    }
}

#[test]
fn runs_are_deterministic_per_seed() {
    let p = sigmoid(60, 4, 7);
    let fam = ProximalFamily::rmsprop(4, 1e-2, 0.9).unwrap();
    let params = hp(0.02, 20, 4, 3, 15);
    let a = run_svramd(&p, fam.clone(), &params, &opts(4), 21).unwrap();
    let b = run_svramd(&p, fam.clone(), &params, &opts(4), 21).unwrap();
    let c = run_svramd(&p, fam, &params, &opts(4), 22).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.output, b.output);
    assert_eq!(a.output_round, b.output_round);
    assert_ne!(a.last, c.last);
}

#[test]
fn last_iterate_rule_returns_final_point() {
    let p = quadratic(20, 3, 8);
    let mut params = hp(0.5, 10, 2, 2, 7);
    params.output = OutputRule::LastIterate;
    let res = run_svramd(&p, ProximalFamily::Euclidean, &params, &opts(3), 0).unwrap();
    assert_eq!(res.output, res.last);
    assert_eq!(res.output_round, 8);
}

#[test]
fn uniform_output_round_is_uniform() {
    let p = quadratic(6, 2, 9);
    let rounds = 5;
    let params = hp(0.1, 2, 2, 1, rounds);
    let mut counts = vec![0u64; rounds as usize];
    let trials = 3000;
    for seed in 0..trials {
        let res = run_adaptive_smd(
            &p,
            ProximalFamily::Euclidean,
            &params,
            &RunOptions {
                checkpoint_every: rounds,
                ..opts(2)
            },
            seed,
        )
        .unwrap();
        assert!((1..=rounds).contains(&res.output_round));
        counts[res.output_round as usize - 1] += 1;
    }
    let expected = trials as f64 / rounds as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p_value = 1.0 - ChiSquared::new((rounds - 1) as f64).unwrap().cdf(stat);
    assert!(p_value > 1e-3, "counts {counts:?}, p = {p_value}");
}

#[test]
fn uniform_output_matches_recorded_iterate() {
    let p = sigmoid(30, 3, 10);
    let res = run_adaptive_smd(
        &p,
        ProximalFamily::Euclidean,
        &hp(0.3, 5, 5, 1, 12),
        &opts(3),
        4,
    )
    .unwrap();
    let t = res.output_round;
    let gx = svramd::metrics::stationarity_of_output(&res, &p, 0.3).unwrap();
    assert_eq!(trace_at(&res, t).gx_sq, gx);
}

#[test]
fn zero_gradient_freezes_iterates_and_state() {
    let c = vec![0.25, -1.5];
    let q = PlQuadratic::new(vec![1.0, 2.0], vec![c.clone(); 4]).unwrap();
    let p = pl_quadratic_from_data(q).unwrap();
    let start = DenseVector::new(c).unwrap();
    let o = RunOptions {
        x0: Some(start.clone()),
        ..RunOptions::default()
    };
    let mut diagonals = Vec::new();
    let res = run_svramd_observed(
        &p,
        ProximalFamily::adagrad(2, 1e-3).unwrap(),
        &hp(0.1, 2, 1, 3, 5),
        &o,
        1,
        &mut |e| diagonals.push(e.family.curvature(e.step).unwrap().at(1)),
    )
    .unwrap();
    assert_eq!(res.last, start);
    assert!(diagonals.iter().all(|&h| h == 1e-3));
    let direct = run_vr_adagrad(&p, &hp(0.1, 2, 1, 3, 5), &o, 1, 1e-3).unwrap();
    assert_eq!(direct.last, start);
}

#[test]
fn first_adagrad_denominators() {
    // ∇f(0) = D(0 − c) = (3, 4)
    let q = PlQuadratic::new(vec![1.0, 1.0], vec![vec![-3.0, -4.0]]).unwrap();
    let p = pl_quadratic_from_data(q).unwrap();
    let mut first = None;
    run_svramd_observed(
        &p,
        ProximalFamily::adagrad(2, 1e-3).unwrap(),
        &hp(0.1, 1, 1, 1, 1),
        &RunOptions::default(),
        0,
        &mut |e| {
            first.get_or_insert_with(|| {
                let h = e.family.curvature(e.step).unwrap();
                (h.at(0), h.at(1))
            });
        },
    )
    .unwrap();
    let (h0, h1) = first.unwrap();
    assert!((h0 - 3.001).abs() < 1e-12 && (h1 - 4.001).abs() < 1e-12);
}

#[test]
fn large_floor_adagrad_tracks_scaled_euclidean() {
    let m = 1e6;
    let p = sigmoid(50, 3, 11);
    let params = hp(m / p.constants().lipschitz, 25, 5, 3, 20);
    let adaptive = run_vr_adagrad(&p, &params, &opts(3), 2, m).unwrap();
    let scaled = run_svramd(
        &p,
        ProximalFamily::explicit_scales(vec![m]).unwrap(),
        &params,
        &opts(3),
        2,
    )
    .unwrap();
    let moved = scaled.last.sub(&x0(3)).unwrap().norm2();
    assert!(moved > 1e-3, "reference run barely moved: {moved}");
    let rel = adaptive.last.sub(&scaled.last).unwrap().norm2() / scaled.last.norm2();
    assert!(rel <= 1e-3, "relative difference {rel}");
}

/// `v = ∇f_I(y) − ∇f_I(x) + g` with the anchor gradient `g` over `outer`.
fn drift(
    p: &FiniteSumProblem,
    outer: &IndexBatch,
    inner: &IndexBatch,
    x: &DenseVector,
    y: &DenseVector,
) -> DenseVector {
    let g = p.mean_gradient(outer, x).unwrap();
    let a = p.mean_gradient(inner, y).unwrap();
    let c = p.mean_gradient(inner, x).unwrap();
    a.sub(&c).unwrap().add(&g).unwrap()
}

fn mean(vs: &[DenseVector]) -> DenseVector {
    let d = vs[0].dim();
    let sum = vs.iter().fold(vec![0.0; d], |mut acc, v| {
        acc.iter_mut().zip(v.iter()).for_each(|(a, b)| *a += b);
        acc
    });
    DenseVector::new(sum.into_iter().map(|s| s / vs.len() as f64).collect()).unwrap()
}

#[test]
fn drift_is_unbiased_over_all_batches() {
    for (seed, problem) in [
        (
            1,
            make_least_squares(&mut RngStream::new(1, 3), 6, 3, 0.2).unwrap(),
        ),
        (2, sigmoid(6, 3, 12)),
    ] {
        let mut rng = RngStream::for_purpose(seed, Purpose::Aux(0));
        let x = DenseVector::new((0..3).map(|_| rng.normal()).collect()).unwrap();
        let y = DenseVector::new((0..3).map(|_| rng.normal()).collect()).unwrap();
        let truth = problem.full_gradient(&y).unwrap();
        let full = IndexBatch::full(6);
        for b in 1..=3 {
            let vs: Vec<_> = all_subsets(6, b)
                .iter()
                .map(|inner| drift(&problem, &full, inner, &x, &y))
                .collect();
            assert!(mean(&vs).max_abs_diff(&truth).unwrap() < 1e-12);
        }
    }
    let p = sigmoid(5, 2, 13);
    let x = DenseVector::new(vec![0.3, -0.8]).unwrap();
    let y = DenseVector::new(vec![-0.1, 0.4]).unwrap();
    let truth = p.full_gradient(&y).unwrap();
    for big in 1..=4 {
        for b in 1..=3 {
            let mut vs = Vec::new();
            for outer in all_subsets(5, big) {
                for inner in all_subsets(5, b) {
                    vs.push(drift(&p, &outer, &inner, &x, &y));
                }
            }
            assert!(mean(&vs).max_abs_diff(&truth).unwrap() < 1e-12);
        }
    }
}

#[test]
fn invalid_hyperparameters_are_rejected() {
    let p = quadratic(10, 2, 14);
    let e = ProximalFamily::Euclidean;
    assert!(run_adaptive_smd(&p, e.clone(), &hp(0.1, 10, 5, 1, 3), &opts(2), 0).is_err());
    assert!(run_adaptive_smd(&p, e.clone(), &hp(0.1, 5, 5, 2, 3), &opts(2), 0).is_err());
    assert!(run_svramd(&p, e.clone(), &hp(0.1, 11, 5, 1, 3), &opts(2), 0).is_err());
    assert!(run_svramd(&p, e.clone(), &hp(0.1, 4, 5, 1, 3), &opts(2), 0).is_err());
    assert!(run_svramd(&p, e.clone(), &hp(0.0, 5, 5, 1, 3), &opts(2), 0).is_err());
    assert!(run_svramd(&p, e.clone(), &hp(0.1, 5, 5, 0, 3), &opts(2), 0).is_err());
    let bad_x0 = RunOptions {
        x0: Some(DenseVector::zeros(3)),
        ..RunOptions::default()
    };
    assert!(run_svramd(&p, e.clone(), &hp(0.1, 5, 5, 1, 3), &bad_x0, 0).is_err());
    let bad_cadence = RunOptions {
        checkpoint_every: 0,
        ..RunOptions::default()
    };
    assert!(run_svramd(&p, e, &hp(0.1, 5, 5, 1, 3), &bad_cadence, 0).is_err());
}

#[test]
fn budget_and_stopping_rule() {
    let p = quadratic(40, 3, 15);
    let params = hp(0.9, 40, 4, 2, 1000);
    let budgeted = RunOptions {
        sfo_budget: Some(500),
        ..opts(3)
    };
    let res = run_svramd(&p, ProximalFamily::Euclidean, &params, &budgeted, 0).unwrap();
    assert_eq!(res.rounds_run, 10);
    assert_eq!(res.ledger.paper(), 480);
    let stopping = RunOptions {
        stop_below: Some(1e-6),
        ..opts(3)
    };
    let res = run_svramd(&p, ProximalFamily::Euclidean, &params, &stopping, 0).unwrap();
    let last = res.final_record().unwrap();
    assert!(last.gx_sq <= 1e-6);
    assert!(res.trace[..res.trace.len() - 1]
        .iter()
        .all(|r| r.gx_sq > 1e-6));
    assert_eq!(res.sfo_to_eps(1e-6), Some(last.sfo_paper));
}

#[test]
fn smd_observer_sees_each_step() {
    let p = sigmoid(20, 2, 16);
    let mut steps = Vec::new();
    run_adaptive_smd_observed(
        &p,
        ProximalFamily::Euclidean,
        &hp(0.2, 4, 4, 1, 6),
        &opts(2),
        0,
        &mut |e| {
            assert_eq!(e.drift, e.anchor_gradient);
            steps.push((e.t, e.k, e.step));
        },
    )
    .unwrap();
    assert_eq!(steps, (1..=6).map(|t| (t, 1, t - 1)).collect::<Vec<_>>());
}
