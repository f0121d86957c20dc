//! Finite-sum objectives `F(x) = (1/n) Σ f_i(x) + h(x)` with component
//! gradient oracles and the constants the step-size formulas consume.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, pairwise_sum_scalar, Execution};
use crate::metrics::SfoLedger;
use crate::rng::{sample_without_replacement, IndexBatch, RngStream};
use crate::vector::{dist2_sq, dot, DenseVector};

/// A user-supplied set of smooth components.
pub trait ComponentOracle: Send + Sync + fmt::Debug {
    fn n(&self) -> usize;
    fn dim(&self) -> usize;
    fn value(&self, i: usize, x: &[f64]) -> f64;
    /// Adds `∇f_i(x)` into `out`.
    fn add_gradient(&self, i: usize, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    LinearLeastSquares,
    SigmoidRegression,
    PlQuadratic,
    Custom,
}

/// Row-major `n x d` design matrix with one target per row.
#[derive(Debug, Clone)]
struct Design {
    n: usize,
    d: usize,
    rows: Vec<f64>,
    targets: Vec<f64>,
}

impl Design {
    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    fn max_row_norm_sq(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `f_i(x) = ½ (x − c_i)ᵀ D (x − c_i)` with a shared positive diagonal `D`.
#[derive(Debug, Clone)]
pub struct PlQuadratic {
    diag: Vec<f64>,
    centers: Vec<f64>,
    mean_center: Vec<f64>,
    n: usize,
}

impl PlQuadratic {
    /// `centers` holds `n` rows of length `diag.len()`.
    pub fn new(diag: Vec<f64>, centers: Vec<Vec<f64>>) -> Result<Self> {
        let d = diag.len();
        if d == 0 || centers.is_empty() {
            return Err(Error::invalid("pl-quadratic needs d >= 1 and n >= 1"));
        }
        if diag.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "diagonal entries must be positive and finite",
            ));
        }
        if centers.iter().any(|c| c.len() != d) {
            return Err(Error::invalid("every center must have dimension d"));
        }
        let n = centers.len();
        let flat: Vec<f64> = centers.into_iter().flatten().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pl-quadratic center".into()));
        }
        let mut mean_center = pairwise_sum(n, d, Execution::Sequential, &|i, out: &mut [f64]| {
            for (o, c) in out.iter_mut().zip(&flat[i * d..(i + 1) * d]) {
                *o += c;
            }
        });
        mean_center.iter_mut().for_each(|v| *v /= n as f64);
        Ok(Self {
            diag,
            centers: flat,
            mean_center,
            n,
        })
    }

    fn center(&self, i: usize) -> &[f64] {
        let d = self.diag.len();
        &self.centers[i * d..(i + 1) * d]
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn mean_center(&self) -> &[f64] {
        &self.mean_center
    }
}

/// The smooth part `(1/n) Σ f_i`.
#[derive(Debug, Clone)]
pub enum SmoothComponentSet {
    /// `f_i(x) = ½ (a_iᵀx − b_i)²`
    LeastSquares(Arc<DesignHandle>),
    /// `f_i(x) = (σ(a_iᵀx) − b_i)²` with `b_i ∈ [0, 1]`.
    Sigmoid(Arc<DesignHandle>),
    PlQuadratic(Arc<PlQuadratic>),
    Custom(Arc<dyn ComponentOracle>),
}

/// Opaque shared storage for design-matrix problems.
#[derive(Debug)]
pub struct DesignHandle(Design);

impl SmoothComponentSet {
    pub fn kind(&self) -> ComponentKind {
        match self {
            SmoothComponentSet::LeastSquares(_) => ComponentKind::LinearLeastSquares,
            SmoothComponentSet::Sigmoid(_) => ComponentKind::SigmoidRegression,
            SmoothComponentSet::PlQuadratic(_) => ComponentKind::PlQuadratic,
            SmoothComponentSet::Custom(_) => ComponentKind::Custom,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            SmoothComponentSet::LeastSquares(h) | SmoothComponentSet::Sigmoid(h) => h.0.n,
            SmoothComponentSet::PlQuadratic(q) => q.n,
            SmoothComponentSet::Custom(c) => c.n(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SmoothComponentSet::LeastSquares(h) | SmoothComponentSet::Sigmoid(h) => h.0.d,
            SmoothComponentSet::PlQuadratic(q) => q.diag.len(),
            SmoothComponentSet::Custom(c) => c.dim(),
        }
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            SmoothComponentSet::LeastSquares(h) => {
                let r = dot(h.0.row(i), x) - h.0.targets[i];
                0.5 * r * r
            }
            SmoothComponentSet::Sigmoid(h) => {
                let r = sigmoid(dot(h.0.row(i), x)) - h.0.targets[i];
                r * r
            }
            SmoothComponentSet::PlQuadratic(q) => {
                0.5 * q
                    .diag
                    .iter()
                    .zip(x.iter().zip(q.center(i)))
                    .map(|(dj, (xj, cj))| dj * (xj - cj) * (xj - cj))
                    .sum::<f64>()
            }
            SmoothComponentSet::Custom(c) => c.value(i, x),
        }
    }

    fn add_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        match self {
            SmoothComponentSet::LeastSquares(h) => {
                let a = h.0.row(i);
                let r = dot(a, x) - h.0.targets[i];
                for (o, aj) in out.iter_mut().zip(a) {
                    *o += r * aj;
                }
            }
            SmoothComponentSet::Sigmoid(h) => {
                let a = h.0.row(i);
                let s = sigmoid(dot(a, x));
                let coef = 2.0 * (s - h.0.targets[i]) * s * (1.0 - s);
                for (o, aj) in out.iter_mut().zip(a) {
                    *o += coef * aj;
                }
            }
            SmoothComponentSet::PlQuadratic(q) => {
                for ((o, dj), (xj, cj)) in
                    out.iter_mut().zip(&q.diag).zip(x.iter().zip(q.center(i)))
                {
                    *o += dj * (xj - cj);
                }
            }
            SmoothComponentSet::Custom(c) => c.add_gradient(i, x, out),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Global bound on `|d²/dz² (σ(z) − b)²|` over all `z` and `b ∈ [0, 1]`.
///
/// The second derivative is `2(σ'² + (σ − b)σ'')`, affine in `b`, so the
/// extremes sit at `b ∈ {0, 1}`. With `p = σ(z)` and `b = 0` it equals
/// `2 p²(1 − p)(2 − 3p)` (the `b = 1` case is the mirror image), whose
/// largest magnitude on `[0, 1]` is attained at `p = (15 − √33)/24`.
/// Each sigmoid component is therefore `c_σ ‖a_i‖²`-smooth.
pub fn sigmoid_curvature_bound() -> f64 {
    let p = (15.0 - 33f64.sqrt()) / 24.0;
    2.0 * p * p * (1.0 - p) * (2.0 - 3.0 * p)
}

/// Convex nonsmooth term `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    Zero,
    L1 { lambda: f64 },
}

impl Regularizer {
    pub fn l1(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("l1 weight must be finite and nonnegative"));
        }
        Ok(Regularizer::L1 { lambda })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    /// The l1 weight; zero for [`Regularizer::Zero`].
    pub fn l1_weight(&self) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda,
        }
    }
}

/// Constants consumed by the hyperparameter formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConstants {
    /// Per-component gradient Lipschitz constant (analytic upper bound).
    pub lipschitz: f64,
    /// Gradient variance bound, when known in closed form.
    pub sigma2: Option<f64>,
    /// Original P-L constant of the smooth part (only with `h = 0`).
    pub mu: Option<f64>,
    pub f_star: Option<f64>,
    pub delta_f: Option<f64>,
}

/// A finite-sum problem: smooth components, regularizer, constants.
#[derive(Debug, Clone)]
pub struct FiniteSumProblem {
    components: SmoothComponentSet,
    regularizer: Regularizer,
    constants: ProblemConstants,
    execution: Execution,
}

impl FiniteSumProblem {
    pub fn new(
        components: SmoothComponentSet,
        regularizer: Regularizer,
        constants: ProblemConstants,
    ) -> Result<Self> {
        if components.n() == 0 || components.dim() == 0 {
            return Err(Error::invalid("problem needs n >= 1 and d >= 1"));
        }
        if !(constants.lipschitz > 0.0 && constants.lipschitz.is_finite()) {
            return Err(Error::invalid("Lipschitz constant must be positive"));
        }
        let mut p = Self {
            components,
            regularizer,
            constants,
            execution: Execution::default(),
        };
        p.refresh_optimum();
        Ok(p)
    }

    /// Replaces `h`, recomputing the closed-form optimum where one exists.
    pub fn with_regularizer(mut self, regularizer: Regularizer) -> Self {
        self.regularizer = regularizer;
        self.refresh_optimum();
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn refresh_optimum(&mut self) {
        if let SmoothComponentSet::PlQuadratic(q) = &self.components {
            let x_star = pl_minimizer(q, self.regularizer.l1_weight());
            self.constants.f_star = Some(self.value_unchecked(&x_star));
            self.constants.mu = match self.regularizer {
                Regularizer::Zero => Some(q.diag.iter().copied().fold(f64::INFINITY, f64::min)),
                // no closed-form generalized P-L constant with h != 0
                Regularizer::L1 { .. } => None,
            };
        }
    }

    pub fn n(&self) -> usize {
        self.components.n()
    }

    pub fn dim(&self) -> usize {
        self.components.dim()
    }

    pub fn kind(&self) -> ComponentKind {
        self.components.kind()
    }

    pub fn components(&self) -> &SmoothComponentSet {
        &self.components
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    fn check_point(&self, x: &DenseVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, problem has {}",
                x.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn finish(&self, v: Vec<f64>, what: &str) -> Result<DenseVector> {
        DenseVector::new(v).map_err(|e| Error::NonFinite(format!("{what}: {e}")))
    }

    fn value_unchecked(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let s = pairwise_sum_scalar(n, self.execution, &|i| self.components.value(i, x));
        s / n as f64 + self.regularizer.value(x)
    }

    /// `F(x)`, including the regularizer.
    pub fn value(&self, x: &DenseVector) -> Result<f64> {
        self.check_point(x)?;
        let v = self.value_unchecked(x.as_slice());
        if !v.is_finite() {
            return Err(Error::NonFinite("objective value".into()));
        }
        Ok(v)
    }

    /// `f(x) = (1/n) Σ f_i(x)` without the regularizer.
    pub fn smooth_value(&self, x: &DenseVector) -> Result<f64> {
        Ok(self.value(x)? - self.regularizer.value(x.as_slice()))
    }

    pub fn component_value(&self, i: usize, x: &DenseVector) -> Result<f64> {
        self.check_point(x)?;
        if i >= self.n() {
            return Err(Error::invalid("component index out of range"));
        }
        Ok(self.components.value(i, x.as_slice()))
    }

    pub fn component_gradient(&self, i: usize, x: &DenseVector) -> Result<DenseVector> {
        self.check_point(x)?;
        if i >= self.n() {
            return Err(Error::invalid("component index out of range"));
        }
        let mut out = vec![0.0; self.dim()];
        self.components.add_gradient(i, x.as_slice(), &mut out);
        self.finish(out, "component gradient")
    }

    /// `∇f(x)`, the mean of all component gradients. Never charged to a
    /// ledger; this is the evaluation-side oracle.
    pub fn full_gradient(&self, x: &DenseVector) -> Result<DenseVector> {
        self.check_point(x)?;
        let n = self.n();
        let xs = x.as_slice();
        let mut sum = pairwise_sum(n, self.dim(), self.execution, &|i, out: &mut [f64]| {
            self.components.add_gradient(i, xs, out)
        });
        sum.iter_mut().for_each(|v| *v /= n as f64);
        self.finish(sum, "full gradient")
    }

    /// Mean component gradient over `batch`, without touching any ledger.
    ///
    /// Uses the same summation tree as [`Self::full_gradient`], so the full
    /// index set reproduces it bit for bit.
    pub fn mean_gradient(&self, batch: &IndexBatch, x: &DenseVector) -> Result<DenseVector> {
        self.check_point(x)?;
        if batch.is_empty() {
            return Err(Error::invalid("batch must be nonempty"));
        }
        if batch.population() != self.n() {
            return Err(Error::invalid("batch drawn from a different population"));
        }
        let idx = batch.indices();
        let xs = x.as_slice();
        let mut sum = pairwise_sum(
            idx.len(),
            self.dim(),
            self.execution,
            &|j, out: &mut [f64]| self.components.add_gradient(idx[j], xs, out),
        );
        sum.iter_mut().for_each(|v| *v /= idx.len() as f64);
        self.finish(sum, "batch gradient")
    }

    /// Mean component gradient over `batch`; charges `|batch|` component
    /// evaluations to the honest counter of `ledger`.
    pub fn batch_gradient(
        &self,
        batch: &IndexBatch,
        x: &DenseVector,
        ledger: &mut SfoLedger,
    ) -> Result<DenseVector> {
        let g = self.mean_gradient(batch, x)?;
        ledger.charge_honest(batch.len() as u64);
        Ok(g)
    }

    /// `(1/n) Σ_i ‖∇f_i(x) − ∇f(x)‖²`, the exact finite-population variance.
    pub fn gradient_variance(&self, x: &DenseVector) -> Result<f64> {
        let full = self.full_gradient(x)?;
        let n = self.n();
        let d = self.dim();
        let xs = x.as_slice();
        let fs = full.as_slice();
        let s = pairwise_sum_scalar(n, self.execution, &|i| {
            let mut g = vec![0.0; d];
            self.components.add_gradient(i, xs, &mut g);
            dist2_sq(&g, fs)
        });
        Ok(s / n as f64)
    }

    /// Closed-form minimizer, when the problem has one.
    pub fn minimizer(&self) -> Option<DenseVector> {
        match &self.components {
            SmoothComponentSet::PlQuadratic(q) => Some(DenseVector::from_finite(pl_minimizer(
                q,
                self.regularizer.l1_weight(),
            ))),
            _ => None,
        }
    }

    /// `F(x) − F*` when `F*` is known, computed coordinatewise for the
    /// separable quadratic so it stays accurate near the optimum.
    pub fn optimality_gap(&self, x: &DenseVector) -> Result<Option<f64>> {
        self.check_point(x)?;
        match &self.components {
            SmoothComponentSet::PlQuadratic(q) => {
                let lambda = self.regularizer.l1_weight();
                let x_star = pl_minimizer(q, lambda);
                let per_coord = |j: usize, v: f64| {
                    let e = v - q.mean_center[j];
                    0.5 * q.diag[j] * e * e + lambda * v.abs()
                };
                let gap = x
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| per_coord(j, v) - per_coord(j, x_star[j]))
                    .sum::<f64>();
                Ok(Some(gap.max(0.0)))
            }
            _ => match self.constants.f_star {
                Some(fs) => Ok(Some(self.value(x)? - fs)),
                None => Ok(None),
            },
        }
    }

    /// `F(x1) − F*` when `F*` is known.
    pub fn delta_f(&self, x1: &DenseVector) -> Result<Option<f64>> {
        if let Some(d) = self.constants.delta_f {
            return Ok(Some(d));
        }
        self.optimality_gap(x1)
    }
}

fn pl_minimizer(q: &PlQuadratic, lambda: f64) -> Vec<f64> {
    q.mean_center
        .iter()
        .zip(&q.diag)
        .map(|(&c, &dj)| crate::proxstep::soft_threshold(c, lambda / dj))
        .collect()
}

/// `max` over probe points of the exact component-gradient variance.
pub fn estimate_sigma2(problem: &FiniteSumProblem, points: &[DenseVector]) -> Result<f64> {
    if problem.n() < 2 {
        return Err(Error::invalid("variance estimation needs n >= 2"));
    }
    if points.is_empty() {
        return Err(Error::invalid("at least one probe point is required"));
    }
    points
        .iter()
        .map(|x| problem.gradient_variance(x))
        .try_fold(0.0f64, |acc, v| Ok(acc.max(v?)))
}

/// Parameters of the synthetic sigmoid-regression generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidRegressionSpec {
    pub n: usize,
    pub d: usize,
    /// Standard deviation of additive label noise before clamping to `[0, 1]`.
    pub noise: f64,
    /// Expected `‖a_i‖`; features are `N(0, scale²/d)`.
    pub feature_scale: f64,
    /// Standard deviation of the planted logits `a_iᵀx*`.
    pub signal: f64,
    /// Number of nonzero coordinates of the planted `x*`; all `d` when absent.
    pub support: Option<usize>,
}

impl SigmoidRegressionSpec {
    pub fn new(n: usize, d: usize, noise: f64) -> Self {
        Self {
            n,
            d,
            noise,
            feature_scale: 1.0,
            signal: 4.0,
            support: None,
        }
    }

    pub fn build(&self, rng: &mut RngStream) -> Result<FiniteSumProblem> {
        let (rows, planted) = planted_design(
            rng,
            self.n,
            self.d,
            self.feature_scale,
            self.signal,
            self.support,
        )?;
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::invalid("noise must be finite and nonnegative"));
        }
        let targets = (0..self.n)
            .map(|i| {
                let z = dot(&rows[i * self.d..(i + 1) * self.d], &planted);
                (sigmoid(z) + self.noise * rng.normal()).clamp(0.0, 1.0)
            })
            .collect();
        let design = Design {
            n: self.n,
            d: self.d,
            rows,
            targets,
        };
        let lipschitz = sigmoid_curvature_bound() * design.max_row_norm_sq();
        let components = SmoothComponentSet::Sigmoid(Arc::new(DesignHandle(design)));
        FiniteSumProblem::new(
            components,
            Regularizer::Zero,
            ProblemConstants {
                lipschitz: positive_or_tiny(lipschitz),
                sigma2: None,
                mu: None,
                f_star: None,
                delta_f: None,
            },
        )
    }
}

// degenerate all-zero data gives L = 0; keep the constant usable
fn positive_or_tiny(l: f64) -> f64 {
    if l > 0.0 {
        l
    } else {
        f64::MIN_POSITIVE
    }
}

fn planted_design(
    rng: &mut RngStream,
    n: usize,
    d: usize,
    feature_scale: f64,
    signal: f64,
    support: Option<usize>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("n and d must be at least 1"));
    }
    if !(feature_scale > 0.0 && feature_scale.is_finite() && signal.is_finite()) {
        return Err(Error::invalid(
            "feature scale must be positive, signal finite",
        ));
    }
    let sd = feature_scale / (d as f64).sqrt();
    let rows: Vec<f64> = (0..n * d).map(|_| sd * rng.normal()).collect();
    let mut dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    if let Some(k) = support {
        if k == 0 || k > d {
            return Err(Error::invalid(format!(
                "support must lie in [1, d], got {k}"
            )));
        }
        let keep = sample_without_replacement(rng, d, k)?;
        let mut mask = vec![false; d];
        keep.indices().iter().for_each(|&j| mask[j] = true);
        dir.iter_mut()
            .zip(&mask)
            .filter(|(_, &m)| !m)
            .for_each(|(v, _)| *v = 0.0);
    }
    let norm = dir
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    // logits a_iᵀx* then have standard deviation `signal`
    let radius = signal * (d as f64).sqrt() / feature_scale;
    let planted = dir.iter().map(|v| v / norm * radius).collect();
    Ok((rows, planted))
}

/// Sigmoid regression with default feature scale and signal strength.
pub fn make_sigmoid_regression(
    rng: &mut RngStream,
    n: usize,
    d: usize,
    noise: f64,
) -> Result<FiniteSumProblem> {
    SigmoidRegressionSpec::new(n, d, noise).build(rng)
}

/// Sigmoid regression on explicit data.
pub fn sigmoid_regression_from_data(
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
) -> Result<FiniteSumProblem> {
    let design = design_from_rows(rows, targets)?;
    if design.targets.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::invalid("sigmoid targets must lie in [0, 1]"));
    }
    let lipschitz = sigmoid_curvature_bound() * design.max_row_norm_sq();
    FiniteSumProblem::new(
        SmoothComponentSet::Sigmoid(Arc::new(DesignHandle(design))),
        Regularizer::Zero,
        ProblemConstants {
            lipschitz: positive_or_tiny(lipschitz),
            sigma2: None,
            mu: None,
            f_star: None,
            delta_f: None,
        },
    )
}

fn design_from_rows(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Design> {
    let n = rows.len();
    if n == 0 || targets.len() != n {
        return Err(Error::invalid(
            "need one target per row and at least one row",
        ));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("rows must share a nonzero dimension"));
    }
    let rows: Vec<f64> = rows.into_iter().flatten().collect();
    if rows.iter().chain(&targets).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design data".into()));
    }
    Ok(Design {
        n,
        d,
        rows,
        targets,
    })
}

/// Linear least squares `f_i(x) = ½(a_iᵀx − b_i)²` with a planted solution.
pub fn make_least_squares(
    rng: &mut RngStream,
    n: usize,
    d: usize,
    noise: f64,
) -> Result<FiniteSumProblem> {
    let (rows, planted) = planted_design(rng, n, d, 1.0, 1.0, None)?;
    let targets = (0..n)
        .map(|i| dot(&rows[i * d..(i + 1) * d], &planted) + noise * rng.normal())
        .collect();
    let design = Design {
        n,
        d,
        rows,
        targets,
    };
    let lipschitz = design.max_row_norm_sq();
    FiniteSumProblem::new(
        SmoothComponentSet::LeastSquares(Arc::new(DesignHandle(design))),
        Regularizer::Zero,
        ProblemConstants {
            lipschitz: positive_or_tiny(lipschitz),
            sigma2: None,
            mu: None,
            f_star: None,
            delta_f: None,
        },
    )
}

/// Least squares on explicit data.
pub fn least_squares_from_data(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<FiniteSumProblem> {
    let design = design_from_rows(rows, targets)?;
    let lipschitz = design.max_row_norm_sq();
    FiniteSumProblem::new(
        SmoothComponentSet::LeastSquares(Arc::new(DesignHandle(design))),
        Regularizer::Zero,
        ProblemConstants {
            lipschitz: positive_or_tiny(lipschitz),
            sigma2: None,
            mu: None,
            f_star: None,
            delta_f: None,
        },
    )
}

/// Quadratic components sharing a diagonal whose spectrum spans `[mu, l]`.
///
/// The diagonal is geometrically spaced from `mu` to `l` (just `[mu]` when
/// `d = 1`) and centers are standard normal.
pub fn make_pl_quadratic(
    rng: &mut RngStream,
    n: usize,
    d: usize,
    mu: f64,
    l: f64,
) -> Result<FiniteSumProblem> {
    if !(mu > 0.0 && l.is_finite()) || mu > l {
        return Err(Error::invalid(format!("need 0 < mu <= L (mu={mu}, L={l})")));
    }
    if n == 0 || d == 0 {
        return Err(Error::invalid("n and d must be at least 1"));
    }
    let diag: Vec<f64> = if d == 1 {
        vec![mu]
    } else {
        (0..d)
            .map(|j| {
                if j == d - 1 {
                    l
                } else {
                    mu * (l / mu).powf(j as f64 / (d - 1) as f64)
                }
            })
            .collect()
    };
    let centers = (0..n)
        .map(|_| (0..d).map(|_| rng.normal()).collect())
        .collect();
    pl_quadratic_with_lipschitz(PlQuadratic::new(diag, centers)?, l)
}

/// Wraps explicit quadratic data; `L` is the largest diagonal entry.
pub fn pl_quadratic_from_data(q: PlQuadratic) -> Result<FiniteSumProblem> {
    let l = q.diag.iter().copied().fold(0.0, f64::max);
    pl_quadratic_with_lipschitz(q, l)
}

fn pl_quadratic_with_lipschitz(q: PlQuadratic, l: f64) -> Result<FiniteSumProblem> {
    let d = q.diag.len();
    let n = q.n;
    // ∇f_i − ∇f = D(c̄ − c_i) does not depend on x
    let sigma2 = pairwise_sum_scalar(n, Execution::Sequential, &|i| {
        (0..d)
            .map(|j| {
                let e = q.diag[j] * (q.mean_center[j] - q.center(i)[j]);
                e * e
            })
            .sum::<f64>()
    }) / n as f64;
    FiniteSumProblem::new(
        SmoothComponentSet::PlQuadratic(Arc::new(q)),
        Regularizer::Zero,
        ProblemConstants {
            lipschitz: l,
            sigma2: Some(sigma2),
            mu: None,
            f_star: None,
            delta_f: None,
        },
    )
}
