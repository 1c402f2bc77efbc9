//! The (p,R)-regression loss, its gradient, and the solvers.
//!
//! The loss over coefficients `beta` for responses `v` (true or reported) is
//!
//! ```text
//! L(v, X, beta) = sum_i |v_i - beta . x_i|^p  +  lambda R(beta),   p > 1,
//! ```
//!
//! which is strictly convex with a unique minimizer. `fit` finds it by damped
//! Newton with backtracking line search on the exact gradient, warm-started
//! from the least-squares solution; `ols_fit` and `hat_matrix` expose the
//! closed-form p = 2 machinery.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, solve_spd, Matrix, PivotedQr};
use crate::scalar::{cast, norm2, Scalar};

/// Per-point Hessian weights are clamped here; for p < 2 the second derivative
/// of |r|^p blows up as r -> 0 and would otherwise produce non-finite steps.
const HESSIAN_WEIGHT_CLAMP: f64 = 1e8;
/// Newton falls back to gradient descent above this condition estimate.
const ILL_CONDITIONED: f64 = 1e12;
/// With no regularizer, residuals at most this large mean the (non-negative)
/// loss is at its exact-interpolation optimum to machine precision; for p < 2
/// the gradient-norm target is unreachable in floating point there.
const INTERPOLATION_FLOOR: f64 = 1e-13;
/// Armijo sufficient-decrease constant for the backtracking line search.
const ARMIJO_C: f64 = 1e-4;
/// Loss-stationarity stop: an iterate whose loss cannot be improved beyond
/// this relative resolution over several consecutive descent steps is the
/// floating-point minimizer of the strictly convex objective. Near-kink
/// objectives (p close to 1) never reach small gradient norms in f64.
const FTOL_REL: f64 = 1e-14;
const FTOL_ABS: f64 = 1e-15;
const STAGNANT_STEPS: usize = 3;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Training data: the n x d design matrix (last column identically 1), the
/// true responses in [0,1], and which rows belong to strategic agents.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    features: Matrix<T>,
    true_responses: Vec<T>,
    strategic_set: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Matrix<T>,
        true_responses: Vec<T>,
        strategic_set: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let n = features.rows();
        let d = features.cols();
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter("dataset needs n >= 1, d >= 1".into()));
        }
        if true_responses.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for {n} rows",
                true_responses.len()
            )));
        }
        for (i, &y) in true_responses.iter().enumerate() {
            if !(y >= T::zero() && y <= T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "response {i} = {y} outside [0,1]"
                )));
            }
        }
        for i in 0..n {
            let row = features.row(i);
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite feature in row {i}")));
            }
            if row[d - 1] != T::one() {
                return Err(Error::InvalidParameter(format!(
                    "last feature column must be identically 1 (row {i})"
                )));
            }
        }
        let mut strategic: Vec<usize> = strategic_set.into_iter().collect();
        strategic.sort_unstable();
        strategic.dedup();
        if strategic.last().is_some_and(|&i| i >= n) {
            return Err(Error::InvalidParameter(
                "strategic index beyond dataset size".into(),
            ));
        }
        Ok(Self {
            features,
            true_responses,
            strategic_set: strategic,
        })
    }

    /// Facility-location dataset: every row is the bare constant feature.
    pub fn facility(
        responses: Vec<T>,
        strategic_set: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let n = responses.len();
        let features = Matrix::new(n, 1, vec![T::one(); n])?;
        Self::new(features, responses, strategic_set)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.features.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn true_responses(&self) -> &[T] {
        &self.true_responses
    }

    /// Strategic agent indices, ascending. Position in this slice is the
    /// "index in M" used by the game operations.
    pub fn strategic_set(&self) -> &[usize] {
        &self.strategic_set
    }

    pub fn strategic_count(&self) -> usize {
        self.strategic_set.len()
    }

    pub fn is_strategic(&self, row: usize) -> bool {
        self.strategic_set.binary_search(&row).is_ok()
    }

    /// Full response vector with strategic agents' entries replaced by
    /// `reports` (one per strategic agent, in `strategic_set` order).
    pub fn merged_responses(&self, reports: &[T]) -> Result<Vec<T>> {
        if reports.len() != self.strategic_set.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} reports for {} strategic agents",
                reports.len(),
                self.strategic_set.len()
            )));
        }
        let mut merged = self.true_responses.clone();
        for (&row, &r) in self.strategic_set.iter().zip(reports) {
            merged[row] = r;
        }
        Ok(merged)
    }

    /// Copy of the dataset with the strategic agents' true responses replaced.
    pub fn with_strategic_responses(&self, values: &[T]) -> Result<Self> {
        let merged = self.merged_responses(values)?;
        Self::new(self.features.clone(), merged, self.strategic_set.iter().copied())
    }

    /// Copy of the dataset with a different strategic set.
    pub fn with_strategic_set(&self, strategic: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::new(self.features.clone(), self.true_responses.clone(), strategic)
    }
}

/// Convex differentiable regularizer, weight included.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Regularizer<T> {
    None,
    /// weight * ||beta||^2 (intercept coefficient included).
    Ridge { weight: T },
    /// weight * sum_j sqrt(beta_j^2 + radius^2), the differentiable
    /// absolute-value proxy.
    SmoothedAbsolute { weight: T, radius: T },
}

impl<T: Scalar> Regularizer<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regularizer::None => Ok(()),
            Regularizer::Ridge { weight } => {
                if weight < T::zero() || !weight.is_finite() {
                    Err(Error::InvalidParameter("ridge weight must be >= 0".into()))
                } else {
                    Ok(())
                }
            }
            Regularizer::SmoothedAbsolute { weight, radius } => {
                if weight < T::zero() || !weight.is_finite() {
                    Err(Error::InvalidParameter("regularizer weight must be >= 0".into()))
                } else if radius <= T::zero() {
                    Err(Error::InvalidParameter("smoothing radius must be > 0".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn weight(&self) -> T {
        match *self {
            Regularizer::None => T::zero(),
            Regularizer::Ridge { weight } | Regularizer::SmoothedAbsolute { weight, .. } => weight,
        }
    }

    fn value(&self, beta: &[T]) -> T {
        match *self {
            Regularizer::None => T::zero(),
            Regularizer::Ridge { weight } => weight * dot(beta, beta),
            Regularizer::SmoothedAbsolute { weight, radius } => {
                weight
                    * beta
                        .iter()
                        .map(|&b| (b * b + radius * radius).sqrt())
                        .sum::<T>()
            }
        }
    }

    fn add_gradient(&self, beta: &[T], grad: &mut [T]) {
        match *self {
            Regularizer::None => {}
            Regularizer::Ridge { weight } => {
                let two = cast::<T>(2.0);
                for (g, &b) in grad.iter_mut().zip(beta) {
                    *g = *g + two * weight * b;
                }
            }
            Regularizer::SmoothedAbsolute { weight, radius } => {
                for (g, &b) in grad.iter_mut().zip(beta) {
                    *g = *g + weight * b / (b * b + radius * radius).sqrt();
                }
            }
        }
    }

    fn add_hessian(&self, beta: &[T], hess: &mut Matrix<T>) {
        match *self {
            Regularizer::None => {}
            Regularizer::Ridge { weight } => {
                let two = cast::<T>(2.0);
                for j in 0..beta.len() {
                    let v = hess.get(j, j) + two * weight;
                    hess.set(j, j, v);
                }
            }
            Regularizer::SmoothedAbsolute { weight, radius } => {
                for (j, &b) in beta.iter().enumerate() {
                    let s = (b * b + radius * radius).sqrt();
                    let v = hess.get(j, j) + weight * radius * radius / (s * s * s);
                    hess.set(j, j, v);
                }
            }
        }
    }
}

/// Solver configuration: the exponent p > 1, the regularizer, and stopping
/// controls.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionConfig<T> {
    p: T,
    regularizer: Regularizer<T>,
    gradient_tolerance: T,
    max_solver_iterations: usize,
}

impl<T: Scalar> RegressionConfig<T> {
    pub fn new(p: T) -> Result<Self> {
        if !(p > T::one()) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must be > 1, got {p}")));
        }
        Ok(Self {
            p,
            regularizer: Regularizer::None,
            gradient_tolerance: cast(1e-10),
            max_solver_iterations: 500,
        })
    }

    pub fn with_regularizer(mut self, regularizer: Regularizer<T>) -> Result<Self> {
        regularizer.validate()?;
        self.regularizer = regularizer;
        Ok(self)
    }

    pub fn with_gradient_tolerance(mut self, tol: T) -> Result<Self> {
        if !(tol > T::zero()) {
            return Err(Error::InvalidParameter("gradient tolerance must be > 0".into()));
        }
        self.gradient_tolerance = tol;
        Ok(self)
    }

    pub fn with_max_iterations(mut self, max: usize) -> Result<Self> {
        if max == 0 {
            return Err(Error::InvalidParameter("max iterations must be >= 1".into()));
        }
        self.max_solver_iterations = max;
        Ok(self)
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn regularizer(&self) -> &Regularizer<T> {
        &self.regularizer
    }

    pub fn gradient_tolerance(&self) -> T {
        self.gradient_tolerance
    }

    pub fn max_solver_iterations(&self) -> usize {
        self.max_solver_iterations
    }
}

/// A fitted hyperplane: coefficients, per-agent outcomes X beta, and absolute
/// residuals against the responses the fit consumed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hyperplane<T> {
    pub coefficients: Vec<T>,
    pub outcomes: Vec<T>,
    pub residuals: Vec<T>,
}

impl<T: Scalar> Hyperplane<T> {
    pub(crate) fn from_beta(features: &Matrix<T>, responses: &[T], beta: Vec<T>) -> Self {
        let outcomes = features.matvec(&beta);
        let residuals = outcomes
            .iter()
            .zip(responses)
            .map(|(&o, &v)| (v - o).abs())
            .collect();
        Self {
            coefficients: beta,
            outcomes,
            residuals,
        }
    }
}

// ---------------------------------------------------------------------------
// Point losses
// ---------------------------------------------------------------------------

/// Per-point penalty rho(e) of the signed residual e = beta.x - v, with first
/// derivative and clamped curvature for the Newton weights.
pub(crate) trait PointLoss<T>: Send + Sync {
    fn value(&self, e: T) -> T;
    fn deriv(&self, e: T) -> T;
    fn curvature(&self, e: T) -> T;
}

/// rho(e) = |e|^p for p > 1.
pub(crate) struct PowerLoss<T> {
    pub p: T,
}

impl<T: Scalar> PointLoss<T> for PowerLoss<T> {
    fn value(&self, e: T) -> T {
        e.abs().powf(self.p)
    }

    fn deriv(&self, e: T) -> T {
        if e == T::zero() {
            // Well-defined because p > 1.
            return T::zero();
        }
        self.p * e.abs().powf(self.p - T::one()) * e.signum()
    }

    fn curvature(&self, e: T) -> T {
        let clamp = cast::<T>(HESSIAN_WEIGHT_CLAMP);
        let two = cast::<T>(2.0);
        let raw = if e == T::zero() {
            if self.p < two {
                clamp
            } else if self.p == two {
                two
            } else {
                T::zero()
            }
        } else {
            self.p * (self.p - T::one()) * e.abs().powf(self.p - two)
        };
        raw.min(clamp)
    }
}

/// rho(e) = sqrt(e^2 + radius^2), the smoothed absolute deviation used by the
/// LAD baseline.
pub(crate) struct SmoothedAbsLoss<T> {
    pub radius: T,
}

impl<T: Scalar> PointLoss<T> for SmoothedAbsLoss<T> {
    fn value(&self, e: T) -> T {
        (e * e + self.radius * self.radius).sqrt()
    }

    fn deriv(&self, e: T) -> T {
        e / (e * e + self.radius * self.radius).sqrt()
    }

    fn curvature(&self, e: T) -> T {
        let s = (e * e + self.radius * self.radius).sqrt();
        (self.radius * self.radius / (s * s * s)).min(cast::<T>(HESSIAN_WEIGHT_CLAMP))
    }
}

// ---------------------------------------------------------------------------
// Loss evaluation
// ---------------------------------------------------------------------------

fn check_fit_dims<T: Scalar>(dataset: &Dataset<T>, responses: &[T], beta: Option<&[T]>) -> Result<()> {
    if responses.len() != dataset.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for {} rows",
            responses.len(),
            dataset.n()
        )));
    }
    if let Some(b) = beta {
        if b.len() != dataset.dim() {
            return Err(Error::DimensionMismatch(format!(
                "beta length {} for {} columns",
                b.len(),
                dataset.dim()
            )));
        }
    }
    Ok(())
}

/// Value of the (p,R) loss at `beta`. `responses` is the merged response
/// vector (reports for strategic agents, true values for honest agents).
pub fn loss_value<T: Scalar>(
    dataset: &Dataset<T>,
    responses: &[T],
    config: &RegressionConfig<T>,
    beta: &[T],
) -> Result<T> {
    check_fit_dims(dataset, responses, Some(beta))?;
    let loss = PowerLoss { p: config.p };
    let mut total = T::zero();
    for i in 0..dataset.n() {
        let e = dot(dataset.features.row(i), beta) - responses[i];
        total = total + loss.value(e);
    }
    Ok(total + config.regularizer.value(beta))
}

/// Gradient of the (p,R) loss with respect to `beta`. The data term of a
/// point with zero residual contributes the zero vector (p > 1).
pub fn loss_gradient<T: Scalar>(
    dataset: &Dataset<T>,
    responses: &[T],
    config: &RegressionConfig<T>,
    beta: &[T],
) -> Result<Vec<T>> {
    check_fit_dims(dataset, responses, Some(beta))?;
    let loss = PowerLoss { p: config.p };
    let mut grad = vec![T::zero(); dataset.dim()];
    accumulate_gradient(&dataset.features, responses, &loss, beta, &mut grad);
    config.regularizer.add_gradient(beta, &mut grad);
    Ok(grad)
}

fn accumulate_gradient<T: Scalar, L: PointLoss<T>>(
    features: &Matrix<T>,
    responses: &[T],
    loss: &L,
    beta: &[T],
    grad: &mut [T],
) {
    for g in grad.iter_mut() {
        *g = T::zero();
    }
    for i in 0..features.rows() {
        let row = features.row(i);
        let e = dot(row, beta) - responses[i];
        let s = loss.deriv(e);
        if s == T::zero() {
            continue;
        }
        for (g, &x) in grad.iter_mut().zip(row) {
            *g = *g + s * x;
        }
    }
}

// ---------------------------------------------------------------------------
// Newton solver
// ---------------------------------------------------------------------------

pub(crate) struct SolveOutcome<T> {
    pub beta: Vec<T>,
    #[allow(dead_code)]
    pub iterations: usize,
    #[allow(dead_code)]
    pub gradient_norm: T,
}

fn total_loss<T: Scalar, L: PointLoss<T>>(
    features: &Matrix<T>,
    responses: &[T],
    loss: &L,
    regularizer: &Regularizer<T>,
    beta: &[T],
) -> T {
    let mut total = T::zero();
    for i in 0..features.rows() {
        let e = dot(features.row(i), beta) - responses[i];
        total = total + loss.value(e);
    }
    total + regularizer.value(beta)
}

fn max_abs_residual<T: Scalar>(features: &Matrix<T>, responses: &[T], beta: &[T]) -> T {
    let mut m = T::zero();
    for i in 0..features.rows() {
        m = m.max((dot(features.row(i), beta) - responses[i]).abs());
    }
    m
}

/// Damped Newton with backtracking line search; falls back to gradient
/// descent when the Hessian is ill-conditioned or not positive definite.
///
/// Converges when the gradient norm reaches the tolerance, when an
/// unregularized fit interpolates exactly, or when the loss is stationary at
/// floating-point resolution (consecutive descent steps improving it by less
/// than its representable resolution).
pub(crate) fn minimize<T: Scalar, L: PointLoss<T>>(
    features: &Matrix<T>,
    responses: &[T],
    loss: &L,
    regularizer: &Regularizer<T>,
    gradient_tolerance: T,
    max_iterations: usize,
    init: &[T],
) -> Result<SolveOutcome<T>> {
    let d = features.cols();
    let mut beta = init.to_vec();
    let mut grad = vec![T::zero(); d];
    let unregularized = regularizer.weight() == T::zero();
    let mut iterations = 0;
    let mut stagnant = 0usize;

    loop {
        accumulate_gradient(features, responses, loss, &beta, &mut grad);
        regularizer.add_gradient(&beta, &mut grad);
        let gnorm = norm2(&grad);
        if gnorm <= gradient_tolerance {
            return Ok(SolveOutcome { beta, iterations, gradient_norm: gnorm });
        }
        if unregularized
            && max_abs_residual(features, responses, &beta) <= cast::<T>(INTERPOLATION_FLOOR)
        {
            // Exact-interpolation optimum of a non-negative loss.
            return Ok(SolveOutcome { beta, iterations, gradient_norm: gnorm });
        }
        if stagnant >= STAGNANT_STEPS {
            return Ok(SolveOutcome { beta, iterations, gradient_norm: gnorm });
        }
        if iterations >= max_iterations {
            break;
        }

        // Hessian of the data term: sum_i w_i x_i x_i' (+ regularizer).
        let mut hess = Matrix::zeros(d, d);
        for i in 0..features.rows() {
            let row = features.row(i);
            let e = dot(row, &beta) - responses[i];
            let w = loss.curvature(e);
            if w == T::zero() {
                continue;
            }
            for a in 0..d {
                let wa = w * row[a];
                for b in a..d {
                    let v = hess.get(a, b) + wa * row[b];
                    hess.set(a, b, v);
                }
            }
        }
        for a in 0..d {
            for b in (a + 1)..d {
                hess.set(b, a, hess.get(a, b));
            }
        }
        regularizer.add_hessian(&beta, &mut hess);

        let mut direction = match solve_spd(&hess, &grad) {
            Some(sol) if sol.condition_estimate <= cast::<T>(ILL_CONDITIONED) => {
                sol.x.iter().map(|&v| -v).collect::<Vec<T>>()
            }
            _ => grad.iter().map(|&g| -g).collect(),
        };
        let mut slope = dot(&direction, &grad);
        if !(slope < T::zero()) || direction.iter().any(|v| !v.is_finite()) {
            direction = grad.iter().map(|&g| -g).collect();
            slope = -dot(&grad, &grad);
        }

        let current = total_loss(features, responses, loss, regularizer, &beta);
        let armijo = cast::<T>(ARMIJO_C);
        let evaluate = |step: T| -> (Vec<T>, T) {
            let candidate: Vec<T> = beta
                .iter()
                .zip(&direction)
                .map(|(&b, &dir)| b + step * dir)
                .collect();
            let value = total_loss(features, responses, loss, regularizer, &candidate);
            (candidate, value)
        };

        // Backtracking Armijo search.
        let mut acc_step = T::one();
        let mut accepted: Option<(Vec<T>, T)> = None;
        while acc_step > cast::<T>(1e-20) {
            let (candidate, value) = evaluate(acc_step);
            if value <= current + armijo * acc_step * slope {
                accepted = Some((candidate, value));
                break;
            }
            acc_step = acc_step * cast::<T>(0.5);
        }

        let first_value = accepted.as_ref().map(|(_, v)| *v);
        if let Some(first_value) = first_value {
            let mut best_value = first_value;
            // Clamped curvature can make the Newton step far too short (a
            // point pinned at a kink while the optimum is a finite residual
            // away); when the unit step went through, expand it while the
            // loss keeps strictly improving under the Armijo bound.
            if acc_step == T::one() {
                let two = cast::<T>(2.0);
                let mut expanded = two;
                for _ in 0..60 {
                    let (candidate, value) = evaluate(expanded);
                    if value < best_value && value <= current + armijo * expanded * slope {
                        best_value = value;
                        accepted = Some((candidate, value));
                        expanded = expanded * two;
                    } else {
                        break;
                    }
                }
            }
            // Quadratic-interpolation refinement through (0, current,
            // slope) and the accepted point. For p < 2 a full step tends to
            // jump across the kink to a mirror point with a tiny gain (slow
            // oscillation); the interpolated step lands at the kink instead.
            if best_value == first_value {
                let denom = cast::<T>(2.0) * (best_value - current - slope * acc_step);
                if denom > T::zero() {
                    let refined = -slope * acc_step * acc_step / denom;
                    if refined > T::zero() && refined < acc_step * cast::<T>(0.99) {
                        let (candidate, value) = evaluate(refined);
                        if value < best_value {
                            accepted = Some((candidate, value));
                        }
                    }
                }
            }
        }

        let improvement = accepted.map(|(candidate, value)| {
            beta = candidate;
            current - value
        });
        iterations += 1;
        match improvement {
            None => {
                // No representable step along a descent direction reduces the
                // loss: floating-point stationarity.
                stagnant = STAGNANT_STEPS;
            }
            Some(gain) => {
                if gain <= cast::<T>(FTOL_ABS) + cast::<T>(FTOL_REL) * current.abs() {
                    stagnant += 1;
                } else {
                    stagnant = 0;
                }
            }
        }
    }

    accumulate_gradient(features, responses, loss, &beta, &mut grad);
    regularizer.add_gradient(&beta, &mut grad);
    let gnorm = norm2(&grad);
    Err(Error::NonConvergence {
        iterations,
        gradient_norm: gnorm.to_f64().unwrap_or(f64::NAN),
        last_iterate: beta.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
    })
}

// ---------------------------------------------------------------------------
// Public fitting operations
// ---------------------------------------------------------------------------

/// Minimizes the (p,R) loss, warm-started from the least-squares solution.
///
/// `responses` is the merged response vector. Deterministic given inputs;
/// stops at the configured gradient tolerance (or at floating-point loss
/// stationarity for objectives whose gradient cannot vanish numerically,
/// e.g. p close to 1). Non-convergence within the iteration budget is a
/// structured error carrying the last iterate and its gradient norm.
pub fn fit<T: Scalar>(
    dataset: &Dataset<T>,
    responses: &[T],
    config: &RegressionConfig<T>,
) -> Result<Hyperplane<T>> {
    fit_with_init(dataset, responses, config, None)
}

/// `fit` from an explicit starting point instead of the least-squares warm
/// start. Useful for exercising the iterative path independently of the
/// closed form.
pub fn fit_with_init<T: Scalar>(
    dataset: &Dataset<T>,
    responses: &[T],
    config: &RegressionConfig<T>,
    init: Option<&[T]>,
) -> Result<Hyperplane<T>> {
    check_fit_dims(dataset, responses, init)?;
    let mut engine = FitEngine::new(dataset, config);
    match init {
        Some(start) => engine.fit_from(responses, start),
        None => engine.fit(responses),
    }
}

/// Ordinary least squares via pivoted QR. Errors when X'X is singular.
pub fn ols_fit<T: Scalar>(dataset: &Dataset<T>, responses: &[T]) -> Result<Hyperplane<T>> {
    check_fit_dims(dataset, responses, None)?;
    let qr = PivotedQr::factor(&dataset.features);
    if qr.rank() < dataset.dim() {
        return Err(Error::SingularMatrix(format!(
            "design matrix has rank {} < {}",
            qr.rank(),
            dataset.dim()
        )));
    }
    let beta = qr.solve_least_squares(responses)?;
    Ok(Hyperplane::from_beta(&dataset.features, responses, beta))
}

/// The hat matrix H = X (X'X)^-1 X', the linear map from responses to OLS
/// outcomes. Symmetric, idempotent, rank d. Errors when X'X is singular.
pub fn hat_matrix<T: Scalar>(dataset: &Dataset<T>) -> Result<Matrix<T>> {
    let qr = PivotedQr::factor(&dataset.features);
    if qr.rank() < dataset.dim() {
        return Err(Error::SingularMatrix(format!(
            "design matrix has rank {} < {}",
            qr.rank(),
            dataset.dim()
        )));
    }
    Ok(qr.projection())
}

// ---------------------------------------------------------------------------
// Fit engine: factorization reuse and warm starts for repeated fits
// ---------------------------------------------------------------------------

/// Repeated-fit helper for one dataset/config pair. Factors the design matrix
/// once; p = 2 unregularized fits go straight through the factorization, and
/// everything else warm-starts Newton from the previous solution.
pub(crate) struct FitEngine<'a, T> {
    dataset: &'a Dataset<T>,
    config: &'a RegressionConfig<T>,
    qr: PivotedQr<T>,
    loss: PowerLoss<T>,
    quadratic: bool,
    warm: Option<Vec<T>>,
}

impl<'a, T: Scalar> FitEngine<'a, T> {
    pub fn new(dataset: &'a Dataset<T>, config: &'a RegressionConfig<T>) -> Self {
        let qr = PivotedQr::factor(&dataset.features);
        let quadratic =
            config.p == cast::<T>(2.0) && config.regularizer.weight() == T::zero();
        Self {
            dataset,
            config,
            qr,
            loss: PowerLoss { p: config.p },
            quadratic,
            warm: None,
        }
    }

    pub fn fit(&mut self, responses: &[T]) -> Result<Hyperplane<T>> {
        if self.quadratic {
            let beta = self.qr.solve_least_squares(responses)?;
            return Ok(Hyperplane::from_beta(&self.dataset.features, responses, beta));
        }
        let start = match &self.warm {
            Some(b) => b.clone(),
            None => self.qr.solve_least_squares(responses)?,
        };
        self.fit_from(responses, &start)
    }

    fn fit_from(&mut self, responses: &[T], start: &[T]) -> Result<Hyperplane<T>> {
        let outcome = minimize(
            &self.dataset.features,
            responses,
            &self.loss,
            &self.config.regularizer,
            self.config.gradient_tolerance,
            self.config.max_solver_iterations,
            start,
        )?;
        self.warm = Some(outcome.beta.clone());
        Ok(Hyperplane::from_beta(&self.dataset.features, responses, outcome.beta))
    }
}
