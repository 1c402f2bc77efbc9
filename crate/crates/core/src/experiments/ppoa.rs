//! Price-of-anarchy metrics, the least-absolute-deviations baseline, and the
//! four-point instance whose equilibrium cost ratio grows without bound.

use crate::error::{Error, Result};
use crate::game::{GameInstance, ReportProfile};
use crate::linalg::{Matrix, PivotedQr};
use crate::regression::{
    fit, minimize, Dataset, Hyperplane, RegressionConfig, Regularizer, SmoothedAbsLoss,
};

/// Sums of q-th residual powers below this are treated as zero cost.
const DEGENERATE_COST: f64 = 1e-18;
/// Smoothing radius for the least-absolute-deviations baseline.
pub const LAD_SMOOTHING: f64 = 1e-7;

/// A PPoA measurement. A (near-)zero honest-optimum cost is flagged: with a
/// nonzero equilibrium cost the ratio is unbounded and the value is +inf;
/// when the equilibrium cost is also zero the two fits coincide and the
/// value is 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpoaValue {
    pub value: f64,
    pub degenerate_denominator: bool,
}

/// Least-absolute-deviations fit through the smoothed loss
/// `sum_i sqrt((v_i - beta . x_i)^2 + radius^2)` (no regularizer). The
/// strategyproof baseline mechanism.
pub fn lad_fit(dataset: &Dataset<f64>, responses: &[f64], radius: f64) -> Result<Hyperplane<f64>> {
    if responses.len() != dataset.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for {} rows",
            responses.len(),
            dataset.n()
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("smoothing radius must be > 0".into()));
    }
    let qr = PivotedQr::factor(dataset.features());
    let start = qr.solve_least_squares(responses)?;
    let loss = SmoothedAbsLoss { radius };
    let outcome = minimize(
        dataset.features(),
        responses,
        &loss,
        &Regularizer::None,
        1e-10,
        500,
        &start,
    )?;
    Ok(Hyperplane::from_beta(dataset.features(), responses, outcome.beta))
}

/// The honest fit minimizing the lq residual norm: the (q,0)-regression for
/// q > 1, the smoothed least-absolute-deviations fit for q = 1.
pub fn honest_q_fit(dataset: &Dataset<f64>, q: f64) -> Result<Hyperplane<f64>> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("q must be >= 1, got {q}")));
    }
    if q == 1.0 {
        lad_fit(dataset, dataset.true_responses(), LAD_SMOOTHING)
    } else {
        let config = RegressionConfig::new(q)?;
        fit(dataset, dataset.true_responses(), &config)
    }
}

fn q_cost(true_responses: &[f64], outcomes: &[f64], q: f64) -> f64 {
    true_responses
        .iter()
        .zip(outcomes)
        .map(|(&y, &o)| (y - o).abs().powf(q))
        .sum()
}

/// Price of anarchy in the lq norm: the q-power residual cost of the
/// equilibrium outcomes against the true responses, divided by the cost of
/// the honest lq-optimal fit. q = 2 is the mean-squared-error ratio with the
/// OLS denominator.
pub fn ppoa_q(dataset: &Dataset<f64>, equilibrium: &Hyperplane<f64>, q: f64) -> Result<PpoaValue> {
    if equilibrium.outcomes.len() != dataset.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} equilibrium outcomes for {} rows",
            equilibrium.outcomes.len(),
            dataset.n()
        )));
    }
    let numerator = q_cost(dataset.true_responses(), &equilibrium.outcomes, q);
    let optimal = honest_q_fit(dataset, q)?;
    let denominator = q_cost(dataset.true_responses(), &optimal.outcomes, q);

    if denominator <= DEGENERATE_COST {
        // Collinear honest points. Equal (zero) costs ratio to 1; anything
        // else is the unbounded regime.
        let value = if numerator <= DEGENERATE_COST { 1.0 } else { f64::INFINITY };
        return Ok(PpoaValue { value, degenerate_denominator: true });
    }
    Ok(PpoaValue {
        value: numerator / denominator,
        degenerate_denominator: false,
    })
}

/// The four-agent instance with x-coordinates (0, (1-eps)/2, (1+eps)/2, 1)
/// whose certified equilibrium profile (0, 1, 0, 1) drives the q = 2 price
/// of anarchy to 1 + 1/eps^2.
#[derive(Clone, Debug)]
pub struct UnboundedInstance {
    pub game: GameInstance<f64>,
    /// Reports (0, 1, 0, 1), an equilibrium by construction.
    pub equilibrium: ReportProfile<f64>,
    /// 1 + 1/eps^2.
    pub analytic_ppoa: f64,
}

/// Builds the instance: fits the (p,0) regression on reports (0, 1, 0, 1)
/// and takes the middle agents' fitted values as their true peaks, so that
/// profile is an equilibrium (the outer agents are saturated at 0 and 1).
pub fn unbounded_instance(epsilon: f64, p: f64) -> Result<UnboundedInstance> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be in (0,1), got {epsilon}"
        )));
    }
    let features = Matrix::from_rows(vec![
        vec![0.0, 1.0],
        vec![(1.0 - epsilon) / 2.0, 1.0],
        vec![(1.0 + epsilon) / 2.0, 1.0],
        vec![1.0, 1.0],
    ])?;
    let reports = [0.0, 1.0, 0.0, 1.0];
    let config = RegressionConfig::new(p)?;
    let scaffold = Dataset::new(features.clone(), reports.to_vec(), 0..4)?;
    let fitted = fit(&scaffold, &reports, &config)?;

    let peaks = vec![
        0.0,
        fitted.outcomes[1].clamp(0.0, 1.0),
        fitted.outcomes[2].clamp(0.0, 1.0),
        1.0,
    ];
    let dataset = Dataset::new(features, peaks, 0..4)?;
    let game = GameInstance::new(dataset, config)?;
    Ok(UnboundedInstance {
        game,
        equilibrium: ReportProfile::new(reports.to_vec())?,
        analytic_ppoa: 1.0 + 1.0 / (epsilon * epsilon),
    })
}
