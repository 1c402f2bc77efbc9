//! The strategic reporting game: best responses, best-response dynamics,
//! equilibrium checks and search, and the induced strategyproof mechanism.
//!
//! Strategic agents submit reports in [0,1]; the regression is fit on the
//! merged responses and each agent i cares only about her own fitted value
//! (single-peaked preference with peak at `y_i`). An agent's outcome is
//! continuous and strictly increasing in her own report, so her best response
//! is unique and computable by bisection. A profile is a pure Nash
//! equilibrium exactly when every strategic agent is perfectly happy or
//! saturated at the boundary report on the correct side.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::facility;
use crate::regression::{fit, Dataset, FitEngine, Hyperplane, RegressionConfig};
use crate::scalar::{cast, Scalar};

/// Default bisection tolerance on |outcome - peak| for best responses.
pub const BR_TOLERANCE: f64 = 1e-9;
/// Default tolerance for the equilibrium (Lemma-5-style) check.
pub const PNE_TOLERANCE: f64 = 1e-6;
/// Patterns in the enumeration search grow as 3^m; refuse beyond this.
pub const MAX_ENUMERATION_AGENTS: usize = 12;

const MAX_BISECTION_STEPS: usize = 200;
/// Tighter bisection used inside the enumeration sub-solves so that the
/// fixed-point stop (report change < 1e-9) sits well above the best-response
/// output granularity.
const INNER_BR_TOLERANCE: f64 = 1e-12;
/// Profiles closer than this are considered revisits by the cycle detector.
const CYCLE_RESOLUTION: f64 = 1e-10;
/// Accepted equilibria closer than this (max-norm) are duplicates.
const DEDUP_RESOLUTION: f64 = 1e-7;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// A dataset plus solver configuration plus the strategic agents' preference
/// peaks. Peaks are the only preference data any operation consumes.
///
/// `peaks[k]` belongs to the k-th strategic agent in `dataset.strategic_set()`
/// order; by default the peaks are the strategic agents' true responses.
#[derive(Clone, Debug)]
pub struct GameInstance<T> {
    dataset: Dataset<T>,
    config: RegressionConfig<T>,
    peaks: Vec<T>,
}

impl<T: Scalar> GameInstance<T> {
    pub fn new(dataset: Dataset<T>, config: RegressionConfig<T>) -> Result<Self> {
        let peaks = dataset
            .strategic_set()
            .iter()
            .map(|&i| dataset.true_responses()[i])
            .collect();
        Ok(Self { dataset, config, peaks })
    }

    /// Game with explicit peaks (hypothetical preferences).
    pub fn with_peaks(dataset: Dataset<T>, config: RegressionConfig<T>, peaks: Vec<T>) -> Result<Self> {
        if peaks.len() != dataset.strategic_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} peaks for {} strategic agents",
                peaks.len(),
                dataset.strategic_count()
            )));
        }
        if peaks.iter().any(|&y| !(y >= T::zero() && y <= T::one())) {
            return Err(Error::InvalidParameter("peaks must lie in [0,1]".into()));
        }
        Ok(Self { dataset, config, peaks })
    }

    pub fn dataset(&self) -> &Dataset<T> {
        &self.dataset
    }

    pub fn config(&self) -> &RegressionConfig<T> {
        &self.config
    }

    pub fn peaks(&self) -> &[T] {
        &self.peaks
    }

    pub fn strategic_count(&self) -> usize {
        self.dataset.strategic_count()
    }

    /// Profile in which every strategic agent reports her true response.
    pub fn honest_profile(&self) -> ReportProfile<T> {
        ReportProfile {
            reports: self
                .dataset
                .strategic_set()
                .iter()
                .map(|&i| self.dataset.true_responses()[i])
                .collect(),
        }
    }

    /// The same game with the strategic agents' true responses replaced by
    /// their peaks (used when treating declared peaks as ground truth).
    pub fn truthful(&self) -> Result<Self> {
        let dataset = self.dataset.with_strategic_responses(&self.peaks)?;
        Self::with_peaks(dataset, self.config.clone(), self.peaks.clone())
    }
}

/// The strategic agents' reports, all in [0,1].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportProfile<T> {
    reports: Vec<T>,
}

impl<T: Scalar> ReportProfile<T> {
    pub fn new(reports: Vec<T>) -> Result<Self> {
        if reports.iter().any(|&r| !(r >= T::zero() && r <= T::one())) {
            return Err(Error::InvalidParameter("reports must lie in [0,1]".into()));
        }
        Ok(Self { reports })
    }

    pub fn reports(&self) -> &[T] {
        &self.reports
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }
}

/// Update order for best-response dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Schedule {
    RoundRobin,
    LargestViolationFirst,
}

/// How an equilibrium was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveMethod {
    Dynamics,
    Enumeration,
    ClosedForm,
}

/// Why best-response dynamics stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StopReason {
    Converged,
    IterationLimit,
    CycleDetected,
}

#[derive(Clone, Debug)]
pub struct DynamicsOptions<T> {
    pub schedule: Schedule,
    pub max_iterations: usize,
    pub pne_tolerance: T,
    pub br_tolerance: T,
    pub cycle_detection: bool,
    /// Record the report profile after every update (for diagnostics/tests).
    pub record_trajectory: bool,
}

impl<T: Scalar> Default for DynamicsOptions<T> {
    fn default() -> Self {
        Self {
            schedule: Schedule::RoundRobin,
            max_iterations: 10_000,
            pne_tolerance: cast(PNE_TOLERANCE),
            br_tolerance: cast(BR_TOLERANCE),
            cycle_detection: true,
            record_trajectory: false,
        }
    }
}

/// An equilibrium (or the state of a stopped search) with diagnostics.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "T: Serialize")]
pub struct EquilibriumResult<T> {
    pub reports: ReportProfile<T>,
    pub hyperplane: Hyperplane<T>,
    pub method: SolveMethod,
    /// Single-agent best-response updates (dynamics) or fixed-point sweeps
    /// (enumeration sub-solve).
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Largest report change over the most recent updates (one per agent).
    pub max_report_change: T,
    /// Largest per-agent equilibrium-condition violation at the final profile.
    pub pne_violation: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<Vec<T>>>,
}

/// Result of the pattern enumeration search.
#[derive(Clone, Debug)]
pub struct EnumerationResult<T> {
    /// Accepted, deduplicated equilibria in pattern order.
    pub equilibria: Vec<EquilibriumResult<T>>,
    pub patterns_tried: usize,
    /// Patterns whose interior sub-solve failed to converge.
    pub patterns_skipped: usize,
}

// ---------------------------------------------------------------------------
// Outcome map and best responses
// ---------------------------------------------------------------------------

struct GameSolver<'a, T> {
    game: &'a GameInstance<T>,
    engine: FitEngine<'a, T>,
}

impl<'a, T: Scalar> GameSolver<'a, T> {
    fn new(game: &'a GameInstance<T>) -> Self {
        Self {
            game,
            engine: FitEngine::new(&game.dataset, &game.config),
        }
    }

    fn fit_profile(&mut self, reports: &[T]) -> Result<Hyperplane<T>> {
        let merged = self.game.dataset.merged_responses(reports)?;
        self.engine.fit(&merged)
    }

    /// Outcome for strategic agent `agent` when she reports `value` and the
    /// others keep `reports`.
    fn outcome_with_report(
        &mut self,
        reports: &[T],
        agent: usize,
        value: T,
    ) -> Result<(T, Hyperplane<T>)> {
        let mut probe = reports.to_vec();
        probe[agent] = value;
        let hyp = self.fit_profile(&probe)?;
        let row = self.game.dataset.strategic_set()[agent];
        Ok((hyp.outcomes[row], hyp))
    }

    /// Unique best response of `agent`: saturate when the peak is outside the
    /// reachable outcome interval [f(0), f(1)], otherwise bisect on the
    /// strictly increasing outcome map until |outcome - peak| <= tolerance.
    ///
    /// Returns the report together with the hyperplane fitted at it.
    fn best_response(
        &mut self,
        reports: &[T],
        agent: usize,
        tolerance: T,
    ) -> Result<(T, Hyperplane<T>)> {
        let peak = self.game.peaks[agent];
        let (low_outcome, low_hyp) = self.outcome_with_report(reports, agent, T::zero())?;
        if peak <= low_outcome {
            return Ok((T::zero(), low_hyp));
        }
        let (high_outcome, high_hyp) = self.outcome_with_report(reports, agent, T::one())?;
        if peak >= high_outcome {
            return Ok((T::one(), high_hyp));
        }

        let mut lo = T::zero();
        let mut hi = T::one();
        let half = cast::<T>(0.5);
        let mut best = (half, None);
        for _ in 0..MAX_BISECTION_STEPS {
            let mid = half * (lo + hi);
            let (value, hyp) = self.outcome_with_report(reports, agent, mid)?;
            best = (mid, Some(hyp));
            if (value - peak).abs() <= tolerance {
                break;
            }
            if value < peak {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::epsilon() {
                break;
            }
        }
        let (report, hyp) = best;
        Ok((report, hyp.expect("at least one bisection evaluation")))
    }
}

/// Hyperplane fitted on the merged responses: reports for strategic agents,
/// true responses for honest agents.
pub fn outcome<T: Scalar>(game: &GameInstance<T>, profile: &ReportProfile<T>) -> Result<Hyperplane<T>> {
    let merged = game.dataset.merged_responses(profile.reports())?;
    fit(&game.dataset, &merged, &game.config)
}

/// Unique best response of strategic agent `agent` (index in the strategic
/// set) given the other agents' reports in `profile`.
pub fn best_response<T: Scalar>(
    game: &GameInstance<T>,
    profile: &ReportProfile<T>,
    agent: usize,
) -> Result<T> {
    if agent >= game.strategic_count() {
        return Err(Error::InvalidParameter(format!(
            "agent {agent} out of range (m = {})",
            game.strategic_count()
        )));
    }
    let mut solver = GameSolver::new(game);
    let (report, _) = solver.best_response(profile.reports(), agent, cast(BR_TOLERANCE))?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Equilibrium check
// ---------------------------------------------------------------------------

/// Largest per-agent violation of the equilibrium conditions.
///
/// Agent i is consistent when she is perfectly happy (|outcome - peak| small)
/// or saturated on the correct side (outcome below peak and report at 1, or
/// outcome above peak and report at 0). Her violation is the smaller of the
/// two slacks; the profile is an equilibrium at tolerance `tau` when the
/// maximum violation is at most `tau`.
pub fn lemma5_violation<T: Scalar>(peaks: &[T], reports: &[T], outcomes: &[T]) -> T {
    let mut worst = T::zero();
    for ((&peak, &report), &out) in peaks.iter().zip(reports).zip(outcomes) {
        let happiness_gap = (out - peak).abs();
        let saturation_gap = if out < peak {
            T::one() - report
        } else if out > peak {
            report
        } else {
            T::zero()
        };
        worst = worst.max(happiness_gap.min(saturation_gap));
    }
    worst
}

fn strategic_outcomes<T: Scalar>(dataset: &Dataset<T>, hyperplane: &Hyperplane<T>) -> Vec<T> {
    dataset
        .strategic_set()
        .iter()
        .map(|&row| hyperplane.outcomes[row])
        .collect()
}

/// Whether `profile` is a pure Nash equilibrium at tolerance `pne_tolerance`,
/// together with the largest violation.
pub fn is_pne<T: Scalar>(
    game: &GameInstance<T>,
    profile: &ReportProfile<T>,
    pne_tolerance: T,
) -> Result<(bool, T)> {
    let hyp = outcome(game, profile)?;
    let outs = strategic_outcomes(&game.dataset, &hyp);
    let violation = lemma5_violation(&game.peaks, profile.reports(), &outs);
    Ok((violation <= pne_tolerance, violation))
}

// ---------------------------------------------------------------------------
// Best-response dynamics
// ---------------------------------------------------------------------------

fn quantize<T: Scalar>(reports: &[T]) -> Vec<i64> {
    let scale = cast::<T>(1.0 / CYCLE_RESOLUTION);
    reports
        .iter()
        .map(|&r| (r * scale).round().to_i64().unwrap_or(i64::MAX))
        .collect()
}

/// Iterates single-agent best responses from `initial` until the equilibrium
/// check passes at `pne_tolerance`, a profile revisit is detected, or
/// `max_iterations` updates have run. Non-convergence is a reported state,
/// not an error: on some instances no best-response path terminates.
pub fn best_response_dynamics<T: Scalar>(
    game: &GameInstance<T>,
    initial: &ReportProfile<T>,
    options: &DynamicsOptions<T>,
) -> Result<EquilibriumResult<T>> {
    let m = game.strategic_count();
    if initial.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "initial profile has {} reports for {m} strategic agents",
            initial.len()
        )));
    }

    let mut solver = GameSolver::new(game);
    let mut current = initial.reports().to_vec();
    let mut hyp = solver.fit_profile(&current)?;
    let mut trajectory = options.record_trajectory.then(|| vec![current.clone()]);

    let mut outs = strategic_outcomes(&game.dataset, &hyp);
    let mut violation = lemma5_violation(&game.peaks, &current, &outs);
    if violation <= options.pne_tolerance || m == 0 {
        return Ok(EquilibriumResult {
            reports: ReportProfile { reports: current },
            hyperplane: hyp,
            method: SolveMethod::Dynamics,
            iterations: 0,
            converged: true,
            stop_reason: StopReason::Converged,
            max_report_change: T::zero(),
            pne_violation: violation,
            trajectory,
        });
    }

    let mut seen: HashSet<(Vec<i64>, usize)> = HashSet::new();
    let mut recent_changes: Vec<T> = Vec::with_capacity(m);
    let mut iterations = 0;
    let mut stop_reason = StopReason::IterationLimit;

    for step in 0..options.max_iterations {
        let agent = match options.schedule {
            Schedule::RoundRobin => step % m,
            Schedule::LargestViolationFirst => {
                let mut worst_agent = 0;
                let mut worst = -T::one();
                for (k, ((&peak, &report), &out)) in
                    game.peaks.iter().zip(&current).zip(&outs).enumerate()
                {
                    let v = lemma5_violation(&[peak], &[report], &[out]);
                    if v > worst {
                        worst = v;
                        worst_agent = k;
                    }
                }
                worst_agent
            }
        };

        let (new_report, new_hyp) =
            solver.best_response(&current, agent, options.br_tolerance)?;
        let change = (new_report - current[agent]).abs();
        current[agent] = new_report;
        hyp = new_hyp;
        outs = strategic_outcomes(&game.dataset, &hyp);
        if recent_changes.len() == m {
            recent_changes.remove(0);
        }
        recent_changes.push(change);
        if let Some(t) = trajectory.as_mut() {
            t.push(current.clone());
        }
        iterations = step + 1;

        violation = lemma5_violation(&game.peaks, &current, &outs);
        if violation <= options.pne_tolerance {
            stop_reason = StopReason::Converged;
            break;
        }

        if options.cycle_detection {
            let phase = match options.schedule {
                Schedule::RoundRobin => (step + 1) % m,
                Schedule::LargestViolationFirst => 0,
            };
            if !seen.insert((quantize(&current), phase)) {
                stop_reason = StopReason::CycleDetected;
                break;
            }
        }
    }

    let max_report_change = recent_changes
        .iter()
        .fold(T::zero(), |acc, &c| acc.max(c));
    Ok(EquilibriumResult {
        reports: ReportProfile { reports: current },
        hyperplane: hyp,
        method: SolveMethod::Dynamics,
        iterations,
        converged: stop_reason == StopReason::Converged,
        stop_reason,
        max_report_change,
        pne_violation: violation,
        trajectory,
    })
}

// ---------------------------------------------------------------------------
// Enumeration search
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum PatternState {
    Low,
    Interior,
    High,
}

fn pattern_digits(mut code: usize, m: usize) -> Vec<PatternState> {
    let mut digits = Vec::with_capacity(m);
    for _ in 0..m {
        digits.push(match code % 3 {
            0 => PatternState::Low,
            1 => PatternState::Interior,
            _ => PatternState::High,
        });
        code /= 3;
    }
    digits
}

/// Damping stages for the interior fixed point: (keep fraction of the old
/// report, sweep budget). The second stage retries stubborn patterns.
const DAMPING_STAGES: [(f64, usize); 2] = [(0.5, 1_000), (0.875, 2_000)];

struct PatternSolve<T> {
    reports: Vec<T>,
    hyperplane: Hyperplane<T>,
    violation: T,
    sweeps: usize,
    last_change: T,
}

fn solve_pattern<T: Scalar>(
    game: &GameInstance<T>,
    pattern: &[PatternState],
    pne_tolerance: T,
) -> Result<Option<PatternSolve<T>>> {
    let mut solver = GameSolver::new(game);
    let mut reports: Vec<T> = pattern
        .iter()
        .zip(&game.peaks)
        .map(|(state, &peak)| match state {
            PatternState::Low => T::zero(),
            PatternState::High => T::one(),
            PatternState::Interior => peak,
        })
        .collect();
    let interior: Vec<usize> = pattern
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == PatternState::Interior)
        .map(|(k, _)| k)
        .collect();

    let mut sweeps = 0;
    let mut last_change = T::zero();
    if !interior.is_empty() {
        // Solve for the interior agents' reports so each interior outcome
        // matches its peak: damped fixed-point iteration of best responses
        // with boundary agents frozen.
        let stop = cast::<T>(1e-9);
        let inner_tol = cast::<T>(INNER_BR_TOLERANCE);
        let mut converged = false;
        'stages: for (keep, budget) in DAMPING_STAGES {
            let keep = cast::<T>(keep);
            let blend = T::one() - keep;
            for _ in 0..budget {
                let mut change = T::zero();
                for &agent in &interior {
                    let (br, _) = solver.best_response(&reports, agent, inner_tol)?;
                    let updated = keep * reports[agent] + blend * br;
                    change = change.max((updated - reports[agent]).abs());
                    reports[agent] = updated;
                }
                sweeps += 1;
                last_change = change;
                if change < stop {
                    converged = true;
                    break 'stages;
                }
            }
        }
        if !converged {
            return Ok(None);
        }
    }

    let hyperplane = solver.fit_profile(&reports)?;
    let outs = strategic_outcomes(&game.dataset, &hyperplane);
    let violation = lemma5_violation(&game.peaks, &reports, &outs);
    if violation <= pne_tolerance {
        Ok(Some(PatternSolve {
            reports,
            hyperplane,
            violation,
            sweeps,
            last_change,
        }))
    } else {
        Ok(None)
    }
}

/// Exhaustive equilibrium search over the 3^m saturation patterns: each agent
/// is fixed LOW (0), HIGH (1), or solved INTERIOR so her outcome equals her
/// peak; candidates are kept only if the equilibrium check passes.
///
/// Patterns whose interior sub-solve fails to converge are skipped and
/// counted, not treated as a global failure. Near-identical accepted profiles
/// are deduplicated.
pub fn find_pne_enumeration<T: Scalar>(
    game: &GameInstance<T>,
    pne_tolerance: T,
) -> Result<EnumerationResult<T>> {
    let m = game.strategic_count();
    if m > MAX_ENUMERATION_AGENTS {
        return Err(Error::InvalidParameter(format!(
            "enumeration supports at most {MAX_ENUMERATION_AGENTS} strategic agents, got {m}"
        )));
    }
    let total = 3usize.pow(m as u32);

    let solved: Vec<Result<Option<PatternSolve<T>>>> = (0..total)
        .into_par_iter()
        .map(|code| solve_pattern(game, &pattern_digits(code, m), pne_tolerance))
        .collect();

    let mut equilibria: Vec<EquilibriumResult<T>> = Vec::new();
    let mut skipped = 0;
    for item in solved {
        match item? {
            None => skipped += 1,
            Some(sol) => {
                let duplicate = equilibria.iter().any(|eq| {
                    eq.reports
                        .reports()
                        .iter()
                        .zip(&sol.reports)
                        .all(|(&a, &b)| (a - b).abs() <= cast::<T>(DEDUP_RESOLUTION))
                });
                if !duplicate {
                    equilibria.push(EquilibriumResult {
                        reports: ReportProfile { reports: sol.reports },
                        hyperplane: sol.hyperplane,
                        method: SolveMethod::Enumeration,
                        iterations: sol.sweeps,
                        converged: true,
                        stop_reason: StopReason::Converged,
                        max_report_change: sol.last_change,
                        pne_violation: sol.violation,
                        trajectory: None,
                    });
                }
            }
        }
    }

    Ok(EnumerationResult {
        equilibria,
        patterns_tried: total,
        patterns_skipped: skipped,
    })
}

// ---------------------------------------------------------------------------
// Strategyproof wrapper
// ---------------------------------------------------------------------------

/// The induced strategyproof mechanism: the unique equilibrium outcome of the
/// game in which the declared peaks are taken as the true responses.
///
/// Method preference: 1D closed form, then enumeration (m <= 12), then
/// best-response dynamics from several starts.
pub fn strategyproof_outcome<T: Scalar>(game: &GameInstance<T>) -> Result<Hyperplane<T>> {
    let truthful = game.truthful()?;
    let dataset = truthful.dataset();
    let n = dataset.n();
    let m = truthful.strategic_count();

    let facility_case = dataset.dim() == 1
        && m == n
        && truthful.config().regularizer().weight() == T::zero();
    if facility_case {
        if let Ok(alphas) = facility::phantoms(n, truthful.config().p()) {
            let med = facility::generalized_median(truthful.peaks(), &alphas);
            let beta = vec![med];
            return Ok(Hyperplane::from_beta(
                dataset.features(),
                dataset.true_responses(),
                beta,
            ));
        }
    }

    if m <= MAX_ENUMERATION_AGENTS {
        let found = find_pne_enumeration(&truthful, cast(PNE_TOLERANCE))?;
        if let Some(first) = found.equilibria.into_iter().next() {
            return Ok(first.hyperplane);
        }
    }

    let starts: Vec<Vec<T>> = vec![
        truthful.honest_profile().reports().to_vec(),
        vec![cast(0.5); m],
        vec![T::zero(); m],
        vec![T::one(); m],
    ];
    let options = DynamicsOptions::default();
    for start in starts {
        let initial = ReportProfile::new(start)?;
        let result = best_response_dynamics(&truthful, &initial, &options)?;
        if result.converged {
            return Ok(result.hyperplane);
        }
    }
    Err(Error::EquilibriumNotFound(
        "closed form, enumeration, and dynamics all failed".into(),
    ))
}
