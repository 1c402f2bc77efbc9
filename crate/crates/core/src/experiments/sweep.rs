//! Seeded parameter sweeps: vary one of {n, d, p, alpha, q} while holding the
//! others at their defaults, run many random trials per value, and aggregate
//! equilibrium price-of-anarchy statistics against the strategyproof
//! least-absolute-deviations baseline.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, generate_synthetic, lad_fit, ppoa_q, LAD_SMOOTHING};
use crate::error::{Error, Result};
use crate::game::{
    best_response_dynamics, find_pne_enumeration, DynamicsOptions, GameInstance,
    MAX_ENUMERATION_AGENTS,
};
use crate::regression::{Hyperplane, RegressionConfig, Regularizer};

/// Which parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweptParameter {
    N,
    D,
    P,
    Alpha,
    Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizerKind {
    #[default]
    None,
    Ridge,
    SmoothL1,
}

/// Serializable regularizer choice for sweep configurations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub lambda: f64,
    pub mu: f64,
}

impl Default for RegularizerSpec {
    fn default() -> Self {
        Self {
            kind: RegularizerKind::None,
            lambda: 0.0,
            mu: 1e-6,
        }
    }
}

impl RegularizerSpec {
    pub fn to_regularizer(self) -> Regularizer<f64> {
        match self.kind {
            RegularizerKind::None => Regularizer::None,
            RegularizerKind::Ridge => Regularizer::Ridge { weight: self.lambda },
            RegularizerKind::SmoothL1 => Regularizer::SmoothedAbsolute {
                weight: self.lambda,
                radius: self.mu,
            },
        }
    }
}

fn default_n() -> usize {
    100
}
fn default_d() -> usize {
    6
}
fn default_p() -> f64 {
    2.0
}
fn default_alpha() -> f64 {
    1.0
}
fn default_q() -> f64 {
    2.0
}
fn default_trials() -> usize {
    1000
}
fn default_noise_sd() -> f64 {
    0.5
}

/// Sweep configuration. Defaults: n = 100, d = 6, p = 2, alpha = 1 (all
/// agents strategic), q = 2, 1000 trials, noise s.d. 0.5, no regularizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub swept_parameter: SweptParameter,
    /// Values the swept parameter takes, in output order.
    pub values: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default)]
    pub regularizer: RegularizerSpec,
}

impl SweepConfig {
    pub fn new(swept_parameter: SweptParameter, values: Vec<f64>) -> Self {
        Self {
            swept_parameter,
            values,
            n: default_n(),
            d: default_d(),
            p: default_p(),
            alpha: default_alpha(),
            q: default_q(),
            trials: default_trials(),
            seed: 0,
            noise_sd: default_noise_sd(),
            regularizer: RegularizerSpec::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidParameter("sweep needs at least one value".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter("alpha must lie in [0,1]".into()));
        }
        Ok(())
    }
}

/// Resolved per-trial parameters after applying the swept value.
#[derive(Clone, Copy)]
struct TrialParams {
    n: usize,
    d: usize,
    p: f64,
    alpha: f64,
    q: f64,
}

fn resolve(config: &SweepConfig, value: f64) -> Result<TrialParams> {
    let mut params = TrialParams {
        n: config.n,
        d: config.d,
        p: config.p,
        alpha: config.alpha,
        q: config.q,
    };
    let as_count = |v: f64, what: &str| -> Result<usize> {
        if v.fract() != 0.0 || v < 1.0 {
            return Err(Error::InvalidParameter(format!("swept {what} = {v} invalid")));
        }
        Ok(v as usize)
    };
    match config.swept_parameter {
        SweptParameter::N => params.n = as_count(value, "n")?,
        SweptParameter::D => params.d = as_count(value, "d")?,
        SweptParameter::P => params.p = value,
        SweptParameter::Alpha => params.alpha = value,
        SweptParameter::Q => params.q = value,
    }
    if !(params.p > 1.0) {
        return Err(Error::InvalidParameter(format!("p = {} must be > 1", params.p)));
    }
    if !(params.q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q = {} must be >= 1", params.q)));
    }
    if !(0.0..=1.0).contains(&params.alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {} must lie in [0,1]",
            params.alpha
        )));
    }
    Ok(params)
}

/// Per-value aggregates (the CSV row).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub swept_value: f64,
    pub mean_ppoa: f64,
    /// 1.96 sd / sqrt(trials), the normal-approximation 95% half-width.
    pub ci_half_width: f64,
    pub mean_iterations: f64,
    pub lad_ppoa: f64,
    pub converged_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub total_trials: usize,
    pub failed_trials: usize,
    /// First few failure diagnostics, for the run log.
    pub failures: Vec<String>,
}

impl SweepResult {
    /// Writes the per-value CSV (stable byte-for-byte for a fixed config).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "swept_value,mean_ppoa,ci_half_width,mean_iterations,lad_ppoa,converged_fraction"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.swept_value,
                r.mean_ppoa,
                r.ci_half_width,
                r.mean_iterations,
                r.lad_ppoa,
                r.converged_fraction
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

struct TrialOutcome {
    ppoa: f64,
    lad_ppoa: f64,
    iterations: f64,
    converged: bool,
}

/// Uniformly random strategic subset of size m, seeded (partial
/// Fisher-Yates).
fn strategic_subset(n: usize, m: usize, seed: u64) -> Vec<usize> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    for k in 0..m.min(n) {
        let swap = rng.random_range(k..n);
        indices.swap(k, swap);
    }
    let mut subset: Vec<usize> = indices.into_iter().take(m).collect();
    subset.sort_unstable();
    subset
}

fn run_trial(
    params: TrialParams,
    noise_sd: f64,
    regularizer: RegularizerSpec,
    seed: u64,
) -> std::result::Result<TrialOutcome, String> {
    let err = |e: Error| e.to_string();
    let base = generate_synthetic(params.n, params.d, noise_sd, seed).map_err(err)?;
    let m = (params.alpha * params.n as f64).ceil().min(params.n as f64) as usize;
    let dataset = base
        .with_strategic_set(strategic_subset(params.n, m, derive_seed(seed, 0x57BA, 0)))
        .map_err(err)?;

    let config = RegressionConfig::new(params.p)
        .and_then(|c| c.with_regularizer(regularizer.to_regularizer()))
        .map_err(err)?;
    let game = GameInstance::new(dataset, config).map_err(err)?;

    let options = DynamicsOptions::default();
    let dynamics =
        best_response_dynamics(&game, &game.honest_profile(), &options).map_err(err)?;

    let equilibrium: Hyperplane<f64> = if dynamics.converged {
        dynamics.hyperplane.clone()
    } else if m <= MAX_ENUMERATION_AGENTS {
        // Dynamics stalled; fall back to the exhaustive pattern search.
        let found = find_pne_enumeration(&game, options.pne_tolerance).map_err(err)?;
        match found.equilibria.into_iter().next() {
            Some(eq) => eq.hyperplane,
            None => dynamics.hyperplane.clone(),
        }
    } else {
        dynamics.hyperplane.clone()
    };

    let ppoa = ppoa_q(game.dataset(), &equilibrium, params.q).map_err(err)?;
    if !ppoa.value.is_finite() {
        return Err("unbounded price of anarchy (degenerate honest optimum)".into());
    }
    let lad = lad_fit(game.dataset(), game.dataset().true_responses(), LAD_SMOOTHING)
        .map_err(err)?;
    let lad_ppoa = ppoa_q(game.dataset(), &lad, params.q).map_err(err)?;
    if !lad_ppoa.value.is_finite() {
        return Err("unbounded baseline price of anarchy".into());
    }

    Ok(TrialOutcome {
        ppoa: ppoa.value,
        lad_ppoa: lad_ppoa.value,
        iterations: dynamics.iterations as f64,
        converged: dynamics.converged,
    })
}

/// Runs the sweep: for every value, `trials` seeded random instances are
/// generated, `ceil(alpha n)` uniformly random agents marked strategic,
/// best-response dynamics run from honest reports (enumeration fallback when
/// it stalls and m <= 12), and PPoA_q plus the LAD baseline recorded.
///
/// Trials run in parallel but are aggregated in trial order, so results are
/// deterministic for a fixed config regardless of the worker count.
/// Individual trial failures are excluded and counted; more than 5% failures
/// fails the sweep.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;

    let mut rows = Vec::with_capacity(config.values.len());
    let mut failures: Vec<String> = Vec::new();
    let mut failed = 0usize;

    for &value in &config.values {
        let params = resolve(config, value)?;
        let outcomes: Vec<std::result::Result<TrialOutcome, String>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                // The trial seed depends only on the trial index so that
                // sweeps over p, alpha, or q reuse the same instances across
                // values (paired comparisons).
                let seed = derive_seed(config.seed, 0x7121, trial as u64);
                run_trial(params, config.noise_sd, config.regularizer, seed)
            })
            .collect();

        let mut ppoas = Vec::with_capacity(config.trials);
        let mut lads = Vec::with_capacity(config.trials);
        let mut iters = Vec::with_capacity(config.trials);
        let mut converged = 0usize;
        for (trial, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(t) => {
                    ppoas.push(t.ppoa);
                    lads.push(t.lad_ppoa);
                    iters.push(t.iterations);
                    converged += usize::from(t.converged);
                }
                Err(msg) => {
                    failed += 1;
                    if failures.len() < 20 {
                        failures.push(format!("value {value} trial {trial}: {msg}"));
                    }
                }
            }
        }
        if ppoas.is_empty() {
            // No usable trials for this value; the sweep-level check below
            // reports the failure volume.
            rows.push(SweepRow {
                swept_value: value,
                mean_ppoa: f64::NAN,
                ci_half_width: f64::NAN,
                mean_iterations: f64::NAN,
                lad_ppoa: f64::NAN,
                converged_fraction: 0.0,
            });
            continue;
        }

        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let m_ppoa = mean(&ppoas);
        let sd = if ppoas.len() > 1 {
            (ppoas.iter().map(|x| (x - m_ppoa).powi(2)).sum::<f64>() / (ppoas.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        rows.push(SweepRow {
            swept_value: value,
            mean_ppoa: m_ppoa,
            ci_half_width: 1.96 * sd / (ppoas.len() as f64).sqrt(),
            mean_iterations: mean(&iters),
            lad_ppoa: mean(&lads),
            converged_fraction: converged as f64 / ppoas.len() as f64,
        });
    }

    let total_trials = config.values.len() * config.trials;
    if failed * 20 > total_trials {
        return Err(Error::SweepFailed(format!(
            "{failed} of {total_trials} trials failed (> 5%): {}",
            failures.join("; ")
        )));
    }
    Ok(SweepResult {
        rows,
        total_trials,
        failed_trials: failed,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_config(param: SweptParameter, values: Vec<f64>) -> SweepConfig {
        let mut c = SweepConfig::new(param, values);
        c.n = 12;
        c.d = 2;
        c.trials = 8;
        c.seed = 11;
        c
    }

    #[test]
    fn alpha_zero_gives_exact_unit_ppoa() {
        let c = desk_config(SweptParameter::Alpha, vec![0.0]);
        let result = run_sweep(&c).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.rows[0].mean_ppoa, 1.0);
        assert_eq!(result.rows[0].ci_half_width, 0.0);
        assert_eq!(result.rows[0].converged_fraction, 1.0);
    }

    #[test]
    fn sweep_is_seed_deterministic_bytes() {
        let c = desk_config(SweptParameter::P, vec![1.5, 2.0]);
        let a = run_sweep(&c).unwrap().to_csv_string();
        let b = run_sweep(&c).unwrap().to_csv_string();
        assert_eq!(a, b);
    }

    #[test]
    fn d_equals_n_boundary_everyone_happy() {
        let mut c = desk_config(SweptParameter::D, vec![12.0]);
        c.n = 12;
        let result = run_sweep(&c).unwrap();
        let row = &result.rows[0];
        assert_eq!(row.mean_ppoa, 1.0, "PPoA {}", row.mean_ppoa);
        assert_eq!(row.mean_iterations, 0.0);
        assert_eq!(row.converged_fraction, 1.0);
    }

    #[test]
    fn sweep_level_failure_when_all_trials_degenerate() {
        // n = 1 cannot be normalized: every trial fails generation.
        let mut c = desk_config(SweptParameter::N, vec![1.0]);
        c.trials = 4;
        assert!(matches!(run_sweep(&c), Err(Error::SweepFailed(_))));
    }

    #[test]
    fn config_json_roundtrip_with_defaults() {
        let json = r#"{"swept_parameter":"p","values":[1.5,2,3],"trials":5,"seed":9}"#;
        let c: SweepConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.swept_parameter, SweptParameter::P);
        assert_eq!(c.n, 100);
        assert_eq!(c.d, 6);
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.q, 2.0);
        assert_eq!(c.noise_sd, 0.5);
        assert_eq!(c.regularizer.kind, RegularizerKind::None);
    }
}
