//! Games induced by an arbitrary linear mapping from reports to outcomes,
//! `H ytilde = ybar`. The OLS hat matrix is the motivating case, but general
//! maps can behave differently — in particular they can have several
//! equilibrium outcomes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::lemma5_violation;
use crate::linalg::Matrix;
use crate::scalar::{cast, Scalar};

/// Fixed points sharper than this violation are accepted as equilibria.
const ACCEPT_VIOLATION: f64 = 1e-9;
/// Converged profiles closer than this (euclidean) are duplicates.
const DEDUP_DISTANCE: f64 = 1e-6;
const SWEEP_STOP: f64 = 1e-12;
const MAX_SWEEPS: usize = 5_000;

/// An m-agent game where outcomes are `map . reports` and agent i's
/// preference peaks at `peaks[i]`.
///
/// Every diagonal entry must be positive: that is what makes each agent's
/// outcome strictly increasing in her own report, keeping best responses
/// single-valued. Construction rejects violations.
#[derive(Clone, Debug)]
pub struct LinearMapGame<T> {
    map: Matrix<T>,
    peaks: Vec<T>,
}

impl<T: Scalar> LinearMapGame<T> {
    pub fn new(map: Matrix<T>, peaks: Vec<T>) -> Result<Self> {
        if map.rows() != map.cols() {
            return Err(Error::DimensionMismatch(format!(
                "map must be square, got {}x{}",
                map.rows(),
                map.cols()
            )));
        }
        if map.rows() != peaks.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} peaks for a {} x {} map",
                peaks.len(),
                map.rows(),
                map.rows()
            )));
        }
        if peaks.iter().any(|&y| !(y >= T::zero() && y <= T::one())) {
            return Err(Error::InvalidParameter("peaks must lie in [0,1]".into()));
        }
        for i in 0..map.rows() {
            if !(map.get(i, i) > T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "diagonal entry ({i},{i}) = {} must be positive",
                    map.get(i, i)
                )));
            }
        }
        Ok(Self { map, peaks })
    }

    pub fn map(&self) -> &Matrix<T> {
        &self.map
    }

    pub fn peaks(&self) -> &[T] {
        &self.peaks
    }

    pub fn agents(&self) -> usize {
        self.peaks.len()
    }
}

/// Outcomes `map . reports`.
pub fn linear_outcome<T: Scalar>(game: &LinearMapGame<T>, reports: &[T]) -> Result<Vec<T>> {
    if reports.len() != game.agents() {
        return Err(Error::DimensionMismatch(format!(
            "{} reports for {} agents",
            reports.len(),
            game.agents()
        )));
    }
    Ok(game.map.matvec(reports))
}

/// Closed-form best response under a linear map:
/// `clip((peak_i - sum_{j != i} H_ij r_j) / H_ii, 0, 1)`.
pub fn linear_best_response<T: Scalar>(
    game: &LinearMapGame<T>,
    reports: &[T],
    agent: usize,
) -> Result<T> {
    if reports.len() != game.agents() || agent >= game.agents() {
        return Err(Error::DimensionMismatch("agent/report dimensions".into()));
    }
    let h_ii = game.map.get(agent, agent);
    if !(h_ii > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "H_{agent}{agent} = {h_ii} <= 0: outcome not increasing in own report"
        )));
    }
    let mut cross = T::zero();
    for (j, &r) in reports.iter().enumerate() {
        if j != agent {
            cross = cross + game.map.get(agent, j) * r;
        }
    }
    let raw = (game.peaks[agent] - cross) / h_ii;
    Ok(raw.max(T::zero()).min(T::one()))
}

/// An equilibrium of a linear-map game.
#[derive(Clone, Debug)]
pub struct LinearPne<T> {
    pub reports: Vec<T>,
    pub outcomes: Vec<T>,
    pub violation: T,
}

/// Result of the grid-seeded equilibrium search.
#[derive(Clone, Debug)]
pub struct LinearPneSearch<T> {
    pub equilibria: Vec<LinearPne<T>>,
    pub seeds_total: usize,
    pub seeds_converged: usize,
}

/// Finds equilibria by running best-response sweeps from every point of a
/// `grid_resolution`-spaced grid over [0,1]^m, deduplicating the converged
/// profiles and keeping those that pass the equilibrium check exactly
/// (violation <= 1e-9).
///
/// An empty list is possible only when every seed fails to converge; the
/// seed counters report that case.
pub fn find_all_pne_linear<T: Scalar>(
    game: &LinearMapGame<T>,
    grid_resolution: T,
) -> Result<LinearPneSearch<T>> {
    let m = game.agents();
    if m > 3 {
        return Err(Error::InvalidParameter(format!(
            "grid search supports at most 3 agents, got {m}"
        )));
    }
    if !(grid_resolution > T::zero() && grid_resolution <= T::one()) {
        return Err(Error::InvalidParameter("grid resolution must be in (0,1]".into()));
    }

    let mut axis: Vec<T> = Vec::new();
    let mut v = T::zero();
    while v < T::one() {
        axis.push(v);
        v = v + grid_resolution;
    }
    axis.push(T::one());

    let mut seeds: Vec<Vec<T>> = vec![Vec::new()];
    for _ in 0..m {
        let mut next = Vec::with_capacity(seeds.len() * axis.len());
        for seed in &seeds {
            for &coord in &axis {
                let mut extended = seed.clone();
                extended.push(coord);
                next.push(extended);
            }
        }
        seeds = next;
    }
    let seeds_total = seeds.len();

    let converged: Vec<Option<Vec<T>>> = seeds
        .into_par_iter()
        .map(|mut x| {
            for _ in 0..MAX_SWEEPS {
                let mut change = T::zero();
                for agent in 0..m {
                    let br = linear_best_response(game, &x, agent).ok()?;
                    change = change.max((br - x[agent]).abs());
                    x[agent] = br;
                }
                if change <= cast::<T>(SWEEP_STOP) {
                    return Some(x);
                }
            }
            None
        })
        .collect();

    let mut search = LinearPneSearch {
        equilibria: Vec::new(),
        seeds_total,
        seeds_converged: 0,
    };
    for x in converged.into_iter().flatten() {
        search.seeds_converged += 1;
        let outcomes = game.map.matvec(&x);
        let violation = lemma5_violation(&game.peaks, &x, &outcomes);
        if violation > cast::<T>(ACCEPT_VIOLATION) {
            continue;
        }
        let duplicate = search.equilibria.iter().any(|eq| {
            let d2: T = eq
                .reports
                .iter()
                .zip(&x)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            d2.sqrt() < cast::<T>(DEDUP_DISTANCE)
        });
        if !duplicate {
            search.equilibria.push(LinearPne {
                reports: x,
                outcomes,
                violation,
            });
        }
    }
    Ok(search)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{hat_matrix, ols_fit, Dataset};

    /// The 2x2 map with multiple equilibrium outcomes.
    fn example_two() -> LinearMapGame<f64> {
        let map = Matrix::from_rows(vec![vec![0.8, -1.0], vec![-1.2, 1.0]]).unwrap();
        LinearMapGame::new(map, vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn identity_map_outcomes_are_reports() {
        let game = LinearMapGame::new(Matrix::identity(3), vec![0.2f64, 0.5, 0.8]).unwrap();
        let out = linear_outcome(&game, &[0.1, 0.6, 0.9]).unwrap();
        assert_eq!(out, vec![0.1, 0.6, 0.9]);
    }

    #[test]
    fn example_two_outcome_at_ones() {
        let game = example_two();
        let out = linear_outcome(&game, &[1.0, 1.0]).unwrap();
        assert!((out[0] - (-0.2)).abs() < 1e-15);
        assert!((out[1] - (-0.2)).abs() < 1e-15);
    }

    #[test]
    fn hat_matrix_game_matches_ols_outcomes() {
        let features = Matrix::from_rows(vec![
            vec![0.0, 1.0],
            vec![0.3, 1.0],
            vec![0.7, 1.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        let ds = Dataset::new(features, vec![0.1f64, 0.5, 0.4, 0.9], 0..4).unwrap();
        let h = hat_matrix(&ds).unwrap();
        let game = LinearMapGame::new(h, ds.true_responses().to_vec()).unwrap();
        let reports = [0.3, 0.9, 0.2, 0.6];
        let via_map = linear_outcome(&game, &reports).unwrap();
        let via_ols = ols_fit(&ds, &reports).unwrap();
        for (a, b) in via_map.iter().zip(&via_ols.outcomes) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_best_response_is_peak() {
        let game = LinearMapGame::new(Matrix::identity(2), vec![0.3f64, 0.7]).unwrap();
        assert_eq!(linear_best_response(&game, &[0.0, 0.0], 0).unwrap(), 0.3);
        assert_eq!(linear_best_response(&game, &[0.5, 0.5], 1).unwrap(), 0.7);
    }

    #[test]
    fn average_map_best_response_clips() {
        let map = Matrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let game = LinearMapGame::new(map, vec![0.4, 1.0]).unwrap();
        // Other report 1, peak 0.4: (0.4 - 0.5)/0.5 < 0 clips to 0.
        assert_eq!(linear_best_response(&game, &[0.9, 1.0], 0).unwrap(), 0.0);
    }

    #[test]
    fn example_two_zero_profile_is_fixed() {
        let game = example_two();
        assert_eq!(linear_best_response(&game, &[0.0, 0.0], 0).unwrap(), 0.0);
        assert_eq!(linear_best_response(&game, &[0.0, 0.0], 1).unwrap(), 0.0);
    }

    #[test]
    fn constructor_rejects_nonpositive_diagonal() {
        let map = Matrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(LinearMapGame::new(map, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn identity_search_finds_single_pne_at_peaks() {
        let game = LinearMapGame::new(Matrix::identity(2), vec![0.3f64, 0.7]).unwrap();
        let found = find_all_pne_linear(&game, 0.05).unwrap();
        assert_eq!(found.equilibria.len(), 1);
        let eq = &found.equilibria[0];
        assert!((eq.reports[0] - 0.3).abs() < 1e-9);
        assert!((eq.reports[1] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn example_two_has_two_equilibrium_outcomes() {
        let game = example_two();
        let found = find_all_pne_linear(&game, 0.05).unwrap();
        assert!(found.equilibria.len() >= 2, "found {}", found.equilibria.len());
        let has = |target: [f64; 2]| {
            found.equilibria.iter().any(|eq| {
                (eq.outcomes[0] - target[0]).abs() < 1e-9
                    && (eq.outcomes[1] - target[1]).abs() < 1e-9
            })
        };
        assert!(has([0.0, 0.0]));
        assert!(has([-0.2, -0.2]));
    }

    #[test]
    fn hat_matrix_game_has_unique_equilibrium_outcome() {
        let features = Matrix::from_rows(vec![
            vec![0.1, 1.0],
            vec![0.4, 1.0],
            vec![0.8, 1.0],
        ])
        .unwrap();
        let ds = Dataset::new(features, vec![0.9f64, 0.1, 0.7], 0..3).unwrap();
        let h = hat_matrix(&ds).unwrap();
        let game = LinearMapGame::new(h, ds.true_responses().to_vec()).unwrap();
        let found = find_all_pne_linear(&game, 0.1).unwrap();
        assert!(!found.equilibria.is_empty());
        let first = &found.equilibria[0];
        for eq in &found.equilibria {
            for (a, b) in eq.outcomes.iter().zip(&first.outcomes) {
                assert!((a - b).abs() < 1e-4, "outcomes differ: {a} vs {b}");
            }
        }
    }
}
