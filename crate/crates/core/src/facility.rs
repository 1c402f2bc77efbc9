//! One-dimensional facility location: the closed-form equilibrium machinery.
//!
//! When every agent shares the bare constant feature, the regression collapses
//! to choosing a single location. For the unregularized all-strategic game the
//! unique equilibrium outcome is the generalized median of the peaks pooled
//! with n+1 fixed phantom values.

use crate::error::{Error, Result};
use crate::game::GameInstance;
use crate::regression::{Dataset, RegressionConfig};
use crate::scalar::{cast, Scalar};

/// A 1D instance: agent peaks in [0,1], who is strategic, and the exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct FacilityInstance<T> {
    peaks: Vec<T>,
    strategic_set: Vec<usize>,
    p: T,
}

impl<T: Scalar> FacilityInstance<T> {
    pub fn new(peaks: Vec<T>, strategic_set: impl IntoIterator<Item = usize>, p: T) -> Result<Self> {
        if peaks.is_empty() {
            return Err(Error::InvalidParameter("need at least one agent".into()));
        }
        if peaks.iter().any(|&y| !(y >= T::zero() && y <= T::one())) {
            return Err(Error::InvalidParameter("peaks must lie in [0,1]".into()));
        }
        if !(p > T::one()) {
            return Err(Error::InvalidParameter("p must be > 1".into()));
        }
        let n = peaks.len();
        let mut strategic: Vec<usize> = strategic_set.into_iter().collect();
        strategic.sort_unstable();
        strategic.dedup();
        if strategic.last().is_some_and(|&i| i >= n) {
            return Err(Error::InvalidParameter("strategic index out of range".into()));
        }
        Ok(Self { peaks, strategic_set: strategic, p })
    }

    /// All-strategic instance.
    pub fn all_strategic(peaks: Vec<T>, p: T) -> Result<Self> {
        let n = peaks.len();
        Self::new(peaks, 0..n, p)
    }

    pub fn peaks(&self) -> &[T] {
        &self.peaks
    }

    pub fn strategic_set(&self) -> &[usize] {
        &self.strategic_set
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn n(&self) -> usize {
        self.peaks.len()
    }

    /// Equivalent regression game: every row is the constant feature and the
    /// true responses are the peaks.
    pub fn to_game_instance(&self) -> Result<GameInstance<T>> {
        let dataset = Dataset::facility(self.peaks.clone(), self.strategic_set.iter().copied())?;
        let config = RegressionConfig::new(self.p)?;
        GameInstance::new(dataset, config)
    }
}

/// Phantom values `alpha_k = k^(1/(p-1)) / ((n-k)^(1/(p-1)) + k^(1/(p-1)))`
/// for k = 0..n, with `alpha_0 = 0` and `alpha_n = 1`.
///
/// Computed in log space so the exponent 1/(p-1) cannot overflow; p below
/// 1 + 1e-6 is rejected outright.
pub fn phantoms<T: Scalar>(n: usize, p: T) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need n >= 1".into()));
    }
    if !(p >= T::one() + cast(1e-6)) {
        return Err(Error::InvalidParameter(format!(
            "p = {p} too close to 1: exponent 1/(p-1) overflows"
        )));
    }
    let q = T::one() / (p - T::one());
    let mut alphas = Vec::with_capacity(n + 1);
    alphas.push(T::zero());
    for k in 1..n {
        let lk = cast::<T>(k as f64).ln();
        let lnk = cast::<T>((n - k) as f64).ln();
        // alpha_k = 1 / (1 + ((n-k)/k)^q), evaluated via exp of log ratio.
        let alpha = T::one() / (T::one() + (q * (lnk - lk)).exp());
        alphas.push(alpha);
    }
    alphas.push(T::one());
    Ok(alphas)
}

/// Exact median of agent values pooled with phantoms. The combined multiset
/// has odd length by construction (n values + n+1 phantoms).
pub fn generalized_median<T: Scalar>(values: &[T], phantoms: &[T]) -> T {
    let mut pool: Vec<T> = values.iter().chain(phantoms.iter()).copied().collect();
    debug_assert!(pool.len() % 2 == 1, "generalized median needs odd pool");
    pool.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pool[pool.len() / 2]
}

/// Closed-form unique equilibrium outcome of the all-strategic, unregularized
/// 1D game: `med(y_1..y_n, alpha_0..alpha_n)`.
///
/// Errors when honest agents are present — the closed form does not cover
/// that case and callers should fall back to the game engine.
pub fn pne_outcome_1d<T: Scalar>(instance: &FacilityInstance<T>) -> Result<T> {
    if instance.strategic_set.len() != instance.n() {
        return Err(Error::ClosedFormUnavailable(
            "closed form requires every agent strategic".into(),
        ));
    }
    let alphas = phantoms(instance.n(), instance.p)?;
    Ok(generalized_median(&instance.peaks, &alphas))
}

/// An instance whose equilibrium-to-honest cost ratio is exactly `n`: one
/// agent's peak sits at `alpha_{n-1}`, every other peak at 1.
#[derive(Clone, Debug)]
pub struct ThetaInstance<T> {
    pub instance: FacilityInstance<T>,
    pub analytic_ppoa: T,
}

pub fn theta_n_instance<T: Scalar>(n: usize, p: T) -> Result<ThetaInstance<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter("need n >= 2".into()));
    }
    let alphas = phantoms(n, p)?;
    let mut peaks = vec![T::one(); n];
    peaks[0] = alphas[n - 1];
    Ok(ThetaInstance {
        instance: FacilityInstance::all_strategic(peaks, p)?,
        analytic_ppoa: cast(n as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phantoms_p2_are_uniform() {
        let a = phantoms::<f64>(4, 2.0).unwrap();
        let want = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (got, want) in a.iter().zip(want.iter()) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn phantoms_endpoints_fixed() {
        for n in [1usize, 2, 7, 100] {
            for p in [1.1, 1.5, 2.0, 3.0, 10.0] {
                let a = phantoms::<f64>(n, p).unwrap();
                assert_eq!(a.len(), n + 1);
                assert_eq!(a[0], 0.0);
                assert_eq!(a[n], 1.0);
            }
        }
    }

    #[test]
    fn phantom_symmetry_n2() {
        let a = phantoms::<f64>(2, 3.0).unwrap();
        assert!((a[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn phantoms_monotone_even_near_p_one() {
        for p in [1.1, 1.5, 2.0, 3.0, 10.0] {
            let a = phantoms::<f64>(100, p).unwrap();
            for w in a.windows(2) {
                assert!(w[0] <= w[1], "p={p}: {} > {}", w[0], w[1]);
                assert!(w[1].is_finite());
            }
        }
    }

    #[test]
    fn phantoms_reject_p_near_one() {
        assert!(matches!(
            phantoms::<f64>(5, 1.0 + 1e-9),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn median_example_one() {
        // peaks (0.4, 0.5) with phantoms (0, 0.5, 1) -> 0.5
        let m = generalized_median(&[0.4, 0.5], &[0.0, 0.5, 1.0]);
        assert_eq!(m, 0.5);
    }

    #[test]
    fn median_unanimous() {
        let m = generalized_median(&[0.3, 0.3, 0.3], &[0.0, 0.3, 0.7, 1.0]);
        assert_eq!(m, 0.3);
    }

    #[test]
    fn median_matches_sort_oracle() {
        let values = [0.91, 0.13, 0.55, 0.42, 0.77];
        let alphas = phantoms::<f64>(5, 3.0).unwrap();
        let got = generalized_median(&values, &alphas);
        // Sort-and-pick-middle oracle.
        let mut pool: Vec<f64> = values.iter().chain(alphas.iter()).copied().collect();
        pool.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, pool[pool.len() / 2]);
    }

    #[test]
    fn pne_outcome_example_one() {
        let inst = FacilityInstance::all_strategic(vec![0.4, 0.5], 2.0).unwrap();
        assert_eq!(pne_outcome_1d(&inst).unwrap(), 0.5);
    }

    #[test]
    fn pne_outcome_unanimity() {
        for p in [1.5, 2.0, 6.0] {
            let inst = FacilityInstance::all_strategic(vec![0.5; 4], p).unwrap();
            assert_eq!(pne_outcome_1d(&inst).unwrap(), 0.5);
        }
    }

    #[test]
    fn pne_outcome_requires_all_strategic() {
        let inst = FacilityInstance::new(vec![0.2, 0.8], [0], 2.0).unwrap();
        assert!(matches!(
            pne_outcome_1d(&inst),
            Err(Error::ClosedFormUnavailable(_))
        ));
    }

    #[test]
    fn theta_instance_p2() {
        let t = theta_n_instance::<f64>(10, 2.0).unwrap();
        let peaks = t.instance.peaks();
        assert!((peaks[0] - 0.9).abs() < 1e-12);
        assert!(peaks[1..].iter().all(|&y| y == 1.0));
        assert_eq!(t.analytic_ppoa, 10.0);
    }

    #[test]
    fn theta_instance_smallest_case() {
        let t = theta_n_instance::<f64>(2, 2.0).unwrap();
        assert!((t.instance.peaks()[0] - 0.5).abs() < 1e-12);
        assert_eq!(t.instance.peaks()[1], 1.0);
        assert_eq!(t.analytic_ppoa, 2.0);
    }
}
