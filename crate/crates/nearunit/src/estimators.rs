//! Empirical autocovariances, autoregression estimators, and the
//! martingale-plus-boundary decomposition of the covariance error.
//!
//! For a path `X_0 ..= X_n` with parameter `theta`, lag-`l` products are
//! centered at the stationary covariance `C_l = theta^l E xi^2 / (1 - theta^2)`.
//! Writing `Z_k = X_{k+l} X_k - C_l`, expanding one recursion step in each
//! factor gives the exact identity `Z_k = theta^2 Z_{k-1} + U_k` with
//!
//! ```text
//! U_k = theta X_{k+l-1} xi_k + theta xi_{k+l} X_{k-1} + xi_{k+l} xi_k - theta^l E xi^2,
//! ```
//!
//! and summing it telescopes the empirical covariance error into a mean of
//! the `U_k` plus a boundary term carried by `Z_0 - Z_{n-l}`. Everything
//! downstream (moment bookkeeping, block diagnostics, deviation statistics)
//! is built on that decomposition, so this module exposes the raw series
//! alongside the estimates.

use crate::ar1::SamplePath;
use crate::error::{Error, Result};

/// Stationary lag-`l` covariance `theta^l E xi^2 / (1 - theta^2)`.
pub fn theoretical_covariance(theta: f64, l: usize, second_moment: f64) -> f64 {
    theta.powi(l as i32) * second_moment / (1.0 - theta * theta)
}

fn check_lag(path: &SamplePath, l: usize) -> Result<()> {
    if l >= path.len() {
        return Err(Error::LagRange {
            lag: l,
            message: format!("path has only {} steps", path.len()),
        });
    }
    Ok(())
}

/// Empirical lag-`l` covariance `(1/(n-l)) sum_{k=1}^{n-l} X_{k+l} X_k`.
pub fn empirical_covariance(path: &SamplePath, l: usize) -> Result<f64> {
    check_lag(path, l)?;
    let states = path.states();
    let n = path.len();
    let sum: f64 = (1..=n - l).map(|k| states[k + l] * states[k]).sum();
    Ok(sum / (n - l) as f64)
}

/// Least-squares estimate `sum X_k X_{k-1} / sum_{k=1}^n X_{k-1}^2`.
pub fn ls_estimate(path: &SamplePath) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::LagRange {
            lag: 0,
            message: "estimation needs at least one step".into(),
        });
    }
    let states = path.states();
    let num: f64 = states.windows(2).map(|w| w[1] * w[0]).sum();
    let den: f64 = states[..states.len() - 1].iter().map(|x| x * x).sum();
    if den == 0.0 {
        return Err(Error::DegenerateSample(
            "regressor sum of squares is zero".into(),
        ));
    }
    Ok(num / den)
}

/// Yule-Walker estimate `sum X_k X_{k-1} / sum_{k=0}^n X_k^2`. The extra
/// `X_n^2` in the denominator pins the estimate inside (-1, 1).
pub fn yw_estimate(path: &SamplePath) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::LagRange {
            lag: 0,
            message: "estimation needs at least one step".into(),
        });
    }
    let states = path.states();
    let num: f64 = states.windows(2).map(|w| w[1] * w[0]).sum();
    let den: f64 = states.iter().map(|x| x * x).sum();
    if den == 0.0 {
        return Err(Error::DegenerateSample(
            "sample sum of squares is zero".into(),
        ));
    }
    Ok(num / den)
}

/// The exact increment `U_k` of the centered product recursion at lag `l`.
pub fn u_increment(path: &SamplePath, k: usize, l: usize, second_moment: f64) -> Result<f64> {
    check_lag(path, l)?;
    if k < 1 || k > path.len() - l {
        return Err(Error::HistoryRange(format!(
            "increment index {k} outside [1, {}]",
            path.len() - l
        )));
    }
    let theta = path.theta();
    let xi_k = path.noise_at(k as i64)?;
    let xi_kl = path.noise_at((k + l) as i64)?;
    Ok(
        theta * path.state(k + l - 1) * xi_k + theta * xi_kl * path.state(k - 1) + xi_kl * xi_k
            - theta.powi(l as i32) * second_moment,
    )
}

/// Lag-`l` covariance diagnostics: the estimate, its target, and the raw
/// centered-product and increment series driving the decomposition.
#[derive(Clone, Debug)]
pub struct CovarianceReport {
    pub l: usize,
    pub empirical: f64,
    pub theoretical: f64,
    /// `Z_k = X_{k+l} X_k - C_l` for `k = 0 ..= n - l`.
    pub z_series: Vec<f64>,
    /// `U_k` for `k = 1 ..= n - l`.
    pub u_series: Vec<f64>,
}

/// Build the full lag-`l` report for a path.
pub fn covariance_report(
    path: &SamplePath,
    l: usize,
    second_moment: f64,
) -> Result<CovarianceReport> {
    check_lag(path, l)?;
    let theta = path.theta();
    let n = path.len();
    let c_l = theoretical_covariance(theta, l, second_moment);
    let states = path.states();
    let z_series: Vec<f64> = (0..=n - l)
        .map(|k| states[k + l] * states[k] - c_l)
        .collect();
    let u_series: Vec<f64> = (1..=n - l)
        .map(|k| u_increment(path, k, l, second_moment))
        .collect::<Result<_>>()?;
    Ok(CovarianceReport {
        l,
        empirical: empirical_covariance(path, l)?,
        theoretical: c_l,
        z_series,
        u_series,
    })
}

/// Split the covariance error into its mean-increment and boundary parts:
///
/// ```text
/// C*_l - C_l = mean(U) / (1 - theta^2)
///            + theta^2 (Z_0 - Z_{n-l}) / ((n - l)(1 - theta^2)).
/// ```
///
/// Returns `(mean_term, boundary_term)`. At `theta = 0` the boundary term is
/// exactly zero.
pub fn representation_decompose(
    path: &SamplePath,
    l: usize,
    second_moment: f64,
) -> Result<(f64, f64)> {
    check_lag(path, l)?;
    let theta = path.theta();
    let n = path.len();
    let count = (n - l) as f64;
    let c_l = theoretical_covariance(theta, l, second_moment);
    let mut u_sum = 0.0;
    for k in 1..=n - l {
        u_sum += u_increment(path, k, l, second_moment)?;
    }
    let z0 = path.state(l) * path.state(0) - c_l;
    let z_last = path.state(n) * path.state(n - l) - c_l;
    let denom = (1.0 - theta * theta) * count;
    Ok((u_sum / denom, theta * theta * (z0 - z_last) / denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar1::InitPolicy;
    use crate::noise::NoiseModel;
    use crate::streams::{derive_rng, DOMAIN_PATH};
    use proptest::prelude::*;

    fn simulated(theta: f64, n: usize, seed: u64) -> SamplePath {
        let model = NoiseModel::standard_normal();
        let mut rng = derive_rng(seed, &[DOMAIN_PATH, 100]);
        SamplePath::simulate(theta, n, &model, &InitPolicy::truncated_default(), &mut rng).unwrap()
    }

    #[test]
    fn theoretical_covariance_example() {
        let c = theoretical_covariance(0.9, 2, 1.0);
        assert!((c - 0.81 / 0.19).abs() < 1e-12);
        assert_eq!(theoretical_covariance(0.0, 0, 2.5), 2.5);
    }

    #[test]
    fn noiseless_geometric_path_recovers_theta() {
        let theta = 0.73;
        let p = SamplePath::from_parts(theta, 1.0, vec![0.0; 60]).unwrap();
        let est = ls_estimate(&p).unwrap();
        assert!((est - theta).abs() <= 1e-14);
    }

    #[test]
    fn constant_path_covariances() {
        let p = SamplePath::from_parts(0.0, 0.0, vec![2.0, -2.0, 2.0, -2.0, 2.0, -2.0]).unwrap();
        // Alternating +-2: lag-0 mean square is 4, lag-1 products are -4.
        assert_eq!(empirical_covariance(&p, 0).unwrap(), 4.0);
        assert_eq!(empirical_covariance(&p, 1).unwrap(), -4.0);
    }

    #[test]
    fn zero_path_is_degenerate() {
        let p = SamplePath::from_parts(0.5, 0.0, vec![0.0; 20]).unwrap();
        assert!(matches!(yw_estimate(&p), Err(Error::DegenerateSample(_))));
        assert!(ls_estimate(&p).is_err());
    }

    #[test]
    fn lag_bounds_are_enforced() {
        let p = simulated(0.5, 50, 1);
        assert!(empirical_covariance(&p, 50).is_err());
        assert!(empirical_covariance(&p, 49).is_ok());
        assert!(covariance_report(&p, 50, 1.0).is_err());
    }

    #[test]
    fn ls_concentrates_at_moderate_theta() {
        let theta = 0.9;
        let n = 100_000;
        let p = simulated(theta, n, 5);
        let est = ls_estimate(&p).unwrap();
        let band = 3.0 * ((1.0 - theta * theta) / n as f64).sqrt();
        assert!(
            (est - theta).abs() <= band,
            "LS {est} vs {theta} (band {band})"
        );
    }

    #[test]
    fn yw_and_ls_differ_by_one_over_n() {
        let p = simulated(0.5, 1_000_000, 8);
        let ls = ls_estimate(&p).unwrap();
        let yw = yw_estimate(&p).unwrap();
        assert!(yw.abs() < 1.0);
        assert!((ls - yw).abs() < 50.0 / 1_000_000.0);
    }

    #[test]
    fn increment_recursion_is_exact() {
        let p = simulated(0.95, 3000, 13);
        for l in 0..=5usize {
            let rep = covariance_report(&p, l, 1.0).unwrap();
            let t2 = p.theta() * p.theta();
            for k in 1..rep.z_series.len() {
                let lhs = rep.z_series[k];
                let rhs = t2 * rep.z_series[k - 1] + rep.u_series[k - 1];
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
                    "recursion failed at lag {l}, index {k}"
                );
            }
        }
    }

    #[test]
    fn decomposition_sums_to_covariance_error() {
        for (theta, l, seed) in [(0.0, 0usize, 2u64), (0.5, 1, 3), (0.99, 2, 4)] {
            let p = simulated(theta, 5000, seed);
            let (mean_term, boundary_term) = representation_decompose(&p, l, 1.0).unwrap();
            let err = empirical_covariance(&p, l).unwrap() - theoretical_covariance(theta, l, 1.0);
            let total = mean_term + boundary_term;
            assert!(
                (total - err).abs() <= 1e-10 * (1.0 + err.abs()),
                "decomposition off at theta={theta}, l={l}: {total} vs {err}"
            );
            if theta == 0.0 {
                assert_eq!(boundary_term, 0.0);
            }
        }
    }

    #[test]
    fn boundary_share_shrinks_with_n() {
        let theta = 0.99;
        let p = simulated(theta, 100_000, 21);
        let (mean_term, boundary_term) = representation_decompose(&p, 1, 1.0).unwrap();
        assert!(boundary_term.abs() < 0.1 * (mean_term.abs() + 1e-3));
    }

    proptest! {
        #[test]
        fn yw_stays_inside_unit_interval(
            theta in 0.0f64..0.999,
            seed in 0u64..1000,
            n in 2usize..200,
        ) {
            let model = NoiseModel::standard_normal();
            let mut rng = derive_rng(seed, &[DOMAIN_PATH, 55]);
            let p = SamplePath::simulate(theta, n, &model, &InitPolicy::truncated_default(), &mut rng).unwrap();
            let yw = yw_estimate(&p).unwrap();
            prop_assert!(yw.abs() < 1.0);
        }

        #[test]
        fn decomposition_identity_randomized(
            theta in 0.0f64..0.995,
            seed in 0u64..10_000,
            n in 20usize..400,
            l in 0usize..4,
        ) {
            prop_assume!(l < n);
            let model = NoiseModel::standard_normal();
            let mut rng = derive_rng(seed, &[DOMAIN_PATH, 56]);
            let p = SamplePath::simulate(theta, n, &model, &InitPolicy::truncated_default(), &mut rng).unwrap();
            let (a, b) = representation_decompose(&p, l, 1.0).unwrap();
            let err = empirical_covariance(&p, l).unwrap() - theoretical_covariance(theta, l, 1.0);
            prop_assert!((a + b - err).abs() <= 1e-10 * (1.0 + err.abs()));
        }
    }
}
