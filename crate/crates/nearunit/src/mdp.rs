//! Deviation-band schedules, rate functions, and statistic scalings.
//!
//! A moderate-deviation experiment couples four quantities: the sample size
//! `n`, the autoregressive coefficient `theta_n = 1 - n^{-beta}` drifting
//! toward the unit root, the deviation scale `b_n = n^{gamma_b}` sitting
//! between the central-limit scale (bounded) and the large-deviation scale
//! (`sqrt(n)`), and the dependence window `m = ceil((1-theta)^{-e})` used by
//! the blocking analysis. The admissible region is
//!
//! ```text
//! 1/2 - 2 beta - gamma_b > 0,        1 < e < 5/4,
//! ```
//!
//! under which the scaled statistics obey
//!
//! ```text
//! (1/b_n^2) log P(statistic >= r) -> -rate(r)
//! ```
//!
//! with the quadratic rates implemented here:
//!
//! * lag-l covariance deviation: `r^2 / (8 (E xi^2)^2)`,
//! * linear combination with weights `a`: `r^2 / (2 Sigma^2)` where
//!   `Sigma^2 = 4 (sum a)^2 (E xi^2)^2`,
//! * least-squares / ratio estimators: `r^2 / 2`.
//!
//! The module also exposes the statistic scalings that turn raw deviations
//! into band-comparable values, and a condition table that reports, for each
//! schedule point, the five monitored quantities whose monotone movement
//! certifies that a schedule is inside the admissible regime.

use crate::error::{Error, Result};

/// Default exponent for the dependence window `m = ceil((1-theta)^{-e})`.
pub const DEFAULT_WINDOW_EXPONENT: f64 = 1.2;

/// Default exponent `gamma` in the block-growth condition
/// `b m^{1+gamma} / sqrt(n) -> 0`.
pub const DEFAULT_DEPENDENCE_GAMMA: f64 = 2.0 / 3.0;

/// One resolved experiment point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchedulePoint {
    pub n: u64,
    pub theta: f64,
    pub b: f64,
    pub m: usize,
}

/// A full experiment schedule: the points plus the exponents that generated
/// them (absent when the points were supplied explicitly).
#[derive(Clone, Debug)]
pub struct Schedule {
    points: Vec<SchedulePoint>,
    beta: Option<f64>,
    gamma_b: Option<f64>,
    window_exponent: f64,
    dependence_gamma: f64,
}

impl Schedule {
    pub fn points(&self) -> &[SchedulePoint] {
        &self.points
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn gamma_b(&self) -> Option<f64> {
        self.gamma_b
    }

    pub fn window_exponent(&self) -> f64 {
        self.window_exponent
    }

    pub fn dependence_gamma(&self) -> f64 {
        self.dependence_gamma
    }

    /// Wrap explicitly chosen points (no admissibility gate; the caller is
    /// asserting the regime).
    pub fn from_points(points: Vec<SchedulePoint>) -> Result<Self> {
        for p in &points {
            if !(p.theta >= 0.0 && p.theta < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "theta",
                    message: format!("coefficient {} outside [0, 1)", p.theta),
                });
            }
            if !(p.b.is_finite() && p.b > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "b",
                    message: format!("deviation scale {} must be positive", p.b),
                });
            }
            if p.m == 0 || p.n == 0 {
                return Err(Error::InvalidParameter {
                    name: "point",
                    message: "n and m must be positive".into(),
                });
            }
        }
        Ok(Self {
            points,
            beta: None,
            gamma_b: None,
            window_exponent: DEFAULT_WINDOW_EXPONENT,
            dependence_gamma: DEFAULT_DEPENDENCE_GAMMA,
        })
    }

    pub fn with_dependence_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dependence_gamma",
                message: format!("{gamma} must be positive"),
            });
        }
        self.dependence_gamma = gamma;
        Ok(self)
    }
}

/// Build a schedule from exponents: `theta = 1 - n^{-beta}`,
/// `b = n^{gamma_b}`, `m = ceil((1-theta)^{-exponent})`.
///
/// Rejects exponent pairs outside the admissible wedge
/// `1/2 - 2 beta - gamma_b > 0` and window exponents outside `(1, 5/4)`.
pub fn make_schedule(beta: f64, gamma_b: f64, ns: &[u64]) -> Result<Schedule> {
    make_schedule_with(beta, gamma_b, DEFAULT_WINDOW_EXPONENT, ns)
}

/// As [`make_schedule`] with an explicit window exponent.
pub fn make_schedule_with(
    beta: f64,
    gamma_b: f64,
    window_exponent: f64,
    ns: &[u64],
) -> Result<Schedule> {
    if !(beta.is_finite() && beta > 0.0) || !(gamma_b.is_finite() && gamma_b > 0.0) {
        return Err(Error::ScheduleRejected(format!(
            "exponents must be positive, got beta = {beta}, gamma_b = {gamma_b}"
        )));
    }
    let margin = 0.5 - 2.0 * beta - gamma_b;
    if margin <= 0.0 {
        return Err(Error::ScheduleRejected(format!(
            "need 1/2 - 2 beta - gamma_b > 0; got 1/2 - 2({beta}) - {gamma_b} = {margin}"
        )));
    }
    if !(window_exponent > 1.0 && window_exponent < 1.25) {
        return Err(Error::ScheduleRejected(format!(
            "window exponent {window_exponent} outside (1, 5/4)"
        )));
    }
    if ns.is_empty() {
        return Err(Error::InvalidParameter {
            name: "ns",
            message: "need at least one sample size".into(),
        });
    }
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "n",
                message: format!("sample size {n} too small"),
            });
        }
        let nf = n as f64;
        let one_minus = nf.powf(-beta);
        let point = SchedulePoint {
            n,
            theta: 1.0 - one_minus,
            b: nf.powf(gamma_b),
            m: one_minus.powf(-window_exponent).ceil() as usize,
        };
        points.push(point);
    }
    Ok(Schedule {
        points,
        beta: Some(beta),
        gamma_b: Some(gamma_b),
        window_exponent,
        dependence_gamma: DEFAULT_DEPENDENCE_GAMMA,
    })
}

/// The slowly-diverging variance proxy `K_n = (1 - theta)^{-2}`.
pub fn k_n(theta: f64) -> f64 {
    let one_minus = 1.0 - theta;
    1.0 / (one_minus * one_minus)
}

/// The window drift sum `K_m = theta (1 - theta^{m-1}) / (1 - theta)`,
/// the mean absolute displacement a window of length `m` accumulates.
pub fn k_m(theta: f64, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    theta * (1.0 - theta.powi(m as i32 - 1)) / (1.0 - theta)
}

/// One row of the schedule condition table: the five monitored quantities
/// whose monotone movement across points certifies the asymptotic regime.
#[derive(Clone, Copy, Debug)]
pub struct ConditionRow {
    pub n: u64,
    pub theta: f64,
    pub b: f64,
    pub m: usize,
    /// `sqrt(n) (1-theta)^2 / b`: the deviation scaling; must diverge.
    pub deviation_scale: f64,
    /// `n (1-theta)`: distance from the unit root in sample units; must
    /// diverge.
    pub root_distance: f64,
    /// `(1-theta) m`: window length against the correlation time; must
    /// diverge.
    pub window_coverage: f64,
    /// `m (1-theta) / |log(1-theta)|`: window coverage against the
    /// logarithmic correction; must diverge. Along `m ~ (1-theta)^{-6/5}`
    /// this trend only turns upward for very large `n` (around `3e14` when
    /// `beta = 0.15`), so condition tables should be read on wide grids.
    pub window_log_margin: f64,
    /// `b m^{1+gamma} / sqrt(n)`: the dependence load of the blocking step;
    /// must vanish.
    pub dependence_load: f64,
}

/// Evaluate the five monitored quantities at every schedule point.
pub fn condition_table(schedule: &Schedule) -> Vec<ConditionRow> {
    schedule
        .points()
        .iter()
        .map(|p| {
            let nf = p.n as f64;
            let one_minus = 1.0 - p.theta;
            let mf = p.m as f64;
            ConditionRow {
                n: p.n,
                theta: p.theta,
                b: p.b,
                m: p.m,
                deviation_scale: nf.sqrt() * one_minus * one_minus / p.b,
                root_distance: nf * one_minus,
                window_coverage: one_minus * mf,
                window_log_margin: mf * one_minus / one_minus.ln().abs(),
                dependence_load: p.b * mf.powf(1.0 + schedule.dependence_gamma) / nf.sqrt(),
            }
        })
        .collect()
}

fn validate_deviation(r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidDeviation(format!(
            "deviation level {r} must be positive and finite"
        )));
    }
    Ok(r)
}

fn validate_second_moment(m2: f64) -> Result<f64> {
    if !(m2.is_finite() && m2 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "second_moment",
            message: format!("{m2} must be positive and finite"),
        });
    }
    Ok(m2)
}

/// Rate for a single scaled covariance deviation: `r^2 / (8 (E xi^2)^2)`.
pub fn rate_covariance(r: f64, second_moment: f64) -> Result<f64> {
    let r = validate_deviation(r)?;
    let m2 = validate_second_moment(second_moment)?;
    Ok(r * r / (8.0 * m2 * m2))
}

/// Rate for a weighted combination of covariance deviations:
/// `r^2 / (2 Sigma^2)` with `Sigma^2 = 4 (sum a)^2 (E xi^2)^2`. A weight
/// vector summing to zero has no first-order deviation and therefore no
/// finite rate.
pub fn rate_linear_combination(r: f64, coefficients: &[f64], second_moment: f64) -> Result<f64> {
    let r = validate_deviation(r)?;
    let m2 = validate_second_moment(second_moment)?;
    if coefficients.is_empty() || coefficients.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "coefficients",
            message: "need a non-empty list of finite weights".into(),
        });
    }
    let sum: f64 = coefficients.iter().sum();
    let scale: f64 = coefficients.iter().map(|a| a.abs()).sum();
    // Exact cancellation and cancellation down to rounding noise both mean
    // the combination is degenerate at this order.
    if sum == 0.0 || sum.abs() < 1e-12 * scale {
        return Err(Error::DegenerateRate);
    }
    let sigma_sq = 4.0 * sum * sum * m2 * m2;
    Ok(r * r / (2.0 * sigma_sq))
}

/// Rate for the scaled estimator deviation: `r^2 / 2` for both ratio
/// estimators.
pub fn rate_estimator(r: f64) -> Result<f64> {
    let r = validate_deviation(r)?;
    Ok(r * r / 2.0)
}

/// A covariance deviation under both sample-size normalizations.
#[derive(Clone, Copy, Debug)]
pub struct ScaledDeviation {
    /// `(1-theta^2)^{3/2} sqrt(n) / b * deviation`.
    pub by_sqrt_n: f64,
    /// `(1-theta^2)^{3/2} sqrt(n-l) / b * deviation`; the lag-adjusted
    /// length matches the averaging window of the lag-l covariance and is
    /// the normalization used by the simulation statistics.
    pub by_sqrt_n_minus_l: f64,
}

/// Scale a raw covariance deviation into band units.
pub fn scaled_covariance_deviation(
    deviation: f64,
    theta: f64,
    n: u64,
    l: usize,
    b: f64,
) -> Result<ScaledDeviation> {
    if l as u64 >= n {
        return Err(Error::LagRange {
            lag: l,
            message: format!("lag must be below the sample size {n}"),
        });
    }
    let factor = (1.0 - theta * theta).powf(1.5) / b;
    Ok(ScaledDeviation {
        by_sqrt_n: factor * (n as f64).sqrt() * deviation,
        by_sqrt_n_minus_l: factor * ((n - l as u64) as f64).sqrt() * deviation,
    })
}

/// Scale a raw estimator deviation: `sqrt(n) / (b sqrt(1-theta^2)) * dev`.
pub fn scaled_estimator_deviation(deviation: f64, theta: f64, n: u64, b: f64) -> f64 {
    (n as f64).sqrt() / (b * (1.0 - theta * theta).sqrt()) * deviation
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_rate_examples() {
        assert_eq!(rate_covariance(2.0, 1.0).unwrap(), 0.5);
        assert_eq!(rate_covariance(1.0, 1.0).unwrap(), 0.125);
        assert_eq!(rate_covariance(1.0, 2.0).unwrap(), 1.0 / 32.0);
    }

    #[test]
    fn linear_rate_examples() {
        // Weights summing to one reproduce the covariance rate.
        let r = rate_linear_combination(2.0, &[0.5, 0.5], 1.0).unwrap();
        assert_eq!(r, 0.5);
        assert!(matches!(
            rate_linear_combination(1.0, &[0.5, -0.5], 1.0),
            Err(Error::DegenerateRate)
        ));
        // Cancellation to rounding noise is degenerate too.
        assert!(matches!(
            rate_linear_combination(1.0, &[1.0, 1e-17, -1.0], 1.0),
            Err(Error::DegenerateRate)
        ));
    }

    #[test]
    fn estimator_rate_examples() {
        assert_eq!(rate_estimator(1.0).unwrap(), 0.5);
        assert_eq!(rate_estimator(2.0).unwrap(), 2.0);
        assert_eq!(rate_estimator(0.5).unwrap(), 0.125);
    }

    #[test]
    fn doubling_the_deviation_quadruples_every_rate() {
        for r in [0.3, 1.0, 2.5] {
            assert_eq!(
                rate_covariance(2.0 * r, 0.7).unwrap(),
                4.0 * rate_covariance(r, 0.7).unwrap()
            );
            assert_eq!(
                rate_linear_combination(2.0 * r, &[0.2, 0.3], 0.7).unwrap(),
                4.0 * rate_linear_combination(r, &[0.2, 0.3], 0.7).unwrap()
            );
            assert_eq!(
                rate_estimator(2.0 * r).unwrap(),
                4.0 * rate_estimator(r).unwrap()
            );
        }
    }

    #[test]
    fn rates_reject_bad_deviations() {
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(rate_covariance(bad, 1.0).is_err());
            assert!(rate_estimator(bad).is_err());
        }
    }

    #[test]
    fn schedule_gate_accepts_and_rejects() {
        assert!(make_schedule(0.15, 0.1, &[10_000]).is_ok());
        let err = make_schedule(0.2, 0.2, &[10_000]).unwrap_err();
        match err {
            Error::ScheduleRejected(msg) => {
                assert!(
                    msg.contains("1/2 - 2"),
                    "message should name the inequality: {msg}"
                )
            }
            other => panic!("unexpected error {other:?}"),
        }
        // Window exponent must stay inside (1, 5/4).
        assert!(make_schedule_with(0.15, 0.1, 1.0, &[10_000]).is_err());
        assert!(make_schedule_with(0.15, 0.1, 1.3, &[10_000]).is_err());
        assert!(make_schedule_with(0.15, 0.1, 1.24, &[10_000]).is_ok());
    }

    #[test]
    fn schedule_point_values() {
        let s = make_schedule(0.15, 0.05, &[10_000, 50_000, 200_000]).unwrap();
        let p = s.points();
        assert!((p[0].theta - 0.748811).abs() < 1e-6);
        assert!((p[0].b - 1.584893).abs() < 1e-6);
        assert_eq!(p[0].m, 6);
        assert!((p[1].theta - 0.8026875).abs() < 1e-6);
        assert_eq!(p[1].m, 8);
        assert!((p[2].theta - 0.839733).abs() < 1e-6);
        assert_eq!(p[2].m, 9);

        let s = make_schedule(0.15, 0.1, &[1_000_000]).unwrap();
        let p = &s.points()[0];
        assert!((p.theta - 0.874107).abs() < 1e-5);
        assert_eq!(p.m, 13);
    }

    #[test]
    fn variance_proxies() {
        assert!((k_n(0.9) - 100.0).abs() < 1e-9);
        assert_eq!(k_n(0.0), 1.0);
        assert_eq!(k_m(0.0, 5), 0.0);
        // theta = 0.5, m = 3: 0.5 (1 - 0.25) / 0.5 = 0.75.
        assert!((k_m(0.5, 3) - 0.75).abs() < 1e-15);
        // Approaches m - 1 near the root.
        assert!((k_m(0.9999999, 11) - 10.0).abs() < 1e-4);
    }

    #[test]
    fn scaled_deviation_examples() {
        // theta = 0: factor 1, so the statistic is sqrt(n)/b * dev.
        let s = scaled_covariance_deviation(0.1, 0.0, 10_000, 0, 10.0).unwrap();
        assert!((s.by_sqrt_n - 1.0).abs() < 1e-12);
        assert_eq!(s.by_sqrt_n, s.by_sqrt_n_minus_l);
        // Lag shortens the window normalization only.
        let s = scaled_covariance_deviation(0.1, 0.0, 10_000, 19, 10.0).unwrap();
        assert!((s.by_sqrt_n_minus_l - (9981f64).sqrt() / 100.0 * 0.1 * 10.0).abs() < 1e-12);
        assert!(s.by_sqrt_n_minus_l < s.by_sqrt_n);
        // Near-root example frozen from the closed form.
        let s = scaled_covariance_deviation(0.01, 0.99, 10_000, 0, 5.0).unwrap();
        let expect = (1.0 - 0.99f64 * 0.99).powf(1.5) * 100.0 / 5.0 * 0.01;
        assert_eq!(s.by_sqrt_n, expect);
        // Estimator scaling with b = 1 is the central-limit statistic.
        let z = scaled_estimator_deviation(0.02, 0.99, 10_000, 1.0);
        assert!((z - 100.0 * 0.02 / (1.0 - 0.9801f64).sqrt()).abs() < 1e-12);
        // Lag must stay below the sample size.
        assert!(scaled_covariance_deviation(0.1, 0.0, 10, 10, 1.0).is_err());
    }

    #[test]
    fn condition_trends_on_wide_grids() {
        // The five monitored quantities move in their proven directions
        // once n is large enough for the window-log margin to turn (the
        // trend reverses below n of roughly 3e14 for this exponent family).
        let ns: Vec<u64> = vec![
            1_000_000_000_000_000,
            10_000_000_000_000_000,
            100_000_000_000_000_000,
            1_000_000_000_000_000_000,
            10_000_000_000_000_000_000,
        ];
        let s = make_schedule(0.15, 0.1, &ns).unwrap();
        let table = condition_table(&s);
        for w in table.windows(2) {
            assert!(w[1].deviation_scale > w[0].deviation_scale);
            assert!(w[1].root_distance > w[0].root_distance);
            assert!(w[1].window_coverage > w[0].window_coverage);
            assert!(w[1].window_log_margin > w[0].window_log_margin);
            assert!(w[1].dependence_load < w[0].dependence_load);
        }
        // And the load actually vanishes while the scales diverge.
        assert!(table.last().unwrap().dependence_load < 0.05);
        assert!(table.last().unwrap().deviation_scale > 10.0);
    }

    #[test]
    fn explicit_points_are_validated() {
        assert!(Schedule::from_points(vec![SchedulePoint {
            n: 100,
            theta: 1.0,
            b: 2.0,
            m: 4
        }])
        .is_err());
        assert!(Schedule::from_points(vec![SchedulePoint {
            n: 100,
            theta: 0.5,
            b: 2.0,
            m: 4
        }])
        .is_ok());
    }
}
