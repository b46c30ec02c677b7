//! Closed-form moments of the m-dependent increment approximation.
//!
//! The exact covariance-error increment `U_k` at lag `l` involves the full
//! states `X_{k-1}` and `X_{k+l-1}`, which reach arbitrarily far into the
//! past. Replacing both by their m-window truncations gives
//!
//! ```text
//! U_{k,l,m} = sum_{j=1}^{m-1} theta^j xi_{k+l-j} xi_k
//!           + sum_{j=1}^{m-1} theta^j xi_{k+l} xi_{k-j}
//!           + xi_{k+l} xi_k - theta^l E xi^2,
//! ```
//!
//! a strictly stationary, `(m + l)`-dependent sequence of centered variables.
//! Everything the block large-deviation machinery needs about this sequence
//! reduces to second moments of pairs `E U_{i, l} U_{i+gap, q}` and of the
//! lag combinations `Yhat_i = sum_q a_q U_{i, q}`, and each of those moments
//! has a closed form in `theta`, `m`, `E xi^2`, `E xi^4` built from the
//! even geometric sums `sum_j theta^{2j}`.
//!
//! This module implements those closed forms. Each of them is verified in
//! two independent ways: against an exhaustive enumeration oracle over
//! finitely supported noise laws (see [`oracle`]), and against one another
//! where two formulas must agree (block variance branches, bilinear versus
//! direct lag-combination assembly). The formulas are the single source of
//! truth for theoretical variances in the Monte Carlo layer, so their tests
//! freeze the oracle-confirmed values.

pub mod oracle;

use crate::ar1::SamplePath;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;

/// Even geometric sum `sum_{j=lo}^{hi} theta^{2j}`, empty sums being zero
/// and `0^0 = 1` so that `theta = 0` degenerates correctly.
pub fn geom_even(theta: f64, lo: i64, hi: i64) -> f64 {
    if hi < lo {
        return 0.0;
    }
    let t2 = theta * theta;
    if t2 == 0.0 {
        return if lo == 0 { 1.0 } else { 0.0 };
    }
    debug_assert!(lo >= 0, "negative lower limit {lo}");
    (t2.powi(lo as i32) - t2.powi(hi as i32 + 1)) / (1.0 - t2)
}

/// Parameters of an m-dependent increment window.
///
/// `l` is the primary lag and `q` the secondary lag used by mixed-pair
/// moments. `max_lag` bounds every lag the window will ever be asked about,
/// and the block length must satisfy `m > 2 max_lag` so that the lag
/// geometry of the closed forms (which caps geometric sums at `m - 1 - l - q`
/// and similar) never collapses.
#[derive(Clone, Debug, PartialEq)]
pub struct UWindow {
    theta: f64,
    m: usize,
    l: usize,
    q: usize,
    max_lag: usize,
    second_moment: f64,
    fourth_moment: f64,
    coefficients: Option<Vec<f64>>,
}

impl UWindow {
    pub fn new(
        theta: f64,
        m: usize,
        l: usize,
        q: usize,
        max_lag: usize,
        moments: (f64, f64),
    ) -> Result<Self> {
        if !theta.is_finite() || !(0.0..1.0).contains(&theta) {
            return Err(Error::InvalidParameter {
                name: "theta",
                message: format!("must lie in [0, 1), got {theta}"),
            });
        }
        if m <= 2 * max_lag {
            return Err(Error::WindowInvariant(format!(
                "block length {m} must exceed twice the maximal lag {max_lag}"
            )));
        }
        if m < 2 {
            return Err(Error::WindowInvariant(format!(
                "block length {m} must be at least 2"
            )));
        }
        if l > max_lag || q > max_lag {
            return Err(Error::WindowInvariant(format!(
                "lags ({l}, {q}) exceed the maximal lag {max_lag}"
            )));
        }
        let (m2, m4) = moments;
        if !m2.is_finite() || m2 <= 0.0 || !m4.is_finite() || m4 < m2 * m2 {
            return Err(Error::InvalidParameter {
                name: "moments",
                message: format!("need 0 < m2 and m4 >= m2^2, got ({m2}, {m4})"),
            });
        }
        Ok(Self {
            theta,
            m,
            l,
            q,
            max_lag,
            second_moment: m2,
            fourth_moment: m4,
            coefficients: None,
        })
    }

    pub fn from_model(
        theta: f64,
        m: usize,
        l: usize,
        q: usize,
        max_lag: usize,
        model: &NoiseModel,
    ) -> Result<Self> {
        Self::new(
            theta,
            m,
            l,
            q,
            max_lag,
            (model.second_moment(), model.fourth_moment()),
        )
    }

    /// Attach lag-combination coefficients `a_0 ..= a_max_lag`.
    pub fn with_coefficients(mut self, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != self.max_lag + 1 {
            return Err(Error::InvalidParameter {
                name: "coefficients",
                message: format!(
                    "need max_lag + 1 = {} entries, got {}",
                    self.max_lag + 1,
                    coefficients.len()
                ),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "coefficients",
                message: "entries must be finite".into(),
            });
        }
        self.coefficients = Some(coefficients);
        Ok(self)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn fourth_moment(&self) -> f64 {
        self.fourth_moment
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        self.coefficients.as_deref()
    }

    fn coefficients_required(&self) -> Result<&[f64]> {
        self.coefficients.as_deref().ok_or_else(|| {
            Error::MissingCoefficients(
                "lag-combination moments need coefficients on the window".into(),
            )
        })
    }
}

/// Evaluate the truncated increment `U_{k, l, m}` on a concrete path.
///
/// Requires the path to retain noise on the whole window
/// `[k - m + 1, k + l]` and to share the window's `theta`.
pub fn u_value(path: &SamplePath, k: i64, window: &UWindow) -> Result<f64> {
    if path.theta() != window.theta {
        return Err(Error::InvalidParameter {
            name: "window",
            message: format!(
                "window theta {} does not match path theta {}",
                window.theta,
                path.theta()
            ),
        });
    }
    let l = window.l as i64;
    let theta = window.theta;
    let xi_k = path.noise_at(k)?;
    let xi_kl = path.noise_at(k + l)?;
    let top = path.truncated_state(k + l, window.m)?;
    let prev = path.truncated_state(k, window.m)?;
    Ok(theta * top * xi_k + theta * xi_kl * prev + xi_kl * xi_k
        - theta.powi(window.l as i32) * window.second_moment)
}

/// `E U_{k, l, m}^2` at the window's primary lag.
pub fn u_second_moment(window: &UWindow) -> f64 {
    u_second_moment_at(window, window.l)
}

fn u_second_moment_at(window: &UWindow, lag: usize) -> f64 {
    let t = window.theta;
    let m = window.m as i64;
    let m2 = window.second_moment;
    let m4 = window.fourth_moment;
    let tail = geom_even(t, 1, m - 1);
    if lag == 0 {
        m4 + m2 * m2 * (4.0 * tail - 1.0)
    } else {
        let t2l = t.powi(2 * lag as i32);
        t2l * m4 + (1.0 - 2.0 * t2l + 2.0 * tail) * m2 * m2
    }
}

/// `E U_{i, l, m} U_{i+gap, l, m}` for `gap >= 1` at the window's primary lag.
pub fn u_cross_same_lag(window: &UWindow, gap: usize) -> Result<f64> {
    if gap == 0 {
        return Err(Error::InvalidParameter {
            name: "gap",
            message: "same-lag cross moments need gap >= 1; gap 0 is the variance".into(),
        });
    }
    Ok(cross_same_lag_at(window, window.l, gap))
}

fn cross_same_lag_at(window: &UWindow, lag: usize, gap: usize) -> f64 {
    if lag == 0 || gap > lag {
        return 0.0;
    }
    let t = window.theta;
    let m = window.m as i64;
    let m2 = window.second_moment;
    let t2l = t.powi(2 * lag as i32);
    if gap < lag {
        t2l * m2 * m2
    } else {
        t2l * m2 * m2 * geom_even(t, 0, m - 1 - 2 * lag as i64)
    }
}

/// `E U_{i, l, m} U_{i+gap, q, m}` where `l` sits at the earlier index and
/// `q` at the later one. `gap = 0` is the symmetric same-index product.
pub fn u_cross_mixed(window: &UWindow, gap: usize) -> f64 {
    cross_mixed_at(window, gap, window.l, window.q)
}

fn cross_mixed_at(window: &UWindow, gap: usize, l_early: usize, l_late: usize) -> f64 {
    let t = window.theta;
    let m = window.m as i64;
    let m2 = window.second_moment;
    let m4 = window.fourth_moment;
    if gap == 0 {
        let (a, b) = (l_early.min(l_late), l_early.max(l_late));
        if a == b {
            return u_second_moment_at(window, a);
        }
        if a == 0 {
            // One factor at lag zero, the other at lag b.
            let tb = t.powi(b as i32);
            return tb * m4 - tb * m2 * m2 + 2.0 * m2 * m2 * tb * geom_even(t, 1, m - 1 - b as i64);
        }
        // 0 < a < b.
        let tab = t.powi((a + b) as i32);
        return tab * m4 - 2.0 * tab * m2 * m2
            + t.powi((b - a) as i32) * m2 * m2 * geom_even(t, 0, m - 1 - (b - a) as i64);
    }
    // gap >= 1. Indicators compare the earlier-index lag against the gap:
    // correlation survives only when the earlier window reaches at least as
    // far as the later base (strict reach contributes the full geometric
    // mass, exact alignment only the in-window part).
    if l_early == 0 {
        return 0.0;
    }
    if l_early == l_late {
        return cross_same_lag_at(window, l_early, gap);
    }
    let reach = |lag: usize, cap: i64| -> f64 {
        if lag > gap {
            1.0
        } else if lag == gap {
            geom_even(t, 0, cap)
        } else {
            0.0
        }
    };
    if l_late == 0 {
        let cap = m - 1 - l_early as i64;
        return 2.0 * t.powi(l_early as i32) * m2 * m2 * reach(l_early, cap);
    }
    let sum = (l_early + l_late) as i64;
    let base = t.powi(sum as i32) * m2 * m2 * reach(l_early, m - 1 - sum);
    if l_early < l_late {
        base
    } else {
        // The overhanging early window can also align with the later
        // window's own lag; that echo sits at lag distance l_early - l_late
        // and requires reaching past gap + l_late.
        let diff = (l_early - l_late) as i64;
        let echo_reach = if l_early > gap + l_late {
            1.0
        } else if l_early == gap + l_late {
            geom_even(t, 0, m - 1 - diff)
        } else {
            0.0
        };
        base + t.powi(diff as i32) * m2 * m2 * echo_reach
    }
}

/// Exact variance of the block sum `U_1 + ... + U_m` at the window's primary
/// lag, counting every cross pair individually.
pub fn block_variance_exact(window: &UWindow) -> f64 {
    let lag = window.l;
    let m = window.m as f64;
    let base = m * u_second_moment(window);
    if lag == 0 {
        return base;
    }
    let t = window.theta;
    let m2 = window.second_moment;
    let lf = lag as f64;
    let near_pairs = (lf - 1.0) * m - lf * (lf - 1.0) / 2.0;
    let aligned = (m - lf) * geom_even(t, 0, window.m as i64 - 1 - 2 * lag as i64);
    base + 2.0 * m2 * m2 * t.powi(2 * lag as i32) * (near_pairs + aligned)
}

/// Collapsed block-variance aggregate that merges the boundary pairs into a
/// single `(m - l)` multiplicity. Coincides with [`block_variance_exact`]
/// for `l <= 1` but undercounts the pairs overhanging the block end by
/// `l (l - 1) theta^{2l} (E xi^2)^2` for larger lags; it is kept so the
/// verification sweep can log that discrepancy instead of hiding it.
pub fn block_variance_collapsed(window: &UWindow) -> f64 {
    let lag = window.l;
    let m = window.m as f64;
    let base = m * u_second_moment(window);
    if lag == 0 {
        return base;
    }
    let t = window.theta;
    let m2 = window.second_moment;
    let t2l = t.powi(2 * lag as i32);
    let tail = geom_even(t, 1, window.m as i64 - 1 - 2 * lag as i64);
    base + 2.0 * (m - lag as f64) * (lag as f64 * t2l * m2 * m2 + m2 * m2 * t2l * tail)
}

/// Weighted cross sum `sum_{k=1}^{m} k E U_{i, l} U_{i+k, l}`; the time-
/// weighted residue left by summation by parts over a block.
pub fn weighted_time_sum(window: &UWindow) -> f64 {
    let lag = window.l;
    if lag == 0 {
        return 0.0;
    }
    let t = window.theta;
    let m2 = window.second_moment;
    let lf = lag as f64;
    let aligned = lf * geom_even(t, 0, window.m as i64 - 1 - 2 * lag as i64);
    t.powi(2 * lag as i32) * m2 * m2 * (lf * (lf - 1.0) / 2.0 + aligned)
}

/// `E Yhat^2` for the lag combination `Yhat = sum_q a_q U_{i, q}`,
/// assembled from the per-group closed forms.
pub fn hat_second_moment(window: &UWindow) -> Result<f64> {
    let a = window.coefficients_required()?;
    let t = window.theta;
    let m = window.m as i64;
    let m2 = window.second_moment;
    let m4 = window.fourth_moment;
    let mut total = a[0] * a[0] * u_second_moment_at(window, 0);
    for (lag, &al) in a.iter().enumerate().skip(1) {
        // Same-lag squares.
        total += al * al * u_second_moment_at(window, lag);
        // Zero-lag against lag > 0.
        let tl = t.powi(lag as i32);
        total += 2.0
            * a[0]
            * al
            * (tl * (m4 - m2 * m2) + 2.0 * m2 * m2 * tl * geom_even(t, 1, m - 1 - lag as i64));
        // Distinct positive lags.
        for (lag2, &aq) in a.iter().enumerate().skip(1) {
            if lag2 == lag {
                continue;
            }
            let tsum = t.powi((lag + lag2) as i32);
            let diff = lag.abs_diff(lag2) as i64;
            total += al
                * aq
                * (tsum * (m4 - 2.0 * m2 * m2)
                    + t.powi(diff as i32) * m2 * m2 * geom_even(t, 0, m - 1 - diff));
        }
    }
    Ok(total)
}

/// `E Yhat^2` through the generic mixed-pair dispatch; an independent route
/// that must agree with [`hat_second_moment`].
pub fn hat_second_moment_bilinear(window: &UWindow) -> Result<f64> {
    let a = window.coefficients_required()?;
    let mut total = 0.0;
    for (le, &ae) in a.iter().enumerate() {
        for (lk, &ak) in a.iter().enumerate() {
            total += ae * ak * cross_mixed_at(window, 0, le, lk);
        }
    }
    Ok(total)
}

/// `E Yhat_i Yhat_{i+gap}` for `gap >= 1`, assembled from the five direct
/// interaction groups of the lag combination.
pub fn hat_cross(window: &UWindow, gap: usize) -> Result<f64> {
    if gap == 0 {
        return Err(Error::InvalidParameter {
            name: "gap",
            message: "lag-combination cross moments need gap >= 1".into(),
        });
    }
    let a = window.coefficients_required()?;
    let t = window.theta;
    let m = window.m as i64;
    let m2 = window.second_moment;
    let reach = |lag: usize, cap: i64| -> f64 {
        if lag > gap {
            1.0
        } else if lag == gap {
            geom_even(t, 0, cap)
        } else {
            0.0
        }
    };
    let mut total = 0.0;
    for (le, &ae) in a.iter().enumerate().skip(1) {
        // Earlier lag against the later zero-lag term (both orders of the
        // zero-lag coefficient, hence the factor two).
        total += 2.0 * m2 * m2 * a[0] * ae * t.powi(le as i32) * reach(le, m - 1 - le as i64);
        // Same lag on both sides.
        total += m2 * m2 * ae * ae * t.powi(2 * le as i32) * reach(le, m - 1 - 2 * le as i64);
        for (lk, &ak) in a.iter().enumerate().skip(1) {
            if lk == le {
                continue;
            }
            let sum = (le + lk) as i64;
            total += m2 * m2 * ae * ak * t.powi(sum as i32) * reach(le, m - 1 - sum);
            if le > lk {
                // Echo of the overhanging early window on the later lag.
                let diff = (le - lk) as i64;
                let echo = if le > gap + lk {
                    1.0
                } else if le == gap + lk {
                    geom_even(t, 0, m - 1 - diff)
                } else {
                    0.0
                };
                total += m2 * m2 * ae * ak * t.powi(diff as i32) * echo;
            }
        }
    }
    Ok(total)
}

/// `E Yhat_i Yhat_{i+gap}` through the generic mixed-pair dispatch.
pub fn hat_cross_bilinear(window: &UWindow, gap: usize) -> Result<f64> {
    if gap == 0 {
        return Err(Error::InvalidParameter {
            name: "gap",
            message: "lag-combination cross moments need gap >= 1".into(),
        });
    }
    let a = window.coefficients_required()?;
    let mut total = 0.0;
    for (le, &ae) in a.iter().enumerate() {
        for (lk, &ak) in a.iter().enumerate() {
            total += ae * ak * cross_mixed_at(window, gap, le, lk);
        }
    }
    Ok(total)
}

/// Variance of the block sum `Yhat_1 + ... + Yhat_m`.
pub fn hat_block_variance(window: &UWindow) -> Result<f64> {
    let m = window.m;
    let mut total = m as f64 * hat_second_moment(window)?;
    for gap in 1..=window.max_lag.min(m - 1) {
        total += 2.0 * (m - gap) as f64 * hat_cross(window, gap)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar1::InitPolicy;
    use crate::streams::{derive_rng, DOMAIN_CHECK, DOMAIN_PATH};

    fn window(theta: f64, m: usize, l: usize, q: usize, m2: f64, m4: f64) -> UWindow {
        UWindow::new(theta, m, l, q, 2.max(l).max(q), (m2, m4)).unwrap()
    }

    #[test]
    fn geom_even_basics() {
        assert_eq!(geom_even(0.5, 1, 0), 0.0);
        assert_eq!(geom_even(0.0, 0, 5), 1.0);
        assert_eq!(geom_even(0.0, 1, 5), 0.0);
        let direct: f64 = (2..=7).map(|j| 0.3f64.powi(2 * j)).sum();
        assert!((geom_even(0.3, 2, 7) - direct).abs() < 1e-15);
        // Large windows collapse to the full geometric limit.
        let full = geom_even(0.9999, 1, 1_000_000);
        let limit = 0.9999f64.powi(2) / (1.0 - 0.9999f64.powi(2));
        assert!((full - limit).abs() < 1e-9 * limit);
    }

    #[test]
    fn window_validation() {
        assert!(UWindow::new(0.5, 4, 1, 1, 2, (1.0, 1.0)).is_err()); // m <= 2 max_lag
        assert!(UWindow::new(0.5, 5, 3, 0, 2, (1.0, 1.0)).is_err()); // lag beyond max
        assert!(UWindow::new(1.0, 5, 0, 0, 2, (1.0, 1.0)).is_err()); // theta at one
        assert!(UWindow::new(0.5, 5, 0, 0, 2, (1.0, 0.5)).is_err()); // Jensen violated
        assert!(UWindow::new(0.5, 5, 0, 0, 2, (1.0, 3.0)).is_ok());
        let w = window(0.5, 6, 1, 0, 1.0, 3.0);
        assert!(w.clone().with_coefficients(vec![1.0]).is_err());
        assert!(w.with_coefficients(vec![0.0, 1.0, 0.0]).is_ok());
    }

    #[test]
    fn second_moment_reference_values() {
        // Rademacher, l = 1, m = 12, theta = 0.5:
        // 0.25 + (1 - 0.5 + 2 sum_{j=1}^{11} 0.25^j) = 1.41666...
        let w = window(0.5, 12, 1, 0, 1.0, 1.0);
        let expect = 0.25 + 1.0 - 0.5 + 2.0 * (1..=11).map(|j| 0.25f64.powi(j)).sum::<f64>();
        assert!((u_second_moment(&w) - expect).abs() < 1e-14);
        assert!((expect - 1.416666).abs() < 1e-5);

        // Standard normal, l = 0, m = 12, theta = 0.5: 2 + 4 sum = 3.33333...
        let w = window(0.5, 12, 0, 0, 1.0, 3.0);
        let expect = 3.0 + (4.0 * (1..=11).map(|j| 0.25f64.powi(j)).sum::<f64>() - 1.0);
        assert!((u_second_moment(&w) - expect).abs() < 1e-14);
        assert!((expect - 3.333333).abs() < 1e-5);

        // theta = 0, l = 0 degenerates to Var(xi^2).
        let w = window(0.0, 8, 0, 0, 0.5, 0.5);
        assert_eq!(u_second_moment(&w), 0.5 - 0.25);
    }

    #[test]
    fn same_lag_cross_reference_values() {
        // l = 2, gap = 1: full alignment mass theta^4.
        let w = window(0.5, 12, 2, 0, 1.0, 1.0);
        assert!((u_cross_same_lag(&w, 1).unwrap() - 0.0625).abs() < 1e-15);
        // l = 1, gap = 2: no alignment.
        let w = window(0.5, 12, 1, 0, 1.0, 1.0);
        assert_eq!(u_cross_same_lag(&w, 2).unwrap(), 0.0);
        // Zero lag never correlates across indices.
        let w = window(0.7, 9, 0, 0, 1.0, 3.0);
        assert_eq!(u_cross_same_lag(&w, 1).unwrap(), 0.0);
        assert!(u_cross_same_lag(&w, 0).is_err());
    }

    #[test]
    fn mixed_cross_vanishes_beyond_reach() {
        for gap in 3..20 {
            let w = window(0.6, 7, 2, 1, 1.0, 1.0);
            assert_eq!(u_cross_mixed(&w, gap), 0.0, "gap {gap}");
        }
        // Early zero lag kills every positive gap.
        let w = window(0.6, 7, 0, 2, 1.0, 1.0);
        assert_eq!(u_cross_mixed(&w, 1), 0.0);
    }

    #[test]
    fn block_variance_branches_agree_for_small_lags() {
        for theta in [0.0, 0.3, 0.7, 0.9] {
            for m in [5, 8, 12] {
                for l in [0usize, 1] {
                    let w = window(theta, m, l, 0, 1.0, 3.0);
                    let exact = block_variance_exact(&w);
                    let collapsed = block_variance_collapsed(&w);
                    assert!(
                        (exact - collapsed).abs() <= 1e-12 * (1.0 + exact.abs()),
                        "branch mismatch at theta={theta}, m={m}, l={l}"
                    );
                }
            }
        }
    }

    #[test]
    fn collapsed_block_variance_undercounts_large_lags() {
        // The merged boundary multiplicity misses l (l - 1) theta^{2l} m2^2.
        for (theta, m2) in [(0.3, 1.0), (0.7, 1.0), (0.5, 0.5)] {
            let w = UWindow::new(theta, 9, 2, 0, 2, (m2, 3.0 * m2 * m2)).unwrap();
            let gap = block_variance_exact(&w) - block_variance_collapsed(&w);
            let expect = 2.0 * theta.powi(4) * m2 * m2;
            assert!(
                (gap - expect).abs() < 1e-13,
                "undercount at theta={theta}: {gap} vs {expect}"
            );
        }
    }

    #[test]
    fn weighted_time_sum_values() {
        let w = window(0.5, 12, 0, 0, 1.0, 3.0);
        assert_eq!(weighted_time_sum(&w), 0.0);
        // l = 1: single aligned term with weight 1.
        let w = window(0.5, 12, 1, 0, 1.0, 3.0);
        let expect = 0.25 * geom_even(0.5, 0, 9);
        assert!((weighted_time_sum(&w) - expect).abs() < 1e-15);
        // l = 2: near term weight sum 1 plus aligned weight 2.
        let w = window(0.5, 12, 2, 0, 1.0, 3.0);
        let expect = 0.5f64.powi(4) * (1.0 + 2.0 * geom_even(0.5, 0, 7));
        assert!((weighted_time_sum(&w) - expect).abs() < 1e-15);
    }

    #[test]
    fn one_hot_combinations_reduce_to_plain_moments() {
        for hot in 0..=2usize {
            let mut coeffs = vec![0.0; 3];
            coeffs[hot] = 1.0;
            let w = UWindow::new(0.6, 9, hot, 0, 2, (1.0, 3.0))
                .unwrap()
                .with_coefficients(coeffs)
                .unwrap();
            assert_eq!(hat_second_moment(&w).unwrap(), u_second_moment(&w));
            for gap in 1..=3 {
                let plain = if hot == 0 {
                    0.0
                } else {
                    cross_same_lag_at(&w, hot, gap)
                };
                assert_eq!(hat_cross(&w, gap).unwrap(), plain, "hot={hot}, gap={gap}");
            }
        }
    }

    #[test]
    fn direct_and_bilinear_routes_agree() {
        let coeff_sets = [
            vec![0.6, -0.3, 0.2],
            vec![1.0, 1.0, 1.0],
            vec![-0.5, 0.0, 2.0],
        ];
        for theta in [0.0, 0.3, 0.7, 0.9] {
            for m in [5usize, 6, 9, 14] {
                for coeffs in &coeff_sets {
                    let w = UWindow::new(theta, m, 0, 0, 2, (0.5, 0.5))
                        .unwrap()
                        .with_coefficients(coeffs.clone())
                        .unwrap();
                    let a = hat_second_moment(&w).unwrap();
                    let b = hat_second_moment_bilinear(&w).unwrap();
                    assert!(
                        (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
                        "variance route mismatch theta={theta} m={m}"
                    );
                    for gap in 1..=3 {
                        let a = hat_cross(&w, gap).unwrap();
                        let b = hat_cross_bilinear(&w, gap).unwrap();
                        assert!(
                            (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
                            "cross route mismatch theta={theta} m={m} gap={gap}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn estimator_weights_expose_the_boundary_correction() {
        // a = (-theta c, c) with c = 1/((1 - theta^2) m2) mirrors the
        // least-squares numerator. For these theta-dependent weights the
        // combination nearly telescopes into a martingale, so the scaled
        // block variance is m2^2 plus a boundary term of order
        // K_n / m = (1 - theta)^{-2} / m: the limit only emerges once m
        // grows past K_n, which no admissible window schedule does. This
        // is why the toolkit normalizes the estimator statistic directly
        // instead of routing it through the block variance.
        let theta = 0.99f64;
        let c = 1.0 / (1.0 - theta * theta);
        let scaled = |m: usize| {
            let w = UWindow::new(theta, m, 0, 0, 1, (1.0, 3.0))
                .unwrap()
                .with_coefficients(vec![-theta * c, c])
                .unwrap();
            (1.0 - theta * theta) / m as f64 * hat_block_variance(&w).unwrap()
        };
        let errs: Vec<f64> = [100_000, 1_000_000, 10_000_000]
            .into_iter()
            .map(|m| scaled(m) - 1.0)
            .collect();
        // Positive excess shrinking exactly like 1/m across decades.
        for (i, err) in errs.iter().enumerate() {
            assert!(*err > 0.0, "excess must stay positive at step {i}");
        }
        assert!(
            (errs[0] / errs[1] - 10.0).abs() < 0.01,
            "ratio {}",
            errs[0] / errs[1]
        );
        assert!(
            (errs[1] / errs[2] - 10.0).abs() < 0.01,
            "ratio {}",
            errs[1] / errs[2]
        );
        assert!(errs[2] < 1e-3, "residual {}", errs[2]);
        // The generic combination limit 4 (sum a)^2 m2^2 = 4 m2^2/(1+theta)^2
        // agrees with the martingale limit m2^2 only to first order in
        // 1 - theta.
        let generic = 4.0 / (1.0 + theta) / (1.0 + theta);
        assert!((generic - 1.0).abs() < 3.0 * (1.0 - theta));
    }

    #[test]
    fn schedule_limits_of_window_quantities() {
        // Along near-unit-root windows m ~ (1 - theta)^{-6/5}:
        // (1 - theta^2) K_m -> 2 and theta^{2m} -> 0.
        let mut last_km = 0.0;
        let mut last_t2m = 1.0;
        for exp in [4, 6, 8, 10] {
            let one_minus = 10f64.powi(-exp / 2);
            let theta: f64 = 1.0 - one_minus;
            let m = one_minus.powf(-1.2).ceil();
            let k_m = theta * (1.0 - theta.powf(m - 1.0)) / (1.0 - theta);
            let scaled = (1.0 - theta * theta) * k_m;
            let t2m = theta.powf(2.0 * m);
            assert!(scaled > last_km, "K_m limit not improving at step {exp}");
            assert!(t2m < last_t2m, "theta^2m not vanishing at step {exp}");
            last_km = scaled;
            last_t2m = t2m;
        }
        assert!((last_km - 2.0).abs() < 0.02);
        assert!(last_t2m < 1e-3);
    }

    #[test]
    fn u_value_matches_increment_on_truncation_range() {
        // On a path whose retained history covers the window, u_value at a
        // large m reproduces the full increment up to the truncation tail.
        let model = NoiseModel::standard_normal();
        let theta = 0.5;
        let mut rng = derive_rng(17, &[DOMAIN_PATH, 9]);
        let path = SamplePath::simulate(
            theta,
            400,
            &model,
            &InitPolicy::truncated_default(),
            &mut rng,
        )
        .unwrap();
        let w = UWindow::new(theta, 38, 1, 0, 2, (1.0, 3.0)).unwrap();
        for k in [1i64, 50, 200] {
            let truncated = u_value(&path, k, &w).unwrap();
            let full = crate::estimators::u_increment(&path, k as usize, 1, 1.0).unwrap();
            assert!(
                (truncated - full).abs() <= theta.powi(37) * 100.0,
                "truncated increment too far from full increment at k={k}"
            );
        }
    }

    #[test]
    fn u_value_range_errors() {
        let model = NoiseModel::rademacher();
        let mut rng = derive_rng(3, &[DOMAIN_PATH, 10]);
        let path = SamplePath::simulate(
            0.5,
            50,
            &model,
            &InitPolicy::TruncatedSeries { epsilon: 0.25 },
            &mut rng,
        )
        .unwrap();
        // History is short (theta^2 <= 0.25), so a wide window must fail.
        let w = UWindow::new(0.5, 20, 1, 0, 2, (1.0, 1.0)).unwrap();
        assert!(u_value(&path, 1, &w).is_err());
        // Mismatched theta is rejected.
        let w2 = UWindow::new(0.4, 5, 1, 0, 2, (1.0, 1.0)).unwrap();
        assert!(u_value(&path, 10, &w2).is_err());
        // In range works.
        let w3 = UWindow::new(0.5, 3, 1, 0, 1, (1.0, 1.0)).unwrap();
        assert!(u_value(&path, 10, &w3).is_ok());
    }

    #[test]
    fn empirical_mean_and_second_moment_match_closed_forms() {
        // Strided evaluation keeps the samples effectively independent for
        // the standard-error estimate.
        let model = NoiseModel::standard_normal();
        let theta = 0.6;
        let m = 9;
        let l = 1;
        let w = UWindow::from_model(theta, m, l, 0, 2, &model).unwrap();
        let stride = (m + l + 2) as i64;
        let samples = 1_000_000usize;
        let chunk = 40_000usize;
        let per_path = (chunk as i64 * stride) as usize + m + l + 2;
        let mut count = 0usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut rep = 0u64;
        while count < samples {
            let mut rng = derive_rng(77, &[DOMAIN_CHECK, rep]);
            let path = SamplePath::simulate(
                theta,
                per_path,
                &model,
                &InitPolicy::truncated_default(),
                &mut rng,
            )
            .unwrap();
            for i in 0..chunk {
                let k = (m + l + 1) as i64 + i as i64 * stride;
                let u = u_value(&path, k, &w).unwrap();
                sum += u;
                sum_sq += u * u;
                count += 1;
                if count >= samples {
                    break;
                }
            }
            rep += 1;
        }
        let n = count as f64;
        let mean = sum / n;
        let second = sum_sq / n;
        let var = u_second_moment(&w);
        let mean_se = (var / n).sqrt();
        assert!(
            mean.abs() <= 5.0 * mean_se,
            "mean {mean} vs 0 (se {mean_se})"
        );
        // Conservative SE for the second moment via a Gaussian-product
        // kurtosis bound.
        let second_se = (8.0 * var * var / n).sqrt();
        assert!(
            (second - var).abs() <= 5.0 * second_se,
            "second moment {second} vs {var}"
        );
    }
}
