//! Monte Carlo experiment engine: tail probabilities, empirical rate
//! curves, a central-limit check, variance-convergence sweeps, and
//! negligibility tables for the boundary and truncation-gap terms.
//!
//! Every experiment point simulates `replicates` independent paths; each
//! replicate derives its stream from `(master_seed, point_id, replicate)`,
//! so results are bit-identical for a fixed configuration regardless of
//! how replicates are distributed across workers. All statistic kinds
//! requested in a plan are computed from the same simulated path, which
//! makes one-hot linear combinations reproduce the plain covariance
//! statistic replicate-by-replicate and lets a whole r-grid reuse one
//! replicate set (the sample is computed once and thresholded many times,
//! so tail probabilities are exactly non-increasing in r).

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::ar1::{InitPolicy, SamplePath};
use crate::blocking::exponential_approx_gap;
use crate::error::{Error, Result};
use crate::estimators::{empirical_covariance, ls_estimate, theoretical_covariance, yw_estimate};
use crate::mdp::{
    rate_covariance, rate_estimator, rate_linear_combination, Schedule, SchedulePoint,
};
use crate::noise::NoiseModel;
use crate::streams::{derive_rng, DOMAIN_MC};
use crate::umoments::{block_variance_exact, UWindow};

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_ci(hits: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // At the boundaries center - half is exactly zero (resp. one) in exact
    // arithmetic; pin them so rounding residue cannot leak through.
    let low = if hits == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let high = if hits == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (low, high)
}

/// One tail-probability cell: the exceedance frequency of an MDP-scaled
/// statistic at threshold `r`, with its Wilson interval and the empirical
/// rate `-log(p_hat) / b^2`.
#[derive(Clone, Copy, Debug)]
pub struct TailEstimate {
    pub r: f64,
    pub hits: u64,
    pub replicates: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `-log(p_hat) / b^2`; when no replicate exceeded the threshold this
    /// is the one-sided lower bound `-log((hits+1)/replicates) / b^2`.
    pub empirical_rate: f64,
    pub theoretical_rate: f64,
    /// True when `hits == 0`, so `empirical_rate` is only a lower bound.
    pub rate_is_lower_bound: bool,
}

impl TailEstimate {
    /// Threshold a precomputed statistic sample at `r`.
    pub fn from_statistics(
        statistics: &[f64],
        r: f64,
        b: f64,
        theoretical_rate: f64,
    ) -> Result<Self> {
        if statistics.is_empty() {
            return Err(Error::InsufficientReplicates(
                "cannot threshold an empty sample".into(),
            ));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidDeviation(format!(
                "threshold {r} must be positive and finite"
            )));
        }
        let replicates = statistics.len() as u64;
        let hits = statistics.iter().filter(|s| **s >= r).count() as u64;
        let p_hat = hits as f64 / replicates as f64;
        let (ci_low, ci_high) = wilson_ci(hits, replicates);
        let rate_is_lower_bound = hits == 0;
        let bounded_p = if rate_is_lower_bound {
            // Zero hits: report the rate implied by the one-sided
            // (hits + 1) correction instead of infinity.
            1.0 / replicates as f64
        } else {
            p_hat
        };
        Ok(TailEstimate {
            r,
            hits,
            replicates,
            p_hat,
            ci_low,
            ci_high,
            empirical_rate: -bounded_p.ln() / (b * b),
            theoretical_rate,
            rate_is_lower_bound,
        })
    }
}

/// Which MDP-scaled statistic a cell measures.
#[derive(Clone, Debug, PartialEq)]
pub enum StatKind {
    /// `(1-theta^2)^{3/2} sqrt(n-l)/b |C*_l - C_l|`.
    Covariance { l: usize },
    /// `|sum_l a_l (1-theta^2)^{3/2} sqrt(n-l)/b (C*_l - C_l)|`, the lag
    /// running over `0 ..= coefficients.len() - 1`.
    Linear { coefficients: Vec<f64> },
    /// `sqrt(n) / (b sqrt(1-theta^2)) |theta_hat - theta|`, least squares.
    EstimatorLs,
    /// Same scaling for the ratio with the full-length denominator.
    EstimatorYw,
    /// `sqrt(1-theta^2) |X_l X_0 - X_n X_{n-l}| / (b sqrt(n-l))`.
    Boundary { l: usize },
    /// The scaled exponential-approximation gap at window m.
    ApproxGap { l: usize },
}

impl StatKind {
    pub fn label(&self) -> String {
        match self {
            StatKind::Covariance { l } => format!("covariance-l{l}"),
            StatKind::Linear { .. } => "linear".to_string(),
            StatKind::EstimatorLs => "estimator-ls".to_string(),
            StatKind::EstimatorYw => "estimator-yw".to_string(),
            StatKind::Boundary { l } => format!("boundary-l{l}"),
            StatKind::ApproxGap { l } => format!("gap-l{l}"),
        }
    }

    /// The limiting rate at threshold `r`. The boundary and gap statistics
    /// decay faster than any finite rate, reported as infinity.
    pub fn theoretical_rate(&self, r: f64, second_moment: f64) -> Result<f64> {
        match self {
            StatKind::Covariance { .. } => rate_covariance(r, second_moment),
            StatKind::Linear { coefficients } => {
                rate_linear_combination(r, coefficients, second_moment)
            }
            StatKind::EstimatorLs | StatKind::EstimatorYw => rate_estimator(r),
            StatKind::Boundary { .. } | StatKind::ApproxGap { .. } => Ok(f64::INFINITY),
        }
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        match self {
            StatKind::Linear { coefficients } => Some(coefficients),
            _ => None,
        }
    }
}

/// What to compute from each simulated path.
#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    /// Lags for plain covariance statistics.
    pub lags: Vec<usize>,
    /// Weight vectors for linear-combination statistics; set j covers lags
    /// `0 ..= coefficient_sets[j].len() - 1`.
    pub coefficient_sets: Vec<Vec<f64>>,
    /// Compute both autoregression estimators.
    pub estimators: bool,
    /// Lags for the boundary-difference statistic.
    pub boundary_lags: Vec<usize>,
    /// Lags for the exponential-approximation gap statistic (requires the
    /// init policy to retain at least m innovations of history).
    pub gap_lags: Vec<usize>,
    pub model: NoiseModel,
    pub init: InitPolicy,
}

impl ExperimentPlan {
    /// A plan computing exactly one statistic kind.
    pub fn for_kind(kind: &StatKind, model: NoiseModel, init: InitPolicy) -> Self {
        let mut plan = ExperimentPlan {
            lags: Vec::new(),
            coefficient_sets: Vec::new(),
            estimators: false,
            boundary_lags: Vec::new(),
            gap_lags: Vec::new(),
            model,
            init,
        };
        match kind {
            StatKind::Covariance { l } => plan.lags.push(*l),
            StatKind::Linear { coefficients } => plan.coefficient_sets.push(coefficients.clone()),
            StatKind::EstimatorLs | StatKind::EstimatorYw => plan.estimators = true,
            StatKind::Boundary { l } => plan.boundary_lags.push(*l),
            StatKind::ApproxGap { l } => plan.gap_lags.push(*l),
        }
        plan
    }

    /// The statistic kinds this plan produces, in output order.
    pub fn kinds(&self) -> Vec<StatKind> {
        let mut kinds = Vec::new();
        for l in &self.lags {
            kinds.push(StatKind::Covariance { l: *l });
        }
        for coeffs in &self.coefficient_sets {
            kinds.push(StatKind::Linear {
                coefficients: coeffs.clone(),
            });
        }
        if self.estimators {
            kinds.push(StatKind::EstimatorLs);
            kinds.push(StatKind::EstimatorYw);
        }
        for l in &self.boundary_lags {
            kinds.push(StatKind::Boundary { l: *l });
        }
        for l in &self.gap_lags {
            kinds.push(StatKind::ApproxGap { l: *l });
        }
        kinds
    }
}

/// The per-replicate statistic samples of one schedule point, kind-major.
#[derive(Clone, Debug)]
pub struct PointSample {
    point: SchedulePoint,
    second_moment: f64,
    kinds: Vec<StatKind>,
    stats: Vec<Vec<f64>>,
}

impl PointSample {
    pub fn point(&self) -> &SchedulePoint {
        &self.point
    }

    pub fn replicates(&self) -> u64 {
        self.stats.first().map_or(0, |s| s.len() as u64)
    }

    pub fn kinds(&self) -> &[StatKind] {
        &self.kinds
    }

    /// The raw statistic sample for one kind.
    pub fn statistics(&self, kind: &StatKind) -> Option<&[f64]> {
        self.kinds
            .iter()
            .position(|k| k == kind)
            .map(|i| self.stats[i].as_slice())
    }

    /// Threshold one kind's sample at `r`.
    pub fn tail(&self, kind: &StatKind, r: f64) -> Result<TailEstimate> {
        let stats = self.statistics(kind).ok_or(Error::InvalidParameter {
            name: "kind",
            message: format!("{} was not part of the simulated plan", kind.label()),
        })?;
        let rate = kind.theoretical_rate(r, self.second_moment)?;
        TailEstimate::from_statistics(stats, r, self.point.b, rate)
    }
}

/// Simulate one schedule point under a plan: `replicates` paths, each
/// feeding every requested statistic. Streams are derived from
/// `(master_seed, point_id, replicate)`, so a fixed configuration yields
/// bit-identical samples for any worker count.
pub fn simulate_point(
    point: &SchedulePoint,
    plan: &ExperimentPlan,
    replicates: u64,
    master_seed: u64,
    point_id: u64,
) -> Result<PointSample> {
    if replicates == 0 {
        return Err(Error::InsufficientReplicates(
            "need at least one replicate".into(),
        ));
    }
    let n = point.n as usize;
    for coeffs in &plan.coefficient_sets {
        if coeffs.is_empty() {
            return Err(Error::MissingCoefficients(
                "linear statistic needs at least one weight".into(),
            ));
        }
        if coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "coefficients",
                message: "weights must be finite".into(),
            });
        }
    }
    for l in plan
        .lags
        .iter()
        .chain(&plan.boundary_lags)
        .chain(&plan.gap_lags)
    {
        if *l >= n {
            return Err(Error::LagRange {
                lag: *l,
                message: format!("lag must be below the path length {n}"),
            });
        }
    }
    // The union of lags whose scaled deviations the plan needs.
    let mut dev_lags: Vec<usize> = plan.lags.clone();
    for coeffs in &plan.coefficient_sets {
        dev_lags.extend(0..coeffs.len());
    }
    dev_lags.sort_unstable();
    dev_lags.dedup();
    let dev_index = |l: usize| dev_lags.iter().position(|x| *x == l).expect("unioned");
    let gap_windows: Vec<UWindow> = plan
        .gap_lags
        .iter()
        .map(|l| UWindow::from_model(point.theta, point.m, *l, 0, *l, &plan.model))
        .collect::<Result<_>>()?;

    let theta = point.theta;
    let b = point.b;
    let m2 = plan.model.second_moment();
    let one_minus_sq = 1.0 - theta * theta;
    let cov_scale = one_minus_sq.powf(1.5);
    let kind_count = plan.lags.len()
        + plan.coefficient_sets.len()
        + if plan.estimators { 2 } else { 0 }
        + plan.boundary_lags.len()
        + plan.gap_lags.len();

    let rows: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let mut rng = derive_rng(master_seed, &[DOMAIN_MC, point_id, rep]);
            let path = SamplePath::simulate(theta, n, &plan.model, &plan.init, &mut rng)?;
            let mut out = Vec::with_capacity(kind_count);
            // Signed scaled deviations, shared by the covariance and
            // linear statistics so one-hot weights reproduce the plain
            // statistic bit for bit.
            let devs: Vec<f64> = dev_lags
                .iter()
                .map(|l| -> Result<f64> {
                    let dev =
                        empirical_covariance(&path, *l)? - theoretical_covariance(theta, *l, m2);
                    Ok(cov_scale * ((n - l) as f64).sqrt() / b * dev)
                })
                .collect::<Result<_>>()?;
            for l in &plan.lags {
                out.push(devs[dev_index(*l)].abs());
            }
            for coeffs in &plan.coefficient_sets {
                let mut acc = 0.0f64;
                for (l, a) in coeffs.iter().enumerate() {
                    acc += a * devs[dev_index(l)];
                }
                out.push(acc.abs());
            }
            if plan.estimators {
                let scale = (n as f64).sqrt() / (b * one_minus_sq.sqrt());
                out.push(scale * (ls_estimate(&path)? - theta).abs());
                out.push(scale * (yw_estimate(&path)? - theta).abs());
            }
            for l in &plan.boundary_lags {
                let states = path.states();
                let diff = states[*l] * states[0] - states[n] * states[n - l];
                out.push(one_minus_sq.sqrt() * diff.abs() / (b * ((n - l) as f64).sqrt()));
            }
            for w in &gap_windows {
                out.push(exponential_approx_gap(&path, w, b)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    // Transpose to kind-major.
    let mut stats = vec![Vec::with_capacity(replicates as usize); kind_count];
    for row in rows {
        for (slot, value) in stats.iter_mut().zip(row) {
            slot.push(value);
        }
    }
    Ok(PointSample {
        point: *point,
        second_moment: m2,
        kinds: plan.kinds(),
        stats,
    })
}

/// Estimate one tail probability from fresh simulations.
#[allow(clippy::too_many_arguments)]
pub fn tail_probability(
    kind: &StatKind,
    point: &SchedulePoint,
    r: f64,
    replicates: u64,
    master_seed: u64,
    point_id: u64,
    model: &NoiseModel,
    init: &InitPolicy,
) -> Result<TailEstimate> {
    if replicates < 1_000 {
        return Err(Error::InsufficientReplicates(format!(
            "tail estimation needs at least 1000 replicates, got {replicates}"
        )));
    }
    let plan = ExperimentPlan::for_kind(kind, model.clone(), *init);
    let sample = simulate_point(point, &plan, replicates, master_seed, point_id)?;
    sample.tail(kind, r)
}

/// One experiment point's tail estimates over an r grid.
#[derive(Clone, Debug)]
pub struct RateCurve {
    pub point: SchedulePoint,
    pub point_id: u64,
    pub kind: StatKind,
    pub estimates: Vec<TailEstimate>,
}

impl RateCurve {
    pub fn coefficients(&self) -> Option<&[f64]> {
        self.kind.coefficients()
    }

    /// Worst relative rate error over well-estimated cells (interval width
    /// below the estimate itself); `None` when no cell qualifies.
    pub fn convergence_diagnostic(&self) -> Option<f64> {
        self.estimates
            .iter()
            .filter(|e| e.hits > 0 && (e.ci_high - e.ci_low) < e.p_hat)
            .map(|e| (e.empirical_rate / e.theoretical_rate - 1.0).abs())
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.max(d))))
    }
}

/// Sweep one statistic kind over a whole schedule: each point simulates a
/// fresh replicate set and thresholds it at every grid value.
pub fn rate_curve(
    kind: &StatKind,
    schedule: &Schedule,
    r_grid: &[f64],
    replicates: u64,
    master_seed: u64,
    model: &NoiseModel,
    init: &InitPolicy,
) -> Result<Vec<RateCurve>> {
    if schedule.points().len() < 2 {
        return Err(Error::InvalidParameter {
            name: "schedule",
            message: "rate curves need at least two points to show a trend".into(),
        });
    }
    validate_grid(r_grid)?;
    let plan = ExperimentPlan::for_kind(kind, model.clone(), *init);
    let mut curves = Vec::with_capacity(schedule.points().len());
    for (idx, point) in schedule.points().iter().enumerate() {
        let sample = simulate_point(point, &plan, replicates, master_seed, idx as u64)?;
        let estimates = r_grid
            .iter()
            .map(|r| sample.tail(kind, *r))
            .collect::<Result<Vec<_>>>()?;
        curves.push(RateCurve {
            point: *point,
            point_id: idx as u64,
            kind: kind.clone(),
            estimates,
        });
    }
    Ok(curves)
}

fn validate_grid(r_grid: &[f64]) -> Result<()> {
    if r_grid.is_empty() {
        return Err(Error::InvalidDeviation("empty threshold grid".into()));
    }
    if r_grid.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(Error::InvalidDeviation(
            "thresholds must be positive and finite".into(),
        ));
    }
    for pair in r_grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidDeviation(format!(
                "threshold grid must be strictly increasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}

/// Central-limit check for the least-squares error at a fixed coefficient.
#[derive(Clone, Copy, Debug)]
pub struct CltReport {
    pub theta: f64,
    pub n: u64,
    pub replicates: u64,
    /// Kolmogorov-Smirnov distance between the standardized errors
    /// `sqrt(n/(1-theta^2)) (theta_hat - theta)` and the standard normal.
    pub ks: f64,
    /// `n (1-theta)`: the regime indicator that must be large for the
    /// normal limit to apply.
    pub root_distance: f64,
    /// Set when the replicate count is too small for the KS distance to
    /// mean much.
    pub low_power: bool,
}

/// Run the central-limit check with Gaussian innovations and an exact
/// stationary start.
pub fn clt_check(theta: f64, n: u64, replicates: u64, master_seed: u64) -> Result<CltReport> {
    if replicates == 0 || n == 0 {
        return Err(Error::InsufficientReplicates(
            "need positive n and replicates".into(),
        ));
    }
    let model = NoiseModel::standard_normal();
    let init = InitPolicy::ExactGaussian;
    let scale = (n as f64).sqrt() / (1.0 - theta * theta).sqrt();
    let mut standardized: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let mut rng = derive_rng(master_seed, &[DOMAIN_MC, n, rep]);
            let path = SamplePath::simulate(theta, n as usize, &model, &init, &mut rng)?;
            Ok(scale * (ls_estimate(&path)? - theta))
        })
        .collect::<Result<_>>()?;
    standardized.sort_unstable_by(|a, c| a.total_cmp(c));
    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    let count = standardized.len() as f64;
    let mut ks = 0.0f64;
    for (i, x) in standardized.iter().enumerate() {
        let cdf = normal.cdf(*x);
        ks = ks
            .max((cdf - i as f64 / count).abs())
            .max((cdf - (i + 1) as f64 / count).abs());
    }
    Ok(CltReport {
        theta,
        n,
        replicates,
        ks,
        root_distance: n as f64 * (1.0 - theta),
        low_power: replicates < 100,
    })
}

/// One row of the variance-convergence table.
#[derive(Clone, Copy, Debug)]
pub struct VarianceRow {
    pub point: SchedulePoint,
    /// `(1-theta^2)/m` times the closed-form block variance.
    pub exact_scaled: f64,
    /// The same quantity estimated from `mc_replicates` sampled blocks.
    pub mc_scaled: f64,
    /// The limit `4 (E xi^2)^2`.
    pub limit: f64,
    pub exact_relative_gap: f64,
    pub mc_relative_gap: f64,
}

/// Compare the scaled block variance against its limit along a schedule,
/// with an independent Monte Carlo cross-check of the closed form.
pub fn variance_convergence(
    schedule: &Schedule,
    l: usize,
    model: &NoiseModel,
    mc_replicates: u64,
    master_seed: u64,
) -> Result<Vec<VarianceRow>> {
    if mc_replicates < 2 {
        return Err(Error::InsufficientReplicates(
            "variance cross-check needs at least two replicates".into(),
        ));
    }
    let m2 = model.second_moment();
    let limit = 4.0 * m2 * m2;
    schedule
        .points()
        .iter()
        .map(|point| {
            let window = UWindow::from_model(point.theta, point.m, l, 0, l, model)?;
            let factor = (1.0 - point.theta * point.theta) / point.m as f64;
            let exact_scaled = factor * block_variance_exact(&window);
            let mc_var = sampled_block_variance(point, l, model, mc_replicates, master_seed)?;
            let mc_scaled = factor * mc_var;
            Ok(VarianceRow {
                point: *point,
                exact_scaled,
                mc_scaled,
                limit,
                exact_relative_gap: (exact_scaled / limit - 1.0).abs(),
                mc_relative_gap: (mc_scaled / limit - 1.0).abs(),
            })
        })
        .collect()
}

/// Sample variance of the block sum `U_1 + ... + U_m` built from truncated
/// states, via the rolling identity
/// `T_k = theta T_{k-1} + xi_k - theta^{m-1} xi_{k-m+1}`.
fn sampled_block_variance(
    point: &SchedulePoint,
    l: usize,
    model: &NoiseModel,
    replicates: u64,
    master_seed: u64,
) -> Result<f64> {
    let m = point.m;
    let theta = point.theta;
    let m2 = model.second_moment();
    let center = theta.powi(l as i32) * m2;
    let drop = theta.powi(m as i32 - 1);
    // noise[i] plays xi_{i+2-m}: the block needs xi_{2-m} ..= xi_{m+l}.
    let len = 2 * m + l - 1;
    let sums: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = derive_rng(master_seed, &[DOMAIN_MC, point.n, rep, l as u64]);
            let mut noise = vec![0.0f64; len];
            model.fill(&mut noise, &mut rng);
            // states[j] = truncated state below xi_{j+1}, for j = 0 ..
            // m+l-1; seeded by Horner over the oldest m-1 innovations.
            let mut state = 0.0f64;
            for value in &noise[..m - 1] {
                state = state * theta + value;
            }
            let mut states = Vec::with_capacity(m + l);
            states.push(state);
            for j in 1..m + l {
                state = theta * state + noise[j + m - 2] - drop * noise[j - 1];
                states.push(state);
            }
            let mut sum = 0.0f64;
            for k in 1..=m {
                let xi_k = noise[k + m - 2];
                let xi_top = noise[k + l + m - 2];
                sum += theta * states[k + l - 1] * xi_k
                    + theta * xi_top * states[k - 1]
                    + xi_top * xi_k
                    - center;
            }
            sum
        })
        .collect();
    let count = sums.len() as f64;
    let mean = sums.iter().sum::<f64>() / count;
    let var = sums.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (count - 1.0);
    Ok(var)
}

/// One row of a negligibility table: a statistic that must decay faster
/// than the MDP speed, measured at a fixed threshold.
#[derive(Clone, Debug)]
pub struct NegligibilityRow {
    pub point: SchedulePoint,
    pub kind: StatKind,
    pub estimate: TailEstimate,
}

/// Tail of the boundary-difference statistic along a schedule. The
/// `empirical_rate` column carries `-log(p_hat)/b^2`, which must grow
/// with n (decay faster than the MDP) for the boundary to be negligible.
pub fn boundary_negligibility(
    schedule: &Schedule,
    l: usize,
    r: f64,
    replicates: u64,
    master_seed: u64,
    model: &NoiseModel,
    init: &InitPolicy,
) -> Result<Vec<NegligibilityRow>> {
    negligibility(
        schedule,
        StatKind::Boundary { l },
        r,
        replicates,
        master_seed,
        model,
        init,
    )
}

/// Tail of the exponential-approximation gap statistic along a schedule.
pub fn gap_negligibility(
    schedule: &Schedule,
    l: usize,
    r: f64,
    replicates: u64,
    master_seed: u64,
    model: &NoiseModel,
    init: &InitPolicy,
) -> Result<Vec<NegligibilityRow>> {
    negligibility(
        schedule,
        StatKind::ApproxGap { l },
        r,
        replicates,
        master_seed,
        model,
        init,
    )
}

fn negligibility(
    schedule: &Schedule,
    kind: StatKind,
    r: f64,
    replicates: u64,
    master_seed: u64,
    model: &NoiseModel,
    init: &InitPolicy,
) -> Result<Vec<NegligibilityRow>> {
    let plan = ExperimentPlan::for_kind(&kind, model.clone(), *init);
    schedule
        .points()
        .iter()
        .enumerate()
        .map(|(idx, point)| {
            let sample = simulate_point(point, &plan, replicates, master_seed, idx as u64)?;
            Ok(NegligibilityRow {
                point: *point,
                kind: kind.clone(),
                estimate: sample.tail(&kind, r)?,
            })
        })
        .collect()
}

/// Run a closure inside a dedicated thread pool of the given size. Results
/// do not depend on the pool size; this exists so reproducibility across
/// worker counts can be exercised and so callers can cap parallelism.
pub fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter {
            name: "workers",
            message: e.to_string(),
        })?;
    Ok(pool.install(job))
}
