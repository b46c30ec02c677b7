//! Exhaustive enumeration oracle for increment moments.
//!
//! For a finitely supported noise law, any moment of the truncated
//! increments is a finite sum over joint noise assignments: each increment
//! `U_{k, l, m}` depends on the window `xi_{k-m+1} ..= xi_{k+l}` only, so a
//! product of increments depends on finitely many coordinates and its
//! expectation can be computed by walking every assignment and weighting it
//! with exact probabilities. This is slow and completely independent of the
//! closed forms in the parent module, which is the point: the two routes
//! share no algebra, so agreement to ten decimal places on thousands of
//! parameter combinations pins the formulas down.
//!
//! The walk factorizes over groups of increments whose index windows do not
//! touch (independence across disjoint coordinate blocks), carries partial
//! truncated-state sums down the assignment tree with save/restore instead
//! of recomputation, and refuses to enumerate more than `2^26` assignments
//! per group so a misconfigured query fails fast instead of hanging.

// Index arithmetic below mirrors the window definitions verbatim rather
// than clippy's preferred shapes.
#![allow(
    clippy::int_plus_one,
    clippy::needless_range_loop,
    clippy::cloned_ref_to_slice_refs
)]

use crate::error::{Error, Result};
use crate::noise::NoiseModel;

use super::{
    block_variance_collapsed, block_variance_exact, hat_block_variance, hat_cross,
    hat_second_moment, u_cross_mixed, u_cross_same_lag, u_second_moment, weighted_time_sum,
    UWindow,
};

/// Hard ceiling on the number of joint assignments per enumeration group.
pub const ENUMERATION_GUARD: f64 = (1u64 << 26) as f64;

/// Which moment of the increment window a query asks for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentKind {
    /// `E U_{0, l}` (zero by centering; kept as a gated sanity row).
    Mean,
    /// `E U_{0, l}^2`.
    Variance,
    /// `E U_{0, l} U_{gap, l}`.
    SameLagCross { gap: usize },
    /// `E U_{0, l} U_{gap, q}` with the window's `l` at the earlier index.
    MixedCross { gap: usize },
    /// `Var(U_1 + ... + U_m)` at the primary lag, exact pair counting.
    BlockVariance,
    /// The collapsed block-variance aggregate (known to undercount for
    /// lags above one; logged, not gated).
    BlockVarianceCollapsed,
    /// `sum_{k=1}^{m} k E U_{0, l} U_{k, l}`.
    WeightedTimeSum,
    /// `E Yhat^2` for the window's lag combination.
    HatVariance,
    /// `E Yhat_0 Yhat_gap`.
    HatCross { gap: usize },
    /// `Var(Yhat_1 + ... + Yhat_m)`.
    HatBlockVariance,
}

impl MomentKind {
    pub fn label(&self) -> &'static str {
        match self {
            MomentKind::Mean => "mean",
            MomentKind::Variance => "variance",
            MomentKind::SameLagCross { .. } => "same-lag-cross",
            MomentKind::MixedCross { .. } => "mixed-cross",
            MomentKind::BlockVariance => "block-variance",
            MomentKind::BlockVarianceCollapsed => "block-variance-collapsed",
            MomentKind::WeightedTimeSum => "weighted-time-sum",
            MomentKind::HatVariance => "hat-variance",
            MomentKind::HatCross { .. } => "hat-cross",
            MomentKind::HatBlockVariance => "hat-block-variance",
        }
    }

    pub fn gap(&self) -> Option<usize> {
        match self {
            MomentKind::SameLagCross { gap }
            | MomentKind::MixedCross { gap }
            | MomentKind::HatCross { gap } => Some(*gap),
            _ => None,
        }
    }
}

/// A moment question: a parameter window plus the moment kind.
#[derive(Clone, Debug)]
pub struct MomentQuery {
    pub window: UWindow,
    pub kind: MomentKind,
}

impl MomentQuery {
    pub fn new(window: UWindow, kind: MomentKind) -> Self {
        Self { window, kind }
    }

    /// Evaluate the closed form the query refers to.
    pub fn closed_form(&self) -> Result<f64> {
        let w = &self.window;
        match self.kind {
            MomentKind::Mean => Ok(0.0),
            MomentKind::Variance => Ok(u_second_moment(w)),
            MomentKind::SameLagCross { gap } => u_cross_same_lag(w, gap),
            MomentKind::MixedCross { gap } => Ok(u_cross_mixed(w, gap)),
            MomentKind::BlockVariance => Ok(block_variance_exact(w)),
            MomentKind::BlockVarianceCollapsed => Ok(block_variance_collapsed(w)),
            MomentKind::WeightedTimeSum => Ok(weighted_time_sum(w)),
            MomentKind::HatVariance => hat_second_moment(w),
            MomentKind::HatCross { gap } => hat_cross(w, gap),
            MomentKind::HatBlockVariance => hat_block_variance(w),
        }
    }
}

/// One increment `coeff * U_{base, lag, m}` inside a product factor.
#[derive(Clone, Copy, Debug)]
struct UDescriptor {
    base: i64,
    lag: usize,
    coeff: f64,
}

/// A factor is a linear combination of increments; a moment is the
/// expectation of a product of factors.
type Factor = Vec<UDescriptor>;

/// Compute a moment by exhaustive enumeration. The model must be finitely
/// supported and share the window's second moment.
pub fn brute_force_moment(query: &MomentQuery, model: &NoiseModel) -> Result<f64> {
    let w = &query.window;
    if model.second_moment() != w.second_moment() {
        return Err(Error::InvalidParameter {
            name: "model",
            message: format!(
                "model second moment {} differs from window's {}",
                model.second_moment(),
                w.second_moment()
            ),
        });
    }
    let engine = Enumerator::new(model, w)?;
    let l = w.l();
    let q = w.q();
    let m = w.m();
    let single = |base: i64, lag: usize| -> Factor {
        vec![UDescriptor {
            base,
            lag,
            coeff: 1.0,
        }]
    };
    match query.kind {
        MomentKind::Mean => engine.expectation(&[single(0, l)]),
        MomentKind::Variance => engine.expectation(&[single(0, l), single(0, l)]),
        MomentKind::SameLagCross { gap } => {
            engine.expectation(&[single(0, l), single(gap as i64, l)])
        }
        MomentKind::MixedCross { gap } => {
            engine.expectation(&[single(0, l), single(gap as i64, q)])
        }
        MomentKind::BlockVariance | MomentKind::BlockVarianceCollapsed => {
            let block: Factor = (1..=m as i64)
                .map(|k| UDescriptor {
                    base: k,
                    lag: l,
                    coeff: 1.0,
                })
                .collect();
            let mean = engine.expectation(&[block.clone()])?;
            let second = engine.expectation(&[block.clone(), block])?;
            Ok(second - mean * mean)
        }
        MomentKind::WeightedTimeSum => {
            let mut total = 0.0;
            for k in 1..=m {
                total += k as f64 * engine.expectation(&[single(0, l), single(k as i64, l)])?;
            }
            Ok(total)
        }
        MomentKind::HatVariance => {
            let f = hat_factor(w, 0)?;
            engine.expectation(&[f.clone(), f])
        }
        MomentKind::HatCross { gap } => {
            engine.expectation(&[hat_factor(w, 0)?, hat_factor(w, gap as i64)?])
        }
        MomentKind::HatBlockVariance => {
            let mut block = Factor::new();
            for k in 1..=m as i64 {
                block.extend(hat_factor(w, k)?);
            }
            let mean = engine.expectation(&[block.clone()])?;
            let second = engine.expectation(&[block.clone(), block])?;
            Ok(second - mean * mean)
        }
    }
}

fn hat_factor(window: &UWindow, base: i64) -> Result<Factor> {
    let coeffs = window.coefficients().ok_or_else(|| {
        Error::MissingCoefficients("lag-combination query needs coefficients".into())
    })?;
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(lag, &coeff)| UDescriptor { base, lag, coeff })
        .collect())
}

struct Enumerator {
    values: Vec<f64>,
    probs: Vec<f64>,
    theta: f64,
    m: i64,
    m2: f64,
}

impl Enumerator {
    fn new(model: &NoiseModel, window: &UWindow) -> Result<Self> {
        let (values, weights, den) = model
            .finite_support()
            .ok_or_else(|| Error::EnumerationUnsupported(format!("{:?}", model.law())))?;
        let probs = weights.iter().map(|w| *w as f64 / den as f64).collect();
        Ok(Self {
            values,
            probs,
            theta: window.theta(),
            m: window.m() as i64,
            m2: window.second_moment(),
        })
    }

    /// Noise-index window a descriptor touches: `[base - m + 1, base + lag]`.
    fn descriptor_window(&self, d: &UDescriptor) -> (i64, i64) {
        (d.base - self.m + 1, d.base + d.lag as i64)
    }

    /// `E prod_f (sum_d coeff_d U_d)`, factorized over disjoint index groups.
    fn expectation(&self, factors: &[Factor]) -> Result<f64> {
        // Interval per factor, then merge overlapping intervals into islands.
        let mut spans: Vec<(i64, i64, usize)> = factors
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let lo = f
                    .iter()
                    .map(|d| self.descriptor_window(d).0)
                    .min()
                    .expect("factor has descriptors");
                let hi = f
                    .iter()
                    .map(|d| self.descriptor_window(d).1)
                    .max()
                    .expect("factor has descriptors");
                (lo, hi, i)
            })
            .collect();
        spans.sort_unstable();
        let mut result = 1.0;
        let mut group: Vec<usize> = Vec::new();
        let mut bounds: Option<(i64, i64)> = None;
        for (lo, hi, idx) in spans {
            match bounds {
                Some((glo, ghi)) if lo <= ghi => {
                    bounds = Some((glo, ghi.max(hi)));
                    group.push(idx);
                }
                Some((glo, ghi)) => {
                    result *= self.enumerate_group(factors, &group, glo, ghi)?;
                    bounds = Some((lo, hi));
                    group = vec![idx];
                }
                None => {
                    bounds = Some((lo, hi));
                    group = vec![idx];
                }
            }
        }
        if let Some((glo, ghi)) = bounds {
            result *= self.enumerate_group(factors, &group, glo, ghi)?;
        }
        Ok(result)
    }

    fn enumerate_group(
        &self,
        factors: &[Factor],
        group: &[usize],
        lo: i64,
        hi: i64,
    ) -> Result<f64> {
        let levels = (hi - lo + 1) as usize;
        let states = (self.values.len() as f64).powi(levels as i32);
        if states > ENUMERATION_GUARD {
            return Err(Error::EnumerationGuard {
                states,
                limit: ENUMERATION_GUARD,
            });
        }

        // Flatten the group's descriptors, remembering factor membership.
        let mut descs: Vec<UDescriptor> = Vec::new();
        let mut factor_ranges: Vec<(usize, usize)> = Vec::new();
        for &fi in group {
            let start = descs.len();
            descs.extend(factors[fi].iter().copied());
            factor_ranges.push((start, descs.len()));
        }

        let pos = |idx: i64| (idx - lo) as usize;
        let pos_base: Vec<usize> = descs.iter().map(|d| pos(d.base)).collect();
        let pos_top: Vec<usize> = descs.iter().map(|d| pos(d.base + d.lag as i64)).collect();
        let centers: Vec<f64> = descs
            .iter()
            .map(|d| self.theta.powi(d.lag as i32) * self.m2)
            .collect();

        // Per level, the descriptors whose truncated-state partials pick up
        // the innovation at that level, with the attached powers of theta.
        let mut affected: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); levels];
        for (di, d) in descs.iter().enumerate() {
            let top_end = d.base + d.lag as i64 - 1;
            let prev_end = d.base - 1;
            for t in 0..levels {
                let idx = lo + t as i64;
                let c1 = if idx >= d.base + d.lag as i64 - self.m + 1 && idx <= top_end {
                    self.theta.powi((top_end - idx) as i32)
                } else {
                    0.0
                };
                let c2 = if idx >= d.base - self.m + 1 && idx <= prev_end {
                    self.theta.powi((prev_end - idx) as i32)
                } else {
                    0.0
                };
                if c1 != 0.0 || c2 != 0.0 {
                    affected[t].push((di, c1, c2));
                }
            }
        }

        let coeffs: Vec<f64> = descs.iter().map(|d| d.coeff).collect();
        let mut walk = Walk {
            values: &self.values,
            probs: &self.probs,
            theta: self.theta,
            affected: &affected,
            pos_base: &pos_base,
            pos_top: &pos_top,
            centers: &centers,
            factor_ranges: &factor_ranges,
            coeffs: &coeffs,
            val: vec![0.0; levels],
            x1: vec![0.0; descs.len()],
            x2: vec![0.0; descs.len()],
            saved: vec![Vec::new(); levels],
            sum: 0.0,
            comp: 0.0,
        };
        for t in 0..levels {
            walk.saved[t] = vec![(0.0, 0.0); affected[t].len()];
        }
        walk.descend(0, 1.0);
        Ok(walk.sum + walk.comp)
    }
}

struct Walk<'a> {
    values: &'a [f64],
    probs: &'a [f64],
    theta: f64,
    affected: &'a [Vec<(usize, f64, f64)>],
    pos_base: &'a [usize],
    pos_top: &'a [usize],
    centers: &'a [f64],
    factor_ranges: &'a [(usize, usize)],
    coeffs: &'a [f64],
    val: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    saved: Vec<Vec<(f64, f64)>>,
    sum: f64,
    comp: f64,
}

impl Walk<'_> {
    fn descend(&mut self, level: usize, weight: f64) {
        if level == self.val.len() {
            self.leaf(weight);
            return;
        }
        for (v, p) in self.values.iter().zip(self.probs) {
            // Save the touched partials exactly, then extend them.
            for (slot, &(di, c1, c2)) in self.affected[level].iter().enumerate() {
                self.saved[level][slot] = (self.x1[di], self.x2[di]);
                self.x1[di] += c1 * v;
                self.x2[di] += c2 * v;
            }
            self.val[level] = *v;
            self.descend(level + 1, weight * p);
            // Restore from the saved copies; subtracting would drift.
            for (slot, &(di, _, _)) in self.affected[level].iter().enumerate() {
                let (a, b) = self.saved[level][slot];
                self.x1[di] = a;
                self.x2[di] = b;
            }
        }
    }

    #[inline]
    fn leaf(&mut self, weight: f64) {
        let mut product = weight;
        for &(start, end) in self.factor_ranges {
            let mut factor = 0.0;
            for di in start..end {
                let xi_base = self.val[self.pos_base[di]];
                let xi_top = self.val[self.pos_top[di]];
                let u = self.theta * self.x1[di] * xi_base
                    + self.theta * xi_top * self.x2[di]
                    + xi_top * xi_base
                    - self.centers[di];
                factor += self.coeffs[di] * u;
            }
            product *= factor;
        }
        // Neumaier accumulation.
        let t = self.sum + product;
        if self.sum.abs() >= product.abs() {
            self.comp += (self.sum - t) + product;
        } else {
            self.comp += (product - t) + self.sum;
        }
        self.sum = t;
    }
}

/// Outcome status of one verification row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepStatus {
    /// Oracle and closed form agree within tolerance.
    Pass,
    /// They disagree; this gates the sweep.
    Fail,
    /// Enumeration exceeded the guard; the row is reported but not gated.
    Skipped,
    /// Known, documented discrepancy (collapsed block aggregate); logged
    /// but not gated.
    Noted,
}

impl SweepStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SweepStatus::Pass => "pass",
            SweepStatus::Fail => "fail",
            SweepStatus::Skipped => "skipped",
            SweepStatus::Noted => "noted",
        }
    }
}

/// One closed-form-versus-oracle comparison.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub law: String,
    pub theta: f64,
    pub max_lag: usize,
    pub m: usize,
    pub kind: &'static str,
    pub l: usize,
    pub q: usize,
    pub gap: i64,
    pub closed_form: f64,
    pub oracle: Option<f64>,
    pub abs_diff: Option<f64>,
    pub status: SweepStatus,
}

/// Sweep parameters; the default instance covers the full verification grid.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub max_lags: Vec<usize>,
    pub thetas: Vec<f64>,
    /// Block lengths are `2 max_lag + offset` for each offset.
    pub m_offsets: Vec<usize>,
    pub tolerance: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            max_lags: vec![1, 2],
            thetas: vec![0.0, 0.3, 0.7, 0.9],
            m_offsets: (1..=6).collect(),
            tolerance: 1e-10,
        }
    }
}

/// The bundled enumeration laws: both are dyadic, so path probabilities are
/// exact in floating point.
pub fn default_sweep_models() -> Vec<(String, NoiseModel)> {
    vec![
        ("rademacher".to_string(), NoiseModel::rademacher()),
        ("three-point".to_string(), NoiseModel::three_point()),
    ]
}

fn sweep_coefficients(max_lag: usize) -> Vec<f64> {
    [0.6, -0.3, 0.2, -0.1, 0.05][..=max_lag].to_vec()
}

/// Run the verification grid: every closed form against the oracle, for
/// every law, maximal lag, theta, and block length in the config. Cells are
/// independent, so they run in parallel; the row order is the nested grid
/// order regardless of worker count.
pub fn verification_sweep(
    models: &[(String, NoiseModel)],
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;

    let mut cells = Vec::new();
    for (law, model) in models {
        for &max_lag in &config.max_lags {
            for &theta in &config.thetas {
                for &offset in &config.m_offsets {
                    cells.push((law, model, theta, 2 * max_lag + offset, max_lag));
                }
            }
        }
    }
    let per_cell: Vec<Vec<SweepRow>> = cells
        .into_par_iter()
        .map(|(law, model, theta, m, max_lag)| {
            let mut rows = Vec::new();
            sweep_cell(law, model, theta, m, max_lag, config.tolerance, &mut rows)?;
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

fn oracle_outcome(query: &MomentQuery, model: &NoiseModel) -> Result<Option<f64>> {
    match brute_force_moment(query, model) {
        Ok(value) => Ok(Some(value)),
        Err(Error::EnumerationGuard { .. }) => Ok(None),
        Err(other) => Err(other),
    }
}

fn record(
    rows: &mut Vec<SweepRow>,
    law: &str,
    max_lag: usize,
    w: &UWindow,
    kind: MomentKind,
    oracle: Option<f64>,
    tolerance: f64,
) -> Result<()> {
    let closed = MomentQuery::new(w.clone(), kind).closed_form()?;
    let (diff, status) = match oracle {
        Some(value) => {
            let diff = (value - closed).abs();
            let status = if diff <= tolerance {
                SweepStatus::Pass
            } else if matches!(kind, MomentKind::BlockVarianceCollapsed) {
                SweepStatus::Noted
            } else {
                SweepStatus::Fail
            };
            (Some(diff), status)
        }
        None => (None, SweepStatus::Skipped),
    };
    rows.push(SweepRow {
        law: law.to_string(),
        theta: w.theta(),
        max_lag,
        m: w.m(),
        kind: kind.label(),
        l: w.l(),
        q: w.q(),
        gap: kind.gap().map(|g| g as i64).unwrap_or(-1),
        closed_form: closed,
        oracle,
        abs_diff: diff,
        status,
    });
    Ok(())
}

fn sweep_cell(
    law: &str,
    model: &NoiseModel,
    theta: f64,
    m: usize,
    max_lag: usize,
    tolerance: f64,
    rows: &mut Vec<SweepRow>,
) -> Result<()> {
    let window = |l: usize, q: usize| UWindow::from_model(theta, m, l, q, max_lag, model);
    let push = |rows: &mut Vec<SweepRow>, w: &UWindow, kind: MomentKind| -> Result<()> {
        let oracle = oracle_outcome(&MomentQuery::new(w.clone(), kind), model)?;
        record(rows, law, max_lag, w, kind, oracle, tolerance)
    };

    for l in 0..=max_lag {
        let w = window(l, 0)?;
        push(rows, &w, MomentKind::Mean)?;
        push(rows, &w, MomentKind::Variance)?;
        let max_gap = l.max(1) + 1;
        for gap in 1..=max_gap {
            push(rows, &w, MomentKind::SameLagCross { gap })?;
        }
        // Disjoint windows: the cross moment must vanish identically.
        push(rows, &w, MomentKind::SameLagCross { gap: m + l })?;
        // Both block aggregates compare against the same enumeration, so
        // walk it once.
        let block = oracle_outcome(
            &MomentQuery::new(w.clone(), MomentKind::BlockVariance),
            model,
        )?;
        record(
            rows,
            law,
            max_lag,
            &w,
            MomentKind::BlockVariance,
            block,
            tolerance,
        )?;
        record(
            rows,
            law,
            max_lag,
            &w,
            MomentKind::BlockVarianceCollapsed,
            block,
            tolerance,
        )?;
        push(rows, &w, MomentKind::WeightedTimeSum)?;
    }
    for l in 0..=max_lag {
        for q in 0..=max_lag {
            if l == q {
                continue;
            }
            let w = window(l, q)?;
            for gap in 0..=l.max(q) + 1 {
                push(rows, &w, MomentKind::MixedCross { gap })?;
            }
        }
    }
    let coeffs = sweep_coefficients(max_lag);
    let w = window(0, 0)?.with_coefficients(coeffs)?;
    push(rows, &w, MomentKind::HatVariance)?;
    for gap in 1..=max_lag + 1 {
        push(rows, &w, MomentKind::HatCross { gap })?;
    }
    push(rows, &w, MomentKind::HatBlockVariance)?;
    Ok(())
}

/// Whether any gated row disagrees.
pub fn sweep_has_failures(rows: &[SweepRow]) -> bool {
    rows.iter().any(|r| r.status == SweepStatus::Fail)
}

/// Whether any row was skipped by the enumeration guard.
pub fn sweep_has_skips(rows: &[SweepRow]) -> bool {
    rows.iter().any(|r| r.status == SweepStatus::Skipped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(theta: f64, m: usize, l: usize, q: usize, model: &NoiseModel) -> UWindow {
        UWindow::from_model(theta, m, l, q, 2, model).unwrap()
    }

    #[test]
    fn degenerate_variance_at_theta_zero() {
        // U = xi_k xi_k - m2 at theta = 0, l = 0; variance is m4 - m2^2.
        let model = NoiseModel::three_point();
        let w = window(0.0, 5, 0, 0, &model);
        let q = MomentQuery::new(w, MomentKind::Variance);
        let oracle = brute_force_moment(&q, &model).unwrap();
        assert!((oracle - 0.25).abs() < 1e-14);
        assert!((q.closed_form().unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn mean_is_centered() {
        let model = NoiseModel::rademacher();
        for l in 0..=2 {
            let w = UWindow::from_model(0.7, 6, l, 0, 2, &model).unwrap();
            let q = MomentQuery::new(w, MomentKind::Mean);
            assert!(brute_force_moment(&q, &model).unwrap().abs() < 1e-13);
        }
    }

    #[test]
    fn disjoint_windows_factorize_to_zero() {
        let model = NoiseModel::rademacher();
        let w = window(0.6, 5, 1, 0, &model);
        let q = MomentQuery::new(w, MomentKind::SameLagCross { gap: 50 });
        // Far apart, the expectation factorizes into two near-zero means.
        // Without factorization the 56-level joint walk would trip the
        // guard instead, so a tiny value proves the split happened.
        assert!(brute_force_moment(&q, &model).unwrap().abs() < 1e-29);
    }

    #[test]
    fn guard_refuses_oversized_queries() {
        let model = NoiseModel::three_point();
        let w = UWindow::from_model(0.5, 10, 2, 0, 2, &model).unwrap();
        let q = MomentQuery::new(w, MomentKind::BlockVariance);
        assert!(matches!(
            brute_force_moment(&q, &model),
            Err(Error::EnumerationGuard { .. })
        ));
    }

    #[test]
    fn continuous_laws_are_rejected() {
        let model = NoiseModel::standard_normal();
        let w = UWindow::new(0.5, 5, 0, 0, 2, (1.0, 3.0)).unwrap();
        let q = MomentQuery::new(w, MomentKind::Variance);
        assert!(matches!(
            brute_force_moment(&q, &model),
            Err(Error::EnumerationUnsupported(_))
        ));
    }

    #[test]
    #[ignore = "full grid; exercised by the acceptance suite"]
    fn full_default_sweep_is_clean() {
        let rows = verification_sweep(&default_sweep_models(), &SweepConfig::default()).unwrap();
        assert!(!sweep_has_failures(&rows));
        let skips = rows
            .iter()
            .filter(|r| r.status == SweepStatus::Skipped)
            .count();
        eprintln!("rows {} skipped {}", rows.len(), skips);
    }

    #[test]
    fn mini_sweep_passes_and_logs_collapsed_discrepancy() {
        let config = SweepConfig {
            max_lags: vec![1, 2],
            thetas: vec![0.0, 0.5],
            m_offsets: vec![1, 2],
            tolerance: 1e-10,
        };
        let rows = verification_sweep(&default_sweep_models(), &config).unwrap();
        assert!(!sweep_has_failures(&rows), "mini sweep must not fail");
        // The collapsed aggregate rows at l = 2 carry the known undercount.
        let noted: Vec<_> = rows
            .iter()
            .filter(|r| r.status == SweepStatus::Noted)
            .collect();
        assert!(
            noted
                .iter()
                .all(|r| r.kind == "block-variance-collapsed" && r.l == 2),
            "only collapsed high-lag rows may be noted"
        );
        assert!(
            noted
                .iter()
                .any(|r| r.theta > 0.0 && r.abs_diff.unwrap() > 1e-10),
            "the undercount must actually show up at positive theta"
        );
        // And the documented magnitude l (l-1) theta^{2l} m2^2 matches.
        for row in noted {
            if row.theta == 0.5 && row.law == "rademacher" {
                let expect = 2.0 * 0.5f64.powi(4);
                assert!((row.abs_diff.unwrap() - expect).abs() < 1e-12);
            }
        }
    }
}
