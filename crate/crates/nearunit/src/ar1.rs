//! Stationary AR(1) sample paths with retained innovation history.
//!
//! A path follows `X_k = theta X_{k-1} + xi_k` for `k = 1..n` with
//! `0 <= theta < 1`. Stationarity of the start `X_0` is obtained either
//! exactly (Gaussian noise only) or through a truncated moving-average
//! series whose horizon is chosen so the omitted tail is below a requested
//! epsilon. The truncated variant retains its warmup innovations and
//! pre-path states, because windowed quantities such as the truncated state
//! and the m-dependent increment approximation need to look at noise strictly
//! before the path start.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::noise::NoiseModel;

/// How the stationary start `X_0` is produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitPolicy {
    /// Draw `X_0 ~ N(0, sigma^2 / (1 - theta^2))` exactly. Only valid for
    /// Gaussian innovations.
    ExactGaussian,
    /// Build `X_0` from a truncated series over past innovations, keeping
    /// enough terms that the dropped tail weight `theta^H` is at most
    /// `epsilon`.
    TruncatedSeries { epsilon: f64 },
}

impl InitPolicy {
    /// Default tail weight for the truncated series start.
    pub const DEFAULT_EPSILON: f64 = 1e-12;

    pub fn truncated_default() -> Self {
        InitPolicy::TruncatedSeries {
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    /// Number of pre-path innovations the policy retains at a given theta.
    pub fn horizon(&self, theta: f64) -> Result<usize> {
        match self {
            InitPolicy::ExactGaussian => Ok(0),
            InitPolicy::TruncatedSeries { epsilon } => {
                if !epsilon.is_finite() || *epsilon <= 0.0 || *epsilon >= 1.0 {
                    return Err(Error::InvalidParameter {
                        name: "epsilon",
                        message: format!("must lie in (0, 1), got {epsilon}"),
                    });
                }
                if theta == 0.0 {
                    return Ok(1);
                }
                let h = (epsilon.ln() / theta.ln()).ceil();
                Ok((h as usize).max(1))
            }
        }
    }
}

/// A simulated AR(1) path together with its innovation history.
#[derive(Clone, Debug)]
pub struct SamplePath {
    theta: f64,
    n: usize,
    /// `X_0 ..= X_n`.
    states: Vec<f64>,
    /// `xi_{1-H} ..= xi_n`, where `H` is the retained history length.
    noise: Vec<f64>,
    /// Pre-path states `X_{1-H} ..= X_{-1}` (empty when `H <= 1`).
    warmup: Vec<f64>,
    history: usize,
}

fn check_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() || !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidParameter {
            name: "theta",
            message: format!("must lie in [0, 1), got {theta}"),
        });
    }
    Ok(())
}

impl SamplePath {
    /// Simulate a path of length `n` (states `X_0 ..= X_n`).
    ///
    /// All draws come from `rng` in a fixed order: the start first (one
    /// Gaussian for the exact policy, `H` warmup innovations for the
    /// truncated policy), then `xi_1 ..= xi_n`.
    pub fn simulate(
        theta: f64,
        n: usize,
        model: &NoiseModel,
        init: &InitPolicy,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        check_theta(theta)?;
        match init {
            InitPolicy::ExactGaussian => {
                let sigma = match model.law() {
                    crate::noise::NoiseLaw::Normal { sigma } => *sigma,
                    other => {
                        return Err(Error::InvalidParameter {
                            name: "init",
                            message: format!(
                                "exact Gaussian start requires normal noise, got {other:?}"
                            ),
                        })
                    }
                };
                let scale = sigma / (1.0 - theta * theta).sqrt();
                let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
                let x0 = scale * z;
                let mut noise = vec![0.0; n];
                model.fill(&mut noise, rng);
                let mut states = Vec::with_capacity(n + 1);
                states.push(x0);
                for k in 1..=n {
                    states.push(theta * states[k - 1] + noise[k - 1]);
                }
                Ok(Self {
                    theta,
                    n,
                    states,
                    noise,
                    warmup: Vec::new(),
                    history: 0,
                })
            }
            InitPolicy::TruncatedSeries { .. } => {
                let history = init.horizon(theta)?;
                let mut noise = vec![0.0; history + n];
                model.fill(&mut noise, rng);
                // Forward Horner over the warmup window: after consuming
                // xi_j the accumulator equals the truncated-series state at
                // index j, so the partials are the pre-path states.
                let mut warmup = Vec::with_capacity(history.saturating_sub(1));
                let mut x = 0.0;
                for (j, &xi) in noise[..history].iter().enumerate() {
                    x = theta * x + xi;
                    if j + 1 < history {
                        warmup.push(x);
                    }
                }
                let mut states = Vec::with_capacity(n + 1);
                states.push(x);
                for k in 1..=n {
                    states.push(theta * states[k - 1] + noise[history + k - 1]);
                }
                Ok(Self {
                    theta,
                    n,
                    states,
                    noise,
                    warmup,
                    history,
                })
            }
        }
    }

    /// Build a path from an explicit start and innovation sequence
    /// (`xi_1 ..= xi_n`). No history is retained.
    pub fn from_parts(theta: f64, x0: f64, noise: Vec<f64>) -> Result<Self> {
        check_theta(theta)?;
        if !x0.is_finite() || noise.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise",
                message: "start and innovations must be finite".into(),
            });
        }
        let n = noise.len();
        let mut states = Vec::with_capacity(n + 1);
        states.push(x0);
        for k in 1..=n {
            states.push(theta * states[k - 1] + noise[k - 1]);
        }
        Ok(Self {
            theta,
            n,
            states,
            noise,
            warmup: Vec::new(),
            history: 0,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Number of recursion steps; states run `X_0 ..= X_n`.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Retained pre-path innovation count `H`; `xi_k` exists for
    /// `k >= 1 - H`.
    pub fn history(&self) -> usize {
        self.history
    }

    /// `X_0 ..= X_n`.
    pub fn states(&self) -> &[f64] {
        &self.states
    }

    /// `X_k` for `0 <= k <= n`.
    pub fn state(&self, k: usize) -> f64 {
        self.states[k]
    }

    /// Smallest index at which `xi` is available.
    pub fn first_noise_index(&self) -> i64 {
        1 - self.history as i64
    }

    /// `xi_k` for `1 - H <= k <= n`.
    pub fn noise_at(&self, k: i64) -> Result<f64> {
        let first = self.first_noise_index();
        if k < first || k > self.n as i64 {
            return Err(Error::HistoryRange(format!(
                "noise index {k} outside retained range [{first}, {}]",
                self.n
            )));
        }
        Ok(self.noise[(k - first) as usize])
    }

    /// The state at index `k`, extended below zero through the retained
    /// warmup (`1 - H <= k <= n`; for `k <= 0` this is the truncated-series
    /// partial sum that the simulation start was built from).
    pub fn state_extended(&self, k: i64) -> Result<f64> {
        if k >= 0 && k <= self.n as i64 {
            return Ok(self.states[k as usize]);
        }
        let first = self.first_noise_index();
        if k < first || self.history == 0 {
            return Err(Error::HistoryRange(format!(
                "state index {k} outside retained range [{first}, {}]",
                self.n
            )));
        }
        Ok(self.warmup[(k - first) as usize])
    }

    /// Stationary variance `E xi^2 / (1 - theta^2)`.
    pub fn stationary_variance(theta: f64, second_moment: f64) -> f64 {
        second_moment / (1.0 - theta * theta)
    }

    /// The m-window truncation of the predecessor state at index `k`:
    /// `sum_{j=0}^{m-2} theta^j xi_{k-1-j}`. Requires `m >= 2` and a
    /// retained history covering `xi_{k-m+1}`.
    pub fn truncated_state(&self, k: i64, m: usize) -> Result<f64> {
        if m < 2 {
            return Err(Error::InvalidParameter {
                name: "m",
                message: format!("truncation window must be at least 2, got {m}"),
            });
        }
        let lo = k - m as i64 + 1;
        let hi = k - 1;
        if lo < self.first_noise_index() || hi > self.n as i64 {
            return Err(Error::HistoryRange(format!(
                "truncated state at {k} with window {m} needs noise on [{lo}, {hi}], \
                 retained [{}, {}]",
                self.first_noise_index(),
                self.n
            )));
        }
        let first = self.first_noise_index();
        let mut acc = 0.0;
        for idx in lo..=hi {
            acc = self.theta * acc + self.noise[(idx - first) as usize];
        }
        Ok(acc)
    }

    /// The innovation pair product `xi_k xi_{k-p}`.
    pub fn pair_product(&self, k: i64, p: usize) -> Result<f64> {
        Ok(self.noise_at(k)? * self.noise_at(k - p as i64)?)
    }
}
