//! Centered innovation laws with exactly known moments.
//!
//! Every model in this module has mean exactly zero by construction, a known
//! second moment `E xi^2` and fourth moment `E xi^4`, and a stored witness
//! `alpha` with `E exp(alpha xi^2) < infinity`. Closed-form moment formulas
//! elsewhere in the crate consume these exact moments, so construction is
//! strict: anything that cannot be validated is rejected with an error
//! rather than silently normalized.
//!
//! Discrete laws keep their probabilities as exact integer fractions. That
//! makes sampling exact (an integer draw against integer cumulative weights)
//! and lets the enumeration oracle weight outcome paths without rounding
//! whenever the common denominator is a power of two, which covers the
//! bundled test laws.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};

/// An exact probability `num/den` for a discrete noise value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidNoise(
                "probability denominator is zero".into(),
            ));
        }
        if num > den {
            return Err(Error::InvalidNoise(format!(
                "probability {num}/{den} exceeds one"
            )));
        }
        let g = gcd(num.max(1), den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a.max(1)
}

fn lcm(a: u64, b: u64) -> Option<u64> {
    (a / gcd(a, b)).checked_mul(b)
}

/// Supported innovation laws.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseLaw {
    /// Centered Gaussian with standard deviation `sigma`.
    Normal { sigma: f64 },
    /// Symmetric two-point law on {-1, +1}.
    Rademacher,
    /// Continuous uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Finitely supported law with exact rational probabilities.
    Discrete {
        values: Vec<f64>,
        probabilities: Vec<Fraction>,
    },
}

/// Outcome of an exponential-square integrability query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrabilityCheck {
    /// Whether `E exp(alpha xi^2)` is finite.
    pub finite: bool,
    /// The value of the expectation when finite.
    pub value: Option<f64>,
}

/// A validated innovation law together with its exact moments.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    law: NoiseLaw,
    second_moment: f64,
    fourth_moment: f64,
    integrability_alpha: f64,
    /// Exact integer sampling table for discrete laws:
    /// (common denominator, per-value weights summing to it).
    discrete_weights: Option<(u64, Vec<u64>)>,
}

impl NoiseModel {
    pub fn new(law: NoiseLaw) -> Result<Self> {
        match &law {
            NoiseLaw::Normal { sigma } => {
                if !sigma.is_finite() || *sigma <= 0.0 {
                    return Err(Error::InvalidNoise(format!(
                        "normal sigma must be positive and finite, got {sigma}"
                    )));
                }
                let m2 = sigma * sigma;
                Ok(Self {
                    law,
                    second_moment: m2,
                    fourth_moment: 3.0 * m2 * m2,
                    // Any alpha below 1/(2 sigma^2) works; stay strictly inside.
                    integrability_alpha: 0.25 / m2,
                    discrete_weights: None,
                })
            }
            NoiseLaw::Rademacher => Ok(Self {
                law,
                second_moment: 1.0,
                fourth_moment: 1.0,
                integrability_alpha: 1.0,
                discrete_weights: Some((2, vec![1, 1])),
            }),
            NoiseLaw::Uniform { half_width } => {
                if !half_width.is_finite() || *half_width <= 0.0 {
                    return Err(Error::InvalidNoise(format!(
                        "uniform half width must be positive and finite, got {half_width}"
                    )));
                }
                let a2 = half_width * half_width;
                Ok(Self {
                    law,
                    second_moment: a2 / 3.0,
                    fourth_moment: a2 * a2 / 5.0,
                    integrability_alpha: 1.0,
                    discrete_weights: None,
                })
            }
            NoiseLaw::Discrete {
                values,
                probabilities,
            } => {
                let (m2, m4, weights) = validate_discrete(values, probabilities)?;
                Ok(Self {
                    law,
                    second_moment: m2,
                    fourth_moment: m4,
                    integrability_alpha: 1.0,
                    discrete_weights: Some(weights),
                })
            }
        }
    }

    pub fn normal(sigma: f64) -> Result<Self> {
        Self::new(NoiseLaw::Normal { sigma })
    }

    pub fn standard_normal() -> Self {
        Self::new(NoiseLaw::Normal { sigma: 1.0 }).expect("unit sigma is valid")
    }

    pub fn rademacher() -> Self {
        Self::new(NoiseLaw::Rademacher).expect("rademacher law is valid")
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        Self::new(NoiseLaw::Uniform { half_width })
    }

    pub fn discrete(values: Vec<f64>, probabilities: Vec<Fraction>) -> Result<Self> {
        Self::new(NoiseLaw::Discrete {
            values,
            probabilities,
        })
    }

    /// Symmetric three-point law on {-1, 0, +1} with weights (1/4, 1/2, 1/4).
    pub fn three_point() -> Self {
        let quarter = Fraction::new(1, 4).expect("valid fraction");
        let half = Fraction::new(1, 2).expect("valid fraction");
        Self::discrete(vec![-1.0, 0.0, 1.0], vec![quarter, half, quarter])
            .expect("three point law is valid")
    }

    pub fn law(&self) -> &NoiseLaw {
        &self.law
    }

    /// Exact `E xi^2`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// Exact `E xi^4`.
    pub fn fourth_moment(&self) -> f64 {
        self.fourth_moment
    }

    /// A stored alpha for which `E exp(alpha xi^2)` is finite.
    pub fn integrability_alpha(&self) -> f64 {
        self.integrability_alpha
    }

    /// Essential supremum of `|xi|`, when finite.
    pub fn bound(&self) -> Option<f64> {
        match &self.law {
            NoiseLaw::Normal { .. } => None,
            NoiseLaw::Rademacher => Some(1.0),
            NoiseLaw::Uniform { half_width } => Some(*half_width),
            NoiseLaw::Discrete { values, .. } => {
                values.iter().map(|v| v.abs()).fold(None, |acc, v| {
                    Some(match acc {
                        None => v,
                        Some(a) if v > a => v,
                        Some(a) => a,
                    })
                })
            }
        }
    }

    /// Exact sampling table for finitely supported laws, if any:
    /// values paired with integer weights over a common denominator.
    pub fn finite_support(&self) -> Option<(Vec<f64>, Vec<u64>, u64)> {
        let (den, weights) = self.discrete_weights.as_ref()?;
        let values = match &self.law {
            NoiseLaw::Rademacher => vec![-1.0, 1.0],
            NoiseLaw::Discrete { values, .. } => values.clone(),
            _ => return None,
        };
        Some((values, weights.clone(), *den))
    }

    /// Draw one innovation.
    #[inline]
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.law {
            NoiseLaw::Normal { sigma } => {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                sigma * z
            }
            NoiseLaw::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseLaw::Uniform { half_width } => rng.gen_range(-half_width..=*half_width),
            NoiseLaw::Discrete { values, .. } => {
                let (den, weights) = self
                    .discrete_weights
                    .as_ref()
                    .expect("validated discrete law has weights");
                let mut r = rng.gen_range(0..*den);
                for (v, w) in values.iter().zip(weights) {
                    if r < *w {
                        return *v;
                    }
                    r -= w;
                }
                *values.last().expect("validated law has values")
            }
        }
    }

    /// Fill `out` with innovations, matching on the law once.
    pub fn fill(&self, out: &mut [f64], rng: &mut ChaCha8Rng) {
        match &self.law {
            NoiseLaw::Normal { sigma } => {
                let dist = Normal::new(0.0, *sigma).expect("validated sigma");
                for slot in out {
                    *slot = dist.sample(rng);
                }
            }
            NoiseLaw::Uniform { half_width } => {
                let dist = Uniform::new_inclusive(-half_width, *half_width);
                for slot in out {
                    *slot = dist.sample(rng);
                }
            }
            _ => {
                for slot in out {
                    *slot = self.draw(rng);
                }
            }
        }
    }

    /// Check whether `E exp(alpha xi^2)` is finite and evaluate it when so.
    pub fn verify_integrability(&self, alpha: f64) -> Result<IntegrabilityCheck> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidParameter {
                name: "alpha",
                message: format!("must be finite and nonnegative, got {alpha}"),
            });
        }
        match &self.law {
            NoiseLaw::Normal { sigma } => {
                let s2 = sigma * sigma;
                if 2.0 * alpha * s2 >= 1.0 {
                    Ok(IntegrabilityCheck {
                        finite: false,
                        value: None,
                    })
                } else {
                    Ok(IntegrabilityCheck {
                        finite: true,
                        value: Some(1.0 / (1.0 - 2.0 * alpha * s2).sqrt()),
                    })
                }
            }
            NoiseLaw::Rademacher => Ok(IntegrabilityCheck {
                finite: true,
                value: Some(alpha.exp()),
            }),
            NoiseLaw::Uniform { half_width } => {
                // E exp(alpha xi^2) = sum_k (alpha a^2)^k / (k! (2k+1)),
                // an entire series; terms below machine epsilon are dropped.
                let x = alpha * half_width * half_width;
                let mut term = 1.0;
                let mut total = 1.0;
                for k in 1..1000 {
                    term *= x / k as f64;
                    let contribution = term / (2 * k + 1) as f64;
                    total += contribution;
                    if contribution < total * f64::EPSILON {
                        break;
                    }
                }
                Ok(IntegrabilityCheck {
                    finite: true,
                    value: Some(total),
                })
            }
            NoiseLaw::Discrete {
                values,
                probabilities,
            } => {
                let value = values
                    .iter()
                    .zip(probabilities)
                    .map(|(v, p)| p.value() * (alpha * v * v).exp())
                    .sum();
                Ok(IntegrabilityCheck {
                    finite: true,
                    value: Some(value),
                })
            }
        }
    }
}

/// Validate a discrete law: probabilities sum to one exactly, mean is exactly
/// zero, and moments are computable. Returns (m2, m4, sampling weights).
fn validate_discrete(
    values: &[f64],
    probabilities: &[Fraction],
) -> Result<(f64, f64, (u64, Vec<u64>))> {
    if values.is_empty() {
        return Err(Error::InvalidNoise("discrete law has no support".into()));
    }
    if values.len() != probabilities.len() {
        return Err(Error::InvalidNoise(format!(
            "{} values but {} probabilities",
            values.len(),
            probabilities.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidNoise(
            "support contains a non-finite value".into(),
        ));
    }
    let mut den: u64 = 1;
    for p in probabilities {
        den = lcm(den, p.den()).ok_or_else(|| {
            Error::InvalidNoise("common probability denominator overflows".into())
        })?;
    }
    if den > (1 << 32) {
        return Err(Error::InvalidNoise(format!(
            "common probability denominator {den} is too large for exact sampling"
        )));
    }
    let weights: Vec<u64> = probabilities
        .iter()
        .map(|p| p.num() * (den / p.den()))
        .collect();
    let total: u64 = weights.iter().sum();
    if total != den {
        return Err(Error::InvalidNoise(format!(
            "probabilities sum to {total}/{den}, not one"
        )));
    }
    // Weights are exact integers well below 2^53, so each product below is a
    // single rounding; compensated summation keeps the mean test exact for
    // symmetric supports.
    let mean: f64 = neumaier(values.iter().zip(&weights).map(|(v, w)| v * *w as f64));
    if mean != 0.0 {
        return Err(Error::InvalidNoise(format!(
            "law has nonzero mean {:e}",
            mean / den as f64
        )));
    }
    let m2 = neumaier(values.iter().zip(&weights).map(|(v, w)| v * v * *w as f64)) / den as f64;
    let m4 = neumaier(
        values
            .iter()
            .zip(&weights)
            .map(|(v, w)| v * v * v * v * *w as f64),
    ) / den as f64;
    if m2 <= 0.0 {
        return Err(Error::InvalidNoise("law is degenerate at zero".into()));
    }
    if m4 < m2 * m2 {
        return Err(Error::InvalidNoise(format!(
            "fourth moment {m4} below squared second moment {}",
            m2 * m2
        )));
    }
    Ok((m2, m4, (den, weights)))
}

/// Compensated (Neumaier) summation.
pub(crate) fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Draw `count` innovations from the stream labelled `stream` under
/// `master_seed`. Fixed (seed, stream, count) reproduces the same vector
/// bit for bit.
pub fn sample(model: &NoiseModel, count: usize, master_seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = crate::streams::derive_rng(master_seed, &[crate::streams::DOMAIN_NOISE, stream]);
    let mut out = vec![0.0; count];
    model.fill(&mut out, &mut rng);
    out
}
