//! Experiment configuration: the on-disk TOML schema, its defaults, and
//! resolution into library types.
//!
//! Every key is optional in the file; resolution fills in documented
//! defaults so a run is fully described by the resolved echo embedded in
//! its JSON summary. Unknown keys anywhere in the file are rejected with a
//! message naming the key.
//!
//! Seed precedence, strongest first: the `NEARUNIT_SEED` environment
//! variable, the `--seed` flag, the `master_seed` file key, the built-in
//! default. The other flags (`--workers`, `--out`, `--replicates`)
//! override their file keys.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use nearunit::mdp::{make_schedule, make_schedule_with, Schedule, SchedulePoint};
use nearunit::noise::{Fraction, NoiseModel};

pub const DEFAULT_CONFIG_PATH: &str = "nearunit.toml";
pub const SEED_ENV_VAR: &str = "NEARUNIT_SEED";
pub const DEFAULT_MASTER_SEED: u64 = 1729;
pub const DEFAULT_REPLICATES: u64 = 10_000;
pub const DEFAULT_OUT_DIR: &str = "out";

/// A CLI failure carrying its process exit code: 2 for configuration
/// errors, 3 for verification failures, 4 for inconclusive Monte Carlo.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }

    pub fn inconclusive(message: impl Into<String>) -> Self {
        CliError {
            code: 4,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<nearunit::Error> for CliError {
    fn from(err: nearunit::Error) -> Self {
        match err {
            // A rejected schedule is a failed admissibility check, not a
            // syntax problem; the message carries the violated inequality.
            nearunit::Error::ScheduleRejected(_) => CliError::verification(err.to_string()),
            _ => CliError::config(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::config(format!("i/o error: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// On-disk schema. All keys optional; unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    master_seed: Option<u64>,
    replicates: Option<u64>,
    workers: Option<usize>,
    out_dir: Option<String>,
    m_max: Option<usize>,
    lags: Option<Vec<usize>>,
    coefficients: Option<Vec<f64>>,
    r_grid: Option<Vec<f64>>,
    kinds: Option<Vec<String>>,
    tau: Option<f64>,
    alpha0: Option<f64>,
    beta0: Option<f64>,
    gamma_dep: Option<f64>,
    noise: Option<NoiseSection>,
    schedule: Option<ScheduleSection>,
    single: Option<SingleSection>,
    clt: Option<CltSection>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// One of: normal | rademacher | uniform | three-point | discrete.
    pub kind: String,
    /// Standard deviation; kind = normal only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Support half width; kind = uniform only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Support points; kind = discrete only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Exact probabilities as fraction strings like "3/8"; kind = discrete.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<String>>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            kind: "normal".to_string(),
            sigma: None,
            half_width: None,
            values: None,
            probabilities: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// Unit-root approach exponent: theta = 1 - n^(-beta).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Speed exponent: b = n^(gamma_b).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<u64>>,
    /// Window exponent e in m = ceil((1-theta)^(-e)); must sit in (1, 5/4).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_exponent: Option<f64>,
    /// Explicit points instead of the power laws; mutually exclusive with
    /// the exponent keys.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<PointSection>>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PointSection {
    pub n: u64,
    pub theta: f64,
    pub b: f64,
    pub m: usize,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SingleSection {
    pub n: u64,
    pub theta: f64,
    pub b: f64,
    pub m: usize,
    /// Replicates for `simulate`; kept small because each one is a file.
    pub replicates: u64,
}

impl Default for SingleSection {
    fn default() -> Self {
        SingleSection {
            n: 1_000,
            theta: 0.9,
            b: 2.0,
            m: 16,
            replicates: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CltSection {
    pub theta: f64,
    pub n: u64,
    pub replicates: u64,
}

impl Default for CltSection {
    fn default() -> Self {
        CltSection {
            theta: 0.99,
            n: 10_000,
            replicates: 10_000,
        }
    }
}

/// Where the effective master seed came from, echoed in summaries.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedSource {
    Environment,
    Flag,
    File,
    Default,
}

/// A fully resolved configuration: every default filled in, every flag
/// applied. Serialized verbatim into JSON summaries so runs are
/// self-describing.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedConfig {
    pub master_seed: u64,
    pub seed_source: SeedSource,
    pub replicates: u64,
    /// 0 means one worker per available core.
    pub workers: usize,
    pub out_dir: String,
    pub m_max: usize,
    pub lags: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub kinds: Vec<String>,
    pub tau: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub gamma_dep: f64,
    pub noise: NoiseSection,
    pub schedule: ScheduleSection,
    pub single: SingleSection,
    pub clt: CltSection,
}

/// Flag overrides collected from the command line.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub replicates: Option<u64>,
}

/// Load the config file (explicit path, else the default path if present,
/// else built-in defaults), apply flag and environment overrides, fill in
/// defaults, and validate cheap invariants.
pub fn resolve(overrides: &Overrides) -> CliResult<ResolvedConfig> {
    let file = match &overrides.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            parse_file(&text)?
        }
        None => {
            let default = PathBuf::from(DEFAULT_CONFIG_PATH);
            if default.is_file() {
                let text = std::fs::read_to_string(&default).map_err(|e| {
                    CliError::config(format!("cannot read config {}: {e}", default.display()))
                })?;
                parse_file(&text)?
            } else {
                FileConfig::default()
            }
        }
    };

    let (master_seed, seed_source) = resolve_seed(&file, overrides)?;
    let resolved = ResolvedConfig {
        master_seed,
        seed_source,
        replicates: overrides
            .replicates
            .or(file.replicates)
            .unwrap_or(DEFAULT_REPLICATES),
        workers: overrides.workers.or(file.workers).unwrap_or(0),
        out_dir: overrides
            .out
            .as_ref()
            .map(|p| p.display().to_string())
            .or(file.out_dir)
            .unwrap_or_else(|| DEFAULT_OUT_DIR.to_string()),
        m_max: file.m_max.unwrap_or(1),
        lags: file.lags.unwrap_or_else(|| vec![0, 1]),
        coefficients: file.coefficients.unwrap_or_else(|| vec![0.5, 0.5]),
        r_grid: file.r_grid.unwrap_or_else(|| vec![2.75, 3.0, 3.25, 3.5]),
        kinds: file.kinds.unwrap_or_else(|| vec!["covariance".to_string()]),
        tau: file.tau.unwrap_or(0.5),
        alpha0: file.alpha0.unwrap_or(nearunit::blocking::DEFAULT_ALPHA0),
        beta0: file.beta0.unwrap_or(nearunit::blocking::DEFAULT_BETA0),
        gamma_dep: file.gamma_dep.unwrap_or(2.0 / 3.0),
        noise: file.noise.unwrap_or_default(),
        schedule: file.schedule.unwrap_or_default(),
        single: file.single.unwrap_or_default(),
        clt: file.clt.unwrap_or_default(),
    };
    validate(&resolved)?;
    Ok(resolved)
}

fn parse_file(text: &str) -> CliResult<FileConfig> {
    // toml's serde errors already name unknown keys explicitly.
    toml::from_str(text).map_err(|e| CliError::config(format!("config error: {e}")))
}

fn resolve_seed(file: &FileConfig, overrides: &Overrides) -> CliResult<(u64, SeedSource)> {
    if let Ok(raw) = std::env::var(SEED_ENV_VAR) {
        let seed = raw.trim().parse::<u64>().map_err(|_| {
            CliError::config(format!(
                "{SEED_ENV_VAR} must be an unsigned integer, got {raw:?}"
            ))
        })?;
        return Ok((seed, SeedSource::Environment));
    }
    if let Some(seed) = overrides.seed {
        return Ok((seed, SeedSource::Flag));
    }
    if let Some(seed) = file.master_seed {
        return Ok((seed, SeedSource::File));
    }
    Ok((DEFAULT_MASTER_SEED, SeedSource::Default))
}

fn validate(config: &ResolvedConfig) -> CliResult<()> {
    if config.m_max == 0 {
        return Err(CliError::config("m_max must be at least 1"));
    }
    if config.lags.is_empty() {
        return Err(CliError::config("lags must not be empty"));
    }
    if config.r_grid.is_empty() {
        return Err(CliError::config("r_grid must not be empty"));
    }
    if config.kinds.is_empty() {
        return Err(CliError::config("kinds must not be empty"));
    }
    for kind in &config.kinds {
        match kind.as_str() {
            "covariance" | "linear" | "estimator-ls" | "estimator-yw" => {}
            other => {
                return Err(CliError::config(format!(
                    "unknown kind {other:?}; expected covariance | linear | \
                     estimator-ls | estimator-yw"
                )))
            }
        }
    }
    let s = &config.schedule;
    let has_power = s.beta.is_some() || s.gamma_b.is_some() || s.n_values.is_some();
    if s.points.is_some() && has_power {
        return Err(CliError::config(
            "schedule: give either the exponent keys (beta, gamma_b, n_values) \
             or explicit points, not both",
        ));
    }
    Ok(())
}

/// Build the noise model described by the `[noise]` section.
pub fn resolve_noise(section: &NoiseSection) -> CliResult<NoiseModel> {
    let reject_extras = |allowed: &str| -> CliResult<()> {
        let mut stray = Vec::new();
        if section.sigma.is_some() && allowed != "sigma" {
            stray.push("sigma");
        }
        if section.half_width.is_some() && allowed != "half_width" {
            stray.push("half_width");
        }
        if (section.values.is_some() || section.probabilities.is_some()) && allowed != "discrete" {
            stray.push("values/probabilities");
        }
        if stray.is_empty() {
            Ok(())
        } else {
            Err(CliError::config(format!(
                "noise kind {:?} does not take {}",
                section.kind,
                stray.join(", ")
            )))
        }
    };
    match section.kind.as_str() {
        "normal" => {
            reject_extras("sigma")?;
            Ok(NoiseModel::normal(section.sigma.unwrap_or(1.0))?)
        }
        "rademacher" => {
            reject_extras("")?;
            Ok(NoiseModel::rademacher())
        }
        "uniform" => {
            reject_extras("half_width")?;
            Ok(NoiseModel::uniform(section.half_width.unwrap_or(1.0))?)
        }
        "three-point" => {
            reject_extras("")?;
            Ok(NoiseModel::three_point())
        }
        "discrete" => {
            reject_extras("discrete")?;
            let values = section
                .values
                .clone()
                .ok_or_else(|| CliError::config("noise kind discrete needs values"))?;
            let raw = section
                .probabilities
                .clone()
                .ok_or_else(|| CliError::config("noise kind discrete needs probabilities"))?;
            let probabilities = raw
                .iter()
                .map(|s| parse_fraction(s))
                .collect::<CliResult<Vec<_>>>()?;
            Ok(NoiseModel::discrete(values, probabilities)?)
        }
        other => Err(CliError::config(format!(
            "unknown noise kind {other:?}; expected normal | rademacher | \
             uniform | three-point | discrete"
        ))),
    }
}

/// Parse an exact probability written as "num/den" or a bare integer.
fn parse_fraction(text: &str) -> CliResult<Fraction> {
    let cleaned = text.trim();
    let (num, den) = match cleaned.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (cleaned, "1"),
    };
    let num: u64 = num
        .parse()
        .map_err(|_| CliError::config(format!("bad probability numerator in {text:?}")))?;
    let den: u64 = den
        .parse()
        .map_err(|_| CliError::config(format!("bad probability denominator in {text:?}")))?;
    Ok(Fraction::new(num, den)?)
}

/// Build the experiment schedule described by the `[schedule]` section.
pub fn resolve_schedule(config: &ResolvedConfig) -> CliResult<Schedule> {
    let s = &config.schedule;
    let schedule = if let Some(points) = &s.points {
        let points = points
            .iter()
            .map(|p| SchedulePoint {
                n: p.n,
                theta: p.theta,
                b: p.b,
                m: p.m,
            })
            .collect();
        Schedule::from_points(points)?
    } else {
        let beta = s.beta.unwrap_or(0.15);
        let gamma_b = s.gamma_b.unwrap_or(0.05);
        let ns = s
            .n_values
            .clone()
            .unwrap_or_else(|| vec![10_000, 50_000, 200_000]);
        match s.window_exponent {
            Some(e) => make_schedule_with(beta, gamma_b, e, &ns)?,
            None => make_schedule(beta, gamma_b, &ns)?,
        }
    };
    Ok(schedule.with_dependence_gamma(config.gamma_dep)?)
}

/// The single experiment point used by `simulate` and `estimate`,
/// validated through the schedule constructor.
pub fn resolve_single(config: &ResolvedConfig) -> CliResult<SchedulePoint> {
    let s = config.single;
    let schedule = Schedule::from_points(vec![SchedulePoint {
        n: s.n,
        theta: s.theta,
        b: s.b,
        m: s.m,
    }])?;
    Ok(schedule.points()[0])
}
