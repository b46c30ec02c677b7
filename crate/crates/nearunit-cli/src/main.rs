//! Command-line front end for the near-unit-root MDP toolkit.
//!
//! Subcommands: `simulate` (dump paths), `estimate` (per-replicate
//! autoregression estimates), `moments verify` (closed forms vs the
//! enumeration oracle), `curve` (tail-probability rate curves), `blocks
//! check` (dependence-condition tables), `schedule check` (admissibility
//! gate and condition table), `clt` (normal-limit check).
//!
//! Exit codes: 0 success, 2 configuration error, 3 verification failure,
//! 4 inconclusive Monte Carlo. Fixed (config, master seed) reproduce all
//! outputs byte for byte regardless of the worker count.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use nearunit::ar1::{InitPolicy, SamplePath};
use nearunit::blocking::{check_abcd, choose_p, CheckThresholds, CondStatus};
use nearunit::estimators::{ls_estimate, yw_estimate};
use nearunit::mdp::{condition_table, rate_linear_combination, scaled_estimator_deviation};
use nearunit::montecarlo::{clt_check, rate_curve, with_workers, RateCurve, StatKind};
use nearunit::streams::{derive_rng, DOMAIN_PATH};
use nearunit::umoments::oracle::{
    default_sweep_models, sweep_has_failures, sweep_has_skips, verification_sweep, SweepConfig,
};
use nearunit::umoments::UWindow;

use config::{CliError, CliResult, Overrides, ResolvedConfig};
use output::{fmt, fmt_opt, RunWriter};

/// Tail-probability and rate-function experiments for empirical
/// covariances of near-unit-root AR(1) processes.
#[derive(Parser)]
#[command(
    name = "nearunit",
    version,
    about,
    long_about = "Tail-probability and rate-function experiments for empirical covariances \
of near-unit-root AR(1) processes.\n\n\
Configuration comes from a TOML file (default ./nearunit.toml). Flags override file \
keys; the NEARUNIT_SEED environment variable overrides every other seed source.\n\n\
Exit codes: 0 success, 2 configuration error, 3 verification failure, 4 inconclusive \
Monte Carlo."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths at the [single] point and write per-replicate CSVs.
    Simulate(CommonArgs),
    /// Per-replicate least-squares and ratio estimates at the [single] point.
    Estimate(CommonArgs),
    /// Moment-formula verification.
    Moments {
        #[command(subcommand)]
        action: MomentsAction,
    },
    /// Tail-probability rate curves along the configured schedule.
    Curve(CommonArgs),
    /// Blocking feasibility and dependence-condition checks.
    Blocks {
        #[command(subcommand)]
        action: BlocksAction,
    },
    /// Growth-schedule admissibility gate and condition table.
    Schedule {
        #[command(subcommand)]
        action: ScheduleAction,
    },
    /// Normal-limit check for the least-squares estimator.
    Clt(CommonArgs),
}

#[derive(Subcommand)]
enum MomentsAction {
    /// Compare every closed-form moment against exhaustive enumeration.
    Verify(CommonArgs),
}

#[derive(Subcommand)]
enum BlocksAction {
    /// Evaluate the dependence conditions at every schedule point.
    Check(CommonArgs),
}

#[derive(Subcommand)]
enum ScheduleAction {
    /// Validate the schedule exponents and tabulate the monitored limits.
    Check(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML experiment config (default ./nearunit.toml if present).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed. Precedence: NEARUNIT_SEED env var, this flag, the
    /// master_seed file key, the built-in default.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 means one per core. Overrides the file key.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory. Overrides the file key.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo replicates. Overrides the file key.
    #[arg(long)]
    replicates: Option<u64>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            config: self.config.clone(),
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            replicates: self.replicates,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => run(args, cmd_simulate),
        Command::Estimate(args) => run(args, cmd_estimate),
        Command::Moments {
            action: MomentsAction::Verify(args),
        } => run(args, cmd_moments_verify),
        Command::Curve(args) => run(args, cmd_curve),
        Command::Blocks {
            action: BlocksAction::Check(args),
        } => run(args, cmd_blocks_check),
        Command::Schedule {
            action: ScheduleAction::Check(args),
        } => run(args, cmd_schedule_check),
        Command::Clt(args) => run(args, cmd_clt),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code as u8)
        }
    }
}

fn run(
    args: &CommonArgs,
    command: fn(&ResolvedConfig, &Overrides) -> CliResult<()>,
) -> CliResult<()> {
    let overrides = args.overrides();
    let resolved = config::resolve(&overrides)?;
    command(&resolved, &overrides)
}

/// Dump simulated paths as CSVs with columns (k, X_k, xi_k).
fn cmd_simulate(config: &ResolvedConfig, overrides: &Overrides) -> CliResult<()> {
    let point = config::resolve_single(config)?;
    let model = config::resolve_noise(&config.noise)?;
    let init = InitPolicy::truncated_default();
    let replicates = overrides.replicates.unwrap_or(config.single.replicates);
    let mut writer = RunWriter::new(&config.out_dir)?;
    std::fs::create_dir_all(writer.dir().join("paths"))
        .map_err(|e| CliError::config(format!("cannot create paths directory: {e}")))?;
    let n = point.n as usize;
    for rep in 0..replicates {
        let mut rng = derive_rng(config.master_seed, &[DOMAIN_PATH, rep]);
        let path = SamplePath::simulate(point.theta, n, &model, &init, &mut rng)?;
        let states = path.states();
        let mut rows = Vec::with_capacity(n + 1);
        // xi_0 does not exist: the recursion starts at k = 1.
        rows.push(format!("0,{},", fmt(states[0])));
        for (k, x) in states.iter().enumerate().skip(1) {
            rows.push(format!("{k},{},{}", fmt(*x), fmt(path.noise_at(k as i64)?)));
        }
        writer.csv(&format!("paths/path-{rep:04}.csv"), "k,X_k,xi_k", &rows)?;
    }
    #[derive(Serialize)]
    struct Report {
        n: u64,
        theta: f64,
        paths_written: u64,
    }
    let summary = writer.summary(
        "simulate",
        config,
        &Report {
            n: point.n,
            theta: point.theta,
            paths_written: replicates,
        },
    )?;
    println!(
        "simulate: wrote {replicates} path file(s) and {}",
        summary.display()
    );
    Ok(())
}

/// Per-replicate estimator values and their MDP-scaled deviations.
fn cmd_estimate(config: &ResolvedConfig, overrides: &Overrides) -> CliResult<()> {
    let point = config::resolve_single(config)?;
    let model = config::resolve_noise(&config.noise)?;
    let init = InitPolicy::truncated_default();
    let replicates = overrides.replicates.unwrap_or(config.replicates);
    if replicates == 0 {
        return Err(CliError::config("replicates must be positive"));
    }
    let n = point.n as usize;
    let seed = config.master_seed;
    // Same streams as `simulate`, so estimate rows match dumped paths.
    let values: Vec<(f64, f64)> = with_workers(config.workers, || {
        (0..replicates)
            .into_par_iter()
            .map(|rep| -> nearunit::Result<(f64, f64)> {
                let mut rng = derive_rng(seed, &[DOMAIN_PATH, rep]);
                let path = SamplePath::simulate(point.theta, n, &model, &init, &mut rng)?;
                Ok((ls_estimate(&path)?, yw_estimate(&path)?))
            })
            .collect::<nearunit::Result<_>>()
    })??;
    let rows: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(rep, (ls, yw))| {
            let ls_dev =
                scaled_estimator_deviation(ls - point.theta, point.theta, point.n, point.b);
            let yw_dev =
                scaled_estimator_deviation(yw - point.theta, point.theta, point.n, point.b);
            format!(
                "{rep},{},{},{},{}",
                fmt(*ls),
                fmt(*yw),
                fmt(ls_dev),
                fmt(yw_dev)
            )
        })
        .collect();
    let mut writer = RunWriter::new(&config.out_dir)?;
    writer.csv(
        "estimates.csv",
        "replicate,ls,yw,ls_scaled_dev,yw_scaled_dev",
        &rows,
    )?;
    let mean = |pick: fn(&(f64, f64)) -> f64| -> f64 {
        values.iter().map(pick).sum::<f64>() / replicates as f64
    };
    #[derive(Serialize)]
    struct Report {
        n: u64,
        theta: f64,
        replicates: u64,
        ls_mean: f64,
        yw_mean: f64,
    }
    let summary = writer.summary(
        "estimate",
        config,
        &Report {
            n: point.n,
            theta: point.theta,
            replicates,
            ls_mean: mean(|v| v.0),
            yw_mean: mean(|v| v.1),
        },
    )?;
    println!(
        "estimate: {replicates} replicate(s) at n = {}, theta = {}; wrote {}",
        point.n,
        point.theta,
        summary.display()
    );
    Ok(())
}

/// Closed-form moments vs exhaustive enumeration over the standard grid.
fn cmd_moments_verify(config: &ResolvedConfig, _overrides: &Overrides) -> CliResult<()> {
    let sweep_config = SweepConfig {
        max_lags: (1..=config.m_max).collect(),
        ..SweepConfig::default()
    };
    let rows = with_workers(config.workers, || {
        verification_sweep(&default_sweep_models(), &sweep_config)
    })??;
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.law,
                fmt(r.theta),
                r.max_lag,
                r.m,
                r.kind,
                r.l,
                r.q,
                r.gap,
                fmt(r.closed_form),
                fmt_opt(r.oracle),
                fmt_opt(r.abs_diff),
                r.status.label()
            )
        })
        .collect();
    let mut writer = RunWriter::new(&config.out_dir)?;
    writer.csv(
        "moments-verify.csv",
        "law,theta,max_lag,m,kind,l,q,gap,closed_form,oracle,abs_diff,status",
        &csv_rows,
    )?;
    let failures = rows
        .iter()
        .filter(|r| sweep_has_failures(std::slice::from_ref(r)))
        .count();
    let skips = rows
        .iter()
        .filter(|r| sweep_has_skips(std::slice::from_ref(r)))
        .count();
    #[derive(Serialize)]
    struct Report {
        rows: usize,
        failures: usize,
        skipped: usize,
        tolerance: f64,
    }
    writer.summary(
        "moments-verify",
        config,
        &Report {
            rows: rows.len(),
            failures,
            skipped: skips,
            tolerance: sweep_config.tolerance,
        },
    )?;
    if failures > 0 {
        return Err(CliError::verification(format!(
            "moment verification failed: {failures} of {} rows disagree beyond {:e} \
             (see moments-verify.csv)",
            rows.len(),
            sweep_config.tolerance
        )));
    }
    if skips > 0 {
        eprintln!(
            "warning: {skips} of {} rows skipped (enumeration guard); \
             closed forms there are unverified",
            rows.len()
        );
    }
    println!(
        "moments verify: {} rows agree within {:e} ({skips} skipped)",
        rows.len(),
        sweep_config.tolerance
    );
    Ok(())
}

/// Tail probabilities over the r grid for every configured statistic kind.
fn cmd_curve(config: &ResolvedConfig, _overrides: &Overrides) -> CliResult<()> {
    let schedule = config::resolve_schedule(config)?;
    let model = config::resolve_noise(&config.noise)?;
    let init = InitPolicy::truncated_default();
    let mut kinds: Vec<StatKind> = Vec::new();
    for kind in &config.kinds {
        match kind.as_str() {
            "covariance" => {
                for l in &config.lags {
                    kinds.push(StatKind::Covariance { l: *l });
                }
            }
            "linear" => {
                // Surface a degenerate rate before any simulation runs.
                rate_linear_combination(
                    config.r_grid[0],
                    &config.coefficients,
                    model.second_moment(),
                )?;
                kinds.push(StatKind::Linear {
                    coefficients: config.coefficients.clone(),
                });
            }
            "estimator-ls" => kinds.push(StatKind::EstimatorLs),
            "estimator-yw" => kinds.push(StatKind::EstimatorYw),
            other => return Err(CliError::config(format!("unknown kind {other:?}"))),
        }
    }
    let replicates = config.replicates;
    let master_seed = config.master_seed;
    let curves: Vec<(StatKind, Vec<RateCurve>)> = with_workers(config.workers, || {
        kinds
            .iter()
            .map(|kind| {
                let curves = rate_curve(
                    kind,
                    &schedule,
                    &config.r_grid,
                    replicates,
                    master_seed,
                    &model,
                    &init,
                )?;
                Ok((kind.clone(), curves))
            })
            .collect::<nearunit::Result<_>>()
    })??;

    let mut writer = RunWriter::new(&config.out_dir)?;
    let mut diagnostics = Vec::new();
    let mut total_cells = 0usize;
    let mut zero_hit_cells = 0usize;
    for (kind, point_curves) in &curves {
        let label = kind.label();
        let mut rows = Vec::new();
        for curve in point_curves {
            let p = &curve.point;
            for e in &curve.estimates {
                total_cells += 1;
                if e.hits == 0 {
                    zero_hit_cells += 1;
                }
                rows.push(format!(
                    "{},{},{},{},{label},{},{},{},{},{},{},{},{}",
                    p.n,
                    fmt(p.theta),
                    fmt(p.b),
                    p.m,
                    fmt(e.r),
                    e.hits,
                    e.replicates,
                    fmt(e.p_hat),
                    fmt(e.ci_low),
                    fmt(e.ci_high),
                    fmt(e.empirical_rate),
                    fmt(e.theoretical_rate)
                ));
            }
            diagnostics.push(Diagnostic {
                kind: label.clone(),
                n: p.n,
                convergence_diagnostic: curve.convergence_diagnostic(),
            });
        }
        writer.csv(
            &format!("curve-{label}.csv"),
            "n,theta,b,m,kind,r,hits,replicates,p_hat,ci_low,ci_high,empirical_rate,theoretical_rate",
            &rows,
        )?;
    }
    #[derive(Serialize)]
    struct Diagnostic {
        kind: String,
        n: u64,
        /// Worst relative rate error over well-estimated cells.
        convergence_diagnostic: Option<f64>,
    }
    #[derive(Serialize)]
    struct Report {
        curves: usize,
        cells: usize,
        zero_hit_cells: usize,
        diagnostics: Vec<Diagnostic>,
    }
    let summary = writer.summary(
        "curve",
        config,
        &Report {
            curves: curves.iter().map(|(_, c)| c.len()).sum(),
            cells: total_cells,
            zero_hit_cells,
            diagnostics,
        },
    )?;
    if total_cells > 0 && zero_hit_cells == total_cells {
        return Err(CliError::inconclusive(format!(
            "every cell is zero-hit at {replicates} replicates; \
             only rate lower bounds were produced (see {})",
            summary.display()
        )));
    }
    println!(
        "curve: {} cell(s) across {} curve file(s); wrote {}",
        total_cells,
        curves.len(),
        summary.display()
    );
    Ok(())
}

/// Dependence-condition tables at every schedule point and lag.
fn cmd_blocks_check(config: &ResolvedConfig, _overrides: &Overrides) -> CliResult<()> {
    let schedule = config::resolve_schedule(config)?;
    let model = config::resolve_noise(&config.noise)?;
    let thresholds = CheckThresholds {
        gamma: config.gamma_dep,
        ..CheckThresholds::default()
    };
    let master_seed = config.master_seed;
    let mut rows = Vec::new();
    let mut unsatisfied = Vec::new();
    let mut inconclusive = Vec::new();
    for point in schedule.points() {
        let p = match choose_p(point.n, point.m, point.b, config.gamma_dep) {
            Ok(p) => p,
            Err(err) => {
                return Err(CliError::verification(format!(
                    "no admissible block spacing at n = {}: {err}",
                    point.n
                )))
            }
        };
        for lag in &config.lags {
            let window = UWindow::from_model(point.theta, point.m, *lag, 0, *lag, &model)?;
            let report = with_workers(config.workers, || {
                check_abcd(point, &window, &model, &thresholds, master_seed)
            })??;
            for item in &report.items {
                rows.push(format!(
                    "{},{},{},{},{lag},{p},{},{},{},{},{},{},{}",
                    point.n,
                    fmt(point.theta),
                    fmt(point.b),
                    point.m,
                    item.name,
                    fmt(item.value),
                    fmt(item.target),
                    fmt_opt(item.ci.map(|c| c.0)),
                    fmt_opt(item.ci.map(|c| c.1)),
                    item.status.label(),
                    item.satisfied.map(|s| s.to_string()).unwrap_or_default()
                ));
                match (item.satisfied, item.status) {
                    (Some(false), _) => {
                        unsatisfied.push(format!("{} at n = {}, lag {lag}", item.name, point.n))
                    }
                    (None, CondStatus::Inconclusive) => {
                        inconclusive.push(format!("{} at n = {}, lag {lag}", item.name, point.n))
                    }
                    _ => {}
                }
            }
        }
    }
    let mut writer = RunWriter::new(&config.out_dir)?;
    writer.csv(
        "blocks-check.csv",
        "n,theta,b,m,lag,p,item,value,target,ci_low,ci_high,status,satisfied",
        &rows,
    )?;
    #[derive(Serialize)]
    struct Report {
        rows: usize,
        unsatisfied: Vec<String>,
        inconclusive: Vec<String>,
    }
    let summary = writer.summary(
        "blocks-check",
        config,
        &Report {
            rows: rows.len(),
            unsatisfied: unsatisfied.clone(),
            inconclusive: inconclusive.clone(),
        },
    )?;
    if !unsatisfied.is_empty() {
        return Err(CliError::verification(format!(
            "dependence conditions unsatisfied: {}",
            unsatisfied.join("; ")
        )));
    }
    if !inconclusive.is_empty() {
        return Err(CliError::inconclusive(format!(
            "conditions not resolved by the Monte Carlo budget: {}",
            inconclusive.join("; ")
        )));
    }
    println!(
        "blocks check: {} condition row(s) satisfied; wrote {}",
        rows.len(),
        summary.display()
    );
    Ok(())
}

/// Admissibility gate plus the five monitored quantities per point.
fn cmd_schedule_check(config: &ResolvedConfig, _overrides: &Overrides) -> CliResult<()> {
    // A rejected schedule surfaces here as exit 3 with the violated
    // inequality in the message.
    let schedule = config::resolve_schedule(config)?;
    let table = condition_table(&schedule);
    let rows: Vec<String> = table
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                fmt(r.theta),
                fmt(r.b),
                r.m,
                fmt(r.deviation_scale),
                fmt(r.root_distance),
                fmt(r.window_coverage),
                fmt(r.window_log_margin),
                fmt(r.dependence_load)
            )
        })
        .collect();
    let mut writer = RunWriter::new(&config.out_dir)?;
    writer.csv(
        "schedule-conditions.csv",
        "n,theta,b,m,deviation_scale,root_distance,window_coverage,window_log_margin,dependence_load",
        &rows,
    )?;
    #[derive(Serialize)]
    struct Report {
        points: usize,
        beta: Option<f64>,
        gamma_b: Option<f64>,
        /// `1/2 - 2 beta - gamma_b`, positive for accepted power schedules.
        admissibility_margin: Option<f64>,
    }
    let summary = writer.summary(
        "schedule-check",
        config,
        &Report {
            points: table.len(),
            beta: schedule.beta(),
            gamma_b: schedule.gamma_b(),
            admissibility_margin: schedule
                .beta()
                .zip(schedule.gamma_b())
                .map(|(beta, gamma_b)| 0.5 - 2.0 * beta - gamma_b),
        },
    )?;
    println!(
        "schedule check: accepted with {} point(s); wrote {}",
        table.len(),
        summary.display()
    );
    Ok(())
}

/// Kolmogorov-Smirnov distance of standardized estimator errors.
fn cmd_clt(config: &ResolvedConfig, overrides: &Overrides) -> CliResult<()> {
    let section = config.clt;
    let replicates = overrides.replicates.unwrap_or(section.replicates);
    let master_seed = config.master_seed;
    let report = with_workers(config.workers, || {
        clt_check(section.theta, section.n, replicates, master_seed)
    })??;
    let mut writer = RunWriter::new(&config.out_dir)?;
    writer.csv(
        "clt.csv",
        "theta,n,replicates,ks,root_distance,low_power",
        &[format!(
            "{},{},{},{},{},{}",
            fmt(report.theta),
            report.n,
            report.replicates,
            fmt(report.ks),
            fmt(report.root_distance),
            report.low_power
        )],
    )?;
    #[derive(Serialize)]
    struct Report {
        theta: f64,
        n: u64,
        replicates: u64,
        ks: f64,
        root_distance: f64,
        low_power: bool,
    }
    let summary = writer.summary(
        "clt",
        config,
        &Report {
            theta: report.theta,
            n: report.n,
            replicates: report.replicates,
            ks: report.ks,
            root_distance: report.root_distance,
            low_power: report.low_power,
        },
    )?;
    if report.low_power {
        return Err(CliError::inconclusive(format!(
            "KS distance {} from only {} replicate(s) is low-power; \
             results written to {}",
            report.ks,
            report.replicates,
            summary.display()
        )));
    }
    println!(
        "clt: KS = {} at theta = {}, n = {} (n(1-theta) = {}); wrote {}",
        report.ks,
        report.theta,
        report.n,
        report.root_distance,
        summary.display()
    );
    Ok(())
}
