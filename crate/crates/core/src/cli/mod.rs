//! Command-line front end: config ingestion, dispatch and report emission.

pub mod config;
pub mod format;
pub mod selftest;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use crate::hardy::check_conditions;
use crate::integrate::{verify_inequality_with, VerifyOptions};
use crate::norms::{self, NormVariant};
use crate::numeric::fmt_sig15;
use crate::sharpness::grushin_sharpness_sweep;
use crate::Error;

use config::{
    comment, parse_convention, parse_domain, parse_list, parse_mode, parse_testfn, quoted, ConfigError, RunConfig,
};
use format::Format;

/// Selftest found a failing invariant (exit status 1).
#[derive(Debug, thiserror::Error)]
#[error("selftest: {0} suite(s) failed")]
pub struct SelftestFailed(pub usize);

#[derive(Debug, Parser)]
#[command(name = "dlh", version, about = "Hardy-type inequalities for Δλ-Laplacians")]
pub struct Cli {
    /// Config file with any of the [system], [params], [run], [schedule] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print σ, Q and the bracket degree of a system.
    Derive(SystemArg),
    /// Evaluate the admissibility conditions.
    Check(CheckArgs),
    /// Evaluate a homogeneous norm at a point.
    NormEval(NormEvalArgs),
    /// Monte-Carlo check of one inequality instance.
    Verify(VerifyArgs),
    /// Rayleigh-ratio sweep over the Grushin trial family.
    EstimateConstant(EstimateArgs),
    /// Run the invariant suites on the shipped fixtures.
    Selftest(SelftestArgs),
    /// Run the command named by `[run] command` in the config.
    Run,
}

#[derive(Debug, Args, Default)]
pub struct SystemArg {
    #[arg(long)]
    pub system: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct CheckArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// verbatim | relaxed
    #[arg(long)]
    pub mode: Option<String>,
    /// column | row
    #[arg(long)]
    pub convention: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct NormEvalArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// bracket | dist1 | dist2
    #[arg(long)]
    pub variant: Option<String>,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Regularization; 0 or absent evaluates the plain norm.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct OutputArgs {
    /// text | csv
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct VerifyArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// bump:<center>:<radius>
    #[arg(long, allow_hyphen_values = true)]
    pub testfn: Option<String>,
    /// ball:<center>:<radius> or box:<lo>:<hi>
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub override_conditions: bool,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub convention: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Default)]
pub struct EstimateArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Samples per Monte-Carlo check.
    #[arg(long, default_value_t = 20_000)]
    pub n: u64,
}

/// Exit status for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        2
    } else if err.downcast_ref::<SelftestFailed>().is_some() {
        1
    } else if let Some(Error::ConditionsNotMet(_)) = err.downcast_ref::<Error>() {
        3
    } else {
        4
    }
}

/// Runs a parsed command, writing its report to `out` (or to the configured
/// output file).
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Derive(a) => derive(&mut cfg, a, out),
        Command::Check(a) => check(&mut cfg, a, out),
        Command::NormEval(a) => norm_eval(&mut cfg, a, out),
        Command::Verify(a) => verify(&mut cfg, a, out),
        Command::EstimateConstant(a) => estimate(&mut cfg, a, out),
        Command::Selftest(a) => selftest::run(a.n, out),
        Command::Run => {
            let cmd = cfg.run().command.ok_or_else(|| ConfigError::new("[run] command is not set"))?;
            match cmd.as_str() {
                "derive" => derive(&mut cfg, SystemArg::default(), out),
                "check" => check(&mut cfg, CheckArgs::default(), out),
                "norm-eval" => norm_eval(&mut cfg, NormEvalArgs::default(), out),
                "verify" => verify(&mut cfg, VerifyArgs::default(), out),
                "estimate-constant" => estimate(&mut cfg, EstimateArgs::default(), out),
                "selftest" => selftest::run(20_000, out),
                other => Err(ConfigError::new(format!("unknown command '{other}'")).into()),
            }
        }
    }
}

fn overlay(cfg: &mut RunConfig, path: &Option<PathBuf>, pick: fn(&mut RunConfig, RunConfig)) -> anyhow::Result<()> {
    if let Some(p) = path {
        pick(cfg, RunConfig::load(p)?);
    }
    Ok(())
}

fn take_system(cfg: &mut RunConfig, o: RunConfig) {
    if o.system.is_some() {
        cfg.system = o.system;
        cfg.derived = o.derived;
    }
}

fn take_params(cfg: &mut RunConfig, o: RunConfig) {
    if o.params.is_some() {
        cfg.params = o.params;
    }
}

fn take_schedule(cfg: &mut RunConfig, o: RunConfig) {
    if o.schedule.is_some() {
        cfg.schedule = o.schedule;
    }
}

fn emit(out: &mut dyn Write, path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => out.write_all(text.as_bytes()).context("writing output"),
    }
}

fn resolve_format(flag: Option<String>, cfg: Option<String>) -> Result<Format, ConfigError> {
    flag.or(cfg).map_or(Ok(Format::Text), |s| s.parse())
}

fn derive(cfg: &mut RunConfig, a: SystemArg, out: &mut dyn Write) -> anyhow::Result<()> {
    overlay(cfg, &a.system, take_system)?;
    let sys = cfg.system()?;
    let text = format!("# dlh derive\n{}\n{}", config::system_toml(&sys), config::derived_toml(&sys));
    emit(out, None, &text)
}

fn check(cfg: &mut RunConfig, a: CheckArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    overlay(cfg, &a.system, take_system)?;
    overlay(cfg, &a.params, take_params)?;
    let run = cfg.run();
    let sys = cfg.system()?;
    let params = cfg.params(&sys)?;
    let mode = parse_mode(a.mode.or(run.mode).as_deref())?;
    let conv = parse_convention(a.convention.or(run.convention).as_deref())?;
    let report = check_conditions(&sys, &params, mode, conv)?;
    let header =
        format!("# dlh check\n{}", comment(&format!("{}{}", config::system_toml(&sys), config::params_toml(&params))));
    emit(out, None, &format!("{header}{report}\n"))?;
    if report.overall {
        Ok(())
    } else {
        Err(Error::ConditionsNotMet(Box::new(report)).into())
    }
}

fn norm_eval(cfg: &mut RunConfig, a: NormEvalArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    overlay(cfg, &a.system, take_system)?;
    let run = cfg.run();
    let sys = cfg.system()?;
    let variant: NormVariant = a
        .variant
        .or(run.norm)
        .unwrap_or_else(|| "bracket".into())
        .parse()
        .map_err(|e: Error| ConfigError::new(e.to_string()))?;
    let coords = match (a.point, run.point) {
        (Some(s), _) => parse_list(&s)?,
        (None, Some(v)) => v,
        (None, None) => return Err(ConfigError::new("norm-eval needs --point").into()),
    };
    let eps = a.epsilon.or(run.epsilon).unwrap_or(0.0);
    let x = sys.point(coords.clone()).map_err(|e| ConfigError::new(e.to_string()))?;
    let value = norms::norm(&sys, &x, variant, eps)?;
    let point: Vec<String> = coords.iter().map(|c| fmt_sig15(*c)).collect();
    let text = format!(
        "# dlh norm-eval\n{}# variant = {variant}\n# point = {}\n# epsilon = {}\n{}\n",
        comment(&config::system_toml(&sys)),
        point.join(","),
        fmt_sig15(eps),
        fmt_sig15(value)
    );
    emit(out, None, &text)
}

fn verify(cfg: &mut RunConfig, a: VerifyArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    overlay(cfg, &a.system, take_system)?;
    overlay(cfg, &a.params, take_params)?;
    let run = cfg.run();
    let sys = cfg.system()?;
    let params = cfg.params(&sys)?;
    let testfn = a.testfn.or(run.testfn).ok_or_else(|| ConfigError::new("verify needs --testfn"))?;
    let domain_spec = a.domain.or(run.domain).ok_or_else(|| ConfigError::new("verify needs --domain"))?;
    let u = parse_testfn(&testfn, &sys)?;
    let domain = parse_domain(&domain_spec, &sys)?;
    let n = a.n.or(run.n).ok_or_else(|| ConfigError::new("verify needs --n"))?;
    let seed = a.seed.or(run.seed).unwrap_or(0);
    let mode = parse_mode(a.mode.or(run.mode).as_deref())?;
    let convention = parse_convention(a.convention.or(run.convention).as_deref())?;
    let override_conditions = a.override_conditions || run.override_conditions.unwrap_or(false);
    let format = resolve_format(a.out.format, run.format)?;
    let output = a.out.output.or(run.output);

    let echo = config::run_toml(&[
        ("command", quoted("verify")),
        ("n", n.to_string()),
        ("seed", seed.to_string()),
        ("domain", quoted(&domain_spec)),
        ("testfn", quoted(&testfn)),
        ("mode", quoted(&mode.to_string())),
        ("convention", quoted(&convention.to_string())),
        ("override_conditions", override_conditions.to_string()),
        ("format", quoted(if format == Format::Csv { "csv" } else { "text" })),
    ]);
    let mut text = String::new();
    if format == Format::Csv {
        text.push_str(format::SCHEMA);
    }
    text.push_str("# dlh verify\n");
    text.push_str(&comment(&format!("{}{}{}", config::system_toml(&sys), config::params_toml(&params), echo)));

    let opts = VerifyOptions { sampler: None, mode, convention, override_conditions };
    let report = match verify_inequality_with(&sys, &params, &u, &domain, n, seed, &opts) {
        Ok(r) => r,
        Err(Error::ConditionsNotMet(rep)) => {
            text.push_str(&format!("{rep}\n"));
            emit(out, output.as_ref(), &text)?;
            return Err(Error::ConditionsNotMet(rep).into());
        }
        Err(e) => return Err(e.into()),
    };
    if format == Format::Csv {
        text.push_str(format::VERIFY_COLUMNS);
        text.push('\n');
    }
    text.push_str(&format::verify_record(&sys.id(), &params, &report, format));
    emit(out, output.as_ref(), &text)
}

fn estimate(cfg: &mut RunConfig, a: EstimateArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    overlay(cfg, &a.system, take_system)?;
    overlay(cfg, &a.params, take_params)?;
    overlay(cfg, &a.schedule, take_schedule)?;
    let run = cfg.run();
    let sys = cfg.system()?;
    let params = cfg.params(&sys)?;
    let family = cfg.family()?;
    let n = a.n.or(run.n).ok_or_else(|| ConfigError::new("estimate-constant needs --n"))?;
    let seed = a.seed.or(run.seed).unwrap_or(0);
    // the sweep defaults to CSV
    let format = match a.out.format.or(run.format) {
        None => Format::Csv,
        Some(f) => f.parse()?,
    };
    let output = a.out.output.or(run.output);
    let trend = grushin_sharpness_sweep(&sys, &params, &family, n, seed).map_err(|e| match e {
        Error::InvalidParameter(_) | Error::NotGrushin(_) => anyhow!(ConfigError::new(e.to_string())),
        other => other.into(),
    })?;
    let echo = config::run_toml(&[
        ("command", quoted("estimate-constant")),
        ("n", n.to_string()),
        ("seed", seed.to_string()),
        ("format", quoted(if format == Format::Csv { "csv" } else { "text" })),
    ]);
    let mut text = String::new();
    if format == Format::Csv {
        text.push_str(format::SCHEMA);
    }
    text.push_str("# dlh estimate-constant\n");
    text.push_str(&comment(&format!(
        "{}{}{}{}",
        config::system_toml(&sys),
        config::params_toml(&params),
        config::schedule_toml(&family),
        echo
    )));
    text.push_str(&format::trend(&trend, format));
    emit(out, output.as_ref(), &text)
}
