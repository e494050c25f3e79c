use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::hardy::{ConditionMode, HardyParams, IndexConvention, Variant};
use crate::integrate::{bump, Domain};
use crate::numeric::fmt_roundtrip;
use crate::sharpness::{Cutoff, TrialFamily};
use crate::{LambdaSystem, ScalarField};

/// Malformed or inconsistent configuration (exit status 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

type CfgResult<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemSection>,
    pub params: Option<ParamsSection>,
    pub run: Option<RunSection>,
    pub schedule: Option<ScheduleSection>,
    /// Written by `derive`; checked against the system on load.
    pub derived: Option<DerivedSection>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub k: usize,
    pub dims: Vec<usize>,
    pub alpha: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DerivedSection {
    pub sigma: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: f64,
    pub bracket_degree: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub p: f64,
    #[serde(default)]
    pub s: f64,
    #[serde(default)]
    pub t: f64,
    /// Defaults to zeros.
    pub mu: Option<Vec<f64>>,
    #[serde(default = "default_variant")]
    pub variant: String,
    pub norm: Option<String>,
}

fn default_variant() -> String {
    "semi".into()
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub command: Option<String>,
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub domain: Option<String>,
    pub testfn: Option<String>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
    pub mode: Option<String>,
    pub convention: Option<String>,
    pub override_conditions: Option<bool>,
    pub norm: Option<String>,
    pub point: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub deltas: Vec<f64>,
    pub radii: Vec<f64>,
    pub cutoff: Option<String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CfgResult<Self> {
        toml::from_str(text).map_err(|e| ConfigError::new(e.to_string()))
    }

    pub fn load(path: &Path) -> CfgResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError::new(format!("{}: {}", path.display(), e.0)))
    }

    pub fn run(&self) -> RunSection {
        self.run.clone().unwrap_or_default()
    }

    pub fn system(&self) -> CfgResult<LambdaSystem> {
        let sec = self.system.as_ref().ok_or_else(|| ConfigError::new("missing [system] section"))?;
        if sec.k != sec.dims.len() {
            return Err(ConfigError::new(format!("k = {} but dims has {} entries", sec.k, sec.dims.len())));
        }
        let sys = LambdaSystem::new(sec.k, &sec.dims, &sec.alpha).map_err(|e| ConfigError::new(e.to_string()))?;
        if let Some(d) = &self.derived {
            let same = d.sigma.len() == sys.k()
                && d.sigma.iter().zip(sys.sigma()).all(|(a, b)| a == b)
                && d.q == sys.homogeneous_dimension()
                && d.bracket_degree.is_none_or(|e| e == sys.bracket_degree());
            if !same {
                return Err(ConfigError::new("[derived] values do not match the [system] section"));
            }
        }
        Ok(sys)
    }

    pub fn params(&self, sys: &LambdaSystem) -> CfgResult<HardyParams> {
        let sec = self.params.as_ref().ok_or_else(|| ConfigError::new("missing [params] section"))?;
        let variant =
            Variant::from_names(&sec.variant, sec.norm.as_deref()).map_err(|e| ConfigError::new(e.to_string()))?;
        let mu = sec.mu.clone().unwrap_or_else(|| vec![0.0; sys.k()]);
        if mu.len() != sys.k() {
            return Err(ConfigError::new(format!("mu has {} entries, system has k = {}", mu.len(), sys.k())));
        }
        HardyParams::new(sec.p, sec.s, sec.t, mu, variant).map_err(|e| ConfigError::new(e.to_string()))
    }

    pub fn family(&self) -> CfgResult<TrialFamily> {
        match &self.schedule {
            None => Ok(TrialFamily::default_schedule()),
            Some(s) => {
                let cutoff = match &s.cutoff {
                    None => Cutoff::default(),
                    Some(c) => c.parse().map_err(|e: crate::Error| ConfigError::new(e.to_string()))?,
                };
                TrialFamily::new(&s.deltas, &s.radii, cutoff).map_err(|e| ConfigError::new(e.to_string()))
            }
        }
    }
}

pub fn parse_mode(s: Option<&str>) -> CfgResult<ConditionMode> {
    s.map_or(Ok(ConditionMode::Verbatim), |v| v.parse().map_err(|e: crate::Error| ConfigError::new(e.to_string())))
}

pub fn parse_convention(s: Option<&str>) -> CfgResult<IndexConvention> {
    s.map_or(Ok(IndexConvention::Column), |v| v.parse().map_err(|e: crate::Error| ConfigError::new(e.to_string())))
}

pub fn parse_list(s: &str) -> CfgResult<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| ConfigError::new(format!("'{t}' is not a number in '{s}'"))))
        .collect()
}

fn split3<'a>(spec: &'a str, what: &str) -> CfgResult<(&'a str, &'a str, &'a str)> {
    let mut it = spec.splitn(3, ':');
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
        _ => Err(ConfigError::new(format!("{what} '{spec}' must look like kind:<list>:<value>"))),
    }
}

/// `ball:<center>:<radius>` or `box:<lo>:<hi>`, checked against the system.
pub fn parse_domain(spec: &str, sys: &LambdaSystem) -> CfgResult<Domain> {
    let (kind, a, b) = split3(spec, "domain")?;
    let dom = match kind {
        "ball" => {
            let r: f64 = b.trim().parse().map_err(|_| ConfigError::new(format!("bad radius '{b}'")))?;
            Domain::ball(parse_list(a)?, r)
        }
        "box" => Domain::boxed(parse_list(a)?, parse_list(b)?),
        other => return Err(ConfigError::new(format!("unknown domain kind '{other}'"))),
    };
    let dom = dom.map_err(|e| ConfigError::new(e.to_string()))?;
    if dom.dim() != sys.n() {
        return Err(ConfigError::new(format!(
            "domain '{spec}' has dimension {}, system has N = {}",
            dom.dim(),
            sys.n()
        )));
    }
    Ok(dom)
}

/// `bump:<center>:<radius>`.
pub fn parse_testfn(spec: &str, sys: &LambdaSystem) -> CfgResult<ScalarField> {
    let (kind, a, b) = split3(spec, "test function")?;
    if kind != "bump" {
        return Err(ConfigError::new(format!("unknown test function '{kind}'")));
    }
    let r: f64 = b.trim().parse().map_err(|_| ConfigError::new(format!("bad radius '{b}'")))?;
    bump(parse_list(a)?, r, sys).map_err(|e| ConfigError::new(e.to_string()))
}

fn list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_roundtrip(*x)).collect();
    format!("[{}]", parts.join(", "))
}

/// TOML for a system; parses back to the same system.
pub fn system_toml(sys: &LambdaSystem) -> String {
    let dims: Vec<String> = sys.dims().iter().map(|d| d.to_string()).collect();
    let rows: Vec<String> = sys.alpha_rows().iter().map(|r| list(r)).collect();
    format!("[system]\nk = {}\ndims = [{}]\nalpha = [{}]\n", sys.k(), dims.join(", "), rows.join(", "))
}

pub fn derived_toml(sys: &LambdaSystem) -> String {
    format!(
        "[derived]\nsigma = {}\nQ = {}\nbracket_degree = {}\n",
        list(sys.sigma()),
        fmt_roundtrip(sys.homogeneous_dimension()),
        fmt_roundtrip(sys.bracket_degree())
    )
}

pub fn params_toml(params: &HardyParams) -> String {
    format!(
        "[params]\np = {}\ns = {}\nt = {}\nmu = {}\nvariant = \"{}\"\nnorm = \"{}\"\n",
        fmt_roundtrip(params.p),
        fmt_roundtrip(params.s),
        fmt_roundtrip(params.t),
        list(&params.mu),
        params.variant.name(),
        params.variant.norm_name()
    )
}

pub fn schedule_toml(family: &TrialFamily) -> String {
    let mut deltas: Vec<f64> = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    for &(d, r) in &family.schedule {
        if !deltas.contains(&d) {
            deltas.push(d);
        }
        if !radii.contains(&r) {
            radii.push(r);
        }
    }
    let cutoff = match family.cutoff {
        Cutoff::LogProfile => "log",
        Cutoff::Smoothstep => "smoothstep",
    };
    format!("[schedule]\ndeltas = {}\nradii = {}\ncutoff = \"{cutoff}\"\n", list(&deltas), list(&radii))
}

/// Resolved `[run]` keys, in a fixed order.
pub fn run_toml(pairs: &[(&str, String)]) -> String {
    let mut s = String::from("[run]\n");
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Prefixes every line with `# `.
pub fn comment(block: &str) -> String {
    block.lines().map(|l| format!("# {l}\n")).collect()
}
