use std::fmt::Write as _;
use std::str::FromStr;

use crate::hardy::HardyParams;
use crate::integrate::InequalityReport;
use crate::numeric::fmt_sig15;
use crate::sharpness::SharpnessTrend;

use super::config::ConfigError;

pub const SCHEMA: &str = "# schema=1\n";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
}

impl FromStr for Format {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            other => Err(ConfigError::new(format!("unknown format '{other}' (text|csv)"))),
        }
    }
}

fn mu_field(mu: &[f64]) -> String {
    mu.iter().map(|m| fmt_sig15(*m)).collect::<Vec<_>>().join(";")
}

pub const VERIFY_COLUMNS: &str = "system_id,p,s,t,mu,constant,lhs,lhs_se,rhs,rhs_se,margin,z,verdict";

/// One line per report.
pub fn verify_record(system_id: &str, params: &HardyParams, rep: &InequalityReport, format: Format) -> String {
    let f = fmt_sig15;
    match format {
        Format::Csv => format!(
            "{system_id},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            f(params.p),
            f(params.s),
            f(params.t),
            mu_field(&params.mu),
            f(rep.constant),
            f(rep.lhs.value),
            f(rep.lhs.std_error),
            f(rep.rhs.value),
            f(rep.rhs.std_error),
            f(rep.margin),
            f(rep.z_score),
            rep.verdict
        ),
        Format::Text => format!(
            "system_id={system_id} variant={} norm={} p={} s={} t={} mu={} constant={} constant_applicable={} \
             lhs={} lhs_se={} rhs={} rhs_se={} margin={} margin_se={} z={} verdict={} samples={} rejected={} seed={}\n",
            params.variant.name(),
            params.variant.norm_name(),
            f(params.p),
            f(params.s),
            f(params.t),
            mu_field(&params.mu),
            f(rep.constant),
            rep.constant_applicable,
            f(rep.lhs.value),
            f(rep.lhs.std_error),
            f(rep.rhs.value),
            f(rep.rhs.std_error),
            f(rep.margin),
            f(rep.margin_std_error),
            f(rep.z_score),
            rep.verdict,
            rep.lhs.samples,
            rep.lhs.rejected,
            rep.lhs.seed
        ),
    }
}

pub fn trend(tr: &SharpnessTrend, format: Format) -> String {
    let f = fmt_sig15;
    let mut out = String::new();
    let bound = if tr.respects_lower_bound() { "pass" } else { "fail" };
    match format {
        Format::Csv => {
            out.push_str("delta,R,ratio,se\n");
            for e in &tr.entries {
                let _ = writeln!(out, "{},{},{},{}", f(e.delta), f(e.radius), f(e.ratio), f(e.std_error));
            }
            let _ = writeln!(
                out,
                "# summary target={} extrapolated={} relative_gap={} lower_bound={bound}",
                f(tr.target),
                f(tr.extrapolated),
                f(tr.relative_gap())
            );
        }
        Format::Text => {
            for e in &tr.entries {
                let _ = writeln!(
                    out,
                    "entry delta={} R={} ratio={} se={}",
                    f(e.delta),
                    f(e.radius),
                    f(e.ratio),
                    f(e.std_error)
                );
            }
            let _ = writeln!(
                out,
                "summary target={} extrapolated={} relative_gap={} lower_bound={bound}",
                f(tr.target),
                f(tr.extrapolated),
                f(tr.relative_gap())
            );
        }
    }
    out
}
