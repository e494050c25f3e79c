//! Inequality instances: parameters, admissibility conditions, weights and
//! explicit constants for the three theorem families.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::norms::{self, NormVariant};
use crate::numeric::{fmt_sig15, LogProduct};
use crate::system::{BlockPoint, LambdaSystem};

/// Norm appearing in the unweighted family's left-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnweightedNorm {
    /// `|x^(1)|`.
    Block1,
    Dist(NormVariant),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Weighted inequality with the bracket norm (`t = 0`).
    SemiNorm,
    /// Weighted inequality with an extra distance-norm factor `‖x‖^t`.
    DistNorm(NormVariant),
    /// `ψ ≡ 1`, constant `((N_1 − p)/p)^p`.
    Unweighted(UnweightedNorm),
}

impl Variant {
    /// Parses the `variant`/`norm` pair used by the config files.
    pub fn from_names(variant: &str, norm: Option<&str>) -> Result<Self> {
        let dist = |n: Option<&str>| -> Result<NormVariant> {
            match n.unwrap_or("dist1") {
                "dist1" => Ok(NormVariant::Dist1),
                "dist2" => Ok(NormVariant::Dist2),
                other => Err(Error::invalid(format!("norm '{other}' is not a distance norm"))),
            }
        };
        match variant {
            "semi" => match norm {
                None | Some("bracket") => Ok(Variant::SemiNorm),
                Some(other) => Err(Error::invalid(format!("variant 'semi' uses the bracket norm, got '{other}'"))),
            },
            "dist" => Ok(Variant::DistNorm(dist(norm)?)),
            "unweighted" => match norm.unwrap_or("block1") {
                "block1" => Ok(Variant::Unweighted(UnweightedNorm::Block1)),
                n => Ok(Variant::Unweighted(UnweightedNorm::Dist(dist(Some(n))?))),
            },
            other => Err(Error::invalid(format!("unknown variant '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::SemiNorm => "semi",
            Variant::DistNorm(_) => "dist",
            Variant::Unweighted(_) => "unweighted",
        }
    }

    pub fn norm_name(&self) -> String {
        match self {
            Variant::SemiNorm => "bracket".into(),
            Variant::DistNorm(v) | Variant::Unweighted(UnweightedNorm::Dist(v)) => v.to_string(),
            Variant::Unweighted(UnweightedNorm::Block1) => "block1".into(),
        }
    }
}

/// One inequality instance `(p, s, t, μ, variant)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HardyParams {
    pub p: f64,
    pub s: f64,
    pub t: f64,
    pub mu: Vec<f64>,
    pub variant: Variant,
}

impl HardyParams {
    pub fn new(p: f64, s: f64, t: f64, mu: Vec<f64>, variant: Variant) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::invalid(format!("p must be finite and > 1, got {p}")));
        }
        if !s.is_finite() || !t.is_finite() || mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("s, t and mu must be finite"));
        }
        if t != 0.0 && !matches!(variant, Variant::DistNorm(_)) {
            return Err(Error::invalid(format!("t = {t} requires the dist variant")));
        }
        if let Variant::DistNorm(NormVariant::Bracket) = variant {
            return Err(Error::invalid("dist variant needs dist1 or dist2"));
        }
        Ok(HardyParams { p, s, t, mu, variant })
    }

    /// First-family instance.
    pub fn semi(p: f64, s: f64, mu: Vec<f64>) -> Result<Self> {
        Self::new(p, s, 0.0, mu, Variant::SemiNorm)
    }

    pub fn dist(p: f64, s: f64, t: f64, mu: Vec<f64>, norm: NormVariant) -> Result<Self> {
        Self::new(p, s, t, mu, Variant::DistNorm(norm))
    }

    pub fn unweighted(p: f64, k: usize, norm: UnweightedNorm) -> Result<Self> {
        Self::new(p, 0.0, 0.0, vec![0.0; k], Variant::Unweighted(norm))
    }

    pub(crate) fn check_system(&self, sys: &LambdaSystem) -> Result<()> {
        if self.mu.len() != sys.k() {
            return Err(Error::DimensionMismatch(format!(
                "mu has {} entries, system has k = {}",
                self.mu.len(),
                sys.k()
            )));
        }
        Ok(())
    }

    /// `Σ σ_i μ_i`.
    pub fn sigma_mu(&self, sys: &LambdaSystem) -> f64 {
        sys.sigma().iter().zip(&self.mu).map(|(s, m)| s * m).sum()
    }

    /// Norm multiplying `t` in the weights (Dist1 if unset).
    pub(crate) fn dist_variant(&self) -> NormVariant {
        match self.variant {
            Variant::DistNorm(v) => v,
            Variant::Unweighted(UnweightedNorm::Dist(v)) => v,
            _ => NormVariant::Dist1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionMode {
    /// Every inequality exactly as stated, `min` over the full exponent set.
    Verbatim,
    /// `min` over the non-zero exponents together with `1` (not the stated form).
    Relaxed,
}

impl FromStr for ConditionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verbatim" => Ok(ConditionMode::Verbatim),
            "relaxed" => Ok(ConditionMode::Relaxed),
            other => Err(Error::invalid(format!("unknown condition mode '{other}'"))),
        }
    }
}

impl fmt::Display for ConditionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionMode::Verbatim => "verbatim",
            ConditionMode::Relaxed => "relaxed",
        })
    }
}

/// Which slice of `α` enters the `min` for index `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum IndexConvention {
    /// `{α_1i, …, α_ki}` (column `i`), the literal subscripts.
    #[default]
    Column,
    /// `{α_i1, …, α_ik}` (row `i`).
    Row,
}

impl FromStr for IndexConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "column" => Ok(IndexConvention::Column),
            "row" => Ok(IndexConvention::Row),
            other => Err(Error::invalid(format!("unknown index convention '{other}'"))),
        }
    }
}

impl fmt::Display for IndexConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexConvention::Column => "column",
            IndexConvention::Row => "row",
        })
    }
}

/// A single checked inequality `lhs < rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionRecord {
    /// Zero-based block index, `None` for the leading condition.
    pub index: Option<usize>,
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub overall: bool,
    pub mode: ConditionMode,
    pub convention: IndexConvention,
    pub variant: Variant,
    pub records: Vec<ConditionRecord>,
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant = {}", self.variant.name())?;
        writeln!(f, "mode = {}", self.mode)?;
        if self.mode == ConditionMode::Relaxed {
            writeln!(f, "note = relaxed mode is not the literal condition")?;
        }
        writeln!(f, "convention = {}", self.convention)?;
        for r in &self.records {
            let idx = r.index.map_or("-".to_string(), |i| (i + 1).to_string());
            writeln!(
                f,
                "record index={} label=\"{}\" lhs={} rhs={} satisfied={}",
                idx,
                r.label,
                fmt_sig15(r.lhs),
                fmt_sig15(r.rhs),
                r.satisfied
            )?;
        }
        write!(f, "overall = {}", if self.overall { "pass" } else { "fail" })
    }
}

fn exponent_min(sys: &LambdaSystem, i: usize, mode: ConditionMode, conv: IndexConvention) -> f64 {
    let k = sys.k();
    let set = (0..k).map(|j| match conv {
        IndexConvention::Column => sys.alpha(j, i),
        IndexConvention::Row => sys.alpha(i, j),
    });
    let m = match mode {
        ConditionMode::Verbatim => set.fold(f64::INFINITY, f64::min),
        ConditionMode::Relaxed => set.filter(|&a| a != 0.0).fold(f64::INFINITY, f64::min),
    };
    m.min(1.0)
}

/// Evaluates the admissibility conditions literally (or relaxed) and reports
/// every inequality.
pub fn check_conditions(
    sys: &LambdaSystem,
    params: &HardyParams,
    mode: ConditionMode,
    convention: IndexConvention,
) -> Result<ConditionReport> {
    params.check_system(sys)?;
    let n = |i: usize| sys.dims()[i] as f64;
    let (p, s, t, mu) = (params.p, params.s, params.t, &params.mu);
    let mut records = Vec::new();
    let mut push = |index, label: String, lhs: f64, rhs: f64| {
        records.push(ConditionRecord { index, label, lhs, rhs, satisfied: lhs < rhs });
    };
    match params.variant {
        Variant::Unweighted(_) => {
            push(None, "p < N_1".into(), p, n(0));
            push(None, "1 < p".into(), 1.0, p);
        }
        Variant::SemiNorm | Variant::DistNorm(_) => {
            push(None, "s + t < N_1 + mu_1".into(), s + t, n(0) + mu[0]);
            for i in 0..sys.k() {
                let m = exponent_min(sys, i, mode, convention);
                let lhs = -p * m + s + t / sys.sigma()[i];
                push(Some(i), format!("-p*min + s + t/sigma_{0} < N_{0} + mu_{0}", i + 1), lhs, n(i) + mu[i]);
            }
        }
    }
    let overall = records.iter().all(|r| r.satisfied);
    Ok(ConditionReport { overall, mode, convention, variant: params.variant, records })
}

fn finish(prod: LogProduct, what: &str) -> Result<f64> {
    prod.value().ok_or_else(|| Error::degenerate(format!("{what} has a pole at this point")))
}

/// Right-hand-side weight `ψ`; identically 1 for the unweighted family.
pub fn weight_psi(sys: &LambdaSystem, params: &HardyParams, x: &BlockPoint) -> Result<f64> {
    params.check_system(sys)?;
    sys.check_point(x)?;
    if let Variant::Unweighted(_) = params.variant {
        return Ok(1.0);
    }
    let p = params.p;
    let b = norms::bracket_norm(sys, x)?;
    let mut prod = LogProduct::one();
    prod.mul_pow(b, p * sys.bracket_degree() - params.s);
    for i in 0..sys.k() {
        prod.mul_pow(x.block_norm(i), params.mu[i] - p * sys.column_sum(i));
    }
    if params.t != 0.0 {
        prod.mul_pow(norms::dist_norm(sys, x, params.dist_variant())?, -params.t);
    }
    finish(prod, "weight psi")
}

/// Left-hand-side factor multiplying `|u|^p`.
pub fn weight_lhs_density(sys: &LambdaSystem, params: &HardyParams, x: &BlockPoint) -> Result<f64> {
    params.check_system(sys)?;
    sys.check_point(x)?;
    let mut prod = LogProduct::one();
    match params.variant {
        Variant::Unweighted(UnweightedNorm::Block1) => {
            prod.mul_pow(x.block_norm(0), -params.p);
        }
        Variant::Unweighted(UnweightedNorm::Dist(v)) => {
            prod.mul_pow(norms::dist_norm(sys, x, v)?, -params.p);
        }
        Variant::SemiNorm | Variant::DistNorm(_) => {
            for i in 0..sys.k() {
                prod.mul_pow(x.block_norm(i), params.mu[i]);
            }
            prod.mul_pow(norms::bracket_norm(sys, x)?, -params.s);
            if params.t != 0.0 {
                prod.mul_pow(norms::dist_norm(sys, x, params.dist_variant())?, -params.t);
            }
        }
    }
    finish(prod, "left-hand-side density")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HardyConstant {
    pub value: f64,
    /// `(numerator / p)` before raising to the power `p`.
    pub base: f64,
    /// False when the numerator is not positive; `value` is then 0.
    pub applicable: bool,
}

/// The explicit constant of the selected family.
pub fn hardy_constant(sys: &LambdaSystem, params: &HardyParams) -> Result<HardyConstant> {
    params.check_system(sys)?;
    let q = sys.homogeneous_dimension();
    let num = match params.variant {
        Variant::SemiNorm => q - params.s + params.sigma_mu(sys),
        Variant::DistNorm(_) => q - params.s - params.t + params.sigma_mu(sys),
        Variant::Unweighted(_) => sys.dims()[0] as f64 - params.p,
    };
    let base = num / params.p;
    if num > 0.0 {
        Ok(HardyConstant { value: base.powf(params.p), base, applicable: true })
    } else {
        Ok(HardyConstant { value: 0.0, base, applicable: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grushin() -> LambdaSystem {
        LambdaSystem::grushin(3, 1, 1.0).unwrap()
    }

    #[test]
    fn verbatim_grushin_fails_second_index() {
        let sys = grushin();
        let params = HardyParams::semi(2.0, 2.0, vec![0.0, 0.0]).unwrap();
        let rep = check_conditions(&sys, &params, ConditionMode::Verbatim, IndexConvention::Column).unwrap();
        assert!(!rep.overall);
        assert!(rep.records[0].satisfied);
        assert!(rep.records[1].satisfied);
        assert!(!rep.records[2].satisfied);
        assert_eq!(rep.records[2].lhs, 2.0);
        assert_eq!(rep.records[2].rhs, 1.0);

        let params = HardyParams::semi(2.0, 2.0, vec![0.0, 2.0]).unwrap();
        let rep = check_conditions(&sys, &params, ConditionMode::Verbatim, IndexConvention::Column).unwrap();
        assert!(rep.overall);
    }

    #[test]
    fn relaxed_mode_uses_nonzero_exponents() {
        let sys = grushin();
        let params = HardyParams::semi(2.0, 2.0, vec![0.0, 0.0]).unwrap();
        let rep = check_conditions(&sys, &params, ConditionMode::Relaxed, IndexConvention::Column).unwrap();
        assert!(rep.overall);
        assert_eq!(rep.records[2].lhs, 0.0);
        assert!(rep.to_string().contains("relaxed mode"));

        // α_21 = 1/2 separates the two index conventions
        let sys = LambdaSystem::grushin(3, 1, 0.5).unwrap();
        let col = check_conditions(&sys, &params, ConditionMode::Relaxed, IndexConvention::Column).unwrap();
        let row = check_conditions(&sys, &params, ConditionMode::Relaxed, IndexConvention::Row).unwrap();
        assert_eq!((col.records[1].lhs, col.records[2].lhs), (1.0, 0.0));
        assert_eq!((row.records[1].lhs, row.records[2].lhs), (0.0, 1.0));
        assert!(col.overall);
        assert!(!row.overall);
    }

    #[test]
    fn unweighted_conditions() {
        let sys = grushin();
        let params = HardyParams::unweighted(2.0, 2, UnweightedNorm::Block1).unwrap();
        let rep = check_conditions(&sys, &params, ConditionMode::Verbatim, IndexConvention::Column).unwrap();
        assert!(rep.overall);
        let params = HardyParams::unweighted(3.5, 2, UnweightedNorm::Block1).unwrap();
        let rep = check_conditions(&sys, &params, ConditionMode::Verbatim, IndexConvention::Column).unwrap();
        assert!(!rep.overall);
    }

    #[test]
    fn constants() {
        let sys = grushin();
        let c = hardy_constant(&sys, &HardyParams::semi(2.0, 2.0, vec![0.0, 0.0]).unwrap()).unwrap();
        assert_relative_eq!(c.value, 2.25, max_relative = 1e-15);
        let c = hardy_constant(&sys, &HardyParams::unweighted(2.0, 2, UnweightedNorm::Block1).unwrap()).unwrap();
        assert_relative_eq!(c.value, 0.25, max_relative = 1e-15);
        let cl = LambdaSystem::classical(3).unwrap();
        let c = hardy_constant(&cl, &HardyParams::semi(2.0, 2.0, vec![0.0]).unwrap()).unwrap();
        assert_relative_eq!(c.value, 0.25, max_relative = 1e-15);
        let c = hardy_constant(&sys, &HardyParams::semi(2.0, 6.0, vec![0.0, 0.0]).unwrap()).unwrap();
        assert!(!c.applicable);
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn constant_decreases_in_s_and_t() {
        let sys = grushin();
        let mut last = f64::INFINITY;
        for i in 0..10 {
            let s = i as f64 * 0.3;
            let c = hardy_constant(&sys, &HardyParams::dist(2.0, s, 0.5, vec![0.0, 0.0], NormVariant::Dist1).unwrap())
                .unwrap();
            assert!(c.value <= last);
            last = c.value;
        }
    }

    #[test]
    fn psi_special_cases() {
        let sys = grushin();
        let x = sys.point(vec![0.3, -0.7, 0.2, 1.4]).unwrap();
        // s = pE, μ_i = pΣ_j α_ji gives ψ ≡ 1
        let params = HardyParams::semi(2.0, 4.0, vec![2.0, 0.0]).unwrap();
        assert_relative_eq!(weight_psi(&sys, &params, &x).unwrap(), 1.0, max_relative = 1e-14);

        let params = HardyParams::semi(2.0, 2.0, vec![0.0, 0.0]).unwrap();
        let e1 = sys.point(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(weight_psi(&sys, &params, &e1).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(weight_lhs_density(&sys, &params, &e1).unwrap(), 1.0, max_relative = 1e-14);
        assert!(matches!(
            weight_psi(&sys, &params, &sys.point(vec![0.0, 0.0, 0.0, 1.0]).unwrap()),
            Err(Error::DegeneratePoint(_))
        ));

        let cl = LambdaSystem::classical(3).unwrap();
        let params = HardyParams::semi(2.0, 2.0, vec![0.0]).unwrap();
        let y = cl.point(vec![0.1, 2.0, -0.4]).unwrap();
        assert_relative_eq!(weight_psi(&cl, &params, &y).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn densities_match_special_forms() {
        let sys = grushin();
        let x = sys.point(vec![0.3, -0.7, 0.2, 1.4]).unwrap();
        let b = norms::bracket_norm(&sys, &x).unwrap();
        let d = norms::dist_norm(&sys, &x, NormVariant::Dist1).unwrap();
        let semi = HardyParams::semi(2.0, 2.0, vec![0.0, 0.0]).unwrap();
        assert_relative_eq!(weight_lhs_density(&sys, &semi, &x).unwrap(), b.powi(-2), max_relative = 1e-14);
        let dist = HardyParams::dist(2.0, 0.0, 2.0, vec![0.0, 0.0], NormVariant::Dist1).unwrap();
        assert_relative_eq!(weight_lhs_density(&sys, &dist, &x).unwrap(), d.powi(-2), max_relative = 1e-14);

        // t = 0 in the dist family reproduces the semi weights
        let dist0 = HardyParams::dist(2.5, 1.0, 0.0, vec![0.5, 1.0], NormVariant::Dist2).unwrap();
        let semi0 = HardyParams::semi(2.5, 1.0, vec![0.5, 1.0]).unwrap();
        assert_eq!(weight_psi(&sys, &dist0, &x).unwrap(), weight_psi(&sys, &semi0, &x).unwrap());
        assert_eq!(weight_lhs_density(&sys, &dist0, &x).unwrap(), weight_lhs_density(&sys, &semi0, &x).unwrap());
    }

    #[test]
    fn density_scales_under_dilation() {
        let sys = LambdaSystem::new(3, &[1, 2, 1], &[vec![0.0; 3], vec![0.5, 0.0, 0.0], vec![1.0, 2.0, 0.0]]).unwrap();
        let params = HardyParams::dist(2.0, 1.5, 0.7, vec![0.0; 3], NormVariant::Dist2).unwrap();
        let x = sys.point(vec![0.4, 1.0, -0.3, 0.8]).unwrap();
        for r in [0.01, 0.5, 3.0, 200.0] {
            let a = weight_lhs_density(&sys, &params, &sys.dilate(r, &x).unwrap()).unwrap();
            let b = r.powf(-2.2) * weight_lhs_density(&sys, &params, &x).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(HardyParams::semi(1.0, 0.0, vec![0.0]).is_err());
        assert!(HardyParams::new(2.0, 0.0, 1.0, vec![0.0], Variant::SemiNorm).is_err());
        assert!(Variant::from_names("semi", Some("dist1")).is_err());
        assert_eq!(
            Variant::from_names("unweighted", Some("dist2")).unwrap(),
            Variant::Unweighted(UnweightedNorm::Dist(NormVariant::Dist2))
        );
        let sys = grushin();
        let params = HardyParams::semi(2.0, 1.0, vec![0.0]).unwrap();
        assert!(matches!(hardy_constant(&sys, &params), Err(Error::DimensionMismatch(_))));
    }
}
