use std::fmt;

use super::{sample_moments, Domain, IntegralEstimate, Moments, SamplerSpec};
use crate::calculus::{div_lambda, grad_lambda};
use crate::error::{Error, Result};
use crate::fields::{BlockVectorField, ScalarField};
use crate::hardy::{self, check_conditions, ConditionMode, HardyParams, IndexConvention, Variant};
use crate::numeric::euclid;
use crate::system::LambdaSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn from_z(z: f64) -> Self {
        if z > 3.0 {
            Verdict::Holds
        } else if z < -3.0 {
            Verdict::Violated
        } else {
            Verdict::Inconclusive
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "Holds",
            Verdict::Violated => "Violated",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

/// Paired estimate of `constant · lhs ≤ rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityReport {
    pub constant: f64,
    /// False when the constant's numerator is not positive.
    pub constant_applicable: bool,
    pub lhs: IntegralEstimate,
    pub rhs: IntegralEstimate,
    /// `rhs − constant · lhs`.
    pub margin: f64,
    /// Standard error of the margin, including the lhs/rhs covariance.
    pub margin_std_error: f64,
    pub z_score: f64,
    pub verdict: Verdict,
}

impl InequalityReport {
    fn from_moments(constant: f64, applicable: bool, m: &Moments<2>, seed: u64) -> Self {
        let lhs = m.estimate(0, seed);
        let rhs = m.estimate(1, seed);
        let margin = rhs.value - constant * lhs.value;
        let se = m.combined_std_error(&[-constant, 1.0]);
        let z_score = if se > 0.0 {
            margin / se
        } else if margin > 0.0 {
            f64::INFINITY
        } else if margin < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        InequalityReport {
            constant,
            constant_applicable: applicable,
            lhs,
            rhs,
            margin,
            margin_std_error: se,
            z_score,
            verdict: Verdict::from_z(z_score),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    /// `None` picks the radial sampler with exponent `s + t` (`p` for the
    /// unweighted family).
    pub sampler: Option<SamplerSpec>,
    pub mode: ConditionMode,
    pub convention: IndexConvention,
    /// Run even when the admissibility conditions fail.
    pub override_conditions: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            sampler: None,
            mode: ConditionMode::Verbatim,
            convention: IndexConvention::Column,
            override_conditions: false,
        }
    }
}

/// Default sampler for an inequality instance.
pub(crate) fn default_sampler(sys: &LambdaSystem, params: &HardyParams) -> SamplerSpec {
    let a = match params.variant {
        Variant::Unweighted(_) => params.p,
        _ => params.s + params.t,
    };
    SamplerSpec::radial(a.min(sys.homogeneous_dimension() - 0.5))
}

/// Evaluates `(density·|u|^p, ψ·|∇_λu|^p)`, skipping each weight where its
/// companion factor vanishes.
fn hardy_integrands(
    sys: &LambdaSystem,
    params: &HardyParams,
    u: &ScalarField,
    x: &crate::system::BlockPoint,
) -> Result<[f64; 2]> {
    let uv = u.eval(x)?;
    let g = grad_lambda(u, sys, x)?;
    let gn = euclid(&g);
    let lhs = if uv == 0.0 { 0.0 } else { hardy::weight_lhs_density(sys, params, x)? * uv.abs().powf(params.p) };
    let rhs = if gn == 0.0 { 0.0 } else { hardy::weight_psi(sys, params, x)? * gn.powf(params.p) };
    Ok([lhs, rhs])
}

/// Estimates both sides of the selected inequality with default options.
pub fn verify_inequality(
    sys: &LambdaSystem,
    params: &HardyParams,
    u: &ScalarField,
    domain: &Domain,
    n: u64,
    seed: u64,
) -> Result<InequalityReport> {
    verify_inequality_with(sys, params, u, domain, n, seed, &VerifyOptions::default())
}

pub fn verify_inequality_with(
    sys: &LambdaSystem,
    params: &HardyParams,
    u: &ScalarField,
    domain: &Domain,
    n: u64,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<InequalityReport> {
    let report = check_conditions(sys, params, opts.mode, opts.convention)?;
    if !report.overall && !opts.override_conditions {
        return Err(Error::ConditionsNotMet(Box::new(report)));
    }
    let constant = hardy::hardy_constant(sys, params)?;
    let sampler = opts.sampler.unwrap_or_else(|| default_sampler(sys, params));
    let m = sample_moments::<2, _>(sys, domain, &sampler, n, seed, |x| hardy_integrands(sys, params, u, x))?;
    Ok(InequalityReport::from_moments(constant.value, constant.applicable, &m, seed))
}

/// `p^{−p} ∫|u|^p div_λh ≤ ∫ |h|^p (div_λh)^{1−p} |∇_λu|^p`.
#[allow(clippy::too_many_arguments)]
pub fn lemma_check(
    sys: &LambdaSystem,
    h: &BlockVectorField,
    u: &ScalarField,
    p: f64,
    domain: &Domain,
    n: u64,
    seed: u64,
    sampler: &SamplerSpec,
) -> Result<InequalityReport> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!("p must be > 1, got {p}")));
    }
    let m = sample_moments::<2, _>(sys, domain, sampler, n, seed, |x| {
        let uv = u.eval(x)?;
        let g = grad_lambda(u, sys, x)?;
        let gn = euclid(&g);
        if uv == 0.0 && gn == 0.0 {
            return Ok([0.0, 0.0]);
        }
        let div = div_lambda(h, sys, x)?;
        if !(div > 0.0) {
            return Err(Error::NonPositiveDivergence(div));
        }
        let lhs = uv.abs().powf(p) * div;
        let rhs = if gn == 0.0 { 0.0 } else { euclid(&h.eval(x)?).powf(p) * div.powf(1.0 - p) * gn.powf(p) };
        Ok([lhs, rhs])
    })?;
    Ok(InequalityReport::from_moments(p.powf(-p), true, &m, seed))
}

/// `∫ψ|∇_λu|^p / ∫ density·|u|^p` with a delta-method standard error.
pub fn rayleigh_ratio(
    sys: &LambdaSystem,
    params: &HardyParams,
    u: &ScalarField,
    domain: &Domain,
    n: u64,
    seed: u64,
    sampler: Option<SamplerSpec>,
) -> Result<RatioEstimate> {
    let sampler = sampler.unwrap_or_else(|| default_sampler(sys, params));
    let m = sample_moments::<2, _>(sys, domain, &sampler, n, seed, |x| hardy_integrands(sys, params, u, x))?;
    RatioEstimate::from_moments(&m, seed)
}

/// Ratio of two jointly sampled integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioEstimate {
    pub ratio: IntegralEstimate,
    pub numerator: IntegralEstimate,
    pub denominator: IntegralEstimate,
}

impl RatioEstimate {
    fn from_moments(m: &Moments<2>, seed: u64) -> Result<Self> {
        let den = m.estimate(0, seed);
        let num = m.estimate(1, seed);
        if !(den.value.abs() > 3.0 * den.std_error) {
            return Err(Error::DegenerateDenominator { value: den.value, std_error: den.std_error });
        }
        let r = num.value / den.value;
        let se = m.combined_std_error(&[-r, 1.0]) / den.value.abs();
        Ok(RatioEstimate {
            ratio: IntegralEstimate { value: r, std_error: se, ..num },
            numerator: num,
            denominator: den,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::bump;

    #[test]
    fn zero_test_function_is_inconclusive() {
        let sys = LambdaSystem::classical(3).unwrap();
        let params = HardyParams::semi(2.0, 2.0, vec![0.0]).unwrap();
        let dom = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        let rep = verify_inequality(&sys, &params, &ScalarField::zero(), &dom, 2000, 1).unwrap();
        assert_eq!(rep.lhs.value, 0.0);
        assert_eq!(rep.rhs.value, 0.0);
        assert_eq!(rep.margin, 0.0);
        assert_eq!(rep.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn conditions_gate_and_override() {
        let sys = LambdaSystem::grushin(3, 1, 1.0).unwrap();
        let params = HardyParams::semi(2.0, 2.0, vec![0.0, 0.0]).unwrap();
        let dom = Domain::ball(vec![0.0; 4], 1.0).unwrap();
        let u = bump(vec![0.0; 4], 0.9, &sys).unwrap();
        assert!(matches!(verify_inequality(&sys, &params, &u, &dom, 2000, 1), Err(Error::ConditionsNotMet(_))));
        let opts = VerifyOptions { override_conditions: true, ..VerifyOptions::default() };
        let rep = verify_inequality_with(&sys, &params, &u, &dom, 20_000, 1, &opts).unwrap();
        assert_ne!(rep.verdict, Verdict::Violated);
    }

    #[test]
    fn classical_bump_holds() {
        let sys = LambdaSystem::classical(3).unwrap();
        let params = HardyParams::semi(2.0, 2.0, vec![0.0]).unwrap();
        let dom = Domain::ball(vec![0.0; 3], 2.0).unwrap();
        let u = bump(vec![0.5, 0.0, 0.0], 1.0, &sys).unwrap();
        let rep = verify_inequality(&sys, &params, &u, &dom, 50_000, 9).unwrap();
        assert_eq!(rep.verdict, Verdict::Holds);
        assert_eq!(rep.constant, 0.25);
        let ratio = rayleigh_ratio(&sys, &params, &u, &dom, 50_000, 9, None).unwrap();
        assert!(ratio.ratio.value > 0.25);
    }

    #[test]
    fn degenerate_denominator() {
        let sys = LambdaSystem::classical(3).unwrap();
        let params = HardyParams::semi(2.0, 2.0, vec![0.0]).unwrap();
        let dom = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        assert!(matches!(
            rayleigh_ratio(&sys, &params, &ScalarField::zero(), &dom, 2000, 1, None),
            Err(Error::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn lemma_rejects_negative_divergence() {
        let sys = LambdaSystem::classical(3).unwrap();
        let dom = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        let u = bump(vec![0.0; 3], 0.5, &sys).unwrap();
        let h = BlockVectorField::new(|x| Ok(x.coords().iter().map(|c| -c).collect())).with_divergence(|_| Ok(-3.0));
        assert!(matches!(
            lemma_check(&sys, &h, &u, 2.0, &dom, 2000, 1, &SamplerSpec::Uniform),
            Err(Error::NonPositiveDivergence(_))
        ));
    }
}
