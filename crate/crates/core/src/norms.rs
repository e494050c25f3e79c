//! Homogeneous norms: the bracket norm built from the `λ_i`, the two
//! distance-type norms, and their ε-regularizations.
//!
//! All evaluators work with logarithms of the summands and combine them
//! with log-sum-exp, so large `σ` products do not overflow.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fd;
use crate::numeric::{log_sum_exp, softmax};
use crate::system::{BlockPoint, LambdaSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormVariant {
    Bracket,
    Dist1,
    Dist2,
}

impl fmt::Display for NormVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormVariant::Bracket => "bracket",
            NormVariant::Dist1 => "dist1",
            NormVariant::Dist2 => "dist2",
        })
    }
}

impl FromStr for NormVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bracket" => Ok(NormVariant::Bracket),
            "dist1" => Ok(NormVariant::Dist1),
            "dist2" => Ok(NormVariant::Dist2),
            other => Err(Error::invalid(format!("unknown norm variant '{other}'"))),
        }
    }
}

fn ln_abs(v: f64) -> f64 {
    if v == 0.0 {
        f64::NEG_INFINITY
    } else {
        v.ln()
    }
}

/// `ln λ_i` (or `ln λ_i^ε` for `eps > 0`), respecting `0^0 = 1`.
fn ln_lambda(sys: &LambdaSystem, i: usize, x: &BlockPoint, eps: f64) -> f64 {
    (0..i).filter(|&l| sys.alpha(i, l) != 0.0).map(|l| 0.5 * sys.alpha(i, l) * ln_abs(x.block_norm_sq(l) + eps)).sum()
}

/// Logarithms of the bracket-norm summands
/// `τ_j = ∏_{i≠j} (λ_i^ε)² σ_j² |x^(j)|²`.
pub(crate) fn ln_bracket_terms(sys: &LambdaSystem, x: &BlockPoint, eps: f64) -> Vec<f64> {
    let k = sys.k();
    let ln_lam: Vec<f64> = (0..k).map(|i| ln_lambda(sys, i, x, eps)).collect();
    (0..k)
        .map(|j| {
            let others: f64 = (0..k).filter(|&i| i != j).map(|i| 2.0 * ln_lam[i]).sum();
            others + 2.0 * sys.sigma()[j].ln() + 2.0 * ln_abs(x.block_norm(j))
        })
        .collect()
}

/// Same summands, assembled from the monomial exponents `Σ_{i≠j} α_il`.
fn ln_bracket_terms_expanded(sys: &LambdaSystem, x: &BlockPoint) -> Vec<f64> {
    let k = sys.k();
    (0..k)
        .map(|j| {
            let mut acc = 2.0 * sys.sigma()[j].ln() + 2.0 * ln_abs(x.block_norm(j));
            for l in 0..k {
                let a = sys.bracket_exponent(j, l);
                if a != 0.0 {
                    acc += 2.0 * a * ln_abs(x.block_norm(l));
                }
            }
            acc
        })
        .collect()
}

/// Logarithms of the distance-norm summands `(c_j² (|x^(j)|² + ε))^{P_j}`
/// with `c_j = 1` (Dist1) or `σ_j` (Dist2) and `P_j = ∏_{i≠j} σ_i`.
pub(crate) fn ln_dist_terms(sys: &LambdaSystem, x: &BlockPoint, eps: f64, variant: NormVariant) -> Vec<f64> {
    (0..sys.k())
        .map(|j| {
            let c = match variant {
                NormVariant::Dist2 => 2.0 * sys.sigma()[j].ln(),
                _ => 0.0,
            };
            sys.sigma_product_except(j) * (c + ln_abs(x.block_norm_sq(j) + eps))
        })
        .collect()
}

fn from_log_terms(terms: &[f64], degree: f64) -> f64 {
    let lse = log_sum_exp(terms);
    if lse == f64::NEG_INFINITY {
        0.0
    } else {
        (lse / (2.0 * degree)).exp()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveEpsilon(eps))
    }
}

/// The bracket norm `(Σ_j ∏_{i≠j} λ_i² σ_j² |x^(j)|²)^{1/(2E)}` with
/// `E = 1 + Σ(σ_i − 1)`.
///
/// For `k ≥ 3` it can vanish away from the origin (every summand contains
/// `|x^(1)|` to a positive power once two later blocks depend on it).
pub fn bracket_norm(sys: &LambdaSystem, x: &BlockPoint) -> Result<f64> {
    sys.check_point(x)?;
    Ok(from_log_terms(&ln_bracket_terms(sys, x, 0.0), sys.bracket_degree()))
}

/// Bracket norm evaluated through the pure-monomial form; an independent
/// path used to cross-check [`bracket_norm`].
pub fn bracket_norm_expanded(sys: &LambdaSystem, x: &BlockPoint) -> Result<f64> {
    sys.check_point(x)?;
    Ok(from_log_terms(&ln_bracket_terms_expanded(sys, x), sys.bracket_degree()))
}

/// `‖x‖ = (Σ_j (c_j|x^(j)|)^{2P_j})^{1/(2P)}`, `P = ∏σ_i`.
pub fn dist_norm(sys: &LambdaSystem, x: &BlockPoint, variant: NormVariant) -> Result<f64> {
    sys.check_point(x)?;
    require_dist(variant)?;
    Ok(from_log_terms(&ln_dist_terms(sys, x, 0.0, variant), sys.sigma_product()))
}

/// Bracket norm with every `λ_i` replaced by `λ_i^ε`.
pub fn bracket_norm_regularized(sys: &LambdaSystem, x: &BlockPoint, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    sys.check_point(x)?;
    Ok(from_log_terms(&ln_bracket_terms(sys, x, eps), sys.bracket_degree()))
}

/// `(Σ_j (c_j²(|x^(j)|² + ε))^{P_j})^{1/(2P)}`; strictly positive.
pub fn dist_norm_regularized(sys: &LambdaSystem, x: &BlockPoint, eps: f64, variant: NormVariant) -> Result<f64> {
    check_eps(eps)?;
    sys.check_point(x)?;
    require_dist(variant)?;
    Ok(from_log_terms(&ln_dist_terms(sys, x, eps, variant), sys.sigma_product()))
}

fn require_dist(variant: NormVariant) -> Result<()> {
    if variant == NormVariant::Bracket {
        Err(Error::invalid("distance norm requested with the bracket variant"))
    } else {
        Ok(())
    }
}

/// Dispatches on `variant`; `eps = 0` selects the unregularized norm.
pub fn norm(sys: &LambdaSystem, x: &BlockPoint, variant: NormVariant, eps: f64) -> Result<f64> {
    match (variant, eps == 0.0) {
        (NormVariant::Bracket, true) => bracket_norm(sys, x),
        (NormVariant::Bracket, false) => bracket_norm_regularized(sys, x, eps),
        (v, true) => dist_norm(sys, x, v),
        (v, false) => dist_norm_regularized(sys, x, eps, v),
    }
}

/// Logarithm and softmax weights of the bracket summands.
pub(crate) struct BracketParts {
    pub ln_value: f64,
    pub theta: Vec<f64>,
}

pub(crate) fn bracket_parts(sys: &LambdaSystem, x: &BlockPoint, eps: f64) -> Option<BracketParts> {
    let terms = ln_bracket_terms(sys, x, eps);
    let theta = softmax(&terms)?;
    Some(BracketParts { ln_value: log_sum_exp(&terms) / (2.0 * sys.bracket_degree()), theta })
}

pub(crate) struct DistParts {
    pub ln_value: f64,
    pub omega: Vec<f64>,
}

pub(crate) fn dist_parts(sys: &LambdaSystem, x: &BlockPoint, eps: f64, variant: NormVariant) -> Option<DistParts> {
    let terms = ln_dist_terms(sys, x, eps, variant);
    let omega = softmax(&terms)?;
    Some(DistParts { ln_value: log_sum_exp(&terms) / (2.0 * sys.sigma_product()), omega })
}

/// Analytic gradient of the (regularized when `eps > 0`) bracket norm.
///
/// Requires every block carrying a non-zero softmax weight to be non-zero.
pub fn bracket_norm_gradient(sys: &LambdaSystem, x: &BlockPoint, eps: f64) -> Result<Vec<f64>> {
    sys.check_point(x)?;
    let parts = bracket_parts(sys, x, eps).ok_or_else(|| Error::degenerate("bracket norm vanishes"))?;
    let value = parts.ln_value.exp();
    let e = sys.bracket_degree();
    let mut grad = x.zeros_like();
    for l in 0..sys.k() {
        let nl2 = x.block_norm_sq(l);
        let mut coef = 0.0;
        for (j, &th) in parts.theta.iter().enumerate() {
            if th == 0.0 {
                continue;
            }
            let a = sys.bracket_exponent(j, l);
            if a != 0.0 {
                coef += th * a / (nl2 + eps);
            }
            if j == l {
                coef += th / nl2;
            }
        }
        if !coef.is_finite() {
            return Err(Error::degenerate(format!("bracket norm not differentiable in block {}", l + 1)));
        }
        for (g, &c) in grad.block_mut(l).iter_mut().zip(x.block(l)) {
            *g = value / e * coef * c;
        }
    }
    Ok(grad.into_coords())
}

/// `Σ_i σ_i x^(i)·∇_{x^(i)}‖x‖ − ‖x‖` with a central-difference gradient;
/// `fd_step` is the relative step factor.
pub fn euler_residual(sys: &LambdaSystem, x: &BlockPoint, variant: NormVariant, fd_step: f64) -> Result<f64> {
    sys.check_point(x)?;
    if let Some(j) = (0..sys.k()).find(|&j| x.block_is_degenerate(j)) {
        return Err(Error::degenerate(format!("block {} is zero within tolerance", j + 1)));
    }
    let value = norm(sys, x, variant, 0.0)?;
    let f = |c: &[f64]| norm(sys, &x.with_coords(c.to_vec()), variant, 0.0);
    let g = fd::gradient(f, x.coords(), fd_step)?;
    let grad = x.with_coords(g);
    let lhs: f64 = (0..sys.k()).map(|i| sys.sigma()[i] * crate::numeric::dot(x.block(i), grad.block(i))).sum();
    Ok(lhs - value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grushin() -> LambdaSystem {
        LambdaSystem::grushin(3, 1, 1.0).unwrap()
    }

    fn three_block(a: f64, b: f64, g: f64) -> LambdaSystem {
        LambdaSystem::new(3, &[2, 1, 2], &[vec![0.0; 3], vec![a, 0.0, 0.0], vec![b, g, 0.0]]).unwrap()
    }

    #[test]
    fn grushin_values() {
        let sys = grushin();
        let x = sys.point(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(bracket_norm(&sys, &x).unwrap(), 1.0, max_relative = 1e-15);
        let y = sys.point(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(bracket_norm(&sys, &y).unwrap(), 2f64.sqrt(), max_relative = 1e-15);
        assert_eq!(bracket_norm(&sys, &sys.origin()).unwrap(), 0.0);
    }

    #[test]
    fn classical_norm_is_euclidean() {
        let sys = LambdaSystem::classical(3).unwrap();
        let x = sys.point(vec![1.0, 2.0, 2.0]).unwrap();
        assert_relative_eq!(bracket_norm(&sys, &x).unwrap(), 3.0, max_relative = 1e-15);
        assert_relative_eq!(bracket_norm_expanded(&sys, &x).unwrap(), 3.0, max_relative = 1e-15);
        assert_relative_eq!(dist_norm(&sys, &x, NormVariant::Dist1).unwrap(), 3.0, max_relative = 1e-15);
    }

    #[test]
    fn dist1_worked_example() {
        let sys = LambdaSystem::new(3, &[1, 1, 1], &[vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let x = sys.point(vec![0.7, -1.3, 2.1]).unwrap();
        let want = (0.7f64.powi(8) + 1.3f64.powi(4) + 2.1f64.powi(4)).powf(0.125);
        assert_relative_eq!(dist_norm(&sys, &x, NormVariant::Dist1).unwrap(), want, max_relative = 1e-14);
    }

    #[test]
    fn dist2_matches_bracket_for_grushin() {
        let sys = LambdaSystem::grushin(2, 2, 0.5).unwrap();
        let x = sys.point(vec![0.3, -0.8, 1.2, 0.1]).unwrap();
        assert_relative_eq!(
            dist_norm(&sys, &x, NormVariant::Dist2).unwrap(),
            bracket_norm(&sys, &x).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn regularized_grushin_at_origin_and_converges() {
        let sys = grushin();
        // every summand carries |x^(j)|², so the regularized bracket vanishes at 0
        assert_eq!(bracket_norm_regularized(&sys, &sys.origin(), 1e-4).unwrap(), 0.0);
        assert!(dist_norm_regularized(&sys, &sys.origin(), 1e-4, NormVariant::Dist1).unwrap() > 0.0);
        let x = sys.point(vec![0.4, 0.1, -0.2, 0.9]).unwrap();
        let plain = bracket_norm(&sys, &x).unwrap();
        let mut last = f64::INFINITY;
        for e in [1e-2, 1e-4, 1e-6, 1e-8] {
            let d = (bracket_norm_regularized(&sys, &x, e).unwrap() - plain).abs();
            assert!(d <= last);
            last = d;
        }
        assert!(last < 1e-7);
        assert!(matches!(bracket_norm_regularized(&sys, &x, 0.0), Err(Error::NonPositiveEpsilon(_))));
    }

    #[test]
    fn bracket_gradient_matches_fd() {
        for (sys, coords) in
            [(grushin(), vec![0.4, 0.1, -0.2, 0.9]), (three_block(1.0, 0.5, 2.0), vec![0.5, -0.3, 1.1, 0.2, 0.7])]
        {
            let x = sys.point(coords).unwrap();
            for eps in [0.0, 1e-2] {
                let g = bracket_norm_gradient(&sys, &x, eps).unwrap();
                let f = |c: &[f64]| norm(&sys, &x.with_coords(c.to_vec()), NormVariant::Bracket, eps);
                let fdg = fd::gradient(f, x.coords(), fd::DEFAULT_STEP).unwrap();
                for (a, b) in g.iter().zip(&fdg) {
                    assert!((a - b).abs() <= 1e-7 * (1.0 + b.abs()), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn euler_residual_small_and_rejects_degenerate() {
        let sys = grushin();
        let x = sys.point(vec![1.0, 1.0, 0.0, 2.0]).unwrap();
        let b = bracket_norm(&sys, &x).unwrap();
        let r = euler_residual(&sys, &x, NormVariant::Bracket, 1e-5).unwrap();
        assert!(r.abs() <= 1e-6 * b);
        let z = sys.point(vec![0.0, 0.0, 0.0, 2.0]).unwrap();
        assert!(matches!(euler_residual(&sys, &z, NormVariant::Bracket, 1e-5), Err(Error::DegeneratePoint(_))));
    }

    fn arb_system() -> impl Strategy<Value = LambdaSystem> {
        (1usize..=4)
            .prop_flat_map(|k| {
                (Just(k), proptest::collection::vec(1usize..=3, k), proptest::collection::vec(0u32..=12, k * k))
            })
            .prop_map(|(k, dims, raw)| {
                let alpha: Vec<Vec<f64>> = (0..k)
                    .map(|i| (0..k).map(|j| if j < i { raw[i * k + j] as f64 / 4.0 } else { 0.0 }).collect())
                    .collect();
                LambdaSystem::new(k, &dims, &alpha).unwrap()
            })
    }

    fn arb_point(sys: &LambdaSystem) -> impl Strategy<Value = BlockPoint> {
        let sys = sys.clone();
        proptest::collection::vec(-2.0f64..2.0, sys.n()).prop_map(move |c| sys.point(c).unwrap())
    }

    proptest! {
        #[test]
        fn homogeneous_of_degree_one(
            (sys, x) in arb_system().prop_flat_map(|s| { let p = arb_point(&s); (Just(s), p) }),
            ln_r in -6.9f64..6.9,
        ) {
            let r = ln_r.exp();
            let y = sys.dilate(r, &x).unwrap();
            for v in [NormVariant::Bracket, NormVariant::Dist1, NormVariant::Dist2] {
                let a = norm(&sys, &y, v, 0.0).unwrap();
                let b = r * norm(&sys, &x, v, 0.0).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * b.max(f64::MIN_POSITIVE), "{v}: {a} vs {b}");
            }
        }

        #[test]
        fn expanded_path_agrees(
            (sys, x) in arb_system().prop_flat_map(|s| { let p = arb_point(&s); (Just(s), p) }),
        ) {
            let a = bracket_norm(&sys, &x).unwrap();
            let b = bracket_norm_expanded(&sys, &x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b));
        }

        #[test]
        fn dist_norms_are_definite(
            (sys, x) in arb_system().prop_flat_map(|s| { let p = arb_point(&s); (Just(s), p) }),
        ) {
            for v in [NormVariant::Dist1, NormVariant::Dist2] {
                let n = dist_norm(&sys, &x, v).unwrap();
                prop_assert_eq!(n == 0.0, x.is_origin());
                prop_assert!(dist_norm_regularized(&sys, &x, 1e-3, v).unwrap() > 0.0);
            }
        }
    }
}
