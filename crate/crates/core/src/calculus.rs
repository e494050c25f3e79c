//! λ-gradient, λ-divergence and the vector fields used in the integral
//! identities, with their closed-form divergence factors.

use crate::error::{Error, Result};
use crate::fd;
use crate::fields::{BlockVectorField, ScalarField};
use crate::hardy::HardyParams;
use crate::norms;
use crate::numeric::{euclid, LogProduct};
use crate::system::{BlockPoint, LambdaSystem};

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveEpsilon(eps))
    }
}

fn scale_by_lambda(sys: &LambdaSystem, x: &BlockPoint, g: Vec<f64>) -> Vec<f64> {
    let mut out = x.with_coords(g);
    for i in 1..sys.k() {
        let lam = sys.lambda_unchecked(i, x);
        out.block_mut(i).iter_mut().for_each(|c| *c *= lam);
    }
    out.into_coords()
}

/// `(λ_1∇_{x^(1)}f, …, λ_k∇_{x^(k)}f)`; analytic gradient if attached,
/// central differences otherwise.
pub fn grad_lambda(field: &ScalarField, sys: &LambdaSystem, x: &BlockPoint) -> Result<Vec<f64>> {
    sys.check_point(x)?;
    let g = match field.analytic_gradient(x) {
        Some(g) => g?,
        None => fd::gradient(|c| field.eval(&x.with_coords(c.to_vec())), x.coords(), fd::DEFAULT_STEP)?,
    };
    Ok(scale_by_lambda(sys, x, g))
}

/// λ-gradient from central differences only.
pub fn grad_lambda_fd(field: &ScalarField, sys: &LambdaSystem, x: &BlockPoint) -> Result<Vec<f64>> {
    sys.check_point(x)?;
    let g = fd::gradient(|c| field.eval(&x.with_coords(c.to_vec())), x.coords(), fd::DEFAULT_STEP)?;
    Ok(scale_by_lambda(sys, x, g))
}

/// `Σ_i λ_i div_{x^(i)} h^(i)`; analytic path if attached.
pub fn div_lambda(field: &BlockVectorField, sys: &LambdaSystem, x: &BlockPoint) -> Result<f64> {
    sys.check_point(x)?;
    match field.analytic_divergence(x) {
        Some(d) => d,
        None => div_lambda_fd(field, sys, x),
    }
}

pub fn div_lambda_fd(field: &BlockVectorField, sys: &LambdaSystem, x: &BlockPoint) -> Result<f64> {
    sys.check_point(x)?;
    let v = |c: &[f64]| field.eval(&x.with_coords(c.to_vec()));
    let offsets = sys.offsets().clone();
    let mut acc = 0.0;
    for i in 0..sys.k() {
        let lam = sys.lambda_unchecked(i, x);
        if lam == 0.0 {
            continue;
        }
        acc += lam * fd::partial_trace(v, x.coords(), offsets[i]..offsets[i + 1], fd::DEFAULT_STEP)?;
    }
    Ok(acc)
}

/// Quantities shared by the regularized fields at one point.
struct Regularized {
    /// `λ_l / λ_l^ε`.
    r: Vec<f64>,
    /// `|x^(l)|² / (|x^(l)|² + ε)`.
    w: Vec<f64>,
    /// `σ_l x^(l)·∇_l [[x]]_ε / [[x]]_ε`.
    g: Vec<f64>,
    ln_bracket: f64,
}

fn regularized(sys: &LambdaSystem, x: &BlockPoint, eps: f64) -> Result<Regularized> {
    let k = sys.k();
    let parts = norms::bracket_parts(sys, x, eps)
        .ok_or_else(|| Error::degenerate("regularized bracket norm vanishes at the origin"))?;
    let e = sys.bracket_degree();
    let w: Vec<f64> = (0..k)
        .map(|l| {
            let n2 = x.block_norm_sq(l);
            n2 / (n2 + eps)
        })
        .collect();
    let r = (0..k).map(|l| sys.lambda_unchecked(l, x) / sys.lambda_eps_unchecked(l, x, eps)).collect();
    let g = (0..k)
        .map(|l| {
            let mixed: f64 = (0..k).map(|j| parts.theta[j] * sys.bracket_exponent(j, l)).sum();
            sys.sigma()[l] / e * (w[l] * mixed + parts.theta[l])
        })
        .collect();
    Ok(Regularized { r, w, g, ln_bracket: parts.ln_value })
}

/// `c_ε`, the factor with `div_λ h_ε = ∏|x^(i)|^{μ_i} / [[x]]_ε^s · c_ε`.
pub fn c_eps(sys: &LambdaSystem, params: &HardyParams, eps: f64, x: &BlockPoint) -> Result<f64> {
    check_eps(eps)?;
    params.check_system(sys)?;
    sys.check_point(x)?;
    let reg = regularized(sys, x, eps)?;
    Ok(c_from(sys, params, &reg))
}

fn c_from(sys: &LambdaSystem, params: &HardyParams, reg: &Regularized) -> f64 {
    (0..sys.k())
        .map(|l| {
            let sl = sys.sigma()[l];
            reg.r[l] * (sl * (sys.dims()[l] as f64 + params.mu[l]) - params.s * reg.g[l])
        })
        .sum()
}

/// `η_ε = t Σ_l (λ_l/λ_l^ε) σ_l x^(l)·∇_l ‖x‖_ε / ‖x‖_ε`, in `[0, t]`.
pub fn eta_eps(sys: &LambdaSystem, params: &HardyParams, eps: f64, x: &BlockPoint) -> Result<f64> {
    check_eps(eps)?;
    params.check_system(sys)?;
    sys.check_point(x)?;
    if params.t == 0.0 {
        return Ok(0.0);
    }
    let reg = regularized(sys, x, eps)?;
    Ok(eta_from(sys, params, eps, x, &reg))
}

fn eta_from(sys: &LambdaSystem, params: &HardyParams, eps: f64, x: &BlockPoint, reg: &Regularized) -> f64 {
    let parts = norms::dist_parts(sys, x, eps, params.dist_variant()).expect("regularized distance norm is positive");
    params.t * (0..sys.k()).map(|l| reg.r[l] * reg.w[l] * parts.omega[l]).sum::<f64>()
}

/// `F · (σ_1x^(1)/λ_1^ε, …, σ_kx^(k)/λ_k^ε)`; blocks that vanish stay zero
/// even when `F` has a pole.
fn sigma_field(sys: &LambdaSystem, x: &BlockPoint, prod: LogProduct, lambda_eps: &[f64]) -> Result<Vec<f64>> {
    let mut out = x.zeros_like();
    let f = prod.value();
    for l in 0..sys.k() {
        if x.block_norm(l) == 0.0 {
            continue;
        }
        let f = f.ok_or_else(|| Error::degenerate("field prefactor has a pole at this point"))?;
        let c = f * sys.sigma()[l] / lambda_eps[l];
        for (o, &v) in out.block_mut(l).iter_mut().zip(x.block(l)) {
            *o = c * v;
        }
    }
    Ok(out.into_coords())
}

fn mu_product(sys: &LambdaSystem, params: &HardyParams, x: &BlockPoint) -> LogProduct {
    let mut prod = LogProduct::one();
    for l in 0..sys.k() {
        prod.mul_pow(x.block_norm(l), params.mu[l]);
    }
    prod
}

/// The regularized field of the bracket-norm family.
pub fn h_eps_semi(sys: &LambdaSystem, params: &HardyParams, eps: f64, x: &BlockPoint) -> Result<Vec<f64>> {
    h_eps_impl(sys, params, eps, x, false)
}

/// The regularized field of the distance-norm family
/// (extra factor `‖x‖_ε^{−t}`).
pub fn h_eps_dist(sys: &LambdaSystem, params: &HardyParams, eps: f64, x: &BlockPoint) -> Result<Vec<f64>> {
    h_eps_impl(sys, params, eps, x, true)
}

fn h_eps_impl(sys: &LambdaSystem, params: &HardyParams, eps: f64, x: &BlockPoint, dist: bool) -> Result<Vec<f64>> {
    check_eps(eps)?;
    params.check_system(sys)?;
    sys.check_point(x)?;
    if x.is_origin() {
        return Ok(vec![0.0; sys.n()]);
    }
    let lambda_eps: Vec<f64> = (0..sys.k()).map(|l| sys.lambda_eps_unchecked(l, x, eps)).collect();
    let mut prod = mu_product(sys, params, x);
    prod.mul_pow(norms::bracket_norm_regularized(sys, x, eps)?, -params.s);
    if dist && params.t != 0.0 {
        prod.mul_pow(norms::dist_norm_regularized(sys, x, eps, params.dist_variant())?, -params.t);
    }
    sigma_field(sys, x, prod, &lambda_eps)
}

/// `|h_ε| = ∏|x^(i)|^{μ_i} [[x]]_ε^{E − s} / ∏ λ_i^ε` (times `‖x‖_ε^{−t}` for
/// the distance family), evaluated without forming the vector.
pub fn h_eps_magnitude(sys: &LambdaSystem, params: &HardyParams, eps: f64, x: &BlockPoint, dist: bool) -> Result<f64> {
    check_eps(eps)?;
    params.check_system(sys)?;
    sys.check_point(x)?;
    let mut prod = mu_product(sys, params, x);
    prod.mul_pow(norms::bracket_norm_regularized(sys, x, eps)?, sys.bracket_degree() - params.s);
    for l in 0..sys.k() {
        prod.mul_pow(sys.lambda_eps_unchecked(l, x, eps), -1.0);
    }
    if dist && params.t != 0.0 {
        prod.mul_pow(norms::dist_norm_regularized(sys, x, eps, params.dist_variant())?, -params.t);
    }
    prod.value().ok_or_else(|| Error::degenerate("|h_eps| has a pole at this point"))
}

/// `h_ε` of the bracket-norm family as a field with analytic divergence
/// `∏|x^(i)|^{μ_i} [[x]]_ε^{−s} c_ε`.
pub fn semi_field(sys: &LambdaSystem, params: &HardyParams, eps: f64) -> Result<BlockVectorField> {
    regularized_field(sys, params, eps, false)
}

/// `h_ε` of the distance family with divergence `density · (c_ε − η_ε)`.
pub fn dist_field(sys: &LambdaSystem, params: &HardyParams, eps: f64) -> Result<BlockVectorField> {
    regularized_field(sys, params, eps, true)
}

fn regularized_field(sys: &LambdaSystem, params: &HardyParams, eps: f64, dist: bool) -> Result<BlockVectorField> {
    check_eps(eps)?;
    params.check_system(sys)?;
    let (s1, p1) = (sys.clone(), params.clone());
    let (s2, p2) = (sys.clone(), params.clone());
    Ok(BlockVectorField::new(move |x| h_eps_impl(&s1, &p1, eps, x, dist)).with_divergence(move |x| {
        s2.check_point(x)?;
        let reg = regularized(&s2, x, eps)?;
        let mut factor = c_from(&s2, &p2, &reg);
        let mut prod = mu_product(&s2, &p2, x);
        prod.mul_log(-p2.s * reg.ln_bracket);
        if dist && p2.t != 0.0 {
            factor -= eta_from(&s2, &p2, eps, x, &reg);
            let ln_d = norms::dist_parts(&s2, x, eps, p2.dist_variant()).expect("positive").ln_value;
            prod.mul_log(-p2.t * ln_d);
        }
        let f = prod.value().ok_or_else(|| Error::degenerate("divergence prefactor has a pole"))?;
        Ok(f * factor)
    }))
}

/// `x^(1) / (|x^(1)|² + ε)^{p/2}` in the first block, zero elsewhere; for
/// `k = 1` this is the classical regularized field.
pub fn h_eps_block1(sys: &LambdaSystem, p: f64, eps: f64, x: &BlockPoint) -> Result<Vec<f64>> {
    check_eps(eps)?;
    sys.check_point(x)?;
    let d = (x.block_norm_sq(0) + eps).powf(-0.5 * p);
    let mut out = x.zeros_like();
    for (o, &v) in out.block_mut(0).iter_mut().zip(x.block(0)) {
        *o = d * v;
    }
    Ok(out.into_coords())
}

/// [`h_eps_block1`] with divergence `(N_1 − p w) / (|x^(1)|² + ε)^{p/2}`.
pub fn block1_field(sys: &LambdaSystem, p: f64, eps: f64) -> Result<BlockVectorField> {
    check_eps(eps)?;
    let (s1, s2) = (sys.clone(), sys.clone());
    let n1 = sys.dims()[0] as f64;
    Ok(BlockVectorField::new(move |x| h_eps_block1(&s1, p, eps, x)).with_divergence(move |x| {
        s2.check_point(x)?;
        let n2 = x.block_norm_sq(0);
        Ok((n1 - p * n2 / (n2 + eps)) * (n2 + eps).powf(-0.5 * p))
    }))
}

fn require_nondegenerate(sys: &LambdaSystem, x: &BlockPoint) -> Result<()> {
    if let Some(j) = (0..sys.k()).find(|&j| x.block_is_degenerate(j)) {
        return Err(Error::degenerate(format!("block {} is zero within tolerance", j + 1)));
    }
    Ok(())
}

/// `φ = −K ∏|x^(i)|^{μ_i} [[x]]^{−s} (σ_1x^(1)/λ_1, …, σ_kx^(k)/λ_k)` with
/// `K = (Q − s + Σσ_iμ_i)/2`.
pub fn general_phi(sys: &LambdaSystem, params: &HardyParams, x: &BlockPoint) -> Result<Vec<f64>> {
    params.check_system(sys)?;
    sys.check_point(x)?;
    let k_half = 0.5 * (sys.homogeneous_dimension() - params.s + params.sigma_mu(sys));
    let mut prod = mu_product(sys, params, x);
    prod.mul_pow(norms::bracket_norm(sys, x)?, -params.s);
    let lambda: Vec<f64> = (0..sys.k()).map(|l| sys.lambda_unchecked(l, x)).collect();
    if lambda.contains(&0.0) {
        return Err(Error::degenerate("some lambda_i vanishes"));
    }
    let mut v = sigma_field(sys, x, prod, &lambda)?;
    v.iter_mut().for_each(|c| *c *= -k_half);
    Ok(v)
}

/// `ψ² = [[x]]^{2E − s} ∏|x^(i)|^{μ_i} / ∏|x^(i)|^{2Σ_jα_ji}` (the `p = 2` weight).
pub fn psi_squared(sys: &LambdaSystem, params: &HardyParams, x: &BlockPoint) -> Result<f64> {
    params.check_system(sys)?;
    sys.check_point(x)?;
    let mut prod = mu_product(sys, params, x);
    prod.mul_pow(norms::bracket_norm(sys, x)?, 2.0 * sys.bracket_degree() - params.s);
    for l in 0..sys.k() {
        prod.mul_pow(x.block_norm(l), -2.0 * sys.column_sum(l));
    }
    prod.value().ok_or_else(|| Error::degenerate("psi has a pole at this point"))
}

/// The Grushin field
/// `−((Q−2)/2) |x|^{2α} / [[z]]^{2(1+α)} · (x, (1+α) y / |x|^α)`.
pub fn appendix_phi(sys: &LambdaSystem, z: &BlockPoint) -> Result<Vec<f64>> {
    if sys.k() != 2 {
        return Err(Error::NotGrushin(sys.k()));
    }
    sys.check_point(z)?;
    if z.block_is_degenerate(0) {
        return Err(Error::degenerate("x block is zero"));
    }
    let alpha = sys.alpha(1, 0);
    let q = sys.homogeneous_dimension();
    let xn = z.block_norm(0);
    let b = norms::bracket_norm(sys, z)?;
    let f = -0.5 * (q - 2.0) * xn.powf(2.0 * alpha) / b.powf(2.0 * (1.0 + alpha));
    let mut out = z.zeros_like();
    for (o, &v) in out.block_mut(0).iter_mut().zip(z.block(0)) {
        *o = f * v;
    }
    let cy = f * (1.0 + alpha) / xn.powf(alpha);
    for (o, &v) in out.block_mut(1).iter_mut().zip(z.block(1)) {
        *o = cy * v;
    }
    Ok(out.into_coords())
}

/// Residual of `|φ|²/ψ² + div_λ φ + K² ∏|x^(i)|^{μ_i}/[[x]]^s` with the
/// divergence from central differences, together with the scale `K² ∏…`.
pub(crate) fn phi_identity_parts(sys: &LambdaSystem, params: &HardyParams, x: &BlockPoint) -> Result<(f64, f64)> {
    require_nondegenerate(sys, x)?;
    let phi = general_phi(sys, params, x)?;
    let psi2 = psi_squared(sys, params, x)?;
    let (s1, p1) = (sys.clone(), params.clone());
    let field = BlockVectorField::new(move |y| general_phi(&s1, &p1, y));
    let div = div_lambda_fd(&field, sys, x)?;
    let k_half = 0.5 * (sys.homogeneous_dimension() - params.s + params.sigma_mu(sys));
    let mut prod = mu_product(sys, params, x);
    prod.mul_pow(norms::bracket_norm(sys, x)?, -params.s);
    let rhs = -k_half * k_half * prod.value().ok_or_else(|| Error::degenerate("pole"))?;
    let lhs = euclid(&phi).powi(2) / psi2 + div;
    Ok((lhs - rhs, rhs.abs()))
}

/// Convenience: the bracket-norm field family for the selected variant.
pub fn hardy_field(sys: &LambdaSystem, params: &HardyParams, eps: f64) -> Result<BlockVectorField> {
    use crate::hardy::Variant;
    match params.variant {
        Variant::SemiNorm => semi_field(sys, params, eps),
        Variant::DistNorm(_) => dist_field(sys, params, eps),
        Variant::Unweighted(_) => block1_field(sys, params.p, eps),
    }
}
