//! Best-constant exploration for Grushin systems and the identities around
//! the fundamental solution `Φ = [[·]]^{2−Q}`.

use std::str::FromStr;

use rayon::prelude::*;

use crate::calculus;
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::hardy::{hardy_constant, HardyParams, Variant};
use crate::integrate::{rayleigh_ratio, Domain, SamplerSpec};
use crate::norms::{bracket_norm, bracket_norm_gradient};
use crate::numeric::euclid;
use crate::system::{BlockPoint, LambdaSystem};

/// Transition used by the trial functions between `R` and `2R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Cutoff {
    /// `u = R^{−K+δ} t^{−K} (1 − log₂ t)` for `t = [[x]]/R ∈ [1, 2]`; the
    /// factor `t^{−K}` continues the power profile.
    #[default]
    LogProfile,
    /// `u = R^{−K+δ} (1 − S(t − 1))` with `S(s) = 3s² − 2s³`.
    Smoothstep,
}

impl FromStr for Cutoff {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Cutoff::LogProfile),
            "smoothstep" => Ok(Cutoff::Smoothstep),
            other => Err(Error::invalid(format!("unknown cutoff '{other}'"))),
        }
    }
}

/// `u_{δ,R} = min([[x]], R)^{−K+δ} · cutoff`, `K = (Q − 2)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialFamily {
    pub schedule: Vec<(f64, f64)>,
    pub cutoff: Cutoff,
}

impl TrialFamily {
    pub fn new(deltas: &[f64], radii: &[f64], cutoff: Cutoff) -> Result<Self> {
        if deltas.is_empty() || radii.is_empty() {
            return Err(Error::invalid("schedule needs at least one delta and one radius"));
        }
        if let Some(d) = deltas.iter().find(|d| !(**d > 0.0)) {
            return Err(Error::invalid(format!("delta must be positive, got {d}")));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
            return Err(Error::invalid(format!("radius must be positive, got {r}")));
        }
        let schedule = deltas.iter().flat_map(|&d| radii.iter().map(move |&r| (d, r))).collect();
        Ok(TrialFamily { schedule, cutoff })
    }

    /// δ ∈ {0.5, 0.2, 0.1, 0.05, 0.02}, R ∈ {1, 4, 16}.
    pub fn default_schedule() -> Self {
        Self::new(&[0.5, 0.2, 0.1, 0.05, 0.02], &[1.0, 4.0, 16.0], Cutoff::default()).expect("valid schedule")
    }

    /// The member `(δ, R)` as a field with analytic gradient.
    pub fn member(&self, sys: &LambdaSystem, delta: f64, radius: f64) -> Result<ScalarField> {
        trial_function(sys, delta, radius, self.cutoff)
    }
}

/// Profile `g(b)` and `g'(b)` of a trial function.
fn profile(k: f64, delta: f64, radius: f64, cutoff: Cutoff, b: f64) -> (f64, f64) {
    let e = delta - k;
    if b <= radius {
        let v = b.powf(e);
        return (v, e * v / b);
    }
    let t = b / radius;
    if t >= 2.0 {
        return (0.0, 0.0);
    }
    let base = radius.powf(e);
    match cutoff {
        Cutoff::LogProfile => {
            let l = 1.0 - t.ln() / std::f64::consts::LN_2;
            let tk = t.powf(-k);
            let dl = -1.0 / (t * std::f64::consts::LN_2);
            (base * tk * l, base * (-k * tk / t * l + tk * dl) / radius)
        }
        Cutoff::Smoothstep => {
            let s = t - 1.0;
            (base * (1.0 - s * s * (3.0 - 2.0 * s)), base * (-6.0 * s * (1.0 - s)) / radius)
        }
    }
}

pub fn trial_function(sys: &LambdaSystem, delta: f64, radius: f64, cutoff: Cutoff) -> Result<ScalarField> {
    if !(delta > 0.0) || !(radius > 0.0) {
        return Err(Error::invalid("trial functions need delta > 0 and R > 0"));
    }
    let k = 0.5 * (sys.homogeneous_dimension() - 2.0);
    let (s1, s2) = (sys.clone(), sys.clone());
    let value = move |x: &BlockPoint| {
        let b = bracket_norm(&s1, x)?;
        if b == 0.0 {
            return Err(Error::degenerate("trial function is unbounded at the origin"));
        }
        Ok(profile(k, delta, radius, cutoff, b).0)
    };
    let gradient = move |x: &BlockPoint| {
        let b = bracket_norm(&s2, x)?;
        let (_, dg) = profile(k, delta, radius, cutoff, b);
        if dg == 0.0 {
            return Ok(vec![0.0; x.coords().len()]);
        }
        let gb = bracket_norm_gradient(&s2, x, 0.0)?;
        Ok(gb.into_iter().map(|g| dg * g).collect())
    };
    Ok(ScalarField::new(value).with_gradient(gradient))
}

/// One sweep entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrendEntry {
    pub delta: f64,
    pub radius: f64,
    pub ratio: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SharpnessTrend {
    pub entries: Vec<TrendEntry>,
    pub target: f64,
    /// Smallest observed ratio.
    pub extrapolated: f64,
}

impl SharpnessTrend {
    /// `|extrapolated − target| / target`.
    pub fn relative_gap(&self) -> f64 {
        (self.extrapolated - self.target).abs() / self.target
    }

    /// Every ratio is at least `target − 3σ`.
    pub fn respects_lower_bound(&self) -> bool {
        self.entries.iter().all(|e| e.ratio >= self.target - 3.0 * e.std_error)
    }
}

fn require_grushin(sys: &LambdaSystem) -> Result<()> {
    if sys.k() != 2 {
        return Err(Error::NotGrushin(sys.k()));
    }
    Ok(())
}

/// Box containing the bracket ball of radius `r` of a Grushin system.
fn grushin_box(sys: &LambdaSystem, r: f64) -> Result<Domain> {
    let hx = r;
    let hy = r.powf(sys.bracket_degree()) / sys.sigma()[1];
    let half: Vec<f64> = (0..sys.n()).map(|i| if i < sys.dims()[0] { hx } else { hy }).collect();
    Domain::boxed(half.iter().map(|h| -h).collect(), half)
}

/// Rayleigh ratios of the trial family, one seeded integration per entry.
pub fn grushin_sharpness_sweep(
    sys: &LambdaSystem,
    params: &HardyParams,
    family: &TrialFamily,
    n: u64,
    seed: u64,
) -> Result<SharpnessTrend> {
    require_grushin(sys)?;
    params.check_system(sys)?;
    if params.p != 2.0 || params.s != 2.0 || params.mu.iter().any(|&m| m != 0.0) || params.variant != Variant::SemiNorm
    {
        return Err(Error::invalid("the sweep needs the semi variant with p = 2, s = 2, mu = 0"));
    }
    let q = sys.homogeneous_dimension();
    let target = hardy_constant(sys, params)?.value;
    let entries = family
        .schedule
        .par_iter()
        .enumerate()
        .map(|(idx, &(delta, radius))| {
            let u = family.member(sys, delta, radius)?;
            let domain = grushin_box(sys, 2.0 * radius)?;
            let sampler = SamplerSpec::radial((q - 2.0 * delta).max(0.0));
            let entry_seed = seed.wrapping_add((idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let r = rayleigh_ratio(sys, params, &u, &domain, n, entry_seed, Some(sampler))?;
            Ok(TrendEntry { delta, radius, ratio: r.ratio.value, std_error: r.ratio.std_error })
        })
        .collect::<Result<Vec<_>>>()?;
    let extrapolated = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    Ok(SharpnessTrend { entries, target, extrapolated })
}

/// A residual together with the magnitude it should be compared against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.value.abs()
        } else {
            self.value.abs() / self.scale
        }
    }
}

fn require_nondegenerate(sys: &LambdaSystem, x: &BlockPoint) -> Result<()> {
    if let Some(j) = (0..sys.k()).find(|&j| x.block_is_degenerate(j)) {
        return Err(Error::degenerate(format!("block {} is zero within tolerance", j + 1)));
    }
    Ok(())
}

/// `|∇_λΦ|²/Φ² − (Q−2)² |x^(1)|^{2α} / [[z]]^{2(1+α)}` for `Φ = [[·]]^{2−Q}`.
pub fn fundamental_identity_residual(sys: &LambdaSystem, z: &BlockPoint) -> Result<Residual> {
    require_grushin(sys)?;
    sys.check_point(z)?;
    require_nondegenerate(sys, z)?;
    let q = sys.homogeneous_dimension();
    let alpha = sys.alpha(1, 0);
    let b = bracket_norm(sys, z)?;
    // ∇_λΦ / Φ = (2 − Q) ∇_λ[[z]] / [[z]]
    let mut g = bracket_norm_gradient(sys, z, 0.0)?;
    let lam = sys.lambda(1, z)?;
    let n1 = sys.dims()[0];
    g[n1..].iter_mut().for_each(|v| *v *= lam);
    let lhs = ((2.0 - q) * euclid(&g) / b).powi(2);
    let rhs = (q - 2.0).powi(2) * z.block_norm(0).powf(2.0 * alpha) / b.powf(2.0 * (1.0 + alpha));
    Ok(Residual { value: lhs - rhs, scale: rhs })
}

/// `u = [[·]]^{−K}`, `K = (Q − s + Σσ_iμ_i)/2`, with analytic gradient.
pub fn extremal_candidate(sys: &LambdaSystem, params: &HardyParams) -> Result<ScalarField> {
    params.check_system(sys)?;
    let k = 0.5 * (sys.homogeneous_dimension() - params.s + params.sigma_mu(sys));
    let (s1, s2) = (sys.clone(), sys.clone());
    Ok(ScalarField::new(move |x| Ok(bracket_norm(&s1, x)?.powf(-k))).with_gradient(move |x| {
        let b = bracket_norm(&s2, x)?;
        let f = -k * b.powf(-k - 1.0);
        Ok(bracket_norm_gradient(&s2, x, 0.0)?.into_iter().map(|g| f * g).collect())
    }))
}

/// Blockwise `∇_{x^(i)}u + K ∏_{j≠i}λ_j² σ_i x^(i) u / [[x]]^{2E}`, with the
/// scale `|∇u|` for relative comparison.
pub fn extremal_equation_residual(
    sys: &LambdaSystem,
    params: &HardyParams,
    u: &ScalarField,
    x: &BlockPoint,
) -> Result<(Vec<f64>, f64)> {
    params.check_system(sys)?;
    sys.check_point(x)?;
    require_nondegenerate(sys, x)?;
    let k = 0.5 * (sys.homogeneous_dimension() - params.s + params.sigma_mu(sys));
    let grad = match u.analytic_gradient(x) {
        Some(g) => g?,
        None => crate::fd::gradient(|c| u.eval(&x.with_coords(c.to_vec())), x.coords(), crate::fd::DEFAULT_STEP)?,
    };
    let uv = u.eval(x)?;
    let b2e = bracket_norm(sys, x)?.powf(2.0 * sys.bracket_degree());
    let lam: Vec<f64> = (0..sys.k()).map(|i| sys.lambda_unchecked(i, x)).collect();
    let mut res = x.with_coords(grad.clone());
    for i in 0..sys.k() {
        let others: f64 = (0..sys.k()).filter(|&j| j != i).map(|j| lam[j] * lam[j]).product();
        let c = k * others * sys.sigma()[i] * uv / b2e;
        for (r, &xi) in res.block_mut(i).iter_mut().zip(x.block(i)) {
            *r += c * xi;
        }
    }
    Ok((res.into_coords(), euclid(&grad)))
}

/// `|φ|²/ψ² + div_λφ + K² ∏|x^(i)|^{μ_i}/[[x]]^s` with the divergence from
/// central differences.
pub fn phi_divergence_identity(sys: &LambdaSystem, params: &HardyParams, x: &BlockPoint) -> Result<Residual> {
    let (value, scale) = calculus::phi_identity_parts(sys, params, x)?;
    Ok(Residual { value, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grushin() -> LambdaSystem {
        LambdaSystem::grushin(3, 1, 1.0).unwrap()
    }

    fn rand_point(sys: &LambdaSystem, rng: &mut ChaCha8Rng) -> BlockPoint {
        sys.point((0..sys.n()).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn profiles_are_continuous() {
        for cutoff in [Cutoff::LogProfile, Cutoff::Smoothstep] {
            let (a, _) = profile(1.5, 0.1, 2.0, cutoff, 2.0 - 1e-12);
            let (b, _) = profile(1.5, 0.1, 2.0, cutoff, 2.0 + 1e-12);
            assert!((a - b).abs() < 1e-10);
            let (c, dc) = profile(1.5, 0.1, 2.0, cutoff, 4.0 - 1e-12);
            assert!(c.abs() < 1e-10 && dc.is_finite());
        }
    }

    #[test]
    fn trial_gradient_matches_fd() {
        let sys = grushin();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for cutoff in [Cutoff::LogProfile, Cutoff::Smoothstep] {
            let u = trial_function(&sys, 0.2, 1.0, cutoff).unwrap();
            for _ in 0..200 {
                let x = rand_point(&sys, &mut rng);
                let b = bracket_norm(&sys, &x).unwrap();
                if (b - 1.0).abs() < 1e-3 || (b - 2.0).abs() < 1e-3 || x.block_is_degenerate(0) {
                    continue;
                }
                let a = u.analytic_gradient(&x).unwrap().unwrap();
                let f = fd::gradient(|c| u.eval(&x.with_coords(c.to_vec())), x.coords(), 1e-6).unwrap();
                let scale = euclid(&a).max(1e-12);
                for (p, q) in a.iter().zip(&f) {
                    assert!((p - q).abs() <= 1e-5 * scale, "{p} vs {q}");
                }
            }
        }
    }

    #[test]
    fn fundamental_identity_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for sys in [grushin(), LambdaSystem::grushin(2, 2, 0.0).unwrap(), LambdaSystem::grushin(1, 3, 2.5).unwrap()] {
            for _ in 0..200 {
                let z = rand_point(&sys, &mut rng);
                let r = fundamental_identity_residual(&sys, &z).unwrap();
                assert!(r.relative() <= 1e-8, "{r:?}");
                let zr = sys.dilate(3.0, &z).unwrap();
                let rr = fundamental_identity_residual(&sys, &zr).unwrap();
                assert!((rr.scale - r.scale / 9.0).abs() <= 1e-10 * r.scale);
            }
        }
        assert!(matches!(
            fundamental_identity_residual(
                &LambdaSystem::classical(3).unwrap(),
                &LambdaSystem::classical(3).unwrap().origin()
            ),
            Err(Error::NotGrushin(1))
        ));
    }

    #[test]
    fn extremal_residuals() {
        let sys = grushin();
        let params = HardyParams::semi(2.0, 2.0, vec![0.0, 0.0]).unwrap();
        let u = extremal_candidate(&sys, &params).unwrap();
        let x = sys.point(vec![0.3, -0.4, 1.0, 0.7]).unwrap();
        let (r, scale) = extremal_equation_residual(&sys, &params, &u, &x).unwrap();
        assert!(euclid(&r) <= 1e-12 * scale);

        let cl = LambdaSystem::classical(4).unwrap();
        let p1 = HardyParams::semi(2.0, 2.0, vec![0.0]).unwrap();
        let u = extremal_candidate(&cl, &p1).unwrap();
        let x = cl.point(vec![0.3, -0.4, 1.0, 0.7]).unwrap();
        let (r, scale) = extremal_equation_residual(&cl, &p1, &u, &x).unwrap();
        assert!(euclid(&r) <= 1e-12 * scale);

        let ex = LambdaSystem::new(3, &[1, 1, 1], &[vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let p3 = HardyParams::semi(2.0, 2.0, vec![0.0; 3]).unwrap();
        let u = extremal_candidate(&ex, &p3).unwrap();
        let x = ex.point(vec![0.5, 0.8, -0.6]).unwrap();
        let (r, scale) = extremal_equation_residual(&ex, &p3, &u, &x).unwrap();
        assert!(euclid(&r) > 1e-6 * scale);
    }

    #[test]
    fn phi_identity_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chain =
            LambdaSystem::new(3, &[1, 1, 1], &[vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let cases = [
            (grushin(), HardyParams::semi(2.0, 2.0, vec![0.0, 0.0]).unwrap()),
            (LambdaSystem::classical(3).unwrap(), HardyParams::semi(2.0, 2.0, vec![0.0]).unwrap()),
            (chain, HardyParams::semi(2.0, 2.0, vec![0.0; 3]).unwrap()),
        ];
        for (sys, params) in cases {
            for _ in 0..100 {
                let x = rand_point(&sys, &mut rng);
                let r = phi_divergence_identity(&sys, &params, &x).unwrap();
                assert!(r.relative() <= 1e-6, "{r:?}");
            }
        }
    }

    #[test]
    fn sweep_rejects_wrong_inputs() {
        let fam = TrialFamily::default_schedule();
        assert_eq!(fam.schedule.len(), 15);
        let params = HardyParams::semi(2.0, 2.0, vec![0.0; 3]).unwrap();
        let chain =
            LambdaSystem::new(3, &[1, 1, 1], &[vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert!(matches!(grushin_sharpness_sweep(&chain, &params, &fam, 1000, 0), Err(Error::NotGrushin(3))));
        let p3 = HardyParams::semi(3.0, 2.0, vec![0.0, 0.0]).unwrap();
        assert!(grushin_sharpness_sweep(&grushin(), &p3, &fam, 1000, 0).is_err());
        assert!(TrialFamily::new(&[0.0], &[1.0], Cutoff::Smoothstep).is_err());
    }

    #[test]
    fn small_sweep_respects_lower_bound() {
        let sys = grushin();
        let params = HardyParams::semi(2.0, 2.0, vec![0.0, 0.0]).unwrap();
        let fam = TrialFamily::new(&[0.5, 0.2], &[1.0], Cutoff::LogProfile).unwrap();
        let trend = grushin_sharpness_sweep(&sys, &params, &fam, 40_000, 4).unwrap();
        assert_eq!(trend.target, 2.25);
        assert!(trend.respects_lower_bound());
        assert!(trend.entries[1].ratio < trend.entries[0].ratio);
    }
}
