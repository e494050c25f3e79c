//! Invariant suites run by `dlh selftest` on the shipped fixtures.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{self, ConfigError, RunConfig};
use super::SelftestFailed;
use crate::calculus::{c_eps, eta_eps, h_eps_dist, h_eps_magnitude, h_eps_semi};
use crate::hardy::{HardyParams, Variant};
use crate::integrate::{verify_inequality_with, Domain, Verdict, VerifyOptions};
use crate::norms::{self, NormVariant};
use crate::numeric::euclid;
use crate::sharpness;
use crate::{BlockPoint, LambdaSystem, ScalarField};

pub struct Fixture {
    pub name: &'static str,
    pub text: &'static str,
}

macro_rules! fixtures {
    ($($name:literal),* $(,)?) => {
        &[$(Fixture { name: $name, text: include_str!(concat!("../../configs/verify/", $name, ".toml")) }),*]
    };
}

/// Admissible `verify` fixtures covering the three inequality families.
pub const VERIFY_FIXTURES: &[Fixture] = fixtures!(
    "v01_classical3_semi",
    "v02_classical4_p3",
    "v03_grushin31_semi",
    "v04_grushin22_half",
    "v05_chain3_semi",
    "v06_grushin31_dist1",
    "v07_grushin41_dist2",
    "v08_grushin31_unweighted",
    "v09_grushin42_unweighted_dist1",
    "v10_grushin31_p15",
    "v11_chain3_dist1",
    "v12_example23_semi",
);

pub const EXAMPLE21: &str = include_str!("../../configs/example21.toml");
pub const CHECK_COND1_FAIL: &str = include_str!("../../configs/check_cond1_fail.toml");
pub const SHARPNESS: &str = include_str!("../../configs/sharpness.toml");

/// A `verify` fixture resolved into library objects.
pub struct VerifyCase {
    pub name: &'static str,
    pub sys: LambdaSystem,
    pub params: HardyParams,
    pub u: ScalarField,
    pub domain: Domain,
    pub n: u64,
    pub seed: u64,
    pub opts: VerifyOptions,
}

impl VerifyCase {
    pub fn load(fx: &Fixture) -> Result<Self, ConfigError> {
        let cfg = RunConfig::parse(fx.text)?;
        let run = cfg.run();
        let sys = cfg.system()?;
        let params = cfg.params(&sys)?;
        let need =
            |v: Option<String>, what: &str| v.ok_or_else(|| ConfigError::new(format!("{}: missing {what}", fx.name)));
        let u = config::parse_testfn(&need(run.testfn, "testfn")?, &sys)?;
        let domain = config::parse_domain(&need(run.domain, "domain")?, &sys)?;
        let opts = VerifyOptions {
            sampler: None,
            mode: config::parse_mode(run.mode.as_deref())?,
            convention: config::parse_convention(run.convention.as_deref())?,
            override_conditions: run.override_conditions.unwrap_or(false),
        };
        Ok(VerifyCase {
            name: fx.name,
            sys,
            params,
            u,
            domain,
            n: run.n.unwrap_or(100_000),
            seed: run.seed.unwrap_or(0),
            opts,
        })
    }

    pub fn run(&self, n: u64) -> crate::Result<crate::integrate::InequalityReport> {
        verify_inequality_with(&self.sys, &self.params, &self.u, &self.domain, n, self.seed, &self.opts)
    }
}

type Outcome = Result<String, String>;

fn random_point(sys: &LambdaSystem, rng: &mut ChaCha8Rng) -> BlockPoint {
    loop {
        let c: Vec<f64> = (0..sys.n()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = sys.point(c).expect("conformant");
        if (0..sys.k()).all(|j| !x.block_is_degenerate(j)) {
            return x;
        }
    }
}

fn structure(cases: &[VerifyCase]) -> Outcome {
    for c in cases {
        let sys = &c.sys;
        for i in 0..sys.k() {
            let want = 1.0 + (0..i).map(|j| sys.alpha(i, j) * sys.sigma()[j]).sum::<f64>();
            if (sys.sigma()[i] - want).abs() > 1e-12 * want {
                return Err(format!("{}: sigma[{i}] = {} expected {want}", c.name, sys.sigma()[i]));
            }
        }
        let q: f64 = sys.sigma().iter().zip(sys.dims()).map(|(s, &n)| s * n as f64).sum();
        if sys.homogeneous_dimension() != q {
            return Err(format!("{}: Q mismatch", c.name));
        }
        let text = format!("{}{}", config::system_toml(sys), config::derived_toml(sys));
        let back = RunConfig::parse(&text).and_then(|cfg| cfg.system()).map_err(|e| e.to_string())?;
        if back.alpha_rows() != sys.alpha_rows() || back.dims() != sys.dims() {
            return Err(format!("{}: derive output does not round-trip", c.name));
        }
    }
    Ok(format!("{} systems", cases.len()))
}

fn norms_suite(cases: &[VerifyCase], points: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let variants = [NormVariant::Bracket, NormVariant::Dist1, NormVariant::Dist2];
    let mut worst_h: f64 = 0.0;
    let mut worst_e: f64 = 0.0;
    for c in cases {
        for _ in 0..points {
            let x = random_point(&c.sys, &mut rng);
            let r = 10f64.powf(rng.random_range(-3.0..3.0));
            let xr = c.sys.dilate(r, &x).map_err(|e| e.to_string())?;
            for v in variants {
                let a = norms::norm(&c.sys, &x, v, 0.0).map_err(|e| e.to_string())?;
                let b = norms::norm(&c.sys, &xr, v, 0.0).map_err(|e| e.to_string())?;
                worst_h = worst_h.max((b - r * a).abs() / (r * a));
                let e = norms::euler_residual(&c.sys, &x, v, crate::fd::DEFAULT_STEP).map_err(|e| e.to_string())?;
                worst_e = worst_e.max(e.abs() / a);
            }
        }
    }
    if worst_h > 1e-10 || worst_e > 1e-6 {
        return Err(format!("homogeneity {worst_h:.3e}, euler {worst_e:.3e}"));
    }
    Ok(format!("homogeneity {worst_h:.3e}, euler {worst_e:.3e}"))
}

fn proof_objects(cases: &[VerifyCase], points: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    for c in cases.iter().filter(|c| !matches!(c.params.variant, Variant::Unweighted(_))) {
        let (sys, p) = (&c.sys, &c.params);
        let dist = matches!(p.variant, Variant::DistNorm(_));
        let lo = sys.dims()[0] as f64 + p.mu[0] - p.s;
        let hi = sys.homogeneous_dimension() + p.sigma_mu(sys);
        for _ in 0..points {
            let x = random_point(sys, &mut rng);
            let eps = 10f64.powf(rng.random_range(-6.0..0.0));
            let ce = c_eps(sys, p, eps, &x).map_err(|e| e.to_string())?;
            let eta = eta_eps(sys, p, eps, &x).map_err(|e| e.to_string())?;
            if ce < lo - 1e-12 || ce > hi + 1e-12 {
                return Err(format!("{}: c_eps = {ce} outside [{lo}, {hi}]", c.name));
            }
            if eta < -1e-15 || eta > p.t + 1e-12 {
                return Err(format!("{}: eta_eps = {eta} outside [0, {}]", c.name, p.t));
            }
            let h = if dist { h_eps_dist(sys, p, eps, &x) } else { h_eps_semi(sys, p, eps, &x) }
                .map_err(|e| e.to_string())?;
            let m = h_eps_magnitude(sys, p, eps, &x, dist).map_err(|e| e.to_string())?;
            if (euclid(&h) - m).abs() > 1e-10 * m {
                return Err(format!("{}: |h_eps| = {} vs closed form {m}", c.name, euclid(&h)));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} points"))
}

fn appendix(points: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sys = LambdaSystem::grushin(3, 1, 1.0).map_err(|e| e.to_string())?;
    let params = HardyParams::semi(2.0, 2.0, vec![0.0, 0.0]).map_err(|e| e.to_string())?;
    let u = sharpness::extremal_candidate(&sys, &params).map_err(|e| e.to_string())?;
    let (mut wf, mut wp, mut we): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..points {
        let x = random_point(&sys, &mut rng);
        wf = wf.max(sharpness::fundamental_identity_residual(&sys, &x).map_err(|e| e.to_string())?.relative());
        wp = wp.max(sharpness::phi_divergence_identity(&sys, &params, &x).map_err(|e| e.to_string())?.relative());
        let (res, scale) = sharpness::extremal_equation_residual(&sys, &params, &u, &x).map_err(|e| e.to_string())?;
        we = we.max(euclid(&res) / scale);
    }
    let msg = format!("fundamental {wf:.3e}, phi {wp:.3e}, extremal {we:.3e}");
    if wf > 1e-8 || wp > 1e-6 || we > 1e-8 {
        return Err(msg);
    }
    Ok(msg)
}

fn inequalities(cases: &[VerifyCase], n: u64) -> Outcome {
    let mut holds = 0;
    for c in cases {
        let rep = c.run(n).map_err(|e| format!("{}: {e}", c.name))?;
        match rep.verdict {
            Verdict::Violated => return Err(format!("{}: Violated (z = {:.3})", c.name, rep.z_score)),
            Verdict::Holds => holds += 1,
            Verdict::Inconclusive => {}
        }
    }
    Ok(format!("{holds}/{} hold at n = {n}, none violated", cases.len()))
}

fn determinism(case: &VerifyCase, n: u64) -> Outcome {
    let a = case.run(n).map_err(|e| e.to_string())?;
    let b = case.run(n).map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let c = pool.install(|| case.run(n)).map_err(|e| e.to_string())?;
    if a != b || a != c {
        return Err(format!("{}: reports differ between runs", case.name));
    }
    Ok(format!("{}: identical across runs and worker counts", case.name))
}

fn fixture_configs() -> Outcome {
    let sys = RunConfig::parse(EXAMPLE21).and_then(|c| c.system()).map_err(|e| e.to_string())?;
    if sys.sigma() != [1.0, 2.0] || sys.homogeneous_dimension() != 5.0 {
        return Err("example21: expected sigma = [1, 2], Q = 5".into());
    }
    for (name, text) in [("check_cond1_fail", CHECK_COND1_FAIL), ("sharpness", SHARPNESS)] {
        let cfg = RunConfig::parse(text).map_err(|e| format!("{name}: {e}"))?;
        let sys = cfg.system().map_err(|e| format!("{name}: {e}"))?;
        cfg.params(&sys).map_err(|e| format!("{name}: {e}"))?;
        cfg.family().map_err(|e| format!("{name}: {e}"))?;
    }
    Ok("3 configs".into())
}

type Suite<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

/// Runs every suite, printing one line each; fails if any suite fails.
pub fn run(n: u64, out: &mut dyn Write) -> anyhow::Result<()> {
    let cases = VERIFY_FIXTURES.iter().map(VerifyCase::load).collect::<Result<Vec<_>, _>>()?;
    let suites: Vec<Suite<'_>> = vec![
        ("configs", Box::new(fixture_configs)),
        ("structure", Box::new(|| structure(&cases))),
        ("norms", Box::new(|| norms_suite(&cases, 50))),
        ("proof-objects", Box::new(|| proof_objects(&cases, 100))),
        ("appendix", Box::new(|| appendix(200))),
        ("inequalities", Box::new(|| inequalities(&cases, n))),
        ("determinism", Box::new(|| determinism(&cases[2], n))),
    ];
    let mut failed = 0;
    for (name, suite) in &suites {
        match suite() {
            Ok(msg) => writeln!(out, "PASS {name}: {msg}")?,
            Err(msg) => {
                failed += 1;
                writeln!(out, "FAIL {name}: {msg}")?;
            }
        }
    }
    writeln!(out, "selftest: {} passed, {failed} failed", suites.len() - failed)?;
    if failed > 0 {
        return Err(SelftestFailed(failed).into());
    }
    Ok(())
}
