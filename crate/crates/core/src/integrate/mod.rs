//! Seeded Monte-Carlo integration over boxes and balls.
//!
//! Samples are drawn in fixed-size chunks. Chunk `c` uses a ChaCha8 stream
//! keyed by `(seed, c)`, and per-chunk moments are merged in chunk order,
//! so estimates are bit-identical for any number of worker threads.

mod sampler;
mod testfn;
mod verify;

pub use sampler::SamplerSpec;
pub use testfn::bump;
pub use verify::{
    lemma_check, rayleigh_ratio, verify_inequality, verify_inequality_with, InequalityReport, RatioEstimate, Verdict,
    VerifyOptions,
};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::system::{BlockPoint, LambdaSystem};

pub(crate) use sampler::Sampler;

/// Samples per deterministic chunk.
pub const CHUNK: u64 = 8192;

/// Smallest accepted sample count.
pub const MIN_SAMPLES: u64 = 1000;

/// Largest tolerated fraction of rejected (degenerate) samples.
pub const MAX_REJECTION_RATE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = Domain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let d = Domain::Box { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::DimensionMismatch("box corners differ in length".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite()) {
                    return Err(Error::invalid("box must have hi > lo in every coordinate"));
                }
            }
            Domain::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("ball center must be finite and non-empty"));
                }
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_system(&self, sys: &LambdaSystem) -> Result<()> {
        if self.dim() != sys.n() {
            return Err(Error::DimensionMismatch(format!(
                "domain has dimension {}, system has N = {}",
                self.dim(),
                sys.n()
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l < v && v < h),
            Domain::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2 < radius * radius
            }
        }
    }

    pub fn contains_origin(&self) -> bool {
        self.contains(&vec![0.0; self.dim()])
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
            Domain::Ball { center, radius } => unit_ball_volume(center.len()) * radius.powi(center.len() as i32),
        }
    }

    pub(crate) fn sample_uniform<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Domain::Box { lo, hi } => {
                for (o, (l, h)) in out.iter_mut().zip(lo.iter().zip(hi)) {
                    *o = rng.random_range(*l..*h);
                }
            }
            Domain::Ball { center, radius } => {
                sample_unit_ball(rng, out);
                for (o, c) in out.iter_mut().zip(center) {
                    *o = c + radius * *o;
                }
            }
        }
    }

    /// Upper bound of `|x^(j)|` over the domain, per block.
    pub(crate) fn block_norm_bounds(&self, sys: &LambdaSystem) -> Vec<f64> {
        let offs = sys.offsets();
        (0..sys.k())
            .map(|j| {
                let r = offs[j]..offs[j + 1];
                match self {
                    Domain::Box { lo, hi } => r.map(|i| lo[i].abs().max(hi[i].abs()).powi(2)).sum::<f64>().sqrt(),
                    Domain::Ball { center, radius } => crate::numeric::euclid(&center[r]) + radius,
                }
            })
            .collect()
    }
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Uniform point of the unit ball (any dimension).
pub(crate) fn sample_unit_ball<R: Rng>(rng: &mut R, out: &mut [f64]) {
    let n = out.len();
    if n == 1 {
        out[0] = rng.random_range(-1.0..1.0);
        return;
    }
    loop {
        let mut s = 0.0;
        for o in out.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *o = g;
            s += g * g;
        }
        if s > 0.0 {
            let r = rng.random::<f64>().powf(1.0 / n as f64) / s.sqrt();
            out.iter_mut().for_each(|o| *o *= r);
            return;
        }
    }
}

/// Monte-Carlo value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegralEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
    /// Samples discarded on degenerate sets and redrawn.
    pub rejected: u64,
}

/// Running mean and co-moment matrix for `M` jointly sampled integrands.
#[derive(Clone, Debug)]
pub(crate) struct Moments<const M: usize> {
    pub n: u64,
    pub mean: [f64; M],
    pub comoment: [[f64; M]; M],
    pub rejected: u64,
}

impl<const M: usize> Moments<M> {
    fn new() -> Self {
        Moments { n: 0, mean: [0.0; M], comoment: [[0.0; M]; M], rejected: 0 }
    }

    fn push(&mut self, v: &[f64; M]) {
        self.n += 1;
        let n = self.n as f64;
        let mut d_old = [0.0; M];
        for a in 0..M {
            d_old[a] = v[a] - self.mean[a];
            self.mean[a] += d_old[a] / n;
        }
        for a in 0..M {
            for b in 0..M {
                self.comoment[a][b] += d_old[a] * (v[b] - self.mean[b]);
            }
        }
    }

    fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            self.rejected += other.rejected;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let mut delta = [0.0; M];
        for a in 0..M {
            delta[a] = other.mean[a] - self.mean[a];
        }
        for a in 0..M {
            for b in 0..M {
                self.comoment[a][b] += other.comoment[a][b] + delta[a] * delta[b] * na * nb / n;
            }
        }
        for a in 0..M {
            self.mean[a] += delta[a] * nb / n;
        }
        self.n += other.n;
        self.rejected += other.rejected;
    }

    /// Sample covariance of components `a` and `b`.
    pub fn covariance(&self, a: usize, b: usize) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.comoment[a][b] / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self, a: usize, seed: u64) -> IntegralEstimate {
        IntegralEstimate {
            value: self.mean[a],
            std_error: (self.covariance(a, a).max(0.0) / self.n as f64).sqrt(),
            samples: self.n,
            seed,
            rejected: self.rejected,
        }
    }

    /// Standard error of `Σ_a c_a X_a`.
    pub fn combined_std_error(&self, coef: &[f64; M]) -> f64 {
        let mut v = 0.0;
        for a in 0..M {
            for b in 0..M {
                v += coef[a] * coef[b] * self.covariance(a, b);
            }
        }
        (v.max(0.0) / self.n as f64).sqrt()
    }
}

/// Draws `n` importance-weighted samples of `M` integrands. `eval` returns
/// the integrand values at a point of the domain; `DegeneratePoint` errors
/// cause a redraw.
pub(crate) fn sample_moments<const M: usize, F>(
    sys: &LambdaSystem,
    domain: &Domain,
    sampler: &SamplerSpec,
    n: u64,
    seed: u64,
    eval: F,
) -> Result<Moments<M>>
where
    F: Fn(&BlockPoint) -> Result<[f64; M]> + Sync,
{
    if n < MIN_SAMPLES {
        return Err(Error::invalid(format!("at least {MIN_SAMPLES} samples required, got {n}")));
    }
    domain.check_system(sys)?;
    let sampler = Sampler::new(sys, domain, sampler)?;
    let chunks = n.div_ceil(CHUNK);
    let max_rejected = (MAX_REJECTION_RATE * n as f64).floor() as u64;
    let per_chunk: Vec<Moments<M>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(n - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let mut mom = Moments::<M>::new();
            let mut x = sys.origin();
            while mom.n < count {
                let ln_q = sampler.draw(&mut rng, x.coords_mut());
                if !domain.contains(x.coords()) {
                    mom.push(&[0.0; M]);
                    continue;
                }
                match eval(&x) {
                    Ok(vals) => {
                        let w = (-ln_q).exp();
                        let mut out = [0.0; M];
                        for a in 0..M {
                            let v = if vals[a] == 0.0 { 0.0 } else { vals[a] * w };
                            if !v.is_finite() {
                                return Err(Error::NonIntegrableSample { value: v });
                            }
                            out[a] = v;
                        }
                        mom.push(&out);
                    }
                    Err(Error::DegeneratePoint(_)) => {
                        mom.rejected += 1;
                        if mom.rejected > max_rejected {
                            return Err(Error::TooManyRejections { rejected: mom.rejected, samples: n });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(mom)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Moments::<M>::new();
    for m in &per_chunk {
        total.merge(m);
    }
    if total.rejected > max_rejected {
        return Err(Error::TooManyRejections { rejected: total.rejected, samples: n });
    }
    Ok(total)
}

/// `∫_domain density dx` with the given sampler.
pub fn mc_integrate(
    sys: &LambdaSystem,
    density: &ScalarField,
    domain: &Domain,
    sampler: &SamplerSpec,
    n: u64,
    seed: u64,
) -> Result<IntegralEstimate> {
    let m = sample_moments::<1, _>(sys, domain, sampler, n, seed, |x| {
        let v = density.eval(x)?;
        if !v.is_finite() {
            return Err(Error::NonIntegrableSample { value: v });
        }
        Ok([v])
    })?;
    Ok(m.estimate(0, seed))
}

/// Sets the size of the global worker pool from `DLH_THREADS` (0 or unset
/// means automatic). Has no effect once the pool exists.
pub fn init_thread_pool_from_env() {
    let threads = std::env::var("DLH_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}
