use rand::Rng;

use super::{sample_unit_ball, unit_ball_volume, Domain};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::system::LambdaSystem;

/// Smallest radius of the radial sampler relative to the largest.
const RHO_RATIO: f64 = 1e-40;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplerSpec {
    /// Uniform on the domain.
    Uniform,
    /// Origin-centred importance sampling with density `∝ ρ^{−exponent}` in
    /// the homogeneous radius, mixed with a uniform component of weight
    /// `uniform_weight` to keep the weights bounded away from the origin.
    RadialLogUniform { exponent: f64, uniform_weight: f64 },
}

impl SamplerSpec {
    pub fn radial(exponent: f64) -> Self {
        SamplerSpec::RadialLogUniform { exponent, uniform_weight: 0.1 }
    }
}

/// Homogeneous radius `ρ(z) = max_j |z^(j)|^{1/σ_j}`; its unit ball is the
/// product of the block unit balls.
fn ln_rho(sys: &LambdaSystem, z: &[f64]) -> f64 {
    let offs = sys.offsets();
    (0..sys.k())
        .map(|j| crate::numeric::euclid(&z[offs[j]..offs[j + 1]]).ln() / sys.sigma()[j])
        .fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) struct Sampler<'a> {
    sys: &'a LambdaSystem,
    domain: &'a Domain,
    ln_uniform: f64,
    radial: Option<Radial>,
}

struct Radial {
    exponent: f64,
    weight: f64,
    c: f64,
    ln_rho_min: f64,
    ln_rho_max: f64,
    /// `ln(Z · Q · vol U)`, the normalizer of `ρ^{−a}`.
    ln_norm: f64,
}

impl<'a> Sampler<'a> {
    pub(crate) fn new(sys: &'a LambdaSystem, domain: &'a Domain, spec: &SamplerSpec) -> Result<Self> {
        let ln_uniform = -domain.volume().ln();
        let radial = match *spec {
            SamplerSpec::Uniform => None,
            SamplerSpec::RadialLogUniform { exponent, uniform_weight } => {
                if !(0.0..1.0).contains(&uniform_weight) {
                    return Err(Error::invalid(format!("uniform weight must lie in [0, 1), got {uniform_weight}")));
                }
                let q = sys.homogeneous_dimension();
                if !exponent.is_finite() || exponent >= q {
                    return Err(Error::invalid(format!(
                        "radial exponent {exponent} must be below the homogeneous dimension {q}"
                    )));
                }
                let ln_rho_max = domain
                    .block_norm_bounds(sys)
                    .iter()
                    .zip(sys.sigma())
                    .map(|(b, s)| b.ln() / s)
                    .fold(f64::NEG_INFINITY, f64::max);
                let ln_rho_min = ln_rho_max + RHO_RATIO.ln();
                let c = q - exponent;
                let span = ln_rho_max - ln_rho_min;
                // ln ∫ ρ^{c−1} dρ over [ρ_min, ρ_max]
                let ln_z = if c * span < 1e-8 {
                    span.ln() + c * ln_rho_min
                } else {
                    c * ln_rho_max + (-(-c * span).exp_m1()).ln() - c.ln()
                };
                let ln_vol_u: f64 = sys.dims().iter().map(|&n| unit_ball_volume(n).ln()).sum();
                Some(Radial {
                    exponent,
                    weight: 1.0 - uniform_weight,
                    c,
                    ln_rho_min,
                    ln_rho_max,
                    ln_norm: ln_z + q.ln() + ln_vol_u,
                })
            }
        };
        Ok(Sampler { sys, domain, ln_uniform, radial })
    }

    /// Writes a sample into `out` and returns `ln q(out)`.
    pub(crate) fn draw<R: Rng>(&self, rng: &mut R, out: &mut [f64]) -> f64 {
        let Some(rad) = &self.radial else {
            self.domain.sample_uniform(rng, out);
            return self.ln_uniform;
        };
        if rng.random::<f64>() >= rad.weight {
            self.domain.sample_uniform(rng, out);
        } else {
            self.draw_radial(rad, rng, out);
        }
        self.ln_density(rad, out)
    }

    fn draw_radial<R: Rng>(&self, rad: &Radial, rng: &mut R, out: &mut [f64]) {
        let offs = self.sys.offsets();
        let ln_w = loop {
            for j in 0..self.sys.k() {
                sample_unit_ball(rng, &mut out[offs[j]..offs[j + 1]]);
            }
            let l = ln_rho(self.sys, out);
            if l.is_finite() {
                break l;
            }
        };
        let u: f64 = rng.random();
        let span = rad.ln_rho_max - rad.ln_rho_min;
        let ln_r = if rad.c * span < 1e-8 {
            rad.ln_rho_min + u * span
        } else {
            // inverse CDF of ρ^{c−1}, written relative to ρ_max
            let lo = (-rad.c * span).exp();
            rad.ln_rho_max + (lo + u * (1.0 - lo)).ln() / rad.c
        };
        for j in 0..self.sys.k() {
            let f = (self.sys.sigma()[j] * (ln_r - ln_w)).exp();
            out[offs[j]..offs[j + 1]].iter_mut().for_each(|v| *v *= f);
        }
    }

    fn ln_density(&self, rad: &Radial, z: &[f64]) -> f64 {
        let lr = ln_rho(self.sys, z);
        let ln_rad = if lr >= rad.ln_rho_min && lr <= rad.ln_rho_max + 1e-12 {
            rad.weight.ln() - rad.exponent * lr - rad.ln_norm
        } else {
            f64::NEG_INFINITY
        };
        let ln_uni = if rad.weight < 1.0 && self.domain.contains(z) {
            (1.0 - rad.weight).ln() + self.ln_uniform
        } else {
            f64::NEG_INFINITY
        };
        log_sum_exp(&[ln_rad, ln_uni])
    }
}
