//! Small floating-point helpers shared by the evaluators.

/// Euclidean norm with scaling, safe for components near the overflow range.
pub fn euclid(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let sum: f64 = v.iter().map(|c| (c / scale) * (c / scale)).sum();
    scale * sum.sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln Σ exp(x_i)`; entries equal to `-inf` contribute nothing.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Normalized weights `exp(x_i) / Σ exp(x_j)`. Returns `None` when every
/// entry is `-inf`.
pub(crate) fn softmax(xs: &[f64]) -> Option<Vec<f64>> {
    let lse = log_sum_exp(xs);
    if lse == f64::NEG_INFINITY {
        return None;
    }
    Some(xs.iter().map(|x| (x - lse).exp()).collect())
}

/// Accumulates `∏ base_i^{exp_i}` in log space with the convention `0^0 = 1`.
///
/// A zero base with a positive exponent makes the product zero; a zero base
/// with a negative exponent is a pole and is reported as an error by
/// [`LogProduct::value`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct LogProduct {
    log: f64,
    zero: bool,
    pole: bool,
}

impl LogProduct {
    pub(crate) fn one() -> Self {
        LogProduct { log: 0.0, zero: false, pole: false }
    }

    pub(crate) fn mul_pow(&mut self, base: f64, exp: f64) -> &mut Self {
        debug_assert!(base >= 0.0);
        if exp == 0.0 {
            return self;
        }
        if base == 0.0 {
            if exp > 0.0 {
                self.zero = true;
            } else {
                self.pole = true;
            }
        } else {
            self.log += exp * base.ln();
        }
        self
    }

    pub(crate) fn mul_log(&mut self, log: f64) -> &mut Self {
        self.log += log;
        self
    }

    /// `None` on a pole (including `0 · ∞`).
    pub(crate) fn value(&self) -> Option<f64> {
        if self.pole {
            None
        } else if self.zero {
            Some(0.0)
        } else {
            Some(self.log.exp())
        }
    }
}

/// Formats with 15 significant digits; the output is also a valid TOML float.
pub fn fmt_sig15(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0.00000000000000".into();
    }
    let sci = format!("{:.14e}", x);
    let exp: i32 = sci.split('e').nth(1).and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        sci
    }
}

/// Shortest representation that parses back to the same `f64`; integral
/// values print without a fractional part.
pub fn fmt_roundtrip(x: f64) -> String {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{:?}", x)
    }
}
