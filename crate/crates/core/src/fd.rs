//! Central finite differences, used only as an independent oracle for the
//! analytic gradient and divergence paths.

use crate::error::{Error, Result};

/// Default relative step: `h_i = DEFAULT_STEP · (1 + |x_i|)`.
pub const DEFAULT_STEP: f64 = 1e-5;

fn step(rel: f64, xi: f64) -> f64 {
    rel * (1.0 + xi.abs())
}

/// Central-difference gradient of `f` at `x`.
pub fn gradient<F>(f: F, x: &[f64], rel_step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(rel_step > 0.0) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {rel_step}")));
    }
    let mut probe = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = step(rel_step, x[i]);
        probe[i] = x[i] + h;
        let fp = f(&probe)?;
        probe[i] = x[i] - h;
        let fm = f(&probe)?;
        probe[i] = x[i];
        let d = (fp - fm) / (2.0 * h);
        if !d.is_finite() {
            return Err(Error::degenerate(format!("non-finite difference quotient in coordinate {i}")));
        }
        g.push(d);
    }
    Ok(g)
}

/// Central-difference partial derivative of component `i` of `v` in
/// coordinate `i`, summed over the coordinates in `range`.
pub fn partial_trace<F>(v: F, x: &[f64], range: std::ops::Range<usize>, rel_step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut probe = x.to_vec();
    let mut acc = 0.0;
    for i in range {
        let h = step(rel_step, x[i]);
        probe[i] = x[i] + h;
        let vp = v(&probe)?[i];
        probe[i] = x[i] - h;
        let vm = v(&probe)?[i];
        probe[i] = x[i];
        let d = (vp - vm) / (2.0 * h);
        if !d.is_finite() {
            return Err(Error::degenerate(format!("non-finite difference quotient in coordinate {i}")));
        }
        acc += d;
    }
    Ok(acc)
}
