use crate::error::{Error, Result};
use crate::fields::{ScalarField, Support};
use crate::system::{BlockPoint, LambdaSystem};

/// `u(x) = exp(−1/(1 − ρ²))` for `ρ = |x − center| / radius < 1`, zero
/// outside, with its analytic gradient.
pub fn bump(center: Vec<f64>, radius: f64, sys: &LambdaSystem) -> Result<ScalarField> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("bump radius must be positive, got {radius}")));
    }
    if center.len() != sys.n() {
        return Err(Error::DimensionMismatch(format!(
            "bump center has {} coordinates, system has N = {}",
            center.len(),
            sys.n()
        )));
    }
    let support = Support::Ball { center: center.clone(), radius };
    let c1 = center.clone();
    let r2 = radius * radius;
    let value = move |x: &BlockPoint| {
        let t = rho_sq(x.coords(), &c1, r2);
        Ok(if t < 1.0 { (-1.0 / (1.0 - t)).exp() } else { 0.0 })
    };
    let gradient = move |x: &BlockPoint| {
        let t = rho_sq(x.coords(), &center, r2);
        if t >= 1.0 {
            return Ok(vec![0.0; x.coords().len()]);
        }
        let one_minus = 1.0 - t;
        let f = -2.0 * (-1.0 / one_minus).exp() / (one_minus * one_minus * r2);
        Ok(x.coords().iter().zip(&center).map(|(a, c)| f * (a - c)).collect())
    };
    Ok(ScalarField::new(value).with_gradient(gradient).with_support(support))
}

fn rho_sq(x: &[f64], c: &[f64], r2: f64) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bump_values() {
        let sys = LambdaSystem::grushin(3, 1, 1.0).unwrap();
        let u = bump(vec![0.5, 0.0, 0.0, 0.0], 0.4, &sys).unwrap();
        let c = sys.point(vec![0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!((u.eval(&c).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let edge = sys.point(vec![0.9, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(u.eval(&edge).unwrap(), 0.0);
        assert!(u.analytic_gradient(&edge).unwrap().unwrap().iter().all(|g| *g == 0.0));
        let near = sys.point(vec![0.5, 0.0, 0.0, 0.3999]).unwrap();
        assert!(u.eval(&near).unwrap() < 1e-100);
        assert!(bump(vec![0.0; 3], 1.0, &sys).is_err());
        assert!(bump(vec![0.0; 4], 0.0, &sys).is_err());
    }

    #[test]
    fn gradient_matches_fd() {
        let sys = LambdaSystem::grushin(2, 2, 0.5).unwrap();
        let center = vec![0.1, -0.2, 0.3, 0.0];
        let u = bump(center.clone(), 0.8, &sys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 1000 {
            let c: Vec<f64> = center.iter().map(|m| m + rng.random_range(-0.5..0.5)).collect();
            let x = sys.point(c).unwrap();
            if rho_sq(x.coords(), &center, 0.64) > 0.8 {
                continue;
            }
            let a = u.analytic_gradient(&x).unwrap().unwrap();
            let b = fd::gradient(|c| u.eval(&x.with_coords(c.to_vec())), x.coords(), 1e-6).unwrap();
            let scale = crate::numeric::euclid(&a);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() <= 1e-6 * scale.max(1e-12), "{p} vs {q}");
            }
            checked += 1;
        }
    }

    proptest::proptest! {
        #[test]
        fn bump_is_bounded_and_supported(
            c in proptest::collection::vec(-1.0f64..1.0, 4),
            x in proptest::collection::vec(-3.0f64..3.0, 4),
            r in 0.05f64..2.0,
        ) {
            let sys = LambdaSystem::grushin(3, 1, 1.0).unwrap();
            let u = bump(c.clone(), r, &sys).unwrap();
            let v = u.eval(&sys.point(x.clone()).unwrap()).unwrap();
            proptest::prop_assert!((0.0..=(-1.0f64).exp()).contains(&v));
            if rho_sq(&x, &c, r * r) >= 1.0 {
                proptest::prop_assert_eq!(v, 0.0);
            }
        }
    }
}
