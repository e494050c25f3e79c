//! Evaluatable scalar and block-vector fields.

use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::system::BlockPoint;

type ScalarFn = dyn Fn(&BlockPoint) -> Result<f64> + Send + Sync;
type VectorFn = dyn Fn(&BlockPoint) -> Result<Vec<f64>> + Send + Sync;

/// Closed region outside which a field vanishes identically.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Support {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Support::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2 <= radius * radius
            }
            Support::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h),
        }
    }
}

/// A scalar function with an optional analytic gradient (flat, length `N`).
#[derive(Clone)]
pub struct ScalarField {
    value: Arc<ScalarFn>,
    gradient: Option<Arc<VectorFn>>,
    support: Option<Support>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("analytic_gradient", &self.gradient.is_some())
            .field("support", &self.support)
            .finish()
    }
}

impl ScalarField {
    pub fn new<F>(value: F) -> Self
    where
        F: Fn(&BlockPoint) -> Result<f64> + Send + Sync + 'static,
    {
        ScalarField { value: Arc::new(value), gradient: None, support: None }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&BlockPoint) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.support = Some(support);
        self
    }

    /// The zero function, with zero gradient.
    pub fn zero() -> Self {
        ScalarField::new(|_| Ok(0.0)).with_gradient(|x| Ok(vec![0.0; x.coords().len()]))
    }

    pub fn eval(&self, x: &BlockPoint) -> Result<f64> {
        (self.value)(x)
    }

    /// Analytic gradient, if one was attached.
    pub fn analytic_gradient(&self, x: &BlockPoint) -> Option<Result<Vec<f64>>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn support(&self) -> Option<&Support> {
        self.support.as_ref()
    }

    /// `x ↦ self(g(x))`-style reparametrization: `u ∘ T` where `T` is linear
    /// and diagonal with factors `scale` (for instance a dilation).
    pub fn compose_diagonal(&self, scale: Vec<f64>) -> ScalarField {
        let inner = self.clone();
        let sc = Arc::new(scale);
        let s1 = sc.clone();
        let value = move |x: &BlockPoint| {
            let y = x.with_coords(x.coords().iter().zip(s1.iter()).map(|(a, s)| a * s).collect());
            inner.eval(&y)
        };
        let mut out = ScalarField::new(value);
        if self.gradient.is_some() {
            let inner = self.clone();
            out = out.with_gradient(move |x: &BlockPoint| {
                let y = x.with_coords(x.coords().iter().zip(sc.iter()).map(|(a, s)| a * s).collect());
                let g = inner.analytic_gradient(&y).expect("gradient present")?;
                Ok(g.iter().zip(sc.iter()).map(|(gi, s)| gi * s).collect())
            });
        }
        out
    }
}

/// A block-vector field with an optional analytic λ-divergence.
#[derive(Clone)]
pub struct BlockVectorField {
    value: Arc<VectorFn>,
    divergence: Option<Arc<ScalarFn>>,
}

impl fmt::Debug for BlockVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockVectorField").field("analytic_divergence", &self.divergence.is_some()).finish()
    }
}

impl BlockVectorField {
    pub fn new<F>(value: F) -> Self
    where
        F: Fn(&BlockPoint) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        BlockVectorField { value: Arc::new(value), divergence: None }
    }

    /// Attaches the analytic λ-divergence.
    pub fn with_divergence<D>(mut self, div: D) -> Self
    where
        D: Fn(&BlockPoint) -> Result<f64> + Send + Sync + 'static,
    {
        self.divergence = Some(Arc::new(div));
        self
    }

    pub fn eval(&self, x: &BlockPoint) -> Result<Vec<f64>> {
        (self.value)(x)
    }

    pub fn analytic_divergence(&self, x: &BlockPoint) -> Option<Result<f64>> {
        self.divergence.as_ref().map(|d| d(x))
    }

    pub fn has_analytic_divergence(&self) -> bool {
        self.divergence.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::LambdaSystem;

    #[test]
    fn support_membership() {
        let b = Support::Ball { center: vec![0.0, 0.0], radius: 1.0 };
        assert!(b.contains(&[0.6, 0.8]));
        assert!(!b.contains(&[0.8, 0.8]));
        let bx = Support::Box { lo: vec![-1.0, 0.0], hi: vec![1.0, 2.0] };
        assert!(bx.contains(&[0.0, 2.0]));
        assert!(!bx.contains(&[0.0, -0.1]));
    }

    #[test]
    fn composed_gradient_follows_chain_rule() {
        let sys = LambdaSystem::grushin(1, 1, 1.0).unwrap();
        let f = ScalarField::new(|x: &BlockPoint| Ok(x.coords()[0] * x.coords()[1]))
            .with_gradient(|x: &BlockPoint| Ok(vec![x.coords()[1], x.coords()[0]]));
        let g = f.compose_diagonal(vec![2.0, 4.0]);
        let x = sys.point(vec![1.0, 3.0]).unwrap();
        assert_eq!(g.eval(&x).unwrap(), 24.0);
        assert_eq!(g.analytic_gradient(&x).unwrap().unwrap(), vec![24.0, 8.0]);
    }
}
