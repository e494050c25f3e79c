//! Operator structure: block dimensions, the exponent matrix, and the
//! dilation data derived from it.
//!
//! The operator is `Σ_i λ_i(x)² Δ_{x^(i)}` with `λ_i(x) = ∏_j |x^(j)|^{α_ij}`
//! and `α` strictly lower triangular. Block indices are zero-based in this
//! API; human-facing output numbers blocks from one.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{euclid, LogProduct};

/// A validated operator description with its dilation exponents.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSystem {
    dims: Vec<usize>,
    offsets: Arc<[usize]>,
    alpha: Vec<f64>,
    sigma: Vec<f64>,
    q: f64,
    // Σ_i α_il for each block l.
    col_sums: Vec<f64>,
}

impl LambdaSystem {
    /// Validates `alpha` (row-major, `k × k`) and derives `σ` and `Q`.
    pub fn new(k: usize, dims: &[usize], alpha: &[Vec<f64>]) -> Result<Self> {
        if k == 0 {
            return Err(Error::DimensionMismatch("k must be at least 1".into()));
        }
        if dims.len() != k {
            return Err(Error::DimensionMismatch(format!("expected {k} block dimensions, got {}", dims.len())));
        }
        if let Some(i) = dims.iter().position(|&n| n == 0) {
            return Err(Error::DimensionMismatch(format!("block {} has dimension 0", i + 1)));
        }
        if alpha.len() != k || alpha.iter().any(|row| row.len() != k) {
            return Err(Error::DimensionMismatch(format!("alpha must be a {k}x{k} matrix")));
        }
        for (i, row) in alpha.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                if !a.is_finite() {
                    return Err(Error::invalid(format!("alpha[{i}][{j}] is not finite")));
                }
                if a < 0.0 {
                    return Err(Error::NegativeExponent { row: i, col: j, value: a });
                }
                if j >= i && a != 0.0 {
                    return Err(Error::NonTriangularAlpha { row: i, col: j, value: a });
                }
            }
        }

        let flat: Vec<f64> = alpha.iter().flatten().copied().collect();
        let mut sigma = vec![1.0; k];
        for i in 1..k {
            sigma[i] = 1.0 + (0..i).map(|j| flat[i * k + j] * sigma[j]).sum::<f64>();
        }
        let q = sigma.iter().zip(dims).map(|(s, &n)| s * n as f64).sum();
        let col_sums = (0..k).map(|l| (0..k).map(|i| flat[i * k + l]).sum()).collect();

        let mut offsets = Vec::with_capacity(k + 1);
        offsets.push(0);
        for &n in dims {
            offsets.push(offsets.last().unwrap() + n);
        }

        Ok(LambdaSystem { dims: dims.to_vec(), offsets: offsets.into(), alpha: flat, sigma, q, col_sums })
    }

    /// `Δ_x + |x|^{2α} Δ_y` on `R^{n1} × R^{n2}`.
    pub fn grushin(n1: usize, n2: usize, alpha: f64) -> Result<Self> {
        Self::new(2, &[n1, n2], &[vec![0.0, 0.0], vec![alpha, 0.0]])
    }

    /// The classical Laplacian on `R^n` (single block).
    pub fn classical(n: usize) -> Result<Self> {
        Self::new(1, &[n], &[vec![0.0]])
    }

    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total dimension `N = Σ N_i`.
    pub fn n(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn alpha(&self, i: usize, j: usize) -> f64 {
        self.alpha[i * self.k() + j]
    }

    pub fn alpha_rows(&self) -> Vec<Vec<f64>> {
        self.alpha.chunks(self.k()).map(<[f64]>::to_vec).collect()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Homogeneous dimension `Q = Σ σ_i N_i`.
    pub fn homogeneous_dimension(&self) -> f64 {
        self.q
    }

    /// `Σ_i α_il`: total exponent of block `l` across all `λ_i`.
    pub fn column_sum(&self, l: usize) -> f64 {
        self.col_sums[l]
    }

    /// `1 + Σ_i (σ_i − 1)`, the exponent scale of the bracket norm.
    pub fn bracket_degree(&self) -> f64 {
        1.0 + self.sigma.iter().map(|s| s - 1.0).sum::<f64>()
    }

    /// `∏_i σ_i`.
    pub fn sigma_product(&self) -> f64 {
        self.sigma.iter().product()
    }

    /// `∏_{i≠j} σ_i`.
    pub fn sigma_product_except(&self, j: usize) -> f64 {
        self.sigma.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, s)| s).product()
    }

    /// `Σ_{i≠j} α_il`: exponent of `|x^(l)|` in `∏_{i≠j} λ_i`.
    pub fn bracket_exponent(&self, j: usize, l: usize) -> f64 {
        (0..self.k()).filter(|&i| i != j).map(|i| self.alpha(i, l)).sum()
    }

    /// True when every exponent vanishes (the operator is the Laplacian).
    pub fn is_classical(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0.0)
    }

    pub(crate) fn offsets(&self) -> &Arc<[usize]> {
        &self.offsets
    }

    /// Wraps flat coordinates as a point of this system.
    pub fn point(&self, coords: Vec<f64>) -> Result<BlockPoint> {
        if coords.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, system has N = {}",
                coords.len(),
                self.n()
            )));
        }
        Ok(BlockPoint { coords, offsets: self.offsets.clone() })
    }

    pub fn point_from_blocks(&self, blocks: &[Vec<f64>]) -> Result<BlockPoint> {
        if blocks.len() != self.k() {
            return Err(Error::DimensionMismatch(format!("expected {} blocks, got {}", self.k(), blocks.len())));
        }
        for (i, (b, &n)) in blocks.iter().zip(&self.dims).enumerate() {
            if b.len() != n {
                return Err(Error::DimensionMismatch(format!("block {} has length {}, expected {n}", i + 1, b.len())));
            }
        }
        self.point(blocks.concat())
    }

    pub fn origin(&self) -> BlockPoint {
        BlockPoint { coords: vec![0.0; self.n()], offsets: self.offsets.clone() }
    }

    pub(crate) fn check_point(&self, x: &BlockPoint) -> Result<()> {
        if x.offsets[..] != self.offsets[..] {
            return Err(Error::DimensionMismatch("point block structure does not match the system".into()));
        }
        Ok(())
    }

    /// `λ_i(x) = ∏_j |x^(j)|^{α_ij}` with `0^0 = 1`.
    pub fn lambda(&self, i: usize, x: &BlockPoint) -> Result<f64> {
        if i >= self.k() {
            return Err(Error::IndexOutOfRange { index: i, k: self.k() });
        }
        self.check_point(x)?;
        Ok(self.lambda_unchecked(i, x))
    }

    pub(crate) fn lambda_unchecked(&self, i: usize, x: &BlockPoint) -> f64 {
        let mut prod = LogProduct::one();
        for j in 0..i {
            prod.mul_pow(x.block_norm(j), self.alpha(i, j));
        }
        // exponents are non-negative, so there is no pole
        prod.value().unwrap_or(f64::INFINITY)
    }

    /// Regularized `λ_i^ε(x) = ∏_j (|x^(j)|² + ε)^{α_ij / 2}`.
    pub(crate) fn lambda_eps_unchecked(&self, i: usize, x: &BlockPoint, eps: f64) -> f64 {
        let log: f64 = (0..i)
            .filter(|&j| self.alpha(i, j) != 0.0)
            .map(|j| 0.5 * self.alpha(i, j) * (x.block_norm_sq(j) + eps).ln())
            .sum();
        log.exp()
    }

    /// Anisotropic dilation `δ_r`: block `i` is scaled by `r^{σ_i}`.
    pub fn dilate(&self, r: f64, x: &BlockPoint) -> Result<BlockPoint> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::NonPositiveScale(r));
        }
        self.check_point(x)?;
        Ok(self.dilate_unchecked(r, x))
    }

    pub(crate) fn dilate_unchecked(&self, r: f64, x: &BlockPoint) -> BlockPoint {
        let mut out = x.clone();
        let ln_r = r.ln();
        for i in 0..self.k() {
            let f = (self.sigma[i] * ln_r).exp();
            out.block_mut(i).iter_mut().for_each(|c| *c *= f);
        }
        out
    }

    /// Compact identifier usable in file names and CSV cells.
    pub fn id(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(usize::to_string).collect();
        let mut id = format!("k{}-N{}", self.k(), dims.join("x"));
        for i in 0..self.k() {
            for j in 0..i {
                let a = self.alpha(i, j);
                if a != 0.0 {
                    id.push_str(&format!("-a{}{}:{}", i + 1, j + 1, crate::numeric::fmt_roundtrip(a)));
                }
            }
        }
        id
    }
}

impl fmt::Display for LambdaSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// A point of `R^N` split into the blocks `x^(1), …, x^(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPoint {
    coords: Vec<f64>,
    offsets: Arc<[usize]>,
}

impl BlockPoint {
    pub fn k(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.coords[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn blocks(&self) -> Vec<Vec<f64>> {
        (0..self.k()).map(|i| self.block(i).to_vec()).collect()
    }

    /// Euclidean norm of block `i`.
    pub fn block_norm(&self, i: usize) -> f64 {
        euclid(self.block(i))
    }

    pub fn block_norm_sq(&self, i: usize) -> f64 {
        let n = self.block_norm(i);
        n * n
    }

    /// Euclidean norm of the whole point.
    pub fn norm(&self) -> f64 {
        euclid(&self.coords)
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0.0)
    }

    /// A point with the same block structure and all coordinates zero.
    pub fn zeros_like(&self) -> BlockPoint {
        BlockPoint { coords: vec![0.0; self.coords.len()], offsets: self.offsets.clone() }
    }

    pub(crate) fn with_coords(&self, coords: Vec<f64>) -> BlockPoint {
        debug_assert_eq!(coords.len(), self.coords.len());
        BlockPoint { coords, offsets: self.offsets.clone() }
    }

    /// `true` if block `j` counts as zero: `|x^(j)| < 1e-8 (1 + |x|)`.
    pub fn block_is_degenerate(&self, j: usize) -> bool {
        self.block_norm(j) < DEGENERATE_BLOCK_TOL * (1.0 + self.norm())
    }
}

/// Relative threshold below which a block is treated as zero by operations
/// that need differentiability.
pub const DEGENERATE_BLOCK_TOL: f64 = 1e-8;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example_23(a: f64, b: f64, g: f64, dims: &[usize]) -> LambdaSystem {
        LambdaSystem::new(3, dims, &[vec![0.0, 0.0, 0.0], vec![a, 0.0, 0.0], vec![b, g, 0.0]]).unwrap()
    }

    #[test]
    fn grushin_sigma_and_q() {
        let sys = LambdaSystem::grushin(3, 1, 1.0).unwrap();
        assert_eq!(sys.sigma(), &[1.0, 2.0]);
        assert_eq!(sys.homogeneous_dimension(), 5.0);
    }

    #[test]
    fn chain_sigma_and_q() {
        let sys = LambdaSystem::new(3, &[1, 1, 1], &[vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(sys.sigma(), &[1.0, 2.0, 3.0]);
        assert_eq!(sys.homogeneous_dimension(), 6.0);
    }

    #[test]
    fn example_23_sigma() {
        let sys = example_23(1.0, 1.0, 1.0, &[1, 1, 1]);
        assert_eq!(sys.sigma()[2], 4.0);
        let sys = example_23(0.5, 2.0, 1.5, &[2, 1, 3]);
        assert_relative_eq!(sys.sigma()[2], 2.0 + 1.5 * 1.5 + 1.0, max_relative = 1e-15);
    }

    #[test]
    fn classical_case() {
        let sys = LambdaSystem::classical(3).unwrap();
        assert_eq!(sys.sigma(), &[1.0]);
        assert_eq!(sys.homogeneous_dimension(), 3.0);
        assert!(sys.is_classical());
    }

    #[test]
    fn rejects_bad_alpha() {
        let upper = LambdaSystem::new(2, &[1, 1], &[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(upper, Err(Error::NonTriangularAlpha { row: 0, col: 1, .. })));
        let diag = LambdaSystem::new(2, &[1, 1], &[vec![0.5, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(diag, Err(Error::NonTriangularAlpha { row: 0, col: 0, .. })));
        let neg = LambdaSystem::new(2, &[1, 1], &[vec![0.0, 0.0], vec![-1.0, 0.0]]);
        assert!(matches!(neg, Err(Error::NegativeExponent { .. })));
        let dims = LambdaSystem::new(2, &[1], &[vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert!(matches!(dims, Err(Error::DimensionMismatch(_))));
        let zero_dim = LambdaSystem::new(1, &[0], &[vec![0.0]]);
        assert!(matches!(zero_dim, Err(Error::DimensionMismatch(_))));
        let shape = LambdaSystem::new(2, &[1, 1], &[vec![0.0, 0.0]]);
        assert!(matches!(shape, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn lambda_values() {
        let sys = LambdaSystem::grushin(2, 1, 1.0).unwrap();
        let x = sys.point(vec![3.0, 4.0, 7.0]).unwrap();
        assert_eq!(sys.lambda(0, &x).unwrap(), 1.0);
        assert_relative_eq!(sys.lambda(1, &x).unwrap(), 5.0, max_relative = 1e-15);
        assert!(matches!(sys.lambda(2, &x), Err(Error::IndexOutOfRange { index: 2, k: 2 })));

        let sys = example_23(1.0, 1.0, 1.0, &[1, 2, 1]);
        let x = sys.point_from_blocks(&[vec![-2.0], vec![0.0, 3.0], vec![5.0]]).unwrap();
        assert_relative_eq!(sys.lambda(2, &x).unwrap(), 6.0, max_relative = 1e-15);
    }

    #[test]
    fn lambda_zero_power_convention() {
        let sys = example_23(1.0, 0.0, 2.0, &[1, 1, 1]);
        let x = sys.point(vec![0.0, 2.0, 1.0]).unwrap();
        // λ_3 = |x1|^0 |x2|^2 with |x1| = 0
        assert_relative_eq!(sys.lambda(2, &x).unwrap(), 4.0, max_relative = 1e-15);
        assert_eq!(sys.lambda(1, &x).unwrap(), 0.0);
    }

    #[test]
    fn dilation() {
        let sys = LambdaSystem::grushin(3, 1, 1.0).unwrap();
        let x = sys.point(vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(sys.dilate(1.0, &x).unwrap(), x);
        let y = sys.dilate(2.0, &x).unwrap();
        assert_relative_eq!(y.coords()[0], 2.0, max_relative = 1e-15);
        assert_relative_eq!(y.coords()[3], 4.0, max_relative = 1e-15);
        assert!(matches!(sys.dilate(0.0, &x), Err(Error::NonPositiveScale(_))));
        assert!(matches!(sys.dilate(-1.0, &x), Err(Error::NonPositiveScale(_))));
    }

    #[test]
    fn point_validation() {
        let sys = LambdaSystem::grushin(3, 1, 1.0).unwrap();
        assert!(sys.point(vec![1.0; 3]).is_err());
        let other = LambdaSystem::grushin(2, 2, 1.0).unwrap();
        let x = other.point(vec![1.0; 4]).unwrap();
        assert!(matches!(sys.lambda(1, &x), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn id_is_compact() {
        let sys = LambdaSystem::grushin(3, 1, 1.0).unwrap();
        assert_eq!(sys.id(), "k2-N3x1-a21:1");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_system() -> impl Strategy<Value = LambdaSystem> {
            (1usize..=4)
                .prop_flat_map(|k| {
                    (Just(k), proptest::collection::vec(1usize..=3, k), proptest::collection::vec(0.0f64..2.5, k * k))
                })
                .prop_map(|(k, dims, flat)| {
                    let alpha: Vec<Vec<f64>> =
                        (0..k).map(|i| (0..k).map(|j| if j < i { flat[i * k + j] } else { 0.0 }).collect()).collect();
                    LambdaSystem::new(k, &dims, &alpha).unwrap()
                })
        }

        fn arb_system_point() -> impl Strategy<Value = (LambdaSystem, BlockPoint)> {
            arb_system().prop_flat_map(|sys| {
                let n = sys.n();
                (Just(sys), proptest::collection::vec(0.1f64..3.0, n)).prop_map(|(sys, c)| {
                    let x = sys.point(c).unwrap();
                    (sys, x)
                })
            })
        }

        proptest! {
            #[test]
            fn sigma_recurrence((sys, _) in arb_system_point()) {
                for i in 0..sys.k() {
                    let want = 1.0 + (0..i).map(|l| sys.alpha(i, l) * sys.sigma()[l]).sum::<f64>();
                    prop_assert!((sys.sigma()[i] - want).abs() <= 1e-12 * want);
                }
                let q: f64 = (0..sys.k()).map(|i| sys.dims()[i] as f64 * sys.sigma()[i]).sum();
                prop_assert!((sys.homogeneous_dimension() - q).abs() <= 1e-12 * q);
            }

            #[test]
            fn lambda_scales_with_sigma((sys, x) in arb_system_point(), ln_r in -3.0f64..3.0) {
                let r = ln_r.exp();
                let y = sys.dilate(r, &x).unwrap();
                for i in 0..sys.k() {
                    let a = sys.lambda(i, &y).unwrap();
                    let b = r.powf(sys.sigma()[i] - 1.0) * sys.lambda(i, &x).unwrap();
                    prop_assert!((a - b).abs() <= 1e-11 * b, "λ_{}: {} vs {}", i + 1, a, b);
                }
            }

            #[test]
            fn dilations_compose((sys, x) in arb_system_point(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
                let two = sys.dilate(a.exp(), &sys.dilate(b.exp(), &x).unwrap()).unwrap();
                let one = sys.dilate((a + b).exp(), &x).unwrap();
                for (u, v) in two.coords().iter().zip(one.coords()) {
                    prop_assert!((u - v).abs() <= 1e-12 * v.abs());
                }
            }
        }
    }
}
