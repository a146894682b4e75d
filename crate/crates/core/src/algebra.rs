//! Finite-dimensional C*-algebras with a faithful trace.
//!
//! Every such algebra is a direct sum of full matrix blocks `⊕_b M_{d_b}`,
//! and every faithful trace is `τ(x) = Σ_b w_b tr(x_b)` with `w_b > 0`.
//! Elements are stored blockwise, so all spectral calculus is blockwise too.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{FidError, Result};
use crate::linalg::{self, CMat, ZERO};

pub const DEFAULT_PSD_TOL: f64 = 1e-10;
pub const DEFAULT_TRACE_TOL: f64 = 1e-9;
/// Step-function values closer than this are merged into one step.
pub const STEP_MERGE_TOL: f64 = 1e-12;

/// One summand `M_dim` of the algebra together with its trace weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub dim: usize,
    pub weight: f64,
}

/// The ambient pair (A, τ).
#[derive(Debug, Clone, PartialEq)]
pub struct TracialAlgebra {
    blocks: Vec<Block>,
    total_trace: f64,
}

impl TracialAlgebra {
    pub fn new(blocks: Vec<Block>) -> Result<Arc<Self>> {
        if blocks.is_empty() {
            return Err(FidError::InvalidAlgebra("no blocks".into()));
        }
        for (k, b) in blocks.iter().enumerate() {
            if b.dim == 0 {
                return Err(FidError::InvalidAlgebra(format!("block {k} has dim 0")));
            }
            if !(b.weight > 0.0 && b.weight.is_finite()) {
                return Err(FidError::InvalidAlgebra(format!("block {k} has non-positive weight {}", b.weight)));
            }
        }
        let total_trace = blocks.iter().map(|b| b.weight * b.dim as f64).sum();
        Ok(Arc::new(Self { blocks, total_trace }))
    }

    /// `M_d` with the canonical (unnormalised) trace.
    pub fn matrix(dim: usize) -> Arc<Self> {
        Self::new(vec![Block { dim, weight: 1.0 }]).expect("dim must be positive")
    }

    /// `M_d` with the normalised trace, `τ(1) = 1`.
    pub fn normalized_matrix(dim: usize) -> Arc<Self> {
        Self::new(vec![Block { dim, weight: 1.0 / dim as f64 }]).expect("dim must be positive")
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Arc<Self>> {
        Self::new(pairs.iter().map(|&(dim, weight)| Block { dim, weight }).collect())
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// τ(1).
    pub fn total_trace(&self) -> f64 {
        self.total_trace
    }

    /// Dimension of the algebra as a complex vector space, `Σ d_b²`.
    pub fn linear_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim * b.dim).sum()
    }

    /// Largest block dimension.
    pub fn max_block_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).max().unwrap_or(0)
    }

    /// Offset of block `b` in the matrix-unit basis (row-major within blocks).
    pub fn basis_offset(&self, block: usize) -> usize {
        self.blocks[..block].iter().map(|b| b.dim * b.dim).sum()
    }

    /// All matrix units `(block, i, j)` in basis order.
    pub fn matrix_units(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, blk)| (0..blk.dim).flat_map(move |i| (0..blk.dim).map(move |j| (b, i, j))))
    }

    pub fn is_single_block(&self) -> bool {
        self.blocks.len() == 1
    }
}

impl fmt::Display for TracialAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|b| format!("M_{}[w={}]", b.dim, b.weight)).collect();
        write!(f, "{}", parts.join(" ⊕ "))
    }
}

pub(crate) fn same_algebra(a: &Arc<TracialAlgebra>, b: &Arc<TracialAlgebra>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// A block-diagonal element of a [`TracialAlgebra`].
#[derive(Debug, Clone)]
pub struct AlgebraElement {
    algebra: Arc<TracialAlgebra>,
    blocks: Vec<CMat>,
}

impl PartialEq for AlgebraElement {
    fn eq(&self, other: &Self) -> bool {
        same_algebra(&self.algebra, &other.algebra) && self.blocks == other.blocks
    }
}

impl AlgebraElement {
    pub fn from_blocks(algebra: Arc<TracialAlgebra>, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(FidError::ShapeMismatch(format!(
                "expected {} blocks, got {}",
                algebra.num_blocks(),
                blocks.len()
            )));
        }
        for (k, (m, b)) in blocks.iter().zip(algebra.blocks()).enumerate() {
            if m.shape() != (b.dim, b.dim) {
                return Err(FidError::ShapeMismatch(format!(
                    "block {k}: expected {d}x{d}, got {}x{}",
                    m.nrows(),
                    m.ncols(),
                    d = b.dim
                )));
            }
        }
        Ok(Self { algebra, blocks })
    }

    /// Single-block convenience constructor.
    pub fn from_matrix(algebra: Arc<TracialAlgebra>, m: CMat) -> Result<Self> {
        Self::from_blocks(algebra, vec![m])
    }

    pub fn from_block_fn(algebra: Arc<TracialAlgebra>, mut f: impl FnMut(usize, usize) -> CMat) -> Self {
        let blocks = algebra
            .blocks()
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let m = f(k, b.dim);
                assert_eq!(m.shape(), (b.dim, b.dim), "block {k} has the wrong shape");
                m
            })
            .collect();
        Self { algebra, blocks }
    }

    pub fn zeros(algebra: &Arc<TracialAlgebra>) -> Self {
        Self::from_block_fn(algebra.clone(), |_, d| CMat::zeros(d, d))
    }

    pub fn identity(algebra: &Arc<TracialAlgebra>) -> Self {
        Self::from_block_fn(algebra.clone(), |_, d| linalg::identity(d))
    }

    pub fn scalar(algebra: &Arc<TracialAlgebra>, z: Complex64) -> Self {
        Self::identity(algebra).scale(z)
    }

    /// Matrix unit `e_ij` inside block `block`.
    pub fn matrix_unit(algebra: &Arc<TracialAlgebra>, block: usize, i: usize, j: usize) -> Self {
        Self::from_block_fn(algebra.clone(), |k, d| {
            let mut m = CMat::zeros(d, d);
            if k == block {
                m[(i, j)] = linalg::ONE;
            }
            m
        })
    }

    /// Real diagonal element on a single-block algebra.
    pub fn diag(algebra: &Arc<TracialAlgebra>, entries: &[f64]) -> Result<Self> {
        let m = CMat::from_diagonal(&linalg::CVec::from_iterator(
            entries.len(),
            entries.iter().map(|&x| linalg::c(x, 0.0)),
        ));
        Self::from_matrix(algebra.clone(), m)
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.algebra
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &CMat {
        &self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if same_algebra(&self.algebra, &other.algebra) {
            Ok(())
        } else {
            Err(FidError::AlgebraMismatch)
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn map_blocks(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        Self { algebra: self.algebra.clone(), blocks: self.blocks.iter().map(f).collect() }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, z: Complex64) -> Self {
        self.map_blocks(|m| m * z)
    }

    pub fn scale_real(&self, t: f64) -> Self {
        self.map_blocks(|m| m.scale(t))
    }

    /// Blockwise conjugate transpose.
    pub fn adjoint(&self) -> Self {
        self.map_blocks(|m| m.adjoint())
    }

    /// τ(x) = Σ_b w_b tr(x_b).
    pub fn trace(&self) -> Complex64 {
        self.blocks.iter().zip(self.algebra.blocks()).map(|(m, b)| m.trace() * b.weight).fold(ZERO, |acc, z| acc + z)
    }

    /// τ(x·y) without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<Complex64> {
        self.check_same(other)?;
        let mut acc = ZERO;
        for ((a, b), blk) in self.blocks.iter().zip(&other.blocks).zip(self.algebra.blocks()) {
            let mut t = ZERO;
            for i in 0..blk.dim {
                for k in 0..blk.dim {
                    t += a[(i, k)] * b[(k, i)];
                }
            }
            acc += t * blk.weight;
        }
        Ok(acc)
    }

    /// Operator (C*-) norm: the largest singular value over all blocks.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    /// Hilbert–Schmidt norm `τ(x* x)^{1/2}`.
    pub fn hs_norm(&self) -> f64 {
        self.blocks
            .iter()
            .zip(self.algebra.blocks())
            .map(|(m, b)| b.weight * m.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Entrywise max-abs over all blocks; a cheap norm for residuals.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    /// ‖x − x*‖ in operator norm.
    pub fn selfadjoint_defect(&self) -> f64 {
        self.blocks.iter().map(|m| linalg::spectral_norm(&(m - m.adjoint()))).fold(0.0, f64::max)
    }

    pub fn hermitian_part(&self) -> Self {
        self.map_blocks(linalg::hermitian_part)
    }

    fn check_selfadjoint(&self, tol: f64) -> Result<f64> {
        let scale = self.norm().max(1.0);
        let defect = self.selfadjoint_defect();
        if defect > tol * scale {
            return Err(FidError::NotSelfadjoint { defect });
        }
        Ok(scale)
    }

    /// Eigenvalues of every block, each list ascending.
    pub fn block_eigenvalues(&self) -> Vec<Vec<f64>> {
        self.blocks.iter().map(linalg::eigvalsh).collect()
    }

    /// Smallest eigenvalue of the hermitian part over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.block_eigenvalues().iter().filter_map(|v| v.first().copied()).fold(f64::INFINITY, f64::min)
    }

    /// Whether `x ∈ A_+`, up to `tol·max(1, ‖x‖)`.
    pub fn is_positive(&self, tol: f64) -> Result<bool> {
        let scale = self.check_selfadjoint(tol)?;
        Ok(self.min_eigenvalue() >= -tol * scale)
    }

    /// Functional calculus `f(h)` applied to the hermitian part, blockwise.
    pub fn hermitian_fn(&self, f: impl Fn(f64) -> f64) -> Self {
        self.map_blocks(|m| linalg::hermitian_fn(m, &f))
    }

    /// Unique positive square root with default tolerance.
    pub fn sqrt_psd(&self) -> Result<Self> {
        self.sqrt_psd_with(DEFAULT_PSD_TOL)
    }

    /// Unique positive square root. Eigenvalues in `[-tol‖a‖, 0)` are clamped
    /// to zero, as are positive eigenvalues below the roundoff floor of the
    /// decomposition; anything more negative is rejected.
    pub fn sqrt_psd_with(&self, tol: f64) -> Result<Self> {
        self.check_selfadjoint(tol)?;
        let decomps: Vec<(Vec<f64>, CMat)> = self.blocks.iter().map(linalg::eigh).collect();
        let norm = decomps.iter().flat_map(|(v, _)| v.iter().map(|x| x.abs())).fold(0.0, f64::max);
        let min = decomps.iter().filter_map(|(v, _)| v.first().copied()).fold(f64::INFINITY, f64::min);
        if min < -tol * norm {
            return Err(FidError::NotPositive { min_eigenvalue: min });
        }
        let blocks = decomps
            .iter()
            .zip(self.algebra.blocks())
            .map(|((vals, vecs), b)| {
                let floor = 4.0 * b.dim as f64 * f64::EPSILON * norm;
                let roots: Vec<f64> = vals.iter().map(|&l| if l <= floor { 0.0 } else { l.sqrt() }).collect();
                linalg::reconstruct(vecs, &roots)
            })
            .collect();
        Ok(Self { algebra: self.algebra.clone(), blocks })
    }

    /// Blockwise singular value decompositions.
    pub fn svd_blocks(&self) -> Vec<linalg::Svd> {
        self.blocks.iter().map(linalg::svd).collect()
    }

    /// `|z| = (z* z)^{1/2}`.
    pub fn abs(&self) -> Self {
        self.map_blocks(|m| linalg::svd(m).abs())
    }

    /// Polar decomposition `z = u |z|` with `u` unitary (the partial isometry
    /// is completed on the kernel deterministically).
    pub fn polar(&self) -> (Self, Self) {
        let svds = self.svd_blocks();
        let u = Self { algebra: self.algebra.clone(), blocks: svds.iter().map(|s| s.polar_unitary()).collect() };
        let a = Self { algebra: self.algebra.clone(), blocks: svds.iter().map(|s| s.abs()).collect() };
        (u, a)
    }

    /// The generalised singular value function μ_z: each singular value of
    /// block `b` occupies trace measure `w_b`.
    pub fn singular_value_function(&self) -> StepFunction {
        let per_block: Vec<Vec<f64>> = self.blocks.iter().map(linalg::singular_values).collect();
        let smax = per_block.iter().flatten().copied().fold(0.0, f64::max);
        let floor = smax * f64::EPSILON;
        let mut steps = Vec::new();
        for (vals, b) in per_block.iter().zip(self.algebra.blocks()) {
            for &s in vals {
                if s > floor {
                    steps.push((s, b.weight));
                }
            }
        }
        StepFunction::from_steps(steps)
    }

    /// ‖z‖₁ = τ(|z|) = ∫ μ_z.
    pub fn trace_norm(&self) -> f64 {
        self.singular_value_function().integral()
    }

    /// `xy = yx = x*y = xy* = 0` up to `tol·max(1, ‖x‖‖y‖)`.
    pub fn are_orthogonal(&self, other: &Self, tol: f64) -> Result<bool> {
        self.check_same(other)?;
        let bound = tol * (self.norm() * other.norm()).max(1.0);
        let xa = self.adjoint();
        let ya = other.adjoint();
        let products = [self.try_mul(other)?, other.try_mul(self)?, xa.try_mul(other)?, self.try_mul(&ya)?];
        Ok(products.iter().all(|p| p.norm() <= bound))
    }
}

/// A positive element of trace one: a τ-state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityElement {
    element: AlgebraElement,
}

impl DensityElement {
    pub fn new(element: AlgebraElement) -> Result<Self> {
        Self::with_tolerances(element, DEFAULT_PSD_TOL, DEFAULT_TRACE_TOL)
    }

    pub fn with_tolerances(element: AlgebraElement, psd_tol: f64, trace_tol: f64) -> Result<Self> {
        let scale = element.check_selfadjoint(psd_tol)?;
        let min = element.min_eigenvalue();
        if min < -psd_tol * scale {
            return Err(FidError::NotPositive { min_eigenvalue: min });
        }
        let tr = element.trace();
        if (tr - linalg::ONE).norm() > trace_tol {
            return Err(FidError::NotUnitTrace { trace: tr.re });
        }
        Ok(Self { element })
    }

    /// Rescales a nonzero positive element to unit trace.
    pub fn normalize(element: AlgebraElement) -> Result<Self> {
        let tr = element.trace().re;
        if tr.is_nan() || tr <= 0.0 {
            return Err(FidError::NotUnitTrace { trace: tr });
        }
        Self::new(element.scale_real(1.0 / tr))
    }

    /// The maximally mixed state `1/τ(1)`.
    pub fn maximally_mixed(algebra: &Arc<TracialAlgebra>) -> Self {
        Self { element: AlgebraElement::identity(algebra).scale_real(1.0 / algebra.total_trace()) }
    }

    pub fn element(&self) -> &AlgebraElement {
        &self.element
    }

    pub fn into_element(self) -> AlgebraElement {
        self.element
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        self.element.algebra()
    }
}

impl std::ops::Deref for DensityElement {
    type Target = AlgebraElement;
    fn deref(&self) -> &AlgebraElement {
        &self.element
    }
}

/// A nonincreasing step function, stored as `(value, measure)` pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepFunction {
    steps: Vec<(f64, f64)>,
}

impl StepFunction {
    /// Sorts nonincreasing by value and merges values within [`STEP_MERGE_TOL`].
    /// Zero values and zero measures are dropped.
    pub fn from_steps(mut steps: Vec<(f64, f64)>) -> Self {
        steps.retain(|&(v, m)| v > 0.0 && m > 0.0);
        steps.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(steps.len());
        for (v, m) in steps {
            match merged.last_mut() {
                Some(last) if (last.0 - v).abs() <= STEP_MERGE_TOL => last.1 += m,
                _ => merged.push((v, m)),
            }
        }
        Self { steps: merged }
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_measure(&self) -> f64 {
        self.steps.iter().map(|s| s.1).sum()
    }

    pub fn integral(&self) -> f64 {
        self.steps.iter().map(|(v, m)| v * m).sum()
    }

    /// μ(t), right-continuous; zero past the total measure.
    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for &(v, m) in &self.steps {
            acc += m;
            if t < acc {
                return v;
            }
        }
        0.0
    }

    /// Left endpoints of every step.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for &(_, m) in &self.steps {
            acc += m;
            out.push(acc);
        }
        out
    }

    /// `sup_t |μ(t) − ν(t)|`, evaluated on the union of both breakpoint sets.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        let mut pts = self.breakpoints();
        pts.extend(other.breakpoints());
        pts.iter().map(|&t| (self.eval(t) - other.eval(t)).abs()).fold(0.0, f64::max)
    }

    /// `ψ ∘ μ` for increasing ψ with ψ(0) = 0.
    pub fn map_values(&self, psi: impl Fn(f64) -> f64) -> Self {
        Self::from_steps(self.steps.iter().map(|&(v, m)| (psi(v), m)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn m2() -> Arc<TracialAlgebra> {
        TracialAlgebra::matrix(2)
    }

    #[test]
    fn rejects_bad_blocks() {
        assert!(TracialAlgebra::from_pairs(&[(0, 1.0)]).is_err());
        assert!(TracialAlgebra::from_pairs(&[(2, 0.0)]).is_err());
        assert!(TracialAlgebra::from_pairs(&[(2, -1.0)]).is_err());
        assert!(TracialAlgebra::from_pairs(&[]).is_err());
        let a = TracialAlgebra::from_pairs(&[(2, 1.0), (3, 0.5)]).unwrap();
        assert_eq!(a.total_trace(), 3.5);
        assert_eq!(a.linear_dim(), 13);
    }

    #[test]
    fn trace_examples() {
        assert_eq!(AlgebraElement::identity(&m2()).trace(), c(2.0, 0.0));
        let car2 = TracialAlgebra::from_pairs(&[(4, 0.25)]).unwrap();
        assert_eq!(AlgebraElement::identity(&car2).trace(), c(1.0, 0.0));
        assert_eq!(AlgebraElement::diag(&m2(), &[3.0, 1.0]).unwrap().trace(), c(4.0, 0.0));
    }

    #[test]
    fn adjoint_examples() {
        let e12 = AlgebraElement::matrix_unit(&m2(), 0, 0, 1);
        let e21 = AlgebraElement::matrix_unit(&m2(), 0, 1, 0);
        assert_eq!(e12.adjoint(), e21);
        let i1 = AlgebraElement::scalar(&m2(), c(0.0, 1.0));
        assert_eq!(i1.adjoint(), AlgebraElement::scalar(&m2(), c(0.0, -1.0)));
        let h = AlgebraElement::diag(&m2(), &[1.0, -2.0]).unwrap();
        assert_eq!(h.adjoint(), h);
    }

    #[test]
    fn positivity_examples() {
        let a = AlgebraElement::diag(&m2(), &[1.0, 0.0]).unwrap();
        assert!(a.is_positive(1e-10).unwrap());
        let b = AlgebraElement::diag(&m2(), &[1.0, -1e-3]).unwrap();
        assert!(!b.is_positive(1e-10).unwrap());
        let e12 = AlgebraElement::matrix_unit(&m2(), 0, 0, 1);
        assert!(matches!(e12.is_positive(1e-10), Err(FidError::NotSelfadjoint { .. })));
    }

    #[test]
    fn sqrt_examples() {
        let a = AlgebraElement::diag(&m2(), &[4.0, 9.0]).unwrap();
        let r = a.sqrt_psd().unwrap();
        let want = AlgebraElement::diag(&m2(), &[2.0, 3.0]).unwrap();
        assert!(r.try_sub(&want).unwrap().max_abs() < 1e-14);
        let id = AlgebraElement::identity(&m2());
        assert!(id.sqrt_psd().unwrap().try_sub(&id).unwrap().max_abs() < 1e-14);
        let half = c(0.5, 0.0);
        let plus = CMat::from_element(2, 2, half);
        let p = AlgebraElement::from_matrix(m2(), plus).unwrap();
        assert!(p.sqrt_psd().unwrap().try_sub(&p).unwrap().max_abs() < 1e-14);
        let neg = AlgebraElement::diag(&m2(), &[1.0, -0.5]).unwrap();
        assert!(matches!(neg.sqrt_psd(), Err(FidError::NotPositive { .. })));
        // tiny negative roundoff is clamped
        let clamp = AlgebraElement::diag(&m2(), &[1.0, -1e-14]).unwrap();
        assert_eq!(clamp.sqrt_psd().unwrap().block(0)[(1, 1)], ZERO);
    }

    #[test]
    fn abs_examples() {
        let a = AlgebraElement::diag(&m2(), &[-2.0, 3.0]).unwrap();
        let want = AlgebraElement::diag(&m2(), &[2.0, 3.0]).unwrap();
        assert!(a.abs().try_sub(&want).unwrap().max_abs() < 1e-14);
        let e12 = AlgebraElement::matrix_unit(&m2(), 0, 0, 1);
        let e22 = AlgebraElement::matrix_unit(&m2(), 0, 1, 1);
        assert!(e12.abs().try_sub(&e22).unwrap().max_abs() < 1e-14);
        let s = 0.5f64.sqrt();
        let u = AlgebraElement::from_matrix(
            m2(),
            CMat::from_row_slice(2, 2, &[c(s, 0.0), c(0.0, s), c(0.0, s), c(s, 0.0)]),
        )
        .unwrap();
        let id = AlgebraElement::identity(&m2());
        assert!(u.abs().try_sub(&id).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn singular_value_function_examples() {
        let x = AlgebraElement::diag(&m2(), &[3.0, 1.0]).unwrap();
        let mu = x.singular_value_function();
        assert_eq!(mu.steps().len(), 2);
        assert!((mu.steps()[0].0 - 3.0).abs() < 1e-14 && mu.steps()[0].1 == 1.0);
        assert!((mu.steps()[1].0 - 1.0).abs() < 1e-14 && mu.steps()[1].1 == 1.0);
        assert!((mu.integral() - 4.0).abs() < 1e-14);
        // oracle: τ(|x|) from abs + trace
        assert!((mu.integral() - x.abs().trace().re).abs() < 1e-14);

        let half = TracialAlgebra::from_pairs(&[(2, 0.5)]).unwrap();
        let y = AlgebraElement::diag(&half, &[3.0, 1.0]).unwrap();
        let nu = y.singular_value_function();
        assert_eq!(nu.steps().iter().map(|s| s.1).collect::<Vec<_>>(), vec![0.5, 0.5]);
        assert!((nu.integral() - 2.0).abs() < 1e-14);
        assert!((nu.integral() - y.abs().trace().re).abs() < 1e-14);

        assert!(AlgebraElement::zeros(&m2()).singular_value_function().is_empty());
        assert_eq!(AlgebraElement::zeros(&m2()).trace_norm(), 0.0);
    }

    #[test]
    fn step_function_merges_and_evaluates() {
        let f = StepFunction::from_steps(vec![(1.0, 0.5), (2.0, 1.0), (1.0 + 1e-13, 0.5), (0.0, 3.0)]);
        assert_eq!(f.steps().len(), 2);
        assert_eq!(f.eval(0.0), 2.0);
        assert_eq!(f.eval(0.999), 2.0);
        assert!((f.eval(1.0) - 1.0).abs() < 1e-12);
        assert_eq!(f.eval(2.0), 0.0);
        assert_eq!(f.total_measure(), 2.0);
    }

    #[test]
    fn trace_norm_examples() {
        let x = AlgebraElement::diag(&m2(), &[1.0, -1.0]).unwrap();
        assert!((x.trace_norm() - 2.0).abs() < 1e-14);
        let e12 = AlgebraElement::matrix_unit(&m2(), 0, 0, 1);
        assert!((e12.trace_norm() - 1.0).abs() < 1e-14);
        let rho = DensityElement::new(AlgebraElement::diag(&m2(), &[0.25, 0.75]).unwrap()).unwrap();
        assert!((rho.trace_norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn orthogonality_examples() {
        let p = AlgebraElement::diag(&m2(), &[1.0, 0.0]).unwrap();
        let q = AlgebraElement::diag(&m2(), &[0.0, 1.0]).unwrap();
        assert!(p.are_orthogonal(&q, 1e-12).unwrap());
        let half = CMat::from_element(2, 2, c(0.5, 0.0));
        let plus = AlgebraElement::from_matrix(m2(), half).unwrap();
        let minus = AlgebraElement::identity(&m2()).try_sub(&plus).unwrap();
        assert!(plus.are_orthogonal(&minus, 1e-12).unwrap());
        let id = AlgebraElement::identity(&m2());
        assert!(!id.are_orthogonal(&id, 1e-12).unwrap());
        let other = AlgebraElement::identity(&TracialAlgebra::matrix(3));
        assert_eq!(id.are_orthogonal(&other, 1e-12), Err(FidError::AlgebraMismatch));
    }

    #[test]
    fn arithmetic_rejects_foreign_algebra() {
        let a = AlgebraElement::identity(&m2());
        let b = AlgebraElement::identity(&TracialAlgebra::normalized_matrix(2));
        assert_eq!(a.try_add(&b), Err(FidError::AlgebraMismatch));
        assert_eq!(a.try_mul(&b), Err(FidError::AlgebraMismatch));
        // structurally equal algebras built separately are the same algebra
        let c2 = AlgebraElement::identity(&TracialAlgebra::matrix(2));
        assert!(a.try_add(&c2).is_ok());
    }

    #[test]
    fn density_validation() {
        let alg = m2();
        assert!(DensityElement::new(AlgebraElement::diag(&alg, &[0.5, 0.5]).unwrap()).is_ok());
        assert!(matches!(
            DensityElement::new(AlgebraElement::diag(&alg, &[0.5, 0.6]).unwrap()),
            Err(FidError::NotUnitTrace { .. })
        ));
        assert!(matches!(
            DensityElement::new(AlgebraElement::diag(&alg, &[1.5, -0.5]).unwrap()),
            Err(FidError::NotPositive { .. })
        ));
        let mm = DensityElement::maximally_mixed(&TracialAlgebra::from_pairs(&[(2, 1.0), (3, 0.5)]).unwrap());
        assert!((mm.trace().re - 1.0).abs() < 1e-15);
    }
}
