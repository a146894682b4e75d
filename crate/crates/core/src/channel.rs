//! Linear maps on block algebras, Kraus channels, and the positivity
//! certificates used to classify them.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::algebra::{same_algebra, AlgebraElement, DensityElement, TracialAlgebra, DEFAULT_PSD_TOL};
use crate::error::{FidError, Result};
use crate::fidelity::fidelity;
use crate::linalg::{self, c, CMat, CVec, ONE, ZERO};
use crate::random::{self, trial_rng};

pub const DEFAULT_TP_TOL: f64 = 1e-10;

/// Flattens an element into matrix-unit coordinates (blocks in order,
/// row-major inside each block).
pub fn vectorize(x: &AlgebraElement) -> CVec {
    let alg = x.algebra();
    let mut v = CVec::zeros(alg.linear_dim());
    let mut k = 0;
    for m in x.blocks() {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                v[k] = m[(i, j)];
                k += 1;
            }
        }
    }
    v
}

pub fn unvectorize(algebra: &Arc<TracialAlgebra>, v: &CVec) -> AlgebraElement {
    let mut k = 0;
    AlgebraElement::from_block_fn(algebra.clone(), |_, d| {
        let m = CMat::from_fn(d, d, |i, j| v[k + i * d + j]);
        k += d * d;
        m
    })
}

/// A complex-linear map between block algebras, stored as its matrix in the
/// matrix-unit bases.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    domain: Arc<TracialAlgebra>,
    codomain: Arc<TracialAlgebra>,
    matrix: CMat,
}

impl LinearMap {
    pub fn from_matrix(domain: Arc<TracialAlgebra>, codomain: Arc<TracialAlgebra>, matrix: CMat) -> Result<Self> {
        if matrix.shape() != (codomain.linear_dim(), domain.linear_dim()) {
            return Err(FidError::ShapeMismatch(format!(
                "map matrix must be {}x{}",
                codomain.linear_dim(),
                domain.linear_dim()
            )));
        }
        Ok(Self { domain, codomain, matrix })
    }

    /// Tabulates `f` on every matrix unit of the domain.
    pub fn from_fn(
        domain: &Arc<TracialAlgebra>,
        codomain: &Arc<TracialAlgebra>,
        f: impl Fn(&AlgebraElement) -> AlgebraElement,
    ) -> Self {
        let cols: Vec<CVec> = domain
            .matrix_units()
            .map(|(b, i, j)| vectorize(&f(&AlgebraElement::matrix_unit(domain, b, i, j))))
            .collect();
        let matrix = CMat::from_columns(&cols);
        Self { domain: domain.clone(), codomain: codomain.clone(), matrix }
    }

    pub fn domain(&self) -> &Arc<TracialAlgebra> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<TracialAlgebra> {
        &self.codomain
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn apply(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        if !same_algebra(x.algebra(), &self.domain) {
            return Err(FidError::AlgebraMismatch);
        }
        Ok(unvectorize(&self.codomain, &(&self.matrix * vectorize(x))))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &LinearMap) -> Result<LinearMap> {
        if !same_algebra(&inner.codomain, &self.domain) {
            return Err(FidError::AlgebraMismatch);
        }
        Ok(Self { domain: inner.domain.clone(), codomain: self.codomain.clone(), matrix: &self.matrix * &inner.matrix })
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &LinearMap, beta: f64) -> Result<LinearMap> {
        if !same_algebra(&self.domain, &other.domain) || !same_algebra(&self.codomain, &other.codomain) {
            return Err(FidError::AlgebraMismatch);
        }
        Ok(Self {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: self.matrix.scale(alpha) + other.matrix.scale(beta),
        })
    }

    pub fn identity(algebra: &Arc<TracialAlgebra>) -> Self {
        let n = algebra.linear_dim();
        Self { domain: algebra.clone(), codomain: algebra.clone(), matrix: linalg::identity(n) }
    }

    /// `x ↦ λx`.
    pub fn scaled_identity(algebra: &Arc<TracialAlgebra>, lambda: f64) -> Self {
        let mut m = Self::identity(algebra);
        m.matrix = m.matrix.scale(lambda);
        m
    }

    /// Blockwise transpose.
    pub fn transpose(algebra: &Arc<TracialAlgebra>) -> Self {
        Self::from_fn(algebra, algebra, |x| x.map_blocks(|m| m.transpose()))
    }

    /// `x ↦ τ(x)·1/τ(1)`.
    pub fn trace_collapse(algebra: &Arc<TracialAlgebra>) -> Self {
        let one = AlgebraElement::identity(algebra).scale_real(1.0 / algebra.total_trace());
        Self::from_fn(algebra, algebra, |x| one.scale(x.trace()))
    }

    /// `x ↦ (1 − p)x + p·τ(x)·1/τ(1)`.
    pub fn depolarizing(algebra: &Arc<TracialAlgebra>, p: f64) -> Self {
        Self::identity(algebra).combine(1.0 - p, &Self::trace_collapse(algebra), p).expect("same algebra")
    }

    /// `x ↦ (xᵀ + τ(x)·1/τ(1)) / 2`: on `M_2` a Schwarz map that is not
    /// 2-positive.
    pub fn transpose_average(algebra: &Arc<TracialAlgebra>) -> Self {
        Self::transpose(algebra).combine(0.5, &Self::trace_collapse(algebra), 0.5).expect("same algebra")
    }

    /// `x ↦ u x u*`.
    pub fn conjugation(u: &AlgebraElement) -> Self {
        let alg = u.algebra();
        let ua = u.adjoint();
        Self::from_fn(alg, alg, |x| u.try_mul(x).and_then(|y| y.try_mul(&ua)).expect("same algebra"))
    }

    /// Adjoint with respect to the traces: `τ(Φ(x)·y) = τ(x·Φ†(y))`.
    pub fn trace_adjoint(&self) -> LinearMap {
        let dom = self.domain.clone();
        let images: Vec<(usize, usize, usize, AlgebraElement)> = dom
            .matrix_units()
            .map(|(b, i, j)| {
                let col = self.matrix.column(dom.basis_offset(b) + i * dom.blocks()[b].dim + j).into_owned();
                (b, i, j, unvectorize(&self.codomain, &col))
            })
            .collect();
        LinearMap::from_fn(&self.codomain, &self.domain, |y| {
            let mut blocks: Vec<CMat> = dom.blocks().iter().map(|b| CMat::zeros(b.dim, b.dim)).collect();
            for (b, i, j, img) in &images {
                let w = dom.blocks()[*b].weight;
                blocks[*b][(*j, *i)] = img.trace_product(y).expect("same algebra") / w;
            }
            AlgebraElement::from_blocks(dom.clone(), blocks).expect("shapes match")
        })
    }

    /// Choi matrix `Σ e_ij ⊗ Φ(e_ij)` of a map between single-block algebras.
    pub fn choi(&self) -> Result<ChoiMatrix> {
        if !self.domain.is_single_block() || !self.codomain.is_single_block() {
            return Err(FidError::MultiBlockUnsupported);
        }
        Ok(self.choi_block(0, 0))
    }

    /// Choi matrix of the component from domain block `b_in` to codomain
    /// block `b_out`.
    pub fn choi_block(&self, b_in: usize, b_out: usize) -> ChoiMatrix {
        let d = self.domain.blocks()[b_in].dim;
        let n = self.codomain.blocks()[b_out].dim;
        let in_off = self.domain.basis_offset(b_in);
        let out_off = self.codomain.basis_offset(b_out);
        let matrix = CMat::from_fn(d * n, d * n, |r, col| {
            let (i, k) = (r / n, r % n);
            let (j, l) = (col / n, col % n);
            self.matrix[(out_off + k * n + l, in_off + i * d + j)]
        });
        ChoiMatrix { matrix, dim_in: d, dim_out: n }
    }

    /// Choi matrices of every block component, keyed by `(b_in, b_out)`.
    pub fn choi_blocks(&self) -> Vec<((usize, usize), ChoiMatrix)> {
        let mut out = Vec::new();
        for b_in in 0..self.domain.num_blocks() {
            for b_out in 0..self.codomain.num_blocks() {
                out.push(((b_in, b_out), self.choi_block(b_in, b_out)));
            }
        }
        out
    }

    /// Complete positivity via the Choi matrices of all block components.
    pub fn is_completely_positive(&self, psd_tol: f64) -> CpCertificate {
        let min = self.choi_blocks().iter().map(|(_, ch)| ch.min_eigenvalue()).fold(f64::INFINITY, f64::min);
        CpCertificate { verdict: min >= -psd_tol, min_choi_eigenvalue: min }
    }

    /// `max |τ(E(e_ij)) − τ(e_ij)|` over all matrix units of the domain.
    pub fn trace_defect(&self) -> f64 {
        let alg = &self.domain;
        alg.matrix_units()
            .map(|(b, i, j)| {
                let e = AlgebraElement::matrix_unit(alg, b, i, j);
                let image = unvectorize(
                    &self.codomain,
                    &self.matrix.column(alg.basis_offset(b) + i * alg.blocks()[b].dim + j).into_owned(),
                );
                (image.trace() - e.trace()).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_defect() <= tol
    }

    /// Samples `x` and checks `E(x*x) − E(x*)E(x) ≥ 0`. Only refutations
    /// are conclusive.
    pub fn is_schwarz_sampled(&self, n_samples: usize, seed: u64) -> SchwarzCertificate {
        let mut worst = 0.0f64;
        let mut counterexample = None;
        let mut worst_x = None;
        for t in 0..n_samples {
            let mut rng = trial_rng(seed, t as u64);
            let x = sample_probe(&self.domain, &mut rng);
            let xs = x.adjoint();
            let lhs = self.apply(&xs.try_mul(&x).expect("same algebra")).expect("domain element");
            let rhs = self.apply(&xs).and_then(|a| a.try_mul(&self.apply(&x)?)).expect("domain element");
            let gap = lhs.try_sub(&rhs).expect("same algebra").hermitian_part();
            let scale = lhs.norm().max(1.0);
            let violation = -gap.min_eigenvalue() / scale;
            if violation > worst {
                worst = violation;
                worst_x = Some(x.clone());
            }
            if violation > 1e-10 && counterexample.is_none() {
                counterexample = Some(x);
            }
        }
        let verdict = counterexample.is_none();
        SchwarzCertificate {
            verdict,
            worst_violation: worst,
            counterexample: if verdict { None } else { worst_x },
            n_samples,
        }
    }

    /// Samples orthogonal positive pairs from complementary spectral
    /// projections and checks that their images stay orthogonal.
    pub fn is_order_zero_sampled(&self, n_samples: usize, seed: u64) -> OrderZeroCertificate {
        let mut worst = 0.0f64;
        let mut witness = None;
        for t in 0..n_samples {
            let mut rng = trial_rng(seed, t as u64);
            let (a, b) = random::orthogonal_pair(&self.domain, &mut rng);
            let ea = self.apply(&a).expect("domain element");
            let eb = self.apply(&b).expect("domain element");
            let scale = (ea.norm() * eb.norm()).max(1.0);
            let defect = [ea.try_mul(&eb), eb.try_mul(&ea), ea.adjoint().try_mul(&eb), ea.try_mul(&eb.adjoint())]
                .into_iter()
                .map(|p| p.expect("same algebra").norm() / scale)
                .fold(0.0, f64::max);
            if defect > worst {
                worst = defect;
                if defect > 1e-8 {
                    witness = Some((a.into_element(), b.into_element()));
                }
            }
        }
        OrderZeroCertificate { verdict: witness.is_none(), worst_defect: worst, witness, n_samples }
    }

    /// Searches for a violation of k-positivity with random rank-one
    /// positives in `M_k(M_d)`. Finding none proves nothing.
    pub fn k_positivity_sampled(&self, k: usize, n_samples: usize, seed: u64) -> Result<KPositivityCertificate> {
        if !self.domain.is_single_block() || !self.codomain.is_single_block() {
            return Err(FidError::MultiBlockUnsupported);
        }
        let d = self.domain.blocks()[0].dim;
        let n = self.codomain.blocks()[0].dim;
        let mut min = f64::INFINITY;
        let mut counterexample = None;
        for t in 0..n_samples {
            let mut rng = trial_rng(seed, t as u64);
            let v = random::ginibre(k * d, 1, &mut rng);
            let big = &v * v.adjoint();
            let mut out = CMat::zeros(k * n, k * n);
            for i in 0..k {
                for j in 0..k {
                    let entry = big.view((i * d, j * d), (d, d)).into_owned();
                    let x = AlgebraElement::from_matrix(self.domain.clone(), entry)?;
                    let image = self.apply(&x)?;
                    out.view_mut((i * n, j * n), (n, n)).copy_from(image.block(0));
                }
            }
            let scale = linalg::spectral_norm(&out).max(1.0);
            let e = linalg::min_eigenvalue(&out) / scale;
            if e < min {
                min = e;
                if e < -DEFAULT_PSD_TOL {
                    counterexample = Some(big);
                }
            }
        }
        Ok(KPositivityCertificate { k, verdict: counterexample.is_none(), min_eigenvalue: min, counterexample })
    }

    /// Smallest singular value of the map's basis matrix.
    pub fn smallest_singular_value(&self) -> f64 {
        let s = linalg::singular_values(&self.matrix);
        if self.matrix.nrows() < self.matrix.ncols() {
            return 0.0;
        }
        s.last().copied().unwrap_or(0.0)
    }
}

/// Random probe for sampled certificates: Ginibre, unitary or rank-one,
/// rescaled to unit norm.
fn sample_probe(algebra: &Arc<TracialAlgebra>, rng: &mut impl Rng) -> AlgebraElement {
    let x = match rng.random_range(0..3) {
        0 => random::random_element(algebra, rng),
        1 => random::random_unitary(algebra, rng),
        _ => AlgebraElement::from_block_fn(algebra.clone(), |_, d| {
            let u = random::ginibre(d, 1, rng);
            let v = random::ginibre(d, 1, rng);
            &u * v.adjoint()
        }),
    };
    let n = x.norm();
    x.scale_real(1.0 / n)
}

/// Choi matrix with the convention `C = Σ e_ij ⊗ Φ(e_ij)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    pub matrix: CMat,
    pub dim_in: usize,
    pub dim_out: usize,
}

impl ChoiMatrix {
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    pub fn hermitian_defect(&self) -> f64 {
        linalg::max_abs(&(&self.matrix - self.matrix.adjoint()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CpCertificate {
    pub verdict: bool,
    pub min_choi_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct SchwarzCertificate {
    pub verdict: bool,
    /// Largest normalised negative eigenvalue of `E(x*x) − E(x*)E(x)`.
    pub worst_violation: f64,
    pub counterexample: Option<AlgebraElement>,
    pub n_samples: usize,
}

#[derive(Debug, Clone)]
pub struct OrderZeroCertificate {
    pub verdict: bool,
    pub worst_defect: f64,
    pub witness: Option<(AlgebraElement, AlgebraElement)>,
    pub n_samples: usize,
}

#[derive(Debug, Clone)]
pub struct KPositivityCertificate {
    pub k: usize,
    pub verdict: bool,
    pub min_eigenvalue: f64,
    pub counterexample: Option<CMat>,
}

/// `ρ ↦ Σ a_k ρ a_k*` with `Σ a_k* a_k = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    algebra: Arc<TracialAlgebra>,
    kraus: Vec<AlgebraElement>,
}

impl KrausChannel {
    pub fn new(algebra: Arc<TracialAlgebra>, kraus: Vec<AlgebraElement>) -> Result<Self> {
        Self::with_tolerance(algebra, kraus, DEFAULT_TP_TOL)
    }

    pub fn with_tolerance(algebra: Arc<TracialAlgebra>, kraus: Vec<AlgebraElement>, tp_tol: f64) -> Result<Self> {
        if kraus.is_empty() {
            return Err(FidError::NotTracePreserving { defect: 1.0 });
        }
        let mut sum = AlgebraElement::zeros(&algebra);
        for a in &kraus {
            if !same_algebra(a.algebra(), &algebra) {
                return Err(FidError::AlgebraMismatch);
            }
            sum = sum.try_add(&a.adjoint().try_mul(a)?)?;
        }
        let defect = sum.try_sub(&AlgebraElement::identity(&algebra))?.norm();
        if defect > tp_tol {
            return Err(FidError::NotTracePreserving { defect });
        }
        Ok(Self { algebra, kraus })
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.algebra
    }

    pub fn kraus(&self) -> &[AlgebraElement] {
        &self.kraus
    }

    pub fn identity(algebra: &Arc<TracialAlgebra>) -> Self {
        Self { algebra: algebra.clone(), kraus: vec![AlgebraElement::identity(algebra)] }
    }

    pub fn unitary(u: AlgebraElement) -> Result<Self> {
        Self::with_tolerance(u.algebra().clone(), vec![u], 1e-9)
    }

    /// Depolarising channel `(1 − p)ρ + p·tr(ρ)1/d` on a single-block
    /// algebra, with Weyl (clock-and-shift) Kraus operators.
    pub fn depolarizing(algebra: &Arc<TracialAlgebra>, p: f64) -> Result<Self> {
        if !algebra.is_single_block() {
            return Err(FidError::MultiBlockUnsupported);
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(FidError::InvalidConfig(format!("depolarizing parameter {p} outside [0, 1]")));
        }
        let d = algebra.blocks()[0].dim;
        let n2 = (d * d) as f64;
        let omega = |k: usize| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / d as f64;
            c(t.cos(), t.sin())
        };
        let mut kraus = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                let coeff = if a == 0 && b == 0 { 1.0 - p + p / n2 } else { p / n2 };
                if coeff == 0.0 {
                    continue;
                }
                // W_ab = X^a Z^b, X|j> = |j+1>, Z|j> = ω^j |j>
                let w = CMat::from_fn(d, d, |r, col| if r == (col + a) % d { omega(b * col % d) } else { ZERO });
                kraus.push(AlgebraElement::from_matrix(algebra.clone(), w.scale(coeff.sqrt()))?);
            }
        }
        Self::with_tolerance(algebra.clone(), kraus, 1e-9)
    }

    /// Qubit depolarising channel with Pauli Kraus operators
    /// `{√(1−3p/4) I, √(p/4) X, √(p/4) Y, √(p/4) Z}`.
    pub fn depolarizing_qubit(p: f64) -> Result<Self> {
        let alg = TracialAlgebra::matrix(2);
        let i = CMat::identity(2, 2);
        let x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let y = CMat::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]);
        let z = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(-1.0, 0.0)]);
        let weights = [1.0 - 0.75 * p, 0.25 * p, 0.25 * p, 0.25 * p];
        let kraus = [i, x, y, z]
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w > 0.0)
            .map(|(m, w)| AlgebraElement::from_matrix(alg.clone(), m.scale(w.sqrt())))
            .collect::<Result<Vec<_>>>()?;
        Self::with_tolerance(alg, kraus, 1e-9)
    }

    /// Qubit amplitude damping with decay probability `gamma`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        let alg = TracialAlgebra::matrix(2);
        let a0 = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c((1.0 - gamma).sqrt(), 0.0)]);
        let a1 = CMat::from_row_slice(2, 2, &[ZERO, c(gamma.sqrt(), 0.0), ZERO, ZERO]);
        Self::with_tolerance(
            alg.clone(),
            vec![AlgebraElement::from_matrix(alg.clone(), a0)?, AlgebraElement::from_matrix(alg, a1)?],
            1e-9,
        )
    }

    /// `x ↦ τ(x)·1/τ(1)` on a single block, as the fully depolarising channel.
    pub fn trace_collapse(algebra: &Arc<TracialAlgebra>) -> Result<Self> {
        Self::depolarizing(algebra, 1.0)
    }

    /// Random CPTP map from a Haar isometry `V: C^d → C^d ⊗ C^K` cut into
    /// `K` row blocks (one Stinespring dilation per algebra block).
    pub fn random_cptp(algebra: &Arc<TracialAlgebra>, n_kraus: usize, rng: &mut impl Rng) -> Self {
        let n_kraus = n_kraus.max(1);
        let isometries: Vec<CMat> =
            algebra.blocks().iter().map(|b| random::haar_isometry(b.dim * n_kraus, b.dim, rng)).collect();
        let kraus = (0..n_kraus)
            .map(|k| {
                AlgebraElement::from_block_fn(algebra.clone(), |bi, d| {
                    isometries[bi].view((k * d, 0), (d, d)).into_owned()
                })
            })
            .collect();
        Self { algebra: algebra.clone(), kraus }
    }

    /// Random mixed-unitary (hence unital) channel with `n` Haar unitaries.
    pub fn random_mixed_unitary(algebra: &Arc<TracialAlgebra>, n: usize, rng: &mut impl Rng) -> Self {
        let weights: Vec<f64> = (0..n.max(1)).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let kraus =
            weights.iter().map(|w| random::random_unitary(algebra, rng).scale_real((w / total).sqrt())).collect();
        Self { algebra: algebra.clone(), kraus }
    }

    /// Convex combination `Σ p_i E_i` (weights are renormalised).
    pub fn mixture(parts: &[(f64, &KrausChannel)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| FidError::InvalidConfig("empty mixture".into()))?;
        let algebra = first.1.algebra.clone();
        let total: f64 = parts.iter().map(|p| p.0).sum();
        let mut kraus = Vec::new();
        for (w, ch) in parts {
            if !same_algebra(&ch.algebra, &algebra) {
                return Err(FidError::AlgebraMismatch);
            }
            kraus.extend(ch.kraus.iter().map(|a| a.scale_real((w / total).sqrt())));
        }
        Self::with_tolerance(algebra, kraus, 1e-9)
    }

    pub fn apply(&self, rho: &AlgebraElement) -> Result<AlgebraElement> {
        if !same_algebra(rho.algebra(), &self.algebra) {
            return Err(FidError::AlgebraMismatch);
        }
        let mut out = AlgebraElement::zeros(&self.algebra);
        for a in &self.kraus {
            out = out.try_add(&a.try_mul(rho)?.try_mul(&a.adjoint())?)?;
        }
        Ok(out)
    }

    pub fn apply_density(&self, rho: &DensityElement) -> Result<DensityElement> {
        DensityElement::new(self.apply(rho)?.hermitian_part())
    }

    /// The Schrödinger-picture map as a [`LinearMap`].
    pub fn to_map(&self) -> LinearMap {
        LinearMap::from_fn(&self.algebra, &self.algebra, |x| self.apply(x).expect("same algebra"))
    }

    /// The Heisenberg-picture dual `x ↦ Σ a_k* x a_k`.
    pub fn dual(&self) -> LinearMap {
        LinearMap::from_fn(&self.algebra, &self.algebra, |x| {
            let mut out = AlgebraElement::zeros(&self.algebra);
            for a in &self.kraus {
                out = out
                    .try_add(&a.adjoint().try_mul(x).and_then(|y| y.try_mul(a)).expect("same algebra"))
                    .expect("same algebra");
            }
            out
        })
    }

    /// `‖Σ a_k* a_k − 1‖`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let mut sum = AlgebraElement::zeros(&self.algebra);
        for a in &self.kraus {
            sum = sum.try_add(&a.adjoint().try_mul(a).expect("same algebra")).expect("same algebra");
        }
        sum.try_sub(&AlgebraElement::identity(&self.algebra)).expect("same algebra").norm()
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_preservation_defect() <= tol
    }

    /// Samples pairs and, if fidelity is preserved, reconstructs the unitary.
    pub fn recover_unitary(&self, cfg: &RecoveryConfig) -> Result<RecoveredUnitary> {
        if !self.algebra.is_single_block() {
            return Err(FidError::MultiBlockUnsupported);
        }
        let map = self.to_map();
        let probe = preservation_probe(&map, cfg.n_pairs, cfg.seed)?;
        if probe.max_abs_delta > cfg.preservation_tol {
            return Err(FidError::NotFidelityPreserving { max_defect: probe.max_abs_delta });
        }
        reconstruct_unitary(&map, cfg.tol)
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryConfig {
    /// Residual bound on `‖E(e_ij) − u e_ij u*‖` and `‖u*u − 1‖`.
    pub tol: f64,
    /// Bound on `|ΔF|` for the sampled preservation test.
    pub preservation_tol: f64,
    pub n_pairs: usize,
    pub seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self { tol: 1e-8, preservation_tol: 1e-8, n_pairs: 48, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveredUnitary {
    pub u: AlgebraElement,
    /// `max_ij ‖E(e_ij) − u e_ij u*‖_F`.
    pub residual: f64,
    /// `‖u*u − 1‖_F`.
    pub unitarity_defect: f64,
}

/// Reads `u` off the images of matrix units: `E(e_11) = u₁u₁*` fixes the first
/// column up to phase and `E(e_1j)* u₁ = u_j` fixes the rest. The first
/// nonzero entry of column one is made real positive.
pub fn reconstruct_unitary(map: &LinearMap, tol: f64) -> Result<RecoveredUnitary> {
    let alg = map.domain().clone();
    if !alg.is_single_block() || !same_algebra(&alg, map.codomain()) {
        return Err(FidError::MultiBlockUnsupported);
    }
    let d = alg.blocks()[0].dim;
    let image = |i: usize, j: usize| -> Result<CMat> {
        Ok(map.apply(&AlgebraElement::matrix_unit(&alg, 0, i, j))?.into_blocks().remove(0))
    };
    let e11 = image(0, 0)?;
    let (vals, vecs) = linalg::eigh(&e11);
    let top = vals[d - 1];
    if top.is_nan() || top <= 0.0 {
        return Err(FidError::NotUnitaryImplementable { residual: f64::INFINITY });
    }
    let mut u1: CVec = vecs.column(d - 1).scale(top.sqrt());
    if let Some(first) = u1.iter().find(|z| z.norm() > 1e-12).copied() {
        let phase = first.conj() / first.norm();
        u1 *= phase;
    }
    let n1 = u1.norm_squared();
    let mut cols = Vec::with_capacity(d);
    for j in 0..d {
        let col: CVec = if j == 0 { u1.clone() } else { image(0, j)?.adjoint() * &u1 / c(n1, 0.0) };
        cols.push(col);
    }
    let u = CMat::from_columns(&cols);
    let ua = u.adjoint();
    let mut residual = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let mut e = CMat::zeros(d, d);
            e[(i, j)] = ONE;
            let predicted = &u * e * &ua;
            residual = residual.max(linalg::frobenius_norm(&(image(i, j)? - predicted)));
        }
    }
    let unitarity_defect = linalg::frobenius_norm(&(&ua * &u - linalg::identity(d)));
    if residual > tol || unitarity_defect > tol {
        return Err(FidError::NotUnitaryImplementable { residual: residual.max(unitarity_defect) });
    }
    Ok(RecoveredUnitary { u: AlgebraElement::from_matrix(alg, u)?, residual, unitarity_defect })
}

/// `min_θ ‖a − e^{iθ} b‖_F`.
pub fn distance_up_to_phase(a: &AlgebraElement, b: &AlgebraElement) -> Result<f64> {
    let overlap: num_complex::Complex64 =
        a.blocks().iter().zip(b.blocks()).map(|(x, y)| (y.adjoint() * x).trace()).fold(ZERO, |s, z| s + z);
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
    let diff = a.try_sub(&b.scale(phase))?;
    Ok(diff.blocks().iter().map(linalg::frobenius_norm).map(|x| x * x).sum::<f64>().sqrt())
}

/// Sampled pair on which fidelity changed the most.
#[derive(Debug, Clone)]
pub struct PreservationWitness {
    pub sigma: DensityElement,
    pub rho: DensityElement,
    pub fidelity_before: f64,
    pub fidelity_after: f64,
}

#[derive(Debug, Clone)]
pub struct PreservationProbe {
    pub n_pairs: usize,
    pub max_abs_delta: f64,
    pub max_increase: f64,
    /// Pair with the largest increase `F(E σ, E ρ) − F(σ, ρ)`.
    pub witness: Option<PreservationWitness>,
}

/// Samples density pairs (full-rank, orthogonal and pure, in rotation) and
/// records how much `map` changes their fidelity.
pub fn preservation_probe(map: &LinearMap, n_pairs: usize, seed: u64) -> Result<PreservationProbe> {
    let alg = map.domain().clone();
    let total_dim: usize = alg.blocks().iter().map(|b| b.dim).sum();
    let mut max_abs: f64 = 0.0;
    let mut max_inc = f64::NEG_INFINITY;
    let mut witness = None;
    for t in 0..n_pairs {
        let mut rng = trial_rng(seed, t as u64);
        let (s, r) = match t % 3 {
            1 if total_dim >= 2 => random::orthogonal_pair(&alg, &mut rng),
            2 => (random::random_density_rank(&alg, 1, &mut rng), random::random_density_rank(&alg, 1, &mut rng)),
            _ => (random::random_density(&alg, &mut rng), random::random_density(&alg, &mut rng)),
        };
        let before = fidelity(&s, &r)?;
        let es = DensityElement::with_tolerances(map.apply(&s)?.hermitian_part(), DEFAULT_PSD_TOL, 1e-8)?;
        let er = DensityElement::with_tolerances(map.apply(&r)?.hermitian_part(), DEFAULT_PSD_TOL, 1e-8)?;
        let after = fidelity(&es, &er)?;
        let delta = after - before;
        max_abs = max_abs.max(delta.abs());
        if delta > max_inc {
            max_inc = delta;
            witness = Some(PreservationWitness { sigma: s, rho: r, fidelity_before: before, fidelity_after: after });
        }
    }
    Ok(PreservationProbe { n_pairs, max_abs_delta: max_abs, max_increase: max_inc, witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::rng_from_seed;

    fn m2() -> Arc<TracialAlgebra> {
        TracialAlgebra::matrix(2)
    }

    fn pauli_x() -> AlgebraElement {
        AlgebraElement::from_matrix(m2(), CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])).unwrap()
    }

    fn close(a: &AlgebraElement, b: &AlgebraElement, tol: f64) -> bool {
        a.try_sub(b).unwrap().max_abs() <= tol
    }

    #[test]
    fn apply_examples() {
        let mut rng = rng_from_seed(1);
        let rho = random::random_density(&m2(), &mut rng);
        assert!(close(&KrausChannel::identity(&m2()).apply(&rho).unwrap(), &rho, 1e-15));
        let u = random::random_unitary(&m2(), &mut rng);
        let want = u.try_mul(&rho).unwrap().try_mul(&u.adjoint()).unwrap();
        assert!(close(&KrausChannel::unitary(u).unwrap().apply(&rho).unwrap(), &want, 1e-14));
        // Pauli twirl oracle: average of P ρ P over the Pauli group is tr(ρ) I/2
        let dep = KrausChannel::depolarizing_qubit(1.0).unwrap();
        let half = AlgebraElement::identity(&m2()).scale_real(0.5);
        assert!(close(&dep.apply(&rho).unwrap(), &half, 1e-14));
    }

    #[test]
    fn weyl_depolarizing_matches_map_form() {
        let mut rng = rng_from_seed(2);
        for d in [2, 3, 4] {
            let alg = TracialAlgebra::matrix(d);
            for p in [0.0, 0.3, 1.0] {
                let ch = KrausChannel::depolarizing(&alg, p).unwrap();
                let map = LinearMap::depolarizing(&alg, p);
                let x = random::random_element(&alg, &mut rng);
                assert!(close(&ch.apply(&x).unwrap(), &map.apply(&x).unwrap(), 1e-13));
            }
        }
        let q = KrausChannel::depolarizing_qubit(0.4).unwrap().to_map();
        assert!(linalg::max_abs(&(q.matrix() - LinearMap::depolarizing(&m2(), 0.4).matrix())) < 1e-14);
    }

    #[test]
    fn kraus_rejects_non_trace_preserving() {
        let half = AlgebraElement::identity(&m2()).scale_real(0.5);
        assert!(matches!(KrausChannel::new(m2(), vec![half]), Err(FidError::NotTracePreserving { .. })));
    }

    #[test]
    fn dual_examples() {
        let alg = TracialAlgebra::from_pairs(&[(2, 1.0), (3, 0.5)]).unwrap();
        assert_eq!(KrausChannel::identity(&alg).dual(), LinearMap::identity(&alg));
        let mut rng = rng_from_seed(3);
        let u = random::random_unitary(&m2(), &mut rng);
        let dual = KrausChannel::unitary(u.clone()).unwrap().dual();
        let x = random::random_element(&m2(), &mut rng);
        let want = u.adjoint().try_mul(&x).unwrap().try_mul(&u).unwrap();
        assert!(close(&dual.apply(&x).unwrap(), &want, 1e-14));

        let ch = KrausChannel::random_cptp(&alg, 3, &mut rng);
        let dual = ch.dual();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let s = random::random_element(&alg, &mut rng);
            let x = random::random_element(&alg, &mut rng);
            let lhs = ch.apply(&s).unwrap().trace_product(&x).unwrap();
            let rhs = s.trace_product(&dual.apply(&x).unwrap()).unwrap();
            worst = worst.max((lhs - rhs).norm());
        }
        assert!(worst <= 1e-10, "{worst}");
        let one = AlgebraElement::identity(&alg);
        assert!(close(&dual.apply(&one).unwrap(), &one, 1e-10));
    }

    #[test]
    fn trace_adjoint_matches_kraus_dual() {
        let mut rng = rng_from_seed(10);
        let alg = TracialAlgebra::from_pairs(&[(2, 1.0), (3, 0.25)]).unwrap();
        let ch = KrausChannel::random_cptp(&alg, 2, &mut rng);
        let diff = ch.to_map().trace_adjoint().matrix() - ch.dual().matrix();
        assert!(linalg::max_abs(&diff) < 1e-12);
        let t = LinearMap::transpose(&alg);
        assert!(linalg::max_abs(&(t.trace_adjoint().matrix() - t.matrix())) < 1e-15);
    }

    #[test]
    fn choi_examples() {
        let id = LinearMap::identity(&m2()).choi().unwrap();
        let ev = id.eigenvalues();
        assert!((ev[3] - 2.0).abs() < 1e-14 && ev[..3].iter().all(|e| e.abs() < 1e-14));

        let t = LinearMap::transpose(&m2()).choi().unwrap();
        let ev = t.eigenvalues();
        let want = [-1.0, 1.0, 1.0, 1.0];
        assert!(ev.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-14));
        // the swap operator
        let swap = CMat::from_fn(4, 4, |r, col| if (r / 2, r % 2) == (col % 2, col / 2) { ONE } else { ZERO });
        assert_eq!(t.matrix, swap);

        let collapse = LinearMap::from_fn(&m2(), &m2(), |x| AlgebraElement::identity(&m2()).scale(x.trace() * 0.5));
        assert!(linalg::max_abs(&(collapse.choi().unwrap().matrix - linalg::identity(4).scale(0.5))) < 1e-15);

        let multi = TracialAlgebra::from_pairs(&[(1, 1.0), (1, 1.0)]).unwrap();
        assert_eq!(LinearMap::identity(&multi).choi(), Err(FidError::MultiBlockUnsupported));
    }

    #[test]
    fn cp_examples() {
        let cert = LinearMap::identity(&m2()).is_completely_positive(1e-10);
        assert!(cert.verdict && cert.min_choi_eigenvalue.abs() < 1e-14);
        let cert = LinearMap::transpose(&m2()).is_completely_positive(1e-10);
        assert!(!cert.verdict && (cert.min_choi_eigenvalue + 1.0).abs() < 1e-14);
        let cert = LinearMap::transpose_average(&m2()).is_completely_positive(1e-10);
        assert!(!cert.verdict && (cert.min_choi_eigenvalue + 0.25).abs() < 1e-12);
        // multi-block: per-block components
        let alg = TracialAlgebra::from_pairs(&[(2, 1.0), (2, 0.5)]).unwrap();
        assert!(LinearMap::identity(&alg).is_completely_positive(1e-10).verdict);
        assert!(!LinearMap::transpose(&alg).is_completely_positive(1e-10).verdict);
    }

    #[test]
    fn schwarz_examples() {
        let cert = LinearMap::identity(&m2()).is_schwarz_sampled(200, 1);
        assert!(cert.verdict && cert.worst_violation < 1e-14);
        let cert = LinearMap::transpose_average(&m2()).is_schwarz_sampled(2000, 2);
        assert!(cert.verdict, "worst {}", cert.worst_violation);
        let cert = LinearMap::scaled_identity(&m2(), 2.0).is_schwarz_sampled(10, 3);
        assert!(!cert.verdict);
        let x = cert.counterexample.unwrap();
        // 2x*x − 4x*x = −2x*x is not positive
        assert!(x.norm() > 0.0);
        // plain transpose is not Schwarz either
        assert!(!LinearMap::transpose(&m2()).is_schwarz_sampled(200, 4).verdict);
    }

    #[test]
    fn trace_preservation_examples() {
        let mut rng = rng_from_seed(5);
        let ch = KrausChannel::random_cptp(&TracialAlgebra::matrix(3), 2, &mut rng);
        assert!(ch.is_trace_preserving(1e-10));
        assert!(ch.to_map().is_trace_preserving(1e-10));
        assert!(!LinearMap::scaled_identity(&m2(), 0.5).is_trace_preserving(1e-10));
        assert!(LinearMap::transpose(&m2()).is_trace_preserving(1e-10));
        let alg = TracialAlgebra::from_pairs(&[(2, 1.0), (3, 0.25)]).unwrap();
        assert!(LinearMap::trace_collapse(&alg).is_trace_preserving(1e-10));
        assert!(LinearMap::transpose(&alg).is_trace_preserving(1e-10));
    }

    #[test]
    fn order_zero_examples() {
        let mut rng = rng_from_seed(6);
        let u = random::random_unitary(&TracialAlgebra::matrix(3), &mut rng);
        assert!(LinearMap::conjugation(&u).is_order_zero_sampled(50, 1).verdict);
        let cert = LinearMap::depolarizing(&m2(), 0.5).is_order_zero_sampled(20, 2);
        assert!(!cert.verdict && cert.witness.is_some());
        assert!(LinearMap::scaled_identity(&m2(), 0.7).is_order_zero_sampled(20, 3).verdict);
    }

    #[test]
    fn k_positivity_search_finds_transpose_violation() {
        let cert = LinearMap::transpose(&m2()).k_positivity_sampled(2, 50, 7).unwrap();
        assert!(!cert.verdict && cert.counterexample.is_some());
        let cert = LinearMap::identity(&m2()).k_positivity_sampled(2, 50, 7).unwrap();
        assert!(cert.verdict);
        // transpose is 1-positive
        assert!(LinearMap::transpose(&m2()).k_positivity_sampled(1, 50, 7).unwrap().verdict);
    }

    #[test]
    fn recover_unitary_examples() {
        let cfg = RecoveryConfig::default();
        let x = pauli_x();
        let rec = KrausChannel::unitary(x.clone()).unwrap().recover_unitary(&cfg).unwrap();
        assert!(rec.residual <= 1e-12);
        assert!(distance_up_to_phase(&rec.u, &x).unwrap() < 1e-12);

        let s = 0.5f64.sqrt();
        let v =
            AlgebraElement::from_matrix(m2(), CMat::from_row_slice(2, 2, &[c(s, s), ZERO, ZERO, c(s, -s)])).unwrap();
        let rec = KrausChannel::unitary(v.clone()).unwrap().recover_unitary(&cfg).unwrap();
        assert!(distance_up_to_phase(&rec.u, &v).unwrap() < 1e-12);
        // phase convention: first nonzero entry of column one is real positive
        let first = rec.u.block(0)[(0, 0)];
        assert!(first.im.abs() < 1e-15 && first.re > 0.0);

        let dep = KrausChannel::depolarizing_qubit(0.5).unwrap();
        assert!(matches!(dep.recover_unitary(&cfg), Err(FidError::NotFidelityPreserving { .. })));
        // transpose preserves fidelity on M_2 but is not implemented by a unitary
        let t = LinearMap::transpose(&m2());
        assert!(preservation_probe(&t, 30, 1).unwrap().max_abs_delta < 1e-8);
        assert!(matches!(reconstruct_unitary(&t, 1e-8), Err(FidError::NotUnitaryImplementable { .. })));
    }

    #[test]
    fn injectivity_examples() {
        let mut rng = rng_from_seed(8);
        let u = random::random_unitary(&TracialAlgebra::matrix(3), &mut rng);
        assert!((LinearMap::conjugation(&u).smallest_singular_value() - 1.0).abs() < 1e-12);
        assert!(LinearMap::trace_collapse(&m2()).smallest_singular_value() < 1e-12);
        assert!((LinearMap::transpose(&m2()).smallest_singular_value() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mixture_and_amplitude_damping_are_channels() {
        let mut rng = rng_from_seed(9);
        let u = KrausChannel::unitary(random::random_unitary(&m2(), &mut rng)).unwrap();
        let d = KrausChannel::depolarizing_qubit(1.0).unwrap();
        let mix = KrausChannel::mixture(&[(0.99, &u), (0.01, &d)]).unwrap();
        assert!(mix.is_trace_preserving(1e-12));
        assert!(KrausChannel::amplitude_damping(0.3).unwrap().is_trace_preserving(1e-12));
        let rho = random::random_density(&m2(), &mut rng);
        let out = mix.apply_density(&rho).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-12);
    }
}
