//! Matrix order on the predual: `[ω_ij]` is positive when
//! `x ↦ [ω_ij(x)]` is completely positive. Functionals are stored through
//! their trace-duality representatives `ω(x) = τ(x·y)`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{same_algebra, AlgebraElement, TracialAlgebra};
use crate::channel::{CpCertificate, KrausChannel, LinearMap};
use crate::error::{FidError, Result};
use crate::linalg::{self, CMat};
use crate::random::{self, trial_rng};

/// Functional `x ↦ τ(x·y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalRep {
    pub y: AlgebraElement,
}

impl FunctionalRep {
    pub fn new(y: AlgebraElement) -> Self {
        Self { y }
    }

    pub fn evaluate(&self, x: &AlgebraElement) -> Result<Complex64> {
        x.trace_product(&self.y)
    }
}

/// `n × n` matrix of functionals over a common algebra, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PredualMatrix {
    n: usize,
    algebra: Arc<TracialAlgebra>,
    entries: Vec<FunctionalRep>,
}

impl PredualMatrix {
    pub fn new(n: usize, algebra: Arc<TracialAlgebra>, entries: Vec<FunctionalRep>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(FidError::ShapeMismatch(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        if entries.iter().any(|e| !same_algebra(e.y.algebra(), &algebra)) {
            return Err(FidError::AlgebraMismatch);
        }
        Ok(Self { n, algebra, entries })
    }

    pub fn from_operators(n: usize, algebra: Arc<TracialAlgebra>, ys: Vec<AlgebraElement>) -> Result<Self> {
        Self::new(n, algebra, ys.into_iter().map(FunctionalRep::new).collect())
    }

    /// The matrix whose lift is `map` (codomain must be a single block of
    /// weight one, i.e. `M_n` with the plain trace).
    pub fn from_lift(map: &LinearMap) -> Result<Self> {
        let cod = map.codomain();
        if !cod.is_single_block() || cod.blocks()[0].weight != 1.0 {
            return Err(FidError::InvalidAlgebra("lift codomain must be M_n with unit weight".into()));
        }
        let n = cod.blocks()[0].dim;
        let adj = map.trace_adjoint();
        let mut ys = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                ys.push(adj.apply(&AlgebraElement::matrix_unit(cod, 0, j, i))?);
            }
        }
        Self::from_operators(n, map.domain().clone(), ys)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.algebra
    }

    pub fn entries(&self) -> &[FunctionalRep] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> &FunctionalRep {
        &self.entries[i * self.n + j]
    }

    /// `x ↦ [τ(x·y_ij)]` as a map into `M_n`.
    pub fn lift_map(&self) -> LinearMap {
        let target = TracialAlgebra::matrix(self.n);
        LinearMap::from_fn(&self.algebra, &target, |x| {
            let m = CMat::from_fn(self.n, self.n, |i, j| self.entry(i, j).evaluate(x).expect("same algebra"));
            AlgebraElement::from_matrix(target.clone(), m).expect("n x n")
        })
    }

    pub fn is_predual_positive(&self, psd_tol: f64) -> CpCertificate {
        self.lift_map().is_completely_positive(psd_tol)
    }

    /// `[y_ij]` assembled blockwise as `n·d_b × n·d_b` matrices.
    pub fn operator_matrix(&self, psd_tol: f64) -> OperatorMatrix {
        let n = self.n;
        let blocks: Vec<CMat> = self
            .algebra
            .blocks()
            .iter()
            .enumerate()
            .map(|(b, blk)| {
                let d = blk.dim;
                let mut m = CMat::zeros(n * d, n * d);
                for i in 0..n {
                    for j in 0..n {
                        m.view_mut((i * d, j * d), (d, d)).copy_from(self.entry(i, j).y.block(b));
                    }
                }
                m
            })
            .collect();
        let mut eigenvalues: Vec<f64> = blocks.iter().flat_map(linalg::eigvalsh).collect();
        eigenvalues.sort_by(f64::total_cmp);
        let min_eigenvalue = eigenvalues.first().copied().unwrap_or(0.0);
        let scale = blocks.iter().map(linalg::spectral_norm).fold(0.0, f64::max).max(1.0);
        let hermitian = blocks.iter().all(|m| linalg::max_abs(&(m - m.adjoint())) <= 1e-12 * scale);
        OperatorMatrix { psd: hermitian && min_eigenvalue >= -psd_tol * scale, min_eigenvalue, eigenvalues, blocks }
    }

    /// `[ω_ij(c*·x·c)]`, represented by `c·y_ij·c*`.
    pub fn congruence(&self, c: &AlgebraElement) -> Result<Self> {
        let ca = c.adjoint();
        let ys = self.entries.iter().map(|e| c.try_mul(&e.y)?.try_mul(&ca)).collect::<Result<Vec<_>>>()?;
        Self::from_operators(self.n, self.algebra.clone(), ys)
    }

    /// Applies a map of the predual entrywise, with the map given on
    /// representatives.
    pub fn map_entries(&self, map: &LinearMap) -> Result<Self> {
        let ys = self.entries.iter().map(|e| map.apply(&e.y)).collect::<Result<Vec<_>>>()?;
        Self::from_operators(self.n, map.codomain().clone(), ys)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorMatrix {
    pub psd: bool,
    pub min_eigenvalue: f64,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub blocks: Vec<CMat>,
}

fn unit(i: usize, j: usize) -> AlgebraElement {
    AlgebraElement::matrix_unit(&TracialAlgebra::matrix(2), 0, i, j)
}

/// The 2 × 2 matrix over the predual of `M_2` with representatives
/// `e_11, e_21, e_12, e_22`. Its lift is the identity map (positive) while
/// the operator matrix is the swap (not positive).
pub fn identity_lift_example() -> PredualMatrix {
    PredualMatrix::from_operators(2, TracialAlgebra::matrix(2), vec![unit(0, 0), unit(1, 0), unit(0, 1), unit(1, 1)])
        .expect("valid")
}

/// The transposed arrangement: representatives `e_11, e_12, e_21, e_22`.
/// Its lift is the transpose map (not positive) while the operator matrix
/// is positive.
pub fn transpose_lift_example() -> PredualMatrix {
    PredualMatrix::from_operators(2, TracialAlgebra::matrix(2), vec![unit(0, 0), unit(0, 1), unit(1, 0), unit(1, 1)])
        .expect("valid")
}

/// Sampled test of complete positivity of `map` for the predual order: the
/// entrywise image of every tried positive matrix must stay positive. The
/// trial set always contains the identity-lift matrix over `M_d`.
pub fn predual_cp_sampled(map: &LinearMap, n_samples: usize, seed: u64, psd_tol: f64) -> Result<bool> {
    let alg = map.domain();
    if !alg.is_single_block() || !same_algebra(alg, map.codomain()) {
        return Err(FidError::MultiBlockUnsupported);
    }
    let d = alg.blocks()[0].dim;
    let canonical = PredualMatrix::from_lift(&LinearMap::from_fn(alg, &TracialAlgebra::matrix(d), |x| {
        AlgebraElement::from_matrix(TracialAlgebra::matrix(d), x.block(0).clone()).expect("d x d")
    }))?;
    let mut trials = vec![canonical];
    for t in 0..n_samples {
        let mut rng = trial_rng(seed, t as u64);
        let ch = KrausChannel::random_cptp(alg, 1 + t % 3, &mut rng);
        let to_md = LinearMap::from_fn(alg, &TracialAlgebra::matrix(d), |x| {
            let y = ch.apply(x).expect("same algebra");
            AlgebraElement::from_matrix(TracialAlgebra::matrix(d), y.block(0).clone()).expect("d x d")
        });
        let c = random::random_element(alg, &mut rng);
        trials.push(PredualMatrix::from_lift(&to_md)?.congruence(&c)?);
    }
    for omega in &trials {
        if !omega.map_entries(map)?.is_predual_positive(psd_tol).verdict {
            return Ok(false);
        }
    }
    Ok(true)
}
