//! Dense complex matrix kernels shared by every engine.
//!
//! Hermitian eigendecomposition is delegated to nalgebra. Singular value
//! decompositions use one-sided (Hestenes) Jacobi rotations, which
//! diagonalise `z* z` implicitly without forming it, so small singular values
//! keep full relative accuracy.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

const JACOBI_MAX_SWEEPS: usize = 80;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn frobenius_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Eigendecomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    eigh(m).0
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

/// `V diag(f(λ)) V*` for the Hermitian part of `m`.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (values, vectors) = eigh(m);
    reconstruct(&vectors, &values.iter().map(|&l| f(l)).collect::<Vec<_>>())
}

/// `V diag(d) V*`.
pub fn reconstruct(vectors: &CMat, diag: &[f64]) -> CMat {
    let mut scaled = vectors.clone();
    for (k, &d) in diag.iter().enumerate() {
        scaled.column_mut(k).scale_mut(d);
    }
    scaled * vectors.adjoint()
}

/// Singular value decomposition `z = U diag(s) V*` of a square matrix, with
/// `s` sorted nonincreasing and both factors unitary.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    /// `V diag(s) V*`, i.e. `|z| = (z* z)^{1/2}`.
    pub fn abs(&self) -> CMat {
        reconstruct(&self.v, &self.s)
    }

    /// Unitary polar factor `U V*`, so that `z = (U V*) |z|`.
    pub fn polar_unitary(&self) -> CMat {
        &self.u * self.v.adjoint()
    }
}

/// One-sided Jacobi sweep over the columns of `a`, accumulating the
/// rotations into `v`. On return the columns of `a` are mutually orthogonal.
fn hestenes(a: &mut CMat, v: &mut CMat) {
    let n = a.ncols();
    let tol = f64::EPSILON * (a.nrows().max(1) as f64);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let ph = phase.conj();
                rotate_columns(a, p, q, cs, sn, ph);
                rotate_columns(v, p, q, cs, sn, ph);
            }
        }
        if !rotated {
            return;
        }
    }
}

fn rotate_columns(m: &mut CMat, p: usize, q: usize, cs: f64, sn: f64, ph: Complex64) {
    for r in 0..m.nrows() {
        let xp = m[(r, p)];
        let xq = m[(r, q)] * ph;
        m[(r, p)] = xp * cs - xq * sn;
        m[(r, q)] = xp * sn + xq * cs;
    }
}

/// Singular values (nonincreasing) of an arbitrary rectangular matrix.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut a = if m.nrows() < m.ncols() { m.adjoint() } else { m.clone() };
    let mut v = identity(a.ncols());
    hestenes(&mut a, &mut v);
    let mut s: Vec<f64> = (0..a.ncols()).map(|k| a.column(k).norm()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Full SVD of a square matrix. Left singular vectors belonging to zero
/// singular values are completed by Gram–Schmidt against the canonical basis
/// in index order, so the factors are reproducible.
pub fn svd(m: &CMat) -> Svd {
    assert!(m.is_square(), "svd expects a square matrix");
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = identity(n);
    hestenes(&mut a, &mut v);

    let norms: Vec<f64> = (0..n).map(|k| a.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let smax = order.first().map(|&k| norms[k]).unwrap_or(0.0);
    let floor = smax * f64::EPSILON * (n as f64);

    let s: Vec<f64> = order.iter().map(|&k| norms[k]).collect();
    let v_sorted = CMat::from_fn(n, n, |r, k| v[(r, order[k])]);
    let mut basis: Vec<CVec> = Vec::with_capacity(n);
    for &k in &order {
        if norms[k] > floor {
            basis.push(a.column(k).unscale(norms[k]));
        }
    }
    let u = complete_orthonormal(basis, n);
    Svd { u, s, v: v_sorted }
}

/// Extends orthonormal columns to a unitary by Gram–Schmidt against
/// `e_0, e_1, ...` in order.
pub fn complete_orthonormal(mut cols: Vec<CVec>, n: usize) -> CMat {
    let mut k = 0;
    while cols.len() < n && k < n {
        let mut e = CVec::zeros(n);
        e[k] = ONE;
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&e);
                e -= c * proj;
            }
        }
        let norm = e.norm();
        if norm > 1e-8 {
            cols.push(e.unscale(norm));
        }
        k += 1;
    }
    CMat::from_columns(&cols)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m)[0]
}
