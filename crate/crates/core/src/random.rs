//! Seeded random sampling of elements, states and unitaries.
//!
//! All generators take an explicit RNG; nothing here touches global state.
//! Per-trial generators are derived from `(seed, index)` with a counter-based
//! splitter so parallel sweeps stay reproducible.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::{AlgebraElement, DensityElement, TracialAlgebra};
use crate::linalg::{self, c, CMat, CVec};

pub type SeededRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn trial_rng(seed: u64, index: u64) -> SeededRng {
    rng_from_seed(derive_seed(seed, index))
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Complex Ginibre matrix with i.i.d. standard normal real and imaginary parts.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c(normal(rng), normal(rng)))
}

/// Orthonormalises the columns of `g` (classical Gram–Schmidt, applied twice).
fn orthonormal_columns(g: &CMat) -> CMat {
    let mut cols: Vec<CVec> = Vec::with_capacity(g.ncols());
    for k in 0..g.ncols() {
        let mut v: CVec = g.column(k).into_owned();
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
        }
        let n = v.norm();
        cols.push(v.unscale(n));
    }
    CMat::from_columns(&cols)
}

/// Haar-random isometry `C^cols → C^rows` (requires `rows ≥ cols`).
pub fn haar_isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    assert!(rows >= cols, "an isometry needs rows >= cols");
    orthonormal_columns(&ginibre(rows, cols, rng))
}

/// Haar-random unitary in `U(n)`.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> CMat {
    haar_isometry(n, n, rng)
}

pub fn random_element(algebra: &Arc<TracialAlgebra>, rng: &mut impl Rng) -> AlgebraElement {
    AlgebraElement::from_block_fn(algebra.clone(), |_, d| ginibre(d, d, rng))
}

pub fn random_hermitian(algebra: &Arc<TracialAlgebra>, rng: &mut impl Rng) -> AlgebraElement {
    random_element(algebra, rng).hermitian_part()
}

pub fn random_unitary(algebra: &Arc<TracialAlgebra>, rng: &mut impl Rng) -> AlgebraElement {
    AlgebraElement::from_block_fn(algebra.clone(), |_, d| haar_unitary(d, rng))
}

/// Positive element `g g*` built blockwise from `d × rank` Ginibre factors
/// (rank is capped at each block's dimension).
pub fn random_positive(algebra: &Arc<TracialAlgebra>, rank: Option<usize>, rng: &mut impl Rng) -> AlgebraElement {
    AlgebraElement::from_block_fn(algebra.clone(), |_, d| {
        let r = rank.map_or(d, |r| r.clamp(1, d));
        let g = ginibre(d, r, rng);
        linalg::hermitian_part(&(&g * g.adjoint()))
    })
}

/// Full-support random τ-state: `g g* / τ(g g*)`.
pub fn random_density(algebra: &Arc<TracialAlgebra>, rng: &mut impl Rng) -> DensityElement {
    DensityElement::normalize(random_positive(algebra, None, rng)).expect("Ginibre samples are nonzero")
}

/// Random τ-state whose blocks have rank at most `rank`.
pub fn random_density_rank(algebra: &Arc<TracialAlgebra>, rank: usize, rng: &mut impl Rng) -> DensityElement {
    DensityElement::normalize(random_positive(algebra, Some(rank), rng)).expect("Ginibre samples are nonzero")
}

/// Element of norm at most one: a Ginibre sample rescaled to a random
/// operator norm in `(0, 1]`; every fourth draw is unitary.
pub fn random_contraction(algebra: &Arc<TracialAlgebra>, rng: &mut impl Rng) -> AlgebraElement {
    if rng.random_range(0..4) == 0 {
        return random_unitary(algebra, rng);
    }
    let g = random_element(algebra, rng);
    let n = g.norm();
    let r: f64 = rng.random_range(0.0..1.0f64).powf(0.25).max(1e-3);
    g.scale_real(r / n)
}

/// Two τ-states supported on complementary spectral projections of a random
/// unitary frame, hence orthogonal. Needs at least two minimal projections
/// in total.
pub fn orthogonal_pair(algebra: &Arc<TracialAlgebra>, rng: &mut impl Rng) -> (DensityElement, DensityElement) {
    let total: usize = algebra.blocks().iter().map(|b| b.dim).sum();
    assert!(total >= 2, "orthogonal pairs need at least two minimal projections");
    // random nonempty proper subset of the global index set
    let mut side: Vec<bool> = (0..total).map(|_| rng.random_bool(0.5)).collect();
    if side.iter().all(|&s| s) || side.iter().all(|&s| !s) {
        let k = rng.random_range(0..total);
        let first = side[0];
        side.iter_mut().for_each(|s| *s = first);
        side[k] = !first;
    }
    let mut offset = 0;
    let mut sigma_blocks = Vec::new();
    let mut rho_blocks = Vec::new();
    for b in algebra.blocks() {
        let u = haar_unitary(b.dim, rng);
        let mut ds = vec![0.0; b.dim];
        let mut dr = vec![0.0; b.dim];
        for i in 0..b.dim {
            let w: f64 = rng.random_range(0.05..1.0);
            if side[offset + i] {
                ds[i] = w;
            } else {
                dr[i] = w;
            }
        }
        sigma_blocks.push(linalg::reconstruct(&u, &ds));
        rho_blocks.push(linalg::reconstruct(&u, &dr));
        offset += b.dim;
    }
    let sigma = AlgebraElement::from_blocks(algebra.clone(), sigma_blocks).expect("shapes match");
    let rho = AlgebraElement::from_blocks(algebra.clone(), rho_blocks).expect("shapes match");
    (
        DensityElement::normalize(sigma).expect("nonempty support"),
        DensityElement::normalize(rho).expect("nonempty support"),
    )
}

/// Rank-one τ-state onto the unit vector `v` in block `block`.
pub fn pure_state(algebra: &Arc<TracialAlgebra>, block: usize, v: &CVec) -> DensityElement {
    let n = v.norm();
    let v = v.unscale(n);
    let p =
        AlgebraElement::from_block_fn(
            algebra.clone(),
            |k, d| {
                if k == block {
                    &v * v.adjoint()
                } else {
                    CMat::zeros(d, d)
                }
            },
        );
    DensityElement::normalize(p).expect("unit vector")
}
