//! Finite truncations `M_2^{⊗k}` of the CAR algebra with the normalised
//! trace, and the embeddings `x ↦ x ⊗ 1₂` between them.

use std::sync::{Arc, OnceLock};

use crate::algebra::{same_algebra, AlgebraElement, Block, DensityElement, TracialAlgebra};
use crate::error::{FidError, Result};
use crate::fidelity::fidelity;
use crate::linalg;

pub const DEFAULT_MAX_LEVEL: usize = 10;

/// Level `k`: one block of dimension `2^k` with weight `2^{-k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CarLevel {
    pub k: usize,
    pub algebra: Arc<TracialAlgebra>,
}

/// Levels `1..=max_level`, built on first use and shared afterwards.
#[derive(Debug)]
pub struct CarTower {
    max_level: usize,
    levels: Vec<OnceLock<Arc<TracialAlgebra>>>,
}

impl Default for CarTower {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_LEVEL)
    }
}

impl CarTower {
    pub fn new(max_level: usize) -> Self {
        Self { max_level, levels: (0..max_level).map(|_| OnceLock::new()).collect() }
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn level(&self, k: usize) -> Result<CarLevel> {
        if k == 0 || k > self.max_level {
            return Err(FidError::InvalidConfig(format!("CAR level {k} outside 1..={}", self.max_level)));
        }
        let algebra = self.levels[k - 1]
            .get_or_init(|| {
                let dim = 1usize << k;
                // a power of two, so τ(1) = dim · 2^{-k} = 1 exactly
                TracialAlgebra::new(vec![Block { dim, weight: (-(k as f64)).exp2() }]).expect("valid level")
            })
            .clone();
        Ok(CarLevel { k, algebra })
    }

    pub fn algebra(&self, k: usize) -> Result<Arc<TracialAlgebra>> {
        Ok(self.level(k)?.algebra)
    }

    /// `x ⊗ 1₂`, from level `k` to level `k + 1`.
    pub fn embed(&self, x: &AlgebraElement, k: usize) -> Result<AlgebraElement> {
        let here = self.algebra(k)?;
        if !same_algebra(x.algebra(), &here) {
            return Err(FidError::LevelMismatch { expected: k });
        }
        let next = self.algebra(k + 1)?;
        AlgebraElement::from_matrix(next, linalg::kron(x.block(0), &linalg::identity(2)))
    }

    pub fn embed_density(&self, rho: &DensityElement, k: usize) -> Result<DensityElement> {
        DensityElement::new(self.embed(rho, k)?)
    }

    /// Fidelity at level `k` followed by its value after each of `depth`
    /// successive embeddings.
    pub fn fidelity_stability(
        &self,
        sigma: &DensityElement,
        rho: &DensityElement,
        k: usize,
        depth: usize,
    ) -> Result<Vec<f64>> {
        let here = self.algebra(k)?;
        if !same_algebra(sigma.algebra(), &here) || !same_algebra(rho.algebra(), &here) {
            return Err(FidError::LevelMismatch { expected: k });
        }
        let mut s = sigma.clone();
        let mut r = rho.clone();
        let mut out = vec![fidelity(&s, &r)?];
        for level in k..k + depth {
            s = self.embed_density(&s, level)?;
            r = self.embed_density(&r, level)?;
            out.push(fidelity(&s, &r)?);
        }
        Ok(out)
    }
}
