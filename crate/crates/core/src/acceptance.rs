//! The acceptance suite: ten numbered checks, each returning a pass/fail
//! outcome with its evidence and runtime. Shared by the test target and the
//! `selftest` command.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{AlgebraElement, DensityElement, TracialAlgebra};
use crate::car::CarTower;
use crate::channel::{distance_up_to_phase, KrausChannel, LinearMap};
use crate::config::RunConfig;
use crate::error::Result;
use crate::fidelity::{all_routes, fidelity, fidelity_bounds, OptimizerConfig, PairObjective};
use crate::harness::{self, ChannelSource, Classification, PairSampling};
use crate::predual;
use crate::random::{self, trial_rng, SeededRng};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub runtime_ms: u64,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2}  {:<28} {}  {:>7} ms  {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.runtime_ms,
            self.detail
        )
    }
}

type Check = fn(&RunConfig) -> Result<(bool, String)>;

pub const CRITERIA: [(u8, &str, Check); 10] = [
    (1, "five-route agreement", criterion_1),
    (2, "fidelity axioms", criterion_2),
    (3, "monotonicity under CPTP", criterion_3),
    (4, "Bures triangle inequality", criterion_4),
    (5, "predual order examples", criterion_5),
    (6, "Schwarz vs 2-positivity", criterion_6),
    (7, "unitary recovery", criterion_7),
    (8, "CAR tower stability", criterion_8),
    (9, "trace bounds", criterion_9),
    (10, "Var1 gradient check", criterion_10),
];

/// Runtime limits for the criteria that carry one.
fn budget(id: u8) -> Option<Duration> {
    match id {
        1 => Some(Duration::from_secs(60)),
        3 => Some(Duration::from_secs(120)),
        _ => None,
    }
}

pub fn run(id: u8, cfg: &RunConfig) -> CriterionOutcome {
    let (_, name, check) = CRITERIA[(id - 1) as usize];
    let start = Instant::now();
    let (mut pass, mut detail) = match check(cfg) {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let elapsed = start.elapsed();
    if let Some(limit) = budget(id) {
        if elapsed > limit {
            pass = false;
            detail.push_str(&format!("; over the {} s budget", limit.as_secs()));
        }
    }
    CriterionOutcome { id, name, pass, detail, runtime_ms: elapsed.as_millis() as u64 }
}

pub fn run_all(cfg: &RunConfig) -> Vec<CriterionOutcome> {
    CRITERIA.iter().map(|(id, _, _)| run(*id, cfg)).collect()
}

fn optimizer(cfg: &RunConfig) -> OptimizerConfig {
    OptimizerConfig { max_iterations: cfg.max_iterations, ..OptimizerConfig::default() }
}

fn rng(cfg: &RunConfig, stream: u64, index: usize) -> SeededRng {
    trial_rng(cfg.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15), index as u64)
}

fn weighted_pair() -> Arc<TracialAlgebra> {
    TracialAlgebra::from_pairs(&[(2, 1.0), (3, 0.5)]).expect("valid")
}

/// Five routes agree on random pairs in `M_2, M_3, M_8, M_16` and `M_2 ⊕ M_3`.
pub fn criterion_1(cfg: &RunConfig) -> Result<(bool, String)> {
    let mut cases: Vec<(Arc<TracialAlgebra>, usize)> =
        [2, 3, 8, 16].iter().map(|&d| (TracialAlgebra::matrix(d), 200)).collect();
    cases.push((weighted_pair(), 50));
    let opt = optimizer(cfg);
    let mut worst_all: f64 = 0.0;
    let mut worst_exact: f64 = 0.0;
    let mut upper_ok = true;
    for (k, (alg, n)) in cases.iter().enumerate() {
        let reports = (0..*n)
            .into_par_iter()
            .map(|i| {
                let mut r = rng(cfg, 100 + k as u64, i);
                let s = random::random_density(alg, &mut r);
                let p = random::random_density(alg, &mut r);
                let rep = all_routes(&s, &p, &opt, cfg.block_samples, &mut r)?;
                Ok((rep.max_disagreement, rep.max_disagreement_exact, rep.block_sampled_max <= rep.block + 1e-9))
            })
            .collect::<Result<Vec<_>>>()?;
        for (a, e, u) in reports {
            worst_all = worst_all.max(a);
            worst_exact = worst_exact.max(e);
            upper_ok &= u;
        }
    }
    let pass = worst_all <= cfg.opt_tol && worst_exact <= 1e-10 && upper_ok;
    Ok((pass, format!("max disagreement {worst_all:.2e} (non-iterative {worst_exact:.2e}), 850 pairs")))
}

/// Symmetry, range, zero-iff-orthogonal and one-iff-equal.
pub fn criterion_2(cfg: &RunConfig) -> Result<(bool, String)> {
    let algebras = [TracialAlgebra::matrix(2), TracialAlgebra::matrix(3), TracialAlgebra::matrix(5), weighted_pair()];
    let mut sym: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut zero_ok = true;
    let mut one_ok = true;
    for (k, alg) in algebras.iter().enumerate() {
        for i in 0..100 {
            let mut r = rng(cfg, 200 + k as u64, i);
            let s = if i % 4 == 3 {
                random::random_density_rank(alg, 1, &mut r)
            } else {
                random::random_density(alg, &mut r)
            };
            let p = random::random_density(alg, &mut r);
            let f1 = fidelity(&s, &p)?;
            let f2 = fidelity(&p, &s)?;
            sym = sym.max((f1 - f2).abs());
            lo = lo.min(f1);
            hi = hi.max(f1);

            // orthogonal and near-orthogonal pairs
            let (a, b) = random::orthogonal_pair(alg, &mut r);
            let near = DensityElement::normalize(b.scale_real(1.0 - 1e-3).try_add(&a.scale_real(1e-3))?)?;
            for (x, y) in [(&a, &b), (&a, &near)] {
                let zero = fidelity(x, y)? <= 1e-8;
                zero_ok &= zero == x.are_orthogonal(y, 1e-6)?;
            }
            let f_orth = fidelity(&a, &b)?;
            lo = lo.min(f_orth);
            zero_ok &= f_orth <= 1e-8 && fidelity(&a, &near)? > 1e-8;

            // equality and perturbations σ + δ(ρ − σ)
            let f_same = fidelity(&s, &s)?;
            one_ok &= f_same >= 1.0 - 1e-10;
            lo = lo.min(f_same);
            hi = hi.max(f_same);
            for delta in [1e-1, 1e-2, 1e-3, 1e-4] {
                let moved = DensityElement::normalize(s.scale_real(1.0 - delta).try_add(&p.scale_real(delta))?)?;
                if fidelity(&s, &moved)? >= 1.0 - 1e-10 {
                    one_ok &= s.try_sub(&moved)?.trace_norm() <= 1e-4;
                }
            }
        }
    }
    let range_ok = lo >= -1e-12 && hi <= 1.0 + 1e-9;
    let pass = sym <= 1e-10 && range_ok && zero_ok && one_ok;
    Ok((
        pass,
        format!("symmetry {sym:.1e}, min F {lo:.3e}, max F - 1 {:.1e}, zero-iff-orthogonal {zero_ok}, one-iff-equal {one_ok}", hi - 1.0),
    ))
}

/// Fidelity never decreases under random CPTP maps in `M_2, M_4, M_8`.
pub fn criterion_3(cfg: &RunConfig) -> Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for d in [2, 4, 8] {
        let rep = harness::monotonicity_sweep(
            &ChannelSource::RandomCptp,
            &TracialAlgebra::matrix(d),
            PairSampling::Mixed,
            1000,
            cfg.seed.wrapping_add(d as u64),
            cfg.margin_tol,
        )?;
        worst = worst.min(rep.min_margin);
        pass &= rep.pass;
    }
    Ok((pass, format!("min margin {worst:.2e} over 3000 trials")))
}

/// Bures triangle inequality on random triples in `M_2` and `M_3`.
pub fn criterion_4(cfg: &RunConfig) -> Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for d in [2, 3] {
        let rep = harness::metric_sweep(d, 1000, cfg.seed.wrapping_add(10 + d as u64), 1e-10)?;
        worst = worst.min(rep.min_margin);
        pass &= rep.pass;
    }
    Ok((pass, format!("min triangle margin {worst:.2e} over 2000 triples")))
}

/// The identity-lift and transpose-lift examples over `M_2`.
pub fn criterion_5(cfg: &RunConfig) -> Result<(bool, String)> {
    let omega = predual::identity_lift_example();
    let delta = predual::transpose_lift_example();
    let omega_pos = omega.is_predual_positive(cfg.psd_tol).verdict;
    let omega_op = omega.operator_matrix(cfg.psd_tol);
    let delta_pos = delta.is_predual_positive(cfg.psd_tol).verdict;
    let delta_op = delta.operator_matrix(cfg.psd_tol);
    let want = [-1.0, 1.0, 1.0, 1.0];
    let eig_ok =
        omega_op.eigenvalues.len() == 4 && omega_op.eigenvalues.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-12);
    let pass = omega_pos && !omega_op.psd && eig_ok && !delta_pos && delta_op.psd;
    Ok((
        pass,
        format!(
            "omega: predual positive {omega_pos}, operator PSD {} (eigenvalues {:?}); delta: predual positive {delta_pos}, operator PSD {}",
            omega_op.psd,
            omega_op.eigenvalues.iter().map(|x| (x * 1e12).round() / 1e12).collect::<Vec<_>>(),
            delta_op.psd
        ),
    ))
}

/// The transpose-average map on `M_2` is Schwarz but not 2-positive.
pub fn criterion_6(cfg: &RunConfig) -> Result<(bool, String)> {
    let map = LinearMap::transpose_average(&TracialAlgebra::matrix(2));
    let schwarz = map.is_schwarz_sampled(10_000, cfg.seed);
    let cp = map.is_completely_positive(cfg.psd_tol);
    let pass = schwarz.verdict && !cp.verdict && (cp.min_choi_eigenvalue + 0.25).abs() <= 1e-12;
    Ok((
        pass,
        format!(
            "Schwarz violation in 10^4 samples: {} (worst {:.1e}); Choi min eigenvalue {:.15}",
            !schwarz.verdict, schwarz.worst_violation, cp.min_choi_eigenvalue
        ),
    ))
}

/// Unitary channels are classified preserving and their unitary recovered;
/// depolarising channels raise fidelity somewhere.
pub fn criterion_7(cfg: &RunConfig) -> Result<(bool, String)> {
    let mut worst_dist: f64 = 0.0;
    let mut all_preserving = true;
    for d in [2, 3, 4] {
        let alg = TracialAlgebra::matrix(d);
        let results = (0..100)
            .into_par_iter()
            .map(|i| {
                let mut r = rng(cfg, 700 + d as u64, i);
                let u = random::random_unitary(&alg, &mut r);
                let map = KrausChannel::unitary(u.clone())?.to_map();
                let rep = harness::preservation_classify(&map, 48, cfg.seed.wrapping_add(i as u64), cfg.classify_tol)?;
                let dist = match (&rep.recovered, rep.recovery_residual) {
                    (Some(v), Some(res)) if res <= 1e-8 => distance_up_to_phase(v, &u)?,
                    _ => f64::INFINITY,
                };
                Ok((rep.classification == Classification::Preserving, dist))
            })
            .collect::<Result<Vec<_>>>()?;
        for (p, dist) in results {
            all_preserving &= p;
            worst_dist = worst_dist.max(dist);
        }
    }
    let mut depolarizing_ok = true;
    for d in [2, 3] {
        for p in [0.1, 0.5, 1.0] {
            let ch = KrausChannel::depolarizing(&TracialAlgebra::matrix(d), p)?;
            let rep = harness::preservation_classify(&ch.to_map(), 48, cfg.seed, cfg.classify_tol)?;
            let witnessed = rep
                .witness
                .as_ref()
                .and_then(|w| Some(w["fidelity_after"].as_f64()? > w["fidelity_before"].as_f64()?))
                .unwrap_or(false);
            depolarizing_ok &= rep.classification == Classification::StrictlyIncreasingSomewhere && witnessed;
        }
    }
    let pass = all_preserving && worst_dist <= 1e-8 && depolarizing_ok;
    Ok((
        pass,
        format!(
            "300 unitary channels preserving {all_preserving}, worst recovery distance {worst_dist:.1e}; depolarizing flagged with witness {depolarizing_ok}"
        ),
    ))
}

/// Fidelity is unchanged by three embeddings; `τ_k(1) = 1` for `k ≤ 10`.
pub fn criterion_8(cfg: &RunConfig) -> Result<(bool, String)> {
    let tower = CarTower::new(cfg.car_max_level.max(10));
    let mut trace_ok = true;
    for k in 1..=10 {
        let alg = tower.algebra(k)?;
        trace_ok &= alg.total_trace() == 1.0 && AlgebraElement::identity(&alg).trace().re == 1.0;
    }
    let l1 = tower.algebra(1)?;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let mut r = rng(cfg, 800, i);
        let (s, p) = if i % 5 == 4 {
            random::orthogonal_pair(&l1, &mut r)
        } else {
            (random::random_density(&l1, &mut r), random::random_density(&l1, &mut r))
        };
        let fs = tower.fidelity_stability(&s, &p, 1, 3)?;
        worst = worst.max(fs.iter().map(|f| (f - fs[0]).abs()).fold(0.0, f64::max));
    }
    Ok((trace_ok && worst <= 1e-10, format!("unit traces exact {trace_ok}, max drift over 3 embeddings {worst:.1e}")))
}

/// `F ≤ √(τ(a)τ(b))` for positive pairs and `F ≤ 1` for densities.
pub fn criterion_9(cfg: &RunConfig) -> Result<(bool, String)> {
    let algebras = [
        TracialAlgebra::matrix(2),
        TracialAlgebra::matrix(4),
        weighted_pair(),
        TracialAlgebra::from_pairs(&[(1, 2.0), (2, 0.25)])?,
    ];
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_density = f64::NEG_INFINITY;
    for (k, alg) in algebras.iter().enumerate() {
        for i in 0..200 {
            let mut r = rng(cfg, 900 + k as u64, i);
            let rank = 1 + i % alg.max_block_dim();
            let scale_a = 10f64.powf(rand::Rng::random_range(&mut r, -2.0..2.0));
            let scale_b = 10f64.powf(rand::Rng::random_range(&mut r, -2.0..2.0));
            let a = random::random_positive(alg, Some(rank), &mut r).scale_real(scale_a);
            let b = random::random_positive(alg, None, &mut r).scale_real(scale_b);
            let (mean, bound) = fidelity_bounds(&a, &b)?;
            worst_gap = worst_gap.max(mean - bound);
            let s = DensityElement::normalize(a)?;
            let p = DensityElement::normalize(b)?;
            worst_density = worst_density.max(fidelity(&s, &p)? - 1.0);
        }
    }
    Ok((
        worst_gap <= 1e-10 && worst_density <= 1e-9,
        format!("max F - sqrt(tau(a)tau(b)) {worst_gap:.2e}, max F - 1 {worst_density:.2e}, 800 pairs"),
    ))
}

/// Analytic gradient of `y ↦ τ(ρy) + τ(σy⁻¹)` against central differences.
pub fn criterion_10(cfg: &RunConfig) -> Result<(bool, String)> {
    let h = 1e-5;
    let algebras = [TracialAlgebra::matrix(3), weighted_pair()];
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let alg = &algebras[i % 2];
        let mut r = rng(cfg, 1000, i);
        let s = random::random_density(alg, &mut r);
        let p = random::random_density(alg, &mut r);
        let y = DensityElement::normalize(random::random_positive(alg, None, &mut r))?
            .try_add(&AlgebraElement::identity(alg).scale_real(0.5))?;
        let obj = PairObjective::new(p.into_element(), s.into_element())?;
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for dir in hermitian_basis(alg) {
            analytic.push(obj.directional_derivative(&y, &dir)?);
            let plus = obj.value(&y.try_add(&dir.scale_real(h))?)?;
            let minus = obj.value(&y.try_sub(&dir.scale_real(h))?)?;
            numeric.push((plus - minus) / (2.0 * h));
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
    }
    Ok((worst <= 1e-4, format!("max relative error {worst:.2e} over 20 pairs")))
}

/// Orthonormal Hermitian basis (Hilbert–Schmidt) of every block.
fn hermitian_basis(alg: &Arc<TracialAlgebra>) -> Vec<AlgebraElement> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for (b, blk) in alg.blocks().iter().enumerate() {
        for i in 0..blk.dim {
            for j in i..blk.dim {
                let eij = AlgebraElement::matrix_unit(alg, b, i, j);
                if i == j {
                    out.push(eij);
                    continue;
                }
                let eji = AlgebraElement::matrix_unit(alg, b, j, i);
                out.push(eij.try_add(&eji).expect("same algebra").scale_real(s));
                out.push(
                    eij.scale(crate::linalg::c(0.0, 1.0))
                        .try_sub(&eji.scale(crate::linalg::c(0.0, 1.0)))
                        .expect("same algebra")
                        .scale_real(s),
                );
            }
        }
    }
    out
}
