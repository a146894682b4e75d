//! Randomised invariants. Inputs are drawn from a seeded generator so a
//! failing case shrinks to a seed and a shape.

use std::sync::Arc;

use proptest::prelude::*;

use fidlab::algebra::{AlgebraElement, DensityElement, TracialAlgebra};
use fidlab::car::CarTower;
use fidlab::channel::{distance_up_to_phase, KrausChannel, LinearMap, RecoveryConfig};
use fidlab::error::FidError;
use fidlab::fidelity::{
    all_routes, bures_distance, fidelity, fidelity_variational, OptimizerConfig, Route, StartPoint,
};
use fidlab::harness::{self, ChannelSource, PairSampling};
use fidlab::linalg::{self, c};
use fidlab::predual::PredualMatrix;
use fidlab::random::{self, rng_from_seed};

/// Single blocks of size 1 to 4, or two to three weighted blocks.
fn algebra() -> impl Strategy<Value = Arc<TracialAlgebra>> {
    prop_oneof![
        (1usize..=4).prop_map(TracialAlgebra::matrix),
        prop::collection::vec((1usize..=3, 0.1f64..3.0), 2..=3).prop_map(|b| TracialAlgebra::from_pairs(&b).unwrap()),
    ]
}

type Scalar = fn(f64) -> f64;

fn matrix_algebra() -> impl Strategy<Value = Arc<TracialAlgebra>> {
    (2usize..=4).prop_map(TracialAlgebra::matrix)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_is_tracial(alg in algebra(), seed: u64) {
        let mut rng = rng_from_seed(seed);
        let x = random::random_element(&alg, &mut rng);
        let y = random::random_element(&alg, &mut rng);
        let lhs = x.try_mul(&y).unwrap().trace();
        let rhs = y.try_mul(&x).unwrap().trace();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * x.norm() * y.norm() * alg.total_trace());
    }

    #[test]
    fn trace_is_faithful(alg in algebra(), seed: u64) {
        let x = random::random_element(&alg, &mut rng_from_seed(seed));
        let t = x.adjoint().try_mul(&x).unwrap().trace();
        prop_assert!(t.re > 0.0 && t.im.abs() <= 1e-12 * t.re);
        prop_assert_eq!(AlgebraElement::zeros(&alg).adjoint().try_mul(&AlgebraElement::zeros(&alg)).unwrap().trace().re, 0.0);
    }

    #[test]
    fn singular_value_function_symmetry(alg in algebra(), seed: u64) {
        let mut rng = rng_from_seed(seed);
        let w = random::random_element(&alg, &mut rng);
        let z = random::random_element(&alg, &mut rng);
        let a = w.try_mul(&z.adjoint()).unwrap().singular_value_function();
        let b = z.try_mul(&w.adjoint()).unwrap().singular_value_function();
        prop_assert!(a.sup_distance(&b) <= 1e-10 * a.eval(0.0).max(1.0));
        // μ_z = μ_{z*} = μ_{|z|}
        let mz = z.singular_value_function();
        prop_assert!(mz.sup_distance(&z.adjoint().singular_value_function()) <= 1e-10 * mz.eval(0.0).max(1.0));
        prop_assert!(mz.sup_distance(&z.abs().singular_value_function()) <= 1e-10 * mz.eval(0.0).max(1.0));
        prop_assert!((mz.integral() - z.abs().trace().re).abs() <= 1e-10 * mz.integral());
    }

    #[test]
    fn functional_calculus_commutes_with_mu(alg in algebra(), seed: u64, rank in 1usize..=3) {
        let h = random::random_positive(&alg, Some(rank), &mut rng_from_seed(seed));
        let mu = h.singular_value_function();
        let cases: [(AlgebraElement, Scalar); 3] = [
            (h.try_mul(&h).unwrap(), |t| t * t),
            (h.sqrt_psd().unwrap(), f64::sqrt),
            (h.hermitian_fn(|t| t.max(0.0) / (1.0 + t.max(0.0))), |t| t / (1.0 + t)),
        ];
        for (image, psi) in cases {
            let lhs = image.singular_value_function();
            let rhs = mu.map_values(psi);
            for t in rhs.breakpoints().iter().chain(lhs.breakpoints().iter()) {
                prop_assert!((lhs.eval(*t) - rhs.eval(*t)).abs() <= 1e-10 * lhs.eval(0.0).max(1.0));
            }
        }
    }

    #[test]
    fn square_root_of_square_root(alg in algebra(), seed: u64) {
        let a = random::random_positive(&alg, None, &mut rng_from_seed(seed));
        let fourth = |x: &AlgebraElement| {
            let x2 = x.try_mul(x).unwrap();
            x2.try_mul(&x2).unwrap()
        };
        let root = a.sqrt_psd().unwrap();
        let a2 = a.try_mul(&a).unwrap();
        prop_assert!(fourth(&root).try_sub(&a2).unwrap().norm() <= 1e-9 * a2.norm());
        let quarter = root.sqrt_psd().unwrap();
        prop_assert!(fourth(&quarter).try_sub(&a).unwrap().norm() <= 1e-9 * a.norm());
    }

    #[test]
    fn abs_and_trace_norm_scaling(alg in algebra(), seed: u64, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let z = random::random_element(&alg, &mut rng_from_seed(seed));
        let neg = z.scale_real(-1.0);
        prop_assert!(z.abs().try_sub(&neg.abs()).unwrap().norm() <= 1e-12 * z.norm());
        let lambda = c(re, im);
        let lhs = z.scale(lambda).trace_norm();
        let rhs = lambda.norm() * z.trace_norm();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn five_routes_agree(alg in algebra(), seed: u64) {
        let mut rng = rng_from_seed(seed);
        let s = random::random_density(&alg, &mut rng);
        let r = random::random_density(&alg, &mut rng);
        let rep = all_routes(&s, &r, &OptimizerConfig::default(), 16, &mut rng).unwrap();
        prop_assert!(rep.max_disagreement <= 1e-6, "{:?}", rep);
        prop_assert!(rep.max_disagreement_exact <= 1e-10, "{:?}", rep);
        prop_assert!(rep.block_sampled_max <= rep.block + 1e-9);
        prop_assert!(rep.block_min_eigenvalue >= -1e-10);
    }

    #[test]
    fn optimizer_from_identity_reaches_fidelity(alg in algebra(), seed: u64) {
        let mut rng = rng_from_seed(seed);
        let s = random::random_density(&alg, &mut rng);
        let r = random::random_density(&alg, &mut rng);
        let f = fidelity(&s, &r).unwrap();
        let cfg = OptimizerConfig { start: StartPoint::Identity, ..OptimizerConfig::default() };
        for route in [Route::Var1, Route::Var2] {
            let w = fidelity_variational(&s, &r, route, &cfg).unwrap();
            prop_assert!((w.value() - f).abs() <= 1e-6, "{:?}: {} vs {}", route, w.value(), f);
            prop_assert!(w.history.windows(2).all(|p| p[1] <= p[0] + 1e-12));
            // y = 1 gives τσ + τρ per variable
            let per_variable = if route == Route::Var1 { 2.0 } else { 4.0 };
            prop_assert!((w.history[0] - per_variable).abs() <= 1e-12);
        }
    }

    #[test]
    fn variational_routes_on_rank_deficient_pairs(alg in algebra(), seed: u64, rs in 1usize..=3, rr in 1usize..=3) {
        let mut rng = rng_from_seed(seed);
        let s = random::random_density_rank(&alg, rs, &mut rng);
        let r = random::random_density_rank(&alg, rr, &mut rng);
        let f = fidelity(&s, &r).unwrap();
        for route in [Route::Var1, Route::Var2] {
            let w = fidelity_variational(&s, &r, route, &OptimizerConfig::default()).unwrap();
            prop_assert!((w.value() - f).abs() <= 1e-6, "{:?}: {} vs {}", route, w.value(), f);
        }
    }

    #[test]
    fn fidelity_symmetric_and_in_range(alg in algebra(), seed: u64, rank in 1usize..=3) {
        let mut rng = rng_from_seed(seed);
        let s = random::random_density_rank(&alg, rank, &mut rng);
        let r = random::random_density(&alg, &mut rng);
        let f = fidelity(&s, &r).unwrap();
        prop_assert!((f - fidelity(&r, &s).unwrap()).abs() <= 1e-10);
        prop_assert!((-1e-12..=1.0 + 1e-9).contains(&f));
        let d = bures_distance(&s, &r).unwrap();
        prop_assert!((d - bures_distance(&r, &s).unwrap()).abs() <= 1e-10);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn choi_is_linear(alg in matrix_algebra(), seed: u64, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = rng_from_seed(seed);
        let phi = KrausChannel::random_cptp(&alg, 2, &mut rng).to_map();
        let psi = LinearMap::transpose(&alg);
        let lhs = phi.combine(a, &psi, b).unwrap().choi().unwrap().matrix;
        let rhs = phi.choi().unwrap().matrix.scale(a) + psi.choi().unwrap().matrix.scale(b);
        prop_assert!(linalg::max_abs(&(lhs - rhs)) <= 1e-12);
    }

    #[test]
    fn composition_of_cp_maps_is_cp(alg in algebra(), seed: u64) {
        let mut rng = rng_from_seed(seed);
        let phi = KrausChannel::random_cptp(&alg, 2, &mut rng).to_map();
        let psi = KrausChannel::random_cptp(&alg, 3, &mut rng).to_map();
        prop_assert!(phi.is_completely_positive(1e-10).verdict && psi.is_completely_positive(1e-10).verdict);
        prop_assert!(phi.compose(&psi).unwrap().is_completely_positive(1e-10).verdict);
    }

    #[test]
    fn kraus_duals_are_schwarz(alg in algebra(), seed: u64) {
        let ch = KrausChannel::random_cptp(&alg, 3, &mut rng_from_seed(seed));
        let cert = ch.dual().is_schwarz_sampled(200, seed);
        prop_assert!(cert.verdict, "worst {}", cert.worst_violation);
    }

    #[test]
    fn channels_preserve_trace(alg in algebra(), seed: u64) {
        let mut rng = rng_from_seed(seed);
        let ch = KrausChannel::random_cptp(&alg, 1 + (seed % 4) as usize, &mut rng);
        let rho = random::random_density(&alg, &mut rng);
        prop_assert!((ch.apply(&rho).unwrap().trace().re - 1.0).abs() <= 1e-10);
        prop_assert!(ch.to_map().is_trace_preserving(1e-10));
    }

    #[test]
    fn unitary_round_trip(d in 1usize..=4, seed: u64) {
        let alg = TracialAlgebra::matrix(d);
        let u = random::random_unitary(&alg, &mut rng_from_seed(seed));
        let cfg = RecoveryConfig { seed, ..RecoveryConfig::default() };
        let rec = KrausChannel::unitary(u.clone()).unwrap().recover_unitary(&cfg).unwrap();
        prop_assert!(distance_up_to_phase(&rec.u, &u).unwrap() <= 1e-8);
    }

    #[test]
    fn predual_n1_matches_operator_positivity(alg in algebra(), seed: u64, positive: bool) {
        let mut rng = rng_from_seed(seed);
        let y = if positive { random::random_positive(&alg, Some(1), &mut rng) } else { random::random_hermitian(&alg, &mut rng) };
        let omega = PredualMatrix::from_operators(1, alg.clone(), vec![y.clone()]).unwrap();
        prop_assert_eq!(omega.is_predual_positive(1e-10).verdict, y.is_positive(1e-10).unwrap());
    }

    #[test]
    fn predual_positivity_survives_congruence(alg in matrix_algebra(), seed: u64) {
        let mut rng = rng_from_seed(seed);
        let d = alg.blocks()[0].dim;
        let ch = KrausChannel::random_cptp(&alg, 2, &mut rng);
        let target = TracialAlgebra::matrix(d);
        let lift = LinearMap::from_fn(&alg, &target, |x| {
            AlgebraElement::from_matrix(target.clone(), ch.apply(x).unwrap().block(0).clone()).unwrap()
        });
        let omega = PredualMatrix::from_lift(&lift).unwrap();
        prop_assert!(omega.is_predual_positive(1e-10).verdict);
        let c = random::random_element(&alg, &mut rng);
        let scale = c.norm().powi(2).max(1.0);
        prop_assert!(omega.congruence(&c).unwrap().is_predual_positive(1e-10 * scale).verdict);
    }

    #[test]
    fn car_embedding_preserves_everything(seed: u64, k in 1usize..=3) {
        let tower = CarTower::default();
        let alg = tower.algebra(k).unwrap();
        let mut rng = rng_from_seed(seed);
        let s = random::random_density(&alg, &mut rng);
        let r = random::random_density_rank(&alg, 1, &mut rng);
        let (es, er) = (tower.embed_density(&s, k).unwrap(), tower.embed_density(&r, k).unwrap());
        prop_assert!((fidelity(&s, &r).unwrap() - fidelity(&es, &er).unwrap()).abs() <= 1e-10);
        prop_assert!((bures_distance(&s, &r).unwrap() - bures_distance(&es, &er).unwrap()).abs() <= 1e-10);
        let (a, b) = random::orthogonal_pair(&alg, &mut rng);
        let (ea, eb) = (tower.embed(&a, k).unwrap(), tower.embed(&b, k).unwrap());
        prop_assert_eq!(a.are_orthogonal(&b, 1e-10).unwrap(), ea.are_orthogonal(&eb, 1e-10).unwrap());
        prop_assert!((ea.trace() - a.trace()).norm() <= 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sweeps_are_bit_reproducible(seed: u64, d in 2usize..=3) {
        let alg = TracialAlgebra::matrix(d);
        let run = || harness::monotonicity_sweep(&ChannelSource::RandomCptp, &alg, PairSampling::Mixed, 20, seed, 1e-9).unwrap();
        let (a, b) = (run(), run());
        let strip = |mut r: harness::SweepReport| { r.runtime_ms = None; serde_json::to_string(&r).unwrap() };
        prop_assert_eq!(a.to_csv(), b.to_csv());
        prop_assert_eq!(strip(a), strip(b));
    }
}

#[test]
fn mixing_algebras_is_rejected() {
    let a = AlgebraElement::identity(&TracialAlgebra::matrix(2));
    let b = AlgebraElement::identity(&TracialAlgebra::from_pairs(&[(2, 0.5)]).unwrap());
    assert_eq!(a.try_add(&b), Err(FidError::AlgebraMismatch));
    let s = DensityElement::maximally_mixed(a.algebra());
    let r = DensityElement::maximally_mixed(b.algebra());
    assert_eq!(fidelity(&s, &r), Err(FidError::AlgebraMismatch));
}
