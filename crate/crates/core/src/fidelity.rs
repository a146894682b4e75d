//! Fidelity `F_τ(σ,ρ) = τ(|σ^{1/2} ρ^{1/2}|)` by several independent routes.
//!
//! * direct: trace of the absolute value of `σ^{1/2} ρ^{1/2}`;
//! * μ-integral: integral of the generalised singular value function;
//! * variational: infimum of `τ(ρy) + τ(σy⁻¹)` over positive invertible `y`
//!   (and the symmetrised two-variable form);
//! * block supremum: `sup |τ(x)|` over `x` making `[[σ, x], [x*, ρ]]` positive,
//!   attained at `x = σ^{1/2} u* ρ^{1/2}` for the polar unitary `u`.

use rand::Rng;
use serde::Serialize;

use crate::algebra::{AlgebraElement, DensityElement, DEFAULT_PSD_TOL};
use crate::error::{FidError, Result};
use crate::linalg::{self, CMat};
use crate::random;

/// Which characterisation a variational witness minimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// `½ inf τ(ay) + τ(ay⁻¹) = τ(a)`.
    TracePos,
    /// `½ inf τ(ρy) + τ(σy⁻¹) = F`.
    Var1,
    /// `¼ [inf_y (τ(ρy) + τ(σy⁻¹)) + inf_z (τ(σz) + τ(ρz⁻¹))] = F`.
    Var2,
}

/// Where the optimiser starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartPoint {
    /// The geometric-mean witness `ρ_ε⁻¹ # σ_ε`.
    ClosedForm,
    Identity,
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stop once `(f_old − f_new)/|f_old|` drops below this.
    pub rel_decrease_tol: f64,
    /// Stop once the gradient norm drops below this.
    pub gradient_tol: f64,
    /// Exhausting the budget with a gradient above this is a failure.
    pub failure_gradient: f64,
    /// Inputs with an eigenvalue below this are regularised for the seed.
    pub regularization_threshold: f64,
    /// Largest trace mass of the regulariser `ε·1`, i.e. `ε = regularization / τ(1)`.
    /// The seed tries every decade from here down to `min_regularization`.
    pub regularization: f64,
    pub min_regularization: f64,
    /// Iterates keep their eigenvalues in `[y_floor, 1/y_floor]`. Inputs that
    /// are singular up to roundoff make the objective unbounded below past
    /// this range.
    pub y_floor: f64,
    pub start: StartPoint,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_decrease_tol: 1e-12,
            gradient_tol: 1e-9,
            failure_gradient: 1e-6,
            regularization_threshold: 1e-8,
            regularization: 1e-2,
            min_regularization: 1e-14,
            y_floor: 1e-9,
            start: StartPoint::ClosedForm,
        }
    }
}

/// A positive invertible `y` together with the objective it achieves.
#[derive(Debug, Clone)]
pub struct VariationalWitness {
    pub route: Route,
    pub y: AlgebraElement,
    /// The second variable of [`Route::Var2`].
    pub partner: Option<AlgebraElement>,
    pub objective_value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// ε used to seed the optimiser; zero when no regularisation was needed.
    pub regularization: f64,
    /// Objective after each accepted iterate, starting with the seed.
    pub history: Vec<f64>,
}

impl VariationalWitness {
    /// The quantity the route characterises (F for Var1/Var2, τ(a) for TracePos).
    pub fn value(&self) -> f64 {
        match self.route {
            Route::TracePos | Route::Var1 => self.objective_value / 2.0,
            Route::Var2 => self.objective_value / 4.0,
        }
    }
}

/// The map `y ↦ τ(p·y) + τ(q·y⁻¹)` on positive invertible elements.
#[derive(Debug, Clone)]
pub struct PairObjective {
    p: AlgebraElement,
    q: AlgebraElement,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub y: AlgebraElement,
    pub value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub history: Vec<f64>,
}

/// Eigen-data of `h` and the values of `y = exp(h)` derived from it.
struct LogPoint {
    h: AlgebraElement,
    eig: Vec<(Vec<f64>, CMat)>,
    y: AlgebraElement,
    y_inv: AlgebraElement,
}

impl PairObjective {
    pub fn new(p: AlgebraElement, q: AlgebraElement) -> Result<Self> {
        p.try_add(&q)?;
        Ok(Self { p, q })
    }

    pub fn value(&self, y: &AlgebraElement) -> Result<f64> {
        let y_inv = invert_positive(y);
        self.value_with_inverse(y, &y_inv)
    }

    fn value_with_inverse(&self, y: &AlgebraElement, y_inv: &AlgebraElement) -> Result<f64> {
        Ok((self.p.trace_product(y)? + self.q.trace_product(y_inv)?).re)
    }

    /// Gradient with respect to `y` in the trace pairing: `p − y⁻¹ q y⁻¹`.
    pub fn gradient(&self, y: &AlgebraElement) -> Result<AlgebraElement> {
        let y_inv = invert_positive(y);
        self.gradient_with_inverse(&y_inv)
    }

    fn gradient_with_inverse(&self, y_inv: &AlgebraElement) -> Result<AlgebraElement> {
        let middle = y_inv.try_mul(&self.q)?.try_mul(y_inv)?;
        Ok(self.p.try_sub(&middle)?.hermitian_part())
    }

    /// Directional derivative `τ(G·δ)` of the objective at `y` along `δ`.
    pub fn directional_derivative(&self, y: &AlgebraElement, delta: &AlgebraElement) -> Result<f64> {
        Ok(self.gradient(y)?.trace_product(delta)?.re)
    }

    fn log_point(&self, h: AlgebraElement, floor: f64) -> LogPoint {
        let lo = floor.ln();
        let eig: Vec<(Vec<f64>, CMat)> = h
            .blocks()
            .iter()
            .map(|m| {
                let (vals, vecs) = linalg::eigh(m);
                (vals.iter().map(|&l| l.clamp(lo, -lo)).collect(), vecs)
            })
            .collect();
        let y = AlgebraElement::from_blocks(
            h.algebra().clone(),
            eig.iter().map(|(v, u)| linalg::reconstruct(u, &v.iter().map(|l| l.exp()).collect::<Vec<_>>())).collect(),
        )
        .expect("same shapes");
        let y_inv = AlgebraElement::from_blocks(
            h.algebra().clone(),
            eig.iter()
                .map(|(v, u)| linalg::reconstruct(u, &v.iter().map(|l| (-l).exp()).collect::<Vec<_>>()))
                .collect(),
        )
        .expect("same shapes");
        LogPoint { h, eig, y, y_inv }
    }

    /// Gradient with respect to the Hermitian logarithm `h` of `y = exp(h)`,
    /// in blockwise Frobenius coordinates (Daleckii–Krein formula).
    fn log_gradient(&self, pt: &LogPoint) -> Result<AlgebraElement> {
        let g = self.gradient_with_inverse(&pt.y_inv)?;
        let alg = g.algebra().clone();
        let blocks = g
            .blocks()
            .iter()
            .zip(&pt.eig)
            .zip(alg.blocks())
            .map(|((gb, (vals, u)), blk)| {
                let n = vals.len();
                let gt = u.adjoint() * gb * u;
                let hadamard = CMat::from_fn(n, n, |i, j| gt[(i, j)] * divided_exp(vals[i], vals[j]));
                (u * hadamard * u.adjoint()).scale(blk.weight)
            })
            .collect();
        Ok(AlgebraElement::from_blocks(alg, blocks)?.hermitian_part())
    }

    /// Descent on `h = log y`: limited-memory BFGS directions with Armijo
    /// backtracking, falling back to the plain gradient whenever the
    /// quasi-Newton direction is not a descent direction.
    pub fn minimize(&self, start: &AlgebraElement, cfg: &OptimizerConfig) -> Result<Minimum> {
        self.minimize_log(start.hermitian_fn(|l| l.max(cfg.y_floor).ln()), cfg)
    }

    /// [`minimize`](Self::minimize) started from `exp(h0)`.
    pub fn minimize_log(&self, h0: AlgebraElement, cfg: &OptimizerConfig) -> Result<Minimum> {
        const MEMORY: usize = 12;
        let mut pt = self.log_point(h0, cfg.y_floor);
        let mut value = self.value_with_inverse(&pt.y, &pt.y_inv)?;
        let mut history = vec![value];
        let mut grad = self.log_gradient(&pt)?;
        let mut gnorm = frob(&grad);
        let mut pairs: Vec<(AlgebraElement, AlgebraElement, f64)> = Vec::new();
        let mut iterations = 0;
        while iterations < cfg.max_iterations {
            if gnorm < cfg.gradient_tol {
                break;
            }
            iterations += 1;
            let mut direction = lbfgs_direction(&grad, &pairs)?;
            let mut slope = inner(&grad, &direction);
            if slope.is_nan() || slope >= 0.0 {
                direction = grad.scale_real(-1.0);
                slope = -gnorm * gnorm;
                pairs.clear();
            }
            let mut accepted = None;
            let mut t = if pairs.is_empty() { 1.0 / gnorm.max(1.0) } else { 1.0 };
            for _ in 0..80 {
                let trial_h = pt.h.try_add(&direction.scale_real(t))?;
                let trial = self.log_point(trial_h, cfg.y_floor);
                let trial_value = self.value_with_inverse(&trial.y, &trial.y_inv)?;
                if trial_value <= value + 1e-4 * t * slope {
                    accepted = Some((trial, trial_value));
                    break;
                }
                t *= 0.5;
            }
            let Some((next, next_value)) = accepted else {
                // no descent available at machine precision
                break;
            };
            let decrease = value - next_value;
            let next_grad = self.log_gradient(&next)?;
            let s = next.h.try_sub(&pt.h)?;
            let yk = next_grad.try_sub(&grad)?;
            let sy = inner(&s, &yk);
            if sy > 1e-16 * frob(&s) * frob(&yk) {
                if pairs.len() == MEMORY {
                    pairs.remove(0);
                }
                pairs.push((s, yk, sy));
            }
            pt = next;
            value = next_value;
            history.push(value);
            grad = next_grad;
            gnorm = frob(&grad);
            if decrease <= cfg.rel_decrease_tol * value.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        if iterations >= cfg.max_iterations && gnorm > cfg.failure_gradient {
            return Err(FidError::NonConvergence { iterations, gradient_norm: gnorm });
        }
        Ok(Minimum { y: pt.y, value, iterations, gradient_norm: gnorm, history })
    }
}

/// Two-loop recursion: `−H·g` for the L-BFGS inverse-Hessian estimate `H`.
fn lbfgs_direction(grad: &AlgebraElement, pairs: &[(AlgebraElement, AlgebraElement, f64)]) -> Result<AlgebraElement> {
    let mut q = grad.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, sy) in pairs.iter().rev() {
        let a = inner(s, &q) / sy;
        q = q.try_sub(&y.scale_real(a))?;
        alphas.push(a);
    }
    if let Some((_, y, sy)) = pairs.last() {
        q = q.scale_real(sy / inner(y, y));
    }
    for ((s, y, sy), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = inner(y, &q) / sy;
        q = q.try_add(&s.scale_real(a - b))?;
    }
    Ok(q.scale_real(-1.0))
}

/// Real Frobenius pairing `Σ_b Re tr(a_b* b_b)`.
fn inner(a: &AlgebraElement, b: &AlgebraElement) -> f64 {
    a.blocks()
        .iter()
        .zip(b.blocks())
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| (u.conj() * v).re).sum::<f64>())
        .sum()
}

/// `(e^a − e^b)/(a − b)`, continuous at `a = b`.
fn divided_exp(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d.abs() < 1e-12 {
        (0.5 * (a + b)).exp()
    } else if d > 0.0 {
        b.exp() * d.exp_m1() / d
    } else {
        a.exp() * (-d).exp_m1() / (-d)
    }
}

fn frob(x: &AlgebraElement) -> f64 {
    x.blocks().iter().map(linalg::frobenius_norm).map(|v| v * v).sum::<f64>().sqrt()
}

fn invert_positive(y: &AlgebraElement) -> AlgebraElement {
    y.hermitian_fn(|l| 1.0 / l)
}

/// `σ^{1/2} ρ^{1/2}` for positive arguments.
fn root_product(a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
    a.sqrt_psd()?.try_mul(&b.sqrt_psd()?)
}

/// `τ(|a^{1/2} b^{1/2}|)` for arbitrary positive `a`, `b`.
pub fn tracial_geometric_mean(a: &AlgebraElement, b: &AlgebraElement) -> Result<f64> {
    Ok(root_product(a, b)?.abs().trace().re)
}

/// τ-fidelity of two density elements.
pub fn fidelity(sigma: &DensityElement, rho: &DensityElement) -> Result<f64> {
    tracial_geometric_mean(sigma, rho)
}

/// Fidelity as the integral of the singular value function of `σ^{1/2}ρ^{1/2}`.
pub fn fidelity_via_mu(sigma: &DensityElement, rho: &DensityElement) -> Result<f64> {
    // adding 0.0 turns an empty sum's -0.0 into 0.0
    Ok(root_product(sigma, rho)?.singular_value_function().integral() + 0.0)
}

/// Bures distance `√(1 − F)`.
pub fn bures_distance(sigma: &DensityElement, rho: &DensityElement) -> Result<f64> {
    Ok((1.0 - fidelity(sigma, rho)?).max(0.0).sqrt())
}

/// `(τ(|a^{1/2}b^{1/2}|), √(τ(a)τ(b)))` for positive `a`, `b`.
pub fn fidelity_bounds(a: &AlgebraElement, b: &AlgebraElement) -> Result<(f64, f64)> {
    for x in [a, b] {
        if !x.is_positive(DEFAULT_PSD_TOL)? {
            return Err(FidError::NotPositive { min_eigenvalue: x.min_eigenvalue() });
        }
    }
    let mean = tracial_geometric_mean(a, b)?;
    let bound = (a.trace().re * b.trace().re).max(0.0).sqrt();
    Ok((mean, bound))
}

/// `ρ⁻¹ # σ = ρ^{-1/2} (ρ^{1/2} σ ρ^{1/2})^{1/2} ρ^{-1/2}`, the unique
/// minimiser of `τ(ρy) + τ(σy⁻¹)` for invertible σ, ρ.
pub fn closed_form_witness(sigma: &AlgebraElement, rho: &AlgebraElement) -> Result<AlgebraElement> {
    let rho_half = rho.sqrt_psd()?;
    let rho_inv_half = rho.hermitian_fn(|l| 1.0 / l.sqrt());
    let middle = rho_half.try_mul(sigma)?.try_mul(&rho_half)?.sqrt_psd()?;
    Ok(rho_inv_half.try_mul(&middle)?.try_mul(&rho_inv_half)?.hermitian_part())
}

/// Eigenvalues below this fraction of the largest count as zero when taking
/// supports.
const SUPPORT_TOL: f64 = 1e-12;

fn c64(x: f64) -> num_complex::Complex64 {
    linalg::c(x, 0.0)
}

/// Pseudo-inverse-style function of a Hermitian matrix: `g` on eigenvalues
/// above `cut`, zero elsewhere.
fn on_support(vals: &[f64], vecs: &CMat, cut: f64, g: impl Fn(f64) -> f64) -> CMat {
    linalg::reconstruct(vecs, &vals.iter().map(|&l| if l > cut { g(l) } else { 0.0 }).collect::<Vec<_>>())
}

fn support_cut(vals: &[f64]) -> f64 {
    SUPPORT_TOL * vals.iter().fold(0.0f64, |m, &l| m.max(l.abs())).max(f64::MIN_POSITIVE)
}

/// `log y` for a near-minimiser of `tr(p y) + tr(q y⁻¹)` on one block when
/// `p` or `q` is singular. With `P` the support of `p` and
/// `T = p⁺ # (PqP) + η` on `P`, `y⁻¹` is the matrix over `P ⊕ P⊥` whose
/// Schur complement onto `P` is `T⁻¹`, with `δ` on `P⊥`. The gap to the
/// infimum is `O(η + δ)`.
fn support_seed_block(p: &CMat, q: &CMat, eta: f64, delta: f64) -> CMat {
    let n = p.nrows();
    let (pv, pu) = linalg::eigh(p);
    let cut = support_cut(&pv);
    let proj = on_support(&pv, &pu, cut, |_| 1.0);
    let comp = linalg::identity(n) - &proj;
    let p_half = on_support(&pv, &pu, cut, f64::sqrt);
    let p_inv_half = on_support(&pv, &pu, cut, |l| 1.0 / l.sqrt());
    let middle = linalg::hermitian_fn(&linalg::hermitian_part(&(&p_half * q * &p_half)), |l| l.max(0.0).sqrt());
    let t = linalg::hermitian_part(&(&p_inv_half * middle * &p_inv_half)) + &proj * c64(eta);
    let (tv, tu) = linalg::eigh(&t);
    let s = on_support(&tv, &tu, 0.5 * eta, |l| 1.0 / l);
    let q_pp = linalg::hermitian_part(&(&proj * q * &proj));
    let (qv, qu) = linalg::eigh(&q_pp);
    let k = on_support(&qv, &qu, support_cut(&qv), |l| 1.0 / l) * q * &comp;
    let kk = &k * k.adjoint();
    let x = s + (kk - &k - k.adjoint() + comp) * c64(delta);
    linalg::hermitian_fn(&linalg::hermitian_part(&x), |l| -l.ln())
}

/// Starting point for `y ↦ τ(p y) + τ(q y⁻¹)` as `log y`, with the ε used.
///
/// For singular inputs the infimum is not attained. Shrinking ε closes the
/// gap left by `(p + ε)⁻¹ # (q + ε)` but makes it ill-conditioned, so every
/// decade is scored in log coordinates, alongside the support-adapted
/// candidates of [`support_seed_block`], and the best one kept.
fn seed_point(
    obj: &PairObjective,
    p: &AlgebraElement,
    q: &AlgebraElement,
    cfg: &OptimizerConfig,
) -> Result<(AlgebraElement, f64)> {
    let log = |y: &AlgebraElement| y.hermitian_fn(|l| l.max(cfg.y_floor).ln());
    match cfg.start {
        StartPoint::Identity => Ok((AlgebraElement::zeros(p.algebra()), 0.0)),
        StartPoint::ClosedForm => {
            let floor = cfg.regularization_threshold;
            if p.min_eigenvalue() >= floor && q.min_eigenvalue() >= floor {
                return Ok((log(&closed_form_witness(q, p)?), 0.0));
            }
            let alg = p.algebra();
            let unit = AlgebraElement::identity(alg);
            let total = alg.total_trace();
            let mut best: Option<(f64, AlgebraElement, f64)> = None;
            let mut consider = |h: AlgebraElement, eps: f64| -> Result<()> {
                let pt = obj.log_point(h, cfg.y_floor);
                let v = obj.value_with_inverse(&pt.y, &pt.y_inv)?;
                if v.is_finite() && best.as_ref().is_none_or(|b| v < b.0) {
                    best = Some((v, pt.h, eps));
                }
                Ok(())
            };
            let mut mass = cfg.regularization;
            while mass >= cfg.min_regularization {
                let eps = mass / total;
                let shift = unit.scale_real(eps);
                // a rung whose inputs round to slightly negative is skipped
                if let Ok(y) = closed_form_witness(&q.try_add(&shift)?, &p.try_add(&shift)?) {
                    consider(log(&y), eps)?;
                }
                consider(
                    AlgebraElement::from_blocks(
                        alg.clone(),
                        p.blocks()
                            .iter()
                            .zip(q.blocks())
                            .map(|(pb, qb)| support_seed_block(pb, qb, eps, eps))
                            .collect(),
                    )?,
                    eps,
                )?;
                mass /= 10.0;
            }
            let (_, h, eps) = best.ok_or_else(|| FidError::InvalidConfig("empty regularisation ladder".into()))?;
            Ok((h, eps))
        }
    }
}

/// Minimises the Var1 or Var2 objective and returns the witness.
pub fn fidelity_variational(
    sigma: &DensityElement,
    rho: &DensityElement,
    route: Route,
    cfg: &OptimizerConfig,
) -> Result<VariationalWitness> {
    let s = sigma.element();
    let r = rho.element();
    let forward = PairObjective::new(r.clone(), s.clone())?;
    let (h0, eps_y) = seed_point(&forward, r, s, cfg)?;
    let first = forward.minimize_log(h0, cfg)?;
    match route {
        Route::Var1 => Ok(VariationalWitness {
            route,
            objective_value: first.value,
            iterations: first.iterations,
            gradient_norm: first.gradient_norm,
            regularization: eps_y,
            history: first.history,
            y: first.y,
            partner: None,
        }),
        Route::Var2 => {
            let backward = PairObjective::new(s.clone(), r.clone())?;
            let (h0, eps_z) = seed_point(&backward, s, r, cfg)?;
            let second = backward.minimize_log(h0, cfg)?;
            let history = combine_histories(&first.history, &second.history);
            Ok(VariationalWitness {
                route,
                objective_value: first.value + second.value,
                iterations: first.iterations + second.iterations,
                gradient_norm: first.gradient_norm.hypot(second.gradient_norm),
                regularization: eps_y.max(eps_z),
                history,
                y: first.y,
                partner: Some(second.y),
            })
        }
        Route::TracePos => {
            Err(FidError::InvalidConfig("the trace route takes one positive element; use trace_variational".into()))
        }
    }
}

/// Joint history of two independent descents, padding the shorter one with
/// its final value.
fn combine_histories(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n).map(|k| a[k.min(a.len() - 1)] + b[k.min(b.len() - 1)]).collect()
}

/// `½ inf_y τ(ay) + τ(ay⁻¹)`, which equals τ(a); returns the value and witness.
pub fn trace_variational(a: &AlgebraElement, cfg: &OptimizerConfig) -> Result<(f64, VariationalWitness)> {
    if !a.is_positive(DEFAULT_PSD_TOL)? {
        return Err(FidError::NotPositive { min_eigenvalue: a.min_eigenvalue() });
    }
    let objective = PairObjective::new(a.clone(), a.clone())?;
    let start = AlgebraElement::identity(a.algebra());
    let min = objective.minimize(&start, cfg)?;
    let witness = VariationalWitness {
        route: Route::TracePos,
        y: min.y,
        partner: None,
        objective_value: min.value,
        iterations: min.iterations,
        gradient_norm: min.gradient_norm,
        regularization: 0.0,
        history: min.history,
    };
    Ok((witness.value(), witness))
}

/// The attaining `x` of the block supremum and the contraction producing it.
#[derive(Debug, Clone)]
pub struct BlockWitness {
    pub x: AlgebraElement,
    /// `y` with `‖y‖ ≤ 1` and `x = σ^{1/2} y ρ^{1/2}`.
    pub contraction: AlgebraElement,
    /// Smallest eigenvalue of `[[σ, x], [x*, ρ]]` over all blocks.
    pub block_min_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct BlockSupremum {
    pub value: f64,
    pub witness: BlockWitness,
    /// Largest `|τ(σ^{1/2} y ρ^{1/2})|` over the sampled contractions.
    pub sampled_max: f64,
    pub n_samples: usize,
}

impl BlockSupremum {
    /// No sampled contraction beat the witness by more than `tol`.
    pub fn upper_bound_holds(&self, tol: f64) -> bool {
        self.sampled_max <= self.value + tol
    }
}

/// `[[a, x], [x*, b]]` for one block.
pub fn two_by_two(a: &CMat, x: &CMat, b: &CMat) -> CMat {
    let n = a.nrows();
    let mut m = CMat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(x);
    m.view_mut((n, 0), (n, n)).copy_from(&x.adjoint());
    m.view_mut((n, n), (n, n)).copy_from(b);
    m
}

/// Fidelity as `sup |τ(x)|` over `x` with `[[σ, x], [x*, ρ]] ≥ 0`, with the
/// upper bound spot-checked on `n_samples` random contractions.
pub fn fidelity_block_supremum(
    sigma: &DensityElement,
    rho: &DensityElement,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<BlockSupremum> {
    let s_half = sigma.sqrt_psd()?;
    let r_half = rho.sqrt_psd()?;
    // ρ^{1/2} σ^{1/2} = u |ρ^{1/2} σ^{1/2}|
    let (u, _) = r_half.try_mul(&s_half)?.polar();
    let contraction = u.adjoint();
    let x = s_half.try_mul(&contraction)?.try_mul(&r_half)?;
    let value = x.trace().norm();

    let block_min_eigenvalue = sigma
        .blocks()
        .iter()
        .zip(x.blocks())
        .zip(rho.blocks())
        .map(|((s, xb), r)| linalg::min_eigenvalue(&two_by_two(s, xb, r)))
        .fold(f64::INFINITY, f64::min);

    let mut sampled_max: f64 = 0.0;
    for _ in 0..n_samples {
        let y = random::random_contraction(sigma.algebra(), rng);
        let t = s_half.try_mul(&y)?.try_mul(&r_half)?.trace().norm();
        sampled_max = sampled_max.max(t);
    }
    Ok(BlockSupremum { value, witness: BlockWitness { x, contraction, block_min_eigenvalue }, sampled_max, n_samples })
}

/// Every route evaluated on one pair, with cross-route disagreement.
#[derive(Debug, Clone, Serialize)]
pub struct RouteReport {
    pub direct: f64,
    pub mu: f64,
    pub var1: f64,
    pub var2: f64,
    pub block: f64,
    /// Max pairwise disagreement over all five routes.
    pub max_disagreement: f64,
    /// Max pairwise disagreement over the non-iterative routes.
    pub max_disagreement_exact: f64,
    pub var1_iterations: usize,
    pub var2_iterations: usize,
    pub regularization: f64,
    pub block_min_eigenvalue: f64,
    pub block_sampled_max: f64,
}

pub fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

pub fn all_routes(
    sigma: &DensityElement,
    rho: &DensityElement,
    cfg: &OptimizerConfig,
    block_samples: usize,
    rng: &mut impl Rng,
) -> Result<RouteReport> {
    let direct = fidelity(sigma, rho)?;
    let mu = fidelity_via_mu(sigma, rho)?;
    let v1 = fidelity_variational(sigma, rho, Route::Var1, cfg)?;
    let v2 = fidelity_variational(sigma, rho, Route::Var2, cfg)?;
    let blk = fidelity_block_supremum(sigma, rho, block_samples, rng)?;
    let var1 = v1.value();
    let var2 = v2.value();
    Ok(RouteReport {
        direct,
        mu,
        var1,
        var2,
        block: blk.value,
        max_disagreement: spread(&[direct, mu, var1, var2, blk.value]),
        max_disagreement_exact: spread(&[direct, mu, blk.value]),
        var1_iterations: v1.iterations,
        var2_iterations: v2.iterations,
        regularization: v1.regularization.max(v2.regularization),
        block_min_eigenvalue: blk.witness.block_min_eigenvalue,
        block_sampled_max: blk.sampled_max,
    })
}
