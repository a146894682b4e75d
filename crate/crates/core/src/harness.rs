//! Randomised sweeps over channels and states, and fidelity-preservation
//! classification.
//!
//! Trials run in parallel; trial `t` draws everything from its own generator
//! seeded with `derive_seed(seed, t)`, and reductions pick the first index
//! attaining the minimum, so reports do not depend on scheduling.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::algebra::{AlgebraElement, DensityElement, TracialAlgebra, DEFAULT_PSD_TOL};
use crate::channel::{preservation_probe, reconstruct_unitary, KrausChannel, LinearMap};
use crate::error::{FidError, Result};
use crate::fidelity::{bures_distance, fidelity};
use crate::io;
use crate::random::{self, derive_seed, rng_from_seed, SeededRng};

pub const DEFAULT_MARGIN_TOL: f64 = 1e-9;
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-8;
pub const INJECTIVITY_FLOOR: f64 = 1e-8;

/// Trace tolerance for channel outputs, which carry roundoff from the map.
const OUTPUT_TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub margin: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub kind: String,
    pub n_trials: usize,
    pub min_margin: f64,
    pub margin_tol: f64,
    pub pass: bool,
    pub seed: u64,
    pub worst_case: Value,
    pub note: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub diagnostics: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
    #[serde(skip)]
    pub trials: Vec<TrialRecord>,
}

impl SweepReport {
    /// Per-trial margins with header `trial_index,margin,seed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial_index,margin,seed\n");
        for t in &self.trials {
            out.push_str(&format!("{},{:e},{}\n", t.trial_index, t.margin, t.seed));
        }
        out
    }
}

/// Where the channels of a monotonicity sweep come from.
#[derive(Debug, Clone)]
pub enum ChannelSource {
    /// Stinespring truncations of Haar isometries with 1 to 4 Kraus operators.
    RandomCptp,
    /// `p·(x ↦ u xᵀ u*) + (1 − p)·(mixed unitary)`: positive, unital and trace
    /// preserving, usually not completely positive.
    RandomUnitalPositive,
    Unitary,
    /// Depolarising with `p` uniform in `(0, 1]`.
    Depolarizing,
    UserSupplied(LinearMap),
}

impl ChannelSource {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RandomCptp => "random_cptp",
            Self::RandomUnitalPositive => "random_unital_positive",
            Self::Unitary => "unitary",
            Self::Depolarizing => "depolarizing",
            Self::UserSupplied(_) => "user_supplied",
        }
    }

    fn sample(&self, alg: &Arc<TracialAlgebra>, rng: &mut SeededRng) -> (LinearMap, Value) {
        match self {
            Self::RandomCptp => {
                let k = rng.random_range(1..=4);
                let ch = KrausChannel::random_cptp(alg, k, rng);
                (ch.to_map(), io::channel_to_json(&ch))
            }
            Self::RandomUnitalPositive => {
                let p: f64 = rng.random_range(0.0..=1.0);
                let u = random::random_unitary(alg, rng);
                let twisted = LinearMap::conjugation(&u).compose(&LinearMap::transpose(alg)).expect("same algebra");
                let mix = KrausChannel::random_mixed_unitary(alg, 3, rng).to_map();
                let map = twisted.combine(p, &mix, 1.0 - p).expect("same algebra");
                let desc = json!({"transpose_weight": p, "map": io::linear_map_to_json(&map)});
                (map, desc)
            }
            Self::Unitary => {
                let u = random::random_unitary(alg, rng);
                (LinearMap::conjugation(&u), json!({"unitary": io::element_to_json(&u)}))
            }
            Self::Depolarizing => {
                let p = 1.0 - rng.random_range(0.0..1.0);
                (LinearMap::depolarizing(alg, p), json!({"depolarizing": p}))
            }
            Self::UserSupplied(map) => (map.clone(), json!("user_supplied")),
        }
    }
}

/// Which density pairs a sweep draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSampling {
    /// Cycles through full-rank, orthogonal and pure pairs.
    #[default]
    Mixed,
    FullRank,
    Orthogonal,
}

fn sample_pair(
    alg: &Arc<TracialAlgebra>,
    mode: PairSampling,
    t: usize,
    rng: &mut SeededRng,
) -> (DensityElement, DensityElement) {
    let total: usize = alg.blocks().iter().map(|b| b.dim).sum();
    let kind = match mode {
        PairSampling::Mixed => t % 3,
        PairSampling::FullRank => 0,
        PairSampling::Orthogonal => 1,
    };
    match kind {
        1 if total >= 2 => random::orthogonal_pair(alg, rng),
        2 => (random::random_density_rank(alg, 1, rng), random::random_density_rank(alg, 1, rng)),
        _ => (random::random_density(alg, rng), random::random_density(alg, rng)),
    }
}

fn output_density(map: &LinearMap, rho: &DensityElement) -> Result<DensityElement> {
    DensityElement::with_tolerances(map.apply(rho)?.hermitian_part(), DEFAULT_PSD_TOL, OUTPUT_TRACE_TOL)
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

/// First index attaining the minimum margin.
fn argmin(margins: &[f64]) -> usize {
    let mut best = 0;
    for (i, &m) in margins.iter().enumerate() {
        if m < margins[best] {
            best = i;
        }
    }
    best
}

struct Trial {
    margin: f64,
    seed: u64,
    detail: Value,
}

fn run_trials(
    n: usize,
    seed: u64,
    f: impl Fn(usize, &mut SeededRng) -> Result<(f64, Value)> + Sync,
) -> Result<Vec<Trial>> {
    if n == 0 {
        return Err(FidError::InvalidConfig("a sweep needs at least one trial".into()));
    }
    (0..n)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, t as u64);
            let mut rng = rng_from_seed(s);
            let (margin, detail) = f(t, &mut rng)?;
            Ok(Trial { margin, seed: s, detail })
        })
        .collect()
}

fn assemble(kind: &str, trials: Vec<Trial>, seed: u64, margin_tol: f64, start: Instant) -> SweepReport {
    let margins: Vec<f64> = trials.iter().map(|t| t.margin).collect();
    let worst = argmin(&margins);
    let min_margin = margins[worst];
    let mut worst_case = trials[worst].detail.clone();
    worst_case["trial_index"] = json!(worst);
    worst_case["seed"] = json!(trials[worst].seed);
    worst_case["margin"] = json!(min_margin);
    let records = trials
        .iter()
        .enumerate()
        .map(|(i, t)| TrialRecord { trial_index: i, margin: t.margin, seed: t.seed })
        .collect();
    let pass = min_margin >= -margin_tol;
    SweepReport {
        kind: kind.to_string(),
        n_trials: trials.len(),
        min_margin,
        margin_tol,
        pass,
        seed,
        worst_case,
        note: if pass {
            format!("no violation in {} samples", trials.len())
        } else {
            format!("violation found in {} samples", trials.len())
        },
        diagnostics: Value::Null,
        runtime_ms: Some(elapsed_ms(start)),
        trials: records,
    }
}

/// Margins `F(E σ, E ρ) − F(σ, ρ)` over random channels and pairs.
pub fn monotonicity_sweep(
    source: &ChannelSource,
    algebra: &Arc<TracialAlgebra>,
    pairs: PairSampling,
    n_trials: usize,
    seed: u64,
    margin_tol: f64,
) -> Result<SweepReport> {
    let start = Instant::now();
    if let ChannelSource::UserSupplied(map) = source {
        if **map.domain() != **algebra || **map.codomain() != **algebra {
            return Err(FidError::AlgebraMismatch);
        }
    }
    let trials = run_trials(n_trials, seed, |t, rng| {
        let (map, desc) = source.sample(algebra, rng);
        let (s, r) = sample_pair(algebra, pairs, t, rng);
        let before = fidelity(&s, &r)?;
        let after = fidelity(&output_density(&map, &s)?, &output_density(&map, &r)?)?;
        let detail = json!({
            "channel": desc,
            "sigma": io::element_to_json(&s),
            "rho": io::element_to_json(&r),
            "fidelity_before": before,
            "fidelity_after": after,
        });
        Ok((after - before, detail))
    })?;
    let mut report = assemble("monotonicity", trials, seed, margin_tol, start);
    report.diagnostics = json!({"source": source.name()});
    Ok(report)
}

/// Triangle margins `min over rotations of d(a,b) + d(b,c) − d(a,c)` of the
/// Bures distance on random triples in `M_d`, with symmetry and identity
/// defects as diagnostics.
pub fn metric_sweep(d: usize, n_trials: usize, seed: u64, margin_tol: f64) -> Result<SweepReport> {
    metric_sweep_on(&TracialAlgebra::matrix(d), n_trials, seed, margin_tol)
}

pub fn metric_sweep_on(
    algebra: &Arc<TracialAlgebra>,
    n_trials: usize,
    seed: u64,
    margin_tol: f64,
) -> Result<SweepReport> {
    let start = Instant::now();
    let defects = std::sync::Mutex::new(Vec::with_capacity(n_trials));
    let trials = run_trials(n_trials, seed, |t, rng| {
        let draw = |rng: &mut SeededRng, k: usize| match k % 4 {
            3 => random::random_density_rank(algebra, 1, rng),
            _ => random::random_density(algebra, rng),
        };
        let a = draw(rng, t);
        let b = draw(rng, t / 4);
        let c = if t % 10 == 9 { a.clone() } else { draw(rng, t / 16) };
        let ab = bures_distance(&a, &b)?;
        let bc = bures_distance(&b, &c)?;
        let ac = bures_distance(&a, &c)?;
        let margin = (ab + bc - ac).min(ab + ac - bc).min(ac + bc - ab);
        let symmetry = (ab - bures_distance(&b, &a)?).abs();
        let identity = (1.0 - fidelity(&a, &a)?).abs();
        defects.lock().expect("no poisoning").push((t, symmetry, identity));
        let detail = json!({
            "sigma": io::element_to_json(&a),
            "rho": io::element_to_json(&b),
            "omega": io::element_to_json(&c),
            "distances": [ab, bc, ac],
        });
        Ok((margin, detail))
    })?;
    let mut report = assemble("metric", trials, seed, margin_tol, start);
    let defects = defects.into_inner().expect("no poisoning");
    let symmetry = defects.iter().map(|x| x.1).fold(0.0, f64::max);
    let identity = defects.iter().map(|x| x.2).fold(0.0, f64::max);
    report.pass = report.pass && symmetry <= 1e-10 && identity <= 1e-10;
    report.diagnostics = json!({"max_symmetry_defect": symmetry, "max_identity_defect": identity});
    if !report.pass {
        report.note = format!("violation found in {} samples", report.n_trials);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Preserving,
    StrictlyIncreasingSomewhere,
}

#[derive(Debug, Clone, Serialize)]
pub struct InjectivityCertificate {
    pub smallest_singular_value: f64,
    pub injective: bool,
}

/// Smallest singular value of the map's basis matrix; the map counts as
/// injective when it exceeds `1e-8`.
pub fn injectivity_probe(map: &LinearMap) -> InjectivityCertificate {
    let s = map.smallest_singular_value();
    InjectivityCertificate { smallest_singular_value: s, injective: s > INJECTIVITY_FLOOR }
}

#[derive(Debug, Clone, Serialize)]
pub struct PreservationReport {
    pub classification: Classification,
    pub n_pairs: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_abs_delta: f64,
    pub max_increase: f64,
    pub note: String,
    /// Pair with the largest fidelity increase, when not preserving.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovered_unitary: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_error: Option<String>,
    pub injectivity: InjectivityCertificate,
    /// False only if the map is classified preserving but is not injective.
    pub lemma_consistent: bool,
    #[serde(skip)]
    pub recovered: Option<AlgebraElement>,
}

/// Samples density pairs and classifies `map` by whether it changes
/// fidelity by more than `tol`. Preserving maps on a single block get a
/// unitary reconstruction attached.
pub fn preservation_classify(map: &LinearMap, n_pairs: usize, seed: u64, tol: f64) -> Result<PreservationReport> {
    let probe = preservation_probe(map, n_pairs, seed)?;
    let injectivity = injectivity_probe(map);
    let preserving = probe.max_abs_delta <= tol;
    let mut report = PreservationReport {
        classification: if preserving {
            Classification::Preserving
        } else {
            Classification::StrictlyIncreasingSomewhere
        },
        n_pairs,
        seed,
        tol,
        max_abs_delta: probe.max_abs_delta,
        max_increase: probe.max_increase,
        note: if preserving {
            format!("no violation in {n_pairs} samples")
        } else {
            format!("fidelity changed by up to {:e} in {n_pairs} samples", probe.max_abs_delta)
        },
        witness: None,
        recovered_unitary: None,
        recovery_residual: None,
        recovery_error: None,
        lemma_consistent: !(preserving && !injectivity.injective),
        injectivity,
        recovered: None,
    };
    if preserving {
        match reconstruct_unitary(map, tol) {
            Ok(rec) => {
                report.recovered_unitary = Some(io::element_to_json(&rec.u));
                report.recovery_residual = Some(rec.residual.max(rec.unitarity_defect));
                report.recovered = Some(rec.u);
            }
            Err(e) => report.recovery_error = Some(e.to_string()),
        }
    } else if let Some(w) = probe.witness {
        report.witness = Some(json!({
            "sigma": io::element_to_json(&w.sigma),
            "rho": io::element_to_json(&w.rho),
            "fidelity_before": w.fidelity_before,
            "fidelity_after": w.fidelity_after,
        }));
    }
    Ok(report)
}
