use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Map, Value};

use fidlab::acceptance;
use fidlab::algebra::{DensityElement, TracialAlgebra};
use fidlab::car::CarTower;
use fidlab::channel::{KrausChannel, RecoveryConfig};
use fidlab::config::RunConfig;
use fidlab::error::FidError;
use fidlab::fidelity::{
    bures_distance, fidelity, fidelity_block_supremum, fidelity_variational, fidelity_via_mu, spread, OptimizerConfig,
    Route,
};
use fidlab::harness::{self, ChannelSource, PairSampling};
use fidlab::io;
use fidlab::random::rng_from_seed;

use crate::{GlobalOpts, PairsArg, RouteArg, SourceArg, SweepArgs, SweepKind};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

/// Input and configuration problems exit 2; a computation that ran and
/// came out negative exits 1.
fn fail(context: &str, e: FidError) -> Failure {
    let code = match e {
        FidError::NonConvergence { .. }
        | FidError::NotFidelityPreserving { .. }
        | FidError::NotUnitaryImplementable { .. } => 1,
        _ => 2,
    };
    let message = match e {
        FidError::Parse(m) => m,
        other if context.is_empty() => other.to_string(),
        other => format!("{context}: {other}"),
    };
    Failure { code, message }
}

pub struct Output {
    pub json: Value,
    pub code: u8,
}

impl Output {
    fn ok(json: Value) -> Self {
        Self { json, code: 0 }
    }
}

type CmdResult = Result<Output, Failure>;

pub struct Context {
    cfg: RunConfig,
    timing: bool,
    car_level: Option<usize>,
    tower: CarTower,
}

impl Context {
    pub fn new(opts: GlobalOpts) -> Result<Self, Failure> {
        let mut cfg = match &opts.config {
            Some(p) => RunConfig::from_path(p),
            None => RunConfig::from_env(),
        }
        .map_err(|e| fail("config", e))?;
        let overrides = [
            (&mut cfg.psd_tol, opts.psd_tol),
            (&mut cfg.trace_tol, opts.trace_tol),
            (&mut cfg.opt_tol, opts.opt_tol),
            (&mut cfg.margin_tol, opts.margin_tol),
            (&mut cfg.classify_tol, opts.classify_tol),
        ];
        for (slot, flag) in overrides {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        if let Some(s) = opts.seed {
            cfg.seed = s;
        }
        if let Some(m) = opts.max_iterations {
            cfg.max_iterations = m;
        }
        cfg.validate().map_err(|e| fail("", e))?;
        let tower = CarTower::new(cfg.car_max_level);
        if let Some(k) = opts.car_level {
            tower.level(k).map_err(|e| fail("--car-level", e))?;
        }
        Ok(Self { cfg, timing: opts.timing, car_level: opts.car_level, tower })
    }

    fn default_algebra(&self) -> Option<Arc<TracialAlgebra>> {
        self.car_level.map(|k| self.tower.algebra(k).expect("checked in new"))
    }

    fn read(&self, path: &Path) -> Result<Value, Failure> {
        io::read_json(path).map_err(|e| fail("", e))
    }

    fn density(
        &self,
        path: &Path,
        name: &str,
        default: Option<&Arc<TracialAlgebra>>,
    ) -> Result<DensityElement, Failure> {
        let v = self.read(path)?;
        io::density_from_json(&v, default, self.cfg.psd_tol, self.cfg.trace_tol, name).map_err(|e| fail(name, e))
    }

    /// σ fixes the algebra unless `--car-level` already has; ρ must match it.
    fn pair(&self, sigma: &Path, rho: &Path) -> Result<(DensityElement, DensityElement), Failure> {
        let s = self.density(sigma, "sigma", self.default_algebra().as_ref())?;
        let r = self.density(rho, "rho", Some(s.algebra()))?;
        Ok((s, r))
    }

    fn channel(&self, path: &Path) -> Result<KrausChannel, Failure> {
        let v = self.read(path)?;
        io::channel_from_json(&v, self.default_algebra().as_ref(), self.cfg.trace_tol, "channel")
            .map_err(|e| fail("channel", e))
    }

    fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig { max_iterations: self.cfg.max_iterations, ..OptimizerConfig::default() }
    }

    pub fn fidelity(&self, sigma: &Path, rho: &Path, routes: &[RouteArg]) -> CmdResult {
        let (s, r) = self.pair(sigma, rho)?;
        let wants = |route: RouteArg| routes.contains(&RouteArg::All) || routes.contains(&route);
        let f = fidelity(&s, &r).map_err(|e| fail("fidelity", e))?;
        let mut values = Map::new();
        let mut diagnostics = Map::new();
        if wants(RouteArg::Direct) {
            values.insert("direct".into(), json!(f));
        }
        if wants(RouteArg::Mu) {
            values.insert("mu".into(), json!(fidelity_via_mu(&s, &r).map_err(|e| fail("mu", e))?));
        }
        for (arg, route, name) in [(RouteArg::Var1, Route::Var1, "var1"), (RouteArg::Var2, Route::Var2, "var2")] {
            if wants(arg) {
                let w = fidelity_variational(&s, &r, route, &self.optimizer()).map_err(|e| fail(name, e))?;
                values.insert(name.into(), json!(w.value()));
                diagnostics.insert(
                    name.into(),
                    json!({
                        "objective": w.objective_value,
                        "iterations": w.iterations,
                        "gradient_norm": w.gradient_norm,
                        "regularization": w.regularization,
                    }),
                );
            }
        }
        if wants(RouteArg::Block) {
            let mut rng = rng_from_seed(self.cfg.seed);
            let b = fidelity_block_supremum(&s, &r, self.cfg.block_samples, &mut rng).map_err(|e| fail("block", e))?;
            values.insert("block".into(), json!(b.value));
            diagnostics.insert(
                "block".into(),
                json!({
                    "block_min_eigenvalue": b.witness.block_min_eigenvalue,
                    "sampled_max": b.sampled_max,
                    "n_samples": b.n_samples,
                }),
            );
        }
        let all: Vec<f64> = values.values().filter_map(Value::as_f64).collect();
        let disagreement = spread(&all);
        Ok(Output::ok(json!({
            "fidelity": f,
            "routes": values,
            "max_disagreement": disagreement,
            "within_opt_tol": disagreement <= self.cfg.opt_tol,
            "bures": bures_distance(&s, &r).map_err(|e| fail("bures", e))?,
            "witness_diagnostics": diagnostics,
        })))
    }

    pub fn bures(&self, sigma: &Path, rho: &Path) -> CmdResult {
        let (s, r) = self.pair(sigma, rho)?;
        Ok(Output::ok(json!({
            "bures": bures_distance(&s, &r).map_err(|e| fail("bures", e))?,
            "fidelity": fidelity(&s, &r).map_err(|e| fail("fidelity", e))?,
        })))
    }

    pub fn channel_apply(&self, channel: &Path, state: &Path) -> CmdResult {
        let ch = self.channel(channel)?;
        let rho = self.density(state, "state", Some(ch.algebra()))?;
        let out = ch.apply(&rho).map_err(|e| fail("channel", e))?;
        Ok(Output::ok(json!({
            "output": io::element_to_json(&out),
            "trace": out.trace().re,
        })))
    }

    pub fn channel_certify(&self, channel: &Path, samples: usize) -> CmdResult {
        let ch = self.channel(channel)?;
        let map = ch.to_map();
        let cp = map.is_completely_positive(self.cfg.psd_tol);
        // Schwarz maps are unital, so the inequality is checked on the dual
        let schwarz = ch.dual().is_schwarz_sampled(samples, self.cfg.seed);
        Ok(Output::ok(json!({
            "completely_positive": cp.verdict,
            "min_choi_eigenvalue": cp.min_choi_eigenvalue,
            "trace_preserving": map.is_trace_preserving(self.cfg.trace_tol),
            "trace_defect": map.trace_defect(),
            "dual_schwarz": {
                "verdict": schwarz.verdict,
                "worst_violation": schwarz.worst_violation,
                "n_samples": schwarz.n_samples,
            },
            "injectivity": harness::injectivity_probe(&map),
        })))
    }

    pub fn channel_recover(&self, channel: &Path, pairs: usize) -> CmdResult {
        let ch = self.channel(channel)?;
        let cfg = RecoveryConfig {
            tol: self.cfg.classify_tol,
            preservation_tol: self.cfg.classify_tol,
            n_pairs: pairs,
            seed: self.cfg.seed,
        };
        let rec = ch.recover_unitary(&cfg).map_err(|e| fail("channel", e))?;
        Ok(Output::ok(json!({
            "unitary": io::element_to_json(&rec.u),
            "residual": rec.residual,
            "unitarity_defect": rec.unitarity_defect,
        })))
    }

    pub fn sweep(&self, args: &SweepArgs) -> CmdResult {
        if args.n == 0 {
            return Err(Failure::usage("--n must be at least 1"));
        }
        if args.d == Some(0) {
            return Err(Failure::usage("--d must be at least 1"));
        }
        let channel = args.channel.as_deref().map(|p| self.channel(p)).transpose()?;
        let algebra = match (&channel, self.default_algebra(), args.d) {
            (Some(ch), _, Some(d)) if ch.algebra().linear_dim() != d * d || !ch.algebra().is_single_block() => {
                return Err(Failure::usage(format!("--d {d} does not match the channel's algebra {}", ch.algebra())))
            }
            (Some(ch), _, _) => ch.algebra().clone(),
            (None, Some(_), Some(_)) => return Err(Failure::usage("--d and --car-level both select the algebra")),
            (None, Some(alg), None) => alg,
            (None, None, d) => TracialAlgebra::matrix(d.unwrap_or(2)),
        };
        let seed = self.cfg.seed;
        let mut report = match args.kind {
            SweepKind::Preserve => {
                let Some(ch) = channel else {
                    return Err(Failure::usage("sweep preserve needs --channel"));
                };
                if args.csv.is_some() {
                    return Err(Failure::usage("--csv applies to monotonicity and metric sweeps"));
                }
                let report = harness::preservation_classify(&ch.to_map(), args.n, seed, self.cfg.classify_tol)
                    .map_err(|e| fail("channel", e))?;
                let mut v = serde_json::to_value(&report).expect("serialisable");
                v.as_object_mut().expect("object").insert("kind".into(), json!("preserve"));
                return Ok(Output::ok(v));
            }
            SweepKind::Metric => {
                if channel.is_some() {
                    return Err(Failure::usage("--channel does not apply to metric sweeps"));
                }
                harness::metric_sweep_on(&algebra, args.n, seed, self.cfg.margin_tol).map_err(|e| fail("sweep", e))?
            }
            SweepKind::Monotonicity => {
                let source = match (channel, args.source) {
                    (Some(ch), _) => ChannelSource::UserSupplied(ch.to_map()),
                    (None, SourceArg::RandomCptp) => ChannelSource::RandomCptp,
                    (None, SourceArg::RandomUnitalPositive) => ChannelSource::RandomUnitalPositive,
                    (None, SourceArg::Unitary) => ChannelSource::Unitary,
                    (None, SourceArg::Depolarizing) => ChannelSource::Depolarizing,
                };
                let pairs = match args.pairs {
                    PairsArg::Mixed => PairSampling::Mixed,
                    PairsArg::FullRank => PairSampling::FullRank,
                    PairsArg::Orthogonal => PairSampling::Orthogonal,
                };
                harness::monotonicity_sweep(&source, &algebra, pairs, args.n, seed, self.cfg.margin_tol)
                    .map_err(|e| fail("sweep", e))?
            }
        };
        if let Some(path) = &args.csv {
            std::fs::write(path, report.to_csv()).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        }
        if !self.timing {
            report.runtime_ms = None;
        }
        let code = if report.pass { 0 } else { 1 };
        if !report.pass {
            eprintln!("fidlab: sweep failed: min margin {:e} below -{:e}", report.min_margin, report.margin_tol);
        }
        Ok(Output { json: serde_json::to_value(&report).expect("serialisable"), code })
    }

    pub fn order(&self, omega: &Path) -> CmdResult {
        let v = self.read(omega)?;
        let p = io::predual_from_json(&v, self.default_algebra().as_ref(), "omega").map_err(|e| fail("omega", e))?;
        let cp = p.is_predual_positive(self.cfg.psd_tol);
        let om = p.operator_matrix(self.cfg.psd_tol);
        Ok(Output::ok(json!({
            "predual_positive": cp.verdict,
            "operator_matrix_psd": om.psd,
            "choi_min_eig": cp.min_choi_eigenvalue,
            "operator_min_eig": om.min_eigenvalue,
            "operator_eigenvalues": om.eigenvalues,
        })))
    }

    pub fn car(&self, sigma: Option<&Path>, rho: Option<&Path>, depth: usize) -> CmdResult {
        let Some(k) = self.car_level else {
            return Err(Failure::usage("car needs --car-level"));
        };
        let alg = self.tower.algebra(k).expect("checked in new");
        let block = &alg.blocks()[0];
        let mut out = json!({
            "level": k,
            "dim": block.dim,
            "weight": block.weight,
            "unit_trace": alg.total_trace(),
        });
        match (sigma, rho) {
            (None, None) => {}
            (Some(s), Some(r)) => {
                if k + depth > self.tower.max_level() {
                    return Err(Failure::usage(format!(
                        "level {k} plus depth {depth} exceeds car_max_level {}",
                        self.tower.max_level()
                    )));
                }
                let (s, r) = self.pair(s, r)?;
                let fs = self.tower.fidelity_stability(&s, &r, k, depth).map_err(|e| fail("car", e))?;
                let deviation = fs.iter().map(|f| (f - fs[0]).abs()).fold(0.0, f64::max);
                let obj = out.as_object_mut().expect("object");
                obj.insert("fidelities".into(), json!(fs));
                obj.insert("max_deviation".into(), json!(deviation));
            }
            _ => return Err(Failure::usage("car takes both sigma and rho, or neither")),
        }
        Ok(Output::ok(out))
    }

    pub fn selftest(&self, criteria: &[u8]) -> CmdResult {
        if let Some(bad) = criteria.iter().find(|&&id| !(1..=acceptance::CRITERIA.len() as u8).contains(&id)) {
            return Err(Failure::usage(format!(
                "no criterion {bad}; valid ids are 1..={}",
                acceptance::CRITERIA.len()
            )));
        }
        let ids: Vec<u8> =
            if criteria.is_empty() { acceptance::CRITERIA.iter().map(|c| c.0).collect() } else { criteria.to_vec() };
        let mut rows = Vec::with_capacity(ids.len());
        let mut all_pass = true;
        for id in ids {
            let outcome = acceptance::run(id, &self.cfg);
            eprintln!("{outcome}");
            all_pass &= outcome.pass;
            let mut row = serde_json::to_value(&outcome).expect("serialisable");
            if !self.timing {
                row.as_object_mut().expect("object").remove("runtime_ms");
            }
            rows.push(row);
        }
        Ok(Output { json: json!({"pass": all_pass, "criteria": rows}), code: if all_pass { 0 } else { 1 } })
    }
}
