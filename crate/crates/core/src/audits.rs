//! Name-addressed registries of audits, experiments and symbols. Every entry
//! reads its configuration from JSON overrides merged onto its defaults.

use std::marker::PhantomData;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiments::{
    bspace_growth_experiment, fspace_growth_experiment, khintchine_audit, BGrowthConfig, ExperimentOutput,
    FGrowthConfig, LacunaryConfig, RademacherMultiplier,
};
use crate::grid::{forward, inverse, Grid, GridFunction};
use crate::littlewood_paley::{check_partition, LPPartition};
use crate::maximal::{
    audit_alignment, audit_fefferman_stein, audit_fs_vector_inequality, audit_infty_maximal,
    audit_peetre_domination, audit_sharp_domination, FeffermanSteinConfig, InftyAuditConfig, PeetreAuditConfig,
    SharpAuditConfig, VectorAuditConfig,
};
use crate::probes::random_trig;
use crate::pseudo::{
    fourier_series_identity_check, local_energy_audit, param_f64, single_band_audit, LocalEnergyConfig,
    SingleBandConfig, SymbolRegistry,
};
use crate::report::{AuditReport, Table};
use crate::spaces::{norm_equivalence_audit, sharp_equivalence_audit, PhiAuditConfig, SharpNormAuditConfig};
use crate::stats::rng_for;

fn merge(base: &mut Value, over: &Value, path: &str) -> Result<()> {
    match (base, over) {
        (_, Value::Null) => Ok(()),
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(k) {
                    None => return Err(Error::InvalidParameter(format!("unknown key `{here}`"))),
                    // free-form parameter objects are replaced, not merged
                    Some(slot @ Value::Object(_)) if v.is_object() && k != "symbol_params" => merge(slot, v, &here)?,
                    Some(slot) => *slot = v.clone(),
                }
            }
            Ok(())
        }
        (b, o) => {
            *b = o.clone();
            Ok(())
        }
    }
}

/// `T::default()` with `overrides` merged in; unknown keys are rejected.
pub fn config_with<T: Default + Serialize + DeserializeOwned>(overrides: &Value) -> Result<T> {
    let mut base = serde_json::to_value(T::default()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    merge(&mut base, overrides, "")?;
    serde_json::from_value(base).map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Effective configuration of an entry as JSON, for echoing into reports.
pub fn effective_config<T: Default + Serialize + DeserializeOwned>(overrides: &Value) -> Result<Value> {
    serde_json::to_value(config_with::<T>(overrides)?).map_err(|e| Error::InvalidParameter(e.to_string()))
}

pub trait Audit: Send + Sync {
    fn name(&self) -> &str;
    fn suite(&self) -> &str;
    fn description(&self) -> &str;
    /// Defaults merged with `params`, as JSON.
    fn effective(&self, params: &Value) -> Result<Value>;
    fn run(&self, params: &Value, symbols: &SymbolRegistry) -> Result<Vec<AuditReport>>;
}

type Runner<C> = fn(&C, &SymbolRegistry) -> Result<Vec<AuditReport>>;

struct ConfigAudit<C> {
    name: &'static str,
    suite: &'static str,
    description: &'static str,
    runner: Runner<C>,
    _config: PhantomData<fn() -> C>,
}

impl<C: Default + Serialize + DeserializeOwned> Audit for ConfigAudit<C> {
    fn name(&self) -> &str {
        self.name
    }

    fn suite(&self) -> &str {
        self.suite
    }

    fn description(&self) -> &str {
        self.description
    }

    fn effective(&self, params: &Value) -> Result<Value> {
        effective_config::<C>(params)
    }

    fn run(&self, params: &Value, symbols: &SymbolRegistry) -> Result<Vec<AuditReport>> {
        (self.runner)(&config_with::<C>(params)?, symbols)
    }
}

fn entry<C: Default + Serialize + DeserializeOwned + 'static>(
    name: &'static str,
    suite: &'static str,
    description: &'static str,
    runner: Runner<C>,
) -> Box<dyn Audit> {
    Box::new(ConfigAudit { name, suite, description, runner, _config: PhantomData })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub levels: usize,
    pub smoothness: u32,
    pub samples: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { levels: 10, smoothness: 1, samples: 100_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub dim: usize,
    pub n: usize,
    pub period: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { dim: 1, n: 256, period: 1.0, trials: 100, seed: 1 }
    }
}

pub const PARSEVAL_TOLERANCE: f64 = 1e-10;
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-12;

/// Parseval and inverse-of-forward identities on random complex samples.
pub fn spectral_core_audit(cfg: &SpectralConfig) -> Result<AuditReport> {
    let grid = Grid::new(cfg.dim, cfg.n, cfg.period)?;
    let mut table = Table::new(&["trial", "parseval_error", "round_trip_error"]);
    let (mut worst_p, mut worst_r): (f64, f64) = (0.0, 0.0);
    for trial in 0..cfg.trials as u64 {
        let mut rng = rng_for(cfg.seed, 0x5C, trial);
        let u: Vec<Complex64> =
            (0..grid.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let spec = forward(&grid, &u);
        let back = inverse(&grid, &spec);
        let l2x: f64 = u.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.cell_volume();
        let l2k: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / grid.volume();
        let pe = (l2x - l2k).abs() / l2x;
        let scale = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let re = u.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
        worst_p = worst_p.max(pe);
        worst_r = worst_r.max(re);
        table.push(vec![trial as f64, pe, re]);
    }
    let mut r = AuditReport::new(
        "spectral-core",
        "||u||_2 = ||spectrum||_{l2} / L^{d/2} and samples(spectrum(u)) = u",
    )
    .param("dim", cfg.dim)
    .param("n", cfg.n)
    .param("period", cfg.period)
    .param("trials", cfg.trials)
    .param("seed", cfg.seed);
    r.metric("parseval_error", worst_p);
    r.metric("round_trip_error", worst_r);
    r.table = table;
    r.tolerance = Some(PARSEVAL_TOLERANCE);
    let pass = worst_p <= PARSEVAL_TOLERANCE && worst_r <= ROUND_TRIP_TOLERANCE;
    r.verdict(worst_p, PARSEVAL_TOLERANCE, pass);
    if worst_r > ROUND_TRIP_TOLERANCE {
        r.note(format!("round trip error {worst_r:.3e} above {ROUND_TRIP_TOLERANCE:e}"));
    }
    Ok(r)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentConfig {
    pub dim: usize,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self { dim: 1, n: 256, trials: 20, seed: 17 }
    }
}

/// An audit of a registry symbol.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymbolAuditConfig<C> {
    pub symbol: String,
    pub symbol_params: Value,
    pub audit: C,
}

impl<C: Default> Default for SymbolAuditConfig<C> {
    fn default() -> Self {
        Self { symbol: "bessel".into(), symbol_params: serde_json::json!({ "m": 0.0 }), audit: C::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourierSeriesConfig {
    pub n: usize,
    /// Integer period dividing n.
    pub period: f64,
    pub pairs: usize,
    pub seed: u64,
}

impl Default for FourierSeriesConfig {
    fn default() -> Self {
        Self { n: 32, period: 4.0, pairs: 20, seed: 41 }
    }
}

/// The Fourier-series identity on random `(g, Ψ)` pairs in d = 1.
pub fn fourier_series_audit(cfg: &FourierSeriesConfig) -> Result<Vec<AuditReport>> {
    let grid = Grid::new(1, cfg.n, cfg.period)?;
    let top = grid.nyquist();
    (0..cfg.pairs as u64)
        .map(|i| {
            let mut rng = rng_for(cfg.seed, 0xF5, i);
            let g = random_trig(&grid, 0.0, top, &mut rng);
            let psi = random_trig(&grid, 0.0, top, &mut rng);
            let mut r = fourier_series_identity_check(&g, &psi)?;
            r.set_param("pair", i);
            r.set_param("seed", cfg.seed);
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KhintchineConfig {
    pub p: f64,
    pub terms: usize,
    pub vectors: usize,
    /// Monte Carlo sign patterns per vector (ignored when exhaustive).
    pub draws: usize,
    pub seed: u64,
}

impl Default for KhintchineConfig {
    fn default() -> Self {
        Self { p: 4.0, terms: 20, vectors: 50, draws: 4000, seed: 51 }
    }
}

/// Khintchine comparison on random complex coefficient vectors.
pub fn khintchine_suite(cfg: &KhintchineConfig) -> Result<Vec<AuditReport>> {
    (0..cfg.vectors as u64)
        .map(|i| {
            let mut rng = rng_for(cfg.seed, 0x4B, i);
            let coeffs: Vec<Complex64> = (0..cfg.terms)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut r = khintchine_audit(&coeffs, cfg.p, cfg.draws, cfg.seed.wrapping_add(i))?;
            r.set_param("vector", i);
            Ok(r)
        })
        .collect()
}

fn one(r: Result<AuditReport>) -> Result<Vec<AuditReport>> {
    r.map(|r| vec![r])
}

pub struct AuditRegistry {
    audits: Vec<Box<dyn Audit>>,
}

impl Default for AuditRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl AuditRegistry {
    pub fn empty() -> Self {
        Self { audits: Vec::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(entry::<SpectralConfig>(
            "spectral-core",
            "partition",
            "Parseval and round-trip identities of the scaled DFT",
            |c, _| one(spectral_core_audit(c)),
        ));
        r.register(entry::<PartitionConfig>(
            "partition-unity",
            "partition",
            "resolution of unity and window supports on sampled radii",
            |c, _| one(check_partition(&LPPartition::new(c.levels, c.smoothness)?, c.samples)),
        ));
        r.register(entry::<PeetreAuditConfig>(
            "peetre",
            "maximal",
            "Peetre maximal function dominated by M_t on band-limited inputs",
            |c, _| one(audit_peetre_domination(c)),
        ));
        r.register(entry::<VectorAuditConfig>(
            "fs-vector",
            "maximal",
            "vector-valued maximal inequality",
            |c, _| one(audit_fs_vector_inequality(c)),
        ));
        r.register(entry::<InftyAuditConfig>(
            "infty-maximal",
            "maximal",
            "dyadic-cube maximal inequality at p = infinity",
            |c, _| one(audit_infty_maximal(c)),
        ));
        r.register(entry::<SharpAuditConfig>(
            "sharp-domination",
            "maximal",
            "band tails dominated by the sharp maximal function",
            |c, _| one(audit_sharp_domination(c)),
        ));
        r.register(entry::<FeffermanSteinConfig>(
            "fefferman-stein",
            "maximal",
            "dyadic maximal function controlled by the dyadic sharp function",
            |c, _| one(audit_fefferman_stein(c)),
        ));
        r.register(entry::<AlignmentConfig>(
            "alignment",
            "maximal",
            "dyadic versus centered maximal function",
            |c, _| one(audit_alignment(c.dim, c.n, c.trials, c.seed)),
        ));
        r.register(entry::<PhiAuditConfig>(
            "phi-equivalence",
            "spaces",
            "function and coefficient norms under the phi-transform",
            |c, _| one(norm_equivalence_audit(c)),
        ));
        r.register(entry::<SharpNormAuditConfig>(
            "sharp-norm",
            "spaces",
            "F norm against its sharp-function form",
            |c, _| one(sharp_equivalence_audit(c)),
        ));
        r.register(entry::<SymbolAuditConfig<SingleBandConfig>>(
            "single-band",
            "pseudo",
            "growth of single-band operator norms in k",
            |c, s| {
                let a = s.build(&c.symbol, &c.symbol_params)?;
                one(single_band_audit(a.as_ref(), &c.audit))
            },
        ));
        r.register(entry::<SymbolAuditConfig<LocalEnergyConfig>>(
            "local-energy",
            "pseudo",
            "decay of local energy on small cubes",
            |c, s| {
                let a = s.build(&c.symbol, &c.symbol_params)?;
                one(local_energy_audit(a.as_ref(), &c.audit))
            },
        ));
        r.register(entry::<FourierSeriesConfig>(
            "fourier-series",
            "pseudo",
            "two evaluations of the periodized Fourier-series identity",
            |c, _| fourier_series_audit(c),
        ));
        r.register(entry::<KhintchineConfig>(
            "khintchine",
            "experiments",
            "Rademacher sums against the l2 norm of their coefficients",
            |c, _| khintchine_suite(c),
        ));
        r
    }

    /// Replaces any audit of the same name.
    pub fn register(&mut self, audit: Box<dyn Audit>) {
        self.audits.retain(|a| a.name() != audit.name());
        self.audits.push(audit);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Audit> {
        self.audits
            .iter()
            .find(|a| a.name() == name)
            .map(|a| a.as_ref())
            .ok_or_else(|| Error::UnknownEntry(name.to_string()))
    }

    /// Audits of a suite in registration order.
    pub fn suite(&self, suite: &str) -> Result<Vec<&dyn Audit>> {
        let found: Vec<&dyn Audit> = self.audits.iter().filter(|a| a.suite() == suite).map(|a| a.as_ref()).collect();
        if found.is_empty() {
            return Err(Error::UnknownEntry(format!("suite {suite}")));
        }
        Ok(found)
    }

    pub fn suites(&self) -> Vec<String> {
        let mut s: Vec<String> = Vec::new();
        for a in &self.audits {
            if !s.iter().any(|x| x == a.suite()) {
                s.push(a.suite().to_string());
            }
        }
        s
    }

    /// `(name, suite, description)` in registration order.
    pub fn list(&self) -> Vec<(String, String, String)> {
        self.audits
            .iter()
            .map(|a| (a.name().to_string(), a.suite().to_string(), a.description().to_string()))
            .collect()
    }
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &str;
    fn description(&self) -> &str;
    fn effective(&self, params: &Value) -> Result<Value>;
    fn run(&self, params: &Value) -> Result<ExperimentOutput>;
}

struct ConfigExperiment<C> {
    name: &'static str,
    description: &'static str,
    runner: fn(&C) -> Result<ExperimentOutput>,
}

impl<C: Default + Serialize + DeserializeOwned> Experiment for ConfigExperiment<C> {
    fn name(&self) -> &str {
        self.name
    }

    fn description(&self) -> &str {
        self.description
    }

    fn effective(&self, params: &Value) -> Result<Value> {
        effective_config::<C>(params)
    }

    fn run(&self, params: &Value) -> Result<ExperimentOutput> {
        (self.runner)(&config_with::<C>(params)?)
    }
}

pub struct ExperimentRegistry {
    experiments: Vec<Box<dyn Experiment>>,
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ExperimentRegistry {
    pub fn empty() -> Self {
        Self { experiments: Vec::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(ConfigExperiment::<FGrowthConfig> {
            name: "fspace-growth",
            description: "random atom trains under lacunary Rademacher multipliers, F_p^{0,q} to F_p^{0,t}",
            runner: fspace_growth_experiment,
        }));
        r.register(Box::new(ConfigExperiment::<BGrowthConfig> {
            name: "bspace-growth",
            description: "lacunary test functions under lacunary Rademacher multipliers, B_p^{0,q} to B_p^{0,t}",
            runner: bspace_growth_experiment,
        }));
        r
    }

    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.experiments.retain(|x| x.name() != e.name());
        self.experiments.push(e);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Experiment> {
        self.experiments
            .iter()
            .find(|e| e.name() == name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::UnknownEntry(name.to_string()))
    }

    pub fn list(&self) -> Vec<(String, String)> {
        self.experiments.iter().map(|e| (e.name().to_string(), e.description().to_string())).collect()
    }
}

/// Built-in symbols plus the lacunary Rademacher multiplier.
pub fn default_symbol_registry() -> SymbolRegistry {
    let mut r = SymbolRegistry::with_builtins();
    r.register(
        "rademacher(L,seed)",
        "lacunary random-sign multiplier M^v; also k0, spacing, m, dim, draw",
        |p| {
            let int = |key: &str, default: u64| -> Result<u64> {
                match p.get(key) {
                    None | Some(Value::Null) => Ok(default),
                    Some(v) => v
                        .as_u64()
                        .ok_or_else(|| Error::InvalidParameter(format!("`{key}` must be a non-negative integer"))),
                }
            };
            let d = LacunaryConfig::default();
            let cfg = LacunaryConfig {
                dim: int("dim", d.dim as u64)? as usize,
                k0: int("k0", d.k0 as u64)? as usize,
                top: int("L", d.top as u64)? as usize,
                spacing: int("spacing", d.spacing as u64)? as usize,
                m: param_f64(p, "m", d.m)?,
                seed: int("seed", d.seed)?,
            };
            Ok(Arc::new(RademacherMultiplier::new(&cfg, int("draw", 0)?)?))
        },
    );
    r
}

/// Test functions available to the command line.
pub fn test_function_catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("random-trig(lo,hi,seed)", "random trigonometric polynomial with frequencies in [lo, hi)"),
        ("bump-train(radius,count,seed)", "sum of smooth bumps of the given frequency radius at random centers"),
        ("atom-train(L,seed,draw)", "random atom train f^{L,w} at lacunary scales"),
        ("lacunary(L)", "deterministic lacunary sum g^L"),
        ("reproducing-window", "the window G with transform 1 on [2, 16]"),
    ]
}

/// Builds a test function from the catalog by name.
pub fn build_test_function(name: &str, params: &Value, grid: &Grid) -> Result<GridFunction> {
    use crate::experiments::{lacunary_test_function, random_atom_train, reproducing_window, RandomAtomConfig};
    let seed = params.get("seed").and_then(Value::as_u64).unwrap_or(0);
    match name {
        "random-trig" => {
            let lo = param_f64(params, "lo", 0.0)?;
            let hi = param_f64(params, "hi", grid.nyquist())?;
            Ok(random_trig(grid, lo, hi, &mut rng_for(seed, 0x7F, 0)))
        }
        "bump-train" => {
            let radius = param_f64(params, "radius", 8.0)?;
            let count = param_f64(params, "count", 3.0)? as usize;
            Ok(crate::probes::bump_train(grid, radius, count, &mut rng_for(seed, 0x7F, 1)))
        }
        "atom-train" | "lacunary" => {
            let lac: LacunaryConfig = config_with(params.get("lacunary").unwrap_or(&Value::Null))?;
            let top = params.get("L").and_then(Value::as_u64).map_or(lac.top, |v| v as usize);
            let lac = lac.with_top(top);
            let atoms = RandomAtomConfig { seed, ..Default::default() };
            let p = param_f64(params, "p", 2.0)?;
            if name == "lacunary" {
                lacunary_test_function(&lac, &atoms, p, grid)
            } else {
                let draw = params.get("draw").and_then(Value::as_u64).unwrap_or(0);
                random_atom_train(&lac, &atoms, p, draw, grid)
            }
        }
        "reproducing-window" => reproducing_window(grid),
        other => Err(Error::UnknownEntry(other.to_string())),
    }
}
