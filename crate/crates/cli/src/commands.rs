use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Map, Value};

use lpkit::audits::{build_test_function, default_symbol_registry, test_function_catalog, AuditRegistry, ExperimentRegistry};
use lpkit::pseudo::{apply, decompose_paradiff};
use lpkit::report::Table;
use lpkit::spaces::{exponent, Analyzer, Family, SpaceParams};
use lpkit::{AuditReport, Grid, GridFunction, LPPartition};

use crate::config::{self, parse_assignment, parse_range, set_path, toml_to_json, FunctionSource, Loaded};
use crate::{ApplyArgs, AuditArgs, Cli, Command, DecomposeArgs, ExperimentArgs, NormArgs, SourceArgs};

/// Version of the run-record JSON layout.
pub const RUN_SCHEMA_VERSION: u32 = 1;

pub const OUT_ENV: &str = "LPKIT_OUT";
const DEFAULT_OUT: &str = "lpkit-out";

/// Tolerance on the L² cross-check of `norm` beyond the partition bounds.
const NORM_CHECK_SLACK: f64 = 1e-10;

struct Ctx {
    loaded: Loaded,
    out: PathBuf,
}

impl Ctx {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("cannot create {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    /// Writes the run record and prints one summary line per report.
    fn finish(&self, stem: &str, command: &str, effective: Value, reports: &[AuditReport]) -> Result<bool> {
        let record = json!({
            "schema_version": RUN_SCHEMA_VERSION,
            "command": command,
            "effective_config": effective,
            "reports": reports,
        });
        let mut text = serde_json::to_string_pretty(&record)?;
        text.push('\n');
        let path = self.write(&format!("{stem}.json"), &text)?;
        for r in reports {
            println!("{}", r.summary());
            for n in r.notes.iter().filter(|_| !r.pass) {
                println!("    note: {n}");
            }
        }
        println!("wrote {}", path.display());
        Ok(reports.iter().all(|r| r.pass))
    }

    fn lib<T>(&self, r: lpkit::Result<T>) -> Result<T> {
        r.map_err(|e| self.loaded.locate(anyhow!(e)))
    }
}

pub fn run(cli: Cli) -> Result<bool> {
    let loaded = Loaded::read(cli.config.as_deref())?;
    let out = cli
        .out
        .clone()
        .or_else(|| loaded.file.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    if let Some(w) = cli.workers.or(loaded.file.workers) {
        if w == 0 {
            bail!("--workers must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global().context("cannot size the worker pool")?;
    }
    let ctx = Ctx { loaded, out };
    match cli.command {
        Command::Norm(a) => norm(&ctx, a),
        Command::Apply(a) => apply_cmd(&ctx, a),
        Command::Decompose(a) => decompose(&ctx, a),
        Command::Audit(a) => audit(&ctx, a),
        Command::Experiment(a) => experiment(&ctx, a),
        Command::Registry => {
            print!("{}", registry_listing());
            Ok(true)
        }
    }
}

/// Catalog of every registered identifier, in a stable order.
pub fn registry_listing() -> String {
    let mut s = String::from("[symbols]\n");
    for (sig, desc) in default_symbol_registry().list() {
        s += &format!("{sig:<34} {desc}\n");
    }
    s += "\n[test-functions]\n";
    for (sig, desc) in test_function_catalog() {
        s += &format!("{sig:<34} {desc}\n");
    }
    s += "\n[audits]\n";
    for (name, suite, desc) in AuditRegistry::with_builtins().list() {
        s += &format!("{name:<20} {suite:<12} {desc}\n");
    }
    s += "\n[experiments]\n";
    for (name, desc) in ExperimentRegistry::with_builtins().list() {
        s += &format!("{name:<20} {desc}\n");
    }
    s
}

fn assignments(into: &mut Value, items: &[String]) -> Result<()> {
    for item in items {
        let (k, v) = parse_assignment(item)?;
        set_path(into, &k, v);
    }
    Ok(())
}

fn flag_exponent(s: &str) -> Result<Value> {
    let v = exponent::parse(s).map_err(|e| anyhow!(e))?;
    Ok(exponent::to_json(v))
}

/// Grid function from `--input` or `--function`, flags over file keys.
fn load_function(ctx: &Ctx, file: Option<&FunctionSource>, args: &SourceArgs) -> Result<(GridFunction, Value)> {
    let input = args.input.clone().or_else(|| if args.function.is_some() { None } else { file.and_then(|f| f.input.clone()) });
    if let Some(path) = input {
        let f = fs::File::open(&path).with_context(|| format!("cannot open input {}", path.display()))?;
        let g = GridFunction::read_text(BufReader::new(f)).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        return Ok((g, json!({ "input": path })));
    }
    let name = args
        .function
        .clone()
        .or_else(|| file.and_then(|f| f.function.clone()))
        .ok_or_else(|| anyhow!("need --input or --function"))?;
    let dim = args.dim.or(file.and_then(|f| f.dim)).unwrap_or(1);
    let n = args.n.or(file.and_then(|f| f.n)).unwrap_or(256);
    let mut params = file.map_or(json!({}), |f| toml_to_json(&f.function_params));
    assignments(&mut params, &args.function_params)?;
    let grid = ctx.lib(Grid::unit(dim, n))?;
    let g = ctx.lib(build_test_function(&name, &params, &grid))?;
    Ok((g, json!({ "function": name, "dim": dim, "n": n, "function_params": params })))
}

/// `[min, max]` of `(Σ_k φ̂_k(ξ)²)^{1/2}` over the lattice: the range of
/// `‖f‖_{F^0_{2,2}} / ‖f‖_{L²}`.
fn overlap_bounds(grid: &Grid, partition: &LPPartition) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, 0f64);
    for j in 0..grid.len() {
        let r = grid.frequency_norm(j);
        let w: f64 = (0..=partition.levels()).map(|k| partition.band(k, r).powi(2)).sum();
        lo = lo.min(w);
        hi = hi.max(w);
    }
    (lo.sqrt(), hi.sqrt())
}

fn norm(ctx: &Ctx, a: NormArgs) -> Result<bool> {
    let file = ctx.loaded.file.norm.as_ref();
    let space = a.space.clone().or_else(|| file.and_then(|f| f.space.clone())).unwrap_or_else(|| "F".into());
    let family = match space.as_str() {
        "F" | "f" | "triebel" => Family::TriebelLizorkin,
        "B" | "b" | "besov" => Family::Besov,
        other => return Err(ctx.loaded.anchored("space", format!("unknown space `{other}`, expected F or B"))),
    };
    let s = a.s.or(file.and_then(|f| f.s)).unwrap_or(0.0);
    let exp = |flag: &Option<String>, key: &str, from: Option<&toml::Value>| -> Result<f64> {
        match (flag, from) {
            (Some(t), _) => exponent::parse(t).map_err(|e| anyhow!(e)),
            (None, Some(v)) => config::exponent(v).map_err(|e| ctx.loaded.anchored(key, e)),
            (None, None) => Ok(2.0),
        }
    };
    let p = exp(&a.p, "p", file.and_then(|f| f.p.as_ref()))?;
    let q = exp(&a.q, "q", file.and_then(|f| f.q.as_ref()))?;
    let sp = ctx.lib(SpaceParams::new(family, s, p, q))?;
    let (f, source) = load_function(ctx, file.map(|f| &f.source), &a.source)?;

    let partition = ctx.lib(LPPartition::for_grid(f.grid(), 1))?;
    let analyzer = ctx.lib(Analyzer::new(f.grid(), &partition))?;
    let value = ctx.lib(analyzer.norm(&f, &sp))?;
    let l2 = f.l2_norm_spectral();
    let (lo, hi) = overlap_bounds(f.grid(), &partition);

    let mut r = AuditReport::new("norm", "A ||f||_2 <= ||f||_{F^0_{2,2}} <= B ||f||_2 with A, B from the band overlap")
        .param("space", sp.to_json())
        .param("levels", partition.levels());
    r.metric("norm", value);
    r.metric("l2_norm", l2);
    r.metric("overlap_lower", lo);
    r.metric("overlap_upper", hi);
    r.table = Table::new(&["band", "band_lp"]);
    for k in 0..=partition.levels() {
        r.table.push(vec![k as f64, analyzer.band_lp(&f, k, p)]);
    }
    if s == 0.0 && p == 2.0 && q == 2.0 && l2 > 0.0 {
        let ratio = value / l2;
        r.metric("ratio", ratio);
        r.tolerance = Some(NORM_CHECK_SLACK);
        r.verdict(ratio, hi, ratio >= lo - NORM_CHECK_SLACK && ratio <= hi + NORM_CHECK_SLACK);
    } else {
        r.constant = Some(value);
        r.pass = true;
    }
    ctx.write("norm-bands.csv", &r.table.to_csv())?;
    let effective = json!({ "space": sp.to_json(), "source": source });
    ctx.finish("norm", "norm", effective, &[r])
}

fn apply_cmd(ctx: &Ctx, a: ApplyArgs) -> Result<bool> {
    let file = ctx.loaded.file.apply.as_ref();
    let symbol = a.symbol.clone().or_else(|| file.and_then(|f| f.symbol.clone())).ok_or_else(|| anyhow!("need --symbol"))?;
    let mut params = file.map_or(json!({}), |f| toml_to_json(&f.params));
    assignments(&mut params, &a.params)?;
    let sym = ctx.lib(default_symbol_registry().build(&symbol, &params))?;
    let (f, source) = load_function(ctx, file.map(|f| &f.source), &a.source)?;
    let g = ctx.lib(apply(sym.as_ref(), &f))?;

    let output = a.output.clone().or_else(|| file.and_then(|f| f.output.clone()));
    let path = match output {
        Some(p) => {
            let mut buf = Vec::new();
            ctx.lib(g.write_text(&mut buf))?;
            fs::write(&p, buf).with_context(|| format!("cannot write {}", p.display()))?;
            p
        }
        None => {
            let mut buf = Vec::new();
            ctx.lib(g.write_text(&mut buf))?;
            ctx.write("apply-output.dat", std::str::from_utf8(&buf)?)?
        }
    };
    let mut r = AuditReport::new("apply", "T_[a] f evaluated on the grid of f")
        .param("symbol", sym.name())
        .param("order", sym.order())
        .param("output", path.display().to_string());
    r.metric("input_l2", f.l2_norm_spectral());
    r.metric("output_l2", g.l2_norm_spectral());
    r.constant = Some(g.l2_norm_spectral());
    r.pass = true;
    let effective = json!({ "symbol": symbol, "params": params, "source": source });
    ctx.finish("apply", "apply", effective, &[r])
}

/// Largest tolerated reconstruction error and band leakage.
const DECOMPOSE_TOLERANCE: f64 = 1e-10;

fn decompose(ctx: &Ctx, a: DecomposeArgs) -> Result<bool> {
    let file = ctx.loaded.file.decompose.as_ref();
    let symbol = a.symbol.clone().or_else(|| file.and_then(|f| f.symbol.clone())).ok_or_else(|| anyhow!("need --symbol"))?;
    let mut params = file.map_or(json!({}), |f| toml_to_json(&f.params));
    assignments(&mut params, &a.params)?;
    let dim = a.dim.or(file.and_then(|f| f.dim)).unwrap_or(1);
    let n = a.n.or(file.and_then(|f| f.n)).unwrap_or(64);
    let period = a.period.or(file.and_then(|f| f.period)).unwrap_or(1.0);
    let grid = ctx.lib(Grid::new(dim, n, period))?;
    let sym = ctx.lib(default_symbol_registry().build(&symbol, &params))?;
    let partition = ctx.lib(LPPartition::for_grid(&grid, 1))?;
    let d = ctx.lib(decompose_paradiff(sym.as_ref(), &grid, &partition))?;

    for (i, piece) in d.pieces.iter().enumerate() {
        ctx.write(&format!("decompose-piece{}.csv", i + 1), &piece.to_csv())?;
    }
    for (i, b) in d.bands.iter().enumerate() {
        ctx.write(&format!("decompose-band{}.csv", i + 3), &b.to_csv())?;
    }
    let recon = ctx.lib(d.reconstruction_error(sym.as_ref()))?;
    let band_sum = ctx.lib(d.band_sum_error())?;
    let leak = d.band_support_leak();
    let mut r = AuditReport::new("decompose", "a = a1 + a2 + a3 and a3 = sum_k b_k with b_k in its band")
        .param("symbol", sym.name())
        .param("levels", partition.levels())
        .param("bands", d.bands.len());
    r.metric("reconstruction_error", recon);
    r.metric("band_sum_error", band_sum);
    r.metric("band_support_leak", leak);
    r.tolerance = Some(DECOMPOSE_TOLERANCE);
    let worst = recon.max(band_sum).max(leak);
    r.verdict(worst, DECOMPOSE_TOLERANCE, worst <= DECOMPOSE_TOLERANCE);
    let effective = json!({ "symbol": symbol, "params": params, "dim": dim, "n": n, "period": period });
    ctx.finish("decompose", "decompose", effective, &[r])
}

fn as_object(v: &mut Value) -> &mut Map<String, Value> {
    if !v.is_object() {
        *v = Value::Object(Map::new());
    }
    v.as_object_mut().expect("object")
}

fn audit(ctx: &Ctx, a: AuditArgs) -> Result<bool> {
    let registry = AuditRegistry::with_builtins();
    let symbols = default_symbol_registry();
    let file = ctx.loaded.file.audit.as_ref();
    let name = a.name.clone().or_else(|| if a.suite.is_some() { None } else { file.and_then(|f| f.name.clone()) });
    let suite = a.suite.clone().or_else(|| if name.is_some() { None } else { file.and_then(|f| f.suite.clone()) });
    let (selector, selected) = match (&name, &suite) {
        (Some(n), _) => (n.clone(), vec![registry.get(n).map_err(|e| ctx.loaded.anchored("name", e))?]),
        (None, Some(s)) => (s.clone(), registry.suite(s).map_err(|e| ctx.loaded.anchored("suite", e))?),
        (None, None) => bail!("need --suite or --name"),
    };
    let names: Vec<&str> = selected.iter().map(|x| x.name()).collect();

    let mut params: Map<String, Value> = Map::new();
    if let Some(f) = file {
        for (k, v) in &f.params {
            if !names.contains(&k.as_str()) {
                if registry.get(k).is_err() {
                    return Err(ctx.loaded.anchored(k, format!("`{k}` is not a registered audit")));
                }
                continue;
            }
            let table = v.as_table().ok_or_else(|| ctx.loaded.anchored(k, format!("`audit.params.{k}` must be a table")))?;
            params.insert(k.clone(), toml_to_json(table));
        }
    }
    if let Some(seed) = a.seed.or(ctx.loaded.file.seed) {
        for au in &selected {
            let defaults = au.effective(&Value::Null)?;
            let slot = as_object(params.entry(au.name().to_string()).or_insert(json!({})));
            if defaults.get("seed").is_some() {
                slot.insert("seed".into(), seed.into());
            } else if defaults.pointer("/audit/seed").is_some() {
                let inner = as_object(slot.entry("audit").or_insert(json!({})));
                inner.insert("seed".into(), seed.into());
            }
        }
    }
    for item in &a.set {
        let (key, value) = parse_assignment(item)?;
        let (target, rest) = if names.contains(&key[0].as_str()) && key.len() > 1 {
            (key[0].clone(), &key[1..])
        } else if names.len() == 1 {
            (names[0].to_string(), &key[..])
        } else {
            bail!("`--set {item}` is ambiguous; prefix the key with one of: {}", names.join(", "));
        };
        set_path(params.entry(target).or_insert(json!({})), rest, value);
    }

    let mut reports = Vec::new();
    let mut effective = Map::new();
    for au in &selected {
        let p = params.get(au.name()).cloned().unwrap_or(Value::Null);
        effective.insert(au.name().to_string(), ctx.lib(au.effective(&p))?);
        reports.extend(ctx.lib(au.run(&p, &symbols))?);
    }
    let stem = format!("audit-{selector}");
    for (i, r) in reports.iter().enumerate() {
        if !r.table.rows.is_empty() {
            ctx.write(&format!("{stem}-{i:02}-{}.csv", r.name), &r.table.to_csv())?;
        }
    }
    let effective = json!({ "selector": selector, "audits": effective });
    ctx.finish(&stem, "audit", effective, &reports)
}

fn experiment(ctx: &Ctx, a: ExperimentArgs) -> Result<bool> {
    let registry = ExperimentRegistry::with_builtins();
    let file = ctx.loaded.file.experiment.as_ref();
    let name = a.name.clone().or_else(|| file.and_then(|f| f.name.clone())).ok_or_else(|| anyhow!("need --name"))?;
    let exp = registry.get(&name).map_err(|e| ctx.loaded.anchored("name", e))?;

    let mut params = file.map_or(json!({}), |f| toml_to_json(&f.params));
    if let Some(seed) = a.seed.or(ctx.loaded.file.seed) {
        let defaults = exp.effective(&Value::Null)?;
        for section in ["lacunary", "atoms"] {
            if defaults.pointer(&format!("/{section}/seed")).is_some() {
                set_path(&mut params, &[section.into(), "seed".into()], seed.into());
            }
        }
    }
    if let Some(range) = &a.l_range {
        let (lo, hi) = parse_range(range)?;
        set_path(&mut params, &["l_min".into()], lo.into());
        set_path(&mut params, &["l_max".into()], hi.into());
    }
    for (key, flag) in [("p", &a.p), ("q", &a.q), ("t", &a.t)] {
        if let Some(v) = flag {
            set_path(&mut params, &[key.into()], flag_exponent(v)?);
        }
    }
    if let Some(d) = a.draws {
        set_path(&mut params, &["draws".into()], d.into());
    }
    if let Some(t) = a.tolerance {
        set_path(&mut params, &["tolerance".into()], t.into());
    }
    assignments(&mut params, &a.set)?;

    let effective = ctx.lib(exp.effective(&params))?;
    let output = ctx.lib(exp.run(&params))?;
    ctx.write(&format!("{name}-summary.csv"), &output.report.table.to_csv())?;
    ctx.write(&format!("{name}-draws.csv"), &output.draws.to_csv())?;
    ctx.finish(&name, "experiment", json!({ "name": name, "params": effective }), &[output.report])
}
