//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances are pinned here, next to the checks that use them.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use serde_json::{json, Value};

use lpkit::audits::{
    config_with, fourier_series_audit, khintchine_suite, spectral_core_audit, AuditRegistry, FourierSeriesConfig,
    KhintchineConfig, SpectralConfig,
};
use lpkit::dyadic::DyadicCube;
use lpkit::experiments::{
    bspace_growth_experiment, fspace_growth_experiment, khintchine_audit, BGrowthConfig, FGrowthConfig,
};
use lpkit::maximal::{audit_fefferman_stein, audit_peetre_domination, FeffermanSteinConfig, PeetreAuditConfig};
use lpkit::probes::random_trig;
use lpkit::pseudo::{
    decompose_paradiff, output_leakage, seminorm, single_band_audit, Bessel, Modulated, SeminormOptions,
    SingleBandConfig, SymbolRegistry,
};
use lpkit::spaces::{
    atomic_decompose, norm_equivalence_audit, phi_analyze, phi_synthesize, CoeffField, PhiAuditConfig,
    PhiTransformFamily, SpaceParams,
};
use lpkit::stats::rng_for;
use lpkit::{AuditReport, Grid, LPPartition};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn all_pass(reports: &[AuditReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

fn metric(r: &AuditReport, key: &str) -> f64 {
    r.metrics.get(key).copied().unwrap_or(f64::NAN)
}

fn spectral_core() -> Outcome {
    const IDENTITY_TOL: (f64, f64) = (1e-10, 1e-12);
    const UNITY_TOL: f64 = 1e-12;
    let r = spectral_core_audit(&SpectralConfig::default()).map_err(e)?;
    let (parseval, round_trip) = (metric(&r, "parseval_error"), metric(&r, "round_trip_error"));
    let symbols = SymbolRegistry::with_builtins();
    let unity = AuditRegistry::with_builtins()
        .get("partition-unity")
        .and_then(|a| a.run(&json!({ "samples": 100_000 }), &symbols))
        .map_err(e)?;
    let dev = unity[0].constant.unwrap_or(f64::NAN);
    let ok = r.pass
        && parseval < IDENTITY_TOL.0
        && round_trip < IDENTITY_TOL.1
        && all_pass(&unity)
        && dev < UNITY_TOL;
    Ok((
        ok,
        format!("parseval {parseval:.1e}, round trip {round_trip:.1e} on 100 inputs; unity deviation {dev:.1e} on 1e5 radii"),
    ))
}

fn fourier_series() -> Outcome {
    const TOL: f64 = 1e-10;
    let reports = fourier_series_audit(&FourierSeriesConfig { n: 32, pairs: 20, ..Default::default() }).map_err(e)?;
    let worst = reports.iter().map(|r| r.constant.unwrap_or(f64::NAN)).fold(0.0, f64::max);
    Ok((all_pass(&reports) && reports.len() == 20 && worst <= TOL, format!("20 pairs, worst relative gap {worst:.1e}")))
}

fn khintchine() -> Outcome {
    let mut rng = rng_for(7, 0, 0);
    let c: Vec<Complex64> = (0..12).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let p2 = khintchine_audit(&c, 2.0, 0, 0).map_err(e)?;
    let p2_gap = (metric(&p2, "ratio") - 1.0).abs();
    let one = Complex64::new(1.0, 0.0);
    let p1 = khintchine_audit(&[one, one], 1.0, 0, 0).map_err(e)?;
    let p1_gap = (metric(&p1, "ratio") - 0.5f64.sqrt()).abs();
    let mut ok = p2.pass && p2_gap < 1e-12 && p1.pass && p1_gap < 1e-15;
    let mut detail = format!("p=2 gap {p2_gap:.1e}, p=1 (1,1) gap {p1_gap:.1e}");
    for p in [1.0, 4.0] {
        let reports = khintchine_suite(&KhintchineConfig { p, vectors: 50, ..Default::default() }).map_err(e)?;
        let ratios: Vec<f64> = reports.iter().map(|r| metric(r, "ratio")).collect();
        let (lo, hi) = (ratios.iter().copied().fold(f64::INFINITY, f64::min), ratios.iter().copied().fold(0.0, f64::max));
        ok &= all_pass(&reports) && reports.len() == 50;
        detail += &format!("; p={p}: ratios in [{lo:.4}, {hi:.4}], constants [{:.4}, {:.4}]", metric(&reports[0], "lower_constant"), metric(&reports[0], "upper_constant"));
    }
    Ok((ok, detail))
}

fn maximal() -> Outcome {
    let good = audit_peetre_domination(&PeetreAuditConfig::default()).map_err(e)?;
    let bad = audit_peetre_domination(&PeetreAuditConfig { sigma: 0.5, ..Default::default() }).map_err(e)?;
    let mut ok = good.pass && !bad.pass;
    let mut detail = format!(
        "peetre sigma=1.5 drift {:.3}, sigma=0.5 drift {:.3} (flagged: {})",
        metric(&good, "relative_drift"),
        metric(&bad, "relative_drift"),
        !bad.pass
    );
    for p in [1.5, 2.0, 4.0] {
        let r = audit_fefferman_stein(&FeffermanSteinConfig { p, ..Default::default() }).map_err(e)?;
        ok &= r.pass;
        detail += &format!("; FS p={p} drift {:.3}", metric(&r, "relative_drift"));
    }
    Ok((ok, detail))
}

fn phi_transform() -> Outcome {
    const ROUND_TRIP_TOL: f64 = 1e-8;
    const RATIO_INTERVAL: (f64, f64) = (0.25, 4.0);
    const ATOM_TOL: f64 = 1e-12;
    let fam = PhiTransformFamily::default();
    let mut worst_rt: f64 = 0.0;
    for (dim, n) in [(1, 256), (2, 32)] {
        let g = Grid::unit(dim, n).map_err(e)?;
        let depth = g.log2_n();
        let lim = PhiTransformFamily::frequency_limit(depth);
        for seed in 0..10 {
            let f = random_trig(&g, 0.0, lim, &mut rng_for(seed, 0xAC, dim as u64));
            let back = phi_synthesize(&phi_analyze(&f, &fam, depth).map_err(e)?, &fam, &g).map_err(e)?;
            worst_rt = worst_rt.max(back.sub(&f).map_err(e)?.lp_norm(2.0) / f.lp_norm(2.0));
        }
    }
    let mut ok = worst_rt < ROUND_TRIP_TOL;
    let mut detail = format!("round trip {worst_rt:.1e}");
    for (s, p, q) in [(0.0, 2.0, 2.0), (0.5, 1.5, 1.0), (-0.5, 4.0, 2.0)] {
        let space = SpaceParams::triebel(s, p, q).map_err(e)?;
        let r = norm_equivalence_audit(&PhiAuditConfig { trials: 50, space, ..Default::default() }).map_err(e)?;
        let (lo, hi) = (metric(&r, "ratio_min"), metric(&r, "ratio_max"));
        ok &= r.pass && lo >= RATIO_INTERVAL.0 && hi <= RATIO_INTERVAL.1;
        detail += &format!("; F({s},{p},{q}) ratios [{lo:.3}, {hi:.3}]");
    }
    let mut worst_atoms: f64 = 0.0;
    let mut worst_constant: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = rng_for(seed, 0xA7, 0);
        let sp = SpaceParams::triebel(0.25, [1.0, 0.5, 0.8][seed as usize % 3], 2.0).map_err(e)?;
        let dim = 1 + (seed as usize % 2);
        let mut b = CoeffField::new(dim, 5).map_err(e)?;
        for _ in 0..rng.gen_range(1..40) {
            let level = rng.gen_range(0..=5u32);
            let idx = rng.gen_range(0..DyadicCube::count_at_level(dim, level));
            let q = DyadicCube::from_linear(dim, level, idx).map_err(e)?;
            b.set(&q, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).map_err(e)?;
        }
        let dec = atomic_decompose(&b, &sp).map_err(e)?;
        let back = dec.reconstruct(dim, 5).map_err(e)?;
        worst_atoms = worst_atoms.max(back.max_abs_diff(&b).map_err(e)? / b.max_abs());
        worst_constant = worst_constant.max(dec.constant);
    }
    ok &= worst_atoms <= ATOM_TOL && worst_constant.is_finite();
    detail += &format!("; atoms reconstruct to {worst_atoms:.1e}, largest l^p constant {worst_constant:.3}");
    Ok((ok, detail))
}

fn paradifferential() -> Outcome {
    const RECON_TOL: f64 = 1e-10;
    const UNIFORMITY: f64 = 2.0;
    const LEAK_TOL: f64 = 1e-10;
    let grid = Grid::unit(1, 256).map_err(e)?;
    let partition = LPPartition::for_grid(&grid, 1).map_err(e)?;
    let a = Modulated { m: 0.0, nu: 2.0, kappa: 0.05, amp: 0.5 };
    let d = decompose_paradiff(&a, &grid, &partition).map_err(e)?;
    let recon = d.reconstruction_error(&a).map_err(e)?.max(d.band_sum_error().map_err(e)?);
    let opts = SeminormOptions { check_halving: false, ..Default::default() };
    // uniform in k: each band seminorm against the same seminorm of a
    let mut worst_spread: f64 = 0.0;
    for (alpha, beta) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
        let reference = seminorm(&a, &grid, [alpha, 0], [beta, 0], 0.0, &opts).map_err(e)?.value;
        for b in &d.bands {
            let v = seminorm(b, &grid, [alpha, 0], [beta, 0], 0.0, &opts).map_err(e)?.value;
            worst_spread = worst_spread.max(v / reference);
        }
    }
    let f = random_trig(&grid, 0.0, grid.nyquist(), &mut rng_for(3, 0x6B, 0));
    let mut leak: f64 = 0.0;
    for (i, b) in d.bands.iter().enumerate() {
        leak = leak.max(output_leakage(b, i + 3, &f).map_err(e)?);
    }
    let ok = recon < RECON_TOL && worst_spread <= UNIFORMITY && leak < LEAK_TOL;
    Ok((
        ok,
        format!(
            "reconstruction {recon:.1e}; max_k |b_k|/|a| seminorm ratio {worst_spread:.3} over k=3..{}; output leakage {leak:.1e}",
            partition.levels()
        ),
    ))
}

fn single_band() -> Outcome {
    const EXACT_TOL: f64 = 0.1;
    const PROBE_SLACK: f64 = 0.15;
    let mut ok = true;
    let mut detail = String::new();
    for m in [0.0, -0.5] {
        let a = Bessel { m };
        let exact = single_band_audit(&a, &SingleBandConfig { n: 4096, r: 2.0, ..Default::default() }).map_err(e)?;
        let s2 = metric(&exact, "slope");
        let probe =
            single_band_audit(&a, &SingleBandConfig { n: 4096, r: f64::INFINITY, trials: 4, ..Default::default() })
                .map_err(e)?;
        let sinf = metric(&probe, "slope");
        ok &= (s2 - m).abs() <= EXACT_TOL && sinf <= m + 0.5 + PROBE_SLACK;
        detail += &format!("m={m}: r=2 slope {s2:.4}, r=inf slope {sinf:.4}; ");
    }
    Ok((ok, detail.trim_end_matches("; ").to_string()))
}

fn fspace_sharpness() -> Outcome {
    let cfg = FGrowthConfig::default();
    let out = fspace_growth_experiment(&cfg).map_err(e)?;
    let r = &out.report;
    let (sin, sout) = (metric(r, "input_slope"), metric(r, "output_slope"));
    let ok = r.pass && sin <= 1.0 / cfg.p + 0.15 && sout >= 1.0 / cfg.t - 0.15;
    Ok((
        ok,
        format!(
            "L={}..{}, {} draws: input slope {sin:.3} (<= {:.2}), output slope {sout:.3} (>= {:.2}), ratio slope {:.3}",
            cfg.l_min,
            cfg.l_max,
            cfg.draws,
            1.0 / cfg.p + 0.15,
            1.0 / cfg.t - 0.15,
            metric(r, "ratio_slope")
        ),
    ))
}

fn bspace_sharpness() -> Outcome {
    let cfg = BGrowthConfig::default();
    let out = bspace_growth_experiment(&cfg).map_err(e)?;
    let r = &out.report;
    let growth = metric(r, "growth_exponent");
    let eps = metric(r, "designed_epsilon");
    let spread = metric(r, "input_spread");
    let ok = r.pass && spread <= 0.10 && growth >= eps - 0.05;
    Ok((ok, format!("input spread {spread:.2e} (<= 0.10), growth exponent {growth:.3} vs designed {eps:.3} - 0.05")))
}

fn determinism() -> Outcome {
    let audits = AuditRegistry::with_builtins();
    let symbols = SymbolRegistry::with_builtins();
    let params: [(&str, Value); 3] = [
        ("spectral-core", json!({ "trials": 20 })),
        ("khintchine", json!({ "vectors": 3, "draws": 500 })),
        ("single-band", json!({ "symbol": "oscillatory", "audit": { "r": "inf", "trials": 2, "k_max": 6 } })),
    ];
    let json_of = |name: &str, p: &Value| -> Result<Vec<String>, String> {
        let reports = audits.get(name).and_then(|a| a.run(p, &symbols)).map_err(e)?;
        Ok(reports.iter().map(AuditReport::to_json).collect())
    };
    let mut ok = true;
    for (name, p) in &params {
        ok &= json_of(name, p)? == json_of(name, p)?;
    }
    let cfg: FGrowthConfig = config_with(&json!({ "l_min": 2, "l_max": 5, "draws": 3, "lacunary": { "k0": 2 } })).map_err(e)?;
    let a = fspace_growth_experiment(&cfg).map_err(e)?;
    let b = fspace_growth_experiment(&cfg).map_err(e)?;
    ok &= a.report.to_json() == b.report.to_json() && a.draws == b.draws;
    Ok((ok, "spectral-core, khintchine, single-band and fspace-growth reruns compared byte for byte".into()))
}

fn main() {
    let criteria = [
        Criterion { id: 1, title: "spectral core", budget: Duration::from_secs(10), run: spectral_core },
        Criterion { id: 2, title: "Fourier-series identity", budget: Duration::MAX, run: fourier_series },
        Criterion { id: 3, title: "Khintchine", budget: Duration::MAX, run: khintchine },
        Criterion { id: 4, title: "maximal suite", budget: Duration::MAX, run: maximal },
        Criterion { id: 5, title: "phi-transform", budget: Duration::MAX, run: phi_transform },
        Criterion { id: 6, title: "paradifferential", budget: Duration::MAX, run: paradifferential },
        Criterion { id: 7, title: "single-band exponent", budget: Duration::from_secs(60), run: single_band },
        Criterion { id: 8, title: "F-space sharpness", budget: Duration::from_secs(600), run: fspace_sharpness },
        Criterion { id: 9, title: "B-space sharpness", budget: Duration::from_secs(300), run: bspace_sharpness },
        Criterion { id: 10, title: "determinism", budget: Duration::MAX, run: determinism },
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((pass, d)) => (pass && took <= c.budget, d),
            Err(err) => (false, format!("error: {err}")),
        };
        let budget = if c.budget == Duration::MAX { String::new() } else { format!(" / {}s", c.budget.as_secs()) };
        println!(
            "criterion {:>2} [{}] {}: {} ({:.1}s{budget})",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.title,
            detail,
            took.as_secs_f64()
        );
        if !pass {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}

