//! Cross-module checks through the public API.

use num_complex::Complex64;
use serde_json::json;

use lpkit::audits::{build_test_function, default_symbol_registry, test_function_catalog, AuditRegistry, ExperimentRegistry};
use lpkit::experiments::{
    image_formula, random_atom_train, AtomDraw, LacunaryConfig, RademacherMultiplier, RandomAtomConfig,
};
use lpkit::probes::random_trig;
use lpkit::pseudo::{apply, decompose_paradiff};
use lpkit::report::AuditReport;
use lpkit::spaces::{Analyzer, SpaceParams};
use lpkit::stats::rng_for;
use lpkit::{Grid, GridFunction, LPPartition};

fn max_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.sub(b).unwrap().abs().into_iter().fold(0.0, f64::max)
}

#[test]
fn text_format_round_trips_exactly() {
    let g = Grid::new(2, 16, 2.0).unwrap();
    let f = random_trig(&g, 0.0, 6.0, &mut rng_for(5, 0, 0));
    let mut buf = Vec::new();
    f.write_text(&mut buf).unwrap();
    let back = GridFunction::read_text(buf.as_slice()).unwrap();
    assert_eq!(back.grid(), f.grid());
    assert_eq!(back.samples(), f.samples());
    assert!(GridFunction::read_text("dim 1\nn 4\n".as_bytes()).is_err());
}

#[test]
fn f_and_b_agree_at_p_equal_q() {
    let g = Grid::unit(1, 512).unwrap();
    let an = Analyzer::for_grid(&g).unwrap();
    for seed in 0..4 {
        let f = random_trig(&g, 0.0, 200.0, &mut rng_for(seed, 1, 0));
        for (s, p) in [(0.0, 2.0), (0.7, 1.5), (-0.3, 3.0)] {
            let fb = an.norm(&f, &SpaceParams::besov(s, p, p).unwrap()).unwrap();
            let ff = an.norm(&f, &SpaceParams::triebel(s, p, p).unwrap()).unwrap();
            assert!((fb - ff).abs() <= 1e-12 * fb, "s={s} p={p}: {fb} {ff}");
        }
    }
}

#[test]
fn bessel_potential_shifts_smoothness() {
    // <xi>^{-1} maps F^{s}_{p,q} into F^{s+1}_{p,q}; on a single band the two
    // norms agree up to the band's range of <xi>·2^{-k}
    let g = Grid::unit(1, 1024).unwrap();
    let an = Analyzer::for_grid(&g).unwrap();
    let sym = default_symbol_registry().build("bessel", &json!({ "m": -1.0 })).unwrap();
    let k = 6;
    let c = (1u64 << k) as f64;
    let f = random_trig(&g, 0.75 * c, 1.5 * c, &mut rng_for(2, 0, 0));
    let tf = apply(sym.as_ref(), &f).unwrap();
    let before = an.norm(&f, &SpaceParams::triebel(0.0, 2.0, 2.0).unwrap()).unwrap();
    let after = an.norm(&tf, &SpaceParams::triebel(1.0, 2.0, 2.0).unwrap()).unwrap();
    let r = after / before;
    assert!((0.5..=2.0).contains(&r), "{r}");
}

#[test]
fn decomposition_of_registry_symbols_telescopes() {
    let g = Grid::unit(1, 64).unwrap();
    let part = LPPartition::for_grid(&g, 1).unwrap();
    let reg = default_symbol_registry();
    for (name, params) in [
        ("identity", json!({})),
        ("sin-product", json!({ "nu": 1.0, "kappa": 0.5 })),
        ("modulated", json!({ "kappa": 0.1 })),
    ] {
        let a = reg.build(name, &params).unwrap();
        let d = decompose_paradiff(a.as_ref(), &g, &part).unwrap();
        assert!(d.reconstruction_error(a.as_ref()).unwrap() < 1e-12, "{name}");
        assert!(d.band_sum_error().unwrap() < 1e-12, "{name}");
        assert!(d.band_support_leak() < 1e-12, "{name}");
    }
}

#[test]
fn rademacher_from_registry_matches_direct_construction() {
    let reg = default_symbol_registry();
    let via = reg.build("rademacher", &json!({ "L": 5, "seed": 9, "k0": 1, "spacing": 1 })).unwrap();
    let cfg = LacunaryConfig { k0: 1, top: 5, spacing: 1, seed: 9, ..Default::default() };
    let direct = RademacherMultiplier::new(&cfg, 0).unwrap();
    let g = Grid::unit(1, cfg.output_n()).unwrap();
    let f = random_trig(&g, 0.0, g.nyquist(), &mut rng_for(1, 2, 3));
    let a = apply(via.as_ref(), &f).unwrap();
    let b = apply(&direct, &f).unwrap();
    assert_eq!(a.spectrum(), b.spectrum());
    assert!(via.name().contains("L=5"));
    assert!(reg.build("rademacher", &json!({ "L": -1 })).is_err());
}

#[test]
fn multiplier_image_has_shell_spectrum_and_matches_formula() {
    let lac = LacunaryConfig { k0: 0, top: 1, spacing: 3, ..Default::default() };
    let atoms = RandomAtomConfig::default();
    let v = RademacherMultiplier::new(&lac, 4).unwrap();
    let fine = Grid::unit(1, lac.input_n()).unwrap();
    let coarse = Grid::unit(1, lac.output_n()).unwrap();
    let f = random_atom_train(&lac, &atoms, 1.0, 2, &fine).unwrap();
    let out = v.transfer(&f, &coarse).unwrap();
    for (j, c) in out.spectrum().iter().enumerate() {
        if lac.scale_of(coarse.wave_vector(j)).is_none() {
            assert!(c.norm() < 1e-10, "mass off the shells at {:?}", coarse.wave_vector(j));
        }
    }
    let draw = AtomDraw::draw(&lac, &atoms, 2).unwrap();
    let formula = image_formula(&v, &atoms, &draw, 1.0, &coarse).unwrap();
    assert!(max_diff(&formula, &out) < 1e-8);
}

#[test]
fn catalog_entries_build() {
    let g = Grid::unit(1, 256).unwrap();
    for (sig, _) in test_function_catalog() {
        let name = sig.split('(').next().unwrap();
        let params = match name {
            "atom-train" | "lacunary" => json!({ "L": 1, "lacunary": { "k0": 0, "spacing": 1 } }),
            _ => json!({ "seed": 3 }),
        };
        let f = build_test_function(name, &params, &g).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(f.lp_norm(2.0) > 0.0, "{name}");
    }
    assert!(build_test_function("nope", &json!({}), &g).is_err());
}

#[test]
fn every_audit_reports_round_trip_through_json() {
    let audits = AuditRegistry::with_builtins();
    let symbols = default_symbol_registry();
    for name in ["spectral-core", "partition-unity", "alignment", "fourier-series"] {
        let reports = audits.get(name).unwrap().run(&json!(null), &symbols).unwrap();
        for r in &reports {
            assert!(r.pass, "{}", r.summary());
            assert_eq!(&AuditReport::from_json(&r.to_json()).unwrap(), r);
        }
    }
    let exp = ExperimentRegistry::with_builtins();
    let eff = exp.get("bspace-growth").unwrap().effective(&json!({ "q": "inf" })).unwrap();
    assert_eq!(eff["q"], "inf");
    assert!(exp.get("fspace-growth").unwrap().effective(&json!({ "typo": 1 })).is_err());
}

#[test]
fn multiplier_order_is_declared() {
    let reg = default_symbol_registry();
    let s = reg.build("rademacher", &json!({ "m": -0.5 })).unwrap();
    assert_eq!(s.order(), -0.5);
    let one = Complex64::new(1.0, 0.0);
    let id = reg.build("identity", &json!({})).unwrap();
    assert_eq!(id.eval([0.3, 0.0], [5.0, 0.0]), one);
}
