use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sequence_norm, Analyzer, CoeffField, Family, SpaceParams};
use crate::dyadic::{require_dyadic_grid, DyadicCube};
use crate::error::{Error, Result};
use crate::grid::{dft_inplace, Grid, GridFunction};
use crate::littlewood_paley::Bump;
use crate::maximal::{check_base, doubling_verdict};
use crate::probes::{bump_train, random_trig};
use crate::report::{AuditReport, Table};
use crate::stats::{max_of, min_of, rng_for};

/// Dilation applied to the Littlewood–Paley mother window so that the
/// level-k window is supported in `|ξ| < 2^{k-1}`, which makes sampling on
/// the level-k cube corners alias-free.
pub const PHI_DILATION: f64 = 4.0;

/// Matched analysis/synthesis windows with `ϑ = ϑ̃`:
/// `ϑ̂(ξ) = φ̂(4ξ) / √D(4ξ)`, `D(ρ) = Σ_{j∈ℤ} φ̂(ρ/2^j)²`, and
/// `ϑ̂_0 = (Σ_{j≤0} φ̂(4ξ/2^j)² / D(4ξ))^{1/2}`, so `Σ_k ϑ̂_k² = 1` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiTransformFamily {
    bump: Bump,
    lower_bound: f64,
    base_lower_bound: f64,
}

impl PhiTransformFamily {
    pub fn new(smoothness: u32) -> Result<Self> {
        let mut fam = Self { bump: Bump::new(smoothness)?, lower_bound: 0.0, base_lower_bound: 0.0 };
        let lo = 0.75 / PHI_DILATION;
        let hi = (5.0 / 3.0) / PHI_DILATION;
        let grid: Vec<f64> = (0..=4000).map(|i| lo + (hi - lo) * i as f64 / 4000.0).collect();
        fam.lower_bound = grid.iter().map(|&r| fam.mother_hat(r)).fold(f64::INFINITY, f64::min);
        fam.base_lower_bound = (0..=4000)
            .map(|i| fam.base_hat(hi * i as f64 / 4000.0))
            .fold(f64::INFINITY, f64::min);
        Ok(fam)
    }

    /// `c` with `ϑ̂ ≥ c` on the (dilated) annulus `3/4 ≤ 4|ξ| ≤ 5/3`.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// `c` with `ϑ̂_0 ≥ c` on `4|ξ| ≤ 5/3`.
    pub fn base_lower_bound(&self) -> f64 {
        self.base_lower_bound
    }

    fn dsum(&self, rho: f64) -> f64 {
        let j0 = rho.log2().floor() as i32;
        (j0 - 1..=j0 + 1)
            .map(|j| self.bump.mother(rho / (j as f64).exp2()).powi(2))
            .sum()
    }

    /// `ϑ̂(r)`, supported in `1/8 < r < 1/2`.
    pub fn mother_hat(&self, r: f64) -> f64 {
        let rho = PHI_DILATION * r;
        let m = self.bump.mother(rho);
        if m == 0.0 {
            return 0.0;
        }
        m / self.dsum(rho).sqrt()
    }

    /// `ϑ̂_0(r)`, equal to 1 for `r ≤ 1/8` and supported in `r < 1/2`.
    pub fn base_hat(&self, r: f64) -> f64 {
        let rho = PHI_DILATION * r;
        if rho <= 0.5 {
            return 1.0;
        }
        let num: f64 = [1.0, 2.0].iter().map(|m| self.bump.mother(rho * m).powi(2)).sum();
        (num / self.dsum(rho)).sqrt()
    }

    /// Level-k window at radius r.
    pub fn window(&self, k: u32, r: f64) -> f64 {
        if k == 0 {
            self.base_hat(r)
        } else {
            self.mother_hat(r / (k as f64).exp2())
        }
    }

    /// Reconstruction is exact for spectra supported in `|ξ| ≤ 2^{depth-2}`.
    pub fn frequency_limit(depth: u32) -> f64 {
        (depth as f64 - 2.0).exp2()
    }

    /// `Σ_{k=0}^{depth} ϑ̂_k(r)²`.
    pub fn frame_sum(&self, depth: u32, r: f64) -> f64 {
        (0..=depth).map(|k| self.window(k, r).powi(2)).sum()
    }
}

impl Default for PhiTransformFamily {
    fn default() -> Self {
        Self::new(1).expect("valid smoothness")
    }
}

/// `v_Q = ⟨f, ϑ̃^Q⟩ = |Q|^{1/2} (ϑ̃_k * f)(x_Q)` for `2^{-depth} ≤ l(Q) ≤ 1`.
pub fn phi_analyze(f: &GridFunction, fam: &PhiTransformFamily, depth: u32) -> Result<CoeffField> {
    let grid = *f.grid();
    require_dyadic_grid(&grid)?;
    if depth > grid.log2_n() {
        return Err(Error::Resolution(format!(
            "depth {depth} exceeds the grid resolution log2 n = {}",
            grid.log2_n()
        )));
    }
    let d = grid.dim();
    let mut out = CoeffField::new(d, depth)?;
    let spec = f.spectrum();
    let levels: Vec<Vec<Complex64>> = (0..=depth)
        .into_par_iter()
        .map(|k| {
            let filtered = GridFunction::from_spectrum(
                grid,
                spec.iter()
                    .enumerate()
                    .map(|(i, v)| v * fam.window(k, grid.frequency_norm(i)))
                    .collect(),
            )
            .expect("finite");
            let samples = filtered.samples();
            let norm = (-(k as f64) * d as f64 / 2.0).exp2();
            let stride = grid.n() >> k;
            DyadicCube::all_at_level(d, k)
                .map(|q| {
                    let o = q.offset();
                    let idx = grid.flatten([o[0] as usize * stride, o[1] as usize * stride]);
                    samples[idx] * norm
                })
                .collect()
        })
        .collect();
    for (k, vals) in levels.into_iter().enumerate() {
        out.level_mut(k as u32).copy_from_slice(&vals);
    }
    Ok(out)
}

/// `Σ_Q v_Q ϑ^Q` sampled on `grid`.
pub fn phi_synthesize(v: &CoeffField, fam: &PhiTransformFamily, grid: &Grid) -> Result<GridFunction> {
    require_dyadic_grid(grid)?;
    if v.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!("field dim {} vs grid dim {}", v.dim(), grid.dim())));
    }
    if v.max_depth() > grid.log2_n() {
        return Err(Error::Resolution(format!(
            "field depth {} exceeds the grid resolution log2 n = {}",
            v.max_depth(),
            grid.log2_n()
        )));
    }
    let d = grid.dim();
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    for k in 0..=v.max_depth() {
        let vals = v.level(k);
        if vals.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
            continue;
        }
        // V_k(ξ) = Σ_j v_j e^{-2πi x_j·ξ} is a size-2^k DFT evaluated at ξ mod 2^k
        let side = 1usize << k;
        let mut dft = vals.to_vec();
        dft_inplace(d, side, &mut dft, false);
        let norm = (-(k as f64) * d as f64 / 2.0).exp2();
        let wrap = |w: i64| w.rem_euclid(side as i64) as usize;
        for (i, s) in spec.iter_mut().enumerate() {
            let w = fam.window(k, grid.frequency_norm(i));
            if w == 0.0 {
                continue;
            }
            let wv = grid.wave_vector(i);
            let j = if d == 1 { wrap(wv[0]) } else { wrap(wv[0]) * side + wrap(wv[1]) };
            *s += dft[j] * (w * norm);
        }
    }
    GridFunction::from_spectrum(*grid, spec)
}

/// `|Q|^{1/2} ϑ_k(x - x_Q)` sampled on `grid`, by direct spectral evaluation.
pub fn phi_atom(q: &DyadicCube, fam: &PhiTransformFamily, grid: &Grid) -> Result<GridFunction> {
    require_dyadic_grid(grid)?;
    let k = q.level();
    let xq = q.corner();
    let norm = q.volume().sqrt();
    let spec = (0..grid.len())
        .map(|i| {
            let xi = grid.frequency(i);
            let w = fam.window(k, grid.frequency_norm(i));
            norm * w * Complex64::from_polar(1.0, -2.0 * PI * (xi[0] * xq[0] + xi[1] * xq[1]))
        })
        .collect();
    GridFunction::from_spectrum(*grid, spec)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiAuditConfig {
    pub dim: usize,
    pub n: usize,
    pub trials: usize,
    pub space: SpaceParams,
    pub seed: u64,
}

impl Default for PhiAuditConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: 256,
            trials: 50,
            space: SpaceParams::triebel(0.0, 2.0, 2.0).expect("valid"),
            seed: 21,
        }
    }
}

fn phi_ratios(cfg: &PhiAuditConfig, n: usize, fam: &PhiTransformFamily) -> Result<Vec<f64>> {
    let grid = check_base(cfg.dim, n)?;
    let depth = grid.log2_n();
    let limit = PhiTransformFamily::frequency_limit(depth);
    let analyzer = Analyzer::for_grid(&grid)?;
    let sp = cfg.space;
    let ratios: Vec<Option<f64>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Option<f64>> {
            let mut rng = rng_for(cfg.seed, 2, t);
            let f = if t % 2 == 0 {
                bump_train(&grid, limit, 3, &mut rng)
            } else {
                random_trig(&grid, limit / 8.0, limit, &mut rng)
            };
            let fnorm = analyzer.norm(&f, &sp)?;
            if fnorm == 0.0 {
                return Ok(None);
            }
            let v = phi_analyze(&f, fam, depth)?;
            Ok(Some(sequence_norm(&v, &sp) / fnorm))
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().flatten().collect())
}

/// Ratio `‖S_ϑ f‖_{f_p^{s,q}} / ‖f‖_{F_p^{s,q}}` over random band-limited f,
/// at `n` and `2n`.
pub fn norm_equivalence_audit(cfg: &PhiAuditConfig) -> Result<AuditReport> {
    let sp = cfg.space;
    if sp.family != Family::TriebelLizorkin || sp.p.is_infinite() {
        return Err(Error::InvalidParameter("norm equivalence audit needs F parameters with p < inf".into()));
    }
    let fam = PhiTransformFamily::default();
    let mut r = AuditReport::new(
        "phi-norm-equivalence",
        "||f||_F comparable to ||phi-transform coefficients of f||_f",
    )
    .param("dim", cfg.dim)
    .param("n", cfg.n)
    .param("trials", cfg.trials)
    .param("space", sp.to_json())
    .param("seed", cfg.seed);
    r.table = Table::new(&["n", "ratio_min", "ratio_max", "constant"]);
    let mut cs = Vec::new();
    for n in [cfg.n, 2 * cfg.n] {
        let ratios = phi_ratios(cfg, n, &fam)?;
        if ratios.is_empty() {
            return Err(Error::InvalidParameter("every trial input vanished".into()));
        }
        let (lo, hi) = (min_of(&ratios), max_of(&ratios));
        let c = hi.max(1.0 / lo);
        r.table.push(vec![n as f64, lo, hi, c]);
        if n == cfg.n {
            r.metric("ratio_min", lo);
            r.metric("ratio_max", hi);
        }
        cs.push(c);
    }
    r.metric("lower_bound_c", fam.lower_bound());
    doubling_verdict(&mut r, cs[0], cs[1]);
    let tol = 0.15;
    let drift = (cs[1] / cs[0] - 1.0).abs();
    r.tolerance = Some(tol);
    r.verdict(cs[0].max(cs[1]), cs[0].min(cs[1]) * (1.0 + tol), drift <= tol);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_identity_is_exact() {
        let fam = PhiTransformFamily::default();
        for i in 0..=5000 {
            let r = 64.0 * i as f64 / 5000.0;
            assert!((fam.frame_sum(8, r) - 1.0).abs() < 1e-12, "r = {r}");
        }
        assert!(fam.lower_bound() > 0.1 && fam.base_lower_bound() > 0.1);
        assert_eq!(fam.mother_hat(0.5), 0.0);
        assert_eq!(fam.mother_hat(0.125), 0.0);
        assert_eq!(fam.base_hat(0.5), 0.0);
    }

    #[test]
    fn round_trip_on_band_limited_inputs() {
        let fam = PhiTransformFamily::default();
        for (dim, n) in [(1, 256), (2, 32)] {
            let g = Grid::unit(dim, n).unwrap();
            let depth = g.log2_n();
            let lim = PhiTransformFamily::frequency_limit(depth);
            for seed in 0..5 {
                let f = random_trig(&g, 0.0, lim, &mut rng_for(seed, 0, 0));
                let back = phi_synthesize(&phi_analyze(&f, &fam, depth).unwrap(), &fam, &g).unwrap();
                let err = back.sub(&f).unwrap().lp_norm(2.0) / f.lp_norm(2.0);
                assert!(err < 1e-8, "dim {dim}: {err}");
            }
        }
    }

    #[test]
    fn single_coefficient_synthesizes_atom() {
        let fam = PhiTransformFamily::default();
        let g = Grid::unit(1, 128).unwrap();
        let q = DyadicCube::new(1, 4, [5, 0]).unwrap();
        let mut v = CoeffField::new(1, 6).unwrap();
        v.set(&q, Complex64::new(1.0, 0.0)).unwrap();
        let a = phi_synthesize(&v, &fam, &g).unwrap();
        let b = phi_atom(&q, &fam, &g).unwrap();
        let diff = a.sub(&b).unwrap().abs().into_iter().fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn analysis_is_linear_and_zero_preserving() {
        let fam = PhiTransformFamily::default();
        let g = Grid::unit(1, 64).unwrap();
        let z = phi_analyze(&GridFunction::zeros(g), &fam, 6).unwrap();
        assert!(z.is_zero());
        let f = random_trig(&g, 0.0, 16.0, &mut rng_for(1, 0, 0));
        let h = random_trig(&g, 0.0, 16.0, &mut rng_for(2, 0, 0));
        let mut sum = phi_analyze(&f, &fam, 6).unwrap();
        sum.add_scaled(&phi_analyze(&h, &fam, 6).unwrap(), Complex64::new(1.0, 0.0)).unwrap();
        let joint = phi_analyze(&f.add(&h).unwrap(), &fam, 6).unwrap();
        assert!(sum.max_abs_diff(&joint).unwrap() < 1e-12);
        assert!(phi_analyze(&f, &fam, 7).is_err());
    }
}
