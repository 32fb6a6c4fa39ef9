use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Analyzer, Family, SpaceParams};
use crate::dyadic::require_dyadic_grid;
use crate::error::{Error, Result};
use crate::grid::{lp_norm, GridFunction};
use crate::littlewood_paley::LPPartition;
use crate::maximal::{check_base, doubling_verdict, vector_sharp_values};
use crate::probes::bump_train;
use crate::report::{AuditReport, Table};
use crate::stats::{max_of, min_of, rng_for};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpNorm {
    pub value: f64,
    /// False when `q < p` fails; the value is still computed.
    pub within_hypothesis: bool,
}

impl Analyzer {
    /// `Σ_{j<n} 2^{sj}‖Λ_j f‖_p + ‖𝒩^{♯,n}_q({2^{sk}Λ_k f})‖_p`.
    pub fn triebel_sharp(&self, f: &GridFunction, s: f64, p: f64, q: f64, n: usize) -> Result<SharpNorm> {
        self.grid().same_as(f.grid())?;
        require_dyadic_grid(self.grid())?;
        if !(p > 0.0 && p.is_finite() && q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("need finite positive p, q; got p = {p}, q = {q}")));
        }
        let levels = self.levels();
        let low: f64 = (0..n.min(levels + 1))
            .map(|j| (s * j as f64).exp2() * self.band_lp(f, j, p))
            .sum();
        let first = n.min(levels + 1);
        let bands: Vec<Vec<f64>> = (first..=levels)
            .map(|k| {
                let w = (s * k as f64).exp2();
                self.band_moduli(f, k)
                    .map(|m| m.into_iter().map(|v| w * v).collect())
                    .unwrap_or_else(|| vec![0.0; self.grid().len()])
            })
            .collect();
        let high = if bands.is_empty() {
            0.0
        } else {
            let vals = vector_sharp_values(self.grid(), first, &bands, q, n);
            lp_norm(&vals, self.grid().cell_volume(), p)
        };
        Ok(SharpNorm { value: low + high, within_hypothesis: q < p })
    }
}

pub fn triebel_sharp_norm(
    f: &GridFunction,
    partition: &LPPartition,
    sp: &SpaceParams,
    n: usize,
) -> Result<SharpNorm> {
    if sp.family != Family::TriebelLizorkin {
        return Err(Error::InvalidParameter("sharp characterization is for F spaces".into()));
    }
    Analyzer::new(f.grid(), partition)?.triebel_sharp(f, sp.s, sp.p, sp.q, n)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharpNormAuditConfig {
    pub dim: usize,
    pub n: usize,
    pub trials: usize,
    pub space: SpaceParams,
    /// Index n of the sharp function at the base resolution (bands below it
    /// enter through L^p norms); it moves up by one with the doubled grid.
    pub split: usize,
    pub seed: u64,
}

impl Default for SharpNormAuditConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: 512,
            trials: 30,
            space: SpaceParams::triebel(0.0, 4.0, 2.0).expect("valid"),
            split: 5,
            seed: 22,
        }
    }
}

fn sharp_ratios(cfg: &SharpNormAuditConfig, n: usize, split: usize) -> Result<Vec<f64>> {
    let grid = check_base(cfg.dim, n)?;
    let analyzer = Analyzer::for_grid(&grid)?;
    let sp = cfg.space;
    let radius = (n / 4) as f64;
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(cfg.seed, 3, t);
            let f = bump_train(&grid, radius, 4, &mut rng);
            let sharp = analyzer.triebel_sharp(&f, sp.s, sp.p, sp.q, split)?.value;
            Ok(sharp / analyzer.triebel(&f, sp.s, sp.p, sp.q)?)
        })
        .collect()
}

/// Ratio of the sharp-function form to the Triebel–Lizorkin norm over random
/// band-limited f, at `n` and `2n`.
pub fn sharp_equivalence_audit(cfg: &SharpNormAuditConfig) -> Result<AuditReport> {
    let sp = cfg.space;
    if sp.family != Family::TriebelLizorkin || sp.p.is_infinite() || sp.q.is_infinite() {
        return Err(Error::InvalidParameter("need F parameters with finite p and q".into()));
    }
    let mut r = AuditReport::new(
        "sharp-norm-equivalence",
        "||f||_F comparable to low bands plus ||N^#_q of high bands||_p (q < p)",
    )
    .param("dim", cfg.dim)
    .param("n", cfg.n)
    .param("trials", cfg.trials)
    .param("space", sp.to_json())
    .param("split", cfg.split)
    .param("seed", cfg.seed)
    .param("within_hypothesis", sp.q < sp.p);
    if sp.q >= sp.p {
        r.note("q >= p: the sharp characterization hypothesis is violated; values are recorded only");
    }
    r.table = Table::new(&["n", "split", "ratio_min", "ratio_max", "constant"]);
    let mut cs = Vec::new();
    for (n, split) in [(cfg.n, cfg.split), (2 * cfg.n, cfg.split + 1)] {
        let ratios = sharp_ratios(cfg, n, split)?;
        let (lo, hi) = (min_of(&ratios), max_of(&ratios));
        let c = hi.max(1.0 / lo);
        r.table.push(vec![n as f64, split as f64, lo, hi, c]);
        if n == cfg.n {
            r.metric("ratio_min", lo);
            r.metric("ratio_max", hi);
        }
        cs.push(c);
    }
    doubling_verdict(&mut r, cs[0], cs[1]);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::probes::random_trig;
    use num_complex::Complex64;

    #[test]
    fn constant_reduces_to_modulus() {
        let g = Grid::unit(1, 64).unwrap();
        let a = Analyzer::for_grid(&g).unwrap();
        let c = GridFunction::constant(g, Complex64::new(3.0, -4.0));
        let v = a.triebel_sharp(&c, 0.0, 4.0, 2.0, 1).unwrap();
        assert!((v.value - 5.0).abs() < 1e-12);
        assert!(v.within_hypothesis);
        assert!(!a.triebel_sharp(&c, 0.0, 2.0, 2.0, 1).unwrap().within_hypothesis);
    }

    #[test]
    fn single_high_band_bounded_by_norm_both_ways() {
        let g = Grid::unit(1, 256).unwrap();
        let a = Analyzer::for_grid(&g).unwrap();
        for seed in 0..5 {
            let f = random_trig(&g, 40.0, 56.0, &mut rng_for(seed, 0, 0));
            let f = a.table().project(&f, 6);
            let sharp = a.triebel_sharp(&f, 0.0, 4.0, 2.0, 5).unwrap().value;
            let norm = a.triebel(&f, 0.0, 4.0, 2.0).unwrap();
            let ratio = sharp / norm;
            assert!(ratio > 0.9 && ratio < 3.0, "ratio {ratio}");
        }
    }
}
