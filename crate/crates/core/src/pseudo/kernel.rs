use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LatticeSymbol;
use crate::error::{Error, Result};
use crate::grid::{forward, inverse, Grid};

/// Kernel `K_k(x, y) = Σ_ξ b_k(x, ξ) e^{2πi⟨x−y, ξ⟩} / L^d` of a band symbol
/// and the adjoint-side symbol `c_k(y, η) = ∫ K_k(x+y, y) e^{−2πi⟨x, η⟩} dx`.
#[derive(Debug, Clone)]
pub struct BandKernel {
    pub k: usize,
    grid: Grid,
    /// Row x, column y.
    kernel: Vec<Complex64>,
    /// Row y, column η.
    adjoint: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedBound {
    pub alpha: [u32; 2],
    /// `sup_y (∫ |(x−y)^α K(x, y)|² dx)^{1/2}`.
    pub value: f64,
    /// `value · 2^{−k(m + d/2 − |α|)}`.
    pub constant: f64,
}

fn shift(grid: &Grid, a: usize, b: usize, sign: i64) -> usize {
    let n = grid.n() as i64;
    let [a0, a1] = grid.unflatten(a);
    let [b0, b1] = grid.unflatten(b);
    let w = |u: usize, v: usize| (u as i64 + sign * v as i64).rem_euclid(n) as usize;
    grid.flatten([w(a0, b0), w(a1, b1)])
}

impl BandKernel {
    /// Fails with [`Error::BandMismatch`] unless every stored column of `b`
    /// lies in `2^{k−1} ≤ |ξ| ≤ 2^{k+1}`.
    pub fn new(b: &LatticeSymbol, k: usize) -> Result<Self> {
        let grid = *b.grid();
        let c = (1u64 << k) as f64;
        if let Some(j) = b.support().find(|&j| {
            let r = grid.frequency_norm(j);
            (r < c / 2.0 || r > 2.0 * c) && b.column(j).is_some_and(|col| col.iter().any(|v| v.norm() > 0.0))
        }) {
            return Err(Error::BandMismatch {
                band: k,
                detail: format!("nonzero column at |xi| = {}", grid.frequency_norm(j)),
            });
        }
        let support: Vec<usize> = b.support().collect();
        let len = grid.len();
        let rows: Vec<Vec<Complex64>> = (0..len)
            .into_par_iter()
            .map(|i| {
                let mut spec = vec![Complex64::new(0.0, 0.0); len];
                for &j in &support {
                    spec[j] = b.get(i, j);
                }
                let u = inverse(&grid, &spec);
                (0..len).map(|j| u[shift(&grid, i, j, -1)]).collect()
            })
            .collect();
        let kernel: Vec<Complex64> = rows.concat();
        let adjoint: Vec<Complex64> = (0..len)
            .into_par_iter()
            .map(|y| {
                let u: Vec<Complex64> = (0..len).map(|t| kernel[shift(&grid, t, y, 1) * len + y]).collect();
                forward(&grid, &u)
            })
            .collect::<Vec<_>>()
            .concat();
        Ok(Self { k, grid, kernel, adjoint })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self, x: usize, y: usize) -> Complex64 {
        self.kernel[x * self.grid.len() + y]
    }

    pub fn adjoint(&self, y: usize, eta: usize) -> Complex64 {
        self.adjoint[y * self.grid.len() + eta]
    }

    /// Largest |c_k(y, η)| with η outside `2^{k−2} ≤ |η| ≤ 2^{k+2}`,
    /// relative to the overall maximum.
    pub fn eta_leakage(&self) -> f64 {
        let c = (1u64 << self.k) as f64;
        let len = self.grid.len();
        let (mut inside, mut outside): (f64, f64) = (0.0, 0.0);
        for (idx, v) in self.adjoint.iter().enumerate() {
            let r = self.grid.frequency_norm(idx % len);
            if r < c / 4.0 || r > 4.0 * c {
                outside = outside.max(v.norm());
            } else {
                inside = inside.max(v.norm());
            }
        }
        if inside == 0.0 { outside } else { outside / inside }
    }

    /// `sup_y (∫ |(x−y)^α K(x, y)|² dx)^{1/2}` with x−y taken in the
    /// centered period.
    pub fn weighted_l2(&self, alpha: [u32; 2]) -> f64 {
        let g = &self.grid;
        let len = g.len();
        let period = g.period();
        let centered = |t: f64| {
            let v = t.rem_euclid(period);
            if v >= period / 2.0 { v - period } else { v }
        };
        (0..len)
            .into_par_iter()
            .map(|y| {
                let py = g.point(y);
                let s: f64 = (0..len)
                    .map(|x| {
                        let px = g.point(x);
                        let w = centered(px[0] - py[0]).powi(alpha[0] as i32)
                            * centered(px[1] - py[1]).powi(alpha[1] as i32);
                        (w * self.kernel(x, y).norm()).powi(2)
                    })
                    .sum();
                (s * g.cell_volume()).sqrt()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Bounds for every |α| ≤ 2, normalized by `2^{k(m + d/2 − |α|)}`.
    pub fn weighted_bounds(&self, m: f64) -> Vec<WeightedBound> {
        let d = self.grid.dim() as f64;
        let alphas: Vec<[u32; 2]> = if self.grid.dim() == 1 {
            vec![[0, 0], [1, 0], [2, 0]]
        } else {
            vec![[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]
        };
        alphas
            .into_iter()
            .map(|alpha| {
                let value = self.weighted_l2(alpha);
                let a = (alpha[0] + alpha[1]) as f64;
                WeightedBound { alpha, value, constant: value * (-(self.k as f64) * (m + d / 2.0 - a)).exp2() }
            })
            .collect()
    }

    /// Largest relative gap between `∫|K(x, y)|² dx` and `Σ_η |c(y, η)|² / L^d`.
    pub fn plancherel_error(&self) -> f64 {
        let g = &self.grid;
        let len = g.len();
        (0..len)
            .map(|y| {
                let lhs: f64 = (0..len).map(|x| self.kernel(x, y).norm_sqr()).sum::<f64>() * g.cell_volume();
                let rhs: f64 = self.adjoint[y * len..(y + 1) * len].iter().map(|v| v.norm_sqr()).sum::<f64>()
                    / g.volume();
                (lhs - rhs).abs() / lhs.max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::littlewood_paley::LPPartition;
    use crate::pseudo::{band_symbol, Bessel, Identity, Modulated};
    use crate::stats::fit_line;

    #[test]
    fn identity_kernel_is_band_convolution() {
        let g = Grid::unit(1, 64).unwrap();
        let p = LPPartition::for_grid(&g, 1).unwrap();
        let k = 4;
        let b = band_symbol(&Identity, &g, &p, k).unwrap();
        let kk = BandKernel::new(&b, k).unwrap();
        let win: Vec<Complex64> = (0..g.len()).map(|j| Complex64::new(p.band(k, g.frequency_norm(j)), 0.0)).collect();
        let phi = inverse(&g, &win);
        for x in 0..g.len() {
            for y in 0..g.len() {
                let t = (x + g.len() - y) % g.len();
                assert!((kk.kernel(x, y) - phi[t]).norm() < 1e-10);
            }
        }
        assert!(kk.plancherel_error() < 1e-10);
    }

    #[test]
    fn adjoint_lives_in_annulus() {
        let g = Grid::unit(1, 128).unwrap();
        let p = LPPartition::for_grid(&g, 1).unwrap();
        let a = Modulated { m: 0.0, nu: 1.0, kappa: 0.3, amp: 0.5 };
        for k in 3..=5 {
            let b = band_symbol(&a, &g, &p, k).unwrap();
            let kk = BandKernel::new(&b, k).unwrap();
            assert!(kk.eta_leakage() < 1e-10, "k = {k}: {}", kk.eta_leakage());
            assert!(kk.plancherel_error() < 1e-10);
        }
    }

    #[test]
    fn band_mismatch_is_rejected() {
        let g = Grid::unit(1, 64).unwrap();
        let p = LPPartition::for_grid(&g, 1).unwrap();
        let b = band_symbol(&Identity, &g, &p, 4).unwrap();
        assert!(matches!(BandKernel::new(&b, 3), Err(Error::BandMismatch { .. })));
    }

    #[test]
    fn unweighted_bound_grows_like_order_plus_half_dimension() {
        let g = Grid::unit(1, 1024).unwrap();
        let p = LPPartition::for_grid(&g, 1).unwrap();
        for m in [0.0, -0.5] {
            let a = Bessel { m };
            let ks: Vec<f64> = (3..=8).map(|k| k as f64).collect();
            let ys: Vec<f64> = (3..=8)
                .map(|k| {
                    let b = band_symbol(&a, &g, &p, k).unwrap();
                    BandKernel::new(&b, k).unwrap().weighted_l2([0, 0]).log2()
                })
                .collect();
            let fit = fit_line(&ks, &ys);
            assert!((fit.slope - (m + 0.5)).abs() < 0.15, "m = {m}: slope {}", fit.slope);
        }
    }
}
