use num_complex::Complex64;
use rayon::prelude::*;

use super::{LatticeSymbol, Symbol};
use crate::error::{Error, Result};
use crate::grid::{forward, inverse, Grid};
use crate::littlewood_paley::LPPartition;

/// `a = a⁽¹⁾ + a⁽²⁾ + a⁽³⁾` with `a_{j,k}(x, ξ) = (φ_j ∗ a(·, ξ))(x) φ̂_k(ξ)`
/// grouped by `j ≥ k+3`, `|j−k| ≤ 2`, `j ≤ k−3`, and the bands
/// `b_k = (Σ_{j≤k−3} φ_j) ∗ a(·, ξ) φ̂_k(ξ)`, `k ≥ 3`, summing to `a⁽³⁾`.
#[derive(Debug, Clone)]
pub struct ParadiffDecomposition {
    pub partition: LPPartition,
    pub pieces: [LatticeSymbol; 3],
    /// `bands[i]` is `b_{i+3}`.
    pub bands: Vec<LatticeSymbol>,
}

impl ParadiffDecomposition {
    pub fn band(&self, k: usize) -> Option<&LatticeSymbol> {
        k.checked_sub(3).and_then(|i| self.bands.get(i))
    }

    /// `max |a⁽¹⁾ + a⁽²⁾ + a⁽³⁾ − a|` on the lattice.
    pub fn reconstruction_error(&self, a: &dyn Symbol) -> Result<f64> {
        let grid = *self.pieces[0].grid();
        let total = LatticeSymbol::sum("sum", a.order(), self.pieces.iter())?;
        LatticeSymbol::sample(a, &grid)?.max_abs_diff(&total)
    }

    /// `max |a⁽³⁾ − Σ_k b_k|`.
    pub fn band_sum_error(&self) -> Result<f64> {
        if self.bands.is_empty() {
            let z = LatticeSymbol::zeros("0", 0.0, *self.pieces[2].grid());
            return self.pieces[2].max_abs_diff(&z);
        }
        LatticeSymbol::sum("bands", self.pieces[2].order, self.bands.iter())?.max_abs_diff(&self.pieces[2])
    }

    /// Largest |b_k(x, ξ)| with ξ outside `2^{k−1} ≤ |ξ| ≤ 2^{k+1}`, over all k.
    pub fn band_support_leak(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, b) in self.bands.iter().enumerate() {
            let c = (1u64 << (i + 3)) as f64;
            for j in b.support() {
                let r = b.grid().frequency_norm(j);
                if r < c / 2.0 || r > 2.0 * c {
                    let col = b.column(j).expect("supported column");
                    worst = worst.max(col.iter().map(|v| v.norm()).fold(0.0, f64::max));
                }
            }
        }
        worst
    }
}

/// x-frequency windows `Σ_{j∈group} φ̂_j(|η|)` of the three groups for band k.
fn x_windows(grid: &Grid, p: &LPPartition, k: usize) -> [Vec<f64>; 3] {
    let levels = p.levels() as i64;
    let k = k as i64;
    let group = |lo: i64, hi: i64| -> Vec<f64> {
        (0..grid.len())
            .map(|i| {
                let r = grid.frequency_norm(i);
                (lo.max(0)..=hi.min(levels)).map(|j| p.band(j as usize, r)).sum()
            })
            .collect()
    };
    [group(k + 3, levels), group(k - 2, k + 2), group(0, k - 3)]
}

fn windowed(grid: &Grid, spec: &[Complex64], w: &[f64], scale: f64) -> Vec<Complex64> {
    let v: Vec<Complex64> = spec.iter().zip(w).map(|(s, w)| s * (w * scale)).collect();
    inverse(grid, &v)
}

fn column(a: &dyn Symbol, grid: &Grid, j: usize) -> Vec<Complex64> {
    (0..grid.len()).map(|i| a.on_lattice(grid, i, j)).collect()
}

fn check(a: &dyn Symbol, grid: &Grid, p: &LPPartition) -> Result<()> {
    p.require_resolves(grid)?;
    if let Some(g) = a.lattice() {
        g.same_as(grid)?;
    }
    Ok(())
}

/// Splits `a` on the lattice of `grid`; each x-smoothing is done per ξ
/// column by transforming in x, windowing and transforming back.
pub fn decompose_paradiff(a: &dyn Symbol, grid: &Grid, partition: &LPPartition) -> Result<ParadiffDecomposition> {
    check(a, grid, partition)?;
    let levels = partition.levels();
    let windows: Vec<[Vec<f64>; 3]> = (0..=levels).map(|k| x_windows(grid, partition, k)).collect();
    type Col = (usize, [Vec<Complex64>; 3], Vec<(usize, Vec<Complex64>)>);
    let cols: Vec<Col> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let r = grid.frequency_norm(j);
            let spec = forward(grid, &column(a, grid, j));
            let mut out = [(); 3].map(|_| vec![Complex64::new(0.0, 0.0); grid.len()]);
            let mut bands = Vec::new();
            for (k, w) in windows.iter().enumerate() {
                let phik = partition.band(k, r);
                if phik == 0.0 {
                    continue;
                }
                for g in 0..3 {
                    if w[g].iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let piece = windowed(grid, &spec, &w[g], phik);
                    out[g].iter_mut().zip(&piece).for_each(|(u, v)| *u += v);
                    if g == 2 && k >= 3 {
                        bands.push((k, piece));
                    }
                }
            }
            (j, out, bands)
        })
        .collect();
    let name = a.name();
    let mut pieces = [1, 2, 3].map(|i| LatticeSymbol::zeros(format!("{name}^({i})"), a.order(), *grid));
    let mut bands: Vec<LatticeSymbol> =
        (3..=levels).map(|k| LatticeSymbol::zeros(format!("{name} b_{k}"), a.order(), *grid)).collect();
    for (j, out, bs) in cols {
        for (piece, col) in pieces.iter_mut().zip(out) {
            piece.set_column(j, col)?;
        }
        for (k, col) in bs {
            bands[k - 3].set_column(j, col)?;
        }
    }
    Ok(ParadiffDecomposition { partition: partition.clone(), pieces, bands })
}

/// `b_k` alone, tabulated only on the frequency columns of band k.
pub fn band_symbol(a: &dyn Symbol, grid: &Grid, partition: &LPPartition, k: usize) -> Result<LatticeSymbol> {
    check(a, grid, partition)?;
    if k > partition.levels() {
        return Err(Error::BandOutOfRange { band: k, levels: partition.levels() });
    }
    if k < 3 {
        return Err(Error::InvalidParameter(format!("b_k is defined for k >= 3, got {k}")));
    }
    let low = x_windows(grid, partition, k)[2].clone();
    let cols: Vec<(usize, Vec<Complex64>)> = (0..grid.len())
        .into_par_iter()
        .filter_map(|j| {
            let phik = partition.band(k, grid.frequency_norm(j));
            (phik != 0.0).then(|| (j, windowed(grid, &forward(grid, &column(a, grid, j)), &low, phik)))
        })
        .collect();
    let mut b = LatticeSymbol::zeros(format!("{} b_{k}", a.name()), a.order(), *grid);
    for (j, c) in cols {
        b.set_column(j, c)?;
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudo::{Modulated, Oscillatory};
    use crate::stats::rng_for;
    use rand::Rng;

    /// `e^{2πi·8x} h(ξ)`.
    #[derive(Debug)]
    struct Wave8;
    impl Symbol for Wave8 {
        fn name(&self) -> String {
            "wave8".into()
        }
        fn order(&self) -> f64 {
            0.0
        }
        fn kind(&self) -> crate::pseudo::SymbolKind {
            crate::pseudo::SymbolKind::ClosedForm
        }
        fn eval(&self, x: [f64; 2], xi: [f64; 2]) -> Complex64 {
            Complex64::from_polar(1.0 / (1.0 + xi[0].abs()), 2.0 * std::f64::consts::PI * 8.0 * x[0])
        }
    }

    #[test]
    fn multiplier_has_no_first_piece_and_plain_bands() {
        let g = Grid::unit(1, 128).unwrap();
        let p = LPPartition::for_grid(&g, 1).unwrap();
        let a = Oscillatory { m: -0.5, rho: 0.2 };
        let d = decompose_paradiff(&a, &g, &p).unwrap();
        let zero = LatticeSymbol::zeros("0", 0.0, g);
        assert!(d.pieces[0].max_abs_diff(&zero).unwrap() < 1e-12);
        assert!(d.reconstruction_error(&a).unwrap() < 1e-10);
        for k in 3..=p.levels() {
            let b = d.band(k).unwrap();
            for j in 0..g.len() {
                let want = a.on_lattice(&g, 0, j) * p.band(k, g.frequency_norm(j));
                assert!((b.get(5, j) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_x_band_enters_by_group() {
        let g = Grid::unit(1, 128).unwrap();
        let p = LPPartition::for_grid(&g, 1).unwrap();
        let d = decompose_paradiff(&Wave8, &g, &p).unwrap();
        // φ̂_j(8) ≠ 0 only for j = 3 (φ̂_3(8) = 1); so ξ-band k is in group
        // (1) for k ≤ 0, (2) for 1 ≤ k ≤ 5, (3) for k ≥ 6.
        for j in 0..g.len() {
            let r = g.frequency_norm(j);
            let a = Wave8.on_lattice(&g, 9, j);
            let w = |lo: usize, hi: usize| (lo..=hi.min(p.levels())).map(|k| p.band(k, r)).sum::<f64>();
            let want = [a * w(0, 0), a * w(1, 5), a * w(6, 99)];
            for (piece, v) in d.pieces.iter().zip(want) {
                assert!((piece.get(9, j) - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn random_table_telescopes() {
        let g = Grid::unit(1, 64).unwrap();
        let p = LPPartition::for_grid(&g, 1).unwrap();
        let mut rng = rng_for(4, 0, 0);
        let mut t = LatticeSymbol::zeros("random", 0.0, g);
        for j in 0..g.len() {
            t.set_column(j, (0..g.len()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect()).unwrap();
        }
        let d = decompose_paradiff(&t, &g, &p).unwrap();
        assert!(d.reconstruction_error(&t).unwrap() < 1e-10);
        assert!(d.band_sum_error().unwrap() < 1e-10);
        assert_eq!(d.band_support_leak(), 0.0);
    }

    #[test]
    fn band_symbol_matches_decomposition_in_2d() {
        let g = Grid::unit(2, 16).unwrap();
        let p = LPPartition::for_grid(&g, 1).unwrap();
        let a = Modulated { m: 0.0, nu: 1.0, kappa: 0.5, amp: 0.3 };
        let d = decompose_paradiff(&a, &g, &p).unwrap();
        assert!(d.reconstruction_error(&a).unwrap() < 1e-10);
        let b = band_symbol(&a, &g, &p, 3).unwrap();
        assert!(b.max_abs_diff(d.band(3).unwrap()).unwrap() < 1e-12);
        assert!(band_symbol(&a, &g, &p, 2).is_err());
    }
}
