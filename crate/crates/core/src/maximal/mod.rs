//! Hardy–Littlewood, Peetre, dyadic and sharp maximal operators on the torus.
//!
//! Suprema over continuous translations are taken over the sample lattice
//! with the periodic (minimum image) distance; [`peetre_maximal_refined`]
//! oversamples first to bound the lattice error.

mod audit;

pub use audit::*;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{cube_of_sample, require_dyadic_grid, DyadicCube, Pyramid};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

/// Cube family for the Hardy–Littlewood operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HlVariant {
    /// Lattice cubes centered at the evaluation point.
    Centered,
    /// Dyadic cubes containing the evaluation point (unit torus only).
    Dyadic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeetreParams {
    sigma: f64,
    r: f64,
}

impl PeetreParams {
    pub fn new(sigma: f64, r: f64) -> Result<Self> {
        if !(sigma > 0.0 && r > 0.0 && sigma.is_finite() && r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Peetre parameters need sigma > 0 and r > 0, got ({sigma}, {r})"
            )));
        }
        Ok(Self { sigma, r })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

fn real_function(grid: Grid, values: Vec<f64>) -> GridFunction {
    GridFunction::from_samples(grid, values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
        .expect("maximal values are finite")
}

/// `M_t f = (M |f|^t)^{1/t}` for the chosen cube family.
pub fn hl_maximal(f: &GridFunction, variant: HlVariant, t: f64) -> Result<GridFunction> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let grid = *f.grid();
    let powered: Vec<f64> = f.samples().iter().map(|v| v.norm().powf(t)).collect();
    let sup = match variant {
        HlVariant::Centered => centered_averages(&grid, &powered),
        HlVariant::Dyadic => {
            require_dyadic_grid(&grid)?;
            dyadic_averages(&grid, &powered)
        }
    };
    Ok(real_function(grid, sup.into_iter().map(|v| v.powf(1.0 / t)).collect()))
}

/// Pointwise sup of averages over centered lattice cubes of side
/// `2r+1` cells (`r < n/2`) and over the whole torus.
pub fn centered_averages(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let total = values.iter().sum::<f64>() / values.len() as f64;
    if grid.dim() == 1 {
        let mut prefix = vec![0.0; 3 * n + 1];
        for i in 0..3 * n {
            prefix[i + 1] = prefix[i] + values[i % n];
        }
        (0..n)
            .into_par_iter()
            .map(|x| {
                let mut best = total;
                for r in 0..n / 2 {
                    // window [x - r, x + r] shifted by n to stay non-negative
                    let lo = x + n - r;
                    let s = prefix[lo + 2 * r + 1] - prefix[lo];
                    best = best.max(s / (2 * r + 1) as f64);
                }
                best
            })
            .collect()
    } else {
        let m = 3 * n;
        let mut sat = vec![0.0; (m + 1) * (m + 1)];
        for a in 0..m {
            let mut row = 0.0;
            for b in 0..m {
                row += values[(a % n) * n + (b % n)];
                sat[(a + 1) * (m + 1) + b + 1] = sat[a * (m + 1) + b + 1] + row;
            }
        }
        let rect = |a0: usize, b0: usize, w: usize| {
            let (a1, b1) = (a0 + w, b0 + w);
            sat[a1 * (m + 1) + b1] - sat[a0 * (m + 1) + b1] - sat[a1 * (m + 1) + b0]
                + sat[a0 * (m + 1) + b0]
        };
        (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (x, y) = (idx / n, idx % n);
                let mut best = total;
                for r in 0..n / 2 {
                    let w = 2 * r + 1;
                    let s = rect(x + n - r, y + n - r, w);
                    best = best.max(s / (w * w) as f64);
                }
                best
            })
            .collect()
    }
}

/// Pointwise sup of averages over the dyadic cubes containing each sample.
pub fn dyadic_averages(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let pyr = Pyramid::new(grid, values);
    (0..grid.len())
        .map(|i| {
            (0..=pyr.top())
                .map(|k| pyr.level(k)[cube_of_sample(grid, i, k)])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Lattice offsets with their periodic distance, sorted by distance.
fn sorted_offsets(grid: &Grid) -> Vec<(i64, i64, f64)> {
    let n = grid.n() as i64;
    let h = grid.spacing();
    let half = n / 2;
    let mut out = Vec::new();
    if grid.dim() == 1 {
        for j in -half..half {
            out.push((j, 0, (j.abs() as f64) * h));
        }
    } else {
        for a in -half..half {
            for b in -half..half {
                out.push((a, b, ((a * a + b * b) as f64).sqrt() * h));
            }
        }
    }
    out.sort_by(|x, y| x.2.total_cmp(&y.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    out
}

/// Peetre maximal values of nonnegative samples.
pub fn peetre_values(grid: &Grid, abs: &[f64], params: PeetreParams) -> Vec<f64> {
    let n = grid.n() as i64;
    let offsets: Vec<(i64, i64, f64)> = sorted_offsets(grid)
        .into_iter()
        .map(|(a, b, d)| (a, b, (1.0 + params.r * d).powf(-params.sigma)))
        .collect();
    let amax = abs.iter().fold(0.0f64, |m, v| m.max(*v));
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let [x0, x1] = grid.unflatten(idx);
            let mut best = abs[idx];
            for &(a, b, w) in &offsets[1..] {
                if amax * w <= best {
                    break;
                }
                let i0 = (x0 as i64 + a).rem_euclid(n) as usize;
                let j = if grid.dim() == 1 {
                    i0
                } else {
                    grid.flatten([i0, (x1 as i64 + b).rem_euclid(n) as usize])
                };
                best = best.max(abs[j] * w);
            }
            best
        })
        .collect()
}

/// `𝔐_{σ,r} f(x) = sup_y |f(x+y)| / (1 + r|y|)^σ`.
pub fn peetre_maximal(f: &GridFunction, params: PeetreParams) -> GridFunction {
    let grid = *f.grid();
    real_function(grid, peetre_values(&grid, &f.abs(), params))
}

/// Peetre maximal function evaluated on a grid refined `factor` times by
/// band-limited interpolation, then restricted to the original samples.
pub fn peetre_maximal_refined(
    f: &GridFunction,
    params: PeetreParams,
    factor: usize,
) -> Result<GridFunction> {
    if factor == 1 {
        return Ok(peetre_maximal(f, params));
    }
    let fine = f.refine(factor)?;
    let vals = peetre_values(fine.grid(), &fine.abs(), params);
    let g = *f.grid();
    let coarse = (0..g.len())
        .map(|i| {
            let [a, b] = g.unflatten(i);
            let fb = if g.dim() == 1 { 0 } else { b * factor };
            vals[fine.grid().flatten([a * factor, fb])]
        })
        .collect();
    Ok(real_function(g, coarse))
}

/// Dyadic sharp maximal function: sup over dyadic Q ∋ x of the mean
/// oscillation `avg_Q |f - f_Q|`.
pub fn dyadic_sharp(f: &GridFunction) -> Result<GridFunction> {
    let grid = *f.grid();
    require_dyadic_grid(&grid)?;
    let samples = f.samples();
    let top = grid.log2_n();
    let mut best = vec![0.0f64; grid.len()];
    for k in 0..=top {
        let cubes = DyadicCube::count_at_level(grid.dim(), k);
        let per = (grid.len() / cubes) as f64;
        let mut mean = vec![Complex64::new(0.0, 0.0); cubes];
        for (i, v) in samples.iter().enumerate() {
            mean[cube_of_sample(&grid, i, k)] += v;
        }
        mean.iter_mut().for_each(|m| *m /= per);
        let mut osc = vec![0.0; cubes];
        for (i, v) in samples.iter().enumerate() {
            let c = cube_of_sample(&grid, i, k);
            osc[c] += (v - mean[c]).norm();
        }
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.max(osc[cube_of_sample(&grid, i, k)] / per);
        }
    }
    Ok(real_function(grid, best))
}

/// A finite run of bands `g_first, g_{first+1}, …` on one grid.
#[derive(Debug, Clone)]
pub struct BandSequence {
    pub first: usize,
    pub bands: Vec<GridFunction>,
}

impl BandSequence {
    pub fn new(first: usize, bands: Vec<GridFunction>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidParameter("empty band sequence".into()));
        }
        for b in &bands[1..] {
            bands[0].grid().same_as(b.grid())?;
        }
        Ok(Self { first, bands })
    }

    pub fn grid(&self) -> &Grid {
        self.bands[0].grid()
    }

    pub fn last(&self) -> usize {
        self.first + self.bands.len() - 1
    }
}

/// Pointwise values of `𝒩^{♯,n}_q`: sup over dyadic P ∋ x of
/// `(avg_P Σ_{k ≥ max(n, -log2 l(P))} |g_k|^q)^{1/q}`, from the per-band
/// moduli.
pub fn vector_sharp_values(grid: &Grid, first: usize, abs: &[Vec<f64>], q: f64, n: usize) -> Vec<f64> {
    let top = grid.log2_n();
    let pyramids: Vec<Option<Pyramid>> = abs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if first + i < n || a.iter().all(|v| *v == 0.0) {
                None
            } else {
                let pow: Vec<f64> = a.iter().map(|v| v.powf(q)).collect();
                Some(Pyramid::new(grid, &pow))
            }
        })
        .collect();
    let mut best = vec![0.0f64; grid.len()];
    for level in 0..=top {
        let cubes = DyadicCube::count_at_level(grid.dim(), level);
        let mut tail = vec![0.0; cubes];
        let lo = n.max(level as usize);
        for (i, p) in pyramids.iter().enumerate() {
            if let Some(p) = p {
                if first + i >= lo {
                    for (t, v) in tail.iter_mut().zip(p.level(level)) {
                        *t += v;
                    }
                }
            }
        }
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.max(tail[cube_of_sample(grid, i, level)]);
        }
    }
    best.into_iter().map(|v| v.powf(1.0 / q)).collect()
}

/// `𝒩^{♯,n}_q({g_k})` as a grid function.
pub fn vector_sharp(gs: &BandSequence, q: f64, n: usize) -> Result<GridFunction> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("q must be positive and finite, got {q}")));
    }
    let grid = *gs.grid();
    require_dyadic_grid(&grid)?;
    let abs: Vec<Vec<f64>> = gs.bands.iter().map(|b| b.abs()).collect();
    Ok(real_function(grid, vector_sharp_values(&grid, gs.first, &abs, q, n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::bump_train;
    use crate::stats::rng_for;
    use rand::Rng;

    fn indicator_half(n: usize) -> GridFunction {
        let g = Grid::unit(1, n).unwrap();
        GridFunction::from_real_fn(g, |x| if x[0] < 0.5 { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn constants_are_fixed_points() {
        let g = Grid::unit(2, 16).unwrap();
        let c = GridFunction::constant(g, Complex64::new(0.0, 2.5));
        for v in [HlVariant::Centered, HlVariant::Dyadic] {
            for t in [0.5, 1.0, 3.0] {
                let m = hl_maximal(&c, v, t).unwrap();
                assert!(m.samples().iter().all(|s| (s.re - 2.5).abs() < 1e-12));
            }
        }
        let p = peetre_maximal(&c, PeetreParams::new(1.5, 4.0).unwrap());
        assert!(p.samples().iter().all(|s| (s.re - 2.5).abs() < 1e-15));
        assert!(dyadic_sharp(&c).unwrap().lp_norm(f64::INFINITY) < 1e-12);
        assert!(hl_maximal(&c, HlVariant::Centered, 0.0).is_err());
    }

    #[test]
    fn dyadic_maximal_of_half_indicator() {
        let f = indicator_half(64);
        let m = hl_maximal(&f, HlVariant::Dyadic, 1.0).unwrap();
        for (i, v) in m.samples().iter().enumerate() {
            let want = if i < 32 { 1.0 } else { 0.5 };
            assert!((v.re - want).abs() < 1e-14);
        }
        let s = dyadic_sharp(&f).unwrap();
        assert!(s.samples().iter().all(|v| (v.re - 0.5).abs() < 1e-14));
    }

    #[test]
    fn centered_matches_brute_force() {
        let g = Grid::unit(1, 32).unwrap();
        let mut rng = rng_for(3, 0, 0);
        let vals: Vec<f64> = (0..32).map(|_| rng.gen::<f64>()).collect();
        let fast = centered_averages(&g, &vals);
        for x in 0..32usize {
            let mut best = vals.iter().sum::<f64>() / 32.0;
            for r in 0..16usize {
                let s: f64 = (0..2 * r + 1).map(|j| vals[(x + 32 + j - r) % 32]).sum();
                best = best.max(s / (2 * r + 1) as f64);
            }
            assert!((best - fast[x]).abs() < 1e-13);
        }
        let g2 = Grid::unit(2, 8).unwrap();
        let vals2: Vec<f64> = (0..64).map(|_| rng.gen::<f64>()).collect();
        let fast2 = centered_averages(&g2, &vals2);
        for x in 0..8usize {
            for y in 0..8usize {
                let mut best = vals2.iter().sum::<f64>() / 64.0;
                for r in 0..4usize {
                    let mut s = 0.0;
                    for a in 0..2 * r + 1 {
                        for b in 0..2 * r + 1 {
                            s += vals2[((x + 8 + a - r) % 8) * 8 + (y + 8 + b - r) % 8];
                        }
                    }
                    best = best.max(s / ((2 * r + 1) * (2 * r + 1)) as f64);
                }
                assert!((best - fast2[x * 8 + y]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn peetre_matches_brute_force_and_large_sigma() {
        let g = Grid::unit(1, 128).unwrap();
        let f = GridFunction::from_fn(g, |x| {
            Complex64::from_polar(1.0 + 0.5 * (2.0 * std::f64::consts::PI * x[0]).cos(), 8.0 * std::f64::consts::PI * x[0])
        })
        .unwrap();
        let p = PeetreParams::new(2.0, 16.0).unwrap();
        let fast = peetre_maximal(&f, p);
        let abs = f.abs();
        for x in 0..128i64 {
            let mut best: f64 = 0.0;
            for y in 0..128i64 {
                let d = (y - x).rem_euclid(128).min((x - y).rem_euclid(128)) as f64 / 128.0;
                best = best.max(abs[y as usize] / (1.0 + 16.0 * d).powf(2.0));
            }
            assert_eq!(best, fast.samples()[x as usize].re);
        }
        let big = peetre_maximal(&f, PeetreParams::new(1e3, 16.0).unwrap());
        for (a, b) in big.samples().iter().zip(&abs) {
            assert!((a.re - b).abs() < 1e-10);
        }
    }

    #[test]
    fn peetre_refinement_never_decreases() {
        let g = Grid::unit(1, 64).unwrap();
        let f = bump_train(&g, 16.0, 2, &mut rng_for(4, 0, 0));
        let p = PeetreParams::new(1.5, 8.0).unwrap();
        let a = peetre_maximal(&f, p);
        let b = peetre_maximal_refined(&f, p, 4).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!(y.re >= x.re - 1e-12);
        }
    }

    #[test]
    fn vector_sharp_matches_brute_force() {
        let g = Grid::unit(1, 32).unwrap();
        let mut rng = rng_for(5, 0, 0);
        let bands: Vec<GridFunction> = (0..4)
            .map(|i| {
                if i == 1 || i == 3 {
                    bump_train(&g, 8.0, 2, &mut rng)
                } else {
                    GridFunction::zeros(g)
                }
            })
            .collect();
        let seq = BandSequence::new(2, bands.clone()).unwrap();
        let q = 1.5;
        let n0 = 3;
        let fast = vector_sharp(&seq, q, n0).unwrap();
        for x in 0..32usize {
            let mut best: f64 = 0.0;
            for level in 0..=5u32 {
                let w = 32 >> level;
                let start = (x / w) * w;
                let mut s = 0.0;
                for (i, b) in bands.iter().enumerate() {
                    let k = 2 + i;
                    if k >= n0.max(level as usize) {
                        for y in start..start + w {
                            s += b.samples()[y].norm().powf(q);
                        }
                    }
                }
                best = best.max((s / w as f64).powf(1.0 / q));
            }
            assert!((best - fast.samples()[x].re).abs() < 1e-10);
        }
        let c = BandSequence::new(3, vec![GridFunction::constant(g, Complex64::new(-2.0, 0.0))]).unwrap();
        let v = vector_sharp(&c, 2.0, 3).unwrap();
        assert!(v.samples().iter().all(|s| (s.re - 2.0).abs() < 1e-14));
        assert!(BandSequence::new(0, vec![]).is_err());
    }

    #[test]
    fn pointwise_relations_on_random_inputs() {
        let g = Grid::unit(1, 128).unwrap();
        for seed in 0..10 {
            let f = bump_train(&g, 24.0, 3, &mut rng_for(seed, 1, 0));
            let sharp = dyadic_sharp(&f).unwrap();
            let dy = hl_maximal(&f, HlVariant::Dyadic, 1.0).unwrap();
            let ce = hl_maximal(&f, HlVariant::Centered, 1.0).unwrap();
            let pe = peetre_maximal(&f, PeetreParams::new(1.0, 16.0).unwrap());
            let fi = f.abs();
            for i in 0..g.len() {
                assert!(sharp.samples()[i].re <= 2.0 * dy.samples()[i].re + 1e-12);
                // a dyadic cube of w cells sits inside the centered cube of side 2w - 1
                assert!(dy.samples()[i].re <= 2.0 * ce.samples()[i].re + 1e-12);
                assert!(pe.samples()[i].re >= fi[i]);
            }
            assert!(sharp.lp_norm(f64::INFINITY) <= 2.0 * f.lp_norm(f64::INFINITY) + 1e-12);
        }
    }
}
