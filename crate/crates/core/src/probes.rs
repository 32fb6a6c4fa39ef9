//! Random band-limited test inputs shared by the audits.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::grid::{Grid, GridFunction};
use crate::littlewood_paley::Bump;

fn cis(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, t)
}

fn random_amplitude(rng: &mut impl Rng) -> Complex64 {
    let mag = rng.gen_range(0.25..1.0);
    mag * cis(2.0 * PI * rng.gen::<f64>())
}

/// Sum of `count` translated bumps with spectrum `ψ(2|ξ|/R)`, hence
/// band-limited to `|ξ| ≤ R`. Centers are uniform on the torus.
pub fn bump_train(grid: &Grid, radius: f64, count: usize, rng: &mut impl Rng) -> GridFunction {
    let centers: Vec<([f64; 2], Complex64)> = (0..count)
        .map(|_| {
            let c = [
                rng.gen::<f64>() * grid.period(),
                if grid.dim() == 2 { rng.gen::<f64>() * grid.period() } else { 0.0 },
            ];
            (c, random_amplitude(rng))
        })
        .collect();
    bumps_at(grid, radius, &centers)
}

/// Bumps with spectrum `ψ(2|ξ|/R)` at the given centers and amplitudes.
pub fn bumps_at(grid: &Grid, radius: f64, centers: &[([f64; 2], Complex64)]) -> GridFunction {
    let bump = Bump::new(1).expect("valid");
    let spec = (0..grid.len())
        .map(|i| {
            let xi = grid.frequency(i);
            let w = bump.cutoff(2.0 * xi[0].hypot(xi[1]) / radius);
            if w == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            centers
                .iter()
                .map(|(c, a)| a * cis(-2.0 * PI * (c[0] * xi[0] + c[1] * xi[1])))
                .sum::<Complex64>()
                * w
        })
        .collect();
    GridFunction::from_spectrum(*grid, spec).expect("finite")
}

/// Random complex coefficients on every lattice frequency with
/// `lo ≤ |ξ| ≤ hi`.
pub fn random_trig(grid: &Grid, lo: f64, hi: f64, rng: &mut impl Rng) -> GridFunction {
    let spec = (0..grid.len())
        .map(|i| {
            let r = grid.frequency_norm(i);
            if r >= lo && r <= hi {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    GridFunction::from_spectrum(*grid, spec).expect("finite")
}

/// Trigonometric polynomial with independent ±1 coefficients on
/// `lo ≤ |ξ| ≤ hi`.
pub fn sign_probe(grid: &Grid, lo: f64, hi: f64, rng: &mut impl Rng) -> GridFunction {
    let spec = (0..grid.len())
        .map(|i| {
            let r = grid.frequency_norm(i);
            if r >= lo && r <= hi {
                Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    GridFunction::from_spectrum(*grid, spec).expect("finite")
}

/// Random real samples with the global mean removed.
pub fn mean_zero_noise(grid: &Grid, rng: &mut impl Rng) -> GridFunction {
    let mut v: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
    GridFunction::from_samples(*grid, v.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
        .expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng_for;

    #[test]
    fn bump_train_is_band_limited() {
        let g = Grid::unit(1, 256).unwrap();
        let f = bump_train(&g, 20.0, 3, &mut rng_for(1, 0, 0));
        for (i, v) in f.spectrum().iter().enumerate() {
            if g.frequency_norm(i) >= 20.0 {
                assert_eq!(*v, Complex64::new(0.0, 0.0));
            }
        }
        assert!(f.lp_norm(2.0) > 0.0);
    }

    #[test]
    fn mean_zero_noise_has_zero_mean() {
        let g = Grid::unit(2, 16).unwrap();
        let f = mean_zero_noise(&g, &mut rng_for(2, 0, 0));
        assert!(f.spectrum()[0].norm() < 1e-14);
    }
}
