use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::littlewood_paley::Bump;
use crate::pseudo::{Symbol, SymbolKind};
use crate::stats::rng_for;

const STREAM_SIGNS: u64 = 0x5167;
const STREAM_ATOMS: u64 = 0xA70;

/// Largest lattice box (points) the 2D shell tables may occupy.
const MAX_SHELL_BOX: u64 = 1 << 24;

/// Scales `ζ_k = c·k` for `k0 ≤ k ≤ L` and shells
/// `𝒩_k = {n ∈ ℤ^d : 2^{ζ_k+2} ≤ |n| < 2^{ζ_k+3}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LacunaryConfig {
    pub dim: usize,
    pub k0: usize,
    /// Top scale index L.
    pub top: usize,
    /// Spacing c in `ζ_k = c·k`.
    pub spacing: usize,
    /// Order of the multiplier.
    pub m: f64,
    pub seed: u64,
}

impl Default for LacunaryConfig {
    fn default() -> Self {
        Self { dim: 1, k0: 3, top: 8, spacing: 2, m: 0.0, seed: 0 }
    }
}

impl LacunaryConfig {
    pub fn with_top(mut self, top: usize) -> Self {
        self.top = top;
        self
    }

    pub fn zeta(&self, k: usize) -> u32 {
        (self.spacing * k) as u32
    }

    pub fn scales(&self) -> std::ops::RangeInclusive<usize> {
        self.k0..=self.top
    }

    pub fn scale_count(&self) -> usize {
        self.top + 1 - self.k0
    }

    /// `(2^{ζ_k+2}, 2^{ζ_k+3})`.
    pub fn shell(&self, k: usize) -> (i64, i64) {
        let z = self.zeta(k);
        (1 << (z + 2), 1 << (z + 3))
    }

    /// Grid size holding every shell below Nyquist.
    pub fn output_n(&self) -> usize {
        1 << (self.zeta(self.top) + 4)
    }

    /// Grid size holding the spectrum of the atom trains, `|ξ| < 2^{ζ_L+5}`.
    pub fn input_n(&self) -> usize {
        1 << (self.zeta(self.top) + 6)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::InvalidParameter(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        if self.spacing == 0 {
            return Err(Error::InvalidParameter("scale spacing must be at least 1".into()));
        }
        if self.k0 > self.top {
            return Err(Error::InvalidParameter(format!("k0 = {} exceeds L = {}", self.k0, self.top)));
        }
        if !self.m.is_finite() {
            return Err(Error::InvalidParameter("order m must be finite".into()));
        }
        let z = self.zeta(self.top) as u64;
        if z + 6 > 30 || (self.dim == 2 && 1u64 << (2 * (z + 4)) > MAX_SHELL_BOX) {
            return Err(Error::Resolution(format!(
                "shell overflow: zeta_L = {z} needs grids beyond the supported size in dimension {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Scale whose shell contains `n`.
    pub fn scale_of(&self, n: [i64; 2]) -> Option<usize> {
        let r2 = n[0] * n[0] + n[1] * n[1];
        self.scales().find(|&k| {
            let (lo, hi) = self.shell(k);
            lo * lo <= r2 && r2 < hi * hi
        })
    }
}

/// Window profile of the multiplier: `φ̂(r) = ψ(2r)`, equal to 1 for
/// `r ≤ 1/2` and 0 for `r ≥ 1`, so `c₀ = φ̂(0) = 1`.
pub fn multiplier_window(r: f64) -> f64 {
    Bump::new(1).expect("smoothness 1").cutoff(2.0 * r)
}

/// `𝒢̂(r) = Σ_{j=1}^{4} φ̂_j(r)`: 1 on `[2, 16]`, 0 outside `(1, 32)`.
pub fn reproducing_window_hat(r: f64) -> f64 {
    let b = Bump::new(1).expect("smoothness 1");
    b.cutoff(r / 16.0) - b.cutoff(r)
}

/// `𝒢` on a unit-period grid.
pub fn reproducing_window(grid: &Grid) -> Result<GridFunction> {
    require_unit(grid)?;
    if grid.max_frequency() < 32.0 {
        return Err(Error::Resolution("the reproducing window needs |xi| up to 32".into()));
    }
    GridFunction::from_spectrum(
        *grid,
        (0..grid.len()).map(|i| Complex64::new(reproducing_window_hat(grid.frequency_norm(i)), 0.0)).collect(),
    )
}

fn require_unit(grid: &Grid) -> Result<()> {
    if grid.period() != 1.0 {
        return Err(Error::InvalidParameter("lacunary constructions live on the unit torus".into()));
    }
    Ok(())
}

/// `M^v(ξ) = Σ_k 2^{ζ_k m} Σ_{n∈𝒩_k} r_n φ̂(ξ − n)` with seeded i.i.d. signs.
#[derive(Clone)]
pub struct RademacherMultiplier {
    cfg: LacunaryConfig,
    draw: u64,
    /// Per scale, a dense box `[−hi, hi)^d` with 0 off the shell.
    signs: Vec<Vec<i8>>,
}

impl std::fmt::Debug for RademacherMultiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RademacherMultiplier").field("cfg", &self.cfg).field("draw", &self.draw).finish()
    }
}

impl RademacherMultiplier {
    pub fn new(cfg: &LacunaryConfig, draw: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_for(cfg.seed, STREAM_SIGNS + cfg.top as u64, draw);
        let signs = cfg
            .scales()
            .map(|k| {
                let (lo, hi) = cfg.shell(k);
                let side = 2 * hi as usize;
                let len = if cfg.dim == 1 { side } else { side * side };
                let mut s = vec![0i8; len];
                for (idx, v) in s.iter_mut().enumerate() {
                    let n0 = (idx % side) as i64 - hi;
                    let n1 = if cfg.dim == 1 { 0 } else { (idx / side) as i64 - hi };
                    let r2 = n0 * n0 + n1 * n1;
                    if lo * lo <= r2 && r2 < hi * hi {
                        *v = if rng.gen::<bool>() { 1 } else { -1 };
                    }
                }
                s
            })
            .collect();
        Ok(Self { cfg: *cfg, draw, signs })
    }

    pub fn config(&self) -> &LacunaryConfig {
        &self.cfg
    }

    /// `r_n`, or 0 when n lies in no shell.
    pub fn sign(&self, n: [i64; 2]) -> i8 {
        let Some(k) = self.cfg.scale_of(n) else { return 0 };
        let (_, hi) = self.cfg.shell(k);
        let side = 2 * hi;
        let idx = (n[0] + hi) + if self.cfg.dim == 1 { 0 } else { (n[1] + hi) * side };
        self.signs[k - self.cfg.k0][idx as usize]
    }

    /// `M^v(n)` at a lattice point: `±2^{ζ_k m}` on the shells, 0 elsewhere.
    pub fn lattice_value(&self, n: [i64; 2]) -> f64 {
        match self.cfg.scale_of(n) {
            Some(k) => (self.cfg.zeta(k) as f64 * self.cfg.m).exp2() * self.sign(n) as f64,
            None => 0.0,
        }
    }

    /// `(n, r_n)` over the shell of scale k.
    pub fn shell_signs(&self, k: usize) -> Vec<([i64; 2], i8)> {
        let (_, hi) = self.cfg.shell(k);
        let side = 2 * hi;
        self.signs[k - self.cfg.k0]
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != 0)
            .map(|(idx, &s)| {
                let idx = idx as i64;
                let n = if self.cfg.dim == 1 { [idx - hi, 0] } else { [idx % side - hi, idx / side - hi] };
                (n, s)
            })
            .collect()
    }

    /// `M^v(D) f` sampled onto `out`, which may be coarser than `f`'s grid
    /// as long as it resolves every shell.
    pub fn transfer(&self, f: &GridFunction, out: &Grid) -> Result<GridFunction> {
        require_unit(f.grid())?;
        require_unit(out)?;
        if out.dim() != self.cfg.dim || out.n() < self.cfg.output_n() || f.grid().n() < self.cfg.output_n() {
            return Err(Error::Resolution(format!(
                "shells need n >= {} in dimension {}",
                self.cfg.output_n(),
                self.cfg.dim
            )));
        }
        let src = f.spectrum();
        let mut spec = vec![Complex64::new(0.0, 0.0); out.len()];
        for k in self.cfg.scales() {
            let w = (self.cfg.zeta(k) as f64 * self.cfg.m).exp2();
            for (n, s) in self.shell_signs(k) {
                spec[out.wave_index(n)] = src[f.grid().wave_index(n)] * (w * s as f64);
            }
        }
        GridFunction::from_spectrum(*out, spec)
    }
}

impl Symbol for RademacherMultiplier {
    fn name(&self) -> String {
        format!("rademacher(L={},seed={},draw={})", self.cfg.top, self.cfg.seed, self.draw)
    }

    fn order(&self) -> f64 {
        self.cfg.m
    }

    fn kind(&self) -> SymbolKind {
        SymbolKind::Multiplier
    }

    fn eval(&self, _x: [f64; 2], xi: [f64; 2]) -> Complex64 {
        let axis = |t: f64| [t.floor() as i64, t.ceil() as i64];
        let a0 = axis(xi[0]);
        let a1 = if self.cfg.dim == 1 { [0, 0] } else { axis(xi[1]) };
        let mut seen: Vec<[i64; 2]> = Vec::with_capacity(4);
        let mut total = 0.0;
        for n0 in a0 {
            for n1 in a1 {
                let n = [n0, n1];
                if seen.contains(&n) {
                    continue;
                }
                seen.push(n);
                let v = self.lattice_value(n);
                if v != 0.0 {
                    let r = ((xi[0] - n0 as f64).powi(2) + (xi[1] - n1 as f64).powi(2)).sqrt();
                    total += v * multiplier_window(r);
                }
            }
        }
        Complex64::new(total, 0.0)
    }
}

/// Amplitudes of the random atom trains and the lacunary test function.
/// Unset sequences follow the defaults `A_k = 2^{−ζ_k d}`,
/// `B_k = 2^{ζ_k d/p}` and `C_k = 2^{−ζ_k d(1−1/p)} j^{−γ}` with
/// `j = k − k0 + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomAtomConfig {
    pub activation: Option<Vec<f64>>,
    pub amplitude: Option<Vec<f64>>,
    pub lacunary: Option<Vec<f64>>,
    /// γ in the default `C_k`.
    pub decay: f64,
    pub seed: u64,
}

impl Default for RandomAtomConfig {
    fn default() -> Self {
        Self { activation: None, amplitude: None, lacunary: None, decay: 0.0, seed: 1 }
    }
}

fn pick(list: &Option<Vec<f64>>, lac: &LacunaryConfig, k: usize, default: f64) -> Result<f64> {
    match list {
        None => Ok(default),
        Some(v) => v.get(k - lac.k0).copied().ok_or_else(|| {
            Error::InvalidParameter(format!("amplitude list has {} entries, scale {k} needs more", v.len()))
        }),
    }
}

impl RandomAtomConfig {
    pub fn a_k(&self, lac: &LacunaryConfig, k: usize) -> Result<f64> {
        let a = pick(&self.activation, lac, k, (-((lac.zeta(k) as usize * lac.dim) as f64)).exp2())?;
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidParameter(format!("activation probability {a} outside [0, 1]")));
        }
        Ok(a)
    }

    pub fn b_k(&self, lac: &LacunaryConfig, k: usize, p: f64) -> Result<f64> {
        pick(&self.amplitude, lac, k, (lac.zeta(k) as f64 * lac.dim as f64 / p).exp2())
    }

    pub fn c_k(&self, lac: &LacunaryConfig, k: usize, p: f64) -> Result<f64> {
        let j = (k + 1 - lac.k0) as f64;
        let d = lac.dim as f64;
        pick(&self.lacunary, lac, k, (-(lac.zeta(k) as f64) * d * (1.0 - 1.0 / p)).exp2() * j.powf(-self.decay))
    }
}

/// Active cubes of one draw: per scale, row-major indices among the
/// `2^{ζ_k d}` cubes of side `2^{−ζ_k}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomDraw {
    pub active: Vec<Vec<usize>>,
}

impl AtomDraw {
    pub fn draw(lac: &LacunaryConfig, atoms: &RandomAtomConfig, index: u64) -> Result<Self> {
        lac.validate()?;
        let mut rng = rng_for(atoms.seed, STREAM_ATOMS + lac.top as u64, index);
        let active = lac
            .scales()
            .map(|k| {
                let a = atoms.a_k(lac, k)?;
                let count = 1usize << (lac.zeta(k) as usize * lac.dim);
                Ok((0..count).filter(|_| rng.gen::<f64>() < a).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self { active })
    }

    /// Number of active cubes at each scale.
    pub fn counts(&self) -> Vec<usize> {
        self.active.iter().map(Vec::len).collect()
    }
}

/// Cube center `c_Q` for row-major index `q` at spacing `2^{−ζ}`.
pub fn cube_center(dim: usize, zeta: u32, q: usize) -> [f64; 2] {
    let side = 1usize << zeta;
    let h = 1.0 / side as f64;
    let c = |o: usize| (o as f64 + 0.5) * h;
    if dim == 1 { [c(q), 0.0] } else { [c(q % side), c(q / side)] }
}

/// Spectral synthesis of `f^{L,w}` and `g^L` on one grid, with the dilated
/// windows `𝒢̂(ξ/2^{ζ_k})` tabulated once.
#[derive(Debug, Clone)]
pub struct AtomSynth {
    grid: Grid,
    lac: LacunaryConfig,
    windows: Vec<(Vec<u32>, Vec<f64>)>,
}

impl AtomSynth {
    pub fn new(lac: &LacunaryConfig, grid: &Grid) -> Result<Self> {
        lac.validate()?;
        require_unit(grid)?;
        if grid.dim() != lac.dim || grid.n() < lac.input_n() {
            return Err(Error::Resolution(format!(
                "atom trains need n >= {} in dimension {}",
                lac.input_n(),
                lac.dim
            )));
        }
        let windows = lac
            .scales()
            .map(|k| {
                let s = (lac.zeta(k) as f64).exp2();
                let mut idx = Vec::new();
                let mut val = Vec::new();
                for i in 0..grid.len() {
                    let v = reproducing_window_hat(grid.frequency_norm(i) / s);
                    if v != 0.0 {
                        idx.push(i as u32);
                        val.push(v);
                    }
                }
                (idx, val)
            })
            .collect();
        Ok(Self { grid: *grid, lac: *lac, windows })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `f^{L,w} = Σ_k B_k Σ_Q θ_Q 𝒢(2^{ζ_k}(x − c_Q))`.
    pub fn atom_train(&self, atoms: &RandomAtomConfig, draw: &AtomDraw, p: f64) -> Result<GridFunction> {
        let lac = &self.lac;
        let d = lac.dim;
        let mut spec = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (slot, k) in lac.scales().enumerate() {
            let active = &draw.active[slot];
            if active.is_empty() {
                continue;
            }
            let z = lac.zeta(k);
            let amp = atoms.b_k(lac, k, p)? * (-((z as usize * d) as f64)).exp2();
            // e^{−2πi c_Q·ξ} = ω^{−Σ(2o_i+1)ξ_i} with ω a primitive 2^{ζ+1}-th root
            let modulus = 1i64 << (z + 1);
            let roots: Vec<Complex64> =
                (0..modulus).map(|j| Complex64::from_polar(amp, -TAU * j as f64 / modulus as f64)).collect();
            let side = 1usize << z;
            let (idx, val) = &self.windows[slot];
            for &q in active {
                let odd = if d == 1 { [2 * q as i64 + 1, 0] } else { [2 * (q % side) as i64 + 1, 2 * (q / side) as i64 + 1] };
                for (&i, &v) in idx.iter().zip(val) {
                    let w = self.grid.wave_vector(i as usize);
                    let e = (odd[0] * w[0] + odd[1] * w[1]).rem_euclid(modulus);
                    spec[i as usize] += roots[e as usize] * v;
                }
            }
        }
        GridFunction::from_spectrum(self.grid, spec)
    }

    /// `g^L = Σ_k C_k 2^{ζ_k d} 𝒢(2^{ζ_k} x)`.
    pub fn lacunary(&self, atoms: &RandomAtomConfig, p: f64) -> Result<GridFunction> {
        let mut spec = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (slot, k) in self.lac.scales().enumerate() {
            let c = atoms.c_k(&self.lac, k, p)?;
            let (idx, val) = &self.windows[slot];
            for (&i, &v) in idx.iter().zip(val) {
                spec[i as usize] += c * v;
            }
        }
        GridFunction::from_spectrum(self.grid, spec)
    }
}

/// One draw of `f^{L,w}` on `grid`.
pub fn random_atom_train(
    lac: &LacunaryConfig,
    atoms: &RandomAtomConfig,
    p: f64,
    draw: u64,
    grid: &Grid,
) -> Result<GridFunction> {
    let w = AtomDraw::draw(lac, atoms, draw)?;
    AtomSynth::new(lac, grid)?.atom_train(atoms, &w, p)
}

pub fn lacunary_test_function(lac: &LacunaryConfig, atoms: &RandomAtomConfig, p: f64, grid: &Grid) -> Result<GridFunction> {
    AtomSynth::new(lac, grid)?.lacunary(atoms, p)
}

/// `Σ_k B_k 2^{ζ_k(m−d)} Σ_Q θ_Q φ(x − c_Q) Σ_{n∈𝒩_k} r_n e^{2πi⟨x−c_Q, n⟩}`
/// by direct summation, with `φ` periodized to its lattice mean `c₀ = 1`.
/// Matches `M^v(D) f^{L,w}` exactly when no other scale's window reaches a
/// shell, which holds for spacing `c ≥ 3`.
pub fn image_formula(
    v: &RademacherMultiplier,
    atoms: &RandomAtomConfig,
    draw: &AtomDraw,
    p: f64,
    grid: &Grid,
) -> Result<GridFunction> {
    let lac = *v.config();
    require_unit(grid)?;
    let d = lac.dim;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (slot, k) in lac.scales().enumerate() {
        let z = lac.zeta(k);
        let amp = atoms.b_k(&lac, k, p)? * (z as f64 * (lac.m - d as f64)).exp2();
        let shell = v.shell_signs(k);
        for &q in &draw.active[slot] {
            let c = cube_center(d, z, q);
            for (i, o) in out.iter_mut().enumerate() {
                let x = grid.point(i);
                let s: Complex64 = shell
                    .iter()
                    .map(|(n, r)| {
                        let t = (x[0] - c[0]) * n[0] as f64 + (x[1] - c[1]) * n[1] as f64;
                        Complex64::from_polar(*r as f64, TAU * t)
                    })
                    .sum();
                *o += s * amp;
            }
        }
    }
    GridFunction::from_samples(*grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudo::apply;

    fn small(spacing: usize) -> LacunaryConfig {
        LacunaryConfig { dim: 1, k0: 1, top: 2, spacing, m: -0.25, seed: 5 }
    }

    #[test]
    fn window_values() {
        assert_eq!(reproducing_window_hat(3.0), 1.0);
        assert_eq!(reproducing_window_hat(0.5), 0.0);
        assert_eq!(reproducing_window_hat(40.0), 0.0);
        assert_eq!(multiplier_window(0.0), 1.0);
        assert_eq!(multiplier_window(1.0), 0.0);
    }

    #[test]
    fn reproducing_identity_on_shells() {
        let lac = LacunaryConfig { dim: 1, k0: 0, top: 3, spacing: 2, m: 0.0, seed: 0 };
        let mut worst: f64 = 0.0;
        for k in lac.scales() {
            let (lo, hi) = lac.shell(k);
            let s = (lac.zeta(k) as f64).exp2();
            for n in lo..hi {
                for j in -8..=8 {
                    let xi = n as f64 + j as f64 / 8.0;
                    let ph = multiplier_window((xi - n as f64).abs());
                    worst = worst.max((reproducing_window_hat(xi / s) * ph - ph).abs());
                }
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn multiplier_on_lattice_is_signed_power() {
        let lac = LacunaryConfig { dim: 1, k0: 1, top: 3, spacing: 1, m: -0.5, seed: 9 };
        let v = RademacherMultiplier::new(&lac, 0).unwrap();
        let n = 17; // shell k = 2: [16, 32)
        let val = v.eval([0.0; 2], [n as f64, 0.0]).re;
        assert!((val.abs() - 0.5).abs() < 1e-15);
        assert_eq!(v.eval([0.0; 2], [100.0, 0.0]).re, 0.0);
        assert_eq!(v.eval([0.0; 2], [3.0, 0.0]).re, 0.0);
        let w = RademacherMultiplier::new(&lac, 0).unwrap();
        assert_eq!(v.shell_signs(3), w.shell_signs(3));
        let other = RademacherMultiplier::new(&lac, 1).unwrap();
        assert_ne!(v.shell_signs(3), other.shell_signs(3));
    }

    #[test]
    fn single_atom_has_scaled_norm() {
        let lac = LacunaryConfig { dim: 1, k0: 1, top: 1, spacing: 2, m: 0.0, seed: 0 };
        let atoms = RandomAtomConfig::default();
        let grid = Grid::unit(1, lac.input_n()).unwrap();
        let draw = AtomDraw { active: vec![vec![1]] };
        let p = 1.5;
        let f = AtomSynth::new(&lac, &grid).unwrap().atom_train(&atoms, &draw, p).unwrap();
        // 𝒢 with period 2^ζ = 4 on the same number of points: the samples
        // coincide with the atom's under y = 2^ζ x
        let wide = Grid::new(1, grid.n(), 4.0).unwrap();
        let g = GridFunction::from_spectrum(
            wide,
            (0..wide.len()).map(|i| Complex64::new(reproducing_window_hat(wide.frequency_norm(i)), 0.0)).collect(),
        )
        .unwrap();
        let g_norm = g.lp_norm(p);
        let expected = atoms.b_k(&lac, 1, p).unwrap() * (-2.0 / p).exp2() * g_norm;
        assert!((f.lp_norm(p) / expected - 1.0).abs() < 1e-10, "{} vs {expected}", f.lp_norm(p));
        let none = AtomDraw { active: vec![vec![]] };
        let z = AtomSynth::new(&lac, &grid).unwrap().atom_train(&atoms, &none, p).unwrap();
        assert_eq!(z.lp_norm(2.0), 0.0);
    }

    #[test]
    fn image_formula_matches_operator() {
        for dim in [1, 2] {
            let top = if dim == 1 { 1 } else { 0 };
            let lac = LacunaryConfig { dim, k0: 0, top, spacing: 3, m: -0.25, seed: 5 };
            let atoms = RandomAtomConfig { activation: Some(vec![1.0, 0.3]), ..Default::default() };
            // a single scale in 2D keeps the direct sum small
            let grid = Grid::unit(dim, lac.input_n()).unwrap();
            let draw = AtomDraw::draw(&lac, &atoms, 2).unwrap();
            assert!(draw.counts().iter().sum::<usize>() > 0);
            let f = AtomSynth::new(&lac, &grid).unwrap().atom_train(&atoms, &draw, 2.0).unwrap();
            let v = RademacherMultiplier::new(&lac, 0).unwrap();
            let via_apply = apply(&v, &f).unwrap();
            let small = Grid::unit(dim, lac.output_n()).unwrap();
            let direct = image_formula(&v, &atoms, &draw, 2.0, &small).unwrap();
            let moved = v.transfer(&f, &small).unwrap();
            let scale = direct.lp_norm(f64::INFINITY);
            let gap = moved.sub(&direct).unwrap().lp_norm(f64::INFINITY) / scale;
            assert!(gap < 1e-8, "dim {dim}: {gap}");
            // apply on the fine grid agrees with the shell transfer sampled on the coarse one
            let fine_moved = v.transfer(&f, &grid).unwrap();
            let gap = via_apply.sub(&fine_moved).unwrap().lp_norm(f64::INFINITY) / scale;
            assert!(gap < 1e-10, "dim {dim}: {gap}");
        }
    }

    #[test]
    fn output_spectrum_stays_on_shells() {
        let lac = small(2);
        let atoms = RandomAtomConfig::default();
        let grid = Grid::unit(1, lac.input_n()).unwrap();
        let f = random_atom_train(&lac, &atoms, 2.0, 3, &grid).unwrap();
        let v = RademacherMultiplier::new(&lac, 3).unwrap();
        let g = apply(&v, &f).unwrap();
        let (mut on, mut off) = (0.0, 0.0);
        for (i, c) in g.spectrum().iter().enumerate() {
            if lac.scale_of(grid.wave_vector(i)).is_some() {
                on += c.norm_sqr();
            } else {
                off += c.norm_sqr();
            }
        }
        assert!(on > 0.0 && off.sqrt() < 1e-10 * on.sqrt());
    }

    #[test]
    fn validation_errors() {
        assert!(LacunaryConfig { spacing: 0, ..Default::default() }.validate().is_err());
        assert!(LacunaryConfig { top: 20, ..Default::default() }.validate().is_err());
        assert!(LacunaryConfig { dim: 2, top: 8, ..Default::default() }.validate().is_err());
        let lac = small(1);
        let grid = Grid::unit(1, 16).unwrap();
        assert!(AtomSynth::new(&lac, &grid).is_err());
    }

    #[test]
    fn determinism() {
        let lac = small(2);
        let atoms = RandomAtomConfig::default();
        let grid = Grid::unit(1, lac.input_n()).unwrap();
        let a = random_atom_train(&lac, &atoms, 2.0, 7, &grid).unwrap();
        let b = random_atom_train(&lac, &atoms, 2.0, 7, &grid).unwrap();
        assert_eq!(a.spectrum(), b.spectrum());
    }
}
