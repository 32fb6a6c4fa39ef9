//! Uniform periodic grids and exact spectral calculus on them.
//!
//! Normalization: with `h = period / n` and `L = period`,
//!
//! * spectrum(ξ) = h^d · Σ_x f(x) e^{-2πi x·ξ}   (matches ∫_T f(x) e^{-2πi x·ξ} dx)
//! * f(x)        = L^{-d} · Σ_ξ spectrum(ξ) e^{2πi x·ξ}
//!
//! so that Parseval reads `h^d Σ|f|² = L^{-d} Σ|spectrum|²`. Frequencies are
//! `k / L` with `k ∈ {-n/2, …, n/2-1}` per axis, stored in FFT order.

use std::cell::RefCell;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform periodic grid on the torus `[0, period)^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    period: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, period: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n must be a power of two >= 8, got {n}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        Ok(Self { dim, n, period })
    }

    /// Grid on the unit torus.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, n, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn log2_n(&self) -> u32 {
        self.n.trailing_zeros()
    }

    /// Total number of samples `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    /// Largest |ξ| along one axis (the Nyquist frequency).
    pub fn nyquist(&self) -> f64 {
        (self.n / 2) as f64 / self.period
    }

    /// Largest Euclidean |ξ| on the frequency lattice.
    pub fn max_frequency(&self) -> f64 {
        self.nyquist() * (self.dim as f64).sqrt()
    }

    /// Signed wave number of an FFT-order axis index.
    pub fn wave_number(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// FFT-order axis index of a signed wave number (taken modulo n).
    pub fn axis_index(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Split a flat row-major index into per-axis indices.
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn flatten(&self, ix: [usize; 2]) -> usize {
        if self.dim == 1 {
            ix[0]
        } else {
            ix[0] * self.n + ix[1]
        }
    }

    /// Integer wave vector at a flat spectral index (second entry 0 in 1D).
    pub fn wave_vector(&self, idx: usize) -> [i64; 2] {
        let [a, b] = self.unflatten(idx);
        if self.dim == 1 {
            [self.wave_number(a), 0]
        } else {
            [self.wave_number(a), self.wave_number(b)]
        }
    }

    /// Flat spectral index of an integer wave vector (modulo n per axis).
    pub fn wave_index(&self, k: [i64; 2]) -> usize {
        self.flatten([self.axis_index(k[0]), self.axis_index(k[1])])
    }

    /// Physical frequency ξ at a flat spectral index.
    pub fn frequency(&self, idx: usize) -> [f64; 2] {
        let k = self.wave_vector(idx);
        [k[0] as f64 / self.period, k[1] as f64 / self.period]
    }

    pub fn frequency_norm(&self, idx: usize) -> f64 {
        let [a, b] = self.frequency(idx);
        a.hypot(b)
    }

    /// Sample position x at a flat index.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.unflatten(idx);
        let h = self.spacing();
        if self.dim == 1 {
            [a as f64 * h, 0.0]
        } else {
            [a as f64 * h, b as f64 * h]
        }
    }

    pub fn same_as(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized in-place DFT over a `dim`-dimensional cube of side `n`
/// (row-major). `inverse` selects the sign `+2πi`.
pub(crate) fn dft_inplace(dim: usize, n: usize, data: &mut [Complex64], inverse: bool) {
    let fft = plan(n, inverse);
    if dim == 1 {
        fft.process(data);
        return;
    }
    fft.process(data);
    let mut col = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            col[j * n + i] = data[i * n + j];
        }
    }
    fft.process(&mut col);
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = col[j * n + i];
        }
    }
}

/// Samples → spectrum under the documented normalization.
pub fn forward(grid: &Grid, samples: &[Complex64]) -> Vec<Complex64> {
    let mut buf = samples.to_vec();
    dft_inplace(grid.dim, grid.n, &mut buf, false);
    let w = grid.cell_volume();
    buf.iter_mut().for_each(|v| *v *= w);
    buf
}

/// Spectrum → samples under the documented normalization.
pub fn inverse(grid: &Grid, spectrum: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spectrum.to_vec();
    dft_inplace(grid.dim, grid.n, &mut buf, true);
    let w = 1.0 / grid.volume();
    buf.iter_mut().for_each(|v| *v *= w);
    buf
}

fn check_finite(values: &[Complex64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Complex samples on a grid together with their spectrum. Either side may
/// be supplied; the other is computed on first use and cached.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Grid,
    samples: OnceLock<Vec<Complex64>>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl GridFunction {
    pub fn from_samples(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        check_finite(&samples, "samples")?;
        Ok(Self {
            grid,
            samples: OnceLock::from(samples),
            spectrum: OnceLock::new(),
        })
    }

    pub fn from_spectrum(grid: Grid, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                spectrum.len()
            )));
        }
        check_finite(&spectrum, "spectrum")?;
        Ok(Self {
            grid,
            samples: OnceLock::new(),
            spectrum: OnceLock::from(spectrum),
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> Complex64) -> Result<Self> {
        let samples = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::from_samples(grid, samples)
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            samples: OnceLock::from(vec![Complex64::new(0.0, 0.0); grid.len()]),
            spectrum: OnceLock::from(vec![Complex64::new(0.0, 0.0); grid.len()]),
        }
    }

    pub fn constant(grid: Grid, c: Complex64) -> Self {
        let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
        spec[0] = c * grid.volume();
        Self {
            grid,
            samples: OnceLock::from(vec![c; grid.len()]),
            spectrum: OnceLock::from(spec),
        }
    }

    /// `e^{2πi k·x / L}` for an integer wave vector `k`.
    pub fn exponential(grid: Grid, k: [i64; 2]) -> Self {
        let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
        spec[grid.wave_index(k)] = Complex64::new(grid.volume(), 0.0);
        Self::from_spectrum(grid, spec).expect("finite by construction")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        self.samples.get_or_init(|| {
            inverse(&self.grid, self.spectrum.get().expect("one side is always present"))
        })
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            forward(&self.grid, self.samples.get().expect("one side is always present"))
        })
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples();
        self.samples.into_inner().expect("initialized above")
    }

    pub fn into_spectrum(self) -> Vec<Complex64> {
        self.spectrum();
        self.spectrum.into_inner().expect("initialized above")
    }

    /// Same function with the spectrum computed and cached.
    pub fn forward_transform(&self) -> GridFunction {
        self.spectrum();
        self.clone()
    }

    /// Pointwise moduli of the samples.
    pub fn abs(&self) -> Vec<f64> {
        self.samples().iter().map(|v| v.norm()).collect()
    }

    /// Real parts of the samples.
    pub fn real(&self) -> Vec<f64> {
        self.samples().iter().map(|v| v.re).collect()
    }

    /// Multiply the spectrum pointwise by `m(ξ)`.
    pub fn map_spectrum(&self, m: impl Fn([f64; 2]) -> Complex64) -> GridFunction {
        let g = &self.grid;
        let spec = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if *v == Complex64::new(0.0, 0.0) {
                    *v
                } else {
                    v * m(g.frequency(i))
                }
            })
            .collect();
        Self::from_spectrum(self.grid, spec).expect("multiplier produced a non-finite value")
    }

    /// Periodic convolution: the spectrum of the result is the product of spectra.
    pub fn convolve(&self, other: &GridFunction) -> Result<GridFunction> {
        self.grid.same_as(&other.grid)?;
        let spec = self
            .spectrum()
            .iter()
            .zip(other.spectrum())
            .map(|(a, b)| a * b)
            .collect();
        Self::from_spectrum(self.grid, spec)
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        let samples = self.samples().iter().map(|v| v * c).collect();
        Self::from_samples(self.grid, samples).expect("scaled samples are finite")
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.grid.same_as(&other.grid)?;
        let samples = self.samples().iter().zip(other.samples()).map(|(a, b)| a + b).collect();
        Self::from_samples(self.grid, samples)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.grid.same_as(&other.grid)?;
        let samples = self.samples().iter().zip(other.samples()).map(|(a, b)| a - b).collect();
        Self::from_samples(self.grid, samples)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.grid.same_as(&other.grid)?;
        let samples = self.samples().iter().zip(other.samples()).map(|(a, b)| a * b).collect();
        Self::from_samples(self.grid, samples)
    }

    /// `f(· - a)` for a lattice shift `a` given in cells per axis.
    pub fn translate(&self, shift: [i64; 2]) -> GridFunction {
        let g = self.grid;
        let n = g.n as i64;
        let src = self.samples();
        let samples = (0..g.len())
            .map(|i| {
                let [a, b] = g.unflatten(i);
                let sa = (a as i64 - shift[0]).rem_euclid(n) as usize;
                let sb = if g.dim == 1 { 0 } else { (b as i64 - shift[1]).rem_euclid(n) as usize };
                src[g.flatten([sa, sb])]
            })
            .collect();
        Self::from_samples(g, samples).expect("translated samples are finite")
    }

    /// Riemann-sum L^p norm over the torus; `p = ∞` gives the max modulus.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.abs(), self.grid.cell_volume(), p)
    }

    /// L² norm computed on the spectral side.
    pub fn l2_norm_spectral(&self) -> f64 {
        let s: f64 = self.spectrum().iter().map(|v| v.norm_sqr()).sum();
        (s / self.grid.volume()).sqrt()
    }

    /// Band-limited interpolation onto a grid `factor` times finer
    /// (spectral zero padding).
    pub fn refine(&self, factor: usize) -> Result<GridFunction> {
        if factor == 0 || !factor.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "refinement factor must be a power of two, got {factor}"
            )));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let fine = Grid::new(self.grid.dim, self.grid.n * factor, self.grid.period)?;
        let mut spec = vec![Complex64::new(0.0, 0.0); fine.len()];
        for (i, v) in self.spectrum().iter().enumerate() {
            spec[fine.wave_index(self.grid.wave_vector(i))] = *v;
        }
        Self::from_spectrum(fine, spec)
    }

    /// Write the textual dump described in the crate README.
    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "# lpkit-gridfunction v1").unwrap();
        writeln!(out, "dim {}", self.grid.dim).unwrap();
        writeln!(out, "n {}", self.grid.n).unwrap();
        writeln!(out, "period {:?}", self.grid.period).unwrap();
        writeln!(out, "layout row-major").unwrap();
        for v in self.samples() {
            writeln!(out, "{:?} {:?}", v.re, v.im).unwrap();
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<GridFunction> {
        let mut dim = None;
        let mut n = None;
        let mut period = None;
        let mut samples = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let err = |msg: &str| Error::Parse(format!("line {}: {msg}", lineno + 1));
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap();
            match head {
                "dim" | "n" | "period" | "layout" => {
                    let val = parts.next().ok_or_else(|| err("missing header value"))?;
                    match head {
                        "dim" => dim = Some(val.parse::<usize>().map_err(|_| err("bad dim"))?),
                        "n" => n = Some(val.parse::<usize>().map_err(|_| err("bad n"))?),
                        "period" => {
                            period = Some(val.parse::<f64>().map_err(|_| err("bad period"))?)
                        }
                        _ => {
                            if val != "row-major" {
                                return Err(err("only row-major layout is supported"));
                            }
                        }
                    }
                }
                _ => {
                    let re = head.parse::<f64>().map_err(|_| err("bad real part"))?;
                    let im = match parts.next() {
                        Some(s) => s.parse::<f64>().map_err(|_| err("bad imaginary part"))?,
                        None => 0.0,
                    };
                    samples.push(Complex64::new(re, im));
                }
            }
        }
        let grid = Grid::new(
            dim.ok_or_else(|| Error::Parse("missing dim header".into()))?,
            n.ok_or_else(|| Error::Parse("missing n header".into()))?,
            period.unwrap_or(1.0),
        )?;
        Self::from_samples(grid, samples)
    }
}

/// Riemann-sum L^p (quasi-)norm of nonnegative values with weight `w` per
/// sample; `p = ∞` gives the maximum.
pub fn lp_norm(values: &[f64], w: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(*v));
    }
    if p == 2.0 {
        return (values.iter().map(|v| v * v).sum::<f64>() * w).sqrt();
    }
    if p == 1.0 {
        return values.iter().sum::<f64>() * w;
    }
    (values.iter().map(|v| v.powf(p)).sum::<f64>() * w).powf(1.0 / p)
}
