//! Inhomogeneous dyadic resolution of unity and the band projections Λ_k.
//!
//! The windows come from a radial cutoff `ψ` with `ψ = 1` on `|ξ| ≤ 1` and
//! `ψ = 0` on `|ξ| ≥ 2`, built from the `exp(-1/t^σ)` smooth step. Then
//! `Φ̂ = ψ`, `φ̂(ξ) = ψ(ξ) - ψ(2ξ)` and `φ̂_k = φ̂(·/2^k)`, so the partial
//! sums telescope: `Φ̂ + Σ_{k≤J} φ̂_k = ψ(·/2^J)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::report::{AuditReport, Table};

/// Smooth monotone step built from `exp(-1/t^σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    smoothness: u32,
}

impl Bump {
    pub fn new(smoothness: u32) -> Result<Self> {
        if smoothness == 0 {
            return Err(Error::InvalidParameter("smoothness must be at least 1".into()));
        }
        Ok(Self { smoothness })
    }

    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    fn flat(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            (-t.powi(-(self.smoothness as i32))).exp()
        }
    }

    /// 0 for `t ≤ 0`, 1 for `t ≥ 1`, smooth and increasing in between.
    pub fn step(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let a = self.flat(t);
        let b = self.flat(1.0 - t);
        a / (a + b)
    }

    /// Radial cutoff ψ(r): 1 on `[0, 1]`, 0 on `[2, ∞)`.
    pub fn cutoff(&self, r: f64) -> f64 {
        self.step(2.0 - r)
    }

    /// Mother window φ̂(r) = ψ(r) - ψ(2r), supported in `[1/2, 2]`.
    pub fn mother(&self, r: f64) -> f64 {
        self.cutoff(r) - self.cutoff(2.0 * r)
    }
}

/// The windows `{Φ̂, φ̂_1, …, φ̂_J}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LPPartition {
    levels: usize,
    bump: Bump,
    active: Vec<bool>,
}

impl LPPartition {
    pub fn new(levels: usize, smoothness: u32) -> Result<Self> {
        if levels < 3 {
            return Err(Error::InvalidParameter(format!(
                "partition needs at least 3 bands, got {levels}"
            )));
        }
        Ok(Self {
            levels,
            bump: Bump::new(smoothness)?,
            active: vec![true; levels + 1],
        })
    }

    /// Smallest partition (at least 3 bands) whose unity region covers the
    /// whole frequency lattice of `grid`.
    pub fn for_grid(grid: &Grid, smoothness: u32) -> Result<Self> {
        let j = grid.max_frequency().log2().ceil().max(3.0) as usize;
        Self::new(j, smoothness)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn bump(&self) -> &Bump {
        &self.bump
    }

    pub fn smoothness(&self) -> u32 {
        self.bump.smoothness
    }

    /// Copy with profile `k` replaced by zero (used to exercise the checks).
    pub fn without_band(mut self, k: usize) -> Self {
        if k <= self.levels {
            self.active[k] = false;
        }
        self
    }

    /// True when `Φ̂ + Σ φ̂_k = 1` holds on every lattice frequency of `grid`.
    pub fn resolves(&self, grid: &Grid) -> bool {
        (1u64 << self.levels) as f64 >= grid.max_frequency()
    }

    pub fn require_resolves(&self, grid: &Grid) -> Result<()> {
        if self.resolves(grid) {
            Ok(())
        } else {
            Err(Error::Resolution(format!(
                "2^J = {} is below the largest lattice frequency {}",
                1u64 << self.levels,
                grid.max_frequency()
            )))
        }
    }

    /// Mother window at radius `r`.
    pub fn mother(&self, r: f64) -> f64 {
        self.bump.mother(r)
    }

    /// Φ̂ at radius `r`.
    pub fn base(&self, r: f64) -> f64 {
        self.bump.cutoff(r)
    }

    /// Window of band `k` at radius `r` (band 0 is Φ̂); zero beyond J.
    pub fn band(&self, k: usize, r: f64) -> f64 {
        if k > self.levels || !self.active[k] {
            return 0.0;
        }
        self.raw_band(k, r)
    }

    fn raw_band(&self, k: usize, r: f64) -> f64 {
        if k == 0 {
            self.bump.cutoff(r)
        } else {
            self.bump.mother(r / (1u64 << k) as f64)
        }
    }

    /// Derived window φ̃_k = φ_{k-1} + φ_k + φ_{k+1} (with φ_0 = Φ); defined
    /// for every k, including past J.
    pub fn tilde(&self, k: usize, r: f64) -> f64 {
        let lo = if k == 0 { 0.0 } else { self.raw_band(k - 1, r) };
        lo + self.raw_band(k, r) + self.raw_band(k + 1, r)
    }

    /// Φ̂ + Σ_{k=1}^{J} φ̂_k at radius `r`.
    pub fn sum(&self, r: f64) -> f64 {
        (0..=self.levels).map(|k| self.band(k, r)).sum()
    }

    /// Closed radial support `[lo, hi]` of band `k`.
    pub fn band_support(&self, k: usize) -> (f64, f64) {
        if k == 0 {
            (0.0, 2.0)
        } else {
            let c = (1u64 << k) as f64;
            (c / 2.0, 2.0 * c)
        }
    }

    /// Sampled profiles as CSV: `r,Phi,phi_1,…,phi_J,sum`.
    pub fn profiles_csv(&self, samples: usize, r_max: f64) -> String {
        let mut cols = vec!["r".to_string(), "Phi".to_string()];
        cols.extend((1..=self.levels).map(|k| format!("phi_{k}")));
        cols.push("sum".into());
        let mut out = cols.join(",");
        out.push('\n');
        for i in 0..samples {
            let r = r_max * i as f64 / (samples.max(2) - 1) as f64;
            let mut row = vec![format!("{r:?}")];
            row.extend((0..=self.levels).map(|k| format!("{:?}", self.band(k, r))));
            row.push(format!("{:?}", self.sum(r)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Sparse per-band window values on the frequency lattice of one grid.
#[derive(Debug, Clone)]
pub struct BandTable {
    grid: Grid,
    partition: LPPartition,
    index: Vec<Vec<u32>>,
    weight: Vec<Vec<f64>>,
}

impl BandTable {
    pub fn new(grid: &Grid, partition: &LPPartition) -> Self {
        let levels = partition.levels;
        let mut index = vec![Vec::new(); levels + 1];
        let mut weight = vec![Vec::new(); levels + 1];
        for i in 0..grid.len() {
            let r = grid.frequency_norm(i);
            let mut push = |k: usize| {
                let w = partition.band(k, r);
                if w != 0.0 {
                    index[k].push(i as u32);
                    weight[k].push(w);
                }
            };
            if r < 2.0 {
                push(0);
            }
            if r > 0.5 {
                let f = r.log2().floor() as i64;
                for k in [f, f + 1] {
                    if k >= 1 && k as usize <= levels {
                        push(k as usize);
                    }
                }
            }
        }
        Self {
            grid: *grid,
            partition: partition.clone(),
            index,
            weight,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn partition(&self) -> &LPPartition {
        &self.partition
    }

    pub fn levels(&self) -> usize {
        self.partition.levels
    }

    /// Lattice indices and window values of band `k`.
    pub fn band(&self, k: usize) -> (&[u32], &[f64]) {
        (&self.index[k], &self.weight[k])
    }

    /// True when `f` has no spectral mass in band `k`.
    pub fn is_silent(&self, spectrum: &[Complex64], k: usize) -> bool {
        self.index[k].iter().all(|&i| spectrum[i as usize] == Complex64::new(0.0, 0.0))
    }

    /// Spectrum of Λ_k f.
    pub fn band_spectrum(&self, spectrum: &[Complex64], k: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); spectrum.len()];
        for (&i, &w) in self.index[k].iter().zip(&self.weight[k]) {
            out[i as usize] = spectrum[i as usize] * w;
        }
        out
    }

    /// Λ_k f.
    pub fn project(&self, f: &GridFunction, k: usize) -> GridFunction {
        GridFunction::from_spectrum(self.grid, self.band_spectrum(f.spectrum(), k))
            .expect("window values are finite")
    }

    /// ‖Λ_k f‖_2 via Plancherel.
    pub fn band_l2(&self, spectrum: &[Complex64], k: usize) -> f64 {
        let s: f64 = self.index[k]
            .iter()
            .zip(&self.weight[k])
            .map(|(&i, &w)| spectrum[i as usize].norm_sqr() * w * w)
            .sum();
        (s / self.grid.volume()).sqrt()
    }
}

/// Λ_k f with range checks against the partition and the grid.
pub fn band_project(f: &GridFunction, partition: &LPPartition, k: usize) -> Result<GridFunction> {
    if k > partition.levels() {
        return Err(Error::BandOutOfRange { band: k, levels: partition.levels() });
    }
    let (lo, _) = partition.band_support(k);
    if lo >= f.grid().max_frequency() {
        return Err(Error::Resolution(format!(
            "band {k} starts at |ξ| = {lo}, beyond the lattice maximum {}",
            f.grid().max_frequency()
        )));
    }
    let g = f.grid();
    let spec = f
        .spectrum()
        .iter()
        .enumerate()
        .map(|(i, v)| v * partition.band(k, g.frequency_norm(i)))
        .collect();
    GridFunction::from_spectrum(*g, spec)
}

/// Samples the partition at `samples` radii in `[0, 2^J]` (unity) and in
/// `[0, 2^{J+2}]` (support leakage of every profile).
pub fn check_partition(partition: &LPPartition, samples: usize) -> Result<AuditReport> {
    if samples < 1000 {
        return Err(Error::InvalidParameter(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    let j = partition.levels();
    let top = (1u64 << j) as f64;
    let mut deviation: f64 = 0.0;
    for i in 0..samples {
        let r = top * i as f64 / (samples - 1) as f64;
        deviation = deviation.max((partition.sum(r) - 1.0).abs());
    }
    let mut table = Table::new(&["band", "leakage"]);
    let mut leakage: f64 = 0.0;
    for k in 0..=j {
        let (lo, hi) = partition.band_support(k);
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            let r = 4.0 * top * i as f64 / (samples - 1) as f64;
            if r < lo || r > hi {
                worst = worst.max(partition.band(k, r).abs());
            }
        }
        table.push(vec![k as f64, worst]);
        leakage = leakage.max(worst);
    }
    let mut report = AuditReport::new(
        "partition",
        "Phi + sum_k phi_k = 1 on |xi| <= 2^J and supp phi_k in [2^(k-1), 2^(k+1)]",
    )
    .param("J", j)
    .param("smoothness", partition.smoothness())
    .param("samples", samples);
    report.table = table;
    report.metric("max_sum_deviation", deviation);
    report.metric("max_support_leakage", leakage);
    report.tolerance = Some(1e-12);
    let pass = deviation < 1e-12 && leakage < 1e-14;
    report.verdict(deviation.max(leakage), 1e-12, pass);
    Ok(report)
}
