//! Symbols `a(x, ξ)`, the operators `T_[a] f(x) = Σ_ξ a(x, ξ) f̂(ξ) e^{2πi⟨x,ξ⟩}`
//! on the torus, symbol seminorms, the paradifferential split and the audits
//! of the band estimates.

mod audit;
mod builtin;
mod kernel;
mod paradiff;
mod region;
mod seminorm;

pub use audit::*;
pub use builtin::*;
pub use kernel::*;
pub use paradiff::*;
pub use region::*;
pub use seminorm::*;

use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward, Grid, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolKind {
    ClosedForm,
    GridSampled,
    /// Independent of x.
    Multiplier,
}

/// A symbol `a(x, ξ)` with frequencies in cycles per unit length.
///
/// Implementations must be reentrant: audits evaluate them from many threads.
pub trait Symbol: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// Declared order m.
    fn order(&self) -> f64;

    fn kind(&self) -> SymbolKind;

    fn eval(&self, x: [f64; 2], xi: [f64; 2]) -> Complex64;

    /// Value at sample `x_idx` and lattice frequency `xi_idx` of `grid`.
    fn on_lattice(&self, grid: &Grid, x_idx: usize, xi_idx: usize) -> Complex64 {
        self.eval(grid.point(x_idx), grid.frequency(xi_idx))
    }

    /// The grid a sampled symbol is tied to.
    fn lattice(&self) -> Option<&Grid> {
        None
    }
}

/// Symbol tabulated on (x-grid) × (frequency lattice) of one grid, stored by
/// frequency column; absent columns are zero.
#[derive(Clone)]
pub struct LatticeSymbol {
    name: String,
    order: f64,
    grid: Grid,
    columns: Vec<Option<Vec<Complex64>>>,
}

impl fmt::Debug for LatticeSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeSymbol")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("grid", &self.grid)
            .field("columns", &self.columns.iter().filter(|c| c.is_some()).count())
            .finish()
    }
}

impl LatticeSymbol {
    pub fn zeros(name: impl Into<String>, order: f64, grid: Grid) -> Self {
        Self { name: name.into(), order, grid, columns: vec![None; grid.len()] }
    }

    /// Tabulate every column of `a` on `grid`.
    pub fn sample(a: &dyn Symbol, grid: &Grid) -> Result<Self> {
        if let Some(g) = a.lattice() {
            g.same_as(grid)?;
        }
        let columns = (0..grid.len())
            .into_par_iter()
            .map(|j| Some((0..grid.len()).map(|i| a.on_lattice(grid, i, j)).collect()))
            .collect();
        Ok(Self { name: a.name(), order: a.order(), grid: *grid, columns })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn column(&self, xi_idx: usize) -> Option<&[Complex64]> {
        self.columns[xi_idx].as_deref()
    }

    pub fn set_column(&mut self, xi_idx: usize, values: Vec<Complex64>) -> Result<()> {
        if values.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!("column of length {}", values.len())));
        }
        self.columns[xi_idx] = Some(values);
        Ok(())
    }

    /// Frequency indices with a stored column.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.columns.iter().enumerate().filter(|(_, c)| c.is_some()).map(|(j, _)| j)
    }

    pub fn get(&self, x_idx: usize, xi_idx: usize) -> Complex64 {
        self.columns[xi_idx].as_ref().map_or(Complex64::new(0.0, 0.0), |c| c[x_idx])
    }

    /// `max |self − other|` over the lattice.
    pub fn max_abs_diff(&self, other: &LatticeSymbol) -> Result<f64> {
        self.grid.same_as(&other.grid)?;
        let mut worst: f64 = 0.0;
        for j in 0..self.grid.len() {
            match (self.column(j), other.column(j)) {
                (None, None) => {}
                (Some(a), None) | (None, Some(a)) => worst = worst.max(a.iter().map(|v| v.norm()).fold(0.0, f64::max)),
                (Some(a), Some(b)) => {
                    worst = worst.max(a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max))
                }
            }
        }
        Ok(worst)
    }

    /// Entrywise sum over a family on the same grid.
    pub fn sum<'a>(name: &str, order: f64, parts: impl IntoIterator<Item = &'a LatticeSymbol>) -> Result<Self> {
        let mut out: Option<LatticeSymbol> = None;
        for p in parts {
            let acc = out.get_or_insert_with(|| LatticeSymbol::zeros(name, order, p.grid));
            acc.grid.same_as(&p.grid)?;
            for (j, col) in p.columns.iter().enumerate() {
                if let Some(c) = col {
                    match &mut acc.columns[j] {
                        Some(a) => a.iter_mut().zip(c).for_each(|(u, v)| *u += v),
                        slot @ None => *slot = Some(c.clone()),
                    }
                }
            }
        }
        out.ok_or_else(|| Error::InvalidParameter("empty symbol sum".into()))
    }

    /// CSV rows `x_index,xi_index,re,im` (flat indices, frequency index in
    /// FFT order) after a `# dim=D n=N period=L order=m` preamble.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut s = format!(
            "# dim={} n={} period={} order={}\nx_index,xi_index,re,im\n",
            g.dim(),
            g.n(),
            g.period(),
            self.order
        );
        for (j, col) in self.columns.iter().enumerate() {
            if let Some(c) = col {
                for (i, v) in c.iter().enumerate() {
                    if *v != Complex64::new(0.0, 0.0) {
                        let _ = writeln!(s, "{i},{j},{:e},{:e}", v.re, v.im);
                    }
                }
            }
        }
        s
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse(format!("line {}: {msg}", line + 1));
        let mut lines = text.lines().enumerate();
        let (_, pre) = lines.next().ok_or_else(|| err(0, "empty input".into()))?;
        let (mut dim, mut n, mut period, mut order) = (None, None, 1.0, 0.0);
        for tok in pre.trim_start_matches('#').split_whitespace() {
            match tok.split_once('=') {
                Some(("dim", v)) => dim = v.parse::<usize>().ok(),
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("period", v)) => period = v.parse().map_err(|_| err(0, format!("bad period `{v}`")))?,
                Some(("order", v)) => order = v.parse().map_err(|_| err(0, format!("bad order `{v}`")))?,
                _ => {}
            }
        }
        let (dim, n) = match (dim, n) {
            (Some(d), Some(n)) => (d, n),
            _ => return Err(err(0, "expected `# dim=D n=N [period=L] [order=m]`".into())),
        };
        let grid = Grid::new(dim, n, period)?;
        let mut out = LatticeSymbol::zeros(name, order, grid);
        match lines.next() {
            Some((_, h)) if h.trim() == "x_index,xi_index,re,im" => {}
            Some((l, _)) => return Err(err(l, "expected header `x_index,xi_index,re,im`".into())),
            None => return Err(err(1, "missing header".into())),
        }
        for (l, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(err(l, format!("expected 4 columns, got {}", cols.len())));
            }
            let i: usize = cols[0].parse().map_err(|_| err(l, format!("bad x_index `{}`", cols[0])))?;
            let j: usize = cols[1].parse().map_err(|_| err(l, format!("bad xi_index `{}`", cols[1])))?;
            let re: f64 = cols[2].parse().map_err(|_| err(l, format!("bad value `{}`", cols[2])))?;
            let im: f64 = cols[3].parse().map_err(|_| err(l, format!("bad value `{}`", cols[3])))?;
            if i >= grid.len() || j >= grid.len() {
                return Err(err(l, format!("index ({i}, {j}) outside a lattice of {} points", grid.len())));
            }
            if !(re.is_finite() && im.is_finite()) {
                return Err(err(l, "non-finite value".into()));
            }
            out.columns[j].get_or_insert_with(|| vec![Complex64::new(0.0, 0.0); grid.len()])[i] =
                Complex64::new(re, im);
        }
        Ok(out)
    }

    fn nearest(&self, x: [f64; 2], xi: [f64; 2]) -> (usize, usize) {
        let g = &self.grid;
        let n = g.n() as i64;
        let xs = |t: f64| ((t / g.spacing()).round() as i64).rem_euclid(n) as usize;
        let ks = |t: f64| (t * g.period()).round() as i64;
        let (ix, ik) = if g.dim() == 1 {
            (xs(x[0]), [ks(xi[0]), 0])
        } else {
            (g.flatten([xs(x[0]), xs(x[1])]), [ks(xi[0]), ks(xi[1])])
        };
        (ix, g.wave_index(ik))
    }
}

impl Symbol for LatticeSymbol {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn order(&self) -> f64 {
        self.order
    }

    fn kind(&self) -> SymbolKind {
        SymbolKind::GridSampled
    }

    /// Nearest-sample lookup; frequencies outside the lattice range wrap.
    fn eval(&self, x: [f64; 2], xi: [f64; 2]) -> Complex64 {
        let (i, j) = self.nearest(x, xi);
        self.get(i, j)
    }

    fn on_lattice(&self, grid: &Grid, x_idx: usize, xi_idx: usize) -> Complex64 {
        debug_assert!(grid.same_as(&self.grid).is_ok());
        self.get(x_idx, xi_idx)
    }

    fn lattice(&self) -> Option<&Grid> {
        Some(&self.grid)
    }
}

/// Energy fraction of `a(·, ξ)` at x-frequencies beyond a quarter of the
/// lattice range, maximized over up to 8 of the given frequency columns.
pub fn x_tail_fraction(a: &dyn Symbol, grid: &Grid, columns: &[usize]) -> f64 {
    if columns.is_empty() {
        return 0.0;
    }
    let step = (columns.len() / 8).max(1);
    let cut = grid.n() as i64 / 4;
    columns
        .iter()
        .step_by(step)
        .map(|&j| {
            let col: Vec<Complex64> = (0..grid.len()).map(|i| a.on_lattice(grid, i, j)).collect();
            let spec = forward(grid, &col);
            let (mut total, mut tail) = (0.0, 0.0);
            for (i, v) in spec.iter().enumerate() {
                let e = v.norm_sqr();
                total += e;
                if grid.wave_vector(i).iter().any(|w| w.abs() >= cut) {
                    tail += e;
                }
            }
            if total == 0.0 { 0.0 } else { tail / total }
        })
        .fold(0.0, f64::max)
}

/// Largest tolerated [`x_tail_fraction`] in [`apply`].
pub const X_TAIL_TOLERANCE: f64 = 1e-20;

/// `T_[a] f` on the grid of `f`, with a resolution check on the x-oscillation
/// of closed-form symbols.
pub fn apply(a: &dyn Symbol, f: &GridFunction) -> Result<GridFunction> {
    let grid = *f.grid();
    if a.kind() == SymbolKind::ClosedForm {
        let active: Vec<usize> = nonzero_modes(f);
        let tail = x_tail_fraction(a, &grid, &active);
        if tail > X_TAIL_TOLERANCE {
            return Err(Error::UnderResolved(format!(
                "symbol `{}` keeps a fraction {tail:.2e} of its x-energy beyond n/4 (n = {})",
                a.name(),
                grid.n()
            )));
        }
    }
    apply_unchecked(a, f)
}

fn nonzero_modes(f: &GridFunction) -> Vec<usize> {
    f.spectrum()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
        .map(|(i, _)| i)
        .collect()
}

/// `T_[a] f` without the resolution check. Multipliers act on the spectrum;
/// other symbols use the direct sum over the nonzero modes of `f`.
pub fn apply_unchecked(a: &dyn Symbol, f: &GridFunction) -> Result<GridFunction> {
    let grid = *f.grid();
    if let Some(g) = a.lattice() {
        g.same_as(&grid)?;
    }
    if a.kind() == SymbolKind::Multiplier {
        let spec: Vec<Complex64> = f
            .spectrum()
            .iter()
            .enumerate()
            .map(|(j, v)| if *v == Complex64::new(0.0, 0.0) { *v } else { v * a.on_lattice(&grid, 0, j) })
            .collect();
        return GridFunction::from_spectrum(grid, spec);
    }
    let spec = f.spectrum();
    let modes: Vec<(usize, [i64; 2], Complex64)> =
        nonzero_modes(f).into_iter().map(|j| (j, grid.wave_vector(j), spec[j])).collect();
    let n = grid.n();
    let roots: Vec<Complex64> = (0..n).map(|r| Complex64::from_polar(1.0, 2.0 * PI * r as f64 / n as f64)).collect();
    let scale = grid.volume().recip();
    let out: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let ix = grid.unflatten(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, w, c) in &modes {
                let a_val = a.on_lattice(&grid, i, *j);
                if a_val == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let phase = (ix[0] as i64 * w[0] + ix[1] as i64 * w[1]).rem_euclid(n as i64) as usize;
                acc += a_val * c * roots[phase];
            }
            acc * scale
        })
        .collect();
    GridFunction::from_samples(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::random_trig;
    use crate::stats::rng_for;

    fn direct(a: &dyn Symbol, f: &GridFunction) -> Vec<Complex64> {
        let g = f.grid();
        let spec = f.spectrum();
        (0..g.len())
            .map(|i| {
                let x = g.point(i);
                (0..g.len())
                    .map(|j| {
                        let xi = g.frequency(j);
                        a.eval(x, xi) * spec[j] * Complex64::from_polar(1.0, 2.0 * PI * (x[0] * xi[0] + x[1] * xi[1]))
                    })
                    .sum::<Complex64>()
                    / g.volume()
            })
            .collect()
    }

    #[test]
    fn identity_and_multiplication_operators() {
        let g = Grid::unit(1, 64).unwrap();
        let f = random_trig(&g, 0.0, 20.0, &mut rng_for(1, 0, 0));
        let id = Identity;
        let tf = apply(&id, &f).unwrap();
        assert!(tf.sub(&f).unwrap().abs().into_iter().fold(0.0, f64::max) < 1e-12);
        let mult = SinProduct { nu: 2.0, kappa: 0.0, phase: PI / 2.0, m: 0.0 };
        let tf = apply(&mult, &f).unwrap();
        for (i, v) in tf.samples().iter().enumerate() {
            let x = g.point(i)[0];
            let want = f.samples()[i] * (2.0 * PI * 2.0 * x).sin();
            assert!((v - want).norm() < 1e-12);
        }
    }

    #[test]
    fn multiplier_diagonalizes() {
        let g = Grid::unit(1, 128).unwrap();
        let c = Oscillatory { m: -0.5, rho: 0.3 };
        for n in [0i64, 5, -17, 40] {
            let f = GridFunction::exponential(g, [n, 0]);
            let tf = apply(&c, &f).unwrap();
            let want = c.eval([0.0, 0.0], [n as f64, 0.0]);
            let got = tf.samples()[7] / f.samples()[7];
            assert!((got - want).norm() < 1e-12);
        }
        assert_eq!(c.eval([0.3, 0.0], [0.0, 0.0]), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn agrees_with_direct_quadrature_and_is_linear() {
        for (dim, n) in [(1, 32), (2, 8)] {
            let g = Grid::unit(dim, n).unwrap();
            let a = Modulated { m: -0.5, nu: 1.0, kappa: 0.3, amp: 0.4 };
            let f = random_trig(&g, 0.0, n as f64 / 4.0, &mut rng_for(2, 0, 0));
            let h = random_trig(&g, 0.0, n as f64 / 4.0, &mut rng_for(3, 0, 0));
            let tf = apply_unchecked(&a, &f).unwrap();
            let want = direct(&a, &f);
            let err = tf.samples().iter().zip(&want).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "dim {dim}: {err}");
            let lin = apply_unchecked(&a, &f.add(&h).unwrap()).unwrap();
            let sep = tf.add(&apply_unchecked(&a, &h).unwrap()).unwrap();
            assert!(lin.sub(&sep).unwrap().abs().into_iter().fold(0.0, f64::max) < 1e-12);
        }
    }

    #[test]
    fn under_resolved_symbol_is_flagged() {
        let g = Grid::unit(1, 32).unwrap();
        let f = GridFunction::exponential(g, [3, 0]);
        let a = SinProduct { nu: 12.0, kappa: 1.0, phase: 0.0, m: 0.0 };
        assert!(matches!(apply(&a, &f), Err(Error::UnderResolved(_))));
        let ok = SinProduct { nu: 3.0, kappa: 1.0, phase: 0.0, m: 0.0 };
        assert!(apply(&ok, &f).is_ok());
    }

    #[test]
    fn lattice_symbol_csv_round_trip() {
        let g = Grid::unit(1, 16).unwrap();
        let s = LatticeSymbol::sample(&Modulated { m: 0.0, nu: 1.0, kappa: 1.0, amp: 0.5 }, &g).unwrap();
        let back = LatticeSymbol::from_csv("t", &s.to_csv()).unwrap();
        assert!(back.max_abs_diff(&s).unwrap() < 1e-14);
        assert!(LatticeSymbol::from_csv("t", "# dim=1 n=16\nx_index,xi_index,re,im\n99,0,1,0\n").is_err());
    }
}
