use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Symbol, SymbolKind};
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeminormOptions {
    /// Largest |α| + |β|.
    pub max_order: u32,
    /// Restrict the sup to xi_min ≤ |ξ| ≤ xi_max.
    pub xi_min: Option<f64>,
    pub xi_max: Option<f64>,
    pub halving_tolerance: f64,
    pub check_halving: bool,
}

impl Default for SeminormOptions {
    fn default() -> Self {
        Self { max_order: 4, xi_min: None, xi_max: None, halving_tolerance: 0.05, check_halving: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeminormEstimate {
    pub value: f64,
    /// Same sup with half the step; `None` for sampled symbols.
    pub halved: Option<f64>,
    /// Lattice point `(x_idx, xi_idx)` attaining the sup.
    pub at: (usize, usize),
}

/// Central difference weights `(offset in steps, coefficient)` of order `k`.
fn stencil(k: u32) -> Vec<(f64, f64)> {
    let mut c = 1.0;
    (0..=k)
        .map(|j| {
            let w = if j % 2 == 0 { c } else { -c };
            let out = (k as f64 / 2.0 - j as f64, w);
            c = c * (k - j) as f64 / (j + 1) as f64;
            out
        })
        .collect()
}

/// Tensor stencil over (ξ₁, ξ₂, x₁, x₂).
fn tensor(alpha: [u32; 2], beta: [u32; 2], dim: usize) -> Vec<([f64; 4], f64)> {
    let axes = [alpha[0], if dim == 2 { alpha[1] } else { 0 }, beta[0], if dim == 2 { beta[1] } else { 0 }];
    let mut out = vec![([0.0; 4], 1.0)];
    for (ax, &k) in axes.iter().enumerate() {
        let st = stencil(k);
        out = out
            .into_iter()
            .flat_map(|(o, w)| {
                st.iter().map(move |&(d, c)| {
                    let mut o2 = o;
                    o2[ax] = d;
                    (o2, w * c)
                })
            })
            .collect();
    }
    out
}

/// Multipliers are constant in x, so one sample suffices.
fn x_count(a: &dyn Symbol, grid: &Grid) -> usize {
    if a.kind() == SymbolKind::Multiplier { 1 } else { grid.len() }
}

fn in_range(r: f64, (lo, hi): (Option<f64>, Option<f64>)) -> bool {
    lo.map_or(true, |v| r >= v) && hi.map_or(true, |v| r <= v)
}

/// `sup |Δ_ξ^α Δ_x^β a(x, ξ)| (1+|ξ|)^{-m}` over the lattice of `grid`, with
/// central differences divided by step^{|α|+|β|}. Closed forms use one
/// lattice cell per axis and are rechecked at half the step; sampled tables
/// use two cells so that half-step nodes stay on the lattice.
pub fn seminorm(
    a: &dyn Symbol,
    grid: &Grid,
    alpha: [u32; 2],
    beta: [u32; 2],
    m: f64,
    opts: &SeminormOptions,
) -> Result<SeminormEstimate> {
    let order = alpha.iter().chain(&beta).sum::<u32>();
    if order > opts.max_order {
        return Err(Error::InvalidParameter(format!("|alpha| + |beta| = {order} exceeds {}", opts.max_order)));
    }
    if grid.dim() == 1 && (alpha[1] > 0 || beta[1] > 0) {
        return Err(Error::InvalidParameter("second multi-index entry must be 0 in 1D".into()));
    }
    if let Some(g) = a.lattice() {
        g.same_as(grid)?;
    }
    let sampled = a.kind() == SymbolKind::GridSampled;
    let st = tensor(alpha, beta, grid.dim());
    let (h_xi, h_x) = (grid.period().recip(), grid.spacing());
    let a_ord = (alpha[0] + alpha[1]) as i32;
    let b_ord = (beta[0] + beta[1]) as i32;
    if sampled {
        let (v, at) = sup_sampled(a, grid, &st, m, (opts.xi_min, opts.xi_max), a_ord, b_ord);
        return Ok(SeminormEstimate { value: v, halved: None, at });
    }
    let (v, at) = sup_closed(a, grid, &st, m, (opts.xi_min, opts.xi_max), h_xi, h_x, a_ord, b_ord);
    if !opts.check_halving || order == 0 {
        return Ok(SeminormEstimate { value: v, halved: None, at });
    }
    let (vh, _) = sup_closed(a, grid, &st, m, (opts.xi_min, opts.xi_max), h_xi / 2.0, h_x / 2.0, a_ord, b_ord);
    let floor = 1e-12;
    if (v - vh).abs() > opts.halving_tolerance * vh.max(floor) && (v - vh).abs() > floor {
        return Err(Error::StepTooCoarse(format!(
            "{}: seminorm {v:.6e} at one cell vs {vh:.6e} at half a cell (tolerance {})",
            a.name(),
            opts.halving_tolerance
        )));
    }
    Ok(SeminormEstimate { value: v, halved: Some(vh), at })
}

#[allow(clippy::too_many_arguments)]
fn sup_closed(
    a: &dyn Symbol,
    grid: &Grid,
    st: &[([f64; 4], f64)],
    m: f64,
    range: (Option<f64>, Option<f64>),
    h_xi: f64,
    h_x: f64,
    a_ord: i32,
    b_ord: i32,
) -> (f64, (usize, usize)) {
    let norm = h_xi.powi(a_ord) * h_x.powi(b_ord);
    (0..grid.len())
        .into_par_iter()
        .filter(|&j| in_range(grid.frequency_norm(j), range))
        .map(|j| {
            let xi = grid.frequency(j);
            let w = (1.0 + grid.frequency_norm(j)).powf(-m);
            let mut best = (0.0, (0, j));
            for i in 0..x_count(a, grid) {
                let x = grid.point(i);
                let d: num_complex::Complex64 = st
                    .iter()
                    .map(|(o, c)| {
                        *c * a.eval(
                            [x[0] + o[2] * h_x, x[1] + o[3] * h_x],
                            [xi[0] + o[0] * h_xi, xi[1] + o[1] * h_xi],
                        )
                    })
                    .sum();
                let v = d.norm() / norm * w;
                if v > best.0 {
                    best = (v, (i, j));
                }
            }
            best
        })
        .reduce(|| (0.0, (0, 0)), |a, b| if b.0 > a.0 { b } else { a })
}

fn sup_sampled(
    a: &dyn Symbol,
    grid: &Grid,
    st: &[([f64; 4], f64)],
    m: f64,
    range: (Option<f64>, Option<f64>),
    a_ord: i32,
    b_ord: i32,
) -> (f64, (usize, usize)) {
    let n = grid.n() as i64;
    let half = n / 2;
    let norm = (2.0 / grid.period()).powi(a_ord) * (2.0 * grid.spacing()).powi(b_ord);
    let wrap = |v: i64| v.rem_euclid(n) as usize;
    (0..grid.len())
        .into_par_iter()
        .filter(|&j| in_range(grid.frequency_norm(j), range))
        .filter_map(|j| {
            let k = grid.wave_vector(j);
            // Offsets are in units of two cells.
            let shifted: Option<Vec<(usize, [i64; 2], f64)>> = st
                .iter()
                .map(|(o, c)| {
                    let kk = [k[0] + (2.0 * o[0]) as i64, k[1] + (2.0 * o[1]) as i64];
                    let inside = kk.iter().take(grid.dim()).all(|&v| (-half..half).contains(&v));
                    inside.then(|| (grid.wave_index(kk), [(2.0 * o[2]) as i64, (2.0 * o[3]) as i64], *c))
                })
                .collect();
            let shifted = shifted?;
            let w = (1.0 + grid.frequency_norm(j)).powf(-m);
            let mut best = (0.0, (0, j));
            for i in 0..x_count(a, grid) {
                let [i0, i1] = grid.unflatten(i);
                let d: num_complex::Complex64 = shifted
                    .iter()
                    .map(|(jj, dx, c)| {
                        let ii = if grid.dim() == 1 {
                            wrap(i0 as i64 + dx[0])
                        } else {
                            grid.flatten([wrap(i0 as i64 + dx[0]), wrap(i1 as i64 + dx[1])])
                        };
                        *c * a.on_lattice(grid, ii, *jj)
                    })
                    .sum();
                let v = d.norm() / norm * w;
                if v > best.0 {
                    best = (v, (i, j));
                }
            }
            Some(best)
        })
        .reduce(|| (0.0, (0, 0)), |a, b| if b.0 > a.0 { b } else { a })
}
