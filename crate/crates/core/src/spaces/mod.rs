//! Besov and Triebel–Lizorkin norms, sequence spaces, the φ-transform,
//! ∞-atoms and the sharp-function form of the Triebel–Lizorkin norm.
//!
//! All L^p integrals are Riemann sums over the sample lattice (max for
//! p = ∞). Infinite band sums stop at the partition's J, which is exact for
//! the band-limited inputs these routines are meant for.

mod atoms;
mod phi;
mod sequence;
mod sharp;

pub use atoms::*;
pub use phi::*;
pub use sequence::*;
pub use sharp::*;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::{require_dyadic_grid, DyadicCube, Pyramid};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, Grid, GridFunction};
use crate::littlewood_paley::{BandTable, LPPartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Besov,
    TriebelLizorkin,
}

/// Serde helper writing infinite exponents as the string `"inf"`.
pub mod exponent {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => parse(&t).map_err(serde::de::Error::custom),
        }
    }

    /// Parse an exponent, accepting `inf`, `infinity` and `∞`.
    pub fn parse(t: &str) -> Result<f64, String> {
        match t.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
            other => other.parse::<f64>().map_err(|_| format!("bad exponent `{t}`")),
        }
    }

    pub fn to_json(v: f64) -> serde_json::Value {
        if v.is_infinite() {
            "inf".into()
        } else {
            v.into()
        }
    }
}

/// Smoothness `s`, integrability `p` and fine index `q` of a space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub s: f64,
    #[serde(with = "exponent")]
    pub p: f64,
    #[serde(with = "exponent")]
    pub q: f64,
    pub family: Family,
}

impl SpaceParams {
    pub fn new(family: Family, s: f64, p: f64, q: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::InvalidParameter(format!("s must be finite, got {s}")));
        }
        if !(p > 0.0) || !(q > 0.0) {
            return Err(Error::InvalidParameter(format!("need p, q > 0, got p = {p}, q = {q}")));
        }
        Ok(Self { s, p, q, family })
    }

    pub fn besov(s: f64, p: f64, q: f64) -> Result<Self> {
        Self::new(Family::Besov, s, p, q)
    }

    pub fn triebel(s: f64, p: f64, q: f64) -> Result<Self> {
        Self::new(Family::TriebelLizorkin, s, p, q)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "family": match self.family { Family::Besov => "B", Family::TriebelLizorkin => "F" },
            "s": self.s,
            "p": exponent::to_json(self.p),
            "q": exponent::to_json(self.q),
        })
    }
}

/// ℓ^q (quasi-)norm of nonnegative values.
pub fn lq_sum(values: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        values.into_iter().fold(0.0, f64::max)
    } else {
        values.into_iter().map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Band projections of one grid, cached for repeated norm evaluation.
#[derive(Debug, Clone)]
pub struct Analyzer {
    table: BandTable,
}

impl Analyzer {
    pub fn new(grid: &Grid, partition: &LPPartition) -> Result<Self> {
        partition.require_resolves(grid)?;
        Ok(Self { table: BandTable::new(grid, partition) })
    }

    /// Analyzer with the minimal resolving partition for `grid`.
    pub fn for_grid(grid: &Grid) -> Result<Self> {
        Self::new(grid, &LPPartition::for_grid(grid, 1)?)
    }

    pub fn table(&self) -> &BandTable {
        &self.table
    }

    pub fn grid(&self) -> &Grid {
        self.table.grid()
    }

    pub fn levels(&self) -> usize {
        self.table.levels()
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        self.grid().same_as(f.grid())
    }

    /// Moduli `|Λ_k f|`, or `None` when band k carries no spectral mass.
    pub fn band_moduli(&self, f: &GridFunction, k: usize) -> Option<Vec<f64>> {
        let spec = f.spectrum();
        if self.table.is_silent(spec, k) {
            return None;
        }
        Some(self.table.project(f, k).abs())
    }

    /// `‖Λ_k f‖_p`.
    pub fn band_lp(&self, f: &GridFunction, k: usize, p: f64) -> f64 {
        let spec = f.spectrum();
        if self.table.is_silent(spec, k) {
            return 0.0;
        }
        if p == 2.0 {
            return self.table.band_l2(spec, k);
        }
        lp_norm(&self.table.project(f, k).abs(), self.grid().cell_volume(), p)
    }

    pub fn besov(&self, f: &GridFunction, s: f64, p: f64, q: f64) -> Result<f64> {
        self.check(f)?;
        Ok(lq_sum(
            (0..=self.levels()).map(|k| (s * k as f64).exp2() * self.band_lp(f, k, p)),
            q,
        ))
    }

    pub fn triebel(&self, f: &GridFunction, s: f64, p: f64, q: f64) -> Result<f64> {
        self.check(f)?;
        if p.is_infinite() {
            return Err(Error::InvalidParameter(
                "p = inf uses the dyadic-cube definition (triebel_infty_norm)".into(),
            ));
        }
        if p == q {
            return self.besov(f, s, p, q);
        }
        let mut acc = vec![0.0f64; self.grid().len()];
        for k in 0..=self.levels() {
            if let Some(m) = self.band_moduli(f, k) {
                let w = (s * k as f64).exp2();
                if q.is_infinite() {
                    acc.iter_mut().zip(&m).for_each(|(a, v)| *a = a.max(w * v));
                } else {
                    acc.iter_mut().zip(&m).for_each(|(a, v)| *a += (w * v).powf(q));
                }
            }
        }
        if q.is_finite() {
            acc.iter_mut().for_each(|a| *a = a.powf(1.0 / q));
        }
        Ok(lp_norm(&acc, self.grid().cell_volume(), p))
    }

    pub fn triebel_infty(&self, f: &GridFunction, s: f64, q: f64) -> Result<f64> {
        self.check(f)?;
        let grid = *self.grid();
        require_dyadic_grid(&grid)?;
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("need 0 < q < inf, got {q}")));
        }
        let base = self.band_moduli(f, 0).map_or(0.0, |m| m.into_iter().fold(0.0, f64::max));
        let top = grid.log2_n();
        let pyramids: Vec<(usize, Pyramid)> = (1..=self.levels())
            .filter_map(|k| {
                let m = self.band_moduli(f, k)?;
                let w = (s * k as f64).exp2();
                let pw: Vec<f64> = m.iter().map(|v| (w * v).powf(q)).collect();
                Some((k, Pyramid::new(&grid, &pw)))
            })
            .collect();
        let mut sup: f64 = 0.0;
        for level in 1..=top {
            let mut tail = vec![0.0; DyadicCube::count_at_level(grid.dim(), level)];
            for (k, p) in &pyramids {
                if *k >= level as usize {
                    tail.iter_mut().zip(p.level(level)).for_each(|(a, v)| *a += v);
                }
            }
            sup = sup.max(tail.into_iter().fold(0.0, f64::max));
        }
        Ok(base + sup.powf(1.0 / q))
    }

    /// Norm of `f` in the space described by `sp`.
    pub fn norm(&self, f: &GridFunction, sp: &SpaceParams) -> Result<f64> {
        match sp.family {
            Family::Besov => self.besov(f, sp.s, sp.p, sp.q),
            Family::TriebelLizorkin if sp.p.is_infinite() => self.triebel_infty(f, sp.s, sp.q),
            Family::TriebelLizorkin => self.triebel(f, sp.s, sp.p, sp.q),
        }
    }
}

fn require_family(sp: &SpaceParams, family: Family) -> Result<()> {
    if sp.family != family {
        return Err(Error::InvalidParameter(format!(
            "expected {family:?} parameters, got {:?}",
            sp.family
        )));
    }
    Ok(())
}

/// `‖{2^{sk} Λ_k f}‖_{ℓ^q(L^p)}`.
pub fn besov_norm(f: &GridFunction, partition: &LPPartition, sp: &SpaceParams) -> Result<f64> {
    require_family(sp, Family::Besov)?;
    Analyzer::new(f.grid(), partition)?.besov(f, sp.s, sp.p, sp.q)
}

/// `‖{2^{sk} Λ_k f}‖_{L^p(ℓ^q)}` for p < ∞.
pub fn triebel_norm(f: &GridFunction, partition: &LPPartition, sp: &SpaceParams) -> Result<f64> {
    require_family(sp, Family::TriebelLizorkin)?;
    Analyzer::new(f.grid(), partition)?.triebel(f, sp.s, sp.p, sp.q)
}

/// Dyadic-cube form of the F_∞^{s,q} norm (q < ∞).
pub fn triebel_infty_norm(f: &GridFunction, partition: &LPPartition, s: f64, q: f64) -> Result<f64> {
    Analyzer::new(f.grid(), partition)?.triebel_infty(f, s, q)
}

/// Multiply the spectrum by `2^{σ k}` on band k, for an input living in a
/// single band k.
pub fn lift_single_band(f: &GridFunction, k: usize, sigma: f64) -> GridFunction {
    f.scale(Complex64::new((sigma * k as f64).exp2(), 0.0))
}
