use std::fmt::Write as _;

use num_complex::Complex64;

use super::{lq_sum, SpaceParams};
use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};
use crate::grid::lp_norm;

/// Coefficients indexed by dyadic cubes of levels `0..=max_depth`, stored
/// densely per level in linear cube order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffField {
    dim: usize,
    levels: Vec<Vec<Complex64>>,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl CoeffField {
    pub fn new(dim: usize, max_depth: u32) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dim must be 1 or 2, got {dim}")));
        }
        if max_depth as usize * dim > 24 {
            return Err(Error::InvalidParameter(format!("depth {max_depth} too large")));
        }
        let levels = (0..=max_depth)
            .map(|k| vec![ZERO; DyadicCube::count_at_level(dim, k)])
            .collect();
        Ok(Self { dim, levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_depth(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    fn slot(&self, q: &DyadicCube) -> Result<(usize, usize)> {
        if q.dim() != self.dim || q.level() > self.max_depth() {
            return Err(Error::InvalidParameter(format!(
                "cube {q:?} outside a field of dim {} and depth {}",
                self.dim,
                self.max_depth()
            )));
        }
        Ok((q.level() as usize, q.linear_index()))
    }

    pub fn get(&self, q: &DyadicCube) -> Result<Complex64> {
        let (k, i) = self.slot(q)?;
        Ok(self.levels[k][i])
    }

    pub fn set(&mut self, q: &DyadicCube, v: Complex64) -> Result<()> {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite(format!("coefficient at {q:?}")));
        }
        let (k, i) = self.slot(q)?;
        self.levels[k][i] = v;
        Ok(())
    }

    pub fn level(&self, k: u32) -> &[Complex64] {
        &self.levels[k as usize]
    }

    pub(crate) fn level_mut(&mut self, k: u32) -> &mut [Complex64] {
        &mut self.levels[k as usize]
    }

    pub fn nonzero(&self) -> impl Iterator<Item = (DyadicCube, Complex64)> + '_ {
        self.levels.iter().enumerate().flat_map(move |(k, vals)| {
            vals.iter().enumerate().filter(|(_, v)| **v != ZERO).map(move |(i, v)| {
                (DyadicCube::from_linear(self.dim, k as u32, i).expect("in range"), *v)
            })
        })
    }

    pub fn nonzero_count(&self) -> usize {
        self.levels.iter().map(|l| l.iter().filter(|v| **v != ZERO).count()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.nonzero_count() == 0
    }

    fn require_shape(&self, other: &CoeffField) -> Result<()> {
        if self.dim != other.dim || self.max_depth() != other.max_depth() {
            return Err(Error::InvalidParameter(format!(
                "coefficient fields differ in shape: dim {}/{} depth {}/{}",
                self.dim,
                other.dim,
                self.max_depth(),
                other.max_depth()
            )));
        }
        Ok(())
    }

    pub fn add_scaled(&mut self, other: &CoeffField, c: Complex64) -> Result<()> {
        self.require_shape(other)?;
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
        Ok(())
    }

    pub fn scale(&self, c: Complex64) -> CoeffField {
        let mut out = self.clone();
        out.levels.iter_mut().flatten().for_each(|v| *v *= c);
        out
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &CoeffField) -> Result<f64> {
        self.require_shape(other)?;
        Ok(self
            .levels
            .iter()
            .flatten()
            .zip(other.levels.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.levels.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// CSV with a `# dim=D max_depth=N` preamble and rows
    /// `level,offset,re,im` for every nonzero entry (offset = linear index).
    pub fn to_csv(&self) -> String {
        let mut s = format!("# dim={} max_depth={}\nlevel,offset,re,im\n", self.dim, self.max_depth());
        for (q, v) in self.nonzero() {
            let _ = writeln!(s, "{},{},{:e},{:e}", q.level(), q.linear_index(), v.re, v.im);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let parse_err = |line: usize, msg: String| Error::Parse(format!("line {}: {msg}", line + 1));
        let (ln, pre) = lines.next().ok_or_else(|| parse_err(0, "empty input".into()))?;
        let mut dim = None;
        let mut depth = None;
        for tok in pre.trim_start_matches('#').split_whitespace() {
            match tok.split_once('=') {
                Some(("dim", v)) => dim = v.parse::<usize>().ok(),
                Some(("max_depth", v)) => depth = v.parse::<u32>().ok(),
                _ => {}
            }
        }
        let (dim, depth) = match (dim, depth) {
            (Some(d), Some(m)) => (d, m),
            _ => return Err(parse_err(ln, "expected `# dim=D max_depth=N`".into())),
        };
        let mut field = Self::new(dim, depth)?;
        match lines.next() {
            Some((_, h)) if h.trim() == "level,offset,re,im" => {}
            Some((l, _)) => return Err(parse_err(l, "expected header `level,offset,re,im`".into())),
            None => return Err(parse_err(ln + 1, "missing header".into())),
        }
        for (l, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(parse_err(l, format!("expected 4 columns, got {}", cols.len())));
            }
            let level: u32 = cols[0].parse().map_err(|_| parse_err(l, format!("bad level `{}`", cols[0])))?;
            let offset: usize =
                cols[1].parse().map_err(|_| parse_err(l, format!("bad offset `{}`", cols[1])))?;
            let re: f64 = cols[2].parse().map_err(|_| parse_err(l, format!("bad value `{}`", cols[2])))?;
            let im: f64 = cols[3].parse().map_err(|_| parse_err(l, format!("bad value `{}`", cols[3])))?;
            if level > depth {
                return Err(parse_err(l, format!("level {level} exceeds max_depth {depth}")));
            }
            let q = DyadicCube::from_linear(dim, level, offset).map_err(|e| parse_err(l, e.to_string()))?;
            field.set(&q, Complex64::new(re, im)).map_err(|e| parse_err(l, e.to_string()))?;
        }
        Ok(field)
    }
}

/// `g(x) = ‖{|Q|^{-s/d-1/2} |b_Q| χ_Q(x)}‖_{ℓ^q}` on the cells of level
/// `max_depth`, in linear cell order.
pub fn g_function(b: &CoeffField, s: f64, q: f64) -> Vec<f64> {
    let d = b.dim();
    let depth = b.max_depth();
    let mut acc = vec![0.0; DyadicCube::count_at_level(d, depth)];
    let side_fine = 1usize << depth;
    for k in 0..=depth {
        let w = (k as f64 * (s + d as f64 / 2.0)).exp2();
        let sh = depth - k;
        let side = 1usize << k;
        for (i, v) in b.level(k).iter().enumerate() {
            if *v == ZERO {
                continue;
            }
            let a = w * v.norm();
            let a = if q.is_infinite() { a } else { a.powf(q) };
            let mut visit = |cell: usize| {
                if q.is_infinite() {
                    acc[cell] = f64::max(acc[cell], a);
                } else {
                    acc[cell] += a;
                }
            };
            if d == 1 {
                (i << sh..(i + 1) << sh).for_each(&mut visit);
            } else {
                let (r, c) = (i / side, i % side);
                for rr in r << sh..(r + 1) << sh {
                    for cc in c << sh..(c + 1) << sh {
                        visit(rr * side_fine + cc);
                    }
                }
            }
        }
    }
    if q.is_finite() {
        acc.iter_mut().for_each(|v| *v = v.powf(1.0 / q));
    }
    acc
}

/// `‖b‖_{f_p^{s,q}}`, the L^p norm of [`g_function`] over the unit torus.
pub fn sequence_norm(b: &CoeffField, sp: &SpaceParams) -> f64 {
    let g = g_function(b, sp.s, sp.q);
    let w = 1.0 / g.len() as f64;
    lp_norm(&g, w, sp.p)
}

/// `‖b‖_{b_p^{s,q}}`: ℓ^q over levels of the per-level ℓ^p sums.
pub fn sequence_besov_norm(b: &CoeffField, sp: &SpaceParams) -> f64 {
    let d = b.dim() as f64;
    lq_sum(
        (0..=b.max_depth()).map(|k| {
            let w = (k as f64 * (sp.s + d / 2.0 - d / sp.p)).exp2();
            let vals: Vec<f64> = b.level(k).iter().map(|v| v.norm()).collect();
            w * lq_sum(vals, sp.p)
        }),
        sp.q,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(dim: usize, level: u32, off: [u64; 2]) -> DyadicCube {
        DyadicCube::new(dim, level, off).unwrap()
    }

    #[test]
    fn single_coefficient_norm() {
        // |b_Q| |Q|^{-s/d-1/2} |Q|^{1/p}
        let mut b = CoeffField::new(1, 5).unwrap();
        let q = cube(1, 3, [5, 0]);
        b.set(&q, Complex64::new(0.0, 2.0)).unwrap();
        for (s, p) in [(0.0, 2.0), (0.5, 1.0), (-0.3, 0.5)] {
            let sp = SpaceParams::triebel(s, p, 2.0).unwrap();
            let vol: f64 = 1.0 / 8.0;
            let want = 2.0 * vol.powf(-s - 0.5) * vol.powf(1.0 / p);
            assert!((sequence_norm(&b, &sp) - want).abs() < 1e-12 * want);
            let bsp = SpaceParams::besov(s, p, 2.0).unwrap();
            assert!((sequence_besov_norm(&b, &bsp) - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn nested_cubes_combine_in_lq() {
        let mut b = CoeffField::new(1, 2).unwrap();
        b.set(&cube(1, 0, [0, 0]), Complex64::new(1.0, 0.0)).unwrap();
        b.set(&cube(1, 1, [0, 0]), Complex64::new(1.0, 0.0)).unwrap();
        let g = g_function(&b, 0.0, 2.0);
        let inner = (1.0f64 + 2.0).sqrt();
        assert!((g[0] - inner).abs() < 1e-12 && (g[1] - inner).abs() < 1e-12);
        assert!((g[2] - 1.0).abs() < 1e-12 && (g[3] - 1.0).abs() < 1e-12);
        let gi = g_function(&b, 0.0, f64::INFINITY);
        assert!((gi[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_cells() {
        let mut b = CoeffField::new(2, 2).unwrap();
        b.set(&cube(2, 1, [1, 0]), Complex64::new(3.0, 0.0)).unwrap();
        let g = g_function(&b, 0.0, 1.0);
        // level-1 cube (1,0) covers rows 2..4, cols 0..2 of the 4x4 cells; weight 2^{1·1}
        for r in 0..4 {
            for c in 0..4 {
                let want = if r >= 2 && c < 2 { 6.0 } else { 0.0 };
                assert_eq!(g[r * 4 + c], want);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut b = CoeffField::new(2, 3).unwrap();
        b.set(&cube(2, 3, [7, 2]), Complex64::new(0.1, -1e-300)).unwrap();
        b.set(&cube(2, 0, [0, 0]), Complex64::new(-2.5, 3.0)).unwrap();
        let back = CoeffField::from_csv(&b.to_csv()).unwrap();
        assert_eq!(back, b);
        assert!(CoeffField::from_csv("# dim=1 max_depth=2\nlevel,offset,re,im\n3,0,1,0\n").is_err());
        let err = CoeffField::from_csv("# dim=1 max_depth=2\nlevel,offset,re,im\n1,0,x,0\n").unwrap_err();
        assert!(err.to_string().contains("line 3"));
    }
}
