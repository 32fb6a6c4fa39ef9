//! Dyadic cubes of the unit torus and per-level cube averages of sampled data.
//!
//! Cubes are anchored at 0. A cube of level `k` has side `2^{-k}` and an
//! integer offset per axis in `0..2^k`. On a grid with `n = 2^N` samples per
//! axis, levels `0..=N` are resolved and a level-`k` cube covers a block of
//! `2^{N-k}` samples per axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    dim: u8,
    level: u32,
    offset: [u64; 2],
}

impl DyadicCube {
    pub fn new(dim: usize, level: u32, offset: [u64; 2]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dim must be 1 or 2, got {dim}")));
        }
        if level > 40 {
            return Err(Error::InvalidParameter(format!("level {level} too deep")));
        }
        let side = 1u64 << level;
        let o1 = if dim == 1 { 0 } else { offset[1] };
        if offset[0] >= side || o1 >= side {
            return Err(Error::InvalidParameter(format!(
                "offset {offset:?} outside the torus at level {level}"
            )));
        }
        Ok(Self { dim: dim as u8, level, offset: [offset[0], o1] })
    }

    /// The unit cube `[0,1)^d`.
    pub fn unit(dim: usize) -> Self {
        Self::new(dim, 0, [0, 0]).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn offset(&self) -> [u64; 2] {
        self.offset
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }

    /// Lower-left corner x_Q.
    pub fn corner(&self) -> [f64; 2] {
        let s = self.side();
        let c = [self.offset[0] as f64 * s, self.offset[1] as f64 * s];
        if self.dim == 1 { [c[0], 0.0] } else { c }
    }

    /// Center c_Q.
    pub fn center(&self) -> [f64; 2] {
        let s = self.side() / 2.0;
        let c = self.corner();
        if self.dim == 1 { [c[0] + s, 0.0] } else { [c[0] + s, c[1] + s] }
    }

    /// Row-major index among the cubes of its level.
    pub fn linear_index(&self) -> usize {
        if self.dim == 1 {
            self.offset[0] as usize
        } else {
            (self.offset[0] * (1u64 << self.level) + self.offset[1]) as usize
        }
    }

    pub fn from_linear(dim: usize, level: u32, idx: usize) -> Result<Self> {
        let side = 1u64 << level;
        let idx = idx as u64;
        if dim == 1 {
            Self::new(1, level, [idx, 0])
        } else {
            Self::new(2, level, [idx / side, idx % side])
        }
    }

    pub fn count_at_level(dim: usize, level: u32) -> usize {
        1usize << (level as usize * dim)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.level == 0 {
            return None;
        }
        Some(Self {
            dim: self.dim,
            level: self.level - 1,
            offset: [self.offset[0] / 2, self.offset[1] / 2],
        })
    }

    /// Ancestor at a coarser (or equal) level.
    pub fn ancestor(&self, level: u32) -> Self {
        assert!(level <= self.level);
        let sh = self.level - level;
        Self {
            dim: self.dim,
            level,
            offset: [self.offset[0] >> sh, self.offset[1] >> sh],
        }
    }

    pub fn children(&self) -> Vec<Self> {
        let l = self.level + 1;
        let [a, b] = [self.offset[0] * 2, self.offset[1] * 2];
        if self.dim == 1 {
            vec![Self { dim: 1, level: l, offset: [a, 0] }, Self { dim: 1, level: l, offset: [a + 1, 0] }]
        } else {
            let mut v = Vec::with_capacity(4);
            for i in 0..2 {
                for j in 0..2 {
                    v.push(Self { dim: 2, level: l, offset: [a + i, b + j] });
                }
            }
            v
        }
    }

    /// True when `other ⊆ self`.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.dim == self.dim && other.level >= self.level && other.ancestor(self.level) == *self
    }

    pub fn contains_point(&self, x: [f64; 2]) -> bool {
        let c = self.corner();
        let s = self.side();
        (0..self.dim as usize).all(|i| x[i] >= c[i] && x[i] < c[i] + s)
    }

    /// Cubes of `level` in row-major order.
    pub fn all_at_level(dim: usize, level: u32) -> impl Iterator<Item = DyadicCube> {
        (0..Self::count_at_level(dim, level))
            .map(move |i| Self::from_linear(dim, level, i).expect("index in range"))
    }

    /// Sample-index block `(start, width)` per axis on `grid`.
    pub fn sample_block(&self, grid: &Grid) -> Result<([usize; 2], usize)> {
        require_dyadic_grid(grid)?;
        if self.level > grid.log2_n() {
            return Err(Error::Resolution(format!(
                "cube level {} finer than the grid (n = {})",
                self.level,
                grid.n()
            )));
        }
        let w = grid.n() >> self.level;
        Ok(([self.offset[0] as usize * w, self.offset[1] as usize * w], w))
    }

    /// Flat sample indices of `grid` inside the cube.
    pub fn sample_indices(&self, grid: &Grid) -> Result<Vec<usize>> {
        let (start, w) = self.sample_block(grid)?;
        let mut out = Vec::new();
        if grid.dim() == 1 {
            out.extend(start[0]..start[0] + w);
        } else {
            for a in start[0]..start[0] + w {
                for b in start[1]..start[1] + w {
                    out.push(grid.flatten([a, b]));
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn require_dyadic_grid(grid: &Grid) -> Result<()> {
    if grid.period() != 1.0 {
        return Err(Error::InvalidGrid(format!(
            "dyadic cubes need the unit torus, got period {}",
            grid.period()
        )));
    }
    Ok(())
}

/// Index of the level-`level` cube containing sample `idx`.
pub fn cube_of_sample(grid: &Grid, idx: usize, level: u32) -> usize {
    let sh = grid.log2_n() - level;
    let [a, b] = grid.unflatten(idx);
    if grid.dim() == 1 {
        a >> sh
    } else {
        ((a >> sh) << level) + (b >> sh)
    }
}

/// Per-level cube means of sample values: `levels[k][c]` is the average over
/// cube `c` of level `k`, for `k = 0..=log2 n`.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<Vec<f64>>,
}

impl Pyramid {
    pub fn new(grid: &Grid, values: &[f64]) -> Self {
        let top = grid.log2_n();
        let d = grid.dim();
        let mut levels: Vec<Vec<f64>> = vec![Vec::new(); top as usize + 1];
        levels[top as usize] = values.to_vec();
        for k in (0..top).rev() {
            let fine = &levels[k as usize + 1];
            let side = 1usize << k;
            let fs = side * 2;
            let mut coarse = vec![0.0; DyadicCube::count_at_level(d, k)];
            if d == 1 {
                for (c, v) in coarse.iter_mut().enumerate() {
                    *v = 0.5 * (fine[2 * c] + fine[2 * c + 1]);
                }
            } else {
                for a in 0..side {
                    for b in 0..side {
                        let s = fine[2 * a * fs + 2 * b]
                            + fine[2 * a * fs + 2 * b + 1]
                            + fine[(2 * a + 1) * fs + 2 * b]
                            + fine[(2 * a + 1) * fs + 2 * b + 1];
                        coarse[a * side + b] = 0.25 * s;
                    }
                }
            }
            levels[k as usize] = coarse;
        }
        Self { levels }
    }

    pub fn top(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn level(&self, k: u32) -> &[f64] {
        &self.levels[k as usize]
    }

    pub fn mean(&self, cube: &DyadicCube) -> f64 {
        self.levels[cube.level() as usize][cube.linear_index()]
    }
}
