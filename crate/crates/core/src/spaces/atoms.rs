use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use super::{g_function, sequence_norm, CoeffField, SpaceParams};
use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};

const ATOM_SLACK: f64 = 1e-12;

fn require_atomic_range(sp: &SpaceParams) -> Result<()> {
    if !(sp.p > 0.0 && sp.p <= 1.0) {
        return Err(Error::InvalidParameter(format!("∞-atoms need 0 < p <= 1, got p = {}", sp.p)));
    }
    Ok(())
}

/// True iff every nonzero entry of `r` lies in `q0` and
/// `‖g^{s,q}(r)‖_∞ ≤ |Q₀|^{-1/p}` (up to a relative rounding slack).
pub fn is_infty_atom(r: &CoeffField, q0: &DyadicCube, sp: &SpaceParams) -> Result<bool> {
    require_atomic_range(sp)?;
    if q0.dim() != r.dim() {
        return Err(Error::InvalidParameter("cube and field dimensions differ".into()));
    }
    if r.nonzero().any(|(q, _)| !q0.contains(&q)) {
        return Ok(false);
    }
    let sup = g_function(r, sp.s, sp.q).into_iter().fold(0.0, f64::max);
    Ok(sup <= q0.volume().powf(-1.0 / sp.p) * (1.0 + ATOM_SLACK))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomTerm {
    pub lambda: f64,
    pub cube: DyadicCube,
    pub atom: CoeffField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicDecomposition {
    pub terms: Vec<AtomTerm>,
    /// `(Σ λ_j^p)^{1/p} / ‖b‖_{f_p^{s,q}}` (0 for the empty field).
    pub constant: f64,
    /// True when the single enclosing atom was cheaper than the stopping-time split.
    pub single_atom: bool,
}

impl AtomicDecomposition {
    pub fn lambda_norm(&self, p: f64) -> f64 {
        self.terms.iter().map(|t| t.lambda.powf(p)).sum::<f64>().powf(1.0 / p)
    }

    /// `Σ_j λ_j r_j`.
    pub fn reconstruct(&self, dim: usize, max_depth: u32) -> Result<CoeffField> {
        let mut out = CoeffField::new(dim, max_depth)?;
        for t in &self.terms {
            out.add_scaled(&t.atom, Complex64::new(t.lambda, 0.0))?;
        }
        Ok(out)
    }
}

/// Cells of level `depth` covered by `q`, in linear order.
fn cells(q: &DyadicCube, depth: u32) -> Vec<usize> {
    let sh = depth - q.level();
    let o = q.offset();
    let (a0, b0) = ((o[0] as usize) << sh, (o[1] as usize) << sh);
    let w = 1usize << sh;
    if q.dim() == 1 {
        (a0..a0 + w).collect()
    } else {
        let side = 1usize << depth;
        (a0..a0 + w).flat_map(|a| (b0..b0 + w).map(move |b| a * side + b)).collect()
    }
}

/// The `(⌊N/2⌋+1)`-th largest value of `g` over the cells of `q`: it exceeds
/// `2^j` exactly when `|q ∩ {g > 2^j}| > |q|/2`.
fn majority_level(g: &[f64], q: &DyadicCube, depth: u32) -> f64 {
    let mut v: Vec<f64> = cells(q, depth).into_iter().map(|c| g[c]).collect();
    let rank = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(rank, |a, b| b.total_cmp(a));
    *m
}

/// Largest integer j with `2^j < m`.
fn level_below(m: f64) -> i32 {
    let j = m.log2().floor() as i32;
    if (j as f64).exp2() >= m {
        j - 1
    } else {
        j
    }
}

/// Smallest dyadic cube containing all nonzero entries of `r`.
fn enclosing_cube(r: &CoeffField) -> Option<DyadicCube> {
    let cubes: Vec<DyadicCube> = r.nonzero().map(|(q, _)| q).collect();
    let min_level = cubes.iter().map(|q| q.level()).min()?;
    let mut best = DyadicCube::unit(r.dim());
    for level in 0..=min_level {
        let a = cubes[0].ancestor(level);
        if cubes.iter().all(|q| q.ancestor(level) == a) {
            best = a;
        } else {
            break;
        }
    }
    Some(best)
}

fn term_for(part: CoeffField, sp: &SpaceParams) -> AtomTerm {
    let cube = enclosing_cube(&part).expect("nonempty part");
    let sup = g_function(&part, sp.s, sp.q).into_iter().fold(0.0, f64::max);
    let lambda = sup * cube.volume().powf(1.0 / sp.p);
    let atom = part.scale(Complex64::new(1.0 / lambda, 0.0));
    AtomTerm { lambda, cube, atom }
}

/// Decomposition of `b ∈ f_p^{s,q}` (`p ≤ 1`) into ∞-atoms.
///
/// Stopping-time construction on `g = g^{s,q}(b)`: each cube Q is assigned
/// `j(Q)` = the largest j with `|Q ∩ {g > 2^j}| > |Q|/2` and grouped under the
/// coarsest ancestor J with `|J ∩ {g > 2^j}| > |J|/2`. Each group becomes one
/// atom on the smallest dyadic cube enclosing it. The single atom on the
/// smallest cube enclosing all of `b` is used instead when its λ is no larger.
pub fn atomic_decompose(b: &CoeffField, sp: &SpaceParams) -> Result<AtomicDecomposition> {
    require_atomic_range(sp)?;
    if sp.q < sp.p {
        return Err(Error::InvalidParameter(format!("need p <= q, got p = {}, q = {}", sp.p, sp.q)));
    }
    if b.is_zero() {
        return Ok(AtomicDecomposition { terms: Vec::new(), constant: 0.0, single_atom: false });
    }
    let depth = b.max_depth();
    let g = g_function(b, sp.s, sp.q);
    let mut majority: HashMap<DyadicCube, f64> = HashMap::new();
    let mut groups: BTreeMap<(i32, DyadicCube), Vec<(DyadicCube, Complex64)>> = BTreeMap::new();
    for (q, v) in b.nonzero() {
        let mq = *majority.entry(q).or_insert_with(|| majority_level(&g, &q, depth));
        let j = level_below(mq);
        let threshold = (j as f64).exp2();
        let top = (0..=q.level())
            .map(|l| q.ancestor(l))
            .find(|a| *majority.entry(*a).or_insert_with(|| majority_level(&g, a, depth)) > threshold)
            .expect("q itself qualifies");
        groups.entry((j, top)).or_default().push((q, v));
    }
    let mut terms = Vec::with_capacity(groups.len());
    for entries in groups.into_values() {
        let mut part = CoeffField::new(b.dim(), depth)?;
        for (q, v) in entries {
            part.set(&q, v)?;
        }
        terms.push(term_for(part, sp));
    }
    let split: f64 = terms.iter().map(|t| t.lambda.powf(sp.p)).sum::<f64>().powf(1.0 / sp.p);
    let single = term_for(b.clone(), sp);
    let single_atom = single.lambda <= split;
    if single_atom {
        terms = vec![single];
    }
    let mut out = AtomicDecomposition { terms, constant: 0.0, single_atom };
    out.constant = out.lambda_norm(sp.p) / sequence_norm(b, sp);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng_for;
    use rand::Rng;

    fn sp(p: f64) -> SpaceParams {
        SpaceParams::triebel(0.5, p, 2.0).unwrap()
    }

    fn tight(q0: &DyadicCube, sp: &SpaceParams, depth: u32) -> CoeffField {
        let mut r = CoeffField::new(q0.dim(), depth).unwrap();
        let v = q0.volume();
        let d = q0.dim() as f64;
        r.set(q0, Complex64::new(v.powf(sp.s / d + 0.5 - 1.0 / sp.p), 0.0)).unwrap();
        r
    }

    #[test]
    fn atom_predicate() {
        let s = sp(0.75);
        let q0 = DyadicCube::new(1, 3, [2, 0]).unwrap();
        let r = tight(&q0, &s, 5);
        assert!(is_infty_atom(&r, &q0, &s).unwrap());
        assert!(!is_infty_atom(&r.scale(Complex64::new(2.0, 0.0)), &q0, &s).unwrap());
        assert!(is_infty_atom(&CoeffField::new(1, 5).unwrap(), &q0, &s).unwrap());
        let other = DyadicCube::new(1, 3, [3, 0]).unwrap();
        assert!(!is_infty_atom(&r, &other, &s).unwrap());
        assert!(is_infty_atom(&r, &q0, &sp(1.5)).is_err());
    }

    #[test]
    fn scaled_atom_gives_one_term() {
        let s = sp(1.0);
        let q0 = DyadicCube::new(2, 1, [1, 1]).unwrap();
        let mut r = tight(&q0, &s, 3);
        // add a smaller entry inside so the atom is not a single coefficient
        let inner = DyadicCube::new(2, 3, [5, 6]).unwrap();
        r.set(&inner, Complex64::new(0.01, 0.0)).unwrap();
        let sup = g_function(&r, s.s, s.q).into_iter().fold(0.0, f64::max);
        let r = r.scale(Complex64::new(q0.volume().powf(-1.0 / s.p) / sup, 0.0));
        assert!(is_infty_atom(&r, &q0, &s).unwrap());
        let b = r.scale(Complex64::new(3.5, 0.0));
        let dec = atomic_decompose(&b, &s).unwrap();
        assert_eq!(dec.terms.len(), 1);
        assert!((dec.terms[0].lambda - 3.5).abs() < 1e-12);
        assert_eq!(dec.terms[0].cube, q0);
    }

    #[test]
    fn disjoint_atoms_split() {
        for p in [1.0, 0.5] {
            let s = sp(p);
            let q1 = DyadicCube::new(1, 1, [0, 0]).unwrap();
            let q2 = DyadicCube::new(1, 1, [1, 0]).unwrap();
            let mut b = tight(&q1, &s, 4).scale(Complex64::new(3.0, 0.0));
            b.add_scaled(&tight(&q2, &s, 4), Complex64::new(5.0, 0.0)).unwrap();
            let dec = atomic_decompose(&b, &s).unwrap();
            assert_eq!(dec.terms.len(), 2);
            let mut got: Vec<(f64, DyadicCube)> = dec.terms.iter().map(|t| (t.lambda, t.cube)).collect();
            got.sort_by(|a, b| a.0.total_cmp(&b.0));
            assert!((got[0].0 - 3.0).abs() < 1e-12 && got[0].1 == q1);
            assert!((got[1].0 - 5.0).abs() < 1e-12 && got[1].1 == q2);
        }
    }

    #[test]
    fn random_fields_reconstruct_exactly() {
        for (p, q) in [(1.0, 2.0), (0.5, 1.0), (0.8, f64::INFINITY)] {
            let s = SpaceParams::triebel(0.2, p, q).unwrap();
            for seed in 0..20 {
                let mut rng = rng_for(seed, 0, 0);
                let dim = 1 + (seed as usize % 2);
                let mut b = CoeffField::new(dim, 5).unwrap();
                for _ in 0..rng.gen_range(1..40) {
                    let level = rng.gen_range(0..=5u32);
                    let idx = rng.gen_range(0..DyadicCube::count_at_level(dim, level));
                    let q = DyadicCube::from_linear(dim, level, idx).unwrap();
                    b.set(&q, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap();
                }
                let dec = atomic_decompose(&b, &s).unwrap();
                let back = dec.reconstruct(dim, 5).unwrap();
                assert!(back.max_abs_diff(&b).unwrap() <= 1e-12 * b.max_abs());
                for t in &dec.terms {
                    assert!(is_infty_atom(&t.atom, &t.cube, &s).unwrap());
                }
                assert!(dec.constant.is_finite() && dec.constant > 0.0);
            }
        }
        let empty = atomic_decompose(&CoeffField::new(1, 3).unwrap(), &sp(1.0)).unwrap();
        assert!(empty.terms.is_empty());
    }
}
