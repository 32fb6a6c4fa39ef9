use num_complex::Complex64;
use rand::Rng;
use statrs::function::gamma::gamma;

use super::lacunary::{LacunaryConfig, RademacherMultiplier};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::report::{AuditReport, Table};
use crate::stats::{mean, rng_for, std_dev};

/// Sign sequences up to this length are enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Slack in standard errors allowed to Monte Carlo estimates.
pub const MC_SIGMAS: f64 = 3.0;

const STREAM_KHINTCHINE: u64 = 0x4B41;

/// Root of `Γ((p+1)/2) = √π/2`, where the optimal lower constant switches form.
const P0: f64 = 1.847_416_336_076_339;

/// Best constants `(A_p, B_p)` with
/// `A_p ‖c‖_2 ≤ (E|Σ c_n r_n|^p)^{1/p} ≤ B_p ‖c‖_2`.
pub fn khintchine_constants(p: f64) -> (f64, f64) {
    let gauss = || 2f64.sqrt() * (gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()).powf(1.0 / p);
    if p >= 2.0 {
        (1.0, gauss())
    } else if p < P0 {
        ((0.5 - 1.0 / p).exp2(), 1.0)
    } else {
        (gauss(), 1.0)
    }
}

fn moment(coeffs: &[Complex64], signs: impl Fn(usize) -> bool, p: f64) -> f64 {
    let s: Complex64 = coeffs.iter().enumerate().map(|(i, c)| if signs(i) { *c } else { -*c }).sum();
    s.norm().powf(p)
}

/// Exhaustive for at most [`EXHAUSTIVE_LIMIT`] coefficients, Monte Carlo
/// with `draws` sign patterns otherwise.
pub fn khintchine_audit(coeffs: &[Complex64], p: f64, draws: usize, seed: u64) -> Result<AuditReport> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < p < inf, got {p}")));
    }
    if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("coefficients must be finite and non-empty".into()));
    }
    let l2 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if l2 == 0.0 {
        return Err(Error::InvalidParameter("coefficients vanish".into()));
    }
    let exhaustive = coeffs.len() <= EXHAUSTIVE_LIMIT;
    let samples: Vec<f64> = if exhaustive {
        (0..1usize << coeffs.len()).map(|bits| moment(coeffs, |i| bits >> i & 1 == 1, p)).collect()
    } else {
        if draws < 2 {
            return Err(Error::InvalidParameter("Monte Carlo mode needs at least 2 draws".into()));
        }
        (0..draws)
            .map(|i| {
                let mut rng = rng_for(seed, STREAM_KHINTCHINE, i as u64);
                let bits: Vec<bool> = (0..coeffs.len()).map(|_| rng.gen()).collect();
                moment(coeffs, |j| bits[j], p)
            })
            .collect()
    };
    let mu = mean(&samples);
    let ratio = mu.powf(1.0 / p) / l2;
    let se = if exhaustive {
        0.0
    } else {
        let se_mu = std_dev(&samples) / (samples.len() as f64).sqrt();
        mu.powf(1.0 / p - 1.0) * se_mu / p / l2
    };
    let (a, b) = khintchine_constants(p);
    let slack = MC_SIGMAS * se + 1e-12;
    let pass = ratio >= a - slack && ratio <= b + slack;

    let mut r = AuditReport::new(
        "khintchine",
        "A_p (sum |c_n|^2)^{1/2} <= (E|sum c_n r_n|^p)^{1/p} <= B_p (sum |c_n|^2)^{1/2}",
    )
    .param("p", p)
    .param("terms", coeffs.len())
    .param("mode", if exhaustive { "exhaustive" } else { "monte-carlo" })
    .param("patterns", samples.len());
    if !exhaustive {
        r.set_param("seed", seed);
    }
    r.metric("ratio", ratio);
    r.metric("ratio_se", se);
    r.metric("lower_constant", a);
    r.metric("upper_constant", b);
    r.table = Table::new(&["pattern", "moment"]);
    if exhaustive {
        for (i, m) in samples.iter().enumerate() {
            r.table.push(vec![i as f64, *m]);
        }
    }
    r.tolerance = Some(slack);
    r.verdict(ratio, b, pass);
    if !pass {
        r.note(format!("ratio {ratio:.6} outside [{a:.6}, {b:.6}] by more than {slack:.2e}"));
    }
    Ok(r)
}

/// Ratios `‖Σ_{n∈𝒩_k} r_n e^{2πi⟨·,n⟩}‖_{L^p} / |𝒩_k|^{1/2}` over `draws`
/// sign draws. Khintchine in x puts every ratio between `A_p` and `B_p`
/// up to the sampling error in v.
pub fn shell_sum_ratios(lac: &LacunaryConfig, k: usize, p: f64, draws: usize) -> Result<Vec<f64>> {
    if !lac.scales().contains(&k) {
        return Err(Error::BandOutOfRange { band: k, levels: lac.top });
    }
    let single = LacunaryConfig { k0: k, top: k, ..*lac };
    let grid = Grid::unit(lac.dim, single.output_n())?;
    (0..draws as u64)
        .map(|draw| {
            let v = RademacherMultiplier::new(&LacunaryConfig { seed: lac.seed ^ (k as u64) << 32, ..single }, draw)?;
            let shell = v.shell_signs(k);
            let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
            for (n, s) in &shell {
                spec[grid.wave_index(*n)] = Complex64::new(*s as f64, 0.0);
            }
            let f = GridFunction::from_spectrum(grid, spec)?;
            Ok(f.lp_norm(p) / (shell.len() as f64).sqrt())
        })
        .collect()
}
