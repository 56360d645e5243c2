//! Rounding a fractional per-round budget to an integer one without losing
//! interpolated value.
//!
//! `OPT_t(x)` at fractional `x` interpolates linearly between the integer
//! neighbours. Moving mass `β` from one fractional round to another changes
//! the interpolated objective linearly as long as both stay inside their unit
//! cells, so the better endpoint of the feasible `β` interval is at least as
//! good as the start, and it makes one more round integral.

use serde::Serialize;

use crate::error::{Error, Result};

/// Values this close to an integer are treated as integral.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rounding {
    pub budget: Vec<usize>,
    pub iterations: usize,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// `frac · opt[⌈x⌉] + (1 - frac) · opt[⌊x⌋]`.
pub fn interpolate(opt: &[f64], x: f64) -> f64 {
    let lo = x.floor();
    let frac = x - lo;
    let lo = lo as usize;
    if frac == 0.0 {
        opt[lo]
    } else {
        frac * opt[lo + 1] + (1.0 - frac) * opt[lo]
    }
}

pub fn interpolated_objective(opt: &[Vec<f64>], d: &[f64]) -> f64 {
    opt.iter().zip(d).map(|(o, &x)| interpolate(o, x)).sum()
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= INTEGRALITY_TOLERANCE {
        r
    } else {
        x
    }
}

fn is_fractional(x: f64) -> bool {
    x.fract() != 0.0
}

/// Round `d` (non-negative, summing to an integer) to an integer vector whose
/// objective `Σ_t opt[t][b_t]` is at least the interpolated objective of `d`.
pub fn round_fractional_budget(d: &[f64], opt: &[Vec<f64>]) -> Result<Rounding> {
    if d.len() != opt.len() {
        return Err(Error::arg(format!("{} budget entries for {} tables", d.len(), opt.len())));
    }
    if let Some(x) = d.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::arg(format!("budget entry {x} must be finite and >= 0")));
    }
    let total: f64 = d.iter().sum();
    if (total - total.round()).abs() > INTEGRALITY_TOLERANCE {
        return Err(Error::arg(format!("fractional budget sums to {total}, not an integer")));
    }
    for (t, (o, &x)) in opt.iter().zip(d).enumerate() {
        if o.len() < snap(x).ceil() as usize + 1 {
            return Err(Error::arg(format!("table of round {} does not cover {}", t + 1, x.ceil())));
        }
    }
    let mut cur: Vec<f64> = d.iter().map(|&x| snap(x)).collect();
    let objective_before = interpolated_objective(opt, &cur);
    let mut iterations = 0;
    loop {
        let frac: Vec<usize> = (0..cur.len()).filter(|&t| is_fractional(cur[t])).collect();
        match frac.len() {
            0 => break,
            1 => {
                // Only possible through accumulated rounding error.
                let t = frac[0];
                cur[t] = cur[t].round();
                break;
            }
            _ => {}
        }
        let (a, b) = (frac[0], frac[1]);
        let (fa, fb) = (cur[a].fract(), cur[b].fract());
        // cur[a] += beta, cur[b] -= beta, both staying in their cells.
        let lo = -fa.min(1.0 - fb);
        let hi = (1.0 - fa).min(fb);
        let slope_a = opt[a][cur[a].ceil() as usize] - opt[a][cur[a].floor() as usize];
        let slope_b = opt[b][cur[b].ceil() as usize] - opt[b][cur[b].floor() as usize];
        let beta = if slope_a - slope_b >= 0.0 { hi } else { lo };
        cur[a] = snap(cur[a] + beta);
        cur[b] = snap(cur[b] - beta);
        // The endpoint makes at least one of the pair integral.
        if is_fractional(cur[a]) && is_fractional(cur[b]) {
            if (beta - hi).abs() < (beta - lo).abs() {
                cur[a] = cur[a].round();
            } else {
                cur[b] = cur[b].round();
            }
        }
        iterations += 1;
    }
    let budget: Vec<usize> = cur.iter().map(|&x| x as usize).collect();
    let objective_after = budget.iter().zip(opt).map(|(&b, o)| o[b]).sum();
    Ok(Rounding { budget, iterations, objective_before, objective_after })
}
