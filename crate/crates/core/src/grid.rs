//! Numeric policy for suprema over x: a coarse scan followed by golden-section refinement
//! around the largest coarse values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    pub x_lo: f64,
    pub x_hi: f64,
    pub coarse_step: f64,
    pub refine_width: f64,
    pub m_truncation_tol: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy { x_lo: -8.0, x_hi: 14.0, coarse_step: 0.01, refine_width: 1e-6, m_truncation_tol: 1e-14 }
    }
}

impl GridPolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = self.x_lo.is_finite()
            && self.x_hi.is_finite()
            && self.x_lo < self.x_hi
            && self.coarse_step > 0.0
            && self.refine_width > 0.0
            && self.m_truncation_tol > 0.0;
        if !ok {
            return Err(Error::domain(format!("invalid grid policy {self:?}")));
        }
        Ok(())
    }

    /// Coarse grid points x_lo, x_lo + step, …, up to and including x_hi (within rounding).
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.x_hi - self.x_lo) / self.coarse_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.x_lo + i as f64 * self.coarse_step).collect()
    }
}

/// Number of coarse maxima that are refined.
const REFINED_PEAKS: usize = 3;

/// Maximum of `f` over the policy range with its maximizer. Ties go to the smaller x.
pub fn maximize<F>(f: F, policy: &GridPolicy) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64 + Sync,
{
    policy.validate()?;
    let xs = policy.points();
    let vals: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect();
    if let Some(i) = vals.iter().position(|v| v.is_nan()) {
        return Err(Error::Numerical(format!("objective is NaN at x = {}", xs[i])));
    }

    // local maxima of the coarse profile, best first
    let mut peaks: Vec<usize> = (0..xs.len())
        .filter(|&i| {
            let left = i == 0 || vals[i] >= vals[i - 1];
            let right = i + 1 == xs.len() || vals[i] >= vals[i + 1];
            left && right
        })
        .collect();
    peaks.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]).then(i.cmp(&j)));
    peaks.truncate(REFINED_PEAKS);

    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    let mut consider = |v: f64, x: f64| {
        if v > best.0 || (v == best.0 && x < best.1) {
            best = (v, x);
        }
    };
    for (i, &v) in vals.iter().enumerate() {
        consider(v, xs[i]);
    }
    for &i in &peaks {
        let lo = (xs[i] - policy.coarse_step).max(policy.x_lo);
        let hi = (xs[i] + policy.coarse_step).min(policy.x_hi);
        let (x, v) = golden_max(&f, lo, hi, policy.refine_width);
        consider(v, x);
    }
    Ok(best)
}

/// Golden-section search for a maximum of a unimodal function on [lo, hi].
pub fn golden_max<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, width: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > width {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
