//! Empirical distribution tools: ECDF, Kolmogorov distance against a law or another
//! sample, DKW radius, and W1 distances between CDFs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{self, LimitLaw};

/// Smallest count for which the DKW/KS calibrations are quoted.
pub const MIN_COUNT: usize = 100;
/// Two-sample KS coefficient at the 1% level.
pub const KS_COEFF_99: f64 = 1.628;
/// Default absolute tolerance of the W1 quadrature.
pub const W1_TOL: f64 = 1e-8;
/// Both CDFs must be this close to 0 / 1 at the integration bounds.
pub const W1_EDGE_TOL: f64 = 1e-10;

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    sorted_values: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("ECDF needs at least one value"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("ECDF values must be finite, got {v}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted_values: values })
    }

    pub fn count(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    /// #{values ≤ x} / count.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted_values.partition_point(|&v| v <= x) as f64 / self.count() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceMethod {
    KolmogorovVsLaw,
    TwoSampleKS,
    W1VsLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub method: DistanceMethod,
    pub statistic: f64,
    pub argmax: f64,
    pub dkw_radius_99: f64,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_value_99: Option<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl DistanceReport {
    pub fn with_meta(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// √(ln(2/0.01) / (2 count)).
pub fn dkw_radius_99(count: usize) -> f64 {
    ((2.0f64 / 0.01).ln() / (2.0 * count as f64)).sqrt()
}

/// 1.628 √(1/m + 1/n).
pub fn ks_critical_99(m: usize, n: usize) -> f64 {
    KS_COEFF_99 * (1.0 / m as f64 + 1.0 / n as f64).sqrt()
}

fn warn_small(count: usize) {
    if count < MIN_COUNT {
        log::warn!("sample of size {count} is below {MIN_COUNT}; the 99% calibration is not reliable");
    }
}

/// sup_x |F̂(x) − F(x)| evaluated exactly at the jump points.
pub fn kolmogorov_distance_fn<F: Fn(f64) -> f64>(ecdf: &Ecdf, cdf: F) -> DistanceReport {
    let n = ecdf.count();
    warn_small(n);
    let nf = n as f64;
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for (i, &x) in ecdf.sorted_values.iter().enumerate() {
        let f = cdf(x);
        let d = (f - i as f64 / nf).abs().max((f - (i + 1) as f64 / nf).abs());
        if d > best.0 {
            best = (d, x);
        }
    }
    DistanceReport {
        method: DistanceMethod::KolmogorovVsLaw,
        statistic: best.0,
        argmax: best.1,
        dkw_radius_99: dkw_radius_99(n),
        count: n,
        critical_value_99: None,
        metadata: BTreeMap::new(),
    }
}

pub fn kolmogorov_distance(ecdf: &Ecdf, law: &LimitLaw) -> DistanceReport {
    kolmogorov_distance_fn(ecdf, |x| limits::cdf(law, x).0).with_meta("law", law.name())
}

/// Two-sample Kolmogorov–Smirnov statistic with the 1% critical value.
pub fn two_sample_ks(a: &Ecdf, b: &Ecdf) -> DistanceReport {
    let (xa, xb) = (&a.sorted_values, &b.sorted_values);
    let (m, n) = (xa.len(), xb.len());
    warn_small(m.min(n));
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = (0.0f64, xa[0].min(xb[0]));
    while i < m || j < n {
        let v = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < m && xa[i] <= v {
            i += 1;
        }
        while j < n && xb[j] <= v {
            j += 1;
        }
        let d = (i as f64 / m as f64 - j as f64 / n as f64).abs();
        if d > best.0 {
            best = (d, v);
        }
    }
    DistanceReport {
        method: DistanceMethod::TwoSampleKS,
        statistic: best.0,
        argmax: best.1,
        dkw_radius_99: dkw_radius_99(m.min(n)),
        count: m + n,
        critical_value_99: Some(ks_critical_99(m, n)),
        metadata: BTreeMap::new(),
    }
    .with_meta("count_a", m)
    .with_meta("count_b", n)
}

/// ∫|F − G| over the bounds plus the certified tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W1Value {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    /// Bound on the integral outside [lo, hi].
    pub tail_bound: f64,
    /// Largest |F − G| seen and where.
    pub max_gap: f64,
    pub argmax: f64,
    pub evaluations: usize,
}

const SIMPSON_PANELS: usize = 128;
const SIMPSON_MAX_DEPTH: u32 = 40;
const TAIL_PROBE: f64 = 0.5;
const MAX_TAIL_BOUND: f64 = 1e-8;

fn simpson_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    (a, b): (f64, f64),
    (fa, fm, fb): (f64, f64, f64),
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (flm, frm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, (a, m), (fa, flm, fm), left, tol / 2.0, depth - 1)
        + simpson_step(f, (m, b), (fm, frm, fb), right, tol / 2.0, depth - 1)
}

/// ∫_lo^hi f by adaptive Simpson over 128 equal panels, each with its share of `tol`.
/// Returns the value and the number of evaluations; fails if f produced NaN.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, usize)> {
    if !(lo < hi && lo.is_finite() && hi.is_finite()) || !(tol > 0.0) {
        return Err(Error::domain(format!("invalid integration range [{lo}, {hi}] or tolerance {tol}")));
    }
    let mut evals = 0usize;
    let mut bad = None;
    let mut g = |x: f64| {
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            bad.get_or_insert(x);
            0.0
        } else {
            v
        }
    };
    let width = (hi - lo) / SIMPSON_PANELS as f64;
    let panel_tol = tol / SIMPSON_PANELS as f64;
    let mut total = 0.0;
    let mut fa = g(lo);
    for p in 0..SIMPSON_PANELS {
        let a = lo + p as f64 * width;
        let b = if p + 1 == SIMPSON_PANELS { hi } else { a + width };
        let (fm, fb) = (g(0.5 * (a + b)), g(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_step(&mut g, (a, b), (fa, fm, fb), whole, panel_tol, SIMPSON_MAX_DEPTH);
        fa = fb;
    }
    if let Some(x) = bad {
        return Err(Error::Numerical(format!("integrand is NaN at x = {x}")));
    }
    Ok((total, evals))
}

/// Tail mass bound m(x₀)/r for a tail profile m decaying at log-rate at least r beyond x₀.
fn tail_mass(at_edge: f64, inside: f64) -> f64 {
    if at_edge <= 0.0 {
        return 0.0;
    }
    let rate = (inside / at_edge).ln() / TAIL_PROBE;
    if rate > 0.0 {
        at_edge / rate
    } else {
        f64::INFINITY
    }
}

/// W1 = ∫|F − G| dx on [lo, hi] by adaptive Simpson to `tol`, plus a tail certificate.
/// Both CDFs must be within 1e-10 of 0 at `lo` and of 1 at `hi`.
pub fn w1_between(
    f: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    bounds: (f64, f64),
    tol: f64,
) -> Result<W1Value> {
    let (lo, hi) = bounds;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) || !(tol > 0.0) {
        return Err(Error::domain(format!("invalid W1 bounds {bounds:?} or tolerance {tol}")));
    }
    let left = f(lo).max(g(lo));
    let right = (1.0 - f(hi)).max(1.0 - g(hi));
    if !(left <= W1_EDGE_TOL && right <= W1_EDGE_TOL) {
        return Err(Error::domain(format!(
            "W1 bounds {bounds:?} too narrow: left mass {left:e}, right mass {right:e}"
        )));
    }
    let left_in = f(lo + TAIL_PROBE).max(g(lo + TAIL_PROBE));
    let right_in = (1.0 - f(hi - TAIL_PROBE)).max(1.0 - g(hi - TAIL_PROBE));
    let tail_bound = tail_mass(left, left_in) + tail_mass(right, right_in);
    if !(tail_bound <= MAX_TAIL_BOUND) {
        return Err(Error::domain(format!("W1 tail remainder {tail_bound:e} cannot be certified below {MAX_TAIL_BOUND:e}")));
    }

    let mut max_gap = (0.0, lo);
    let (total, evaluations) = adaptive_simpson(
        |x| {
            let d = (f(x) - g(x)).abs();
            if d > max_gap.0 {
                max_gap = (d, x);
            }
            d
        },
        lo,
        hi,
        tol,
    )?;
    Ok(W1Value {
        value: total,
        lo,
        hi,
        tail_bound,
        max_gap: max_gap.0,
        argmax: max_gap.1,
        evaluations,
    })
}

/// Chooses bounds by widening `start` until both tails are below 1e-10, then integrates.
pub fn w1_auto(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, start: (f64, f64), tol: f64) -> Result<W1Value> {
    let (mut lo, mut hi) = start;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain(format!("invalid starting bounds {start:?}")));
    }
    for _ in 0..64 {
        let step = 0.5 * (hi - lo);
        let left = f(lo).max(g(lo));
        let right = (1.0 - f(hi)).max(1.0 - g(hi));
        let left_ok = left <= W1_EDGE_TOL && {
            let inside = f(lo + TAIL_PROBE).max(g(lo + TAIL_PROBE));
            tail_mass(left, inside) <= MAX_TAIL_BOUND / 2.0
        };
        let right_ok = right <= W1_EDGE_TOL && {
            let inside = (1.0 - f(hi - TAIL_PROBE)).max(1.0 - g(hi - TAIL_PROBE));
            tail_mass(right, inside) <= MAX_TAIL_BOUND / 2.0
        };
        if left_ok && right_ok {
            return w1_between(f, g, (lo, hi), tol);
        }
        if !left_ok {
            lo -= step;
        }
        if !right_ok {
            hi += step;
        }
    }
    Err(Error::domain(format!("could not find W1 bounds with negligible tails starting from {start:?}")))
}

/// W1 between a CDF and a limit law as a report. `bounds = None` chooses them automatically.
pub fn w1_distance(cdf: &dyn Fn(f64) -> f64, law: &LimitLaw, bounds: Option<(f64, f64)>) -> Result<DistanceReport> {
    law.validate()?;
    let g = |x: f64| limits::cdf(law, x).0;
    let v = match bounds {
        Some(b) => w1_between(cdf, &g, b, W1_TOL)?,
        None => w1_auto(cdf, &g, (-8.0, 14.0), W1_TOL)?,
    };
    Ok(DistanceReport {
        method: DistanceMethod::W1VsLaw,
        statistic: v.value,
        argmax: v.argmax,
        dkw_radius_99: 0.0,
        count: 0,
        critical_value_99: None,
        metadata: BTreeMap::new(),
    }
    .with_meta("law", law.name())
    .with_meta("lo", v.lo)
    .with_meta("hi", v.hi)
    .with_meta("tail_bound", v.tail_bound)
    .with_meta("evaluations", v.evaluations))
}
