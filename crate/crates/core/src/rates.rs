//! Theoretical Berry–Esseen and W1 rates per regime, the closed-form Gaussian-weighted
//! supremum, the finite-α series suprema and their simple upper bounds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::empirics::adaptive_simpson;
pub use crate::grid::GridPolicy;
use crate::error::{Error, Result};
use crate::grid::maximize;
use crate::limits::log_cdf_phi_alpha;
use crate::scaling::{a_of, b_of, c1_of, c2_of, constants_for, q1_at, Ensemble, RegimeDecl};
use crate::specfun::{norm_cdf, norm_pdf, norm_pdf_over_cdf};

/// Gate for the normal side of the transition rate.
pub const TO_NORMAL_MAX_ALPHA: f64 = 0.01;
/// Gate for the Gumbel side of the transition rate.
pub const TO_GUMBEL_MIN_ALPHA: f64 = 100.0;
/// Absolute tolerance of the finite-α W1 integral.
pub const W1_RATE_TOL: f64 = 1e-8;
/// Cushion on the geometric tail estimate of the finite-α series.
const SERIES_CUSHION: f64 = 2.0;
const SERIES_MIN_V: f64 = 2.0;
const SERIES_MAX_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    BerryEsseen,
    W1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub regime: RegimeDecl,
    pub metric: Metric,
    pub theoretical: f64,
    #[serde(with = "crate::serde_ext::map")]
    pub components: BTreeMap<String, f64>,
}

impl RateReport {
    fn new(regime: RegimeDecl, metric: Metric, theoretical: f64) -> Self {
        RateReport { regime, metric, theoretical, components: BTreeMap::new() }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.components.insert(key.to_string(), v);
        self
    }

    pub fn component(&self, key: &str) -> Option<f64> {
        self.components.get(key).copied()
    }
}

/// sup_x |h1 − h2 x| φ(x) in closed form.
pub fn gaussian_weighted_sup(h1: f64, h2: f64) -> Result<f64> {
    if !(h1 >= 0.0 && h2 >= 0.0 && h1.is_finite() && h2.is_finite()) {
        return Err(Error::domain(format!("need finite h1, h2 >= 0, got ({h1}, {h2})")));
    }
    if h1 == 0.0 && h2 == 0.0 {
        return Err(Error::domain("h1 and h2 are both zero"));
    }
    let r = (h1 * h1 + 4.0 * h2 * h2).sqrt();
    let s = h1 + r;
    Ok(s / (2.0 * std::f64::consts::TAU.sqrt()) * (h1 / s - 0.5).exp())
}

/// (log log a)² / (2e log a).
fn gumbel_be(a: f64) -> f64 {
    let l = a.ln();
    let ll = l.ln();
    ll * ll / (2.0 * std::f64::consts::E * l)
}

/// Summand weights of the finite-α series Σ_m (φ/Φ)(v_m)(w1 q1(m,x) + w2 q2(m,x)).
#[derive(Debug, Clone, Copy)]
pub struct FiniteSeries {
    pub alpha: f64,
    pub w1: f64,
    pub w2: f64,
    sqrt_alpha: f64,
    a: f64,
    b: f64,
    c1: f64,
    c2: f64,
}

/// Value of the truncated series with its certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub sum: f64,
    pub terms_used: u64,
    pub tail_bound: f64,
}

impl FiniteSeries {
    pub fn new(alpha: f64, w1: f64, w2: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !w1.is_finite() || !w2.is_finite() {
            return Err(Error::domain(format!("need alpha > 0 and finite weights, got alpha={alpha}")));
        }
        Ok(FiniteSeries {
            alpha,
            w1,
            w2,
            sqrt_alpha: alpha.sqrt(),
            a: a_of(alpha),
            b: b_of(alpha),
            c1: c1_of(alpha),
            c2: c2_of(alpha),
        })
    }

    fn v(&self, m: u64, x: f64) -> f64 {
        m as f64 / self.sqrt_alpha + self.a + self.b * x
    }

    fn q2(&self, m: u64, x: f64) -> f64 {
        self.c1 - self.c2 * x - m as f64 / (2.0 * self.alpha * self.sqrt_alpha)
    }

    /// Term-wise majorant: monomials of q1, q2 in absolute value.
    fn majorant(&self, m: u64, x: f64) -> f64 {
        let v = self.v(m, x);
        let mf = m as f64;
        let q1 = (2.0 * self.alpha * (v * v + 1.0)
            + 3.0 * self.sqrt_alpha * (2.0 * mf + 1.0) * v.abs()
            + 6.0 * mf * (mf + 1.0))
            / (12.0 * self.sqrt_alpha);
        let q2 = self.c1.abs() + (self.c2 * x).abs() + mf / (2.0 * self.alpha * self.sqrt_alpha);
        norm_pdf_over_cdf(v) * (self.w1.abs() * q1 + self.w2.abs() * q2)
    }

    pub fn term(&self, m: u64, x: f64) -> f64 {
        let v = self.v(m, x);
        norm_pdf_over_cdf(v) * (self.w1 * q1_at(self.alpha, m, v) + self.w2 * self.q2(m, x))
    }

    /// Sums terms until the geometric bound 2 h(M) ρ/(1 − ρ) on the majorant tail,
    /// ρ = h(M)/h(M−1), is below `tol`.
    pub fn eval(&self, x: f64, tol: f64) -> SeriesValue {
        let mut sum = self.term(0, x);
        let mut prev = self.majorant(0, x);
        let mut m = 1u64;
        loop {
            let h = self.majorant(m, x);
            if self.v(m, x) >= SERIES_MIN_V && prev > 0.0 {
                let rho = h / prev;
                if rho <= SERIES_MAX_RATIO {
                    let tail = SERIES_CUSHION * h * rho / (1.0 - rho) + h;
                    if tail <= tol || h == 0.0 {
                        return SeriesValue { sum, terms_used: m, tail_bound: tail };
                    }
                }
            }
            sum += self.term(m, x);
            prev = h;
            m += 1;
        }
    }

    /// Φ_α(x) |Σ …|.
    pub fn weighted(&self, x: f64, tol: f64) -> (f64, SeriesValue) {
        let s = self.eval(x, tol);
        let log_phi = log_cdf_phi_alpha(self.alpha, x).0;
        (log_phi.exp() * s.sum.abs(), s)
    }

    /// sup_x Φ_α(x)|Σ …| over the grid and its argmax.
    pub fn sup(&self, grid: &GridPolicy) -> Result<(f64, f64)> {
        let tol = grid.m_truncation_tol;
        maximize(|x| self.weighted(x, tol).0, grid)
    }

    /// ∫ Φ_α(x)|Σ …| dx over the grid range.
    pub fn integral(&self, grid: &GridPolicy, tol: f64) -> Result<f64> {
        grid.validate()?;
        let mt = grid.m_truncation_tol;
        for edge in [grid.x_lo, grid.x_hi] {
            let v = self.weighted(edge, mt).0;
            if v > tol {
                log::warn!("finite-alpha integrand is {v:e} at the range edge {edge}");
            }
        }
        Ok(adaptive_simpson(|x| self.weighted(x, mt).0, grid.x_lo, grid.x_hi, tol)?.0)
    }
}

fn eta_case(eta: f64) -> f64 {
    if eta == 0.0 {
        0.0
    } else if eta.is_finite() {
        1.0
    } else {
        2.0
    }
}

/// Berry–Esseen rate of the declared regime.
pub fn be_rate(e: &Ensemble, decl: &RegimeDecl, grid: &GridPolicy) -> Result<RateReport> {
    decl.check_consistent(e)?;
    grid.validate()?;
    let sc = constants_for::<f64>(e, decl)?;
    let n = e.n as f64;
    match *decl {
        RegimeDecl::AlphaZero { beta } => {
            let h1 = sc.alpha_n.sqrt();
            let h2 = 1.0 / (4.0 * n);
            let v = gaussian_weighted_sup(h1, h2)?;
            // β = 0: h1 negligible; β finite: √α_n = √β_n / n; β = ∞: h2 negligible
            let (case, closed) = if beta == 0.0 {
                (0.0, 1.0 / (4.0 * (std::f64::consts::TAU * std::f64::consts::E).sqrt() * n))
            } else if beta.is_finite() {
                (1.0, gaussian_weighted_sup(beta.sqrt(), 0.25)? / n)
            } else {
                (2.0, h1 / std::f64::consts::TAU.sqrt())
            };
            let r = RateReport::new(*decl, Metric::BerryEsseen, v)
                .with("beta", beta)
                .with("beta_n", e.beta_n())
                .with("h1", h1)
                .with("h2", h2)
                .with("beta_case", case)
                .with("beta_case_closed_form", closed)
                .with("sup_argmax", zero_argmax(h1, h2));
            Ok(r)
        }
        RegimeDecl::AlphaFinite { alpha, eta } => {
            let series = FiniteSeries::new(alpha, 1.0 / n, sc.alpha_n - alpha)?;
            let (v, x) = series.sup(grid)?;
            let at = series.eval(x, grid.m_truncation_tol);
            Ok(RateReport::new(*decl, Metric::BerryEsseen, v)
                .with("alpha", alpha)
                .with("eta", eta)
                .with("eta_n", n * (sc.alpha_n - alpha))
                .with("eta_case", eta_case(eta))
                .with("sup_value", v)
                .with("sup_argmax", x)
                .with("series_terms_used", at.terms_used as f64)
                .with("series_tail_bound", at.tail_bound))
        }
        RegimeDecl::AlphaInfinite => {
            let l = sc.alpha_n.ln();
            Ok(RateReport::new(*decl, Metric::BerryEsseen, gumbel_be(sc.alpha_n))
                .with("alpha_n", sc.alpha_n)
                .with("log_alpha_n", l)
                .with("loglog_alpha_n", l.ln()))
        }
    }
}

/// Maximizer of |h1 − h2 x| φ(x): x = (h1 − √(h1² + 4h2²))/(2h2).
fn zero_argmax(h1: f64, h2: f64) -> f64 {
    if h2 == 0.0 {
        0.0
    } else {
        (h1 - (h1 * h1 + 4.0 * h2 * h2).sqrt()) / (2.0 * h2)
    }
}

/// W1 rate of the declared regime.
pub fn w1_rate(e: &Ensemble, decl: &RegimeDecl, grid: &GridPolicy) -> Result<RateReport> {
    decl.check_consistent(e)?;
    grid.validate()?;
    let sc = constants_for::<f64>(e, decl)?;
    let n = e.n as f64;
    match *decl {
        RegimeDecl::AlphaZero { beta } => {
            let s = sc.alpha_n.sqrt();
            let z = 4.0 * n * s;
            let v = s * (2.0 * norm_cdf(z) - 1.0) + norm_pdf(z) / (2.0 * n);
            Ok(RateReport::new(*decl, Metric::W1, v).with("beta", beta).with("sqrt_alpha_n", s).with("z", z))
        }
        RegimeDecl::AlphaFinite { alpha, eta } => {
            let series = FiniteSeries::new(alpha, 1.0 / n, sc.alpha_n - alpha)?;
            let v = series.integral(grid, W1_RATE_TOL)?;
            Ok(RateReport::new(*decl, Metric::W1, v)
                .with("alpha", alpha)
                .with("eta", eta)
                .with("eta_n", n * (sc.alpha_n - alpha))
                .with("eta_case", eta_case(eta))
                .with("x_lo", grid.x_lo)
                .with("x_hi", grid.x_hi))
        }
        RegimeDecl::AlphaInfinite => {
            let l = sc.alpha_n.ln();
            let v = std::f64::consts::E * gumbel_be(sc.alpha_n);
            Ok(RateReport::new(*decl, Metric::W1, v).with("log_alpha_n", l).with("loglog_alpha_n", l.ln()))
        }
    }
}

/// Closed-form upper bounds on sup_x Φ_α|Σ q_i φ/Φ| for i = 1, 2.
pub fn remark4_upper_bounds(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("alpha must be positive and finite, got {alpha}")));
    }
    let sa = alpha.sqrt();
    let bound_q1 = 4.0 / 3.0 * (alpha + sa + 1.0);
    let bound_q2 = 2.0 / (std::f64::consts::E * std::f64::consts::LN_2)
        * (c1_of(alpha) + c2_of(alpha) * (alpha - 1.0) / b_of(alpha) + 1.0 / alpha)
        * (1.0 + sa);
    Ok((bound_q1, bound_q2))
}

/// Numerically evaluated sup_x Φ_α|Σ q_i φ/Φ| for i = 1 and i = 2, with argmaxes.
pub fn remark4_sups(alpha: f64, grid: &GridPolicy) -> Result<((f64, f64), (f64, f64))> {
    let s1 = FiniteSeries::new(alpha, 1.0, 0.0)?.sup(grid)?;
    let s2 = FiniteSeries::new(alpha, 0.0, 1.0)?.sup(grid)?;
    Ok((s1, s2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionSide {
    ToNormal,
    ToGumbel,
}

/// Distance of Φ_α to its normal (small α) or Gumbel (large α) endpoint.
pub fn transition_rate(alpha: f64, side: TransitionSide) -> Result<f64> {
    match side {
        TransitionSide::ToNormal => {
            if !(alpha > 0.0 && alpha <= TO_NORMAL_MAX_ALPHA) {
                return Err(Error::domain(format!("normal transition needs 0 < alpha <= {TO_NORMAL_MAX_ALPHA}, got {alpha}")));
            }
            Ok((alpha / std::f64::consts::TAU).sqrt())
        }
        TransitionSide::ToGumbel => {
            if !(alpha >= TO_GUMBEL_MIN_ALPHA && alpha.is_finite()) {
                return Err(Error::domain(format!("Gumbel transition needs alpha >= {TO_GUMBEL_MIN_ALPHA}, got {alpha}")));
            }
            Ok(gumbel_be(alpha))
        }
    }
}
