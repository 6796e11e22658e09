//! Explicit exponential bounds on the tail probabilities c_n(m, x) and on Gaussian-type
//! tail sums, used both as checkable claims and as truncation certificates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scaling::ScalingConstants;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChernoffBranch {
    /// m ≥ 1: exp(−m²/(16α_n) − m(a_n + b_n x)/(4√α_n)).
    PositiveM,
    /// m = 0, x > 0: exp(−(a_n + b_n x)²/4).
    MZeroUpper,
    /// m = 0, a_n + b_n x < 0: bound on 1 − c_n(0, x), exp(−(a_n + b_n x)²/3).
    MZeroLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffBound {
    pub m: u64,
    pub x: f64,
    pub bound: f64,
    pub branch: ChernoffBranch,
}

/// Upper bound on c_n(m, x). Uses the `PositiveM` branch for m ≥ 1 and `MZeroUpper`
/// for m = 0, which needs x > 0.
pub fn chernoff_cn(m: u64, x: f64, sc: &ScalingConstants<f64>) -> Result<ChernoffBound> {
    let u0 = sc.affine(x);
    let (bound, branch) = if m >= 1 {
        let mf = m as f64;
        let e = -mf * mf / (16.0 * sc.alpha_n) - mf * u0 / (4.0 * sc.alpha_n.sqrt());
        (e.exp(), ChernoffBranch::PositiveM)
    } else {
        if !(x > 0.0) {
            return Err(Error::domain(format!("m = 0 upper bound needs x > 0, got {x}")));
        }
        ((-u0 * u0 / 4.0).exp(), ChernoffBranch::MZeroUpper)
    };
    Ok(ChernoffBound { m, x, bound: bound.clamp(0.0, 1.0), branch })
}

/// Upper bound on 1 − c_n(0, x), valid when a_n + b_n x < 0.
pub fn chernoff_lower_cn0(x: f64, sc: &ScalingConstants<f64>) -> Result<f64> {
    let u0 = sc.affine(x);
    if !(u0 < 0.0) {
        return Err(Error::domain(format!("lower bound needs a_n + b_n x < 0, got {u0}")));
    }
    Ok((-u0 * u0 / 3.0).exp().clamp(0.0, 1.0))
}

/// Sum of the `PositiveM` Chernoff bounds over m ≥ `from`. The exponent is a concave
/// quadratic in m, so the sum is bounded by the first term plus the Gaussian integral.
pub fn chernoff_tail_sum(from: u64, x: f64, sc: &ScalingConstants<f64>) -> f64 {
    let from = from.max(1);
    let s = 1.0 / (16.0 * sc.alpha_n);
    let r = sc.affine(x) / (4.0 * sc.alpha_n.sqrt());
    // exponent −(s m² + r m) = −s (m + r/(2s))² + r²/(4s)
    let shift = r / (2.0 * s);
    let peak = -shift;
    let mf = from as f64;
    if mf < peak {
        // still climbing; no useful certificate
        return f64::INFINITY;
    }
    let first = (-(s * mf * mf + r * mf)).exp();
    let z = (mf + shift) * (2.0 * s).sqrt();
    let integral = (r * r / (4.0 * s) + crate::specfun::log_upper_tail(z)).exp() * (std::f64::consts::PI / s).sqrt();
    first + integral
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailRegime {
    LargeGamma,
    BoundedGamma,
}

/// Threshold on ς(L, x) standing in for "1 ≪ ς".
pub const VARSIGMA_MIN: f64 = 2.0;
/// Threshold on γ separating the two regimes.
pub const LARGE_GAMMA_MIN: f64 = 10.0;
const LARGE_GAMMA_CUSHION: f64 = 1.5;
const BOUNDED_GAMMA_CUSHION: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricTail {
    /// Upper bound on Σ_{m≥L} ς(m,x)^{-1} e^{−c ς(m,x)²}.
    pub bound: f64,
    /// The cushioned closed form alone.
    pub lemma_form: f64,
    pub regime: TailRegime,
    pub varsigma: f64,
}

/// Bound on Σ_{m≥L} ς(m,x)^{-1} exp(−c ς(m,x)²) with ς(m,x) = m/γ + a + b x.
///
/// The returned `bound` is the larger of the cushioned closed form and the integral
/// comparison e^{−cς²}(1/ς + γ/(2cς²)), which holds for every admissible input.
pub fn geometric_tail_sum(l: u64, x: f64, c: f64, gamma: f64, a: f64, b: f64) -> Result<GeometricTail> {
    if !(c > 0.0 && gamma > 0.0) || !c.is_finite() || !gamma.is_finite() {
        return Err(Error::domain(format!("need c > 0 and gamma > 0, got c={c}, gamma={gamma}")));
    }
    let vs = l as f64 / gamma + a + b * x;
    if !(vs >= VARSIGMA_MIN) {
        return Err(Error::domain(format!("varsigma(L, x) = {vs} is below {VARSIGMA_MIN}")));
    }
    let g = (-c * vs * vs).exp();
    let (lemma_form, regime) = if gamma >= LARGE_GAMMA_MIN {
        (LARGE_GAMMA_CUSHION * gamma * g / (2.0 * c * vs * vs), TailRegime::LargeGamma)
    } else {
        (BOUNDED_GAMMA_CUSHION * g / vs, TailRegime::BoundedGamma)
    };
    let integral = g * (1.0 / vs + gamma / (2.0 * c * vs * vs));
    Ok(GeometricTail { bound: lemma_form.max(integral), lemma_form, regime, varsigma: vs })
}
