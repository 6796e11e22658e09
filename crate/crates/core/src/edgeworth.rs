//! Approximations of c_n(m, x) = P(log Y_{n−m} > kψ(n) + (a_n + b_n x)/√α_n), where
//! log Y_j is a sum of k independent copies of log Gamma(j, 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scaling::{q1_at, u_n, v_alpha, Ensemble, RegimeDecl, ScalingConstants, INFINITE_REGIME_MIN_ALPHA_N};
use crate::specfun::{log_gamma, mills_upper_tail, norm_cdf, norm_pdf, polygamma, reg_gamma_q, digamma};

/// Smallest u_n(m, x) at which the α = ∞ tail asymptotic is used.
pub const INFINITE_APPROX_MIN_U: f64 = 1.5;

/// Cumulant summary of log S with S ~ Gamma(j, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGammaCumulants {
    pub j: u64,
    /// ψ(j).
    pub mu: f64,
    /// ψ'(j).
    pub sigma2: f64,
    /// ψ''(j) / (6 ψ'(j)^{3/2}).
    pub gamma1: f64,
    /// ψ'''(j) / (24 ψ'(j)²).
    pub gamma2: f64,
}

pub fn cumulants(j: u64) -> Result<LogGammaCumulants> {
    if j == 0 {
        return Err(Error::domain("shape j must be >= 1"));
    }
    let z = j as f64;
    let sigma2 = polygamma(1, z)?;
    Ok(LogGammaCumulants {
        j,
        mu: digamma(z)?,
        sigma2,
        gamma1: polygamma(2, z)? / (6.0 * sigma2 * sigma2.sqrt()),
        gamma2: polygamma(3, z)? / (24.0 * sigma2 * sigma2),
    })
}

/// E[S^λ] = E[e^{λ log S}] = Γ(j+λ)/Γ(j) for S ~ Gamma(j, 1), λ > −j.
pub fn mgf_log_gamma(j: u64, lambda: f64) -> Result<f64> {
    let z = j as f64;
    if !(z + lambda > 0.0) {
        return Err(Error::domain(format!("mgf needs j + lambda > 0, got j={j}, lambda={lambda}")));
    }
    Ok((log_gamma(z + lambda)? - log_gamma(z)?).exp())
}

/// Value of an approximation after clipping to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Approximation {
    pub value: f64,
    /// True when the raw expansion fell outside [0, 1].
    pub clipped: bool,
}

impl Approximation {
    fn clip(raw: f64) -> Self {
        let value = raw.clamp(0.0, 1.0);
        Approximation { value, clipped: value != raw }
    }
}

/// One-term Edgeworth expansion of P((log Y_j − kψ(j))/√(kψ'(j)) ≤ x) for a sum of k
/// copies of log Gamma(j): Φ(x) + γ1(j)(1 − x²)φ(x)/√k.
pub fn edgeworth_cdf(j: u64, k: u64, x: f64) -> Result<Approximation> {
    if k < 2 {
        return Err(Error::domain(format!("edgeworth expansion needs k >= 2, got {k}")));
    }
    if x.abs() > (j as f64).powf(1.0 / 6.0) {
        log::warn!("edgeworth_cdf: |x| = {} beyond j^(1/6) for j = {j}", x.abs());
    }
    let c = cumulants(j)?;
    Ok(Approximation::clip(norm_cdf(x) + c.gamma1 * (1.0 - x * x) * norm_pdf(x) / (k as f64).sqrt()))
}

/// A tail-probability query c_n(m, x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnQuery {
    pub e: Ensemble,
    pub m: u64,
    pub x: f64,
    /// kψ(n) + (a_n + b_n x)/√α_n.
    pub threshold: f64,
}

impl CnQuery {
    pub fn new(sc: &ScalingConstants<f64>, m: u64, x: f64) -> Result<Self> {
        let e = sc.ensemble;
        if m >= e.n {
            return Err(Error::domain(format!("need m <= n - 1, got m={m}, n={}", e.n)));
        }
        Ok(CnQuery { e, m, x, threshold: sc.threshold(x) })
    }
}

/// Exact c_n(m, x) for k = 1: Q(n − m, e^{threshold}).
pub fn exact_cn_k1(q: &CnQuery) -> Result<f64> {
    if q.e.k != 1 {
        return Err(Error::domain(format!("exact evaluation needs k = 1, got k={}", q.e.k)));
    }
    let y = q.threshold.exp();
    if y.is_infinite() {
        return Ok(0.0);
    }
    reg_gamma_q((q.e.n - q.m) as f64, y)
}

/// α = ∞ asymptotic c_n(m, x) ≈ φ(u)/u with u = u_n(m, x) ≥ 1.5.
pub fn approx_cn_infinite(q: &CnQuery, sc: &ScalingConstants<f64>) -> Result<Approximation> {
    let u = u_n(q.m, q.x, sc);
    if !(u >= INFINITE_APPROX_MIN_U) {
        return Err(Error::domain(format!("u_n(m, x) = {u} is below {INFINITE_APPROX_MIN_U}")));
    }
    Ok(Approximation::clip(norm_pdf(u) / u))
}

/// Finite-α expansion 1 − Φ(v) − φ(v)(q1/n + (α_n − α) q2) with v = v_α(m, x).
pub fn approx_cn_finite(q: &CnQuery, sc: &ScalingConstants<f64>) -> Result<Approximation> {
    let alpha = sc.alpha()?;
    let v = v_alpha(q.m, q.x, sc)?;
    let q1 = q1_at(alpha, q.m, v);
    let q2 = crate::scaling::q2(q.m, q.x, sc)?;
    let corr = q1 / q.e.n as f64 + (sc.alpha_n - alpha) * q2;
    Ok(Approximation::clip(mills_upper_tail(v) - norm_pdf(v) * corr))
}

/// α = 0 expansion of c_n(0, x): 1 − Φ(x) − (√α_n − x/(4n)) φ(x).
pub fn approx_cn_zero(q: &CnQuery, sc: &ScalingConstants<f64>) -> Result<Approximation> {
    if q.m != 0 {
        return Err(Error::domain(format!("alpha = 0 expansion is for m = 0 only, got m={}", q.m)));
    }
    if !matches!(sc.regime, RegimeDecl::AlphaZero { .. }) {
        return Err(Error::domain(format!("needs an alpha_zero regime, declared {}", sc.regime.name())));
    }
    let n = q.e.n as f64;
    Ok(Approximation::clip(mills_upper_tail(q.x) - (sc.alpha_n.sqrt() - q.x / (4.0 * n)) * norm_pdf(q.x)))
}

/// Leading α = ∞ approximation β_n(x) of ln P(X_n ≤ x):
/// −exp(−x − (x − ℓ₂)²/(2L)) / (1 + (x − ℓ₂)/L)², L = log(α_n + e),
/// ℓ₂ = log(√(2π) log(α_n + e^{1/√(2π)})).
pub fn log_cdf_approx_infinite(x: f64, sc: &ScalingConstants<f64>) -> Result<f64> {
    if sc.regime != RegimeDecl::AlphaInfinite {
        return Err(Error::domain(format!("needs an alpha_infinite regime, declared {}", sc.regime.name())));
    }
    if sc.alpha_n < INFINITE_REGIME_MIN_ALPHA_N {
        return Err(Error::domain(format!(
            "needs alpha_n >= {INFINITE_REGIME_MIN_ALPHA_N}, got {}",
            sc.alpha_n
        )));
    }
    let l2 = ell2(sc.alpha_n);
    let big_l = (sc.alpha_n + std::f64::consts::E).ln();
    let d = x - l2;
    Ok(-(-x - d * d / (2.0 * big_l)).exp() / (1.0 + d / big_l).powi(2))
}

/// ℓ₂(α) = log(√(2π) log(α + e^{1/√(2π)})).
pub fn ell2(alpha: f64) -> f64 {
    let tau_sqrt = std::f64::consts::TAU.sqrt();
    (tau_sqrt * (alpha + (1.0 / tau_sqrt).exp()).ln()).ln()
}
