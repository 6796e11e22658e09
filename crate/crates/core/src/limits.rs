//! Limit laws of X_n: standard normal, Gumbel Λ(x) = exp(−e^{−x}) and the interpolating
//! family Φ_α(x) = ∏_{m≥0} Φ(m/√α + a + b x), evaluated with a certified truncation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{maximize, GridPolicy};
use crate::scalar::Real;
use crate::scaling::{a_of, b_of};
use crate::specfun::{log_norm_cdf, mills_upper_tail, norm_cdf, norm_pdf_over_cdf};
use crate::tailbounds::geometric_tail_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", content = "alpha")]
pub enum LimitLaw {
    StdNormal,
    Gumbel,
    PhiAlpha(f64),
}

impl LimitLaw {
    pub fn phi_alpha(alpha: f64) -> Result<Self> {
        let law = LimitLaw::PhiAlpha(alpha);
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LimitLaw::PhiAlpha(alpha) if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::domain(format!("phi-alpha needs a positive finite alpha, got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            LimitLaw::StdNormal => "normal".into(),
            LimitLaw::Gumbel => "gumbel".into(),
            LimitLaw::PhiAlpha(a) => format!("phi-alpha({a})"),
        }
    }

    /// CDF value; the certificate is dropped.
    pub fn cdf<T: Real>(&self, x: T) -> T {
        cdf(self, x).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationCertificate {
    /// Number of product factors M that were evaluated.
    pub terms_used: u64,
    /// Bound on the absolute error caused by dropping factors m ≥ M.
    pub tail_bound: f64,
}

impl TruncationCertificate {
    fn exact() -> Self {
        TruncationCertificate { terms_used: 0, tail_bound: 0.0 }
    }
}

/// Target for the dropped part of the Φ_α product.
pub const PHI_ALPHA_TAIL_TOL: f64 = 1e-14;
/// Smallest first dropped abscissa v_M accepted before the tail bound is tried.
const MIN_TAIL_START: f64 = 2.0;

struct PhiAlphaParams {
    sqrt_alpha: f64,
    a: f64,
    b: f64,
}

impl PhiAlphaParams {
    fn new(alpha: f64) -> Self {
        PhiAlphaParams { sqrt_alpha: alpha.sqrt(), a: a_of(alpha), b: b_of(alpha) }
    }

    fn v0(&self, x: f64) -> f64 {
        self.a + self.b * x
    }

    fn v(&self, m: u64, x: f64) -> f64 {
        m as f64 / self.sqrt_alpha + self.v0(x)
    }

    fn initial_terms(&self, x: f64) -> u64 {
        ((self.sqrt_alpha * ((-self.v0(x)).max(0.0) + 9.0)).ceil() as u64).max(1)
    }

    /// Bound on −Σ_{m≥M} log Φ(v_m), which also bounds the absolute CDF error.
    fn log_tail_bound(&self, terms: u64, x: f64) -> Option<f64> {
        let v_m = self.v(terms, x);
        if v_m < MIN_TAIL_START {
            return None;
        }
        // −log Φ(v) ≤ (1 − Φ(v))/Φ(v) ≤ φ(v)/(v Φ(v_M)) for v ≥ v_M
        let t = geometric_tail_sum(terms, x, 0.5, self.sqrt_alpha, self.a, self.b).ok()?;
        Some(t.bound / (std::f64::consts::TAU.sqrt() * norm_cdf(v_m)))
    }

    /// Number of terms with a certified tail below `tol`.
    fn terms_for(&self, x: f64, tol: f64) -> (u64, f64) {
        let mut m = self.initial_terms(x);
        loop {
            if let Some(b) = self.log_tail_bound(m, x) {
                if b <= tol {
                    return (m, b);
                }
            }
            m = m.saturating_mul(2);
        }
    }
}

/// ln Φ_α(x) with its truncation certificate.
pub fn log_cdf_phi_alpha<T: Real>(alpha: f64, x: T) -> (T, TruncationCertificate) {
    let p = PhiAlphaParams::new(alpha);
    let xf = x.as_f64();
    let (terms, tail) = p.terms_for(xf, PHI_ALPHA_TAIL_TOL);
    let inv_sqrt_alpha = T::c(1.0 / p.sqrt_alpha);
    let v0 = T::c(p.a) + T::c(p.b) * x;
    let mut acc = T::zero();
    for m in 0..terms {
        acc = acc + log_norm_cdf(v0 + T::from_count(m) * inv_sqrt_alpha);
    }
    (acc, TruncationCertificate { terms_used: terms, tail_bound: tail })
}

/// Log-CDF of any limit law. Finite for all finite x.
pub fn log_cdf<T: Real>(law: &LimitLaw, x: T) -> (T, TruncationCertificate) {
    match *law {
        LimitLaw::StdNormal => (log_norm_cdf(x), TruncationCertificate::exact()),
        LimitLaw::Gumbel => (-(-x).exp(), TruncationCertificate::exact()),
        LimitLaw::PhiAlpha(alpha) => log_cdf_phi_alpha(alpha, x),
    }
}

/// CDF value in [0, 1] and its truncation certificate.
pub fn cdf<T: Real>(law: &LimitLaw, x: T) -> (T, TruncationCertificate) {
    match *law {
        LimitLaw::StdNormal => (norm_cdf(x), TruncationCertificate::exact()),
        LimitLaw::Gumbel => ((-(-x).exp()).exp(), TruncationCertificate::exact()),
        LimitLaw::PhiAlpha(_) => {
            let (l, cert) = log_cdf(law, x);
            (l.exp(), cert)
        }
    }
}

/// 1 − F(x), keeping relative accuracy in the upper tail.
pub fn survival(law: &LimitLaw, x: f64) -> f64 {
    match *law {
        LimitLaw::StdNormal => mills_upper_tail(x),
        LimitLaw::Gumbel => -(-(-x).exp()).exp_m1(),
        LimitLaw::PhiAlpha(_) => -log_cdf(law, x).0.exp_m1(),
    }
}

/// d/dx ln Φ_α(x) = b Σ_m φ(v_α(m,x))/Φ(v_α(m,x)).
pub fn log_density_phi_alpha(alpha: f64, x: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) || !x.is_finite() {
        return Err(Error::domain(format!("need alpha > 0 and finite x, got alpha={alpha}, x={x}")));
    }
    let p = PhiAlphaParams::new(alpha);
    let (mut terms, _) = p.terms_for(x, PHI_ALPHA_TAIL_TOL);
    // Σ_{m≥M} φ/Φ(v_m) ≤ (e^{−v_M²/2}/√(2π) + √α (1 − Φ(v_M))) / Φ(v_M)
    loop {
        let v_m = p.v(terms, x);
        let tail = ((-0.5 * v_m * v_m).exp() / std::f64::consts::TAU.sqrt() + p.sqrt_alpha * mills_upper_tail(v_m))
            / norm_cdf(v_m);
        if v_m > 0.0 && tail <= PHI_ALPHA_TAIL_TOL {
            break;
        }
        terms *= 2;
    }
    let s: f64 = (0..terms).map(|m| norm_pdf_over_cdf(p.v(m, x))).sum();
    Ok(p.b * s)
}

/// sup_x |F_A(x) − F_B(x)| over the grid policy, with its (refined) maximizer.
pub fn sup_distance(law_a: &LimitLaw, law_b: &LimitLaw, grid: &GridPolicy) -> Result<(f64, f64)> {
    law_a.validate()?;
    law_b.validate()?;
    if law_a == law_b {
        return Ok((0.0, grid.x_lo));
    }
    maximize(|x| (cdf(law_a, x).0 - cdf(law_b, x).0).abs(), grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::norm_cdf;

    #[test]
    fn gumbel_at_zero() {
        let (v, c) = cdf(&LimitLaw::Gumbel, 0.0f64);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(c.tail_bound, 0.0);
        assert_eq!(cdf(&LimitLaw::StdNormal, 0.0f64).1.tail_bound, 0.0);
    }

    #[test]
    fn phi_alpha_below_first_factor() {
        for &alpha in &[0.01, 0.5, 1.0, 30.0, 1e4] {
            let (a, b) = (a_of(alpha), b_of(alpha));
            for i in -60..=120 {
                let x = i as f64 * 0.1;
                let (v, cert) = cdf(&LimitLaw::PhiAlpha(alpha), x);
                assert!(v <= norm_cdf(a + b * x) + 1e-15);
                assert!((0.0..=1.0).contains(&v));
                assert!(cert.tail_bound <= 1e-13);
            }
        }
    }

    #[test]
    fn phi_alpha_one_brute_force() {
        // extended product with 10⁴ factors, summed in ln Φ from the far end
        let alpha = 1.0f64;
        let (a, b) = (a_of(alpha), b_of(alpha));
        let mut s = 0.0f64;
        for m in (0..10_000u64).rev() {
            s += log_norm_cdf(m as f64 + a + b * 0.0);
        }
        let (v, _) = cdf(&LimitLaw::PhiAlpha(1.0), 0.0f64);
        assert!((v - s.exp()).abs() < 1e-12);
    }

    #[test]
    fn doubling_terms_is_consistent() {
        for &alpha in &[0.3, 1.0, 50.0] {
            let p = PhiAlphaParams::new(alpha);
            for &x in &[-3.0, 0.0, 2.0] {
                let (terms, tail) = p.terms_for(x, PHI_ALPHA_TAIL_TOL);
                let full: f64 = (0..terms).map(|m| log_norm_cdf(p.v(m, x))).sum();
                let double: f64 = (0..2 * terms).map(|m| log_norm_cdf(p.v(m, x))).sum();
                assert!((full.exp() - double.exp()).abs() <= 10.0 * tail.max(1e-16));
            }
        }
    }

    #[test]
    fn extremes() {
        for law in [LimitLaw::StdNormal, LimitLaw::Gumbel, LimitLaw::PhiAlpha(1.0), LimitLaw::PhiAlpha(1e3)] {
            assert!(cdf(&law, -40.0f64).0 <= 1e-12);
            assert!(cdf(&law, 40.0f64).0 >= 1.0 - 1e-12);
            assert!(log_cdf(&law, -40.0f64).0.is_finite() || matches!(law, LimitLaw::Gumbel));
        }
    }

    #[test]
    fn monotone_on_grid() {
        for law in [LimitLaw::Gumbel, LimitLaw::PhiAlpha(0.2), LimitLaw::PhiAlpha(5.0)] {
            let mut prev = 0.0;
            for i in -200..=400 {
                let v = cdf(&law, i as f64 * 0.05).0;
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn log_density_finite_difference() {
        let h = 1e-5;
        for &alpha in &[0.5, 1.0, 20.0] {
            for &x in &[-2.0, 0.0, 1.5] {
                let law = LimitLaw::PhiAlpha(alpha);
                let fd = (log_cdf(&law, x + h).0 - log_cdf(&law, x - h).0) / (2.0 * h);
                assert!((log_density_phi_alpha(alpha, x).unwrap() - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn log_density_vanishes_far_right() {
        assert!(log_density_phi_alpha(1.0, 60.0).unwrap() < 1e-12);
    }

    #[test]
    fn log_density_approaches_gumbel() {
        // reference: b√α ∫_{a+bx}^∞ φ/Φ dv at α = 1e8, x = 0 (quadrature at 30 digits)
        let d0 = log_density_phi_alpha(1e8, 0.0).unwrap();
        assert!((d0 - 0.788_044).abs() < 1e-3);
        let mut prev = f64::INFINITY;
        for &alpha in &[1e4, 1e6, 1e8] {
            let err = (log_density_phi_alpha(alpha, 0.0).unwrap() - 1.0).abs();
            assert!(err < prev);
            prev = err;
        }
        for i in 0..=20 {
            let x = i as f64 * 0.1;
            let r = log_density_phi_alpha(1e8, x).unwrap() / (-x).exp();
            assert!((r - 1.0).abs() < 0.25, "x={x} r={r}");
            if x >= 1.15 {
                assert!((r - 1.0).abs() < 0.1, "x={x} r={r}");
            }
        }
    }

    #[test]
    fn sup_distance_identical() {
        let g = GridPolicy::default();
        assert_eq!(sup_distance(&LimitLaw::Gumbel, &LimitLaw::Gumbel, &g).unwrap().0, 0.0);
    }

    #[test]
    fn f32_phi_alpha() {
        let (v32, _) = cdf(&LimitLaw::PhiAlpha(1.0), 0.5f32);
        let (v64, _) = cdf(&LimitLaw::PhiAlpha(1.0), 0.5f64);
        assert!((v32 as f64 - v64).abs() < 1e-5);
    }

    #[test]
    fn law_json() {
        let s = serde_json::to_string(&LimitLaw::PhiAlpha(2.0)).unwrap();
        assert_eq!(serde_json::from_str::<LimitLaw>(&s).unwrap(), LimitLaw::PhiAlpha(2.0));
    }
}
