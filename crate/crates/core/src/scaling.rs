//! Normalizing constants and coordinate maps for the rescaled spectral radius
//!
//! X_n = b_n^{-1} (√α_n (max_j log|Z_j|² − k ψ(n)) − a_n),   α_n = n / k.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::specfun::{digamma, polygamma};

/// Smallest α_n for which an `AlphaInfinite` declaration is accepted.
pub const INFINITE_REGIME_MIN_ALPHA_N: f64 = 10.0;
/// Largest α_n for which an `AlphaZero` declaration is accepted.
pub const ZERO_REGIME_MAX_ALPHA_N: f64 = 1.0;

/// Matrix size n and number of factors k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ensemble {
    pub n: u64,
    pub k: u64,
}

impl Ensemble {
    pub fn new(n: u64, k: u64) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::domain(format!("ensemble needs n >= 1 and k >= 1, got n={n}, k={k}")));
        }
        Ok(Ensemble { n, k })
    }

    pub fn alpha_n<T: Real>(&self) -> T {
        T::from_count(self.n) / T::from_count(self.k)
    }

    /// n³ / k, the finite-n value of β.
    pub fn beta_n(&self) -> f64 {
        (self.n as f64).powi(3) / self.k as f64
    }
}

/// Declared limit regime of the sequence (n, k_n). A single ensemble cannot determine
/// it, so callers state it explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RegimeDecl {
    /// α = 0, with β = lim n³/k_n ∈ [0, ∞].
    AlphaZero {
        #[serde(with = "crate::serde_ext")]
        beta: f64,
    },
    /// α ∈ (0, ∞), with η = lim (α_n − α) n ∈ [−∞, ∞].
    AlphaFinite {
        alpha: f64,
        #[serde(with = "crate::serde_ext")]
        eta: f64,
    },
    AlphaInfinite,
}

impl RegimeDecl {
    pub fn zero(beta: f64) -> Result<Self> {
        let d = RegimeDecl::AlphaZero { beta };
        d.validate()?;
        Ok(d)
    }

    pub fn finite(alpha: f64, eta: f64) -> Result<Self> {
        let d = RegimeDecl::AlphaFinite { alpha, eta };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RegimeDecl::AlphaZero { beta } => {
                if beta.is_nan() || beta < 0.0 {
                    return Err(Error::domain(format!("beta must be in [0, inf], got {beta}")));
                }
            }
            RegimeDecl::AlphaFinite { alpha, eta } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::domain(format!("alpha must be positive and finite, got {alpha}")));
                }
                if eta.is_nan() {
                    return Err(Error::domain("eta must not be NaN"));
                }
            }
            RegimeDecl::AlphaInfinite => {}
        }
        Ok(())
    }

    /// The declared finite α, if any.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            RegimeDecl::AlphaFinite { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegimeDecl::AlphaZero { .. } => "alpha_zero",
            RegimeDecl::AlphaFinite { .. } => "alpha_finite",
            RegimeDecl::AlphaInfinite => "alpha_infinite",
        }
    }

    /// Rejects declarations that the ensemble cannot plausibly belong to.
    pub fn check_consistent(&self, e: &Ensemble) -> Result<()> {
        self.validate()?;
        let alpha_n: f64 = e.alpha_n();
        match *self {
            RegimeDecl::AlphaInfinite if alpha_n < INFINITE_REGIME_MIN_ALPHA_N => Err(Error::domain(format!(
                "alpha_infinite requires alpha_n >= {INFINITE_REGIME_MIN_ALPHA_N}, got {alpha_n}"
            ))),
            RegimeDecl::AlphaZero { .. } if alpha_n > ZERO_REGIME_MAX_ALPHA_N => Err(Error::domain(format!(
                "alpha_zero requires alpha_n <= {ZERO_REGIME_MAX_ALPHA_N}, got {alpha_n}"
            ))),
            _ => Ok(()),
        }
    }
}

/// a(α) = √log(α+1) − log(√(2π) log(α + e^{1/√(2π)})) / √log(α+e).
pub fn a_of<T: Real>(alpha: T) -> T {
    let inv_sqrt_tau = T::one() / T::TAU().sqrt();
    let l3 = (alpha + inv_sqrt_tau.exp()).ln();
    let le = (alpha + T::E()).ln();
    (alpha.ln_1p()).sqrt() - (T::TAU().sqrt() * l3).ln() / le.sqrt()
}

/// b(α) = 1/√log(α+e).
pub fn b_of<T: Real>(alpha: T) -> T {
    (alpha + T::E()).ln().sqrt().recip()
}

/// w(t) = 2 t log t.
pub fn w<T: Real>(t: T) -> T {
    T::c(2.0) * t * t.ln()
}

/// c1(α) = da/dα.
///
/// The second and third terms carry the signs of the derivative of
/// −log(√(2π) log(α + e^{1/√(2π)}))/√log(α+e); the printed form in the source has them
/// swapped, which disagrees with the finite-difference slope of a(α).
pub fn c1_of<T: Real>(alpha: T) -> T {
    let inv_sqrt_tau = T::one() / T::TAU().sqrt();
    let e1 = inv_sqrt_tau.exp();
    let le_sqrt = (alpha + T::E()).ln().sqrt();
    let l3 = (alpha + e1).ln();
    (alpha.ln_1p()).sqrt() / w(alpha + T::one()) - T::c(2.0) / (w(alpha + e1) * le_sqrt)
        + (T::TAU().sqrt() * l3).ln() / (w(alpha + T::E()) * le_sqrt)
}

/// c2(α) = −db/dα = 1/(2(α+e) log(α+e)^{3/2}).
pub fn c2_of<T: Real>(alpha: T) -> T {
    let le = (alpha + T::E()).ln();
    (T::c(2.0) * (alpha + T::E()) * le * le.sqrt()).recip()
}

/// Everything needed to move between raw max-log-modulus values and the X_n coordinate,
/// plus the limit constants of the declared regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingConstants<T> {
    pub ensemble: Ensemble,
    pub regime: RegimeDecl,
    pub alpha_n: T,
    pub a_n: T,
    pub b_n: T,
    /// k ψ(n).
    pub centering: T,
    limit_a: Option<T>,
    limit_b: Option<T>,
    limit_c1: Option<T>,
    limit_c2: Option<T>,
}

fn not_applicable<T>(what: &str, regime: &RegimeDecl) -> Result<T> {
    Err(Error::NotApplicable(format!("{what} is not defined for regime {}", regime.name())))
}

impl<T: Real> ScalingConstants<T> {
    pub fn a(&self) -> Result<T> {
        self.limit_a.map_or_else(|| not_applicable("a", &self.regime), Ok)
    }
    pub fn b(&self) -> Result<T> {
        self.limit_b.map_or_else(|| not_applicable("b", &self.regime), Ok)
    }
    pub fn c1(&self) -> Result<T> {
        self.limit_c1.map_or_else(|| not_applicable("c1", &self.regime), Ok)
    }
    pub fn c2(&self) -> Result<T> {
        self.limit_c2.map_or_else(|| not_applicable("c2", &self.regime), Ok)
    }

    /// Declared limit α for the finite regime.
    pub fn alpha(&self) -> Result<T> {
        match self.regime {
            RegimeDecl::AlphaFinite { alpha, .. } => Ok(T::c(alpha)),
            _ => Err(Error::domain(format!(
                "operation needs an alpha_finite regime, declared {}",
                self.regime.name()
            ))),
        }
    }

    /// a_n + b_n x.
    pub fn affine(&self, x: T) -> T {
        self.a_n + self.b_n * x
    }

    /// Threshold on log Y_{n−m} defining c_n(m, x): kψ(n) + (a_n + b_n x)/√α_n.
    pub fn threshold(&self, x: T) -> T {
        self.centering + self.affine(x) / self.alpha_n.sqrt()
    }
}

/// Constants for an ensemble under a declared regime.
pub fn constants_for<T: Real>(e: &Ensemble, decl: &RegimeDecl) -> Result<ScalingConstants<T>> {
    decl.validate()?;
    let alpha_n: T = e.alpha_n();
    let centering = T::from_count(e.k) * digamma(T::from_count(e.n))?;
    let (limit_a, limit_b, limit_c1, limit_c2) = match *decl {
        RegimeDecl::AlphaZero { .. } => (Some(T::zero()), Some(T::one()), None, None),
        RegimeDecl::AlphaFinite { alpha, .. } => {
            let al = T::c(alpha);
            (Some(a_of(al)), Some(b_of(al)), Some(c1_of(al)), Some(c2_of(al)))
        }
        RegimeDecl::AlphaInfinite => (None, None, None, None),
    };
    Ok(ScalingConstants {
        ensemble: *e,
        regime: *decl,
        alpha_n,
        a_n: a_of(alpha_n),
        b_n: b_of(alpha_n),
        centering,
        limit_a,
        limit_b,
        limit_c1,
        limit_c2,
    })
}

/// u_n(m, x) = m/√α_n + a_n + b_n x.
pub fn u_n<T: Real>(m: u64, x: T, sc: &ScalingConstants<T>) -> T {
    T::from_count(m) / sc.alpha_n.sqrt() + sc.affine(x)
}

/// v_α(m, x) = m/√α + a + b x. Needs an `AlphaFinite` declaration.
pub fn v_alpha<T: Real>(m: u64, x: T, sc: &ScalingConstants<T>) -> Result<T> {
    let alpha = sc.alpha()?;
    Ok(T::from_count(m) / alpha.sqrt() + sc.a()? + sc.b()? * x)
}

/// ψ(n) − ψ(n − m), summed exactly for short ranges to avoid cancellation.
pub fn digamma_gap<T: Real>(n: u64, m: u64) -> Result<T> {
    if m >= n {
        return Err(Error::domain(format!("need m < n, got m={m}, n={n}")));
    }
    if m <= 256 {
        let mut s = T::zero();
        for i in (n - m)..n {
            s = s + T::from_count(i).recip();
        }
        Ok(s)
    } else {
        Ok(digamma(T::from_count(n))? - digamma(T::from_count(n - m))?)
    }
}

/// v_n(m, x) = k(ψ(n) − ψ(n−m))/√(kψ'(n−m)) + (a_n + b_n x)/√(nψ'(n−m)).
pub fn v_n<T: Real>(m: u64, x: T, e: &Ensemble, sc: &ScalingConstants<T>) -> Result<T> {
    let gap = digamma_gap::<T>(e.n, m)?;
    let tri = polygamma(1, T::from_count(e.n - m))?;
    let k = T::from_count(e.k);
    let n = T::from_count(e.n);
    Ok(k * gap / (k * tri).sqrt() + sc.affine(x) / (n * tri).sqrt())
}

/// q1(m, x) = (2α(v² − 1) − 3√α(2m+1)v + 6m(m+1)) / (12√α) with v = v_α(m, x).
pub fn q1<T: Real>(m: u64, x: T, sc: &ScalingConstants<T>) -> Result<T> {
    let v = v_alpha(m, x, sc)?;
    Ok(q1_at(sc.alpha()?, m, v))
}

/// q1 as a polynomial in (m, v).
pub fn q1_at<T: Real>(alpha: T, m: u64, v: T) -> T {
    let sa = alpha.sqrt();
    let mf = T::from_count(m);
    let two = T::c(2.0);
    (two * alpha * (v * v - T::one()) - T::c(3.0) * sa * (two * mf + T::one()) * v
        + T::c(6.0) * mf * (mf + T::one()))
        / (T::c(12.0) * sa)
}

/// q2(m, x) = c1 − c2 x − m/(2α^{3/2}).
pub fn q2<T: Real>(m: u64, x: T, sc: &ScalingConstants<T>) -> Result<T> {
    let alpha = sc.alpha()?;
    Ok(sc.c1()? - sc.c2()? * x - T::from_count(m) / (T::c(2.0) * alpha * alpha.sqrt()))
}

/// Maps a raw max_j log|Z_j|² to the X_n coordinate.
pub fn rescale_max<T: Real>(raw_max_log_sq: T, sc: &ScalingConstants<T>) -> T {
    (sc.alpha_n.sqrt() * (raw_max_log_sq - sc.centering) - sc.a_n) / sc.b_n
}

/// Inverse of [`rescale_max`].
pub fn unscale<T: Real>(x: T, sc: &ScalingConstants<T>) -> T {
    sc.threshold(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite(alpha: f64) -> RegimeDecl {
        RegimeDecl::finite(alpha, 0.0).unwrap()
    }

    #[test]
    fn zero_limit_constants() {
        assert!(a_of(0.0f64).abs() < 1e-15);
        assert!((b_of(0.0f64) - 1.0).abs() < 1e-15);
        let sc = constants_for::<f64>(&Ensemble::new(8, 512).unwrap(), &RegimeDecl::zero(1.0).unwrap()).unwrap();
        assert_eq!(sc.a().unwrap(), 0.0);
        assert_eq!(sc.b().unwrap(), 1.0);
        assert!(matches!(sc.c1(), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn alpha_n_arithmetic() {
        let e = Ensemble::new(1000, 10).unwrap();
        assert_eq!(e.alpha_n::<f64>(), 100.0);
        assert!(Ensemble::new(0, 1).is_err());
    }

    #[test]
    fn c1_matches_central_difference() {
        let h = 1e-5f64;
        for &al in &[0.3f64, 1.0, 2.0, 7.0] {
            let fd = (a_of(al + h) - a_of(al - h)) / (2.0 * h);
            assert!((c1_of(al) - fd).abs() < 1e-6, "alpha={al}");
            let fdb = (b_of(al + h) - b_of(al - h)) / (2.0 * h);
            assert!((c2_of(al) + fdb).abs() < 1e-6);
        }
        assert!((c1_of(1.0f64) - (-0.009_869_5)).abs() < 1e-6);
    }

    #[test]
    fn infinite_regime_marks_limits_not_applicable() {
        let sc = constants_for::<f64>(&Ensemble::new(100_000, 1).unwrap(), &RegimeDecl::AlphaInfinite).unwrap();
        assert!(matches!(sc.a(), Err(Error::NotApplicable(_))));
        assert!(matches!(sc.b(), Err(Error::NotApplicable(_))));
        assert!(matches!(sc.c2(), Err(Error::NotApplicable(_))));
        assert!(v_alpha(0, 0.0, &sc).is_err());
    }

    #[test]
    fn finite_alpha_must_be_positive() {
        assert!(RegimeDecl::finite(0.0, 0.0).is_err());
        assert!(RegimeDecl::finite(-1.0, 0.0).is_err());
        assert!(RegimeDecl::zero(-1.0).is_err());
        assert!(RegimeDecl::zero(f64::INFINITY).is_ok());
        assert!(RegimeDecl::finite(1.0, f64::NEG_INFINITY).is_ok());
        let bad = RegimeDecl::AlphaFinite { alpha: 0.0, eta: 0.0 };
        assert!(constants_for::<f64>(&Ensemble::new(4, 4).unwrap(), &bad).is_err());
    }

    #[test]
    fn consistency_gates() {
        assert!(RegimeDecl::AlphaInfinite.check_consistent(&Ensemble::new(9, 1).unwrap()).is_err());
        assert!(RegimeDecl::AlphaInfinite.check_consistent(&Ensemble::new(10, 1).unwrap()).is_ok());
        assert!(RegimeDecl::zero(0.0).unwrap().check_consistent(&Ensemble::new(50, 10).unwrap()).is_err());
    }

    #[test]
    fn u_n_examples() {
        let mut sc = constants_for::<f64>(&Ensemble::new(4, 1).unwrap(), &RegimeDecl::AlphaInfinite).unwrap();
        sc.a_n = 0.3;
        sc.b_n = 0.5;
        assert!((u_n(2, 1.0, &sc) - 1.8).abs() < 1e-15);
        assert_eq!(u_n(0, 1.0, &sc), sc.affine(1.0));
        assert!((u_n(3, 0.7, &sc) - u_n(2, 0.7, &sc) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn v_alpha_examples() {
        let sc = constants_for::<f64>(&Ensemble::new(64, 64).unwrap(), &finite(1.0)).unwrap();
        let a = sc.a().unwrap();
        let b = sc.b().unwrap();
        assert_eq!(v_alpha(0, 0.0, &sc).unwrap(), a);
        let x = (-1.0 - a) / b;
        assert!((v_alpha(3, x, &sc).unwrap() - 2.0).abs() < 1e-14);
        let sc4 = constants_for::<f64>(&Ensemble::new(64, 16).unwrap(), &finite(4.0)).unwrap();
        assert!((v_alpha(5, 0.2, &sc4).unwrap() - v_alpha(4, 0.2, &sc4).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn v_n_examples() {
        let e = Ensemble::new(100, 100).unwrap();
        let sc = constants_for::<f64>(&e, &finite(1.0)).unwrap();
        let tri0: f64 = polygamma(1, 100.0).unwrap();
        let expect0 = sc.affine(0.3) / (100.0 * tri0).sqrt();
        assert!((v_n(0, 0.3, &e, &sc).unwrap() - expect0).abs() < 1e-15);
        // m = 1: ψ(100) − ψ(99) = 1/99 exactly
        let tri: f64 = polygamma(1, 99.0).unwrap();
        let expect1 = 100.0 * (1.0 / 99.0) / (100.0 * tri).sqrt() + sc.a_n / (100.0 * tri).sqrt();
        assert!((v_n(1, 0.0, &e, &sc).unwrap() - expect1).abs() < 1e-12);
        assert!(v_n(100, 0.0, &e, &sc).is_err());
    }

    #[test]
    fn v_n_tracks_u_n() {
        for &(n, k) in &[(1000u64, 1000u64), (2000, 500), (5000, 50)] {
            let e = Ensemble::new(n, k).unwrap();
            let sc = constants_for::<f64>(&e, &RegimeDecl::finite(e.alpha_n(), 0.0).unwrap()).unwrap();
            for m in 1..=n / 10 {
                for &x in &[0.0, 1.0, 3.0] {
                    let u = u_n(m, x, &sc);
                    let v = v_n(m, x, &e, &sc).unwrap();
                    assert!((v / u - 1.0).abs() <= 3.0 * m as f64 / n as f64, "n={n} m={m} x={x}");
                }
            }
        }
    }

    #[test]
    fn q_examples() {
        let sc = constants_for::<f64>(&Ensemble::new(64, 64).unwrap(), &finite(1.0)).unwrap();
        assert_eq!(q2(0, 0.0, &sc).unwrap(), sc.c1().unwrap());
        assert!((q1_at(1.0f64, 1, 1.0) - 0.25).abs() < 1e-15);
        let al = 2.5f64;
        assert!((q1_at(al, 0, 0.0) + al.sqrt() / 6.0).abs() < 1e-15);
        let inf = constants_for::<f64>(&Ensemble::new(1000, 1).unwrap(), &RegimeDecl::AlphaInfinite).unwrap();
        assert!(q1(0, 0.0, &inf).is_err());
        assert!(q2(0, 0.0, &inf).is_err());
    }

    #[test]
    fn rescale_examples() {
        let e = Ensemble::new(50, 7).unwrap();
        let sc = constants_for::<f64>(&e, &RegimeDecl::finite(50.0 / 7.0, 0.0).unwrap()).unwrap();
        assert!((rescale_max(sc.centering, &sc) + sc.a_n / sc.b_n).abs() < 1e-12);
        let raw = sc.centering + (sc.a_n + sc.b_n) / sc.alpha_n.sqrt();
        assert!((rescale_max(raw, &sc) - 1.0).abs() < 1e-12);
        for &x in &[-3.0f64, 0.0, 2.5] {
            assert!((rescale_max(unscale(x, &sc), &sc) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn regime_json_roundtrip() {
        for d in [
            RegimeDecl::zero(f64::INFINITY).unwrap(),
            RegimeDecl::finite(1.0, -2.5).unwrap(),
            RegimeDecl::AlphaInfinite,
        ] {
            let s = serde_json::to_string(&d).unwrap();
            let back: RegimeDecl = serde_json::from_str(&s).unwrap();
            assert_eq!(back, d);
        }
        let s = serde_json::to_string(&RegimeDecl::zero(f64::INFINITY).unwrap()).unwrap();
        assert_eq!(s, r#"{"kind":"AlphaZero","beta":"inf"}"#);
    }

    #[test]
    fn f32_constants() {
        let e = Ensemble::new(64, 64).unwrap();
        let s32 = constants_for::<f32>(&e, &finite(1.0)).unwrap();
        let s64 = constants_for::<f64>(&e, &finite(1.0)).unwrap();
        assert!((s32.a_n as f64 - s64.a_n).abs() < 1e-6);
        assert!((s32.centering as f64 - s64.centering).abs() < 1e-4);
    }
}
