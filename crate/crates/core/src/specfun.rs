//! Special functions: log-gamma, digamma and polygamma, the standard normal
//! density/distribution with a tail-stable branch, and the regularized incomplete
//! gamma functions P(a, x) and Q(a, x).
//!
//! All routines are generic over [`Real`]; accuracy statements refer to `f64`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerance pair used to state and check special-function accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for Accuracy {
    fn default() -> Self {
        Accuracy { abs_tol: 1e-12, rel_tol: 1e-12 }
    }
}

impl Accuracy {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Result<Self> {
        if !(abs_tol > 0.0 && rel_tol > 0.0) {
            return Err(Error::domain("accuracy tolerances must be strictly positive"));
        }
        if abs_tol > 1e-6 {
            return Err(Error::domain(format!("abs_tol {abs_tol} is looser than 1e-6")));
        }
        Ok(Accuracy { abs_tol, rel_tol })
    }

    /// True when `computed` is within the absolute or the relative tolerance of `reference`.
    pub fn admits(&self, computed: f64, reference: f64) -> bool {
        let err = (computed - reference).abs();
        err <= self.abs_tol || err <= self.rel_tol * reference.abs()
    }
}

/// Argument above which the asymptotic (Bernoulli) series are used directly.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

/// Largest shape accepted by the incomplete gamma functions.
pub const MAX_GAMMA_SHAPE: f64 = 1e7;

fn check_positive<T: Real>(name: &str, z: T) -> Result<()> {
    if !(z.is_finite() && z > T::zero()) {
        return Err(Error::domain(format!("{name} requires a positive finite argument, got {z}")));
    }
    Ok(())
}

/// ln Γ(z) − [(z − ½) ln z − z + ½ ln 2π] for z ≥ 10 (Stirling remainder).
pub fn stirling_correction<T: Real>(z: T) -> T {
    // B_{2k} / (2k (2k-1)) for k = 1..7
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
    ];
    let inv = z.recip();
    let inv2 = inv * inv;
    let mut acc = T::zero();
    for &c in C.iter().rev() {
        acc = acc * inv2 + T::c(c);
    }
    acc * inv
}

fn stirling<T: Real>(z: T) -> T {
    let half = T::c(0.5);
    (z - half) * z.ln() - z + half * (T::TAU()).ln() + stirling_correction(z)
}

/// ln Γ(z) for z > 0.
pub fn log_gamma<T: Real>(z: T) -> Result<T> {
    check_positive("log_gamma", z)?;
    let threshold = T::c(ASYMPTOTIC_THRESHOLD);
    if z >= threshold {
        return Ok(stirling(z));
    }
    let mut shifted = z;
    let mut prod = T::one();
    while shifted < threshold {
        prod = prod * shifted;
        shifted = shifted + T::one();
    }
    Ok(stirling(shifted) - prod.ln())
}

/// ψ(z) = Γ'(z)/Γ(z) for z > 0.
pub fn digamma<T: Real>(z: T) -> Result<T> {
    check_positive("digamma", z)?;
    // B_{2k} / (2k) for k = 1..7
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32760.0,
        1.0 / 12.0,
    ];
    let threshold = T::c(ASYMPTOTIC_THRESHOLD);
    let mut z = z;
    let mut acc = T::zero();
    while z < threshold {
        acc = acc - z.recip();
        z = z + T::one();
    }
    let inv2 = (z * z).recip();
    let mut series = T::zero();
    for &c in C.iter().rev() {
        series = series * inv2 + T::c(c);
    }
    Ok(acc + z.ln() - T::c(0.5) / z - series * inv2)
}

/// ψ^{(order)}(z) for order ∈ {1, 2, 3} and z > 0.
pub fn polygamma<T: Real>(order: u32, z: T) -> Result<T> {
    if !(1..=3).contains(&order) {
        return Err(Error::domain(format!("polygamma order {order} is not supported (1..=3)")));
    }
    check_positive("polygamma", z)?;
    const BERNOULLI: [f64; 8] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
    ];
    let n = order as i32;
    let fact_n = T::c((1..=order).product::<u32>() as f64);
    let fact_nm1 = fact_n / T::c(order as f64);
    // ψ^{(n)}(z) = ψ^{(n)}(z+1) + (-1)^{n+1} n! / z^{n+1}
    let sign = if order % 2 == 1 { T::one() } else { -T::one() };
    let threshold = T::c(ASYMPTOTIC_THRESHOLD);
    let mut z = z;
    let mut acc = T::zero();
    while z < threshold {
        acc = acc + sign * fact_n / z.powi(n + 1);
        z = z + T::one();
    }
    let inv = z.recip();
    let inv2 = inv * inv;
    let mut series = T::zero();
    for (idx, &b) in BERNOULLI.iter().enumerate().rev() {
        let two_k = 2.0 * (idx as f64 + 1.0);
        let mut coef = b;
        for i in 1..order {
            coef *= two_k + i as f64;
        }
        series = series * inv2 + T::c(coef);
    }
    // series * z^{-(n+2)} covers Σ B_{2k} (2k+n-1)!/(2k)! z^{-(2k+n)}
    let asym = fact_nm1 * inv.powi(n) + fact_n * T::c(0.5) * inv.powi(n + 1) + series * inv.powi(n + 2);
    Ok(acc + sign * asym)
}

/// Standard normal density.
pub fn norm_pdf<T: Real>(x: T) -> T {
    (-(x * x) * T::c(0.5)).exp() * T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::c(0.5)
}

/// Standard normal distribution function Φ(x).
pub fn norm_cdf<T: Real>(x: T) -> T {
    T::c(0.5) * (-x * T::FRAC_1_SQRT_2()).erfc()
}

/// Start of the dedicated upper-tail branch.
const TAIL_BRANCH: f64 = 8.0;

/// Mills ratio (1 − Φ(t)) / φ(t) for t ≥ 8 by the Laplace continued fraction
/// 1/(t + 1/(t + 2/(t + 3/(t + …)))).
fn mills_ratio_cf<T: Real>(t: T) -> T {
    let tiny = T::min_positive_value() / T::epsilon();
    let eps = T::epsilon();
    let mut f = t;
    let mut c = t;
    let mut d = T::zero();
    for i in 1..500u32 {
        let a = T::c(i as f64);
        d = t + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = t + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() < eps {
            break;
        }
    }
    f.recip()
}

/// Upper tail 1 − Φ(t); relative accuracy is kept for large t.
pub fn mills_upper_tail<T: Real>(t: T) -> T {
    if t >= T::c(TAIL_BRANCH) {
        norm_pdf(t) * mills_ratio_cf(t)
    } else {
        T::c(0.5) * (t * T::FRAC_1_SQRT_2()).erfc()
    }
}

/// ln(1 − Φ(t)), finite for every finite t.
pub fn log_upper_tail<T: Real>(t: T) -> T {
    if t >= T::c(TAIL_BRANCH) {
        let half_ln_tau = T::c(0.5) * T::TAU().ln();
        -(t * t) * T::c(0.5) - half_ln_tau + mills_ratio_cf(t).ln()
    } else if t < -T::one() {
        (-norm_cdf(t)).ln_1p()
    } else {
        (T::c(0.5) * (t * T::FRAC_1_SQRT_2()).erfc()).ln()
    }
}

/// ln Φ(x), finite for every finite x.
pub fn log_norm_cdf<T: Real>(x: T) -> T {
    log_upper_tail(-x)
}

/// φ(v) / Φ(v), stable for very negative v.
pub fn norm_pdf_over_cdf<T: Real>(v: T) -> T {
    if v <= -T::c(TAIL_BRANCH) {
        mills_ratio_cf(-v).recip()
    } else {
        norm_pdf(v) / norm_cdf(v)
    }
}

/// ln(1 + δ) − δ, accurate for small |δ|.
pub fn log1pmx<T: Real>(delta: T) -> T {
    if delta.abs() < T::c(0.25) {
        // -Σ_{k≥2} (-δ)^k / k
        let mut term = delta * delta;
        let mut sum = T::zero();
        let mut k = 2u32;
        loop {
            let contrib = term / T::c(k as f64);
            if k % 2 == 0 {
                sum = sum - contrib;
            } else {
                sum = sum + contrib;
            }
            if contrib.abs() <= sum.abs() * T::epsilon() * T::c(0.5) || k > 200 {
                break;
            }
            term = term * delta;
            k += 1;
        }
        sum
    } else {
        delta.ln_1p() - delta
    }
}

/// Which tail of the incomplete gamma function was computed directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direct {
    Lower,
    Upper,
}

/// ln of the directly computed regularized incomplete gamma tail.
fn inc_gamma_direct<T: Real>(a: T, x: T) -> Result<(Direct, T)> {
    if !(a.is_finite() && a > T::zero()) {
        return Err(Error::domain(format!("incomplete gamma shape must be positive, got {a}")));
    }
    if a > T::c(MAX_GAMMA_SHAPE) {
        return Err(Error::domain(format!("incomplete gamma shape {a} exceeds {MAX_GAMMA_SHAPE:e}")));
    }
    if !(x >= T::zero()) || x.is_infinite() {
        return Err(Error::domain(format!("incomplete gamma argument must be finite and >= 0, got {x}")));
    }
    if x == T::zero() {
        return Ok((Direct::Lower, T::neg_infinity()));
    }
    // ln(x^a e^{-x} / Γ(a))
    let ln_pref = if a >= T::c(ASYMPTOTIC_THRESHOLD) {
        a * log1pmx((x - a) / a) + T::c(0.5) * (a / T::TAU()).ln() - stirling_correction(a)
    } else {
        a * x.ln() - x - log_gamma(a)?
    };
    let eps = T::epsilon();
    let max_iter = 1000 + (100.0 * a.as_f64().sqrt()) as usize;

    if x < a + T::one() {
        let mut ap = a;
        let mut term = T::one();
        let mut sum = T::one();
        let mut converged = false;
        for _ in 0..max_iter {
            ap = ap + T::one();
            term = term * x / ap;
            sum = sum + term;
            if term < sum * eps {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!("incomplete gamma series did not converge at a={a}, x={x}")));
        }
        Ok((Direct::Lower, ln_pref - a.ln() + sum.ln()))
    } else {
        let tiny = T::min_positive_value() / eps;
        let mut b = x + T::one() - a;
        let mut c = tiny.recip();
        let mut d = b.recip();
        let mut h = d;
        let mut converged = false;
        for i in 1..=max_iter {
            let fi = T::c(i as f64);
            let an = -fi * (fi - a);
            b = b + T::c(2.0);
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = d.recip();
            let delta = d * c;
            h = h * delta;
            if (delta - T::one()).abs() < eps {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "incomplete gamma continued fraction did not converge at a={a}, x={x}"
            )));
        }
        Ok((Direct::Upper, ln_pref + h.ln()))
    }
}

/// ln P(a, x), the log of the regularized lower incomplete gamma function.
pub fn ln_reg_gamma_p<T: Real>(a: T, x: T) -> Result<T> {
    Ok(match inc_gamma_direct(a, x)? {
        (Direct::Lower, ln_p) => ln_p,
        (Direct::Upper, ln_q) => (-ln_q.exp()).ln_1p(),
    })
}

/// ln Q(a, x), the log of the regularized upper incomplete gamma function.
pub fn ln_reg_gamma_q<T: Real>(a: T, x: T) -> Result<T> {
    Ok(match inc_gamma_direct(a, x)? {
        (Direct::Upper, ln_q) => ln_q,
        (Direct::Lower, ln_p) => (-ln_p.exp()).ln_1p(),
    })
}

/// P(a, x) = γ(a, x)/Γ(a).
pub fn reg_gamma_p<T: Real>(a: T, x: T) -> Result<T> {
    Ok(match inc_gamma_direct(a, x)? {
        (Direct::Lower, ln_p) => ln_p.exp(),
        (Direct::Upper, ln_q) => T::one() - ln_q.exp(),
    })
}

/// Q(a, x) = Γ(a, x)/Γ(a), the tail probability of a Gamma(a, 1) variable.
pub fn reg_gamma_q<T: Real>(a: T, x: T) -> Result<T> {
    Ok(match inc_gamma_direct(a, x)? {
        (Direct::Upper, ln_q) => ln_q.exp(),
        (Direct::Lower, ln_p) => T::one() - ln_p.exp(),
    })
}

/// ln of the Poisson probability y^i e^{-y} / i!, stable for large i and y.
pub fn ln_poisson_pmf<T: Real>(i: u64, y: T) -> Result<T> {
    if !(y > T::zero() && y.is_finite()) {
        return Err(Error::domain(format!("Poisson mean must be positive and finite, got {y}")));
    }
    if i == 0 {
        return Ok(-y);
    }
    let fi = T::from_count(i);
    if fi >= T::c(ASYMPTOTIC_THRESHOLD) {
        // i ln y - y - ln i! = i·log1pmx((y-i)/i) - ½ ln(2π i) - μ(i+1) + ... expressed via Γ(i+1) = i Γ(i)
        Ok(fi * log1pmx((y - fi) / fi) - T::c(0.5) * (T::TAU() * fi).ln() - stirling_correction(fi))
    } else {
        Ok(fi * y.ln() - y - log_gamma(fi + T::one())?)
    }
}
