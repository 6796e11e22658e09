use std::cell::Cell;

use serde::Serialize;

use ginibre_evt::edgeworth::{cumulants, edgeworth_cdf};
use ginibre_evt::empirics::{kolmogorov_distance_fn, two_sample_ks, Ecdf};
use ginibre_evt::ginibre_oracle::sample_oracle_max_log;
use ginibre_evt::limits::{sup_distance, LimitLaw};
use ginibre_evt::rates::{remark4_sups, remark4_upper_bounds, transition_rate, TransitionSide};
use ginibre_evt::sampler::{exact_cdf_k1, sample_log_y, sample_max_log_y, sample_xn, SamplerConfig};
use ginibre_evt::scaling::{constants_for, Ensemble, RegimeDecl};
use ginibre_evt::specfun::norm_cdf;
use ginibre_evt::{GridPolicy, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Decoupling,
    Bounds,
    Transition,
    Edgeworth,
    ExactK1,
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    pub upper: f64,
    /// Whether `value` must be strictly below `upper`.
    pub strict: bool,
}

impl Check {
    fn within(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        let pass = value >= lower && value <= upper;
        Check { name: name.into(), pass, value, lower: Some(lower), upper, strict: false }
    }

    fn below(name: impl Into<String>, value: f64, upper: f64) -> Self {
        Check { name: name.into(), pass: value < upper, value, lower: None, upper, strict: true }
    }
}

pub fn run(suite: Suite, seed: u64, grid: &GridPolicy) -> Result<Vec<Check>> {
    match suite {
        Suite::Decoupling => decoupling(seed),
        Suite::Bounds => bounds(grid),
        Suite::Transition => transition(grid),
        Suite::Edgeworth => edgeworth(seed),
        Suite::ExactK1 => exact_k1(seed),
    }
}

fn decoupling(seed: u64) -> Result<Vec<Check>> {
    let cfg = SamplerConfig::default();
    let count = 20_000;
    let oracle = sample_oracle_max_log(4, 2, count, seed, &cfg)?;
    let dec = sample_max_log_y(&Ensemble::new(4, 2)?, count, seed.wrapping_add(1), &cfg)?;
    let r = two_sample_ks(&Ecdf::new(oracle)?, &Ecdf::new(dec)?);
    let crit = r.critical_value_99.unwrap_or(0.0);
    Ok(vec![Check::below("two-sample KS, n=4, k=2, 2e4 each", r.statistic, crit)])
}

fn bounds(grid: &GridPolicy) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for alpha in [0.5, 1.0, 2.0, 5.0] {
        let ((s1, _), (s2, _)) = remark4_sups(alpha, grid)?;
        let (b1, b2) = remark4_upper_bounds(alpha)?;
        out.push(Check::within(format!("q1 series sup, alpha={alpha}"), s1, 0.0, b1));
        out.push(Check::within(format!("q2 series sup, alpha={alpha}"), s2, 0.0, b2));
    }
    Ok(out)
}

fn transition(grid: &GridPolicy) -> Result<Vec<Check>> {
    let alpha = 1e-4;
    let (d, _) = sup_distance(&LimitLaw::phi_alpha(alpha)?, &LimitLaw::StdNormal, grid)?;
    let t = transition_rate(alpha, TransitionSide::ToNormal)?;
    let mut out = vec![Check::within("sup|Phi_alpha - Phi| / rate, alpha=1e-4", d / t, 0.95, 1.05)];
    let mut prev = f64::INFINITY;
    for alpha in [1e4, 1e6, 1e8] {
        let (d, _) = sup_distance(&LimitLaw::phi_alpha(alpha)?, &LimitLaw::Gumbel, grid)?;
        let t = transition_rate(alpha, TransitionSide::ToGumbel)?;
        out.push(Check::within(format!("sup|Phi_alpha - Gumbel| / rate, alpha={alpha:e}"), d / t, 1.0 / 1.5, 1.5));
        out.push(Check::within(format!("sup|Phi_alpha - Gumbel| decreasing, alpha={alpha:e}"), d, 0.0, prev));
        prev = d;
    }
    Ok(out)
}

fn edgeworth(seed: u64) -> Result<Vec<Check>> {
    let (j, k) = (50u64, 200u64);
    let draws = sample_log_y(j, k, 1_000_000, seed, &SamplerConfig::default())?;
    let c = cumulants(j)?;
    let (mu, sd) = (k as f64 * c.mu, (k as f64 * c.sigma2).sqrt());
    let ecdf = Ecdf::new(draws.iter().map(|v| (v - mu) / sd).collect())?;
    let n = ecdf.count() as f64;
    let (mut se, mut sn) = (0.0f64, 0.0f64);
    for (i, &x) in ecdf.sorted_values().iter().enumerate() {
        if !(-3.0..=3.0).contains(&x) {
            continue;
        }
        let (lo, hi) = (i as f64 / n, (i + 1) as f64 / n);
        let e = edgeworth_cdf(j, k, x)?.value;
        let p = norm_cdf(x);
        se = se.max((e - lo).abs()).max((e - hi).abs());
        sn = sn.max((p - lo).abs()).max((p - hi).abs());
    }
    let at2 = ecdf.eval(2.0);
    let e2 = (edgeworth_cdf(j, k, 2.0)?.value - at2).abs();
    let n2 = (norm_cdf(2.0) - at2).abs();
    Ok(vec![
        Check::below("sup over [-3, 3]: Edgeworth error / normal error", se / sn, 1.0),
        Check::below("at x=2: Edgeworth error / normal error", e2 / n2, 1.0),
    ])
}

fn exact_k1(seed: u64) -> Result<Vec<Check>> {
    let s = constants_for::<f64>(&Ensemble::new(1000, 1)?, &RegimeDecl::AlphaInfinite)?;
    let batch = sample_xn(&s, 100_000, seed)?;
    let ecdf = Ecdf::new(batch.values)?;
    let failed = Cell::new(false);
    let r = kolmogorov_distance_fn(&ecdf, |x| {
        exact_cdf_k1(&s, x).map(|c| c.value).unwrap_or_else(|_| {
            failed.set(true);
            f64::NAN
        })
    });
    if failed.get() {
        return Err(ginibre_evt::Error::Numerical("exact CDF evaluation failed".into()));
    }
    Ok(vec![Check::within("max |ECDF - exact CDF|, n=1000, 1e5 draws", r.statistic, 0.0, r.dkw_radius_99)])
}
