//! Reproducible sampling of X_n through the decoupled representation
//! max_j log|Z_j|² =d max_j Σ_r log S_{j,r}, S_{j,r} ~ Gamma(j, 1) independent,
//! and the deterministic exact CDF of X_n for k = 1.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scaling::{rescale_max, Ensemble, ScalingConstants};
use crate::specfun::{ln_poisson_pmf, ln_reg_gamma_p, ln_reg_gamma_q, MAX_GAMMA_SHAPE};
use crate::tailbounds::chernoff_tail_sum;

/// Identifier of the generator stack recorded with every batch.
pub const GENERATOR_ID: &str = "chacha8(rand_chacha 0.9, seed_from_u64(root), set_stream(chunk)); gamma: marsaglia-tsang; normal: rand_distr ziggurat";

/// Samples per chunk; chunk c draws from stream c.
pub const DEFAULT_CHUNK: usize = 1 << 14;
/// Default cap on n·k·count gamma draws per request.
pub const DEFAULT_DRAW_BUDGET: u128 = 100_000_000_000;

/// Root seed plus stream (chunk index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(root_seed: u64, stream: u64) -> Self {
        SeedSpec { root_seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root_seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chunk_size: usize,
    pub draw_budget: u128,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { chunk_size: DEFAULT_CHUNK, draw_budget: DEFAULT_DRAW_BUDGET }
    }
}

impl SamplerConfig {
    pub(crate) fn check(&self, draws: u128) -> Result<()> {
        if self.chunk_size == 0 {
            return Err(Error::domain("chunk size must be positive"));
        }
        if draws > self.draw_budget {
            return Err(Error::Budget { requested: draws, budget: self.draw_budget });
        }
        Ok(())
    }
}

/// Marsaglia–Tsang sampler for Gamma(shape, 1), shape ≥ 1.
#[derive(Debug, Clone, Copy)]
pub struct GammaSampler {
    d: f64,
    c: f64,
}

impl GammaSampler {
    pub fn new(shape: f64) -> Result<Self> {
        if !(shape >= 1.0 && shape.is_finite()) {
            return Err(Error::domain(format!("gamma shape must be >= 1, got {shape}")));
        }
        let d = shape - 1.0 / 3.0;
        Ok(GammaSampler { d, c: 1.0 / (9.0 * d).sqrt() })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x: f64 = rng.sample(StandardNormal);
            let t = 1.0 + self.c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u: f64 = rng.random();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + self.d * (1.0 - v + v.ln()) {
                return self.d * v;
            }
        }
    }

    /// ln(S_1 ⋯ S_k) for k independent draws, with a single logarithm at the end.
    #[inline]
    pub fn log_product<R: Rng + ?Sized>(&self, k: u64, rng: &mut R) -> f64 {
        let mut acc = 1.0f64;
        let mut e2 = 0i64;
        for r in 0..k {
            acc *= self.sample(rng);
            if r & 3 == 3 {
                renormalize(&mut acc, &mut e2);
            }
        }
        renormalize(&mut acc, &mut e2);
        acc.ln() + e2 as f64 * std::f64::consts::LN_2
    }
}

/// Moves the binary exponent of `acc` into `e2`, leaving acc ∈ [1, 2).
#[inline]
fn renormalize(acc: &mut f64, e2: &mut i64) {
    const EXP_MASK: u64 = 0x7ff << 52;
    let mut bits = acc.to_bits();
    if bits & EXP_MASK == 0 {
        if *acc == 0.0 {
            return;
        }
        // subnormal
        *acc *= 2f64.powi(600);
        *e2 -= 600;
        bits = acc.to_bits();
    }
    let ex = ((bits & EXP_MASK) >> 52) as i64 - 1023;
    *e2 += ex;
    *acc = f64::from_bits((bits & !EXP_MASK) | (1023u64 << 52));
}

/// One Gamma(shape, 1) draw.
pub fn gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    Ok(GammaSampler::new(shape)?.sample(rng))
}

/// Runs `per_sample` for `count` samples in chunk order; chunk c uses stream c.
pub(crate) fn chunked<T, F>(count: usize, root_seed: u64, chunk: usize, per_sample: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let chunks = count.div_ceil(chunk);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = chunk.min(count - c * chunk);
            let mut rng = SeedSpec::new(root_seed, c as u64).rng();
            (0..len).map(|_| per_sample(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// Draws of max_{1≤j≤n} log Y_j with log Y_j = Σ_{r≤k} log S_{j,r}.
pub fn sample_max_log_y(e: &Ensemble, count: usize, root_seed: u64, cfg: &SamplerConfig) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::domain("count must be >= 1"));
    }
    cfg.check(e.n as u128 * e.k as u128 * count as u128)?;
    let table: Vec<GammaSampler> = (1..=e.n).map(|j| GammaSampler::new(j as f64)).collect::<Result<_>>()?;
    let k = e.k;
    Ok(chunked(count, root_seed, cfg.chunk_size, |rng| {
        table.iter().fold(f64::NEG_INFINITY, |m, g| m.max(g.log_product(k, rng)))
    }))
}

/// Draws of log Y_j = Σ_{r≤k} log S_{j,r} for one shape j.
pub fn sample_log_y(j: u64, k: u64, count: usize, root_seed: u64, cfg: &SamplerConfig) -> Result<Vec<f64>> {
    if count == 0 || k == 0 {
        return Err(Error::domain("count and k must be >= 1"));
    }
    cfg.check(k as u128 * count as u128)?;
    let g = GammaSampler::new(j as f64)?;
    Ok(chunked(count, root_seed, cfg.chunk_size, |rng| g.log_product(k, rng)))
}

/// Draws of Σ_{r≤k} S_r with S_r ~ Gamma(j, 1).
pub fn sample_gamma_sum(j: u64, k: u64, count: usize, root_seed: u64, cfg: &SamplerConfig) -> Result<Vec<f64>> {
    if count == 0 || k == 0 {
        return Err(Error::domain("count and k must be >= 1"));
    }
    cfg.check(k as u128 * count as u128)?;
    let g = GammaSampler::new(j as f64)?;
    Ok(chunked(count, root_seed, cfg.chunk_size, |rng| (0..k).map(|_| g.sample(rng)).sum()))
}

/// Draws of X_n for one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub e: Ensemble,
    pub sc: ScalingConstants<f64>,
    pub seed: SeedSpec,
    pub count: usize,
    pub generator: &'static str,
}

/// JSON sidecar written next to an exported batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub n: u64,
    pub k: u64,
    pub alpha_n: f64,
    pub a_n: f64,
    pub b_n: f64,
    pub count: usize,
    pub root_seed: u64,
    pub generator: String,
}

impl SampleBatch {
    pub fn meta(&self) -> BatchMeta {
        BatchMeta {
            n: self.e.n,
            k: self.e.k,
            alpha_n: self.sc.alpha_n,
            a_n: self.sc.a_n,
            b_n: self.sc.b_n,
            count: self.count,
            root_seed: self.seed.root_seed,
            generator: self.generator.to_string(),
        }
    }

    /// CSV with header `index,x_value`, values at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,x_value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{v:.16e}")?;
        }
        Ok(())
    }

    /// Writes `path` (CSV) and `path` with extension `.meta.json`.
    pub fn export(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)?;
        let meta = serde_json::to_string_pretty(&self.meta())?;
        std::fs::write(sidecar_path(path), meta + "\n")?;
        Ok(())
    }
}

/// `out.csv` → `out.meta.json`.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("meta.json")
}

/// `count` draws of X_n, identical for any thread count.
pub fn sample_xn(sc: &ScalingConstants<f64>, count: usize, root_seed: u64) -> Result<SampleBatch> {
    sample_xn_with(sc, count, root_seed, &SamplerConfig::default())
}

pub fn sample_xn_with(
    sc: &ScalingConstants<f64>,
    count: usize,
    root_seed: u64,
    cfg: &SamplerConfig,
) -> Result<SampleBatch> {
    let e = sc.ensemble;
    let raw = sample_max_log_y(&e, count, root_seed, cfg)?;
    let values: Vec<f64> = raw.into_iter().map(|r| rescale_max(r, sc)).collect();
    Ok(SampleBatch { values, e, sc: *sc, seed: SeedSpec::new(root_seed, 0), count, generator: GENERATOR_ID })
}

/// Target for the dropped part of −ln P(X_n ≤ x) in the exact k = 1 CDF.
pub const EXACT_TAIL_TOL: f64 = 1e-15;
/// Recurrence steps between re-anchoring evaluations of the incomplete gamma function.
const REANCHOR: u64 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactCdf {
    pub value: f64,
    pub log_value: f64,
    /// Number of factors m = 0, …, M−1 evaluated.
    pub terms_used: u64,
    /// Certified bound on the dropped part of the log.
    pub tail_bound: f64,
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Bound on Σ_{j≤j0} −ln P(j, y), from Q(j, y) ≤ Q(j0, y) ≤ pmf(j0−1; y)·y/(y − j0 + 1).
fn poisson_tail_bound(j0: u64, y: f64) -> f64 {
    if j0 == 0 {
        return 0.0;
    }
    let jm1 = (j0 - 1) as f64;
    if y <= jm1 {
        return f64::INFINITY;
    }
    let q = (ln_poisson_pmf(j0 - 1, y).unwrap_or(0.0) + (y / (y - jm1)).ln()).exp();
    if q >= 1.0 {
        return f64::INFINITY;
    }
    j0 as f64 * q / (1.0 - q)
}

/// P(X_n ≤ x) for k = 1 as ∏_{m<M} (1 − Q(n−m, e^t)), t = ψ(n) + (a_n + b_n x)/√α_n,
/// where M is the smallest count for which both the Chernoff tail sum and the Poisson
/// bound certify the dropped log-factors below `EXACT_TAIL_TOL`.
pub fn exact_cdf_k1(sc: &ScalingConstants<f64>, x: f64) -> Result<ExactCdf> {
    exact_cdf_k1_terms(sc, x, None)
}

/// As [`exact_cdf_k1`], optionally forcing the number of evaluated factors.
pub fn exact_cdf_k1_terms(sc: &ScalingConstants<f64>, x: f64, force_terms: Option<u64>) -> Result<ExactCdf> {
    let e = sc.ensemble;
    if e.k != 1 {
        return Err(Error::domain(format!("exact CDF needs k = 1, got k={}", e.k)));
    }
    if e.n as f64 > MAX_GAMMA_SHAPE {
        return Err(Error::domain(format!("exact CDF supports n <= {MAX_GAMMA_SHAPE:e}, got {}", e.n)));
    }
    if !x.is_finite() {
        return Err(Error::domain("x must be finite"));
    }
    let n = e.n;
    let ln_y = sc.threshold(x);
    let y = ln_y.exp();
    if y == 0.0 {
        return Ok(ExactCdf { value: 0.0, log_value: f64::NEG_INFINITY, terms_used: 0, tail_bound: 0.0 });
    }
    if y.is_infinite() || ln_y > (n as f64).ln() + 40.0 {
        // every Q(j, y) with j ≤ n is below e^{-y/2}
        return Ok(ExactCdf { value: 1.0, log_value: 0.0, terms_used: 0, tail_bound: n as f64 * (-y / 2.0).exp() });
    }

    let certified = |m: u64| -> Option<f64> {
        let pois = poisson_tail_bound(n - m, y);
        let ch = chernoff_tail_sum(m, x, sc);
        let ch = if ch < 0.5 { ch / (1.0 - ch) } else { f64::INFINITY };
        let b = pois.max(ch);
        (b <= EXACT_TAIL_TOL).then_some(b)
    };
    let (terms, tail_bound) = match force_terms {
        Some(t) => {
            let t = t.min(n);
            (t, if t == n { 0.0 } else { certified(t).unwrap_or(f64::INFINITY) })
        }
        None => {
            // exponential then binary search for the smallest certified M
            let mut hi = 1u64;
            while hi < n && certified(hi).is_none() {
                hi = hi.saturating_mul(2).min(n);
            }
            if hi >= n {
                (n, 0.0)
            } else {
                let mut lo = hi / 2;
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if certified(mid).is_some() {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let lo_ok = lo > 0 && certified(lo).is_some();
                let m = if lo_ok { lo } else { hi };
                (m, certified(m).unwrap_or(0.0))
            }
        }
    };

    let log_value = sum_log_p(n, n - terms, y)?;
    Ok(ExactCdf { value: log_value.exp(), log_value, terms_used: terms, tail_bound })
}

/// Σ_{j0 < j ≤ n} ln P(j, y) using positive-term recurrences:
/// Q(j+1) = Q(j) + pmf(j) below the median and P(j) = P(j+1) + pmf(j) above it.
fn sum_log_p(n: u64, j0: u64, y: f64) -> Result<f64> {
    if j0 >= n {
        return Ok(0.0);
    }
    // j ≤ split: Q(j, y) < ~1/2; j > split: P(j, y) < ~1/2
    let split = (y.floor().max(0.0) as u64).clamp(j0, n);
    let mut total = 0.0;

    // upward in j over (j0, split], accumulating ln Q
    let mut j = j0 + 1;
    while j <= split {
        let block_end = (j + REANCHOR - 1).min(split);
        let mut ln_q = ln_reg_gamma_q(j as f64, y)?;
        let mut ln_pmf = ln_poisson_pmf(j, y)?;
        loop {
            total += (-ln_q.exp()).ln_1p();
            if j == block_end {
                break;
            }
            // Q(j+1) = Q(j) + pmf(j; y)
            ln_q = ln_add(ln_q, ln_pmf);
            j += 1;
            ln_pmf += (y / j as f64).ln();
        }
        j = block_end + 1;
    }

    // downward in j over (split, n], accumulating ln P
    let mut j = n;
    while j > split {
        let block_end = j.saturating_sub(REANCHOR - 1).max(split + 1);
        let mut ln_p = ln_reg_gamma_p(j as f64, y)?;
        loop {
            total += ln_p;
            if j == block_end {
                break;
            }
            // P(j−1) = P(j) + pmf(j−1; y)
            j -= 1;
            ln_p = ln_add(ln_p, ln_poisson_pmf(j, y)?);
        }
        j = block_end - 1;
    }
    Ok(total)
}
