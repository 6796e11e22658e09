//! Brute-force ground truth at small scale: eigenvalues of products of complex Ginibre
//! matrices via Householder reduction to Hessenberg form and shifted QR.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sampler::{chunked, SamplerConfig};

pub const MAX_DIM: usize = 64;
pub const MAX_ORACLE_N: usize = 16;
pub const MAX_ORACLE_K: usize = 8;
/// QR sweeps allowed per unit of dimension.
const ITERATIONS_PER_DIM: usize = 40;

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("matrix dimension must be positive"));
        }
        Ok(ComplexMatrix { dim, entries: vec![Complex64::new(0.0, 0.0); dim * dim] })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        Ok(m)
    }

    pub fn diag(values: &[Complex64]) -> Result<Self> {
        let mut m = Self::zeros(values.len())?;
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        Ok(m)
    }

    pub fn from_row_major(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::domain(format!("need {dim}x{dim} entries, got {}", entries.len())));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::domain("matrix entries must be finite"));
        }
        Ok(ComplexMatrix { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn scale(&mut self, c: Complex64) {
        for z in &mut self.entries {
            *z *= c;
        }
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.dim != rhs.dim {
            return Err(Error::domain("dimension mismatch"));
        }
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n)?;
        for i in 0..n {
            for l in 0..n {
                let a = self[(i, l)];
                for j in 0..n {
                    out.entries[i * n + j] += a * rhs.entries[l * n + j];
                }
            }
        }
        Ok(out)
    }

    /// Determinant by LU with partial pivoting.
    pub fn det_lu(&self) -> Complex64 {
        let n = self.dim;
        let mut a = self.entries.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i * n + c].norm().total_cmp(&a[j * n + c].norm())).unwrap();
            if a[p * n + c].norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if p != c {
                for j in 0..n {
                    a.swap(p * n + j, c * n + j);
                }
                det = -det;
            }
            let piv = a[c * n + c];
            det *= piv;
            for i in c + 1..n {
                let f = a[i * n + c] / piv;
                for j in c + 1..n {
                    let t = a[c * n + j];
                    a[i * n + j] -= f * t;
                }
            }
        }
        det
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.dim + j]
    }
}

/// n×n matrix with i.i.d. standard complex Gaussian entries (Re, Im ~ N(0, 1/2)).
pub fn sample_ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if !(1..=MAX_DIM).contains(&n) {
        return Err(Error::domain(format!("Ginibre dimension must be in 1..={MAX_DIM}, got {n}")));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let entries = (0..n * n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        })
        .collect();
    Ok(ComplexMatrix { dim: n, entries })
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(h: &mut ComplexMatrix) {
    let n = h.dim;
    for j in 0..n.saturating_sub(2) {
        let norm = (j + 1..n).map(|i| h[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = h[(j + 1, j)];
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (j + 1..n).map(|i| h[(i, j)]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for z in &mut v {
            *z /= vn;
        }
        // H ← (I − 2vv*) H
        for c in j..n {
            let dot: Complex64 = (0..v.len()).map(|t| v[t].conj() * h[(j + 1 + t, c)]).sum();
            for t in 0..v.len() {
                h[(j + 1 + t, c)] -= 2.0 * v[t] * dot;
            }
        }
        // H ← H (I − 2vv*)
        for r in 0..n {
            let dot: Complex64 = (0..v.len()).map(|t| h[(r, j + 1 + t)] * v[t]).sum();
            for t in 0..v.len() {
                h[(r, j + 1 + t)] -= 2.0 * dot * v[t].conj();
            }
        }
        for i in j + 2..n {
            h[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Eigenvalue of [[a, b], [c, d]] closest to d.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr / 4.0 - det).sqrt();
    let l1 = tr / 2.0 + disc;
    let l2 = tr / 2.0 - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn check_consistency(mat: &ComplexMatrix, eig: &[Complex64]) -> Result<()> {
    let fro = mat.frobenius();
    let tr_err = (eig.iter().sum::<Complex64>() - mat.trace()).norm();
    if tr_err > 1e-8 * fro.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!("eigenvalue sum misses the trace by {tr_err:e} (norm {fro:e})")));
    }
    let det = mat.det_lu();
    let prod: Complex64 = eig.iter().product();
    let floor = 1e-13 * fro.powi(mat.dim as i32);
    let det_err = (prod - det).norm();
    if det_err > 1e-6 * det.norm() + floor {
        return Err(Error::Numerical(format!("eigenvalue product misses the LU determinant by {det_err:e} (|det| {:e})", det.norm())));
    }
    Ok(())
}

/// All eigenvalues, checked against the trace and the LU determinant.
pub fn eigenvalues(mat: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let n = mat.dim;
    if n > MAX_DIM {
        return Err(Error::domain(format!("eigen solver supports dim <= {MAX_DIM}, got {n}")));
    }
    let mut h = mat.clone();
    hessenberg(&mut h);
    let mut eig = vec![Complex64::new(0.0, 0.0); n];
    let cap = ITERATIONS_PER_DIM * n;
    let mut iters = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;
    loop {
        // deflate
        let mut lo = hi;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if h[(lo, lo - 1)].norm() <= f64::EPSILON * s.max(f64::MIN_POSITIVE) {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[(hi, hi)];
            since_deflation = 0;
            if hi == 0 {
                break;
            }
            hi -= 1;
            continue;
        }
        iters += 1;
        since_deflation += 1;
        if iters > cap {
            return Err(Error::Numerical(format!("QR iteration did not converge within {cap} sweeps (dim {n})")));
        }
        let mu = if since_deflation % 11 == 10 {
            // exceptional shift
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_sweep(&mut h, lo, hi, mu);
    }
    check_consistency(mat, &eig)?;
    Ok(eig)
}

/// One explicit shifted QR step H − μI = QR, H ← RQ + μI on the window [lo, hi].
fn qr_sweep(h: &mut ComplexMatrix, lo: usize, hi: usize, mu: Complex64) {
    for i in lo..=hi {
        h[(i, i)] -= mu;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for i in lo..hi {
        let a = h[(i, i)];
        let b = h[(i + 1, i)];
        let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 { (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)) } else { (a / r, b / r) };
        for j in i..=hi {
            let x = h[(i, j)];
            let y = h[(i + 1, j)];
            h[(i, j)] = c.conj() * x + s.conj() * y;
            h[(i + 1, j)] = -s * x + c * y;
        }
        rots.push((c, s));
    }
    for (t, &(c, s)) in rots.iter().enumerate() {
        let i = lo + t;
        for r in lo..=(i + 1).min(hi) {
            let x = h[(r, i)];
            let y = h[(r, i + 1)];
            h[(r, i)] = x * c + y * s;
            h[(r, i + 1)] = -x * s.conj() + y * c.conj();
        }
    }
    for i in lo..=hi {
        h[(i, i)] += mu;
    }
}

/// max_j log|λ_j|² of the product of the given factors, accumulated with per-factor
/// max-entry normalization.
pub fn max_log_sq_eig_of(factors: &[ComplexMatrix]) -> Result<f64> {
    let first = factors.first().ok_or_else(|| Error::domain("need at least one factor"))?;
    let mut log_scale = 0.0;
    let mut prod = first.clone();
    let mut normalize = |m: &mut ComplexMatrix| -> Result<()> {
        let s = m.max_abs();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Numerical(format!("degenerate product scale {s}")));
        }
        m.scale(Complex64::new(1.0 / s, 0.0));
        log_scale += s.ln();
        Ok(())
    };
    normalize(&mut prod)?;
    for f in &factors[1..] {
        prod = prod.matmul(f)?;
        normalize(&mut prod)?;
    }
    let eig = eigenvalues(&prod)?;
    let top = eig.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    Ok(top.ln() + 2.0 * log_scale)
}

/// max_j log|Z_j|² for the product of k fresh n×n Ginibre matrices.
pub fn max_log_sq_eig<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<f64> {
    if !(1..=MAX_ORACLE_N).contains(&n) || !(1..=MAX_ORACLE_K).contains(&k) {
        return Err(Error::domain(format!("oracle supports n <= {MAX_ORACLE_N}, k <= {MAX_ORACLE_K}; got n={n}, k={k}")));
    }
    let factors = (0..k).map(|_| sample_ginibre(n, rng)).collect::<Result<Vec<_>>>()?;
    max_log_sq_eig_of(&factors)
}

/// `count` oracle draws with the sampler's chunk/stream layout.
pub fn sample_oracle_max_log(n: usize, k: usize, count: usize, root_seed: u64, cfg: &SamplerConfig) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::domain("count must be >= 1"));
    }
    cfg.check((n * n * k) as u128 * count as u128)?;
    chunked(count, root_seed, cfg.chunk_size, |rng| max_log_sq_eig(n, k, rng)).into_iter().collect()
}
