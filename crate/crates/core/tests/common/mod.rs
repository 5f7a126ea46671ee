//! Test-side oracles written without reference to the library's linear algebra.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voi_core::{EigenPrior, Matrix, SampleDesign};

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &Matrix<f64>) -> Dense {
    m.to_rows()
}

pub fn dense_mul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let p = b[0].len();
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..b.len() {
            for j in 0..p {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// Gauss-Jordan elimination with partial pivoting.
pub fn dense_inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn dense_trace(a: &Dense) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

/// `(Σ⁻¹ + WᵀW/σ_u²)⁻¹` by two explicit inversions.
pub fn dense_posterior(prior: &EigenPrior<f64>, design: &SampleDesign<f64>) -> Dense {
    let k = prior.dim();
    let sigma = to_dense(&prior.covariance());
    let mut prec = dense_inverse(&sigma);
    for w in design.covariates() {
        for i in 0..k {
            for j in 0..k {
                prec[i][j] += w[i] * w[j] / design.noise_variance();
            }
        }
    }
    dense_inverse(&prec)
}

/// `(trace Σ − trace posterior)/K` from the dense path.
pub fn dense_value(prior: &EigenPrior<f64>, design: &SampleDesign<f64>) -> f64 {
    let k = prior.dim() as f64;
    (dense_trace(&to_dense(&prior.covariance())) - dense_trace(&dense_posterior(prior, design))) / k
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Orthonormal basis by Householder reflections of random vectors.
pub fn orthonormal(rng: &mut impl Rng, k: usize) -> Matrix<f64> {
    let mut q: Dense = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..3 {
        let h = unit(rng, k);
        // q ← (I − 2hhᵀ) q
        for c in 0..k {
            let d: f64 = (0..k).map(|r| h[r] * q[r][c]).sum();
            for r in 0..k {
                q[r][c] -= 2.0 * h[r] * d;
            }
        }
    }
    Matrix::from_rows(&q).unwrap()
}

pub fn spectrum(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let mut l: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..5.0)).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    l
}

pub fn prior(rng: &mut impl Rng, k: usize) -> EigenPrior<f64> {
    let l = spectrum(rng, k);
    let v = orthonormal(rng, k);
    EigenPrior::new(vec![0.0; k], l, v).unwrap()
}

pub fn design(rng: &mut impl Rng, k: usize, n: usize, noise: f64) -> SampleDesign<f64> {
    SampleDesign::new((0..n).map(|_| unit(rng, k)).collect(), noise).unwrap()
}

pub fn diag_prior(l: &[f64]) -> EigenPrior<f64> {
    EigenPrior::new(vec![0.0; l.len()], l.to_vec(), Matrix::identity(l.len())).unwrap()
}

/// A spread of `from` built by moving mass from smaller to larger entries.
pub fn spread(rng: &mut impl Rng, from: &[f64]) -> Vec<f64> {
    let mut v = from.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let i = rng.random_range(0..v.len() - 1);
    let j = rng.random_range(i + 1..v.len());
    let t = rng.random_range(0.05..0.8) * v[j];
    v[i] += t;
    v[j] -= t;
    v
}

/// Prefix-sum majorization, written independently.
pub fn majorizes(spread: &[f64], base: &[f64]) -> bool {
    let sort = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    };
    let (a, b) = (sort(spread), sort(base));
    let (mut sa, mut sb) = (0.0, 0.0);
    a.iter().zip(&b).all(|(x, y)| {
        sa += x;
        sb += y;
        sa >= sb - 1e-12
    })
}
