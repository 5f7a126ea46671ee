//! Normal priors held in spectral form, the J-deep prior family, KL
//! divergence to the flat prior, and mean-preserving-spread checks.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VoiError};
use crate::linalg::{gram_schmidt_complete, norm, symmetric_eigen, Matrix};
use crate::scalar::{compensated_sum, Scalar};

/// Orthonormality and reconstruction tolerance (Frobenius norm).
pub const ORTHO_TOL: f64 = 1e-10;
/// Trace agreement required before two spectra can be compared as spreads.
pub const TRACE_TOL: f64 = 1e-9;
/// Two spectra with all entries within this (relative) distance are flat.
pub const FLAT_TOL: f64 = 1e-12;

/// Prior `N(μ, V diag(λ) Vᵀ)` with `λ` descending and strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorDocument<T>", into = "PriorDocument<T>")]
#[serde(bound = "T: Scalar")]
pub struct EigenPrior<T: Scalar> {
    mean: Vec<T>,
    eigenvalues: Vec<T>,
    eigenvectors: Matrix<T>,
}

/// On-disk layout: `{ "K", "mean", "eigenvalues", "eigenvectors" }`, where
/// `eigenvectors` lists the rows of `V` (column `k` is the `k`th eigenvector).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PriorDocument<T> {
    #[serde(rename = "K")]
    pub k: usize,
    pub mean: Vec<T>,
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Vec<Vec<T>>,
}

impl<T: Scalar> TryFrom<PriorDocument<T>> for EigenPrior<T> {
    type Error = VoiError;

    fn try_from(doc: PriorDocument<T>) -> Result<Self> {
        if doc.eigenvalues.len() != doc.k {
            return Err(VoiError::DimensionMismatch {
                expected: doc.k,
                found: doc.eigenvalues.len(),
            });
        }
        if doc.eigenvectors.len() != doc.k {
            return Err(VoiError::DimensionMismatch {
                expected: doc.k,
                found: doc.eigenvectors.len(),
            });
        }
        let v = Matrix::from_rows(&doc.eigenvectors)
            .ok_or_else(|| invalid("eigenvectors", "ragged rows"))?;
        EigenPrior::new(doc.mean, doc.eigenvalues, v)
    }
}

impl<T: Scalar> From<EigenPrior<T>> for PriorDocument<T> {
    fn from(p: EigenPrior<T>) -> Self {
        PriorDocument {
            k: p.dim(),
            eigenvectors: p.eigenvectors.to_rows(),
            mean: p.mean,
            eigenvalues: p.eigenvalues,
        }
    }
}

impl<T: Scalar> EigenPrior<T> {
    /// Validates and stores an eigendecomposed prior. Eigenpairs are sorted
    /// into descending order (stable, so ties keep their given order) and each
    /// eigenvector's leading nonzero component is made positive.
    pub fn new(mean: Vec<T>, eigenvalues: Vec<T>, eigenvectors: Matrix<T>) -> Result<Self> {
        let k = eigenvalues.len();
        if k < 2 {
            return Err(invalid("K", format!("need at least 2 states, got {k}")));
        }
        if mean.len() != k {
            return Err(VoiError::DimensionMismatch {
                expected: k,
                found: mean.len(),
            });
        }
        if eigenvectors.rows() != k || eigenvectors.cols() != k {
            return Err(VoiError::DimensionMismatch {
                expected: k,
                found: eigenvectors.cols(),
            });
        }
        if let Some((index, &value)) = eigenvalues
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > T::zero()))
        {
            return Err(VoiError::NonPositiveEigenvalue {
                index,
                value: value.as_f64(),
            });
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid("mean", "entries must be finite"));
        }

        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| eigenvalues[j].partial_cmp(&eigenvalues[i]).expect("finite"));
        let eigenvalues: Vec<T> = order.iter().map(|&i| eigenvalues[i]).collect();
        let mut eigenvectors = Matrix::from_fn(k, k, |i, j| eigenvectors[(i, order[j])]);
        eigenvectors.normalize_column_signs();

        let residual = eigenvectors.orthonormality_residual();
        if !(residual <= T::tol(ORTHO_TOL)) {
            return Err(VoiError::NotOrthonormal {
                residual: residual.as_f64(),
            });
        }
        let prior = Self {
            mean,
            eigenvalues,
            eigenvectors,
        };
        let sym = prior.covariance().symmetry_residual();
        if !(sym <= T::tol(ORTHO_TOL)) {
            return Err(VoiError::NotSymmetric {
                residual: sym.as_f64(),
            });
        }
        Ok(prior)
    }

    /// Same mean and eigenvectors, new spectrum. Used for the J-deep family,
    /// where `V` is already validated.
    pub(crate) fn with_spectrum(&self, eigenvalues: Vec<T>) -> Self {
        debug_assert_eq!(eigenvalues.len(), self.dim());
        Self {
            mean: self.mean.clone(),
            eigenvalues,
            eigenvectors: self.eigenvectors.clone(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix<T> {
        &self.eigenvectors
    }

    /// The `k`th eigenvector (0-based).
    pub fn eigenvector(&self, k: usize) -> Vec<T> {
        self.eigenvectors.column(k)
    }

    pub fn trace(&self) -> T {
        compensated_sum(self.eigenvalues.iter().copied())
    }

    /// `λ̄`, the mean eigenvalue.
    pub fn mean_eigenvalue(&self) -> T {
        self.trace() / T::of_usize(self.dim())
    }

    /// `Σ = V diag(λ) Vᵀ`.
    pub fn covariance(&self) -> Matrix<T> {
        self.eigenvectors.congruence_diag(&self.eigenvalues)
    }

    pub fn distribution(&self) -> EigenvalueDistribution<T> {
        EigenvalueDistribution::from_sorted(self.eigenvalues.clone())
    }

    /// True if every eigenvalue equals `λ̄` up to a relative `1e-12`.
    pub fn is_flat(&self) -> bool {
        is_flat(&self.eigenvalues)
    }
}

pub(crate) fn is_flat<T: Scalar>(values: &[T]) -> bool {
    let mean = compensated_sum(values.iter().copied()) / T::of_usize(values.len());
    values
        .iter()
        .all(|&v| (v - mean).abs() <= T::tol(FLAT_TOL) * mean.abs())
}

fn check_dim(k: usize) -> Result<()> {
    if k < 2 {
        return Err(invalid("K", format!("need at least 2 states, got {k}")));
    }
    Ok(())
}

fn check_positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if !(v.is_finite() && v > T::zero()) {
        return Err(invalid(
            name,
            format!("must be positive and finite, got {v}"),
        ));
    }
    Ok(())
}

/// Spectrum of the equicorrelated matrix with variance `variance` and
/// correlation `rho`.
pub fn pairwise_eigenvalues<T: Scalar>(k: usize, variance: T, rho: T) -> Vec<T> {
    let big = variance * (T::one() + rho * T::of_usize(k - 1));
    let small = variance * (T::one() - rho);
    std::iter::once(big)
        .chain(std::iter::repeat_n(small, k - 1))
        .collect()
}

/// Equal variances and equal pairwise correlations: `λ_1 = σ²(1+ρ(K−1))` along
/// `𝟙/√K` and `σ²(1−ρ)` on its orthogonal complement, completed by
/// Gram-Schmidt on `e_1, e_2, …`.
pub fn prior_pairwise<T: Scalar>(k: usize, variance: T, rho: T) -> Result<EigenPrior<T>> {
    check_dim(k)?;
    check_positive("variance", variance)?;
    if !(rho >= T::zero() && rho < T::one()) {
        return Err(invalid("rho", format!("must lie in [0, 1), got {rho}")));
    }
    let inv_sqrt = T::one() / T::of_usize(k).sqrt();
    let basis = gram_schmidt_complete(&[vec![inv_sqrt; k]], k).expect("nonzero seed");
    EigenPrior::new(
        vec![T::zero(); k],
        pairwise_eigenvalues(k, variance, rho),
        basis,
    )
}

/// Eigenvalues of `ν² min{j, k}`:
/// `λ_k = (ν²/4) csc²((2k−1)π / (2(2K+1)))`.
pub fn random_walk_eigenvalues<T: Scalar>(k: usize, step_variance: T) -> Vec<T> {
    let denom = T::lit(2.0) * T::of_usize(2 * k + 1);
    (1..=k)
        .map(|i| {
            let s = (T::of_usize(2 * i - 1) * T::PI() / denom).sin();
            step_variance / (T::lit(4.0) * s * s)
        })
        .collect()
}

/// Random walk started at the known value `start` with i.i.d. `N(0, ν²)`
/// increments, so `Σ_{jk} = ν² min{j, k}`. Eigenpairs are in closed form; the
/// `k`th eigenvector has `j`th component `2/√(2K+1) · sin(j(2k−1)π/(2K+1))`.
pub fn prior_random_walk<T: Scalar>(k: usize, step_variance: T, start: T) -> Result<EigenPrior<T>> {
    check_dim(k)?;
    check_positive("nu2", step_variance)?;
    if !start.is_finite() {
        return Err(invalid("theta0", "must be finite"));
    }
    let m = T::of_usize(2 * k + 1);
    let scale = T::lit(2.0) / m.sqrt();
    let v = Matrix::from_fn(k, k, |j, col| {
        let arg = T::of_usize((j + 1) * (2 * col + 1)) * T::PI() / m;
        scale * arg.sin()
    });
    EigenPrior::new(vec![start; k], random_walk_eigenvalues(k, step_variance), v)
}

/// `λ_k = Kα(1−α)^{k−1} / (1 − (1−α)^K)`, mean exactly one.
pub fn geometric_eigenvalues<T: Scalar>(k: usize, alpha: T) -> Vec<T> {
    let log_keep = (-alpha).ln_1p();
    let norm = -(T::of_usize(k) * log_keep).exp_m1();
    // Kα/(1-(1-α)^K) → 1 as α → 0; the expm1 form keeps that limit accurate.
    let lead = T::of_usize(k) * alpha / norm;
    (0..k)
        .map(|i| lead * (T::of_usize(i) * log_keep).exp())
        .collect()
}

/// Geometrically decaying spectrum `λ_{k+1} = (1−α) λ_k` with `λ̄ = 1`, placed on
/// the given orthonormal basis.
pub fn prior_geometric<T: Scalar>(k: usize, alpha: T, basis: Matrix<T>) -> Result<EigenPrior<T>> {
    check_dim(k)?;
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    EigenPrior::new(vec![T::zero(); k], geometric_eigenvalues(k, alpha), basis)
}

/// Builds the prior from known attribute coordinates: the attributes are
/// orthonormalized in order to give `v_1..v_J`, and the orthogonal complement is
/// filled from the standard basis to give `v_{J+1}..v_K`.
pub fn prior_from_attributes<T: Scalar>(
    attributes: &[Vec<T>],
    spectrum: Vec<T>,
    mean: Vec<T>,
) -> Result<EigenPrior<T>> {
    let k = spectrum.len();
    check_dim(k)?;
    if attributes.len() > k {
        return Err(invalid(
            "attributes",
            format!("{} attributes exceed K = {k}", attributes.len()),
        ));
    }
    if let Some(a) = attributes.iter().find(|a| a.len() != k) {
        return Err(VoiError::DimensionMismatch {
            expected: k,
            found: a.len(),
        });
    }
    if spectrum.windows(2).any(|w| w[0] < w[1]) {
        return Err(invalid("spectrum", "must be descending"));
    }
    let normalized: Vec<Vec<T>> = attributes
        .iter()
        .map(|a| {
            let n = norm(a);
            a.iter().map(|&x| x / n).collect()
        })
        .collect();
    let det = gram_determinant(&normalized);
    if !(det > T::lit(1e-12)) {
        return Err(VoiError::RankDeficient {
            determinant: det.as_f64(),
        });
    }
    let basis = gram_schmidt_complete(&normalized, k).map_err(|_| VoiError::RankDeficient {
        determinant: det.as_f64(),
    })?;
    EigenPrior::new(mean, spectrum, basis)
}

fn gram_determinant<T: Scalar>(vectors: &[Vec<T>]) -> T {
    if vectors.is_empty() {
        return T::one();
    }
    let g = Matrix::from_fn(vectors.len(), vectors.len(), |i, j| {
        crate::linalg::dot(&vectors[i], &vectors[j])
    });
    symmetric_eigen(&g)
        .values
        .iter()
        .fold(T::one(), |acc, &v| acc * v)
}

/// The prior of an agent who knows the top `J` eigenpairs and the trace, and
/// treats the remaining directions as equally influential.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeLadder<T: Scalar> {
    base: EigenPrior<T>,
    depth: usize,
    eigenvalues: Vec<T>,
    tail_mean: T,
}

impl<T: Scalar> KnowledgeLadder<T> {
    pub fn base(&self) -> &EigenPrior<T> {
        &self.base
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `λ^(J)`.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// `λ_K^(J)`, the common value of the unknown tail.
    pub fn tail_mean(&self) -> T {
        self.tail_mean
    }

    /// `Σ^(J)` as a prior on the base's eigenvectors.
    pub fn prior(&self) -> EigenPrior<T> {
        self.base.with_spectrum(self.eigenvalues.clone())
    }
}

/// `λ^(J)`: keeps `λ_1..λ_J` and replaces the rest by their mean. Returns the
/// spectrum and the tail mean (`λ_K` when `J = K`).
pub fn jdeep_spectrum<T: Scalar>(eigenvalues: &[T], depth: usize) -> (Vec<T>, T) {
    let k = eigenvalues.len();
    assert!(depth <= k, "depth {depth} exceeds K = {k}");
    let tail_mean = if depth == k {
        eigenvalues[k - 1]
    } else {
        compensated_sum(eigenvalues[depth..].iter().copied()) / T::of_usize(k - depth)
    };
    let mut out = eigenvalues[..depth].to_vec();
    out.resize(k, tail_mean);
    (out, tail_mean)
}

pub fn jdeep<T: Scalar>(prior: &EigenPrior<T>, depth: usize) -> Result<KnowledgeLadder<T>> {
    if depth > prior.dim() {
        return Err(invalid(
            "J",
            format!("depth {depth} outside 0..={}", prior.dim()),
        ));
    }
    let (eigenvalues, tail_mean) = jdeep_spectrum(prior.eigenvalues(), depth);
    Ok(KnowledgeLadder {
        base: prior.clone(),
        depth,
        eigenvalues,
        tail_mean,
    })
}

/// `−½ Σ_k ln(λ_k / λ̄)` for a positive spectrum.
pub fn kl_divergence_of_spectrum<T: Scalar>(eigenvalues: &[T]) -> T {
    if is_flat(eigenvalues) {
        return T::zero();
    }
    let mean = compensated_sum(eigenvalues.iter().copied()) / T::of_usize(eigenvalues.len());
    let d = -T::lit(0.5) * compensated_sum(eigenvalues.iter().map(|&l| (l / mean).ln()));
    d.max(T::zero())
}

/// KL divergence from the prior to the flat prior `N(μ, λ̄ I)`.
pub fn kl_divergence_to_naive<T: Scalar>(prior: &EigenPrior<T>) -> T {
    kl_divergence_of_spectrum(prior.eigenvalues())
}

/// Closed-form KL divergence of the equicorrelated prior from its flat
/// counterpart: `−[ln(1+ρ(K−1)) + (K−1) ln(1−ρ)] / 2`.
pub fn pairwise_kl_divergence<T: Scalar>(k: usize, rho: T) -> T {
    let km1 = T::of_usize(k - 1);
    -((rho * km1).ln_1p() + km1 * (-rho).ln_1p()) / T::lit(2.0)
}

/// Upper end of the correlation search interval.
pub const RHO_MAX: f64 = 1.0 - 1e-9;

/// The correlation `ρ` at which the equicorrelated prior on the same number of
/// states has the same KL divergence to its flat prior as `prior`.
///
/// Both divergences are scale-free, so the trace-matching step variance
/// `ν² = 2σ²/(K+1)` does not change the answer.
pub fn equivalent_pairwise_correlation<T: Scalar>(prior: &EigenPrior<T>) -> T {
    let k = prior.dim();
    let target = kl_divergence_to_naive(prior);
    let (mut lo, mut hi) = (T::zero(), T::lit(RHO_MAX));
    if pairwise_kl_divergence(k, hi) <= target {
        return hi;
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if pairwise_kl_divergence(k, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::tol(1e-13) {
            break;
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// A positive spectrum held in descending order with its prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueDistribution<T> {
    values: Vec<T>,
    prefix_sums: Vec<T>,
}

impl<T: Scalar> EigenvalueDistribution<T> {
    pub fn new(mut values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("values", "empty spectrum"));
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > T::zero()))
        {
            return Err(VoiError::NonPositiveEigenvalue {
                index,
                value: value.as_f64(),
            });
        }
        values.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        Ok(Self::from_sorted(values))
    }

    fn from_sorted(values: Vec<T>) -> Self {
        let mut acc = T::zero();
        let prefix_sums = values
            .iter()
            .map(|&v| {
                acc = acc + v;
                acc
            })
            .collect();
        Self {
            values,
            prefix_sums,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn prefix_sums(&self) -> &[T] {
        &self.prefix_sums
    }

    pub fn trace(&self) -> T {
        *self.prefix_sums.last().expect("nonempty")
    }

    /// Empirical CDF: share of eigenvalues at or below `z`.
    pub fn cdf(&self, z: T) -> T {
        T::of_usize(self.values.iter().filter(|&&v| v <= z).count()) / T::of_usize(self.len())
    }
}

/// Verifies the dimension and trace preconditions shared by the spread tests.
pub(crate) fn check_comparable<T: Scalar>(
    from: &EigenvalueDistribution<T>,
    to: &EigenvalueDistribution<T>,
) -> Result<()> {
    if from.len() != to.len() {
        return Err(VoiError::DimensionMismatch {
            expected: from.len(),
            found: to.len(),
        });
    }
    let (a, b) = (from.trace(), to.trace());
    if (a - b).abs() > T::tol(TRACE_TOL) * T::one().max(a.abs()) {
        return Err(VoiError::TraceMismatch {
            left: a.as_f64(),
            right: b.as_f64(),
        });
    }
    Ok(())
}

/// Whether `to` is a mean-preserving spread of `from`, by the prefix-sum test
/// `Σ_{j≤k} λ'_j ≥ Σ_{j≤k} λ_j` for every `k`.
pub fn mps_check<T: Scalar>(
    from: &EigenvalueDistribution<T>,
    to: &EigenvalueDistribution<T>,
) -> Result<bool> {
    check_comparable(from, to)?;
    let slack = T::tol(1e-12) * T::one().max(from.trace().abs());
    Ok(from
        .prefix_sums()
        .iter()
        .zip(to.prefix_sums())
        .all(|(&a, &b)| b >= a - slack))
}
