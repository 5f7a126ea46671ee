//! Gram matrices, posterior variances, and the value of a given sample.
//!
//! Conditioning happens in the prior's eigenbasis:
//! `(Σ⁻¹ + G/σ_u²)⁻¹ = V (Λ⁻¹ + Z Δ Zᵀ/σ_u²)⁻¹ Vᵀ` with `Z = VᵀΩ`, so `Σ` itself is
//! never inverted.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{invalid, Result, VoiError};
use crate::linalg::{dot, norm, symmetric_eigen, Matrix};
use crate::prior::{EigenPrior, ORTHO_TOL};
use crate::scalar::{compensated_sum, Scalar};

/// Covariates must have unit length to this tolerance.
pub const UNIT_TOL: f64 = 1e-10;
/// Posterior computations refuse precision matrices worse conditioned than this.
pub const CONDITION_LIMIT: f64 = 1e12;

/// A list of unit covariates observed with i.i.d. `N(0, σ_u²)` noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DesignDocument<T>", into = "DesignDocument<T>")]
#[serde(bound = "T: Scalar")]
pub struct SampleDesign<T: Scalar> {
    covariates: Vec<Vec<T>>,
    noise_variance: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DesignDocument<T> {
    pub sigma_u2: T,
    pub covariates: Vec<Vec<T>>,
}

impl<T: Scalar> TryFrom<DesignDocument<T>> for SampleDesign<T> {
    type Error = VoiError;
    fn try_from(doc: DesignDocument<T>) -> Result<Self> {
        SampleDesign::new(doc.covariates, doc.sigma_u2)
    }
}

impl<T: Scalar> From<SampleDesign<T>> for DesignDocument<T> {
    fn from(d: SampleDesign<T>) -> Self {
        DesignDocument {
            sigma_u2: d.noise_variance,
            covariates: d.covariates,
        }
    }
}

impl<T: Scalar> SampleDesign<T> {
    pub fn new(covariates: Vec<Vec<T>>, noise_variance: T) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance > T::zero()) {
            return Err(invalid(
                "sigma_u2",
                format!("must be positive, got {noise_variance}"),
            ));
        }
        if let Some(first) = covariates.first() {
            let k = first.len();
            for (index, w) in covariates.iter().enumerate() {
                if w.len() != k {
                    return Err(VoiError::DimensionMismatch {
                        expected: k,
                        found: w.len(),
                    });
                }
                let n = norm(w);
                if !((n - T::one()).abs() <= T::tol(UNIT_TOL)) {
                    return Err(VoiError::NotUnitVector {
                        index,
                        norm: n.as_f64(),
                    });
                }
            }
        }
        Ok(Self {
            covariates,
            noise_variance,
        })
    }

    pub fn empty(noise_variance: T) -> Result<Self> {
        Self::new(Vec::new(), noise_variance)
    }

    /// Pure signals: observation `i` measures state `states[i]` (0-based).
    pub fn pure_signals(dim: usize, states: &[usize], noise_variance: T) -> Result<Self> {
        let covariates = states
            .iter()
            .map(|&s| {
                if s >= dim {
                    return Err(invalid("states", format!("state {s} outside 0..{dim}")));
                }
                let mut w = vec![T::zero(); dim];
                w[s] = T::one();
                Ok(w)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(covariates, noise_variance)
    }

    pub fn covariates(&self) -> &[Vec<T>] {
        &self.covariates
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariates.is_empty()
    }

    /// Adds one observation.
    pub fn with_observation(&self, w: Vec<T>) -> Result<Self> {
        let mut covariates = self.covariates.clone();
        covariates.push(w);
        Self::new(covariates, self.noise_variance)
    }

    pub fn with_noise_variance(&self, noise_variance: T) -> Result<Self> {
        Self::new(self.covariates.clone(), noise_variance)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self.covariates.first() {
            Some(w) if w.len() != dim => Err(VoiError::DimensionMismatch {
                expected: dim,
                found: w.len(),
            }),
            _ => Ok(()),
        }
    }

    /// `G = Σ_i w⁽ⁱ⁾ w⁽ⁱ⁾ᵀ`.
    pub fn gram_matrix(&self, dim: usize) -> Result<Matrix<T>> {
        self.check_dim(dim)?;
        let mut g = Matrix::zeros(dim, dim);
        for w in &self.covariates {
            for i in 0..dim {
                if w[i] == T::zero() {
                    continue;
                }
                for j in 0..dim {
                    g[(i, j)] = g[(i, j)] + w[i] * w[j];
                }
            }
        }
        Ok(g)
    }
}

/// Spectrum `(δ, Ω)` of a Gram matrix. `δ` is descending and non-negative and
/// may be fractional, so optimal allocations are representable.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSpectrum<T: Scalar> {
    delta: Vec<T>,
    omega: Matrix<T>,
    source_n: T,
}

impl<T: Scalar> GramSpectrum<T> {
    pub fn new(delta: Vec<T>, omega: Matrix<T>) -> Result<Self> {
        let k = delta.len();
        if omega.rows() != k || omega.cols() != k {
            return Err(VoiError::DimensionMismatch {
                expected: k,
                found: omega.cols(),
            });
        }
        if delta.windows(2).any(|w| w[0] < w[1]) {
            return Err(invalid("delta", "must be descending"));
        }
        if let Some((index, &value)) = delta
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d >= T::zero()))
        {
            return Err(VoiError::NegativeAllocation {
                index,
                value: value.as_f64(),
            });
        }
        let residual = omega.orthonormality_residual();
        if !(residual <= T::tol(ORTHO_TOL)) {
            return Err(VoiError::NotOrthonormal {
                residual: residual.as_f64(),
            });
        }
        let source_n = compensated_sum(delta.iter().copied());
        Ok(Self {
            delta,
            omega,
            source_n,
        })
    }

    pub fn delta(&self) -> &[T] {
        &self.delta
    }

    pub fn omega(&self) -> &Matrix<T> {
        &self.omega
    }

    /// `trace(G)`, the (possibly fractional) number of observations.
    pub fn source_n(&self) -> T {
        self.source_n
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    /// `R = max{k : δ_k > 0}`, with `δ_k` below `1e-12 · max(1, n)` counted as zero.
    pub fn rank(&self) -> usize {
        let zero = T::tol(1e-12) * T::one().max(self.source_n);
        self.delta.iter().filter(|&&d| d > zero).count()
    }

    /// `Ω diag(δ) Ωᵀ`.
    pub fn matrix(&self) -> Matrix<T> {
        self.omega.congruence_diag(&self.delta)
    }
}

/// Eigendecomposition of the design's Gram matrix.
pub fn gram<T: Scalar>(design: &SampleDesign<T>, dim: usize) -> Result<GramSpectrum<T>> {
    let g = design.gram_matrix(dim)?;
    let eig = symmetric_eigen(&g);
    // Round-off can leave tiny negative eigenvalues on a PSD matrix.
    let delta = eig.values.iter().map(|&d| d.max(T::zero())).collect();
    let mut spectrum = GramSpectrum::new(delta, eig.vectors)?;
    spectrum.source_n = T::of_usize(design.len());
    Ok(spectrum)
}

fn serialize_rows<T: Scalar, S: Serializer>(
    m: &Matrix<T>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    m.to_rows().serialize(s)
}

/// Posterior variance of the state vector and the sample's value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct PosteriorSummary<T: Scalar> {
    #[serde(serialize_with = "serialize_rows")]
    pub posterior_variance: Matrix<T>,
    pub trace: T,
    /// Eigenvalues of the posterior variance, descending.
    pub per_direction_variances: Vec<T>,
    /// `π = (trace Σ − trace Var(θ|S)) / K`.
    pub value: T,
}

/// Header matching [`PosteriorSummary::csv_row`].
pub const POSTERIOR_CSV_HEADER: &str = "prior_id,n,sigma_u2,pi,trace";

impl<T: Scalar> PosteriorSummary<T> {
    pub fn csv_row(&self, prior_id: &str, n: T, noise_variance: T) -> String {
        format!(
            "{prior_id},{n},{noise_variance},{},{}",
            self.value, self.trace
        )
    }
}

/// Posterior variance given an explicit design.
pub fn posterior_variance<T: Scalar>(
    prior: &EigenPrior<T>,
    design: &SampleDesign<T>,
) -> Result<PosteriorSummary<T>> {
    let spectrum = gram(design, prior.dim())?;
    posterior_from_spectrum(prior, &spectrum, design.noise_variance())
}

/// Posterior variance for any Gram spectrum, including fractional ones.
pub fn posterior_from_spectrum<T: Scalar>(
    prior: &EigenPrior<T>,
    spectrum: &GramSpectrum<T>,
    noise_variance: T,
) -> Result<PosteriorSummary<T>> {
    let k = prior.dim();
    if spectrum.dim() != k {
        return Err(VoiError::DimensionMismatch {
            expected: k,
            found: spectrum.dim(),
        });
    }
    if !(noise_variance.is_finite() && noise_variance > T::zero()) {
        return Err(invalid(
            "sigma_u2",
            format!("must be positive, got {noise_variance}"),
        ));
    }
    let v = prior.eigenvectors();
    let z = v.transpose().matmul(spectrum.omega());
    let scaled: Vec<T> = spectrum
        .delta()
        .iter()
        .map(|&d| d / noise_variance)
        .collect();
    let mut precision = z.congruence_diag(&scaled);
    for (i, &l) in prior.eigenvalues().iter().enumerate() {
        precision[(i, i)] = precision[(i, i)] + T::one() / l;
    }
    let eig = symmetric_eigen(&precision);
    let condition = eig.condition_number();
    if !(condition <= T::lit(CONDITION_LIMIT)) || eig.values.iter().any(|&m| m <= T::zero()) {
        return Err(VoiError::IllConditioned {
            condition: condition.as_f64(),
            limit: CONDITION_LIMIT,
        });
    }
    // eigenvalues of the posterior are the reciprocals, ascending → reverse
    let per_direction_variances: Vec<T> = eig.values.iter().rev().map(|&m| T::one() / m).collect();
    let rotated = v.matmul(&eig.vectors);
    let inv: Vec<T> = eig.values.iter().map(|&m| T::one() / m).collect();
    let posterior = rotated.congruence_diag(&inv);

    let trace = compensated_sum((0..k).map(|i| posterior[(i, i)]));
    let value = (prior.trace() - trace) / T::of_usize(k);
    Ok(PosteriorSummary {
        posterior_variance: posterior,
        trace,
        per_direction_variances,
        value,
    })
}

/// Lower and upper alignment bounds on the value of any sample with a given
/// Gram spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueBounds<T> {
    pub lower: T,
    pub upper: T,
}

/// `upper = (1/K) Σ_k [λ_k − (1/λ_k + δ_k/σ_u²)⁻¹]` (Gram eigenvectors aligned with
/// the prior's) and `lower` the same with `δ` reversed.
pub fn value_bounds<T: Scalar>(
    eigenvalues: &[T],
    delta: &[T],
    noise_variance: T,
) -> Result<ValueBounds<T>> {
    let k = eigenvalues.len();
    if delta.len() != k {
        return Err(VoiError::DimensionMismatch {
            expected: k,
            found: delta.len(),
        });
    }
    let gain = |l: T, d: T| l - T::one() / (T::one() / l + d / noise_variance);
    let kk = T::of_usize(k);
    let upper = compensated_sum(eigenvalues.iter().zip(delta).map(|(&l, &d)| gain(l, d))) / kk;
    let lower = compensated_sum(
        eigenvalues
            .iter()
            .zip(delta.iter().rev())
            .map(|(&l, &d)| gain(l, d)),
    ) / kk;
    Ok(ValueBounds { lower, upper })
}

/// Bounds for a prior and a Gram spectrum.
pub fn value_bounds_for<T: Scalar>(
    prior: &EigenPrior<T>,
    spectrum: &GramSpectrum<T>,
    noise_variance: T,
) -> Result<ValueBounds<T>> {
    value_bounds(prior.eigenvalues(), spectrum.delta(), noise_variance)
}

fn check_unit<T: Scalar>(w: &[T], dim: usize) -> Result<()> {
    if w.len() != dim {
        return Err(VoiError::DimensionMismatch {
            expected: dim,
            found: w.len(),
        });
    }
    let n = norm(w);
    if !((n - T::one()).abs() <= T::tol(UNIT_TOL)) {
        return Err(VoiError::NotUnitVector {
            index: 0,
            norm: n.as_f64(),
        });
    }
    Ok(())
}

/// Value of one observation with covariate `w`:
/// `wᵀΣ²w / (K (wᵀΣw + σ_u²))`.
pub fn singleton_value<T: Scalar>(prior: &EigenPrior<T>, w: &[T], noise_variance: T) -> Result<T> {
    check_unit(w, prior.dim())?;
    let coords = prior.eigenvectors().transpose_mat_vec(w);
    let mut quad = T::zero();
    let mut quad2 = T::zero();
    for (&c, &l) in coords.iter().zip(prior.eigenvalues()) {
        let c2 = c * c;
        quad = quad + l * c2;
        quad2 = quad2 + l * l * c2;
    }
    Ok(quad2 / (T::of_usize(prior.dim()) * (quad + noise_variance)))
}

/// Posterior variance after one observation by the rank-one
/// (Sherman-Morrison) downdate `Σ − Σw wᵀΣ / (wᵀΣw + σ_u²)`.
pub fn sherman_morrison_posterior<T: Scalar>(
    prior: &EigenPrior<T>,
    w: &[T],
    noise_variance: T,
) -> Result<Matrix<T>> {
    check_unit(w, prior.dim())?;
    let sigma = prior.covariance();
    let sw = sigma.mat_vec(w);
    let denom = dot(w, &sw) + noise_variance;
    let k = prior.dim();
    Ok(Matrix::from_fn(k, k, |i, j| {
        sigma[(i, j)] - sw[i] * sw[j] / denom
    }))
}

/// Value of a representative sample (flat Gram spectrum `n/K`):
/// `(1/K) Σ_k nλ_k² / (nλ_k + Kσ_u²)`.
pub fn representative_value<T: Scalar>(
    prior: &EigenPrior<T>,
    n: T,
    noise_variance: T,
) -> Result<T> {
    if !(n >= T::zero()) {
        return Err(invalid("n", format!("must be non-negative, got {n}")));
    }
    let kk = T::of_usize(prior.dim());
    let total = compensated_sum(
        prior
            .eigenvalues()
            .iter()
            .map(|&l| n * l * l / (n * l + kk * noise_variance)),
    );
    Ok(total / kk)
}

/// Error split for a sample of pure signals of the first `R < K` states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonSpanningDecomposition<T> {
    pub rank: usize,
    /// Posterior variance of on-support states plus the propagated posterior
    /// uncertainty of the regression predictions for off-support states.
    pub sampling_error: T,
    /// `Σ_{k>R} Var(θ_k | θ_S)`: irreducible by more data on `θ_S`.
    pub extrapolation_error: T,
    /// `ξ_k = Var(θ_S)⁻¹ Cov(θ_S, θ_k)` for every state `k`.
    pub regression_maps: Vec<Vec<T>>,
    /// `Var(θ_k | θ_S)` for the off-support states `k > R`.
    pub conditional_variances: Vec<T>,
    /// `π = (trace Σ − sampling − extrapolation) / K`.
    pub value: T,
}

impl<T: Scalar> NonSpanningDecomposition<T> {
    pub fn total(&self) -> T {
        self.sampling_error + self.extrapolation_error
    }
}

fn pure_signal_index<T: Scalar>(w: &[T]) -> Option<usize> {
    let eps = T::tol(1e-12);
    let mut hit = None;
    for (i, &x) in w.iter().enumerate() {
        if (x - T::one()).abs() <= eps {
            if hit.is_some() {
                return None;
            }
            hit = Some(i);
        } else if x.abs() > eps {
            return None;
        }
    }
    hit
}

/// Splits `trace Var(θ|S)` into sampling and extrapolation error for designs
/// whose covariates are standard basis vectors `e_j` with `j < R < K`, where `R`
/// is one past the largest sampled index.
pub fn non_spanning_decomposition<T: Scalar>(
    prior: &EigenPrior<T>,
    design: &SampleDesign<T>,
) -> Result<NonSpanningDecomposition<T>> {
    let k = prior.dim();
    design.check_dim(k)?;
    let mut counts = Vec::new();
    for (index, w) in design.covariates().iter().enumerate() {
        let state = pure_signal_index(w).ok_or(VoiError::OffSupport { index })?;
        if state >= counts.len() {
            counts.resize(state + 1, 0usize);
        }
        counts[state] += 1;
    }
    let r = counts.len();
    if r >= k {
        return Err(VoiError::Spanning { rank: r });
    }

    let sigma = prior.covariance();
    let noise = design.noise_variance();
    let (regression_maps, sampling_error, conditional_variances) = if r == 0 {
        let cond = (0..k).map(|i| sigma[(i, i)]).collect();
        (vec![Vec::new(); k], T::zero(), cond)
    } else {
        let on = Matrix::from_fn(r, r, |i, j| sigma[(i, j)]);
        let on_inv = symmetric_eigen(&on).inverse();
        let mut precision = on_inv.clone();
        for (i, &c) in counts.iter().enumerate() {
            precision[(i, i)] = precision[(i, i)] + T::of_usize(c) / noise;
        }
        let post_on = symmetric_eigen(&precision).inverse();

        let maps: Vec<Vec<T>> = (0..k)
            .map(|col| {
                let cross: Vec<T> = (0..r).map(|i| sigma[(i, col)]).collect();
                on_inv.mat_vec(&cross)
            })
            .collect();
        let on_support = compensated_sum((0..r).map(|i| post_on[(i, i)]));
        let propagated =
            compensated_sum((r..k).map(|col| dot(&maps[col], &post_on.mat_vec(&maps[col]))));
        let cond: Vec<T> = (r..k)
            .map(|col| {
                let cross: Vec<T> = (0..r).map(|i| sigma[(i, col)]).collect();
                sigma[(col, col)] - dot(&cross, &maps[col])
            })
            .collect();
        (maps, on_support + propagated, cond)
    };
    let extrapolation_error = compensated_sum(conditional_variances.iter().copied());
    let value = (prior.trace() - sampling_error - extrapolation_error) / T::of_usize(k);
    Ok(NonSpanningDecomposition {
        rank: r,
        sampling_error,
        extrapolation_error,
        regression_maps,
        conditional_variances,
        value,
    })
}
