//! Optimal sample design by reverse water-filling.
//!
//! Given a spectrum `λ_1 ≥ … ≥ λ_K` and budget `n`, the optimal Gram matrix puts
//! `δ*_k` observations along `v_k` for the top `R*` directions, bringing their
//! posterior variances down to a common water level and leaving the rest at
//! their prior variance.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VoiError};
use crate::posterior::{GramSpectrum, SampleDesign};
use crate::prior::EigenPrior;
use crate::scalar::{compensated_sum, Scalar};

/// Relative slack applied to the rank condition so that exact boundary cases
/// resolve to the larger rank.
pub const RANK_SLACK: f64 = 1e-12;

fn check_budget<T: Scalar>(n: T, noise_variance: T) -> Result<()> {
    if !(n.is_finite() && n >= T::zero()) {
        return Err(invalid("n", format!("must be non-negative, got {n}")));
    }
    if !(noise_variance.is_finite() && noise_variance > T::zero()) {
        return Err(invalid(
            "sigma_u2",
            format!("must be positive, got {noise_variance}"),
        ));
    }
    Ok(())
}

/// `R* = max{k : Σ_{j≤k} 1/λ_j + n/σ_u² ≥ k/λ_k}`; always at least one.
pub fn optimal_rank<T: Scalar>(eigenvalues: &[T], n: T, noise_variance: T) -> usize {
    let precision = n / noise_variance;
    let slack = T::tol(RANK_SLACK);
    let mut inv_sum = T::zero();
    let mut rank = 1;
    for (i, &l) in eigenvalues.iter().enumerate() {
        inv_sum = inv_sum + T::one() / l;
        let rhs = T::of_usize(i + 1) / l;
        if inv_sum + precision >= rhs * (T::one() - slack) {
            rank = i + 1;
        }
    }
    rank
}

/// `π*` for a spectrum, without building the allocation.
pub fn optimal_value<T: Scalar>(eigenvalues: &[T], n: T, noise_variance: T) -> T {
    let rank = optimal_rank(eigenvalues, n, noise_variance);
    value_at_rank(eigenvalues, rank, n / noise_variance)
}

/// `(1/K)(Σ_{k≤R} λ_k − R² (Σ_{k≤R} 1/λ_k + n/σ_u²)⁻¹)`.
pub(crate) fn value_at_rank<T: Scalar>(eigenvalues: &[T], rank: usize, precision: T) -> T {
    let top = &eigenvalues[..rank];
    let r = T::of_usize(rank);
    let sum = compensated_sum(top.iter().copied());
    let inv = compensated_sum(top.iter().map(|&l| T::one() / l));
    (sum - r * r / (inv + precision)) / T::of_usize(eigenvalues.len())
}

/// Optimal rank, per-direction budget and value for one prior and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DesignAllocation<T: Scalar> {
    pub rank: usize,
    pub delta: Vec<T>,
    pub n: T,
    pub pi_star: T,
    /// Common posterior variance of the covered directions.
    pub water_level: T,
    #[serde(skip)]
    fingerprint: Option<u64>,
}

impl<T: Scalar> DesignAllocation<T> {
    /// Posterior variance along each prior eigenvector under this allocation.
    pub fn posterior_variances(&self, eigenvalues: &[T], noise_variance: T) -> Vec<T> {
        eigenvalues
            .iter()
            .zip(&self.delta)
            .map(|(&l, &d)| {
                if d > T::zero() {
                    T::one() / (T::one() / l + d / noise_variance)
                } else {
                    l
                }
            })
            .collect()
    }

    /// Realizes the allocation as explicit covariates (`δ*_k` copies of `v_k`).
    /// Fails with [`VoiError::FractionalAllocation`] unless every `δ*_k` is an
    /// integer to within `1e-9`.
    pub fn to_design(&self, prior: &EigenPrior<T>, noise_variance: T) -> Result<SampleDesign<T>> {
        let mut covariates = Vec::new();
        for (index, &d) in self.delta.iter().enumerate() {
            let count = d.round();
            if (d - count).abs() > T::tol(1e-9) {
                return Err(VoiError::FractionalAllocation {
                    index,
                    value: d.as_f64(),
                });
            }
            let v = prior.eigenvector(index);
            for _ in 0..count.to_usize().unwrap_or(0) {
                covariates.push(v.clone());
            }
        }
        SampleDesign::new(covariates, noise_variance)
    }
}

fn fingerprint<T: Scalar>(eigenvalues: &[T]) -> u64 {
    // FNV-1a over the f64 bit patterns
    eigenvalues.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &l| {
        l.as_f64()
            .to_bits()
            .to_le_bytes()
            .iter()
            .fold(h, |h, &b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
    })
}

/// Reverse water-filling on a bare spectrum.
pub fn allocate<T: Scalar>(
    eigenvalues: &[T],
    n: T,
    noise_variance: T,
) -> Result<DesignAllocation<T>> {
    check_budget(n, noise_variance)?;
    let k = eigenvalues.len();
    let rank = optimal_rank(eigenvalues, n, noise_variance);
    let r = T::of_usize(rank);
    let inv_sum = compensated_sum(eigenvalues[..rank].iter().map(|&l| T::one() / l));
    let mean_inv = inv_sum / r;
    let clamp = T::tol(1e-12) * T::one().max(n);

    let mut delta = vec![T::zero(); k];
    for (index, (d, &l)) in delta.iter_mut().zip(eigenvalues).take(rank).enumerate() {
        let raw = n / r + noise_variance * (mean_inv - T::one() / l);
        if raw < -clamp {
            return Err(VoiError::NegativeAllocation {
                index,
                value: raw.as_f64(),
            });
        }
        *d = raw.max(T::zero());
    }
    let precision = n / noise_variance;
    let water_level = r / (inv_sum + precision);
    let pi_star = value_at_rank(eigenvalues, rank, precision);
    Ok(DesignAllocation {
        rank,
        delta,
        n,
        pi_star,
        water_level,
        fingerprint: Some(fingerprint(eigenvalues)),
    })
}

pub fn optimal_allocation<T: Scalar>(
    prior: &EigenPrior<T>,
    n: T,
    noise_variance: T,
) -> Result<DesignAllocation<T>> {
    allocate(prior.eigenvalues(), n, noise_variance)
}

fn check_matches<T: Scalar>(prior: &EigenPrior<T>, allocation: &DesignAllocation<T>) -> Result<()> {
    if allocation.delta.len() != prior.dim() {
        return Err(VoiError::DimensionMismatch {
            expected: prior.dim(),
            found: allocation.delta.len(),
        });
    }
    match allocation.fingerprint {
        Some(f) if f != fingerprint(prior.eigenvalues()) => Err(VoiError::AllocationMismatch),
        _ => Ok(()),
    }
}

/// `G = Σ_k δ*_k v_k v_kᵀ` in spectral form (`Ω = V`).
pub fn optimal_gram<T: Scalar>(
    prior: &EigenPrior<T>,
    allocation: &DesignAllocation<T>,
) -> Result<GramSpectrum<T>> {
    check_matches(prior, allocation)?;
    GramSpectrum::new(allocation.delta.clone(), prior.eigenvectors().clone())
}

/// `trace Var(θ|S)` under the optimal design:
/// `R*² (Σ_{k≤R*} 1/λ_k + n/σ_u²)⁻¹ + Σ_{k>R*} λ_k = R*·water + Σ_{k>R*} λ_k`.
pub fn optimal_trace<T: Scalar>(
    prior: &EigenPrior<T>,
    allocation: &DesignAllocation<T>,
) -> Result<T> {
    check_matches(prior, allocation)?;
    let tail = compensated_sum(prior.eigenvalues()[allocation.rank..].iter().copied());
    Ok(T::of_usize(allocation.rank) * allocation.water_level + tail)
}
