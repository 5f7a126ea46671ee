//! Value of conceptual knowledge: the gain `Π = π* − π^(0)` from designing the
//! sample with the true spectrum instead of the flat one, its J-deep analogue
//! `Π^(J)`, the precision threshold `τ′` beyond which `Π` falls, and minimum
//! sample sizes for welfare targets.
//!
//! The precision index is `τ = nλ̄/σ_u²`. Everything here depends on `n` and
//! `σ_u²` only through `n/σ_u² = τ/λ̄`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::design::{optimal_rank, optimal_value, value_at_rank};
use crate::error::{invalid, Result, VoiError};
use crate::prior::{is_flat, jdeep_spectrum, EigenPrior, KnowledgeLadder};
use crate::scalar::{compensated_sum, Scalar};

/// Values of `Π` this far below zero are rounding and are reported as zero.
pub const NEGATIVE_SLACK: f64 = 1e-12;

fn check_noise<T: Scalar>(noise_variance: T) -> Result<()> {
    if !(noise_variance.is_finite() && noise_variance > T::zero()) {
        return Err(invalid(
            "sigma_u2",
            format!("must be positive, got {noise_variance}"),
        ));
    }
    Ok(())
}

fn check_n<T: Scalar>(n: T) -> Result<()> {
    if !(n.is_finite() && n >= T::zero()) {
        return Err(invalid("n", format!("must be non-negative, got {n}")));
    }
    Ok(())
}

/// `τ = nλ̄/σ_u²`.
pub fn precision_index<T: Scalar>(mean_eigenvalue: T, n: T, noise_variance: T) -> T {
    n * mean_eigenvalue / noise_variance
}

/// `π^(0) = λ̄τ/(K+τ)`: optimal value under the flat prior.
pub fn naive_value<T: Scalar>(k: usize, mean_eigenvalue: T, tau: T) -> T {
    if tau == T::infinity() {
        return mean_eigenvalue;
    }
    mean_eigenvalue * tau / (T::of_usize(k) + tau)
}

/// `π(λ) − π^(0)` for a spectrum with mean `λ̄` at data precision
/// `x = n/σ_u²`.
///
/// When the optimal design covers every direction the difference reduces to
/// `K(A − B)/((A + x)(B + x))` with `A = Σ 1/λ_k`, `B = K/λ̄`, which stays
/// accurate when both values approach `λ̄`.
pub(crate) fn gain_over_naive<T: Scalar>(eigenvalues: &[T], mean_eigenvalue: T, precision: T) -> T {
    let k = eigenvalues.len();
    let kk = T::of_usize(k);
    let rank = optimal_rank(eigenvalues, precision, T::one());
    if rank == k {
        let a = compensated_sum(eigenvalues.iter().map(|&l| T::one() / l));
        let b = kk / mean_eigenvalue;
        kk * (a - b) / ((a + precision) * (b + precision))
    } else {
        value_at_rank(eigenvalues, rank, precision)
            - naive_value(k, mean_eigenvalue, precision * mean_eigenvalue)
    }
}

fn clamp_rounding<T: Scalar>(v: T, scale: T) -> T {
    if v < T::zero() && v >= -T::tol(NEGATIVE_SLACK) * T::one().max(scale) {
        T::zero()
    } else {
        v
    }
}

/// Rank, value and knowledge value at one depth `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthValue<T> {
    pub depth: usize,
    /// `R^(J)`.
    pub rank: usize,
    /// `π^(J)`.
    pub pi: T,
    /// `Π^(J) = π^(J) − π^(0)`.
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueReport<T> {
    pub tau: T,
    pub pi_star: T,
    pub pi_naive: T,
    /// `Π = π* − π^(0)`.
    pub knowledge_value: T,
    pub per_depth: BTreeMap<usize, DepthValue<T>>,
}

/// Column order of [`ValueReport::csv_rows`].
pub const VALUE_REPORT_CSV_HEADER: &str =
    "tau,depth,rank,pi_depth,value_depth,pi_star,pi_naive,knowledge_value";

impl<T: Scalar> ValueReport<T> {
    /// Long-form rows, one per depth.
    pub fn csv_rows(&self) -> Vec<String> {
        self.per_depth
            .values()
            .map(|d| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    self.tau,
                    d.depth,
                    d.rank,
                    d.pi,
                    d.value,
                    self.pi_star,
                    self.pi_naive,
                    self.knowledge_value
                )
            })
            .collect()
    }
}

fn depth_value_of<T: Scalar>(
    base: &[T],
    depth: usize,
    mean: T,
    n: T,
    noise_variance: T,
) -> DepthValue<T> {
    let (spectrum, _) = jdeep_spectrum(base, depth);
    let precision = n / noise_variance;
    let rank = optimal_rank(&spectrum, n, noise_variance);
    let pi = value_at_rank(&spectrum, rank, precision);
    let value = clamp_rounding(gain_over_naive(&spectrum, mean, precision), mean);
    DepthValue {
        depth,
        rank,
        pi,
        value,
    }
}

/// `Π` for the full prior; `per_depth` is left empty.
pub fn knowledge_value<T: Scalar>(
    prior: &EigenPrior<T>,
    n: T,
    noise_variance: T,
) -> Result<ValueReport<T>> {
    value_report(prior, n, noise_variance, std::iter::empty())
}

/// `Π` plus `(R^(J), π^(J), Π^(J))` for each requested depth.
pub fn value_report<T: Scalar>(
    prior: &EigenPrior<T>,
    n: T,
    noise_variance: T,
    depths: impl IntoIterator<Item = usize>,
) -> Result<ValueReport<T>> {
    check_n(n)?;
    check_noise(noise_variance)?;
    let k = prior.dim();
    let mean = prior.mean_eigenvalue();
    let tau = precision_index(mean, n, noise_variance);
    let pi_star = optimal_value(prior.eigenvalues(), n, noise_variance);
    let pi_naive = naive_value(k, mean, tau);
    let knowledge_value = clamp_rounding(
        gain_over_naive(prior.eigenvalues(), mean, n / noise_variance),
        mean,
    );
    let mut per_depth = BTreeMap::new();
    for depth in depths {
        if depth > k {
            return Err(invalid("J", format!("depth {depth} outside 0..={k}")));
        }
        per_depth.insert(
            depth,
            depth_value_of(prior.eigenvalues(), depth, mean, n, noise_variance),
        );
    }
    Ok(ValueReport {
        tau,
        pi_star,
        pi_naive,
        knowledge_value,
        per_depth,
    })
}

/// `(R^(J), π^(J), Π^(J))` for the ladder's depth.
pub fn jdeep_value<T: Scalar>(
    ladder: &KnowledgeLadder<T>,
    n: T,
    noise_variance: T,
) -> Result<DepthValue<T>> {
    check_n(n)?;
    check_noise(noise_variance)?;
    let base = ladder.base();
    Ok(depth_value_of(
        base.eigenvalues(),
        ladder.depth(),
        base.mean_eigenvalue(),
        n,
        noise_variance,
    ))
}

/// `R^(J)` for every `J ∈ {0, …, K}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankProfile {
    /// `ranks[J] = R^(J)`.
    pub ranks: Vec<usize>,
    /// `J′`: the last depth of the leading run with `R^(J) = K`.
    pub threshold: usize,
    /// `R*` of the full prior.
    pub optimal_rank: usize,
}

impl RankProfile {
    /// `R^(J) = K` for `J ≤ J′`, `= J` for `J′ < J < R*`, `= R*` for `J ≥ R*`.
    pub fn obeys_three_piece_law(&self) -> bool {
        let k = self.ranks.len() - 1;
        let (jp, rs) = (self.threshold, self.optimal_rank);
        self.ranks.iter().enumerate().all(|(j, &r)| {
            if j <= jp {
                r == k
            } else if j < rs {
                r == j
            } else {
                r == rs
            }
        })
    }
}

pub fn rank_profile<T: Scalar>(
    base: &EigenPrior<T>,
    n: T,
    noise_variance: T,
) -> Result<RankProfile> {
    check_n(n)?;
    check_noise(noise_variance)?;
    let k = base.dim();
    let ranks: Vec<usize> = (0..=k)
        .map(|j| optimal_rank(&jdeep_spectrum(base.eigenvalues(), j).0, n, noise_variance))
        .collect();
    let lead = ranks.iter().take_while(|&&r| r == k).count();
    Ok(RankProfile {
        threshold: lead.saturating_sub(1),
        optimal_rank: optimal_rank(base.eigenvalues(), n, noise_variance),
        ranks,
    })
}

/// Sign-change points of `dΠ/dτ`. `tau_prime` is the first change from rising
/// to falling; any others are listed in `sign_changes` for inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauThreshold<T> {
    pub tau_prime: T,
    pub sign_changes: Vec<T>,
}

/// Grid points used to bracket sign changes of `dΠ/dτ`.
const TAU_SCAN_POINTS: usize = 4000;

/// Centered difference of `Π(τ)` with `h = max(1e-4, 1e-4 τ)`; one-sided where
/// `τ − h < 0`.
pub fn knowledge_value_slope<T: Scalar>(eigenvalues: &[T], tau: T) -> T {
    let mean = compensated_sum(eigenvalues.iter().copied()) / T::of_usize(eigenvalues.len());
    let pi = |t: T| gain_over_naive(eigenvalues, mean, t / mean);
    let h = T::lit(1e-4).max(T::lit(1e-4) * tau);
    if tau - h < T::zero() {
        (pi(tau + h) - pi(tau)) / h
    } else {
        (pi(tau + h) - pi(tau - h)) / (h + h)
    }
}

/// The precision `τ′` with `Π` increasing in `τ` exactly below it. Zero for a
/// flat spectrum.
pub fn tau_threshold<T: Scalar>(
    prior: &EigenPrior<T>,
    noise_variance: T,
) -> Result<TauThreshold<T>> {
    check_noise(noise_variance)?;
    if prior.is_flat() {
        return Ok(TauThreshold {
            tau_prime: T::zero(),
            sign_changes: Vec::new(),
        });
    }
    let spectrum = prior.eigenvalues();
    let tau_max = T::lit(1e4) * T::of_usize(prior.dim());
    let slope = |t: T| knowledge_value_slope(spectrum, t);
    let sign = |v: T| {
        if v > T::zero() {
            1i8
        } else if v < T::zero() {
            -1
        } else {
            0
        }
    };

    let lo = T::lit(1e-6);
    let ratio = (tau_max / lo).ln() / T::of_usize(TAU_SCAN_POINTS);
    let grid: Vec<T> = std::iter::once(T::zero())
        .chain((0..=TAU_SCAN_POINTS).map(|i| lo * (ratio * T::of_usize(i)).exp()))
        .collect();

    let mut changes = Vec::new();
    let mut first_fall = None;
    let mut prev: Option<(T, i8)> = None;
    for &t in &grid {
        let s = sign(slope(t));
        if s == 0 {
            continue;
        }
        if let Some((pt, ps)) = prev {
            if ps != s {
                let root = bisect_sign(&slope, pt, t, ps);
                if ps > 0 && first_fall.is_none() {
                    first_fall = Some(root);
                }
                changes.push(root);
            }
        }
        prev = Some((t, s));
    }
    match first_fall {
        Some(tau_prime) => Ok(TauThreshold {
            tau_prime,
            sign_changes: changes,
        }),
        None => Err(VoiError::NoSignChange {
            tau_max: tau_max.as_f64(),
        }),
    }
}

fn bisect_sign<T: Scalar>(f: &impl Fn(T) -> T, mut lo: T, mut hi: T, lo_sign: i8) -> T {
    let two = T::lit(2.0);
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        let v = f(mid);
        let s = if v > T::zero() {
            1
        } else if v < T::zero() {
            -1
        } else {
            0
        };
        if s == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::tol(1e-12) * T::one().max(hi) {
            break;
        }
    }
    (lo + hi) / two
}

/// `Π` at a large precision `τ_probe ≥ 10⁶`, to observe that it vanishes.
pub fn vanishing_check<T: Scalar>(
    prior: &EigenPrior<T>,
    noise_variance: T,
    tau_probe: T,
) -> Result<T> {
    check_noise(noise_variance)?;
    if !(tau_probe >= T::lit(1e6)) {
        return Err(invalid(
            "tau_probe",
            format!("must be at least 1e6, got {tau_probe}"),
        ));
    }
    let mean = prior.mean_eigenvalue();
    let n = tau_probe * noise_variance / mean;
    Ok(knowledge_value(prior, n, noise_variance)?.knowledge_value)
}

/// Result of a minimum-sample-size search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", content = "n", rename_all = "snake_case")]
pub enum SampleSize<T> {
    Attainable(T),
    /// The target is at or above `λ̄`, the supremum of `π^(J)` as `n → ∞`.
    Unattainable,
}

impl<T: Scalar> SampleSize<T> {
    pub fn value(self) -> Option<T> {
        match self {
            SampleSize::Attainable(n) => Some(n),
            SampleSize::Unattainable => None,
        }
    }

    /// Whole-observation variant: `⌈n_min⌉`.
    pub fn ceil(self) -> Self {
        match self {
            SampleSize::Attainable(n) => SampleSize::Attainable(n.ceil()),
            u => u,
        }
    }
}

/// `n_min = min{n ≥ 0 : π^(J)(n) ≥ π₀}` on the continuous-`n` relaxation.
pub fn min_sample_size<T: Scalar>(
    ladder: &KnowledgeLadder<T>,
    noise_variance: T,
    target: T,
) -> Result<SampleSize<T>> {
    check_noise(noise_variance)?;
    if !(target.is_finite() && target >= T::zero()) {
        return Err(invalid(
            "pi0",
            format!("must be non-negative, got {target}"),
        ));
    }
    min_sample_size_for_spectrum(ladder.eigenvalues(), noise_variance, target)
}

pub(crate) fn min_sample_size_for_spectrum<T: Scalar>(
    spectrum: &[T],
    noise_variance: T,
    target: T,
) -> Result<SampleSize<T>> {
    if target == T::zero() {
        return Ok(SampleSize::Attainable(T::zero()));
    }
    let mean = compensated_sum(spectrum.iter().copied()) / T::of_usize(spectrum.len());
    if target >= mean {
        return Ok(SampleSize::Unattainable);
    }
    let value = |n: T| optimal_value(spectrum, n, noise_variance);
    let mut hi = T::one();
    while value(hi) < target {
        hi = hi * T::lit(2.0);
        if !hi.is_finite() || hi > T::max_value() / T::lit(4.0) {
            return Ok(SampleSize::Unattainable);
        }
    }
    let mut lo = T::zero();
    for _ in 0..400 {
        let mid = (lo + hi) / T::lit(2.0);
        if value(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= T::tol(1e-13) * T::one().max(hi) {
            break;
        }
    }
    Ok(SampleSize::Attainable(hi))
}

/// Returns true if the spectrum is flat (helper for callers that want to skip
/// threshold searches).
pub fn has_structure<T: Scalar>(eigenvalues: &[T]) -> bool {
    !is_flat(eigenvalues)
}
