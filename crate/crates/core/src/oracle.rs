//! Independent checks of the closed forms: Monte-Carlo simulation of the
//! generative model, exhaustive search over aligned allocations, and a
//! three-way comparison of equivalent spread conditions.
//!
//! Draw `i` of a simulation uses `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `i`, so results do not depend on how draws are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::optimal_value;
use crate::error::{invalid, Result, VoiError};
use crate::linalg::dot;
use crate::posterior::{posterior_variance, value_bounds, SampleDesign};
use crate::prior::{check_comparable, EigenPrior, EigenvalueDistribution};
use crate::scalar::{compensated_sum, Scalar};

/// Largest dimension accepted by [`brute_force_allocation`].
pub const BRUTE_FORCE_MAX_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimulationConfig<T: Scalar> {
    pub seed: u64,
    pub draws: usize,
    pub prior: EigenPrior<T>,
    pub design: SampleDesign<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult<T> {
    pub empirical_mean_loss: T,
    pub standard_error: T,
    /// `trace Var(θ|S) / K`.
    pub analytic_loss: T,
    pub z_score: T,
    /// Mean of (loss at the prior mean − loss at the posterior mean).
    pub empirical_value: T,
    pub value_standard_error: T,
    pub analytic_value: T,
}

impl<T: Scalar> SimulationResult<T> {
    /// z-score of the empirical value against the analytic one.
    pub fn value_z_score(&self) -> T {
        z_score(
            self.empirical_value,
            self.analytic_value,
            self.value_standard_error,
        )
    }
}

fn z_score<T: Scalar>(empirical: T, analytic: T, se: T) -> T {
    let diff = empirical - analytic;
    if se > T::zero() {
        diff / se
    } else if diff == T::zero() {
        T::zero()
    } else {
        diff.signum() * T::infinity()
    }
}

fn mean_and_se<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::of_usize(xs.len());
    let mean = compensated_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, T::zero());
    }
    let ss = compensated_sum(xs.iter().map(|&x| (x - mean) * (x - mean)));
    (mean, (ss / (n - T::one()) / n).sqrt())
}

/// Random stream for draw `index` under `seed`.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates `θ ~ N(μ, Σ)`, noisy outcomes and the posterior-mean action, and
/// compares the average loss to its closed form.
pub fn simulate_loss<T: Scalar>(config: &SimulationConfig<T>) -> Result<SimulationResult<T>> {
    if config.draws == 0 {
        return Err(invalid("draws", "must be at least 1"));
    }
    let prior = &config.prior;
    let design = &config.design;
    let k = prior.dim();
    if let Some(w) = design.covariates().iter().find(|w| w.len() != k) {
        return Err(VoiError::DimensionMismatch {
            expected: k,
            found: w.len(),
        });
    }
    let summary = posterior_variance(prior, design)?;
    let post = &summary.posterior_variance;
    let sigma = design.noise_variance().sqrt();
    let inv_noise = T::one() / design.noise_variance();
    let roots: Vec<T> = prior.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let v = prior.eigenvectors();
    let mu = prior.mean();
    let kk = T::of_usize(k);
    let predicted: Vec<T> = design.covariates().iter().map(|w| dot(w, mu)).collect();

    let losses: Vec<(T, T)> = (0..config.draws as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(config.seed, i);
            let z: Vec<T> = roots
                .iter()
                .map(|&r| r * T::lit(rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let dev = v.mat_vec(&z);
            let theta: Vec<T> = mu.iter().zip(&dev).map(|(&m, &d)| m + d).collect();
            let mut score = vec![T::zero(); k];
            for (w, &m) in design.covariates().iter().zip(&predicted) {
                let u = sigma * T::lit(rng.sample::<f64, _>(StandardNormal));
                let y = dot(w, &theta) + u;
                let r = (y - m) * inv_noise;
                for (s, &wi) in score.iter_mut().zip(w) {
                    *s = *s + wi * r;
                }
            }
            let shift = post.mat_vec(&score);
            let prior_loss = compensated_sum(dev.iter().map(|&d| d * d)) / kk;
            let post_loss =
                compensated_sum(dev.iter().zip(&shift).map(|(&d, &s)| (d - s) * (d - s))) / kk;
            (post_loss, prior_loss - post_loss)
        })
        .collect();

    let (loss, gain): (Vec<T>, Vec<T>) = losses.into_iter().unzip();
    let (empirical_mean_loss, standard_error) = mean_and_se(&loss);
    let (empirical_value, value_standard_error) = mean_and_se(&gain);
    let analytic_loss = summary.trace / kk;
    Ok(SimulationResult {
        empirical_mean_loss,
        standard_error,
        analytic_loss,
        z_score: z_score(empirical_mean_loss, analytic_loss, standard_error),
        empirical_value,
        value_standard_error,
        analytic_value: summary.value,
    })
}

/// Best aligned allocation on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceResult<T> {
    pub best_value: T,
    pub best_delta: Vec<T>,
    /// Spacing actually used: `n / round(n / grid_step)`.
    pub grid_step: T,
}

/// `λ_1²/σ_u²`: bounds how far the grid optimum can fall below `π*` per unit
/// of grid step.
pub fn value_lipschitz<T: Scalar>(eigenvalues: &[T], noise_variance: T) -> T {
    let top = eigenvalues.iter().copied().fold(T::zero(), T::max);
    top * top / noise_variance
}

/// Exhaustive search over descending allocations `δ_1 ≥ … ≥ δ_K ≥ 0`,
/// `Σ δ_k = n`, on a grid of spacing close to `grid_step`, each valued as an
/// eigen-aligned design.
pub fn brute_force_allocation<T: Scalar>(
    eigenvalues: &[T],
    n: T,
    noise_variance: T,
    grid_step: T,
) -> Result<BruteForceResult<T>> {
    let k = eigenvalues.len();
    if k == 0 || k > BRUTE_FORCE_MAX_DIM {
        return Err(invalid(
            "K",
            format!("brute force supports 1..={BRUTE_FORCE_MAX_DIM} states, got {k}"),
        ));
    }
    if !(noise_variance.is_finite() && noise_variance > T::zero()) {
        return Err(invalid(
            "sigma_u2",
            format!("must be positive, got {noise_variance}"),
        ));
    }
    if !(n.is_finite() && n >= T::zero()) {
        return Err(invalid("n", format!("must be non-negative, got {n}")));
    }
    if n == T::zero() {
        return Ok(BruteForceResult {
            best_value: T::zero(),
            best_delta: vec![T::zero(); k],
            grid_step: T::zero(),
        });
    }
    if !(grid_step > T::zero() && grid_step <= T::lit(0.02) * n * (T::one() + T::epsilon())) {
        return Err(invalid(
            "grid_step",
            format!("must lie in (0, 0.02·n], got {grid_step}"),
        ));
    }
    let units = (n / grid_step).round().to_usize().expect("finite grid");
    let step = n / T::of_usize(units);

    let mut best: Option<(T, Vec<usize>)> = None;
    let mut parts = vec![0usize; k];
    descending_partitions(units, units, 0, &mut parts, &mut |p| {
        let delta: Vec<T> = p.iter().map(|&c| T::of_usize(c) * step).collect();
        let value = value_bounds(eigenvalues, &delta, noise_variance)
            .expect("dimensions match")
            .upper;
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, p.to_vec()));
        }
    });
    let (best_value, counts) = best.expect("at least one partition");
    Ok(BruteForceResult {
        best_value,
        best_delta: counts.iter().map(|&c| T::of_usize(c) * step).collect(),
        grid_step: step,
    })
}

/// Visits every `parts` with `parts[i..]` descending, bounded by `cap` and
/// summing to `remaining`.
fn descending_partitions(
    remaining: usize,
    cap: usize,
    i: usize,
    parts: &mut [usize],
    visit: &mut impl FnMut(&[usize]),
) {
    if i + 1 == parts.len() {
        if remaining <= cap {
            parts[i] = remaining;
            visit(parts);
        }
        return;
    }
    let slots = parts.len() - i;
    // the first entry must be at least the average of what is left
    let lo = remaining.div_ceil(slots);
    for c in lo..=cap.min(remaining) {
        parts[i] = c;
        descending_partitions(remaining - c, c, i + 1, parts, visit);
    }
}

/// The three spread conditions for one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpsCase<T> {
    pub from: Vec<T>,
    pub to: Vec<T>,
    /// `Σ φ(λ'_k) ≥ Σ φ(λ_k)` for every member of the convex test family.
    pub convex_family: bool,
    /// Prefix sums of `to` dominate those of `from`.
    pub prefix_sums: bool,
    /// Tail sums of `to` are dominated by those of `from`.
    pub tail_sums: bool,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpsCrosscheckReport<T> {
    pub cases: Vec<MpsCase<T>>,
    pub disagreements: usize,
}

/// Seed of the random hinge locations in the convex test family.
pub const HINGE_SEED: u64 = 0x5eed;
const RANDOM_HINGES: usize = 20;

/// Evaluates the three equivalent spread conditions for each `(from, to)` pair
/// and counts the pairs on which they disagree.
///
/// The convex family holds `z²`, `1/z`, `exp(z/λ̄)` and hinges `(z − c)⁺` at
/// every eigenvalue of either spectrum plus a few seeded random locations.
pub fn lemma_mps_crosscheck<T: Scalar>(
    pairs: &[(Vec<T>, Vec<T>)],
) -> Result<MpsCrosscheckReport<T>> {
    let mut cases = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let from = EigenvalueDistribution::new(a.clone())?;
        let to = EigenvalueDistribution::new(b.clone())?;
        check_comparable(&from, &to)?;
        let slack = T::tol(1e-12) * T::one().max(from.trace());

        let prefix_sums = from
            .prefix_sums()
            .iter()
            .zip(to.prefix_sums())
            .all(|(&x, &y)| y >= x - slack);
        let tail = |d: &EigenvalueDistribution<T>| -> Vec<T> {
            let total = d.trace();
            std::iter::once(total)
                .chain(d.prefix_sums().iter().map(|&p| total - p))
                .collect()
        };
        let tail_sums = tail(&from)
            .iter()
            .zip(tail(&to))
            .all(|(&x, y)| y <= x + slack);

        let lbar = from.trace() / T::of_usize(from.len());
        let lo = from
            .values()
            .iter()
            .chain(to.values())
            .copied()
            .fold(T::infinity(), T::min);
        let hi = from
            .values()
            .iter()
            .chain(to.values())
            .copied()
            .fold(T::zero(), T::max);
        let mut rng = ChaCha8Rng::seed_from_u64(HINGE_SEED);
        let mut hinges: Vec<T> = from.values().iter().chain(to.values()).copied().collect();
        hinges.extend((0..RANDOM_HINGES).map(|_| lo + (hi - lo) * T::lit(rng.random::<f64>())));
        let total = |d: &EigenvalueDistribution<T>, f: &dyn Fn(T) -> T| {
            compensated_sum(d.values().iter().map(|&z| f(z)))
        };
        let holds = |f: &dyn Fn(T) -> T| {
            let (x, y) = (total(&from, f), total(&to, f));
            y >= x - T::tol(1e-12) * T::one().max(x.abs())
        };
        let smooth = holds(&|z| z * z) && holds(&|z| T::one() / z) && holds(&|z| (z / lbar).exp());
        let convex_family = smooth && hinges.iter().all(|&c| holds(&|z| (z - c).max(T::zero())));

        let agree = convex_family == prefix_sums && prefix_sums == tail_sums;
        cases.push(MpsCase {
            from: from.values().to_vec(),
            to: to.values().to_vec(),
            convex_family,
            prefix_sums,
            tail_sums,
            agree,
        });
    }
    let disagreements = cases.iter().filter(|c| !c.agree).count();
    Ok(MpsCrosscheckReport {
        cases,
        disagreements,
    })
}

/// `π*` next to the brute-force optimum, for reports.
pub fn waterfill_gap<T: Scalar>(
    eigenvalues: &[T],
    n: T,
    noise_variance: T,
    grid_step: T,
) -> Result<(T, BruteForceResult<T>)> {
    let brute = brute_force_allocation(eigenvalues, n, noise_variance, grid_step)?;
    Ok((optimal_value(eigenvalues, n, noise_variance), brute))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::prior::prior_pairwise;
    use approx::assert_abs_diff_eq;

    #[test]
    fn partitions_are_complete() {
        let mut seen = Vec::new();
        let mut parts = vec![0; 3];
        descending_partitions(4, 4, 0, &mut parts, &mut |p| seen.push(p.to_vec()));
        assert_eq!(
            seen,
            vec![vec![2, 1, 1], vec![2, 2, 0], vec![3, 1, 0], vec![4, 0, 0]]
        );
    }

    #[test]
    fn brute_force_examples() {
        let flat = brute_force_allocation(&[1.0f64, 1.0, 1.0], 3.0, 1.0, 0.05).unwrap();
        for d in &flat.best_delta {
            assert!((d - 1.0).abs() <= flat.grid_step);
        }
        let corner = brute_force_allocation(&[1.9, 0.1], 1.0, 1.0, 0.01).unwrap();
        assert_abs_diff_eq!(corner.best_delta[0], 1.0, epsilon = 1e-12);
        let l = [5.0, 3.0, 2.0];
        let b = brute_force_allocation(&l, 1.0, 1.0, 0.01).unwrap();
        let star = optimal_value(&l, 1.0, 1.0);
        assert!(b.best_value <= star + 1e-9);
        assert!(b.best_value >= star - value_lipschitz(&l, 1.0) * b.grid_step);
    }

    #[test]
    fn brute_force_guards() {
        assert!(brute_force_allocation(&[1.0; 5], 1.0, 1.0, 0.01).is_err());
        assert!(brute_force_allocation(&[1.0; 2], 1.0, 1.0, 0.5).is_err());
        assert_eq!(
            brute_force_allocation(&[2.0, 1.0], 0.0, 1.0, 0.1)
                .unwrap()
                .best_value,
            0.0
        );
    }

    #[test]
    fn mps_crosscheck_examples() {
        let r = lemma_mps_crosscheck(&[
            (vec![1.0, 1.0], vec![1.5, 0.5]),
            (vec![1.5, 0.5], vec![1.0, 1.0]),
        ])
        .unwrap();
        assert_eq!(r.disagreements, 0);
        assert!(r.cases[0].prefix_sums && r.cases[0].convex_family && r.cases[0].tail_sums);
        assert!(!r.cases[1].prefix_sums && !r.cases[1].convex_family && !r.cases[1].tail_sums);
        assert!(lemma_mps_crosscheck(&[(vec![1.0, 1.0], vec![1.0, 2.0])]).is_err());
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let p = prior_pairwise(3, 1.0, 0.4).unwrap();
        let d = SampleDesign::pure_signals(3, &[0, 1], 0.5).unwrap();
        let cfg = SimulationConfig {
            seed: 7,
            draws: 500,
            prior: p,
            design: d,
        };
        let a = simulate_loss(&cfg).unwrap();
        let b = simulate_loss(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.standard_error > 0.0);
        let other = simulate_loss(&SimulationConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.empirical_mean_loss, other.empirical_mean_loss);
    }

    #[test]
    fn empty_design_matches_prior_loss() {
        let p = EigenPrior::new(vec![1.0f64, -1.0], vec![2.0, 0.5], Matrix::identity(2)).unwrap();
        let cfg = SimulationConfig {
            seed: 1,
            draws: 20_000,
            prior: p,
            design: SampleDesign::empty(1.0).unwrap(),
        };
        let r = simulate_loss(&cfg).unwrap();
        assert_abs_diff_eq!(r.analytic_loss, 1.25, epsilon = 1e-12);
        assert!(r.z_score.abs() < 4.0);
        assert_eq!(r.empirical_value, 0.0);
        assert!(simulate_loss(&SimulationConfig { draws: 0, ..cfg }).is_err());
    }
}
