//! Replayable verification suites over random and fixed instances. Each case
//! records its inputs so a failure can be reproduced in isolation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};

use crate::design::{optimal_rank, optimal_value};
use crate::knowledge::tau_threshold;
use crate::linalg::{gram_schmidt_complete, norm, Matrix};
use crate::oracle::{
    brute_force_allocation, lemma_mps_crosscheck, simulate_loss, SimulationConfig,
};
use crate::posterior::{
    gram, posterior_from_spectrum, posterior_variance, value_bounds, GramSpectrum, SampleDesign,
};
use crate::prior::{pairwise_eigenvalues, prior_pairwise, EigenPrior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Bounds,
    Waterfill,
    Mc,
    Mps,
    Thresholds,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Bounds,
        Suite::Waterfill,
        Suite::Mc,
        Suite::Mps,
        Suite::Thresholds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Bounds => "bounds",
            Suite::Waterfill => "waterfill",
            Suite::Mc => "mc",
            Suite::Mps => "mps",
            Suite::Thresholds => "thresholds",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown suite `{s}` (expected one of bounds, waterfill, mc, mps, thresholds)"
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub passed: bool,
    pub inputs: Value,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Suite-level criteria that are not per-case, such as pass-rate bands.
    pub summary: Value,
    /// Failing cases, or every case when the report was built verbosely.
    pub details: Vec<CaseResult>,
}

/// Knobs for [`run_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Monte-Carlo draws per configuration.
    pub draws: usize,
    /// Keep passing cases in the report.
    pub verbose: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 20240501,
            draws: 100_000,
            verbose: false,
        }
    }
}

pub fn run_suite(suite: Suite, options: &SuiteOptions) -> SuiteReport {
    let (cases, summary, extra_ok) = match suite {
        Suite::Bounds => (bounds_cases(options.seed, 500), Value::Null, true),
        Suite::Waterfill => (waterfill_cases(options.seed), Value::Null, true),
        Suite::Mc => mc_cases(options.seed, options.draws),
        Suite::Mps => (mps_cases(options.seed), Value::Null, true),
        Suite::Thresholds => (threshold_cases(), Value::Null, true),
    };
    let failures = cases.iter().filter(|c| !c.passed).count();
    // The Monte-Carlo suite tolerates one stray |z|; its band lives in `extra_ok`.
    let passed = extra_ok && (suite == Suite::Mc || failures == 0);
    let total = cases.len();
    let details = cases
        .into_iter()
        .filter(|c| options.verbose || !c.passed)
        .collect();
    SuiteReport {
        suite,
        passed,
        cases: total,
        failures,
        summary,
        details,
    }
}

/// Eigenvalues drawn uniformly from `[0.1, 5]`.
pub fn random_spectrum(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let mut l: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..5.0)).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    l
}

pub fn random_unit(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 1e-6 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

/// Orthonormal basis from Gram-Schmidt on Gaussian vectors.
pub fn random_orthonormal(rng: &mut impl Rng, k: usize) -> Matrix<f64> {
    loop {
        let seeds: Vec<Vec<f64>> = (0..k).map(|_| random_unit(rng, k)).collect();
        if let Ok(m) = gram_schmidt_complete(&seeds, k) {
            return m;
        }
    }
}

pub fn random_prior(rng: &mut impl Rng, k: usize) -> EigenPrior<f64> {
    let mean = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    EigenPrior::new(mean, random_spectrum(rng, k), random_orthonormal(rng, k))
        .expect("valid random prior")
}

pub fn random_design(
    rng: &mut impl Rng,
    k: usize,
    n: usize,
    noise_variance: f64,
) -> SampleDesign<f64> {
    SampleDesign::new(
        (0..n).map(|_| random_unit(rng, k)).collect(),
        noise_variance,
    )
    .expect("unit covariates")
}

fn case(name: String, passed: bool, inputs: Value, detail: Value) -> CaseResult {
    CaseResult {
        name,
        passed,
        inputs,
        detail,
    }
}

fn prior_json(p: &EigenPrior<f64>) -> Value {
    serde_json::to_value(p).expect("prior serializes")
}

/// Sandwich on random designs plus equality at aligned and reversed Gram
/// eigenvectors.
pub fn bounds_cases(seed: u64, instances: usize) -> Vec<CaseResult> {
    const TOL: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .map(|i| {
            let k = rng.random_range(2..=8);
            let n = rng.random_range(1..=2 * k);
            let noise = rng.random_range(0.1..2.0);
            let prior = random_prior(&mut rng, k);
            let design = random_design(&mut rng, k, n, noise);
            let inputs = json!({ "prior": prior_json(&prior), "design": design });
            let run = || -> crate::Result<Value> {
                let spectrum = gram(&design, k)?;
                let pi = posterior_variance(&prior, &design)?.value;
                let b = value_bounds(prior.eigenvalues(), spectrum.delta(), noise)?;
                let v = prior.eigenvectors();
                let aligned = GramSpectrum::new(spectrum.delta().to_vec(), v.clone())?;
                let reversed = GramSpectrum::new(spectrum.delta().to_vec(), v.reversed_columns())?;
                let pi_up = posterior_from_spectrum(&prior, &aligned, noise)?.value;
                let pi_low = posterior_from_spectrum(&prior, &reversed, noise)?.value;
                Ok(json!({
                    "pi": pi, "lower": b.lower, "upper": b.upper,
                    "pi_aligned": pi_up, "pi_reversed": pi_low,
                    "ok": b.lower - TOL <= pi && pi <= b.upper + TOL
                        && (pi_up - b.upper).abs() <= TOL && (pi_low - b.lower).abs() <= TOL,
                }))
            };
            match run() {
                Ok(detail) => case(format!("bounds-{i}"), detail["ok"] == true, inputs, detail),
                Err(e) => case(
                    format!("bounds-{i}"),
                    false,
                    inputs,
                    json!({ "error": e.to_string() }),
                ),
            }
        })
        .collect()
}

/// Budgets used by the water-filling suite; integers so explicit designs of
/// the same size exist.
pub const WATERFILL_BUDGETS: [usize; 4] = [1, 2, 5, 10];

/// `π*` against the exhaustive grid and against random explicit designs.
pub fn waterfill_cases(seed: u64) -> Vec<CaseResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77a7e5);
    let mut out = Vec::new();
    for k in [2usize, 3] {
        for s in 0..20 {
            let prior = EigenPrior::new(
                vec![0.0; k],
                random_spectrum(&mut rng, k),
                random_orthonormal(&mut rng, k),
            )
            .expect("valid prior");
            for n in WATERFILL_BUDGETS {
                let nf = n as f64;
                let star = optimal_value(prior.eigenvalues(), nf, 1.0);
                let brute = brute_force_allocation(prior.eigenvalues(), nf, 1.0, 0.005 * nf)
                    .expect("K ≤ 4");
                let explicit: Vec<f64> = (0..10)
                    .map(|_| {
                        let d = random_design(&mut rng, k, n, 1.0);
                        posterior_variance(&prior, &d)
                            .expect("well conditioned")
                            .value
                    })
                    .collect();
                let best_explicit = explicit.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ok = star >= brute.best_value - 1e-9 && star >= best_explicit - 1e-9;
                out.push(case(
                    format!("waterfill-K{k}-{s}-n{n}"),
                    ok,
                    json!({ "eigenvalues": prior.eigenvalues(), "n": nf, "sigma_u2": 1.0 }),
                    json!({ "pi_star": star, "brute_force": brute, "best_explicit": best_explicit }),
                ));
            }
        }
    }
    out
}

/// Randomized configurations for the Monte-Carlo suite.
pub const MC_CONFIGS: usize = 50;
/// Accepted `|z|` per configuration.
pub const MC_Z_LIMIT: f64 = 4.0;
/// Configurations allowed to exceed the limit.
pub const MC_ALLOWED_MISSES: usize = 1;

pub fn mc_config(seed: u64, index: usize, draws: usize) -> SimulationConfig<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
    let k = rng.random_range(2..=6);
    let n = rng.random_range(0..=8);
    let noise = rng.random_range(0.2..2.0);
    let prior = random_prior(&mut rng, k);
    let design = random_design(&mut rng, k, n, noise);
    SimulationConfig {
        seed: rng.random(),
        draws,
        prior,
        design,
    }
}

/// The two-state example: pairwise ρ = 0.5, one signal on the top feature.
pub fn illustrative_config(seed: u64, draws: usize) -> SimulationConfig<f64> {
    let prior = prior_pairwise(2, 1.0, 0.5).expect("valid prior");
    let design = SampleDesign::new(vec![prior.eigenvector(0)], 1.0).expect("unit covariate");
    SimulationConfig {
        seed,
        draws,
        prior,
        design,
    }
}

/// `π*` of the two-state example with `σ_m² = σ_u² = 1`, `ρ = 1/2`.
pub const ILLUSTRATIVE_PI_STAR: f64 = 0.45;

fn mc_cases(seed: u64, draws: usize) -> (Vec<CaseResult>, Value, bool) {
    let mut cases: Vec<CaseResult> = (0..MC_CONFIGS)
        .map(|i| {
            let cfg = mc_config(seed, i, draws);
            let inputs = json!({ "config": cfg });
            match simulate_loss(&cfg) {
                Ok(r) => case(
                    format!("mc-{i}"),
                    r.z_score.abs() < MC_Z_LIMIT,
                    inputs,
                    json!(r),
                ),
                Err(e) => case(
                    format!("mc-{i}"),
                    false,
                    inputs,
                    json!({ "error": e.to_string() }),
                ),
            }
        })
        .collect();
    let misses = cases.iter().filter(|c| !c.passed).count();
    let band_ok = misses <= MC_ALLOWED_MISSES;

    let cfg = illustrative_config(seed, draws);
    let r = simulate_loss(&cfg).expect("well conditioned");
    let within = (r.empirical_value - ILLUSTRATIVE_PI_STAR).abs() <= 3.0 * r.value_standard_error;
    cases.push(case(
        "mc-illustrative".into(),
        within,
        json!({ "config": cfg }),
        json!(r),
    ));
    let summary =
        json!({ "z_limit": MC_Z_LIMIT, "misses": misses, "allowed_misses": MC_ALLOWED_MISSES });
    (cases, summary, band_ok && within)
}

/// Applies random Robin Hood transfers in reverse (rich get richer), which
/// always yields a spread of the input.
pub fn random_spread(rng: &mut impl Rng, from: &[f64]) -> Vec<f64> {
    let mut v = from.to_vec();
    for _ in 0..3 {
        v.sort_by(|a, b| b.total_cmp(a));
        let i = rng.random_range(0..v.len() - 1);
        let j = rng.random_range(i + 1..v.len());
        let t = rng.random_range(0.0..0.9) * v[j];
        v[i] += t;
        v[j] -= t;
    }
    v
}

fn mps_cases(seed: u64) -> Vec<CaseResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3a5);
    let mut pairs: Vec<(Vec<f64>, Vec<f64>, Option<bool>)> = vec![
        (vec![1.0, 1.0], vec![1.5, 0.5], Some(true)),
        (vec![1.5, 0.5], vec![1.0, 1.0], Some(false)),
        (
            pairwise_eigenvalues(5, 1.0, 0.2),
            pairwise_eigenvalues(5, 1.0, 0.6),
            Some(true),
        ),
    ];
    for _ in 0..100 {
        let k = rng.random_range(2..=8);
        let a = random_spectrum(&mut rng, k);
        let b = random_spread(&mut rng, &a);
        if rng.random_bool(0.5) {
            pairs.push((a, b, Some(true)));
        } else {
            // an unrelated spectrum rescaled to the same trace
            let c = random_spectrum(&mut rng, k);
            let scale = a.iter().sum::<f64>() / c.iter().sum::<f64>();
            pairs.push((a, c.iter().map(|x| x * scale).collect(), None));
        }
    }
    pairs
        .into_iter()
        .enumerate()
        .map(|(i, (a, b, expected))| {
            let inputs = json!({ "from": a, "to": b, "expected": expected });
            match lemma_mps_crosscheck(&[(a, b)]) {
                Ok(report) => {
                    let c = &report.cases[0];
                    let ok = c.agree && expected.is_none_or(|e| e == c.prefix_sums);
                    case(format!("mps-{i}"), ok, inputs, json!(c))
                }
                Err(e) => case(
                    format!("mps-{i}"),
                    false,
                    inputs,
                    json!({ "error": e.to_string() }),
                ),
            }
        })
        .collect()
}

/// Rank transitions `(λ, x, rank below, rank at and above)` with `x = n/σ_u²`.
pub const RANK_TRANSITIONS: [([f64; 3], f64, usize, usize); 4] = [
    ([5.0, 3.0, 2.0], 2.0 / 15.0, 1, 2),
    ([5.0, 3.0, 2.0], 7.0 / 15.0, 2, 3),
    ([5.0, 4.0, 1.0], 1.0 / 20.0, 1, 2),
    ([5.0, 4.0, 1.0], 31.0 / 20.0, 2, 3),
];

/// `τ′ = ρK/(1 + ρ(K−1))` for the pairwise prior.
pub fn pairwise_tau_prime(k: usize, rho: f64) -> f64 {
    rho * k as f64 / (1.0 + rho * (k as f64 - 1.0))
}

fn threshold_cases() -> Vec<CaseResult> {
    let mut out = Vec::new();
    for (i, (l, x, below, above)) in RANK_TRANSITIONS.into_iter().enumerate() {
        let ranks = [
            optimal_rank(&l, x - 1e-9, 1.0),
            optimal_rank(&l, x, 1.0),
            optimal_rank(&l, x + 1e-9, 1.0),
        ];
        out.push(case(
            format!("rank-transition-{i}"),
            ranks == [below, above, above],
            json!({ "eigenvalues": l, "precision": x }),
            json!({ "ranks_minus_at_plus": ranks, "expected": [below, above, above] }),
        ));
    }
    for k in [2usize, 5, 20] {
        for r in 1..=9 {
            let rho = r as f64 / 10.0;
            let expected = pairwise_tau_prime(k, rho);
            let inputs = json!({ "K": k, "rho": rho });
            let found = prior_pairwise(k, 1.0, rho).and_then(|p| tau_threshold(&p, 1.0));
            out.push(match found {
                Ok(t) => case(
                    format!("tau-prime-K{k}-rho{rho}"),
                    (t.tau_prime - expected).abs() <= 1e-3,
                    inputs,
                    json!({ "tau_prime": t.tau_prime, "expected": expected, "sign_changes": t.sign_changes }),
                ),
                Err(e) => case(format!("tau-prime-K{k}-rho{rho}"), false, inputs, json!({ "error": e.to_string() })),
            });
        }
    }
    out
}
