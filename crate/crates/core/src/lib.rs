//! Value of information and value of conceptual knowledge for a
//! linear-Gaussian estimation problem under quadratic loss.
//!
//! A prior over `K` states is held as `(μ, λ, V)`. Given noisy linear
//! observations, the crate computes posterior variances, sharp bounds on the
//! value of a sample, the optimal sample by reverse water-filling, and the
//! welfare gain from knowing the prior's eigenstructure.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! below fix the common case.
//!
//! ```
//! use voi_core::{optimal_allocation, prior_pairwise};
//!
//! let prior = prior_pairwise(2, 1.0f64, 0.5).unwrap();
//! let alloc = optimal_allocation(&prior, 1.0, 1.0).unwrap();
//! assert_eq!(alloc.rank, 1);
//! assert!((alloc.pi_star - 0.45).abs() < 1e-12);
//! ```

pub mod design;
pub mod error;
pub mod knowledge;
pub mod linalg;
pub mod oracle;
pub mod posterior;
pub mod prior;
pub mod scalar;
pub mod suites;

pub use design::{
    allocate, optimal_allocation, optimal_gram, optimal_rank, optimal_trace, optimal_value,
    DesignAllocation,
};
pub use error::{Result, VoiError};
pub use knowledge::{
    jdeep_value, knowledge_value, min_sample_size, naive_value, precision_index, rank_profile,
    tau_threshold, value_report, vanishing_check, DepthValue, RankProfile, SampleSize,
    TauThreshold, ValueReport,
};
pub use linalg::{symmetric_eigen, Matrix, SymmetricEigen};
pub use oracle::{
    brute_force_allocation, lemma_mps_crosscheck, simulate_loss, BruteForceResult,
    MpsCrosscheckReport, SimulationConfig, SimulationResult,
};
pub use posterior::{
    gram, non_spanning_decomposition, posterior_from_spectrum, posterior_variance,
    representative_value, sherman_morrison_posterior, singleton_value, value_bounds,
    value_bounds_for, GramSpectrum, NonSpanningDecomposition, PosteriorSummary, SampleDesign,
    ValueBounds,
};
pub use prior::{
    equivalent_pairwise_correlation, geometric_eigenvalues, jdeep, jdeep_spectrum,
    kl_divergence_of_spectrum, kl_divergence_to_naive, mps_check, pairwise_eigenvalues,
    pairwise_kl_divergence, prior_from_attributes, prior_geometric, prior_pairwise,
    prior_random_walk, random_walk_eigenvalues, EigenPrior, EigenvalueDistribution,
    KnowledgeLadder,
};
pub use scalar::Scalar;

pub type EigenPrior64 = EigenPrior<f64>;
pub type EigenPrior32 = EigenPrior<f32>;
pub type SampleDesign64 = SampleDesign<f64>;
pub type SampleDesign32 = SampleDesign<f32>;
pub type GramSpectrum64 = GramSpectrum<f64>;
pub type DesignAllocation64 = DesignAllocation<f64>;
pub type KnowledgeLadder64 = KnowledgeLadder<f64>;
pub type ValueReport64 = ValueReport<f64>;
pub type SimulationConfig64 = SimulationConfig<f64>;
pub type SimulationResult64 = SimulationResult<f64>;
pub type Matrix64 = Matrix<f64>;
