//! Probability vectors and arbitrary-order joint distributions with
//! prescribed Shannon entropies.
//!
//! A target schedule `H_1 ≤ H_2 ≤ … ≤ H_k` is split into conditional
//! increments `H_m − H_{m−1}`. Each increment is turned into a probability
//! vector with exactly that entropy, and the vectors are chained as a
//! multiplicative cascade: every order-`m` joint probability is an
//! order-`(m−1)` probability times one entry of the next vector. Because the
//! joint distribution is a product, its entropy is the sum of the factor
//! entropies and therefore hits every target.
//!
//! ```
//! use entropy_cascade::{build_from_schedule, EntropySchedule, SolverConfig};
//!
//! let schedule = EntropySchedule::new(10, vec![2.5, 3.2, 3.8]).unwrap();
//! let built = build_from_schedule(&schedule, &SolverConfig::default()).unwrap();
//! assert!((built.distribution.joint_entropy() - 3.8).abs() < 1e-9);
//! ```

pub mod cascade;
pub mod entropy;
pub mod io;
pub mod sampler;
pub mod solver;

pub use cascade::{
    build_from_schedule, entry_at, extend, marginal, materialize, CascadeBuild, CascadeError,
    CascadeStep, DEFAULT_MATERIALIZATION_CAP,
};
pub use entropy::{
    capacity, conditional_increments, joint_entropy_dense, joint_entropy_factored, shannon_entropy,
    validate_schedule, DenseJointTensor, EntropySchedule, FactoredJointDistribution,
    InvariantError, ProbabilityVector, ScheduleViolation, SolveMethod, SolverReport,
};
pub use sampler::{empirical_entropy, sample_tuples, SampleBatch};
pub use solver::{
    solve_exponential_family, solve_random_search, solve_two_level, solve_vector, SolveError,
    SolveOutcome, SolverConfig,
};
