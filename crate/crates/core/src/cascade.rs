//! Multiplicative cascades.
//!
//! An order-`k+1` distribution is the order-`k` one with every entry
//! multiplied by each entry of a conditional vector. Distributions stay in
//! factored form; dense tensors are produced only on request and under a
//! size cap.

use serde::Serialize;
use thiserror::Error;

use crate::entropy::{
    conditional_increments, shannon_entropy, CompensatedSum, DenseJointTensor, EntropySchedule,
    FactoredJointDistribution, InvariantError, ProbabilityVector, ScheduleViolation, SolverReport,
    TENSOR_SUM_TOLERANCE_PER_ORDER,
};
use crate::solver::{solve_vector, SolveError, SolverConfig};

/// Default limit on the number of entries [`materialize`] will allocate.
pub const DEFAULT_MATERIALIZATION_CAP: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CascadeError {
    #[error("conditional vector has {found} symbols, distribution has {expected}")]
    AlphabetMismatch { expected: usize, found: usize },
    #[error("invalid schedule: {0}")]
    Schedule(#[from] ScheduleViolation),
    #[error("solving the factor for order {order} failed: {source}")]
    Solve {
        order: usize,
        #[source]
        source: SolveError,
    },
    #[error("materialization needs {} entries, cap is {cap}", required.map_or_else(|| "more than 2^128".to_string(), |r| r.to_string()))]
    MaterializationTooLarge { required: Option<u128>, cap: u128 },
    #[error("index {index:?} is invalid for order {order} over {n_symbols} symbols")]
    IndexOutOfBounds {
        index: Vec<usize>,
        order: usize,
        n_symbols: usize,
    },
    #[error("axis {axis} is out of bounds for order {order}")]
    AxisOutOfBounds { axis: usize, order: usize },
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

/// Appends `v` as the next cascade factor.
pub fn extend(
    f: &FactoredJointDistribution,
    v: ProbabilityVector,
) -> Result<FactoredJointDistribution, CascadeError> {
    if v.n_symbols() != f.n_symbols() {
        return Err(CascadeError::AlphabetMismatch {
            expected: f.n_symbols(),
            found: v.n_symbols(),
        });
    }
    let mut out = f.clone();
    out.push_factor(v);
    Ok(out)
}

/// One order of a schedule-driven build.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeStep {
    /// 1-based order this factor completes.
    pub order: usize,
    /// Conditional entropy assigned to this factor.
    pub increment: f64,
    pub factor_entropy: f64,
    /// Joint entropy of orders `1..=order`.
    pub cumulative_entropy: f64,
    pub solver: SolverReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeBuild {
    pub distribution: FactoredJointDistribution,
    pub steps: Vec<CascadeStep>,
}

/// Solves one factor per conditional increment and folds them into a cascade.
///
/// For random search and shuffling, order `m` uses seed `cfg.seed + m − 1` so
/// that equal increments do not yield identical factors.
pub fn build_from_schedule(
    s: &EntropySchedule,
    cfg: &SolverConfig,
) -> Result<CascadeBuild, CascadeError> {
    let n = s.n_symbols();
    let mut steps = Vec::with_capacity(s.order());
    let mut factors = Vec::with_capacity(s.order());
    let mut cumulative = 0.0;
    for (i, increment) in conditional_increments(s).into_iter().enumerate() {
        let order = i + 1;
        let order_cfg = SolverConfig {
            seed: cfg.seed.wrapping_add(i as u64),
            ..cfg.clone()
        };
        let outcome = solve_vector(n, increment, &order_cfg)
            .map_err(|source| CascadeError::Solve { order, source })?;
        let factor_entropy = shannon_entropy(&outcome.vector);
        cumulative += factor_entropy;
        steps.push(CascadeStep {
            order,
            increment,
            factor_entropy,
            cumulative_entropy: cumulative,
            solver: outcome.report,
        });
        factors.push(outcome.vector);
    }
    let distribution = FactoredJointDistribution::new(factors)?;
    Ok(CascadeBuild {
        distribution,
        steps,
    })
}

/// Expands the product into a dense row-major tensor.
///
/// Entries are built as `((f1[i1]·f2[i2])·f3[i3])…`, the same order
/// [`entry_at`] uses, so both agree bit for bit.
pub fn materialize(
    f: &FactoredJointDistribution,
    cap: u128,
) -> Result<DenseJointTensor, CascadeError> {
    let required = f.entry_count();
    match required {
        Some(r) if r <= cap && r <= usize::MAX as u128 => {}
        _ => return Err(CascadeError::MaterializationTooLarge { required, cap }),
    }
    let n = f.n_symbols();
    let mut entries = f.factors()[0].probs().to_vec();
    for factor in &f.factors()[1..] {
        let mut next = Vec::with_capacity(entries.len() * n);
        for &prefix in &entries {
            next.extend(factor.probs().iter().map(|&p| prefix * p));
        }
        entries = next;
    }
    Ok(DenseJointTensor::from_raw_unchecked(f.order(), n, entries))
}

/// Probability of one multi-index, without materializing.
pub fn entry_at(f: &FactoredJointDistribution, index: &[usize]) -> Result<f64, CascadeError> {
    let n = f.n_symbols();
    if index.len() != f.order() || index.iter().any(|&i| i >= n) {
        return Err(CascadeError::IndexOutOfBounds {
            index: index.to_vec(),
            order: f.order(),
            n_symbols: n,
        });
    }
    let mut factors = f.factors().iter().zip(index);
    let (first, &i0) = factors.next().expect("order is at least 1");
    Ok(factors.fold(first.probs()[i0], |acc, (v, &i)| acc * v.probs()[i]))
}

/// Sums out every axis but `axis`.
pub fn marginal(t: &DenseJointTensor, axis: usize) -> Result<ProbabilityVector, CascadeError> {
    let order = t.order();
    if axis >= order {
        return Err(CascadeError::AxisOutOfBounds { axis, order });
    }
    let n = t.n_symbols();
    let inner = n.pow((order - 1 - axis) as u32);
    let mut buckets = vec![CompensatedSum::default(); n];
    for (offset, &e) in t.entries().iter().enumerate() {
        buckets[(offset / inner) % n].add(e);
    }
    // A point-mass axis can sum to 1 + 1 ulp.
    let probs = buckets.iter().map(|b| b.value().clamp(0.0, 1.0)).collect();
    let tolerance = TENSOR_SUM_TOLERANCE_PER_ORDER * order as f64;
    Ok(ProbabilityVector::with_sum_tolerance(probs, tolerance)?)
}
