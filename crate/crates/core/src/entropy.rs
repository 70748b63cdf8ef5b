//! Domain types and forward entropy computations.
//!
//! Every entropy in this crate is measured in bits. Probabilities below
//! [`ZERO_THRESHOLD`] contribute nothing, so `0 · log2 0 = 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Entries at or below this value are treated as exact zeros in entropy sums.
pub const ZERO_THRESHOLD: f64 = 1e-300;

/// Allowed deviation of a probability vector's sum from one.
pub const VECTOR_SUM_TOLERANCE: f64 = 1e-12;

/// Per-order allowed deviation of a dense tensor's sum from one.
pub const TENSOR_SUM_TOLERANCE_PER_ORDER: f64 = 1e-9;

/// Slack applied when comparing an entropy against the capacity `log2 N`
/// or against zero. Targets inside the slack are clamped onto the bound.
pub const CAPACITY_SLACK: f64 = 1e-12;

/// Violations of the structural invariants of the distribution types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error("a probability vector needs at least 2 symbols, got {0}")]
    TooFewSymbols(usize),
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("entry {index} = {value} lies outside [0, 1]")]
    OutOfUnitRange { index: usize, value: f64 },
    #[error("entries sum to {sum}, which differs from 1 by more than {tolerance:e}")]
    NotNormalized { sum: f64, tolerance: f64 },
    #[error("a factored distribution needs at least one factor")]
    EmptyFactors,
    #[error("factor {position} has {found} symbols, expected {expected}")]
    AlphabetMismatch {
        position: usize,
        expected: usize,
        found: usize,
    },
    #[error("expected {expected} entries, found {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("tensor order must be at least 1")]
    ZeroOrder,
    #[error("{n_symbols}^{order} entries do not fit in memory addressing")]
    TooManyEntries { n_symbols: usize, order: usize },
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

#[inline]
pub(crate) fn surprisal_term(p: f64) -> f64 {
    if p <= ZERO_THRESHOLD {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Entropy in bits of a slice of probabilities (no validation).
pub fn entropy_of(probs: &[f64]) -> f64 {
    compensated_sum(probs.iter().map(|&p| surprisal_term(p))).max(0.0)
}

/// `log2 N`, the largest entropy a single position over `n` symbols can carry.
pub fn capacity(n_symbols: usize) -> f64 {
    (n_symbols as f64).log2()
}

fn check_entries(probs: &[f64], tolerance: f64) -> Result<(), InvariantError> {
    if probs.len() < 2 {
        return Err(InvariantError::TooFewSymbols(probs.len()));
    }
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() {
            return Err(InvariantError::NonFinite { index });
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(InvariantError::OutOfUnitRange { index, value });
        }
    }
    let sum = compensated_sum(probs.iter().copied());
    if (sum - 1.0).abs() > tolerance {
        return Err(InvariantError::NotNormalized { sum, tolerance });
    }
    Ok(())
}

/// A distribution over `N ≥ 2` symbols.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self, InvariantError> {
        Self::with_sum_tolerance(probs, VECTOR_SUM_TOLERANCE)
    }

    /// Like [`ProbabilityVector::new`] but with a caller-chosen normalization
    /// tolerance. Marginals of dense tensors use the tensor tolerance.
    pub fn with_sum_tolerance(probs: Vec<f64>, tolerance: f64) -> Result<Self, InvariantError> {
        check_entries(&probs, tolerance)?;
        Ok(Self { probs })
    }

    pub fn uniform(n_symbols: usize) -> Result<Self, InvariantError> {
        if n_symbols < 2 {
            return Err(InvariantError::TooFewSymbols(n_symbols));
        }
        Ok(Self {
            probs: vec![1.0 / n_symbols as f64; n_symbols],
        })
    }

    /// All mass on `symbol`.
    pub fn point_mass(n_symbols: usize, symbol: usize) -> Result<Self, InvariantError> {
        if n_symbols < 2 {
            return Err(InvariantError::TooFewSymbols(n_symbols));
        }
        assert!(symbol < n_symbols, "point mass symbol out of range");
        let mut probs = vec![0.0; n_symbols];
        probs[symbol] = 1.0;
        Ok(Self { probs })
    }

    pub(crate) fn from_raw_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(check_entries(&probs, VECTOR_SUM_TOLERANCE).is_ok());
        Self { probs }
    }

    pub fn n_symbols(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }

    pub fn get(&self, symbol: usize) -> Option<f64> {
        self.probs.get(symbol).copied()
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(self)
    }
}

impl AsRef<[f64]> for ProbabilityVector {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

impl<'de> Deserialize<'de> for ProbabilityVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            probs: Vec<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        ProbabilityVector::new(raw.probs).map_err(serde::de::Error::custom)
    }
}

/// `−Σ p log2 p` over the vector.
pub fn shannon_entropy(p: &ProbabilityVector) -> f64 {
    entropy_of(&p.probs)
}

/// Order-indexed target joint entropies `H_1..H_k` over an alphabet of `N` symbols.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropySchedule {
    n_symbols: usize,
    targets: Vec<f64>,
}

impl<'de> Deserialize<'de> for EntropySchedule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n_symbols: usize,
            targets: Vec<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        EntropySchedule::new(raw.n_symbols, raw.targets).map_err(serde::de::Error::custom)
    }
}

/// The first rule an [`EntropySchedule`] breaks. `order` is 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleViolation {
    #[error("alphabet must have at least 2 symbols, got {0}")]
    TooFewSymbols(usize),
    #[error("schedule has no targets")]
    Empty,
    #[error("target for order {order} is not finite")]
    NonFinite { order: usize },
    #[error("first-order target {target} is negative")]
    NegativeFirst { target: f64 },
    #[error("target for order {order} ({current}) is below order {} ({previous}); schedule must be non-decreasing", order - 1)]
    ScheduleNotMonotone {
        order: usize,
        previous: f64,
        current: f64,
    },
    #[error(
        "increment at order {order} is {increment} bits, exceeding capacity log2 N = {capacity}"
    )]
    IncrementExceedsCapacity {
        order: usize,
        increment: f64,
        capacity: f64,
    },
}

impl ScheduleViolation {
    /// 1-based order index of the offending target, when there is one.
    pub fn order(&self) -> Option<usize> {
        match self {
            Self::TooFewSymbols(_) | Self::Empty => None,
            Self::NegativeFirst { .. } => Some(1),
            Self::NonFinite { order }
            | Self::ScheduleNotMonotone { order, .. }
            | Self::IncrementExceedsCapacity { order, .. } => Some(*order),
        }
    }
}

/// Checks every schedule rule and reports the first violation.
pub fn validate_schedule(n_symbols: usize, targets: &[f64]) -> Result<(), ScheduleViolation> {
    if n_symbols < 2 {
        return Err(ScheduleViolation::TooFewSymbols(n_symbols));
    }
    if targets.is_empty() {
        return Err(ScheduleViolation::Empty);
    }
    if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
        return Err(ScheduleViolation::NonFinite { order: i + 1 });
    }
    let cap = capacity(n_symbols);
    if targets[0] < -CAPACITY_SLACK {
        return Err(ScheduleViolation::NegativeFirst { target: targets[0] });
    }
    if targets[0] > cap + CAPACITY_SLACK {
        return Err(ScheduleViolation::IncrementExceedsCapacity {
            order: 1,
            increment: targets[0],
            capacity: cap,
        });
    }
    for (i, pair) in targets.windows(2).enumerate() {
        let order = i + 2;
        let (previous, current) = (pair[0], pair[1]);
        if current < previous {
            return Err(ScheduleViolation::ScheduleNotMonotone {
                order,
                previous,
                current,
            });
        }
        let increment = current - previous;
        if increment > cap + CAPACITY_SLACK {
            return Err(ScheduleViolation::IncrementExceedsCapacity {
                order,
                increment,
                capacity: cap,
            });
        }
    }
    Ok(())
}

/// The increment `d` closest to `b − a` for which `a + d` rounds to exactly `b`.
fn exact_increment(a: f64, b: f64) -> f64 {
    let mut d = b - a;
    // 0 ≤ d ≤ b keeps the ulp of d no larger than the spacing around b,
    // so stepping d one ulp at a time cannot jump over b.
    for _ in 0..64 {
        let s = a + d;
        if s == b {
            break;
        }
        d = if s < b { d.next_up() } else { d.next_down() };
    }
    d
}

impl EntropySchedule {
    pub fn new(n_symbols: usize, targets: Vec<f64>) -> Result<Self, ScheduleViolation> {
        validate_schedule(n_symbols, &targets)?;
        Ok(Self { n_symbols, targets })
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn order(&self) -> usize {
        self.targets.len()
    }

    /// Entropy of the highest order.
    pub fn final_target(&self) -> f64 {
        *self
            .targets
            .last()
            .expect("validated schedules are non-empty")
    }

    /// `[H_1, H_2 − H_1, …, H_k − H_{k−1}]`.
    ///
    /// Increments are nudged by at most a few ulps so that a left-to-right
    /// running sum reproduces every target exactly.
    pub fn conditional_increments(&self) -> Vec<f64> {
        conditional_increments(self)
    }
}

/// See [`EntropySchedule::conditional_increments`].
pub fn conditional_increments(s: &EntropySchedule) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.targets.len());
    out.push(s.targets[0]);
    for pair in s.targets.windows(2) {
        out.push(exact_increment(pair[0], pair[1]));
    }
    out
}

/// Order-k joint distribution in product (cascade) form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactoredJointDistribution {
    factors: Vec<ProbabilityVector>,
}

impl FactoredJointDistribution {
    pub fn new(factors: Vec<ProbabilityVector>) -> Result<Self, InvariantError> {
        let first = factors.first().ok_or(InvariantError::EmptyFactors)?;
        let expected = first.n_symbols();
        if let Some((position, f)) = factors
            .iter()
            .enumerate()
            .find(|(_, f)| f.n_symbols() != expected)
        {
            return Err(InvariantError::AlphabetMismatch {
                position,
                expected,
                found: f.n_symbols(),
            });
        }
        Ok(Self { factors })
    }

    /// A first-order distribution.
    pub fn single(factor: ProbabilityVector) -> Self {
        Self {
            factors: vec![factor],
        }
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.factors[0].n_symbols()
    }

    pub fn factors(&self) -> &[ProbabilityVector] {
        &self.factors
    }

    pub(crate) fn push_factor(&mut self, v: ProbabilityVector) {
        self.factors.push(v);
    }

    /// `N^k`, or `None` if it overflows `u128`.
    pub fn entry_count(&self) -> Option<u128> {
        (self.n_symbols() as u128).checked_pow(self.order() as u32)
    }

    pub fn joint_entropy(&self) -> f64 {
        joint_entropy_factored(self)
    }
}

impl<'de> Deserialize<'de> for FactoredJointDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            factors: Vec<ProbabilityVector>,
        }
        let raw = Raw::deserialize(deserializer)?;
        FactoredJointDistribution::new(raw.factors).map_err(serde::de::Error::custom)
    }
}

/// Sum of the factor entropies; equals the entropy of the product distribution.
pub fn joint_entropy_factored(f: &FactoredJointDistribution) -> f64 {
    f.factors.iter().map(shannon_entropy).sum()
}

/// Explicit `N^k` joint probabilities, row-major with the first index slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseJointTensor {
    order: usize,
    n_symbols: usize,
    entries: Vec<f64>,
}

impl DenseJointTensor {
    pub fn new(order: usize, n_symbols: usize, entries: Vec<f64>) -> Result<Self, InvariantError> {
        if order == 0 {
            return Err(InvariantError::ZeroOrder);
        }
        if n_symbols < 2 {
            return Err(InvariantError::TooFewSymbols(n_symbols));
        }
        let expected = n_symbols
            .checked_pow(order as u32)
            .ok_or(InvariantError::TooManyEntries { n_symbols, order })?;
        if entries.len() != expected {
            return Err(InvariantError::WrongLength {
                expected,
                found: entries.len(),
            });
        }
        for (index, &value) in entries.iter().enumerate() {
            if !value.is_finite() {
                return Err(InvariantError::NonFinite { index });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(InvariantError::OutOfUnitRange { index, value });
            }
        }
        let tolerance = TENSOR_SUM_TOLERANCE_PER_ORDER * order as f64;
        let sum = compensated_sum(entries.iter().copied());
        if (sum - 1.0).abs() > tolerance {
            return Err(InvariantError::NotNormalized { sum, tolerance });
        }
        Ok(Self {
            order,
            n_symbols,
            entries,
        })
    }

    pub(crate) fn from_raw_unchecked(order: usize, n_symbols: usize, entries: Vec<f64>) -> Self {
        Self {
            order,
            n_symbols,
            entries,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Row-major flat offset of a multi-index, or `None` if out of bounds.
    pub fn offset(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.order {
            return None;
        }
        index.iter().try_fold(0usize, |acc, &i| {
            (i < self.n_symbols).then_some(acc * self.n_symbols + i)
        })
    }

    pub fn get(&self, index: &[usize]) -> Option<f64> {
        self.offset(index).map(|o| self.entries[o])
    }

    pub fn joint_entropy(&self) -> f64 {
        joint_entropy_dense(self)
    }
}

/// `−Σ e log2 e` over all tensor entries.
pub fn joint_entropy_dense(t: &DenseJointTensor) -> f64 {
    entropy_of(&t.entries)
}

/// How a vector solve was carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    TwoLevel,
    ExponentialFamily,
    RandomSearch,
}

impl SolveMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TwoLevel => "two_level",
            Self::ExponentialFamily => "exponential_family",
            Self::RandomSearch => "random_search",
        }
    }
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolveMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "two_level" => Ok(Self::TwoLevel),
            "exponential_family" => Ok(Self::ExponentialFamily),
            "random_search" => Ok(Self::RandomSearch),
            other => Err(format!("unknown solve method `{other}`")),
        }
    }
}

/// Outcome summary of one inverse-entropy solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub target: f64,
    pub achieved_entropy: f64,
    /// `achieved − target`, in bits.
    pub residual: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}
