//! Inverse entropy: find a probability vector over `n` symbols whose
//! Shannon entropy equals a target.
//!
//! The solution set is an `(n − 2)`-dimensional manifold for interior
//! targets; any member serves equally well as a cascade factor. Two
//! one-parameter families give unique, reproducible answers by bisection,
//! and a seeded random search gives vectors outside those families.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{
    capacity, entropy_of, surprisal_term, ProbabilityVector, SolveMethod, SolverReport,
    CAPACITY_SLACK,
};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_BISECTION_ITERATIONS: usize = 200;
pub const DEFAULT_SEARCH_ITERATIONS: usize = 100_000;

/// Consecutive rejections after which the random-search step scale halves.
const REJECTIONS_PER_HALVING: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolveMethod,
    /// Allowed `|achieved − target|`, in bits.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Seeds random search and the optional output shuffle.
    pub seed: u64,
    /// Randomly permute the solved vector.
    pub shuffle: bool,
}

impl SolverConfig {
    /// Defaults for `method`, including its iteration budget.
    pub fn for_method(method: SolveMethod) -> Self {
        let max_iterations = match method {
            SolveMethod::TwoLevel | SolveMethod::ExponentialFamily => DEFAULT_BISECTION_ITERATIONS,
            SolveMethod::RandomSearch => DEFAULT_SEARCH_ITERATIONS,
        };
        Self {
            method,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations,
            seed: 0,
            shuffle: false,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_shuffle(mut self, shuffle: bool) -> Self {
        self.shuffle = shuffle;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !self.tolerance.is_finite() || self.tolerance <= 0.0 {
            return Err(SolveError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::for_method(SolveMethod::TwoLevel)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub vector: ProbabilityVector,
    pub report: SolverReport,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("alphabet must have at least 2 symbols, got {0}")]
    TooFewSymbols(usize),
    #[error("target entropy {target} bits is outside [0, log2 N = {capacity}]")]
    TargetOutOfRange { target: f64, capacity: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "{} did not converge: best residual {} bits after {} iterations",
        .best.report.method, .best.report.residual, .best.report.iterations
    )]
    NoConvergence { best: Box<SolveOutcome> },
}

/// Checks `n` and `h`, clamping targets within [`CAPACITY_SLACK`] of a bound onto it.
fn checked_target(n: usize, h: f64) -> Result<f64, SolveError> {
    if n < 2 {
        return Err(SolveError::TooFewSymbols(n));
    }
    let cap = capacity(n);
    if !h.is_finite() || h < -CAPACITY_SLACK || h > cap + CAPACITY_SLACK {
        return Err(SolveError::TargetOutOfRange {
            target: h,
            capacity: cap,
        });
    }
    Ok(h.clamp(0.0, cap))
}

/// Closed-form answers at the two ends of the range.
fn endpoint(n: usize, h: f64, method: SolveMethod) -> Option<SolveOutcome> {
    let vector = if h == 0.0 {
        ProbabilityVector::point_mass(n, 0).ok()?
    } else if h == capacity(n) {
        ProbabilityVector::uniform(n).ok()?
    } else {
        return None;
    };
    Some(finish(vector, h, 0, method))
}

fn finish(
    vector: ProbabilityVector,
    target: f64,
    iterations: usize,
    method: SolveMethod,
) -> SolveOutcome {
    let achieved = vector.entropy();
    SolveOutcome {
        vector,
        report: SolverReport {
            target,
            achieved_entropy: achieved,
            residual: achieved - target,
            iterations,
            method,
        },
    }
}

fn accept_or_fail(outcome: SolveOutcome, tolerance: f64) -> Result<SolveOutcome, SolveError> {
    if outcome.report.residual.abs() <= tolerance {
        Ok(outcome)
    } else {
        Err(SolveError::NoConvergence {
            best: Box::new(outcome),
        })
    }
}

/// Entropy of `[1 − r, r/(n−1), …, r/(n−1)]`, strictly increasing in
/// `r ∈ [0, 1 − 1/n]`.
pub fn two_level_entropy(n: usize, r: f64) -> f64 {
    let rest = r / (n - 1) as f64;
    surprisal_term(1.0 - r) + (n - 1) as f64 * surprisal_term(rest)
}

fn two_level_vector(n: usize, r: f64) -> ProbabilityVector {
    let mut probs = vec![r / (n - 1) as f64; n];
    probs[0] = 1.0 - r;
    ProbabilityVector::from_raw_unchecked(probs)
}

/// One dominant symbol with mass `q`, the rest sharing `1 − q` equally.
///
/// Bisects on `r = 1 − q` rather than on `q` so that low-entropy targets,
/// where `q` sits just below one, keep full relative precision.
pub fn solve_two_level(n: usize, h: f64, cfg: &SolverConfig) -> Result<SolveOutcome, SolveError> {
    cfg.validate()?;
    let h = checked_target(n, h)?;
    if let Some(done) = endpoint(n, h, SolveMethod::TwoLevel) {
        return Ok(done);
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0 - 1.0 / n as f64;
    let mut best = (f64::INFINITY, hi);
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let residual = two_level_entropy(n, mid) - h;
        if residual.abs() < best.0 {
            best = (residual.abs(), mid);
        }
        if residual.abs() <= 0.25 * cfg.tolerance || mid <= lo || mid >= hi {
            break;
        }
        if residual < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let outcome = finish(
        two_level_vector(n, best.1),
        h,
        iterations,
        SolveMethod::TwoLevel,
    );
    accept_or_fail(outcome, cfg.tolerance)
}

/// Geometric weights `p_i ∝ exp(−β i)` for `i = 0..n`.
fn exponential_probs(n: usize, beta: f64) -> Vec<f64> {
    // The largest weight is exp(0) = 1, so the normalizer never underflows.
    let weights: Vec<f64> = (0..n).map(|i| (-beta * i as f64).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

pub fn exponential_family_entropy(n: usize, beta: f64) -> f64 {
    entropy_of(&exponential_probs(n, beta))
}

pub fn solve_exponential_family(
    n: usize,
    h: f64,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolveError> {
    cfg.validate()?;
    let h = checked_target(n, h)?;
    if let Some(done) = endpoint(n, h, SolveMethod::ExponentialFamily) {
        return Ok(done);
    }
    let mut iterations = 0;
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while exponential_family_entropy(n, hi) > h {
        iterations += 1;
        if iterations >= cfg.max_iterations {
            let v = ProbabilityVector::from_raw_unchecked(exponential_probs(n, hi));
            return Err(SolveError::NoConvergence {
                best: Box::new(finish(v, h, iterations, SolveMethod::ExponentialFamily)),
            });
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut best = (f64::INFINITY, hi);
    while iterations < cfg.max_iterations {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let residual = exponential_family_entropy(n, mid) - h;
        if residual.abs() < best.0 {
            best = (residual.abs(), mid);
        }
        if residual.abs() <= 0.25 * cfg.tolerance || mid <= lo || mid >= hi {
            break;
        }
        if residual > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v = ProbabilityVector::from_raw_unchecked(exponential_probs(n, best.1));
    accept_or_fail(
        finish(v, h, iterations, SolveMethod::ExponentialFamily),
        cfg.tolerance,
    )
}

/// Seeded greedy hill-climb over pairwise mass transfers.
///
/// Starts at the two-level solution, scatters it with a short unconditional
/// random walk of relative transfers (each moves at most half the smaller of
/// the two entries), then climbs back: a transfer of `δ ~ U(0, min(p_a, s))`
/// from `a` to `b` is kept iff `|entropy − h|` does not grow. The step scale
/// `s` starts at `0.1/n` and halves after every 1000 consecutive rejections.
pub fn solve_random_search(
    n: usize,
    h: f64,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolveError> {
    cfg.validate()?;
    let h = checked_target(n, h)?;
    if let Some(done) = endpoint(n, h, SolveMethod::RandomSearch) {
        return Ok(done);
    }
    let start_cfg = SolverConfig::for_method(SolveMethod::TwoLevel).with_tolerance(cfg.tolerance);
    let mut probs = solve_two_level(n, h, &start_cfg)?.vector.into_inner();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let scatter_steps = (4 * n).min(cfg.max_iterations / 4);
    for _ in 0..scatter_steps {
        let (a, b) = distinct_pair(&mut rng, n);
        let limit = 0.5 * probs[a].min(probs[b]);
        if limit > 0.0 {
            let delta = rng.gen::<f64>() * limit;
            probs[a] -= delta;
            probs[b] += delta;
        }
    }

    let mut entropy = entropy_of(&probs);
    let mut step_scale = 0.1 / n as f64;
    let mut rejections = 0;
    let mut iterations = scatter_steps;
    while iterations < cfg.max_iterations {
        let residual = (entropy - h).abs();
        if residual <= 0.5 * cfg.tolerance {
            // The running value drifts; confirm against a fresh sum.
            entropy = entropy_of(&probs);
            if (entropy - h).abs() <= 0.5 * cfg.tolerance {
                break;
            }
            continue;
        }
        iterations += 1;
        let (a, b) = distinct_pair(&mut rng, n);
        let limit = probs[a].min(step_scale);
        let mut accepted = false;
        if limit > 0.0 {
            let delta = rng.gen::<f64>() * limit;
            let (new_a, new_b) = (probs[a] - delta, probs[b] + delta);
            if new_a >= 0.0 && new_b <= 1.0 {
                let change = surprisal_term(new_a) + surprisal_term(new_b)
                    - surprisal_term(probs[a])
                    - surprisal_term(probs[b]);
                if (entropy + change - h).abs() <= residual {
                    probs[a] = new_a;
                    probs[b] = new_b;
                    entropy += change;
                    accepted = true;
                }
            }
        }
        if accepted {
            rejections = 0;
        } else {
            rejections += 1;
            if rejections == REJECTIONS_PER_HALVING {
                step_scale *= 0.5;
                rejections = 0;
            }
        }
    }
    let outcome = finish(
        ProbabilityVector::from_raw_unchecked(probs),
        h,
        iterations,
        SolveMethod::RandomSearch,
    );
    accept_or_fail(outcome, cfg.tolerance)
}

fn distinct_pair(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// Solves with `cfg.method`, then applies a seeded permutation if
/// `cfg.shuffle` is set.
pub fn solve_vector(n: usize, h: f64, cfg: &SolverConfig) -> Result<SolveOutcome, SolveError> {
    let mut outcome = match cfg.method {
        SolveMethod::TwoLevel => solve_two_level(n, h, cfg)?,
        SolveMethod::ExponentialFamily => solve_exponential_family(n, h, cfg)?,
        SolveMethod::RandomSearch => solve_random_search(n, h, cfg)?,
    };
    if cfg.shuffle {
        // Offset so the permutation stream differs from the search stream.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
        let mut probs = outcome.vector.into_inner();
        probs.shuffle(&mut rng);
        outcome.vector = ProbabilityVector::from_raw_unchecked(probs);
        let achieved = outcome.vector.entropy();
        outcome.report.achieved_entropy = achieved;
        outcome.report.residual = achieved - outcome.report.target;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(method: SolveMethod) -> SolverConfig {
        SolverConfig::for_method(method)
    }

    const METHODS: [SolveMethod; 3] = [
        SolveMethod::TwoLevel,
        SolveMethod::ExponentialFamily,
        SolveMethod::RandomSearch,
    ];

    #[test]
    fn two_level_endpoints_are_closed_form() {
        let up = solve_two_level(10, 10f64.log2(), &cfg(SolveMethod::TwoLevel)).unwrap();
        assert!(up.vector.probs().iter().all(|&p| p == 0.1));
        assert_eq!(up.report.iterations, 0);

        let down = solve_two_level(10, 0.0, &cfg(SolveMethod::TwoLevel)).unwrap();
        assert_eq!(down.vector.probs()[0], 1.0);
        assert!(down.vector.probs()[1..].iter().all(|&p| p == 0.0));
        assert_eq!(down.report.residual, 0.0);
        assert_eq!(down.report.iterations, 0);
    }

    /// Brackets the root of `H(q) = 0.7` for `n = 10` by a fixed-step scan of
    /// the closed-form two-level entropy, independent of the bisection.
    fn scan_two_level_root(n: usize, h: f64) -> (f64, f64) {
        let entropy_at_q = |q: f64| {
            let rest = (1.0 - q) / (n - 1) as f64;
            let mut e = -q * q.log2();
            if rest > 0.0 {
                e -= (1.0 - q) * rest.log2();
            }
            e
        };
        let step = 1e-7;
        let start = 1.0 / n as f64;
        let steps = ((1.0 - start) / step) as usize;
        let mut prev_q = start;
        let mut prev = entropy_at_q(start);
        for i in 1..=steps {
            let q = start + i as f64 * step;
            let e = entropy_at_q(q);
            if prev >= h && e <= h {
                return (prev_q, q);
            }
            prev_q = q;
            prev = e;
        }
        panic!("no bracket found");
    }

    #[test]
    fn two_level_matches_scan_oracle() {
        let (q_lo, q_hi) = scan_two_level_root(10, 0.7);
        let out = solve_two_level(10, 0.7, &cfg(SolveMethod::TwoLevel)).unwrap();
        let q = out.vector.probs()[0];
        assert!(
            q >= q_lo - 1e-12 && q <= q_hi + 1e-12,
            "q = {q} not in [{q_lo}, {q_hi}]"
        );
        // Frozen from the scan bracket above.
        assert!((q - 0.913_329).abs() < 1e-6);
        assert!((out.vector.probs()[1] - 0.009_630_11).abs() < 1e-7);
        assert!((out.vector.entropy() - 0.7).abs() <= 1e-10);
    }

    #[test]
    fn two_level_entropy_strictly_monotone_on_grid() {
        for n in [2usize, 3, 10, 64, 1024] {
            let top = 1.0 - 1.0 / n as f64;
            let mut prev = -1.0;
            for i in 0..1000 {
                let r = top * i as f64 / 999.0;
                let e = two_level_entropy(n, r);
                assert!(e > prev, "n={n} i={i}");
                prev = e;
            }
        }
    }

    #[test]
    fn exponential_family_trivial_cases() {
        let out = solve_exponential_family(4, 2.0, &cfg(SolveMethod::ExponentialFamily)).unwrap();
        assert_eq!(out.vector.probs(), &[0.25; 4]);
        let out = solve_exponential_family(2, 1.0, &cfg(SolveMethod::ExponentialFamily)).unwrap();
        assert_eq!(out.vector.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn exponential_family_matches_beta_scan_oracle() {
        let n = 10;
        let h = 2.5;
        let out = solve_exponential_family(n, h, &cfg(SolveMethod::ExponentialFamily)).unwrap();
        assert!((out.vector.entropy() - h).abs() <= 1e-10);
        let p = out.vector.probs();
        let beta = (p[0] / p[1]).ln();

        // Independent scan: unnormalized weights, entropy via log-partition.
        let entropy_at = |b: f64| {
            let z: f64 = (0..n).map(|i| (-b * i as f64).exp()).sum();
            let mean: f64 = (0..n)
                .map(|i| i as f64 * (-b * i as f64).exp())
                .sum::<f64>()
                / z;
            (b * mean + z.ln()) / std::f64::consts::LN_2
        };
        let step = 1e-5;
        let mut bracket = None;
        let mut prev = entropy_at(0.0);
        for i in 1..=2_000_000 {
            let b = i as f64 * step;
            let e = entropy_at(b);
            if prev >= h && e <= h {
                bracket = Some((b - step, b));
                break;
            }
            prev = e;
        }
        let (lo, hi) = bracket.expect("bracket in [0, 20]");
        assert!(
            beta >= lo - 1e-9 && beta <= hi + 1e-9,
            "beta {beta} not in [{lo}, {hi}]"
        );
    }

    #[test]
    fn random_search_is_deterministic_and_leaves_two_level_family() {
        let c = cfg(SolveMethod::RandomSearch).with_seed(42);
        let a = solve_random_search(10, 2.5, &c).unwrap();
        let b = solve_random_search(10, 2.5, &c).unwrap();
        assert_eq!(a, b);
        assert!((a.vector.entropy() - 2.5).abs() <= 1e-10);

        let mut rest: Vec<f64> = a.vector.probs().to_vec();
        rest.sort_by(f64::total_cmp);
        rest.pop();
        let spread = rest.last().unwrap() - rest.first().unwrap();
        assert!(spread > 1e-6, "looks like a two-level vector: {rest:?}");

        let other = solve_random_search(10, 2.5, &c.clone().with_seed(43)).unwrap();
        assert_ne!(a.vector, other.vector);
    }

    #[test]
    fn random_search_trivial_cases() {
        let c = cfg(SolveMethod::RandomSearch).with_seed(7);
        let out = solve_random_search(2, 1.0, &c).unwrap();
        assert_eq!(out.vector.probs(), &[0.5, 0.5]);
        let out = solve_random_search(3, 0.0, &c).unwrap();
        let mut p = out.vector.probs().to_vec();
        p.sort_by(f64::total_cmp);
        assert_eq!(p, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn dispatcher_hits_worked_example_targets() {
        let out = solve_vector(10, 2.5, &cfg(SolveMethod::TwoLevel)).unwrap();
        assert!((out.vector.entropy() - 2.5).abs() <= 1e-10);
        let out = solve_vector(10, 0.7, &cfg(SolveMethod::ExponentialFamily)).unwrap();
        assert!((out.vector.entropy() - 0.7).abs() <= 1e-10);
        for m in METHODS {
            let out = solve_vector(10, 0.6, &cfg(m).with_seed(1)).unwrap();
            assert!((out.vector.entropy() - 0.6).abs() <= 1e-10, "{m}");
            assert_eq!(out.report.method, m);
        }
    }

    #[test]
    fn shuffle_permutes_without_changing_entropy() {
        let plain = solve_vector(10, 1.3, &cfg(SolveMethod::TwoLevel)).unwrap();
        let shuffled = solve_vector(
            10,
            1.3,
            &cfg(SolveMethod::TwoLevel).with_shuffle(true).with_seed(5),
        )
        .unwrap();
        let mut a = plain.vector.probs().to_vec();
        let mut b = shuffled.vector.probs().to_vec();
        assert_ne!(a, b);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        assert!((plain.vector.entropy() - shuffled.vector.entropy()).abs() <= 1e-12);
    }

    #[test]
    fn out_of_range_targets_are_rejected() {
        for m in METHODS {
            let c = cfg(m);
            assert!(matches!(
                solve_vector(10, 3.5, &c),
                Err(SolveError::TargetOutOfRange { .. })
            ));
            assert!(matches!(
                solve_vector(10, -0.1, &c),
                Err(SolveError::TargetOutOfRange { .. })
            ));
            assert!(matches!(
                solve_vector(1, 0.0, &c),
                Err(SolveError::TooFewSymbols(1))
            ));
        }
    }

    #[test]
    fn bad_config_is_rejected() {
        let c = cfg(SolveMethod::TwoLevel).with_tolerance(0.0);
        assert!(matches!(
            solve_vector(4, 1.0, &c),
            Err(SolveError::InvalidConfig(_))
        ));
        let c = cfg(SolveMethod::TwoLevel).with_max_iterations(0);
        assert!(matches!(
            solve_vector(4, 1.0, &c),
            Err(SolveError::InvalidConfig(_))
        ));
    }

    #[test]
    fn starved_budget_reports_best_so_far() {
        let c = cfg(SolveMethod::TwoLevel).with_max_iterations(3);
        match solve_vector(10, 1.234, &c) {
            Err(SolveError::NoConvergence { best }) => {
                assert_eq!(best.report.iterations, 3);
                assert!(best.report.residual.abs() > 1e-10);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }
}
