//! Drawing symbol tuples from a cascade and measuring their plug-in entropy.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entropy::{FactoredJointDistribution, ProbabilityVector};

/// Independent tuples drawn from one distribution, stored flat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    order: usize,
    n_symbols: usize,
    seed: u64,
    symbols: Vec<usize>,
}

impl SampleBatch {
    /// Builds a batch from explicit tuples. Panics if a tuple has the wrong
    /// length or a symbol is out of range.
    pub fn from_tuples<I, T>(order: usize, n_symbols: usize, seed: u64, tuples: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[usize]>,
    {
        assert!(order >= 1, "order must be at least 1");
        let mut symbols = Vec::new();
        for t in tuples {
            let t = t.as_ref();
            assert_eq!(t.len(), order, "tuple length must equal the order");
            assert!(t.iter().all(|&s| s < n_symbols), "symbol out of range");
            symbols.extend_from_slice(t);
        }
        Self {
            order,
            n_symbols,
            seed,
            symbols,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.symbols.len() / self.order
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn tuple(&self, i: usize) -> &[usize] {
        &self.symbols[i * self.order..(i + 1) * self.order]
    }

    pub fn tuples(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.symbols.chunks_exact(self.order)
    }

    /// Relative frequency of each symbol at `position`.
    pub fn position_frequencies(&self, position: usize) -> Vec<f64> {
        let mut counts = vec![0u64; self.n_symbols];
        for t in self.tuples() {
            counts[t[position]] += 1;
        }
        let total = self.len() as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }
}

/// Cumulative distribution with the tail pinned to exactly 1.
struct Cdf(Vec<f64>);

impl Cdf {
    fn new(v: &ProbabilityVector) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = v
            .probs()
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        let last_positive = v
            .probs()
            .iter()
            .rposition(|&p| p > 0.0)
            .expect("normalized vectors have a positive entry");
        cdf[last_positive..].fill(1.0);
        Self(cdf)
    }

    /// Smallest index whose cumulative mass reaches `u ∈ (0, 1]`.
    fn invert(&self, u: f64) -> usize {
        self.0.partition_point(|&c| c < u)
    }
}

/// Draws `count` tuples; position `m` is sampled from factor `m` by inverse CDF.
pub fn sample_tuples(f: &FactoredJointDistribution, count: usize, seed: u64) -> SampleBatch {
    let cdfs: Vec<Cdf> = f.factors().iter().map(Cdf::new).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut symbols = Vec::with_capacity(count * f.order());
    for _ in 0..count {
        for cdf in &cdfs {
            // u ∈ (0, 1]: zero-mass symbols can never be hit, and a u landing
            // on a boundary picks the lower index.
            let u = 1.0 - rng.gen::<f64>();
            symbols.push(cdf.invert(u));
        }
    }
    SampleBatch {
        order: f.order(),
        n_symbols: f.n_symbols(),
        seed,
        symbols,
    }
}

/// Plug-in joint entropy of the batch's empirical tuple frequencies, in bits.
pub fn empirical_entropy(b: &SampleBatch) -> f64 {
    let mut counts: HashMap<&[usize], u64> = HashMap::new();
    for t in b.tuples() {
        *counts.entry(t).or_default() += 1;
    }
    let n = b.len() as f64;
    // H = log2 n − (1/n) Σ c log2 c
    let weighted: f64 = counts
        .values()
        .map(|&c| {
            let c = c as f64;
            c * c.log2()
        })
        .sum();
    (n.log2() - weighted / n).max(0.0)
}
