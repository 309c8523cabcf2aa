//! Compensated summation with a fixed reduction order.
//!
//! Every sum in the crate goes through [`chunked_sums`]: the input is cut into
//! chunks of [`CHUNK_LEN`] items, each chunk is reduced with Neumaier
//! compensation, and the chunk partials are then folded left to right. Chunk
//! boundaries never depend on the number of worker threads, so the result is
//! bit-identical whether the chunks run on one thread or many.

use rayon::prelude::*;

/// Items per reduction chunk.
pub const CHUNK_LEN: usize = 1 << 14;

/// Neumaier (improved Kahan–Babuška) running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial into this one. Not commutative at the bit level;
    /// callers fix the merge order.
    #[inline]
    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.comp += other.comp;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        s.extend(iter);
        s
    }
}

/// Compensated sum of a slice in sequential order.
pub fn sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<NeumaierSum>().value()
}

/// Computes `K` compensated sums of `term(i)` over `i in 0..n` in one pass.
///
/// Chunks are reduced in parallel on the current rayon pool and merged in
/// chunk order.
pub fn chunked_sums<const K: usize, F>(n: usize, term: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync,
{
    let reduce_chunk = |c: usize| {
        let start = c * CHUNK_LEN;
        let end = (start + CHUNK_LEN).min(n);
        let mut acc = [NeumaierSum::default(); K];
        for i in start..end {
            let t = term(i);
            for k in 0..K {
                acc[k].add(t[k]);
            }
        }
        acc
    };

    let n_chunks = n.div_ceil(CHUNK_LEN);
    let partials: Vec<[NeumaierSum; K]> = if n_chunks <= 1 {
        (0..n_chunks).map(reduce_chunk).collect()
    } else {
        (0..n_chunks).into_par_iter().map(reduce_chunk).collect()
    };

    let mut total = [NeumaierSum::default(); K];
    for p in &partials {
        for k in 0..K {
            total[k].merge(&p[k]);
        }
    }
    total.map(|s| s.value())
}
