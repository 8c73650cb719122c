//! Maximum-likelihood n-gram counts over a corpus.
//!
//! Grams never cross sample boundaries and no boundary markers are added, so
//! a sample shorter than the order contributes nothing.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::corpus::{Corpus, Sample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramTable {
    order: usize,
    counts: HashMap<Vec<String>, u64>,
    total: u64,
}

impl NGramTable {
    pub fn empty(order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(NGramTable {
            order,
            counts: HashMap::new(),
            total: 0,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct grams.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, gram: &[String]) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &HashMap<Vec<String>, u64> {
        &self.counts
    }

    fn add_sample(&mut self, sample: &Sample) {
        for gram in sample.tokens.windows(self.order) {
            match self.counts.get_mut(gram) {
                Some(c) => *c += 1,
                None => {
                    self.counts.insert(gram.to_vec(), 1);
                }
            }
            self.total += 1;
        }
    }

    /// Adds another table's counts into this one.
    pub fn merge(&mut self, other: NGramTable) {
        debug_assert_eq!(self.order, other.order);
        for (gram, c) in other.counts {
            *self.counts.entry(gram).or_default() += c;
        }
        self.total += other.total;
    }

    /// Relative frequency `count / total`; zero for unseen grams.
    pub fn prob<T: Scalar>(&self, gram: &[String]) -> Result<T> {
        if self.total == 0 {
            return Err(Error::UndefinedDistribution { order: self.order });
        }
        Ok(T::from_count(self.count(gram) as usize) / T::from_count(self.total as usize))
    }

    /// Probability used for unseen grams when scoring: `1 / (total + 1)`.
    pub fn floor_prob<T: Scalar>(&self) -> T {
        T::one() / T::from_count(self.total as usize + 1)
    }

    /// Writes `gram<TAB>count` lines, grams space-joined, sorted lexicographically.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut rows: Vec<(String, u64)> = self
            .counts
            .iter()
            .map(|(g, c)| (g.join(" "), *c))
            .collect();
        rows.sort_unstable();
        for (gram, count) in rows {
            writeln!(out, "{gram}\t{count}")?;
        }
        Ok(())
    }
}

fn check_order(order: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(Error::config(format!("n-gram order must be 1..={MAX_ORDER}, got {order}")))
    }
}

pub fn count_ngrams(corpus: &Corpus, order: usize) -> Result<NGramTable> {
    let mut table = NGramTable::empty(order)?;
    for s in corpus.samples() {
        table.add_sample(s);
    }
    Ok(table)
}

/// Counts `shards` contiguous slices of the corpus in parallel and merges them.
pub fn count_ngrams_sharded(corpus: &Corpus, order: usize, shards: usize) -> Result<NGramTable> {
    check_order(order)?;
    let samples = corpus.samples();
    let chunk = samples.len().div_ceil(shards.max(1)).max(1);
    let partials: Vec<NGramTable> = samples
        .par_chunks(chunk)
        .map(|part| {
            let mut t = NGramTable::empty(order).expect("order checked");
            part.iter().for_each(|s| t.add_sample(s));
            t
        })
        .collect();
    let mut table = NGramTable::empty(order)?;
    for p in partials {
        table.merge(p);
    }
    Ok(table)
}
