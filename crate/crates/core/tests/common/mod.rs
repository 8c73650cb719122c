//! Oracles shared by the integration targets.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use curlm_core::{pad_and_mask, Batch, ModelConfig, ModelParams, PAD_ID};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// eps_i = #{j : x_j <= x_i} / N, by pairwise comparison.
pub fn brute_cdf(raw: &[f64]) -> Vec<f64> {
    let n = raw.len() as f64;
    raw.iter()
        .map(|&x| raw.iter().filter(|&&y| y <= x).count() as f64 / n)
        .collect()
}

/// Counts n-grams by listing every occurrence and rescanning the list per
/// distinct gram.
pub fn brute_ngrams(samples: &[Vec<String>], order: usize) -> (HashMap<Vec<String>, u64>, u64) {
    let mut all: Vec<&[String]> = Vec::new();
    for s in samples {
        if s.len() >= order {
            for i in 0..=s.len() - order {
                all.push(&s[i..i + order]);
            }
        }
    }
    let mut counts = HashMap::new();
    for g in &all {
        if !counts.contains_key(*g) {
            let c = all.iter().filter(|h| *h == g).count() as u64;
            counts.insert(g.to_vec(), c);
        }
    }
    (counts, all.len() as u64)
}

/// Relative error with a floor on the denominator: with h = 1e-4 the
/// difference quotient carries roughly 1e-12 of rounding noise, which would
/// dominate a bare relative error on near-zero gradients.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub struct GradCheck {
    pub checked: usize,
    pub max_rel_err: f64,
}

/// Central differences at `coords` random coordinates of a small model on a
/// random padded batch.
pub fn gradient_check(seed: u64, coords: usize, h: f64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = ModelConfig {
        context_size: 3,
        embed_dim: 4,
        hidden_dim: 5,
        vocab_size: 10,
        learning_rate: 0.1,
    };
    let mut params = ModelParams::<f64>::init(&config, &mut rng);
    // Larger weights than the default init so tanh and softmax are off their
    // linear regime.
    for i in 0..params.num_params() {
        let v = params.get_flat(i) * 3.0 + rng.random_range(-0.2..0.2);
        params.set_flat(i, v);
    }
    let window = 9;
    let rows: Vec<Vec<u32>> = (0..6)
        .map(|_| {
            let len = rng.random_range(4..=12);
            (0..len).map(|_| rng.random_range(1..10)).collect()
        })
        .collect();
    let (token_ids, loss_mask) = pad_and_mask(&rows, window, PAD_ID);
    let batch = Batch {
        token_ids,
        loss_mask,
        sample_ids: (0..rows.len()).collect(),
        window,
        eligible: rows.len(),
        fallback: false,
    };

    let (_, grads) = params.backward(&batch).unwrap();
    let mut max_rel_err: f64 = 0.0;
    for _ in 0..coords {
        let i = rng.random_range(0..params.num_params());
        let x = params.get_flat(i);
        params.set_flat(i, x + h);
        let up = params.batch_loss(&batch).unwrap();
        params.set_flat(i, x - h);
        let down = params.batch_loss(&batch).unwrap();
        params.set_flat(i, x);
        let numeric = (up - down) / (2.0 * h);
        max_rel_err = max_rel_err.max(rel_err(grads.get_flat(i), numeric));
    }
    GradCheck {
        checked: coords,
        max_rel_err,
    }
}
