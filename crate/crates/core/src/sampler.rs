//! Competence-gated batch sampling with replacement, padding and loss masks.

use rand::Rng;

use crate::corpus::{Corpus, PAD_ID};
use crate::curriculum::CurriculumState;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A padded batch in row-major layout (`rows × window`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub token_ids: Vec<u32>,
    /// 1 on real tokens, 0 on padding.
    pub loss_mask: Vec<u8>,
    pub sample_ids: Vec<usize>,
    pub window: usize,
    /// Size of the prefix the ids were drawn from.
    pub eligible: usize,
    /// Set when nothing was eligible and the easiest tie class was used instead.
    pub fallback: bool,
}

impl Batch {
    pub fn rows(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[u8]) {
        let span = r * self.window..(r + 1) * self.window;
        (&self.token_ids[span.clone()], &self.loss_mask[span])
    }
}

/// Truncates or right-pads every sequence to `window`.
pub fn pad_and_mask<S: AsRef<[u32]>>(samples: &[S], window: usize, pad_id: u32) -> (Vec<u32>, Vec<u8>) {
    let mut ids = Vec::with_capacity(samples.len() * window);
    let mut mask = Vec::with_capacity(samples.len() * window);
    for s in samples {
        let s = s.as_ref();
        let keep = s.len().min(window);
        ids.extend_from_slice(&s[..keep]);
        mask.extend(std::iter::repeat_n(1u8, keep));
        ids.extend(std::iter::repeat_n(pad_id, window - keep));
        mask.extend(std::iter::repeat_n(0u8, window - keep));
    }
    (ids, mask)
}

/// Draws `batch_size` sample ids uniformly, with replacement, from the samples
/// eligible at the state's current competence, then pads them to `window`.
///
/// `encoded` holds the vocabulary ids of every sample, indexed by sample id.
pub fn sample_batch<T: Scalar, R: Rng + ?Sized>(
    state: &CurriculumState<T>,
    encoded: &[Vec<u32>],
    batch_size: usize,
    window: usize,
    rng: &mut R,
) -> Result<Batch> {
    if window < 1 {
        return Err(Error::config("window must be at least 1"));
    }
    if batch_size < 1 {
        return Err(Error::config("batch size must be at least 1"));
    }
    if state.is_empty() {
        return Err(Error::config("cannot sample from an empty curriculum"));
    }
    let lambda = state.current_competence();
    let (eligible, fallback) = state.eligible_prefix(lambda);
    if fallback {
        log::warn!(
            "step {}: no sample has eps <= {lambda}; drawing from the easiest {eligible}",
            state.step()
        );
    }
    let order = state.order();
    let sample_ids: Vec<usize> = (0..batch_size)
        .map(|_| order[rng.random_range(0..eligible)])
        .collect();
    let rows: Vec<&[u32]> = sample_ids.iter().map(|&id| encoded[id].as_slice()).collect();
    let (token_ids, loss_mask) = pad_and_mask(&rows, window, PAD_ID);
    Ok(Batch {
        token_ids,
        loss_mask,
        sample_ids,
        window,
        eligible,
        fallback,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaddingStats {
    pub pad_tokens: u64,
    pub pad_fraction: f64,
    /// Samples longer than the window (truncated when batched).
    pub truncated: usize,
}

pub fn padding_stats(corpus: &Corpus, window: usize) -> PaddingStats {
    let mut pad_tokens = 0u64;
    let mut truncated = 0;
    for s in corpus.samples() {
        pad_tokens += window.saturating_sub(s.len()) as u64;
        truncated += usize::from(s.len() > window);
    }
    let slots = (corpus.len() * window) as f64;
    PaddingStats {
        pad_tokens,
        pad_fraction: if slots > 0.0 { pad_tokens as f64 / slots } else { 0.0 },
        truncated,
    }
}
