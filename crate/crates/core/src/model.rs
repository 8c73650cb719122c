//! Fixed-context feedforward language model with hand-written gradients.
//!
//! `p(w_i | w_{i-n+1} .. w_{i-1}) = softmax(tanh(concat(E[ctx]) W1 + b1) W2 + b2)`
//!
//! All matrices are row-major. A position `i` of a sequence is scored when
//! `i >= context_size`, its target is unmasked, and its whole context is
//! unmasked.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampler::Batch;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig<T> {
    pub context_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub vocab_size: usize,
    pub learning_rate: T,
}

impl<T: Scalar> ModelConfig<T> {
    /// Small default: context 3, embedding 16, hidden 32, learning rate 0.1.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            context_size: 3,
            embed_dim: 16,
            hidden_dim: 32,
            vocab_size,
            learning_rate: T::from_f64_lossy(0.1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("context_size", self.context_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("vocab_size", self.vocab_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > T::zero() && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    fn input_dim(&self) -> usize {
        self.context_size * self.embed_dim
    }
}

/// Model weights. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    config: ModelConfig<T>,
    /// `vocab_size × embed_dim`
    pub embed: Vec<T>,
    /// `(context_size · embed_dim) × hidden_dim`
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    /// `hidden_dim × vocab_size`
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

pub type Gradients<T> = ModelParams<T>;

/// Name and `(rows, cols)` of each parameter tensor, in storage order.
pub const TENSOR_NAMES: [&str; 5] = ["embed", "w1", "b1", "w2", "b2"];

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(config: &ModelConfig<T>) -> Self {
        let c = config;
        ModelParams {
            config: *c,
            embed: vec![T::zero(); c.vocab_size * c.embed_dim],
            w1: vec![T::zero(); c.input_dim() * c.hidden_dim],
            b1: vec![T::zero(); c.hidden_dim],
            w2: vec![T::zero(); c.hidden_dim * c.vocab_size],
            b2: vec![T::zero(); c.vocab_size],
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig<T>, rng: &mut R) -> Self {
        let mut p = Self::zeros(config);
        let mut fill = |buf: &mut [T], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in buf {
                *v = T::from_f64_lossy(rng.random_range(-bound..=bound));
            }
        };
        fill(&mut p.embed, config.embed_dim);
        fill(&mut p.w1, config.input_dim());
        fill(&mut p.w2, config.hidden_dim);
        p
    }

    pub fn config(&self) -> &ModelConfig<T> {
        &self.config
    }

    pub fn shapes(&self) -> [(usize, usize); 5] {
        let c = &self.config;
        [
            (c.vocab_size, c.embed_dim),
            (c.input_dim(), c.hidden_dim),
            (1, c.hidden_dim),
            (c.hidden_dim, c.vocab_size),
            (1, c.vocab_size),
        ]
    }

    pub fn tensors(&self) -> [&[T]; 5] {
        [&self.embed, &self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 5] {
        [&mut self.embed, &mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Flat view over all parameters, in [`TENSOR_NAMES`] order.
    pub fn get_flat(&self, mut index: usize) -> T {
        for t in self.tensors() {
            if index < t.len() {
                return t[index];
            }
            index -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_flat(&mut self, mut index: usize, value: T) {
        for t in self.tensors_mut() {
            if index < t.len() {
                t[index] = value;
                return;
            }
            index -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        let vocab_size = self.config.vocab_size;
        match ids.iter().find(|&&id| id as usize >= vocab_size) {
            Some(&id) => Err(Error::TokenOutOfRange { id, vocab_size }),
            None => Ok(()),
        }
    }

    /// Next-token distribution for one context of exactly `context_size` ids.
    pub fn forward(&self, context: &[u32]) -> Result<Vec<T>> {
        if context.len() != self.config.context_size {
            return Err(Error::config(format!(
                "context has {} ids, model expects {}",
                context.len(),
                self.config.context_size
            )));
        }
        self.check_ids(context)?;
        let mut scratch = Scratch::new(&self.config);
        self.forward_into(context, &mut scratch);
        let lse = scratch.log_sum_exp();
        Ok(scratch.logits.iter().map(|&l| (l - lse).exp()).collect())
    }

    fn forward_into(&self, context: &[u32], s: &mut Scratch<T>) {
        let c = &self.config;
        let e = c.embed_dim;
        for (slot, &tok) in context.iter().enumerate() {
            let row = tok as usize * e;
            s.x[slot * e..(slot + 1) * e].copy_from_slice(&self.embed[row..row + e]);
        }
        s.h.copy_from_slice(&self.b1);
        for (k, &xk) in s.x.iter().enumerate() {
            let w = &self.w1[k * c.hidden_dim..(k + 1) * c.hidden_dim];
            for (hj, &wkj) in s.h.iter_mut().zip(w) {
                *hj += xk * wkj;
            }
        }
        for hj in s.h.iter_mut() {
            *hj = hj.tanh();
        }
        s.logits.copy_from_slice(&self.b2);
        for (j, &hj) in s.h.iter().enumerate() {
            let w = &self.w2[j * c.vocab_size..(j + 1) * c.vocab_size];
            for (lv, &wjv) in s.logits.iter_mut().zip(w) {
                *lv += hj * wjv;
            }
        }
    }

    /// Adds `scale · ∂nll/∂θ` for one position into `grads`; returns the nll.
    fn accumulate(&self, context: &[u32], target: u32, scale: T, grads: &mut Gradients<T>, s: &mut Scratch<T>) -> T {
        let c = &self.config;
        let (e, hd, v) = (c.embed_dim, c.hidden_dim, c.vocab_size);
        self.forward_into(context, s);
        let lse = s.log_sum_exp();
        let nll = lse - s.logits[target as usize];

        // dL/dlogits = softmax - onehot
        for (d, &l) in s.dlogits.iter_mut().zip(&s.logits) {
            *d = (l - lse).exp() * scale;
        }
        s.dlogits[target as usize] -= scale;

        for (gb, &d) in grads.b2.iter_mut().zip(&s.dlogits) {
            *gb += d;
        }
        for j in 0..hd {
            let hj = s.h[j];
            let w = &self.w2[j * v..(j + 1) * v];
            let g = &mut grads.w2[j * v..(j + 1) * v];
            let mut dh = T::zero();
            for ((gv, &wv), &d) in g.iter_mut().zip(w).zip(&s.dlogits) {
                *gv += hj * d;
                dh += wv * d;
            }
            s.dz[j] = dh * (T::one() - hj * hj);
        }
        for (gb, &d) in grads.b1.iter_mut().zip(&s.dz) {
            *gb += d;
        }
        for k in 0..c.input_dim() {
            let xk = s.x[k];
            let w = &self.w1[k * hd..(k + 1) * hd];
            let g = &mut grads.w1[k * hd..(k + 1) * hd];
            let mut dx = T::zero();
            for ((gv, &wv), &d) in g.iter_mut().zip(w).zip(&s.dz) {
                *gv += xk * d;
                dx += wv * d;
            }
            s.dx[k] = dx;
        }
        for (slot, &tok) in context.iter().enumerate() {
            let row = tok as usize * e;
            for (g, &d) in grads.embed[row..row + e].iter_mut().zip(&s.dx[slot * e..(slot + 1) * e]) {
                *g += d;
            }
        }
        nll
    }

    fn position_nll(&self, context: &[u32], target: u32, s: &mut Scratch<T>) -> T {
        self.forward_into(context, s);
        s.log_sum_exp() - s.logits[target as usize]
    }

    fn batch_positions<'a>(&self, batch: &'a Batch) -> Result<Vec<(&'a [u32], u32)>> {
        self.check_ids(&batch.token_ids)?;
        let mut out = Vec::new();
        for r in 0..batch.rows() {
            let (ids, mask) = batch.row(r);
            push_positions(ids, Some(mask), self.config.context_size, &mut out);
        }
        Ok(out)
    }

    /// Mean negative log-likelihood over the batch's scoreable positions.
    pub fn batch_loss(&self, batch: &Batch) -> Result<T> {
        let positions = self.batch_positions(batch)?;
        if positions.is_empty() {
            return Err(Error::DegenerateBatch);
        }
        let mut s = Scratch::new(&self.config);
        let sum = positions
            .iter()
            .fold(T::zero(), |acc, &(ctx, tgt)| acc + self.position_nll(ctx, tgt, &mut s));
        Ok(sum / T::from_count(positions.len()))
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn backward(&self, batch: &Batch) -> Result<(T, Gradients<T>)> {
        let positions = self.batch_positions(batch)?;
        if positions.is_empty() {
            return Err(Error::DegenerateBatch);
        }
        let scale = T::one() / T::from_count(positions.len());
        let mut grads = Gradients::zeros(&self.config);
        let mut s = Scratch::new(&self.config);
        let mut sum = T::zero();
        for &(ctx, tgt) in &positions {
            sum += self.accumulate(ctx, tgt, scale, &mut grads, &mut s);
        }
        Ok((sum * scale, grads))
    }

    /// `θ ← θ − lr · g`
    pub fn sgd_step(&mut self, grads: &Gradients<T>, learning_rate: T) {
        for (p, g) in self.tensors_mut().into_iter().zip(grads.tensors()) {
            for (pv, &gv) in p.iter_mut().zip(g) {
                *pv -= learning_rate * gv;
            }
        }
    }

    /// Sum of per-position nll and the number of scored positions over
    /// unpadded sequences. Chunks are reduced in a fixed order.
    pub fn total_nll(&self, dataset: &[Vec<u32>]) -> Result<(T, usize)> {
        for seq in dataset {
            self.check_ids(seq)?;
        }
        let mut positions = Vec::new();
        for seq in dataset {
            push_positions(seq, None, self.config.context_size, &mut positions);
        }
        let partials: Vec<T> = positions
            .par_chunks(256)
            .map(|chunk| {
                let mut s = Scratch::new(&self.config);
                chunk
                    .iter()
                    .fold(T::zero(), |acc, &(ctx, tgt)| acc + self.position_nll(ctx, tgt, &mut s))
            })
            .collect();
        Ok((partials.into_iter().fold(T::zero(), |a, b| a + b), positions.len()))
    }

    /// `exp(mean nll)` over every scoreable position of the dataset.
    pub fn perplexity(&self, dataset: &[Vec<u32>]) -> Result<T> {
        let (sum, count) = self.total_nll(dataset)?;
        if count == 0 {
            return Err(Error::DegenerateBatch);
        }
        Ok((sum / T::from_count(count)).exp())
    }
}

fn push_positions<'a>(ids: &'a [u32], mask: Option<&[u8]>, ctx: usize, out: &mut Vec<(&'a [u32], u32)>) {
    let live = |i: usize| mask.is_none_or(|m| m[i] == 1);
    let mut run = 0; // length of the unmasked run ending just before i
    for i in 0..ids.len() {
        if live(i) {
            if run >= ctx {
                out.push((&ids[i - ctx..i], ids[i]));
            }
            run += 1;
        } else {
            run = 0;
        }
    }
}

struct Scratch<T> {
    x: Vec<T>,
    h: Vec<T>,
    logits: Vec<T>,
    dlogits: Vec<T>,
    dz: Vec<T>,
    dx: Vec<T>,
}

impl<T: Scalar> Scratch<T> {
    fn new(c: &ModelConfig<T>) -> Self {
        Scratch {
            x: vec![T::zero(); c.input_dim()],
            h: vec![T::zero(); c.hidden_dim],
            logits: vec![T::zero(); c.vocab_size],
            dlogits: vec![T::zero(); c.vocab_size],
            dz: vec![T::zero(); c.hidden_dim],
            dx: vec![T::zero(); c.input_dim()],
        }
    }

    fn log_sum_exp(&self) -> T {
        let m = self.logits.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        m + self.logits.iter().map(|&l| (l - m).exp()).sum::<T>().ln()
    }
}
