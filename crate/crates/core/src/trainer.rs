//! The competence-based training loop and its metrics file.
//!
//! Each step draws a batch from the samples whose normalized difficulty is
//! within the current competence, takes one SGD step on it, and then raises
//! the competence by the schedule increment.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::annotations::Annotations;
use crate::corpus::{build_vocabulary, Corpus, Vocabulary};
use crate::curriculum::{CurriculumState, LinearSchedule};
use crate::difficulty::{score_corpus, DifficultyMethod, ScoringResources};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::sampler::{padding_stats, sample_batch};
use crate::scalar::Scalar;

pub const METRICS_HEADER: &str = "step,lambda,eligible,train_loss,valid_ppl";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub method: DifficultyMethod,
    pub lambda0: T,
    pub lambda_increment: T,
    pub batch_size: usize,
    pub window: usize,
    /// `None` means ten corpus passes worth of draws: `ceil(10 N / batch_size)`.
    pub total_steps: Option<usize>,
    pub eval_every: usize,
    pub seed: u64,
    /// `vocab_size` is replaced by the size of the training vocabulary.
    pub model: ModelConfig<T>,
}

impl<T: Scalar> TrainConfig<T> {
    /// Batch 128, window 20, evaluation every 100 steps.
    pub fn new(method: DifficultyMethod, lambda0: T, lambda_increment: T) -> Self {
        TrainConfig {
            method,
            lambda0,
            lambda_increment,
            batch_size: 128,
            window: 20,
            total_steps: None,
            eval_every: 100,
            seed: 0,
            model: ModelConfig::desk(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        LinearSchedule::new(self.lambda0, self.lambda_increment)?;
        if self.batch_size < 1 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.eval_every < 1 {
            return Err(Error::config("eval_every must be at least 1"));
        }
        if self.total_steps == Some(0) {
            return Err(Error::config("total_steps must be at least 1"));
        }
        if self.window < self.model.context_size + 1 {
            return Err(Error::config(format!(
                "window {} must exceed context_size {}",
                self.window, self.model.context_size
            )));
        }
        ModelConfig {
            vocab_size: 1,
            ..self.model
        }
        .validate()
    }

    pub fn steps_for(&self, corpus_len: usize) -> usize {
        self.total_steps
            .unwrap_or_else(|| (10 * corpus_len).div_ceil(self.batch_size).max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord<T> {
    pub step: usize,
    /// Competence the step's batch was drawn under.
    pub lambda: T,
    pub eligible: usize,
    /// NaN when the batch had no scoreable position and no update was made.
    pub train_loss: T,
    pub valid_ppl: Option<T>,
}

/// Per-step view handed to a [`TrainObserver`].
#[derive(Debug)]
pub struct StepInfo<'a, T> {
    pub record: &'a MetricsRecord<T>,
    pub sample_ids: &'a [usize],
    pub fallback: bool,
}

pub trait TrainObserver<T> {
    fn on_step(&mut self, _info: &StepInfo<'_, T>, _params: &ModelParams<T>) -> Result<()> {
        Ok(())
    }
}

impl<T> TrainObserver<T> for () {}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    pub records: Vec<MetricsRecord<T>>,
    pub vocab: Vocabulary,
    pub curriculum: CurriculumState<T>,
    /// Steps that fell back to the easiest tie class.
    pub fallback_steps: usize,
    /// Steps skipped because the batch had nothing to score.
    pub skipped_steps: usize,
}

/// Scores the training corpus and builds its curriculum.
pub fn build_curriculum<T: Scalar>(
    corpus: &Corpus,
    annotations: Option<Annotations>,
    method: DifficultyMethod,
    lambda0: T,
    lambda_increment: T,
) -> Result<CurriculumState<T>> {
    let schedule = LinearSchedule::new(lambda0, lambda_increment)?;
    let resources = ScoringResources::for_method(method, corpus, annotations)?;
    let raw = score_corpus(corpus, method, &resources)?;
    CurriculumState::new(raw, schedule)
}

pub fn train<T: Scalar>(
    train_corpus: &Corpus,
    valid_corpus: &Corpus,
    annotations: Option<Annotations>,
    config: &TrainConfig<T>,
) -> Result<TrainOutcome<T>> {
    train_with_observer(train_corpus, valid_corpus, annotations, config, &mut ())
}

pub fn train_with_observer<T: Scalar>(
    train_corpus: &Corpus,
    valid_corpus: &Corpus,
    annotations: Option<Annotations>,
    config: &TrainConfig<T>,
    observer: &mut dyn TrainObserver<T>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train_corpus.is_empty() {
        return Err(Error::config("training corpus is empty"));
    }
    if valid_corpus.is_empty() {
        return Err(Error::config("validation corpus is empty"));
    }
    let vocab = build_vocabulary(train_corpus);
    let mut curriculum = build_curriculum(
        train_corpus,
        annotations,
        config.method,
        config.lambda0,
        config.lambda_increment,
    )?;
    let encoded = vocab.encode_corpus(train_corpus);
    let valid = vocab.encode_corpus(valid_corpus);

    let model_config = ModelConfig {
        vocab_size: vocab.size(),
        ..config.model
    };
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(1);
    let mut params = ModelParams::init(&model_config, &mut init_rng);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let total_steps = config.steps_for(train_corpus.len());
    let steps_per_pass = train_corpus.len().div_ceil(config.batch_size).max(1);
    let pad = padding_stats(train_corpus, config.window);
    let mut records = Vec::with_capacity(total_steps);
    let (mut fallback_steps, mut skipped_steps) = (0, 0);

    for step in 1..=total_steps {
        if (step - 1) % steps_per_pass == 0 && pad.truncated > 0 {
            let level = if step == 1 { log::Level::Info } else { log::Level::Debug };
            log::log!(
                level,
                "pass {}: {} of {} samples exceed window {} and are truncated",
                (step - 1) / steps_per_pass + 1,
                pad.truncated,
                train_corpus.len(),
                config.window
            );
        }
        let lambda = curriculum.current_competence();
        let batch = sample_batch(&curriculum, &encoded, config.batch_size, config.window, &mut rng)?;
        check_eligibility(&curriculum, &batch.sample_ids, lambda, batch.fallback, step)?;
        fallback_steps += usize::from(batch.fallback);

        let train_loss = match params.backward(&batch) {
            Ok((loss, grads)) => {
                params.sgd_step(&grads, model_config.learning_rate);
                loss
            }
            Err(Error::DegenerateBatch) => {
                log::warn!("step {step}: batch has no scoreable positions; no update");
                skipped_steps += 1;
                T::nan()
            }
            Err(e) => return Err(e),
        };
        curriculum.advance();

        let valid_ppl = if step % config.eval_every == 0 {
            Some(params.perplexity(&valid)?)
        } else {
            None
        };
        let record = MetricsRecord {
            step,
            lambda,
            eligible: batch.eligible,
            train_loss,
            valid_ppl,
        };
        observer.on_step(
            &StepInfo {
                record: &record,
                sample_ids: &batch.sample_ids,
                fallback: batch.fallback,
            },
            &params,
        )?;
        records.push(record);
    }

    Ok(TrainOutcome {
        params,
        records,
        vocab,
        curriculum,
        fallback_steps,
        skipped_steps,
    })
}

/// Every drawn sample must satisfy `eps <= lambda`, or sit in the easiest tie
/// class when the sampler fell back.
fn check_eligibility<T: Scalar>(
    curriculum: &CurriculumState<T>,
    ids: &[usize],
    lambda: T,
    fallback: bool,
    step: usize,
) -> Result<()> {
    let eps = curriculum.eps();
    let bound = if fallback {
        eps[curriculum.order()[0]]
    } else {
        lambda
    };
    match ids.iter().find(|&&id| eps[id] > bound) {
        Some(&id) => Err(Error::Eligibility {
            step,
            id,
            eps: eps[id].as_f64(),
            lambda: lambda.as_f64(),
        }),
        None => Ok(()),
    }
}

/// Held-out perplexity with no padding and no competence gating; unknown
/// tokens map to UNK.
pub fn evaluate<T: Scalar>(params: &ModelParams<T>, valid_corpus: &Corpus, vocab: &Vocabulary) -> Result<T> {
    if valid_corpus.is_empty() {
        return Err(Error::config("validation corpus is empty"));
    }
    params.perplexity(&vocab.encode_corpus(valid_corpus))
}

pub fn write_metrics<T: Scalar, W: Write>(records: &[MetricsRecord<T>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in records {
        write!(out, "{},{},{},{},", r.step, r.lambda, r.eligible, r.train_loss)?;
        if let Some(p) = r.valid_ppl {
            write!(out, "{p}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_metrics<T: Scalar, R: BufRead>(reader: R, origin: &Path) -> Result<Vec<MetricsRecord<T>>> {
    let schema = |line: usize, message: String| Error::Schema {
        file: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h == METRICS_HEADER => {}
        Some(Ok(h)) => return Err(schema(1, format!("expected header `{METRICS_HEADER}`, found `{h}`"))),
        Some(Err(e)) => return Err(Error::io(origin, e)),
        None => return Err(schema(1, "empty metrics file".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(schema(lineno, format!("expected 5 columns, got {}", cols.len())));
        }
        let bad = |what: &str, v: &str| schema(lineno, format!("bad {what} `{v}`"));
        out.push(MetricsRecord {
            step: cols[0].parse().map_err(|_| bad("step", cols[0]))?,
            lambda: cols[1].parse().map_err(|_| bad("lambda", cols[1]))?,
            eligible: cols[2].parse().map_err(|_| bad("eligible", cols[2]))?,
            train_loss: cols[3].parse().map_err(|_| bad("train_loss", cols[3]))?,
            valid_ppl: match cols[4] {
                "" => None,
                v => Some(v.parse().map_err(|_| bad("valid_ppl", v))?),
            },
        });
    }
    Ok(out)
}

pub fn load_metrics<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord<T>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_metrics(std::io::BufReader::new(file), path)
}
