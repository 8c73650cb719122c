//! Competence-based curriculum training for a small neural language model.
//!
//! The pipeline scores every sample of a corpus with a difficulty heuristic
//! (length, n-gram rarity, POS diversity, parse depth, random, or none), turns
//! the scores into an empirical CDF, and trains a fixed-context feedforward LM
//! while only sampling batches from samples whose difficulty is within the
//! model's current competence. Competence grows linearly each step.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod annotations;
pub mod checkpoint;
pub mod corpus;
pub mod curriculum;
pub mod difficulty;
pub mod error;
pub mod model;
pub mod ngram;
pub mod report;
pub mod sampler;
pub mod scalar;
pub mod trainer;

pub use annotations::{load_annotations, pos_diversity, tree_depth, Annotations, SampleAnnotation};
pub use checkpoint::Checkpoint;
pub use corpus::{
    build_vocabulary, corpus_stats, load_corpus, tokenize, Corpus, CorpusStats, Sample, SampleUnit,
    Vocabulary, PAD_ID, UNK_ID,
};
pub use curriculum::{cdf_normalize, CompetenceSchedule, CurriculumFile, CurriculumState, LinearSchedule};
pub use difficulty::{score_corpus, DifficultyMethod, NgramScorer, RawScores, ScoringResources};
pub use error::{Error, Result};
pub use model::{Gradients, ModelConfig, ModelParams};
pub use ngram::{count_ngrams, count_ngrams_sharded, NGramTable};
pub use report::{RunInput, RunSummary};
pub use sampler::{pad_and_mask, padding_stats, sample_batch, Batch, PaddingStats};
pub use scalar::Scalar;
pub use trainer::{evaluate, train, train_with_observer, MetricsRecord, TrainConfig, TrainOutcome};

pub type Params = ModelParams<f64>;
pub type ParamsF32 = ModelParams<f32>;
pub type Config = TrainConfig<f64>;
pub type Curriculum = CurriculumState<f64>;
pub type Scores = RawScores<f64>;
pub type Metrics = MetricsRecord<f64>;
pub type Outcome = TrainOutcome<f64>;
