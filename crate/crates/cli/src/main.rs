mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use curlm_core::report::{format_summary_table, write_report, RunInput};
use curlm_core::trainer::{write_metrics, StepInfo, TrainObserver};
use curlm_core::{
    build_vocabulary, corpus_stats, count_ngrams, load_annotations, load_corpus, padding_stats,
    train_with_observer, Checkpoint, DifficultyMethod, Error, ModelParams, SampleUnit, Vocabulary,
};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "curlm", version, about = "Curriculum training for a small neural language model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print sample, token and vocabulary counts for a corpus.
    Stats {
        corpus: PathBuf,
        #[arg(long, default_value_t = SampleUnit::Sentence)]
        unit: SampleUnit,
        /// Also report padding and truncation for this window length.
        #[arg(long)]
        window: Option<usize>,
        /// Write unigram, bigram and trigram counts as TSV files here.
        #[arg(long)]
        dump_ngrams: Option<PathBuf>,
    },
    /// Score a corpus and write `<out>/curriculum.tsv`.
    #[command(visible_alias = "curriculum")]
    Score {
        corpus: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long, default_value_t = SampleUnit::Sentence)]
        unit: SampleUnit,
        #[arg(long, default_value_t = 0.1)]
        lambda0: f64,
        #[arg(long, default_value_t = 1e-5)]
        increment: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one run from a config file.
    Train {
        config: PathBuf,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Perplexity of a checkpoint on a corpus.
    Eval {
        checkpoint: PathBuf,
        corpus: PathBuf,
        #[arg(long, default_value_t = SampleUnit::Sentence)]
        unit: SampleUnit,
    },
    /// Train every config into `<out>/<config stem>/` and write a summary.
    Grid {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize existing metrics files into `<out>`.
    Summarize {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit codes: 1 usage or configuration, 2 invalid data, 3 runtime failure.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::MissingResource { .. } => 1,
            Error::DegenerateBatch | Error::Eligibility { .. } => 3,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Stats {
            corpus,
            unit,
            window,
            dump_ngrams,
        } => stats(&corpus, unit, window, dump_ngrams.as_deref()),
        Command::Score {
            corpus,
            method,
            seed,
            annotations,
            unit,
            lambda0,
            increment,
            out,
        } => {
            let method = DifficultyMethod::parse(&method, seed)?;
            score(&corpus, method, annotations.as_deref(), unit, lambda0, increment, &out)
        }
        Command::Train { config, out, seed } => {
            let rc = RunConfig::load(&config, out.as_deref(), seed)?;
            run_training(&rc)
        }
        Command::Eval {
            checkpoint,
            corpus,
            unit,
        } => {
            let ck = Checkpoint::<f64>::load(&checkpoint)?;
            let corpus = load_corpus(&corpus, unit)?;
            let ppl = curlm_core::evaluate(&ck.params, &corpus, &ck.vocab)?;
            println!("{ppl:.4}");
            Ok(())
        }
        Command::Grid { configs, out } => grid(&configs, &out),
        Command::Summarize { metrics, out } => {
            let inputs = metrics
                .iter()
                .map(|p| RunInput::load(p))
                .collect::<Result<Vec<_>, _>>()?;
            let rows = write_report(&inputs, &out)?;
            print!("{}", format_summary_table(&rows));
            Ok(())
        }
    }
}

fn stats(path: &Path, unit: SampleUnit, window: Option<usize>, dump: Option<&Path>) -> CliResult {
    let corpus = load_corpus(path, unit)?;
    print!("{}", corpus_stats(&corpus));
    if let Some(w) = window {
        if w == 0 {
            return Err(CliError::config("window must be at least 1"));
        }
        let p = padding_stats(&corpus, w);
        println!("pad_tokens\t{}", p.pad_tokens);
        println!("pad_fraction\t{}", p.pad_fraction);
        println!("truncated\t{}", p.truncated);
    }
    if let Some(dir) = dump {
        create_dir(dir)?;
        for (order, name) in [(1, "unigram"), (2, "bigram"), (3, "trigram")] {
            let table = count_ngrams(&corpus, order)?;
            let mut buf = Vec::new();
            table.dump(&mut buf).expect("in-memory write");
            write_file(&dir.join(format!("{name}.tsv")), &buf)?;
        }
    }
    Ok(())
}

fn score(
    path: &Path,
    method: DifficultyMethod,
    annotations: Option<&Path>,
    unit: SampleUnit,
    lambda0: f64,
    increment: f64,
    out: &Path,
) -> CliResult {
    curlm_core::LinearSchedule::new(lambda0, increment)?;
    if method.needs_annotations() && annotations.is_none() {
        return Err(CliError::config(format!("method `{method}` needs --annotations")));
    }
    let corpus = load_corpus(path, unit)?;
    let ann = annotations.map(|a| load_annotations(a, &corpus)).transpose()?;
    let curriculum = curlm_core::trainer::build_curriculum(&corpus, ann, method, lambda0, increment)?;
    let mut buf = Vec::new();
    curriculum.write_tsv(&mut buf).expect("in-memory write");
    create_dir(out)?;
    write_file(&out.join(curlm_core::report::CURRICULUM_FILE), &buf)
}

/// Writes `checkpoint-<step>.txt` every `every` steps.
struct Snapshots<'a> {
    dir: &'a Path,
    vocab: &'a Vocabulary,
    every: usize,
}

impl TrainObserver<f64> for Snapshots<'_> {
    fn on_step(&mut self, info: &StepInfo<'_, f64>, params: &ModelParams<f64>) -> curlm_core::Result<()> {
        if info.record.step.is_multiple_of(self.every) {
            Checkpoint::new(params.clone(), self.vocab.clone())?
                .save(self.dir.join(format!("checkpoint-{}.txt", info.record.step)))?;
        }
        Ok(())
    }
}

fn run_training(rc: &RunConfig) -> CliResult {
    let train = load_corpus(&rc.train, rc.unit)?;
    let valid = load_corpus(&rc.valid, rc.unit)?;
    let ann = rc
        .annotations
        .as_ref()
        .map(|a| load_annotations(a, &train))
        .transpose()?;
    let dir = &rc.output_dir;
    create_dir(dir)?;
    let vocab = build_vocabulary(&train);
    let cfg = &rc.train_config;
    let mut snapshots = Snapshots {
        dir,
        vocab: &vocab,
        every: cfg.eval_every.saturating_mul(10),
    };
    log::info!(
        "training {} on {} samples ({} steps)",
        cfg.method,
        train.len(),
        cfg.steps_for(train.len())
    );
    let outcome = train_with_observer(&train, &valid, ann, cfg, &mut snapshots)?;

    let mut buf = Vec::new();
    write_metrics(&outcome.records, &mut buf).expect("in-memory write");
    write_file(&dir.join("metrics.csv"), &buf)?;
    buf.clear();
    outcome.curriculum.write_tsv(&mut buf).expect("in-memory write");
    write_file(&dir.join(curlm_core::report::CURRICULUM_FILE), &buf)?;
    Checkpoint::new(outcome.params, outcome.vocab)?
        .save(dir.join("checkpoint.txt"))
        .map_err(|e| CliError::runtime(e.to_string()))?;

    if outcome.fallback_steps > 0 {
        log::warn!("{} steps drew from the easiest tie class only", outcome.fallback_steps);
    }
    match outcome.records.iter().rev().find_map(|r| r.valid_ppl) {
        Some(p) => println!("{}: {} steps, valid ppl {p:.4}", dir.display(), outcome.records.len()),
        None => println!("{}: {} steps", dir.display(), outcome.records.len()),
    }
    Ok(())
}

fn grid(configs: &[PathBuf], out: &Path) -> CliResult {
    let mut runs = Vec::with_capacity(configs.len());
    for path in configs {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::config(format!("bad config path {}", path.display())))?;
        if runs.iter().any(|(s, _): &(String, RunConfig)| *s == stem) {
            return Err(CliError::config(format!("two configs share the name `{stem}`")));
        }
        let rc = RunConfig::load(path, Some(&out.join(&stem)), None)?;
        runs.push((stem, rc));
    }
    let mut inputs = Vec::with_capacity(runs.len());
    for (_, rc) in &runs {
        run_training(rc)?;
        inputs.push(RunInput::load(&rc.output_dir.join("metrics.csv"))?);
    }
    let rows = write_report(&inputs, out)?;
    print!("{}", format_summary_table(&rows));
    Ok(())
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}
