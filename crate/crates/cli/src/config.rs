//! Flat `key = value` run configuration for `train` and `grid`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use curlm_core::{Config, DifficultyMethod, ModelConfig, SampleUnit};

use crate::CliError;

const KEYS: &[&str] = &[
    "train",
    "valid",
    "annotations",
    "output_dir",
    "method",
    "seed",
    "unit",
    "lambda0",
    "lambda_increment",
    "batch_size",
    "window",
    "total_steps",
    "eval_every",
    "context_size",
    "embed_dim",
    "hidden_dim",
    "learning_rate",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub annotations: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub unit: SampleUnit,
    pub train_config: Config,
}

impl RunConfig {
    /// Parses and validates a config file. Relative paths resolve against the
    /// file's directory. `out` and `seed` override the file's values.
    pub fn load(path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, out, seed).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(text: &str, base: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<Self, CliError> {
        let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(CliError::config(format!("line {}: unknown key `{k}`", i + 1)));
            }
            if kv.insert(k, v).is_some() {
                return Err(CliError::config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }

        let required = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| CliError::config(format!("missing required key `{k}`")))
        };
        fn num<V: std::str::FromStr>(kv: &BTreeMap<&str, &str>, k: &str, default: V) -> Result<V, CliError> {
            match kv.get(k) {
                Some(v) => v
                    .parse()
                    .map_err(|_| CliError::config(format!("invalid value `{v}` for `{k}`"))),
                None => Ok(default),
            }
        }
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };

        let train = resolve(required("train")?);
        let valid = resolve(required("valid")?);
        let annotations = kv.get("annotations").map(|p| resolve(p));
        for p in std::iter::once(&train).chain([&valid]).chain(annotations.as_ref()) {
            if !p.is_file() {
                return Err(CliError::config(format!("no such file: {}", p.display())));
            }
        }
        let output_dir = match out {
            Some(o) => o.to_path_buf(),
            None => resolve(required("output_dir")?),
        };

        let seed = match seed {
            Some(s) => s,
            None => num(&kv, "seed", 0u64)?,
        };
        let method = DifficultyMethod::parse(required("method")?, seed)?;
        if method.needs_annotations() && annotations.is_none() {
            return Err(CliError::config(format!(
                "method `{method}` needs an `annotations` file"
            )));
        }
        let unit = num(&kv, "unit", SampleUnit::default())?;
        let defaults = Config::new(method, 0.1, 1e-5);
        let desk = ModelConfig::<f64>::desk(0);
        let train_config = Config {
            method,
            lambda0: num(&kv, "lambda0", defaults.lambda0)?,
            lambda_increment: num(&kv, "lambda_increment", defaults.lambda_increment)?,
            batch_size: num(&kv, "batch_size", defaults.batch_size)?,
            window: num(&kv, "window", defaults.window)?,
            total_steps: match kv.get("total_steps") {
                Some(_) => Some(num(&kv, "total_steps", 0usize)?),
                None => None,
            },
            eval_every: num(&kv, "eval_every", defaults.eval_every)?,
            seed,
            model: ModelConfig {
                context_size: num(&kv, "context_size", desk.context_size)?,
                embed_dim: num(&kv, "embed_dim", desk.embed_dim)?,
                hidden_dim: num(&kv, "hidden_dim", desk.hidden_dim)?,
                vocab_size: 0,
                learning_rate: num(&kv, "learning_rate", desk.learning_rate)?,
            },
        };
        train_config.validate()?;
        Ok(RunConfig {
            train,
            valid,
            annotations,
            output_dir,
            unit,
            train_config,
        })
    }
}
