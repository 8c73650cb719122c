//! Plain-text checkpoint: model config, vocabulary and every weight.
//!
//! Values are written with the shortest representation that parses back to
//! the same bits, so a save/load cycle is exact.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, TENSOR_NAMES};
use crate::scalar::Scalar;

const MAGIC: &str = "curlm-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub params: ModelParams<T>,
    pub vocab: Vocabulary,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(params: ModelParams<T>, vocab: Vocabulary) -> Result<Self> {
        if params.config().vocab_size != vocab.size() {
            return Err(Error::Checkpoint(format!(
                "model vocab_size {} does not match vocabulary size {}",
                params.config().vocab_size,
                vocab.size()
            )));
        }
        Ok(Checkpoint { params, vocab })
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let c = self.params.config();
        writeln!(out, "{MAGIC} {VERSION}")?;
        writeln!(out, "scalar {}", T::NAME)?;
        writeln!(out, "context_size {}", c.context_size)?;
        writeln!(out, "embed_dim {}", c.embed_dim)?;
        writeln!(out, "hidden_dim {}", c.hidden_dim)?;
        writeln!(out, "vocab_size {}", c.vocab_size)?;
        writeln!(out, "learning_rate {}", c.learning_rate)?;
        writeln!(out, "tokens {}", self.vocab.num_tokens())?;
        for t in self.vocab.tokens() {
            writeln!(out, "{t}")?;
        }
        for ((name, (rows, cols)), data) in TENSOR_NAMES
            .iter()
            .zip(self.params.shapes())
            .zip(self.params.tensors())
        {
            writeln!(out, "tensor {name} {rows} {cols}")?;
            for row in data.chunks(cols) {
                let mut first = true;
                for v in row {
                    if !first {
                        out.write_all(b" ")?;
                    }
                    write!(out, "{v}")?;
                    first = false;
                }
                out.write_all(b"\n")?;
            }
        }
        writeln!(out, "end")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = Lines {
            inner: reader.lines(),
            lineno: 0,
        };
        let header = lines.next()?;
        if header != format!("{MAGIC} {VERSION}") {
            return Err(lines.err(format!("unrecognized header `{header}`")));
        }
        let scalar = lines.field("scalar")?;
        if scalar != T::NAME {
            return Err(lines.err(format!("checkpoint stores {scalar}, expected {}", T::NAME)));
        }
        let config = ModelConfig {
            context_size: lines.parsed("context_size")?,
            embed_dim: lines.parsed("embed_dim")?,
            hidden_dim: lines.parsed("hidden_dim")?,
            vocab_size: lines.parsed("vocab_size")?,
            learning_rate: lines.parsed("learning_rate")?,
        };
        config
            .validate()
            .map_err(|e| lines.err(e.to_string()))?;
        let n_tokens: usize = lines.parsed("tokens")?;
        let mut tokens = Vec::with_capacity(n_tokens);
        for _ in 0..n_tokens {
            tokens.push(lines.next()?);
        }
        let vocab = Vocabulary::from_tokens(tokens).map_err(|e| lines.err(e.to_string()))?;
        if vocab.size() != config.vocab_size {
            return Err(lines.err(format!(
                "vocab_size {} does not match {} tokens plus specials",
                config.vocab_size, n_tokens
            )));
        }
        let mut params = ModelParams::zeros(&config);
        let shapes = params.shapes();
        for ((name, (rows, cols)), data) in TENSOR_NAMES.iter().zip(shapes).zip(params.tensors_mut()) {
            let head = lines.next()?;
            if head != format!("tensor {name} {rows} {cols}") {
                return Err(lines.err(format!(
                    "expected `tensor {name} {rows} {cols}`, found `{head}`"
                )));
            }
            data.clear();
            for _ in 0..rows {
                let line = lines.next()?;
                let before = data.len();
                for v in line.split(' ') {
                    data.push(v.parse::<T>().map_err(|_| lines.err(format!("bad value `{v}`")))?);
                }
                if data.len() - before != cols {
                    return Err(lines.err(format!("expected {cols} values in {name} row")));
                }
            }
        }
        if lines.next()? != "end" {
            return Err(lines.err("missing `end` marker".into()));
        }
        if !params.is_finite() {
            return Err(Error::Checkpoint("non-finite weight".into()));
        }
        Ok(Checkpoint { params, vocab })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file))
    }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    lineno: usize,
}

impl<R: BufRead> Lines<R> {
    fn err(&self, msg: String) -> Error {
        Error::Checkpoint(format!("line {}: {msg}", self.lineno))
    }

    fn next(&mut self) -> Result<String> {
        self.lineno += 1;
        match self.inner.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(self.err(e.to_string())),
            None => Err(self.err("unexpected end of file".into())),
        }
    }

    fn field(&mut self, key: &str) -> Result<String> {
        let line = self.next()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(self.err(format!("expected `{key} <value>`, found `{line}`"))),
        }
    }

    fn parsed<V: std::str::FromStr>(&mut self, key: &str) -> Result<V> {
        let raw = self.field(key)?;
        raw.parse().map_err(|_| self.err(format!("bad value `{raw}` for {key}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint<f64> {
        let vocab = Vocabulary::from_tokens(["the", "river", "."]).unwrap();
        let config = ModelConfig::<f64>::desk(vocab.size());
        let params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(7));
        Checkpoint::new(params, vocab).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        let back = Checkpoint::<f64>::read(buf.as_slice()).unwrap();
        assert_eq!(back, ck);
        for (a, b) in ck.params.tensors().iter().zip(back.params.tensors()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn f32_round_trip() {
        let vocab = Vocabulary::from_tokens(["x"]).unwrap();
        let params = ModelParams::init(&ModelConfig::<f32>::desk(5), &mut ChaCha8Rng::seed_from_u64(1));
        let ck = Checkpoint::new(params, vocab).unwrap();
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        assert_eq!(Checkpoint::<f32>::read(buf.as_slice()).unwrap(), ck);
        assert!(Checkpoint::<f64>::read(buf.as_slice()).is_err());
    }

    #[test]
    fn rejects_corruption() {
        let mut buf = Vec::new();
        sample().write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let truncated = &text[..text.len() / 2];
        assert!(Checkpoint::<f64>::read(truncated.as_bytes()).is_err());

        let bad_size = text.replace("vocab_size 7", "vocab_size 8");
        assert!(Checkpoint::<f64>::read(bad_size.as_bytes()).is_err());

        let bad_magic = text.replacen("curlm-checkpoint 1", "something else", 1);
        assert!(Checkpoint::<f64>::read(bad_magic.as_bytes()).is_err());

        assert!(Checkpoint::<f64>::read(&b""[..]).is_err());
    }

    #[test]
    fn new_checks_vocab_size() {
        let vocab = Vocabulary::from_tokens(["a"]).unwrap();
        let params = ModelParams::zeros(&ModelConfig::<f64>::desk(9));
        assert!(Checkpoint::new(params, vocab).is_err());
    }
}
