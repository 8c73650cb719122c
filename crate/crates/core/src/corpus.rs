//! Loading whitespace-tokenized text into samples, vocabulary construction and
//! corpus statistics.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Tokens after which a sentence ends when splitting by sentence.
pub const SENTENCE_FINAL: [&str; 3] = [".", "!", "?"];

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const BOS_ID: u32 = 2;
pub const EOS_ID: u32 = 3;
pub const SPECIAL_TOKENS: [&str; 4] = ["<PAD>", "<UNK>", "<BOS>", "<EOS>"];

/// Splits on runs of whitespace.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SampleUnit {
    Line,
    #[default]
    Sentence,
}

impl FromStr for SampleUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(SampleUnit::Line),
            "sentence" => Ok(SampleUnit::Sentence),
            other => Err(Error::config(format!(
                "unknown sample unit `{other}` (expected `line` or `sentence`)"
            ))),
        }
    }
}

impl fmt::Display for SampleUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleUnit::Line => "line",
            SampleUnit::Sentence => "sentence",
        })
    }
}

/// One training unit. `id` is its position in the source order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub id: usize,
    pub tokens: Vec<String>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    samples: Vec<Sample>,
    unit: SampleUnit,
}

impl Corpus {
    /// Builds a corpus from already-tokenized samples, dropping empty ones and
    /// numbering the rest in order.
    pub fn from_token_lists<I>(lists: I, unit: SampleUnit) -> Self
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let samples = lists
            .into_iter()
            .filter(|t| !t.is_empty())
            .enumerate()
            .map(|(id, tokens)| Sample { id, tokens })
            .collect();
        Corpus { samples, unit }
    }

    /// Parses in-memory text with the same rules as [`load_corpus`].
    pub fn parse(text: &str, unit: SampleUnit) -> Self {
        let lines = text.lines().map(tokenize);
        match unit {
            SampleUnit::Line => Corpus::from_token_lists(lines, unit),
            SampleUnit::Sentence => Corpus::from_token_lists(lines.flat_map(split_sentences), unit),
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn unit(&self) -> SampleUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Sample> {
        self.samples.get(id)
    }
}

/// Splits a token list after every sentence-final token. Trailing tokens
/// without a terminator form a final sentence.
pub fn split_sentences(tokens: Vec<String>) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for tok in tokens {
        let is_final = SENTENCE_FINAL.contains(&tok.as_str());
        current.push(tok);
        if is_final {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

pub fn load_corpus(path: impl AsRef<Path>, unit: SampleUnit) -> Result<Corpus> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })?;
    Ok(Corpus::parse(&text, unit))
}

/// Token ↔ id mapping. Ids 0..4 are reserved for the special tokens and are
/// never assigned to corpus tokens, even ones spelled like a special.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    pub const NUM_SPECIALS: usize = SPECIAL_TOKENS.len();

    /// Builds a vocabulary whose non-special ids follow the given token order.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut token_to_id = HashMap::new();
        let mut id_to_token = Vec::new();
        for tok in tokens {
            let tok = tok.into();
            let id = (Self::NUM_SPECIALS + id_to_token.len()) as u32;
            if token_to_id.insert(tok.clone(), id).is_some() {
                return Err(Error::config(format!("duplicate vocabulary token `{tok}`")));
            }
            id_to_token.push(tok);
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
        })
    }

    /// Total number of ids, specials included.
    pub fn size(&self) -> usize {
        Self::NUM_SPECIALS + self.id_to_token.len()
    }

    /// Number of corpus tokens, specials excluded.
    pub fn num_tokens(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Maps a token to its id, falling back to UNK.
    pub fn encode_token(&self, token: &str) -> u32 {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.encode_token(t)).collect()
    }

    /// Encodes every sample of a corpus, indexed by sample id.
    pub fn encode_corpus(&self, corpus: &Corpus) -> Vec<Vec<u32>> {
        corpus.samples().iter().map(|s| self.encode(&s.tokens)).collect()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        let id = id as usize;
        if id < Self::NUM_SPECIALS {
            Some(SPECIAL_TOKENS[id])
        } else {
            self.id_to_token.get(id - Self::NUM_SPECIALS).map(String::as_str)
        }
    }

    /// Corpus tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }
}

/// Frequency-descending vocabulary; ties are broken lexicographically.
pub fn build_vocabulary(corpus: &Corpus) -> Vocabulary {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for s in corpus.samples() {
        for t in &s.tokens {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> = freq.into_iter().collect();
    entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_tokens(entries.into_iter().map(|(t, _)| t))
        .expect("distinct tokens from a frequency map")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusStats {
    pub vocab_size: usize,
    pub token_count: usize,
    pub sample_count: usize,
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vocab_size\t{}", self.vocab_size)?;
        writeln!(f, "tokens\t{}", self.token_count)?;
        writeln!(f, "samples\t{}", self.sample_count)
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut distinct = std::collections::HashSet::new();
    let mut token_count = 0;
    for s in corpus.samples() {
        token_count += s.len();
        distinct.extend(s.tokens.iter().map(String::as_str));
    }
    CorpusStats {
        vocab_size: distinct.len(),
        token_count,
        sample_count: corpus.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("a a b"), toks(&["a", "a", "b"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("  x\t y "), toks(&["x", "y"]));
    }

    #[test]
    fn line_unit_drops_empty_lines() {
        let c = Corpus::parse("a a b\n\na b\n", SampleUnit::Line);
        assert_eq!(c.len(), 2);
        assert_eq!(c.samples()[0].id, 0);
        assert_eq!(c.samples()[1].id, 1);
        assert_eq!(c.samples()[1].tokens, toks(&["a", "b"]));
    }

    #[test]
    fn sentence_unit_splits_after_terminators() {
        let c = Corpus::parse("a . b .", SampleUnit::Sentence);
        assert_eq!(c.len(), 2);
        assert_eq!(c.samples()[0].tokens, toks(&["a", "."]));
        assert_eq!(c.samples()[1].tokens, toks(&["b", "."]));

        let c = Corpus::parse("a . b .", SampleUnit::Line);
        assert_eq!(c.len(), 1);
        assert_eq!(c.samples()[0].len(), 4);
    }

    #[test]
    fn sentence_split_keeps_unterminated_tail_and_punctuation_only() {
        let c = Corpus::parse("x ! ? y z", SampleUnit::Sentence);
        let got: Vec<_> = c.samples().iter().map(|s| s.tokens.join(" ")).collect();
        assert_eq!(got, vec!["x !", "?", "y z"]);
    }

    #[test]
    fn load_reports_missing_path() {
        let err = load_corpus("/nonexistent/corpus.txt", SampleUnit::Line).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/corpus.txt"));
    }

    #[test]
    fn load_reports_utf8_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, b"ab c\n\xffd").unwrap();
        match load_corpus(&path, SampleUnit::Line) {
            Err(Error::Decode { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn vocabulary_frequency_then_lexicographic() {
        let v = build_vocabulary(&Corpus::parse("a a b", SampleUnit::Line));
        assert_eq!(v.size(), 6);
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), Some(5));

        let v = build_vocabulary(&Corpus::parse("b a", SampleUnit::Line));
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), Some(5));
    }

    #[test]
    fn vocabulary_specials_and_unknowns() {
        let v = build_vocabulary(&Corpus::parse("<PAD> x", SampleUnit::Line));
        assert_eq!(v.token(PAD_ID), Some("<PAD>"));
        assert_eq!(v.token(EOS_ID), Some("<EOS>"));
        // A corpus token spelled like a special still gets its own id.
        assert!(v.id("<PAD>").unwrap() >= 4);
        assert_eq!(v.encode_token("never-seen"), UNK_ID);
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.id(t), Some((i + 4) as u32));
            assert_eq!(v.token((i + 4) as u32), Some(t.as_str()));
        }
    }

    #[test]
    fn stats_hand_count() {
        let c = Corpus::parse("a a b\na b", SampleUnit::Line);
        let s = corpus_stats(&c);
        assert_eq!(
            s,
            CorpusStats {
                vocab_size: 2,
                token_count: 5,
                sample_count: 2
            }
        );
    }

    proptest! {
        #[test]
        fn line_round_trip_modulo_whitespace(lines in prop::collection::vec("[ a-c\t]{0,12}", 0..12)) {
            let text = lines.join("\n");
            let corpus = Corpus::parse(&text, SampleUnit::Line);
            let rebuilt: Vec<String> = corpus.samples().iter().map(|s| s.tokens.join(" ")).collect();
            let expected: Vec<String> = lines
                .iter()
                .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
                .filter(|l| !l.is_empty())
                .collect();
            prop_assert_eq!(rebuilt, expected);
            let stats = corpus_stats(&corpus);
            prop_assert_eq!(stats.token_count, corpus.samples().iter().map(Sample::len).sum::<usize>());
            prop_assert_eq!(build_vocabulary(&corpus), build_vocabulary(&Corpus::parse(&text, SampleUnit::Line)));
        }
    }
}
