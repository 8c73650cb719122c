//! Sidecar POS tags and dependency heads, one JSON object per line:
//!
//! ```text
//! {"id":0,"pos":["DT","NN","VB"],"heads":[1,2,-1]}
//! ```
//!
//! `heads[i]` is the index of token `i`'s governor, `-1` for the root.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleAnnotation {
    pub id: usize,
    pub pos: Vec<String>,
    pub heads: Vec<i64>,
}

pub type Annotations = BTreeMap<usize, SampleAnnotation>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    Empty,
    RootCount(usize),
    HeadOutOfRange { token: usize, head: i64 },
    Cycle { token: usize },
}

impl std::fmt::Display for TreeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TreeError::Empty => write!(f, "empty head list"),
            TreeError::RootCount(n) => write!(f, "expected exactly one root, found {n}"),
            TreeError::HeadOutOfRange { token, head } => {
                write!(f, "token {token} has out-of-range head {head}")
            }
            TreeError::Cycle { token } => write!(f, "head links from token {token} form a cycle"),
        }
    }
}

/// Checks that `heads` encodes a single-rooted tree and returns each token's
/// depth (root = 1).
fn node_depths(heads: &[i64]) -> std::result::Result<Vec<usize>, TreeError> {
    let n = heads.len();
    if n == 0 {
        return Err(TreeError::Empty);
    }
    let roots = heads.iter().filter(|&&h| h == -1).count();
    if roots != 1 {
        return Err(TreeError::RootCount(roots));
    }
    for (token, &head) in heads.iter().enumerate() {
        if head != -1 && !(0..n as i64).contains(&head) {
            return Err(TreeError::HeadOutOfRange { token, head });
        }
    }
    // 0 = unknown; filled iteratively along each head chain.
    let mut depth = vec![0usize; n];
    let mut chain = Vec::new();
    for start in 0..n {
        let mut cur = start;
        chain.clear();
        while depth[cur] == 0 {
            if chain.len() > n {
                return Err(TreeError::Cycle { token: start });
            }
            chain.push(cur);
            match heads[cur] {
                -1 => break,
                h => cur = h as usize,
            }
        }
        let mut d = if depth[cur] == 0 { 0 } else { depth[cur] };
        for &node in chain.iter().rev() {
            d += 1;
            depth[node] = d;
        }
    }
    Ok(depth)
}

/// Number of nodes on the longest root-to-leaf path; a lone root has depth 1.
pub fn tree_depth(heads: &[i64]) -> std::result::Result<usize, TreeError> {
    Ok(node_depths(heads)?.into_iter().max().unwrap_or(0))
}

/// Number of distinct tags; `None` for an empty tag list.
pub fn pos_diversity(pos: &[String]) -> Option<usize> {
    if pos.is_empty() {
        None
    } else {
        Some(pos.iter().collect::<HashSet<_>>().len())
    }
}

impl SampleAnnotation {
    pub fn validate(&self, token_count: usize) -> Result<()> {
        let invalid = |reason: String| Error::Validation { id: self.id, reason };
        if self.pos.len() != token_count || self.heads.len() != token_count {
            return Err(invalid(format!(
                "annotation length mismatch: {} tokens, {} tags, {} heads",
                token_count,
                self.pos.len(),
                self.heads.len()
            )));
        }
        node_depths(&self.heads).map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    pub fn depth(&self) -> usize {
        tree_depth(&self.heads).expect("validated on load")
    }

    pub fn diversity(&self) -> usize {
        pos_diversity(&self.pos).expect("validated on load")
    }
}

/// Parses line-delimited annotation records and validates each against `corpus`.
pub fn parse_annotations<R: BufRead>(reader: R, corpus: &Corpus, origin: &Path) -> Result<Annotations> {
    let mut out = Annotations::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleAnnotation = serde_json::from_str(&line).map_err(|e| Error::Schema {
            file: origin.to_path_buf(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let sample = corpus.get(rec.id).ok_or_else(|| Error::Validation {
            id: rec.id,
            reason: format!("no such sample (corpus has {})", corpus.len()),
        })?;
        rec.validate(sample.len())?;
        let id = rec.id;
        if out.insert(id, rec).is_some() {
            return Err(Error::Validation {
                id,
                reason: "duplicate annotation record".into(),
            });
        }
    }
    Ok(out)
}

pub fn load_annotations(path: impl AsRef<Path>, corpus: &Corpus) -> Result<Annotations> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(BufReader::new(file), corpus, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SampleUnit;
    use proptest::prelude::*;

    fn tags(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    /// Depth by explicit enumeration of every root-to-node path.
    fn depth_oracle(heads: &[i64]) -> usize {
        fn below(heads: &[i64], node: usize) -> usize {
            1 + (0..heads.len())
                .filter(|&c| heads[c] == node as i64)
                .map(|c| below(heads, c))
                .max()
                .unwrap_or(0)
        }
        let root = heads.iter().position(|&h| h == -1).unwrap();
        below(heads, root)
    }

    #[test]
    fn depth_examples() {
        assert_eq!(tree_depth(&[-1]), Ok(1));
        assert_eq!(tree_depth(&[1, -1, 1]), Ok(2));
        assert_eq!(tree_depth(&[-1, 0, 1]), Ok(3));
        assert_eq!(depth_oracle(&[1, -1, 1]), 2);
        assert_eq!(depth_oracle(&[-1, 0, 1]), 3);
    }

    #[test]
    fn malformed_trees() {
        assert_eq!(tree_depth(&[0, -1]), Err(TreeError::Cycle { token: 0 }));
        assert_eq!(tree_depth(&[1, 2, 0, -1]), Err(TreeError::Cycle { token: 0 }));
        assert_eq!(tree_depth(&[-1, -1]), Err(TreeError::RootCount(2)));
        assert_eq!(tree_depth(&[1, 0]), Err(TreeError::RootCount(0)));
        assert_eq!(tree_depth(&[5, -1]), Err(TreeError::HeadOutOfRange { token: 0, head: 5 }));
        assert_eq!(tree_depth(&[]), Err(TreeError::Empty));
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(pos_diversity(&tags(&["DT", "NN", "VB", "DT"])), Some(3));
        assert_eq!(pos_diversity(&tags(&["NN"])), Some(1));
        assert_eq!(pos_diversity(&tags(&["A", "B", "C"])), Some(3));
        assert_eq!(pos_diversity(&[]), None);
    }

    fn two_token_corpus() -> Corpus {
        Corpus::parse("the dog", SampleUnit::Line)
    }

    fn parse(text: &str) -> Result<Annotations> {
        parse_annotations(text.as_bytes(), &two_token_corpus(), Path::new("ann.jsonl"))
    }

    #[test]
    fn load_accepts_valid_record() {
        let ann = parse(r#"{"id":0,"pos":["DT","NN"],"heads":[1,-1]}"#).unwrap();
        assert_eq!(ann[&0].depth(), 2);
        assert_eq!(ann[&0].diversity(), 2);
    }

    #[test]
    fn load_rejects_self_loop() {
        let err = parse(r#"{"id":0,"pos":["DT","NN"],"heads":[0,-1]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation { id: 0, .. }), "{err}");
        assert!(err.to_string().contains("cycle"));
    }

    #[test]
    fn load_rejects_length_mismatch() {
        let err = parse(r#"{"id":0,"pos":["DT","NN","VB"],"heads":[1,-1]}"#).unwrap_err();
        assert!(err.to_string().contains("mismatch"), "{err}");
    }

    #[test]
    fn load_rejects_unknown_sample_and_bad_json() {
        assert!(matches!(
            parse(r#"{"id":7,"pos":["DT","NN"],"heads":[1,-1]}"#),
            Err(Error::Validation { id: 7, .. })
        ));
        assert!(matches!(parse("{not json"), Err(Error::Schema { line: 1, .. })));
    }

    /// Random tree: each node i > 0 hangs off some earlier node.
    fn tree_strategy() -> impl Strategy<Value = Vec<i64>> {
        (1usize..25).prop_flat_map(|n| {
            prop::collection::vec(any::<prop::sample::Index>(), n).prop_map(move |picks| {
                (0..n)
                    .map(|i| if i == 0 { -1 } else { picks[i].index(i) as i64 })
                    .collect()
            })
        })
    }

    proptest! {
        #[test]
        fn depth_matches_oracle_and_is_relabeling_invariant(
            heads in tree_strategy(),
            perm_seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let d = tree_depth(&heads).unwrap();
            prop_assert_eq!(d, depth_oracle(&heads));
            prop_assert!(d >= 1 && d <= heads.len());

            // Relabel tokens by a permutation, keeping the head relation.
            let n = heads.len();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
            let mut relabeled = vec![0i64; n];
            for (old, &h) in heads.iter().enumerate() {
                relabeled[perm[old]] = if h == -1 { -1 } else { perm[h as usize] as i64 };
            }
            prop_assert_eq!(tree_depth(&relabeled).unwrap(), d);
        }
    }
}
