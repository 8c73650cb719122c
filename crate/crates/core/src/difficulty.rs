//! Raw per-sample difficulty for each curriculum heuristic.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::annotations::Annotations;
use crate::corpus::{Corpus, Sample};
use crate::error::{Error, Result};
use crate::ngram::{count_ngrams_sharded, NGramTable};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DifficultyMethod {
    /// Constant difficulty; paired with `lambda0 = 1` this is the stochastic baseline.
    NoCurriculum,
    Random { seed: u64 },
    Length,
    Unigram,
    Bigram,
    Trigram,
    Pos,
    Dep,
}

impl DifficultyMethod {
    pub const NAMES: [&'static str; 8] = [
        "none", "random", "length", "unigram", "bigram", "trigram", "pos", "dep",
    ];

    /// All eight methods; `random` uses `seed`.
    pub fn all(seed: u64) -> [DifficultyMethod; 8] {
        use DifficultyMethod::*;
        [NoCurriculum, Random { seed }, Length, Unigram, Bigram, Trigram, Pos, Dep]
    }

    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        use DifficultyMethod::*;
        Ok(match name {
            "none" => NoCurriculum,
            "random" => Random { seed },
            "length" => Length,
            "unigram" => Unigram,
            "bigram" => Bigram,
            "trigram" => Trigram,
            "pos" => Pos,
            "dep" => Dep,
            other => {
                return Err(Error::config(format!(
                    "unknown difficulty method `{other}` (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        use DifficultyMethod::*;
        match self {
            NoCurriculum => "none",
            Random { .. } => "random",
            Length => "length",
            Unigram => "unigram",
            Bigram => "bigram",
            Trigram => "trigram",
            Pos => "pos",
            Dep => "dep",
        }
    }

    pub fn ngram_order(&self) -> Option<usize> {
        match self {
            DifficultyMethod::Unigram => Some(1),
            DifficultyMethod::Bigram => Some(2),
            DifficultyMethod::Trigram => Some(3),
            _ => None,
        }
    }

    pub fn needs_annotations(&self) -> bool {
        matches!(self, DifficultyMethod::Pos | DifficultyMethod::Dep)
    }
}

impl fmt::Display for DifficultyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pre-normalization difficulty, indexed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScores<T> {
    pub method: DifficultyMethod,
    pub values: Vec<T>,
}

/// N-gram tables and annotations some methods depend on.
#[derive(Debug, Clone, Default)]
pub struct ScoringResources {
    tables: [Option<NGramTable>; 3],
    annotations: Option<Annotations>,
}

impl ScoringResources {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_table(mut self, table: NGramTable) -> Self {
        let slot = table.order() - 1;
        self.tables[slot] = Some(table);
        self
    }

    pub fn with_annotations(mut self, annotations: Annotations) -> Self {
        self.annotations = Some(annotations);
        self
    }

    /// Counts whatever n-gram table `method` needs over `corpus`.
    pub fn for_method(
        method: DifficultyMethod,
        corpus: &Corpus,
        annotations: Option<Annotations>,
    ) -> Result<Self> {
        let mut res = ScoringResources::new();
        if let Some(order) = method.ngram_order() {
            let shards = rayon::current_num_threads();
            res = res.with_table(count_ngrams_sharded(corpus, order, shards)?);
        }
        res.annotations = annotations;
        Ok(res)
    }

    pub fn table(&self, order: usize) -> Option<&NGramTable> {
        self.tables.get(order.wrapping_sub(1)).and_then(Option::as_ref)
    }

    pub fn annotations(&self) -> Option<&Annotations> {
        self.annotations.as_ref()
    }
}

/// Negative log-likelihood of a sample's n-grams under the corpus relative
/// frequencies. Unseen grams get the table's floor probability.
///
/// Factorizes counts on the fly; [`NgramScorer`] caches them for whole corpora.
pub fn ngram_nll<T: Scalar>(table: &NGramTable, tokens: &[String]) -> T {
    nll_with(table, tokens, prime_factors)
}

/// Scores samples against one n-gram table.
///
/// Every probability is a ratio of counts, so a score is the log of a
/// rational. It is summed as `sum(e * ln p)` over that rational's prime
/// factorization, which makes mathematically equal scores bit-identical.
/// Summing per-gram logs instead leaves ties like `ln(2/T) + ln(2/T)` and
/// `ln(1/T) + ln(4/T)` an ulp apart.
pub struct NgramScorer<'a> {
    table: &'a NGramTable,
    factors: HashMap<u64, Vec<(u64, u32)>>,
}

impl<'a> NgramScorer<'a> {
    pub fn new(table: &'a NGramTable) -> Self {
        let mut values: Vec<u64> = table.counts().values().copied().collect();
        values.extend([1, table.total(), table.total() + 1]);
        values.sort_unstable();
        values.dedup();
        let factors = values.into_par_iter().map(|v| (v, prime_factors(v))).collect();
        NgramScorer { table, factors }
    }

    pub fn nll<T: Scalar>(&self, tokens: &[String]) -> T {
        nll_with(self.table, tokens, |n| self.factors[&n].clone())
    }
}

fn nll_with<T: Scalar, F>(table: &NGramTable, tokens: &[String], factor: F) -> T
where
    F: Fn(u64) -> Vec<(u64, u32)>,
{
    let total = table.total();
    // -ln(num / den) = ln den - ln num, tallied per count value first.
    let mut mult: HashMap<u64, i64> = HashMap::new();
    for gram in tokens.windows(table.order()) {
        let (num, den) = match table.count(gram) {
            0 => (1, total + 1),
            c => (c, total),
        };
        *mult.entry(num).or_default() -= 1;
        *mult.entry(den).or_default() += 1;
    }
    let mut exps: BTreeMap<u64, i64> = BTreeMap::new();
    for (value, m) in mult {
        if m != 0 {
            for (p, e) in factor(value) {
                *exps.entry(p).or_default() += m * i64::from(e);
            }
        }
    }
    let nll: f64 = exps
        .into_iter()
        .filter(|&(_, e)| e != 0)
        .map(|(p, e)| e as f64 * (p as f64).ln())
        .sum();
    T::from_f64_lossy(nll)
}

fn prime_factors(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Uniform draw in [0, 1) from a generator keyed on `(seed, id)`.
pub fn random_difficulty<T: Scalar>(seed: u64, id: usize) -> T {
    let key = splitmix64(seed ^ splitmix64(id as u64));
    T::from_f64_lossy(ChaCha8Rng::seed_from_u64(key).random::<f64>())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn score_sample<T: Scalar>(
    sample: &Sample,
    method: DifficultyMethod,
    table: Option<&NgramScorer<'_>>,
    annotations: Option<&Annotations>,
) -> Result<T> {
    use DifficultyMethod::*;
    let annotation = || {
        annotations
            .and_then(|a| a.get(&sample.id))
            .ok_or(Error::MissingAnnotation { id: sample.id })
    };
    Ok(match method {
        NoCurriculum => T::zero(),
        Random { seed } => random_difficulty(seed, sample.id),
        Length => T::from_count(sample.len()),
        Unigram | Bigram | Trigram => table.expect("checked by caller").nll(&sample.tokens),
        Pos => T::from_count(annotation()?.diversity()),
        Dep => T::from_count(annotation()?.depth()),
    })
}

pub fn score_corpus<T: Scalar>(
    corpus: &Corpus,
    method: DifficultyMethod,
    resources: &ScoringResources,
) -> Result<RawScores<T>> {
    let table = match method.ngram_order() {
        Some(order) => {
            let t = resources.table(order).ok_or_else(|| Error::MissingResource {
                method: method.name().into(),
                resource: "an n-gram table of matching order",
            })?;
            if t.total() == 0 {
                return Err(Error::UndefinedDistribution { order });
            }
            Some(NgramScorer::new(t))
        }
        None => None,
    };
    let annotations = resources.annotations();
    if method.needs_annotations() && annotations.is_none() {
        return Err(Error::MissingResource {
            method: method.name().into(),
            resource: "an annotation file",
        });
    }
    let values = corpus
        .samples()
        .par_iter()
        .map(|s| score_sample(s, method, table.as_ref(), annotations))
        .collect::<Result<Vec<T>>>()?;
    Ok(RawScores { method, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::SampleAnnotation;
    use crate::corpus::SampleUnit;
    use crate::ngram::count_ngrams;
    use proptest::prelude::*;

    fn tiny() -> Corpus {
        Corpus::parse("a a b\na b\nc", SampleUnit::Line)
    }

    fn scores(corpus: &Corpus, method: DifficultyMethod) -> Vec<f64> {
        let res = ScoringResources::for_method(method, corpus, None).unwrap();
        score_corpus::<f64>(corpus, method, &res).unwrap().values
    }

    #[test]
    fn unigram_hand_computed() {
        // p(a) = 3/6, p(b) = 2/6, p(c) = 1/6
        let s = scores(&tiny(), DifficultyMethod::Unigram);
        let (pa, pb, pc) = (0.5f64, 1.0f64 / 3.0, 1.0f64 / 6.0);
        let expect = [-(2.0 * pa.ln() + pb.ln()), -(pa.ln() + pb.ln()), -pc.ln()];
        for (got, want) in s.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!((s[1] - 1.7918).abs() < 1e-4);
        assert!((s[0] - 2.4849).abs() < 1e-4);
        assert!((s[2] - 1.7918).abs() < 1e-4);
    }

    #[test]
    fn bigram_short_sample_scores_zero_and_floor_for_unseen() {
        let corpus = tiny();
        let s = scores(&corpus, DifficultyMethod::Bigram);
        assert_eq!(s[2], 0.0);
        assert!((s[1] + (2.0f64 / 3.0).ln()).abs() < 1e-12);

        let table = count_ngrams(&corpus, 2).unwrap();
        let unseen: Vec<String> = ["c", "a"].iter().map(|t| t.to_string()).collect();
        let nll: f64 = ngram_nll(&table, &unseen);
        assert!((nll - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn length_and_baseline() {
        assert_eq!(scores(&tiny(), DifficultyMethod::Length), vec![3.0, 2.0, 1.0]);
        assert_eq!(scores(&tiny(), DifficultyMethod::NoCurriculum), vec![0.0; 3]);
    }

    #[test]
    fn random_is_seeded() {
        let c = Corpus::parse(&(0..50).map(|i| format!("w{i}\n")).collect::<String>(), SampleUnit::Line);
        let a = scores(&c, DifficultyMethod::Random { seed: 1 });
        assert_eq!(a, scores(&c, DifficultyMethod::Random { seed: 1 }));
        assert_ne!(a, scores(&c, DifficultyMethod::Random { seed: 2 }));
        assert!(a.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn missing_resources() {
        let c = tiny();
        let err = score_corpus::<f64>(&c, DifficultyMethod::Trigram, &ScoringResources::new()).unwrap_err();
        assert!(err.to_string().contains("trigram"));
        let err = score_corpus::<f64>(&c, DifficultyMethod::Pos, &ScoringResources::new()).unwrap_err();
        assert!(err.to_string().contains("pos"));

        let mut ann = Annotations::new();
        ann.insert(
            0,
            SampleAnnotation {
                id: 0,
                pos: vec!["X".into(), "X".into(), "Y".into()],
                heads: vec![-1, 0, 0],
            },
        );
        let res = ScoringResources::new().with_annotations(ann);
        let err = score_corpus::<f64>(&c, DifficultyMethod::Dep, &res).unwrap_err();
        assert!(matches!(err, Error::MissingAnnotation { id: 1 }));
    }

    #[test]
    fn equal_likelihoods_score_bit_identical() {
        // counts a=4 b=2 c=2 d=1 of 9: (2/9)(2/9) == (4/9)(1/9)
        let c = Corpus::parse("b c\na d\na a a b c", SampleUnit::Line);
        let s = scores(&c, DifficultyMethod::Unigram);
        assert_eq!(s[0].to_bits(), s[1].to_bits());
        assert!((s[0] - (4.5f64.ln() * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn scorer_matches_uncached_path() {
        let c = Corpus::parse("the cat sat\nthe cat ran far\na dog\nthe dog sat down", SampleUnit::Line);
        for order in 1..=3 {
            let table = count_ngrams(&c, order).unwrap();
            let scorer = NgramScorer::new(&table);
            for s in c.samples() {
                let a: f64 = scorer.nll(&s.tokens);
                let b: f64 = ngram_nll(&table, &s.tokens);
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn prime_factorization() {
        for n in 1..2000u64 {
            let f = prime_factors(n);
            assert_eq!(f.iter().map(|&(p, e)| p.pow(e)).product::<u64>(), n);
            assert!(f.windows(2).all(|w| w[0].0 < w[1].0));
        }
        assert_eq!(prime_factors(1), vec![]);
        assert_eq!(prime_factors(999_983), vec![(999_983, 1)]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in DifficultyMethod::all(9) {
            assert_eq!(DifficultyMethod::parse(m.name(), 9).unwrap(), m);
        }
        assert!(DifficultyMethod::parse("entropy", 0).is_err());
    }

    fn lists() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]).prop_map(String::from), 1..10),
            2..25,
        )
    }

    proptest! {
        #[test]
        fn ngram_scores_non_negative(lists in lists(), order in 1usize..=3) {
            let corpus = Corpus::from_token_lists(lists, SampleUnit::Line);
            let table = count_ngrams(&corpus, order).unwrap();
            prop_assume!(table.total() > 0);
            for s in corpus.samples() {
                prop_assert!(ngram_nll::<f64>(&table, &s.tokens) >= 0.0);
            }
        }

        #[test]
        fn monotone_transforms_keep_ngram_ranks(lists in lists(), order in 1usize..=3) {
            use crate::curriculum::cdf_normalize;
            let corpus = Corpus::from_token_lists(lists, SampleUnit::Line);
            let table = count_ngrams(&corpus, order).unwrap();
            prop_assume!(table.total() > 0);
            let scorer = NgramScorer::new(&table);
            let raw: Vec<f64> = corpus.samples().iter().map(|s| scorer.nll(&s.tokens)).collect();
            let eps = cdf_normalize(&raw).unwrap();
            let exp: Vec<f64> = raw.iter().map(|x| x.exp()).collect();
            let affine: Vec<f64> = raw.iter().map(|x| 3.0 * x + 7.0).collect();
            prop_assert_eq!(&cdf_normalize(&exp).unwrap(), &eps);
            prop_assert_eq!(&cdf_normalize(&affine).unwrap(), &eps);
        }

        #[test]
        fn appending_never_lowers_length_or_unigram(lists in lists(), extra in prop::sample::select(vec!["a", "b", "z"])) {
            let corpus = Corpus::from_token_lists(lists, SampleUnit::Line);
            let table = count_ngrams(&corpus, 1).unwrap();
            for s in corpus.samples() {
                let mut longer = s.tokens.clone();
                longer.push(extra.to_string());
                prop_assert!(ngram_nll::<f64>(&table, &longer) >= ngram_nll::<f64>(&table, &s.tokens));
            }
        }

        #[test]
        fn scoring_commutes_with_permutation(lists in lists(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let corpus = Corpus::from_token_lists(lists.clone(), SampleUnit::Line);
            let mut perm: Vec<usize> = (0..lists.len()).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let permuted = Corpus::from_token_lists(perm.iter().map(|&i| lists[i].clone()), SampleUnit::Line);
            for method in [DifficultyMethod::Length, DifficultyMethod::Unigram, DifficultyMethod::Bigram, DifficultyMethod::Trigram] {
                if let Some(order) = method.ngram_order() {
                    if count_ngrams(&corpus, order).unwrap().total() == 0 {
                        continue;
                    }
                }
                let a = scores(&corpus, method);
                let b = scores(&permuted, method);
                for (new_id, &old_id) in perm.iter().enumerate() {
                    prop_assert_eq!(a[old_id], b[new_id]);
                }
            }
        }
    }
}
