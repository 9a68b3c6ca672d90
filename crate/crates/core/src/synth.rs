//! Synthetic corpora with planted topic structure.
//!
//! The default setup is 100 documents of 50 words over a 12-term
//! vocabulary, generated from 5 topics with each document mixing at most 2.
//! Two of the topics overlap heavily (seven shared terms, with the first
//! two terms swapped between high and low mass); the other three live on a
//! disjoint 3-term support. Ground-truth assignments are returned so
//! recovery can be scored.

use rand::Rng;

use crate::corpus::Corpus;

/// Parameters for corpus generation.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_docs: usize,
    pub words_per_doc: usize,
    pub num_topics: usize,
    pub vocab_size: usize,
    /// Upper bound on distinct topics per document.
    pub max_topics_per_doc: usize,
    /// Use exactly `max_topics_per_doc` topics per document instead of a
    /// uniform count in `1..=max_topics_per_doc`.
    pub exact_topics_per_doc: bool,
    /// Explicit topic rows; `None` selects the planted 5 x 12 default.
    pub topic_matrix: Option<Vec<Vec<f64>>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_docs: 100,
            words_per_doc: 50,
            num_topics: 5,
            vocab_size: 12,
            max_topics_per_doc: 2,
            exact_topics_per_doc: false,
            topic_matrix: None,
        }
    }
}

const ROW_SUM_TOL: f64 = 1e-12;

impl SynthConfig {
    /// The topic matrix this config generates from, after validation.
    pub fn resolve_topics(&self) -> Result<Vec<Vec<f64>>, String> {
        if self.num_docs == 0 || self.words_per_doc == 0 {
            return Err("document and word counts must be positive".into());
        }
        if self.max_topics_per_doc == 0 {
            return Err("max_topics_per_doc must be positive".into());
        }
        let topics = match &self.topic_matrix {
            Some(m) => m.clone(),
            None => {
                if self.num_topics != 5 || self.vocab_size != 12 {
                    return Err(format!(
                        "no default topic matrix for {} topics over {} terms; \
                         supply one explicitly",
                        self.num_topics, self.vocab_size
                    ));
                }
                make_ground_truth_topics()
            }
        };
        if topics.len() != self.num_topics {
            return Err(format!(
                "topic matrix has {} rows but num_topics is {}",
                topics.len(),
                self.num_topics
            ));
        }
        for (k, row) in topics.iter().enumerate() {
            if row.len() != self.vocab_size {
                return Err(format!(
                    "topic {k} has {} entries but vocab_size is {}",
                    row.len(),
                    self.vocab_size
                ));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p) || !p.is_finite()) {
                return Err(format!("topic {k} has entries outside [0, 1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(format!("topic {k} sums to {sum}, not 1"));
            }
        }
        Ok(topics)
    }
}

/// High-to-low mass ratio inside the similar pair. The value balances two
/// pressures: the pair must stay similar enough that single-site Gibbs
/// moves cannot separate the two topics once their tables share one label
/// (cosine stays above 0.9), yet distinct enough that the separated
/// configuration carries more posterior mass than the merged one, so a
/// collective move that proposes the separation is accepted. At 4x the
/// discriminating terms recover fewer nats than the table-partition prior
/// charges for the split and merging is genuinely preferred; from 6x up
/// the balance flips.
const PAIR_CONTRAST: f64 = 8.0;

/// The planted 5 x 12 topic matrix. Topics 0 and 1 share terms 2..=8 at
/// high mass and swap terms 0 and 1 between high and low, where high is
/// `PAIR_CONTRAST` times low. Topics 2..=4 sit on the disjoint terms
/// 9..=11 with a rotated 0.6/0.2/0.2 pattern.
pub fn make_ground_truth_topics() -> Vec<Vec<f64>> {
    let low = 1.0 / (8.0 * PAIR_CONTRAST + 1.0);
    let high = PAIR_CONTRAST * low;
    let mut t0 = vec![0.0; 12];
    t0[0] = high;
    t0[1] = low;
    for v in 2..=8 {
        t0[v] = high;
    }
    let mut t1 = t0.clone();
    t1[0] = low;
    t1[1] = high;
    let mut rest = Vec::new();
    for k in 0..3 {
        let mut row = vec![0.0; 12];
        for (i, v) in (9..=11).enumerate() {
            row[v] = if i == k { 0.6 } else { 0.2 };
        }
        rest.push(row);
    }
    let mut out = vec![t0, t1];
    out.extend(rest);
    out
}

/// A generated corpus with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: Corpus,
    /// True topic index of every word, per document, per position.
    pub word_topics: Vec<Vec<u32>>,
    /// The distinct topics each document drew its mixture over.
    pub doc_topics: Vec<Vec<u32>>,
}

fn sample_categorical(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Uniformly random `count`-subset of `0..n`, ascending.
fn sample_distinct(n: usize, count: usize, rng: &mut impl Rng) -> Vec<u32> {
    debug_assert!(count <= n);
    let mut pool: Vec<u32> = (0..n as u32).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut chosen: Vec<u32> = pool[..count].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Generates a corpus: per document, draw a uniform set of topics, a
/// uniform simplex mixture over them, then each word topic-first.
pub fn generate(config: &SynthConfig, rng: &mut impl Rng) -> Result<SynthOutput, String> {
    let topics = config.resolve_topics()?;
    let k = topics.len();
    let per_doc_cap = config.max_topics_per_doc.min(k);
    let mut docs = Vec::with_capacity(config.num_docs);
    let mut word_topics = Vec::with_capacity(config.num_docs);
    let mut doc_topics = Vec::with_capacity(config.num_docs);
    for _ in 0..config.num_docs {
        let count = if config.exact_topics_per_doc {
            per_doc_cap
        } else {
            rng.random_range(1..=per_doc_cap)
        };
        let chosen = sample_distinct(k, count, rng);
        // Uniform on the simplex: normalized unit exponentials.
        let raw: Vec<f64> =
            (0..count).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = raw.iter().sum();
        let mixture: Vec<f64> = raw.iter().map(|r| r / total).collect();

        let mut tokens = Vec::with_capacity(config.words_per_doc);
        let mut truth = Vec::with_capacity(config.words_per_doc);
        for _ in 0..config.words_per_doc {
            let z = chosen[sample_categorical(&mixture, rng)];
            let v = sample_categorical(&topics[z as usize], rng) as u32;
            tokens.push(v);
            truth.push(z);
        }
        docs.push(tokens);
        word_topics.push(truth);
        doc_topics.push(chosen);
    }
    let corpus = Corpus::from_docs(docs, config.vocab_size).map_err(|e| e.to_string())?;
    Ok(SynthOutput { corpus, word_topics, doc_topics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::cosine;
    use crate::seeded_rng;

    #[test]
    fn ground_truth_rows_are_distributions() {
        let m = make_ground_truth_topics();
        assert_eq!(m.len(), 5);
        for row in &m {
            assert_eq!(row.len(), 12);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| (0.0..1.0).contains(&p)));
        }
        SynthConfig::default().resolve_topics().unwrap();
    }

    #[test]
    fn overlapping_pair_has_the_highest_cosine() {
        let m = make_ground_truth_topics();
        let mut best = (0, 0, f64::NEG_INFINITY);
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                let c = cosine(&m[i], &m[j]);
                if c > best.2 {
                    best = (i, j, c);
                }
            }
        }
        assert_eq!((best.0, best.1), (0, 1));
        assert!((cosine(&m[0], &m[2]) - 0.0).abs() < 1e-12, "disjoint supports");
        assert!(best.2 > 0.9, "planted pair should be strongly similar: {}", best.2);
    }

    #[test]
    fn default_corpus_has_expected_shape() {
        let out = generate(&SynthConfig::default(), &mut seeded_rng(3)).unwrap();
        assert_eq!(out.corpus.num_docs(), 100);
        assert_eq!(out.corpus.num_tokens(), 5000);
        assert_eq!(out.corpus.vocab_size, 12);
        for (doc, truth) in out.corpus.docs.iter().zip(&out.word_topics) {
            assert_eq!(doc.tokens.len(), truth.len());
            assert!(doc.tokens.iter().all(|&v| v < 12));
            assert!(truth.iter().all(|&z| z < 5));
        }
        for chosen in &out.doc_topics {
            assert!(!chosen.is_empty() && chosen.len() <= 2);
            assert!(chosen.windows(2).all(|w| w[0] < w[1]), "distinct ascending");
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg, &mut seeded_rng(7)).unwrap();
        let b = generate(&cfg, &mut seeded_rng(7)).unwrap();
        assert_eq!(a.corpus.docs, b.corpus.docs);
        assert_eq!(a.word_topics, b.word_topics);
        assert_eq!(a.doc_topics, b.doc_topics);
        let c = generate(&cfg, &mut seeded_rng(8)).unwrap();
        assert_ne!(a.corpus.docs, c.corpus.docs);
    }

    #[test]
    fn topic_count_flags_are_respected() {
        let single = SynthConfig { max_topics_per_doc: 1, ..SynthConfig::default() };
        let out = generate(&single, &mut seeded_rng(1)).unwrap();
        for (chosen, truth) in out.doc_topics.iter().zip(&out.word_topics) {
            assert_eq!(chosen.len(), 1);
            assert!(truth.iter().all(|&z| z == chosen[0]));
        }

        let exact = SynthConfig { exact_topics_per_doc: true, ..SynthConfig::default() };
        let out = generate(&exact, &mut seeded_rng(1)).unwrap();
        assert!(out.doc_topics.iter().all(|c| c.len() == 2));
    }

    #[test]
    fn term_frequencies_converge_to_the_mixture_mean() {
        // With symmetric topic choice and symmetric mixing, the expected
        // term distribution is the column mean of the topic matrix.
        let cfg = SynthConfig {
            num_docs: 2000,
            words_per_doc: 500,
            ..SynthConfig::default()
        };
        let out = generate(&cfg, &mut seeded_rng(12)).unwrap();
        let n = out.corpus.num_tokens();
        assert_eq!(n, 1_000_000);
        let mut freq = vec![0.0f64; 12];
        for doc in &out.corpus.docs {
            for &v in &doc.tokens {
                freq[v as usize] += 1.0;
            }
        }
        let m = make_ground_truth_topics();
        for v in 0..12 {
            let expected: f64 = m.iter().map(|row| row[v]).sum::<f64>() / 5.0;
            let got = freq[v] / n as f64;
            assert!(
                (got - expected).abs() < 0.005,
                "term {v}: expected {expected}, got {got}"
            );
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad_dims = SynthConfig { num_topics: 4, ..SynthConfig::default() };
        assert!(generate(&bad_dims, &mut seeded_rng(0)).is_err());

        let bad_rows = SynthConfig {
            num_topics: 2,
            vocab_size: 2,
            topic_matrix: Some(vec![vec![0.7, 0.4], vec![0.5, 0.5]]),
            ..SynthConfig::default()
        };
        assert!(generate(&bad_rows, &mut seeded_rng(0)).is_err());

        let zero_docs = SynthConfig { num_docs: 0, ..SynthConfig::default() };
        assert!(generate(&zero_docs, &mut seeded_rng(0)).is_err());
    }
}
