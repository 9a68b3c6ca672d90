//! Corpus and vocabulary containers plus LDA-C style I/O.
//!
//! A corpus file has one document per line: a pair count `M` followed by `M`
//! whitespace-separated `term_id:count` pairs. Term ids are zero-based into
//! the vocabulary. Counts are expanded into token sequences at load time; the
//! samplers operate on individual word positions.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed document header at line {line}: {detail}")]
    BadHeader { line: usize, detail: String },
    #[error("malformed term pair `{pair}` at line {line}")]
    BadPair { line: usize, pair: String },
    #[error("term id out of range at line {line}: {id} >= vocabulary size {vocab}")]
    TermOutOfRange { line: usize, id: usize, vocab: usize },
    #[error("zero count for term {id} at line {line}")]
    ZeroCount { line: usize, id: usize },
    #[error("pair count mismatch at line {line}: header says {expected}, found {found}")]
    PairCountMismatch { line: usize, expected: usize, found: usize },
    #[error("document at line {line} has no tokens")]
    EmptyDocument { line: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("duplicate vocabulary term `{term}` at line {line}")]
    DuplicateTerm { line: usize, term: String },
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("split fraction {0} outside (0, 1)")]
    BadSplitFraction(f64),
    #[error("cannot split a corpus with {0} documents")]
    TooFewDocuments(usize),
}

/// Vocabulary: term strings indexed by zero-based id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
}

impl Vocabulary {
    pub fn from_terms(terms: Vec<String>) -> Result<Self, CorpusError> {
        if terms.is_empty() {
            return Err(CorpusError::EmptyVocabulary);
        }
        for (i, a) in terms.iter().enumerate() {
            for (j, b) in terms.iter().enumerate().skip(i + 1) {
                if a == b {
                    return Err(CorpusError::DuplicateTerm { line: j + 1, term: b.clone() });
                }
            }
        }
        Ok(Self { terms })
    }

    /// Reads one term per line. Line number equals term id plus one.
    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path)?;
        let terms: Vec<String> = text.lines().map(|l| l.trim().to_string()).collect();
        Self::from_terms(terms)
    }

    /// Synthetic vocabulary `w0, w1, ...` for generated corpora.
    pub fn numbered(size: usize) -> Self {
        Self { terms: (0..size).map(|i| format!("w{i}")).collect() }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn write_to(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(t);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// One document: the token sequence, in file order, after count expansion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    /// Zero-based index of the document in its corpus.
    pub id: usize,
    /// Term ids, one entry per word position.
    pub tokens: Vec<u32>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub docs: Vec<Document>,
    /// Vocabulary size the term ids were validated against.
    pub vocab_size: usize,
}

impl Corpus {
    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    /// Total number of word positions.
    pub fn num_tokens(&self) -> usize {
        self.docs.iter().map(|d| d.tokens.len()).sum()
    }

    pub fn from_docs(token_lists: Vec<Vec<u32>>, vocab_size: usize) -> Result<Self, CorpusError> {
        if token_lists.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        for (j, toks) in token_lists.iter().enumerate() {
            if toks.is_empty() {
                return Err(CorpusError::EmptyDocument { line: j + 1 });
            }
            for &v in toks {
                if v as usize >= vocab_size {
                    return Err(CorpusError::TermOutOfRange {
                        line: j + 1,
                        id: v as usize,
                        vocab: vocab_size,
                    });
                }
            }
        }
        let docs = token_lists
            .into_iter()
            .enumerate()
            .map(|(id, tokens)| Document { id, tokens })
            .collect();
        Ok(Self { docs, vocab_size })
    }
}

fn parse_line(line_no: usize, line: &str, vocab_size: usize) -> Result<Vec<u32>, CorpusError> {
    let mut fields = line.split_whitespace();
    let header = fields.next().ok_or_else(|| CorpusError::BadHeader {
        line: line_no,
        detail: "missing pair count".into(),
    })?;
    let expected: usize = header.parse().map_err(|_| CorpusError::BadHeader {
        line: line_no,
        detail: format!("pair count `{header}` is not a non-negative integer"),
    })?;
    let mut tokens = Vec::new();
    let mut found = 0usize;
    for pair in fields {
        found += 1;
        let (id_s, count_s) = pair.split_once(':').ok_or_else(|| CorpusError::BadPair {
            line: line_no,
            pair: pair.to_string(),
        })?;
        let id: usize = id_s.parse().map_err(|_| CorpusError::BadPair {
            line: line_no,
            pair: pair.to_string(),
        })?;
        let count: usize = count_s.parse().map_err(|_| CorpusError::BadPair {
            line: line_no,
            pair: pair.to_string(),
        })?;
        if id >= vocab_size {
            return Err(CorpusError::TermOutOfRange { line: line_no, id, vocab: vocab_size });
        }
        if count == 0 {
            return Err(CorpusError::ZeroCount { line: line_no, id });
        }
        for _ in 0..count {
            tokens.push(id as u32);
        }
    }
    if found != expected {
        return Err(CorpusError::PairCountMismatch { line: line_no, expected, found });
    }
    if tokens.is_empty() {
        return Err(CorpusError::EmptyDocument { line: line_no });
    }
    Ok(tokens)
}

/// Loads an LDA-C style corpus, expanding counts into token sequences.
/// Blank lines are rejected as empty documents; term ids are checked against
/// `vocab.len()`.
pub fn load_corpus(path: &Path, vocab: &Vocabulary) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path)?;
    let mut docs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let tokens = parse_line(idx + 1, line, vocab.len())?;
        docs.push(Document { id: docs.len(), tokens });
    }
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(Corpus { docs, vocab_size: vocab.len() })
}

/// Writes a corpus in the same line format the loader reads. Tokens are
/// aggregated into `term:count` pairs ordered by term id.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let mut file = fs::File::create(path)?;
    let mut buf = String::new();
    for doc in &corpus.docs {
        let mut counts: Vec<u32> = vec![0; corpus.vocab_size];
        for &v in &doc.tokens {
            counts[v as usize] += 1;
        }
        let pairs: Vec<(usize, u32)> =
            counts.iter().copied().enumerate().filter(|&(_, c)| c > 0).collect();
        buf.clear();
        buf.push_str(&pairs.len().to_string());
        for (id, c) in pairs {
            buf.push_str(&format!(" {id}:{c}"));
        }
        buf.push('\n');
        file.write_all(buf.as_bytes())?;
    }
    Ok(())
}

/// Shuffles document indices with `rng` and assigns `round(fraction * D)`
/// documents to the training half, clamped so both halves stay nonempty.
/// Document ids are renumbered within each half; original indices are
/// returned alongside.
pub fn split_train_test(
    corpus: &Corpus,
    fraction: f64,
    rng: &mut impl Rng,
) -> Result<(Corpus, Corpus, Vec<usize>, Vec<usize>), CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::BadSplitFraction(fraction));
    }
    let d = corpus.num_docs();
    if d < 2 {
        return Err(CorpusError::TooFewDocuments(d));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let n_train = ((fraction * d as f64).round() as usize).clamp(1, d - 1);
    let (train_idx, test_idx) = order.split_at(n_train);
    let mut train_idx = train_idx.to_vec();
    let mut test_idx = test_idx.to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let take = |idx: &[usize]| Corpus {
        docs: idx
            .iter()
            .enumerate()
            .map(|(new_id, &old)| Document { id: new_id, tokens: corpus.docs[old].tokens.clone() })
            .collect(),
        vocab_size: corpus.vocab_size,
    };
    Ok((take(&train_idx), take(&test_idx), train_idx, test_idx))
}
