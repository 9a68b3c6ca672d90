//! Collapsed likelihood terms for topics under a symmetric Dirichlet prior.
//!
//! With the topic-word distributions integrated out, a topic holding term
//! counts `n_v` (total `n`) over a vocabulary of size `V` with smoothing `eta`
//! has marginal sequence probability
//!
//! ```text
//! f = Gamma(V eta) / Gamma(n + V eta) * prod_v Gamma(n_v + eta) / Gamma(eta)
//! ```
//!
//! Everything here is expressed in natural logs. The conditional variants
//! (one extra word, one extra table of words) are ratios of two such terms,
//! so they telescope: adding words one at a time multiplies out to the same
//! value as a single bulk update.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::state::HyperParams;

const DENSE_VOCAB_LIMIT: usize = 1 << 16;

/// Term-count histogram of the words seated at one table.
///
/// Stored as sorted `(term, count)` pairs; tables are small, so linear scans
/// and shifts are cheap.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableWordVector {
    total: u32,
    terms: Vec<(u32, u32)>,
}

impl TableWordVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(term: u32) -> Self {
        Self { total: 1, terms: vec![(term, 1)] }
    }

    pub fn add(&mut self, term: u32) {
        self.total += 1;
        match self.terms.binary_search_by_key(&term, |&(t, _)| t) {
            Ok(i) => self.terms[i].1 += 1,
            Err(i) => self.terms.insert(i, (term, 1)),
        }
    }

    /// Panics if `term` is not present; the caller owns seating bookkeeping.
    pub fn remove(&mut self, term: u32) {
        self.total -= 1;
        let i = self
            .terms
            .binary_search_by_key(&term, |&(t, _)| t)
            .expect("removing a term that is not at the table");
        self.terms[i].1 -= 1;
        if self.terms[i].1 == 0 {
            self.terms.remove(i);
        }
    }

    pub fn count(&self, term: u32) -> u32 {
        self.terms
            .binary_search_by_key(&term, |&(t, _)| t)
            .map(|i| self.terms[i].1)
            .unwrap_or(0)
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Nonzero `(term, count)` pairs in ascending term order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.terms.iter().copied()
    }
}

impl FromIterator<u32> for TableWordVector {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        let mut v = Self::new();
        for t in iter {
            v.add(t);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TermCounts {
    Dense(Vec<u32>),
    Sparse(std::collections::BTreeMap<u32, u32>),
}

impl TermCounts {
    fn get(&self, v: u32) -> u32 {
        match self {
            TermCounts::Dense(a) => a[v as usize],
            TermCounts::Sparse(m) => m.get(&v).copied().unwrap_or(0),
        }
    }

    fn bump(&mut self, v: u32, delta: i64) {
        match self {
            TermCounts::Dense(a) => {
                let c = &mut a[v as usize];
                *c = (*c as i64 + delta).try_into().expect("term count underflow");
            }
            TermCounts::Sparse(m) => {
                let c = m.entry(v).or_insert(0);
                let next = *c as i64 + delta;
                let next: u32 = next.try_into().expect("term count underflow");
                if next == 0 {
                    m.remove(&v);
                } else {
                    *c = next;
                }
            }
        }
    }
}

/// Aggregate term counts of all words assigned to one topic, with an
/// incrementally maintained log marginal likelihood.
///
/// Storage is a dense array for small vocabularies and a sorted map above
/// [`DENSE_VOCAB_LIMIT`]; callers never see the difference.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicStats {
    total: u64,
    counts: TermCounts,
    cached_log_f: f64,
}

impl TopicStats {
    pub fn new(vocab_size: usize) -> Self {
        let counts = if vocab_size < DENSE_VOCAB_LIMIT {
            TermCounts::Dense(vec![0; vocab_size])
        } else {
            TermCounts::Sparse(Default::default())
        };
        Self { total: 0, counts, cached_log_f: 0.0 }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, term: u32) -> u32 {
        self.counts.get(term)
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Incrementally maintained value of [`log_f_full`]. Drift stays within
    /// float accumulation error of the from-scratch recomputation.
    pub fn cached_log_f(&self) -> f64 {
        self.cached_log_f
    }

    /// Nonzero `(term, count)` pairs in ascending term order.
    pub fn iter_nonzero(&self) -> Box<dyn Iterator<Item = (u32, u32)> + '_> {
        match &self.counts {
            TermCounts::Dense(a) => Box::new(
                a.iter().enumerate().filter(|&(_, &c)| c > 0).map(|(v, &c)| (v as u32, c)),
            ),
            TermCounts::Sparse(m) => Box::new(m.iter().map(|(&v, &c)| (v, c))),
        }
    }

    /// Builds stats directly from `(term, count)` pairs, recomputing the
    /// cached log likelihood from scratch. Used when loading dumps, which
    /// store counts at face value.
    pub fn from_counts(
        vocab_size: usize,
        counts: impl Iterator<Item = (u32, u32)>,
        hp: &HyperParams,
    ) -> Result<Self, String> {
        let mut s = Self::new(vocab_size);
        for (v, c) in counts {
            if v as usize >= vocab_size {
                return Err(format!("term {v} outside vocabulary of size {vocab_size}"));
            }
            if c == 0 {
                return Err(format!("zero stored count for term {v}"));
            }
            if s.counts.get(v) != 0 {
                return Err(format!("duplicate stored count for term {v}"));
            }
            s.counts.bump(v, c as i64);
            s.total += c as u64;
        }
        s.cached_log_f = log_f_full(&s, hp);
        Ok(s)
    }

    pub fn add_word(&mut self, term: u32, hp: &HyperParams) {
        self.cached_log_f += log_f_word_cond(self, term, hp);
        self.counts.bump(term, 1);
        self.total += 1;
    }

    pub fn remove_word(&mut self, term: u32, hp: &HyperParams) {
        self.counts.bump(term, -1);
        self.total -= 1;
        self.cached_log_f -= log_f_word_cond(self, term, hp);
    }

    pub fn add_table(&mut self, table: &TableWordVector, hp: &HyperParams) {
        self.cached_log_f += log_f_table_cond(self, table, hp);
        for (v, c) in table.iter() {
            self.counts.bump(v, c as i64);
        }
        self.total += table.total() as u64;
    }

    pub fn remove_table(&mut self, table: &TableWordVector, hp: &HyperParams) {
        for (v, c) in table.iter() {
            self.counts.bump(v, -(c as i64));
        }
        self.total -= table.total() as u64;
        self.cached_log_f -= log_f_table_cond(self, table, hp);
    }
}

/// Log marginal probability of a topic's word multiset, computed from
/// scratch. Empty stats give exactly zero.
pub fn log_f_full(stats: &TopicStats, hp: &HyperParams) -> f64 {
    if stats.is_empty() {
        return 0.0;
    }
    let veta = hp.vocab_size as f64 * hp.eta;
    let mut lp = ln_gamma(veta) - ln_gamma(stats.total as f64 + veta);
    let lg_eta = ln_gamma(hp.eta);
    for (_, c) in stats.iter_nonzero() {
        lp += ln_gamma(c as f64 + hp.eta) - lg_eta;
    }
    lp
}

/// Log probability of observing one more word of `term` in a topic with
/// counts `stats`: `(n_v + eta) / (n + V eta)` in log space.
pub fn log_f_word_cond(stats: &TopicStats, term: u32, hp: &HyperParams) -> f64 {
    let veta = hp.vocab_size as f64 * hp.eta;
    ((stats.count(term) as f64 + hp.eta) / (stats.total as f64 + veta)).ln()
}

/// Log probability of observing one more table's worth of words in a topic
/// with counts `stats`. Equals `log_f_full(stats + table) - log_f_full(stats)`
/// without forming the union.
pub fn log_f_table_cond(stats: &TopicStats, table: &TableWordVector, hp: &HyperParams) -> f64 {
    if table.is_empty() {
        return 0.0;
    }
    let veta = hp.vocab_size as f64 * hp.eta;
    let n = stats.total as f64;
    let mut lp = ln_gamma(n + veta) - ln_gamma(n + table.total() as f64 + veta);
    for (v, c) in table.iter() {
        let base = stats.count(v) as f64 + hp.eta;
        lp += ln_gamma(base + c as f64) - ln_gamma(base);
    }
    lp
}

/// Log marginal probability of a table's word multiset under a brand-new
/// topic (no existing counts). A singleton table gives `log(1 / V)`.
pub fn log_prior_predictive_table(table: &TableWordVector, hp: &HyperParams) -> f64 {
    if table.is_empty() {
        return 0.0;
    }
    let veta = hp.vocab_size as f64 * hp.eta;
    let lg_eta = ln_gamma(hp.eta);
    let mut lp = ln_gamma(veta) - ln_gamma(table.total() as f64 + veta);
    for (_, c) in table.iter() {
        lp += ln_gamma(c as f64 + hp.eta) - lg_eta;
    }
    lp
}
