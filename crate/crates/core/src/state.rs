//! Seating state for the Chinese restaurant franchise.
//!
//! Words of each document sit at tables; every table is assigned one topic;
//! topics aggregate the word counts of all their tables across documents.
//! This module owns every count the samplers read, and all mutation goes
//! through seat/unseat/reassign so the counts never drift from the raw
//! assignments. `validate` recomputes everything from scratch and reports
//! mismatches; it is cheap enough to run per iteration in test builds.
//!
//! Invariants maintained here:
//! - empty tables and empty topics are removed eagerly
//! - topic labels grow monotonically and are never reused
//! - `m_total` equals both the sum of per-document table counts and the sum
//!   of per-topic table counts

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::marginals::{log_f_full, TableWordVector, TopicStats};

pub type TopicLabel = u64;

const UNSEATED: u32 = u32::MAX;
pub(crate) const DETACHED: TopicLabel = TopicLabel::MAX;

/// Tolerance for the incrementally maintained per-topic log likelihood
/// against a from-scratch recomputation.
const CACHE_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperParams(String),
    #[error("corpus has vocabulary size {corpus} but hyperparameters say {hp}")]
    VocabMismatch { corpus: usize, hp: usize },
    #[error("malformed state dump: {0}")]
    DumpStructure(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Model hyperparameters. All must be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Document-level concentration.
    pub alpha0: f64,
    /// Corpus-level concentration.
    pub gamma: f64,
    /// Symmetric Dirichlet smoothing over terms.
    pub eta: f64,
    pub vocab_size: usize,
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), StateError> {
        for (name, v) in [("alpha0", self.alpha0), ("gamma", self.gamma), ("eta", self.eta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(StateError::InvalidHyperParams(format!("{name} = {v}")));
            }
        }
        if self.vocab_size == 0 {
            return Err(StateError::InvalidHyperParams("vocab_size = 0".into()));
        }
        Ok(())
    }
}

/// Identifies a table by document index and table slot within the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TableRef {
    pub doc: usize,
    pub table: usize,
}

/// Topic assignment target for seating or reassigning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopicChoice {
    Existing(TopicLabel),
    Fresh,
}

#[derive(Debug, Clone)]
struct TableData {
    topic: TopicLabel,
    words: TableWordVector,
}

#[derive(Debug, Clone, Default)]
struct DocState {
    table_of_word: Vec<u32>,
    tables: Vec<Option<TableData>>,
    free: Vec<u32>,
    active_tables: usize,
}

impl DocState {
    fn table(&self, t: usize) -> &TableData {
        self.tables[t].as_ref().expect("inactive table slot")
    }

    fn table_mut(&mut self, t: usize) -> &mut TableData {
        self.tables[t].as_mut().expect("inactive table slot")
    }
}

#[derive(Debug, Clone)]
struct TopicData {
    tables: usize,
    stats: TopicStats,
}

/// Full seating state over one corpus.
#[derive(Debug, Clone)]
pub struct CrfState {
    corpus: Arc<Corpus>,
    hp: HyperParams,
    docs: Vec<DocState>,
    topics: BTreeMap<TopicLabel, TopicData>,
    m_total: usize,
    next_topic_label: TopicLabel,
}

/// Comparable snapshot of every count in a state; used by tests that assert
/// exact restoration after rejected or round-tripped moves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountSnapshot {
    pub m_total: usize,
    pub topics: Vec<(TopicLabel, usize, u64, Vec<(u32, u32)>)>,
    pub word_tables: Vec<Vec<u32>>,
    pub tables: Vec<Vec<(u32, TopicLabel, Vec<(u32, u32)>)>>,
}

impl CrfState {
    /// Fresh state with every word unseated.
    pub fn new_unseated(corpus: Arc<Corpus>, hp: HyperParams) -> Result<Self, StateError> {
        hp.validate()?;
        if corpus.vocab_size != hp.vocab_size {
            return Err(StateError::VocabMismatch { corpus: corpus.vocab_size, hp: hp.vocab_size });
        }
        let docs = corpus
            .docs
            .iter()
            .map(|d| DocState {
                table_of_word: vec![UNSEATED; d.tokens.len()],
                ..Default::default()
            })
            .collect();
        Ok(Self { corpus, hp, docs, topics: BTreeMap::new(), m_total: 0, next_topic_label: 0 })
    }

    /// Builds a fully seated state from explicit assignments: `tables[j][i]`
    /// is a compact table id per word, `topics[j][tid]` the topic label per
    /// table id. Intended for tests, enumeration comparisons, and replaying
    /// external configurations.
    pub fn from_assignments(
        corpus: Arc<Corpus>,
        hp: HyperParams,
        tables: &[Vec<usize>],
        topics: &[Vec<TopicLabel>],
    ) -> Result<Self, StateError> {
        let mut state = Self::new_unseated(corpus, hp)?;
        if tables.len() != state.docs.len() || topics.len() != state.docs.len() {
            return Err(StateError::DumpStructure(
                "assignment vectors do not match document count".into(),
            ));
        }
        for j in 0..tables.len() {
            if tables[j].len() != state.corpus.docs[j].tokens.len() {
                return Err(StateError::DumpStructure(format!(
                    "doc {j}: assignment length mismatch"
                )));
            }
            for &k in &topics[j] {
                state.ensure_topic_registered(k)?;
            }
            let n_tabs = topics[j].len();
            let mut slot_of: Vec<Option<usize>> = vec![None; n_tabs];
            for (i, &tid) in tables[j].iter().enumerate() {
                if tid >= n_tabs {
                    return Err(StateError::DumpStructure(format!(
                        "doc {j} word {i}: table id {tid} has no topic"
                    )));
                }
                match slot_of[tid] {
                    Some(slot) => state.seat_word_existing(j, i, slot),
                    None => {
                        let slot =
                            state.seat_word_new_table(j, i, TopicChoice::Existing(topics[j][tid]));
                        slot_of[tid] = Some(slot);
                    }
                }
            }
            if let Some(tid) = slot_of.iter().position(|s| s.is_none()) {
                return Err(StateError::DumpStructure(format!(
                    "doc {j}: declared table {tid} seats no words"
                )));
            }
        }
        Ok(state)
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn hp(&self) -> &HyperParams {
        &self.hp
    }

    pub fn set_alpha0(&mut self, alpha0: f64) {
        assert!(alpha0 > 0.0 && alpha0.is_finite(), "alpha0 must stay positive");
        self.hp.alpha0 = alpha0;
    }

    pub fn set_gamma(&mut self, gamma: f64) {
        assert!(gamma > 0.0 && gamma.is_finite(), "gamma must stay positive");
        self.hp.gamma = gamma;
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn token(&self, doc: usize, word: usize) -> u32 {
        self.corpus.docs[doc].tokens[word]
    }

    /// Table slot of a seated word, `None` while unseated.
    pub fn table_of_word(&self, doc: usize, word: usize) -> Option<usize> {
        let t = self.docs[doc].table_of_word[word];
        (t != UNSEATED).then_some(t as usize)
    }

    /// Number of active tables in one document.
    pub fn doc_table_count(&self, doc: usize) -> usize {
        self.docs[doc].active_tables
    }

    /// Number of seated words in one document.
    pub fn doc_seated_words(&self, doc: usize) -> usize {
        self.docs[doc].table_of_word.iter().filter(|&&t| t != UNSEATED).count()
    }

    /// Active table slots of a document, ascending.
    pub fn doc_tables(&self, doc: usize) -> impl Iterator<Item = usize> + '_ {
        self.docs[doc].tables.iter().enumerate().filter(|(_, t)| t.is_some()).map(|(i, _)| i)
    }

    pub fn table_topic(&self, doc: usize, table: usize) -> TopicLabel {
        self.docs[doc].table(table).topic
    }

    pub fn table_words(&self, doc: usize, table: usize) -> &TableWordVector {
        &self.docs[doc].table(table).words
    }

    pub fn table_size(&self, doc: usize, table: usize) -> u32 {
        self.docs[doc].table(table).words.total()
    }

    /// Total number of tables across all documents.
    pub fn m_total(&self) -> usize {
        self.m_total
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    /// Active topic labels, ascending.
    pub fn topic_labels(&self) -> impl Iterator<Item = TopicLabel> + '_ {
        self.topics.keys().copied()
    }

    /// Number of tables assigned to a topic.
    pub fn topic_table_count(&self, k: TopicLabel) -> usize {
        self.topics.get(&k).map_or(0, |t| t.tables)
    }

    pub fn topic_stats(&self, k: TopicLabel) -> &TopicStats {
        &self.topics.get(&k).expect("unknown topic label").stats
    }

    /// `(label, table count, stats)` for every active topic, ascending label.
    pub fn topics_iter(&self) -> impl Iterator<Item = (TopicLabel, usize, &TopicStats)> + '_ {
        self.topics.iter().map(|(&k, d)| (k, d.tables, &d.stats))
    }

    pub fn next_topic_label(&self) -> TopicLabel {
        self.next_topic_label
    }

    /// Every active table, ascending by document then slot.
    pub fn all_tables(&self) -> Vec<TableRef> {
        let mut out = Vec::with_capacity(self.m_total);
        for (doc, d) in self.docs.iter().enumerate() {
            for (table, t) in d.tables.iter().enumerate() {
                if t.is_some() {
                    out.push(TableRef { doc, table });
                }
            }
        }
        out
    }

    /// Active tables currently assigned to topic `k`, ascending by document
    /// then slot.
    pub fn tables_of_topic(&self, k: TopicLabel) -> Vec<TableRef> {
        let mut out = Vec::new();
        for (doc, d) in self.docs.iter().enumerate() {
            for (table, t) in d.tables.iter().enumerate() {
                if let Some(td) = t {
                    if td.topic == k {
                        out.push(TableRef { doc, table });
                    }
                }
            }
        }
        out
    }

    /// Seats word `(doc, word)` at active table `table` of its document.
    pub fn seat_word_existing(&mut self, doc: usize, word: usize, table: usize) {
        assert_eq!(self.docs[doc].table_of_word[word], UNSEATED, "word already seated");
        let v = self.corpus.docs[doc].tokens[word];
        let hp = self.hp;
        let d = &mut self.docs[doc];
        d.table_of_word[word] = table as u32;
        let td = d.table_mut(table);
        td.words.add(v);
        let k = td.topic;
        debug_assert_ne!(k, DETACHED);
        self.topics.get_mut(&k).expect("table points at a dead topic").stats.add_word(v, &hp);
    }

    /// Opens a new table for word `(doc, word)` and assigns it a topic.
    /// Returns the new table slot.
    pub fn seat_word_new_table(&mut self, doc: usize, word: usize, topic: TopicChoice) -> usize {
        assert_eq!(self.docs[doc].table_of_word[word], UNSEATED, "word already seated");
        let v = self.corpus.docs[doc].tokens[word];
        let hp = self.hp;
        let label = self.resolve_topic_for_attach(topic);
        let d = &mut self.docs[doc];
        let slot = match d.free.pop() {
            Some(s) => s as usize,
            None => {
                d.tables.push(None);
                d.tables.len() - 1
            }
        };
        debug_assert!(d.tables[slot].is_none());
        d.tables[slot] = Some(TableData { topic: label, words: TableWordVector::singleton(v) });
        d.table_of_word[word] = slot as u32;
        d.active_tables += 1;
        self.m_total += 1;
        let topic_entry = self.topics.get_mut(&label).expect("attach target vanished");
        topic_entry.tables += 1;
        topic_entry.stats.add_word(v, &hp);
        slot
    }

    /// Removes word `(doc, word)` from its table. An emptied table is freed;
    /// a topic that loses its last table is removed.
    pub fn unseat_word(&mut self, doc: usize, word: usize) {
        let slot = self.docs[doc].table_of_word[word];
        assert_ne!(slot, UNSEATED, "word not seated");
        let slot = slot as usize;
        let v = self.corpus.docs[doc].tokens[word];
        let hp = self.hp;
        let d = &mut self.docs[doc];
        d.table_of_word[word] = UNSEATED;
        let td = d.table_mut(slot);
        td.words.remove(v);
        let k = td.topic;
        let table_now_empty = td.words.is_empty();
        if table_now_empty {
            d.tables[slot] = None;
            d.free.push(slot as u32);
            d.active_tables -= 1;
            self.m_total -= 1;
        }
        let entry = self.topics.get_mut(&k).expect("table points at a dead topic");
        entry.stats.remove_word(v, &hp);
        if table_now_empty {
            entry.tables -= 1;
            if entry.tables == 0 {
                debug_assert!(entry.stats.is_empty(), "topic retired while holding words");
                self.topics.remove(&k);
            }
        }
    }

    /// Moves table `(doc, table)` and all its words to another topic.
    /// Reassigning to the current topic is a no-op. Returns the label the
    /// table ends up in.
    pub fn reassign_table_topic(
        &mut self,
        doc: usize,
        table: usize,
        topic: TopicChoice,
    ) -> TopicLabel {
        if let TopicChoice::Existing(k) = topic {
            if self.docs[doc].table(table).topic == k {
                return k;
            }
        }
        self.detach_table(doc, table);
        self.attach_table(doc, table, topic)
    }

    /// Removes the table's contribution from its topic, leaving the table
    /// detached. Must be followed by `attach_table`. Returns the old label.
    pub(crate) fn detach_table(&mut self, doc: usize, table: usize) -> TopicLabel {
        let hp = self.hp;
        let td = self.docs[doc].table_mut(table);
        let k = td.topic;
        assert_ne!(k, DETACHED, "table already detached");
        td.topic = DETACHED;
        let words = td.words.clone();
        let entry = self.topics.get_mut(&k).expect("table points at a dead topic");
        entry.stats.remove_table(&words, &hp);
        entry.tables -= 1;
        if entry.tables == 0 {
            debug_assert!(entry.stats.is_empty(), "topic retired while holding words");
            self.topics.remove(&k);
        }
        k
    }

    /// Attaches a detached table to a topic, creating a fresh topic when
    /// asked. Returns the label attached to.
    pub(crate) fn attach_table(
        &mut self,
        doc: usize,
        table: usize,
        topic: TopicChoice,
    ) -> TopicLabel {
        let hp = self.hp;
        let label = self.resolve_topic_for_attach(topic);
        let td = self.docs[doc].table_mut(table);
        assert_eq!(td.topic, DETACHED, "attach target is not detached");
        td.topic = label;
        let words = td.words.clone();
        let entry = self.topics.get_mut(&label).expect("attach target vanished");
        entry.stats.add_table(&words, &hp);
        entry.tables += 1;
        label
    }

    /// Registers an externally chosen label with no tables yet, bumping the
    /// monotone label counter past it.
    fn ensure_topic_registered(&mut self, label: TopicLabel) -> Result<(), StateError> {
        if label == DETACHED {
            return Err(StateError::DumpStructure("reserved topic label".into()));
        }
        if !self.topics.contains_key(&label) {
            let stats = TopicStats::new(self.hp.vocab_size);
            self.topics.insert(label, TopicData { tables: 0, stats });
            self.next_topic_label = self.next_topic_label.max(label + 1);
        }
        Ok(())
    }

    fn resolve_topic_for_attach(&mut self, topic: TopicChoice) -> TopicLabel {
        match topic {
            TopicChoice::Existing(k) => {
                assert!(self.topics.contains_key(&k), "unknown topic label {k}");
                k
            }
            TopicChoice::Fresh => {
                let label = self.next_topic_label;
                self.next_topic_label += 1;
                let stats = TopicStats::new(self.hp.vocab_size);
                self.topics.insert(label, TopicData { tables: 0, stats });
                label
            }
        }
    }

    /// Log prior probability of the current partition: document-level seating
    /// times the corpus-level grouping of tables into topics. Partially
    /// seated states score the words seated so far.
    pub fn log_partition_prior(&self) -> f64 {
        let a = self.hp.alpha0;
        let mut lp = 0.0;
        for d in &self.docs {
            let mut n_words = 0u64;
            for td in d.tables.iter().flatten() {
                lp += ln_gamma(td.words.total() as f64);
                n_words += td.words.total() as u64;
            }
            lp += d.active_tables as f64 * a.ln();
            if n_words > 0 {
                lp -= ln_gamma(n_words as f64 + a) - ln_gamma(a);
            }
        }
        let g = self.hp.gamma;
        lp += self.topics.len() as f64 * g.ln();
        for data in self.topics.values() {
            lp += ln_gamma(data.tables as f64);
        }
        if self.m_total > 0 {
            lp -= ln_gamma(self.m_total as f64 + g) - ln_gamma(g);
        }
        lp
    }

    /// Recomputes every count from the raw assignments and diffs against the
    /// stored values. Returns one line per violation; empty means consistent.
    pub fn validate(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if let Err(e) = self.hp.validate() {
            bad.push(e.to_string());
        }
        let mut m_total = 0usize;
        let mut topic_tables: BTreeMap<TopicLabel, usize> = BTreeMap::new();
        let mut topic_counts: BTreeMap<TopicLabel, BTreeMap<u32, u64>> = BTreeMap::new();
        for (j, d) in self.docs.iter().enumerate() {
            let mut per_slot: BTreeMap<usize, TableWordVector> = BTreeMap::new();
            for (i, &slot) in d.table_of_word.iter().enumerate() {
                if slot == UNSEATED {
                    continue;
                }
                let slot = slot as usize;
                if slot >= d.tables.len() || d.tables[slot].is_none() {
                    bad.push(format!("doc {j} word {i}: seated at inactive slot {slot}"));
                    continue;
                }
                per_slot.entry(slot).or_default().add(self.corpus.docs[j].tokens[i]);
            }
            let mut active = 0usize;
            for (slot, t) in d.tables.iter().enumerate() {
                let Some(td) = t else { continue };
                active += 1;
                if td.topic == DETACHED {
                    bad.push(format!("doc {j} table {slot}: detached from any topic"));
                    continue;
                }
                let recomputed = per_slot.remove(&slot).unwrap_or_default();
                if recomputed.is_empty() {
                    bad.push(format!("doc {j} table {slot}: active but holds no words"));
                }
                if recomputed != td.words {
                    bad.push(format!(
                        "doc {j} table {slot}: stored word counts {:?} but positions give {:?}",
                        td.words, recomputed
                    ));
                }
                *topic_tables.entry(td.topic).or_insert(0) += 1;
                let counts = topic_counts.entry(td.topic).or_default();
                for (v, c) in recomputed.iter() {
                    *counts.entry(v).or_insert(0) += c as u64;
                }
            }
            if active != d.active_tables {
                bad.push(format!(
                    "doc {j}: stored table count {} but {active} slots are active",
                    d.active_tables
                ));
            }
            for slot in &d.free {
                if (*slot as usize) < d.tables.len() && d.tables[*slot as usize].is_some() {
                    bad.push(format!("doc {j}: slot {slot} is both free and active"));
                }
            }
            m_total += active;
        }
        if m_total != self.m_total {
            bad.push(format!("m_total stored {} but recomputed {m_total}", self.m_total));
        }
        for (&k, data) in &self.topics {
            let tables = topic_tables.get(&k).copied().unwrap_or(0);
            if tables != data.tables {
                bad.push(format!(
                    "topic {k}: stored table count {} but recomputed {tables}",
                    data.tables
                ));
            }
            let recomputed = topic_counts.remove(&k).unwrap_or_default();
            let rec_total: u64 = recomputed.values().sum();
            if rec_total != data.stats.total() {
                bad.push(format!(
                    "topic {k}: stored word total {} but recomputed {rec_total}",
                    data.stats.total()
                ));
            }
            for (&v, &c) in &recomputed {
                if data.stats.count(v) as u64 != c {
                    bad.push(format!(
                        "topic {k} term {v}: stored count {} but recomputed {c}",
                        data.stats.count(v)
                    ));
                }
            }
            for (v, c) in data.stats.iter_nonzero() {
                if !recomputed.contains_key(&v) {
                    bad.push(format!("topic {k} term {v}: stored count {c} but recomputed 0"));
                }
            }
            let scratch = log_f_full(&data.stats, &self.hp);
            if (data.stats.cached_log_f() - scratch).abs() > CACHE_TOL {
                bad.push(format!(
                    "topic {k}: cached log likelihood {} drifted from recomputed {scratch}",
                    data.stats.cached_log_f()
                ));
            }
            if k >= self.next_topic_label {
                bad.push(format!(
                    "topic {k}: label not below next_topic_label {}",
                    self.next_topic_label
                ));
            }
        }
        for (k, _) in topic_counts {
            bad.push(format!("topic {k}: referenced by tables but not registered"));
        }
        bad
    }

    pub fn count_snapshot(&self) -> CountSnapshot {
        CountSnapshot {
            m_total: self.m_total,
            topics: self
                .topics
                .iter()
                .map(|(&k, d)| (k, d.tables, d.stats.total(), d.stats.iter_nonzero().collect()))
                .collect(),
            word_tables: self.docs.iter().map(|d| d.table_of_word.clone()).collect(),
            tables: self
                .docs
                .iter()
                .map(|d| {
                    d.tables
                        .iter()
                        .enumerate()
                        .filter_map(|(slot, t)| {
                            t.as_ref()
                                .map(|td| (slot as u32, td.topic, td.words.iter().collect()))
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_dump(&self) -> StateDump {
        StateDump {
            alpha0: self.hp.alpha0,
            gamma: self.hp.gamma,
            eta: self.hp.eta,
            vocab_size: self.hp.vocab_size,
            word_tables: self.docs.iter().map(|d| d.table_of_word.clone()).collect(),
            table_topics: self
                .docs
                .iter()
                .map(|d| {
                    d.tables
                        .iter()
                        .enumerate()
                        .filter_map(|(slot, t)| t.as_ref().map(|td| (slot as u32, td.topic)))
                        .collect()
                })
                .collect(),
            topic_counts: self
                .topics
                .iter()
                .map(|(&k, d)| (k, d.stats.iter_nonzero().collect()))
                .collect(),
        }
    }

    /// Rebuilds a state from a dump. Table structure is reconstructed from
    /// the raw assignments; per-topic term counts are taken from the dump at
    /// face value so `validate` can detect corrupted dumps.
    pub fn from_dump(dump: &StateDump, corpus: Arc<Corpus>) -> Result<Self, StateError> {
        let hp = HyperParams {
            alpha0: dump.alpha0,
            gamma: dump.gamma,
            eta: dump.eta,
            vocab_size: dump.vocab_size,
        };
        hp.validate()?;
        if corpus.vocab_size != hp.vocab_size {
            return Err(StateError::VocabMismatch { corpus: corpus.vocab_size, hp: hp.vocab_size });
        }
        if dump.word_tables.len() != corpus.docs.len()
            || dump.table_topics.len() != corpus.docs.len()
        {
            return Err(StateError::DumpStructure(format!(
                "dump covers {} documents but corpus has {}",
                dump.word_tables.len(),
                corpus.docs.len()
            )));
        }
        let mut docs = Vec::with_capacity(corpus.docs.len());
        let mut m_total = 0usize;
        let mut topic_tables: BTreeMap<TopicLabel, usize> = BTreeMap::new();
        for (j, doc) in corpus.docs.iter().enumerate() {
            if dump.word_tables[j].len() != doc.tokens.len() {
                return Err(StateError::DumpStructure(format!(
                    "doc {j}: dump has {} word assignments but document has {} tokens",
                    dump.word_tables[j].len(),
                    doc.tokens.len()
                )));
            }
            let max_slot = dump.table_topics[j].iter().map(|&(s, _)| s as usize + 1).max();
            let mut tables: Vec<Option<TableData>> = vec![None; max_slot.unwrap_or(0)];
            for &(slot, k) in &dump.table_topics[j] {
                if k == DETACHED {
                    return Err(StateError::DumpStructure(format!(
                        "doc {j} table {slot}: reserved topic label"
                    )));
                }
                let entry = &mut tables[slot as usize];
                if entry.is_some() {
                    return Err(StateError::DumpStructure(format!(
                        "doc {j}: duplicate table slot {slot}"
                    )));
                }
                *entry = Some(TableData { topic: k, words: TableWordVector::new() });
                *topic_tables.entry(k).or_insert(0) += 1;
            }
            for (i, &slot) in dump.word_tables[j].iter().enumerate() {
                if slot == UNSEATED {
                    continue;
                }
                let td = tables
                    .get_mut(slot as usize)
                    .and_then(|t| t.as_mut())
                    .ok_or_else(|| {
                        StateError::DumpStructure(format!(
                            "doc {j} word {i}: seated at undeclared table {slot}"
                        ))
                    })?;
                td.words.add(doc.tokens[i]);
            }
            let active = tables.iter().filter(|t| t.is_some()).count();
            let free = tables
                .iter()
                .enumerate()
                .filter(|(_, t)| t.is_none())
                .map(|(s, _)| s as u32)
                .collect();
            m_total += active;
            docs.push(DocState {
                table_of_word: dump.word_tables[j].clone(),
                tables,
                free,
                active_tables: active,
            });
        }
        let mut topics = BTreeMap::new();
        for (k, counts) in &dump.topic_counts {
            let stats = TopicStats::from_counts(hp.vocab_size, counts.iter().copied(), &hp)
                .map_err(|e| StateError::DumpStructure(format!("topic {k}: {e}")))?;
            let tables = topic_tables.remove(k).unwrap_or(0);
            topics.insert(*k, TopicData { tables, stats });
        }
        if let Some((&k, _)) = topic_tables.first_key_value() {
            return Err(StateError::DumpStructure(format!(
                "tables reference topic {k} but the dump stores no counts for it"
            )));
        }
        let next_topic_label =
            topics.keys().next_back().map(|&k| k + 1).unwrap_or(0);
        Ok(Self { corpus, hp, docs, topics, m_total, next_topic_label })
    }

    pub fn save_json(&self, path: &Path) -> Result<(), StateError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &self.to_dump())?;
        Ok(())
    }
}

/// Serialized form of a state: hyperparameters, raw assignments, and the
/// per-topic term counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDump {
    pub alpha0: f64,
    pub gamma: f64,
    pub eta: f64,
    pub vocab_size: usize,
    /// Per document, per word position: table slot (`u32::MAX` = unseated).
    pub word_tables: Vec<Vec<u32>>,
    /// Per document: `(slot, topic label)` for every active table.
    pub table_topics: Vec<Vec<(u32, TopicLabel)>>,
    /// Per topic label: nonzero `(term, count)` pairs.
    pub topic_counts: Vec<(TopicLabel, Vec<(u32, u32)>)>,
}

impl StateDump {
    pub fn load_json(path: &Path) -> Result<Self, StateError> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    pub fn save_json(&self, path: &Path) -> Result<(), StateError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }
}
