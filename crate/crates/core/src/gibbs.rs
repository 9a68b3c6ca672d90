//! Collapsed Gibbs kernels over the seating state.
//!
//! Two moves leave the posterior invariant:
//!
//! - word move: unseat one word, then reseat it at an existing table of its
//!   document (weight `n_jt * f_k(v)`) or at a new table (weight `alpha0`
//!   times the topic mixture mass of `v`). A new table draws its topic with
//!   weight `m_k * f_k(v)` per existing topic and `gamma / V` for a fresh one.
//! - table move: detach one table and redraw its topic with weight
//!   `m_k * f_k(words)` per existing topic and `gamma` times the prior
//!   predictive of the table for a fresh one.
//!
//! The word's (or table's) own counts never contribute to any conditional:
//! removal always happens before weights are computed.
//!
//! A sweep applies the word move to every position in (document, position)
//! order, then the table move to every active table in (document, slot)
//! order. Sequential-prediction initialization seats words one at a time
//! through the same predictive weights.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::marginals::{log_f_table_cond, log_f_word_cond, log_prior_predictive_table};
use crate::state::{CrfState, TopicChoice, TopicLabel};

/// Counters from one full sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepReport {
    /// Word kernels applied (equals the number of seated words).
    pub word_updates: usize,
    /// Words that ended at a different table than they started.
    pub words_moved: usize,
    /// Word kernels that opened a new table.
    pub tables_opened: usize,
    /// Table kernels applied.
    pub table_updates: usize,
    /// Tables that ended in a different topic than they started.
    pub tables_moved: usize,
    /// Fresh topics created by either kernel.
    pub topics_created: usize,
}

/// Draws an index proportional to `exp(lw)` with max subtraction. At least
/// one weight must be finite.
pub(crate) fn sample_log_weights(lw: &[f64], rng: &mut impl Rng) -> usize {
    let max = lw.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    debug_assert!(max.is_finite(), "no finite weight in {lw:?}");
    let mut total = 0.0;
    let mut cumulative = Vec::with_capacity(lw.len());
    for &w in lw {
        total += (w - max).exp();
        cumulative.push(total);
    }
    let u = rng.random::<f64>() * total;
    cumulative.iter().position(|&c| u < c).unwrap_or(lw.len() - 1)
}

/// Log mass of the word `v` under a hypothetical new table: the mixture of
/// existing topics weighted by table counts plus a fresh topic.
fn log_new_table_mass(state: &CrfState, v: u32) -> f64 {
    let hp = state.hp();
    let mut mass = hp.gamma / hp.vocab_size as f64;
    for (_, m_k, stats) in state.topics_iter() {
        mass += m_k as f64 * log_f_word_cond(stats, v, hp).exp();
    }
    (mass / (state.m_total() as f64 + hp.gamma)).ln()
}

/// Log weights for the word kernel, computed with the word already unseated.
/// Returns the candidate table slots and one weight per slot plus a final
/// weight for opening a new table.
fn word_kernel_weights(state: &CrfState, doc: usize, v: u32) -> (Vec<usize>, Vec<f64>) {
    let hp = state.hp();
    let tables: Vec<usize> = state.doc_tables(doc).collect();
    let mut lw = Vec::with_capacity(tables.len() + 1);
    for &t in &tables {
        let k = state.table_topic(doc, t);
        lw.push(
            (state.table_size(doc, t) as f64).ln() + log_f_word_cond(state.topic_stats(k), v, hp),
        );
    }
    lw.push(hp.alpha0.ln() + log_new_table_mass(state, v));
    (tables, lw)
}

/// Log weights for the topic of a brand-new table holding only `v`.
/// Returns candidate labels and one weight per label plus a final weight for
/// a fresh topic.
fn new_table_topic_log_weights(state: &CrfState, v: u32) -> (Vec<TopicLabel>, Vec<f64>) {
    let hp = state.hp();
    let labels: Vec<TopicLabel> = state.topic_labels().collect();
    let mut lw = Vec::with_capacity(labels.len() + 1);
    for &k in &labels {
        lw.push(
            (state.topic_table_count(k) as f64).ln()
                + log_f_word_cond(state.topic_stats(k), v, hp),
        );
    }
    lw.push(hp.gamma.ln() - (hp.vocab_size as f64).ln());
    (labels, lw)
}

/// Samples the topic for a new table that will hold exactly one word of
/// term `v`.
pub fn sample_topic_for_new_table(
    state: &CrfState,
    v: u32,
    rng: &mut impl Rng,
) -> TopicChoice {
    let (labels, lw) = new_table_topic_log_weights(state, v);
    let idx = sample_log_weights(&lw, rng);
    if idx < labels.len() {
        TopicChoice::Existing(labels[idx])
    } else {
        TopicChoice::Fresh
    }
}

#[derive(Debug, Clone, Copy)]
struct WordMove {
    moved: bool,
    opened: bool,
    fresh_topic: bool,
}

/// Seats an unseated word through the predictive weights. `prev` is the slot
/// it sat at before (for move accounting), `None` during initialization.
fn place_word(
    state: &mut CrfState,
    doc: usize,
    word: usize,
    prev: Option<usize>,
    rng: &mut impl Rng,
) -> WordMove {
    let v = state.token(doc, word);
    let (tables, lw) = word_kernel_weights(state, doc, v);
    let idx = sample_log_weights(&lw, rng);
    if idx < tables.len() {
        let t = tables[idx];
        state.seat_word_existing(doc, word, t);
        WordMove { moved: prev != Some(t), opened: false, fresh_topic: false }
    } else {
        let choice = sample_topic_for_new_table(state, v, rng);
        state.seat_word_new_table(doc, word, choice);
        WordMove { moved: true, opened: true, fresh_topic: matches!(choice, TopicChoice::Fresh) }
    }
}

/// One word move: unseat, then reseat by the predictive weights.
pub fn sample_table(state: &mut CrfState, doc: usize, word: usize, rng: &mut impl Rng) {
    let prev = state.table_of_word(doc, word);
    state.unseat_word(doc, word);
    place_word(state, doc, word, prev, rng);
}

/// Result of one table move.
#[derive(Debug, Clone, Copy)]
pub struct TableMove {
    pub previous: TopicLabel,
    pub label: TopicLabel,
    pub fresh_topic: bool,
}

/// One table move: detach the table, then redraw its topic.
pub fn sample_topic_for_table(
    state: &mut CrfState,
    doc: usize,
    table: usize,
    rng: &mut impl Rng,
) -> TableMove {
    let previous = state.detach_table(doc, table);
    let hp = *state.hp();
    let words = state.table_words(doc, table).clone();
    let labels: Vec<TopicLabel> = state.topic_labels().collect();
    let mut lw = Vec::with_capacity(labels.len() + 1);
    for &k in &labels {
        lw.push(
            (state.topic_table_count(k) as f64).ln()
                + log_f_table_cond(state.topic_stats(k), &words, &hp),
        );
    }
    lw.push(hp.gamma.ln() + log_prior_predictive_table(&words, &hp));
    let idx = sample_log_weights(&lw, rng);
    let choice =
        if idx < labels.len() { TopicChoice::Existing(labels[idx]) } else { TopicChoice::Fresh };
    let label = state.attach_table(doc, table, choice);
    TableMove { previous, label, fresh_topic: matches!(choice, TopicChoice::Fresh) }
}

/// One full sweep: every word in (document, position) order, then every
/// active table in (document, slot) order.
pub fn gibbs_sweep(state: &mut CrfState, rng: &mut impl Rng) -> SweepReport {
    let mut rep = SweepReport::default();
    for doc in 0..state.num_docs() {
        let len = state.corpus().docs[doc].tokens.len();
        for word in 0..len {
            let prev = state.table_of_word(doc, word);
            debug_assert!(prev.is_some(), "sweep requires a fully seated state");
            state.unseat_word(doc, word);
            let mv = place_word(state, doc, word, prev, rng);
            rep.word_updates += 1;
            rep.words_moved += mv.moved as usize;
            rep.tables_opened += mv.opened as usize;
            rep.topics_created += mv.fresh_topic as usize;
        }
    }
    for tr in state.all_tables() {
        let mv = sample_topic_for_table(state, tr.doc, tr.table, rng);
        rep.table_updates += 1;
        rep.tables_moved += (mv.previous != mv.label) as usize;
        rep.topics_created += mv.fresh_topic as usize;
    }
    rep
}

/// Seats every word of a fully unseated state one at a time through the
/// predictive weights. Visits words in corpus order, or in a uniformly
/// shuffled order when `shuffle` is set.
pub fn init_sequential(state: &mut CrfState, shuffle: bool, rng: &mut impl Rng) {
    assert_eq!(state.m_total(), 0, "sequential initialization needs an unseated state");
    let mut order: Vec<(usize, usize)> = Vec::new();
    for doc in 0..state.num_docs() {
        for word in 0..state.corpus().docs[doc].tokens.len() {
            order.push((doc, word));
        }
    }
    if shuffle {
        order.shuffle(rng);
    }
    for (doc, word) in order {
        place_word(state, doc, word, None, rng);
    }
}
