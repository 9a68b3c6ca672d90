//! Measurements over fitted states: per-word log probabilities, mode
//! comparison curves, topic popularity ratios, topic similarity, held-out
//! likelihood, and an exact posterior enumerator for tiny corpora.
//!
//! Everything here is read-only over a state snapshot; nothing mutates a
//! chain. The held-out evaluator works on frozen copies of the global
//! counts, so saved states are never touched.

use std::collections::BTreeMap;

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::corpus::Corpus;
use crate::gibbs::sample_log_weights;
use crate::marginals::{
    log_f_full, log_f_table_cond, log_f_word_cond, log_prior_predictive_table, TableWordVector,
    TopicStats,
};
use crate::seeded_rng;
use crate::state::{CrfState, HyperParams, StateDump, TopicLabel};

/// One iteration's worth of chain measurements, as written to `trace.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// Wall-clock milliseconds since the chain started.
    pub elapsed_ms: u64,
    pub num_topics: usize,
    pub m_total: usize,
    pub per_word_joint_lp: f64,
    pub per_word_cond_ll: f64,
    pub alpha0: f64,
    pub gamma: f64,
    pub sm_split_proposed: u64,
    pub sm_split_accepted: u64,
    pub sm_merge_proposed: u64,
    pub sm_merge_accepted: u64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "iter,elapsed_ms,num_topics,m_total,\
        per_word_joint_lp,per_word_cond_ll,alpha0,gamma,\
        sm_split_proposed,sm_split_accepted,sm_merge_proposed,sm_merge_accepted";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iter,
            self.elapsed_ms,
            self.num_topics,
            self.m_total,
            self.per_word_joint_lp,
            self.per_word_cond_ll,
            self.alpha0,
            self.gamma,
            self.sm_split_proposed,
            self.sm_split_accepted,
            self.sm_merge_proposed,
            self.sm_merge_accepted
        )
    }

    pub fn from_csv_row(line: &str) -> Result<Self, String> {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 12 {
            return Err(format!("expected 12 fields, got {}: {line}", parts.len()));
        }
        fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
            s.trim().parse().map_err(|_| format!("bad {what}: {s}"))
        }
        Ok(Self {
            iter: num(parts[0], "iter")?,
            elapsed_ms: num(parts[1], "elapsed_ms")?,
            num_topics: num(parts[2], "num_topics")?,
            m_total: num(parts[3], "m_total")?,
            per_word_joint_lp: num(parts[4], "per_word_joint_lp")?,
            per_word_cond_ll: num(parts[5], "per_word_cond_ll")?,
            alpha0: num(parts[6], "alpha0")?,
            gamma: num(parts[7], "gamma")?,
            sm_split_proposed: num(parts[8], "sm_split_proposed")?,
            sm_split_accepted: num(parts[9], "sm_split_accepted")?,
            sm_merge_proposed: num(parts[10], "sm_merge_proposed")?,
            sm_merge_accepted: num(parts[11], "sm_merge_accepted")?,
        })
    }
}

fn total_log_f_cached(state: &CrfState) -> f64 {
    state.topics_iter().map(|(_, _, s)| s.cached_log_f()).sum()
}

/// Per-word log joint probability of the current configuration: partition
/// prior times the collapsed word likelihood, divided by the corpus size.
/// Equal across topic relabelings. Uses the incrementally maintained
/// likelihood caches.
pub fn per_word_joint_lp(state: &CrfState) -> f64 {
    let n = state.corpus().num_tokens() as f64;
    (state.log_partition_prior() + total_log_f_cached(state)) / n
}

/// From-scratch twin of [`per_word_joint_lp`]; used to bound cache drift.
pub fn per_word_joint_lp_scratch(state: &CrfState) -> f64 {
    let n = state.corpus().num_tokens() as f64;
    let lf: f64 = state.topics_iter().map(|(_, _, s)| log_f_full(s, state.hp())).sum();
    (state.log_partition_prior() + lf) / n
}

/// Per-word collapsed log likelihood alone, without the partition prior.
pub fn per_word_cond_ll(state: &CrfState) -> f64 {
    total_log_f_cached(state) / state.corpus().num_tokens() as f64
}

/// How two chains' mode curves are placed on a common axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeAlignment {
    /// Iteration index; appropriate when iteration costs are comparable.
    Iteration,
    /// Wall-clock milliseconds.
    WallClock,
}

fn row_time(row: &TraceRow, align: TimeAlignment) -> f64 {
    match align {
        TimeAlignment::Iteration => row.iter as f64,
        TimeAlignment::WallClock => row.elapsed_ms as f64,
    }
}

/// `(time, running max of per_word_joint_lp)` pairs for one trace.
fn running_max(trace: &[TraceRow], align: TimeAlignment) -> Vec<(f64, f64)> {
    let mut best = f64::NEG_INFINITY;
    trace
        .iter()
        .map(|r| {
            best = best.max(r.per_word_joint_lp);
            (row_time(r, align), best)
        })
        .collect()
}

/// Best value at or before `t`, assuming `curve` is time-sorted.
fn max_up_to(curve: &[(f64, f64)], t: f64) -> Option<f64> {
    let mut out = None;
    for &(time, v) in curve {
        if time > t {
            break;
        }
        out = Some(v);
    }
    out
}

/// Difference of running-maximum mode curves: for each grid time, the best
/// per-word joint log probability the first trace has reached minus the
/// best the second has. The grid is the union of both traces' time stamps,
/// restricted to times where both curves are defined. Positive values mean
/// the first chain has found a better mode by that time.
pub fn mode_diff_series(
    trace_first: &[TraceRow],
    trace_second: &[TraceRow],
    align: TimeAlignment,
) -> Vec<(f64, f64)> {
    let a = running_max(trace_first, align);
    let b = running_max(trace_second, align);
    let mut grid: Vec<f64> =
        a.iter().chain(b.iter()).map(|&(t, _)| t).collect();
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
    grid.dedup();
    grid.into_iter()
        .filter_map(|t| match (max_up_to(&a, t), max_up_to(&b, t)) {
            (Some(ma), Some(mb)) => Some((t, ma - mb)),
            _ => None,
        })
        .collect()
}

/// Cumulative word-share of topics ordered by popularity. With `K` active
/// topics the result has `K` nondecreasing entries ending at exactly 1.
pub fn trace_ratios(state: &CrfState) -> Vec<f64> {
    let mut counts: Vec<u64> = state.topics_iter().map(|(_, _, s)| s.total()).collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Vec::new();
    }
    let mut acc = 0u64;
    counts
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / n as f64
        })
        .collect()
}

/// Cosine similarity of two nonnegative vectors; zero vectors give 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine of different-length vectors");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Cosine similarity of the smoothed term-count vectors of every unordered
/// topic pair, in ascending label order.
pub fn topic_cosine_similarities(state: &CrfState) -> Vec<(TopicLabel, TopicLabel, f64)> {
    let hp = state.hp();
    let labels: Vec<TopicLabel> = state.topic_labels().collect();
    let vectors: Vec<Vec<f64>> = labels
        .iter()
        .map(|&k| {
            let stats = state.topic_stats(k);
            (0..hp.vocab_size as u32).map(|v| stats.count(v) as f64 + hp.eta).collect()
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            out.push((labels[i], labels[j], cosine(&vectors[i], &vectors[j])));
        }
    }
    out
}

/// First-appearance relabeling: maps a sequence of arbitrary keys to
/// 0, 1, 2, ... in order of first occurrence.
fn first_appearance<T: Ord + Copy>(seq: &[T]) -> Vec<usize> {
    let mut map: BTreeMap<T, usize> = BTreeMap::new();
    seq.iter()
        .map(|&x| {
            let next = map.len();
            *map.entry(x).or_insert(next)
        })
        .collect()
}

/// Canonical text form of a fully seated configuration, identical across
/// table slot numbering and topic relabelings. Document blocks list each
/// word's table by first appearance; the trailing block lists each table's
/// topic by first appearance, tables taken in document order.
pub fn canonical_key(state: &CrfState) -> String {
    let mut doc_blocks = Vec::with_capacity(state.num_docs());
    let mut table_topics: Vec<TopicLabel> = Vec::new();
    for j in 0..state.num_docs() {
        let n = state.corpus().docs[j].tokens.len();
        let slots: Vec<usize> = (0..n)
            .map(|i| state.table_of_word(j, i).expect("canonical_key needs a fully seated state"))
            .collect();
        let canon = first_appearance(&slots);
        let mut seen: Vec<usize> = Vec::new();
        for &s in &slots {
            if !seen.contains(&s) {
                seen.push(s);
                table_topics.push(state.table_topic(j, s));
            }
        }
        doc_blocks
            .push(canon.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    }
    let topics = first_appearance(&table_topics);
    format!(
        "{}#{}",
        doc_blocks.join("|"),
        topics.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    )
}

/// All set partitions of `n` items as restricted growth strings: block of
/// item 0 is 0, and each later item uses an existing block or the next
/// unused index.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for b in 0..=used {
            prefix.push(b);
            rec(prefix, used.max(b + 1), n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), 0, n, &mut out);
    out
}

const ENUMERATION_WORD_LIMIT: usize = 6;

/// Exact posterior over canonical configurations by brute-force enumeration
/// of every table partition per document and every topic partition of the
/// resulting tables. Keys match [`canonical_key`]. Only feasible for very
/// small corpora; the word count is capped at 6.
pub fn exact_posterior_tiny(
    corpus: &Corpus,
    hp: &HyperParams,
) -> Result<BTreeMap<String, f64>, String> {
    hp.validate().map_err(|e| e.to_string())?;
    if corpus.vocab_size != hp.vocab_size {
        return Err(format!(
            "corpus vocabulary {} does not match hyperparameters {}",
            corpus.vocab_size, hp.vocab_size
        ));
    }
    let total = corpus.num_tokens();
    if total > ENUMERATION_WORD_LIMIT {
        return Err(format!(
            "enumeration covers at most {ENUMERATION_WORD_LIMIT} words, corpus has {total}"
        ));
    }

    let doc_partitions: Vec<Vec<Vec<usize>>> =
        corpus.docs.iter().map(|d| set_partitions(d.tokens.len())).collect();
    let log_alpha0 = hp.alpha0.ln();
    let log_gamma = hp.gamma.ln();

    let mut entries: Vec<(String, f64)> = Vec::new();
    let mut choice = vec![0usize; corpus.docs.len()];
    loop {
        // Document-level prior and the table list for this combination.
        let mut log_doc_prior = 0.0;
        let mut tables: Vec<TableWordVector> = Vec::new();
        let mut doc_blocks: Vec<String> = Vec::new();
        for (j, doc) in corpus.docs.iter().enumerate() {
            let part = &doc_partitions[j][choice[j]];
            let num_blocks = part.iter().max().map(|&b| b + 1).unwrap_or(0);
            let mut members: Vec<TableWordVector> =
                (0..num_blocks).map(|_| TableWordVector::new()).collect();
            for (pos, &b) in part.iter().enumerate() {
                members[b].add(doc.tokens[pos]);
            }
            log_doc_prior += num_blocks as f64 * log_alpha0;
            for m in &members {
                log_doc_prior += ln_gamma(m.total() as f64);
            }
            log_doc_prior -= ln_gamma(doc.tokens.len() as f64 + hp.alpha0) - ln_gamma(hp.alpha0);
            tables.extend(members);
            doc_blocks
                .push(part.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
        }
        let doc_key = doc_blocks.join("|");

        for topic_part in set_partitions(tables.len()) {
            let num_topics = topic_part.iter().max().map(|&b| b + 1).unwrap_or(0);
            let mut sizes = vec![0usize; num_topics];
            let mut stats: Vec<TopicStats> =
                (0..num_topics).map(|_| TopicStats::new(hp.vocab_size)).collect();
            for (t, &k) in topic_part.iter().enumerate() {
                sizes[k] += 1;
                stats[k].add_table(&tables[t], hp);
            }
            let mut log_w = log_doc_prior + num_topics as f64 * log_gamma;
            for &m_k in &sizes {
                log_w += ln_gamma(m_k as f64);
            }
            log_w -= ln_gamma(tables.len() as f64 + hp.gamma) - ln_gamma(hp.gamma);
            for s in &stats {
                log_w += log_f_full(s, hp);
            }
            let key = format!(
                "{doc_key}#{}",
                topic_part.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
            );
            entries.push((key, log_w));
        }

        // Odometer over per-document partition choices.
        let mut j = 0;
        loop {
            if j == choice.len() {
                break;
            }
            choice[j] += 1;
            if choice[j] < doc_partitions[j].len() {
                break;
            }
            choice[j] = 0;
            j += 1;
        }
        if j == choice.len() {
            break;
        }
    }

    let max = entries.iter().map(|&(_, w)| w).fold(f64::NEG_INFINITY, f64::max);
    let total_mass: f64 = entries.iter().map(|&(_, w)| (w - max).exp()).sum();
    let mut out = BTreeMap::new();
    for (key, w) in entries {
        *out.entry(key).or_insert(0.0) += (w - max).exp() / total_mass;
    }
    Ok(out)
}

/// Immutable snapshot of a fitted model's global quantities: per-topic term
/// counts and table counts, plus the hyperparameters. Held-out evaluation
/// reads these and never writes.
#[derive(Debug, Clone)]
pub struct FrozenModel {
    hp: HyperParams,
    m_total: usize,
    /// `(table count, term counts)` per topic; labels are irrelevant here.
    topics: Vec<(usize, TopicStats)>,
}

impl FrozenModel {
    pub fn from_state(state: &CrfState) -> Self {
        let topics = state.topics_iter().map(|(_, m, s)| (m, s.clone())).collect();
        Self { hp: *state.hp(), m_total: state.m_total(), topics }
    }

    pub fn from_dump(dump: &StateDump) -> Result<Self, String> {
        let hp = HyperParams {
            alpha0: dump.alpha0,
            gamma: dump.gamma,
            eta: dump.eta,
            vocab_size: dump.vocab_size,
        };
        hp.validate().map_err(|e| e.to_string())?;
        let mut table_counts: BTreeMap<TopicLabel, usize> = BTreeMap::new();
        for doc in &dump.table_topics {
            for &(_, k) in doc {
                *table_counts.entry(k).or_insert(0) += 1;
            }
        }
        let mut topics = Vec::with_capacity(dump.topic_counts.len());
        for (k, counts) in &dump.topic_counts {
            let stats = TopicStats::from_counts(hp.vocab_size, counts.iter().copied(), &hp)
                .map_err(|e| format!("topic {k}: {e}"))?;
            let m_k = table_counts.remove(k).unwrap_or(0);
            if m_k == 0 {
                return Err(format!("topic {k} stores counts but owns no tables"));
            }
            topics.push((m_k, stats));
        }
        if let Some((&k, _)) = table_counts.first_key_value() {
            return Err(format!("tables reference topic {k} but no counts are stored for it"));
        }
        let m_total = topics.iter().map(|&(m, _)| m).sum();
        Ok(Self { hp, m_total, topics })
    }

    pub fn hp(&self) -> &HyperParams {
        &self.hp
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }
}

/// Settings for held-out evaluation.
#[derive(Debug, Clone, Copy)]
pub struct HeldoutConfig {
    /// Document-local Gibbs sweeps per document; predictive probabilities
    /// are averaged over the last half.
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for HeldoutConfig {
    fn default() -> Self {
        Self { sweeps: 20, seed: 0 }
    }
}

/// Seed material derived from a document's content, so evaluation order
/// never affects the result.
fn content_seed(tokens: &[u32]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &t in tokens {
        for b in t.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Document-local seating over a frozen global model. Local words stack on
/// private clones of the frozen topic counts; the model itself is never
/// modified.
struct DocEval<'a> {
    model: &'a FrozenModel,
    /// Frozen counts plus this document's local words, one per topic known
    /// locally; entries past the frozen topics are document-local ones.
    combined: Vec<TopicStats>,
    local_tables: Vec<usize>,
    tables: Vec<(usize, TableWordVector)>,
    seat: Vec<usize>,
    seated: usize,
}

const UNSEATED_LOCAL: usize = usize::MAX;

impl<'a> DocEval<'a> {
    fn new(model: &'a FrozenModel, num_words: usize) -> Self {
        Self {
            model,
            combined: model.topics.iter().map(|(_, s)| s.clone()).collect(),
            local_tables: vec![0; model.topics.len()],
            tables: Vec::new(),
            seat: vec![UNSEATED_LOCAL; num_words],
            seated: 0,
        }
    }

    fn hp(&self) -> &HyperParams {
        &self.model.hp
    }

    /// Frozen table count plus local tables for topic index `l`.
    fn m_eff(&self, l: usize) -> usize {
        let frozen = self.model.topics.get(l).map(|&(m, _)| m).unwrap_or(0);
        frozen + self.local_tables[l]
    }

    fn m_eff_total(&self) -> usize {
        self.model.m_total + self.tables.len()
    }

    /// Probability of term `v` for a word opening a new table: topic mixture
    /// over effective table counts plus the fresh-topic floor.
    fn new_table_mass(&self, v: u32) -> f64 {
        let hp = self.hp();
        let mut mass = hp.gamma / hp.vocab_size as f64;
        for l in 0..self.combined.len() {
            let m = self.m_eff(l);
            if m > 0 {
                mass += m as f64 * log_f_word_cond(&self.combined[l], v, hp).exp();
            }
        }
        mass / (self.m_eff_total() as f64 + hp.gamma)
    }

    /// Predictive probability of term `v` for the next word of this
    /// document, given the current seating.
    fn predictive(&self, v: u32) -> f64 {
        let hp = self.hp();
        let mut mass = hp.alpha0 * self.new_table_mass(v);
        for &(topic, ref words) in &self.tables {
            mass +=
                words.total() as f64 * log_f_word_cond(&self.combined[topic], v, hp).exp();
        }
        mass / (self.seated as f64 + hp.alpha0)
    }

    fn unseat(&mut self, i: usize, v: u32) {
        let t = self.seat[i];
        assert_ne!(t, UNSEATED_LOCAL);
        self.seat[i] = UNSEATED_LOCAL;
        self.seated -= 1;
        let topic = self.tables[t].0;
        self.tables[t].1.remove(v);
        self.combined[topic].remove_word(v, &self.model.hp);
        if self.tables[t].1.is_empty() {
            self.local_tables[topic] -= 1;
            self.tables.remove(t);
            for s in self.seat.iter_mut() {
                if *s != UNSEATED_LOCAL && *s > t {
                    *s -= 1;
                }
            }
        }
    }

    /// Seats word `i` by the document-local conditional.
    fn reseat(&mut self, i: usize, v: u32, rng: &mut impl Rng) {
        let hp = *self.hp();
        let mut lw: Vec<f64> = self
            .tables
            .iter()
            .map(|&(topic, ref words)| {
                (words.total() as f64).ln() + log_f_word_cond(&self.combined[topic], v, &hp)
            })
            .collect();
        lw.push(hp.alpha0.ln() + self.new_table_mass(v).ln());
        let pick = sample_log_weights(&lw, rng);
        let topic = if pick < self.tables.len() {
            let topic = self.tables[pick].0;
            self.tables[pick].1.add(v);
            self.seat[i] = pick;
            topic
        } else {
            let topic = self.sample_topic_for_new_word(v, rng);
            self.tables.push((topic, TableWordVector::singleton(v)));
            self.local_tables[topic] += 1;
            self.seat[i] = self.tables.len() - 1;
            topic
        };
        self.combined[topic].add_word(v, &hp);
        self.seated += 1;
    }

    fn sample_topic_for_new_word(&mut self, v: u32, rng: &mut impl Rng) -> usize {
        let hp = self.hp();
        let mut candidates = Vec::new();
        let mut lw = Vec::new();
        for l in 0..self.combined.len() {
            let m = self.m_eff(l);
            if m > 0 {
                candidates.push(l);
                lw.push((m as f64).ln() + log_f_word_cond(&self.combined[l], v, hp));
            }
        }
        lw.push(hp.gamma.ln() - (hp.vocab_size as f64).ln());
        let pick = sample_log_weights(&lw, rng);
        if pick < candidates.len() {
            candidates[pick]
        } else {
            self.push_fresh_topic()
        }
    }

    fn push_fresh_topic(&mut self) -> usize {
        self.combined.push(TopicStats::new(self.model.hp.vocab_size));
        self.local_tables.push(0);
        self.combined.len() - 1
    }

    /// Resamples the topic of local table `t` from the frozen corpus-level
    /// conditional.
    fn resample_table_topic(&mut self, t: usize, rng: &mut impl Rng) {
        let hp = self.model.hp;
        let old = self.tables[t].0;
        let words = self.tables[t].1.clone();
        self.combined[old].remove_table(&words, &hp);
        self.local_tables[old] -= 1;
        let mut candidates = Vec::new();
        let mut lw = Vec::new();
        for l in 0..self.combined.len() {
            let m = self.m_eff(l);
            if m > 0 {
                candidates.push(l);
                lw.push((m as f64).ln() + log_f_table_cond(&self.combined[l], &words, &hp));
            }
        }
        lw.push(hp.gamma.ln() + log_prior_predictive_table(&words, &hp));
        let pick = sample_log_weights(&lw, rng);
        let target =
            if pick < candidates.len() { candidates[pick] } else { self.push_fresh_topic() };
        self.combined[target].add_table(&words, &hp);
        self.local_tables[target] += 1;
        self.tables[t].0 = target;
    }
}

/// Mean leave-one-out predictive probability per word position, averaged
/// over the last half of `sweeps`.
fn eval_doc(model: &FrozenModel, tokens: &[u32], sweeps: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut local = DocEval::new(model, tokens.len());
    for (i, &v) in tokens.iter().enumerate() {
        local.reseat(i, v, rng);
    }
    let first_recorded = sweeps / 2;
    let recorded = (sweeps - first_recorded) as f64;
    let mut probs = vec![0.0; tokens.len()];
    for sweep in 0..sweeps {
        for (i, &v) in tokens.iter().enumerate() {
            local.unseat(i, v);
            if sweep >= first_recorded {
                probs[i] += local.predictive(v);
            }
            local.reseat(i, v, rng);
        }
        for t in 0..local.tables.len() {
            local.resample_table_topic(t, rng);
        }
    }
    for p in probs.iter_mut() {
        *p /= recorded;
    }
    probs
}

/// Per-word held-out log likelihood of a test corpus under an ensemble of
/// frozen states: each document is scored by document-local Gibbs against
/// each state, predictive probabilities are averaged over states, and the
/// mean log is reported. Deterministic given the config seed, independent
/// of document order.
pub fn heldout_per_word_ll(
    models: &[FrozenModel],
    test: &Corpus,
    cfg: &HeldoutConfig,
) -> Result<f64, String> {
    if models.is_empty() {
        return Err("held-out evaluation needs at least one saved state".into());
    }
    if cfg.sweeps == 0 {
        return Err("held-out evaluation needs at least one sweep".into());
    }
    for m in models {
        if m.hp.vocab_size != test.vocab_size {
            return Err(format!(
                "model vocabulary {} does not match test corpus {}",
                m.hp.vocab_size, test.vocab_size
            ));
        }
    }
    let mut total = 0.0;
    for doc in &test.docs {
        let doc_seed = cfg.seed ^ content_seed(&doc.tokens);
        let mut mean = vec![0.0; doc.tokens.len()];
        for (idx, model) in models.iter().enumerate() {
            let mut rng =
                seeded_rng(doc_seed ^ (idx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let probs = eval_doc(model, &doc.tokens, cfg.sweeps, &mut rng);
            for (m, p) in mean.iter_mut().zip(probs) {
                *m += p;
            }
        }
        for m in mean {
            total += (m / models.len() as f64).ln();
        }
    }
    Ok(total / test.num_tokens() as f64)
}
