//! Split-merge Metropolis-Hastings moves over the corpus-level partition.
//!
//! One move picks an ordered pair of distinct tables uniformly at random.
//! Tables sharing a topic anchor a split; tables in different topics anchor
//! a merge. Split membership is proposed by sequential allocation: the two
//! anchors seed the sides, the remaining tables of the topic are visited in
//! a uniformly random order, and each joins side `l` with probability
//! proportional to `m_l * f_l(tables words)`, where `m_l` counts tables
//! already on the side and `f_l` is the side's conditional word marginal.
//! A merge is deterministic, so its proposal mass is carried entirely by
//! the reverse move: the same allocation run with every choice forced to
//! reproduce the current two-topic assignment.
//!
//! The acceptance ratio combines the partition prior ratio, the word
//! marginal ratio, and the allocation probabilities. Both directions use
//! from-scratch marginal evaluations, so evaluating a split and the merge
//! that undoes it yields exactly opposite log ratios.

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::marginals::{log_f_full, log_f_table_cond, TopicStats};
use crate::state::{CrfState, TableRef, TopicChoice, TopicLabel};

/// Which side of a split a table belongs to; the first anchor always sits
/// on `First`, the second on `Second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Split,
    Merge,
}

/// A fully evaluated proposal. Everything needed to audit the acceptance
/// ratio is recorded: the anchors, the visit order with the side each table
/// landed on, and the four log terms separately.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub kind: MoveKind,
    pub anchors: (TableRef, TableRef),
    /// Topics involved before the move: one for a split, two for a merge.
    pub source_topics: Vec<TopicLabel>,
    /// Non-anchor tables in visit order, with the side each one joined.
    pub allocation: Vec<(TableRef, Side)>,
    /// Side membership, anchor first, then joiners in visit order.
    pub side1: Vec<TableRef>,
    pub side2: Vec<TableRef>,
    pub log_q_forward: f64,
    pub log_q_reverse: f64,
    pub log_prior_ratio: f64,
    pub log_likelihood_ratio: f64,
    /// Unclamped sum of the three ratio terms minus the forward mass.
    pub log_ratio: f64,
    /// `min(0, log_ratio)`.
    pub log_accept: f64,
}

#[derive(Debug)]
pub enum SmOutcome {
    /// Fewer than two tables exist; no move is defined.
    Skipped,
    Rejected(Proposal),
    Accepted(Proposal),
}

impl SmOutcome {
    pub fn accepted(&self) -> bool {
        matches!(self, SmOutcome::Accepted(_))
    }
}

fn lse2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Uniform ordered pair of distinct tables, or `None` with fewer than two.
pub fn select_two_tables(state: &CrfState, rng: &mut impl Rng) -> Option<(TableRef, TableRef)> {
    let all = state.all_tables();
    if all.len() < 2 {
        return None;
    }
    let i = rng.random_range(0..all.len());
    let mut j = rng.random_range(0..all.len() - 1);
    if j >= i {
        j += 1;
    }
    Some((all[i], all[j]))
}

struct Launch {
    stats1: TopicStats,
    stats2: TopicStats,
    m1: usize,
    m2: usize,
    log_q: f64,
    allocation: Vec<(TableRef, Side)>,
    side1: Vec<TableRef>,
    side2: Vec<TableRef>,
}

/// Runs the sequential allocation over `order`, seeding the sides with the
/// anchor tables. `choose` sees the normalized log probabilities of the two
/// sides and picks one; the accumulated log mass of the choices made is
/// returned as `log_q`.
fn allocate(
    state: &CrfState,
    anchors: (TableRef, TableRef),
    order: &[TableRef],
    mut choose: impl FnMut(f64, f64, TableRef) -> Side,
) -> Launch {
    let hp = *state.hp();
    let mut stats1 = TopicStats::new(hp.vocab_size);
    let mut stats2 = TopicStats::new(hp.vocab_size);
    stats1.add_table(state.table_words(anchors.0.doc, anchors.0.table), &hp);
    stats2.add_table(state.table_words(anchors.1.doc, anchors.1.table), &hp);
    let (mut m1, mut m2) = (1usize, 1usize);
    let mut log_q = 0.0;
    let mut allocation = Vec::with_capacity(order.len());
    let mut side1 = vec![anchors.0];
    let mut side2 = vec![anchors.1];
    for &tr in order {
        let words = state.table_words(tr.doc, tr.table);
        let lw1 = (m1 as f64).ln() + log_f_table_cond(&stats1, words, &hp);
        let lw2 = (m2 as f64).ln() + log_f_table_cond(&stats2, words, &hp);
        let norm = lse2(lw1, lw2);
        let side = choose(lw1 - norm, lw2 - norm, tr);
        match side {
            Side::First => {
                stats1.add_table(words, &hp);
                m1 += 1;
                log_q += lw1 - norm;
                side1.push(tr);
            }
            Side::Second => {
                stats2.add_table(words, &hp);
                m2 += 1;
                log_q += lw2 - norm;
                side2.push(tr);
            }
        }
        allocation.push((tr, side));
    }
    Launch { stats1, stats2, m1, m2, log_q, allocation, side1, side2 }
}

/// Log prior ratio for splitting one topic of `m1 + m2` tables into sides
/// of `m1` and `m2`.
fn split_log_prior_ratio(gamma: f64, m1: usize, m2: usize) -> f64 {
    gamma.ln() + ln_gamma(m1 as f64) + ln_gamma(m2 as f64) - ln_gamma((m1 + m2) as f64)
}

/// Split proposal with an explicit visit order over the non-anchor tables.
/// Both anchors must share a topic and `order` must list exactly that
/// topic's other tables.
pub fn propose_split_ordered(
    state: &CrfState,
    a1: TableRef,
    a2: TableRef,
    order: &[TableRef],
    rng: &mut impl Rng,
) -> Proposal {
    let k = state.table_topic(a1.doc, a1.table);
    assert_eq!(k, state.table_topic(a2.doc, a2.table), "split anchors must share a topic");
    assert_ne!(a1, a2, "anchors must be distinct tables");
    let launch = allocate(state, (a1, a2), order, |lp1, _, _| {
        if rng.random::<f64>() < lp1.exp() {
            Side::First
        } else {
            Side::Second
        }
    });
    debug_assert_eq!(launch.m1 + launch.m2, state.topic_table_count(k));
    let hp = state.hp();
    let log_prior_ratio = split_log_prior_ratio(hp.gamma, launch.m1, launch.m2);
    let log_likelihood_ratio = log_f_full(&launch.stats1, hp) + log_f_full(&launch.stats2, hp)
        - log_f_full(state.topic_stats(k), hp);
    let log_ratio = log_prior_ratio + log_likelihood_ratio - launch.log_q;
    Proposal {
        kind: MoveKind::Split,
        anchors: (a1, a2),
        source_topics: vec![k],
        allocation: launch.allocation,
        side1: launch.side1,
        side2: launch.side2,
        log_q_forward: launch.log_q,
        log_q_reverse: 0.0,
        log_prior_ratio,
        log_likelihood_ratio,
        log_ratio,
        log_accept: log_ratio.min(0.0),
    }
}

/// Split proposal with a uniformly random visit order.
pub fn propose_split(
    state: &CrfState,
    a1: TableRef,
    a2: TableRef,
    rng: &mut impl Rng,
) -> Proposal {
    let k = state.table_topic(a1.doc, a1.table);
    let mut order: Vec<TableRef> =
        state.tables_of_topic(k).into_iter().filter(|&t| t != a1 && t != a2).collect();
    order.shuffle(rng);
    propose_split_ordered(state, a1, a2, &order, rng)
}

/// Merge proposal with an explicit visit order. The move itself is
/// deterministic; the order only enters the reverse allocation, which is
/// forced to reproduce the current two-topic assignment. Anchors must sit
/// in different topics and `order` must list the remaining tables of both.
pub fn propose_merge_ordered(
    state: &CrfState,
    a1: TableRef,
    a2: TableRef,
    order: &[TableRef],
) -> Proposal {
    let k1 = state.table_topic(a1.doc, a1.table);
    let k2 = state.table_topic(a2.doc, a2.table);
    assert_ne!(k1, k2, "merge anchors must sit in different topics");
    let launch = allocate(state, (a1, a2), order, |_, _, tr| {
        if state.table_topic(tr.doc, tr.table) == k1 {
            Side::First
        } else {
            Side::Second
        }
    });
    debug_assert_eq!(launch.m1, state.topic_table_count(k1));
    debug_assert_eq!(launch.m2, state.topic_table_count(k2));
    let hp = state.hp();
    let mut merged = launch.stats1.clone();
    for &tr in &launch.side2 {
        merged.add_table(state.table_words(tr.doc, tr.table), hp);
    }
    let log_prior_ratio = -split_log_prior_ratio(hp.gamma, launch.m1, launch.m2);
    let log_likelihood_ratio = log_f_full(&merged, hp)
        - log_f_full(&launch.stats1, hp)
        - log_f_full(&launch.stats2, hp);
    let log_ratio = log_prior_ratio + log_likelihood_ratio + launch.log_q;
    Proposal {
        kind: MoveKind::Merge,
        anchors: (a1, a2),
        source_topics: vec![k1, k2],
        allocation: launch.allocation,
        side1: launch.side1,
        side2: launch.side2,
        log_q_forward: 0.0,
        log_q_reverse: launch.log_q,
        log_prior_ratio,
        log_likelihood_ratio,
        log_ratio,
        log_accept: log_ratio.min(0.0),
    }
}

/// Merge proposal with a uniformly random reverse visit order.
pub fn propose_merge(
    state: &CrfState,
    a1: TableRef,
    a2: TableRef,
    rng: &mut impl Rng,
) -> Proposal {
    let k1 = state.table_topic(a1.doc, a1.table);
    let k2 = state.table_topic(a2.doc, a2.table);
    let mut order: Vec<TableRef> = state
        .tables_of_topic(k1)
        .into_iter()
        .chain(state.tables_of_topic(k2))
        .filter(|&t| t != a1 && t != a2)
        .collect();
    order.shuffle(rng);
    propose_merge_ordered(state, a1, a2, &order)
}

/// Applies an accepted proposal. A split moves each side to its own fresh
/// topic; a merge moves both sides to one fresh topic. Returns the labels
/// created, first side first.
pub fn apply(state: &mut CrfState, proposal: &Proposal) -> Vec<TopicLabel> {
    match proposal.kind {
        MoveKind::Split => {
            let mut labels = Vec::with_capacity(2);
            for side in [&proposal.side1, &proposal.side2] {
                let first = side[0];
                let label = state.reassign_table_topic(first.doc, first.table, TopicChoice::Fresh);
                for &tr in &side[1..] {
                    state.reassign_table_topic(tr.doc, tr.table, TopicChoice::Existing(label));
                }
                labels.push(label);
            }
            labels
        }
        MoveKind::Merge => {
            let a1 = proposal.anchors.0;
            let label = state.reassign_table_topic(a1.doc, a1.table, TopicChoice::Fresh);
            for side in [&proposal.side1, &proposal.side2] {
                for &tr in side.iter().filter(|&&t| t != a1) {
                    state.reassign_table_topic(tr.doc, tr.table, TopicChoice::Existing(label));
                }
            }
            vec![label]
        }
    }
}

/// One complete split-merge step: select anchors, propose, accept or
/// reject. A rejected proposal leaves the state untouched.
pub fn sm_step(state: &mut CrfState, rng: &mut impl Rng) -> SmOutcome {
    let Some((a1, a2)) = select_two_tables(state, rng) else {
        return SmOutcome::Skipped;
    };
    let same = state.table_topic(a1.doc, a1.table) == state.table_topic(a2.doc, a2.table);
    let proposal = if same {
        propose_split(state, a1, a2, rng)
    } else {
        propose_merge(state, a1, a2, rng)
    };
    if rng.random::<f64>().ln() < proposal.log_accept {
        apply(state, &proposal);
        SmOutcome::Accepted(proposal)
    } else {
        SmOutcome::Rejected(proposal)
    }
}
