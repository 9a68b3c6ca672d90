//! Driver layer for the `hdp` binary: chain scheduling, diagnostics file
//! output, and the fit/eval/synth/validate entry points. The modeling code
//! lives in `hdp_core`; everything here is orchestration and I/O.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use hdp_core::corpus::{load_corpus, split_train_test, write_corpus, Corpus, Vocabulary};
use hdp_core::diagnostics::{
    heldout_per_word_ll, mode_diff_series, per_word_cond_ll, per_word_joint_lp,
    topic_cosine_similarities, trace_ratios, FrozenModel, HeldoutConfig, TimeAlignment, TraceRow,
};
use hdp_core::gibbs::{gibbs_sweep, init_sequential};
use hdp_core::hyper::{resample_alpha0, resample_gamma, GammaPrior};
use hdp_core::seeded_rng;
use hdp_core::splitmerge::{sm_step, MoveKind, SmOutcome};
use hdp_core::state::{CrfState, HyperParams, StateDump, TopicLabel};
use hdp_core::synth::{generate, SynthConfig};

/// Whether a concentration parameter stays fixed or is resampled under a
/// Gamma prior after every sweep.
#[derive(Debug, Clone, Copy)]
pub enum HyperSetting {
    Fixed(f64),
    Resampled { init: f64, prior: GammaPrior },
}

impl HyperSetting {
    pub fn resampled_default() -> Self {
        HyperSetting::Resampled { init: 1.0, prior: GammaPrior::new(1.0, 1.0) }
    }

    fn initial(&self) -> f64 {
        match *self {
            HyperSetting::Fixed(v) => v,
            HyperSetting::Resampled { init, .. } => init,
        }
    }
}

/// Everything one fit run needs beyond the corpus itself.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub eta: f64,
    pub alpha0: HyperSetting,
    pub gamma: HyperSetting,
    pub max_iters: usize,
    pub sm_enabled: bool,
    /// Split-merge moves run while `iter < sm_iters`.
    pub sm_iters: usize,
    pub sm_per_iter: usize,
    pub seed: u64,
    pub num_chains: usize,
    /// Snapshot cadence in iterations; 0 keeps only the final state.
    pub save_every: usize,
    pub shuffle_init: bool,
    /// Fraction of documents held out as a test set before fitting.
    pub holdout_fraction: Option<f64>,
    pub time_alignment: TimeAlignment,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            eta: 0.5,
            alpha0: HyperSetting::resampled_default(),
            gamma: HyperSetting::resampled_default(),
            max_iters: 500,
            sm_enabled: true,
            sm_iters: 50,
            sm_per_iter: 1,
            seed: 0,
            num_chains: 1,
            save_every: 100,
            shuffle_init: false,
            holdout_fraction: None,
            time_alignment: TimeAlignment::WallClock,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            bail!("max_iters must be positive");
        }
        if self.num_chains == 0 {
            bail!("num_chains must be at least 1");
        }
        if self.sm_enabled && self.sm_iters > self.max_iters {
            bail!("sm_iters ({}) exceeds max_iters ({})", self.sm_iters, self.max_iters);
        }
        if self.sm_enabled && self.sm_per_iter == 0 {
            bail!("sm_per_iter must be positive when split-merge is on");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            bail!("eta must be positive, got {}", self.eta);
        }
        for (name, s) in [("alpha0", &self.alpha0), ("gamma", &self.gamma)] {
            let v = s.initial();
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must start positive, got {v}");
            }
        }
        if let Some(f) = self.holdout_fraction {
            if !(f > 0.0 && f < 1.0) {
                bail!("holdout fraction must lie strictly between 0 and 1, got {f}");
            }
        }
        Ok(())
    }
}

/// Everything a finished chain produced, kept in memory so tests can
/// inspect results without re-reading files.
pub struct ChainOutput {
    pub chain: usize,
    pub trace: Vec<TraceRow>,
    /// Per iteration: cumulative topic popularity ratios.
    pub ratios: Vec<(usize, Vec<f64>)>,
    /// Snapshots at the save cadence; always includes the final iteration.
    pub saved: Vec<(usize, StateDump)>,
    pub final_state: CrfState,
}

/// Runs one chain to completion. The chain index offsets the base seed, so
/// chains are independent of how many run alongside.
pub fn run_chain(corpus: Arc<Corpus>, opts: &FitOptions, chain: usize) -> Result<ChainOutput> {
    let hp = HyperParams {
        alpha0: opts.alpha0.initial(),
        gamma: opts.gamma.initial(),
        eta: opts.eta,
        vocab_size: corpus.vocab_size,
    };
    let mut state = CrfState::new_unseated(corpus, hp)
        .map_err(|e| anyhow!("cannot initialize state: {e}"))?;
    let mut rng = seeded_rng(opts.seed.wrapping_add(chain as u64));
    init_sequential(&mut state, opts.shuffle_init, &mut rng);

    let start = Instant::now();
    let mut trace = Vec::with_capacity(opts.max_iters);
    let mut ratios = Vec::with_capacity(opts.max_iters);
    let mut saved = Vec::new();
    let (mut split_prop, mut split_acc, mut merge_prop, mut merge_acc) = (0u64, 0u64, 0u64, 0u64);

    for iter in 0..opts.max_iters {
        gibbs_sweep(&mut state, &mut rng);
        if let HyperSetting::Resampled { prior, .. } = &opts.alpha0 {
            let v = resample_alpha0(&state, prior, &mut rng);
            state.set_alpha0(v);
        }
        if let HyperSetting::Resampled { prior, .. } = &opts.gamma {
            let v = resample_gamma(&state, prior, &mut rng);
            state.set_gamma(v);
        }
        if opts.sm_enabled && iter < opts.sm_iters {
            for _ in 0..opts.sm_per_iter {
                match sm_step(&mut state, &mut rng) {
                    SmOutcome::Skipped => {}
                    SmOutcome::Rejected(p) => match p.kind {
                        MoveKind::Split => split_prop += 1,
                        MoveKind::Merge => merge_prop += 1,
                    },
                    SmOutcome::Accepted(p) => match p.kind {
                        MoveKind::Split => {
                            split_prop += 1;
                            split_acc += 1;
                        }
                        MoveKind::Merge => {
                            merge_prop += 1;
                            merge_acc += 1;
                        }
                    },
                }
            }
        }
        trace.push(TraceRow {
            iter,
            elapsed_ms: start.elapsed().as_millis() as u64,
            num_topics: state.num_topics(),
            m_total: state.m_total(),
            per_word_joint_lp: per_word_joint_lp(&state),
            per_word_cond_ll: per_word_cond_ll(&state),
            alpha0: state.hp().alpha0,
            gamma: state.hp().gamma,
            sm_split_proposed: split_prop,
            sm_split_accepted: split_acc,
            sm_merge_proposed: merge_prop,
            sm_merge_accepted: merge_acc,
        });
        ratios.push((iter, trace_ratios(&state)));
        #[cfg(debug_assertions)]
        {
            let violations = state.validate();
            assert!(violations.is_empty(), "chain {chain} iteration {iter}: {violations:?}");
        }
        if opts.save_every > 0 && (iter + 1) % opts.save_every == 0 && iter + 1 < opts.max_iters
        {
            saved.push((iter, state.to_dump()));
        }
    }
    saved.push((opts.max_iters - 1, state.to_dump()));
    Ok(ChainOutput { chain, trace, ratios, saved, final_state: state })
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let file =
        fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(std::io::BufWriter::new(file))
}

fn topic_table_counts(dump: &StateDump) -> std::collections::BTreeMap<TopicLabel, usize> {
    let mut counts = std::collections::BTreeMap::new();
    for doc in &dump.table_topics {
        for &(_, k) in doc {
            *counts.entry(k).or_insert(0) += 1;
        }
    }
    counts
}

/// Top terms per topic, from a snapshot dump.
fn write_topics_file(path: &Path, dump: &StateDump, vocab: &Vocabulary) -> Result<()> {
    const TOP_TERMS: usize = 20;
    let tables = topic_table_counts(dump);
    let mut out = create_file(path)?;
    for (label, counts) in &dump.topic_counts {
        let total: u64 = counts.iter().map(|&(_, c)| c as u64).sum();
        let m_k = tables.get(label).copied().unwrap_or(0);
        writeln!(out, "topic {label} tables={m_k} words={total}")?;
        let mut ranked = counts.clone();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(term, count) in ranked.iter().take(TOP_TERMS) {
            writeln!(out, "  {} {}", vocab.term(term as usize), count)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes one chain's files under `dir`: trace.csv, ratios.csv,
/// similarity.csv, per-snapshot topics-<iter>.txt and state-<iter>.json,
/// and state-final.json.
pub fn write_chain_outputs(dir: &Path, out: &ChainOutput, vocab: &Vocabulary) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;

    let mut trace = create_file(&dir.join("trace.csv"))?;
    writeln!(trace, "{}", TraceRow::CSV_HEADER)?;
    for row in &out.trace {
        writeln!(trace, "{}", row.to_csv_row())?;
    }

    let mut ratios = create_file(&dir.join("ratios.csv"))?;
    writeln!(ratios, "iter,cumulative_ratios")?;
    for (iter, rs) in &out.ratios {
        let joined: Vec<String> = rs.iter().map(f64::to_string).collect();
        writeln!(ratios, "{iter},{}", joined.join(","))?;
    }

    let mut sim = create_file(&dir.join("similarity.csv"))?;
    writeln!(sim, "topic_a,topic_b,cosine")?;
    for (a, b, c) in topic_cosine_similarities(&out.final_state) {
        writeln!(sim, "{a},{b},{c}")?;
    }

    for (iter, dump) in &out.saved {
        write_topics_file(&dir.join(format!("topics-{iter}.txt")), dump, vocab)?;
        dump.save_json(&dir.join(format!("state-{iter}.json")))
            .map_err(|e| anyhow!("cannot save snapshot: {e}"))?;
    }
    let (_, final_dump) = out.saved.last().expect("chain always saves its final state");
    final_dump
        .save_json(&dir.join("state-final.json"))
        .map_err(|e| anyhow!("cannot save final state: {e}"))?;
    Ok(())
}

/// Largest term id referenced by an LDA-C file, for running without an
/// explicit vocabulary.
fn scan_max_term_id(path: &Path) -> Result<usize> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut max_id = None;
    for line in text.lines() {
        for pair in line.split_whitespace().skip(1) {
            if let Some((id, _)) = pair.split_once(':') {
                if let Ok(id) = id.parse::<usize>() {
                    max_id = Some(max_id.map_or(id, |m: usize| m.max(id)));
                }
            }
        }
    }
    max_id.ok_or_else(|| anyhow!("{} contains no term:count pairs", path.display()))
}

/// Loads a corpus with an explicit vocabulary file, a fallback size, or a
/// size scanned from the data, in that order of preference.
pub fn load_corpus_auto(
    corpus_path: &Path,
    vocab_path: Option<&Path>,
    fallback_vocab_size: Option<usize>,
) -> Result<(Corpus, Vocabulary)> {
    let vocab = match (vocab_path, fallback_vocab_size) {
        (Some(p), _) => Vocabulary::from_file(p)
            .map_err(|e| anyhow!("cannot load vocabulary {}: {e}", p.display()))?,
        (None, Some(size)) => Vocabulary::numbered(size),
        (None, None) => Vocabulary::numbered(scan_max_term_id(corpus_path)? + 1),
    };
    let corpus = load_corpus(corpus_path, &vocab)
        .map_err(|e| anyhow!("cannot load corpus {}: {e}", corpus_path.display()))?;
    Ok((corpus, vocab))
}

/// Results of a full fit, with file outputs already written.
pub struct FitArtifacts {
    pub chains: Vec<ChainOutput>,
    pub test_path: Option<PathBuf>,
}

fn write_run_config(path: &Path, opts: &FitOptions, corpus_path: &Path) -> Result<()> {
    let mut out = create_file(path)?;
    writeln!(out, "corpus={}", corpus_path.display())?;
    writeln!(out, "eta={}", opts.eta)?;
    for (name, s) in [("alpha0", &opts.alpha0), ("gamma", &opts.gamma)] {
        match s {
            HyperSetting::Fixed(v) => writeln!(out, "{name}=fixed:{v}")?,
            HyperSetting::Resampled { init, prior } => writeln!(
                out,
                "{name}=resampled:init={init},shape={},scale={}",
                prior.shape, prior.scale
            )?,
        }
    }
    writeln!(out, "max_iters={}", opts.max_iters)?;
    writeln!(out, "sm_enabled={}", opts.sm_enabled)?;
    writeln!(out, "sm_iters={}", opts.sm_iters)?;
    writeln!(out, "sm_per_iter={}", opts.sm_per_iter)?;
    writeln!(out, "seed={}", opts.seed)?;
    writeln!(out, "num_chains={}", opts.num_chains)?;
    writeln!(out, "save_every={}", opts.save_every)?;
    writeln!(out, "shuffle_init={}", opts.shuffle_init)?;
    if let Some(f) = opts.holdout_fraction {
        writeln!(out, "holdout_fraction={f}")?;
    }
    let align = match opts.time_alignment {
        TimeAlignment::WallClock => "wallclock",
        TimeAlignment::Iteration => "iteration",
    };
    writeln!(out, "time_alignment={align}")?;
    Ok(())
}

/// Fits `num_chains` chains and writes per-chain diagnostics under
/// `output_dir/chain-<n>/`. With a holdout fraction, the split corpora are
/// written as train.dat and test.dat and only the training half is fitted.
pub fn run_fit(
    corpus_path: &Path,
    vocab_path: Option<&Path>,
    output_dir: &Path,
    opts: &FitOptions,
) -> Result<FitArtifacts> {
    opts.validate()?;
    let (corpus, vocab) = load_corpus_auto(corpus_path, vocab_path, None)?;
    fs::create_dir_all(output_dir)
        .with_context(|| format!("cannot create {}", output_dir.display()))?;
    write_run_config(&output_dir.join("run-config.txt"), opts, corpus_path)?;

    let (train, test_path) = match opts.holdout_fraction {
        Some(holdout) => {
            // A salted stream keeps the split independent of chain 0's.
            let mut rng = seeded_rng(opts.seed ^ 0x73706c6974);
            let (train, test, train_idx, test_idx) =
                split_train_test(&corpus, 1.0 - holdout, &mut rng)
                    .map_err(|e| anyhow!("cannot split corpus: {e}"))?;
            let train_path = output_dir.join("train.dat");
            let test_file = output_dir.join("test.dat");
            write_corpus(&train, &train_path).map_err(|e| anyhow!("{e}"))?;
            write_corpus(&test, &test_file).map_err(|e| anyhow!("{e}"))?;
            let mut split = create_file(&output_dir.join("split.csv"))?;
            writeln!(split, "role,original_doc")?;
            for i in train_idx {
                writeln!(split, "train,{i}")?;
            }
            for i in test_idx {
                writeln!(split, "test,{i}")?;
            }
            (Arc::new(train), Some(test_file))
        }
        None => (Arc::new(corpus), None),
    };

    let chains: Vec<ChainOutput> = (0..opts.num_chains)
        .into_par_iter()
        .map(|c| run_chain(train.clone(), opts, c))
        .collect::<Result<_>>()?;
    for out in &chains {
        write_chain_outputs(&output_dir.join(format!("chain-{}", out.chain)), out, &vocab)?;
        let last = out.trace.last().expect("max_iters is positive");
        println!(
            "chain {}: {} topics, {} tables, per-word lp {:.4} after {} iterations ({} ms)",
            out.chain,
            last.num_topics,
            last.m_total,
            last.per_word_joint_lp,
            opts.max_iters,
            last.elapsed_ms
        );
    }

    // Mode comparison of extra random starts against chain 0.
    for out in chains.iter().skip(1) {
        let curve =
            mode_diff_series(&out.trace, &chains[0].trace, opts.time_alignment);
        let path = output_dir.join(format!("mode-diff-chain{}-vs-chain0.csv", out.chain));
        let mut file = create_file(&path)?;
        writeln!(file, "time,diff")?;
        for (t, y) in curve {
            writeln!(file, "{t},{y}")?;
        }
    }
    Ok(FitArtifacts { chains, test_path })
}

/// Collects state snapshot files: explicit files are taken as-is,
/// directories are scanned recursively for `state-*.json`. Sorted for
/// reproducibility; `state-final.json` is skipped when scanning so the
/// final snapshot is not double counted.
pub fn collect_state_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn scan(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
        for entry in
            fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))?
        {
            let path = entry?.path();
            if path.is_dir() {
                scan(&path, found)?;
            } else if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                if name.starts_with("state-") && name.ends_with(".json") {
                    if name != "state-final.json" {
                        found.push(path);
                    }
                }
            }
        }
        Ok(())
    }
    let mut found = Vec::new();
    for p in paths {
        if p.is_dir() {
            scan(p, &mut found)?;
        } else {
            found.push(p.clone());
        }
    }
    found.sort();
    if found.is_empty() {
        bail!("no state files found");
    }
    Ok(found)
}

/// Scores a test corpus against saved states and writes `heldout.txt`
/// under `output_dir`. Purely read-only over the states.
pub fn run_eval(
    state_paths: &[PathBuf],
    test_path: &Path,
    vocab_path: Option<&Path>,
    sweeps: usize,
    seed: u64,
    output_dir: &Path,
) -> Result<f64> {
    let files = collect_state_files(state_paths)?;
    let mut models = Vec::with_capacity(files.len());
    for f in &files {
        let dump = StateDump::load_json(f)
            .map_err(|e| anyhow!("cannot load state {}: {e}", f.display()))?;
        models.push(
            FrozenModel::from_dump(&dump)
                .map_err(|e| anyhow!("bad state {}: {e}", f.display()))?,
        );
    }
    let vocab_size = models[0].hp().vocab_size;
    let (test, _) = load_corpus_auto(test_path, vocab_path, Some(vocab_size))?;
    let ll = heldout_per_word_ll(&models, &test, &HeldoutConfig { sweeps, seed })
        .map_err(|e| anyhow!("{e}"))?;
    fs::create_dir_all(output_dir)
        .with_context(|| format!("cannot create {}", output_dir.display()))?;
    let mut out = create_file(&output_dir.join("heldout.txt"))?;
    writeln!(out, "{ll}")?;
    println!("{ll}");
    Ok(ll)
}

/// Generates a synthetic corpus and writes corpus.dat, vocab.txt, and
/// truth.csv under `output_dir`.
pub fn run_synth(cfg: &SynthConfig, seed: u64, output_dir: &Path) -> Result<()> {
    let out = generate(cfg, &mut seeded_rng(seed)).map_err(|e| anyhow!("{e}"))?;
    fs::create_dir_all(output_dir)
        .with_context(|| format!("cannot create {}", output_dir.display()))?;
    write_corpus(&out.corpus, &output_dir.join("corpus.dat")).map_err(|e| anyhow!("{e}"))?;
    Vocabulary::numbered(cfg.vocab_size)
        .write_to(&output_dir.join("vocab.txt"))
        .map_err(|e| anyhow!("{e}"))?;
    let mut truth = create_file(&output_dir.join("truth.csv"))?;
    writeln!(truth, "doc,position,topic")?;
    for (j, topics) in out.word_topics.iter().enumerate() {
        for (i, &z) in topics.iter().enumerate() {
            writeln!(truth, "{j},{i},{z}")?;
        }
    }
    println!(
        "wrote {} documents, {} words, {} terms to {}",
        out.corpus.num_docs(),
        out.corpus.num_tokens(),
        cfg.vocab_size,
        output_dir.display()
    );
    Ok(())
}

/// Rebuilds a state from a dump and reports every invariant violation.
/// An empty result means the dump is internally consistent.
pub fn run_validate(
    corpus_path: &Path,
    vocab_path: Option<&Path>,
    state_path: &Path,
) -> Result<Vec<String>> {
    let dump = StateDump::load_json(state_path)
        .map_err(|e| anyhow!("cannot load state {}: {e}", state_path.display()))?;
    let (corpus, _) = load_corpus_auto(corpus_path, vocab_path, Some(dump.vocab_size))?;
    let state = CrfState::from_dump(&dump, Arc::new(corpus))
        .map_err(|e| anyhow!("cannot reconstruct state: {e}"))?;
    Ok(state.validate())
}
