//! Auxiliary-variable resampling of the two concentration parameters.
//!
//! Both samplers are standard Gamma-conjugate auxiliary schemes:
//!
//! - `gamma` (corpus level) conditions on the number of topics `K` and the
//!   total table count `m`: draw `w ~ Beta(gamma + 1, m)`, then sample from a
//!   two-component Gamma mixture whose odds are
//!   `(a + K - 1) / (m (b - ln w))` with prior shape `a` and rate `b`.
//! - `alpha0` (document level) conditions on per-document table counts `m_j`
//!   and word counts `n_j`: one `(w_j, s_j)` auxiliary pair per document,
//!   `w_j ~ Beta(alpha0 + 1, n_j)`, `s_j ~ Bernoulli(n_j / (n_j + alpha0))`,
//!   then `alpha0 ~ Gamma(a + m_total - sum s_j, b - sum ln w_j)`.
//!
//! A single document degenerates to the single-level scheme. Neither update
//! touches the Dirichlet smoothing `eta`, which stays fixed for a run.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::state::CrfState;

/// Gamma prior in shape/scale form; the mean is `shape * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, scale: f64) -> Self {
        assert!(shape > 0.0 && shape.is_finite(), "prior shape must be positive");
        assert!(scale > 0.0 && scale.is_finite(), "prior scale must be positive");
        Self { shape, scale }
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    fn rate(&self) -> f64 {
        1.0 / self.scale
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        sample_gamma(self.shape, self.rate(), rng)
    }
}

/// Draws from a Gamma with given shape and rate, keeping the result strictly
/// positive.
fn sample_gamma(shape: f64, rate: f64, rng: &mut impl Rng) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("invalid Gamma parameters");
    g.sample(rng).max(f64::MIN_POSITIVE)
}

/// One update of the corpus-level concentration given `k` topics over
/// `m_total` tables. With no tables the conditional is the prior.
pub fn resample_gamma_raw(
    k: usize,
    m_total: usize,
    current: f64,
    prior: &GammaPrior,
    rng: &mut impl Rng,
) -> f64 {
    if m_total == 0 {
        return prior.draw(rng);
    }
    let m = m_total as f64;
    let a = prior.shape;
    let b = prior.rate();
    let w = Beta::new(current + 1.0, m)
        .expect("invalid Beta parameters")
        .sample(rng)
        .max(1e-300);
    let rate = b - w.ln();
    let odds = (a + k as f64 - 1.0) / (m * rate);
    let shape = if rng.random::<f64>() < odds / (1.0 + odds) {
        a + k as f64
    } else {
        a + k as f64 - 1.0
    };
    sample_gamma(shape, rate, rng)
}

pub fn resample_gamma(state: &CrfState, prior: &GammaPrior, rng: &mut impl Rng) -> f64 {
    resample_gamma_raw(state.num_topics(), state.m_total(), state.hp().gamma, prior, rng)
}

/// One update of the document-level concentration given per-document
/// `(tables, seated words)` pairs. Documents with no seated words are
/// skipped; with none left the conditional is the prior.
pub fn resample_alpha0_raw(
    groups: &[(usize, usize)],
    current: f64,
    prior: &GammaPrior,
    rng: &mut impl Rng,
) -> f64 {
    let a = prior.shape;
    let b = prior.rate();
    let mut total_tables = 0usize;
    let mut sum_s = 0.0f64;
    let mut sum_log_w = 0.0f64;
    let mut any = false;
    for &(m_j, n_j) in groups {
        if n_j == 0 {
            continue;
        }
        any = true;
        total_tables += m_j;
        let n = n_j as f64;
        let w = Beta::new(current + 1.0, n)
            .expect("invalid Beta parameters")
            .sample(rng)
            .max(1e-300);
        sum_log_w += w.ln();
        if rng.random::<f64>() < n / (n + current) {
            sum_s += 1.0;
        }
    }
    if !any {
        return prior.draw(rng);
    }
    sample_gamma(a + total_tables as f64 - sum_s, b - sum_log_w, rng)
}

pub fn resample_alpha0(state: &CrfState, prior: &GammaPrior, rng: &mut impl Rng) -> f64 {
    let groups: Vec<(usize, usize)> = (0..state.num_docs())
        .map(|j| (state.doc_table_count(j), state.doc_seated_words(j)))
        .collect();
    resample_alpha0_raw(&groups, state.hp().alpha0, prior, rng)
}
