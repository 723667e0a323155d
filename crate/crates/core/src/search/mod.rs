//! Semantic discord search.
//!
//! A target `p` is scored by the optimal context-aware distance to its
//! closest non-self-match reference target `q`; the discord is the target
//! with the largest such score. Three exact routes are provided:
//!
//! * [`Algorithm::Brute`] evaluates every context pair with direct sums,
//! * [`Algorithm::SmartBrute`] uses streamed dot products and the closed form,
//! * [`Algorithm::Pruned`] visits reference targets in ascending lower-bound
//!   order and stops once the bound reaches the current nearest distance.
//!
//! All three return the same report. Ties are broken by smallest `p`, then
//! `q`, then `i`, then `j`.

mod classic;
mod engine;
mod epsilon;

use serde::{Deserialize, Serialize};

use crate::distance::{
    ca_dist_sq_scaled, decorrelation, finish_distance, z_norm_dist, ContextTerms,
};
use crate::error::{DiscordError, Result};
use crate::stats::{QtRow, SeriesStats, TimeSeries};

pub use classic::{classic_discord, classic_profile};
pub use epsilon::calibrate_epsilon;

/// Default share of the context length used for the target length.
pub const DEFAULT_TARGET_FRACTION: f64 = 0.4;
pub const DEFAULT_EPSILON_PERCENTILE: f64 = 0.4;
pub const DEFAULT_EPSILON_SAMPLES: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Brute,
    SmartBrute,
    Pruned,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Brute => "brute",
            Algorithm::SmartBrute => "smart-brute",
            Algorithm::Pruned => "pruned",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = DiscordError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(Algorithm::Brute),
            "smart-brute" => Ok(Algorithm::SmartBrute),
            "pruned" => Ok(Algorithm::Pruned),
            other => Err(DiscordError::InvalidConfig(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// How the context-similarity threshold is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsilonPolicy {
    /// Use this value; `f64::INFINITY` disables the threshold.
    Fixed(f64),
    /// Nearest-rank percentile of z-normalized distances between randomly
    /// sampled pairs of contexts.
    Percentile {
        percentile: f64,
        samples: usize,
        seed: u64,
    },
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        EpsilonPolicy::Percentile {
            percentile: DEFAULT_EPSILON_PERCENTILE,
            samples: DEFAULT_EPSILON_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub context_len: usize,
    pub target_len: usize,
    pub epsilon: EpsilonPolicy,
    pub algorithm: Algorithm,
    /// Worker threads for the outer loop; `None` uses the ambient pool.
    pub threads: Option<usize>,
}

/// `round(0.4 * context_len)`, at least 1.
pub fn default_target_len(context_len: usize) -> usize {
    ((DEFAULT_TARGET_FRACTION * context_len as f64).round() as usize).max(1)
}

impl SearchConfig {
    pub fn new(context_len: usize) -> Self {
        Self {
            context_len,
            target_len: default_target_len(context_len),
            epsilon: EpsilonPolicy::default(),
            algorithm: Algorithm::Pruned,
            threads: None,
        }
    }

    pub fn with_target_len(mut self, target_len: usize) -> Self {
        self.target_len = target_len;
        self
    }

    pub fn with_epsilon(mut self, epsilon: EpsilonPolicy) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let (big, small) = (self.context_len, self.target_len);
        if small == 0 {
            return Err(DiscordError::InvalidConfig("target length must be positive".into()));
        }
        if small > big {
            return Err(DiscordError::InvalidConfig(format!(
                "target length {small} exceeds context length {big}"
            )));
        }
        if big > n {
            return Err(DiscordError::InvalidConfig(format!(
                "context length {big} exceeds series length {n}"
            )));
        }
        match self.epsilon {
            EpsilonPolicy::Fixed(e) if e.is_nan() || e < 0.0 => {
                return Err(DiscordError::InvalidConfig(format!("epsilon must be >= 0, got {e}")));
            }
            EpsilonPolicy::Percentile { percentile, samples, .. } => {
                if !(percentile > 0.0 && percentile <= 1.0) {
                    return Err(DiscordError::InvalidConfig(format!(
                        "epsilon percentile must be in (0, 1], got {percentile}"
                    )));
                }
                if samples == 0 {
                    return Err(DiscordError::InvalidConfig("epsilon sample count must be positive".into()));
                }
            }
            _ => {}
        }
        if self.threads == Some(0) {
            return Err(DiscordError::InvalidConfig("thread count must be positive".into()));
        }
        Ok(())
    }
}

/// Non-self-match rule at the target level: starts at most `context_len`
/// apart are self matches.
pub fn is_self_match(p: usize, q: usize, context_len: usize) -> bool {
    p.abs_diff(q) <= context_len
}

/// A series with statistics computed and epsilon resolved, ready to search.
#[derive(Clone, Debug)]
pub struct Prepared<'a> {
    pub ts: &'a TimeSeries,
    pub stats: SeriesStats,
    pub epsilon: f64,
}

impl<'a> Prepared<'a> {
    pub fn new(ts: &'a TimeSeries, cfg: &SearchConfig) -> Result<Self> {
        cfg.validate(ts.len())?;
        let stats = SeriesStats::new(ts, cfg.context_len, cfg.target_len)?;
        let epsilon = match cfg.epsilon {
            EpsilonPolicy::Fixed(e) => e,
            EpsilonPolicy::Percentile {
                percentile,
                samples,
                seed,
            } => calibrate_epsilon(ts, cfg.context_len, samples, percentile, seed)?,
        };
        Ok(Self { ts, stats, epsilon })
    }

    pub fn context_len(&self) -> usize {
        self.stats.context_len
    }

    pub fn target_len(&self) -> usize {
        self.stats.target_len
    }

    /// Whether contexts `i` and `j` form an admissible pair: both non-flat,
    /// non-self-matching, and closer than epsilon. The similarity test uses
    /// a direct dot product.
    pub fn context_pair_admissible(&self, i: usize, j: usize) -> bool {
        let big = self.context_len();
        let ctx = &self.stats.context;
        if ctx.is_flat(i) || ctx.is_flat(j) || i.abs_diff(j) <= big {
            return false;
        }
        if self.epsilon.is_infinite() {
            return true;
        }
        z_norm_dist(self.ts.window(i, big), self.ts.window(j, big))
            .map(|d| d < self.epsilon)
            .unwrap_or(false)
    }
}

/// Optimal context-aware distance between targets `p` and `q` and the
/// context pair attaining it; `None` when no admissible context pair exists.
///
/// Single-pair entry point: context similarity is tested with direct dot
/// products, whereas the searches stream them.
pub fn d_opt(prep: &Prepared<'_>, p: usize, q: usize, qt_pq: f64) -> Option<(f64, (usize, usize))> {
    let st = &prep.stats;
    let (tg, ctx) = (&st.target, &st.context);
    if tg.is_flat(p) || tg.is_flat(q) {
        return None;
    }
    let l = st.target_len;
    let s = decorrelation(qt_pq, l, tg.mu[p], tg.sigma[p], tg.mu[q], tg.sigma[q]);
    let mut best: Option<(f64, (usize, usize))> = None;
    for i in st.contexts_of(p) {
        if ctx.is_flat(i) {
            continue;
        }
        let a = ContextTerms::new(tg.mu[p], tg.sigma[p], ctx.mu[i], ctx.sigma[i]);
        for j in st.contexts_of(q) {
            if !prep.context_pair_admissible(i, j) {
                continue;
            }
            let b = ContextTerms::new(tg.mu[q], tg.sigma[q], ctx.mu[j], ctx.sigma[j]);
            let v = ca_dist_sq_scaled(&a, &b, s);
            if best.is_none_or(|(bv, _)| v < bv) {
                best = Some((v, (i, j)));
            }
        }
    }
    best.map(|(v, ij)| (finish_distance(v, l), ij))
}

/// Convenience wrapper computing the target dot product directly.
pub fn d_opt_pair(prep: &Prepared<'_>, p: usize, q: usize) -> Option<(f64, (usize, usize))> {
    let l = prep.target_len();
    let t = prep.ts.values();
    let qt: f64 = t[p..p + l].iter().zip(&t[q..q + l]).map(|(a, b)| a * b).sum();
    d_opt(prep, p, q, qt)
}

/// The semantic discord. Indices are 0-based window starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscordReport {
    /// Nearest-neighbor optimal context-aware distance of the discord.
    pub distance: f64,
    pub target: usize,
    pub reference_target: usize,
    pub context: usize,
    pub reference_context: usize,
    pub target_len: usize,
    pub context_len: usize,
    /// `None` when the similarity threshold was disabled (infinite).
    pub epsilon: Option<f64>,
}

impl DiscordReport {
    pub fn best_match_t(&self) -> (usize, usize) {
        (self.target, self.reference_target)
    }

    pub fn best_match_c(&self) -> (usize, usize) {
        (self.context, self.reference_context)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchMetrics {
    /// Context-aware distance evaluations (one per enumerated context pair).
    pub distance_calls: u64,
    pub lb_calls: u64,
    /// Non-self-match pairs of non-flat targets.
    pub candidate_pairs: u64,
    pub evaluated_pairs: u64,
    pub pruned_pairs: u64,
}

impl SearchMetrics {
    pub fn pruning_rate(&self) -> f64 {
        if self.candidate_pairs == 0 {
            0.0
        } else {
            self.pruned_pairs as f64 / self.candidate_pairs as f64
        }
    }

    pub(crate) fn merge(&mut self, other: &SearchMetrics) {
        self.distance_calls += other.distance_calls;
        self.lb_calls += other.lb_calls;
        self.candidate_pairs += other.candidate_pairs;
        self.evaluated_pairs += other.evaluated_pairs;
        self.pruned_pairs += other.pruned_pairs;
    }
}

/// Closest admissible reference of one target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub distance: f64,
    pub reference_target: usize,
    pub context: usize,
    pub reference_context: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub report: DiscordReport,
    pub metrics: SearchMetrics,
    /// Per target start: its nearest neighbor, or `None` when the target is
    /// flat or every pair is infeasible.
    pub profile: Vec<Option<Neighbor>>,
}

impl SearchOutcome {
    pub fn nn_distances(&self) -> Vec<f64> {
        self.profile
            .iter()
            .map(|n| n.map_or(f64::INFINITY, |n| n.distance))
            .collect()
    }
}

/// Run the configured algorithm.
pub fn search(ts: &TimeSeries, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let prep = Prepared::new(ts, cfg)?;
    search_prepared(&prep, cfg.algorithm, cfg.threads)
}

/// Exhaustive search (every non-self-match pair is evaluated).
pub fn brute_force_search(ts: &TimeSeries, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let algorithm = match cfg.algorithm {
        Algorithm::Pruned => Algorithm::SmartBrute,
        other => other,
    };
    let prep = Prepared::new(ts, cfg)?;
    search_prepared(&prep, algorithm, cfg.threads)
}

/// Lower-bound pruned exact search.
pub fn pruned_search(ts: &TimeSeries, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let prep = Prepared::new(ts, cfg)?;
    search_prepared(&prep, Algorithm::Pruned, cfg.threads)
}

pub fn search_prepared(
    prep: &Prepared<'_>,
    algorithm: Algorithm,
    threads: Option<usize>,
) -> Result<SearchOutcome> {
    let run = || engine::run(prep, algorithm);
    let (profile, metrics) = match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| DiscordError::InvalidConfig(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut best: Option<(usize, Neighbor)> = None;
    for (p, nb) in profile.iter().enumerate() {
        if let Some(nb) = nb {
            if best.is_none_or(|(_, b)| nb.distance > b.distance) {
                best = Some((p, *nb));
            }
        }
    }
    let (p, nb) = best.ok_or(DiscordError::NoFeasibleTarget)?;
    let report = DiscordReport {
        distance: nb.distance,
        target: p,
        reference_target: nb.reference_target,
        context: nb.context,
        reference_context: nb.reference_context,
        target_len: prep.target_len(),
        context_len: prep.context_len(),
        epsilon: prep.epsilon.is_finite().then_some(prep.epsilon),
    };
    Ok(SearchOutcome {
        report,
        metrics,
        profile,
    })
}

/// Number of context-pair evaluations an exhaustive search performs,
/// assuming no flat windows: the sum over non-self-match target pairs of
/// the product of their enclosing-context counts.
pub fn brute_force_distance_calls(n: usize, context_len: usize, target_len: usize) -> u64 {
    if target_len == 0 || target_len > context_len || context_len > n {
        return 0;
    }
    let n_targets = n - target_len + 1;
    let n_contexts = n - context_len + 1;
    let counts: Vec<u64> = (0..n_targets)
        .map(|q| crate::stats::enclosing_contexts(q, context_len, target_len, n_contexts).len() as u64)
        .collect();
    let mut prefix = vec![0u64; n_targets + 1];
    for (k, c) in counts.iter().enumerate() {
        prefix[k + 1] = prefix[k] + c;
    }
    let total = prefix[n_targets];
    counts
        .iter()
        .enumerate()
        .map(|(p, &c)| {
            let lo = p.saturating_sub(context_len);
            let hi = (p + context_len + 1).min(n_targets);
            c * (total - (prefix[hi] - prefix[lo]))
        })
        .sum()
}

/// Number of non-self-match target pairs (ordered), assuming no flat
/// windows.
pub fn brute_force_pair_count(n: usize, context_len: usize, target_len: usize) -> u64 {
    if target_len == 0 || target_len > context_len || context_len > n {
        return 0;
    }
    let n_targets = (n - target_len + 1) as u64;
    (0..n_targets)
        .map(|p| {
            let lo = p.saturating_sub(context_len as u64);
            let hi = (p + context_len as u64 + 1).min(n_targets);
            n_targets - (hi - lo)
        })
        .sum()
}

/// Direct dot product row used by tests and single-pair helpers.
pub fn target_qt_row(ts: &TimeSeries, target_len: usize, p: usize) -> QtRow {
    QtRow::direct(ts.values(), target_len, p)
}
