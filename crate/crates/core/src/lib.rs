//! Semantic discord discovery for univariate time series.
//!
//! A classic discord is the window whose z-normalized nearest neighbor is
//! farthest away. Z-normalizing a short window by its own moments hides
//! anomalies that only look unusual relative to their surroundings, so here
//! every target window of length `l` is normalized by the moments of an
//! enclosing context window of length `L`, and the context pair is chosen
//! to minimize the distance. The discord is the target whose nearest
//! non-self-match reference is farthest under this optimal context-aware
//! distance.
//!
//! The exact search uses an O(1) lower bound on the optimal distance to
//! visit references in ascending bound order and stop early.
//!
//! ```
//! use semdisc::{eval::random_walk, search::{pruned_search, SearchConfig}};
//!
//! let ts = random_walk(400, 7);
//! let out = pruned_search(&ts, &SearchConfig::new(40)).unwrap();
//! assert_eq!(out.report.target_len, 16);
//! assert!(out.metrics.pruning_rate() > 0.0);
//! ```

pub mod bound;
pub mod distance;
pub mod error;
pub mod eval;
pub mod search;
pub mod stats;

pub use error::{DiscordError, Result};
pub use search::{
    brute_force_search, classic_discord, pruned_search, search, Algorithm, DiscordReport,
    EpsilonPolicy, SearchConfig, SearchMetrics, SearchOutcome,
};
pub use stats::TimeSeries;
