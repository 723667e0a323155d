use serde::{Deserialize, Serialize};

use semdisc::eval::Interval;
use semdisc::search::{Algorithm, SearchOutcome};

/// Machine-readable result of one detection run. Intervals are 1-based and
/// inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub algorithm: Algorithm,
    pub series_len: usize,
    pub context_len: usize,
    pub target_len: usize,
    /// `null` when no context-similarity threshold applies.
    pub epsilon: Option<f64>,
    pub distance: f64,
    pub target: Interval,
    pub context: Interval,
    pub reference_target: Interval,
    pub reference_context: Interval,
    pub distance_calls: u64,
    pub lb_calls: u64,
    pub candidate_pairs: u64,
    pub pruning_rate: f64,
    /// Seconds. Left out with `--omit-timing` so records compare byte for byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl DetectionRecord {
    pub fn new(out: &SearchOutcome, algorithm: Algorithm, series_len: usize, wall_time: Option<f64>) -> Self {
        let r = &out.report;
        let (big, small) = (r.context_len, r.target_len);
        Self {
            algorithm,
            series_len,
            context_len: big,
            target_len: small,
            epsilon: r.epsilon,
            distance: r.distance,
            target: Interval::from_window(r.target, small),
            context: Interval::from_window(r.context, big),
            reference_target: Interval::from_window(r.reference_target, small),
            reference_context: Interval::from_window(r.reference_context, big),
            distance_calls: out.metrics.distance_calls,
            lb_calls: out.metrics.lb_calls,
            candidate_pairs: out.metrics.candidate_pairs,
            pruning_rate: out.metrics.pruning_rate(),
            wall_time,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes") + "\n"
    }
}
