use serde::{Deserialize, Serialize};

use super::{generate_concat_series, overlapping_rate, InstancePool, Interval};
use crate::error::{DiscordError, Result};
use crate::search::{classic_discord, default_target_len, pruned_search, EpsilonPolicy, SearchConfig};

/// One generated series scored by both detectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub seed: u64,
    pub length: usize,
    pub truth: Interval,
    pub semantic: Interval,
    pub semantic_overlap: f64,
    pub classic: Interval,
    pub classic_overlap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub context_len: usize,
    pub target_len: usize,
    pub normal_count: usize,
    pub runs: Vec<ProtocolRun>,
    pub mean_semantic_overlap: f64,
    pub mean_classic_overlap: f64,
}

/// Concatenate `normal_count` normal instances with one anomalous one for
/// each of `series_count` seeds (`base_seed`, `base_seed + 1`, ...), then
/// score the semantic discord and the classic discord at the same target
/// length. The context length defaults to the instance length.
pub fn run_concat_protocol(
    normal: &InstancePool,
    anomaly: &InstancePool,
    normal_count: usize,
    series_count: usize,
    base_seed: u64,
    context_len: Option<usize>,
    threads: Option<usize>,
) -> Result<ProtocolSummary> {
    if series_count == 0 {
        return Err(DiscordError::InvalidConfig("series count must be positive".into()));
    }
    let big = match context_len {
        Some(v) => v,
        None => normal
            .instance_len()
            .or(anomaly.instance_len())
            .ok_or_else(|| DiscordError::Generation("normal pool is empty".into()))?,
    };
    let small = default_target_len(big);

    let mut runs = Vec::with_capacity(series_count);
    for k in 0..series_count as u64 {
        let seed = base_seed.wrapping_add(k);
        let labeled = generate_concat_series(normal, anomaly, normal_count, seed)?;
        let mut cfg = SearchConfig::new(big)
            .with_target_len(small)
            .with_epsilon(EpsilonPolicy::Percentile {
                percentile: crate::search::DEFAULT_EPSILON_PERCENTILE,
                samples: crate::search::DEFAULT_EPSILON_SAMPLES,
                seed,
            });
        cfg.threads = threads;
        let out = pruned_search(&labeled.series, &cfg)?;
        let semantic = Interval::from_window(out.report.target, small);
        let (pos, _) = classic_discord(&labeled.series, small)?;
        let classic = Interval::from_window(pos, small);
        runs.push(ProtocolRun {
            seed,
            length: labeled.series.len(),
            truth: labeled.truth,
            semantic,
            semantic_overlap: overlapping_rate(semantic, labeled.truth)?,
            classic,
            classic_overlap: overlapping_rate(classic, labeled.truth)?,
        });
    }
    let count = runs.len() as f64;
    Ok(ProtocolSummary {
        context_len: big,
        target_len: small,
        normal_count,
        mean_semantic_overlap: runs.iter().map(|r| r.semantic_overlap).sum::<f64>() / count,
        mean_classic_overlap: runs.iter().map(|r| r.classic_overlap).sum::<f64>() / count,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Instance;
    use std::path::PathBuf;

    fn sine_pool(label: &str, count: usize, len: usize, squash: bool) -> InstancePool {
        let instances = (0..count)
            .map(|k| Instance {
                label: label.into(),
                values: (0..len)
                    .map(|x| {
                        let t = x as f64 / len as f64 * std::f64::consts::TAU * 2.0;
                        let v = t.sin() * (1.0 + 0.01 * k as f64);
                        if squash && x > len / 2 && x < 3 * len / 4 {
                            v * 0.2
                        } else {
                            v
                        }
                    })
                    .collect(),
            })
            .collect();
        InstancePool {
            instances,
            source: PathBuf::from("mem"),
        }
    }

    #[test]
    fn protocol_runs_every_seed() {
        let normal = sine_pool("1", 4, 40, false);
        let anomaly = sine_pool("2", 2, 40, true);
        let s = run_concat_protocol(&normal, &anomaly, 6, 3, 11, None, Some(1)).unwrap();
        assert_eq!(s.runs.len(), 3);
        assert_eq!(s.context_len, 40);
        assert_eq!(s.target_len, 16);
        assert_eq!(s.runs[2].seed, 13);
        for r in &s.runs {
            assert_eq!(r.length, 7 * 40);
            assert!((0.0..=1.0).contains(&r.semantic_overlap));
            assert!((0.0..=1.0).contains(&r.classic_overlap));
        }
        assert_eq!(s, run_concat_protocol(&normal, &anomaly, 6, 3, 11, None, Some(2)).unwrap());
    }

    #[test]
    fn zero_series_is_error() {
        let normal = sine_pool("1", 2, 40, false);
        assert!(run_concat_protocol(&normal, &normal, 3, 0, 0, None, None).is_err());
    }
}
