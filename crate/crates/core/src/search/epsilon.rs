use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distance::z_norm_dist;
use crate::error::{DiscordError, Result};
use crate::stats::{compute_moving_stats, TimeSeries};

/// Context-similarity threshold: the nearest-rank `percentile` of the
/// z-normalized distances of `samples` random pairs of distinct non-flat
/// contexts. The pairs are drawn from a ChaCha8 stream seeded with `seed`.
pub fn calibrate_epsilon(
    ts: &TimeSeries,
    context_len: usize,
    samples: usize,
    percentile: f64,
    seed: u64,
) -> Result<f64> {
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(DiscordError::Calibration(format!(
            "percentile must be in (0, 1], got {percentile}"
        )));
    }
    if samples == 0 {
        return Err(DiscordError::Calibration("sample count must be positive".into()));
    }
    let stats = compute_moving_stats(ts, context_len)?;
    let starts: Vec<usize> = (0..stats.len()).filter(|&k| !stats.is_flat(k)).collect();
    if starts.len() < 2 {
        return Err(DiscordError::Calibration(format!(
            "need at least 2 non-flat contexts, found {}",
            starts.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = starts.len();
    let mut dists: Vec<f64> = (0..samples)
        .map(|_| {
            let a = rng.random_range(0..m);
            let mut b = rng.random_range(0..m - 1);
            if b >= a {
                b += 1;
            }
            let (i, j) = (starts[a], starts[b]);
            z_norm_dist(ts.window(i, context_len), ts.window(j, context_len))
        })
        .collect::<Result<_>>()?;
    dists.sort_unstable_by(f64::total_cmp);
    let rank = ((percentile * samples as f64).ceil() as usize).clamp(1, samples);
    Ok(dists[rank - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy(n: usize) -> Vec<f64> {
        (0..n).map(|k| (k as f64 * 0.37).sin() + 0.3 * (k as f64 * 1.3).cos()).collect()
    }

    #[test]
    fn affine_identical_contexts_give_zero() {
        // a straight line: every context is an affine copy of every other
        let ts = TimeSeries::new((0..200).map(|k| 2.0 * k as f64 + 1.0).collect()).unwrap();
        let e = calibrate_epsilon(&ts, 30, 500, 0.4, 1).unwrap();
        assert!(e < 1e-6);
    }

    #[test]
    fn deterministic_for_seed() {
        let ts = TimeSeries::new(wavy(400)).unwrap();
        let a = calibrate_epsilon(&ts, 40, 2000, 0.4, 42).unwrap();
        let b = calibrate_epsilon(&ts, 40, 2000, 0.4, 42).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn full_percentile_is_sample_max() {
        let ts = TimeSeries::new(wavy(300)).unwrap();
        let (big, samples, seed) = (25, 300, 9);
        let e = calibrate_epsilon(&ts, big, samples, 1.0, seed).unwrap();
        // replay the same draws to find the maximum independently
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ts.len() - big + 1;
        let mut max = 0.0f64;
        for _ in 0..samples {
            let a = rng.random_range(0..m);
            let mut b = rng.random_range(0..m - 1);
            if b >= a {
                b += 1;
            }
            max = max.max(z_norm_dist(ts.window(a, big), ts.window(b, big)).unwrap());
        }
        assert_eq!(e, max);
        let low = calibrate_epsilon(&ts, big, samples, 0.1, seed).unwrap();
        assert!(low <= e);
    }

    #[test]
    fn needs_two_non_flat_contexts() {
        let ts = TimeSeries::new(vec![3.0; 50]).unwrap();
        assert!(matches!(
            calibrate_epsilon(&ts, 10, 100, 0.4, 0),
            Err(DiscordError::Calibration(_))
        ));
        let ts = TimeSeries::new(wavy(50)).unwrap();
        assert!(calibrate_epsilon(&ts, 10, 100, 0.0, 0).is_err());
    }
}
