use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{InstancePool, Interval, LabeledSeries, SeriesMetadata};
use crate::error::{DiscordError, Result};
use crate::stats::TimeSeries;

/// All generators draw from `ChaCha8Rng::seed_from_u64(seed)`.
fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cumulative sum of `n` standard-normal steps.
pub fn random_walk(n: usize, seed: u64) -> TimeSeries {
    let mut rng = rng_for(seed);
    let mut acc = 0.0;
    let values = (0..n)
        .map(|_| {
            let step: f64 = rng.sample(StandardNormal);
            acc += step;
            acc
        })
        .collect();
    TimeSeries::new(values).expect("normal steps are finite")
}

/// Concatenate `normal_count` instances drawn with replacement from
/// `normal` and one instance from `anomaly`, inserted at a uniformly chosen
/// slot. The anomaly's span is the ground truth.
pub fn generate_concat_series(
    normal: &InstancePool,
    anomaly: &InstancePool,
    normal_count: usize,
    seed: u64,
) -> Result<LabeledSeries> {
    if anomaly.is_empty() {
        return Err(DiscordError::Generation("anomaly pool is empty".into()));
    }
    if normal.is_empty() && normal_count > 0 {
        return Err(DiscordError::Generation("normal pool is empty".into()));
    }
    let mut rng = rng_for(seed);
    let picks: Vec<usize> = (0..normal_count).map(|_| rng.random_range(0..normal.len())).collect();
    let anomaly_pick = rng.random_range(0..anomaly.len());
    let slot = rng.random_range(0..=normal_count);

    let mut values = Vec::new();
    let mut truth = Interval::new(1, 1);
    for (k, &idx) in picks.iter().enumerate() {
        if k == slot {
            let inst = &anomaly.instances[anomaly_pick].values;
            truth = Interval::new(values.len() + 1, values.len() + inst.len());
            values.extend_from_slice(inst);
        }
        values.extend_from_slice(&normal.instances[idx].values);
    }
    if slot == normal_count {
        let inst = &anomaly.instances[anomaly_pick].values;
        truth = Interval::new(values.len() + 1, values.len() + inst.len());
        values.extend_from_slice(inst);
    }

    let series = TimeSeries::new(values)?;
    let metadata = SeriesMetadata {
        generator: "concat".into(),
        seed,
        length: series.len(),
        truth: Some(truth),
        negative_control: false,
        params: json!({
            "normal_source": normal.source.display().to_string(),
            "anomaly_source": anomaly.source.display().to_string(),
            "normal_count": normal_count,
            "normal_picks": picks,
            "anomaly_pick": anomaly_pick,
            "anomaly_slot": slot,
        }),
    };
    Ok(LabeledSeries {
        series,
        truth,
        metadata,
    })
}

/// Shape of the periodic series with one locally anomalous bump.
///
/// Each cycle holds a low flat stretch carrying a small bump, a
/// raised-cosine ramp up, a high flat stretch, and a ramp back down. One
/// cycle carries a second bump of the same shape on its high stretch.
/// Windows of the target length around either bump see only flat signal and
/// the bump, so self z-normalization maps one onto the other; only a longer
/// context, which always reaches a ramp, tells them apart.
///
/// With the defaults, search with a context length of 64 and a target length
/// of 16: the flat stretches (about 50 samples) are shorter than the context
/// and leave at least 15 flat samples on each side of a bump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpParams {
    pub cycles: usize,
    pub cycle_len: usize,
    pub plateau_height: f64,
    pub ramp_len: f64,
    /// Ramp durations are drawn uniformly from `ramp_len ± ramp_jitter`.
    pub ramp_jitter: f64,
    /// Standard deviation of the per-cycle multiplicative amplitude factor.
    pub amplitude_jitter: f64,
    pub bump_width: usize,
    pub bump_height: f64,
}

impl Default for BumpParams {
    fn default() -> Self {
        Self {
            cycles: 20,
            cycle_len: 120,
            plateau_height: 10.0,
            ramp_len: 10.0,
            ramp_jitter: 2.0,
            amplitude_jitter: 0.02,
            bump_width: 16,
            bump_height: 2.0,
        }
    }
}

/// Positions within a cycle, in samples.
struct Layout {
    ramp_up: f64,
    ramp_down: f64,
    low_bump: usize,
    high_bump: usize,
}

impl BumpParams {
    fn layout(&self) -> Layout {
        let c = self.cycle_len as f64;
        let r = self.ramp_len;
        let ramp_up = c / 2.0 - r;
        let ramp_down = c - r;
        let half = self.bump_width as f64 / 2.0;
        // bumps centred on the nominal flat stretches
        let low_mid = ramp_up / 2.0;
        let high_mid = (ramp_up + r + ramp_down) / 2.0;
        Layout {
            ramp_up,
            ramp_down,
            low_bump: (low_mid - half).round() as usize,
            high_bump: (high_mid - half).round() as usize,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cycles == 0 || self.bump_width == 0 {
            return Err(DiscordError::Generation("cycles and bump width must be positive".into()));
        }
        if self.bump_width >= self.cycle_len {
            return Err(DiscordError::Generation(format!(
                "bump width {} must be shorter than the cycle ({})",
                self.bump_width, self.cycle_len
            )));
        }
        if !(self.ramp_jitter >= 0.0 && self.ramp_len - self.ramp_jitter > 0.0) {
            return Err(DiscordError::Generation("ramp length must stay positive".into()));
        }
        let lay = self.layout();
        let widest = self.ramp_len + self.ramp_jitter;
        let w = self.bump_width as f64;
        // each bump must sit on flat signal whatever the ramp durations
        let low_ok = lay.low_bump as f64 + (self.cycle_len as f64 - lay.ramp_down - widest) > 0.0
            && lay.low_bump as f64 + w <= lay.ramp_up;
        let high_ok = lay.high_bump as f64 >= lay.ramp_up + widest && lay.high_bump as f64 + w <= lay.ramp_down;
        if lay.ramp_up <= 0.0 || !low_ok || !high_ok {
            return Err(DiscordError::Generation(
                "flat stretches too short for the ramps and the bump".into(),
            ));
        }
        Ok(())
    }
}

/// Raised-cosine bump, zero just outside its `width` samples.
fn add_bump(values: &mut [f64], start: usize, width: usize, height: f64) {
    for k in 0..width {
        let phase = std::f64::consts::TAU * (k + 1) as f64 / (width + 1) as f64;
        values[start + k] += height * 0.5 * (1.0 - phase.cos());
    }
}

fn ramp(x: f64, start: f64, dur: f64) -> f64 {
    if x <= start {
        0.0
    } else if x >= start + dur {
        1.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * (x - start) / dur).cos())
    }
}

pub fn generate_bump_series(params: &BumpParams, seed: u64) -> Result<LabeledSeries> {
    params.validate()?;
    let mut rng = rng_for(seed);
    let c = params.cycle_len;
    let w = params.bump_width;
    let lay = params.layout();
    let anomalous = rng.random_range(0..params.cycles);

    let mut values = Vec::with_capacity(params.cycles * c);
    let mut truth = Interval::new(1, 1);
    for cycle in 0..params.cycles {
        let dur_up = params.ramp_len + params.ramp_jitter * rng.random_range(-1.0..=1.0);
        let dur_down = params.ramp_len + params.ramp_jitter * rng.random_range(-1.0..=1.0);
        let noise: f64 = rng.sample(StandardNormal);
        let scale = 1.0 + params.amplitude_jitter * noise;

        let mut cyc: Vec<f64> = (0..c)
            .map(|k| {
                let x = k as f64;
                params.plateau_height * (ramp(x, lay.ramp_up, dur_up) - ramp(x, lay.ramp_down, dur_down))
            })
            .collect();
        add_bump(&mut cyc, lay.low_bump, w, params.bump_height);
        if cycle == anomalous {
            add_bump(&mut cyc, lay.high_bump, w, params.bump_height);
            truth = Interval::from_window(values.len() + lay.high_bump, w);
        }
        values.extend(cyc.into_iter().map(|v| v * scale));
    }

    let series = TimeSeries::new(values)?;
    let metadata = SeriesMetadata {
        generator: "bump".into(),
        seed,
        length: series.len(),
        truth: Some(truth),
        negative_control: params.bump_height == 0.0,
        params: json!({
            "bump": params,
            "anomalous_cycle": anomalous,
        }),
    };
    Ok(LabeledSeries {
        series,
        truth,
        metadata,
    })
}
