//! Z-normalized and context-aware Euclidean distances.
//!
//! The context-aware distance normalizes target `p` by the mean and standard
//! deviation of an enclosing context `i`, and target `q` by context `j`.
//! The closed form works from window means, standard deviations and the
//! target dot product `QT[p][q]`, so each evaluation is O(1).

use crate::error::{DiscordError, Result};
use crate::stats::{SeriesStats, TimeSeries, FLAT_SIGMA};

/// Target starts `p`, `q` and their context starts `i`, `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DistanceInputs {
    pub p: usize,
    pub q: usize,
    pub i: usize,
    pub j: usize,
}

impl DistanceInputs {
    pub fn new(p: usize, q: usize, i: usize, j: usize) -> Self {
        Self { p, q, i, j }
    }

    /// Exchange target and reference roles.
    pub fn swapped(self) -> Self {
        Self {
            p: self.q,
            q: self.p,
            i: self.j,
            j: self.i,
        }
    }

    pub fn validate(&self, stats: &SeriesStats) -> Result<()> {
        let n_targets = stats.n_targets();
        if self.p >= n_targets || self.q >= n_targets {
            return Err(DiscordError::InvalidWindow(format!(
                "target start out of range: p={}, q={}, valid < {n_targets}",
                self.p, self.q
            )));
        }
        if !stats.contexts_of(self.p).contains(&self.i) {
            return Err(DiscordError::InvalidWindow(format!(
                "context {} does not enclose target {}",
                self.i, self.p
            )));
        }
        if !stats.contexts_of(self.q).contains(&self.j) {
            return Err(DiscordError::InvalidWindow(format!(
                "context {} does not enclose target {}",
                self.j, self.q
            )));
        }
        Ok(())
    }
}

fn mean_std(w: &[f64]) -> (f64, f64) {
    let n = w.len() as f64;
    let m = w.iter().sum::<f64>() / n;
    let v = w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Z-normalized Euclidean distance between two equal-length windows,
/// evaluated as `sqrt(2w(1 - corr))`.
pub fn z_norm_dist(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(DiscordError::InvalidWindow(format!(
            "windows must be non-empty and of equal length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    if sa < FLAT_SIGMA || sb < FLAT_SIGMA {
        return Err(DiscordError::FlatWindow(
            "z-normalized distance of a constant window".into(),
        ));
    }
    let w = a.len() as f64;
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / w;
    let corr = (cov / (sa * sb)).clamp(-1.0, 1.0);
    Ok((2.0 * w * (1.0 - corr)).max(0.0).sqrt())
}

/// Z-normalized distance from a precomputed dot product and window moments.
/// Both standard deviations must be non-zero.
#[inline]
pub fn z_norm_dist_from_dot(w: usize, dot: f64, mu_a: f64, sd_a: f64, mu_b: f64, sd_b: f64) -> f64 {
    let wf = w as f64;
    let corr = ((dot - wf * mu_a * mu_b) / (wf * sd_a * sd_b)).clamp(-1.0, 1.0);
    (2.0 * wf * (1.0 - corr)).max(0.0).sqrt()
}

/// Literal sum over the target points, with the context moments recomputed
/// from the raw values. Used as the reference for the closed form.
pub fn context_aware_dist_direct(
    ts: &TimeSeries,
    d: DistanceInputs,
    context_len: usize,
    target_len: usize,
) -> Result<f64> {
    let n = ts.len();
    if d.i + context_len > n || d.j + context_len > n || d.p + target_len > n || d.q + target_len > n
    {
        return Err(DiscordError::InvalidWindow("window runs past the series".into()));
    }
    let (mi, si) = mean_std(ts.window(d.i, context_len));
    let (mj, sj) = mean_std(ts.window(d.j, context_len));
    if si < FLAT_SIGMA || sj < FLAT_SIGMA {
        return Err(DiscordError::FlatWindow(format!(
            "context {} or {} is constant",
            d.i, d.j
        )));
    }
    let sum = ts
        .window(d.p, target_len)
        .iter()
        .zip(ts.window(d.q, target_len))
        .map(|(x, y)| {
            let diff = (x - mi) / si - (y - mj) / sj;
            diff * diff
        })
        .sum::<f64>();
    Ok(sum.sqrt())
}

/// A target's moments expressed relative to one enclosing context.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ContextTerms {
    /// target sigma / context sigma
    pub ratio: f64,
    /// (target mean - context mean) / context sigma
    pub offset: f64,
    /// 1 / context sigma
    pub inv: f64,
}

impl ContextTerms {
    #[inline]
    pub fn new(mu_t: f64, sd_t: f64, mu_c: f64, sd_c: f64) -> Self {
        let inv = 1.0 / sd_c;
        Self {
            ratio: sd_t * inv,
            offset: (mu_t - mu_c) * inv,
            inv,
        }
    }
}

/// `sigma_p * sigma_q - (QT[p][q] / l - mu_p * mu_q)`; equals
/// `sigma_p * sigma_q * (1 - corr(p, q))`.
#[inline]
pub(crate) fn decorrelation(qt: f64, l: usize, mu_p: f64, sd_p: f64, mu_q: f64, sd_q: f64) -> f64 {
    sd_p * sd_q - (qt / l as f64 - mu_p * mu_q)
}

/// Squared context-aware distance divided by `l`.
///
/// Rearrangement of the mean/std/dot-product closed form into a sum of
/// terms that are non-negative up to rounding:
/// `(r_i - r_j)^2 + 2 s / (sd_i sd_j) + (o_i - o_j)^2`.
#[inline]
pub(crate) fn ca_dist_sq_scaled(a: &ContextTerms, b: &ContextTerms, decorr: f64) -> f64 {
    let dr = a.ratio - b.ratio;
    let dof = a.offset - b.offset;
    dr * dr + 2.0 * decorr * a.inv * b.inv + dof * dof
}

#[inline]
pub(crate) fn finish_distance(scaled_sq: f64, l: usize) -> f64 {
    (scaled_sq * l as f64).max(0.0).sqrt()
}

/// Closed-form context-aware distance. `qt_pq` is the dot product of the
/// two targets (e.g. from a [`crate::stats::QtRow`] anchored at `p`).
pub fn context_aware_dist_fast(qt_pq: f64, d: DistanceInputs, stats: &SeriesStats) -> Result<f64> {
    d.validate(stats)?;
    let ctx = &stats.context;
    if ctx.is_flat(d.i) || ctx.is_flat(d.j) {
        return Err(DiscordError::FlatWindow(format!(
            "context {} or {} is constant",
            d.i, d.j
        )));
    }
    let tg = &stats.target;
    let l = stats.target_len;
    let a = ContextTerms::new(tg.mu[d.p], tg.sigma[d.p], ctx.mu[d.i], ctx.sigma[d.i]);
    let b = ContextTerms::new(tg.mu[d.q], tg.sigma[d.q], ctx.mu[d.j], ctx.sigma[d.j]);
    let s = decorrelation(qt_pq, l, tg.mu[d.p], tg.sigma[d.p], tg.mu[d.q], tg.sigma[d.q]);
    Ok(finish_distance(ca_dist_sq_scaled(&a, &b, s), l))
}

/// Pearson correlation of targets `p` and `q`, clamped to [-1, 1].
pub fn correlation(p: usize, q: usize, qt_pq: f64, stats: &SeriesStats) -> Result<f64> {
    let tg = &stats.target;
    if tg.is_flat(p) || tg.is_flat(q) {
        return Err(DiscordError::FlatWindow(format!(
            "target {p} or {q} is constant"
        )));
    }
    Ok(correlation_unchecked(
        qt_pq,
        stats.target_len,
        tg.mu[p],
        tg.sigma[p],
        tg.mu[q],
        tg.sigma[q],
    ))
}

#[inline]
pub(crate) fn correlation_unchecked(qt: f64, l: usize, mu_p: f64, sd_p: f64, mu_q: f64, sd_q: f64) -> f64 {
    let lf = l as f64;
    // products grouped so that exchanging p and q is bit-for-bit symmetric
    ((qt - lf * (mu_p * mu_q)) / (lf * (sd_p * sd_q))).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::QtRow;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// The z-normalized distance written out point by point.
    fn z_norm_literal(a: &[f64], b: &[f64]) -> f64 {
        let (ma, sa) = mean_std(a);
        let (mb, sb) = mean_std(b);
        a.iter()
            .zip(b)
            .map(|(x, y)| ((x - ma) / sa - (y - mb) / sb).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn walk(seed: u64, n: usize) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = 0.0;
        TimeSeries::new(
            (0..n)
                .map(|_| {
                    acc += rng.random_range(-1.0..1.0);
                    acc
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn z_norm_examples() {
        assert!(z_norm_dist(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap().abs() < 1e-12);
        let d = z_norm_dist(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((d - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        let d = z_norm_dist(&[0.0, 1.0, 0.0, 1.0], &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((d - 4.0).abs() < 1e-12);
    }

    #[test]
    fn z_norm_flat_is_error() {
        assert!(matches!(
            z_norm_dist(&[1.0, 1.0], &[1.0, 2.0]),
            Err(DiscordError::FlatWindow(_))
        ));
    }

    #[test]
    fn z_norm_identity_matches_literal_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let w = rng.random_range(2..50);
            let a: Vec<f64> = (0..w).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..w).map(|_| rng.random_range(-5.0..5.0)).collect();
            let fast = z_norm_dist(&a, &b).unwrap();
            let lit = z_norm_literal(&a, &b);
            assert!((fast - lit).abs() <= 1e-9 * lit.max(1.0));
        }
    }

    #[test]
    fn context_equal_to_target_reduces_to_z_norm() {
        let ts = walk(2, 120);
        let stats = SeriesStats::new(&ts, 16, 16).unwrap();
        let t = ts.values();
        for (p, q) in [(0, 40), (10, 90), (33, 104)] {
            let d = DistanceInputs::new(p, q, p, q);
            let zn = z_norm_dist(&t[p..p + 16], &t[q..q + 16]).unwrap();
            let direct = context_aware_dist_direct(&ts, d, 16, 16).unwrap();
            let qt = QtRow::direct(t, 16, p).qt[q];
            let fast = context_aware_dist_fast(qt, d, &stats).unwrap();
            assert!((direct - zn).abs() < 1e-9);
            assert!((fast - zn).abs() < 1e-9);
        }
    }

    #[test]
    fn hand_computed_context_distance() {
        // Each context is the target followed by three values chosen so the
        // whole length-6 context has mean 0 and population std 1.
        let d1 = (7.0f64 / 3.0).sqrt();
        let d2 = (1.0f64 / 3.0).sqrt();
        let third = 1.0 / 3.0;
        let values = vec![
            0.0, 1.0, 0.0, -third + d1, -third - d1, -third,
            0.0, 2.0, 0.0, -2.0 * third + d2, -2.0 * third - d2, -2.0 * third,
        ];
        let ts = TimeSeries::new(values).unwrap();
        let stats = SeriesStats::new(&ts, 6, 3).unwrap();
        assert!(stats.context.mu[0].abs() < 1e-12 && stats.context.mu[6].abs() < 1e-12);
        assert!((stats.context.sigma[0] - 1.0).abs() < 1e-12);
        assert!((stats.context.sigma[6] - 1.0).abs() < 1e-12);

        let d = DistanceInputs::new(0, 6, 0, 6);
        let direct = context_aware_dist_direct(&ts, d, 6, 3).unwrap();
        assert!((direct - 1.0).abs() < 1e-12);
        let qt = QtRow::direct(ts.values(), 3, 0).qt[6];
        let fast = context_aware_dist_fast(qt, d, &stats).unwrap();
        assert!((fast - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_segments_have_zero_distance() {
        let mut v: Vec<f64> = walk(4, 60).into_inner();
        let copy = v[..30].to_vec();
        v.extend(copy);
        let ts = TimeSeries::new(v).unwrap();
        let stats = SeriesStats::new(&ts, 20, 8).unwrap();
        let d = DistanceInputs::new(10, 70, 5, 65);
        let direct = context_aware_dist_direct(&ts, d, 20, 8).unwrap();
        let qt = QtRow::direct(ts.values(), 8, 10).qt[70];
        let fast = context_aware_dist_fast(qt, d, &stats).unwrap();
        assert!(direct < 1e-9);
        assert!(fast < 1e-6);
    }

    /// The expansion in terms of means, standard deviations and the dot
    /// product, term by term as usually written.
    #[allow(clippy::too_many_arguments)]
    fn closed_form_literal(qt: f64, l: f64, mp: f64, sp: f64, mq: f64, sq: f64, mi: f64, si: f64, mj: f64, sj: f64) -> f64 {
        let sq_dist = l / (si * si) * (sp * sp + (mp - mi).powi(2))
            - 2.0 * l / (si * sj) * (qt / l - mi * mq - mj * mp + mi * mj)
            + l / (sj * sj) * (sq * sq + (mq - mj).powi(2));
        sq_dist.max(0.0).sqrt()
    }

    #[test]
    fn fast_matches_direct_and_literal_closed_form() {
        let (big, small) = (30, 12);
        for seed in 0..10 {
            let ts = walk(100 + seed, 250);
            let stats = SeriesStats::new(&ts, big, small).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..300 {
                let p = rng.random_range(0..stats.n_targets());
                let q = rng.random_range(0..stats.n_targets());
                if p.abs_diff(q) <= big {
                    // self matches are never scored; near p == q the
                    // closed form is limited by cancellation under the root
                    continue;
                }
                let ir = stats.contexts_of(p);
                let jr = stats.contexts_of(q);
                let i = rng.random_range(ir);
                let j = rng.random_range(jr);
                let d = DistanceInputs::new(p, q, i, j);
                let qt = QtRow::direct(ts.values(), small, p).qt[q];
                let fast = context_aware_dist_fast(qt, d, &stats).unwrap();
                let direct = context_aware_dist_direct(&ts, d, big, small).unwrap();
                assert!((fast - direct).abs() <= 1e-9 * direct.max(1.0), "{fast} vs {direct}");
                let (tg, cx) = (&stats.target, &stats.context);
                let lit = closed_form_literal(
                    qt, small as f64, tg.mu[p], tg.sigma[p], tg.mu[q], tg.sigma[q],
                    cx.mu[i], cx.sigma[i], cx.mu[j], cx.sigma[j],
                );
                assert!((fast - lit).abs() <= 1e-7 * direct.max(1.0));
                // exchange symmetry
                let qt_rev = QtRow::direct(ts.values(), small, q).qt[p];
                let back = context_aware_dist_fast(qt_rev, d.swapped(), &stats).unwrap();
                assert!((fast - back).abs() <= 1e-12 * fast.max(1.0));
            }
        }
    }

    #[test]
    fn affine_invariance() {
        let ts = walk(7, 200);
        let scaled = TimeSeries::new(ts.values().iter().map(|v| 3.5 * v - 20.0).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let stats = SeriesStats::new(&ts, 25, 10).unwrap();
        for _ in 0..200 {
            let p = rng.random_range(0..stats.n_targets());
            let q = rng.random_range(0..stats.n_targets());
            let i = rng.random_range(stats.contexts_of(p));
            let j = rng.random_range(stats.contexts_of(q));
            let d = DistanceInputs::new(p, q, i, j);
            let a = context_aware_dist_direct(&ts, d, 25, 10).unwrap();
            let b = context_aware_dist_direct(&scaled, d, 25, 10).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn correlation_cases() {
        let ts = walk(8, 100);
        let stats = SeriesStats::new(&ts, 20, 10).unwrap();
        let t = ts.values();
        let row = QtRow::direct(t, 10, 5);
        assert!((correlation(5, 5, row.qt[5], &stats).unwrap() - 1.0).abs() < 1e-9);

        // anti-correlated copy
        let mut v = t[..10].to_vec();
        v.extend(t[..10].iter().map(|x| 7.0 - x));
        let anti = TimeSeries::new(v).unwrap();
        let st = SeriesStats::new(&anti, 10, 10).unwrap();
        let qt = QtRow::direct(anti.values(), 10, 0).qt[10];
        assert!((correlation(0, 10, qt, &st).unwrap() + 1.0).abs() < 1e-9);

        for q in 0..stats.n_targets() {
            let c = correlation(5, q, row.qt[q], &stats).unwrap();
            let (a, b) = (&t[5..15], &t[q..q + 10]);
            let (ma, sa) = mean_std(a);
            let (mb, sb) = mean_std(b);
            let pearson = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (10.0 * sa * sb);
            assert!((c - pearson).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_context_is_error() {
        let mut v = vec![0.0; 20];
        v.extend(walk(1, 40).into_inner());
        let ts = TimeSeries::new(v).unwrap();
        let stats = SeriesStats::new(&ts, 10, 4).unwrap();
        let d = DistanceInputs::new(3, 40, 0, 38);
        assert!(matches!(
            context_aware_dist_fast(0.0, d, &stats),
            Err(DiscordError::FlatWindow(_))
        ));
        assert!(context_aware_dist_direct(&ts, d, 10, 4).is_err());
    }
}
