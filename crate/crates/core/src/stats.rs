//! Sliding-window statistics shared by every search routine.
//!
//! Indices are 0-based here. All arrays are indexed by window start.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{DiscordError, Result};

/// Standard deviations below this are treated as exactly zero ("flat").
pub const FLAT_SIGMA: f64 = 1e-12;

/// Every this many anchors a streamed dot-product row is recomputed from
/// scratch instead of updated.
pub const QT_REFRESH_PERIOD: usize = 4096;

/// A finite-valued univariate series.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(DiscordError::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn window(&self, start: usize, len: usize) -> &[f64] {
        &self.values[start..start + len]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Per-window mean and population standard deviation for one window length.
#[derive(Clone, Debug, PartialEq)]
pub struct MovingStats {
    pub window_len: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl MovingStats {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// A window is flat when its standard deviation was recorded as zero.
    pub fn is_flat(&self, start: usize) -> bool {
        self.sigma[start] == 0.0
    }

    pub fn flat_count(&self) -> usize {
        self.sigma.iter().filter(|&&s| s == 0.0).count()
    }
}

/// Means and population standard deviations of every length-`w` window.
///
/// Uses prefix sums of the series centred on its global mean. Windows whose
/// values are all identical get `sigma = 0` exactly, as does any window
/// with `sigma < FLAT_SIGMA`.
pub fn compute_moving_stats(ts: &TimeSeries, w: usize) -> Result<MovingStats> {
    let t = ts.values();
    let n = t.len();
    if w == 0 || w > n {
        return Err(DiscordError::InvalidWindow(format!(
            "window length {w} must be in 1..={n}"
        )));
    }
    // run[k]: length of the run of equal values starting at k
    let mut run = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        if t[k] == t[k + 1] {
            run[k] = run[k + 1] + 1;
        }
    }

    // Two passes per window. Prefix-sum variances cancel badly when a
    // window's spread is small next to its level, and the square root
    // magnifies that; O(n w) is cheap next to the search itself.
    let wf = w as f64;
    let (mu, sigma): (Vec<f64>, Vec<f64>) = (0..n - w + 1)
        .into_par_iter()
        .map(|k| {
            if run[k] >= w {
                return (t[k], 0.0);
            }
            let win = &t[k..k + w];
            let m = win.iter().sum::<f64>() / wf;
            let var = win.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / wf;
            let s = var.sqrt();
            (m, if s < FLAT_SIGMA { 0.0 } else { s })
        })
        .unzip();
    Ok(MovingStats {
        window_len: w,
        mu,
        sigma,
    })
}

/// For each target start `q`, the largest context standard deviation over
/// the contexts that can enclose it.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedMaxStd {
    pub context_len: usize,
    pub target_len: usize,
    /// Zero when every enclosing context is flat.
    pub max_sigma_ctx: Vec<f64>,
}

impl WindowedMaxStd {
    pub fn get(&self, q: usize) -> f64 {
        self.max_sigma_ctx[q]
    }

    pub fn is_feasible(&self, q: usize) -> bool {
        self.max_sigma_ctx[q] > 0.0
    }
}

/// Range of context starts enclosing the target starting at `q`, clipped
/// to the valid starts `0..n_contexts`. Empty when no context fits.
pub fn enclosing_contexts(
    q: usize,
    context_len: usize,
    target_len: usize,
    n_contexts: usize,
) -> std::ops::Range<usize> {
    let lo = q.saturating_sub(context_len - target_len);
    let hi = (q + 1).min(n_contexts);
    lo..hi.max(lo)
}

/// Sliding maximum of `sigma_ctx` over [`enclosing_contexts`], one entry per
/// target start, using a monotonic deque (O(n) overall).
pub fn compute_window_max_std(
    sigma_ctx: &MovingStats,
    context_len: usize,
    target_len: usize,
) -> Result<WindowedMaxStd> {
    if sigma_ctx.window_len != context_len {
        return Err(DiscordError::InvalidWindow(format!(
            "context statistics use window {} but context length is {context_len}",
            sigma_ctx.window_len
        )));
    }
    if target_len == 0 || target_len > context_len {
        return Err(DiscordError::InvalidWindow(format!(
            "target length {target_len} must be in 1..={context_len}"
        )));
    }
    let sigma = &sigma_ctx.sigma;
    let n_contexts = sigma.len();
    let n = n_contexts + context_len - 1;
    let n_targets = n - target_len + 1;
    let span = context_len - target_len;

    let mut out = Vec::with_capacity(n_targets);
    let mut deque: VecDeque<usize> = VecDeque::new();
    for q in 0..n_targets {
        if q < n_contexts {
            while let Some(&back) = deque.back() {
                if sigma[back] <= sigma[q] {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(q);
        }
        let lo = q.saturating_sub(span);
        while let Some(&front) = deque.front() {
            if front < lo {
                deque.pop_front();
            } else {
                break;
            }
        }
        out.push(deque.front().map_or(0.0, |&j| sigma[j]));
    }
    Ok(WindowedMaxStd {
        context_len,
        target_len,
        max_sigma_ctx: out,
    })
}

/// Everything precomputed once per (series, context length, target length).
#[derive(Clone, Debug)]
pub struct SeriesStats {
    pub context_len: usize,
    pub target_len: usize,
    pub target: MovingStats,
    pub context: MovingStats,
    pub max_ctx: WindowedMaxStd,
}

impl SeriesStats {
    pub fn new(ts: &TimeSeries, context_len: usize, target_len: usize) -> Result<Self> {
        if target_len == 0 || target_len > context_len {
            return Err(DiscordError::InvalidWindow(format!(
                "target length {target_len} must be in 1..={context_len}"
            )));
        }
        let target = compute_moving_stats(ts, target_len)?;
        let context = compute_moving_stats(ts, context_len)?;
        let max_ctx = compute_window_max_std(&context, context_len, target_len)?;
        Ok(Self {
            context_len,
            target_len,
            target,
            context,
            max_ctx,
        })
    }

    pub fn n_targets(&self) -> usize {
        self.target.len()
    }

    pub fn n_contexts(&self) -> usize {
        self.context.len()
    }

    /// Context starts enclosing target `q`.
    pub fn contexts_of(&self, q: usize) -> std::ops::Range<usize> {
        enclosing_contexts(q, self.context_len, self.target_len, self.n_contexts())
    }
}

/// Dot products between the window anchored at `anchor` and every window of
/// the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct QtRow {
    pub anchor: usize,
    pub window_len: usize,
    pub qt: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl QtRow {
    /// Row computed by direct dot products.
    pub fn direct(t: &[f64], window_len: usize, anchor: usize) -> Self {
        let w = window_len;
        let count = t.len() + 1 - w;
        let a = &t[anchor..anchor + w];
        let qt = (0..count).map(|q| dot(a, &t[q..q + w])).collect();
        Self {
            anchor,
            window_len: w,
            qt,
        }
    }

    /// Row for `anchor`, chained from the nearest refresh point at or below
    /// it. The values depend only on `anchor`, never on where a caller
    /// started streaming.
    pub fn at(t: &[f64], window_len: usize, anchor: usize) -> Self {
        let base = anchor - anchor % QT_REFRESH_PERIOD;
        let mut row = Self::direct(t, window_len, base);
        while row.anchor < anchor {
            row.advance(t);
        }
        row
    }

    /// Move the anchor forward by one in place.
    pub fn advance(&mut self, t: &[f64]) {
        let w = self.window_len;
        let p = self.anchor + 1;
        if p.is_multiple_of(QT_REFRESH_PERIOD) {
            *self = Self::direct(t, w, p);
            return;
        }
        let drop = t[p - 1];
        let add = t[p + w - 1];
        let qt = &mut self.qt;
        for q in (1..qt.len()).rev() {
            qt[q] = qt[q - 1] - drop * t[q - 1] + add * t[q + w - 1];
        }
        qt[0] = dot(&t[p..p + w], &t[..w]);
        self.anchor = p;
    }
}

/// Row of target dot products for anchor 0.
pub fn qt_first_row(ts: &TimeSeries, l: usize) -> Result<QtRow> {
    if l == 0 || l > ts.len() {
        return Err(DiscordError::InvalidWindow(format!(
            "window length {l} must be in 1..={}",
            ts.len()
        )));
    }
    Ok(QtRow::direct(ts.values(), l, 0))
}

/// Row for anchor `prev.anchor + 1`.
pub fn qt_next_row(prev: &QtRow, ts: &TimeSeries) -> Result<QtRow> {
    let count = ts.len() + 1 - prev.window_len;
    if prev.anchor + 1 >= count {
        return Err(DiscordError::InvalidWindow(format!(
            "anchor {} is the last valid window",
            prev.anchor
        )));
    }
    let mut next = prev.clone();
    next.advance(ts.values());
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct_stats(t: &[f64], w: usize) -> (Vec<f64>, Vec<f64>) {
        t.windows(w)
            .map(|win| {
                let m = win.iter().sum::<f64>() / w as f64;
                let v = win.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / w as f64;
                (m, v.sqrt())
            })
            .unzip()
    }

    fn random_series(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = 0.0;
        (0..n)
            .map(|_| {
                acc += rng.random_range(-1.0..1.0);
                acc
            })
            .collect()
    }

    #[test]
    fn constant_series_is_flat() {
        let ts = TimeSeries::new(vec![1.0; 4]).unwrap();
        let s = compute_moving_stats(&ts, 2).unwrap();
        assert_eq!(s.mu, vec![1.0, 1.0, 1.0]);
        assert_eq!(s.sigma, vec![0.0, 0.0, 0.0]);
        assert!(s.is_flat(1));
    }

    #[test]
    fn three_point_window() {
        let ts = TimeSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        let s = compute_moving_stats(&ts, 3).unwrap();
        assert!((s.mu[0] - 2.0).abs() < 1e-12);
        assert!((s.sigma[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn oversized_window_is_rejected() {
        let ts = TimeSeries::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            compute_moving_stats(&ts, 3),
            Err(DiscordError::InvalidWindow(_))
        ));
        assert!(compute_moving_stats(&ts, 0).is_err());
    }

    #[test]
    fn rejects_nan() {
        assert_eq!(
            TimeSeries::new(vec![0.0, f64::NAN]),
            Err(DiscordError::NonFinite { index: 1 })
        );
    }

    #[test]
    fn moving_stats_match_direct() {
        for seed in 0..20 {
            let t = random_series(seed, 500);
            let ts = TimeSeries::new(t.clone()).unwrap();
            for w in [1, 2, 7, 40, 500] {
                let s = compute_moving_stats(&ts, w).unwrap();
                let (mu, sigma) = direct_stats(&t, w);
                for k in 0..mu.len() {
                    assert!((s.mu[k] - mu[k]).abs() <= 1e-9);
                    assert!((s.sigma[k] - sigma[k]).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn flat_stretch_inside_varying_series() {
        let mut t = random_series(3, 50);
        t.extend(std::iter::repeat_n(12.345, 30));
        t.extend(random_series(4, 50));
        let ts = TimeSeries::new(t).unwrap();
        let s = compute_moving_stats(&ts, 10).unwrap();
        for k in 50..=70 {
            assert!(s.is_flat(k), "window {k} should be flat");
        }
        assert!(!s.is_flat(49));
        assert!(!s.is_flat(71));
    }

    fn brute_window_max(sigma: &[f64], big: usize, small: usize, n: usize) -> Vec<f64> {
        (0..n - small + 1)
            .map(|q| {
                enclosing_contexts(q, big, small, sigma.len())
                    .map(|j| sigma[j])
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    #[test]
    fn window_max_constant() {
        let stats = MovingStats {
            window_len: 4,
            mu: vec![0.0; 7],
            sigma: vec![2.5; 7],
        };
        let m = compute_window_max_std(&stats, 4, 2).unwrap();
        assert_eq!(m.max_sigma_ctx.len(), 9);
        assert!(m.max_sigma_ctx.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn window_max_small_example() {
        // three contexts of length 2 over a length-4 series, targets of length 1
        let stats = MovingStats {
            window_len: 2,
            mu: vec![0.0; 3],
            sigma: vec![1.0, 5.0, 2.0],
        };
        let m = compute_window_max_std(&stats, 2, 1).unwrap();
        // targets 1 and 2 see context ranges {0,1} and {1,2}
        assert_eq!(m.max_sigma_ctx[1..3], [5.0, 5.0]);
        assert_eq!(m.max_sigma_ctx, vec![1.0, 5.0, 5.0, 2.0]);
    }

    #[test]
    fn window_max_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.random_range(3..80);
            let big = rng.random_range(1..=n);
            let small = rng.random_range(1..=big);
            let mut sigma: Vec<f64> = (0..n - big + 1)
                .map(|_| rng.random_range(0.0..10.0))
                .collect();
            for s in sigma.iter_mut() {
                if rng.random_bool(0.2) {
                    *s = 0.0;
                }
            }
            let stats = MovingStats {
                window_len: big,
                mu: vec![0.0; sigma.len()],
                sigma: sigma.clone(),
            };
            let m = compute_window_max_std(&stats, big, small).unwrap();
            assert_eq!(m.max_sigma_ctx, brute_window_max(&sigma, big, small, n));
        }
    }

    #[test]
    fn qt_rows_small() {
        let ts = TimeSeries::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let row = qt_first_row(&ts, 2).unwrap();
        assert_eq!(row.qt, vec![5.0, 8.0, 11.0]);

        let ones = TimeSeries::new(vec![1.0; 9]).unwrap();
        assert!(qt_first_row(&ones, 4).unwrap().qt.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn qt_next_row_constant() {
        let ts = TimeSeries::new(vec![3.0; 12]).unwrap();
        let mut row = qt_first_row(&ts, 5).unwrap();
        for _ in 0..7 {
            row = qt_next_row(&row, &ts).unwrap();
            assert!(row.qt.iter().all(|&v| v == 45.0));
        }
        assert!(qt_next_row(&row, &ts).is_err());
    }

    #[test]
    fn qt_second_row_matches_direct() {
        let t = random_series(5, 200);
        let ts = TimeSeries::new(t.clone()).unwrap();
        let row = qt_next_row(&qt_first_row(&ts, 16).unwrap(), &ts).unwrap();
        let direct = QtRow::direct(&t, 16, 1);
        for (a, b) in row.qt.iter().zip(&direct.qt) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn qt_drift_after_long_chain() {
        let t = random_series(9, 10_200);
        let ts = TimeSeries::new(t.clone()).unwrap();
        let w = 64;
        let mut row = qt_first_row(&ts, w).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            row = qt_next_row(&row, &ts).unwrap();
        }
        let direct = QtRow::direct(&t, w, row.anchor);
        for (a, b) in row.qt.iter().zip(&direct.qt) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
        assert_eq!(row.anchor, 10_000);
        assert!(worst <= 1e-6, "relative drift {worst}");
    }

    #[test]
    fn qt_at_is_path_independent() {
        let t = random_series(21, 9000);
        let mut streamed = QtRow::direct(&t, 32, 4000);
        // streaming from a non-refresh start differs in rounding from `at`,
        // but `at` always reproduces itself
        for _ in 0..200 {
            streamed.advance(&t);
        }
        let a = QtRow::at(&t, 32, 4200);
        let b = QtRow::at(&t, 32, 4200);
        assert_eq!(a, b);
        let mut c = QtRow::at(&t, 32, 4100);
        for _ in 0..100 {
            c.advance(&t);
        }
        assert_eq!(a, c);
        for (x, y) in a.qt.iter().zip(&streamed.qt) {
            assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0));
        }
    }
}
