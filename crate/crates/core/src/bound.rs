//! O(1) lower bound on the optimal context-aware distance of a target pair.
//!
//! Minimizing the context-aware distance over unconstrained context moments
//! gives `sigma_q / sigma_j * sqrt(l (1 - corr^2))` for positive correlation
//! and `sigma_q / sigma_j * sqrt(l)` otherwise. Replacing `sigma_j` by the
//! largest standard deviation among the contexts that can enclose `q`, and
//! taking the larger of the two symmetric versions, bounds every feasible
//! context pair from below. The context-similarity threshold and the
//! non-self-match rule are ignored here; dropping constraints only lowers
//! the bound, so it stays sound.

use std::cmp::Ordering;

use crate::distance::correlation_unchecked;
use crate::stats::{QtRow, SeriesStats};

/// Bound from the two target sigmas, the two windowed maximum context
/// sigmas and the target correlation.
#[inline]
pub fn bound_value(sd_p: f64, sd_q: f64, max_ctx_p: f64, max_ctx_q: f64, delta: f64, l: usize) -> f64 {
    let gamma = (sd_q / max_ctx_q).max(sd_p / max_ctx_p);
    let lf = l as f64;
    if delta > 0.0 {
        gamma * (lf * (1.0 - delta * delta).max(0.0)).sqrt()
    } else {
        gamma * lf.sqrt()
    }
}

/// Allowance for rounding in a correlation computed from a dot product.
/// The cancellation in `qt - l mu_p mu_q` grows with `|mu_p mu_q| / (sd_p sd_q)`,
/// and near `delta = 1` the square root magnifies it, so the bound uses a
/// slightly inflated correlation to stay below the exact distance.
const DELTA_SLACK: f64 = 1e-12;

#[inline]
pub(crate) fn bound_correlation(qt: f64, l: usize, mu_p: f64, sd_p: f64, mu_q: f64, sd_q: f64) -> f64 {
    let delta = correlation_unchecked(qt, l, mu_p, sd_p, mu_q, sd_q);
    inflate(delta, mu_p, sd_p, mu_q, sd_q)
}

#[inline]
fn inflate(delta: f64, mu_p: f64, sd_p: f64, mu_q: f64, sd_q: f64) -> f64 {
    let slack = DELTA_SLACK * (1.0 + (mu_p * mu_q).abs() / (sd_p * sd_q));
    (delta + slack).min(1.0)
}

/// Lower bound for targets `p` and `q` given their correlation `delta`.
///
/// `None` marks an infeasible pair: a flat target, or a target whose
/// enclosing contexts are all flat. The rounding allowance is applied here,
/// so pass the plain correlation.
pub fn lower_bound(p: usize, q: usize, delta: f64, stats: &SeriesStats) -> Option<f64> {
    let tg = &stats.target;
    let mx = &stats.max_ctx;
    if tg.is_flat(p) || tg.is_flat(q) || !mx.is_feasible(p) || !mx.is_feasible(q) {
        return None;
    }
    Some(bound_value(
        tg.sigma[p],
        tg.sigma[q],
        mx.get(p),
        mx.get(q),
        inflate(delta, tg.mu[p], tg.sigma[p], tg.mu[q], tg.sigma[q]),
        stats.target_len,
    ))
}

/// Bounds from one target to every reference target, with the visiting
/// order ascending by bound (ties by index).
#[derive(Clone, Debug, PartialEq)]
pub struct LbRow {
    pub anchor: usize,
    /// `+inf` for infeasible pairs.
    pub lb: Vec<f64>,
    pub sort_order: Vec<usize>,
}

pub(crate) fn by_bound(lb: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |a, b| lb[*a].total_cmp(&lb[*b]).then(a.cmp(b))
}

/// Fill `out[q]` with the bound for every reference target `q`.
pub(crate) fn fill_bounds(p: usize, qt: &[f64], stats: &SeriesStats, out: &mut [f64]) {
    let tg = &stats.target;
    let mx = &stats.max_ctx.max_sigma_ctx;
    let l = stats.target_len;
    let (mu_p, sd_p, mx_p) = (tg.mu[p], tg.sigma[p], mx[p]);
    if sd_p == 0.0 || mx_p == 0.0 {
        out.fill(f64::INFINITY);
        return;
    }
    for (q, slot) in out.iter_mut().enumerate() {
        let sd_q = tg.sigma[q];
        let mx_q = mx[q];
        *slot = if sd_q == 0.0 || mx_q == 0.0 {
            f64::INFINITY
        } else {
            let delta = bound_correlation(qt[q], l, mu_p, sd_p, tg.mu[q], sd_q);
            bound_value(sd_p, sd_q, mx_p, mx_q, delta, l)
        };
    }
}

/// Bounds for anchor `qt.anchor` against all reference targets.
pub fn lb_row(qt: &QtRow, stats: &SeriesStats) -> LbRow {
    let p = qt.anchor;
    let mut lb = vec![0.0; stats.n_targets()];
    fill_bounds(p, &qt.qt, stats, &mut lb);
    let mut sort_order: Vec<usize> = (0..lb.len()).collect();
    sort_order.sort_unstable_by(by_bound(&lb));
    LbRow {
        anchor: p,
        lb,
        sort_order,
    }
}

/// Yields candidate indices in ascending bound order, sorting lazily in
/// growing chunks. The visiting order equals a full sort by (bound, index),
/// but a search that stops early never pays for sorting the tail.
pub(crate) struct SortedCursor<'a> {
    lb: &'a [f64],
    items: &'a mut [usize],
    sorted_until: usize,
    pos: usize,
    chunk: usize,
}

impl<'a> SortedCursor<'a> {
    pub fn new(lb: &'a [f64], items: &'a mut [usize]) -> Self {
        Self {
            lb,
            items,
            sorted_until: 0,
            pos: 0,
            chunk: 64,
        }
    }

    fn extend_sorted(&mut self) {
        let rest = &mut self.items[self.sorted_until..];
        let take = self.chunk.min(rest.len());
        let cmp = by_bound(self.lb);
        if take < rest.len() {
            rest.select_nth_unstable_by(take - 1, &cmp);
        }
        rest[..take].sort_unstable_by(&cmp);
        self.sorted_until += take;
        self.chunk = self.chunk.saturating_mul(4);
    }
}

impl Iterator for SortedCursor<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.pos >= self.items.len() {
            return None;
        }
        if self.pos == self.sorted_until {
            self.extend_sorted();
        }
        let q = self.items[self.pos];
        self.pos += 1;
        Some(q)
    }
}
