//! Streaming search kernel shared by every algorithm.
//!
//! The outer loop over targets is split into fixed chunks that run in
//! parallel. Each chunk keeps
//!
//! * the target dot-product row `QT[p][.]`,
//! * a ring of the `L - l + 1` most recent context rows, each holding an
//!   additive penalty per reference context (`0` when the pair is
//!   admissible, `+inf` otherwise).
//!
//! Every streamed row is a pure function of its anchor (see
//! [`QtRow::at`]), so results do not depend on chunking or thread count.

use std::ops::Range;

use rayon::prelude::*;

use super::{is_self_match, Algorithm, Neighbor, Prepared, SearchMetrics};
use crate::bound::{fill_bounds, SortedCursor};
use crate::distance::{decorrelation, finish_distance, z_norm_dist_from_dot, ContextTerms};
use crate::stats::QtRow;

const CHUNK: usize = 512;

pub(super) fn run(prep: &Prepared<'_>, algorithm: Algorithm) -> (Vec<Option<Neighbor>>, SearchMetrics) {
    let n_targets = prep.stats.n_targets();
    let direct = (algorithm == Algorithm::Brute).then(|| direct_context_moments(prep));
    let chunks: Vec<Range<usize>> = (0..n_targets)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(n_targets))
        .collect();
    let parts: Vec<(Vec<Option<Neighbor>>, SearchMetrics)> = chunks
        .into_par_iter()
        .map(|range| Worker::new(prep, algorithm, direct.as_deref(), range.start).run(range))
        .collect();

    let mut profile = Vec::with_capacity(n_targets);
    let mut metrics = SearchMetrics::default();
    for (part, m) in parts {
        profile.extend(part);
        metrics.merge(&m);
    }
    (profile, metrics)
}

/// Two-pass mean and standard deviation of every context, for the
/// direct-sum kernel.
fn direct_context_moments(prep: &Prepared<'_>) -> Vec<(f64, f64)> {
    let big = prep.context_len();
    prep.ts
        .values()
        .windows(big)
        .map(|w| {
            let m = w.iter().sum::<f64>() / big as f64;
            let v = w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / big as f64;
            (m, v.sqrt())
        })
        .collect()
}

struct Worker<'w, 'a> {
    prep: &'w Prepared<'a>,
    algorithm: Algorithm,
    direct: Option<&'w [(f64, f64)]>,
    t: &'a [f64],
    big: usize,
    small: usize,
    ring: usize,
    n_targets: usize,
    n_contexts: usize,

    target_qt: QtRow,
    ctx_qt: Option<QtRow>,
    next_ctx: usize,
    /// `ring` rows of `n_contexts` penalties; row for context `i` lives at
    /// slot `i % ring`.
    penalties: Vec<f64>,

    p_terms: Vec<Option<ContextTerms>>,
    q_ratio: Vec<f64>,
    q_offset: Vec<f64>,
    q_inv: Vec<f64>,
    row_buf: Vec<f64>,
    lb: Vec<f64>,
    items: Vec<usize>,
    metrics: SearchMetrics,
}

impl<'w, 'a> Worker<'w, 'a> {
    fn new(prep: &'w Prepared<'a>, algorithm: Algorithm, direct: Option<&'w [(f64, f64)]>, start: usize) -> Self {
        let st = &prep.stats;
        let (big, small) = (st.context_len, st.target_len);
        let ring = big - small + 1;
        let n_contexts = st.n_contexts();
        let t = prep.ts.values();
        Self {
            prep,
            algorithm,
            direct,
            t,
            big,
            small,
            ring,
            n_targets: st.n_targets(),
            n_contexts,
            target_qt: QtRow::at(t, small, start),
            ctx_qt: None,
            next_ctx: start.saturating_sub(big - small),
            penalties: vec![f64::INFINITY; ring * n_contexts],
            p_terms: Vec::with_capacity(ring),
            q_ratio: vec![0.0; ring],
            q_offset: vec![0.0; ring],
            q_inv: vec![0.0; ring],
            row_buf: vec![0.0; ring],
            lb: if algorithm == Algorithm::Pruned {
                vec![0.0; st.n_targets()]
            } else {
                Vec::new()
            },
            items: Vec::new(),
            metrics: SearchMetrics::default(),
        }
    }

    fn run(mut self, range: Range<usize>) -> (Vec<Option<Neighbor>>, SearchMetrics) {
        let mut out = Vec::with_capacity(range.len());
        for p in range {
            while self.target_qt.anchor < p {
                self.target_qt.advance(self.t);
            }
            self.ensure_contexts(p);
            out.push(self.process(p));
        }
        (out, self.metrics)
    }

    /// Build penalty rows for every context that can enclose target `p`.
    fn ensure_contexts(&mut self, p: usize) {
        let last = p.min(self.n_contexts - 1);
        while self.next_ctx <= last {
            let i = self.next_ctx;
            match &mut self.ctx_qt {
                Some(row) => row.advance(self.t),
                None => self.ctx_qt = Some(QtRow::at(self.t, self.big, i)),
            }
            self.fill_penalty_row(i);
            self.next_ctx += 1;
        }
    }

    fn fill_penalty_row(&mut self, i: usize) {
        let ctx = &self.prep.stats.context;
        let eps = self.prep.epsilon;
        let big = self.big;
        let qt = &self.ctx_qt.as_ref().expect("context row").qt;
        let slot = (i % self.ring) * self.n_contexts;
        let row = &mut self.penalties[slot..slot + self.n_contexts];
        if ctx.is_flat(i) {
            row.fill(f64::INFINITY);
            return;
        }
        let (mu_i, sd_i) = (ctx.mu[i], ctx.sigma[i]);
        for (j, pen) in row.iter_mut().enumerate() {
            let ok = !ctx.is_flat(j)
                && i.abs_diff(j) > big
                && (eps.is_infinite()
                    || z_norm_dist_from_dot(big, qt[j], mu_i, sd_i, ctx.mu[j], ctx.sigma[j]) < eps);
            *pen = if ok { 0.0 } else { f64::INFINITY };
        }
    }

    fn process(&mut self, p: usize) -> Option<Neighbor> {
        let st = &self.prep.stats;
        let tg = &st.target;
        if tg.is_flat(p) {
            return None;
        }
        let ctx = &st.context;
        self.p_terms.clear();
        for i in st.contexts_of(p) {
            self.p_terms.push(
                (!ctx.is_flat(i)).then(|| ContextTerms::new(tg.mu[p], tg.sigma[p], ctx.mu[i], ctx.sigma[i])),
            );
        }

        let mut nn: Option<Neighbor> = None;
        let mut candidates = 0u64;
        let mut evaluated = 0u64;
        match self.algorithm {
            Algorithm::Brute | Algorithm::SmartBrute => {
                for q in 0..self.n_targets {
                    if is_self_match(p, q, self.big) || tg.is_flat(q) {
                        continue;
                    }
                    candidates += 1;
                    evaluated += 1;
                    let found = self.evaluate(p, q);
                    update(&mut nn, found);
                }
            }
            Algorithm::Pruned => {
                let mut lb = std::mem::take(&mut self.lb);
                let mut items = std::mem::take(&mut self.items);
                fill_bounds(p, &self.target_qt.qt, st, &mut lb);
                items.clear();
                items.extend((0..self.n_targets).filter(|&q| !is_self_match(p, q, self.big) && !tg.is_flat(q)));
                candidates = items.len() as u64;
                self.metrics.lb_calls += candidates;
                for q in SortedCursor::new(&lb, &mut items) {
                    if nn.is_some_and(|n| n.distance <= lb[q]) || lb[q].is_infinite() {
                        break;
                    }
                    evaluated += 1;
                    let found = self.evaluate(p, q);
                    update(&mut nn, found);
                }
                self.lb = lb;
                self.items = items;
            }
        }
        self.metrics.candidate_pairs += candidates;
        self.metrics.evaluated_pairs += evaluated;
        self.metrics.pruned_pairs += candidates - evaluated;
        nn
    }

    /// Optimal context-aware distance for (p, q) over admissible context
    /// pairs, with ties resolved to the smallest `i`, then `j`.
    fn evaluate(&mut self, p: usize, q: usize) -> Option<Neighbor> {
        let st = &self.prep.stats;
        let i_range = st.contexts_of(p);
        let j_range = st.contexts_of(q);
        self.metrics.distance_calls += (i_range.len() * j_range.len()) as u64;
        if j_range.is_empty() {
            return None;
        }
        let best = match self.direct {
            Some(moments) => self.block_direct(p, q, i_range, j_range.clone(), moments),
            None => self.block_closed(p, q, i_range, j_range.clone()),
        };
        best.map(|(distance, i, j)| Neighbor {
            distance,
            reference_target: q,
            context: i,
            reference_context: j,
        })
    }

    fn block_closed(&mut self, p: usize, q: usize, i_range: Range<usize>, j_range: Range<usize>) -> Option<(f64, usize, usize)> {
        let st = &self.prep.stats;
        let (tg, ctx) = (&st.target, &st.context);
        let width = j_range.len();
        for (k, j) in j_range.clone().enumerate() {
            if ctx.is_flat(j) {
                self.q_ratio[k] = 0.0;
                self.q_offset[k] = 0.0;
                self.q_inv[k] = 0.0;
            } else {
                let b = ContextTerms::new(tg.mu[q], tg.sigma[q], ctx.mu[j], ctx.sigma[j]);
                self.q_ratio[k] = b.ratio;
                self.q_offset[k] = b.offset;
                self.q_inv[k] = b.inv;
            }
        }
        let s = decorrelation(self.target_qt.qt[q], self.small, tg.mu[p], tg.sigma[p], tg.mu[q], tg.sigma[q]);

        let mut best = f64::INFINITY;
        let mut arg = (0, 0);
        for (ii, i) in i_range.enumerate() {
            let Some(a) = self.p_terms[ii] else { continue };
            let slot = (i % self.ring) * self.n_contexts + j_range.start;
            let pen = &self.penalties[slot..slot + width];
            let c = 2.0 * s * a.inv;
            let row_min = block_row(
                &mut self.row_buf[..width],
                pen,
                &self.q_ratio[..width],
                &self.q_offset[..width],
                &self.q_inv[..width],
                a,
                c,
            );
            if row_min < best {
                let k = self.row_buf[..width].iter().position(|&v| v == row_min).expect("row minimum");
                best = row_min;
                arg = (i, j_range.start + k);
            }
        }
        best.is_finite().then(|| (finish_distance(best, self.small), arg.0, arg.1))
    }

    fn block_direct(
        &mut self,
        p: usize,
        q: usize,
        i_range: Range<usize>,
        j_range: Range<usize>,
        moments: &[(f64, f64)],
    ) -> Option<(f64, usize, usize)> {
        let tp = &self.t[p..p + self.small];
        let tq = &self.t[q..q + self.small];
        let mut best = f64::INFINITY;
        let mut arg = (0, 0);
        for i in i_range {
            let slot = (i % self.ring) * self.n_contexts;
            let (mi, si) = moments[i];
            for j in j_range.clone() {
                if self.penalties[slot + j] != 0.0 {
                    continue;
                }
                let (mj, sj) = moments[j];
                let sum: f64 = tp
                    .iter()
                    .zip(tq)
                    .map(|(x, y)| {
                        let diff = (x - mi) / si - (y - mj) / sj;
                        diff * diff
                    })
                    .sum();
                if sum < best {
                    best = sum;
                    arg = (i, j);
                }
            }
        }
        best.is_finite().then(|| (best.sqrt(), arg.0, arg.1))
    }
}

fn update(nn: &mut Option<Neighbor>, found: Option<Neighbor>) {
    let Some(f) = found else { return };
    let better = match nn {
        None => true,
        Some(cur) => {
            f.distance < cur.distance
                || (f.distance == cur.distance && f.reference_target < cur.reference_target)
        }
    };
    if better {
        *nn = Some(f);
    }
}

/// Scaled squared distances of one context row against a block of
/// reference contexts, written to `out`; returns their minimum.
#[inline]
fn block_row(
    out: &mut [f64],
    pen: &[f64],
    ratio: &[f64],
    offset: &[f64],
    inv: &[f64],
    a: ContextTerms,
    c: f64,
) -> f64 {
    for ((((o, &pn), &r), &of), &iv) in out.iter_mut().zip(pen).zip(ratio).zip(offset).zip(inv) {
        let dr = a.ratio - r;
        let dof = a.offset - of;
        *o = dr * dr + c * iv + dof * dof + pn;
    }
    let mut lanes = [f64::INFINITY; 8];
    let mut chunks = out.chunks_exact(8);
    for ch in &mut chunks {
        for (m, &v) in lanes.iter_mut().zip(ch) {
            *m = if v < *m { v } else { *m };
        }
    }
    let mut m = lanes.iter().fold(f64::INFINITY, |acc, &v| if v < acc { v } else { acc });
    for &v in chunks.remainder() {
        if v < m {
            m = v;
        }
    }
    m
}
