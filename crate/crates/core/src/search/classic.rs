use crate::distance::z_norm_dist_from_dot;
use crate::error::{DiscordError, Result};
use crate::stats::{compute_moving_stats, QtRow, TimeSeries};

/// Z-normalized 1-NN distance of every length-`w` window against windows
/// starting more than `w` away. Flat windows, and windows with no
/// admissible neighbor, get `+inf`.
pub fn classic_profile(ts: &TimeSeries, w: usize) -> Result<Vec<f64>> {
    let stats = compute_moving_stats(ts, w)?;
    let t = ts.values();
    let count = stats.len();
    let mut out = vec![f64::INFINITY; count];
    let mut row = QtRow::at(t, w, 0);
    for (p, slot) in out.iter_mut().enumerate() {
        while row.anchor < p {
            row.advance(t);
        }
        if stats.is_flat(p) {
            continue;
        }
        let (mu_p, sd_p) = (stats.mu[p], stats.sigma[p]);
        let mut best = f64::INFINITY;
        for q in 0..count {
            if p.abs_diff(q) <= w || stats.is_flat(q) {
                continue;
            }
            let d = z_norm_dist_from_dot(w, row.qt[q], mu_p, sd_p, stats.mu[q], stats.sigma[q]);
            if d < best {
                best = d;
            }
        }
        *slot = best;
    }
    Ok(out)
}

/// Classic discord: the window whose z-normalized nearest non-self-match
/// neighbor is farthest. Returns (0-based start, nearest-neighbor distance).
pub fn classic_discord(ts: &TimeSeries, w: usize) -> Result<(usize, f64)> {
    let profile = classic_profile(ts, w)?;
    let mut best: Option<(usize, f64)> = None;
    for (p, &d) in profile.iter().enumerate() {
        if d.is_finite() && best.is_none_or(|(_, b)| d > b) {
            best = Some((p, d));
        }
    }
    best.ok_or(DiscordError::NoFeasibleTarget)
}
