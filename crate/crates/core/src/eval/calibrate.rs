use serde::{Deserialize, Serialize};

use super::metrics::{chunk_outcome, SceneResult};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub mdr: f64,
    pub far: f64,
}

/// MDR and FAR at a threshold below every score, between each pair of
/// neighbouring distinct scores, and above every score, in increasing order.
///
/// Each chunk only changes its outcome when the threshold passes one of its
/// own scores, so the sweep accumulates per-chunk deltas at those scores.
pub fn threshold_sweep(results: &[SceneResult], tol: f64) -> Result<Vec<SweepPoint>> {
    let mut label_active = 0usize;
    let mut label_total = 0usize;
    let mut events: Vec<(f64, i64, i64)> = Vec::new();
    let (mut misses, mut fas) = (0i64, 0i64);
    for r in results {
        let d = &r.decoding;
        if d.n_chunks() != r.labels.n_chunks() || d.n_slots != r.labels.n_slots {
            return Err(Error::Dimension(format!("scene {}: decoding and labels disagree", r.id)));
        }
        label_active += r.labels.n_active();
        label_total += r.labels.active.len();
        for c in 0..d.n_chunks() {
            let mut scores: Vec<f64> = (0..d.n_slots).map(|q| d.get(c, q).score).collect();
            scores.sort_by(f64::total_cmp);
            scores.dedup();
            // threshold below every score of the chunk: all slots declared
            let outcome = |t: f64| {
                let declared: Vec<bool> = (0..d.n_slots).map(|q| d.get(c, q).score >= t).collect();
                let (_, m, f, _) = chunk_outcome(d, &r.labels, c, &declared, tol);
                (m as i64, f as i64)
            };
            let (mut m, mut f) = outcome(f64::NEG_INFINITY);
            misses += m;
            fas += f;
            for (i, &s) in scores.iter().enumerate() {
                // just above s: only slots scoring above s remain
                let next = scores.get(i + 1).copied().unwrap_or(f64::INFINITY);
                let (m2, f2) = outcome(next);
                events.push((s, m2 - m, f2 - f));
                (m, f) = (m2, f2);
            }
        }
    }
    if label_active == 0 || label_active == label_total {
        return Err(Error::Input(
            "calibration needs both active and inactive ground-truth slots".into(),
        ));
    }
    if events.is_empty() {
        return Err(Error::Input("no scores to calibrate on".into()));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let a = label_active as f64;
    let point = |t: f64, m: i64, f: i64| SweepPoint {
        threshold: t,
        mdr: m as f64 / a,
        far: f as f64 / a,
    };
    let lowest = events[0].0;
    let mut out = vec![point(if lowest > 0.0 { lowest / 2.0 } else { lowest - 1.0 }, misses, fas)];
    let mut i = 0;
    while i < events.len() {
        let s = events[i].0;
        while i < events.len() && events[i].0 == s {
            misses += events[i].1;
            fas += events[i].2;
            i += 1;
        }
        let t = match events.get(i) {
            Some(e) => 0.5 * (s + e.0),
            None => s + s.abs().max(1.0),
        };
        out.push(point(t, misses, fas));
    }
    Ok(out)
}

/// Threshold the sweep finds closest to MDR = FAR; the middle of the first
/// run of equally close candidates.
pub fn calibrate_threshold(results: &[SceneResult], tol: f64) -> Result<SweepPoint> {
    let sweep = threshold_sweep(results, tol)?;
    let gap = |p: &SweepPoint| (p.mdr - p.far).abs();
    let best = sweep.iter().map(gap).fold(f64::INFINITY, f64::min);
    let start = sweep.iter().position(|p| gap(p) == best).expect("non-empty sweep");
    let len = sweep[start..].iter().take_while(|p| gap(p) == best).count();
    Ok(sweep[start + (len - 1) / 2])
}
