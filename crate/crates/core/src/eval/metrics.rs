use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Decoding;
use crate::dprtf::ChunkLabels;
use crate::error::{Error, Result};

/// Localization is a hit when the error is strictly below this many degrees.
pub const ERROR_TOLERANCE_DEG: f64 = 10.0;

/// Decodings of one scene next to its chunk labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneResult {
    pub id: String,
    pub decoding: Decoding,
    pub labels: ChunkLabels,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub chunks: usize,
    pub active: usize,
    pub declared: usize,
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub gross_acc: f64,
    /// Mean error over hits; `None` without hits.
    pub fine_error: Option<f64>,
    pub far: f64,
    pub mdr: f64,
    pub threshold: f64,
    pub tolerance_deg: f64,
    pub counts: Counts,
}

/// One estimate slot of one chunk, as written to the metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub scene_id: String,
    pub chunk: usize,
    pub slot: usize,
    pub est_azimuth: f64,
    pub score: f64,
    pub active: bool,
    pub gt_azimuth: f64,
    pub gt_active: bool,
    /// Ground-truth slot this estimate was assigned to.
    pub matched: Option<usize>,
    pub error_deg: Option<f64>,
}

#[derive(Clone, Copy)]
struct Assignment {
    total: f64,
    hits: usize,
}

/// Pairs every declared estimate (or every ground truth, whichever is fewer)
/// with a distinct partner, minimizing the summed absolute error. Exact ties
/// prefer more hits, then the first assignment found.
pub(crate) fn assign(est: &[f64], gt: &[f64], tol: f64) -> Vec<(usize, usize, f64)> {
    fn rec(
        i: usize,
        est: &[f64],
        gt: &[f64],
        tol: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize, f64)>,
        best: &mut Option<(Assignment, Vec<(usize, usize, f64)>)>,
    ) {
        let want = est.len().min(gt.len());
        if cur.len() == want {
            let a = Assignment {
                total: cur.iter().map(|m| m.2).sum(),
                hits: cur.iter().filter(|m| m.2 < tol).count(),
            };
            let better = match best {
                None => true,
                Some((b, _)) => a.total < b.total || (a.total == b.total && a.hits > b.hits),
            };
            if better {
                *best = Some((a, cur.clone()));
            }
            return;
        }
        if i == est.len() {
            return;
        }
        // estimate i left unmatched (only possible when estimates outnumber truths)
        if est.len() - i > want - cur.len() {
            rec(i + 1, est, gt, tol, used, cur, best);
        }
        for j in 0..gt.len() {
            if used[j] {
                continue;
            }
            used[j] = true;
            cur.push((i, j, (est[i] - gt[j]).abs()));
            rec(i + 1, est, gt, tol, used, cur, best);
            cur.pop();
            used[j] = false;
        }
    }
    let mut best = None;
    rec(0, est, gt, tol, &mut vec![false; gt.len()], &mut Vec::new(), &mut best);
    best.map(|b| b.1).unwrap_or_default()
}

/// Misses and false alarms of one chunk for a declared slot set, plus the
/// per-estimate assignment `(est slot, gt slot, error)`.
pub(crate) fn chunk_outcome(
    d: &Decoding,
    labels: &ChunkLabels,
    chunk: usize,
    declared: &[bool],
    tol: f64,
) -> (usize, usize, usize, Vec<(usize, usize, f64)>) {
    let est_slots: Vec<usize> = (0..d.n_slots).filter(|&q| declared[q]).collect();
    let gt_slots: Vec<usize> = (0..labels.n_slots).filter(|&q| labels.is_active(chunk, q)).collect();
    let est: Vec<f64> = est_slots.iter().map(|&q| d.get(chunk, q).azimuth_deg).collect();
    let gt: Vec<f64> = gt_slots.iter().map(|&q| labels.azimuth(chunk, q)).collect();
    let pairs: Vec<(usize, usize, f64)> = assign(&est, &gt, tol)
        .into_iter()
        .map(|(i, j, e)| (est_slots[i], gt_slots[j], e))
        .collect();
    let hits = pairs.iter().filter(|p| p.2 < tol).count();
    (hits, gt.len() - hits, est.len() - hits, pairs)
}

fn check_shapes(r: &SceneResult) -> Result<()> {
    if r.decoding.n_chunks() != r.labels.n_chunks() || r.decoding.n_slots != r.labels.n_slots {
        return Err(Error::Dimension(format!(
            "scene {}: {} chunks x {} slots decoded, labels have {} x {}",
            r.id,
            r.decoding.n_chunks(),
            r.decoding.n_slots,
            r.labels.n_chunks(),
            r.labels.n_slots
        )));
    }
    Ok(())
}

/// Chunk-level metrics at activity threshold `threshold` and error tolerance `tol`.
pub fn evaluate(results: &[SceneResult], threshold: f64, tol: f64) -> Result<(MetricsReport, Vec<MetricsRow>)> {
    let mut counts = Counts::default();
    let mut err_sum = 0.0;
    let mut rows = Vec::new();
    for r in results {
        check_shapes(r)?;
        let d = &r.decoding;
        for c in 0..d.n_chunks() {
            let declared: Vec<bool> = (0..d.n_slots).map(|q| d.is_active(c, q, threshold)).collect();
            let (hits, misses, fa, pairs) = chunk_outcome(d, &r.labels, c, &declared, tol);
            counts.chunks += 1;
            counts.active += hits + misses;
            counts.declared += hits + fa;
            counts.hits += hits;
            counts.misses += misses;
            counts.false_alarms += fa;
            err_sum += pairs.iter().filter(|p| p.2 < tol).map(|p| p.2).sum::<f64>();
            for q in 0..d.n_slots {
                let e = d.get(c, q);
                let m = pairs.iter().find(|p| p.0 == q);
                rows.push(MetricsRow {
                    scene_id: r.id.clone(),
                    chunk: c,
                    slot: q,
                    est_azimuth: e.azimuth_deg,
                    score: e.score,
                    active: declared[q],
                    gt_azimuth: r.labels.azimuth(c, q),
                    gt_active: r.labels.is_active(c, q),
                    matched: m.map(|p| p.1),
                    error_deg: m.map(|p| p.2),
                });
            }
        }
    }
    if counts.active == 0 {
        return Err(Error::Input("metrics are undefined without active ground truth".into()));
    }
    let a = counts.active as f64;
    let report = MetricsReport {
        gross_acc: counts.hits as f64 / a,
        fine_error: (counts.hits > 0).then(|| err_sum / counts.hits as f64),
        far: counts.false_alarms as f64 / a,
        mdr: counts.misses as f64 / a,
        threshold,
        tolerance_deg: tol,
        counts,
    };
    Ok((report, rows))
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut s = String::from("scene_id,chunk,slot,est_azimuth,score,active,gt_azimuth,gt_active,matched,error_deg\n");
    for r in rows {
        let matched = r.matched.map(|m| m.to_string()).unwrap_or_default();
        let err = r.error_deg.map(|e| e.to_string()).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{matched},{err}",
            r.scene_id, r.chunk, r.slot, r.est_azimuth, r.score, r.active as u8, r.gt_azimuth, r.gt_active as u8
        )
        .expect("string write");
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn write_summary(path: &Path, report: &MetricsReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
