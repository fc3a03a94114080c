//! CLEAR-MOT (MOTA) and identity (IDF1) evaluation with the standard
//! per-frame IoU >= 0.5 gate and optimal min-cost assignment.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::assoc::iou;
use crate::model::BoundingBox;
use crate::mot::TrackStore;

/// IoU admissibility gate for both per-frame and identity-level matching.
pub const IOU_GATE: f64 = 0.5;

const INADMISSIBLE: f64 = 1e6;

/// Minimum-cost assignment of rows to columns (rows <= cols), shortest
/// augmenting path with potentials, O(n^2 m).
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment requires rows <= cols");
    // 1-based arrays; way[j] is the previous column on the augmenting path.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1]; // row assigned to column j (1-based; 0 = free)
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] > 0 {
            result[p[j] - 1] = j - 1;
        }
    }
    result
}

/// One frame of CLEAR-MOT matching: pairs persisting from the prior frame
/// are kept when still above the gate; the rest are matched by optimal
/// assignment on (1 - IoU) with the gate as admissibility.
pub fn frame_match(
    gt: &[(u64, BoundingBox)],
    pred: &[(u64, BoundingBox)],
    prior: &HashMap<u64, u64>,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut used_g = vec![false; gt.len()];
    let mut used_p = vec![false; pred.len()];
    // Persistence pass: a prior (gt id, pred id) pair survives while gated in.
    for (g, &(gid, gbox)) in gt.iter().enumerate() {
        if let Some(&pid) = prior.get(&gid) {
            for (j, &(id, pbox)) in pred.iter().enumerate() {
                if used_p[j] || id != pid {
                    continue;
                }
                if iou(&gbox, &pbox) >= IOU_GATE {
                    pairs.push((g, j));
                    used_g[g] = true;
                    used_p[j] = true;
                }
                break;
            }
        }
    }
    let rest_g: Vec<usize> = (0..gt.len()).filter(|&g| !used_g[g]).collect();
    let rest_p: Vec<usize> = (0..pred.len()).filter(|&j| !used_p[j]).collect();
    if rest_g.is_empty() || rest_p.is_empty() {
        pairs.sort_unstable();
        return pairs;
    }
    // Build the cost matrix with rows <= cols (transpose when needed).
    let transposed = rest_g.len() > rest_p.len();
    let (rows, cols) = if transposed {
        (&rest_p, &rest_g)
    } else {
        (&rest_g, &rest_p)
    };
    let cost: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| {
            cols.iter()
                .map(|&c| {
                    let (gb, pb) = if transposed {
                        (gt[c].1, pred[r].1)
                    } else {
                        (gt[r].1, pred[c].1)
                    };
                    let v = iou(&gb, &pb);
                    if v >= IOU_GATE {
                        1.0 - v
                    } else {
                        INADMISSIBLE
                    }
                })
                .collect()
        })
        .collect();
    let assignment = min_cost_assignment(&cost);
    for (ri, &ci) in assignment.iter().enumerate() {
        if ci == usize::MAX || cost[ri][ci] >= INADMISSIBLE {
            continue;
        }
        let (g, j) = if transposed {
            (cols[ci], rows[ri])
        } else {
            (rows[ri], cols[ci])
        };
        pairs.push((g, j));
    }
    pairs.sort_unstable();
    pairs
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub mota: f64,
    pub idf1: f64,
    pub fp: u64,
    pub fn_: u64,
    pub idsw: u64,
    pub gt_count: u64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

/// CLEAR-MOT event counting over the union of frames in both stores.
pub fn mota(gt: &TrackStore, pred: &TrackStore) -> EvalReport {
    let frames: BTreeSet<u64> = gt.keys().chain(pred.keys()).copied().collect();
    let empty: Vec<(u64, BoundingBox)> = Vec::new();
    let mut last_pred: HashMap<u64, u64> = HashMap::new();
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    let mut idsw = 0u64;
    let mut gt_count = 0u64;
    for &f in &frames {
        let g = gt.get(&f).unwrap_or(&empty);
        let p = pred.get(&f).unwrap_or(&empty);
        let pairs = frame_match(g, p, &last_pred);
        gt_count += g.len() as u64;
        fn_ += (g.len() - pairs.len()) as u64;
        fp += (p.len() - pairs.len()) as u64;
        for &(gi, pj) in &pairs {
            let gid = g[gi].0;
            let pid = p[pj].0;
            if let Some(&old) = last_pred.get(&gid) {
                if old != pid {
                    idsw += 1;
                }
            }
            last_pred.insert(gid, pid);
        }
    }
    let mota = if gt_count > 0 {
        1.0 - (fn_ + fp + idsw) as f64 / gt_count as f64
    } else if fp + idsw == 0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    EvalReport {
        mota,
        fp,
        fn_,
        idsw,
        gt_count,
        ..EvalReport::default()
    }
}

/// Identity-level F1: one global min-cost bipartite matching between GT and
/// predicted identities maximizing total co-located frames.
pub fn idf1(gt: &TrackStore, pred: &TrackStore) -> EvalReport {
    // identity -> frame -> box
    let collect = |store: &TrackStore| -> BTreeMap<u64, BTreeMap<u64, BoundingBox>> {
        let mut m: BTreeMap<u64, BTreeMap<u64, BoundingBox>> = BTreeMap::new();
        for (&f, boxes) in store {
            for &(id, b) in boxes {
                m.entry(id).or_default().insert(f, b);
            }
        }
        m
    };
    let gids = collect(gt);
    let pids = collect(pred);
    let total_gt: u64 = gids.values().map(|m| m.len() as u64).sum();
    let total_pred: u64 = pids.values().map(|m| m.len() as u64).sum();

    let gvec: Vec<&BTreeMap<u64, BoundingBox>> = gids.values().collect();
    let pvec: Vec<&BTreeMap<u64, BoundingBox>> = pids.values().collect();
    let ng = gvec.len();
    let np = pvec.len();
    let mut idtp = 0u64;
    if ng > 0 && np > 0 {
        let coloc = |g: &BTreeMap<u64, BoundingBox>, p: &BTreeMap<u64, BoundingBox>| -> u64 {
            g.iter()
                .filter(|(f, gb)| p.get(f).map(|pb| iou(gb, pb) >= IOU_GATE).unwrap_or(false))
                .count() as u64
        };
        // Square matrix of size ng+np: pairing with a dummy costs the
        // identity's own frame count, so minimizing total cost maximizes
        // the total number of co-located frames.
        let n = ng + np;
        let mut cost = vec![vec![0.0f64; n]; n];
        let mut coloc_m = vec![vec![0u64; np]; ng];
        for (i, g) in gvec.iter().enumerate() {
            for (j, p) in pvec.iter().enumerate() {
                let c = coloc(g, p);
                coloc_m[i][j] = c;
                cost[i][j] = (g.len() + p.len()) as f64 - 2.0 * c as f64;
            }
            for j in np..n {
                cost[i][j] = g.len() as f64;
            }
        }
        for (row, p) in pvec.iter().enumerate() {
            for j in 0..np {
                cost[ng + row][j] = if j == row { p.len() as f64 } else { INADMISSIBLE };
            }
        }
        let assignment = min_cost_assignment(&cost);
        for (i, &j) in assignment.iter().enumerate().take(ng) {
            if j < np {
                idtp += coloc_m[i][j];
            }
        }
    }
    let idfp = total_pred - idtp;
    let idfn = total_gt - idtp;
    let denom = 2 * idtp + idfp + idfn;
    let idf1 = if denom == 0 {
        1.0
    } else {
        2.0 * idtp as f64 / denom as f64
    };
    EvalReport {
        idf1,
        idtp,
        idfp,
        idfn,
        ..EvalReport::default()
    }
}

/// Full evaluation of one sequence.
pub fn evaluate(gt: &TrackStore, pred: &TrackStore) -> EvalReport {
    let m = mota(gt, pred);
    let i = idf1(gt, pred);
    EvalReport {
        mota: m.mota,
        idf1: i.idf1,
        fp: m.fp,
        fn_: m.fn_,
        idsw: m.idsw,
        gt_count: m.gt_count,
        idtp: i.idtp,
        idfp: i.idfp,
        idfn: i.idfn,
    }
}

impl EvalReport {
    /// Aligned key-value text, four decimals.
    pub fn to_text(&self) -> String {
        format!(
            "MOTA     = {:.4}\n\
             IDF1     = {:.4}\n\
             FP       = {}\n\
             FN       = {}\n\
             IDSW     = {}\n\
             GT_count = {}\n\
             IDTP     = {}\n\
             IDFP     = {}\n\
             IDFN     = {}\n",
            self.mota, self.idf1, self.fp, self.fn_, self.idsw, self.gt_count, self.idtp,
            self.idfp, self.idfn
        )
    }

    pub fn csv_header() -> &'static str {
        "sequence,mota,idf1,fp,fn,idsw,gt_count,idtp,idfp,idfn"
    }

    pub fn to_csv_row(&self, sequence: &str) -> String {
        format!(
            "{},{:.4},{:.4},{},{},{},{},{},{},{}",
            sequence,
            self.mota,
            self.idf1,
            self.fp,
            self.fn_,
            self.idsw,
            self.gt_count,
            self.idtp,
            self.idfp,
            self.idfn
        )
    }
}
