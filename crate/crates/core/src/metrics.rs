//! Pixel-level segmentation metrics and mask-to-box conversion.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::exec::Execution;
use crate::imgio::{read_mask_png, BBox, BBoxList, BinaryMask};
use crate::{Error, Result};

/// Pixel confusion counts of a prediction against ground truth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn of(pred: &BinaryMask, gt: &BinaryMask) -> Result<Self> {
        if pred.dims() != gt.dims() {
            return Err(Error::dims("prediction", gt.dims(), pred.dims()));
        }
        let mut c = Confusion::default();
        for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
            match (p, g) {
                (1, 1) => c.tp += 1,
                (1, 0) => c.fp += 1,
                (0, 1) => c.fn_ += 1,
                _ => {}
            }
        }
        Ok(c)
    }

    /// `2tp / (2tp + fp + fn)`, 1 when both masks are empty.
    pub fn dice(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }

    /// 1 when the prediction is empty.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// 1 when the ground truth is empty.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(num: usize, denom: usize) -> f64 {
    if denom == 0 {
        1.0
    } else {
        num as f64 / denom as f64
    }
}

pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    Ok(Confusion::of(pred, gt)?.dice())
}

pub fn precision_recall(pred: &BinaryMask, gt: &BinaryMask) -> Result<(f64, f64)> {
    let c = Confusion::of(pred, gt)?;
    Ok((c.precision(), c.recall()))
}

/// Tight boxes of the 8-connected foreground components, ordered by
/// `(y_min, x_min)`.
pub fn boxes_from_mask(mask: &BinaryMask) -> BBoxList {
    let (w, h) = mask.dims();
    let labels = mask.labels();
    let mut seen = vec![false; w * h];
    let mut boxes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if labels[start] == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if labels[j] == 1 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        boxes.push(BBox::new(x0, y0, x1 + 1, y1 + 1));
    }
    boxes.sort_by_key(|b| (b.y_min, b.x_min));
    boxes
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub image: String,
    pub dice: f64,
    pub precision: f64,
    pub recall: f64,
    pub counts: Confusion,
}

/// Unweighted per-image means.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub dice: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean: EvalSummary,
}

pub const CSV_HEADER: &str = "image,dice,precision,recall,tp,fp,fn";

impl EvalReport {
    pub fn from_rows(rows: Vec<EvalRow>) -> Self {
        let n = rows.len().max(1) as f64;
        let avg = |f: &dyn Fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let mean = EvalSummary {
            dice: avg(&|r| r.dice),
            precision: avg(&|r| r.precision),
            recall: avg(&|r| r.recall),
            tp: avg(&|r| r.counts.tp as f64),
            fp: avg(&|r| r.counts.fp as f64),
            fn_: avg(&|r| r.counts.fn_ as f64),
        };
        Self { rows, mean }
    }

    /// Header, one row per image, then a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{},{},{}",
                r.image, r.dice, r.precision, r.recall, r.counts.tp, r.counts.fp, r.counts.fn_
            );
        }
        let m = &self.mean;
        let _ = writeln!(
            out,
            "mean,{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            m.dice, m.precision, m.recall, m.tp, m.fp, m.fn_
        );
        out
    }
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::InvalidParameter(format!("no file stem in {}", path.display())))
}

/// Pairs predictions with ground truth by file stem and scores each pair.
/// Rows are sorted by stem.
pub fn evaluate_dir(pred_paths: &[PathBuf], gt_paths: &[PathBuf]) -> Result<EvalReport> {
    evaluate_dir_with(pred_paths, gt_paths, Execution::default())
}

pub fn evaluate_dir_with(
    pred_paths: &[PathBuf],
    gt_paths: &[PathBuf],
    exec: Execution,
) -> Result<EvalReport> {
    let mut preds = BTreeMap::new();
    for p in pred_paths {
        preds.insert(stem(p)?, p.clone());
    }
    let mut gts = BTreeMap::new();
    for g in gt_paths {
        gts.insert(stem(g)?, g.clone());
    }
    if let Some(s) = preds.keys().find(|s| !gts.contains_key(*s)) {
        return Err(Error::Unpaired(format!("prediction {s} (no ground truth)")));
    }
    if let Some(s) = gts.keys().find(|s| !preds.contains_key(*s)) {
        return Err(Error::Unpaired(format!("ground truth {s} (no prediction)")));
    }
    if preds.len() != pred_paths.len() || gts.len() != gt_paths.len() {
        return Err(Error::InvalidParameter("duplicate file stems".into()));
    }
    let pairs: Vec<(&String, &PathBuf, &PathBuf)> =
        preds.iter().map(|(s, p)| (s, p, &gts[s])).collect();
    let rows = exec.map_indexed(pairs.len(), |i| {
        let (name, p, g) = pairs[i];
        let pred = read_mask_png(p)?;
        let gt = read_mask_png(g)?;
        let counts =
            Confusion::of(&pred, &gt).map_err(|e| Error::InvalidData(format!("{name}: {e}")))?;
        Ok(EvalRow {
            image: name.clone(),
            dice: counts.dice(),
            precision: counts.precision(),
            recall: counts.recall(),
            counts,
        })
    });
    Ok(EvalReport::from_rows(
        rows.into_iter().collect::<Result<_>>()?,
    ))
}
