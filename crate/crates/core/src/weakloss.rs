//! Box-supervision loss evaluators: MIL bag construction with max-aggregated
//! log loss and a squared-difference smoothness term, plus the box-projection
//! and colour-gated pairwise terms.
//!
//! These are pure evaluators over a soft mask; no gradients are computed.

use crate::energy::color_similarity;
use crate::imgio::{check_bounds, BBox, ProbMap, RgbImage};
use crate::{Error, Result};

/// Soft segmentation mask with values in [0,1].
pub type SoftMask = ProbMap;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before any log.
pub const PROB_CLAMP: f64 = 1e-7;
pub const DEFAULT_TAU: f64 = 0.3;
pub const DEFAULT_THETA_B: f64 = 15.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BagKind {
    Positive,
    Negative,
}

/// One horizontal or vertical line segment of pixels, as `(row, col)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bag {
    pub kind: BagKind,
    /// Index of the box the bag was derived from.
    pub source: usize,
    pub pixels: Vec<(usize, usize)>,
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Positive bags: every row and column crossing a box, edge to edge.
/// Negative bags: each box edge line extended outward to the image border,
/// stopping before the first pixel covered by any box.
pub fn build_bags(boxes: &[BBox], width: usize, height: usize) -> Result<Vec<Bag>> {
    check_bounds(boxes, width, height)?;
    let inside_any = |x: usize, y: usize| boxes.iter().any(|b| b.contains(x, y));
    let mut bags = Vec::new();

    for (source, b) in boxes.iter().enumerate() {
        for y in b.y_min..b.y_max {
            bags.push(Bag {
                kind: BagKind::Positive,
                source,
                pixels: (b.x_min..b.x_max).map(|x| (y, x)).collect(),
            });
        }
        for x in b.x_min..b.x_max {
            bags.push(Bag {
                kind: BagKind::Positive,
                source,
                pixels: (b.y_min..b.y_max).map(|y| (y, x)).collect(),
            });
        }
    }

    for (source, b) in boxes.iter().enumerate() {
        let mut rows = vec![b.y_min];
        if b.y_max - 1 != b.y_min {
            rows.push(b.y_max - 1);
        }
        let mut cols = vec![b.x_min];
        if b.x_max - 1 != b.x_min {
            cols.push(b.x_max - 1);
        }
        let mut push = |pixels: Vec<(usize, usize)>| {
            if !pixels.is_empty() {
                bags.push(Bag {
                    kind: BagKind::Negative,
                    source,
                    pixels,
                });
            }
        };
        for &y in &rows {
            push(
                (0..b.x_min)
                    .rev()
                    .take_while(|&x| !inside_any(x, y))
                    .map(|x| (y, x))
                    .collect(),
            );
            push(
                (b.x_max..width)
                    .take_while(|&x| !inside_any(x, y))
                    .map(|x| (y, x))
                    .collect(),
            );
        }
        for &x in &cols {
            push(
                (0..b.y_min)
                    .rev()
                    .take_while(|&y| !inside_any(x, y))
                    .map(|y| (y, x))
                    .collect(),
            );
            push(
                (b.y_max..height)
                    .take_while(|&y| !inside_any(x, y))
                    .map(|y| (y, x))
                    .collect(),
            );
        }
    }
    Ok(bags)
}

fn check_bag_bounds(mask: &SoftMask, bags: &[Bag]) -> Result<()> {
    let ok = bags
        .iter()
        .flat_map(|b| &b.pixels)
        .all(|&(y, x)| y < mask.height() && x < mask.width());
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter("bag pixel outside mask".into()))
    }
}

/// Mean of `-log(max)` over positive bags plus mean of `-log(1 - max)` over
/// negative bags.
pub fn mil_unary(mask: &SoftMask, bags: &[Bag]) -> Result<f64> {
    if bags.is_empty() {
        return Err(Error::Empty("bag list".into()));
    }
    check_bag_bounds(mask, bags)?;
    let mut pos = (0.0, 0usize);
    let mut neg = (0.0, 0usize);
    for bag in bags {
        let max = bag
            .pixels
            .iter()
            .map(|&(y, x)| mask.get(x, y) as f64)
            .fold(0.0, f64::max);
        let p = clamp_prob(max);
        match bag.kind {
            BagKind::Positive => {
                pos.0 -= p.ln();
                pos.1 += 1;
            }
            BagKind::Negative => {
                neg.0 -= (1.0 - p).ln();
                neg.1 += 1;
            }
        }
    }
    let mean = |(sum, n): (f64, usize)| if n == 0 { 0.0 } else { sum / n as f64 };
    Ok(mean(pos) + mean(neg))
}

fn neighbor_offsets(neighbors: u8) -> Result<&'static [(isize, isize)]> {
    // Each unordered pair once: (dx, dy).
    const FOUR: [(isize, isize); 2] = [(1, 0), (0, 1)];
    const EIGHT: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (-1, 1)];
    match neighbors {
        4 => Ok(&FOUR),
        8 => Ok(&EIGHT),
        other => Err(Error::InvalidParameter(format!(
            "neighborhood must be 4 or 8, got {other}"
        ))),
    }
}

/// Visits every unordered neighbor pair once as flat indices.
fn for_each_pair(
    width: usize,
    height: usize,
    offsets: &[(isize, isize)],
    mut f: impl FnMut(usize, usize),
) {
    for y in 0..height {
        for x in 0..width {
            for &(dx, dy) in offsets {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || nx as usize >= width || ny as usize >= height {
                    continue;
                }
                f(y * width + x, ny as usize * width + nx as usize);
            }
        }
    }
}

/// Mean squared difference over 4- or 8-neighbor pairs.
pub fn mil_pairwise(mask: &SoftMask, neighbors: u8) -> Result<f64> {
    let offsets = neighbor_offsets(neighbors)?;
    let m = mask.values();
    let (mut sum, mut count) = (0.0, 0usize);
    for_each_pair(mask.width(), mask.height(), offsets, |p, q| {
        let d = m[p] as f64 - m[q] as f64;
        sum += d * d;
        count += 1;
    });
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

fn dice_loss(u: &[f64], v: &[f64]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let denom = dot(u, u) + dot(v, v);
    if denom == 0.0 {
        return 1.0;
    }
    1.0 - 2.0 * dot(u, v) / denom
}

/// Per box, max-project the mask inside the box onto each axis and compare
/// with the box's all-ones projection by Dice loss; sum over axes, mean over
/// boxes.
pub fn boxinst_projection(mask: &SoftMask, boxes: &[BBox]) -> Result<f64> {
    if boxes.is_empty() {
        return Err(Error::Empty("box list".into()));
    }
    check_bounds(boxes, mask.width(), mask.height())?;
    let mut total = 0.0;
    for b in boxes {
        let along_x: Vec<f64> = (b.x_min..b.x_max)
            .map(|x| {
                (b.y_min..b.y_max)
                    .map(|y| mask.get(x, y) as f64)
                    .fold(0.0, f64::max)
            })
            .collect();
        let along_y: Vec<f64> = (b.y_min..b.y_max)
            .map(|y| {
                (b.x_min..b.x_max)
                    .map(|x| mask.get(x, y) as f64)
                    .fold(0.0, f64::max)
            })
            .collect();
        total += dice_loss(&along_x, &vec![1.0; b.width()]);
        total += dice_loss(&along_y, &vec![1.0; b.height()]);
    }
    Ok(total / boxes.len() as f64)
}

/// Mean of `-log(m_p m_q + (1-m_p)(1-m_q))` over 8-neighbor pairs whose
/// colour similarity (temperature `theta_b`) is at least `tau`. Zero when no
/// pair qualifies.
pub fn boxinst_pairwise(mask: &SoftMask, image: &RgbImage, tau: f64, theta_b: f64) -> Result<f64> {
    if mask.dims() != image.dims() {
        return Err(Error::dims("soft mask", image.dims(), mask.dims()));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau {tau} outside [0,1]")));
    }
    if !(theta_b.is_finite() && theta_b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "theta_b {theta_b} must be positive"
        )));
    }
    let offsets = neighbor_offsets(8)?;
    let m = mask.values();
    let (mut sum, mut count) = (0.0, 0usize);
    for_each_pair(mask.width(), mask.height(), offsets, |p, q| {
        if color_similarity(&image.color(p), &image.color(q), theta_b) >= tau {
            let (a, b) = (m[p] as f64, m[q] as f64);
            sum -= clamp_prob(a * b + (1.0 - a) * (1.0 - b)).ln();
            count += 1;
        }
    });
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}
