//! Per-patch foreground probability map.
//!
//! The image is cut into a `split x split` grid. In each patch, pixels both
//! masks call foreground train a foreground GMM and pixels both call
//! background train a background GMM; every pixel of the patch then gets
//! `p_fg / (p_fg + p_bg)` from the clipped log-likelihoods. Patches with too
//! little evidence borrow the image-wide pools, or are skipped and keep
//! [`UNDECIDED`].

use std::borrow::Cow;
use std::fmt;
use std::ops::Range;

use crate::exec::Execution;
use crate::gmm::{fit_em, GmmModel, Vec3};
use crate::imgio::{BinaryMask, PipelineConfig, ProbMap, RgbImage};
use crate::{Error, Result};

/// Probability assigned to pixels of skipped patches.
pub const UNDECIDED: f32 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Agreement {
    Background,
    Foreground,
    Ambiguous,
}

/// Pointwise agreement of two candidate masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgreementMap {
    width: usize,
    height: usize,
    data: Vec<Agreement>,
}

impl AgreementMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[Agreement] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Agreement {
        self.data[y * self.width + x]
    }

    pub fn count(&self, kind: Agreement) -> usize {
        self.data.iter().filter(|&&a| a == kind).count()
    }
}

pub fn agreement(mask_a: &BinaryMask, mask_b: &BinaryMask) -> Result<AgreementMap> {
    if mask_a.dims() != mask_b.dims() {
        return Err(Error::dims("mask B", mask_a.dims(), mask_b.dims()));
    }
    let data = mask_a
        .labels()
        .iter()
        .zip(mask_b.labels())
        .map(|(&a, &b)| match (a, b) {
            (1, 1) => Agreement::Foreground,
            (0, 0) => Agreement::Background,
            _ => Agreement::Ambiguous,
        })
        .collect();
    Ok(AgreementMap {
        width: mask_a.width(),
        height: mask_a.height(),
        data,
    })
}

/// Image-wide foreground and background pools (agreed pixels only).
pub fn global_pools(image: &RgbImage, agreement: &AgreementMap) -> (Vec<Vec3>, Vec<Vec3>) {
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for (i, a) in agreement.labels().iter().enumerate() {
        match a {
            Agreement::Foreground => fg.push(image.color(i)),
            Agreement::Background => bg.push(image.color(i)),
            Agreement::Ambiguous => {}
        }
    }
    (fg, bg)
}

/// One rectangle of the patch grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patch {
    /// Row-major index `row_block * split + col_block`.
    pub index: usize,
    pub cols: Range<usize>,
    pub rows: Range<usize>,
}

impl Patch {
    pub fn len(&self) -> usize {
        self.cols.len() * self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major pixel indices covered by the patch.
    pub fn pixel_indices(&self, width: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows
            .clone()
            .flat_map(move |y| self.cols.clone().map(move |x| y * width + x))
    }
}

/// `split x split` partition of a `width x height` image. Block `j` spans
/// `[⌊j·M/K⌋, ⌊(j+1)·M/K⌋)`, which is an exact partition for any K.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchGrid {
    pub width: usize,
    pub height: usize,
    pub split: usize,
}

impl PatchGrid {
    pub fn new(width: usize, height: usize, split: usize) -> Self {
        Self {
            width,
            height,
            split,
        }
    }

    fn block(len: usize, split: usize, j: usize) -> Range<usize> {
        (j * len / split)..((j + 1) * len / split)
    }

    pub fn patches(&self) -> Vec<Patch> {
        let k = self.split;
        (0..k * k)
            .map(|index| Patch {
                index,
                rows: Self::block(self.height, k, index / k),
                cols: Self::block(self.width, k, index % k),
            })
            .collect()
    }
}

/// How many patches took each branch. Counters are independent: a patch that
/// borrowed the global foreground pool and was still skipped counts in both.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PatchStats {
    pub fitted: usize,
    pub fallback_fg: usize,
    pub fallback_bg: usize,
    pub skipped: usize,
}

impl fmt::Display for PatchStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "patches fitted={} fallback_fg={} fallback_bg={} skipped={}",
            self.fitted, self.fallback_fg, self.fallback_bg, self.skipped
        )
    }
}

/// Log-score clipped to `[-clip, clip]`.
pub fn clipped_log_score(model: &GmmModel, c: &Vec3, clip: f64) -> f64 {
    model.log_score(c).clamp(-clip, clip)
}

/// `e^fg / (e^fg + e^bg)` for clipped log-likelihoods, in overflow-free form.
pub fn foreground_probability(llh_fg: f64, llh_bg: f64) -> f64 {
    1.0 / (1.0 + (llh_bg - llh_fg).exp())
}

struct PatchOutcome {
    fallback_fg: bool,
    fallback_bg: bool,
    probabilities: Option<Vec<f64>>,
}

struct Pools<'a> {
    image: &'a RgbImage,
    agreement: &'a AgreementMap,
    mask_a: &'a BinaryMask,
    mask_b: &'a BinaryMask,
    global_fg: &'a [Vec3],
    global_bg: &'a [Vec3],
}

fn process_patch(patch: &Patch, pools: &Pools<'_>, cfg: &PipelineConfig) -> Result<PatchOutcome> {
    let n = cfg.components;
    let width = pools.image.width();
    let mut local_fg = Vec::new();
    let mut local_bg = Vec::new();
    let mut either_fg = 0usize;
    for i in patch.pixel_indices(width) {
        match pools.agreement.labels()[i] {
            Agreement::Foreground => local_fg.push(pools.image.color(i)),
            Agreement::Background => local_bg.push(pools.image.color(i)),
            Agreement::Ambiguous => {}
        }
        if pools.mask_a.labels()[i] == 1 || pools.mask_b.labels()[i] == 1 {
            either_fg += 1;
        }
    }

    let mut fg: Cow<[Vec3]> = Cow::Owned(local_fg);
    let mut bg: Cow<[Vec3]> = Cow::Owned(local_bg);
    let mut outcome = PatchOutcome {
        fallback_fg: false,
        fallback_bg: false,
        probabilities: None,
    };
    if fg.len() <= n && either_fg >= n {
        fg = Cow::Borrowed(pools.global_fg);
        outcome.fallback_fg = true;
    }
    if bg.len() <= n && fg.len() >= n {
        bg = Cow::Borrowed(pools.global_bg);
        outcome.fallback_bg = true;
    }
    if fg.len() <= n || bg.is_empty() {
        return Ok(outcome);
    }

    let seed = cfg.seed ^ patch.index as u64;
    let fg_model = fit_em(&fg, n, seed)?;
    let bg_model = fit_em(&bg, n.min(bg.len()), seed)?;
    let probs = patch
        .pixel_indices(width)
        .map(|i| {
            let c = pools.image.color(i);
            foreground_probability(
                clipped_log_score(&fg_model, &c, cfg.clip),
                clipped_log_score(&bg_model, &c, cfg.clip),
            )
        })
        .collect();
    outcome.probabilities = Some(probs);
    Ok(outcome)
}

pub fn build_probability_map(
    image: &RgbImage,
    mask_a: &BinaryMask,
    mask_b: &BinaryMask,
    cfg: &PipelineConfig,
) -> Result<ProbMap> {
    build_probability_map_with(image, mask_a, mask_b, cfg, Execution::default()).map(|(m, _)| m)
}

/// Builds the map and reports per-branch patch counts. Output is identical
/// for every [`Execution`] strategy.
pub fn build_probability_map_with(
    image: &RgbImage,
    mask_a: &BinaryMask,
    mask_b: &BinaryMask,
    cfg: &PipelineConfig,
    exec: Execution,
) -> Result<(ProbMap, PatchStats)> {
    cfg.validate()?;
    if mask_a.dims() != image.dims() {
        return Err(Error::dims("mask A", image.dims(), mask_a.dims()));
    }
    if mask_b.dims() != image.dims() {
        return Err(Error::dims("mask B", image.dims(), mask_b.dims()));
    }
    let agreement = agreement(mask_a, mask_b)?;
    let (global_fg, global_bg) = global_pools(image, &agreement);
    let pools = Pools {
        image,
        agreement: &agreement,
        mask_a,
        mask_b,
        global_fg: &global_fg,
        global_bg: &global_bg,
    };

    let (width, height) = image.dims();
    let patches = PatchGrid::new(width, height, cfg.split).patches();
    let outcomes = exec.map_indexed(patches.len(), |p| process_patch(&patches[p], &pools, cfg));

    let mut data = vec![UNDECIDED; width * height];
    let mut stats = PatchStats::default();
    for (patch, outcome) in patches.iter().zip(outcomes) {
        let outcome = outcome?;
        stats.fallback_fg += outcome.fallback_fg as usize;
        stats.fallback_bg += outcome.fallback_bg as usize;
        match outcome.probabilities {
            Some(probs) => {
                stats.fitted += 1;
                for (i, p) in patch.pixel_indices(width).zip(probs) {
                    data[i] = p as f32;
                }
            }
            None => stats.skipped += 1,
        }
    }
    if global_fg.is_empty() && stats.fitted == 0 {
        return Err(Error::NoForegroundEvidence);
    }
    Ok((ProbMap::new(width, height, data)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, h: usize, v: &[u8]) -> BinaryMask {
        BinaryMask::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn agreement_rules() {
        let a = mask(2, 2, &[1, 1, 0, 0]);
        let b = mask(2, 2, &[1, 0, 0, 1]);
        let m = agreement(&a, &b).unwrap();
        use Agreement::*;
        assert_eq!(m.labels(), &[Foreground, Ambiguous, Background, Ambiguous]);
        assert_eq!(agreement(&a, &a).unwrap().count(Ambiguous), 0);
        assert_eq!(agreement(&a, &a.complement()).unwrap().count(Ambiguous), 4);
        assert!(agreement(&a, &mask(1, 4, &[0; 4])).is_err());
    }

    #[test]
    fn pools_by_definition() {
        let mut img = RgbImage::filled(2, 2, [1, 1, 1]).unwrap();
        img.set(1, 0, [9, 9, 9]);
        let a = mask(2, 2, &[0, 1, 0, 1]);
        let b = mask(2, 2, &[0, 1, 0, 0]);
        let (fg, bg) = global_pools(&img, &agreement(&a, &b).unwrap());
        assert_eq!(fg, vec![[9.0; 3]]);
        assert_eq!(bg.len(), 2);

        let all = mask(2, 2, &[1; 4]);
        let (_, bg) = global_pools(&img, &agreement(&all, &all).unwrap());
        assert!(bg.is_empty());
    }

    #[test]
    fn grid_matches_floor_arithmetic_when_divisible() {
        let patches = PatchGrid::new(20, 10, 5).patches();
        assert_eq!(patches.len(), 25);
        for p in &patches {
            let (j, i) = (p.index / 5, p.index % 5);
            assert_eq!(p.rows, (j * 10 / 5)..(j * 10 / 5 + 10 / 5));
            assert_eq!(p.cols, (i * 20 / 5)..(i * 20 / 5 + 20 / 5));
        }
    }

    #[test]
    fn clip_applies_before_exponentiation() {
        // Mahalanobis distance chosen so the raw log-score is ≈ -500.
        let model = GmmModel::single(
            [0.0; 3],
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        )
        .unwrap();
        let d = (2.0 * (500.0 - 2.756_815_599_614_018_f64)).sqrt();
        let c = [d, 0.0, 0.0];
        assert!((model.log_score(&c) + 500.0).abs() < 1e-9);
        assert_eq!(clipped_log_score(&model, &c, 100.0), -100.0);
        assert_eq!(clipped_log_score(&model, &[0.0; 3], 1.0), -1.0);
    }

    #[test]
    fn probability_complement() {
        for (a, b) in [(-100.0, 100.0), (3.0, 2.5), (0.0, 0.0), (50.0, -50.0)] {
            let p = foreground_probability(a, b);
            let q = foreground_probability(b, a);
            assert!((p + q - 1.0).abs() < 1e-12);
        }
        assert_eq!(foreground_probability(7.0, 7.0), 0.5);
    }

    #[test]
    fn skipped_patch_keeps_undecided() {
        // Left half carries all the foreground; right column block has none.
        let img = RgbImage::new(
            4,
            2,
            (0..8)
                .map(|i| {
                    if i % 4 < 2 && i % 2 == 0 {
                        [250; 3]
                    } else {
                        [(i * 3) as u8; 3]
                    }
                })
                .collect(),
        )
        .unwrap();
        let m = BinaryMask::from_fn(4, 2, |x, _| x < 2).unwrap();
        let cfg = PipelineConfig {
            components: 1,
            split: 2,
            ..Default::default()
        };
        let (map, stats) =
            build_probability_map_with(&img, &m, &m, &cfg, Execution::Sequential).unwrap();
        // Patches are 2x1; right-hand patches have zero foreground evidence.
        assert_eq!(stats.skipped, 2);
        assert_eq!(map.get(2, 0), UNDECIDED);
        assert_eq!(map.get(3, 1), UNDECIDED);
    }

    #[test]
    fn no_foreground_evidence() {
        let img = RgbImage::filled(4, 4, [10, 10, 10]).unwrap();
        let empty = BinaryMask::zeros(4, 4).unwrap();
        let err =
            build_probability_map(&img, &empty, &empty, &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NoForegroundEvidence));
    }

    #[test]
    fn dimension_mismatch() {
        let img = RgbImage::filled(4, 4, [10, 10, 10]).unwrap();
        let m = BinaryMask::zeros(4, 3).unwrap();
        assert!(build_probability_map(&img, &m, &m, &PipelineConfig::default()).is_err());
    }
}
