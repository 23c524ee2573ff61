//! The reconciliation program over a pixel grid:
//!
//! ```text
//! maximize  Σ_p x_p·P_p + (1-x_p)(1-P_p)  -  λ · Σ_(p,q) S_pq·[x_p ≠ x_q]
//! ```
//!
//! over binary labels `x`, with agreed pixels fixed. Because every pairwise
//! coefficient `λ·S_pq` is nonnegative the equivalent minimization is a
//! submodular energy, solved exactly by [`solve_graphcut`]. [`solve_bruteforce`]
//! enumerates all free assignments and serves as the oracle.

mod bruteforce;
mod graphcut;
mod maxflow;
mod random;

use std::time::Duration;

pub use bruteforce::{solve_bruteforce, BRUTE_FORCE_CAP};
pub use graphcut::solve_graphcut;
pub use maxflow::FlowNetwork;
pub use random::{oracle_trials, random_problem, trial_seed, OracleTrial, ORACLE_TOLERANCE};

use crate::exec::Execution;
use crate::imgio::{BinaryMask, PipelineConfig, ProbMap, RgbImage, SolverKind};
use crate::probmap::{Agreement, AgreementMap};
use crate::{Error, Result};

/// Per-pixel constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fixed {
    Free,
    Zero,
    One,
}

impl From<Agreement> for Fixed {
    fn from(a: Agreement) -> Self {
        match a {
            Agreement::Foreground => Fixed::One,
            Agreement::Background => Fixed::Zero,
            Agreement::Ambiguous => Fixed::Free,
        }
    }
}

/// `exp(-‖c1 - c2‖₂ / θ)` over raw RGB.
pub fn color_similarity(c1: &[f64; 3], c2: &[f64; 3], theta: f64) -> f64 {
    let d2: f64 = c1.iter().zip(c2).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2.sqrt() / theta).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyProblem {
    width: usize,
    height: usize,
    prob: Vec<f64>,
    /// Weight of edge (x,y)-(x+1,y), indexed `y*(width-1) + x`.
    right: Vec<f64>,
    /// Weight of edge (x,y)-(x,y+1), indexed `y*width + x`.
    down: Vec<f64>,
    fixed: Vec<Fixed>,
    lambda: f64,
}

impl EnergyProblem {
    pub fn new(
        width: usize,
        height: usize,
        prob: Vec<f64>,
        right: Vec<f64>,
        down: Vec<f64>,
        fixed: Vec<Fixed>,
        lambda: f64,
    ) -> Result<Self> {
        let n = width * height;
        if width == 0 || height == 0 {
            return Err(Error::InvalidData("empty problem".into()));
        }
        if prob.len() != n || fixed.len() != n {
            return Err(Error::InvalidData(format!(
                "per-pixel arrays must have {n} entries"
            )));
        }
        if right.len() != (width - 1) * height || down.len() != width * (height - 1) {
            return Err(Error::InvalidData(
                "edge weight arrays have wrong length".into(),
            ));
        }
        if prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidData("probability outside [0,1]".into()));
        }
        // exp(-d/θ) may underflow to exactly 0 for tiny θ.
        if right.iter().chain(&down).any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidData("edge weight outside [0,1]".into()));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda {lambda} must be >= 0"
            )));
        }
        Ok(Self {
            width,
            height,
            prob,
            right,
            down,
            fixed,
            lambda,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    pub fn right_weights(&self) -> &[f64] {
        &self.right
    }

    pub fn down_weights(&self) -> &[f64] {
        &self.down
    }

    pub fn fixed(&self) -> &[Fixed] {
        &self.fixed
    }

    pub fn free_count(&self) -> usize {
        self.fixed.iter().filter(|&&f| f == Fixed::Free).count()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut p = self.clone();
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda {lambda} must be >= 0"
            )));
        }
        p.lambda = lambda;
        Ok(p)
    }

    /// Every grid edge as `(p, q, S_pq)` with `p < q`, rightward edges of a
    /// row before its downward edges.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.width;
        (0..self.height).flat_map(move |y| {
            let right = (0..w.saturating_sub(1))
                .map(move |x| (y * w + x, y * w + x + 1, self.right[y * (w - 1) + x]));
            let down = (0..w)
                .filter(move |_| y + 1 < self.height)
                .map(move |x| (y * w + x, (y + 1) * w + x, self.down[y * w + x]));
            right.chain(down)
        })
    }
}

/// Builds the program: colour-similarity edge weights, agreement-fixed pixels.
pub fn build_problem(
    image: &RgbImage,
    prob: &ProbMap,
    agreement: &AgreementMap,
    cfg: &PipelineConfig,
) -> Result<EnergyProblem> {
    build_problem_with(image, prob, agreement, cfg, Execution::default())
}

pub fn build_problem_with(
    image: &RgbImage,
    prob: &ProbMap,
    agreement: &AgreementMap,
    cfg: &PipelineConfig,
    exec: Execution,
) -> Result<EnergyProblem> {
    let dims = image.dims();
    if prob.dims() != dims {
        return Err(Error::dims("probability map", dims, prob.dims()));
    }
    if agreement.dims() != dims {
        return Err(Error::dims("agreement map", dims, agreement.dims()));
    }
    let (w, h) = dims;
    let theta = cfg.theta;
    let rows = exec.map_indexed(h, |y| {
        let right: Vec<f64> = (0..w.saturating_sub(1))
            .map(|x| color_similarity(&image.color(y * w + x), &image.color(y * w + x + 1), theta))
            .collect();
        let down: Vec<f64> = if y + 1 < h {
            (0..w)
                .map(|x| {
                    color_similarity(
                        &image.color(y * w + x),
                        &image.color((y + 1) * w + x),
                        theta,
                    )
                })
                .collect()
        } else {
            Vec::new()
        };
        (right, down)
    });
    let mut right = Vec::with_capacity((w - 1) * h);
    let mut down = Vec::with_capacity(w * (h - 1));
    for (r, d) in rows {
        right.extend(r);
        down.extend(d);
    }
    EnergyProblem::new(
        w,
        h,
        prob.values().iter().map(|&p| p as f64).collect(),
        right,
        down,
        agreement.labels().iter().map(|&a| a.into()).collect(),
        cfg.lambda,
    )
}

/// Objective terms of a labeling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub o_idf: f64,
    pub o_scf: f64,
    pub total: f64,
}

/// Scores `labels` over all pixels and edges, fixed ones included.
pub fn objective_value(problem: &EnergyProblem, labels: &BinaryMask) -> Result<Objective> {
    let dims = (problem.width, problem.height);
    if labels.dims() != dims {
        return Err(Error::dims("labels", dims, labels.dims()));
    }
    let x = labels.labels();
    for (i, (&l, &f)) in x.iter().zip(&problem.fixed).enumerate() {
        let violated = matches!((f, l), (Fixed::Zero, 1) | (Fixed::One, 0));
        if violated {
            return Err(Error::FixedViolation {
                x: i % problem.width,
                y: i / problem.width,
            });
        }
    }
    Ok(score_unchecked(problem, x))
}

pub(crate) fn score_unchecked(problem: &EnergyProblem, x: &[u8]) -> Objective {
    let o_idf: f64 = x
        .iter()
        .zip(&problem.prob)
        .map(|(&l, &p)| if l == 1 { p } else { 1.0 - p })
        .sum();
    let o_scf: f64 = problem
        .edges()
        .filter(|&(p, q, _)| x[p] != x[q])
        .map(|(_, _, s)| s)
        .sum();
    Objective {
        o_idf,
        o_scf,
        total: o_idf - problem.lambda * o_scf,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub labels: BinaryMask,
    pub objective: f64,
    pub o_idf: f64,
    pub o_scf: f64,
    pub free_count: usize,
    pub solve_time: Duration,
}

impl SolveResult {
    pub(crate) fn from_labels(
        problem: &EnergyProblem,
        labels: Vec<u8>,
        solve_time: Duration,
    ) -> Result<Self> {
        let labels = BinaryMask::new(problem.width, problem.height, labels)?;
        let obj = objective_value(problem, &labels)?;
        Ok(Self {
            labels,
            objective: obj.total,
            o_idf: obj.o_idf,
            o_scf: obj.o_scf,
            free_count: problem.free_count(),
            solve_time,
        })
    }

    /// Number of grid edges whose endpoints carry different labels.
    pub fn cut_edges(&self, problem: &EnergyProblem) -> usize {
        let x = self.labels.labels();
        problem.edges().filter(|&(p, q, _)| x[p] != x[q]).count()
    }
}

pub fn solve(problem: &EnergyProblem, solver: SolverKind) -> Result<SolveResult> {
    match solver {
        SolverKind::GraphCut => solve_graphcut(problem),
        SolverKind::BruteForce => solve_bruteforce(problem),
    }
}
