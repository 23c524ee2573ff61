//! Three-dimensional Gaussian mixtures over pixel intensities, fitted by EM.
//!
//! Covariances are full symmetric 3x3 matrices. Every M-step adds
//! [`COVARIANCE_FLOOR`] to the diagonal so components collapsing onto a
//! single intensity stay invertible. Initialization is k-means++ on the
//! sample with a caller-provided seed, so fits are bit-reproducible.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// A population of pixel intensities.
pub type PixelSample = Vec<Vec3>;

/// Diagonal regularization added to every fitted covariance.
pub const COVARIANCE_FLOOR: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 100;
/// Relative mean log-likelihood improvement below which EM stops.
pub const RELATIVE_TOLERANCE: f64 = 1e-6;
/// Components with responsibility mass below this fraction of N are reseeded.
pub const EMPTY_COMPONENT_MASS: f64 = 1e-8;
const MIN_WEIGHT: f64 = 1e-8;

/// Lower-triangular Cholesky factor of a 3x3 SPD matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Cholesky3 {
    l: Mat3,
}

impl Cholesky3 {
    #[allow(clippy::needless_range_loop)]
    fn factor(m: &Mat3) -> Result<Self> {
        let mut l = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..=i {
                let mut sum = m[i][j];
                for k in 0..j {
                    sum -= l[i][k] * l[j][k];
                }
                if i == j {
                    if !(sum.is_finite() && sum > 0.0) {
                        return Err(Error::NotPositiveDefinite);
                    }
                    l[i][i] = sum.sqrt();
                } else {
                    l[i][j] = sum / l[j][j];
                }
            }
        }
        Ok(Self { l })
    }

    fn half_log_det(&self) -> f64 {
        self.l[0][0].ln() + self.l[1][1].ln() + self.l[2][2].ln()
    }

    /// dᵀ Σ⁻¹ d via forward substitution.
    fn mahalanobis_sq(&self, d: &Vec3) -> f64 {
        let l = &self.l;
        let y0 = d[0] / l[0][0];
        let y1 = (d[1] - l[1][0] * y0) / l[1][1];
        let y2 = (d[2] - l[2][0] * y0 - l[2][1] * y1) / l[2][2];
        y0 * y0 + y1 * y1 + y2 * y2
    }
}

fn is_symmetric(m: &Mat3) -> bool {
    (0..3).all(|i| (0..i).all(|j| (m[i][j] - m[j][i]).abs() <= 1e-12 * (1.0 + m[i][j].abs())))
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Natural log of the trivariate normal density N(c; mean, cov).
pub fn component_log_density(c: &Vec3, mean: &Vec3, cov: &Mat3) -> Result<f64> {
    let chol = Cholesky3::factor(cov)?;
    Ok(log_density(&chol, c, mean))
}

/// Trivariate normal density
/// `(2π)^{-3/2} |Σ|^{-1/2} exp(-(c-μ)ᵀ Σ⁻¹ (c-μ) / 2)`.
pub fn component_density(c: &Vec3, mean: &Vec3, cov: &Mat3) -> Result<f64> {
    component_log_density(c, mean, cov).map(f64::exp)
}

fn log_density(chol: &Cholesky3, c: &Vec3, mean: &Vec3) -> f64 {
    -1.5 * (2.0 * PI).ln() - chol.half_log_det() - 0.5 * chol.mahalanobis_sq(&sub(c, mean))
}

#[derive(Clone, Debug, PartialEq)]
struct Component {
    weight: f64,
    mean: Vec3,
    cov: Mat3,
    chol: Cholesky3,
}

impl Component {
    fn log_weighted_density(&self, c: &Vec3) -> f64 {
        self.weight.ln() + log_density(&self.chol, c, &self.mean)
    }
}

/// An n-component trivariate Gaussian mixture. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel {
    components: Vec<Component>,
}

impl GmmModel {
    pub fn new(weights: Vec<f64>, means: Vec<Vec3>, covariances: Vec<Mat3>) -> Result<Self> {
        let n = weights.len();
        if n == 0 || means.len() != n || covariances.len() != n {
            return Err(Error::InvalidParameter(format!(
                "mixture needs matching non-empty weights/means/covariances, got {}/{}/{}",
                n,
                means.len(),
                covariances.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {total}, not 1"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(MIN_WEIGHT..=1.0).contains(*w)) {
            return Err(Error::InvalidParameter(format!(
                "weight {w} outside [1e-8, 1]"
            )));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite mean".into()));
        }
        let components = weights
            .into_iter()
            .zip(means)
            .zip(covariances)
            .map(|((weight, mean), cov)| {
                if !is_symmetric(&cov) {
                    return Err(Error::NotPositiveDefinite);
                }
                Ok(Component {
                    weight,
                    mean,
                    cov,
                    chol: Cholesky3::factor(&cov)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }

    /// A single Gaussian.
    pub fn single(mean: Vec3, cov: Mat3) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![cov])
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn means(&self) -> Vec<Vec3> {
        self.components.iter().map(|c| c.mean).collect()
    }

    pub fn covariances(&self) -> Vec<Mat3> {
        self.components.iter().map(|c| c.cov).collect()
    }

    /// Natural log of `Σ w_i N(c; μ_i, Σ_i)`, via log-sum-exp.
    pub fn log_score(&self, c: &Vec3) -> f64 {
        let mut buf = [0.0; 16];
        if self.components.len() <= buf.len() {
            let terms = &mut buf[..self.components.len()];
            for (t, comp) in terms.iter_mut().zip(&self.components) {
                *t = comp.log_weighted_density(c);
            }
            log_sum_exp(terms)
        } else {
            let terms: Vec<f64> = self
                .components
                .iter()
                .map(|comp| comp.log_weighted_density(c))
                .collect();
            log_sum_exp(&terms)
        }
    }
}

/// Mixture log-density of one pixel.
pub fn mixture_log_score(model: &GmmModel, c: &Vec3) -> f64 {
    model.log_score(c)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Result of an EM fit with its convergence history.
#[derive(Clone, Debug, PartialEq)]
pub struct EmFit {
    pub model: GmmModel,
    /// Mean training log-likelihood after each EM step of the final
    /// uninterrupted run. The last entry belongs to `model`.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    /// Number of empty-component reseeds that occurred.
    pub reseeds: usize,
}

/// Fit an `n`-component mixture to `sample`. Deterministic in
/// `(sample, n, seed)`.
pub fn fit_em(sample: &[Vec3], n: usize, seed: u64) -> Result<GmmModel> {
    fit_em_traced(sample, n, seed).map(|fit| fit.model)
}

pub fn fit_em_traced(sample: &[Vec3], n: usize, seed: u64) -> Result<EmFit> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "components must be positive".into(),
        ));
    }
    if sample.len() < n {
        return Err(Error::SampleTooSmall {
            size: sample.len(),
            components: n,
        });
    }
    if sample.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(
            "non-finite pixel value in sample".into(),
        ));
    }

    let mut em = EmState::new(sample, n, seed)?;
    let mut ll = em.e_step();
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut reseeds = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let previous = em.model.clone();
        let reseeded = em.m_step()?;
        let next = em.e_step();
        if reseeded {
            reseeds += 1;
            trace.clear();
            trace.push(next);
            ll = next;
            continue;
        }
        // The covariance floor makes the M-step inexact, so a step can lose a
        // sliver of likelihood near a collapsed optimum. Treat that as
        // convergence and keep the better model.
        if next < ll {
            em.model = previous;
            break;
        }
        trace.push(next);
        let converged = next - ll < RELATIVE_TOLERANCE * ll.abs();
        ll = next;
        if converged {
            break;
        }
    }
    Ok(EmFit {
        model: em.model,
        log_likelihood_trace: trace,
        iterations,
        reseeds,
    })
}

struct EmState<'a> {
    sample: &'a [Vec3],
    model: GmmModel,
    /// Row-major N x n responsibilities from the last E-step.
    resp: Vec<f64>,
    /// Per-point mixture log-density from the last E-step.
    point_ll: Vec<f64>,
    pooled_cov: Mat3,
}

impl<'a> EmState<'a> {
    fn new(sample: &'a [Vec3], n: usize, seed: u64) -> Result<Self> {
        let pooled_cov = regularized(weighted_moments(sample, |_| 1.0).1);
        let model = GmmModel::new(
            vec![1.0 / n as f64; n],
            kmeans_pp(sample, n, seed),
            vec![pooled_cov; n],
        )?;
        Ok(Self {
            sample,
            model,
            resp: vec![0.0; sample.len() * n],
            point_ll: vec![0.0; sample.len()],
            pooled_cov,
        })
    }

    /// Responsibilities under the current model; returns the mean log-likelihood.
    fn e_step(&mut self) -> f64 {
        let n = self.model.n_components();
        let mut total = 0.0;
        for (i, x) in self.sample.iter().enumerate() {
            let row = &mut self.resp[i * n..(i + 1) * n];
            for (r, comp) in row.iter_mut().zip(&self.model.components) {
                *r = comp.log_weighted_density(x);
            }
            let lse = log_sum_exp(row);
            for r in row.iter_mut() {
                *r = (*r - lse).exp();
            }
            self.point_ll[i] = lse;
            total += lse;
        }
        total / self.sample.len() as f64
    }

    /// Re-estimates the model from the current responsibilities. Returns
    /// `true` if an empty component had to be reseeded.
    fn m_step(&mut self) -> Result<bool> {
        let n = self.model.n_components();
        let total = self.sample.len() as f64;
        let mut weights = Vec::with_capacity(n);
        let mut means = Vec::with_capacity(n);
        let mut covs = Vec::with_capacity(n);
        let mut reseeded = false;
        for k in 0..n {
            let mass: f64 = (0..self.sample.len()).map(|i| self.resp[i * n + k]).sum();
            if mass < EMPTY_COMPONENT_MASS * total {
                let worst = self.point_ll.iter().enumerate().fold(0, |best, (i, &v)| {
                    if v < self.point_ll[best] {
                        i
                    } else {
                        best
                    }
                });
                weights.push(1.0 / total);
                means.push(self.sample[worst]);
                covs.push(self.pooled_cov);
                reseeded = true;
                continue;
            }
            let (mean, cov) = weighted_moments(self.sample, |i| self.resp[i * n + k]);
            weights.push(mass / total);
            means.push(mean);
            covs.push(regularized(cov));
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w = (*w / wsum).max(MIN_WEIGHT);
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
        self.model = GmmModel::new(weights, means, covs)?;
        Ok(reseeded)
    }
}

fn regularized(mut cov: Mat3) -> Mat3 {
    for (i, row) in cov.iter_mut().enumerate() {
        row[i] += COVARIANCE_FLOOR;
    }
    cov
}

/// Weighted mean and (maximum-likelihood) covariance, two-pass.
#[allow(clippy::needless_range_loop)]
fn weighted_moments(sample: &[Vec3], weight: impl Fn(usize) -> f64) -> (Vec3, Mat3) {
    let mut mass = 0.0;
    let mut mean = [0.0; 3];
    for (i, x) in sample.iter().enumerate() {
        let w = weight(i);
        mass += w;
        for d in 0..3 {
            mean[d] += w * x[d];
        }
    }
    for m in &mut mean {
        *m /= mass;
    }
    let mut cov = [[0.0; 3]; 3];
    for (i, x) in sample.iter().enumerate() {
        let w = weight(i);
        let d = sub(x, &mean);
        for a in 0..3 {
            for b in a..3 {
                cov[a][b] += w * d[a] * d[b];
            }
        }
    }
    for a in 0..3 {
        for b in a..3 {
            cov[a][b] /= mass;
            cov[b][a] = cov[a][b];
        }
    }
    (mean, cov)
}

/// k-means++ seeding of `n` means from the sample.
fn kmeans_pp(sample: &[Vec3], n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![sample[rng.random_range(0..sample.len())]];
    let mut dist: Vec<f64> = sample.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < n {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = dist.iter().rposition(|&d| d > 0.0).unwrap_or(0);
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..sample.len())
        };
        let c = sample[pick];
        for (d, x) in dist.iter_mut().zip(sample) {
            *d = d.min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    centers
}

fn sq_dist(a: &Vec3, b: &Vec3) -> f64 {
    let d = sub(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}
