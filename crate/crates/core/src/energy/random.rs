use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{color_similarity, solve_bruteforce, solve_graphcut, EnergyProblem, Fixed};
use crate::exec::Execution;
use crate::Result;

/// Seeded random instance: P ~ U[0,1], edge weights from a random RGB image
/// under a random temperature, λ ~ U[0,3], each pixel fixed with
/// probability 1/4 (half to each label).
pub fn random_problem(width: usize, height: usize, seed: u64) -> EnergyProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = width * height;
    let colors: Vec<[f64; 3]> = (0..n)
        .map(|_| std::array::from_fn(|_| rng.random_range(0..=255u8) as f64))
        .collect();
    let theta = rng.random_range(10.0..300.0);
    let lambda = rng.random_range(0.0..3.0);
    let prob: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let fixed: Vec<Fixed> = (0..n)
        .map(|_| match rng.random_range(0..8u8) {
            0 => Fixed::Zero,
            1 => Fixed::One,
            _ => Fixed::Free,
        })
        .collect();
    let mut right = Vec::with_capacity(n);
    let mut down = Vec::with_capacity(n);
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if x + 1 < width {
                right.push(color_similarity(&colors[i], &colors[i + 1], theta));
            }
            if y + 1 < height {
                down.push(color_similarity(&colors[i], &colors[i + width], theta));
            }
        }
    }
    EnergyProblem::new(width, height, prob, right, down, fixed, lambda)
        .expect("generated instance is valid")
}

/// Sub-seed for trial `i` of a seeded batch.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Objective agreement required between the two solvers.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

/// One graph-cut vs. enumeration comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleTrial {
    pub trial: u64,
    pub seed: u64,
    pub graphcut: f64,
    pub bruteforce: f64,
}

impl OracleTrial {
    pub fn matches(&self) -> bool {
        (self.graphcut - self.bruteforce).abs() <= ORACLE_TOLERANCE
    }
}

/// Runs `trials` seeded random instances through both solvers.
pub fn oracle_trials(
    width: usize,
    height: usize,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<OracleTrial>> {
    exec.map_indexed(trials as usize, |i| {
        let trial = i as u64;
        let sub = trial_seed(seed, trial);
        let problem = random_problem(width, height, sub);
        Ok(OracleTrial {
            trial,
            seed: sub,
            graphcut: solve_graphcut(&problem)?.objective,
            bruteforce: solve_bruteforce(&problem)?.objective,
        })
    })
    .into_iter()
    .collect()
}
