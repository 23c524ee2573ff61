use std::time::Instant;

use super::{score_unchecked, EnergyProblem, Fixed, SolveResult};
use crate::{Error, Result};

/// Largest number of free pixels the exhaustive solver accepts.
pub const BRUTE_FORCE_CAP: usize = 25;

/// Incremental scores closer than this count as ties.
const TIE_EPS: f64 = 1e-12;

/// Exhaustive maximizer over all `2^free` assignments of the free pixels.
///
/// Assignments are visited in Gray-code order so each step flips one pixel
/// and updates the objective in O(degree). Free pixels are packed into the
/// code most-significant-first in row-major order, so among tied optima the
/// smallest code is the lexicographically smallest labeling.
pub fn solve_bruteforce(problem: &EnergyProblem) -> Result<SolveResult> {
    let start = Instant::now();
    let free: Vec<usize> = problem
        .fixed()
        .iter()
        .enumerate()
        .filter(|(_, &f)| f == Fixed::Free)
        .map(|(i, _)| i)
        .collect();
    let k = free.len();
    if k > BRUTE_FORCE_CAP {
        return Err(Error::TooManyFreePixels {
            free: k,
            cap: BRUTE_FORCE_CAP,
        });
    }

    let n = problem.width() * problem.height();
    let lambda = problem.lambda();
    let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (p, q, w) in problem.edges() {
        neighbors[p].push((q, lambda * w));
        neighbors[q].push((p, lambda * w));
    }

    let mut x: Vec<u8> = problem
        .fixed()
        .iter()
        .map(|&f| (f == Fixed::One) as u8)
        .collect();
    let mut value = score_unchecked(problem, &x).total;
    let mut best = value;
    let mut best_code: u32 = 0;
    let prob = problem.prob();

    for i in 1u64..(1u64 << k) {
        let bit = i.trailing_zeros() as usize;
        let p = free[k - 1 - bit];
        let old = x[p];
        let new = 1 - old;
        // Unary: P if labelled 1, 1-P if 0.
        value += if new == 1 {
            2.0 * prob[p] - 1.0
        } else {
            1.0 - 2.0 * prob[p]
        };
        for &(q, lw) in &neighbors[p] {
            let was_cut = old != x[q];
            value += if was_cut { lw } else { -lw };
        }
        x[p] = new;

        let code = (i ^ (i >> 1)) as u32;
        let tie = (value - best).abs() <= TIE_EPS;
        if value > best + TIE_EPS || (tie && code < best_code) {
            best = value;
            best_code = code;
        }
    }

    let mut labels: Vec<u8> = problem
        .fixed()
        .iter()
        .map(|&f| (f == Fixed::One) as u8)
        .collect();
    for (j, &p) in free.iter().enumerate() {
        labels[p] = ((best_code >> (k - 1 - j)) & 1) as u8;
    }
    SolveResult::from_labels(problem, labels, start.elapsed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::objective_value;
    use crate::imgio::BinaryMask;

    #[test]
    fn single_free_pixel_unary() {
        let p =
            EnergyProblem::new(1, 1, vec![0.9], vec![], vec![], vec![Fixed::Free], 0.0).unwrap();
        let r = solve_bruteforce(&p).unwrap();
        assert_eq!(r.labels.labels(), &[1]);
        assert!((r.objective - 0.9).abs() < 1e-15);
    }

    #[test]
    fn surrounded_undecided_pixel_stays_background() {
        let mut fixed = vec![Fixed::Zero; 9];
        fixed[4] = Fixed::Free;
        let p =
            EnergyProblem::new(3, 3, vec![0.5; 9], vec![1.0; 6], vec![1.0; 6], fixed, 2.0).unwrap();
        let r = solve_bruteforce(&p).unwrap();
        assert_eq!(r.labels.labels()[4], 0);
        // Label 0: 9 * 0.5 = 4.5 with no cut. Label 1: 4.5 - 2 * 4 = -3.5.
        assert!((r.objective - 4.5).abs() < 1e-12);
        let mut one = vec![0u8; 9];
        one[4] = 1;
        let alt = objective_value(&p, &BinaryMask::new(3, 3, one).unwrap()).unwrap();
        assert!((alt.total + 3.5).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_lexicographic_minimum() {
        let p = EnergyProblem::new(
            3,
            1,
            vec![0.5; 3],
            vec![0.3; 2],
            vec![],
            vec![Fixed::Free; 3],
            0.0,
        )
        .unwrap();
        assert_eq!(solve_bruteforce(&p).unwrap().labels.labels(), &[0, 0, 0]);
    }

    #[test]
    fn cap_enforced() {
        let p = EnergyProblem::new(
            26,
            1,
            vec![0.5; 26],
            vec![1.0; 25],
            vec![],
            vec![Fixed::Free; 26],
            1.0,
        )
        .unwrap();
        assert!(matches!(
            solve_bruteforce(&p),
            Err(Error::TooManyFreePixels { free: 26, cap: 25 })
        ));
    }

    /// Independent 3x3 check: straight enumeration with full re-scoring.
    #[test]
    fn three_by_three_matches_plain_enumeration() {
        let prob = vec![0.9, 0.2, 0.7, 0.4, 0.55, 0.1, 0.8, 0.35, 0.6];
        let right = vec![0.9, 0.1, 0.5, 0.7, 0.3, 0.95];
        let down = vec![0.2, 0.8, 0.6, 0.4, 0.15, 0.75];
        let p = EnergyProblem::new(3, 3, prob, right, down, vec![Fixed::Free; 9], 0.6).unwrap();
        let mut best = f64::NEG_INFINITY;
        for code in 0u32..512 {
            let x: Vec<u8> = (0..9).map(|j| ((code >> (8 - j)) & 1) as u8).collect();
            best = best.max(score_unchecked(&p, &x).total);
        }
        let r = solve_bruteforce(&p).unwrap();
        assert!((r.objective - best).abs() < 1e-12);
    }
}
