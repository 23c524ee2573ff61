use std::time::Instant;

use super::{EnergyProblem, Fixed, FlowNetwork, SolveResult};
use crate::Result;

/// Exact maximizer via an s-t minimum cut.
///
/// Minimizes `Σ_p [x_p(1-P_p) + (1-x_p)P_p] + λ Σ S_pq [x_p ≠ x_q]`, which
/// differs from the maximized objective only by sign. Source side means
/// label 1. Unary terms are reduced to a single terminal arc per pixel;
/// fixed pixels get an arc of capacity (sum of finite capacities + 1), which
/// no minimum cut can afford to sever. Labels are read from the minimal
/// source set, so ties resolve toward background.
pub fn solve_graphcut(problem: &EnergyProblem) -> Result<SolveResult> {
    let start = Instant::now();
    let n = problem.width() * problem.height();
    let (s, t) = (n, n + 1);
    let lambda = problem.lambda();
    let fixed = problem.fixed();

    let pairwise = |p: usize, q: usize| fixed[p] == Fixed::Free || fixed[q] == Fixed::Free;
    let finite_total: f64 = problem
        .prob()
        .iter()
        .zip(fixed)
        .filter(|(_, &f)| f == Fixed::Free)
        .map(|(&p, _)| (2.0 * p - 1.0).abs())
        .sum::<f64>()
        + problem
            .edges()
            .filter(|&(p, q, _)| pairwise(p, q))
            .map(|(_, _, w)| 2.0 * lambda * w)
            .sum::<f64>();
    let infinite = finite_total + 1.0;

    let mut net = FlowNetwork::new(n + 2);
    for (p, (&prob, &f)) in problem.prob().iter().zip(fixed).enumerate() {
        match f {
            Fixed::One => net.add_edge(s, p, infinite),
            Fixed::Zero => net.add_edge(p, t, infinite),
            Fixed::Free if prob > 0.5 => net.add_edge(s, p, 2.0 * prob - 1.0),
            Fixed::Free if prob < 0.5 => net.add_edge(p, t, 1.0 - 2.0 * prob),
            Fixed::Free => {}
        }
    }
    if lambda > 0.0 {
        for (p, q, w) in problem.edges() {
            // Edges between two fixed pixels only add a constant.
            if w > 0.0 && pairwise(p, q) {
                net.add_undirected(p, q, lambda * w);
            }
        }
    }
    net.max_flow(s, t);
    let side = net.source_side(s);
    let labels = side[..n].iter().map(|&b| b as u8).collect();
    SolveResult::from_labels(problem, labels, start.elapsed())
}
