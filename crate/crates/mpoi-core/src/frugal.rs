//! Frugal combinatorial algorithms: greedy-style packing and covering loops
//! driven by a marginal-value function, plus semiadditive objectives.

use std::collections::BTreeSet;

use crate::constraints::{CoveringOracle, ElementSet, PackingOracle};
use crate::error::{Error, Result};

/// A semiadditive set objective `f(I, x) = sum_{i in I} x_i + h(I)`.
#[derive(Debug, Clone)]
pub enum SemiadditiveObjective {
    /// `h = 0`.
    Additive,
    /// The set-cover objective: additive in set costs (`h = 0`); the
    /// non-additive part of the problem lives in the covering constraint and
    /// the ratio marginal below.
    SetCover,
    /// Explicit `h` table keyed by element set; missing sets evaluate to 0.
    CustomTable(Vec<(ElementSet, f64)>),
}

impl SemiadditiveObjective {
    pub fn h(&self, set: &ElementSet) -> f64 {
        match self {
            SemiadditiveObjective::Additive | SemiadditiveObjective::SetCover => 0.0,
            SemiadditiveObjective::CustomTable(table) => {
                table.iter().find(|(s, _)| s == set).map(|(_, v)| *v).unwrap_or(0.0)
            }
        }
    }

    /// `f(I, x)`; `x` must be defined on every element of `I`.
    pub fn evaluate(&self, set: &ElementSet, x: &[f64]) -> f64 {
        set.iter().map(|&i| x[i]).sum::<f64>() + self.h(set)
    }
}

/// Whether a marginal-value function grows or shrinks with the element value:
/// packing marginals increase in `y`, covering marginals decrease.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    IncreasingInY,
    DecreasingInY,
}

/// The marginal-value function `g(Y_M, i, y)` parameterizing a frugal run.
///
/// `Y_M` is passed as the selected (element, value) pairs in selection order;
/// the built-in kinds only use the identities.
#[derive(Debug, Clone)]
pub enum MarginalValue {
    /// `g = y`: plain additive packing.
    AdditivePacking,
    /// Value if both endpoints are unmatched by the selected edges, else the
    /// -inf sentinel; with the matching oracle this is the classic greedy.
    MatchingGreedy { endpoints: Vec<(usize, usize)> },
    /// Newly-covered count divided by cost while anything is uncovered, else
    /// zero; positive exactly when `i` covers something new.
    SetCoverRatio { universe_size: usize, covers: Vec<BTreeSet<usize>> },
    /// `ceiling - y` when `i` extends the rank of the selected set, else zero;
    /// the argmax then picks the cheapest rank-extender (Kruskal order). The
    /// ceiling must exceed every cost the run can see.
    MatroidBaseMin { matroid: PackingOracle, cost_ceiling: f64 },
}

impl MarginalValue {
    pub fn monotonicity(&self) -> Monotonicity {
        match self {
            MarginalValue::AdditivePacking | MarginalValue::MatchingGreedy { .. } => {
                Monotonicity::IncreasingInY
            }
            MarginalValue::SetCoverRatio { .. } | MarginalValue::MatroidBaseMin { .. } => {
                Monotonicity::DecreasingInY
            }
        }
    }

    pub fn eval(&self, selected: &[(usize, f64)], i: usize, y: f64) -> f64 {
        match self {
            MarginalValue::AdditivePacking => y,
            MarginalValue::MatchingGreedy { endpoints } => {
                let (a, b) = endpoints[i];
                let blocked = selected.iter().any(|&(j, _)| {
                    let (c, d) = endpoints[j];
                    a == c || a == d || b == c || b == d
                });
                if blocked {
                    f64::NEG_INFINITY
                } else {
                    y
                }
            }
            MarginalValue::SetCoverRatio { universe_size, covers } => {
                let mut hit = vec![false; *universe_size];
                for &(j, _) in selected {
                    for &x in &covers[j] {
                        hit[x] = true;
                    }
                }
                if hit.iter().all(|&b| b) {
                    return 0.0;
                }
                let new = covers[i].iter().filter(|&&x| !hit[x]).count();
                if new == 0 {
                    0.0
                } else if y <= 0.0 {
                    // a free set that covers something is infinitely attractive
                    f64::INFINITY
                } else {
                    new as f64 / y
                }
            }
            MarginalValue::MatroidBaseMin { matroid, cost_ceiling } => {
                let sel: ElementSet = selected.iter().map(|&(j, _)| j).collect();
                let extends = matroid.can_extend(&sel, i).unwrap_or(false);
                if extends {
                    cost_ceiling - y
                } else {
                    0.0
                }
            }
        }
    }
}

/// Argmax with deterministic lowest-id tie-breaking.
fn argmax(values: &[(usize, f64)]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &(i, v) in values {
        match best {
            None => best = Some((i, v)),
            Some((_, bv)) if v > bv => best = Some((i, v)),
            _ => {}
        }
    }
    best
}

/// The frugal packing loop: repeatedly add the feasible element of strictly
/// positive maximal marginal value. Output is always feasible.
pub fn run_frugal_packing(g: &MarginalValue, oracle: &PackingOracle, y: &[f64]) -> ElementSet {
    let n = oracle.n_elements();
    let mut selected_order: Vec<(usize, f64)> = Vec::new();
    let mut selected = ElementSet::new();
    loop {
        let candidates: Vec<(usize, f64)> = (0..n)
            .filter(|i| !selected.contains(i))
            .filter(|&i| oracle.can_extend(&selected, i).unwrap_or(false))
            .map(|i| (i, g.eval(&selected_order, i, y[i])))
            .collect();
        match argmax(&candidates) {
            Some((j, v)) if v > 0.0 => {
                selected.insert(j);
                selected_order.push((j, y[j]));
            }
            _ => return selected,
        }
    }
}

/// The frugal covering loop: no feasibility filter on the argmax, since the
/// marginal function itself must encode the constraint (positive marginals
/// exist while the set is infeasible). Stops when every marginal is
/// non-positive; an infeasible stop means the marginal breaks that contract.
pub fn run_frugal_covering(
    g: &MarginalValue,
    oracle: &CoveringOracle,
    y: &[f64],
) -> Result<ElementSet> {
    let n = oracle.n_elements();
    let mut selected_order: Vec<(usize, f64)> = Vec::new();
    let mut selected = ElementSet::new();
    loop {
        let candidates: Vec<(usize, f64)> = (0..n)
            .filter(|i| !selected.contains(i))
            .map(|i| (i, g.eval(&selected_order, i, y[i])))
            .collect();
        match argmax(&candidates) {
            Some((j, v)) if v > 0.0 => {
                selected.insert(j);
                selected_order.push((j, y[j]));
            }
            _ => {
                if oracle.is_feasible(&selected) {
                    return Ok(selected);
                }
                return Err(Error::NoProgress);
            }
        }
    }
}

/// Best feasible subset of `allowed` for fixed element values by exhaustive
/// enumeration: maximum value for packing constraints, minimum cost for
/// covering. `None` when no subset of `allowed` is feasible.
pub fn best_feasible_subset(
    constraint: &crate::constraints::ConstraintOracle,
    objective: &SemiadditiveObjective,
    values: &[f64],
    allowed: &ElementSet,
) -> Option<(f64, ElementSet)> {
    let pool: Vec<usize> = allowed.iter().copied().collect();
    let maximize = matches!(constraint, crate::constraints::ConstraintOracle::Packing(_));
    let mut best: Option<(f64, ElementSet)> = None;
    for mask in 0u64..(1 << pool.len()) {
        let s: ElementSet =
            pool.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &i)| i).collect();
        if !constraint.is_feasible(&s) {
            continue;
        }
        let v = objective.evaluate(&s, values);
        let better = match &best {
            None => true,
            Some((bv, _)) => {
                if maximize {
                    v > *bv
                } else {
                    v < *bv
                }
            }
        };
        if better {
            best = Some((v, s));
        }
    }
    best
}

/// Default marginal for a packing constraint kind.
pub fn default_packing_marginal(oracle: &PackingOracle) -> MarginalValue {
    match oracle {
        PackingOracle::Matching { endpoints, .. } => {
            MarginalValue::MatchingGreedy { endpoints: endpoints.clone() }
        }
        _ => MarginalValue::AdditivePacking,
    }
}

/// Default marginal for a covering constraint kind. `cost_ceiling` must
/// exceed every element cost the run can encounter.
pub fn default_covering_marginal(oracle: &CoveringOracle, cost_ceiling: f64) -> MarginalValue {
    match oracle {
        CoveringOracle::SetCover { universe_size, covers } => {
            MarginalValue::SetCoverRatio { universe_size: *universe_size, covers: covers.clone() }
        }
        CoveringOracle::MatroidBase { matroid } => {
            MarginalValue::MatroidBaseMin { matroid: matroid.clone(), cost_ceiling }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[usize]) -> ElementSet {
        xs.iter().copied().collect()
    }

    #[test]
    fn additive_greedy_keeps_positives() {
        let o = PackingOracle::UniformMatroid { n: 3, k: 2 };
        let out = run_frugal_packing(&MarginalValue::AdditivePacking, &o, &[3.0, 1.0, -2.0]);
        assert_eq!(out, set(&[0, 1]));
        assert_eq!(SemiadditiveObjective::Additive.evaluate(&out, &[3.0, 1.0, -2.0]), 4.0);
    }

    #[test]
    fn no_positive_marginal_returns_empty() {
        let o = PackingOracle::UniformMatroid { n: 2, k: 1 };
        let out = run_frugal_packing(&MarginalValue::AdditivePacking, &o, &[-1.0, -5.0]);
        assert!(out.is_empty());
    }

    #[test]
    fn triangle_forest_takes_two_heaviest() {
        let o = PackingOracle::GraphicMatroid {
            n_vertices: 3,
            endpoints: vec![(0, 1), (1, 2), (2, 0)],
        };
        let y = [5.0, 4.0, 3.0];
        let out = run_frugal_packing(&MarginalValue::AdditivePacking, &o, &y);
        assert_eq!(out, set(&[0, 1]));
        // exhaustive maximum-weight forest agrees
        let mut best = (f64::NEG_INFINITY, ElementSet::new());
        for mask in 0u32..8 {
            let s: ElementSet = (0..3).filter(|i| mask >> i & 1 == 1).collect();
            if o.is_feasible(&s) {
                let w: f64 = s.iter().map(|&i| y[i]).sum();
                if w > best.0 {
                    best = (w, s);
                }
            }
        }
        assert_eq!(out, best.1);
        assert_eq!(best.0, 9.0);
    }

    #[test]
    fn set_cover_ratio_hand_run() {
        let covers = vec![set(&[0, 1]), set(&[1, 2])];
        let o = CoveringOracle::SetCover { universe_size: 3, covers: covers.clone() };
        let g = MarginalValue::SetCoverRatio { universe_size: 3, covers };
        let out = run_frugal_covering(&g, &o, &[1.0, 3.0]).unwrap();
        assert_eq!(out, set(&[0, 1]));
        assert_eq!(SemiadditiveObjective::SetCover.evaluate(&out, &[1.0, 3.0]), 4.0);
    }

    #[test]
    fn matroid_base_min_is_kruskal() {
        let matroid = PackingOracle::GraphicMatroid {
            n_vertices: 3,
            endpoints: vec![(0, 1), (1, 2), (2, 0)],
        };
        let o = CoveringOracle::MatroidBase { matroid: matroid.clone() };
        let g = MarginalValue::MatroidBaseMin { matroid, cost_ceiling: 10.0 };
        let out = run_frugal_covering(&g, &o, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(out, set(&[0, 1]));
        assert_eq!(out.iter().map(|&i| [1.0, 2.0, 3.0][i]).sum::<f64>(), 3.0);
    }

    #[test]
    fn single_mandatory_cover() {
        let covers = vec![set(&[0])];
        let o = CoveringOracle::SetCover { universe_size: 1, covers: covers.clone() };
        let g = MarginalValue::SetCoverRatio { universe_size: 1, covers };
        let out = run_frugal_covering(&g, &o, &[7.0]).unwrap();
        assert_eq!(out, set(&[0]));
    }

    #[test]
    fn broken_covering_marginal_reports_no_progress() {
        // additive-packing g never turns positive on costs, so the covering
        // loop stalls on an infeasible set
        let covers = vec![set(&[0])];
        let o = CoveringOracle::SetCover { universe_size: 1, covers };
        let out = run_frugal_covering(&MarginalValue::AdditivePacking, &o, &[-1.0]);
        assert_eq!(out, Err(Error::NoProgress));
    }

    #[test]
    fn evaluate_objective_with_h_table() {
        let obj = SemiadditiveObjective::CustomTable(vec![(set(&[0]), -2.0)]);
        assert_eq!(obj.evaluate(&set(&[0]), &[3.0]), 1.0);
        assert_eq!(obj.evaluate(&set(&[]), &[3.0]), 0.0);
    }

    #[test]
    fn raising_a_winner_keeps_it_selected() {
        // monotone replay on small matroids, checked exhaustively
        let oracles = [
            PackingOracle::UniformMatroid { n: 4, k: 2 },
            PackingOracle::PartitionMatroid { labels: vec![0, 0, 1, 1], capacities: vec![1, 1] },
        ];
        let base = [4.0, 3.0, 2.0, 1.0];
        for o in &oracles {
            let out = run_frugal_packing(&MarginalValue::AdditivePacking, o, &base);
            for &i in &out {
                let mut raised = base;
                raised[i] += 0.25; // small enough to keep all pairwise orders
                let out2 = run_frugal_packing(&MarginalValue::AdditivePacking, o, &raised);
                assert!(out2.contains(&i), "raising {i} evicted it: {out2:?}");
            }
        }
    }

    #[test]
    fn zero_marginal_stops_the_loop() {
        let o = PackingOracle::UniformMatroid { n: 2, k: 2 };
        let out = run_frugal_packing(&MarginalValue::AdditivePacking, &o, &[0.0, 2.0]);
        assert_eq!(out, set(&[1]));
    }
}
