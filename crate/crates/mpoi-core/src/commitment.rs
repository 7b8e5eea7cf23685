//! The commitment pipeline: an occupancy-measure LP that upper-bounds the
//! no-commitment optimum, online contention resolution over its selection
//! marginals, and the take-it-or-leave-it playout that rounds the LP while
//! honoring commitment.

use std::collections::BTreeMap;

use rand::Rng;

use crate::adaptive::{RunOutcome, TraceEvent};
use crate::constraints::{ElementSet, PackingOracle};
use crate::error::{Error, Result};
use crate::markov::{MarkovSystem, StateId, Trajectory, TrajectoryProfile};
use crate::rng::{aux_rng, system_rng};
use crate::simplex::{self, LinearProgram, LpStatus, Relation};

/// Zero-measure guard: LP states with reach probability below this are never
/// advanced into.
pub const MEASURE_EPS: f64 = 1e-12;

/// Packing polytopes the LP knows how to encode.
#[derive(Debug, Clone)]
pub enum PolytopeSpec {
    UniformMatroid { k: usize },
    PartitionMatroid { labels: Vec<usize>, capacities: Vec<usize> },
}

impl PolytopeSpec {
    /// The polytope of a packing oracle, where one exists in closed form.
    pub fn from_oracle(oracle: &PackingOracle) -> Result<Self> {
        match oracle {
            PackingOracle::UniformMatroid { k, .. } => Ok(PolytopeSpec::UniformMatroid { k: *k }),
            PackingOracle::PartitionMatroid { labels, capacities } => {
                Ok(PolytopeSpec::PartitionMatroid {
                    labels: labels.clone(),
                    capacities: capacities.clone(),
                })
            }
            other => Err(Error::UnsupportedPolytope(format!("{other:?}"))),
        }
    }
}

/// Row counts per constraint group, mostly for structural assertions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowGroups {
    pub start_rows: usize,
    pub flow_rows: usize,
    pub selection_rows: usize,
    pub z_le_y_rows: usize,
    pub polytope_rows: usize,
}

/// The occupancy LP over variables `y` (reach probability), `z` (play
/// probability), and `x` (selection probability).
#[derive(Debug, Clone)]
pub struct CommitmentLp {
    pub n_systems: usize,
    y_idx: Vec<Vec<usize>>,
    z_idx: Vec<Vec<usize>>,
    x_idx: Vec<usize>,
    pub lp: LinearProgram,
    pub groups: RowGroups,
}

/// Solved occupancy measures.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub objective_value: f64,
    pub status: LpStatus,
}

/// Builds the LP: `y_s = 1`; flow `y_i^u = sum_v p_{v,u} z_i^v` for every
/// non-start state; `x_i = sum_{t} z_i^t`; `z <= y`; `x` in the polytope;
/// everything non-negative. Objective: destination rewards minus probing
/// prices, weighted by the play probabilities.
pub fn build_lp(systems: &[MarkovSystem], polytope: &PolytopeSpec) -> Result<CommitmentLp> {
    let n = systems.len();
    for (i, ms) in systems.iter().enumerate() {
        if !ms.classify().is_dag {
            return Err(Error::NotDag(i));
        }
    }

    let mut y_idx = Vec::with_capacity(n);
    let mut z_idx = Vec::with_capacity(n);
    let mut x_idx = Vec::with_capacity(n);
    let mut n_vars = 0usize;
    for ms in systems {
        let states = ms.n_states();
        y_idx.push((0..states).map(|s| n_vars + s).collect::<Vec<_>>());
        n_vars += states;
        z_idx.push((0..states).map(|s| n_vars + s).collect::<Vec<_>>());
        n_vars += states;
    }
    for _ in 0..n {
        x_idx.push(n_vars);
        n_vars += 1;
    }

    let mut objective = vec![0.0; n_vars];
    for (i, ms) in systems.iter().enumerate() {
        for s in 0..ms.n_states() {
            let sid = StateId(s as u32);
            objective[z_idx[i][s]] =
                if ms.is_destination(sid) { ms.value(sid) } else { -ms.price(sid) };
        }
    }

    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    let mut groups = RowGroups {
        start_rows: 0,
        flow_rows: 0,
        selection_rows: 0,
        z_le_y_rows: 0,
        polytope_rows: 0,
    };

    // y_i^{s_i} = 1
    for (i, ms) in systems.iter().enumerate() {
        let mut a = vec![0.0; n_vars];
        a[y_idx[i][ms.start().idx()]] = 1.0;
        rows.push((a, Relation::Eq, 1.0));
        groups.start_rows += 1;
    }
    // y_i^u = sum over predecessors v of p_{v,u} z_i^v, for u != s_i
    for (i, ms) in systems.iter().enumerate() {
        for u in 0..ms.n_states() {
            if StateId(u as u32) == ms.start() {
                continue;
            }
            let mut a = vec![0.0; n_vars];
            a[y_idx[i][u]] = 1.0;
            for v in 0..ms.n_states() {
                let vid = StateId(v as u32);
                if ms.is_destination(vid) {
                    continue;
                }
                for &(w, p) in ms.row(vid) {
                    if w.idx() == u {
                        a[z_idx[i][v]] -= p;
                    }
                }
            }
            rows.push((a, Relation::Eq, 0.0));
            groups.flow_rows += 1;
        }
    }
    // x_i = sum over destinations of z_i^t
    for (i, ms) in systems.iter().enumerate() {
        let mut a = vec![0.0; n_vars];
        a[x_idx[i]] = 1.0;
        for t in ms.destinations() {
            a[z_idx[i][t.idx()]] -= 1.0;
        }
        rows.push((a, Relation::Eq, 0.0));
        groups.selection_rows += 1;
    }
    // z_i^u <= y_i^u
    for (i, ms) in systems.iter().enumerate() {
        for u in 0..ms.n_states() {
            let mut a = vec![0.0; n_vars];
            a[z_idx[i][u]] = 1.0;
            a[y_idx[i][u]] = -1.0;
            rows.push((a, Relation::Le, 0.0));
            groups.z_le_y_rows += 1;
        }
    }
    // x in the packing polytope
    match polytope {
        PolytopeSpec::UniformMatroid { k } => {
            let mut a = vec![0.0; n_vars];
            for i in 0..n {
                a[x_idx[i]] = 1.0;
            }
            rows.push((a, Relation::Le, *k as f64));
            groups.polytope_rows += 1;
        }
        PolytopeSpec::PartitionMatroid { labels, capacities } => {
            for (part, &cap) in capacities.iter().enumerate() {
                let mut a = vec![0.0; n_vars];
                for i in 0..n {
                    if labels[i] == part {
                        a[x_idx[i]] = 1.0;
                    }
                }
                rows.push((a, Relation::Le, cap as f64));
                groups.polytope_rows += 1;
            }
        }
    }

    let lp = LinearProgram { n_vars, maximize: true, objective, rows };
    Ok(CommitmentLp { n_systems: n, y_idx, z_idx, x_idx, lp, groups })
}

/// Solves the LP and checks every constraint and the objective identity at
/// the given tolerance.
pub fn solve_lp(clp: &CommitmentLp, tol: f64) -> Result<LpSolution> {
    let sol = simplex::solve(&clp.lp);
    match sol.status {
        LpStatus::Infeasible => return Err(Error::LpInfeasible),
        LpStatus::Unbounded => return Err(Error::LpUnbounded),
        LpStatus::Optimal => {}
    }
    for (a, rel, b) in &clp.lp.rows {
        let lhs: f64 = a.iter().zip(&sol.x).map(|(c, v)| c * v).sum();
        let ok = match rel {
            Relation::Eq => (lhs - b).abs() <= tol,
            Relation::Le => lhs <= b + tol,
        };
        if !ok {
            return Err(Error::Parse(format!("LP residual {lhs} vs {b} beyond {tol}")));
        }
    }
    let recomputed: f64 = clp.lp.objective.iter().zip(&sol.x).map(|(c, v)| c * v).sum();
    if (recomputed - sol.objective).abs() > tol {
        return Err(Error::Parse("LP objective mismatch".into()));
    }

    // occupancy values are probabilities; shave pivot-arithmetic residue
    let clean = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v.clamp(0.0, 1.0) };
    let y = clp
        .y_idx
        .iter()
        .map(|ids| ids.iter().map(|&j| clean(sol.x[j])).collect::<Vec<_>>())
        .collect::<Vec<_>>();
    let z = clp
        .z_idx
        .iter()
        .map(|ids| ids.iter().map(|&j| clean(sol.x[j])).collect::<Vec<_>>())
        .collect::<Vec<_>>();
    let x = clp.x_idx.iter().map(|&j| clean(sol.x[j])).collect();
    Ok(LpSolution { x, y, z, objective_value: sol.objective, status: LpStatus::Optimal })
}

/// The LP upper-bounds the no-commitment optimum; true iff that holds at
/// 1e-6.
pub fn lp_upper_bound_check(lp_value: f64, dp_opt: f64) -> bool {
    lp_value >= dp_opt - 1e-6
}

/// An online contention resolution scheme with precomputed acceptance
/// probabilities per element.
#[derive(Debug, Clone)]
pub enum OcrsScheme {
    /// Exactly 1/2-selectable on the rank-1 polytope: accept an active
    /// element i (when nothing is selected yet) with probability
    /// `1/2 / (1 - 1/2 sum of earlier x_j)`.
    Rank1ExactHalf { order: Vec<usize>, q: Vec<f64> },
    /// Greedy for general matroids: accept whenever feasible. Selectability
    /// carries no closed-form guarantee; measure it and report.
    MatroidGreedyCalibrated { matroid: PackingOracle, order: Vec<usize>, q: Vec<f64> },
}

impl OcrsScheme {
    pub fn order(&self) -> &[usize] {
        match self {
            OcrsScheme::Rank1ExactHalf { order, .. } => order,
            OcrsScheme::MatroidGreedyCalibrated { order, .. } => order,
        }
    }

    pub fn acceptance(&self, element: usize) -> f64 {
        match self {
            OcrsScheme::Rank1ExactHalf { q, .. } => q[element],
            OcrsScheme::MatroidGreedyCalibrated { q, .. } => q[element],
        }
    }
}

/// Builds the exact-half rank-1 scheme for `x` with the given arrival order.
pub fn ocrs_rank1(x: &[f64], order: &[usize]) -> Result<OcrsScheme> {
    let sum: f64 = x.iter().sum();
    if sum > 1.0 + 1e-9 {
        return Err(Error::OutsidePolytope(format!("sum of x = {sum} exceeds 1")));
    }
    for (i, &xi) in x.iter().enumerate() {
        if !(0.0..=1.0 + 1e-9).contains(&xi) {
            return Err(Error::OutsidePolytope(format!("x[{i}] = {xi}")));
        }
    }
    let mut q = vec![0.0; x.len()];
    let mut seen = 0.0;
    for &i in order {
        q[i] = f64::min(0.5 / (1.0 - 0.5 * seen), 1.0);
        seen += x[i];
    }
    Ok(OcrsScheme::Rank1ExactHalf { order: order.to_vec(), q })
}

/// Greedy matroid scheme: accept every active feasible element.
pub fn ocrs_matroid_greedy(matroid: &PackingOracle, order: &[usize]) -> OcrsScheme {
    OcrsScheme::MatroidGreedyCalibrated {
        matroid: matroid.clone(),
        order: order.to_vec(),
        q: vec![1.0; order.len()],
    }
}

/// Exact per-element selectability `Pr[i selected | i active]` by
/// enumerating all activity patterns (and integrating the acceptance coins
/// analytically). Exhaustive; `n <= 12`.
pub fn selectability_exhaustive(scheme: &OcrsScheme, x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n > 12 {
        return Err(Error::TooLargeForExact {
            detail: format!("{n} elements exceed the OCRS enumeration cap of 12"),
        });
    }
    let mut selected_prob = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        let mut p_pattern = 1.0;
        for i in 0..n {
            p_pattern *= if mask >> i & 1 == 1 { x[i] } else { 1.0 - x[i] };
        }
        if p_pattern == 0.0 {
            continue;
        }
        match scheme {
            OcrsScheme::Rank1ExactHalf { order, q } => {
                let mut p_none = 1.0;
                for &i in order {
                    if mask >> i & 1 == 1 {
                        selected_prob[i] += p_pattern * p_none * q[i];
                        p_none *= 1.0 - q[i];
                    }
                }
            }
            OcrsScheme::MatroidGreedyCalibrated { matroid, order, q } => {
                // deterministic greedy path when q = 1; sub-unit q handled
                // multiplicatively along that path
                let mut kept = ElementSet::new();
                let mut p_path = 1.0;
                for &i in order {
                    if mask >> i & 1 == 1 && matroid.can_extend(&kept, i).unwrap_or(false) {
                        selected_prob[i] += p_pattern * p_path * q[i];
                        p_path *= q[i];
                        kept.insert(i);
                    }
                }
            }
        }
    }
    Ok((0..n).map(|i| if x[i] > 0.0 { selected_prob[i] / x[i] } else { 0.0 }).collect())
}

/// Monte Carlo selectability with fresh activity draws.
pub fn selectability_mc(scheme: &OcrsScheme, x: &[f64], runs: usize, master_seed: u64) -> Vec<f64> {
    let n = x.len();
    let mut active_counts = vec![0usize; n];
    let mut selected_counts = vec![0usize; n];
    for run in 0..runs {
        let mut rng = aux_rng(master_seed, run as u64, 2);
        let active: Vec<bool> = (0..n).map(|i| rng.random::<f64>() < x[i]).collect();
        let mut kept = ElementSet::new();
        let mut any = false;
        for &i in scheme.order() {
            if !active[i] {
                continue;
            }
            active_counts[i] += 1;
            let accept = match scheme {
                OcrsScheme::Rank1ExactHalf { q, .. } => !any && rng.random::<f64>() < q[i],
                OcrsScheme::MatroidGreedyCalibrated { matroid, q, .. } => {
                    matroid.can_extend(&kept, i).unwrap_or(false) && rng.random::<f64>() < q[i]
                }
            };
            if accept {
                selected_counts[i] += 1;
                kept.insert(i);
                any = true;
            }
        }
    }
    (0..n)
        .map(|i| {
            if active_counts[i] == 0 {
                0.0
            } else {
                selected_counts[i] as f64 / active_counts[i] as f64
            }
        })
        .collect()
}

/// One committed playout: walk the arrival order, ask the OCRS whether the
/// element would be kept if prepared, and if so advance its chain with
/// per-state probability `z/y`, selecting at a destination with `z_t/y_t`.
/// Once a system is abandoned or selected it is never touched again.
pub fn run_commitment(
    systems: &[MarkovSystem],
    sol: &LpSolution,
    scheme: &OcrsScheme,
    master_seed: u64,
    run_id: u64,
) -> Result<RunOutcome> {
    let mut ocrs_rng = aux_rng(master_seed, run_id, 0);
    let mut gate_rng = aux_rng(master_seed, run_id, 1);

    let mut selected = ElementSet::new();
    let mut kept_for_matroid = ElementSet::new();
    let mut any_selected = false;
    let mut total_price = 0.0;
    let mut destination_values = BTreeMap::new();
    let mut visited: Vec<Vec<StateId>> = systems.iter().map(|ms| vec![ms.start()]).collect();
    let mut trace = Vec::new();
    let mut selected_order = Vec::new();

    for &i in scheme.order() {
        let green = match scheme {
            OcrsScheme::Rank1ExactHalf { q, .. } => {
                !any_selected && ocrs_rng.random::<f64>() < q[i]
            }
            OcrsScheme::MatroidGreedyCalibrated { matroid, q, .. } => {
                matroid.can_extend(&kept_for_matroid, i).unwrap_or(false)
                    && ocrs_rng.random::<f64>() < q[i]
            }
        };
        if !green {
            continue;
        }
        let ms = &systems[i];
        let mut rng = system_rng(master_seed, run_id, i);
        let mut u = ms.start();
        loop {
            let yu = sol.y[i][u.idx()];
            let zu = sol.z[i][u.idx()];
            if yu < MEASURE_EPS {
                if zu > 1e-8 {
                    return Err(Error::DivisionDegenerate);
                }
                break; // zero-measure state: abandon
            }
            let play = gate_rng.random::<f64>() < zu / yu;
            if !play {
                break; // abandon; commitment discards unprepared elements
            }
            if ms.is_destination(u) {
                selected.insert(i);
                kept_for_matroid.insert(i);
                any_selected = true;
                destination_values.insert(i, ms.value(u));
                selected_order.push((i, ms.value(u)));
                trace.push(TraceEvent::Select { element: i, proxy: ms.value(u) });
                break;
            }
            total_price += ms.price(u);
            let next = ms.sample_step(u, &mut rng)?;
            trace.push(TraceEvent::Advance { element: i, from: u, to: next, opened_epoch: false });
            visited[i].push(next);
            u = next;
        }
    }

    let objective_value: f64 = selected.iter().map(|i| destination_values[i]).sum();
    let profile = TrajectoryProfile::new(
        visited
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let terminated = systems[i].is_destination(*v.last().unwrap());
                Trajectory { system_id: i, visited: v, terminated }
            })
            .collect(),
    );
    Ok(RunOutcome {
        selected,
        destination_values,
        total_price,
        objective_value,
        utility: objective_value - total_price,
        profile,
        trace,
        selected_proxies: selected_order,
    })
}

/// Element-id order, or a seeded per-run permutation for adversarial-order
/// stress runs.
pub fn arrival_order(n: usize, adversarial: bool, master_seed: u64, run_id: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if adversarial {
        let mut rng = aux_rng(master_seed, run_id, 3);
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
    }
    order
}
