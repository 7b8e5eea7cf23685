//! Ground truth for small instances: exact optimal policies by backward
//! induction over joint state spaces, exact evaluation of arbitrary
//! strategies by full trajectory-profile enumeration, and seeded Monte Carlo
//! estimation.

use std::collections::HashMap;

use crate::adaptive::{self, RobustnessParams, RunOutcome};
use crate::constraints::{ConstraintOracle, CoveringOracle, ElementSet, PackingOracle};
use crate::error::{Error, Result};
use crate::frugal::{best_feasible_subset, MarginalValue, SemiadditiveObjective};
use crate::grade::GradeTable;
use crate::markov::{MarkovSystem, StateId, Trajectory, TrajectoryProfile};

/// Default cap on enumerated trajectory profiles.
pub const DEFAULT_PROFILE_CAP: usize = 1_000_000;
/// Default cap on joint DP states.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// Which game the DP solves. The commitment-free mode is the maximization
/// benchmark that commitment algorithms are measured against; it coincides
/// with plain utility maximization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpMode {
    UtiMax,
    DisMin,
    CommitmentFree,
}

impl DpMode {
    fn maximize(self) -> bool {
        !matches!(self, DpMode::DisMin)
    }
}

/// Optimal action at a joint state: advance one system, or stop and select
/// the best feasible prepared subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpAction {
    Advance(usize),
    Stop,
}

/// Exact optimum of the probing game with the optimal policy table.
#[derive(Debug, Clone)]
pub struct DpResult {
    pub optimal_value: f64,
    pub policy: HashMap<Vec<u32>, DpAction>,
    pub state_count: usize,
}

impl DpResult {
    pub fn action(&self, joint: &[StateId]) -> Option<DpAction> {
        let key: Vec<u32> = joint.iter().map(|s| s.0).collect();
        self.policy.get(&key).copied()
    }
}

/// Exact optimal value by backward induction over the joint DAG.
///
/// At each joint state the player either stops (collecting the best feasible
/// subset of prepared elements, minimum-cost feasible cover for
/// minimization) or advances one system, paying its current price. Optimal
/// play is Markovian in the raw joint state, so no prevailing component is
/// needed here.
pub fn optimal_policy_dp(
    systems: &[MarkovSystem],
    constraint: &ConstraintOracle,
    objective: &SemiadditiveObjective,
    mode: DpMode,
    state_cap: usize,
) -> Result<DpResult> {
    let n = systems.len();
    if n > 15 {
        return Err(Error::TooLargeForExact {
            detail: format!("{n} systems exceed the exhaustive stop-evaluation cap of 15"),
        });
    }
    let mut joint_count: usize = 1;
    for (i, ms) in systems.iter().enumerate() {
        if !ms.classify().is_dag {
            return Err(Error::NotDag(i));
        }
        joint_count = joint_count.saturating_mul(ms.n_states());
    }
    if joint_count > state_cap {
        return Err(Error::StateSpaceTooLarge { cap: state_cap });
    }

    let stop_value = |joint: &[u32]| -> Option<f64> {
        let prepared: ElementSet =
            (0..n).filter(|&i| systems[i].is_destination(StateId(joint[i]))).collect();
        let values: Vec<f64> = (0..n).map(|i| systems[i].value(StateId(joint[i]))).collect();
        best_feasible_subset(constraint, objective, &values, &prepared).map(|(v, _)| v)
    };
    // prices lower utility when maximizing, raise disutility when minimizing
    let price_sign = if mode.maximize() { -1.0 } else { 1.0 };

    let mut memo: HashMap<Vec<u32>, (f64, DpAction)> = HashMap::new();
    let start: Vec<u32> = systems.iter().map(|ms| ms.start().0).collect();
    // post-order DFS with an explicit stack; deep DAG chains would otherwise
    // exhaust the call stack
    let mut stack: Vec<Vec<u32>> = vec![start.clone()];
    while let Some(joint) = stack.last().cloned() {
        if memo.contains_key(&joint) {
            stack.pop();
            continue;
        }
        let mut pending = Vec::new();
        let mut advance_vals: Vec<(usize, f64)> = Vec::new();
        let mut all_children_ready = true;
        for i in 0..n {
            let u = StateId(joint[i]);
            if systems[i].is_destination(u) {
                continue;
            }
            let mut expect = price_sign * systems[i].price(u);
            for &(v, p) in systems[i].row(u) {
                let mut next = joint.clone();
                next[i] = v.0;
                match memo.get(&next) {
                    Some(&(val, _)) => expect += p * val,
                    None => {
                        all_children_ready = false;
                        pending.push(next);
                    }
                }
            }
            if all_children_ready {
                advance_vals.push((i, expect));
            }
        }
        if !all_children_ready {
            stack.extend(pending);
            continue;
        }
        let stop = stop_value(&joint);
        let mut best: Option<(f64, DpAction)> = stop.map(|v| (v, DpAction::Stop));
        for (i, v) in advance_vals {
            let better = match best {
                None => true,
                Some((bv, _)) => {
                    if mode.maximize() {
                        v > bv
                    } else {
                        v < bv
                    }
                }
            };
            if better {
                best = Some((v, DpAction::Advance(i)));
            }
        }
        let best = best.ok_or(Error::UndefinedAction)?;
        memo.insert(joint, best);
        stack.pop();
    }

    let optimal_value = memo[&start].0;
    let state_count = memo.len();
    let policy = memo.into_iter().map(|(k, (_, a))| (k, a)).collect();
    Ok(DpResult { optimal_value, policy, state_count })
}

/// Recomputes the Bellman residual at every expanded state; exact solutions
/// return a residual at float-roundoff scale.
pub fn max_bellman_residual(
    systems: &[MarkovSystem],
    constraint: &ConstraintOracle,
    objective: &SemiadditiveObjective,
    mode: DpMode,
    dp: &DpResult,
) -> f64 {
    let n = systems.len();
    let price_sign = if mode.maximize() { -1.0 } else { 1.0 };
    let candidate_values = |joint: &[u32], values: &HashMap<Vec<u32>, f64>| -> Option<Vec<f64>> {
        let prepared: ElementSet =
            (0..n).filter(|&i| systems[i].is_destination(StateId(joint[i]))).collect();
        let vals: Vec<f64> = (0..n).map(|i| systems[i].value(StateId(joint[i]))).collect();
        let stop = best_feasible_subset(constraint, objective, &vals, &prepared);
        let mut cands: Vec<f64> = stop.map(|(v, _)| v).into_iter().collect();
        for i in 0..n {
            let u = StateId(joint[i]);
            if systems[i].is_destination(u) {
                continue;
            }
            let mut expect = price_sign * systems[i].price(u);
            for &(v, p) in systems[i].row(u) {
                let mut next = joint.to_vec();
                next[i] = v.0;
                expect += p * values.get(&next)?;
            }
            cands.push(expect);
        }
        Some(cands)
    };
    let fold = |cands: &[f64]| {
        if mode.maximize() {
            cands.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            cands.iter().copied().fold(f64::INFINITY, f64::min)
        }
    };

    // recover state values by sweeping until every state's children are done
    let mut values: HashMap<Vec<u32>, f64> = HashMap::new();
    let mut remaining: Vec<Vec<u32>> = dp.policy.keys().cloned().collect();
    while !remaining.is_empty() {
        let before = remaining.len();
        remaining.retain(|joint| match candidate_values(joint, &values) {
            Some(cands) => {
                values.insert(joint.clone(), fold(&cands));
                false
            }
            None => true,
        });
        if remaining.len() == before {
            break;
        }
    }
    let mut worst = 0.0f64;
    for (joint, &v) in &values {
        if let Some(cands) = candidate_values(joint, &values) {
            worst = worst.max((fold(&cands) - v).abs());
        }
    }
    worst
}

/// Every joint trajectory profile with its exact probability; weights sum
/// to 1. Requires DAG systems and at most `cap` combinations.
pub fn enumerate_profiles(
    systems: &[MarkovSystem],
    cap: usize,
) -> Result<Vec<(TrajectoryProfile, f64)>> {
    let mut per_system: Vec<Vec<(Vec<StateId>, f64)>> = Vec::with_capacity(systems.len());
    for (i, ms) in systems.iter().enumerate() {
        if !ms.classify().is_dag {
            return Err(Error::NotDag(i));
        }
        let mut paths = Vec::new();
        let mut prefix = vec![ms.start()];
        enumerate_paths(ms, ms.start(), 1.0, &mut prefix, &mut paths);
        per_system.push(paths);
    }
    let total = per_system.iter().map(|p| p.len()).fold(1usize, |a, b| a.saturating_mul(b));
    if total > cap {
        return Err(Error::TooManyProfiles { count: total, cap });
    }

    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; systems.len()];
    loop {
        let mut weight = 1.0;
        let mut trajectories = Vec::with_capacity(systems.len());
        for (i, choices) in per_system.iter().enumerate() {
            let (path, p) = &choices[idx[i]];
            weight *= p;
            trajectories.push(Trajectory { system_id: i, visited: path.clone(), terminated: true });
        }
        out.push((TrajectoryProfile { trajectories }, weight));
        // odometer increment over the per-system path choices
        let mut carry = true;
        for i in 0..idx.len() {
            if !carry {
                break;
            }
            idx[i] += 1;
            if idx[i] == per_system[i].len() {
                idx[i] = 0;
            } else {
                carry = false;
            }
        }
        if carry {
            break;
        }
    }
    Ok(out)
}

fn enumerate_paths(
    ms: &MarkovSystem,
    u: StateId,
    prob: f64,
    prefix: &mut Vec<StateId>,
    out: &mut Vec<(Vec<StateId>, f64)>,
) {
    if ms.is_destination(u) {
        out.push((prefix.clone(), prob));
        return;
    }
    for &(v, p) in ms.row(u) {
        prefix.push(v);
        enumerate_paths(ms, v, prob * p, prefix, out);
        prefix.pop();
    }
}

/// A deterministic strategy evaluated by replaying it against every
/// enumerated trajectory profile.
pub trait ReplayStrategy {
    fn utility(&self, profile: &TrajectoryProfile) -> Result<f64>;
}

/// Exact expected utility of a deterministic strategy: the weighted sum of
/// its utility over all trajectory profiles.
pub fn exact_policy_value<S: ReplayStrategy>(
    systems: &[MarkovSystem],
    strategy: &S,
    cap: usize,
) -> Result<f64> {
    let profiles = enumerate_profiles(systems, cap)?;
    let mut total = 0.0;
    for (profile, w) in &profiles {
        total += w * strategy.utility(profile)?;
    }
    Ok(total)
}

/// The grade-proxy adaptive maximization strategy as a replayable policy.
pub struct AdaptiveUtiMax<'a> {
    pub systems: &'a [MarkovSystem],
    pub oracle: &'a PackingOracle,
    pub g: &'a MarginalValue,
    pub grades: &'a [GradeTable],
    pub objective: &'a SemiadditiveObjective,
}

impl ReplayStrategy for AdaptiveUtiMax<'_> {
    fn utility(&self, profile: &TrajectoryProfile) -> Result<f64> {
        Ok(adaptive::run_utimax_replayed(
            self.systems,
            self.oracle,
            self.g,
            self.grades,
            self.objective,
            profile,
        )?
        .utility)
    }
}

/// The minimization twin as a replayable policy (utility = disutility).
pub struct AdaptiveDisMin<'a> {
    pub systems: &'a [MarkovSystem],
    pub oracle: &'a CoveringOracle,
    pub g: &'a MarginalValue,
    /// Grade tables of the value-negated systems.
    pub grades: &'a [GradeTable],
    pub objective: &'a SemiadditiveObjective,
}

impl ReplayStrategy for AdaptiveDisMin<'_> {
    fn utility(&self, profile: &TrajectoryProfile) -> Result<f64> {
        Ok(adaptive::run_dismin_replayed(
            self.systems,
            self.oracle,
            self.g,
            self.grades,
            self.objective,
            profile,
        )?
        .utility)
    }
}

/// The robust maximization strategy as a replayable policy.
pub struct RobustUtiMax<'a> {
    pub systems: &'a [MarkovSystem],
    pub oracle: &'a PackingOracle,
    pub g: &'a MarginalValue,
    pub estimated_grades: &'a [GradeTable],
    pub params: &'a RobustnessParams,
    pub objective: &'a SemiadditiveObjective,
}

impl ReplayStrategy for RobustUtiMax<'_> {
    fn utility(&self, profile: &TrajectoryProfile) -> Result<f64> {
        Ok(adaptive::run_robust_utimax_replayed(
            self.systems,
            self.oracle,
            self.g,
            self.estimated_grades,
            self.params,
            self.objective,
            profile,
        )?
        .utility)
    }
}

/// Never advances anything; utility `h(empty)` (zero for additive).
pub struct StopImmediately<'a> {
    pub objective: &'a SemiadditiveObjective,
}

impl ReplayStrategy for StopImmediately<'_> {
    fn utility(&self, _profile: &TrajectoryProfile) -> Result<f64> {
        Ok(self.objective.h(&ElementSet::new()))
    }
}

/// Advances every system to completion (round-robin, one step each — the
/// epoch-splitting order) and then selects the best feasible prepared
/// subset. Pays for everything, abandons nothing.
pub struct RoundRobinProbeAll<'a> {
    pub systems: &'a [MarkovSystem],
    pub constraint: &'a ConstraintOracle,
    pub objective: &'a SemiadditiveObjective,
}

impl ReplayStrategy for RoundRobinProbeAll<'_> {
    fn utility(&self, profile: &TrajectoryProfile) -> Result<f64> {
        let n = self.systems.len();
        let mut price = 0.0;
        for i in 0..n {
            price += profile.get(i).total_price(&self.systems[i]);
        }
        let values: Vec<f64> =
            (0..n).map(|i| self.systems[i].value(profile.get(i).last())).collect();
        let allowed: ElementSet = (0..n).collect();
        let (best, _) = best_feasible_subset(self.constraint, self.objective, &values, &allowed)
            .ok_or(Error::UndefinedAction)?;
        Ok(match self.constraint {
            ConstraintOracle::Packing(_) => best - price,
            ConstraintOracle::Covering(_) => best + price,
        })
    }
}

/// Replays the DP policy itself; evaluating it must reproduce the DP value.
pub struct DpPolicyStrategy<'a> {
    pub systems: &'a [MarkovSystem],
    pub constraint: &'a ConstraintOracle,
    pub objective: &'a SemiadditiveObjective,
    pub dp: &'a DpResult,
}

impl ReplayStrategy for DpPolicyStrategy<'_> {
    fn utility(&self, profile: &TrajectoryProfile) -> Result<f64> {
        let n = self.systems.len();
        let mut pos = vec![0usize; n];
        let mut price = 0.0;
        loop {
            let joint: Vec<StateId> = (0..n).map(|i| profile.get(i).visited[pos[i]]).collect();
            match self.dp.action(&joint).ok_or(Error::UndefinedAction)? {
                DpAction::Advance(i) => {
                    price += self.systems[i].price(joint[i]);
                    pos[i] += 1;
                    if pos[i] >= profile.get(i).visited.len() {
                        return Err(Error::ProfileExhausted(i));
                    }
                }
                DpAction::Stop => {
                    let prepared: ElementSet =
                        (0..n).filter(|&i| self.systems[i].is_destination(joint[i])).collect();
                    let values: Vec<f64> =
                        (0..n).map(|i| self.systems[i].value(joint[i])).collect();
                    let (best, _) =
                        best_feasible_subset(self.constraint, self.objective, &values, &prepared)
                            .ok_or(Error::UndefinedAction)?;
                    return Ok(match self.constraint {
                        ConstraintOracle::Packing(_) => best - price,
                        ConstraintOracle::Covering(_) => best + price,
                    });
                }
            }
        }
    }
}

/// Pairwise summation; associative and order-independent enough for
/// reproducible aggregation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Sample mean and standard error (zero stderr for fewer than two samples).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Runs `runner(master_seed, run_id)` for `n_runs` independently-seeded runs
/// and reports mean and standard error; deterministic given `master_seed`.
pub fn mc_estimate<F>(runner: F, n_runs: usize, master_seed: u64) -> Result<(f64, f64)>
where
    F: Fn(u64, u64) -> Result<f64>,
{
    let mut vals = Vec::with_capacity(n_runs);
    for run in 0..n_runs {
        vals.push(runner(master_seed, run as u64)?);
    }
    Ok(mean_and_stderr(&vals))
}

/// Per-run outcomes of the adaptive maximization strategy under independent
/// seeds; the CLI's simulate rows.
pub fn simulate_utimax(
    systems: &[MarkovSystem],
    oracle: &PackingOracle,
    g: &MarginalValue,
    grades: &[GradeTable],
    objective: &SemiadditiveObjective,
    n_runs: usize,
    master_seed: u64,
) -> Result<Vec<RunOutcome>> {
    (0..n_runs)
        .map(|run| {
            adaptive::run_utimax(systems, oracle, g, grades, objective, master_seed, run as u64)
        })
        .collect()
}
