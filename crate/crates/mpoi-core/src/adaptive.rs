//! Adaptive probing strategies: frugal algorithms run in the Markovian world
//! with grades as time-varying proxy values.
//!
//! Each round the engine scores every unselected element by
//! `g(Y_M, i, proxy_i)` where the proxy is the grade of the element's current
//! state (shifted upward per advance in robust mode), advances the argmax
//! element one step if it is not prepared, and selects it otherwise. The
//! replayed variants read transitions from a recorded trajectory profile
//! instead of an RNG, which is what the same-solution audits exercise.

use std::collections::{BTreeMap, HashMap};

use rand_chacha::ChaCha8Rng;

use crate::constraints::{ConstraintOracle, CoveringOracle, ElementSet, PackingOracle};
use crate::error::{Error, Result};
use crate::frugal::{
    run_frugal_covering, run_frugal_packing, MarginalValue, SemiadditiveObjective,
};
use crate::grade::GradeTable;
use crate::markov::{MarkovSystem, StateId, Trajectory, TrajectoryProfile, DEFAULT_STEP_CEILING};
use crate::rng::system_rng;

/// Where the engine gets its transitions: a live seeded generator per system,
/// or a pre-recorded profile (replay).
enum Transitions<'a> {
    Sampled { rngs: Vec<ChaCha8Rng>, step_ceiling: usize },
    Replay { profile: &'a TrajectoryProfile, cursor: Vec<usize> },
}

impl Transitions<'_> {
    fn step(
        &mut self,
        systems: &[MarkovSystem],
        i: usize,
        u: StateId,
        steps_taken: usize,
    ) -> Result<StateId> {
        match self {
            Transitions::Sampled { rngs, step_ceiling } => {
                if steps_taken >= *step_ceiling {
                    return Err(Error::NonTerminating { system: i, ceiling: *step_ceiling });
                }
                systems[i].sample_step(u, &mut rngs[i])
            }
            Transitions::Replay { profile, cursor } => {
                let traj = profile.get(i);
                debug_assert_eq!(traj.visited[cursor[i]], u);
                let next = cursor[i] + 1;
                if next >= traj.visited.len() {
                    return Err(Error::ProfileExhausted(i));
                }
                cursor[i] = next;
                Ok(traj.visited[next])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    UtiMax,
    DisMin,
}

/// One step of a run trace, enough to audit epoch atomicity and commitments.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Advance {
        element: usize,
        from: StateId,
        to: StateId,
        /// Whether the arrival strictly improved the element's prevailing
        /// proxy (i.e. opened a new epoch).
        opened_epoch: bool,
    },
    Select {
        element: usize,
        proxy: f64,
    },
}

/// Mutable state of one adaptive run.
#[derive(Debug, Clone)]
pub struct AdaptiveRunState {
    pub selected: ElementSet,
    pub current_state: Vec<StateId>,
    /// Advance counters (`ctr_i`); only consulted in robust mode.
    pub counters: Vec<usize>,
    pub accrued_price: f64,
}

/// Everything a finished run reports; the profile makes the outcome
/// replayable and the utility recomputable.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub selected: ElementSet,
    /// Destination value (or cost) per prepared element.
    pub destination_values: BTreeMap<usize, f64>,
    pub total_price: f64,
    /// `sum of selected values + h(selected)`.
    pub objective_value: f64,
    /// Utility for maximization (objective minus price); disutility for
    /// minimization (objective plus price).
    pub utility: f64,
    pub profile: TrajectoryProfile,
    pub trace: Vec<TraceEvent>,
    /// Realized prevailing proxy of each selected element, in selection order.
    pub selected_proxies: Vec<(usize, f64)>,
}

/// Input-size parameters of the robustness model for one scenario.
#[derive(Debug, Clone)]
pub struct RobustnessParams {
    pub epsilon: f64,
    /// Maximum feasible-solution size.
    pub k: usize,
    /// Per-system DAG depth.
    pub depths: Vec<usize>,
    /// Bound on all prices and values.
    pub bound: f64,
    /// Inverse of the smallest positive transition probability.
    pub inv_min_prob: f64,
}

impl RobustnessParams {
    /// Derives every parameter from the scenario; fails on cyclic systems.
    pub fn derive(
        systems: &[MarkovSystem],
        constraint: &ConstraintOracle,
        epsilon: f64,
    ) -> Result<Self> {
        let mut depths = Vec::with_capacity(systems.len());
        for (i, ms) in systems.iter().enumerate() {
            match ms.classify().depth {
                Some(d) => depths.push(d.max(1)),
                None => return Err(Error::NotDag(i)),
            }
        }
        let bound = systems.iter().map(|ms| ms.bound()).fold(0.0f64, f64::max);
        let inv_min_prob =
            systems.iter().map(|ms| 1.0 / ms.min_positive_prob()).fold(1.0f64, f64::max);
        Ok(RobustnessParams {
            epsilon,
            k: constraint.max_selection_size().max(1),
            depths,
            bound,
            inv_min_prob,
        })
    }

    /// `L = D^2 B P` with `D` the maximum depth.
    pub fn l(&self) -> f64 {
        let d = self.depths.iter().copied().max().unwrap_or(1) as f64;
        d * d * self.bound * self.inv_min_prob
    }

    /// Upward shift applied to system `i`'s proxies per advance.
    pub fn shift(&self, i: usize) -> f64 {
        self.epsilon / (2.0 * self.k as f64 * self.depths[i] as f64)
    }

    /// Admissible per-state grade estimation error for system `i`.
    pub fn grade_error_budget(&self, i: usize) -> f64 {
        self.epsilon / (4.0 * self.k as f64 * self.depths[i] as f64)
    }
}

struct Engine<'a> {
    systems: &'a [MarkovSystem],
    constraint: ConstraintOracle,
    g: &'a MarginalValue,
    /// Plain grade tables for maximization; value-negated tables for
    /// minimization.
    grades: &'a [GradeTable],
    objective: &'a SemiadditiveObjective,
    mode: Mode,
    /// Per-system per-advance proxy shift (robust mode); zeros otherwise.
    shifts: Vec<f64>,
}

impl Engine<'_> {
    /// Grade-derived proxy of element `i` at state `u` after `ctr` advances.
    fn proxy(&self, i: usize, u: StateId, ctr: usize) -> f64 {
        let shifted = self.grades[i].grade(u) + ctr as f64 * self.shifts[i];
        match self.mode {
            Mode::UtiMax => shifted,
            // minimization proxies are negated grades of the negated system
            Mode::DisMin => -shifted,
        }
    }

    fn candidates(&self, state: &AdaptiveRunState) -> Vec<usize> {
        let n = self.systems.len();
        match &self.constraint {
            ConstraintOracle::Packing(p) => (0..n)
                .filter(|i| !state.selected.contains(i))
                .filter(|&i| p.can_extend(&state.selected, i).unwrap_or(false))
                .collect(),
            ConstraintOracle::Covering(_) => {
                (0..n).filter(|i| !state.selected.contains(i)).collect()
            }
        }
    }

    fn run(&self, mut transitions: Transitions) -> Result<RunOutcome> {
        let n = self.systems.len();
        let mut state = AdaptiveRunState {
            selected: ElementSet::new(),
            current_state: self.systems.iter().map(|ms| ms.start()).collect(),
            counters: vec![0; n],
            accrued_price: 0.0,
        };
        let mut visited: Vec<Vec<StateId>> = state.current_state.iter().map(|&u| vec![u]).collect();
        // best proxy seen so far per system: a running min of shifted grades
        // for maximization, running max of their negations for minimization
        // (the negation in `proxy` makes both a running max of the proxy)
        let mut prevailing: Vec<f64> =
            (0..n).map(|i| self.proxy(i, state.current_state[i], 0)).collect();
        let mut trace = Vec::new();
        let mut selected_order: Vec<(usize, f64)> = Vec::new();

        loop {
            let cands = self.candidates(&state);
            let mut best: Option<(usize, f64)> = None;
            for &i in &cands {
                let v = self.g.eval(
                    &selected_order,
                    i,
                    self.proxy(i, state.current_state[i], state.counters[i]),
                );
                match best {
                    None => best = Some((i, v)),
                    Some((_, bv)) if v > bv => best = Some((i, v)),
                    _ => {}
                }
            }
            let (j, v) = match best {
                Some(b) => b,
                None => break,
            };
            if v <= 0.0 {
                break;
            }
            let u = state.current_state[j];
            if self.systems[j].is_destination(u) {
                state.selected.insert(j);
                selected_order.push((j, prevailing[j]));
                trace.push(TraceEvent::Select { element: j, proxy: prevailing[j] });
            } else {
                state.accrued_price += self.systems[j].price(u);
                let next = transitions.step(self.systems, j, u, state.counters[j])?;
                state.counters[j] += 1;
                state.current_state[j] = next;
                visited[j].push(next);
                let p = self.proxy(j, next, state.counters[j]);
                let opened_epoch = match self.mode {
                    Mode::UtiMax => p < prevailing[j],
                    Mode::DisMin => p > prevailing[j],
                };
                if opened_epoch {
                    prevailing[j] = p;
                }
                trace.push(TraceEvent::Advance { element: j, from: u, to: next, opened_epoch });
            }
        }

        if let ConstraintOracle::Covering(c) = &self.constraint {
            if !c.is_feasible(&state.selected) {
                return Err(Error::NoProgress);
            }
        }

        let mut destination_values = BTreeMap::new();
        for i in 0..n {
            let u = state.current_state[i];
            if self.systems[i].is_destination(u) {
                destination_values.insert(i, self.systems[i].value(u));
            }
        }
        let objective_value = self.objective.h(&state.selected)
            + state.selected.iter().map(|i| destination_values[i]).sum::<f64>();
        let utility = match self.mode {
            Mode::UtiMax => objective_value - state.accrued_price,
            Mode::DisMin => objective_value + state.accrued_price,
        };
        let profile = TrajectoryProfile::new(
            visited
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    let terminated = self.systems[i].is_destination(*v.last().unwrap());
                    Trajectory { system_id: i, visited: v, terminated }
                })
                .collect(),
        );
        Ok(RunOutcome {
            selected: state.selected,
            destination_values,
            total_price: state.accrued_price,
            objective_value,
            utility,
            profile,
            trace,
            selected_proxies: selected_order,
        })
    }
}

fn sampled_transitions(
    systems: &[MarkovSystem],
    master_seed: u64,
    run_id: u64,
    step_ceiling: usize,
) -> Transitions<'static> {
    Transitions::Sampled {
        rngs: (0..systems.len()).map(|i| system_rng(master_seed, run_id, i)).collect(),
        step_ceiling,
    }
}

/// Utility maximization over a packing constraint (the grade-proxy adaptive
/// strategy), with live sampling.
pub fn run_utimax(
    systems: &[MarkovSystem],
    oracle: &PackingOracle,
    g: &MarginalValue,
    grades: &[GradeTable],
    objective: &SemiadditiveObjective,
    master_seed: u64,
    run_id: u64,
) -> Result<RunOutcome> {
    Engine {
        systems,
        constraint: ConstraintOracle::Packing(oracle.clone()),
        g,
        grades,
        objective,
        mode: Mode::UtiMax,
        shifts: vec![0.0; systems.len()],
    }
    .run(sampled_transitions(systems, master_seed, run_id, DEFAULT_STEP_CEILING))
}

/// As `run_utimax` but transitions come from the injected profile; the
/// selected set must equal the frugal run on the profile's prevailing costs.
pub fn run_utimax_replayed(
    systems: &[MarkovSystem],
    oracle: &PackingOracle,
    g: &MarginalValue,
    grades: &[GradeTable],
    objective: &SemiadditiveObjective,
    profile: &TrajectoryProfile,
) -> Result<RunOutcome> {
    Engine {
        systems,
        constraint: ConstraintOracle::Packing(oracle.clone()),
        g,
        grades,
        objective,
        mode: Mode::UtiMax,
        shifts: vec![0.0; systems.len()],
    }
    .run(Transitions::Replay { profile, cursor: vec![0; systems.len()] })
}

/// Disutility minimization over a covering constraint. `grades` must be the
/// tables of the value-negated systems (see `grade::dismin_grade_tables`);
/// proxies are their negations, the prevailing rewards of the minimization
/// twin.
pub fn run_dismin(
    systems: &[MarkovSystem],
    oracle: &CoveringOracle,
    g: &MarginalValue,
    grades: &[GradeTable],
    objective: &SemiadditiveObjective,
    master_seed: u64,
    run_id: u64,
) -> Result<RunOutcome> {
    Engine {
        systems,
        constraint: ConstraintOracle::Covering(oracle.clone()),
        g,
        grades,
        objective,
        mode: Mode::DisMin,
        shifts: vec![0.0; systems.len()],
    }
    .run(sampled_transitions(systems, master_seed, run_id, DEFAULT_STEP_CEILING))
}

/// Replayed variant of `run_dismin`.
pub fn run_dismin_replayed(
    systems: &[MarkovSystem],
    oracle: &CoveringOracle,
    g: &MarginalValue,
    grades: &[GradeTable],
    objective: &SemiadditiveObjective,
    profile: &TrajectoryProfile,
) -> Result<RunOutcome> {
    Engine {
        systems,
        constraint: ConstraintOracle::Covering(oracle.clone()),
        g,
        grades,
        objective,
        mode: Mode::DisMin,
        shifts: vec![0.0; systems.len()],
    }
    .run(Transitions::Replay { profile, cursor: vec![0; systems.len()] })
}

/// The robust strategy: decisions use estimated grades shifted upward by
/// `ctr_i * eps / (2 k D_i)` per advance of system `i`, while the true
/// dynamics drive the transitions. Requires DAG systems.
#[allow(clippy::too_many_arguments)]
pub fn run_robust_utimax(
    systems: &[MarkovSystem],
    oracle: &PackingOracle,
    g: &MarginalValue,
    estimated_grades: &[GradeTable],
    params: &RobustnessParams,
    objective: &SemiadditiveObjective,
    master_seed: u64,
    run_id: u64,
) -> Result<RunOutcome> {
    robust_engine(systems, oracle, g, estimated_grades, params, objective)?
        .run(sampled_transitions(systems, master_seed, run_id, DEFAULT_STEP_CEILING))
}

/// Replayed variant of `run_robust_utimax`.
pub fn run_robust_utimax_replayed(
    systems: &[MarkovSystem],
    oracle: &PackingOracle,
    g: &MarginalValue,
    estimated_grades: &[GradeTable],
    params: &RobustnessParams,
    objective: &SemiadditiveObjective,
    profile: &TrajectoryProfile,
) -> Result<RunOutcome> {
    robust_engine(systems, oracle, g, estimated_grades, params, objective)?
        .run(Transitions::Replay { profile, cursor: vec![0; systems.len()] })
}

fn robust_engine<'a>(
    systems: &'a [MarkovSystem],
    oracle: &PackingOracle,
    g: &'a MarginalValue,
    estimated_grades: &'a [GradeTable],
    params: &RobustnessParams,
    objective: &'a SemiadditiveObjective,
) -> Result<Engine<'a>> {
    for (i, ms) in systems.iter().enumerate() {
        if !ms.classify().is_dag {
            return Err(Error::NotDag(i));
        }
    }
    Ok(Engine {
        systems,
        constraint: ConstraintOracle::Packing(oracle.clone()),
        g,
        grades: estimated_grades,
        objective,
        mode: Mode::UtiMax,
        shifts: (0..systems.len()).map(|i| params.shift(i)).collect(),
    })
}

/// Shifted prevailing cost of one trajectory under estimated grades: the
/// running minimum of `tau_hat + steps * shift`.
pub fn shifted_prevailing(est: &GradeTable, traj: &Trajectory, per_step_shift: f64) -> f64 {
    traj.visited
        .iter()
        .enumerate()
        .map(|(d, &u)| est.grade(u) + d as f64 * per_step_shift)
        .fold(f64::INFINITY, f64::min)
}

/// Epoch-respecting play schedule and selection rule for the teasing game.
pub trait TeasingPolicy {
    /// Asked on arrival at each non-destination state (including the start).
    /// `at_boundary` is true at the start and wherever the prevailing cost
    /// just strictly dropped; answering false elsewhere breaks the contract.
    fn keep_playing(
        &self,
        system: usize,
        state: StateId,
        prevailing: f64,
        at_boundary: bool,
    ) -> bool;
    /// Asked once on reaching a destination; selecting pays the prevailing
    /// cost in exchange for the destination value.
    fn select(&self, system: usize, dest: StateId, prevailing: f64) -> bool;
}

/// Play everything to completion and select every destination; the canonical
/// fair strategy.
pub struct PlayThroughSelectAll;

impl TeasingPolicy for PlayThroughSelectAll {
    fn keep_playing(&self, _: usize, _: StateId, _: f64, _: bool) -> bool {
        true
    }
    fn select(&self, _: usize, _: StateId, _: f64) -> bool {
        true
    }
}

/// Plays the first epoch only and never selects; a losing but legal schedule.
pub struct PlayOneEpochNeverSelect;

impl TeasingPolicy for PlayOneEpochNeverSelect {
    fn keep_playing(&self, _: usize, _: StateId, _: f64, at_boundary: bool) -> bool {
        !at_boundary
    }
    fn select(&self, _: usize, _: StateId, _: f64) -> bool {
        false
    }
}

/// Exact expected value of the teasing game for an epoch-respecting policy:
/// the utility from playing minus the prevailing-cost payments on selection.
/// Evaluated per system over the (state, prevailing) graph; systems must be
/// DAGs.
pub fn teasing_game_value<P: TeasingPolicy>(
    systems: &[MarkovSystem],
    grades: &[GradeTable],
    policy: &P,
) -> Result<f64> {
    let mut total = 0.0;
    for (i, ms) in systems.iter().enumerate() {
        if !ms.classify().is_dag {
            return Err(Error::NotDag(i));
        }
        total += teasing_value_one(ms, &grades[i], i, policy)?;
    }
    Ok(total)
}

fn teasing_value_one<P: TeasingPolicy>(
    ms: &MarkovSystem,
    grades: &GradeTable,
    system: usize,
    policy: &P,
) -> Result<f64> {
    #[allow(clippy::too_many_arguments)]
    fn arrive<P: TeasingPolicy>(
        ms: &MarkovSystem,
        grades: &GradeTable,
        system: usize,
        policy: &P,
        u: StateId,
        prev: f64,
        is_start: bool,
        memo: &mut HashMap<(u32, u64), f64>,
    ) -> Result<f64> {
        let g = grades.grade(u);
        let at_boundary = is_start || g < prev;
        let prevailing = prev.min(g);
        if ms.is_destination(u) {
            return Ok(if policy.select(system, u, prevailing) {
                ms.value(u) - prevailing
            } else {
                0.0
            });
        }
        if !policy.keep_playing(system, u, prevailing, at_boundary) {
            if !at_boundary {
                return Err(Error::EpochViolation { system, state: u });
            }
            return Ok(0.0);
        }
        let key = (u.0, prevailing.to_bits());
        if let Some(&v) = memo.get(&key) {
            return Ok(v);
        }
        let mut val = -ms.price(u);
        for &(v, p) in ms.row(u) {
            val += p * arrive(ms, grades, system, policy, v, prevailing, false, memo)?;
        }
        memo.insert(key, val);
        Ok(val)
    }
    let mut memo = HashMap::new();
    arrive(ms, grades, system, policy, ms.start(), f64::INFINITY, true, &mut memo)
}

/// Surrogate estimate: the expected free-information optimum when each
/// element's value is its (random) prevailing cost.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateEstimate {
    /// Expectation of the exact inner optimum.
    pub value: f64,
    /// Standard error (zero in exact mode).
    pub stderr: f64,
    /// Same expectation with the frugal algorithm solving the inner problem.
    pub frugal_value: f64,
    pub samples: usize,
}

/// Cap on joint trajectory combinations accepted by exact surrogate mode.
pub const EXACT_SURROGATE_CAP: usize = 100_000;

/// Prevailing proxy values of a full profile: prevailing costs for packing,
/// prevailing rewards (as costs) for covering.
pub fn profile_proxies(
    constraint: &ConstraintOracle,
    grades: &[GradeTable],
    profile: &TrajectoryProfile,
) -> Vec<f64> {
    (0..profile.len())
        .map(|i| {
            let traj = profile.get(i);
            match constraint {
                ConstraintOracle::Packing(_) => {
                    crate::grade::prevailing_cost(&grades[i], traj).expect("ids match").prevailing
                }
                ConstraintOracle::Covering(_) => {
                    crate::grade::prevailing_reward(&grades[i], traj).expect("ids match").prevailing
                }
            }
        })
        .collect()
}

/// Best feasible subset value for fixed element values: max for packing,
/// min-cost feasible cover for covering. Exhaustive; `n <= 15`.
pub fn best_feasible(
    constraint: &ConstraintOracle,
    objective: &SemiadditiveObjective,
    values: &[f64],
) -> Result<(f64, ElementSet)> {
    let n = values.len();
    if n > 15 {
        return Err(Error::TooLargeForExact {
            detail: format!("{n} elements exceed the exhaustive subset cap of 15"),
        });
    }
    let allowed: ElementSet = (0..n).collect();
    crate::frugal::best_feasible_subset(constraint, objective, values, &allowed)
        .ok_or(Error::NoProgress)
}

fn frugal_inner(
    constraint: &ConstraintOracle,
    g: &MarginalValue,
    objective: &SemiadditiveObjective,
    values: &[f64],
) -> Result<f64> {
    let s = match constraint {
        ConstraintOracle::Packing(p) => run_frugal_packing(g, p, values),
        ConstraintOracle::Covering(c) => run_frugal_covering(g, c, values)?,
    };
    Ok(objective.evaluate(&s, values))
}

/// Exact surrogate expectation by full profile enumeration.
pub fn surrogate_exact(
    systems: &[MarkovSystem],
    constraint: &ConstraintOracle,
    g: &MarginalValue,
    objective: &SemiadditiveObjective,
    grades: &[GradeTable],
) -> Result<SurrogateEstimate> {
    let profiles =
        crate::oracle::enumerate_profiles(systems, EXACT_SURROGATE_CAP).map_err(|e| match e {
            Error::TooManyProfiles { count, cap } => Error::TooLargeForExact {
                detail: format!("{count} joint trajectory combinations exceed {cap}"),
            },
            other => other,
        })?;
    let mut value = 0.0;
    let mut frugal_value = 0.0;
    for (profile, w) in &profiles {
        let proxies = profile_proxies(constraint, grades, profile);
        value += w * best_feasible(constraint, objective, &proxies)?.0;
        frugal_value += w * frugal_inner(constraint, g, objective, &proxies)?;
    }
    Ok(SurrogateEstimate { value, stderr: 0.0, frugal_value, samples: profiles.len() })
}

/// Monte Carlo surrogate estimate with standard error.
#[allow(clippy::too_many_arguments)]
pub fn surrogate_mc(
    systems: &[MarkovSystem],
    constraint: &ConstraintOracle,
    g: &MarginalValue,
    objective: &SemiadditiveObjective,
    grades: &[GradeTable],
    n_samples: usize,
    master_seed: u64,
    step_ceiling: usize,
) -> Result<SurrogateEstimate> {
    let mut exact_vals = Vec::with_capacity(n_samples);
    let mut frugal_sum = 0.0;
    for run in 0..n_samples {
        let mut rngs: Vec<ChaCha8Rng> =
            (0..systems.len()).map(|i| system_rng(master_seed, run as u64, i)).collect();
        let profile = TrajectoryProfile::sample(systems, &mut rngs, step_ceiling)?;
        let proxies = profile_proxies(constraint, grades, &profile);
        exact_vals.push(best_feasible(constraint, objective, &proxies)?.0);
        frugal_sum += frugal_inner(constraint, g, objective, &proxies)?;
    }
    let (mean, stderr) = crate::oracle::mean_and_stderr(&exact_vals);
    Ok(SurrogateEstimate {
        value: mean,
        stderr,
        frugal_value: frugal_sum / n_samples as f64,
        samples: n_samples,
    })
}
