//! The penalized stopping game and state grades.
//!
//! For a termination penalty `tau`, the player at a non-destination state may
//! halt (value 0) or pay the state's price and let the chain move; at a
//! destination the play action collects `value - tau`. `U^v(tau)` is the
//! optimal value of this game and the grade of `v` is the penalty at which it
//! hits zero — the index that drives every adaptive strategy here.

use crate::error::{Error, Result};
use crate::markov::{MarkovSystem, StateId, Trajectory, DEFAULT_STEP_CEILING};

/// Default solver accuracy for grades.
pub const DEFAULT_GRADE_TOL: f64 = 1e-9;
/// Sup-norm threshold at which value iteration counts as converged.
pub const VALUE_ITERATION_EPS: f64 = 1e-12;
/// Default iteration cap for value iteration on cyclic systems.
pub const DEFAULT_VI_MAX_ITERS: usize = 10_000_000;

/// How the utilities behind a grade table were evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradeMethod {
    /// Exact backward induction over an acyclic system.
    DagExact,
    /// Bisection over value-iteration evaluations (cyclic systems).
    BisectionValueIteration,
}

impl GradeMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            GradeMethod::DagExact => "dag_exact",
            GradeMethod::BisectionValueIteration => "bisection_value_iteration",
        }
    }
}

/// Grades of every state of one system, plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct GradeTable {
    pub system_id: usize,
    pub grades: Vec<f64>,
    pub tolerance: f64,
    pub method: GradeMethod,
}

impl GradeTable {
    pub fn grade(&self, u: StateId) -> f64 {
        self.grades[u.idx()]
    }
}

/// Solver knobs; the defaults satisfy every acceptance tolerance.
#[derive(Debug, Clone, Copy)]
pub struct GradeSolver {
    pub tol: f64,
    pub vi_max_iters: usize,
    pub step_ceiling: usize,
}

impl Default for GradeSolver {
    fn default() -> Self {
        GradeSolver {
            tol: DEFAULT_GRADE_TOL,
            vi_max_iters: DEFAULT_VI_MAX_ITERS,
            step_ceiling: DEFAULT_STEP_CEILING,
        }
    }
}

impl GradeSolver {
    pub fn with_tol(tol: f64) -> Self {
        GradeSolver { tol, ..Default::default() }
    }

    /// `U^v(tau)` for every state. Destinations are `max(0, r - tau)`;
    /// interior states are `max(0, -price + E[U])`, by exact backward
    /// induction on DAGs and by monotone value iteration from zero otherwise
    /// (halting bounds the value below; the iteration climbs to the least
    /// fixed point, which is the optimal value).
    pub fn penalized_utilities(&self, ms: &MarkovSystem, tau: f64) -> Result<Vec<f64>> {
        if ms.classify().is_dag {
            Ok(self.dag_utilities(ms, tau))
        } else {
            self.value_iteration(ms, tau)
        }
    }

    /// `U^v(tau)` at a single state.
    pub fn penalized_utility(&self, ms: &MarkovSystem, v: StateId, tau: f64) -> Result<f64> {
        Ok(self.penalized_utilities(ms, tau)?[v.idx()])
    }

    fn dag_utilities(&self, ms: &MarkovSystem, tau: f64) -> Vec<f64> {
        let n = ms.n_states();
        let mut u = vec![f64::NAN; n];
        // memoized DFS; the positive-edge graph is acyclic
        fn eval(ms: &MarkovSystem, tau: f64, s: usize, u: &mut Vec<f64>) -> f64 {
            if !u[s].is_nan() {
                return u[s];
            }
            let val = if ms.is_destination(StateId(s as u32)) {
                (ms.value(StateId(s as u32)) - tau).max(0.0)
            } else {
                let cont: f64 = ms
                    .row(StateId(s as u32))
                    .iter()
                    .map(|&(v, p)| p * eval(ms, tau, v.idx(), u))
                    .sum::<f64>()
                    - ms.price(StateId(s as u32));
                cont.max(0.0)
            };
            u[s] = val;
            val
        }
        for s in 0..n {
            eval(ms, tau, s, &mut u);
        }
        u
    }

    fn value_iteration(&self, ms: &MarkovSystem, tau: f64) -> Result<Vec<f64>> {
        let n = ms.n_states();
        let mut u = vec![0.0f64; n];
        for s in 0..n {
            let sid = StateId(s as u32);
            if ms.is_destination(sid) {
                u[s] = (ms.value(sid) - tau).max(0.0);
            }
        }
        for _ in 0..self.vi_max_iters {
            let mut delta = 0.0f64;
            for s in 0..n {
                let sid = StateId(s as u32);
                if ms.is_destination(sid) {
                    continue;
                }
                let cont: f64 =
                    ms.row(sid).iter().map(|&(v, p)| p * u[v.idx()]).sum::<f64>() - ms.price(sid);
                let next = cont.max(0.0);
                delta = delta.max((next - u[s]).abs());
                u[s] = next;
            }
            if delta < VALUE_ITERATION_EPS {
                return Ok(u);
            }
        }
        Err(Error::IterationLimit(self.vi_max_iters))
    }

    /// Bisection bracket: `U` is zero at and beyond the largest value, and
    /// strictly positive once the penalty is below the worst-case cumulative
    /// price bound. `L` is the depth for DAGs and the step ceiling otherwise.
    fn bracket(&self, ms: &MarkovSystem) -> (f64, f64) {
        let b = ms.bound();
        let l = match ms.classify().depth {
            Some(d) => d as f64,
            None => self.step_ceiling as f64,
        };
        (-(l * b + b + 1.0), b)
    }

    /// The grade `tau^v = sup { tau | U^v(tau) > 0 }`, found by bisection;
    /// `U^v` is non-increasing, continuous, and 1-Lipschitz in `tau`, so a
    /// bracket of width `tol` pins `|U^v(grade)| <= tol`.
    pub fn grade(&self, ms: &MarkovSystem, v: StateId) -> Result<f64> {
        if ms.is_destination(v) {
            return Ok(ms.value(v));
        }
        let (mut lo, mut hi) = self.bracket(ms);
        // valid systems reach a destination w.p. 1, so U(lo) > 0 once lo is
        // low enough; expand for cyclic systems whose expected price exceeds
        // the step-ceiling heuristic
        let mut expansions = 0;
        while self.penalized_utility(ms, v, lo)? <= 0.0 {
            lo *= 2.0;
            expansions += 1;
            if expansions > 64 {
                break;
            }
        }
        while hi - lo > self.tol * 0.5 {
            let mid = 0.5 * (lo + hi);
            if self.penalized_utility(ms, v, mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Grades for all states of one system; destinations exact, interior
    /// states within `tol`.
    pub fn grade_table(&self, ms: &MarkovSystem, system_id: usize) -> Result<GradeTable> {
        let method = if ms.classify().is_dag {
            GradeMethod::DagExact
        } else {
            GradeMethod::BisectionValueIteration
        };
        self.grade_table_with_method(ms, system_id, method)
    }

    /// As `grade_table` but forcing the evaluation method (the value-iteration
    /// path is also valid on DAGs; the cross-check tests rely on that).
    pub fn grade_table_with_method(
        &self,
        ms: &MarkovSystem,
        system_id: usize,
        method: GradeMethod,
    ) -> Result<GradeTable> {
        let n = ms.n_states();
        let mut grades = vec![0.0; n];
        for s in 0..n {
            let sid = StateId(s as u32);
            grades[s] = match method {
                GradeMethod::DagExact => self.grade(ms, sid)?,
                GradeMethod::BisectionValueIteration => self.grade_via_vi(ms, sid)?,
            };
        }
        Ok(GradeTable { system_id, grades, tolerance: self.tol, method })
    }

    fn grade_via_vi(&self, ms: &MarkovSystem, v: StateId) -> Result<f64> {
        if ms.is_destination(v) {
            return Ok(ms.value(v));
        }
        let (mut lo, mut hi) = self.bracket(ms);
        let mut expansions = 0;
        while self.value_iteration(ms, lo)?[v.idx()] <= 0.0 {
            lo *= 2.0;
            expansions += 1;
            if expansions > 64 {
                break;
            }
        }
        while hi - lo > self.tol * 0.5 {
            let mid = 0.5 * (lo + hi);
            if self.value_iteration(ms, mid)?[v.idx()] > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Grade tables for all systems of a scenario.
pub fn grade_tables(systems: &[MarkovSystem], solver: &GradeSolver) -> Result<Vec<GradeTable>> {
    systems.iter().enumerate().map(|(i, ms)| solver.grade_table(ms, i)).collect()
}

/// Grade tables of the value-negated systems; the disutility-minimization
/// proxy of a state is the negation of these grades.
pub fn dismin_grade_tables(
    systems: &[MarkovSystem],
    solver: &GradeSolver,
) -> Result<Vec<GradeTable>> {
    systems.iter().enumerate().map(|(i, ms)| solver.grade_table(&ms.negate_values(), i)).collect()
}

/// Prevailing cost or reward of one trajectory with its epoch boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct PrevailingRecord {
    pub system_id: usize,
    /// Running minimum of grades (cost) or maximum of negated grades (reward)
    /// at the end of the trajectory.
    pub prevailing: f64,
    /// Indices into the trajectory where the prevailing value strictly
    /// changes; ties do not open a new epoch.
    pub epoch_boundaries: Vec<usize>,
}

impl PrevailingRecord {
    pub fn epoch_count(&self) -> usize {
        self.epoch_boundaries.len() + 1
    }
}

/// Prevailing cost: the running minimum of grades along the visited states.
pub fn prevailing_cost(grades: &GradeTable, traj: &Trajectory) -> Result<PrevailingRecord> {
    if grades.system_id != traj.system_id {
        return Err(Error::SystemMismatch { expected: grades.system_id, got: traj.system_id });
    }
    let mut prevailing = f64::INFINITY;
    let mut boundaries = Vec::new();
    for (i, &u) in traj.visited.iter().enumerate() {
        let g = grades.grade(u);
        if g < prevailing {
            prevailing = g;
            if i > 0 {
                boundaries.push(i);
            }
        }
    }
    Ok(PrevailingRecord { system_id: traj.system_id, prevailing, epoch_boundaries: boundaries })
}

/// Prevailing reward: the running maximum of negated grades (the
/// minimization twin); boundaries sit at each strict increase.
pub fn prevailing_reward(grades: &GradeTable, traj: &Trajectory) -> Result<PrevailingRecord> {
    if grades.system_id != traj.system_id {
        return Err(Error::SystemMismatch { expected: grades.system_id, got: traj.system_id });
    }
    let mut prevailing = f64::NEG_INFINITY;
    let mut boundaries = Vec::new();
    for (i, &u) in traj.visited.iter().enumerate() {
        let g = -grades.grade(u);
        if g > prevailing {
            prevailing = g;
            if i > 0 {
                boundaries.push(i);
            }
        }
    }
    Ok(PrevailingRecord { system_id: traj.system_id, prevailing, epoch_boundaries: boundaries })
}

/// Reservation value of a single-probe box: the root of
/// `E[(X - tau)^+] = price`, the quantity a one-step system's start grade
/// reproduces.
pub fn weitzman_index(outcomes: &[(f64, f64)], price: f64, tol: f64) -> Result<f64> {
    let psum: f64 = outcomes.iter().map(|&(_, p)| p).sum();
    if (psum - 1.0).abs() > 1e-12 {
        return Err(Error::Parse(format!("outcome probabilities sum to {psum}, not 1")));
    }
    let min_v = outcomes.iter().map(|&(v, _)| v).fold(f64::INFINITY, f64::min);
    let max_v = outcomes.iter().map(|&(v, _)| v).fold(f64::NEG_INFINITY, f64::max);
    let surplus: f64 = outcomes.iter().map(|&(v, p)| p * (v - min_v)).sum();
    if price > surplus {
        return Err(Error::NoRoot { price, surplus });
    }
    let excess = |tau: f64| -> f64 {
        outcomes.iter().map(|&(v, p)| p * (v - tau).max(0.0)).sum::<f64>() - price
    };
    let (mut lo, mut hi) = (min_v, max_v);
    if excess(lo) <= 0.0 {
        return Ok(lo);
    }
    while hi - lo > tol * 0.5 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{MarkovSystem, SystemSpec};
    use approx::assert_abs_diff_eq;

    fn chain(price: f64, reward: f64) -> MarkovSystem {
        MarkovSystem::from_spec(SystemSpec {
            name: "chain".into(),
            n_states: 2,
            edges: vec![vec![(StateId(1), 1.0)], vec![]],
            start: StateId(0),
            destinations: vec![StateId(1)],
            prices: vec![(StateId(0), price)],
            values: vec![(StateId(1), reward)],
        })
        .unwrap()
    }

    fn weitzman_box() -> MarkovSystem {
        MarkovSystem::from_spec(SystemSpec {
            name: "weitzman".into(),
            n_states: 3,
            edges: vec![vec![(StateId(1), 0.5), (StateId(2), 0.5)], vec![], vec![]],
            start: StateId(0),
            destinations: vec![StateId(1), StateId(2)],
            prices: vec![(StateId(0), 0.5)],
            values: vec![(StateId(1), 2.0), (StateId(2), 0.0)],
        })
        .unwrap()
    }

    /// Exponential-scale box: price 3^n against rewards {2*3^n, 0}.
    fn f2_system(n: i32, p: f64) -> MarkovSystem {
        let b = 3.0f64.powi(n);
        MarkovSystem::from_spec(SystemSpec {
            name: "f2".into(),
            n_states: 3,
            edges: vec![vec![(StateId(1), p), (StateId(2), 1.0 - p)], vec![], vec![]],
            start: StateId(0),
            destinations: vec![StateId(1), StateId(2)],
            prices: vec![(StateId(0), b)],
            values: vec![(StateId(1), 2.0 * b), (StateId(2), 0.0)],
        })
        .unwrap()
    }

    #[test]
    fn penalized_utility_deterministic_chain() {
        let ms = chain(1.0, 5.0);
        let solver = GradeSolver::default();
        assert_abs_diff_eq!(
            solver.penalized_utility(&ms, StateId(0), 0.0).unwrap(),
            4.0,
            epsilon = 1e-12
        );
        // large penalty: halt immediately
        assert_abs_diff_eq!(
            solver.penalized_utility(&ms, StateId(0), 10.0).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn penalized_utility_weitzman_at_root() {
        let ms = weitzman_box();
        let solver = GradeSolver::default();
        assert_abs_diff_eq!(
            solver.penalized_utility(&ms, StateId(0), 1.0).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn grades_match_hand_roots() {
        let solver = GradeSolver::default();
        let ms = chain(1.0, 5.0);
        assert_abs_diff_eq!(solver.grade(&ms, StateId(1)).unwrap(), 5.0, epsilon = 0.0);
        assert_abs_diff_eq!(solver.grade(&ms, StateId(0)).unwrap(), 4.0, epsilon = 1e-9);

        let table = solver.grade_table(&weitzman_box(), 0).unwrap();
        assert_abs_diff_eq!(table.grade(StateId(0)), 1.0, epsilon = 1e-9);
        assert_eq!(table.grade(StateId(1)), 2.0);
        assert_eq!(table.grade(StateId(2)), 0.0);

        // exponential box at n=1, p=0.5: root of -3 + 0.5 (6 - tau) = 0
        let f2 = f2_system(1, 0.5);
        assert_abs_diff_eq!(solver.grade(&f2, StateId(0)).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn utility_is_monotone_and_nonnegative_in_tau() {
        let solver = GradeSolver::default();
        for ms in [chain(1.0, 5.0), weitzman_box(), f2_system(1, 0.5)] {
            let mut prev = f64::INFINITY;
            for i in 0..100 {
                let tau = -8.0 + i as f64 * 0.2;
                let u = solver.penalized_utility(&ms, StateId(0), tau).unwrap();
                assert!(u >= 0.0);
                assert!(u <= prev + 1e-12);
                prev = u;
            }
        }
    }

    #[test]
    fn grade_zero_within_tolerance() {
        let solver = GradeSolver::default();
        for ms in [chain(1.0, 5.0), weitzman_box()] {
            let table = solver.grade_table(&ms, 0).unwrap();
            for s in 0..ms.n_states() {
                let u = solver.penalized_utility(&ms, StateId(s as u32), table.grades[s]).unwrap();
                assert!(u.abs() <= solver.tol, "state {s}: U = {u}");
            }
        }
    }

    #[test]
    fn cyclic_system_grades_via_value_iteration() {
        // cycle with a 1/16 exit: price 0.25 per lap, value 2.
        // Playing forever costs 16 * 0.25 = 4 in expectation against value 2,
        // so the start grade is 2 - 4 = -2.
        let ms = MarkovSystem::from_spec(SystemSpec {
            name: "f1".into(),
            n_states: 3,
            edges: vec![
                vec![(StateId(1), 1.0)],
                vec![(StateId(0), 15.0 / 16.0), (StateId(2), 1.0 / 16.0)],
                vec![],
            ],
            start: StateId(0),
            destinations: vec![StateId(2)],
            prices: vec![(StateId(0), 0.25), (StateId(1), 0.0)],
            values: vec![(StateId(2), 2.0)],
        })
        .unwrap();
        let solver = GradeSolver { step_ceiling: 1000, ..Default::default() };
        let table = solver.grade_table(&ms, 0).unwrap();
        assert_eq!(table.method, GradeMethod::BisectionValueIteration);
        assert_abs_diff_eq!(table.grade(StateId(0)), -2.0, epsilon = 1e-6);
    }

    #[test]
    fn value_iteration_cap_is_reported() {
        let ms = MarkovSystem::from_spec(SystemSpec {
            name: "slow".into(),
            n_states: 3,
            edges: vec![
                vec![(StateId(1), 1.0)],
                vec![(StateId(0), 15.0 / 16.0), (StateId(2), 1.0 / 16.0)],
                vec![],
            ],
            start: StateId(0),
            destinations: vec![StateId(2)],
            prices: vec![(StateId(0), 0.25), (StateId(1), 0.0)],
            values: vec![(StateId(2), 2.0)],
        })
        .unwrap();
        let solver = GradeSolver { vi_max_iters: 10, ..Default::default() };
        assert_eq!(
            solver.penalized_utility(&ms, StateId(0), -10.0),
            Err(Error::IterationLimit(10))
        );
    }

    #[test]
    fn dag_and_value_iteration_agree() {
        let solver = GradeSolver::default();
        for ms in [chain(1.0, 5.0), weitzman_box(), f2_system(1, 0.5)] {
            let a = solver.grade_table(&ms, 0).unwrap();
            let b = solver
                .grade_table_with_method(&ms, 0, GradeMethod::BisectionValueIteration)
                .unwrap();
            for s in 0..ms.n_states() {
                assert!((a.grades[s] - b.grades[s]).abs() <= 2.0 * solver.tol);
            }
        }
    }

    #[test]
    fn prevailing_cost_running_min_and_epochs() {
        let gt = GradeTable {
            system_id: 0,
            grades: vec![5.0, 3.0, 4.0],
            tolerance: 0.0,
            method: GradeMethod::DagExact,
        };
        let traj = Trajectory {
            system_id: 0,
            visited: vec![StateId(0), StateId(1), StateId(2)],
            terminated: true,
        };
        let rec = prevailing_cost(&gt, &traj).unwrap();
        assert_eq!(rec.prevailing, 3.0);
        assert_eq!(rec.epoch_boundaries, vec![1]);

        let rec = prevailing_reward(&gt, &traj).unwrap();
        assert_eq!(rec.prevailing, -3.0);
        assert_eq!(rec.epoch_boundaries, vec![1]);
    }

    #[test]
    fn ties_do_not_open_epochs() {
        let gt = GradeTable {
            system_id: 0,
            grades: vec![5.0, 5.0, 3.0, 3.0, 2.0],
            tolerance: 0.0,
            method: GradeMethod::DagExact,
        };
        let traj =
            Trajectory { system_id: 0, visited: (0..5).map(StateId).collect(), terminated: true };
        let rec = prevailing_cost(&gt, &traj).unwrap();
        assert_eq!(rec.epoch_boundaries, vec![2, 4]);
        assert_eq!(rec.epoch_count(), 3);

        let constant = GradeTable {
            system_id: 0,
            grades: vec![2.0, 2.0],
            tolerance: 0.0,
            method: GradeMethod::DagExact,
        };
        let traj =
            Trajectory { system_id: 0, visited: vec![StateId(0), StateId(1)], terminated: true };
        assert_eq!(prevailing_reward(&constant, &traj).unwrap().epoch_count(), 1);
    }

    #[test]
    fn monotone_decreasing_grades_boundary_every_step() {
        let gt = GradeTable {
            system_id: 0,
            grades: vec![4.0, 3.0, 2.0],
            tolerance: 0.0,
            method: GradeMethod::DagExact,
        };
        let traj = Trajectory {
            system_id: 0,
            visited: vec![StateId(0), StateId(1), StateId(2)],
            terminated: true,
        };
        assert_eq!(prevailing_reward(&gt, &traj).unwrap().epoch_boundaries, vec![1, 2]);
    }

    #[test]
    fn single_state_trajectory_has_no_boundary() {
        let gt = GradeTable {
            system_id: 0,
            grades: vec![7.0],
            tolerance: 0.0,
            method: GradeMethod::DagExact,
        };
        let traj = Trajectory { system_id: 0, visited: vec![StateId(0)], terminated: true };
        let rec = prevailing_cost(&gt, &traj).unwrap();
        assert_eq!(rec.prevailing, 7.0);
        assert!(rec.epoch_boundaries.is_empty());
    }

    #[test]
    fn system_mismatch_is_caught() {
        let gt = GradeTable {
            system_id: 1,
            grades: vec![1.0],
            tolerance: 0.0,
            method: GradeMethod::DagExact,
        };
        let traj = Trajectory { system_id: 0, visited: vec![StateId(0)], terminated: true };
        assert!(matches!(
            prevailing_cost(&gt, &traj),
            Err(Error::SystemMismatch { expected: 1, got: 0 })
        ));
    }

    #[test]
    fn weitzman_index_hand_cases() {
        // 0.5 (2 - tau) = 0.5 at tau = 1
        let tau = weitzman_index(&[(2.0, 0.5), (0.0, 0.5)], 0.5, 1e-12).unwrap();
        assert_abs_diff_eq!(tau, 1.0, epsilon = 1e-9);
        // deterministic box with zero price
        let tau = weitzman_index(&[(3.0, 1.0)], 0.0, 1e-12).unwrap();
        assert_abs_diff_eq!(tau, 3.0, epsilon = 1e-9);
        // price beyond the surplus: no root at or above the minimum outcome
        assert!(matches!(
            weitzman_index(&[(2.0, 0.5), (0.0, 0.5)], 1.5, 1e-12),
            Err(Error::NoRoot { .. })
        ));
    }

    #[test]
    fn weitzman_index_equals_start_grade() {
        let ms = weitzman_box();
        let solver = GradeSolver::default();
        let g = solver.grade(&ms, StateId(0)).unwrap();
        let w = weitzman_index(&[(2.0, 0.5), (0.0, 0.5)], 0.5, solver.tol).unwrap();
        assert!((g - w).abs() <= 2.0 * solver.tol);
    }
}
