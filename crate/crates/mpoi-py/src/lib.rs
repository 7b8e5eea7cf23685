//! Python bindings: load scenarios, compute grades, run the adaptive and
//! commitment strategies, and query the exact oracles from Python.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mpoi_core::adaptive::{self, PlayThroughSelectAll, RobustnessParams};
use mpoi_core::commitment::{
    arrival_order, build_lp, ocrs_matroid_greedy, ocrs_rank1, run_commitment,
    selectability_exhaustive, selectability_mc, solve_lp, PolytopeSpec,
};
use mpoi_core::grade::{dismin_grade_tables, grade_tables, weitzman_index, GradeSolver};
use mpoi_core::markov::{MarkovSystem, StateId};
use mpoi_core::oracle::{
    exact_policy_value, mean_and_stderr, optimal_policy_dp, AdaptiveDisMin, AdaptiveUtiMax, DpMode,
    DEFAULT_PROFILE_CAP, DEFAULT_STATE_CAP,
};
use mpoi_core::scenario::{self, GameMode};

fn err(e: mpoi_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A loaded scenario: Markov systems, constraint, and objective.
#[pyclass]
struct Scenario {
    inner: scenario::Scenario,
}

impl Scenario {
    fn solver(tol: f64) -> GradeSolver {
        GradeSolver::with_tol(tol)
    }

    fn state_name(&self, system: usize, idx: usize) -> String {
        self.inner.name_maps[system]
            .iter()
            .find(|(_, &v)| v == idx)
            .map(|(k, _)| k.clone())
            .unwrap_or_else(|| idx.to_string())
    }
}

#[pymethods]
impl Scenario {
    /// Parse a scenario from JSON text.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Scenario { inner: scenario::parse_scenario(text).map_err(err)? })
    }

    /// Load a scenario from a file path.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Scenario { inner: scenario::load_scenario(path).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode {
            GameMode::UtiMax => "utimax",
            GameMode::DisMin => "dismin",
        }
    }

    #[getter]
    fn n_systems(&self) -> usize {
        self.inner.systems.len()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// DAG flags and depths per system: list of (is_dag, depth-or-None).
    fn classify(&self) -> Vec<(bool, Option<usize>)> {
        self.inner
            .systems
            .iter()
            .map(|ms| {
                let c = ms.classify();
                (c.is_dag, c.depth)
            })
            .collect()
    }

    /// Grades per system as {system_name: {state_name: grade}}.
    #[pyo3(signature = (tol = 1e-9))]
    fn grade_table(&self, tol: f64) -> PyResult<BTreeMap<String, BTreeMap<String, f64>>> {
        let tables = grade_tables(&self.inner.systems, &Self::solver(tol)).map_err(err)?;
        let mut out = BTreeMap::new();
        for (i, table) in tables.iter().enumerate() {
            let mut per_state = BTreeMap::new();
            for s in 0..self.inner.systems[i].n_states() {
                per_state.insert(self.state_name(i, s), table.grades[s]);
            }
            out.insert(self.inner.systems[i].name.clone(), per_state);
        }
        Ok(out)
    }

    /// Optimal value of the penalized stopping game at one state.
    #[pyo3(signature = (system, state, tau, tol = 1e-9))]
    fn penalized_utility(&self, system: usize, state: &str, tau: f64, tol: f64) -> PyResult<f64> {
        let idx = *self.inner.name_maps[system]
            .get(state)
            .ok_or_else(|| PyValueError::new_err(format!("unknown state '{state}'")))?;
        Self::solver(tol)
            .penalized_utility(&self.inner.systems[system], StateId(idx as u32), tau)
            .map_err(err)
    }

    /// Monte Carlo of the adaptive strategy:
    /// returns {"mean", "stderr", "utilities"}.
    #[pyo3(signature = (runs = 1000, seed = 0, tol = 1e-9))]
    fn simulate(&self, runs: usize, seed: u64, tol: f64) -> PyResult<Py<PyAny>> {
        let solver = Self::solver(tol);
        let g = self.inner.marginal().map_err(err)?;
        let mut utilities = Vec::with_capacity(runs);
        match self.inner.mode {
            GameMode::UtiMax => {
                let oracle = self.inner.packing().expect("utimax packs");
                let grades = grade_tables(&self.inner.systems, &solver).map_err(err)?;
                for run in 0..runs as u64 {
                    let out = adaptive::run_utimax(
                        &self.inner.systems,
                        oracle,
                        &g,
                        &grades,
                        &self.inner.objective,
                        seed,
                        run,
                    )
                    .map_err(err)?;
                    utilities.push(out.utility);
                }
            }
            GameMode::DisMin => {
                let oracle = self.inner.covering().expect("dismin covers");
                let grades = dismin_grade_tables(&self.inner.systems, &solver).map_err(err)?;
                for run in 0..runs as u64 {
                    let out = adaptive::run_dismin(
                        &self.inner.systems,
                        oracle,
                        &g,
                        &grades,
                        &self.inner.objective,
                        seed,
                        run,
                    )
                    .map_err(err)?;
                    utilities.push(out.utility);
                }
            }
        }
        let (mean, stderr) = mean_and_stderr(&utilities);
        Python::attach(|py| {
            let dict = pyo3::types::PyDict::new(py);
            dict.set_item("mean", mean)?;
            dict.set_item("stderr", stderr)?;
            dict.set_item("utilities", utilities)?;
            Ok(dict.into())
        })
    }

    /// Exact expected value of the adaptive strategy over all trajectory
    /// profiles (DAG scenarios only).
    #[pyo3(signature = (tol = 1e-12))]
    fn exact_adaptive_value(&self, tol: f64) -> PyResult<f64> {
        let solver = Self::solver(tol);
        let g = self.inner.marginal().map_err(err)?;
        match self.inner.mode {
            GameMode::UtiMax => {
                let oracle = self.inner.packing().expect("utimax packs");
                let grades = grade_tables(&self.inner.systems, &solver).map_err(err)?;
                let strat = AdaptiveUtiMax {
                    systems: &self.inner.systems,
                    oracle,
                    g: &g,
                    grades: &grades,
                    objective: &self.inner.objective,
                };
                exact_policy_value(&self.inner.systems, &strat, DEFAULT_PROFILE_CAP).map_err(err)
            }
            GameMode::DisMin => {
                let oracle = self.inner.covering().expect("dismin covers");
                let grades = dismin_grade_tables(&self.inner.systems, &solver).map_err(err)?;
                let strat = AdaptiveDisMin {
                    systems: &self.inner.systems,
                    oracle,
                    g: &g,
                    grades: &grades,
                    objective: &self.inner.objective,
                };
                exact_policy_value(&self.inner.systems, &strat, DEFAULT_PROFILE_CAP).map_err(err)
            }
        }
    }

    /// Exact optimum of the probing game: (value, expanded state count).
    fn oracle_opt(&self) -> PyResult<(f64, usize)> {
        let mode = match self.inner.mode {
            GameMode::UtiMax => DpMode::UtiMax,
            GameMode::DisMin => DpMode::DisMin,
        };
        let dp = optimal_policy_dp(
            &self.inner.systems,
            &self.inner.constraint,
            &self.inner.objective,
            mode,
            DEFAULT_STATE_CAP,
        )
        .map_err(err)?;
        Ok((dp.optimal_value, dp.state_count))
    }

    /// Exact surrogate bound: (value, frugal_value).
    #[pyo3(signature = (tol = 1e-12))]
    fn surrogate(&self, tol: f64) -> PyResult<(f64, f64)> {
        let solver = Self::solver(tol);
        let g = self.inner.marginal().map_err(err)?;
        let grades = match self.inner.mode {
            GameMode::UtiMax => grade_tables(&self.inner.systems, &solver),
            GameMode::DisMin => dismin_grade_tables(&self.inner.systems, &solver),
        }
        .map_err(err)?;
        let est = adaptive::surrogate_exact(
            &self.inner.systems,
            &self.inner.constraint,
            &g,
            &self.inner.objective,
            &grades,
        )
        .map_err(err)?;
        Ok((est.value, est.frugal_value))
    }

    /// Exact teasing-game value of the play-through-select-all schedule.
    #[pyo3(signature = (tol = 1e-12))]
    fn teasing_value(&self, tol: f64) -> PyResult<f64> {
        let grades = grade_tables(&self.inner.systems, &Self::solver(tol)).map_err(err)?;
        adaptive::teasing_game_value(&self.inner.systems, &grades, &PlayThroughSelectAll)
            .map_err(err)
    }

    /// Robustness parameters for a budget: {"k", "L", "B", "P", "depths"}.
    fn robustness_params(&self, epsilon: f64) -> PyResult<Py<PyAny>> {
        let params = RobustnessParams::derive(&self.inner.systems, &self.inner.constraint, epsilon)
            .map_err(err)?;
        Python::attach(|py| {
            let dict = pyo3::types::PyDict::new(py);
            dict.set_item("k", params.k)?;
            dict.set_item("L", params.l())?;
            dict.set_item("B", params.bound)?;
            dict.set_item("P", params.inv_min_prob)?;
            dict.set_item("depths", params.depths.clone())?;
            Ok(dict.into())
        })
    }

    /// LP value and commitment playout:
    /// {"lp_value", "mean", "stderr", "selectability"}.
    #[pyo3(signature = (runs = 10000, seed = 0, adversarial = false))]
    fn commitment(&self, runs: usize, seed: u64, adversarial: bool) -> PyResult<Py<PyAny>> {
        let oracle = self
            .inner
            .packing()
            .ok_or_else(|| PyValueError::new_err("commitment requires a packing scenario"))?;
        let polytope = PolytopeSpec::from_oracle(oracle).map_err(err)?;
        let clp = build_lp(&self.inner.systems, &polytope).map_err(err)?;
        let sol = solve_lp(&clp, 1e-8).map_err(err)?;
        let n = self.inner.systems.len();
        let rank1 = matches!(&polytope, PolytopeSpec::UniformMatroid { k } if *k == 1);
        let mut utilities = Vec::with_capacity(runs);
        for run in 0..runs as u64 {
            let order = arrival_order(n, adversarial, seed, run);
            let scheme = if rank1 {
                ocrs_rank1(&sol.x, &order).map_err(err)?
            } else {
                ocrs_matroid_greedy(oracle, &order)
            };
            utilities.push(
                run_commitment(&self.inner.systems, &sol, &scheme, seed, run).map_err(err)?.utility,
            );
        }
        let (mean, stderr) = mean_and_stderr(&utilities);
        let base_order: Vec<usize> = (0..n).collect();
        let base_scheme = if rank1 {
            ocrs_rank1(&sol.x, &base_order).map_err(err)?
        } else {
            ocrs_matroid_greedy(oracle, &base_order)
        };
        let selectability = if n <= 12 {
            selectability_exhaustive(&base_scheme, &sol.x).map_err(err)?
        } else {
            selectability_mc(&base_scheme, &sol.x, 100_000, seed)
        };
        Python::attach(|py| {
            let dict = pyo3::types::PyDict::new(py);
            dict.set_item("lp_value", sol.objective_value)?;
            dict.set_item("mean", mean)?;
            dict.set_item("stderr", stderr)?;
            dict.set_item("selectability", selectability)?;
            Ok(dict.into())
        })
    }
}

/// Reservation value of a single-probe box: the root of
/// `E[(X - tau)^+] = price`.
#[pyfunction]
#[pyo3(signature = (outcomes, price, tol = 1e-9))]
fn weitzman_reservation(outcomes: Vec<(f64, f64)>, price: f64, tol: f64) -> PyResult<f64> {
    weitzman_index(&outcomes, price, tol).map_err(err)
}

/// Validate a scenario JSON string; returns warnings, raises on violations.
#[pyfunction]
fn validate_scenario(text: &str) -> PyResult<Vec<String>> {
    Ok(scenario::parse_scenario(text).map_err(err)?.warnings)
}

/// One sampled trajectory of one system of a scenario, as state names.
#[pyfunction]
#[pyo3(signature = (text, system, seed = 0, run = 0, step_ceiling = 1_000_000))]
fn sample_trajectory(
    text: &str,
    system: usize,
    seed: u64,
    run: u64,
    step_ceiling: usize,
) -> PyResult<Vec<String>> {
    let sc = scenario::parse_scenario(text).map_err(err)?;
    let ms: &MarkovSystem = &sc.systems[system];
    let mut rng = mpoi_core::rng::system_rng(seed, run, system);
    let traj = ms.sample_trajectory(system, &mut rng, step_ceiling).map_err(err)?;
    Ok(traj
        .visited
        .iter()
        .map(|s| {
            sc.name_maps[system]
                .iter()
                .find(|(_, &v)| v == s.idx())
                .map(|(k, _)| k.clone())
                .unwrap_or_else(|| s.idx().to_string())
        })
        .collect())
}

#[pymodule]
fn mpoi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(weitzman_reservation, m)?)?;
    m.add_function(wrap_pyfunction!(validate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(sample_trajectory, m)?)?;
    Ok(())
}
