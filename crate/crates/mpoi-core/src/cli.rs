//! The `mpoi` command-line interface: scenario ingestion, experiment
//! orchestration, and CSV/JSON report emission.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::adaptive::{
    self, profile_proxies, shifted_prevailing, surrogate_exact, surrogate_mc, RobustnessParams,
};
use crate::commitment::{
    arrival_order, build_lp, ocrs_matroid_greedy, ocrs_rank1, run_commitment,
    selectability_exhaustive, selectability_mc, solve_lp, OcrsScheme, PolytopeSpec,
};
use crate::constraints::{ConstraintOracle, PackingOracle};
use crate::error::{Error, Result};
use crate::grade::{dismin_grade_tables, grade_tables, GradeSolver};
use crate::markov::MarkovSystem;
use crate::oracle::{
    enumerate_profiles, exact_policy_value, mean_and_stderr, optimal_policy_dp, AdaptiveDisMin,
    AdaptiveUtiMax, DpAction, DpMode, RobustUtiMax, RoundRobinProbeAll, StopImmediately,
    DEFAULT_PROFILE_CAP, DEFAULT_STATE_CAP,
};
use crate::report::{fmt_f64, fmt_set, Report, ReportRow};
use crate::rng::aux_rng;
use crate::scenario::{load_scenario, GameMode, Scenario};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Markovian price of information: probing strategies, oracles, and the
/// commitment pipeline over scenario files.
#[derive(Debug, Parser)]
#[command(name = "mpoi", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Number of Monte Carlo runs.
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    /// Master seed; omitted: MPOI_SEED env var, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and echo the name/index maps.
    Validate { scenario: PathBuf },
    /// Print the per-system grade table as CSV.
    Grade {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Dump the table as JSON (adds wall-clock time).
        #[arg(long)]
        json: bool,
    },
    /// Run the adaptive strategy and emit per-run rows plus a summary.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        run_args: RunArgs,
        /// Use the robust variant (estimated grades, upward shifting).
        #[arg(long)]
        robust: bool,
        /// Robustness budget; required with --robust.
        #[arg(long, requires = "robust")]
        epsilon: Option<f64>,
        /// Transition-probability perturbation magnitude for the estimated
        /// world.
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
        /// Grade solver tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Dump rows and summary as JSON (adds wall-clock time).
        #[arg(long)]
        json: bool,
    },
    /// Exact optimum by dynamic programming over the joint state space.
    Oracle {
        scenario: PathBuf,
        /// Dump the full policy table as JSON instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// Compare the adaptive strategy against the surrogate bound, the DP
    /// optimum, and naive baselines.
    Compare {
        scenario: PathBuf,
        #[command(flatten)]
        run_args: RunArgs,
        /// Include the exact DP optimum (small scenarios only).
        #[arg(long)]
        with_oracle: bool,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Dump the comparison as JSON (adds wall-clock time).
        #[arg(long)]
        json: bool,
    },
    /// Sweep robustness budgets against transition perturbations.
    Robustness {
        scenario: PathBuf,
        /// Comma-separated robustness budgets.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01")]
        epsilons: Vec<f64>,
        /// Comma-separated perturbation magnitudes.
        #[arg(long, value_delimiter = ',', default_value = "0.0,1e-6")]
        perturbs: Vec<f64>,
        #[command(flatten)]
        run_args: RunArgs,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Dump the sweep grid as JSON (adds wall-clock time).
        #[arg(long)]
        json: bool,
    },
    /// LP + OCRS pipeline under the commitment constraint.
    Commitment {
        scenario: PathBuf,
        #[command(flatten)]
        run_args: RunArgs,
        /// Arrival order: element ids, or a fresh permutation per run.
        #[arg(long, default_value = "ids")]
        order: String,
        /// Dump the LP solution (x, y, z maps) as JSON.
        #[arg(long)]
        json: bool,
    },
}

/// Distinct exit code per error class; zero is success.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) => 3,
        Error::Validation(_) => 4,
        Error::NotDag(_) => 5,
        Error::TooLargeForExact { .. }
        | Error::StateSpaceTooLarge { .. }
        | Error::TooManyProfiles { .. } => 6,
        Error::IterationLimit(_) | Error::NonTerminating { .. } => 7,
        Error::LpInfeasible
        | Error::LpUnbounded
        | Error::UnsupportedPolytope(_)
        | Error::OutsidePolytope(_)
        | Error::DivisionDegenerate => 8,
        Error::Io(_) => 9,
        _ => 10,
    }
}

/// Seed resolution: flag beats the MPOI_SEED env var beats 0.
pub fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var("MPOI_SEED").ok().and_then(|s| s.parse().ok())).unwrap_or(0)
}

/// Runs a parsed command and returns its stdout payload.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Grade { scenario, tol, json } => cmd_grade(&scenario, tol, json),
        Command::Simulate { scenario, run_args, robust, epsilon, perturb, tol, json } => {
            cmd_simulate(
                &scenario,
                run_args.runs,
                resolve_seed(run_args.seed),
                robust,
                epsilon,
                perturb,
                tol,
                json,
            )
        }
        Command::Oracle { scenario, json } => cmd_oracle(&scenario, json),
        Command::Compare { scenario, run_args, with_oracle, tol, json } => cmd_compare(
            &scenario,
            run_args.runs,
            resolve_seed(run_args.seed),
            with_oracle,
            tol,
            json,
        ),
        Command::Robustness { scenario, epsilons, perturbs, run_args, tol, json } => {
            cmd_robustness(
                &scenario,
                &epsilons,
                &perturbs,
                run_args.runs,
                resolve_seed(run_args.seed),
                tol,
                json,
            )
        }
        Command::Commitment { scenario, run_args, order, json } => cmd_commitment(
            &scenario,
            run_args.runs,
            resolve_seed(run_args.seed),
            order == "adversarial",
            json,
        ),
    }
}

fn state_name(sc: &Scenario, system: usize, idx: usize) -> String {
    sc.name_maps[system]
        .iter()
        .find(|(_, &v)| v == idx)
        .map(|(k, _)| k.clone())
        .unwrap_or_else(|| idx.to_string())
}

/// CSV is the deterministic surface; JSON adds wall-clock time and the
/// metric rows.
fn finish(report: Report, json: bool, t0: Instant, metrics: Vec<ReportRow>) -> String {
    if json {
        report.to_json(t0.elapsed().as_secs_f64() * 1e3, &metrics)
    } else {
        report.to_csv()
    }
}

fn cmd_validate(path: &PathBuf) -> Result<String> {
    let sc = load_scenario(path)?;
    let mut out = String::new();
    out.push_str(&format!(
        "OK: {} system(s), constraint arity {}\n",
        sc.systems.len(),
        sc.constraint.n_elements()
    ));
    for (i, ms) in sc.systems.iter().enumerate() {
        let map: Vec<String> =
            (0..ms.n_states()).map(|s| format!("{}={s}", state_name(&sc, i, s))).collect();
        out.push_str(&format!("system {i} ({}): {}\n", ms.name, map.join(" ")));
    }
    for w in &sc.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    Ok(out)
}

fn cmd_grade(path: &PathBuf, tol: f64, json: bool) -> Result<String> {
    let t0 = Instant::now();
    let sc = load_scenario(path)?;
    let solver = GradeSolver::with_tol(tol);
    let tables = grade_tables(&sc.systems, &solver)?;
    let mut report = Report::new(&["system", "state", "grade", "method", "tolerance"]);
    report.meta("version", VERSION).meta("cmd", format!("grade tol={tol}"));
    for (i, table) in tables.iter().enumerate() {
        for s in 0..sc.systems[i].n_states() {
            report.row(vec![
                sc.systems[i].name.clone(),
                state_name(&sc, i, s),
                fmt_f64(table.grades[s]),
                table.method.as_str().into(),
                fmt_f64(table.tolerance),
            ]);
        }
    }
    Ok(finish(report, json, t0, Vec::new()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &PathBuf,
    runs: usize,
    seed: u64,
    robust: bool,
    epsilon: Option<f64>,
    perturb: f64,
    tol: f64,
    json: bool,
) -> Result<String> {
    let t0 = Instant::now();
    let sc = load_scenario(path)?;
    let solver = GradeSolver::with_tol(tol);
    let g = sc.marginal()?;

    let mut report = Report::new(&["run_id", "utility", "total_price", "selected_set", "stderr"]);
    report.meta("version", VERSION).meta("seed", seed).meta(
        "cmd",
        format!(
            "simulate runs={runs} robust={robust} epsilon={} perturb={perturb} tol={tol}",
            epsilon.unwrap_or(0.0)
        ),
    );
    for w in &sc.warnings {
        report.meta("warning", w);
    }

    let mut utilities = Vec::with_capacity(runs);
    let mut prices = Vec::with_capacity(runs);
    let mut emit = |run: u64, out: &adaptive::RunOutcome, report: &mut Report| {
        utilities.push(out.utility);
        prices.push(out.total_price);
        report.row(vec![
            run.to_string(),
            fmt_f64(out.utility),
            fmt_f64(out.total_price),
            fmt_set(&out.selected),
            String::new(),
        ]);
    };

    match (sc.mode, robust) {
        (GameMode::UtiMax, false) => {
            let oracle = sc.packing().expect("utimax packs");
            let grades = grade_tables(&sc.systems, &solver)?;
            for run in 0..runs as u64 {
                let out = adaptive::run_utimax(
                    &sc.systems,
                    oracle,
                    &g,
                    &grades,
                    &sc.objective,
                    seed,
                    run,
                )?;
                emit(run, &out, &mut report);
            }
        }
        (GameMode::UtiMax, true) => {
            let oracle = sc.packing().expect("utimax packs");
            let epsilon = epsilon.unwrap_or(0.1);
            let params = RobustnessParams::derive(&sc.systems, &sc.constraint, epsilon)?;
            let mut rng = aux_rng(seed, 0, 7);
            let estimated: Vec<MarkovSystem> =
                sc.systems.iter().map(|ms| ms.perturbed(perturb, &mut rng)).collect();
            let est_grades = grade_tables(&estimated, &solver)?;
            for run in 0..runs as u64 {
                let out = adaptive::run_robust_utimax(
                    &sc.systems,
                    oracle,
                    &g,
                    &est_grades,
                    &params,
                    &sc.objective,
                    seed,
                    run,
                )?;
                emit(run, &out, &mut report);
            }
        }
        (GameMode::DisMin, true) => {
            return Err(Error::Validation(
                vec!["--robust applies to utimax scenarios only".into()],
            ));
        }
        (GameMode::DisMin, false) => {
            let oracle = sc.covering().expect("dismin covers");
            let grades = dismin_grade_tables(&sc.systems, &solver)?;
            for run in 0..runs as u64 {
                let out = adaptive::run_dismin(
                    &sc.systems,
                    oracle,
                    &g,
                    &grades,
                    &sc.objective,
                    seed,
                    run,
                )?;
                emit(run, &out, &mut report);
            }
        }
    }

    let (mean, stderr) = mean_and_stderr(&utilities);
    let (mean_price, _) = mean_and_stderr(&prices);
    report.row(vec![
        "summary".into(),
        fmt_f64(mean),
        fmt_f64(mean_price),
        "-".into(),
        fmt_f64(stderr),
    ]);
    let metrics = vec![
        ReportRow {
            experiment: sc.name.clone(),
            metric: "mean_utility".into(),
            value: mean,
            stderr: Some(stderr),
            seed,
            wall_time_ms: None,
        },
        ReportRow {
            experiment: sc.name.clone(),
            metric: "mean_total_price".into(),
            value: mean_price,
            stderr: None,
            seed,
            wall_time_ms: None,
        },
    ];
    Ok(finish(report, json, t0, metrics))
}

fn dp_mode(sc: &Scenario) -> DpMode {
    match sc.mode {
        GameMode::UtiMax => DpMode::UtiMax,
        GameMode::DisMin => DpMode::DisMin,
    }
}

fn cmd_oracle(path: &PathBuf, json: bool) -> Result<String> {
    let sc = load_scenario(path)?;
    let dp = optimal_policy_dp(
        &sc.systems,
        &sc.constraint,
        &sc.objective,
        dp_mode(&sc),
        DEFAULT_STATE_CAP,
    )?;
    if json {
        let mut policy: Vec<serde_json::Value> = dp
            .policy
            .iter()
            .map(|(joint, action)| {
                let states: Vec<String> = joint
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| state_name(&sc, i, s as usize))
                    .collect();
                let action = match action {
                    DpAction::Advance(i) => format!("advance:{}", sc.systems[*i].name),
                    DpAction::Stop => "stop".into(),
                };
                serde_json::json!({ "joint": states, "action": action })
            })
            .collect();
        policy.sort_by_key(|v| v["joint"].to_string());
        let doc = serde_json::json!({
            "opt_value": dp.optimal_value,
            "state_count": dp.state_count,
            "policy": policy,
        });
        return Ok(format!("{}\n", serde_json::to_string_pretty(&doc)?));
    }
    let mut report = Report::new(&["metric", "value"]);
    report.meta("version", VERSION).meta("cmd", "oracle");
    report.row(vec!["opt_value".into(), fmt_f64(dp.optimal_value)]);
    report.row(vec!["state_count".into(), dp.state_count.to_string()]);
    Ok(report.to_csv())
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    path: &PathBuf,
    runs: usize,
    seed: u64,
    with_oracle: bool,
    tol: f64,
    json: bool,
) -> Result<String> {
    let t0 = Instant::now();
    let sc = load_scenario(path)?;
    let solver = GradeSolver::with_tol(tol);
    let g = sc.marginal()?;
    let enumerable = enumerate_profiles(&sc.systems, DEFAULT_PROFILE_CAP).is_ok();

    let opt = if with_oracle {
        Some(
            optimal_policy_dp(
                &sc.systems,
                &sc.constraint,
                &sc.objective,
                dp_mode(&sc),
                DEFAULT_STATE_CAP,
            )?
            .optimal_value,
        )
    } else {
        None
    };

    let mut report = Report::new(&["strategy", "value", "stderr", "ratio_vs_opt"]);
    report
        .meta("version", VERSION)
        .meta("seed", seed)
        .meta("cmd", format!("compare runs={runs} with_oracle={with_oracle} tol={tol}"));
    if let Some(c) = sc.covering() {
        // the set-cover approximation bound parameters
        let f = c.max_frequency();
        if f > 0 {
            report.meta("set_cover_f", f);
        }
    }

    let mut metrics: Vec<ReportRow> = Vec::new();
    let mut add = |name: &str, value: f64, stderr: f64, report: &mut Report| {
        let ratio = opt
            .map(|o| if o.abs() > 1e-12 { fmt_f64(value / o) } else { "-".into() })
            .unwrap_or_else(|| "-".into());
        report.row(vec![name.into(), fmt_f64(value), fmt_f64(stderr), ratio]);
        metrics.push(ReportRow {
            experiment: sc.name.clone(),
            metric: name.into(),
            value,
            stderr: Some(stderr),
            seed,
            wall_time_ms: None,
        });
    };

    match sc.mode {
        GameMode::UtiMax => {
            let oracle = sc.packing().expect("utimax packs");
            let grades = grade_tables(&sc.systems, &solver)?;
            let strat = AdaptiveUtiMax {
                systems: &sc.systems,
                oracle,
                g: &g,
                grades: &grades,
                objective: &sc.objective,
            };
            let (value, stderr) = if enumerable {
                (exact_policy_value(&sc.systems, &strat, DEFAULT_PROFILE_CAP)?, 0.0)
            } else {
                crate::oracle::mc_estimate(
                    |s, r| {
                        Ok(adaptive::run_utimax(
                            &sc.systems,
                            oracle,
                            &g,
                            &grades,
                            &sc.objective,
                            s,
                            r,
                        )?
                        .utility)
                    },
                    runs,
                    seed,
                )?
            };
            add("adaptive", value, stderr, &mut report);

            let sur = if enumerable {
                surrogate_exact(&sc.systems, &sc.constraint, &g, &sc.objective, &grades)?
            } else {
                surrogate_mc(
                    &sc.systems,
                    &sc.constraint,
                    &g,
                    &sc.objective,
                    &grades,
                    runs,
                    seed,
                    crate::markov::DEFAULT_STEP_CEILING,
                )?
            };
            add("surrogate_bound", sur.value, sur.stderr, &mut report);
            add("surrogate_frugal", sur.frugal_value, sur.stderr, &mut report);

            let probe_all = RoundRobinProbeAll {
                systems: &sc.systems,
                constraint: &sc.constraint,
                objective: &sc.objective,
            };
            let (value, stderr) = if enumerable {
                (exact_policy_value(&sc.systems, &probe_all, DEFAULT_PROFILE_CAP)?, 0.0)
            } else {
                (f64::NAN, f64::NAN)
            };
            add("probe_everything", value, stderr, &mut report);
            let nothing = StopImmediately { objective: &sc.objective };
            add(
                "probe_nothing",
                exact_policy_value(&sc.systems, &nothing, DEFAULT_PROFILE_CAP.max(1))
                    .unwrap_or(0.0),
                0.0,
                &mut report,
            );
        }
        GameMode::DisMin => {
            let oracle = sc.covering().expect("dismin covers");
            let grades = dismin_grade_tables(&sc.systems, &solver)?;
            let strat = AdaptiveDisMin {
                systems: &sc.systems,
                oracle,
                g: &g,
                grades: &grades,
                objective: &sc.objective,
            };
            let (value, stderr) = if enumerable {
                (exact_policy_value(&sc.systems, &strat, DEFAULT_PROFILE_CAP)?, 0.0)
            } else {
                crate::oracle::mc_estimate(
                    |s, r| {
                        Ok(adaptive::run_dismin(
                            &sc.systems,
                            oracle,
                            &g,
                            &grades,
                            &sc.objective,
                            s,
                            r,
                        )?
                        .utility)
                    },
                    runs,
                    seed,
                )?
            };
            add("adaptive", value, stderr, &mut report);

            let sur = if enumerable {
                surrogate_exact(&sc.systems, &sc.constraint, &g, &sc.objective, &grades)?
            } else {
                surrogate_mc(
                    &sc.systems,
                    &sc.constraint,
                    &g,
                    &sc.objective,
                    &grades,
                    runs,
                    seed,
                    crate::markov::DEFAULT_STEP_CEILING,
                )?
            };
            add("surrogate_bound", sur.value, sur.stderr, &mut report);

            let probe_all = RoundRobinProbeAll {
                systems: &sc.systems,
                constraint: &sc.constraint,
                objective: &sc.objective,
            };
            if enumerable {
                let value = exact_policy_value(&sc.systems, &probe_all, DEFAULT_PROFILE_CAP)?;
                add("probe_everything", value, 0.0, &mut report);
            }
        }
    }
    if let Some(o) = opt {
        add("dp_oracle", o, 0.0, &mut report);
    }
    drop(add);
    Ok(finish(report, json, t0, metrics))
}

#[allow(clippy::too_many_arguments)]
fn cmd_robustness(
    path: &PathBuf,
    epsilons: &[f64],
    perturbs: &[f64],
    runs: usize,
    seed: u64,
    tol: f64,
    json: bool,
) -> Result<String> {
    let t0 = Instant::now();
    let sc = load_scenario(path)?;
    let oracle = match sc.packing() {
        Some(p) => p,
        None => {
            return Err(Error::Validation(vec![
                "robustness sweeps require a utimax (packing) scenario".into(),
            ]))
        }
    };
    let solver = GradeSolver::with_tol(tol);
    let g = sc.marginal()?;
    let grades = grade_tables(&sc.systems, &solver)?;
    let opt = optimal_policy_dp(
        &sc.systems,
        &sc.constraint,
        &sc.objective,
        DpMode::UtiMax,
        DEFAULT_STATE_CAP,
    )?
    .optimal_value;
    let enumerable = enumerate_profiles(&sc.systems, DEFAULT_PROFILE_CAP).is_ok();

    let mut report = Report::new(&[
        "epsilon",
        "delta",
        "max_grade_err",
        "budget_ok",
        "opt",
        "value",
        "gap",
        "within_epsilon",
    ]);
    report
        .meta("version", VERSION)
        .meta("seed", seed)
        .meta("cmd", format!("robustness runs={runs} tol={tol}"))
        .meta("declared_poly", "delta <= epsilon / (8 L k D)");
    let mut metrics: Vec<ReportRow> = Vec::new();

    for &epsilon in epsilons {
        let params = RobustnessParams::derive(&sc.systems, &sc.constraint, epsilon)?;
        for (grid, &delta) in perturbs.iter().enumerate() {
            let mut rng = aux_rng(seed, grid as u64, 7);
            let estimated: Vec<MarkovSystem> =
                sc.systems.iter().map(|ms| ms.perturbed(delta, &mut rng)).collect();
            let est_grades = grade_tables(&estimated, &solver)?;
            let mut max_err = 0.0f64;
            let mut budget_ok = true;
            for i in 0..sc.systems.len() {
                for s in 0..sc.systems[i].n_states() {
                    let err = (est_grades[i].grades[s] - grades[i].grades[s]).abs();
                    max_err = max_err.max(err);
                    if err > params.grade_error_budget(i) {
                        budget_ok = false;
                    }
                }
            }
            let strat = RobustUtiMax {
                systems: &sc.systems,
                oracle,
                g: &g,
                estimated_grades: &est_grades,
                params: &params,
                objective: &sc.objective,
            };
            let (value, _stderr) = if enumerable {
                (exact_policy_value(&sc.systems, &strat, DEFAULT_PROFILE_CAP)?, 0.0)
            } else {
                crate::oracle::mc_estimate(
                    |s, r| {
                        Ok(adaptive::run_robust_utimax(
                            &sc.systems,
                            oracle,
                            &g,
                            &est_grades,
                            &params,
                            &sc.objective,
                            s,
                            r,
                        )?
                        .utility)
                    },
                    runs,
                    seed,
                )?
            };
            let gap = opt - value;
            let l = params.l();
            let k = params.k as f64;
            let d = *params.depths.iter().max().unwrap_or(&1) as f64;
            let within_budget = delta <= epsilon / (8.0 * l * k * d);
            let within = gap <= epsilon || !within_budget;
            report.row(vec![
                fmt_f64(epsilon),
                fmt_f64(delta),
                fmt_f64(max_err),
                budget_ok.to_string(),
                fmt_f64(opt),
                fmt_f64(value),
                fmt_f64(gap),
                within.to_string(),
            ]);
            metrics.push(ReportRow {
                experiment: format!("{} eps={epsilon} delta={delta}", sc.name),
                metric: "utility_gap".into(),
                value: gap,
                stderr: None,
                seed,
                wall_time_ms: None,
            });
        }
    }
    Ok(finish(report, json, t0, metrics))
}

fn cmd_commitment(
    path: &PathBuf,
    runs: usize,
    seed: u64,
    adversarial: bool,
    json: bool,
) -> Result<String> {
    let sc = load_scenario(path)?;
    let oracle = match sc.packing() {
        Some(p) => p,
        None => {
            return Err(Error::Validation(vec![
                "commitment requires a utimax (packing) scenario".into()
            ]))
        }
    };
    let polytope = PolytopeSpec::from_oracle(oracle)?;
    let clp = build_lp(&sc.systems, &polytope)?;
    let sol = solve_lp(&clp, 1e-8)?;

    let n = sc.systems.len();
    let rank1 = matches!(&polytope, PolytopeSpec::UniformMatroid { k } if *k == 1);
    let scheme_for = |run: u64| -> Result<OcrsScheme> {
        let order = arrival_order(n, adversarial, seed, run);
        if rank1 {
            ocrs_rank1(&sol.x, &order)
        } else {
            Ok(ocrs_matroid_greedy(oracle, &order))
        }
    };

    if json {
        let mut doc = serde_json::Map::new();
        doc.insert("lp_value".into(), serde_json::json!(sol.objective_value));
        let mut systems = Vec::new();
        for (i, ms) in sc.systems.iter().enumerate() {
            let states: Vec<String> = (0..ms.n_states()).map(|s| state_name(&sc, i, s)).collect();
            systems.push(serde_json::json!({
                "system": ms.name,
                "x": sol.x[i],
                "y": states.iter().zip(&sol.y[i]).collect::<std::collections::BTreeMap<_, _>>(),
                "z": states.iter().zip(&sol.z[i]).collect::<std::collections::BTreeMap<_, _>>(),
            }));
        }
        doc.insert("systems".into(), serde_json::json!(systems));
        return Ok(format!("{}\n", serde_json::to_string_pretty(&doc)?));
    }

    let mut utilities = Vec::with_capacity(runs);
    for run in 0..runs as u64 {
        let scheme = scheme_for(run)?;
        utilities.push(run_commitment(&sc.systems, &sol, &scheme, seed, run)?.utility);
    }
    let (mean, stderr) = mean_and_stderr(&utilities);

    // measured selectability under the id order
    let base_scheme = scheme_for(0)?;
    let selectability = if n <= 12 {
        selectability_exhaustive(&base_scheme, &sol.x)?
    } else {
        selectability_mc(&base_scheme, &sol.x, 100_000, seed)
    };
    let sel_cell = selectability
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{i}:{}", fmt_f64(*s)))
        .collect::<Vec<_>>()
        .join("|");

    let mut report =
        Report::new(&["lp_value", "mean_utility", "stderr", "measured_selectability_per_element"]);
    report
        .meta("version", VERSION)
        .meta("seed", seed)
        .meta("cmd", format!("commitment runs={runs} adversarial={adversarial}"));
    report.row(vec![fmt_f64(sol.objective_value), fmt_f64(mean), fmt_f64(stderr), sel_cell]);
    Ok(report.to_csv())
}

/// Helpers shared with the acceptance suite: the shifted prevailing costs of
/// a robust run's profile, checked against the true prevailing costs.
pub fn robust_prevailing_gaps(
    true_grades: &[crate::grade::GradeTable],
    est_grades: &[crate::grade::GradeTable],
    params: &RobustnessParams,
    profile: &crate::markov::TrajectoryProfile,
    constraint: &ConstraintOracle,
) -> Vec<f64> {
    let truth = profile_proxies(constraint, true_grades, profile);
    (0..profile.len())
        .map(|i| {
            let hat = shifted_prevailing(&est_grades[i], profile.get(i), params.shift(i));
            (hat - truth[i]).abs()
        })
        .collect()
}

/// Convenience used by tests and the Python bindings: uniform-matroid
/// packing oracle over `n` elements.
pub fn uniform_oracle(n: usize, k: usize) -> PackingOracle {
    PackingOracle::UniformMatroid { n, k }
}
