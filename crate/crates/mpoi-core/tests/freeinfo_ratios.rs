//! Desk-scale approximation-ratio harness: the frugal algorithms against
//! exhaustive optima in the free-information world, and the adaptive
//! strategies against the DP optimum in the Markovian world.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mpoi_core::constraints::{ConstraintOracle, CoveringOracle, ElementSet, PackingOracle};
use mpoi_core::frugal::{
    best_feasible_subset, default_covering_marginal, run_frugal_covering, run_frugal_packing,
    MarginalValue, SemiadditiveObjective,
};
use mpoi_core::grade::{dismin_grade_tables, grade_tables, GradeSolver};
use mpoi_core::markov::{MarkovSystem, StateId, SystemSpec};
use mpoi_core::oracle::{
    exact_policy_value, optimal_policy_dp, AdaptiveDisMin, AdaptiveUtiMax, DpMode,
    DEFAULT_PROFILE_CAP, DEFAULT_STATE_CAP,
};

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

fn random_matroid(rng: &mut ChaCha8Rng, n: usize) -> PackingOracle {
    match rng.random_range(0..3) {
        0 => PackingOracle::UniformMatroid { n, k: rng.random_range(1..=n) },
        1 => {
            let parts = rng.random_range(1..=3.min(n));
            PackingOracle::PartitionMatroid {
                labels: (0..n).map(|i| i % parts).collect(),
                capacities: (0..parts).map(|_| rng.random_range(1..=2)).collect(),
            }
        }
        _ => {
            let verts = rng.random_range(3..=4);
            PackingOracle::GraphicMatroid {
                n_vertices: verts,
                endpoints: (0..n)
                    .map(|_| {
                        let a = rng.random_range(0..verts);
                        let mut b = rng.random_range(0..verts);
                        while b == a {
                            b = rng.random_range(0..verts);
                        }
                        (a, b)
                    })
                    .collect(),
            }
        }
    }
}

#[test]
fn matroid_greedy_is_exhaustively_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let obj = SemiadditiveObjective::Additive;
    for trial in 0..200 {
        let n = rng.random_range(2..=6);
        let oracle = random_matroid(&mut rng, n);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..6.0)).collect();
        let greedy = run_frugal_packing(&MarginalValue::AdditivePacking, &oracle, &y);
        let greedy_val = obj.evaluate(&greedy, &y);
        let allowed: ElementSet = (0..n).collect();
        let constraint = ConstraintOracle::Packing(oracle.clone());
        let (opt, _) = best_feasible_subset(&constraint, &obj, &y, &allowed).unwrap();
        // greedy never selects negatives, so compare against the optimum
        // over the same value floor
        let opt = opt.max(0.0);
        assert!(
            (greedy_val - opt).abs() <= 1e-12,
            "trial {trial}: greedy {greedy_val} vs optimum {opt}"
        );
    }
}

#[test]
fn matching_greedy_is_half_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let obj = SemiadditiveObjective::Additive;
    for trial in 0..200 {
        let n = rng.random_range(2..=6);
        let verts = rng.random_range(3..=5);
        let endpoints: Vec<(usize, usize)> = (0..n)
            .map(|_| {
                let a = rng.random_range(0..verts);
                let mut b = rng.random_range(0..verts);
                while b == a {
                    b = rng.random_range(0..verts);
                }
                (a, b)
            })
            .collect();
        let oracle = PackingOracle::Matching { n_vertices: verts, endpoints: endpoints.clone() };
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let g = MarginalValue::MatchingGreedy { endpoints };
        let greedy_val = obj.evaluate(&run_frugal_packing(&g, &oracle, &y), &y);
        let allowed: ElementSet = (0..n).collect();
        let constraint = ConstraintOracle::Packing(oracle);
        let (opt, _) = best_feasible_subset(&constraint, &obj, &y, &allowed).unwrap();
        assert!(
            greedy_val >= 0.5 * opt - 1e-12,
            "trial {trial}: greedy {greedy_val} below half of {opt}"
        );
    }
}

#[test]
fn set_cover_greedy_within_log_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let obj = SemiadditiveObjective::SetCover;
    for trial in 0..200 {
        let universe = rng.random_range(2..=5);
        let n = rng.random_range(2..=6);
        let mut covers: Vec<ElementSet> =
            (0..n).map(|_| (0..universe).filter(|_| rng.random::<f64>() < 0.5).collect()).collect();
        for x in 0..universe {
            if !covers.iter().any(|c| c.contains(&x)) {
                let i = rng.random_range(0..n);
                covers[i].insert(x);
            }
        }
        let oracle = CoveringOracle::SetCover { universe_size: universe, covers: covers.clone() };
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..4.0)).collect();
        let g = MarginalValue::SetCoverRatio { universe_size: universe, covers };
        let greedy_val = obj.evaluate(&run_frugal_covering(&g, &oracle, &y).unwrap(), &y);
        let allowed: ElementSet = (0..n).collect();
        let constraint = ConstraintOracle::Covering(oracle.clone());
        let (opt, _) = best_feasible_subset(&constraint, &obj, &y, &allowed).unwrap();
        let f = oracle.max_frequency() as f64;
        let bound = f.min(harmonic(universe));
        assert!(
            greedy_val <= bound * opt + 1e-9,
            "trial {trial}: greedy {greedy_val} above {bound} * {opt}"
        );
    }
}

fn random_box(rng: &mut ChaCha8Rng, id: usize) -> MarkovSystem {
    let hi = rng.random_range(2.0..8.0);
    let lo = rng.random_range(0.0..1.5);
    let p = rng.random_range(0.2..0.8);
    MarkovSystem::from_spec(SystemSpec {
        name: format!("box{id}"),
        n_states: 3,
        edges: vec![vec![(StateId(1), p), (StateId(2), 1.0 - p)], vec![], vec![]],
        start: StateId(0),
        destinations: vec![StateId(1), StateId(2)],
        prices: vec![(StateId(0), rng.random_range(0.05..0.8))],
        values: vec![(StateId(1), hi), (StateId(2), lo)],
    })
    .unwrap()
}

#[test]
fn adaptive_matching_is_half_optimal_in_the_markov_world() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let obj = SemiadditiveObjective::Additive;
    let solver = GradeSolver::with_tol(1e-12);
    for trial in 0..50 {
        let n = rng.random_range(2..=4);
        let verts = 4;
        let endpoints: Vec<(usize, usize)> = (0..n)
            .map(|_| {
                let a = rng.random_range(0..verts);
                let mut b = rng.random_range(0..verts);
                while b == a {
                    b = rng.random_range(0..verts);
                }
                (a, b)
            })
            .collect();
        let systems: Vec<MarkovSystem> = (0..n).map(|i| random_box(&mut rng, i)).collect();
        let oracle = PackingOracle::Matching { n_vertices: verts, endpoints: endpoints.clone() };
        let constraint = ConstraintOracle::Packing(oracle.clone());
        let grades = grade_tables(&systems, &solver).unwrap();
        let g = MarginalValue::MatchingGreedy { endpoints };
        let strat = AdaptiveUtiMax {
            systems: &systems,
            oracle: &oracle,
            g: &g,
            grades: &grades,
            objective: &obj,
        };
        let v = exact_policy_value(&systems, &strat, DEFAULT_PROFILE_CAP).unwrap();
        let dp = optimal_policy_dp(&systems, &constraint, &obj, DpMode::UtiMax, DEFAULT_STATE_CAP)
            .unwrap();
        assert!(
            v >= 0.5 * dp.optimal_value - 1e-9,
            "trial {trial}: adaptive {v} below half of OPT {}",
            dp.optimal_value
        );
        assert!(v <= dp.optimal_value + 1e-9, "trial {trial}: adaptive {v} beats OPT");
    }
}

#[test]
fn adaptive_set_cover_within_log_bound_in_the_markov_world() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let obj = SemiadditiveObjective::SetCover;
    let solver = GradeSolver::with_tol(1e-12);
    for trial in 0..50 {
        let universe = rng.random_range(2..=4);
        let n = rng.random_range(2..=4);
        let mut covers: Vec<ElementSet> =
            (0..n).map(|_| (0..universe).filter(|_| rng.random::<f64>() < 0.5).collect()).collect();
        for x in 0..universe {
            if !covers.iter().any(|c| c.contains(&x)) {
                let i = rng.random_range(0..n);
                covers[i].insert(x);
            }
        }
        let systems: Vec<MarkovSystem> = (0..n).map(|i| random_box(&mut rng, i)).collect();
        let oracle = CoveringOracle::SetCover { universe_size: universe, covers: covers.clone() };
        let constraint = ConstraintOracle::Covering(oracle.clone());
        let ceiling = systems
            .iter()
            .map(|ms| {
                let d = ms.classify().depth.unwrap() as f64;
                d * ms.bound() + ms.bound() + 1.0
            })
            .fold(1.0f64, f64::max);
        let grades = dismin_grade_tables(&systems, &solver).unwrap();
        let g = default_covering_marginal(&oracle, ceiling);
        let strat = AdaptiveDisMin {
            systems: &systems,
            oracle: &oracle,
            g: &g,
            grades: &grades,
            objective: &obj,
        };
        let v = exact_policy_value(&systems, &strat, DEFAULT_PROFILE_CAP).unwrap();
        let dp = optimal_policy_dp(&systems, &constraint, &obj, DpMode::DisMin, DEFAULT_STATE_CAP)
            .unwrap();
        let f = oracle.max_frequency() as f64;
        let bound = f.min(harmonic(universe)).max(1.0);
        assert!(
            v <= bound * dp.optimal_value + 1e-9,
            "trial {trial}: adaptive {v} above {bound} * OPT {}",
            dp.optimal_value
        );
        assert!(v >= dp.optimal_value - 1e-9, "trial {trial}: adaptive {v} beats OPT");
    }
}
