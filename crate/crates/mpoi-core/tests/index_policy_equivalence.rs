//! Independent oracle for single-probe instances: the classical
//! reservation-index policy (probe the box of highest index; stop once the
//! best realized value beats every unprobed index; keep the best realized
//! value). Its exact expected utility must coincide with the grade-driven
//! adaptive strategy and with the DP optimum.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mpoi_core::constraints::{ConstraintOracle, PackingOracle};
use mpoi_core::error::Result;
use mpoi_core::frugal::{MarginalValue, SemiadditiveObjective};
use mpoi_core::grade::{grade_tables, weitzman_index, GradeSolver};
use mpoi_core::markov::{MarkovSystem, StateId, SystemSpec, TrajectoryProfile};
use mpoi_core::oracle::{
    exact_policy_value, optimal_policy_dp, AdaptiveUtiMax, DpMode, ReplayStrategy,
    DEFAULT_PROFILE_CAP, DEFAULT_STATE_CAP,
};

/// A single-probe box: one start state fanning straight into destinations.
struct Box_ {
    system: MarkovSystem,
    outcomes: Vec<(f64, f64)>,
    price: f64,
}

fn random_box(rng: &mut ChaCha8Rng, id: usize) -> Box_ {
    let k = rng.random_range(2..=3);
    // spread the outcomes so the probe surplus stays well away from zero
    let mut values: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
    values[0] += rng.random_range(2.0..6.0);
    let mut probs: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    let min_v = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let surplus: f64 = values.iter().zip(&probs).map(|(v, p)| p * (v - min_v)).sum();
    let price = rng.random_range(0.1..0.8) * surplus;

    let n = k + 1;
    let edges = vec![(1..n).map(|t| (StateId(t as u32), probs[t - 1])).collect::<Vec<_>>()]
        .into_iter()
        .chain((1..n).map(|_| Vec::new()))
        .collect();
    let system = MarkovSystem::from_spec(SystemSpec {
        name: format!("box{id}"),
        n_states: n,
        edges,
        start: StateId(0),
        destinations: (1..n).map(|t| StateId(t as u32)).collect(),
        prices: vec![(StateId(0), price)],
        values: (1..n).map(|t| (StateId(t as u32), values[t - 1])).collect(),
    })
    .unwrap();
    Box_ { system, outcomes: values.into_iter().zip(probs).collect(), price }
}

/// The classical sequential-search policy as a replayable strategy.
struct IndexPolicy<'a> {
    boxes: &'a [Box_],
    indices: Vec<f64>,
}

impl ReplayStrategy for IndexPolicy<'_> {
    fn utility(&self, profile: &TrajectoryProfile) -> Result<f64> {
        let n = self.boxes.len();
        let mut probed = vec![false; n];
        let mut best_realized = 0.0f64; // selecting nothing is worth 0
        let mut paid = 0.0;
        loop {
            let next = (0..n).filter(|&i| !probed[i]).max_by(|&a, &b| {
                self.indices[a].partial_cmp(&self.indices[b]).unwrap().then(b.cmp(&a))
                // lowest id on ties
            });
            match next {
                Some(j) if self.indices[j] > best_realized => {
                    probed[j] = true;
                    paid += self.boxes[j].price;
                    let landed = profile.get(j).last();
                    best_realized = best_realized.max(self.boxes[j].system.value(landed));
                }
                _ => return Ok(best_realized - paid),
            }
        }
    }
}

#[test]
fn index_policy_adaptive_strategy_and_dp_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let solver = GradeSolver::with_tol(1e-12);
    let objective = SemiadditiveObjective::Additive;
    for trial in 0..60 {
        let n = rng.random_range(2..=4);
        let boxes: Vec<Box_> = (0..n).map(|i| random_box(&mut rng, i)).collect();
        let systems: Vec<MarkovSystem> = boxes.iter().map(|b| b.system.clone()).collect();
        let oracle = PackingOracle::UniformMatroid { n, k: 1 };
        let constraint = ConstraintOracle::Packing(oracle.clone());

        // reservation indices from the fair-probe equation; cross-checked
        // against the start grades
        let grades = grade_tables(&systems, &solver).unwrap();
        let indices: Vec<f64> = boxes
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let w = weitzman_index(&b.outcomes, b.price, 1e-12).unwrap();
                let g = grades[i].grade(StateId(0));
                assert!((w - g).abs() <= 2e-12, "trial {trial} box {i}: {w} vs {g}");
                w
            })
            .collect();

        let classic = IndexPolicy { boxes: &boxes, indices };
        let v_classic = exact_policy_value(&systems, &classic, DEFAULT_PROFILE_CAP).unwrap();

        let adaptive = AdaptiveUtiMax {
            systems: &systems,
            oracle: &oracle,
            g: &MarginalValue::AdditivePacking,
            grades: &grades,
            objective: &objective,
        };
        let v_adaptive = exact_policy_value(&systems, &adaptive, DEFAULT_PROFILE_CAP).unwrap();

        let dp =
            optimal_policy_dp(&systems, &constraint, &objective, DpMode::UtiMax, DEFAULT_STATE_CAP)
                .unwrap();

        assert!(
            (v_classic - dp.optimal_value).abs() <= 1e-9,
            "trial {trial}: index policy {v_classic} vs OPT {}",
            dp.optimal_value
        );
        assert!(
            (v_adaptive - v_classic).abs() <= 1e-9,
            "trial {trial}: adaptive {v_adaptive} vs index policy {v_classic}"
        );
    }
}
