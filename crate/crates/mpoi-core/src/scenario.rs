//! Scenario files: JSON descriptions of systems, constraint, and objective,
//! resolved to validated in-memory structures with name/index maps.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::constraints::{ConstraintOracle, CoveringOracle, ElementSet, PackingOracle};
use crate::error::{Error, Result};
use crate::frugal::{
    default_covering_marginal, default_packing_marginal, MarginalValue, SemiadditiveObjective,
};
use crate::markov::{MarkovSystem, StateId, SystemSpec};

#[derive(Debug, Deserialize)]
struct SystemJson {
    name: String,
    states: Vec<String>,
    /// Rows `[from, to, probability]`; destination rows may be omitted.
    edges: Vec<(String, String, f64)>,
    start: String,
    /// Destination state name -> value.
    destinations: BTreeMap<String, f64>,
    /// Non-destination state name -> probing price.
    #[serde(default)]
    prices: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ConstraintJson {
    UniformMatroid { k: usize },
    PartitionMatroid { labels: Vec<usize>, capacities: Vec<usize> },
    GraphicMatroid { n_vertices: usize, endpoints: Vec<(usize, usize)> },
    Matching { n_vertices: usize, endpoints: Vec<(usize, usize)> },
    KSystem { matroids: Vec<ConstraintJson>, declared_rank: Option<usize> },
    MatroidBase { matroid: Box<ConstraintJson> },
    SetCover { universe_size: usize, covers: Vec<Vec<usize>> },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ObjectiveJson {
    Tag(String),
    Table { kind: String, h: Vec<(Vec<usize>, f64)> },
}

#[derive(Debug, Deserialize)]
struct ScenarioJson {
    #[serde(default)]
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default = "default_mode")]
    mode: String,
    systems: Vec<SystemJson>,
    constraint: ConstraintJson,
    #[serde(default)]
    objective: Option<ObjectiveJson>,
    /// Optional marginal-function override: additive | matching_greedy |
    /// set_cover_ratio | matroid_base_min.
    #[serde(default)]
    marginal_fn: Option<String>,
    /// Declared polynomial bound for the bounded-input assumption.
    #[serde(default)]
    assumption_b_bound: Option<f64>,
}

fn default_mode() -> String {
    "utimax".into()
}

/// Whether a scenario maximizes utility or minimizes disutility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameMode {
    UtiMax,
    DisMin,
}

/// A fully-resolved scenario: validated systems, constraint oracle,
/// objective, and the state-name maps that reports echo back.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub mode: GameMode,
    pub systems: Vec<MarkovSystem>,
    pub constraint: ConstraintOracle,
    pub objective: SemiadditiveObjective,
    pub marginal_override: Option<String>,
    /// Per-system state-name -> dense-index map.
    pub name_maps: Vec<BTreeMap<String, usize>>,
    pub warnings: Vec<String>,
}

impl Scenario {
    /// The packing oracle, when the constraint packs.
    pub fn packing(&self) -> Option<&PackingOracle> {
        match &self.constraint {
            ConstraintOracle::Packing(p) => Some(p),
            ConstraintOracle::Covering(_) => None,
        }
    }

    /// The covering oracle, when the constraint covers.
    pub fn covering(&self) -> Option<&CoveringOracle> {
        match &self.constraint {
            ConstraintOracle::Covering(c) => Some(c),
            ConstraintOracle::Packing(_) => None,
        }
    }

    /// Ceiling exceeding every proxy cost a covering run can see; the
    /// minimum-cost marginal needs one.
    pub fn cost_ceiling(&self) -> f64 {
        let mut c = 1.0f64;
        for ms in &self.systems {
            let b = ms.bound();
            let l = ms.classify().depth.unwrap_or(1_000_000) as f64;
            c = c.max(l * b + b + 1.0);
        }
        c
    }

    /// The marginal-value function: the override when given, else the
    /// default for the constraint kind.
    pub fn marginal(&self) -> Result<MarginalValue> {
        if let Some(tag) = &self.marginal_override {
            return match (tag.as_str(), &self.constraint) {
                ("additive", _) => Ok(MarginalValue::AdditivePacking),
                (
                    "matching_greedy",
                    ConstraintOracle::Packing(PackingOracle::Matching { endpoints, .. }),
                ) => Ok(MarginalValue::MatchingGreedy { endpoints: endpoints.clone() }),
                (
                    "set_cover_ratio",
                    ConstraintOracle::Covering(CoveringOracle::SetCover { universe_size, covers }),
                ) => Ok(MarginalValue::SetCoverRatio {
                    universe_size: *universe_size,
                    covers: covers.clone(),
                }),
                (
                    "matroid_base_min",
                    ConstraintOracle::Covering(CoveringOracle::MatroidBase { matroid }),
                ) => Ok(MarginalValue::MatroidBaseMin {
                    matroid: matroid.clone(),
                    cost_ceiling: self.cost_ceiling(),
                }),
                _ => Err(Error::Parse(format!(
                    "marginal_fn '{tag}' does not apply to this constraint"
                ))),
            };
        }
        Ok(match &self.constraint {
            ConstraintOracle::Packing(p) => default_packing_marginal(p),
            ConstraintOracle::Covering(c) => default_covering_marginal(c, self.cost_ceiling()),
        })
    }
}

fn build_constraint(json: &ConstraintJson, n_elements: usize) -> Result<ConstraintOracle> {
    fn packing(json: &ConstraintJson, n: usize) -> Result<PackingOracle> {
        match json {
            ConstraintJson::UniformMatroid { k } => Ok(PackingOracle::UniformMatroid { n, k: *k }),
            ConstraintJson::PartitionMatroid { labels, capacities } => {
                if labels.len() != n {
                    return Err(Error::Parse(format!(
                        "partition labels cover {} elements, scenario has {n}",
                        labels.len()
                    )));
                }
                if let Some(&bad) = labels.iter().find(|&&l| l >= capacities.len()) {
                    return Err(Error::Parse(format!("partition label {bad} has no capacity")));
                }
                Ok(PackingOracle::PartitionMatroid {
                    labels: labels.clone(),
                    capacities: capacities.clone(),
                })
            }
            ConstraintJson::GraphicMatroid { n_vertices, endpoints } => {
                if endpoints.len() != n {
                    return Err(Error::Parse(format!(
                        "graphic matroid has {} edges, scenario has {n} elements",
                        endpoints.len()
                    )));
                }
                Ok(PackingOracle::GraphicMatroid {
                    n_vertices: *n_vertices,
                    endpoints: endpoints.clone(),
                })
            }
            ConstraintJson::Matching { n_vertices, endpoints } => {
                if endpoints.len() != n {
                    return Err(Error::Parse(format!(
                        "matching has {} edges, scenario has {n} elements",
                        endpoints.len()
                    )));
                }
                Ok(PackingOracle::Matching {
                    n_vertices: *n_vertices,
                    endpoints: endpoints.clone(),
                })
            }
            ConstraintJson::KSystem { matroids, declared_rank } => Ok(PackingOracle::KSystem {
                matroids: matroids.iter().map(|m| packing(m, n)).collect::<Result<Vec<_>>>()?,
                declared_rank: *declared_rank,
            }),
            other => Err(Error::Parse(format!("expected a packing constraint, got {other:?}"))),
        }
    }
    match json {
        ConstraintJson::MatroidBase { matroid } => {
            Ok(ConstraintOracle::Covering(CoveringOracle::MatroidBase {
                matroid: packing(matroid, n_elements)?,
            }))
        }
        ConstraintJson::SetCover { universe_size, covers } => {
            if covers.len() != n_elements {
                return Err(Error::Parse(format!(
                    "set_cover lists {} sets, scenario has {n_elements} elements",
                    covers.len()
                )));
            }
            let covers: Vec<ElementSet> =
                covers.iter().map(|c| c.iter().copied().collect()).collect();
            Ok(ConstraintOracle::Covering(CoveringOracle::SetCover {
                universe_size: *universe_size,
                covers,
            }))
        }
        packing_kind => Ok(ConstraintOracle::Packing(packing(packing_kind, n_elements)?)),
    }
}

fn build_objective(json: &Option<ObjectiveJson>) -> Result<SemiadditiveObjective> {
    match json {
        None => Ok(SemiadditiveObjective::Additive),
        Some(ObjectiveJson::Tag(tag)) => match tag.as_str() {
            "additive" => Ok(SemiadditiveObjective::Additive),
            "set_cover" => Ok(SemiadditiveObjective::SetCover),
            other => Err(Error::Parse(format!("unknown objective '{other}'"))),
        },
        Some(ObjectiveJson::Table { kind, h }) => {
            if kind != "custom_table" {
                return Err(Error::Parse(format!("unknown objective kind '{kind}'")));
            }
            let table = h
                .iter()
                .map(|(set, v)| (set.iter().copied().collect::<ElementSet>(), *v))
                .collect();
            Ok(SemiadditiveObjective::CustomTable(table))
        }
    }
}

/// Parses and validates a scenario from JSON text.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let json: ScenarioJson = serde_json::from_str(text)?;
    let mode = match json.mode.as_str() {
        "utimax" => GameMode::UtiMax,
        "dismin" => GameMode::DisMin,
        other => return Err(Error::Parse(format!("unknown mode '{other}'"))),
    };

    let mut systems = Vec::new();
    let mut name_maps = Vec::new();
    let mut problems: Vec<String> = Vec::new();
    for (i, sj) in json.systems.iter().enumerate() {
        let mut name_map = BTreeMap::new();
        for (idx, s) in sj.states.iter().enumerate() {
            if name_map.insert(s.clone(), idx).is_some() {
                problems.push(format!("system {}: duplicate state name '{s}'", sj.name));
            }
        }
        let lookup =
            |name: &str| -> Option<StateId> { name_map.get(name).map(|&i| StateId(i as u32)) };
        let mut edges = vec![Vec::new(); sj.states.len()];
        for (from, to, p) in &sj.edges {
            match (lookup(from), lookup(to)) {
                (Some(f), Some(t)) => edges[f.idx()].push((t, *p)),
                _ => problems.push(format!(
                    "system {}: edge references unknown state '{from}' or '{to}'",
                    sj.name
                )),
            }
        }
        let start = match lookup(&sj.start) {
            Some(s) => s,
            None => {
                problems.push(format!("system {}: unknown start state '{}'", sj.name, sj.start));
                StateId(0)
            }
        };
        let mut destinations = Vec::new();
        let mut values = Vec::new();
        for (name, v) in &sj.destinations {
            match lookup(name) {
                Some(s) => {
                    destinations.push(s);
                    values.push((s, *v));
                }
                None => problems.push(format!("system {}: unknown destination '{name}'", sj.name)),
            }
        }
        let mut prices = Vec::new();
        for (name, p) in &sj.prices {
            match lookup(name) {
                Some(s) => prices.push((s, *p)),
                None => {
                    problems.push(format!("system {}: price for unknown state '{name}'", sj.name))
                }
            }
        }
        let spec = SystemSpec {
            name: sj.name.clone(),
            n_states: sj.states.len(),
            edges,
            start,
            destinations,
            prices,
            values,
        };
        match MarkovSystem::from_spec(spec) {
            Ok(ms) => systems.push(ms),
            Err(violations) => {
                for v in violations {
                    problems.push(format!("system {} ({i}): {v}", sj.name));
                }
            }
        }
        name_maps.push(name_map);
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let constraint = build_constraint(&json.constraint, systems.len())?;
    match (mode, &constraint) {
        (GameMode::UtiMax, ConstraintOracle::Covering(_)) => {
            return Err(Error::Validation(
                vec!["utimax mode requires a packing constraint".into()],
            ));
        }
        (GameMode::DisMin, ConstraintOracle::Packing(_)) => {
            return Err(Error::Validation(vec![
                "dismin mode requires a covering constraint".into()
            ]));
        }
        _ => {}
    }
    let objective = build_objective(&json.objective)?;

    // bounded-input warning (prices/values polynomial in instance size)
    let mut warnings = Vec::new();
    let b = systems.iter().map(|ms| ms.bound()).fold(0.0f64, f64::max);
    let k = constraint.max_selection_size().max(1);
    let d = systems.iter().map(|ms| ms.classify().depth.unwrap_or(1)).max().unwrap_or(1).max(1);
    let bound =
        json.assumption_b_bound.unwrap_or(10.0 * ((systems.len().max(1) * k * d) as f64).powi(2));
    if b > bound {
        warnings.push(format!(
            "AssumptionBViolated: price/value bound {b} exceeds the declared polynomial bound {bound}"
        ));
    }

    Ok(Scenario {
        name: json.name,
        description: json.description,
        mode,
        systems,
        constraint,
        objective,
        marginal_override: json.marginal_fn,
        name_maps,
        warnings,
    })
}

/// Loads a scenario from a file path.
pub fn load_scenario<P: AsRef<Path>>(path: P) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}
