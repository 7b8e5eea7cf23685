//! Markov systems: absorbing chains with probing prices and destination values.
//!
//! A system is validated once at construction and immutable afterwards; all
//! sampling takes the generator by `&mut` so callers control the streams.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for a transition row to count as stochastic. Rows whose sum is
/// within this of 1 are renormalized exactly; anything further off is rejected.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Default per-trajectory step ceiling; exceeding it is an error, not a
/// silent truncation (guards near-degenerate cyclic systems).
pub const DEFAULT_STEP_CEILING: usize = 1_000_000;

/// Index of a state within one Markov system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

impl StateId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// One invariant violation found while validating a system description.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowNotStochastic { state: StateId, sum: f64 },
    UnreachableDestination { state: StateId },
    PriceMissing { state: StateId },
    ValueMissing { state: StateId },
    PriceOnDestination { state: StateId },
    ValueOnInterior { state: StateId },
    NegativePrice { state: StateId, price: f64 },
    BadProbability { state: StateId, prob: f64 },
    BadStart,
    NoDestinations,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::RowNotStochastic { state, sum } => {
                write!(f, "row of state {} sums to {sum}, not 1", state.0)
            }
            Violation::UnreachableDestination { state } => {
                write!(f, "state {} cannot reach any destination", state.0)
            }
            Violation::PriceMissing { state } => write!(f, "no price for state {}", state.0),
            Violation::ValueMissing { state } => {
                write!(f, "no value for destination {}", state.0)
            }
            Violation::PriceOnDestination { state } => {
                write!(f, "price given for destination state {}", state.0)
            }
            Violation::ValueOnInterior { state } => {
                write!(f, "value given for non-destination state {}", state.0)
            }
            Violation::NegativePrice { state, price } => {
                write!(f, "negative price {price} at state {}", state.0)
            }
            Violation::BadProbability { state, prob } => {
                write!(f, "probability {prob} out of [0,1] in row of state {}", state.0)
            }
            Violation::BadStart => write!(f, "start state index out of range"),
            Violation::NoDestinations => write!(f, "system has no destination states"),
        }
    }
}

/// Unvalidated description of a Markov system, as read from a scenario file.
/// Prices must be given exactly on non-destinations, values exactly on
/// destinations; destination rows may be omitted (self-loops are synthesized).
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub name: String,
    pub n_states: usize,
    /// Sparse rows: `edges[u]` lists (v, p_{u,v}) with p > 0.
    pub edges: Vec<Vec<(StateId, f64)>>,
    pub start: StateId,
    pub destinations: Vec<StateId>,
    /// (state, price) for non-destination states.
    pub prices: Vec<(StateId, f64)>,
    /// (state, value) for destination states.
    pub values: Vec<(StateId, f64)>,
}

/// A validated Markov system (Markov chain + prices + destination values).
///
/// Immutable after construction; shareable across threads.
#[derive(Debug, Clone)]
pub struct MarkovSystem {
    pub name: String,
    n_states: usize,
    edges: Vec<Vec<(StateId, f64)>>,
    start: StateId,
    is_destination: Vec<bool>,
    price: Vec<f64>,
    value: Vec<f64>,
}

/// DAG/cycle classification of a system's positive-probability graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub is_dag: bool,
    /// Longest path (edge count) from the start to any destination; absent
    /// for cyclic systems.
    pub depth: Option<usize>,
}

impl MarkovSystem {
    /// Validates a spec and builds the system, or reports every violated
    /// invariant with the offending state/row.
    pub fn from_spec(spec: SystemSpec) -> std::result::Result<Self, Vec<Violation>> {
        let violations = Self::validate_spec(&spec);
        if !violations.is_empty() {
            return Err(violations);
        }
        let n = spec.n_states;
        let mut is_destination = vec![false; n];
        for d in &spec.destinations {
            is_destination[d.idx()] = true;
        }
        let mut price = vec![0.0; n];
        for (s, p) in &spec.prices {
            price[s.idx()] = *p;
        }
        let mut value = vec![0.0; n];
        for (s, v) in &spec.values {
            value[s.idx()] = *v;
        }
        let mut edges = spec.edges;
        for (u, row) in edges.iter_mut().enumerate() {
            if is_destination[u] {
                // destination rows are never used; keep a self-loop for uniformity
                *row = vec![(StateId(u as u32), 1.0)];
            } else {
                let sum: f64 = row.iter().map(|(_, p)| p).sum();
                for (_, p) in row.iter_mut() {
                    *p /= sum;
                }
            }
        }
        Ok(MarkovSystem {
            name: spec.name,
            n_states: n,
            edges,
            start: spec.start,
            is_destination,
            price,
            value,
        })
    }

    /// Checks every invariant of Def. 1 on a raw spec and returns the list of
    /// violations (empty = OK).
    pub fn validate_spec(spec: &SystemSpec) -> Vec<Violation> {
        let n = spec.n_states;
        let mut out = Vec::new();
        if spec.start.idx() >= n {
            out.push(Violation::BadStart);
            return out;
        }
        if spec.destinations.is_empty() {
            out.push(Violation::NoDestinations);
        }
        let mut is_dest = vec![false; n];
        for d in spec.destinations.iter().filter(|d| d.idx() < n) {
            is_dest[d.idx()] = true;
        }

        for u in 0..n {
            let row = &spec.edges[u];
            for &(v, p) in row {
                if v.idx() >= n || !(0.0..=1.0 + ROW_SUM_TOL).contains(&p) {
                    out.push(Violation::BadProbability { state: StateId(u as u32), prob: p });
                }
            }
            if !is_dest[u] {
                let sum: f64 = row.iter().map(|(_, p)| p).sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    out.push(Violation::RowNotStochastic { state: StateId(u as u32), sum });
                }
            }
        }

        let mut has_price = vec![false; n];
        for (s, p) in &spec.prices {
            if s.idx() >= n {
                continue;
            }
            has_price[s.idx()] = true;
            if is_dest[s.idx()] {
                out.push(Violation::PriceOnDestination { state: *s });
            } else if *p < 0.0 {
                out.push(Violation::NegativePrice { state: *s, price: *p });
            }
        }
        let mut has_value = vec![false; n];
        for (s, _) in &spec.values {
            if s.idx() >= n {
                continue;
            }
            has_value[s.idx()] = true;
            if !is_dest[s.idx()] {
                out.push(Violation::ValueOnInterior { state: *s });
            }
        }
        for u in 0..n {
            if !is_dest[u] && !has_price[u] {
                out.push(Violation::PriceMissing { state: StateId(u as u32) });
            }
            if is_dest[u] && !has_value[u] {
                out.push(Violation::ValueMissing { state: StateId(u as u32) });
            }
        }

        // Every state must reach some destination with probability 1. With a
        // finite chain this is exactly: every state reaches T in the positive
        // edge graph (states that cannot are either on a trapped recurrent
        // class or lead only to such classes).
        let mut reaches = is_dest.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&u| is_dest[u]).collect();
        // reverse adjacency
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for u in 0..n {
            if is_dest[u] {
                continue;
            }
            for &(v, p) in &spec.edges[u] {
                if p > 0.0 && v.idx() < n {
                    rev[v.idx()].push(u);
                }
            }
        }
        while let Some(t) = queue.pop_front() {
            for &u in &rev[t] {
                if !reaches[u] {
                    reaches[u] = true;
                    queue.push_back(u);
                }
            }
        }
        for u in 0..n {
            if !reaches[u] {
                out.push(Violation::UnreachableDestination { state: StateId(u as u32) });
            }
        }
        out
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn is_destination(&self, u: StateId) -> bool {
        self.is_destination[u.idx()]
    }

    pub fn destinations(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.n_states).filter(|&u| self.is_destination[u]).map(|u| StateId(u as u32))
    }

    /// Probing price of a non-destination state (0 for destinations).
    pub fn price(&self, u: StateId) -> f64 {
        self.price[u.idx()]
    }

    /// Value at a destination state (0 for non-destinations).
    pub fn value(&self, u: StateId) -> f64 {
        self.value[u.idx()]
    }

    /// Outgoing positive-probability edges of `u`.
    pub fn row(&self, u: StateId) -> &[(StateId, f64)] {
        &self.edges[u.idx()]
    }

    /// Largest magnitude among prices and values.
    pub fn bound(&self) -> f64 {
        let p = self.price.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let v = self.value.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        p.max(v)
    }

    /// Smallest positive transition probability on a non-destination row.
    pub fn min_positive_prob(&self) -> f64 {
        let mut m = 1.0f64;
        for u in 0..self.n_states {
            if self.is_destination[u] {
                continue;
            }
            for &(_, p) in &self.edges[u] {
                if p > 0.0 {
                    m = m.min(p);
                }
            }
        }
        m
    }

    /// Returns a copy with every destination value negated. The grade of the
    /// negated system drives disutility minimization: its negation is the
    /// effective cost of finishing an element from a given state.
    pub fn negate_values(&self) -> MarkovSystem {
        let mut out = self.clone();
        for (u, v) in out.value.iter_mut().enumerate() {
            if out.is_destination[u] {
                *v = -*v;
            }
        }
        out
    }

    /// A copy with every transition probability nudged by at most `delta`
    /// (seeded signs, rows renormalized); the estimated world of the
    /// robustness model.
    pub fn perturbed<R: Rng>(&self, delta: f64, rng: &mut R) -> MarkovSystem {
        let mut out = self.clone();
        for u in 0..out.n_states {
            if out.is_destination[u] {
                continue;
            }
            let row = &mut out.edges[u];
            if row.len() < 2 {
                continue; // a single edge renormalizes back to 1
            }
            // alternating signs survive renormalization; a seeded flip varies
            // the direction per row
            let flip = if rng.random::<bool>() { 1.0 } else { -1.0 };
            for (e, (_, p)) in row.iter_mut().enumerate() {
                let sign = flip * if e % 2 == 0 { 1.0 } else { -1.0 };
                // keep probabilities strictly positive
                *p = (*p + sign * delta).max(*p * 0.5).max(1e-12);
            }
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            for (_, p) in row.iter_mut() {
                *p /= sum;
            }
        }
        out
    }

    /// DAG test on the positive-probability graph, plus the longest-path
    /// depth from the start when acyclic. Destination self-loops are ignored.
    pub fn classify(&self) -> Classification {
        let n = self.n_states;
        // iterative three-color DFS over non-destination edges
        let mut color = vec![0u8; n]; // 0 white, 1 gray, 2 black
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for root in 0..n {
            if color[root] != 0 {
                continue;
            }
            color[root] = 1;
            stack.push((root, 0));
            while let Some(&mut (u, ref mut ei)) = stack.last_mut() {
                let row: &[(StateId, f64)] =
                    if self.is_destination[u] { &[] } else { &self.edges[u] };
                if *ei < row.len() {
                    let v = row[*ei].0.idx();
                    *ei += 1;
                    match color[v] {
                        0 => {
                            color[v] = 1;
                            stack.push((v, 0));
                        }
                        1 => return Classification { is_dag: false, depth: None },
                        _ => {}
                    }
                } else {
                    color[u] = 2;
                    stack.pop();
                }
            }
        }
        // longest path from start; memoized over the DAG
        let mut memo = vec![None::<usize>; n];
        fn longest(ms: &MarkovSystem, u: usize, memo: &mut Vec<Option<usize>>) -> usize {
            if let Some(d) = memo[u] {
                return d;
            }
            let d = if ms.is_destination[u] {
                0
            } else {
                ms.edges[u].iter().map(|&(v, _)| 1 + longest(ms, v.idx(), memo)).max().unwrap_or(0)
            };
            memo[u] = Some(d);
            d
        }
        let depth = longest(self, self.start.idx(), &mut memo);
        Classification { is_dag: true, depth: Some(depth) }
    }

    /// One transition from `u` according to the transition row.
    pub fn sample_step<R: Rng>(&self, u: StateId, rng: &mut R) -> Result<StateId> {
        if self.is_destination(u) {
            return Err(Error::StepFromDestination(u));
        }
        let x: f64 = rng.random();
        let row = &self.edges[u.idx()];
        let mut acc = 0.0;
        for &(v, p) in row {
            acc += p;
            if x < acc {
                return Ok(v);
            }
        }
        // rounding residue: fall into the last positive edge
        Ok(row.last().expect("validated row is non-empty").0)
    }

    /// Full trajectory from the start to an absorbing destination.
    pub fn sample_trajectory<R: Rng>(
        &self,
        system_id: usize,
        rng: &mut R,
        step_ceiling: usize,
    ) -> Result<Trajectory> {
        let mut visited = vec![self.start];
        let mut u = self.start;
        while !self.is_destination(u) {
            if visited.len() > step_ceiling {
                return Err(Error::NonTerminating { system: system_id, ceiling: step_ceiling });
            }
            u = self.sample_step(u, rng)?;
            visited.push(u);
        }
        Ok(Trajectory { system_id, visited, terminated: true })
    }
}

/// One realized trajectory of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub system_id: usize,
    /// Visited states, starting at the system's start state.
    pub visited: Vec<StateId>,
    /// True iff the last visited state is a destination.
    pub terminated: bool,
}

impl Trajectory {
    pub fn last(&self) -> StateId {
        *self.visited.last().expect("trajectory is never empty")
    }

    /// Sum of prices over the visited non-destination states.
    pub fn total_price(&self, ms: &MarkovSystem) -> f64 {
        self.visited.iter().filter(|&&u| !ms.is_destination(u)).map(|&u| ms.price(u)).sum()
    }

    /// Checks the structural invariants against its system.
    pub fn check(&self, ms: &MarkovSystem) -> bool {
        if self.visited.is_empty() || self.visited[0] != ms.start() {
            return false;
        }
        for w in self.visited.windows(2) {
            if ms.is_destination(w[0]) {
                return false;
            }
            if !ms.row(w[0]).iter().any(|&(v, p)| v == w[1] && p > 0.0) {
                return false;
            }
        }
        self.terminated == ms.is_destination(self.last())
    }
}

/// One trajectory per ground element; the randomness carrier for surrogate
/// and replay computations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryProfile {
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryProfile {
    pub fn new(mut trajectories: Vec<Trajectory>) -> Self {
        trajectories.sort_by_key(|t| t.system_id);
        debug_assert!(trajectories.iter().enumerate().all(|(i, t)| t.system_id == i));
        TrajectoryProfile { trajectories }
    }

    /// Samples independent full trajectories for every system.
    pub fn sample<R: Rng>(
        systems: &[MarkovSystem],
        rngs: &mut [R],
        step_ceiling: usize,
    ) -> Result<Self> {
        let trajectories = systems
            .iter()
            .enumerate()
            .map(|(i, ms)| ms.sample_trajectory(i, &mut rngs[i], step_ceiling))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrajectoryProfile { trajectories })
    }

    pub fn get(&self, system_id: usize) -> &Trajectory {
        &self.trajectories[system_id]
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}
