//! Feasibility oracles for packing (downward-closed) and covering
//! (upward-closed) constraint families over ground elements `0..n`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub type ElementSet = BTreeSet<usize>;

/// Union-find for graphic-matroid cycle checks.
struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }

    /// Returns false if `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Downward-closed feasibility oracle: independence for the matroid kinds,
/// vertex-disjointness for matchings, joint independence for a k-system
/// (intersection of matroids).
#[derive(Debug, Clone)]
pub enum PackingOracle {
    UniformMatroid {
        n: usize,
        k: usize,
    },
    PartitionMatroid {
        labels: Vec<usize>,
        capacities: Vec<usize>,
    },
    /// Elements are edges of a graph; independent = forest.
    GraphicMatroid {
        n_vertices: usize,
        endpoints: Vec<(usize, usize)>,
    },
    /// Elements are edges; feasible = pairwise vertex-disjoint.
    Matching {
        n_vertices: usize,
        endpoints: Vec<(usize, usize)>,
    },
    KSystem {
        matroids: Vec<PackingOracle>,
        declared_rank: Option<usize>,
    },
}

impl PackingOracle {
    pub fn n_elements(&self) -> usize {
        match self {
            PackingOracle::UniformMatroid { n, .. } => *n,
            PackingOracle::PartitionMatroid { labels, .. } => labels.len(),
            PackingOracle::GraphicMatroid { endpoints, .. } => endpoints.len(),
            PackingOracle::Matching { endpoints, .. } => endpoints.len(),
            PackingOracle::KSystem { matroids, .. } => matroids[0].n_elements(),
        }
    }

    pub fn is_feasible(&self, s: &ElementSet) -> bool {
        match self {
            PackingOracle::UniformMatroid { n, k } => s.len() <= *k && s.iter().all(|&i| i < *n),
            PackingOracle::PartitionMatroid { labels, capacities } => {
                let mut counts = vec![0usize; capacities.len()];
                for &i in s {
                    if i >= labels.len() {
                        return false;
                    }
                    counts[labels[i]] += 1;
                    if counts[labels[i]] > capacities[labels[i]] {
                        return false;
                    }
                }
                true
            }
            PackingOracle::GraphicMatroid { n_vertices, endpoints } => {
                let mut dsu = Dsu::new(*n_vertices);
                for &i in s {
                    if i >= endpoints.len() {
                        return false;
                    }
                    let (a, b) = endpoints[i];
                    if !dsu.union(a, b) {
                        return false;
                    }
                }
                true
            }
            PackingOracle::Matching { endpoints, .. } => {
                let mut used = BTreeSet::new();
                for &i in s {
                    if i >= endpoints.len() {
                        return false;
                    }
                    let (a, b) = endpoints[i];
                    if !used.insert(a) || !used.insert(b) {
                        return false;
                    }
                }
                true
            }
            PackingOracle::KSystem { matroids, .. } => matroids.iter().all(|m| m.is_feasible(s)),
        }
    }

    /// Whether a feasible set stays feasible after adding `i`.
    pub fn can_extend(&self, s: &ElementSet, i: usize) -> Result<bool> {
        if !self.is_feasible(s) {
            return Err(Error::InfeasibleBase);
        }
        if s.contains(&i) {
            return Ok(false);
        }
        let mut with = s.clone();
        with.insert(i);
        Ok(self.is_feasible(&with))
    }

    /// Rank of the family: size of the largest feasible set. Matroid kinds use
    /// the greedy scan; matchings and k-systems fall back to exhaustive search
    /// for small ground sets and the declared bound otherwise.
    pub fn max_feasible_size(&self) -> usize {
        match self {
            PackingOracle::UniformMatroid { n, k } => (*k).min(*n),
            PackingOracle::PartitionMatroid { .. } | PackingOracle::GraphicMatroid { .. } => {
                self.greedy_rank()
            }
            PackingOracle::Matching { endpoints, .. } => {
                if endpoints.len() <= 20 {
                    self.exhaustive_rank()
                } else {
                    self.greedy_rank()
                }
            }
            PackingOracle::KSystem { matroids, declared_rank } => {
                if matroids[0].n_elements() <= 20 {
                    self.exhaustive_rank()
                } else {
                    declared_rank.unwrap_or_else(|| self.greedy_rank())
                }
            }
        }
    }

    fn greedy_rank(&self) -> usize {
        let mut s = ElementSet::new();
        for i in 0..self.n_elements() {
            if self.can_extend(&s, i).unwrap_or(false) {
                s.insert(i);
            }
        }
        s.len()
    }

    fn exhaustive_rank(&self) -> usize {
        fn go(o: &PackingOracle, s: &mut ElementSet, from: usize, best: &mut usize) {
            *best = (*best).max(s.len());
            for i in from..o.n_elements() {
                if o.can_extend(s, i).unwrap_or(false) {
                    s.insert(i);
                    go(o, s, i + 1, best);
                    s.remove(&i);
                }
            }
        }
        let mut best = 0;
        go(self, &mut ElementSet::new(), 0, &mut best);
        best
    }

    /// Matroid rank of an arbitrary subset (greedy scan; exact for the
    /// matroid kinds).
    pub fn rank_of(&self, s: &ElementSet) -> usize {
        let mut indep = ElementSet::new();
        for &i in s {
            if self.can_extend(&indep, i).unwrap_or(false) {
                indep.insert(i);
            }
        }
        indep.len()
    }
}

/// Upward-closed feasibility oracle: spanning sets of a matroid or covers of
/// a fixed universe.
#[derive(Debug, Clone)]
pub enum CoveringOracle {
    /// Feasible iff the set contains a base of the matroid.
    MatroidBase { matroid: PackingOracle },
    /// Elements are sets over `0..universe_size`; feasible iff their union is
    /// the whole universe.
    SetCover { universe_size: usize, covers: Vec<BTreeSet<usize>> },
}

impl CoveringOracle {
    pub fn n_elements(&self) -> usize {
        match self {
            CoveringOracle::MatroidBase { matroid } => matroid.n_elements(),
            CoveringOracle::SetCover { covers, .. } => covers.len(),
        }
    }

    pub fn is_feasible(&self, s: &ElementSet) -> bool {
        match self {
            CoveringOracle::MatroidBase { matroid } => {
                let full: ElementSet = (0..matroid.n_elements()).collect();
                matroid.rank_of(s) == matroid.rank_of(&full)
            }
            CoveringOracle::SetCover { universe_size, covers } => {
                let mut hit = vec![false; *universe_size];
                for &i in s {
                    for &x in &covers[i] {
                        hit[x] = true;
                    }
                }
                hit.iter().all(|&b| b)
            }
        }
    }

    /// Maximum number of element sets any universe point appears in; the `f`
    /// of the set-cover approximation bound. Zero for matroid bases.
    pub fn max_frequency(&self) -> usize {
        match self {
            CoveringOracle::MatroidBase { .. } => 0,
            CoveringOracle::SetCover { universe_size, covers } => (0..*universe_size)
                .map(|x| covers.iter().filter(|c| c.contains(&x)).count())
                .max()
                .unwrap_or(0),
        }
    }
}

/// A scenario's constraint: one of the two closure directions.
#[derive(Debug, Clone)]
pub enum ConstraintOracle {
    Packing(PackingOracle),
    Covering(CoveringOracle),
}

impl ConstraintOracle {
    pub fn n_elements(&self) -> usize {
        match self {
            ConstraintOracle::Packing(p) => p.n_elements(),
            ConstraintOracle::Covering(c) => c.n_elements(),
        }
    }

    pub fn is_feasible(&self, s: &ElementSet) -> bool {
        match self {
            ConstraintOracle::Packing(p) => p.is_feasible(s),
            ConstraintOracle::Covering(c) => c.is_feasible(s),
        }
    }

    /// `k` of the robustness parameters: rank for packing, full ground size
    /// for covering (every element may end up selected).
    pub fn max_selection_size(&self) -> usize {
        match self {
            ConstraintOracle::Packing(p) => p.max_feasible_size(),
            ConstraintOracle::Covering(c) => c.n_elements(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[usize]) -> ElementSet {
        xs.iter().copied().collect()
    }

    fn subsets(n: usize) -> impl Iterator<Item = ElementSet> {
        (0u32..(1 << n)).map(move |mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
    }

    #[test]
    fn uniform_matroid_feasibility() {
        let o = PackingOracle::UniformMatroid { n: 3, k: 2 };
        assert!(o.is_feasible(&set(&[0, 1])));
        assert!(!o.is_feasible(&set(&[0, 1, 2])));
        assert_eq!(o.max_feasible_size(), 2);
    }

    #[test]
    fn matching_shared_vertex_is_infeasible() {
        // path a - b - c: edges 0 = ab, 1 = bc
        let o = PackingOracle::Matching { n_vertices: 3, endpoints: vec![(0, 1), (1, 2)] };
        assert!(o.is_feasible(&set(&[0])));
        assert!(!o.is_feasible(&set(&[0, 1])));
    }

    #[test]
    fn set_cover_feasibility() {
        let o =
            CoveringOracle::SetCover { universe_size: 3, covers: vec![set(&[0, 1]), set(&[1, 2])] };
        assert!(o.is_feasible(&set(&[0, 1])));
        assert!(!o.is_feasible(&set(&[0])));
    }

    #[test]
    fn can_extend_matches_feasibility() {
        let o = PackingOracle::UniformMatroid { n: 3, k: 1 };
        assert!(o.can_extend(&set(&[]), 2).unwrap());
        assert!(!o.can_extend(&set(&[0]), 1).unwrap());

        let triangle = PackingOracle::GraphicMatroid {
            n_vertices: 3,
            endpoints: vec![(0, 1), (1, 2), (2, 0)],
        };
        assert!(!triangle.can_extend(&set(&[0, 1]), 2).unwrap());
        assert!(matches!(
            PackingOracle::Matching { n_vertices: 3, endpoints: vec![(0, 1), (1, 2)] }
                .can_extend(&set(&[0, 1]), 0),
            Err(Error::InfeasibleBase)
        ));
    }

    #[test]
    fn ranks_of_fixture_families() {
        assert_eq!(PackingOracle::UniformMatroid { n: 5, k: 3 }.max_feasible_size(), 3);
        // a tree with 4 edges is itself independent
        let tree = PackingOracle::GraphicMatroid {
            n_vertices: 5,
            endpoints: vec![(0, 1), (1, 2), (2, 3), (3, 4)],
        };
        assert_eq!(tree.max_feasible_size(), 4);
        // 4-cycle: maximum matching is two opposite edges
        let c4 = PackingOracle::Matching {
            n_vertices: 4,
            endpoints: vec![(0, 1), (1, 2), (2, 3), (3, 0)],
        };
        assert_eq!(c4.max_feasible_size(), 2);
    }

    #[test]
    fn closure_directions_hold_exhaustively() {
        let packers = [
            PackingOracle::UniformMatroid { n: 6, k: 3 },
            PackingOracle::PartitionMatroid {
                labels: vec![0, 0, 1, 1, 2, 2],
                capacities: vec![1, 2, 1],
            },
            PackingOracle::GraphicMatroid {
                n_vertices: 4,
                endpoints: vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 0), (1, 3)],
            },
            PackingOracle::Matching {
                n_vertices: 5,
                endpoints: vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)],
            },
        ];
        for o in &packers {
            assert!(o.is_feasible(&set(&[])));
            for s in subsets(6) {
                if o.is_feasible(&s) {
                    // every subset of a feasible set is feasible
                    for &drop in &s {
                        let mut smaller = s.clone();
                        smaller.remove(&drop);
                        assert!(o.is_feasible(&smaller));
                    }
                    for i in 0..6 {
                        if !s.contains(&i) {
                            assert_eq!(
                                o.can_extend(&s, i).unwrap(),
                                o.is_feasible(&{
                                    let mut t = s.clone();
                                    t.insert(i);
                                    t
                                })
                            );
                        }
                    }
                }
            }
        }

        let covers = [
            CoveringOracle::SetCover {
                universe_size: 4,
                covers: vec![set(&[0, 1]), set(&[1, 2]), set(&[2, 3]), set(&[3, 0]), set(&[1])],
            },
            CoveringOracle::MatroidBase {
                matroid: PackingOracle::GraphicMatroid {
                    n_vertices: 4,
                    endpoints: vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 0)],
                },
            },
        ];
        for o in &covers {
            let n = o.n_elements();
            let full: ElementSet = (0..n).collect();
            assert!(o.is_feasible(&full));
            for s in subsets(n) {
                if o.is_feasible(&s) {
                    for i in 0..n {
                        let mut bigger = s.clone();
                        bigger.insert(i);
                        assert!(o.is_feasible(&bigger));
                    }
                }
            }
        }
    }

    #[test]
    fn matroid_exchange_axiom_holds() {
        let matroids = [
            PackingOracle::UniformMatroid { n: 6, k: 3 },
            PackingOracle::PartitionMatroid {
                labels: vec![0, 0, 1, 1, 2, 2],
                capacities: vec![1, 2, 1],
            },
            PackingOracle::GraphicMatroid {
                n_vertices: 4,
                endpoints: vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 0), (1, 3)],
            },
        ];
        for m in &matroids {
            let indep: Vec<ElementSet> = subsets(6).filter(|s| m.is_feasible(s)).collect();
            for a in &indep {
                for b in &indep {
                    if a.len() < b.len() {
                        let found = b.difference(a).any(|&x| m.can_extend(a, x).unwrap());
                        assert!(found, "exchange fails for {a:?} vs {b:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn k_system_intersection_and_frequency() {
        let ks = PackingOracle::KSystem {
            matroids: vec![
                PackingOracle::UniformMatroid { n: 4, k: 2 },
                PackingOracle::PartitionMatroid {
                    labels: vec![0, 0, 1, 1],
                    capacities: vec![1, 2],
                },
            ],
            declared_rank: None,
        };
        assert!(ks.is_feasible(&set(&[0, 2])));
        assert!(!ks.is_feasible(&set(&[0, 1])));
        assert_eq!(ks.max_feasible_size(), 2);

        let sc = CoveringOracle::SetCover {
            universe_size: 3,
            covers: vec![set(&[0, 1]), set(&[1, 2]), set(&[1])],
        };
        assert_eq!(sc.max_frequency(), 3);
    }
}
