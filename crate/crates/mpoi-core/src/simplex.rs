//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Small and self-contained: the commitment LPs have at most a few hundred
//! rows, and a fixed pivot order keeps solutions bit-reproducible.

/// Pivot tolerance; entries smaller than this count as zero.
pub const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// `optimize c.x` subject to rows `a.x (=|<=) b` and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub maximize: bool,
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    // m rows of width n_total + 1 (rhs last)
    rows: Vec<Vec<f64>>,
    // bottom row: reduced costs | -z
    bottom: Vec<f64>,
    basis: Vec<usize>,
    n_total: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..self.rows.len() {
            if i != r {
                let factor = self.rows[i][j];
                if factor.abs() > 0.0 {
                    for c in 0..=self.n_total {
                        self.rows[i][c] -= factor * self.rows[r][c];
                    }
                }
            }
        }
        let factor = self.bottom[j];
        if factor.abs() > 0.0 {
            for c in 0..=self.n_total {
                self.bottom[c] -= factor * self.rows[r][c];
            }
        }
        self.basis[r] = j;
    }

    /// Minimizes the bottom-row objective. `allowed` masks enterable columns.
    fn optimize(&mut self, allowed: &[bool]) -> LpStatus {
        loop {
            // Bland: lowest-index column with negative reduced cost
            let entering = (0..self.n_total).find(|&j| allowed[j] && self.bottom[j] < -PIVOT_TOL);
            let j = match entering {
                Some(j) => j,
                None => return LpStatus::Optimal,
            };
            // ratio test; ties resolved by the lowest basis index
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][j];
                if a > PIVOT_TOL {
                    let ratio = self.rows[r][self.n_total] / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - PIVOT_TOL
                                || (ratio < lratio + PIVOT_TOL && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, j),
                None => return LpStatus::Unbounded,
            }
        }
    }
}

/// Solves the program; `x` is meaningful only when the status is optimal.
pub fn solve(lp: &LinearProgram) -> SimplexSolution {
    let n = lp.n_vars;
    let m = lp.rows.len();

    // normalize: rhs >= 0, slacks for <=, artificials for = and flipped rows
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut needs_artificial = Vec::with_capacity(m);
    let mut slack_cols = 0usize;
    for (a, rel, b) in &lp.rows {
        let flip = *b < 0.0;
        let mut row: Vec<f64> = a.iter().map(|&v| if flip { -v } else { v }).collect();
        row.push(if flip { -b } else { *b });
        match (rel, flip) {
            (Relation::Le, false) => {
                needs_artificial.push(false);
                slack_cols += 1;
            }
            // flipped <= becomes >=: surplus plus artificial
            (Relation::Le, true) => {
                needs_artificial.push(true);
                slack_cols += 1;
            }
            (Relation::Eq, _) => needs_artificial.push(true),
        }
        coeffs.push(row);
    }

    let n_art: usize = needs_artificial.iter().filter(|&&x| x).count();
    let n_total = n + slack_cols + n_art;
    let mut rows = vec![vec![0.0; n_total + 1]; m];
    let mut basis = vec![0usize; m];
    let mut slack_at = n;
    let mut art_at = n + slack_cols;
    let mut artificial_cols = vec![false; n_total];
    for r in 0..m {
        for j in 0..n {
            rows[r][j] = coeffs[r][j];
        }
        rows[r][n_total] = coeffs[r][n];
        let (_, rel, b) = &lp.rows[r];
        let flipped = *b < 0.0;
        if *rel == Relation::Le {
            // slack (+1) or surplus (-1 after flip)
            rows[r][slack_at] = if flipped { -1.0 } else { 1.0 };
            if !flipped {
                basis[r] = slack_at;
            }
            slack_at += 1;
        }
        if needs_artificial[r] {
            rows[r][art_at] = 1.0;
            basis[r] = art_at;
            artificial_cols[art_at] = true;
            art_at += 1;
        }
    }

    let mut t = Tableau { rows, bottom: vec![0.0; n_total + 1], basis, n_total };

    // phase 1: minimize the sum of artificials
    if n_art > 0 {
        for j in 0..n_total {
            t.bottom[j] = if artificial_cols[j] { 1.0 } else { 0.0 };
        }
        t.bottom[n_total] = 0.0;
        for r in 0..m {
            if artificial_cols[t.basis[r]] {
                let row = t.rows[r].clone();
                for c in 0..=n_total {
                    t.bottom[c] -= row[c];
                }
            }
        }
        let allowed = vec![true; n_total];
        let status = t.optimize(&allowed);
        debug_assert_ne!(status, LpStatus::Unbounded);
        let infeas = -t.bottom[n_total];
        if infeas > 1e-7 {
            return SimplexSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; n],
                objective: 0.0,
            };
        }
        // drive leftover artificials out of the basis where possible
        for r in 0..m {
            if artificial_cols[t.basis[r]] {
                if let Some(j) =
                    (0..n_total).find(|&j| !artificial_cols[j] && t.rows[r][j].abs() > PIVOT_TOL)
                {
                    t.pivot(r, j);
                }
            }
        }
    }

    // phase 2: real objective (internally minimized)
    let sign = if lp.maximize { -1.0 } else { 1.0 };
    for j in 0..n_total {
        t.bottom[j] = if j < n { sign * lp.objective[j] } else { 0.0 };
    }
    t.bottom[n_total] = 0.0;
    {
        let basis_snapshot = t.basis.clone();
        for (r, &b) in basis_snapshot.iter().enumerate() {
            let c_b = if b < n { sign * lp.objective[b] } else { 0.0 };
            if c_b != 0.0 {
                let row = t.rows[r].clone();
                for c in 0..=n_total {
                    t.bottom[c] -= c_b * row[c];
                }
            }
        }
    }
    let allowed: Vec<bool> = (0..n_total).map(|j| !artificial_cols[j]).collect();
    let status = t.optimize(&allowed);
    if status == LpStatus::Unbounded {
        return SimplexSolution { status, x: vec![0.0; n], objective: 0.0 };
    }

    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rows[r][t.n_total];
        }
    }
    let objective: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    SimplexSolution { status: LpStatus::Optimal, x, objective }
}
