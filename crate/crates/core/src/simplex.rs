//! Dense two-phase simplex with Bland's rule.
//!
//! Every LP in this crate is tiny (a few hundred rows at most), so the
//! tableau is kept dense and pivoting favours robustness over speed.
//! Unboundedness is a first-class outcome: it is how an immediate profit
//! shows up when a super-replication LP is solved.

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// Result of solving a minimisation LP.
#[derive(Debug, Clone)]
pub enum LpOutcome {
    /// Optimal objective and the values of the builder variables.
    Optimal { objective: f64, solution: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { objective, .. } => Some(*objective),
            _ => None,
        }
    }
}

/// Handle for a variable added to an [`LpBuilder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

impl VarId {
    /// Position of the variable in an [`LpOutcome`] solution vector.
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct RawRow {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

/// Incremental construction of a minimisation LP.
///
/// Variables are non-negative or free; free variables are split into a
/// difference of two non-negative columns before the tableau is built.
#[derive(Debug, Clone, Default)]
pub struct LpBuilder {
    costs: Vec<f64>,
    is_free: Vec<bool>,
    rows: Vec<RawRow>,
}

const TOL: f64 = 1e-9;
/// Reduced-cost level below which an all-nonpositive column certifies
/// unboundedness; smaller negative costs on dead columns are roundoff.
const HARD_TOL: f64 = 1e-6;
const MAX_PIVOTS: usize = 200_000;

impl LpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable constrained to x >= 0.
    pub fn nonneg(&mut self, cost: f64) -> VarId {
        self.costs.push(cost);
        self.is_free.push(false);
        VarId(self.costs.len() - 1)
    }

    /// Adds an unrestricted variable.
    pub fn free(&mut self, cost: f64) -> VarId {
        self.costs.push(cost);
        self.is_free.push(true);
        VarId(self.costs.len() - 1)
    }

    pub fn constraint(&mut self, terms: &[(VarId, f64)], relation: Relation, rhs: f64) {
        self.rows.push(RawRow {
            coeffs: terms.iter().map(|&(v, c)| (v.0, c)).collect(),
            relation,
            rhs,
        });
    }

    /// Solves `min c.x` subject to the accumulated constraints.
    pub fn solve(&self) -> LpOutcome {
        // Map builder variables to standard-form columns.
        let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(self.costs.len());
        let mut n_struct = 0usize;
        for &free in &self.is_free {
            if free {
                col_of.push((n_struct, Some(n_struct + 1)));
                n_struct += 2;
            } else {
                col_of.push((n_struct, None));
                n_struct += 1;
            }
        }

        let mut costs = vec![0.0; n_struct];
        for (v, &c) in self.costs.iter().enumerate() {
            let (p, m) = col_of[v];
            costs[p] = c;
            if let Some(m) = m {
                costs[m] = -c;
            }
        }

        let m = self.rows.len();
        let n_slack = self
            .rows
            .iter()
            .filter(|r| r.relation != Relation::Eq)
            .count();
        // Worst case one artificial per row.
        let ncols = n_struct + n_slack + m;
        let mut tab = vec![vec![0.0; ncols + 1]; m];
        let mut basis = vec![usize::MAX; m];
        let mut slack_idx = n_struct;
        let mut art_idx = n_struct + n_slack;
        let mut n_art = 0usize;

        for (i, row) in self.rows.iter().enumerate() {
            let flip = row.rhs < 0.0;
            let sign = if flip { -1.0 } else { 1.0 };
            for &(v, c) in &row.coeffs {
                let (p, mcol) = col_of[v];
                tab[i][p] += sign * c;
                if let Some(mcol) = mcol {
                    tab[i][mcol] -= sign * c;
                }
            }
            tab[i][ncols] = sign * row.rhs;
            // Row equilibration keeps elimination roundoff at the unit
            // scale regardless of the data's price units.
            let scale = tab[i][..n_struct]
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs()));
            if scale > 0.0 {
                for v in tab[i].iter_mut() {
                    *v /= scale;
                }
            }
            let relation = match (row.relation, flip) {
                (Relation::Eq, _) => Relation::Eq,
                (Relation::Le, false) | (Relation::Ge, true) => Relation::Le,
                (Relation::Ge, false) | (Relation::Le, true) => Relation::Ge,
            };
            match relation {
                Relation::Le => {
                    tab[i][slack_idx] = 1.0;
                    basis[i] = slack_idx;
                    slack_idx += 1;
                }
                Relation::Ge => {
                    tab[i][slack_idx] = -1.0;
                    slack_idx += 1;
                    tab[i][art_idx] = 1.0;
                    basis[i] = art_idx;
                    art_idx += 1;
                    n_art += 1;
                }
                Relation::Eq => {
                    tab[i][art_idx] = 1.0;
                    basis[i] = art_idx;
                    art_idx += 1;
                    n_art += 1;
                }
            }
        }
        let art_lo = n_struct + n_slack;
        let art_hi = art_lo + n_art;

        // Objective rows, kept canonical under pivoting. Entry `ncols` is
        // minus the current objective value.
        let mut z = vec![0.0; ncols + 1];
        z[..n_struct].copy_from_slice(&costs);

        if n_art > 0 {
            let mut w = vec![0.0; ncols + 1];
            for j in art_lo..art_hi {
                w[j] = 1.0;
            }
            for i in 0..m {
                if basis[i] >= art_lo {
                    for j in 0..=ncols {
                        w[j] -= tab[i][j];
                    }
                }
            }
            if !run_simplex(&mut tab, &mut basis, &mut w, Some(&mut z), ncols, 0, true) {
                // Phase 1 of a feasibility problem cannot be unbounded.
                unreachable!("phase-1 LP reported unbounded");
            }
            if -w[ncols] > 1e-7 {
                return LpOutcome::Infeasible;
            }
            // Drive leftover artificials out of the basis or drop their rows.
            let mut drop_rows = Vec::new();
            for i in 0..m {
                if basis[i] >= art_lo {
                    let mut pivot_col = None;
                    let mut best = TOL;
                    for (j, &coef) in tab[i].iter().enumerate().take(art_lo) {
                        if coef.abs() > best {
                            best = coef.abs();
                            pivot_col = Some(j);
                        }
                    }
                    match pivot_col {
                        Some(c) => pivot(&mut tab, &mut basis, &mut z, i, c, ncols),
                        None => drop_rows.push(i),
                    }
                }
            }
            for &i in drop_rows.iter().rev() {
                tab.remove(i);
                basis.remove(i);
            }
            // Blank artificial columns so they can never re-enter.
            for row in tab.iter_mut() {
                for j in art_lo..art_hi {
                    row[j] = 0.0;
                }
            }
            for j in art_lo..art_hi {
                z[j] = 0.0;
            }
        }

        if !run_simplex(&mut tab, &mut basis, &mut z, None, ncols, art_lo, false) {
            return LpOutcome::Unbounded;
        }

        let mut x = vec![0.0; ncols];
        for (i, &b) in basis.iter().enumerate() {
            x[b] = tab[i][ncols];
        }
        let solution = col_of
            .iter()
            .map(|&(p, mcol)| x[p] - mcol.map_or(0.0, |mc| x[mc]))
            .collect();
        LpOutcome::Optimal {
            objective: -z[ncols],
            solution,
        }
    }
}

/// Runs Bland-rule simplex iterations on the canonical tableau.
///
/// `col_limit` restricts entering columns to `0..col_limit` when non-zero
/// (used in phase 2 to lock out artificials). Returns false on
/// unboundedness.
///
/// A column with negative reduced cost but no usable pivot is an
/// unbounded ray only when the cost is solidly negative; at roundoff
/// level it is a dead column and gets skipped. Phase 1 is bounded by
/// construction, so there every dead column is skipped.
#[allow(clippy::too_many_arguments)]
fn run_simplex(
    tab: &mut [Vec<f64>],
    basis: &mut [usize],
    obj: &mut [f64],
    mut shadow: Option<&mut Vec<f64>>,
    ncols: usize,
    col_limit: usize,
    phase1: bool,
) -> bool {
    let limit = if col_limit == 0 { ncols } else { col_limit };
    for _ in 0..MAX_PIVOTS {
        // Bland: entering = lowest-index negative-cost column that admits
        // a pivot.
        let mut pick: Option<(usize, usize)> = None;
        'scan: for j in 0..limit {
            if obj[j] >= -TOL {
                continue;
            }
            // Ratio test; ties broken by the lowest basic-variable index.
            let mut row: Option<usize> = None;
            let mut best = f64::INFINITY;
            for i in 0..tab.len() {
                let a = tab[i][j];
                if a > TOL {
                    let ratio = tab[i][ncols] / a;
                    let better = ratio < best - TOL
                        || (ratio < best + TOL && row.map_or(true, |r| basis[i] < basis[r]));
                    if better {
                        best = ratio.min(best);
                        row = Some(i);
                    }
                }
            }
            match row {
                Some(r) => {
                    pick = Some((r, j));
                    break 'scan;
                }
                None if !phase1 && obj[j] < -HARD_TOL => return false,
                None => {} // dead column at roundoff level
            }
        }
        let (r, c) = match pick {
            Some(rc) => rc,
            None => return true,
        };
        let piv = tab[r][c];
        for v in tab[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..tab.len() {
            if i != r {
                eliminate(tab, r, i, c, ncols);
            }
        }
        reduce_row(obj, &tab[r], c, ncols);
        if let Some(sh) = shadow.as_deref_mut() {
            reduce_row(sh, &tab[r], c, ncols);
        }
        basis[r] = c;
    }
    panic!("simplex exceeded {MAX_PIVOTS} pivots");
}

fn eliminate(tab: &mut [Vec<f64>], r: usize, i: usize, c: usize, ncols: usize) {
    let factor = tab[i][c];
    if factor == 0.0 {
        return;
    }
    let (pivot_row, target) = if i < r {
        let (a, b) = tab.split_at_mut(r);
        (&b[0], &mut a[i])
    } else {
        let (a, b) = tab.split_at_mut(i);
        (&a[r], &mut b[0])
    };
    for j in 0..=ncols {
        target[j] -= factor * pivot_row[j];
    }
    target[c] = 0.0;
}

fn reduce_row(obj: &mut [f64], pivot_row: &[f64], c: usize, ncols: usize) {
    let factor = obj[c];
    if factor == 0.0 {
        return;
    }
    for j in 0..=ncols {
        obj[j] -= factor * pivot_row[j];
    }
    obj[c] = 0.0;
}

fn pivot(
    tab: &mut [Vec<f64>],
    basis: &mut [usize],
    z: &mut Vec<f64>,
    r: usize,
    c: usize,
    ncols: usize,
) {
    let piv = tab[r][c];
    for v in tab[r].iter_mut() {
        *v /= piv;
    }
    for i in 0..tab.len() {
        if i != r {
            eliminate(tab, r, i, c, ncols);
        }
    }
    reduce_row(z, &tab[r], c, ncols);
    basis[r] = c;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn bounded_minimum() {
        // min -x - 2y s.t. x + y <= 4, x <= 2, x,y >= 0 -> x=0? no: -x-2y
        // optimum at x=0,y=4 -> -8.
        let mut lp = LpBuilder::new();
        let x = lp.nonneg(-1.0);
        let y = lp.nonneg(-2.0);
        lp.constraint(&[(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
        lp.constraint(&[(x, 1.0)], Relation::Le, 2.0);
        match lp.solve() {
            LpOutcome::Optimal {
                objective,
                solution,
            } => {
                assert_close(objective, -8.0);
                assert_close(solution[0], 0.0);
                assert_close(solution[1], 4.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn equality_and_free_vars() {
        // min a*100 + b s.t. 80a + b >= 0, 120a + b >= 20: the call-envelope LP.
        let mut lp = LpBuilder::new();
        let a = lp.free(100.0);
        let b = lp.free(1.0);
        lp.constraint(&[(a, 80.0), (b, 1.0)], Relation::Ge, 0.0);
        lp.constraint(&[(a, 120.0), (b, 1.0)], Relation::Ge, 20.0);
        match lp.solve() {
            LpOutcome::Optimal {
                objective,
                solution,
            } => {
                assert_close(objective, 10.0);
                assert_close(solution[0], 0.5);
                assert_close(solution[1], -40.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LpBuilder::new();
        let x = lp.nonneg(1.0);
        lp.constraint(&[(x, 1.0)], Relation::Le, 1.0);
        lp.constraint(&[(x, 1.0)], Relation::Ge, 2.0);
        assert!(matches!(lp.solve(), LpOutcome::Infeasible));
    }

    #[test]
    fn detects_unbounded() {
        // min x with x free and a one-sided constraint.
        let mut lp = LpBuilder::new();
        let x = lp.free(1.0);
        lp.constraint(&[(x, 1.0)], Relation::Le, 5.0);
        assert!(matches!(lp.solve(), LpOutcome::Unbounded));
    }

    #[test]
    fn feasibility_problem_with_equalities() {
        // q1 + q2 = 1, 80 q1 + 120 q2 = 100 -> q = (1/2, 1/2).
        let mut lp = LpBuilder::new();
        let q1 = lp.nonneg(0.0);
        let q2 = lp.nonneg(0.0);
        lp.constraint(&[(q1, 1.0), (q2, 1.0)], Relation::Eq, 1.0);
        lp.constraint(&[(q1, 80.0), (q2, 120.0)], Relation::Eq, 100.0);
        match lp.solve() {
            LpOutcome::Optimal { solution, .. } => {
                assert_close(solution[0], 0.5);
                assert_close(solution[1], 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_rhs_is_normalised() {
        // min x s.t. -x <= -3  (i.e. x >= 3)
        let mut lp = LpBuilder::new();
        let x = lp.nonneg(1.0);
        lp.constraint(&[(x, -1.0)], Relation::Le, -3.0);
        match lp.solve() {
            LpOutcome::Optimal {
                objective,
                solution,
            } => {
                assert_close(objective, 3.0);
                assert_close(solution[0], 3.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
