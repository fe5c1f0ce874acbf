//! Restricted master problem: a set-partitioning LP over the column pool,
//!
//!   min  sum_p cost_p x_p
//!   s.t. sum_p coeff_{k,p} x_p = 1   for every customer row k
//!        x >= 0
//!
//! solved by a bundled revised simplex over a dense basis inverse. The pool
//! is seeded with one single-customer column per row, so the identity basis
//! is always primal feasible and no big-M phase is needed.

use std::collections::HashMap;
use std::io::Write;

use thiserror::Error;

use crate::net::{Network, NodeKind};

/// One route column. `coeffs` lists (master row, visit count); visit counts
/// can exceed one because routes are only 2-cycle-free, not elementary.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    /// Pool index; assigned by [`RmpState::add_columns`].
    pub id: usize,
    /// Node ids from source to sink.
    pub route: Vec<usize>,
    /// Travel cost over the route's arcs.
    pub cost: f64,
    /// Sorted by row, no duplicate rows, every count positive.
    pub coeffs: Vec<(usize, f64)>,
    /// Reduced cost under the duals the column was priced with (its cost for
    /// seed columns, which precede any duals).
    pub rcost_at_birth: f64,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    /// Value per pool column, aligned with the pool; zero for nonbasic.
    pub primal: Vec<f64>,
    /// One dual per master row.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("basis matrix is singular (pivot {pivot:.3e} at column {col})")]
    SingularBasis { col: usize, pivot: f64 },
    #[error("LP is unbounded along column {col}")]
    Unbounded { col: usize },
    #[error("simplex stalled after {pivots} pivots; refusing to return an unverified solution")]
    Stalled { pivots: usize },
    #[error("solution failed verification: {0}")]
    Postcondition(String),
    #[error("column {0}: {1}")]
    BadColumn(usize, String),
}

/// Primal feasibility tolerance on basic values and row residuals.
pub const PRIMAL_TOL: f64 = 1e-7;
/// Dual feasibility tolerance on pool reduced costs at optimality.
pub const DUAL_TOL: f64 = 1e-6;
/// A reduced cost must undercut this to enter the basis.
const ENTER_TOL: f64 = 1e-9;
/// Minimum magnitude for a pivot element.
const PIVOT_TOL: f64 = 1e-9;
/// Fresh factorization cadence, in pivots.
const REFACTOR_EVERY: usize = 64;

/// Master problem state. The basis survives across [`RmpState::solve_lp`]
/// calls, so re-solving after [`RmpState::add_columns`] warm-starts from the
/// previous optimum.
#[derive(Debug, Clone)]
pub struct RmpState {
    rows: usize,
    pool: Vec<Column>,
    route_index: HashMap<Vec<usize>, usize>,
    basis: Vec<usize>,
}

/// Seeds the master with one single-customer column per row. The network
/// builder guarantees those routes are feasible, so the seed basis is too.
pub fn init_rmp(net: &Network) -> RmpState {
    let n = net.n_customers();
    let mut state = RmpState {
        rows: n,
        pool: Vec::with_capacity(n),
        route_index: HashMap::new(),
        basis: (0..n).collect(),
    };
    for node in 1..=n {
        debug_assert!(matches!(net.nodes[node].kind, NodeKind::Customer));
        let route = vec![net.source(), node, net.sink()];
        let cost = net.route_cost(&route);
        let col = Column {
            id: node - 1,
            route: route.clone(),
            cost,
            coeffs: vec![(node - 1, 1.0)],
            rcost_at_birth: cost,
        };
        state.route_index.insert(route, node - 1);
        state.pool.push(col);
    }
    state
}

impl RmpState {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn pool(&self) -> &[Column] {
        &self.pool
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    /// Appends new columns, skipping any whose route is already pooled.
    /// Returns how many were actually added.
    pub fn add_columns(&mut self, cols: Vec<Column>) -> Result<usize, LpError> {
        let mut added = 0;
        for mut col in cols {
            if !col.cost.is_finite() {
                return Err(LpError::BadColumn(self.pool.len(), "non-finite cost".into()));
            }
            let mut last_row = None;
            for &(row, v) in &col.coeffs {
                if row >= self.rows {
                    return Err(LpError::BadColumn(
                        self.pool.len(),
                        format!("row {row} out of range ({} rows)", self.rows),
                    ));
                }
                if !(v > 0.0) || !v.is_finite() {
                    return Err(LpError::BadColumn(
                        self.pool.len(),
                        format!("coefficient {v} on row {row} must be a positive finite count"),
                    ));
                }
                if last_row.map_or(false, |lr| lr >= row) {
                    return Err(LpError::BadColumn(
                        self.pool.len(),
                        "coefficients must be sorted by row without duplicates".into(),
                    ));
                }
                last_row = Some(row);
            }
            if self.route_index.contains_key(&col.route) {
                continue;
            }
            col.id = self.pool.len();
            self.route_index.insert(col.route.clone(), col.id);
            self.pool.push(col);
            added += 1;
        }
        Ok(added)
    }

    /// Solves the LP to optimality and returns the primal/dual pair.
    ///
    /// Pivoting uses Dantzig's rule (most negative reduced cost) and falls
    /// back to Bland's rule once the pivot count passes an anti-cycling
    /// threshold, which guarantees termination on degenerate pools. The
    /// basis inverse is refactorized periodically and again at optimality,
    /// and every returned solution is re-verified: feasibility, pool-wide
    /// dual feasibility, complementary slackness, and strong duality. A
    /// solution that fails verification is reported as an error, never
    /// returned.
    pub fn solve_lp(&mut self) -> Result<LpSolution, LpError> {
        let m = self.rows;
        let bland_after = 50 * m + 1000;
        let pivot_cap = 500 * m + 100_000;

        let mut f = self.refactor()?;
        let mut pivots = 0usize;
        let mut clean = true;
        loop {
            let duals = self.duals_from(&f);
            let entering = if pivots > bland_after {
                self.entering_bland(&duals)
            } else {
                self.entering_dantzig(&duals)
            };
            let Some(j) = entering else {
                if clean {
                    return self.finish(f, pivots);
                }
                f = self.refactor()?;
                clean = true;
                continue;
            };
            // Direction through the basis: d = B^-1 a_j.
            let mut d = vec![0.0; m];
            for &(row, v) in &self.pool[j].coeffs {
                for i in 0..m {
                    d[i] += f.binv[i * m + row] * v;
                }
            }
            // Ratio test; among the tightest rows take the one whose basic
            // column has the lowest pool index (Bland-compatible).
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..m {
                if d[i] > PIVOT_TOL {
                    let ratio = (f.xb[i].max(0.0)) / d[i];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - 1e-12
                                || (ratio < best_ratio + 1e-12 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some(i);
                        best_ratio = ratio;
                    }
                }
            }
            let Some(l) = leave else {
                return Err(LpError::Unbounded { col: j });
            };
            // Pivot: replace row l's basic column with j and update the
            // inverse and basic values in place.
            let piv = d[l];
            for k in 0..m {
                f.binv[l * m + k] /= piv;
            }
            f.xb[l] = (f.xb[l].max(0.0)) / piv;
            for i in 0..m {
                if i != l && d[i].abs() > 0.0 {
                    let factor = d[i];
                    for k in 0..m {
                        f.binv[i * m + k] -= factor * f.binv[l * m + k];
                    }
                    f.xb[i] -= factor * f.xb[l];
                }
            }
            self.basis[l] = j;
            pivots += 1;
            clean = false;
            if pivots % REFACTOR_EVERY == 0 {
                f = self.refactor()?;
                clean = true;
            }
            if pivots > pivot_cap {
                return Err(LpError::Stalled { pivots });
            }
        }
    }

    /// Writes the current pool as an LP-format text file: the full objective,
    /// one equality row per customer, and default nonnegative bounds.
    pub fn write_lp(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "\\ restricted master: {} columns, {} rows", self.pool.len(), self.rows)?;
        writeln!(w, "Minimize")?;
        let terms: Vec<String> = self.pool.iter().map(|c| format!("{} x{}", c.cost, c.id)).collect();
        writeln!(w, " obj: {}", terms.join(" + "))?;
        writeln!(w, "Subject To")?;
        for row in 0..self.rows {
            let mut terms = Vec::new();
            for c in &self.pool {
                for &(r, v) in &c.coeffs {
                    if r == row {
                        terms.push(format!("{} x{}", v, c.id));
                    }
                }
            }
            writeln!(w, " cover_{}: {} = 1", row + 1, terms.join(" + "))?;
        }
        writeln!(w, "End")?;
        Ok(())
    }

    /// Recomputes the feasibility, duality, and slackness guarantees for a
    /// solution against the current pool.
    pub fn verify_solution(&self, sol: &LpSolution) -> Result<(), LpError> {
        let fail = |msg: String| Err(LpError::Postcondition(msg));
        if sol.primal.len() != self.pool.len() || sol.duals.len() != self.rows {
            return fail("solution shape does not match the pool".into());
        }
        let mut residual = vec![-1.0; self.rows];
        let mut objective = 0.0;
        for (c, &x) in self.pool.iter().zip(&sol.primal) {
            if x < -PRIMAL_TOL {
                return fail(format!("column {} has negative value {x}", c.id));
            }
            objective += c.cost * x;
            for &(row, v) in &c.coeffs {
                residual[row] += v * x;
            }
        }
        for (row, r) in residual.iter().enumerate() {
            if r.abs() > PRIMAL_TOL {
                return fail(format!("row {row} violated by {r:.3e}"));
            }
        }
        if (objective - sol.objective).abs() > 1e-6 * (1.0 + objective.abs()) {
            return fail(format!(
                "stated objective {} differs from recomputed {objective}",
                sol.objective
            ));
        }
        let dual_objective: f64 = sol.duals.iter().sum();
        if (dual_objective - sol.objective).abs() > DUAL_TOL * (1.0 + sol.objective.abs()) {
            return fail(format!(
                "duality gap {:.3e}",
                (dual_objective - sol.objective).abs()
            ));
        }
        for (c, &x) in self.pool.iter().zip(&sol.primal) {
            let rc = self.reduced_cost(c, &sol.duals);
            if rc < -DUAL_TOL {
                return fail(format!("column {} has reduced cost {rc:.3e} at optimality", c.id));
            }
            if x > PRIMAL_TOL && rc.abs() > DUAL_TOL {
                return fail(format!(
                    "column {} has value {x:.3e} but reduced cost {rc:.3e}",
                    c.id
                ));
            }
        }
        Ok(())
    }

    pub fn reduced_cost(&self, col: &Column, duals: &[f64]) -> f64 {
        let mut rc = col.cost;
        for &(row, v) in &col.coeffs {
            rc -= duals[row] * v;
        }
        rc
    }

    fn duals_from(&self, f: &Factor) -> Vec<f64> {
        let m = self.rows;
        let mut duals = vec![0.0; m];
        for (i, &b) in self.basis.iter().enumerate() {
            let c = self.pool[b].cost;
            if c != 0.0 {
                for (k, dual) in duals.iter_mut().enumerate() {
                    *dual += c * f.binv[i * m + k];
                }
            }
        }
        duals
    }

    fn entering_dantzig(&self, duals: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for c in &self.pool {
            let rc = self.reduced_cost(c, duals);
            if rc < -ENTER_TOL && best.map_or(true, |(_, b)| rc < b) {
                best = Some((c.id, rc));
            }
        }
        best.map(|(j, _)| j)
    }

    fn entering_bland(&self, duals: &[f64]) -> Option<usize> {
        self.pool
            .iter()
            .find(|c| self.reduced_cost(c, duals) < -ENTER_TOL)
            .map(|c| c.id)
    }

    /// Rebuilds the dense basis inverse and basic values from scratch.
    fn refactor(&self) -> Result<Factor, LpError> {
        let m = self.rows;
        // aug = [B | I], reduced in place to [I | B^-1].
        let width = 2 * m;
        let mut aug = vec![0.0; m * width];
        for (i, &b) in self.basis.iter().enumerate() {
            for &(row, v) in &self.pool[b].coeffs {
                aug[row * width + i] = v;
            }
        }
        for i in 0..m {
            aug[i * width + m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv_row = col;
            let mut piv_val = aug[col * width + col].abs();
            for r in col + 1..m {
                let v = aug[r * width + col].abs();
                if v > piv_val {
                    piv_row = r;
                    piv_val = v;
                }
            }
            if piv_val < 1e-11 {
                return Err(LpError::SingularBasis {
                    col,
                    pivot: piv_val,
                });
            }
            if piv_row != col {
                for k in 0..width {
                    aug.swap(col * width + k, piv_row * width + k);
                }
            }
            let piv = aug[col * width + col];
            for k in 0..width {
                aug[col * width + k] /= piv;
            }
            for r in 0..m {
                if r != col {
                    let factor = aug[r * width + col];
                    if factor != 0.0 {
                        for k in 0..width {
                            aug[r * width + k] -= factor * aug[col * width + k];
                        }
                    }
                }
            }
        }
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m..(r + 1) * m].copy_from_slice(&aug[r * width + m..r * width + 2 * m]);
        }
        // xb = B^-1 * b with b = ones.
        let xb = (0..m).map(|r| binv[r * m..(r + 1) * m].iter().sum()).collect();
        Ok(Factor { binv, xb })
    }

    fn finish(&self, f: Factor, pivots: usize) -> Result<LpSolution, LpError> {
        let duals = self.duals_from(&f);
        let mut primal = vec![0.0; self.pool.len()];
        let mut objective = 0.0;
        for (i, &b) in self.basis.iter().enumerate() {
            if f.xb[i] < -PRIMAL_TOL {
                return Err(LpError::Postcondition(format!(
                    "basic value {:.3e} below zero",
                    f.xb[i]
                )));
            }
            let x = f.xb[i].max(0.0);
            primal[b] = x;
            objective += self.pool[b].cost * x;
        }
        let sol = LpSolution {
            objective,
            primal,
            duals,
            pivots,
        };
        self.verify_solution(&sol)?;
        Ok(sol)
    }
}

struct Factor {
    /// Dense B^-1, row-major.
    binv: Vec<f64>,
    /// Basic values B^-1 * 1.
    xb: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_random, GenParams};
    use crate::net::build_network;

    fn state_for(n: usize, seed: u64) -> (RmpState, crate::net::Network) {
        let net = build_network(&generate_random(n, seed, &GenParams::default())).unwrap();
        (init_rmp(&net), net)
    }

    #[test]
    fn seed_pool_solves_to_singleton_total() {
        let (mut state, _net) = state_for(6, 1);
        let sol = state.solve_lp().unwrap();
        let total: f64 = state.pool().iter().map(|c| c.cost).sum();
        assert!((sol.objective - total).abs() < 1e-9);
        assert_eq!(sol.pivots, 0);
        for (i, &x) in sol.primal.iter().enumerate() {
            assert!((x - 1.0).abs() < 1e-9, "column {i} should be at 1");
        }
        // With the identity basis each dual equals its singleton's cost.
        for (c, d) in state.pool().iter().zip(&sol.duals) {
            assert!((c.cost - d).abs() < 1e-9);
        }
    }

    #[test]
    fn a_cheaper_pair_column_enters() {
        let (mut state, net) = state_for(2, 7);
        let base = state.solve_lp().unwrap();
        // A column covering both customers at a fraction of the seed total.
        let route = vec![0, 1, 2, net.sink()];
        let cost = 0.25 * base.objective;
        state
            .add_columns(vec![Column {
                id: 0,
                route,
                cost,
                coeffs: vec![(0, 1.0), (1, 1.0)],
                rcost_at_birth: 0.0,
            }])
            .unwrap();
        let sol = state.solve_lp().unwrap();
        assert!((sol.objective - cost).abs() < 1e-9);
        assert!((sol.primal[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_routes_are_dropped() {
        let (mut state, _net) = state_for(3, 2);
        let col = Column {
            id: 0,
            route: vec![0, 1, 2, 4],
            cost: 5.0,
            coeffs: vec![(0, 1.0), (1, 1.0)],
            rcost_at_birth: -1.0,
        };
        assert_eq!(state.add_columns(vec![col.clone()]).unwrap(), 1);
        assert_eq!(state.add_columns(vec![col.clone()]).unwrap(), 0);
        // A singleton seed's route also collides.
        let seed_route = state.pool()[0].route.clone();
        let dup = Column {
            route: seed_route,
            ..col
        };
        assert_eq!(state.add_columns(vec![dup]).unwrap(), 0);
        assert_eq!(state.pool().len(), 4);
    }

    #[test]
    fn rejects_malformed_coefficients() {
        let (mut state, _net) = state_for(3, 2);
        let bad_row = Column {
            id: 0,
            route: vec![0, 1, 4],
            cost: 1.0,
            coeffs: vec![(7, 1.0)],
            rcost_at_birth: 0.0,
        };
        assert!(state.add_columns(vec![bad_row]).is_err());
        let unsorted = Column {
            id: 0,
            route: vec![0, 2, 1, 4],
            cost: 1.0,
            coeffs: vec![(1, 1.0), (0, 1.0)],
            rcost_at_birth: 0.0,
        };
        assert!(state.add_columns(vec![unsorted]).is_err());
    }

    #[test]
    fn warm_and_cold_solves_agree() {
        let (mut warm, net) = state_for(5, 3);
        warm.solve_lp().unwrap();
        let mut extra = Vec::new();
        for (a, b) in [(1usize, 2usize), (2, 3), (4, 5), (1, 4)] {
            if net.find_arc(a, b).is_none() {
                continue;
            }
            let route = vec![0, a, b, net.sink()];
            let mut coeffs = vec![(a - 1, 1.0), (b - 1, 1.0)];
            coeffs.sort_by_key(|&(r, _)| r);
            extra.push(Column {
                id: 0,
                route: route.clone(),
                cost: net.route_cost(&route),
                coeffs,
                rcost_at_birth: 0.0,
            });
        }
        assert!(!extra.is_empty());
        warm.add_columns(extra.clone()).unwrap();
        let warm_sol = warm.solve_lp().unwrap();

        let mut cold = init_rmp(&net);
        cold.add_columns(extra).unwrap();
        let cold_sol = cold.solve_lp().unwrap();
        assert!((warm_sol.objective - cold_sol.objective).abs() <= 1e-6);
    }

    #[test]
    fn verification_rejects_a_tampered_solution() {
        let (mut state, _net) = state_for(4, 4);
        let mut sol = state.solve_lp().unwrap();
        sol.objective += 1.0;
        assert!(state.verify_solution(&sol).is_err());
    }

    #[test]
    fn lp_snapshot_has_expected_shape() {
        let (mut state, _net) = state_for(2, 5);
        state.solve_lp().unwrap();
        let mut buf = Vec::new();
        state.write_lp(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("\\ restricted master: 2 columns, 2 rows\n"));
        assert!(text.contains("Minimize"));
        assert!(text.contains("Subject To"));
        assert!(text.contains("cover_1:"));
        assert!(text.contains("cover_2:"));
        assert!(text.contains("= 1"));
        assert!(text.trim_end().ends_with("End"));
    }

    #[test]
    fn handles_a_degenerate_pool() {
        // Many identical-cost overlapping columns force degenerate pivots.
        let (mut state, net) = state_for(6, 6);
        let sink = net.sink();
        let mut cols = Vec::new();
        for a in 1..=6usize {
            for b in 1..=6usize {
                if a != b && net.find_arc(a, b).is_some() {
                    let mut coeffs = vec![(a - 1, 1.0), (b - 1, 1.0)];
                    coeffs.sort_by_key(|&(r, _)| r);
                    cols.push(Column {
                        id: 0,
                        route: vec![0, a, b, sink],
                        cost: 10.0,
                        coeffs,
                        rcost_at_birth: 0.0,
                    });
                }
            }
        }
        state.add_columns(cols).unwrap();
        let sol = state.solve_lp().unwrap();
        state.verify_solution(&sol).unwrap();
    }
}
