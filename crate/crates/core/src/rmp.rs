//! Restricted master problem
//!
//! ```text
//! minimize cᵀα  subject to  Aα = λ*,  α ≥ 0
//! ```
//!
//! where column `k` of `A` is the probability vector of configuration `k`. The
//! solver is a dense revised simplex on the ℓ marginal constraints with an
//! explicit basis inverse, started from the unit basis. Sites without a
//! stacked configuration in the pool get an artificial unit column and a
//! phase-one pass removes them. Results are reported together with their
//! optimality certificate: primal feasibility, dual feasibility, duality gap
//! and complementary slackness.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cost::{column_cost, CostMatrix};
use crate::error::{Error, Result};
use crate::state_space::{Column, Marginal};

pub const DEFAULT_LP_TOL: f64 = 1e-9;
pub const DEFAULT_ACTIVITY_TOL: f64 = 1e-10;

/// Columns with their cached costs and the marginal they must reproduce.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedProblem {
    columns: Vec<Column>,
    costs: Vec<f64>,
    marginal: Marginal,
}

impl RestrictedProblem {
    pub fn new(columns: Vec<Column>, costs: Vec<f64>, marginal: Marginal) -> Result<Self> {
        if columns.len() != costs.len() {
            return Err(Error::DimensionMismatch { expected: columns.len(), got: costs.len() });
        }
        for col in &columns {
            if col.len() != marginal.len() {
                return Err(Error::DimensionMismatch { expected: marginal.len(), got: col.len() });
            }
        }
        if let Some(c) = costs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidColumn(format!("non-finite cost {c}")));
        }
        Ok(Self { columns, costs, marginal })
    }

    /// Computes every column cost from `c`.
    pub fn with_cost_matrix(columns: Vec<Column>, c: &CostMatrix, marginal: Marginal) -> Result<Self> {
        let costs = columns.iter().map(|col| column_cost(col, c)).collect::<Result<Vec<_>>>()?;
        Self::new(columns, costs, marginal)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn marginal(&self) -> &Marginal {
        &self.marginal
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.marginal.len()
    }

    pub fn push(&mut self, column: Column, cost: f64) -> Result<()> {
        if column.len() != self.n_sites() {
            return Err(Error::DimensionMismatch { expected: self.n_sites(), got: column.len() });
        }
        self.columns.push(column);
        self.costs.push(cost);
        Ok(())
    }

    /// Keeps the columns for which `keep(k)` is true, preserving order.
    pub fn retain_indices(&mut self, mut keep: impl FnMut(usize) -> bool) {
        let flags: Vec<bool> = (0..self.len()).map(&mut keep).collect();
        let mut it = flags.iter();
        self.columns.retain(|_| *it.next().unwrap());
        let mut it = flags.iter();
        self.costs.retain(|_| *it.next().unwrap());
    }

    /// `λ_kᵀ y`, the dual value of column `k`.
    pub fn dual_value(&self, k: usize, y: &[f64]) -> f64 {
        dual_value(&self.columns[k], y)
    }

    /// Writes the problem in CPLEX LP text format.
    pub fn write_lp<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "\\ restricted master problem: {} columns, {} sites", self.len(), self.n_sites())?;
        writeln!(out, "Minimize")?;
        write!(out, " obj:")?;
        for (k, c) in self.costs.iter().enumerate() {
            write!(out, " {} {:.17e} a{k}", if k == 0 { "" } else { "+" }, c)?;
            if k % 4 == 3 {
                writeln!(out)?;
            }
        }
        writeln!(out)?;
        writeln!(out, "Subject To")?;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_sites()];
        for (k, col) in self.columns.iter().enumerate() {
            let n = f64::from(col.n_particles());
            for (i, m) in col.support() {
                rows[i].push((k, f64::from(m) / n));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            write!(out, " site{i}:")?;
            if row.is_empty() {
                write!(out, " 0 a0")?;
            }
            for (t, (k, v)) in row.iter().enumerate() {
                write!(out, " {} {:.17e} a{k}", if t == 0 { "" } else { "+" }, v)?;
            }
            writeln!(out, " = {:.17e}", self.marginal.weights()[i])?;
        }
        writeln!(out, "Bounds")?;
        for k in 0..self.len() {
            writeln!(out, " a{k} >= 0")?;
        }
        writeln!(out, "End")
    }
}

#[inline]
pub(crate) fn dual_value(col: &Column, y: &[f64]) -> f64 {
    let s: f64 = col.support().map(|(i, m)| f64::from(m) * y[i]).sum();
    s / f64::from(col.n_particles())
}

/// Optimal primal weights and dual potential of a restricted problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmpSolution {
    /// One weight per column of the problem.
    pub alpha: Vec<f64>,
    /// Kantorovich potential iterate, one value per site.
    pub dual: Vec<f64>,
    pub value: f64,
    /// Simplex pivots over both phases.
    pub iterations: usize,
}

impl RmpSolution {
    pub fn is_active(&self, k: usize, activity_tol: f64) -> bool {
        is_active(self, k, activity_tol)
    }

    /// Indices of columns with weight above `activity_tol`.
    pub fn active_indices(&self, activity_tol: f64) -> Vec<usize> {
        (0..self.alpha.len()).filter(|&k| self.alpha[k] > activity_tol).collect()
    }

    pub fn certificate(&self, problem: &RestrictedProblem) -> Certificate {
        let target = problem.marginal().weights();
        let mut reached = vec![0.0; problem.n_sites()];
        let mut primal_value = 0.0;
        let mut min_alpha = f64::INFINITY;
        let mut dual_violation: f64 = 0.0;
        let mut slackness: f64 = 0.0;
        for (k, col) in problem.columns().iter().enumerate() {
            let a = self.alpha[k];
            min_alpha = min_alpha.min(a);
            let n = f64::from(col.n_particles());
            for (i, m) in col.support() {
                reached[i] += a * f64::from(m) / n;
            }
            primal_value += problem.costs()[k] * a;
            let reduced = problem.costs()[k] - dual_value(col, &self.dual);
            dual_violation = dual_violation.max(-reduced);
            slackness = slackness.max((a * reduced).abs());
        }
        let primal_residual = reached.iter().zip(target).map(|(r, t)| (r - t).abs()).fold(0.0, f64::max);
        let dual_objective: f64 = target.iter().zip(&self.dual).map(|(t, y)| t * y).sum();
        let gap = (primal_value - dual_objective).abs() / (1.0 + primal_value.abs());
        Certificate { primal_residual, negativity: (-min_alpha).max(0.0), dual_violation, relative_gap: gap, slackness }
    }
}

/// True iff the weight of column `k` exceeds `activity_tol`.
pub fn is_active(solution: &RmpSolution, k: usize, activity_tol: f64) -> bool {
    solution.alpha[k] > activity_tol
}

/// Worst-case violations of the optimality conditions of an LP solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Certificate {
    /// `‖Aα − λ*‖_∞`.
    pub primal_residual: f64,
    /// `max(0, −min α)`.
    pub negativity: f64,
    /// `max(0, max_k (λ_kᵀy − c_k))`.
    pub dual_violation: f64,
    /// `|cᵀα − λ*ᵀy| / (1 + |cᵀα|)`.
    pub relative_gap: f64,
    /// `max_k |α_k (c_k − λ_kᵀy)|`.
    pub slackness: f64,
}

impl Certificate {
    pub fn holds(&self, tau: f64) -> bool {
        self.worst() <= tau
    }

    pub fn worst(&self) -> f64 {
        self.primal_residual.max(self.negativity).max(self.dual_violation).max(self.relative_gap).max(self.slackness)
    }

    /// Componentwise maximum.
    pub fn merge(&self, other: &Certificate) -> Certificate {
        Certificate {
            primal_residual: self.primal_residual.max(other.primal_residual),
            negativity: self.negativity.max(other.negativity),
            dual_violation: self.dual_violation.max(other.dual_violation),
            relative_gap: self.relative_gap.max(other.relative_gap),
            slackness: self.slackness.max(other.slackness),
        }
    }
}

/// Simplex parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    /// Optimality and feasibility tolerance.
    pub tol: f64,
    /// Pivot cap; `None` means `50 ℓ²`.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_switch: usize,
    /// Pivots between basis refactorizations.
    pub refactor_every: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_LP_TOL, max_iterations: None, degenerate_switch: 50, refactor_every: 50 }
    }
}

impl LpOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Solves the restricted master problem with tolerance `tol`.
pub fn solve_rmp(problem: &RestrictedProblem, tol: f64) -> Result<RmpSolution> {
    solve_rmp_with(problem, &LpOptions::with_tol(tol))
}

pub fn solve_rmp_with(problem: &RestrictedProblem, opts: &LpOptions) -> Result<RmpSolution> {
    Simplex::new(problem, opts).run()
}

const PIVOT_TOL: f64 = 1e-11;

struct Simplex<'a> {
    problem: &'a RestrictedProblem,
    opts: LpOptions,
    m: usize,
    n: usize,
    /// Probability entries of each real column, `(site, value)`.
    sparse: Vec<Vec<(usize, f64)>>,
    /// Basic variable per row; indices `>= n` are artificial (row `idx - n`).
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Row-major basis inverse.
    binv: Vec<f64>,
    x: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    One,
    Two,
}

impl<'a> Simplex<'a> {
    fn new(problem: &'a RestrictedProblem, opts: &LpOptions) -> Self {
        let m = problem.n_sites();
        let n = problem.len();
        let sparse: Vec<Vec<(usize, f64)>> = problem
            .columns()
            .iter()
            .map(|c| {
                let nn = f64::from(c.n_particles());
                c.support().map(|(i, k)| (i, f64::from(k) / nn)).collect()
            })
            .collect();

        // crash basis: a stacked configuration is the unit vector of its site
        let mut basis: Vec<usize> = (0..m).map(|i| n + i).collect();
        for (k, s) in sparse.iter().enumerate() {
            if let [(i, _)] = s.as_slice() {
                if basis[*i] >= n {
                    basis[*i] = k;
                }
            }
        }
        let mut in_basis = vec![false; n];
        for &b in &basis {
            if b < n {
                in_basis[b] = true;
            }
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Self {
            problem,
            opts: *opts,
            m,
            n,
            sparse,
            basis,
            in_basis,
            binv,
            x: problem.marginal().weights().to_vec(),
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn max_iterations(&self) -> usize {
        self.opts.max_iterations.unwrap_or(50 * self.m * self.m).max(1)
    }

    fn cost(&self, var: usize, phase: Phase) -> f64 {
        match (phase, var >= self.n) {
            (Phase::One, true) => 1.0,
            (Phase::One, false) => 0.0,
            (Phase::Two, true) => 0.0,
            (Phase::Two, false) => self.problem.costs()[var],
        }
    }

    fn run(mut self) -> Result<RmpSolution> {
        if self.basis.iter().any(|&b| b >= self.n) {
            self.optimize(Phase::One)?;
            let infeasibility: f64 = (0..self.m).filter(|&r| self.basis[r] >= self.n).map(|r| self.x[r].max(0.0)).sum();
            if infeasibility > self.opts.tol {
                return Err(Error::Infeasible);
            }
        }
        self.optimize(Phase::Two)?;
        self.refactor()?;
        Ok(self.solution())
    }

    fn duals(&self, phase: Phase) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = self.cost(self.basis[r], phase);
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, b) in y.iter_mut().zip(row) {
                    *yi += cb * b;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, k: usize, y: &[f64], phase: Phase) -> f64 {
        let dot: f64 = self.sparse[k].iter().map(|&(i, v)| v * y[i]).sum();
        self.cost(k, phase) - dot
    }

    fn optimize(&mut self, phase: Phase) -> Result<()> {
        let tol = self.opts.tol;
        let mut degenerate_run = 0usize;
        loop {
            let y = self.duals(phase);
            let bland = degenerate_run >= self.opts.degenerate_switch;

            // pricing
            let mut entering = None;
            let mut best = -tol;
            for k in 0..self.n {
                if self.in_basis[k] {
                    continue;
                }
                let d = self.reduced_cost(k, &y, phase);
                if d < best {
                    entering = Some(k);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = entering else {
                return Ok(());
            };

            if self.iterations >= self.max_iterations() {
                return Err(Error::NumericalFailure { iterations: self.iterations });
            }

            let u = self.ftran(q);

            // ratio test
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..self.m {
                let ur = u[r];
                let artificial_pinned = phase == Phase::Two && self.basis[r] >= self.n;
                let ratio = if artificial_pinned && ur.abs() > PIVOT_TOL {
                    0.0
                } else if ur > PIVOT_TOL {
                    self.x[r].max(0.0) / ur
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some(l) => {
                        if ratio < best_ratio - 1e-14 {
                            true
                        } else if ratio <= best_ratio + 1e-14 {
                            if bland {
                                self.basis[r] < self.basis[l]
                            } else {
                                ur.abs() > u[l].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some(r);
                    best_ratio = ratio;
                }
            }
            // the feasible region is a bounded polytope; an unbounded ray is numerical trouble
            let Some(r) = leave else {
                return Err(Error::NumericalFailure { iterations: self.iterations });
            };

            let theta = best_ratio;
            if theta <= 1e-13 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(q, r, theta, &u);
            self.iterations += 1;
            self.since_refactor += 1;
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
        }
    }

    /// `B⁻¹ a_q`.
    fn ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut u = vec![0.0; m];
        for (r, ur) in u.iter_mut().enumerate() {
            let row = &self.binv[r * m..(r + 1) * m];
            *ur = self.sparse[q].iter().map(|&(i, v)| row[i] * v).sum();
        }
        u
    }

    fn pivot(&mut self, q: usize, r: usize, theta: f64, u: &[f64]) {
        let m = self.m;
        for (i, xi) in self.x.iter_mut().enumerate() {
            if i != r {
                *xi -= theta * u[i];
            }
        }
        self.x[r] = theta;

        let pr = u[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for v in pivot_row.iter_mut() {
            *v /= pr;
        }
        for (i, row) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
            let idx = if i < r { i } else { i + 1 };
            let f = u[idx];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(pivot_row.iter()) {
                    *a -= f * b;
                }
            }
        }

        let old = self.basis[r];
        if old < self.n {
            self.in_basis[old] = false;
        }
        self.basis[r] = q;
        self.in_basis[q] = true;
    }

    /// Recomputes the basis inverse by Gauss-Jordan elimination and the basic solution from it.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (r, &var) in self.basis.iter().enumerate() {
            if var >= self.n {
                b[(var - self.n) * m + r] = 1.0;
            } else {
                for &(i, v) in &self.sparse[var] {
                    b[i * m + r] = v;
                }
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let piv = (col..m).max_by(|&a, &c| b[a * m + col].abs().total_cmp(&b[c * m + col].abs())).unwrap();
            if b[piv * m + col].abs() < 1e-13 {
                return Err(Error::NumericalFailure { iterations: self.iterations });
            }
            if piv != col {
                for j in 0..m {
                    b.swap(piv * m + j, col * m + j);
                    inv.swap(piv * m + j, col * m + j);
                }
            }
            let p = b[col * m + col];
            for j in 0..m {
                b[col * m + j] /= p;
                inv[col * m + j] /= p;
            }
            for i in 0..m {
                if i == col {
                    continue;
                }
                let f = b[i * m + col];
                if f != 0.0 {
                    for j in 0..m {
                        b[i * m + j] -= f * b[col * m + j];
                        inv[i * m + j] -= f * inv[col * m + j];
                    }
                }
            }
        }
        self.binv = inv;
        let rhs = self.problem.marginal().weights();
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.x[r] = row.iter().zip(rhs).map(|(a, b)| a * b).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn solution(&self) -> RmpSolution {
        let mut alpha = vec![0.0; self.n];
        for (r, &var) in self.basis.iter().enumerate() {
            if var < self.n {
                let v = self.x[r];
                // rounding residue of degenerate basics
                alpha[var] = if v.abs() <= 1e-14 || (v < 0.0 && v > -self.opts.tol) { 0.0 } else { v };
            }
        }
        let dual = self.duals(Phase::Two);
        let value = alpha.iter().zip(self.problem.costs()).map(|(a, c)| a * c).sum();
        RmpSolution { alpha, dual, value, iterations: self.iterations }
    }
}
