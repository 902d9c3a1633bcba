//! Solver-neutral representation and solution of the convex subproblems.
//!
//! [`ConicProblem`] carries a real decision vector, a linear objective plus
//! weighted `log(affine)` terms, and affine constraint blocks over the
//! nonnegative, second-order, and real-symmetric PSD cones (plus equalities).
//! `solve` lowers the log terms to exponential-cone epigraphs and hands the
//! problem to an interior-point solver; callers only rely on the returned
//! tolerance, not on how the logs are realized.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use thiserror::Error;

/// Affine expression `sum_i coeff_i * x_i + constant`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(index: usize) -> Self {
        LinExpr { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn term(index: usize, coeff: f64) -> Self {
        LinExpr { terms: vec![(index, coeff)], constant: 0.0 }
    }

    pub fn push(&mut self, index: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((index, coeff));
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for (_, c) in &mut self.terms {
            *c *= s;
        }
        self.constant *= s;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

/// A real-symmetric PSD block `S(x) >= 0`, stored as the scaled upper
/// triangle (svec) of the matrix, column-major, off-diagonals times sqrt(2).
#[derive(Debug, Clone)]
pub struct PsdBlock {
    pub dim: usize,
    pub svec: Vec<LinExpr>,
}

impl PsdBlock {
    /// Build from a per-entry affine map over the upper triangle
    /// (`entry(r, c)` with `r <= c`). The svec scaling is applied here.
    pub fn from_upper_triangle(dim: usize, mut entry: impl FnMut(usize, usize) -> LinExpr) -> Self {
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut svec = Vec::with_capacity(dim * (dim + 1) / 2);
        for c in 0..dim {
            for r in 0..=c {
                let e = entry(r, c);
                svec.push(if r == c { e } else { e.scaled(sqrt2) });
            }
        }
        PsdBlock { dim, svec }
    }
}

/// Reasons a solve does not return a usable optimum. Infeasibility,
/// unboundedness, and numerical breakdown are distinct so callers can react
/// per case.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("problem is primal infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Primal values of the problem's own variables (epigraph helpers are
    /// stripped).
    pub x: Vec<f64>,
    /// Objective in the maximize sense, with log terms and constants
    /// evaluated at `x`.
    pub objective: f64,
    /// Solver-reported status string, for logs.
    pub status: String,
}

/// Maximization problem over the supported cones.
#[derive(Debug, Clone)]
pub struct ConicProblem {
    nvars: usize,
    obj_linear: Vec<(usize, f64)>,
    obj_constant: f64,
    /// `(weight, expr)` adds `weight * ln(expr(x))` to the objective;
    /// weights must be positive.
    log_terms: Vec<(f64, LinExpr)>,
    equalities: Vec<LinExpr>,
    nonneg: Vec<LinExpr>,
    soc: Vec<Vec<LinExpr>>,
    psd: Vec<PsdBlock>,
    /// Optional variable labels mapping indices back to (slot, entity).
    labels: Vec<String>,
}

impl ConicProblem {
    pub fn new(nvars: usize) -> Self {
        ConicProblem {
            nvars,
            obj_linear: Vec::new(),
            obj_constant: 0.0,
            log_terms: Vec::new(),
            equalities: Vec::new(),
            nonneg: Vec::new(),
            soc: Vec::new(),
            psd: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn label(&mut self, index: usize, name: impl Into<String>) {
        if self.labels.len() <= index {
            self.labels.resize(index + 1, String::new());
        }
        self.labels[index] = name.into();
    }

    /// Add `coeff * x_i` to the (maximized) objective.
    pub fn add_objective_term(&mut self, index: usize, coeff: f64) {
        if coeff != 0.0 {
            self.obj_linear.push((index, coeff));
        }
    }

    pub fn add_objective_constant(&mut self, c: f64) {
        self.obj_constant += c;
    }

    /// Add `weight * ln(expr(x))` to the objective; `weight > 0`.
    pub fn add_log_term(&mut self, weight: f64, expr: LinExpr) {
        assert!(weight > 0.0, "log-term weights must be positive, got {weight}");
        self.log_terms.push((weight, expr));
    }

    /// Constrain `expr(x) = 0`.
    pub fn add_equality(&mut self, expr: LinExpr) {
        self.equalities.push(expr);
    }

    /// Constrain `expr(x) >= 0`.
    pub fn add_nonneg(&mut self, expr: LinExpr) {
        self.nonneg.push(expr);
    }

    /// Constrain `rows[0] >= || (rows[1], ..., rows[m]) ||`.
    pub fn add_soc(&mut self, rows: Vec<LinExpr>) {
        assert!(rows.len() >= 2, "second-order cone needs a head and at least one tail row");
        self.soc.push(rows);
    }

    pub fn add_psd(&mut self, block: PsdBlock) {
        self.psd.push(block);
    }

    /// Objective (maximize sense) evaluated at a primal point.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let linear: f64 = self.obj_linear.iter().map(|&(i, c)| c * x[i]).sum();
        let logs: f64 =
            self.log_terms.iter().map(|(w, e)| w * e.eval(x).ln()).sum();
        linear + logs + self.obj_constant
    }

    /// Text dump for offline debugging.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let name = |i: usize| -> String {
            self.labels
                .get(i)
                .filter(|s| !s.is_empty())
                .cloned()
                .unwrap_or_else(|| format!("x{i}"))
        };
        let expr_str = |e: &LinExpr| -> String {
            let mut s = String::new();
            for &(i, c) in &e.terms {
                let _ = write!(s, "{c:+.6e}*{} ", name(i));
            }
            let _ = write!(s, "{:+.6e}", e.constant);
            s
        };
        let _ = writeln!(
            out,
            "conic problem: {} vars, {} logs, {} eq, {} nonneg, {} soc, {} psd",
            self.nvars,
            self.log_terms.len(),
            self.equalities.len(),
            self.nonneg.len(),
            self.soc.len(),
            self.psd.len()
        );
        let _ = writeln!(out, "maximize:");
        for &(i, c) in &self.obj_linear {
            let _ = writeln!(out, "  {c:+.6e}*{}", name(i));
        }
        for (w, e) in &self.log_terms {
            let _ = writeln!(out, "  {w:+.6e}*ln({})", expr_str(e));
        }
        let _ = writeln!(out, "  {:+.6e}", self.obj_constant);
        for e in &self.equalities {
            let _ = writeln!(out, "eq: {} = 0", expr_str(e));
        }
        for e in &self.nonneg {
            let _ = writeln!(out, "ineq: {} >= 0", expr_str(e));
        }
        for rows in &self.soc {
            let _ = writeln!(out, "soc[{}]: head {}", rows.len(), expr_str(&rows[0]));
            for r in &rows[1..] {
                let _ = writeln!(out, "  tail {}", expr_str(r));
            }
        }
        for b in &self.psd {
            let _ = writeln!(out, "psd block dim {} ({} svec rows)", b.dim, b.svec.len());
        }
        out
    }

    /// Solve to the requested tolerance.
    pub fn solve(&self, tol: f64) -> Result<Solution, SolveError> {
        let n_total = self.nvars + self.log_terms.len();

        // minimize q'x  ==  maximize -q'x
        let mut q = vec![0.0; n_total];
        for &(i, c) in &self.obj_linear {
            q[i] -= c;
        }
        for (j, (w, _)) in self.log_terms.iter().enumerate() {
            q[self.nvars + j] -= w;
        }

        // rows of A x + s = b with s in the cone product, assembled in cone
        // order: Zero, Nonneg, SOC..., Exp..., PSD...
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut row = 0usize;

        // expr(x) drives s = b - A x: s == expr means A := -coeffs, b := constant
        let push_expr = |expr: &LinExpr,
                             triplets: &mut Vec<(usize, usize, f64)>,
                             b: &mut Vec<f64>,
                             row: &mut usize| {
            for &(i, c) in &expr.terms {
                triplets.push((*row, i, -c));
            }
            b.push(expr.constant);
            *row += 1;
        };

        if !self.equalities.is_empty() {
            for e in &self.equalities {
                push_expr(e, &mut triplets, &mut b, &mut row);
            }
            cones.push(SupportedConeT::ZeroConeT(self.equalities.len()));
        }
        if !self.nonneg.is_empty() {
            for e in &self.nonneg {
                push_expr(e, &mut triplets, &mut b, &mut row);
            }
            cones.push(SupportedConeT::NonnegativeConeT(self.nonneg.len()));
        }
        for rows in &self.soc {
            for e in rows {
                push_expr(e, &mut triplets, &mut b, &mut row);
            }
            cones.push(SupportedConeT::SecondOrderConeT(rows.len()));
        }
        for (j, (_, expr)) in self.log_terms.iter().enumerate() {
            // epigraph variable t_j with (t_j, 1, expr) in the exponential
            // cone enforces expr >= exp(t_j), i.e. t_j <= ln(expr)
            let t = LinExpr::var(self.nvars + j);
            push_expr(&t, &mut triplets, &mut b, &mut row);
            push_expr(&LinExpr::constant(1.0), &mut triplets, &mut b, &mut row);
            push_expr(expr, &mut triplets, &mut b, &mut row);
            cones.push(SupportedConeT::ExponentialConeT());
        }
        for block in &self.psd {
            for e in &block.svec {
                push_expr(e, &mut triplets, &mut b, &mut row);
            }
            cones.push(SupportedConeT::PSDTriangleConeT(block.dim));
        }

        let a = csc_from_triplets(row, n_total, &triplets);
        let p = CscMatrix::<f64>::zeros((n_total, n_total));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .max_iter(200)
            .build()
            .expect("static settings");
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| SolveError::NumericalFailure(format!("solver setup: {e:?}")))?;
        solver.solve();

        let status = solver.solution.status;
        match status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => {
                let x = solver.solution.x[..self.nvars].to_vec();
                let objective = self.objective_at(&x);
                Ok(Solution { x, objective, status: format!("{status:?}") })
            }
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                Err(SolveError::Infeasible)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                Err(SolveError::Unbounded)
            }
            other => Err(SolveError::NumericalFailure(format!("{other:?}"))),
        }
    }
}

fn csc_from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cols];
    for &(r, c, v) in triplets {
        debug_assert!(r < rows && c < cols);
        if v != 0.0 {
            by_col[c].push((r, v));
        }
    }
    let mut colptr = Vec::with_capacity(cols + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for col in &mut by_col {
        col.sort_by_key(|&(r, _)| r);
        // merge duplicate rows within a column
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
        for &(r, v) in col.iter() {
            match merged.last_mut() {
                Some((lr, lv)) if *lr == r => *lv += v,
                _ => merged.push((r, v)),
            }
        }
        for (r, v) in merged {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(rows, cols, colptr, rowval, nzval)
}
