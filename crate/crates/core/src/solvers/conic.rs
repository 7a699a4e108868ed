//! Linear-objective conic programs and their interior-point solution.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::scalar::{cst, to_f64, Scalar};

/// Default feasibility tolerance on the scaled constraint residual.
pub const FEAS_TOL: f64 = 1e-7;

/// `Σ coef·x[idx] + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineExpr<T: Scalar> {
    pub terms: Vec<(usize, T)>,
    pub constant: T,
}

impl<T: Scalar> AffineExpr<T> {
    pub fn constant(c: T) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(i: usize) -> Self {
        Self { terms: vec![(i, T::one())], constant: T::zero() }
    }

    pub fn term(i: usize, c: T) -> Self {
        Self { terms: vec![(i, c)], constant: T::zero() }
    }

    pub fn plus(mut self, i: usize, c: T) -> Self {
        self.terms.push((i, c));
        self
    }

    pub fn plus_const(mut self, c: T) -> Self {
        self.constant += c;
        self
    }

    pub fn add(mut self, other: &Self) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn scaled(mut self, s: T) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }

    /// Magnitude used to make residuals relative.
    fn scale(&self, x: &[T]) -> T {
        self.terms.iter().fold(T::one() + self.constant.abs(), |acc, &(i, c)| acc + (c * x[i]).abs())
    }
}

/// `‖entries‖₂ ≤ bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct SocConstraint<T: Scalar> {
    pub bound: AffineExpr<T>,
    pub entries: Vec<AffineExpr<T>>,
}

/// `(x, y, z)` in the exponential cone `z ≥ y·exp(x/y)`, `y > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpConstraint<T: Scalar> {
    pub x: AffineExpr<T>,
    pub y: AffineExpr<T>,
    pub z: AffineExpr<T>,
}

/// Minimize `c^T x` subject to affine equalities, nonnegativities,
/// second-order cones and exponential cones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProblem<T: Scalar> {
    pub n_vars: usize,
    pub objective: Vec<T>,
    pub objective_constant: T,
    pub eq: Vec<AffineExpr<T>>,
    /// Each expression must be `≥ 0`.
    pub nonneg: Vec<AffineExpr<T>>,
    pub soc: Vec<SocConstraint<T>>,
    pub exp: Vec<ExpConstraint<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }
}

/// Outcome of any solver in this crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolveReport<T: Scalar> {
    pub status: SolveStatus,
    pub objective: T,
    pub solution: Vec<T>,
    pub iterations: usize,
    pub max_violation: T,
    /// Objective value after each outer iteration (iterative methods only).
    pub trace: Vec<T>,
    /// Dual vector certifying primal infeasibility, when available.
    pub certificate: Option<Vec<T>>,
    /// Proven lower bound on the optimum (relaxation-based methods).
    pub lower_bound: Option<T>,
}

impl<T: Scalar> SolveReport<T> {
    pub fn with_status(status: SolveStatus, solution: Vec<T>) -> Self {
        Self {
            status,
            objective: T::infinity(),
            solution,
            iterations: 0,
            max_violation: T::zero(),
            trace: Vec::new(),
            certificate: None,
            lower_bound: None,
        }
    }
}

/// Interior-point tolerances.
#[derive(Clone, Copy, Debug)]
pub struct ConicSettings {
    pub max_iter: u32,
    pub feas_tol: f64,
}

impl Default for ConicSettings {
    fn default() -> Self {
        Self { max_iter: 200, feas_tol: FEAS_TOL }
    }
}

impl<T: Scalar> ConicProblem<T> {
    pub fn new() -> Self {
        Self {
            n_vars: 0,
            objective: Vec::new(),
            objective_constant: T::zero(),
            eq: Vec::new(),
            nonneg: Vec::new(),
            soc: Vec::new(),
            exp: Vec::new(),
        }
    }

    pub fn add_var(&mut self) -> usize {
        self.n_vars += 1;
        self.objective.push(T::zero());
        self.n_vars - 1
    }

    /// Adds `n` variables and returns the index of the first.
    pub fn add_vars(&mut self, n: usize) -> usize {
        let first = self.n_vars;
        for _ in 0..n {
            self.add_var();
        }
        first
    }

    pub fn add_objective(&mut self, i: usize, c: T) {
        self.objective[i] += c;
    }

    pub fn add_eq(&mut self, e: AffineExpr<T>) {
        self.eq.push(e);
    }

    /// `e ≥ 0`.
    pub fn add_nonneg(&mut self, e: AffineExpr<T>) {
        self.nonneg.push(e);
    }

    /// `a ≤ b`.
    pub fn add_le(&mut self, a: AffineExpr<T>, b: AffineExpr<T>) {
        self.nonneg.push(b.add(&a.scaled(-T::one())));
    }

    pub fn add_bounds(&mut self, i: usize, lo: T, hi: T) {
        self.add_nonneg(AffineExpr::var(i).plus_const(-lo));
        self.add_nonneg(AffineExpr::term(i, -T::one()).plus_const(hi));
    }

    pub fn add_soc(&mut self, bound: AffineExpr<T>, entries: Vec<AffineExpr<T>>) {
        self.soc.push(SocConstraint { bound, entries });
    }

    /// `‖entries‖² ≤ u·v` with `u, v ≥ 0` written as a second-order cone.
    pub fn add_rotated_soc(&mut self, u: AffineExpr<T>, v: AffineExpr<T>, entries: Vec<AffineExpr<T>>) {
        let half: T = cst(0.5);
        let bound = u.clone().add(&v).scaled(half);
        let diff = u.add(&v.scaled(-T::one())).scaled(half);
        let mut e = entries;
        e.push(diff);
        self.add_soc(bound, e);
    }

    pub fn add_exp(&mut self, x: AffineExpr<T>, y: AffineExpr<T>, z: AffineExpr<T>) {
        self.exp.push(ExpConstraint { x, y, z });
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).fold(self.objective_constant, |a, (&c, &v)| a + c * v)
    }

    fn check(&self) -> Result<()> {
        let bad = |e: &AffineExpr<T>| e.terms.iter().any(|&(i, c)| i >= self.n_vars || !c.is_finite()) || !e.constant.is_finite();
        let any_bad = self.eq.iter().chain(&self.nonneg).any(bad)
            || self.soc.iter().any(|s| bad(&s.bound) || s.entries.iter().any(bad))
            || self.exp.iter().any(|e| bad(&e.x) || bad(&e.y) || bad(&e.z));
        if any_bad || self.objective.len() != self.n_vars || self.objective.iter().any(|c| !c.is_finite()) {
            return Err(IsacError::InvalidArgument("malformed conic problem".into()));
        }
        Ok(())
    }

    /// Largest scaled residual of any constraint at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut v = T::zero();
        for e in &self.eq {
            v = v.max(e.eval(x).abs() / e.scale(x));
        }
        for e in &self.nonneg {
            v = v.max((-e.eval(x)).max(T::zero()) / e.scale(x));
        }
        for s in &self.soc {
            let n: T = s.entries.iter().map(|e| {
                let y = e.eval(x);
                y * y
            }).sum::<T>().sqrt();
            let scale = s.entries.iter().fold(s.bound.scale(x), |a, e| a + e.scale(x));
            v = v.max((n - s.bound.eval(x)).max(T::zero()) / scale);
        }
        for e in &self.exp {
            let (a, b, c) = (e.x.eval(x), e.y.eval(x), e.z.eval(x));
            let scale = e.x.scale(x) + e.y.scale(x) + e.z.scale(x);
            let gap = if b > T::zero() {
                (b * (a / b).exp() - c).max(T::zero()).max(-b)
            } else {
                a.max(T::zero()) + (-c).max(T::zero()) + (-b).max(T::zero())
            };
            v = v.max(gap / scale);
        }
        v
    }
}

fn push_rows<T: Scalar>(e: &AffineExpr<T>, row: usize, ii: &mut Vec<usize>, jj: &mut Vec<usize>, vv: &mut Vec<T>, b: &mut Vec<T>) {
    // e = g·x + h ∈ K  ⇔  (−g)·x + s = h with s ∈ K
    for &(j, c) in &e.terms {
        ii.push(row);
        jj.push(j);
        vv.push(-c);
    }
    b.push(e.constant);
}

/// Solves `p` with the Clarabel interior-point method.
pub fn solve_conic<T: Scalar>(p: &ConicProblem<T>) -> Result<SolveReport<T>> {
    solve_conic_with(p, &ConicSettings::default())
}

pub fn solve_conic_with<T: Scalar>(p: &ConicProblem<T>, settings: &ConicSettings) -> Result<SolveReport<T>> {
    p.check()?;
    let n = p.n_vars;
    let (mut ii, mut jj, mut vv, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut cones = Vec::new();
    let mut row = 0;
    for e in &p.eq {
        push_rows(e, row, &mut ii, &mut jj, &mut vv, &mut b);
        row += 1;
    }
    if !p.eq.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(p.eq.len()));
    }
    for e in &p.nonneg {
        push_rows(e, row, &mut ii, &mut jj, &mut vv, &mut b);
        row += 1;
    }
    if !p.nonneg.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(p.nonneg.len()));
    }
    for s in &p.soc {
        push_rows(&s.bound, row, &mut ii, &mut jj, &mut vv, &mut b);
        row += 1;
        for e in &s.entries {
            push_rows(e, row, &mut ii, &mut jj, &mut vv, &mut b);
            row += 1;
        }
        cones.push(SupportedConeT::SecondOrderConeT(1 + s.entries.len()));
    }
    for e in &p.exp {
        for c in [&e.x, &e.y, &e.z] {
            push_rows(c, row, &mut ii, &mut jj, &mut vv, &mut b);
            row += 1;
        }
        cones.push(SupportedConeT::ExponentialConeT());
    }
    if row == 0 {
        // Unconstrained linear objective.
        let zero = vec![T::zero(); n];
        return Ok(if p.objective.iter().all(|c| *c == T::zero()) {
            SolveReport { objective: p.objective_constant, ..SolveReport::with_status(SolveStatus::Optimal, zero) }
        } else {
            SolveReport::with_status(SolveStatus::Unbounded, zero)
        });
    }
    let a = CscMatrix::new_from_triplets(row, n, ii, jj, vv);
    let pm = CscMatrix::zeros((n, n));
    let tol: T = if T::epsilon() > cst(1e-10) { T::epsilon().sqrt() } else { cst(1e-9) };
    let cs = DefaultSettings::<T> {
        verbose: false,
        max_iter: settings.max_iter,
        tol_feas: tol,
        tol_gap_abs: tol,
        tol_gap_rel: tol,
        presolve_enable: false,
        ..DefaultSettings::default()
    };
    let mut solver =
        DefaultSolver::new(&pm, &p.objective, &a, &b, &cones, cs).map_err(|e| IsacError::Backend(e.to_string()))?;
    solver.solve();
    let sol = &solver.solution;
    let x = sol.x.clone();
    let viol = p.max_violation(&x);
    let feas = cst::<T>(settings.feas_tol);
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved if viol <= feas => SolveStatus::Optimal,
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            log::debug!("conic solution rejected, scaled violation {:e}", to_f64(viol));
            SolveStatus::NumericalFailure
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterationLimit,
        _ => SolveStatus::NumericalFailure,
    };
    let certificate = (status == SolveStatus::Infeasible).then(|| sol.z.clone());
    Ok(SolveReport {
        status,
        objective: p.objective_value(&x),
        solution: x,
        iterations: sol.iterations as usize,
        max_violation: viol,
        trace: Vec::new(),
        certificate,
        lower_bound: None,
    })
}
