//! Binary relaxation with a concave penalty, and big-M product linearization.

use crate::error::Result;
use crate::scalar::{cst, to_f64, Scalar};
use crate::solvers::conic::{solve_conic, AffineExpr, ConicProblem, SolveReport, SolveStatus};
use crate::solvers::sca::{sca_minimize, IterOptions, Surrogate};

/// Default distance-to-binary tolerance.
pub const BINARY_TOL: f64 = 1e-4;

/// Geometric penalty-weight schedule.
#[derive(Clone, Copy, Debug)]
pub struct PenaltySchedule {
    pub start: f64,
    pub factor: f64,
    pub cap: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self { start: 1.0, factor: 5.0, cap: 1e8 }
    }
}

impl PenaltySchedule {
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::new();
        let mut rho = self.start;
        while rho <= self.cap {
            w.push(rho);
            rho *= self.factor;
        }
        if w.last().is_none_or(|&l| l < self.cap) {
            w.push(self.cap);
        }
        w
    }
}

/// A problem whose listed variables are binary in the original model and
/// relaxed to `[0, 1]` in the penalized one.
pub trait PenalizedProblem<T: Scalar> {
    fn binaries(&self) -> &[usize];
    /// Original objective (no penalty).
    fn objective(&mut self, x: &[T]) -> Result<T>;
    fn is_feasible(&mut self, x: &[T]) -> Result<bool>;
    /// Solves the relaxation with penalty `rho·Σ x(1−x)` over the binaries, starting from `x`.
    fn solve_penalized(&mut self, rho: T, x: &[T]) -> Result<SolveReport<T>>;
}

pub fn binary_gap<T: Scalar>(x: &[T], binaries: &[usize]) -> T {
    binaries.iter().map(|&i| x[i].min(T::one() - x[i]).abs()).fold(T::zero(), T::max)
}

/// Increases the penalty weight until every relaxed binary is within
/// `tol_bin` of 0 or 1; otherwise reports a numerical failure.
pub fn penalize_binary<T: Scalar, P: PenalizedProblem<T> + ?Sized>(
    problem: &mut P,
    schedule: &PenaltySchedule,
    tol_bin: f64,
    x0: Vec<T>,
) -> Result<SolveReport<T>> {
    let tol: T = cst(tol_bin);
    if binary_gap(&x0, problem.binaries()) <= tol && problem.is_feasible(&x0)? {
        let objective = problem.objective(&x0)?;
        return Ok(SolveReport { objective, trace: vec![objective], ..SolveReport::with_status(SolveStatus::Optimal, x0) });
    }
    let mut x = x0;
    let mut trace = Vec::new();
    let mut rounds = 0;
    for rho in schedule.weights() {
        rounds += 1;
        let r = problem.solve_penalized(cst(rho), &x)?;
        match r.status {
            SolveStatus::Optimal => {}
            s => return Ok(SolveReport { iterations: rounds, trace, ..SolveReport::with_status(s, x) }),
        }
        x = r.solution;
        trace.push(problem.objective(&x)?);
        if binary_gap(&x, problem.binaries()) <= tol {
            // Snap to exact binaries; the residual is within tolerance.
            for &i in problem.binaries() {
                x[i] = if x[i] >= cst(0.5) { T::one() } else { T::zero() };
            }
            let objective = problem.objective(&x)?;
            return Ok(SolveReport {
                status: SolveStatus::Optimal,
                objective,
                solution: x,
                iterations: rounds,
                max_violation: r.max_violation,
                trace,
                certificate: None,
                lower_bound: None,
            });
        }
    }
    log::debug!("penalty schedule exhausted, binary gap {:e}", to_f64(binary_gap(&x, problem.binaries())));
    Ok(SolveReport { iterations: rounds, trace, ..SolveReport::with_status(SolveStatus::NumericalFailure, x) })
}

/// Linear-objective conic problem with some variables binary. The penalty
/// `ρ·Σ x(1−x)` is concave, so each round runs SCA on its linearization.
#[derive(Clone, Debug)]
pub struct LinearBinaryPenalty<T: Scalar> {
    pub problem: ConicProblem<T>,
    pub binaries: Vec<usize>,
    pub inner: IterOptions,
}

impl<T: Scalar> LinearBinaryPenalty<T> {
    pub fn new(mut problem: ConicProblem<T>, binaries: Vec<usize>) -> Self {
        for &i in &binaries {
            problem.add_bounds(i, T::zero(), T::one());
        }
        Self { problem, binaries, inner: IterOptions { tol: 1e-9, max_iter: 50 } }
    }

    /// Solution of the plain relaxation, a natural starting point.
    pub fn relaxed_start(&self) -> Result<SolveReport<T>> {
        solve_conic(&self.problem)
    }
}

struct Round<'a, T: Scalar> {
    base: &'a ConicProblem<T>,
    binaries: &'a [usize],
    rho: T,
}

impl<T: Scalar> Surrogate<T> for Round<'_, T> {
    fn objective(&mut self, x: &[T]) -> Result<T> {
        let pen: T = self.binaries.iter().map(|&i| x[i] * (T::one() - x[i])).sum();
        Ok(self.base.objective_value(x) + self.rho * pen)
    }

    fn surrogate_value(&mut self, x: &[T], at: &[T]) -> Result<T> {
        let two: T = cst(2.0);
        let lin: T = self
            .binaries
            .iter()
            .map(|&i| at[i] * (T::one() - at[i]) + (T::one() - two * at[i]) * (x[i] - at[i]))
            .sum();
        Ok(self.base.objective_value(x) + self.rho * lin)
    }

    fn minimize(&mut self, at: &[T]) -> Result<SolveReport<T>> {
        let two: T = cst(2.0);
        let mut p = self.base.clone();
        for &i in self.binaries {
            p.add_objective(i, self.rho * (T::one() - two * at[i]));
        }
        solve_conic(&p)
    }
}

impl<T: Scalar> PenalizedProblem<T> for LinearBinaryPenalty<T> {
    fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    fn objective(&mut self, x: &[T]) -> Result<T> {
        Ok(self.problem.objective_value(x))
    }

    fn is_feasible(&mut self, x: &[T]) -> Result<bool> {
        Ok(x.len() == self.problem.n_vars && self.problem.max_violation(x) <= cst(1e-7))
    }

    fn solve_penalized(&mut self, rho: T, x: &[T]) -> Result<SolveReport<T>> {
        let mut round = Round { base: &self.problem, binaries: &self.binaries, rho };
        if x.len() != self.problem.n_vars || self.problem.max_violation(x) > cst(1e-6) {
            // The linearization point must be feasible for the SCA trace to be meaningful.
            let first = round.minimize(x)?;
            if !first.status.is_optimal() {
                return Ok(first);
            }
            return sca_minimize(&mut round, first.solution, &self.inner);
        }
        sca_minimize(&mut round, x.to_vec(), &self.inner)
    }
}

/// Adds `u` with `u = y·z` for binary `y` and `z ∈ [0, z_max]`:
/// `u ≤ z_max·y`, `u ≤ z`, `u ≥ z − z_max(1−y)`, `u ≥ 0`. Returns `u`.
pub fn big_m_product<T: Scalar>(p: &mut ConicProblem<T>, y: usize, z: usize, z_max: T) -> usize {
    let u = p.add_var();
    add_big_m_product(p, y, AffineExpr::var(z), u, z_max);
    u
}

/// Big-M rows for `u = y·z` with an affine `z`.
pub fn add_big_m_product<T: Scalar>(p: &mut ConicProblem<T>, y: usize, z: AffineExpr<T>, u: usize, z_max: T) {
    let neg = -T::one();
    p.add_nonneg(AffineExpr::term(y, z_max).plus(u, neg));
    p.add_nonneg(z.clone().plus(u, neg));
    p.add_nonneg(AffineExpr::var(u).add(&z.scaled(neg)).plus(y, neg * z_max).plus_const(z_max));
    p.add_nonneg(AffineExpr::var(u));
}
