//! Convex handling of a product `u = a·b` of two non-negative variables.
//!
//! `a·b = ¼(a+b)² − ¼(a−b)²` is a difference of convex functions. Keeping one
//! square and linearizing the other at an expansion point gives a convex
//! inner approximation of either side of the equality, tight at that point.

use crate::scalar::{cst, Scalar};
use crate::solvers::conic::{AffineExpr, ConicProblem};

/// `u ≥ a·b`, inner-approximated at `(a0, b0)`:
/// `¼(a+b)² ≤ u + ¼[2d₀(a−b) − d₀²]` with `d₀ = a0 − b0`.
pub fn lower_cut<T: Scalar>(p: &mut ConicProblem<T>, a: &AffineExpr<T>, b: &AffineExpr<T>, u: &AffineExpr<T>, at: (T, T)) {
    let quarter: T = cst(0.25);
    let half: T = cst(0.5);
    let d0 = at.0 - at.1;
    let diff = a.clone().add(&b.clone().scaled(-T::one()));
    let rhs = u.clone().add(&diff.scaled(half * d0)).plus_const(-quarter * d0 * d0);
    let sum = a.clone().add(b).scaled(half);
    // ‖(a+b)/2‖² ≤ rhs·1
    p.add_rotated_soc(rhs, AffineExpr::constant(T::one()), vec![sum]);
}

/// `u ≤ a·b`, inner-approximated at `(a0, b0)`:
/// `¼(a−b)² ≤ ¼[2s₀(a+b) − s₀²] − u` with `s₀ = a0 + b0`.
pub fn upper_cut<T: Scalar>(p: &mut ConicProblem<T>, a: &AffineExpr<T>, b: &AffineExpr<T>, u: &AffineExpr<T>, at: (T, T)) {
    let quarter: T = cst(0.25);
    let half: T = cst(0.5);
    let s0 = at.0 + at.1;
    let sum = a.clone().add(b);
    let rhs = sum.scaled(half * s0).plus_const(-quarter * s0 * s0).add(&u.clone().scaled(-T::one()));
    let diff = a.clone().add(&b.clone().scaled(-T::one())).scaled(half);
    p.add_rotated_soc(rhs, AffineExpr::constant(T::one()), vec![diff]);
}

/// McCormick envelope of `u = a·b` over `[0, a_max] × [0, b_max]`.
pub fn mccormick<T: Scalar>(p: &mut ConicProblem<T>, a: usize, b: usize, u: usize, a_max: T, b_max: T) {
    let neg = -T::one();
    p.add_nonneg(AffineExpr::var(u));
    // u ≥ b_max·a + a_max·b − a_max·b_max
    p.add_nonneg(AffineExpr::var(u).plus(a, neg * b_max).plus(b, neg * a_max).plus_const(a_max * b_max));
    // u ≤ b_max·a, u ≤ a_max·b
    p.add_nonneg(AffineExpr::term(a, b_max).plus(u, neg));
    p.add_nonneg(AffineExpr::term(b, a_max).plus(u, neg));
}

/// Variables and bounds of one reformulated product.
#[derive(Clone, Copy, Debug)]
pub struct BilinearAux {
    pub u: usize,
}

/// Adds `u` standing for `τ·p` with `τ ∈ [0, 1]`, `p ∈ [0, p_max]`: box
/// bounds, the McCormick envelope and both DC cuts expanded at `at`.
pub fn bilinear_reformulate<T: Scalar>(prob: &mut ConicProblem<T>, tau: usize, p: usize, p_max: T, at: (T, T)) -> BilinearAux {
    prob.add_bounds(tau, T::zero(), T::one());
    prob.add_bounds(p, T::zero(), p_max);
    let u = prob.add_var();
    mccormick(prob, tau, p, u, T::one(), p_max);
    let (a, b, uu) = (AffineExpr::var(tau), AffineExpr::var(p), AffineExpr::var(u));
    lower_cut(prob, &a, &b, &uu, at);
    upper_cut(prob, &a, &b, &uu, at);
    BilinearAux { u }
}
