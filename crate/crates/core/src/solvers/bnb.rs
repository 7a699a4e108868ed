//! Binary integer programs: exact branch and bound and LP-relaxation rounding.

use crate::error::{invalid, Result};
use crate::scalar::{cst, Scalar};
use crate::solvers::conic::{solve_conic, AffineExpr, ConicProblem, SolveReport, SolveStatus};

const INT_TOL: f64 = 1e-6;

/// Sparse row `Σ coef·x[idx]`.
pub type Row<T> = Vec<(usize, T)>;

/// Minimize `cost^T x` over `x ∈ {0,1}^n` with `le` rows `a·x ≤ b` and `eq` rows `a·x = b`.
#[derive(Clone, Debug, PartialEq)]
pub struct BipProblem<T: Scalar> {
    pub n: usize,
    pub cost: Vec<T>,
    pub le: Vec<(Row<T>, T)>,
    pub eq: Vec<(Row<T>, T)>,
}

fn row_value<T: Scalar>(row: &Row<T>, x: &[T]) -> T {
    row.iter().fold(T::zero(), |acc, &(i, c)| acc + c * x[i])
}

impl<T: Scalar> BipProblem<T> {
    pub fn new(cost: Vec<T>) -> Self {
        Self { n: cost.len(), cost, le: Vec::new(), eq: Vec::new() }
    }

    pub fn add_le(&mut self, row: Row<T>, rhs: T) {
        self.le.push((row, rhs));
    }

    pub fn add_eq(&mut self, row: Row<T>, rhs: T) {
        self.eq.push((row, rhs));
    }

    pub fn objective(&self, x: &[T]) -> T {
        self.cost.iter().zip(x).fold(T::zero(), |a, (&c, &v)| a + c * v)
    }

    /// Exact feasibility of a 0/1 point (with a small absolute tolerance).
    pub fn is_feasible(&self, x: &[T]) -> bool {
        let tol: T = cst(1e-9);
        x.len() == self.n
            && x.iter().all(|&v| v == T::zero() || v == T::one())
            && self.le.iter().all(|(r, b)| row_value(r, x) <= *b + tol)
            && self.eq.iter().all(|(r, b)| (row_value(r, x) - *b).abs() <= tol)
    }

    fn validate(&self) -> Result<()> {
        if self.cost.len() != self.n {
            return Err(invalid("cost length differs from variable count"));
        }
        let ok = self.le.iter().chain(&self.eq).all(|(r, _)| r.iter().all(|&(i, _)| i < self.n));
        if !ok {
            return Err(invalid("constraint references unknown variable"));
        }
        Ok(())
    }

    /// LP relaxation with some variables fixed.
    pub fn relaxation(&self, fixed: &[Option<bool>]) -> ConicProblem<T> {
        let mut p = ConicProblem::new();
        p.add_vars(self.n);
        for (i, &c) in self.cost.iter().enumerate() {
            p.add_objective(i, c);
            match fixed.get(i).copied().flatten() {
                Some(v) => p.add_eq(AffineExpr::var(i).plus_const(if v { -T::one() } else { T::zero() })),
                None => p.add_bounds(i, T::zero(), T::one()),
            }
        }
        for (r, b) in &self.le {
            let e = r.iter().fold(AffineExpr::constant(*b), |e, &(i, c)| e.plus(i, -c));
            p.add_nonneg(e);
        }
        for (r, b) in &self.eq {
            let e = r.iter().fold(AffineExpr::constant(-*b), |e, &(i, c)| e.plus(i, c));
            p.add_eq(e);
        }
        p
    }
}

fn first_fractional<T: Scalar>(x: &[T]) -> Option<usize> {
    let tol: T = cst(INT_TOL);
    x.iter().position(|&v| v.min(T::one() - v).abs() > tol)
}

fn rounded<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| if v >= cst(0.5) { T::one() } else { T::zero() }).collect()
}

/// Depth-first branch and bound on LP relaxations. Branches on the lowest
/// fractional index, exploring `x = 0` first. `iterations` counts nodes.
pub fn branch_and_bound<T: Scalar>(bip: &BipProblem<T>) -> Result<SolveReport<T>> {
    bip.validate()?;
    let mut best: Option<(T, Vec<T>)> = None;
    let mut stack: Vec<Vec<Option<bool>>> = vec![vec![None; bip.n]];
    let mut nodes = 0;
    let mut root_bound = None;
    let mut certificate = None;
    while let Some(fixed) = stack.pop() {
        nodes += 1;
        let lp = solve_conic(&bip.relaxation(&fixed))?;
        if nodes == 1 {
            if lp.status == SolveStatus::Infeasible {
                certificate = lp.certificate.clone();
            }
            root_bound = lp.status.is_optimal().then_some(lp.objective);
        }
        match lp.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => continue,
            s => return Ok(SolveReport { iterations: nodes, ..SolveReport::with_status(s, vec![T::zero(); bip.n]) }),
        }
        if let Some((inc, _)) = &best {
            if lp.objective >= *inc - cst::<T>(1e-7) * (T::one() + inc.abs()) {
                continue;
            }
        }
        match first_fractional(&lp.solution) {
            None => {
                let x = rounded(&lp.solution);
                if bip.is_feasible(&x) {
                    let v = bip.objective(&x);
                    if best.as_ref().is_none_or(|(inc, _)| v < *inc) {
                        best = Some((v, x));
                    }
                    continue;
                }
                // Numerically integral but infeasible after rounding: branch on
                // the first still-free variable.
                if let Some(i) = fixed.iter().position(|f| f.is_none()) {
                    push_children(&mut stack, &fixed, i);
                }
            }
            Some(i) => push_children(&mut stack, &fixed, i),
        }
    }
    Ok(match best {
        Some((v, x)) => SolveReport {
            objective: v,
            iterations: nodes,
            lower_bound: root_bound,
            ..SolveReport::with_status(SolveStatus::Optimal, x)
        },
        None => SolveReport {
            iterations: nodes,
            certificate,
            ..SolveReport::with_status(SolveStatus::Infeasible, vec![T::zero(); bip.n])
        },
    })
}

fn push_children(stack: &mut Vec<Vec<Option<bool>>>, fixed: &[Option<bool>], i: usize) {
    for v in [true, false] {
        let mut f = fixed.to_vec();
        f[i] = Some(v);
        stack.push(f);
    }
}

/// Rounds the LP relaxation; if the rounded point is infeasible, dives by
/// fixing the most decided free variable and re-solving. The LP optimum is
/// reported as `lower_bound`; a dead end is a declared failure.
pub fn lpr_round<T: Scalar>(bip: &BipProblem<T>) -> Result<SolveReport<T>> {
    bip.validate()?;
    let mut fixed: Vec<Option<bool>> = vec![None; bip.n];
    let root = solve_conic(&bip.relaxation(&fixed))?;
    if !root.status.is_optimal() {
        return Ok(SolveReport { iterations: 1, certificate: root.certificate, ..SolveReport::with_status(root.status, vec![T::zero(); bip.n]) });
    }
    let bound = root.objective;
    let mut lp = root;
    let mut solves = 1;
    loop {
        let x = rounded(&lp.solution);
        if bip.is_feasible(&x) {
            return Ok(SolveReport {
                objective: bip.objective(&x),
                iterations: solves,
                lower_bound: Some(bound),
                ..SolveReport::with_status(SolveStatus::Optimal, x)
            });
        }
        // Most decided free variable: farthest from 1/2.
        let half: T = cst(0.5);
        let pick = (0..bip.n)
            .filter(|&i| fixed[i].is_none())
            .max_by(|&a, &b| {
                let da = (lp.solution[a] - half).abs();
                let db = (lp.solution[b] - half).abs();
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a))
            });
        let Some(i) = pick else { break };
        let prefer = lp.solution[i] >= half;
        let mut next = None;
        for v in [prefer, !prefer] {
            let mut f = fixed.clone();
            f[i] = Some(v);
            let r = solve_conic(&bip.relaxation(&f))?;
            solves += 1;
            if r.status.is_optimal() {
                fixed = f;
                next = Some(r);
                break;
            }
        }
        match next {
            Some(r) => lp = r,
            None => break,
        }
    }
    Ok(SolveReport {
        iterations: solves,
        lower_bound: Some(bound),
        ..SolveReport::with_status(SolveStatus::NumericalFailure, vec![T::zero(); bip.n])
    })
}

/// Exhaustive search over all `2^n` points (`n ≤ 24`).
pub fn enumerate_bip<T: Scalar>(bip: &BipProblem<T>) -> Option<(T, Vec<T>)> {
    assert!(bip.n <= 24, "enumeration limited to 24 binaries");
    let mut best: Option<(T, Vec<T>)> = None;
    for m in 0u32..(1 << bip.n) {
        let x: Vec<T> = (0..bip.n).map(|i| if (m >> i) & 1 == 1 { T::one() } else { T::zero() }).collect();
        if bip.is_feasible(&x) {
            let v = bip.objective(&x);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, x));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_variable() {
        let bip = BipProblem::new(vec![1.0]);
        let r = branch_and_bound(&bip).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.solution, vec![0.0]);
    }

    #[test]
    fn excluded_values_are_infeasible() {
        let mut bip = BipProblem::new(vec![1.0]);
        bip.add_le(vec![(0, 1.0)], -0.5);
        let r = branch_and_bound(&bip).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.certificate.is_some());
    }

    #[test]
    fn knapsack_matches_enumeration() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c ≤ 4
        let mut bip = BipProblem::new(vec![-5.0, -4.0, -3.0]);
        bip.add_le(vec![(0, 2.0), (1, 3.0), (2, 1.0)], 4.0);
        let r = branch_and_bound(&bip).unwrap();
        let (v, x) = enumerate_bip(&bip).unwrap();
        assert_eq!(r.objective, v);
        assert_eq!(r.solution, x);
    }

    #[test]
    fn integral_relaxation_rounds_to_optimum() {
        let mut bip = BipProblem::new(vec![2.0, 5.0]);
        bip.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0);
        let a = branch_and_bound(&bip).unwrap();
        let b = lpr_round(&bip).unwrap();
        assert_eq!(a.solution, b.solution);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn rounding_dead_end_is_failure() {
        // LP optimum (½, ½) exists but no 0/1 point satisfies both rows.
        let mut bip = BipProblem::new(vec![1.0, 1.0]);
        bip.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0);
        bip.add_eq(vec![(0, 1.0), (1, -1.0)], 0.0);
        assert_eq!(lpr_round(&bip).unwrap().status, SolveStatus::NumericalFailure);
        assert_eq!(branch_and_bound(&bip).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn random_six_variable_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let mut bip = BipProblem::new((0..6).map(|_| rng.gen_range(-5.0..5.0)).collect());
            for _ in 0..3 {
                let row: Row<f64> = (0..6).map(|i| (i, rng.gen_range(0.0..3.0))).collect();
                bip.add_le(row, rng.gen_range(2.0..6.0));
            }
            let exact = branch_and_bound(&bip).unwrap();
            let (v, _) = enumerate_bip(&bip).unwrap();
            assert!((exact.objective - v).abs() < 1e-9);
            let approx = lpr_round(&bip).unwrap();
            if approx.status.is_optimal() {
                assert!(approx.objective >= exact.objective - 1e-9);
            }
        }
    }
}
