//! Successive convex approximation and alternating optimization drivers.

use crate::error::{IsacError, Result};
use crate::scalar::{cst, to_f64, Scalar};
use crate::solvers::conic::{SolveReport, SolveStatus};

/// Outer-loop controls shared by the iterative drivers.
#[derive(Clone, Copy, Debug)]
pub struct IterOptions {
    /// Stop when the relative decrease of the objective falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 100 }
    }
}

/// A problem together with a family of convex surrogates.
///
/// The surrogate built at `at` must upper-bound the objective on the
/// feasible set and match it at `at`.
pub trait Surrogate<T: Scalar> {
    fn objective(&mut self, x: &[T]) -> Result<T>;
    /// Value at `x` of the surrogate expanded at `at`.
    fn surrogate_value(&mut self, x: &[T], at: &[T]) -> Result<T>;
    /// Minimizes the surrogate expanded at `at`.
    fn minimize(&mut self, at: &[T]) -> Result<SolveReport<T>>;
}

fn relative_decrease<T: Scalar>(old: T, new: T) -> f64 {
    to_f64(old - new) / to_f64(old.abs()).max(1.0)
}

/// Checks that `trace` never increases.
pub fn assert_monotone<T: Scalar>(trace: &[T], what: &str) -> Result<()> {
    for w in trace.windows(2) {
        if w[1] > w[0] {
            return Err(IsacError::ContractViolation(format!(
                "{what} objective increased from {:e} to {:e}",
                to_f64(w[0]),
                to_f64(w[1])
            )));
        }
    }
    Ok(())
}

/// Majorize-minimize loop. Only improving steps are accepted, so the
/// reported objective trace is non-increasing.
pub fn sca_minimize<T: Scalar, S: Surrogate<T> + ?Sized>(s: &mut S, x0: Vec<T>, opts: &IterOptions) -> Result<SolveReport<T>> {
    let mut x = x0;
    let mut f = s.objective(&x)?;
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut status = SolveStatus::Optimal;
    let mut violation = T::zero();
    while iterations < opts.max_iter {
        let tight = s.surrogate_value(&x, &x)?;
        let gap = to_f64((tight - f).abs());
        if gap > 1e-9 * to_f64(f.abs()).max(1.0) {
            return Err(IsacError::ContractViolation(format!(
                "surrogate is not tight at the expansion point (gap {gap:e})"
            )));
        }
        let step = s.minimize(&x)?;
        iterations += 1;
        if !step.status.is_optimal() {
            if iterations == 1 {
                status = step.status;
            }
            break;
        }
        let f_new = s.objective(&step.solution)?;
        if !(f_new < f) {
            break;
        }
        let dec = relative_decrease(f, f_new);
        x = step.solution;
        f = f_new;
        violation = step.max_violation;
        trace.push(f);
        if dec < opts.tol {
            break;
        }
    }
    if iterations >= opts.max_iter && status.is_optimal() {
        log::debug!("sca stopped at iteration limit with objective {:e}", to_f64(f));
    }
    assert_monotone(&trace, "sca")?;
    Ok(SolveReport {
        status,
        objective: f,
        solution: x,
        iterations,
        max_violation: violation,
        trace,
        certificate: None,
        lower_bound: None,
    })
}

/// One block update: returns the full variable vector with that block re-optimized.
pub type Block<'a, T> = Box<dyn FnMut(&[T]) -> Result<SolveReport<T>> + 'a>;

/// Cyclic block-coordinate descent. A block reporting infeasibility ends the
/// run with that status; worse block outputs are rejected.
pub fn ao_minimize<T: Scalar>(
    objective: &mut dyn FnMut(&[T]) -> Result<T>,
    blocks: &mut [Block<'_, T>],
    x0: Vec<T>,
    opts: &IterOptions,
) -> Result<SolveReport<T>> {
    let mut x = x0;
    let mut f = objective(&x)?;
    let mut trace = vec![f];
    let mut sweeps = 0;
    let mut violation = T::zero();
    let slack: T = cst(0.0);
    while sweeps < opts.max_iter {
        sweeps += 1;
        let f_start = f;
        for block in blocks.iter_mut() {
            let r = block(&x)?;
            match r.status {
                SolveStatus::Optimal => {}
                SolveStatus::Infeasible => {
                    return Ok(SolveReport { trace, iterations: sweeps, ..SolveReport::with_status(SolveStatus::Infeasible, x) });
                }
                _ => continue,
            }
            let f_new = objective(&r.solution)?;
            if f_new <= f + slack {
                x = r.solution;
                f = f_new;
                violation = r.max_violation;
                trace.push(f);
            }
        }
        if relative_decrease(f_start, f) < opts.tol {
            break;
        }
    }
    assert_monotone(&trace, "ao")?;
    Ok(SolveReport {
        status: SolveStatus::Optimal,
        objective: f,
        solution: x,
        iterations: sweeps,
        max_violation: violation,
        trace,
        certificate: None,
        lower_bound: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact quadratic surrogate of a convex quadratic.
    struct Quadratic;

    impl Surrogate<f64> for Quadratic {
        fn objective(&mut self, x: &[f64]) -> Result<f64> {
            Ok((x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2))
        }
        fn surrogate_value(&mut self, x: &[f64], _at: &[f64]) -> Result<f64> {
            self.objective(x)
        }
        fn minimize(&mut self, _at: &[f64]) -> Result<SolveReport<f64>> {
            Ok(SolveReport::with_status(SolveStatus::Optimal, vec![3.0, -1.0]))
        }
    }

    #[test]
    fn exact_surrogate_converges_in_one_step() {
        let r = sca_minimize(&mut Quadratic, vec![0.0, 0.0], &IterOptions::default()).unwrap();
        assert_eq!(r.solution, vec![3.0, -1.0]);
        assert_eq!(r.trace.len(), 2);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn stationary_start_terminates_immediately() {
        let r = sca_minimize(&mut Quadratic, vec![3.0, -1.0], &IterOptions::default()).unwrap();
        assert_eq!(r.trace, vec![0.0]);
        assert_eq!(r.solution, vec![3.0, -1.0]);
    }

    /// `x⁴ − 3x² + x` on `[−3, 3]` majorized by its curvature bound.
    pub(crate) struct Quartic;

    impl Quartic {
        const L: f64 = 102.0;
        fn f(x: f64) -> f64 {
            x.powi(4) - 3.0 * x * x + x
        }
        fn df(x: f64) -> f64 {
            4.0 * x.powi(3) - 6.0 * x + 1.0
        }
    }

    impl Surrogate<f64> for Quartic {
        fn objective(&mut self, x: &[f64]) -> Result<f64> {
            Ok(Self::f(x[0]))
        }
        fn surrogate_value(&mut self, x: &[f64], at: &[f64]) -> Result<f64> {
            let d = x[0] - at[0];
            Ok(Self::f(at[0]) + Self::df(at[0]) * d + 0.5 * Self::L * d * d)
        }
        fn minimize(&mut self, at: &[f64]) -> Result<SolveReport<f64>> {
            let x = (at[0] - Self::df(at[0]) / Self::L).clamp(-3.0, 3.0);
            Ok(SolveReport::with_status(SolveStatus::Optimal, vec![x]))
        }
    }

    #[test]
    fn quartic_reaches_grid_stationary_point() {
        let opts = IterOptions { tol: 1e-14, max_iter: 20_000 };
        let r = sca_minimize(&mut Quartic, vec![2.5], &opts).unwrap();
        // Oracle: local minima of the quartic located on a dense grid.
        let grid: Vec<f64> = (0..=600_000).map(|i| -3.0 + 6.0 * i as f64 / 600_000.0).collect();
        let minima: Vec<f64> = grid
            .windows(3)
            .filter(|w| Quartic::f(w[1]) <= Quartic::f(w[0]) && Quartic::f(w[1]) <= Quartic::f(w[2]))
            .map(|w| w[1])
            .collect();
        assert!(minima.iter().any(|m| (m - r.solution[0]).abs() < 1e-4), "{:?} vs {minima:?}", r.solution);
        assert_monotone(&r.trace, "test").unwrap();
    }

    struct Loose;

    impl Surrogate<f64> for Loose {
        fn objective(&mut self, x: &[f64]) -> Result<f64> {
            Ok(x[0] * x[0])
        }
        fn surrogate_value(&mut self, x: &[f64], _at: &[f64]) -> Result<f64> {
            Ok(x[0] * x[0] + 1.0)
        }
        fn minimize(&mut self, _at: &[f64]) -> Result<SolveReport<f64>> {
            Ok(SolveReport::with_status(SolveStatus::Optimal, vec![0.0]))
        }
    }

    #[test]
    fn loose_surrogate_is_a_contract_violation() {
        assert!(matches!(
            sca_minimize(&mut Loose, vec![1.0], &IterOptions::default()),
            Err(IsacError::ContractViolation(_))
        ));
    }

    fn coordinate_blocks<'a>(grad: fn(&[f64], usize) -> f64, curv: f64) -> Vec<Block<'a, f64>> {
        (0..2)
            .map(|i| {
                Box::new(move |x: &[f64]| {
                    let mut y = x.to_vec();
                    y[i] -= grad(x, i) / curv;
                    Ok(SolveReport::with_status(SolveStatus::Optimal, y))
                }) as Block<'a, f64>
            })
            .collect()
    }

    #[test]
    fn separable_objective_converges_in_one_sweep() {
        let mut f = |x: &[f64]| Ok((x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2));
        let grad = |x: &[f64], i: usize| if i == 0 { 2.0 * (x[0] - 1.0) } else { 2.0 * (x[1] + 2.0) };
        let mut blocks = coordinate_blocks(grad, 2.0);
        let r = ao_minimize(&mut f, &mut blocks, vec![5.0, 5.0], &IterOptions::default()).unwrap();
        assert_eq!(r.solution, vec![1.0, -2.0]);
        assert!(r.iterations <= 2);
    }

    #[test]
    fn bilinear_objective_matches_grid_oracle() {
        // f(τ, p) = τp + (τ−1)² + (p−1)²; each block minimizes exactly.
        let mut f = |x: &[f64]| Ok(x[0] * x[1] + (x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2));
        let mut blocks: Vec<Block<'_, f64>> = vec![
            Box::new(|x: &[f64]| Ok(SolveReport::with_status(SolveStatus::Optimal, vec![1.0 - x[1] / 2.0, x[1]]))),
            Box::new(|x: &[f64]| Ok(SolveReport::with_status(SolveStatus::Optimal, vec![x[0], 1.0 - x[0] / 2.0]))),
        ];
        let opts = IterOptions { tol: 1e-15, max_iter: 500 };
        let r = ao_minimize(&mut f, &mut blocks, vec![2.0, 2.0], &opts).unwrap();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=2000 {
            for j in 0..=2000 {
                let (t, p) = (i as f64 / 1000.0, j as f64 / 1000.0);
                let v = t * p + (t - 1.0).powi(2) + (p - 1.0).powi(2);
                if v < best.0 {
                    best = (v, t, p);
                }
            }
        }
        assert!((r.solution[0] - best.1).abs() < 2e-3 && (r.solution[1] - best.2).abs() < 2e-3);
        assert_monotone(&r.trace, "test").unwrap();
    }

    #[test]
    fn fixed_point_terminates_immediately() {
        let mut f = |x: &[f64]| Ok(x[0] * x[0]);
        let mut blocks: Vec<Block<'_, f64>> = vec![Box::new(|x: &[f64]| Ok(SolveReport::with_status(SolveStatus::Optimal, x.to_vec())))];
        let r = ao_minimize(&mut f, &mut blocks, vec![0.0], &IterOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.solution, vec![0.0]);
    }

    #[test]
    fn infeasible_block_propagates() {
        let mut f = |x: &[f64]| Ok(x[0]);
        let mut blocks: Vec<Block<'_, f64>> = vec![Box::new(|x: &[f64]| Ok(SolveReport::with_status(SolveStatus::Infeasible, x.to_vec())))];
        let r = ao_minimize(&mut f, &mut blocks, vec![1.0], &IterOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }
}
