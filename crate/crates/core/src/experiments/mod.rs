//! Monte Carlo case studies: coordinated cellular sensing (case A) and a
//! distributed antenna network with time splitting (case B).

use rand::Rng;

use crate::error::IsacError;
use crate::scene::{stream, substream};

pub mod case_a;
pub mod case_b;
pub mod demo;

pub use case_a::{run_case_a, sweep_infeasibility, CaseA, InfeasibilityRow, InfeasibilitySweep, Verdict};
pub use demo::{run_demo, DemoOutput};
pub use case_b::{run_case_b, sweep_energy_vs_antennas, CaseB, EnergyRow, EnergySweep};

/// Seed of setup `i` under `master`.
pub fn setup_seed(master: u64, i: usize) -> u64 {
    substream(master, stream::SETUP, i as u64, 0).gen()
}

pub fn setup_seeds(master: u64, n: usize) -> Vec<u64> {
    (0..n).map(|i| setup_seed(master, i)).collect()
}

/// Normal-approximation half-width of a 95 % interval for a proportion.
pub fn proportion_halfwidth(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Sample mean and 95 % half-width of the mean.
pub fn mean_halfwidth(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// Errors that end a sweep instead of being counted as a failed setup.
pub(crate) fn is_fatal(e: &IsacError) -> bool {
    matches!(
        e,
        IsacError::ContractViolation(_) | IsacError::ConfigField { .. } | IsacError::InvalidArgument(_) | IsacError::DimensionMismatch { .. }
    )
}

pub(crate) fn check_grid(name: &str, grid: &[f64]) -> crate::Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|g| !g.is_finite()) {
        return Err(IsacError::ConfigField { field: name.into(), message: "grid must be non-empty, finite and strictly increasing".into() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfwidths() {
        assert_eq!(proportion_halfwidth(0.0, 10), 0.0);
        assert!((proportion_halfwidth(0.5, 100) - 0.098).abs() < 1e-12);
        let (m, h) = mean_halfwidth(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - 1.96).abs() < 1e-12);
    }

    #[test]
    fn setup_seeds_are_distinct_and_stable() {
        let a = setup_seeds(7, 50);
        assert_eq!(a, setup_seeds(7, 50));
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 50);
    }
}
