//! Highly-directional transmit covariance matching a flat-top beampattern.

use crate::error::{invalid, Result};
use crate::linalg::{CMat, CVec};
use crate::metrics::beampattern_mse;
use crate::scalar::{cst, from_usize, Scalar};
use crate::scene::steering_vector;
use crate::solvers::psd::{projected_gradient_psd, MatrixObjective, PgOptions};
use crate::solvers::{SolveReport, SolveStatus};

/// Angle grid uniform in `sin θ`: `u_m = −1 + (2m + 1)/M`.
///
/// On this grid `Σ_m a(θ_m) a(θ_m)^H = M·I` for any array with fewer than
/// `M` elements, so the isotropic covariance gives an exactly flat pattern
/// and is the optimal fit to a constant ideal.
pub fn angle_grid<T: Scalar>(m: usize) -> Vec<T> {
    (0..m)
        .map(|i| {
            let u: T = cst::<T>(-1.0) + cst::<T>((2 * i + 1) as f64) / from_usize(m);
            u.asin()
        })
        .collect()
}

/// Flat-top design request.
#[derive(Clone, Debug, PartialEq)]
pub struct HdbfSpec<T: Scalar> {
    pub n: usize,
    /// Mainlobe windows `[low, high]` in radians (several for multi-beam).
    pub mainlobes: Vec<(T, T)>,
    pub grid_points: usize,
    /// Total transmit power (the full budget is radiated).
    pub power: T,
    /// Directions whose pattern must stay below `sidelobe_cap`.
    pub clutter_angles: Vec<T>,
    pub sidelobe_cap: Option<T>,
    pub options: PgOptions,
}

impl<T: Scalar> HdbfSpec<T> {
    /// Single mainlobe of `width` radians centered at `center`.
    pub fn centered(n: usize, center: T, width: T, power: T) -> Self {
        let half = width / cst(2.0);
        Self {
            n,
            mainlobes: vec![(center - half, center + half)],
            grid_points: 181,
            power,
            clutter_angles: Vec::new(),
            sidelobe_cap: None,
            options: PgOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HdbfDesign<T: Scalar> {
    pub covariance: CMat<T>,
    pub grid: Vec<T>,
    pub ideal: Vec<T>,
    pub mse: T,
    /// MSE of `(P/n)·I` on the same grid.
    pub isotropic_mse: T,
    pub report: SolveReport<T>,
}

/// Beampattern MSE plus a quadratic penalty on sidelobe-cap excess.
pub struct PatternObjective<T: Scalar> {
    steering: Vec<CVec<T>>,
    ideal: Vec<T>,
    caps: Vec<(CVec<T>, T)>,
    weight: T,
}

impl<T: Scalar> PatternObjective<T> {
    pub fn new(n: usize, grid: &[T], ideal: Vec<T>) -> Result<Self> {
        let steering = grid.iter().map(|&t| steering_vector(n, t)).collect::<Result<Vec<_>>>()?;
        Ok(Self { steering, ideal, caps: Vec::new(), weight: T::zero() })
    }

    fn pattern(r: &CMat<T>, a: &[crate::scalar::Cplx<T>]) -> T {
        r.quad_form(a).re
    }
}

impl<T: Scalar> MatrixObjective<T> for PatternObjective<T> {
    fn value(&self, r: &CMat<T>) -> T {
        let m: T = from_usize(self.steering.len());
        let mse = self
            .steering
            .iter()
            .zip(&self.ideal)
            .map(|(a, &d)| {
                let e = Self::pattern(r, a) - d;
                e * e
            })
            .sum::<T>()
            / m;
        let pen: T = self
            .caps
            .iter()
            .map(|(a, c)| {
                let e = (Self::pattern(r, a) - *c).max(T::zero());
                e * e
            })
            .sum();
        mse + self.weight * pen
    }

    fn gradient(&self, r: &CMat<T>) -> CMat<T> {
        let n = r.rows();
        let m: T = from_usize(self.steering.len());
        let two: T = cst(2.0);
        let mut g = CMat::zeros(n, n);
        for (a, &d) in self.steering.iter().zip(&self.ideal) {
            let e = Self::pattern(r, a) - d;
            g.add_assign_scaled(&CMat::outer(a, a), two * e / m);
        }
        for (a, c) in &self.caps {
            let e = (Self::pattern(r, a) - *c).max(T::zero());
            if e > T::zero() {
                g.add_assign_scaled(&CMat::outer(a, a), two * self.weight * e);
            }
        }
        g
    }
}

/// Ideal flat-top levels: `P·n` inside any mainlobe, 0 elsewhere. The grid
/// is sparse near endfire, so a window holding no grid point gets the one
/// nearest its center.
pub fn flat_top<T: Scalar>(grid: &[T], mainlobes: &[(T, T)], level: T) -> Vec<T> {
    let mut ideal: Vec<T> = grid
        .iter()
        .map(|&t| if mainlobes.iter().any(|&(lo, hi)| t >= lo && t <= hi) { level } else { T::zero() })
        .collect();
    for &(lo, hi) in mainlobes {
        if grid.iter().any(|&t| t >= lo && t <= hi) {
            continue;
        }
        let mid = (lo + hi) / cst(2.0);
        let nearest = (0..grid.len()).min_by(|&i, &j| {
            let (di, dj) = ((grid[i] - mid).abs(), (grid[j] - mid).abs());
            di.partial_cmp(&dj).unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(i) = nearest {
            ideal[i] = level;
        }
    }
    ideal
}

/// Fits the pattern of `R ⪰ 0, tr R = P` to the flat-top ideal by projected
/// gradient, starting from the isotropic covariance (so the result is never
/// worse than isotropic). Sidelobe caps are enforced by increasing penalty.
pub fn hdbf_design<T: Scalar>(spec: &HdbfSpec<T>) -> Result<HdbfDesign<T>> {
    if spec.n == 0 {
        return Err(invalid("array needs at least one antenna"));
    }
    if spec.power < T::zero() {
        return Err(invalid("power must be non-negative"));
    }
    let grid = angle_grid::<T>(spec.grid_points.max(2 * spec.n));
    let level = spec.power * from_usize(spec.n);
    let ideal = flat_top(&grid, &spec.mainlobes, level);
    if spec.mainlobes.is_empty() || ideal.iter().all(|&d| d == T::zero()) {
        return Err(invalid("at least one mainlobe is needed"));
    }
    let iso = CMat::identity(spec.n).scale(spec.power / from_usize(spec.n));
    let isotropic_mse = beampattern_mse(&iso, &grid, &ideal)?;
    let mut obj = PatternObjective::new(spec.n, &grid, ideal.clone())?;
    if let Some(cap) = spec.sidelobe_cap {
        for &t in &spec.clutter_angles {
            obj.caps.push((steering_vector(spec.n, t)?, cap));
        }
    }
    let rounds = if obj.caps.is_empty() { 1 } else { 8 };
    let mut r = iso.clone();
    let mut report = SolveReport::with_status(SolveStatus::Optimal, Vec::new());
    let mut trace = Vec::new();
    for round in 0..rounds {
        obj.weight = if obj.caps.is_empty() { T::zero() } else { cst::<T>(10f64.powi(round)) / level.max(T::one()) };
        let opts = PgOptions { trace_equality: true, ..spec.options };
        let (next, rep) = projected_gradient_psd(&obj, spec.power, &r, &opts)?;
        let pure = beampattern_mse(&next, &grid, &ideal)?;
        trace.extend(rep.trace.iter().copied());
        r = next;
        report = rep;
        let worst = obj
            .caps
            .iter()
            .map(|(a, c)| (PatternObjective::pattern(&r, a) - *c).max(T::zero()))
            .fold(T::zero(), T::max);
        report.max_violation = worst;
        report.objective = pure;
        if worst <= cst::<T>(1e-6) * level.max(T::one()) {
            break;
        }
    }
    let mse = beampattern_mse(&r, &grid, &ideal)?;
    report.objective = mse;
    report.trace = trace;
    Ok(HdbfDesign { covariance: r, grid, ideal, mse, isotropic_mse, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eig;

    #[test]
    fn grid_sums_to_identity() {
        let grid = angle_grid::<f64>(16);
        let n = 5;
        let mut s = CMat::zeros(n, n);
        for &t in &grid {
            let a = steering_vector(n, t).unwrap();
            s.add_assign_scaled(&CMat::outer(&a, &a), 1.0);
        }
        assert!(s.sub(&CMat::identity(n).scale(16.0)).fro_norm() < 1e-10);
    }

    #[test]
    fn full_window_gives_isotropic() {
        let spec = HdbfSpec { mainlobes: vec![(-2.0, 2.0)], ..HdbfSpec::<f64>::centered(4, 0.0, 0.1, 2.0) };
        let d = hdbf_design(&spec).unwrap();
        let iso = CMat::identity(4).scale(0.5);
        assert!(d.covariance.sub(&iso).fro_norm() < 1e-9);
        assert!((d.mse - d.isotropic_mse).abs() < 1e-9);
    }

    #[test]
    fn single_antenna_uses_full_power() {
        let d = hdbf_design(&HdbfSpec::<f64>::centered(1, 0.3, 0.2, 1.5)).unwrap();
        assert!((d.covariance[(0, 0)].re - 1.5).abs() < 1e-12);
    }

    #[test]
    fn directional_beats_isotropic() {
        let d = hdbf_design(&HdbfSpec::centered(4, 0.2, 10f64.to_radians(), 1.0)).unwrap();
        assert!(d.mse < d.isotropic_mse);
        assert!(hermitian_eig(&d.covariance).values[0] > -1e-9);
        assert!((d.covariance.trace().re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_window_is_rejected() {
        let spec = HdbfSpec { mainlobes: vec![], ..HdbfSpec::centered(4, 0.0, 0.1, 1.0) };
        assert!(hdbf_design(&spec).is_err());
    }

    #[test]
    fn endfire_window_between_grid_points_gets_nearest() {
        let grid = angle_grid::<f64>(8);
        let top = grid[7];
        let lobe = (top + 1e-4, top + 2e-4);
        assert!(lobe.1 < std::f64::consts::FRAC_PI_2);
        let ideal = flat_top(&grid, &[lobe], 2.0);
        assert_eq!(ideal.iter().filter(|&&d| d > 0.0).count(), 1);
        assert_eq!(ideal[7], 2.0);
        let spec = HdbfSpec { mainlobes: vec![lobe], grid_points: 8, ..HdbfSpec::centered(4, 0.0, 0.1, 1.0) };
        assert!(hdbf_design(&spec).is_ok());
    }

    #[test]
    fn sidelobe_caps_are_respected() {
        let mut spec = HdbfSpec::centered(6, 0.0, 20f64.to_radians(), 1.0);
        spec.clutter_angles = vec![0.6, -0.8];
        spec.sidelobe_cap = Some(0.05);
        let d = hdbf_design(&spec).unwrap();
        for &t in &spec.clutter_angles {
            let p = crate::metrics::beampattern(&d.covariance, t).unwrap();
            assert!(p <= 0.05 + 1e-5, "{p}");
        }
    }
}
