//! Communication and sensing quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, IsacError, Result};
use crate::interference::{
    clutter_power, crosstalk_power, mui_power, self_interference_at, sensing_leakage_power, user_amplitude, BeamPlan,
};
use crate::linalg::{dot, norm_sqr, CMat, CVec};
use crate::scalar::{cst, from_usize, to_f64, Cplx, Scalar};
use crate::scene::{steering_vector, ChannelSet};

/// Fisher information below this value is treated as zero.
pub const FISHER_FLOOR: f64 = 1e-15;

/// Quality-of-service thresholds of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QosTargets {
    /// Minimum SINR per CU in dB. An absent key means no target.
    #[serde(default)]
    pub sinr_min_db: Option<f64>,
    /// Minimum achievable rate per CU in bits/s/Hz.
    #[serde(default)]
    pub rate_min: Option<f64>,
    /// Maximum angle CRLB per ST (rad², normalized).
    pub crlb_max: f64,
    /// Minimum echo power per ST in dBm.
    pub echo_min_dbm: f64,
    /// Transmit power budget per BS in watts.
    pub power_budget: f64,
    /// Fronthaul capacity per RRH in bits/s/Hz.
    pub fronthaul_cap: f64,
}

impl Default for QosTargets {
    fn default() -> Self {
        Self {
            sinr_min_db: Some(8.0),
            rate_min: None,
            crlb_max: 1.0,
            echo_min_dbm: -90.0,
            power_budget: 1.0,
            fronthaul_cap: 40.0,
        }
    }
}

impl QosTargets {
    pub fn validate(&self) -> Result<()> {
        let field = |f: &str, m: &str| IsacError::ConfigField { field: f.into(), message: m.into() };
        if self.sinr_min_db.is_some() && self.rate_min.is_some() {
            return Err(field("rate_min", "at most one of sinr_min_db and rate_min may be set"));
        }
        if let Some(s) = self.sinr_min_db {
            if !s.is_finite() {
                return Err(field("sinr_min_db", "must be finite"));
            }
        }
        if let Some(r) = self.rate_min {
            if !(r.is_finite() && r >= 0.0) {
                return Err(field("rate_min", "must be finite and non-negative"));
            }
        }
        if !(self.crlb_max.is_finite() && self.crlb_max > 0.0) {
            return Err(field("crlb_max", "must be positive"));
        }
        if !self.echo_min_dbm.is_finite() {
            return Err(field("echo_min_dbm", "must be finite"));
        }
        if !(self.power_budget.is_finite() && self.power_budget >= 0.0) {
            return Err(field("power_budget", "must be finite and non-negative"));
        }
        if !(self.fronthaul_cap.is_finite() && self.fronthaul_cap > 0.0) {
            return Err(field("fronthaul_cap", "must be positive"));
        }
        Ok(())
    }

    /// Linear SINR target, if one is set.
    pub fn sinr_min_linear(&self) -> Option<f64> {
        self.sinr_min_db.map(db_to_ratio)
    }

    pub fn echo_min_watts(&self) -> f64 {
        dbm_to_watts(self.echo_min_dbm)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// SINR of CU `k` under `plan`: coherent desired amplitude over the
/// other users' symbols, every sensing waveform and noise.
pub fn comm_sinr<T: Scalar>(k: usize, channels: &ChannelSet<T>, plan: &BeamPlan<T>) -> Result<T> {
    if k >= plan.n_cu() || plan.comm.iter().all(|wb| norm_sqr(&wb[k]) == T::zero()) {
        return Err(IsacError::NoServingBeam(k));
    }
    let h: Vec<CVec<T>> = channels.comm.iter().map(|row| row[k].clone()).collect();
    let q: Vec<CVec<T>> = channels.leak.iter().map(|row| row[k].clone()).collect();
    let desired = user_amplitude(&h, plan, k).norm_sqr();
    let denom = mui_power(&h, plan, k)? + sensing_leakage_power(&q, plan)? + channels.noise_power;
    Ok(desired / denom)
}

/// `tau · log2(1 + sinr)`.
pub fn achievable_rate<T: Scalar>(sinr: T, tau: T) -> Result<T> {
    if sinr < T::zero() || tau < T::zero() {
        return Err(invalid("sinr and time fraction must be non-negative"));
    }
    Ok(tau * (T::one() + sinr).log2())
}

/// `|α|² · |u^H a_r|²/‖u‖² · a_t^H R a_t`.
pub fn echo_power<T: Scalar>(r_tx: &CMat<T>, alpha: Cplx<T>, a_t: &[Cplx<T>], a_r: &[Cplx<T>], u: &[Cplx<T>]) -> Result<T> {
    if a_r.len() != u.len() || r_tx.rows() != a_t.len() {
        return Err(IsacError::DimensionMismatch { context: "echo power", expected: a_r.len(), got: u.len() });
    }
    let un = norm_sqr(u);
    if un <= T::zero() {
        return Err(invalid("combiner must be non-zero"));
    }
    let rx = dot(u, a_r).norm_sqr() / un;
    Ok(alpha.norm_sqr() * rx * r_tx.quad_form(a_t).re.max(T::zero()))
}

pub fn sensing_sinr<T: Scalar>(echo: T, clutter: T, crosstalk: T, si: T, sigma2: T) -> T {
    echo / (clutter + crosstalk + si + sigma2)
}

/// Array vectors of one transmit→target→receive path.
#[derive(Clone, Debug)]
pub struct PathGeometry<'a, T: Scalar> {
    pub a_t: &'a [Cplx<T>],
    /// Derivative of `a_t` with respect to the estimated angle (zero when the
    /// transmit angle does not depend on it).
    pub a_t_dot: &'a [Cplx<T>],
    pub a_r: &'a [Cplx<T>],
    pub a_r_dot: &'a [Cplx<T>],
}

/// Fisher information of the angle for the echo model `μ = α a_r a_t^H X`
/// with `L` snapshots, `R = X X^H / L` and known `α`.
pub fn fisher_information<T: Scalar>(r_tx: &CMat<T>, alpha: Cplx<T>, snapshots: usize, sigma2: T, g: &PathGeometry<'_, T>) -> Result<T> {
    let n = r_tx.rows();
    if g.a_t.len() != n || g.a_t_dot.len() != n || g.a_r.len() != g.a_r_dot.len() {
        return Err(IsacError::DimensionMismatch { context: "fisher information", expected: n, got: g.a_t.len() });
    }
    if !(sigma2 > T::zero()) {
        return Err(invalid("noise power must be positive"));
    }
    let s = dot(g.a_r_dot, g.a_r_dot) * r_tx.quad_form(g.a_t)
        + dot(g.a_r_dot, g.a_r) * r_tx.bilinear(g.a_t_dot, g.a_t)
        + dot(g.a_r, g.a_r_dot) * r_tx.bilinear(g.a_t, g.a_t_dot)
        + dot(g.a_r, g.a_r) * r_tx.quad_form(g.a_t_dot);
    let two: T = cst(2.0);
    Ok(two * from_usize::<T>(snapshots) * alpha.norm_sqr() / sigma2 * s.re)
}

/// Angle CRLB `1/J`; errors when `J` is numerically zero.
pub fn crlb_angle<T: Scalar>(r_tx: &CMat<T>, alpha: Cplx<T>, snapshots: usize, sigma2: T, g: &PathGeometry<'_, T>) -> Result<T> {
    crlb_from_fisher(fisher_information(r_tx, alpha, snapshots, sigma2, g)?)
}

pub fn crlb_from_fisher<T: Scalar>(j: T) -> Result<T> {
    if !(to_f64(j) > FISHER_FLOOR) {
        return Err(IsacError::NonIdentifiable(to_f64(j)));
    }
    Ok(T::one() / j)
}

/// `a(θ)^H R a(θ)`.
pub fn beampattern<T: Scalar>(r: &CMat<T>, theta: T) -> Result<T> {
    let a = steering_vector(r.rows(), theta)?;
    Ok(r.quad_form(&a).re)
}

/// Mean squared deviation of the pattern from `ideal` on `grid`.
pub fn beampattern_mse<T: Scalar>(r: &CMat<T>, grid: &[T], ideal: &[T]) -> Result<T> {
    if grid.len() != ideal.len() || grid.is_empty() {
        return Err(invalid("grid and ideal levels must be non-empty and of equal length"));
    }
    let mut acc = T::zero();
    for (&t, &d) in grid.iter().zip(ideal) {
        let e = beampattern(r, t)? - d;
        acc += e * e;
    }
    Ok(acc / from_usize(grid.len()))
}

/// Interference-plus-noise seen by the echo receiver at BS `b`.
pub fn sensing_noise<T: Scalar>(b: usize, channels: &ChannelSet<T>, plan: &BeamPlan<T>) -> Result<T> {
    Ok(channels.noise_power
        + crosstalk_power(b, plan, channels)?
        + clutter_power(b, plan, channels)?
        + self_interference_at(b, plan, channels)?)
}

/// Fisher information of target `s`'s angle at receive BS `b`, summed over
/// every transmitting BS; interference is folded into the noise floor.
pub fn network_fisher<T: Scalar>(s: usize, b: usize, channels: &ChannelSet<T>, plan: &BeamPlan<T>, snapshots: usize) -> Result<T> {
    let sigma2 = sensing_noise(b, channels, plan)?;
    let a_r = channels.target_steering(s, b);
    let a_r_dot = channels.target_steering_derivative(s, b);
    let mut j = T::zero();
    for tx in 0..plan.n_bs() {
        if !plan.transmits(tx) {
            continue;
        }
        let a_t = channels.target_steering(s, tx);
        let a_t_dot = if tx == b {
            channels.target_steering_derivative(s, tx)
        } else {
            vec![Cplx::new(T::zero(), T::zero()); a_t.len()]
        };
        let g = PathGeometry { a_t: &a_t, a_t_dot: &a_t_dot, a_r: &a_r, a_r_dot: &a_r_dot };
        j += fisher_information(&plan.tx_covariance(tx), channels.targets[s].alpha(tx, b), snapshots, sigma2, &g)?;
    }
    Ok(j)
}

pub fn network_crlb<T: Scalar>(s: usize, b: usize, channels: &ChannelSet<T>, plan: &BeamPlan<T>, snapshots: usize) -> Result<T> {
    crlb_from_fisher(network_fisher(s, b, channels, plan, snapshots)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eig;
    use crate::scalar::cplx;
    use crate::scene::steering_derivative;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rvec(rng: &mut ChaCha8Rng, n: usize) -> CVec<f64> {
        (0..n).map(|_| cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn rate_examples() {
        assert!((achievable_rate(3.0f64, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(achievable_rate(0.0f64, 0.7).unwrap(), 0.0);
        assert!((achievable_rate(15.0f64, 0.5).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(-90.0) - 1e-12).abs() < 1e-24);
        assert!((watts_to_dbm(1.0) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn echo_examples() {
        let n = 4;
        let theta = 0.3;
        let a = steering_vector::<f64>(n, theta).unwrap();
        let alpha = cplx(1e-3, 2e-3);
        let p = 2.0;
        let iso = CMat::identity(n).scale(p / n as f64);
        let e = echo_power(&iso, alpha, &a, &a, &a).unwrap();
        assert!((e / (alpha.norm_sqr() * n as f64 * p) - 1.0).abs() < 1e-12);
        let peak = CMat::outer(&a, &a).scale(p / n as f64);
        let e = echo_power(&peak, alpha, &a, &a, &a).unwrap();
        assert!((e / (alpha.norm_sqr() * (n * n) as f64 * p) - 1.0).abs() < 1e-12);
        // Scale the transmit power so the echo sits exactly at -90 dBm.
        let unit_r = iso.scale(1.0 / p);
        let unit = echo_power(&unit_r, alpha, &a, &a, &a).unwrap();
        let e = echo_power(&unit_r.scale(1e-12 / unit), alpha, &a, &a, &a).unwrap();
        assert!((watts_to_dbm(e) + 90.0).abs() < 1e-9);
    }

    #[test]
    fn sensing_sinr_examples() {
        assert_eq!(sensing_sinr(2.0, 0.0, 0.0, 0.0, 0.5), 4.0);
        assert_eq!(sensing_sinr(0.0, 1.0, 1.0, 1.0, 1.0), 0.0);
        assert!((sensing_sinr(3.0f64, 0.5, 0.25, 0.125, 0.125) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn beampattern_examples() {
        let n = 5;
        let p = 3.0;
        let iso = CMat::identity(n).scale(p / n as f64);
        for t in [-1.2, 0.0, 0.7] {
            assert!((beampattern(&iso, t).unwrap() - p).abs() < 1e-12);
        }
        let a = steering_vector::<f64>(n, 0.4).unwrap();
        let r = CMat::outer(&a, &a).scale(p / n as f64);
        assert!((beampattern(&r, 0.4).unwrap() - n as f64 * p).abs() < 1e-10);
        let grid = [-0.5, 0.0, 0.5];
        let ideal: Vec<f64> = grid.iter().map(|&t| beampattern(&r, t).unwrap()).collect();
        assert_eq!(beampattern_mse(&r, &grid, &ideal).unwrap(), 0.0);
        let off: Vec<f64> = ideal.iter().map(|x| x + 1.0).collect();
        assert!((beampattern_mse(&r, &grid, &off).unwrap() - 1.0).abs() < 1e-12);
    }

    /// Fisher information from the explicit mean model by central differences.
    pub(crate) fn fd_fisher(x: &[CVec<f64>], alpha: Cplx<f64>, sigma2: f64, n_t: usize, n_r: usize, theta: f64, tx_moves: bool) -> f64 {
        let h = 1e-5;
        let theta_t0 = 0.2;
        let mean = |t: f64| -> Vec<CVec<f64>> {
            let a_r = steering_vector::<f64>(n_r, t).unwrap();
            let a_t = steering_vector::<f64>(n_t, if tx_moves { t } else { theta_t0 }).unwrap();
            x.iter()
                .map(|xl| {
                    let s = dot(&a_t, xl) * alpha;
                    a_r.iter().map(|a| a * s).collect()
                })
                .collect()
        };
        let (p, m) = (mean(theta + h), mean(theta - h));
        let mut acc = 0.0;
        for (pl, ml) in p.iter().zip(&m) {
            for (a, b) in pl.iter().zip(ml) {
                acc += ((a - b) / (2.0 * h)).norm_sqr();
            }
        }
        2.0 * acc / sigma2
    }

    #[test]
    fn crlb_matches_finite_difference_fisher() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..50 {
            let n_t = rng.gen_range(1..6);
            let n_r = rng.gen_range(2..6);
            let l = rng.gen_range(1..8);
            let theta = rng.gen_range(-1.3..1.3);
            let tx_moves = case % 2 == 0;
            let alpha = cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let sigma2 = rng.gen_range(0.1..2.0);
            let x: Vec<CVec<f64>> = (0..l).map(|_| rvec(&mut rng, n_t)).collect();
            let mut r = CMat::zeros(n_t, n_t);
            for xl in &x {
                r.add_assign_scaled(&CMat::outer(xl, xl), 1.0 / l as f64);
            }
            let theta_t = if tx_moves { theta } else { 0.2 };
            let a_t = steering_vector::<f64>(n_t, theta_t).unwrap();
            let a_t_dot = if tx_moves { steering_derivative::<f64>(n_t, theta).unwrap() } else { vec![cplx(0.0, 0.0); n_t] };
            let a_r = steering_vector::<f64>(n_r, theta).unwrap();
            let a_r_dot = steering_derivative::<f64>(n_r, theta).unwrap();
            let g = PathGeometry { a_t: &a_t, a_t_dot: &a_t_dot, a_r: &a_r, a_r_dot: &a_r_dot };
            let crlb = crlb_angle(&r, alpha, l, sigma2, &g).unwrap();
            let oracle = 1.0 / fd_fisher(&x, alpha, sigma2, n_t, n_r, theta, tx_moves);
            assert!((crlb / oracle - 1.0).abs() <= 1e-5, "case {case}: {crlb} vs {oracle}");
        }
    }

    #[test]
    fn single_antenna_receiver_at_endfire_is_not_identifiable() {
        let a = steering_vector::<f64>(1, PI / 2.0).unwrap();
        let d = steering_derivative::<f64>(1, PI / 2.0).unwrap();
        let g = PathGeometry { a_t: &a, a_t_dot: &d, a_r: &a, a_r_dot: &d };
        let r = CMat::identity(1);
        assert!(matches!(crlb_angle(&r, cplx(1.0, 0.0), 4, 1.0, &g), Err(IsacError::NonIdentifiable(_))));
    }

    proptest! {
        #[test]
        fn crlb_is_inverse_homogeneous(seed in 0u64..10_000, c in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 4;
            let theta = rng.gen_range(-1.2..1.2);
            let m = CMat::from_columns(&(0..n).map(|_| rvec(&mut rng, n)).collect::<Vec<_>>());
            let r = m.matmul(&m.adjoint());
            let a = steering_vector::<f64>(n, theta).unwrap();
            let d = steering_derivative::<f64>(n, theta).unwrap();
            let g = PathGeometry { a_t: &a, a_t_dot: &d, a_r: &a, a_r_dot: &d };
            let base = crlb_angle(&r, cplx(0.5, 0.1), 8, 1.0, &g).unwrap();
            let scaled = crlb_angle(&r.scale(c), cplx(0.5, 0.1), 8, 1.0, &g).unwrap();
            prop_assert!((scaled * c / base - 1.0).abs() < 1e-12);
        }

        #[test]
        fn beampattern_nonnegative_for_psd(seed in 0u64..10_000, theta in -1.5f64..1.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..7);
            let m = CMat::from_columns(&(0..n).map(|_| rvec(&mut rng, n)).collect::<Vec<_>>());
            let r = m.matmul(&m.adjoint());
            prop_assert!(hermitian_eig(&r).values[0] > -1e-9);
            prop_assert!(beampattern(&r, theta).unwrap() >= -1e-12);
        }
    }
}
