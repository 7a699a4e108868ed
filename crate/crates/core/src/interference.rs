//! Power bookkeeping for multiuser interference, sensing leakage, self
//! interference, BS-to-BS crosstalk and clutter.
//!
//! Communication beams of the same user sent from several BSs add coherently
//! (joint transmission of a common symbol); everything else adds in power.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, IsacError, Result};
use crate::linalg::{dot, hermitian_eig, norm_sqr, pad, CMat, CVec};
use crate::scalar::{cst, czero, Cplx, Scalar};
use crate::scene::{steering_vector, ChannelSet};

/// Transmit and receive beams of every BS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BeamPlan<T: Scalar> {
    /// `comm[b][k]`: beam of BS `b` carrying the symbol of CU `k` (all zeros when `b` does not serve `k`).
    pub comm: Vec<Vec<CVec<T>>>,
    /// Dedicated sensing beams of each BS, each with an independent waveform.
    pub sense: Vec<Vec<CVec<T>>>,
    /// Sensing covariance of each BS, used by covariance-domain designs.
    pub sense_cov: Vec<Option<CMat<T>>>,
    /// Receive combiner of each echo-receiving BS.
    pub combiners: Vec<Option<CVec<T>>>,
}

impl<T: Scalar> BeamPlan<T> {
    /// Plan with all-zero communication beams and no sensing.
    pub fn empty(bs_antennas: &[usize], n_cu: usize) -> Self {
        let nb = bs_antennas.len();
        Self {
            comm: bs_antennas.iter().map(|&n| vec![vec![czero(); n]; n_cu]).collect(),
            sense: vec![Vec::new(); nb],
            sense_cov: vec![None; nb],
            combiners: vec![None; nb],
        }
    }

    pub fn n_bs(&self) -> usize {
        self.comm.len()
    }

    pub fn n_cu(&self) -> usize {
        self.comm.first().map_or(0, |v| v.len())
    }

    pub fn antennas(&self, b: usize) -> usize {
        self.comm[b].first().map_or_else(
            || {
                self.sense[b]
                    .first()
                    .map(|v| v.len())
                    .or_else(|| self.sense_cov[b].as_ref().map(|r| r.rows()))
                    .unwrap_or(0)
            },
            |w| w.len(),
        )
    }

    /// Checks dimensions, Hermitian PSD sensing covariances and finite power.
    pub fn validate(&self, bs_antennas: &[usize]) -> Result<()> {
        let nb = bs_antennas.len();
        check_len("plan comm rows", nb, self.comm.len())?;
        check_len("plan sense rows", nb, self.sense.len())?;
        check_len("plan covariance rows", nb, self.sense_cov.len())?;
        check_len("plan combiner rows", nb, self.combiners.len())?;
        let nk = self.n_cu();
        for b in 0..nb {
            let n = bs_antennas[b];
            check_len("plan users", nk, self.comm[b].len())?;
            for w in self.comm[b].iter().chain(&self.sense[b]) {
                check_len("beam length", n, w.len())?;
            }
            if let Some(r) = &self.sense_cov[b] {
                check_len("covariance size", n, r.rows())?;
                check_len("covariance size", n, r.cols())?;
                let scale = r.max_abs().max(T::one());
                if r.hermitian_defect() > cst::<T>(1e-9) * scale {
                    return Err(invalid(format!("sensing covariance of BS {b} is not Hermitian")));
                }
                let eig = hermitian_eig(r);
                if eig.values[0] < -cst::<T>(1e-9) * scale {
                    return Err(invalid(format!("sensing covariance of BS {b} is not PSD")));
                }
            }
            if let Some(u) = &self.combiners[b] {
                check_len("combiner length", n, u.len())?;
            }
            if !self.tx_power(b).is_finite() {
                return Err(invalid(format!("transmit power of BS {b} is not finite")));
            }
        }
        Ok(())
    }

    /// Total transmit covariance of BS `b` (communication plus sensing).
    pub fn tx_covariance(&self, b: usize) -> CMat<T> {
        let n = self.antennas(b);
        let mut r = self.sense_cov[b].clone().unwrap_or_else(|| CMat::zeros(n, n));
        for w in self.comm[b].iter().chain(&self.sense[b]) {
            r.add_assign_scaled(&CMat::outer(w, w), T::one());
        }
        r
    }

    /// Sensing-only covariance of BS `b`.
    pub fn sense_covariance(&self, b: usize) -> CMat<T> {
        let n = self.antennas(b);
        let mut r = self.sense_cov[b].clone().unwrap_or_else(|| CMat::zeros(n, n));
        for v in &self.sense[b] {
            r.add_assign_scaled(&CMat::outer(v, v), T::one());
        }
        r
    }

    pub fn comm_power(&self, b: usize) -> T {
        self.comm[b].iter().map(|w| norm_sqr(w)).sum()
    }

    pub fn sense_power(&self, b: usize) -> T {
        let beams: T = self.sense[b].iter().map(|v| norm_sqr(v)).sum();
        beams + self.sense_cov[b].as_ref().map_or(T::zero(), |r| r.trace().re)
    }

    pub fn tx_power(&self, b: usize) -> T {
        self.comm_power(b) + self.sense_power(b)
    }

    pub fn total_power(&self) -> T {
        (0..self.n_bs()).map(|b| self.tx_power(b)).sum()
    }

    /// Whether BS `b` emits anything.
    pub fn transmits(&self, b: usize) -> bool {
        self.tx_power(b) > T::zero()
    }

    /// Scales every amplitude by `c` (powers scale by `c²`).
    pub fn scaled(&self, c: T) -> Self {
        let s = Cplx::new(c, T::zero());
        let scale_beams = |v: &Vec<CVec<T>>| v.iter().map(|w| w.iter().map(|x| x * s).collect()).collect();
        Self {
            comm: self.comm.iter().map(scale_beams).collect(),
            sense: self.sense.iter().map(scale_beams).collect(),
            sense_cov: self.sense_cov.iter().map(|r| r.as_ref().map(|r| r.scale(c * c))).collect(),
            combiners: self.combiners.clone(),
        }
    }

    /// Zero-pads every BS to the antenna counts in `bs_antennas`.
    pub fn padded(&self, bs_antennas: &[usize]) -> Self {
        let padv = |v: &Vec<CVec<T>>, n: usize| v.iter().map(|w| pad(w, n)).collect();
        Self {
            comm: self.comm.iter().zip(bs_antennas).map(|(v, &n)| padv(v, n)).collect(),
            sense: self.sense.iter().zip(bs_antennas).map(|(v, &n)| padv(v, n)).collect(),
            sense_cov: self
                .sense_cov
                .iter()
                .zip(bs_antennas)
                .map(|(r, &n)| r.as_ref().map(|r| r.embed(n, n)))
                .collect(),
            combiners: self.combiners.iter().zip(bs_antennas).map(|(u, &n)| u.as_ref().map(|u| pad(u, n))).collect(),
        }
    }
}

/// Coherent amplitude of user `j`'s symbol at a CU whose channel from BS `b` is `h[b]`.
pub fn user_amplitude<T: Scalar>(h: &[CVec<T>], plan: &BeamPlan<T>, j: usize) -> Cplx<T> {
    h.iter().zip(&plan.comm).map(|(hb, wb)| dot(hb, &wb[j])).fold(czero(), |a, b| a + b)
}

fn check_channel_rows<T: Scalar>(h: &[CVec<T>], plan: &BeamPlan<T>) -> Result<()> {
    check_len("channel rows", plan.n_bs(), h.len())?;
    for (b, hb) in h.iter().enumerate() {
        check_len("channel length", plan.antennas(b), hb.len())?;
    }
    Ok(())
}

/// Power of all other users' symbols at the CU with per-BS channels `h`, served as user `k`.
pub fn mui_power<T: Scalar>(h: &[CVec<T>], plan: &BeamPlan<T>, k: usize) -> Result<T> {
    check_channel_rows(h, plan)?;
    if k >= plan.n_cu() {
        return Err(IsacError::NoServingBeam(k));
    }
    Ok((0..plan.n_cu())
        .filter(|&j| j != k)
        .map(|j| user_amplitude(h, plan, j).norm_sqr())
        .sum())
}

/// Power of all sensing transmissions at a CU whose leakage channel from BS `b` is `q[b]`.
pub fn sensing_leakage_power<T: Scalar>(q: &[CVec<T>], plan: &BeamPlan<T>) -> Result<T> {
    check_channel_rows(q, plan)?;
    let mut p = T::zero();
    for (b, qb) in q.iter().enumerate() {
        for v in &plan.sense[b] {
            p += dot(qb, v).norm_sqr();
        }
        if let Some(r) = &plan.sense_cov[b] {
            p += r.quad_form(qb).re.max(T::zero());
        }
    }
    Ok(p)
}

/// Residual self interference `p_tx · g_si · 10^(−χ/10)`.
pub fn residual_si_power<T: Scalar>(p_tx: T, g_si: T, chi_db: T) -> Result<T> {
    if p_tx < T::zero() || !p_tx.is_finite() {
        return Err(invalid("transmit power must be finite and non-negative"));
    }
    if g_si < T::zero() {
        return Err(invalid("loop gain must be non-negative"));
    }
    let ten: T = cst(10.0);
    Ok(p_tx * g_si * ten.powf(-chi_db / ten))
}

fn unit_combiner<T: Scalar>(plan: &BeamPlan<T>, b: usize) -> Result<CVec<T>> {
    let u = plan.combiners[b].as_ref().ok_or(IsacError::MissingCombiner(b))?;
    let n = norm_sqr(u).sqrt();
    if n <= T::zero() {
        return Err(IsacError::MissingCombiner(b));
    }
    Ok(u.iter().map(|x| x / n).collect())
}

/// Power that BS `b` picks up through its combiner from every other BS's transmissions.
pub fn crosstalk_power<T: Scalar>(b: usize, plan: &BeamPlan<T>, channels: &ChannelSet<T>) -> Result<T> {
    let u = unit_combiner(plan, b)?;
    let mut p = T::zero();
    for from in 0..plan.n_bs() {
        if from == b || !plan.transmits(from) {
            continue;
        }
        let h = channels.cross[from][b].as_ref().ok_or_else(|| invalid("missing crosstalk channel"))?;
        // u^H H x = (H^H u)^H x
        let g = h.adjoint_mul_vec(&u);
        p += plan.tx_covariance(from).quad_form(&g).re.max(T::zero());
    }
    Ok(p)
}

/// Echo power BS `b` collects from clutter illuminated by its own transmissions.
pub fn clutter_power<T: Scalar>(b: usize, plan: &BeamPlan<T>, channels: &ChannelSet<T>) -> Result<T> {
    if channels.clutter.is_empty() {
        return Ok(T::zero());
    }
    let u = unit_combiner(plan, b)?;
    let r = plan.tx_covariance(b);
    let n = plan.antennas(b);
    let mut p = T::zero();
    for c in &channels.clutter {
        let a = steering_vector(n, c.angle[b])?;
        let rx = dot(&u, &a).norm_sqr();
        p += c.gain[b].norm_sqr() * rx * r.quad_form(&a).re.max(T::zero());
    }
    Ok(p)
}

/// Residual self interference at BS `b` from its own total transmit power.
pub fn self_interference_at<T: Scalar>(b: usize, plan: &BeamPlan<T>, channels: &ChannelSet<T>) -> Result<T> {
    residual_si_power(plan.tx_power(b), channels.si_loop[b], channels.si_cancellation_db)
}
