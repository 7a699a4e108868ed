//! Network geometry, array responses, path loss and seeded channel draws.
//!
//! Conventions used everywhere else in the crate:
//! * every BS carries a half-wavelength uniform linear array along the y axis,
//!   so the angle seen from a BS toward a point at offset `(dx, dy)` and
//!   distance `d` is `asin(dy / d)` in `[-π/2, π/2]`;
//! * a transmit vector `x` reaches direction `θ` as `a(θ)^H x`, a CU as
//!   `h^H x`, and a receive combiner `u` observes `u^H y`;
//! * all random draws come from ChaCha streams keyed by `(seed, entity)`, so
//!   every link is reproducible on its own and the first `n` antenna
//!   coefficients of a link do not depend on how many antennas exist.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, IsacError, Result};
use crate::linalg::{CMat, CVec};
use crate::scalar::{cis, cplx, cst, Cplx, Scalar};

/// Propagation speed in m/s, rounded to `3·10⁸` as is usual in link budgets.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Whether a path is traversed once or out-and-back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trips {
    OneWay,
    RoundTrip,
}

/// Scenario parameters from which scenes and channels are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    /// Radius of the circular service area in meters.
    pub service_radius: f64,
    pub n_bs: usize,
    /// Antenna count of each BS (one entry per BS).
    pub antennas_per_bs: Vec<usize>,
    pub n_cu: usize,
    pub n_st: usize,
    pub n_clutter: usize,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    /// Exponent of the distance-dependent loss on non-line-of-sight links
    /// (BS to CU, BS to BS).
    pub pathloss_exponent: f64,
    /// Self-interference cancellation depth in dB.
    pub si_cancellation: f64,
    /// Loop gain of the transmit-to-receive leakage path before cancellation, dB.
    pub si_loop_gain: f64,
    /// Range of clutter reflection gains in dB, `[low, high]`.
    pub clutter_gain_range: [f64; 2],
    /// Target reflection gain in dB applied on top of round-trip free-space loss.
    pub rcs_gain: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            service_radius: 150.0,
            n_bs: 4,
            antennas_per_bs: vec![8; 4],
            n_cu: 5,
            n_st: 1,
            n_clutter: 3,
            carrier_freq: 2.4e9,
            noise_power: 1e-12,
            pathloss_exponent: 3.6,
            si_cancellation: 100.0,
            si_loop_gain: 0.0,
            clutter_gain_range: [0.0, 10.0],
            rcs_gain: 30.0,
        }
    }
}

fn field_err(field: &str, message: impl Into<String>) -> IsacError {
    IsacError::ConfigField {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.service_radius > 0.0 && self.service_radius.is_finite()) {
            return Err(field_err("service_radius", "must be positive"));
        }
        if !(self.carrier_freq > 0.0 && self.carrier_freq.is_finite()) {
            return Err(field_err("carrier_freq", "must be positive"));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(field_err("noise_power", "must be positive"));
        }
        if !(self.pathloss_exponent > 0.0 && self.pathloss_exponent.is_finite()) {
            return Err(field_err("pathloss_exponent", "must be positive"));
        }
        if self.antennas_per_bs.len() != self.n_bs {
            return Err(field_err(
                "antennas_per_bs",
                format!("expected {} entries, got {}", self.n_bs, self.antennas_per_bs.len()),
            ));
        }
        if self.antennas_per_bs.contains(&0) {
            return Err(field_err("antennas_per_bs", "every BS needs at least one antenna"));
        }
        let [lo, hi] = self.clutter_gain_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(field_err("clutter_gain_range", "must be a finite interval [low, high]"));
        }
        for (name, v) in [
            ("si_cancellation", self.si_cancellation),
            ("si_loop_gain", self.si_loop_gain),
            ("rcs_gain", self.rcs_gain),
        ] {
            if !v.is_finite() {
                return Err(field_err(name, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Same scenario with every BS carrying `n` antennas.
    pub fn with_uniform_antennas(&self, n: usize) -> Self {
        Self {
            antennas_per_bs: vec![n; self.n_bs],
            ..self.clone()
        }
    }
}

/// A 2-D position in meters.
pub type Point = [f64; 2];

/// Node placement drawn from a [`ScenarioSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub bs_positions: Vec<Point>,
    pub cu_positions: Vec<Point>,
    pub st_positions: Vec<Point>,
    pub clutter_positions: Vec<Point>,
    pub bs_antennas: Vec<usize>,
    pub seed: u64,
}

impl Scene {
    pub fn n_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn n_cu(&self) -> usize {
        self.cu_positions.len()
    }

    pub fn n_st(&self) -> usize {
        self.st_positions.len()
    }

    /// Same users and targets served by a single BS at the center carrying
    /// `antennas` elements.
    pub fn colocated(&self, antennas: usize) -> Scene {
        Scene {
            bs_positions: vec![[0.0, 0.0]],
            bs_antennas: vec![antennas],
            ..self.clone()
        }
    }

    /// Index of the BS nearest to `p` among `candidates` (ties to lower index).
    pub fn nearest_bs(&self, p: Point, candidates: impl IntoIterator<Item = usize>) -> Option<usize> {
        candidates
            .into_iter()
            .map(|b| (b, distance(self.bs_positions[b], p)))
            .fold(None, |best: Option<(usize, f64)>, (b, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((b, d)),
            })
            .map(|(b, _)| b)
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Angle of `to` seen from an array at `from`, measured from broadside.
pub fn array_angle(from: Point, to: Point) -> f64 {
    let d = distance(from, to);
    if d == 0.0 {
        return 0.0;
    }
    ((to[1] - from[1]) / d).clamp(-1.0, 1.0).asin()
}

fn check_array(n: usize, theta: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("array needs at least one antenna"));
    }
    if !(theta.abs() <= PI / 2.0 + 1e-12) {
        return Err(invalid(format!("angle {theta} outside [-pi/2, pi/2]")));
    }
    Ok(())
}

/// Half-wavelength ULA response: element `m` is `exp(jπ m sin θ)`.
pub fn steering_vector<T: Scalar>(n: usize, theta: T) -> Result<CVec<T>> {
    check_array(n, crate::scalar::to_f64(theta))?;
    let s = theta.sin() * T::PI();
    Ok((0..n)
        .map(|m| cis(s * crate::scalar::from_usize(m)))
        .collect())
}

/// Element-wise `d/dθ` of [`steering_vector`].
pub fn steering_derivative<T: Scalar>(n: usize, theta: T) -> Result<CVec<T>> {
    check_array(n, crate::scalar::to_f64(theta))?;
    let s = theta.sin() * T::PI();
    let c = theta.cos() * T::PI();
    Ok((0..n)
        .map(|m| {
            let mf: T = crate::scalar::from_usize(m);
            cis(s * mf) * cplx(T::zero(), c * mf)
        })
        .collect())
}

/// Free-space (Friis) loss in dB; the round trip doubles the one-way loss.
pub fn path_loss_db(d: f64, f: f64, trips: Trips) -> Result<f64> {
    if !(d > 0.0) {
        return Err(invalid(format!("distance must be positive, got {d}")));
    }
    if !(f > 0.0) {
        return Err(invalid(format!("frequency must be positive, got {f}")));
    }
    let one_way = 20.0 * (4.0 * PI * d * f / SPEED_OF_LIGHT).log10();
    Ok(match trips {
        Trips::OneWay => one_way,
        Trips::RoundTrip => 2.0 * one_way,
    })
}

/// Close-in reference model: free-space loss at 1 m plus `10·γ·log10(d)`.
/// Distances under 1 m are clamped to 1 m.
pub fn link_path_loss_db(d: f64, f: f64, exponent: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(invalid(format!("distance must be positive, got {d}")));
    }
    let d = d.max(1.0);
    Ok(path_loss_db(1.0, f, Trips::OneWay)? + 10.0 * exponent * d.log10())
}

/// Echo delay `2d/c` in seconds.
pub fn round_trip_delay(d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(invalid(format!("distance must be non-negative, got {d}")));
    }
    Ok(2.0 * d / SPEED_OF_LIGHT)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub(crate) mod stream {
    //! Stream tags for per-entity random sub-streams.
    pub const BS: u64 = 1;
    pub const CU: u64 = 2;
    pub const ST: u64 = 3;
    pub const CLUTTER: u64 = 4;
    pub const COMM: u64 = 5;
    pub const CROSS: u64 = 6;
    pub const CLUTTER_GAIN: u64 = 7;
    pub const BASELINE: u64 = 8;
    pub const SETUP: u64 = 9;
    pub const SUBCARRIER: u64 = 10;
}

/// Independent random stream for entity `(tag, a, b)` under `seed`.
pub fn substream(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 56) ^ (a << 28) ^ b);
    rng
}

fn uniform_disk(rng: &mut ChaCha8Rng, radius: f64) -> Point {
    let r = radius * rng.gen::<f64>().sqrt();
    let phi = 2.0 * PI * rng.gen::<f64>();
    [r * phi.cos(), r * phi.sin()]
}

/// Draws node positions i.i.d. uniformly over the service disk.
pub fn generate_scene(spec: &ScenarioSpec, seed: u64) -> Result<Scene> {
    spec.validate()?;
    let draw = |tag: u64, count: usize| -> Vec<Point> {
        (0..count)
            .map(|i| uniform_disk(&mut substream(seed, tag, i as u64, 0), spec.service_radius))
            .collect()
    };
    Ok(Scene {
        bs_positions: draw(stream::BS, spec.n_bs),
        cu_positions: draw(stream::CU, spec.n_cu),
        st_positions: draw(stream::ST, spec.n_st),
        clutter_positions: draw(stream::CLUTTER, spec.n_clutter),
        bs_antennas: spec.antennas_per_bs.clone(),
        seed,
    })
}

/// Links between every BS and one sensing target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TargetLinks<T: Scalar> {
    /// Angle of the target seen from each BS.
    pub angle: Vec<T>,
    /// One-way complex free-space amplitude between each BS and the target.
    pub amplitude: Vec<Cplx<T>>,
    /// Linear reflection gain of the target.
    pub rcs: T,
}

impl<T: Scalar> TargetLinks<T> {
    /// Round-trip reflection coefficient for transmit BS `tx` and receive BS `rx`.
    pub fn alpha(&self, tx: usize, rx: usize) -> Cplx<T> {
        self.amplitude[tx] * self.amplitude[rx] * self.rcs.sqrt()
    }
}

/// One clutter scatterer as seen from each BS (monostatic returns only).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClutterLinks<T: Scalar> {
    pub angle: Vec<T>,
    /// Round-trip complex reflection coefficient `β` per BS.
    pub gain: Vec<Cplx<T>>,
}

/// All channel coefficients of one scene realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ChannelSet<T: Scalar> {
    pub bs_antennas: Vec<usize>,
    /// `comm[b][k]`: BS `b` to CU `k`.
    pub comm: Vec<Vec<CVec<T>>>,
    /// `cross[from][to]`: `n_to x n_from` matrix from BS `from` to BS `to`; `None` on the diagonal.
    pub cross: Vec<Vec<Option<CMat<T>>>>,
    pub targets: Vec<TargetLinks<T>>,
    /// Linear self-interference loop gain per BS.
    pub si_loop: Vec<T>,
    /// `leak[b][k]`: composite channel seen by sensing transmissions of BS `b` at CU `k`
    /// (direct path plus single target bounce).
    pub leak: Vec<Vec<CVec<T>>>,
    pub clutter: Vec<ClutterLinks<T>>,
    pub noise_power: T,
    /// Self-interference cancellation depth in dB.
    pub si_cancellation_db: T,
}

impl<T: Scalar> ChannelSet<T> {
    pub fn n_bs(&self) -> usize {
        self.bs_antennas.len()
    }

    pub fn n_cu(&self) -> usize {
        self.comm.first().map_or(0, |v| v.len())
    }

    pub fn n_st(&self) -> usize {
        self.targets.len()
    }

    /// Transmit steering vector of BS `b` toward target `s`.
    pub fn target_steering(&self, s: usize, b: usize) -> CVec<T> {
        steering_vector(self.bs_antennas[b], self.targets[s].angle[b]).expect("validated geometry")
    }

    pub fn target_steering_derivative(&self, s: usize, b: usize) -> CVec<T> {
        steering_derivative(self.bs_antennas[b], self.targets[s].angle[b]).expect("validated geometry")
    }

    /// Matched-filter combiner `a_r / ‖a_r‖` of BS `b` toward target `s`.
    pub fn matched_combiner(&self, s: usize, b: usize) -> CVec<T> {
        let a = self.target_steering(s, b);
        let n: T = crate::scalar::from_usize::<T>(a.len()).sqrt();
        a.iter().map(|x| x / n).collect()
    }

    /// Checks every dimension against `bs_antennas`.
    pub fn validate(&self) -> Result<()> {
        let nb = self.n_bs();
        let nk = self.n_cu();
        check_len("comm rows", nb, self.comm.len())?;
        check_len("leak rows", nb, self.leak.len())?;
        check_len("cross rows", nb, self.cross.len())?;
        check_len("si loop", nb, self.si_loop.len())?;
        for b in 0..nb {
            let n = self.bs_antennas[b];
            check_len("comm users", nk, self.comm[b].len())?;
            check_len("leak users", nk, self.leak[b].len())?;
            for k in 0..nk {
                check_len("comm channel", n, self.comm[b][k].len())?;
                check_len("leak channel", n, self.leak[b][k].len())?;
            }
            check_len("cross cols", nb, self.cross[b].len())?;
            for to in 0..nb {
                match &self.cross[b][to] {
                    Some(m) => {
                        check_len("cross matrix rows", self.bs_antennas[to], m.rows())?;
                        check_len("cross matrix cols", n, m.cols())?;
                    }
                    None if b != to => return Err(invalid("missing crosstalk channel")),
                    None => {}
                }
            }
        }
        for t in &self.targets {
            check_len("target angles", nb, t.angle.len())?;
            check_len("target amplitudes", nb, t.amplitude.len())?;
        }
        for c in &self.clutter {
            check_len("clutter angles", nb, c.angle.len())?;
            check_len("clutter gains", nb, c.gain.len())?;
        }
        Ok(())
    }
}

fn complex_gaussian<T: Scalar>(rng: &mut ChaCha8Rng, variance: f64) -> Cplx<T> {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    cplx(cst(re * s), cst(im * s))
}

/// One-way free-space complex amplitude (magnitude `1/sqrt(loss)`, propagation phase).
fn los_amplitude<T: Scalar>(d: f64, spec: &ScenarioSpec) -> Result<Cplx<T>> {
    let loss = db_to_linear(path_loss_db(d.max(1.0), spec.carrier_freq, Trips::OneWay)?);
    let phase = -2.0 * PI * (d / spec.wavelength()).fract();
    Ok(cis::<T>(cst(phase)) * cst::<T>(loss.recip().sqrt()))
}

/// Draws every channel of `scene`.
///
/// BS↔CU and BS↔BS links are Rayleigh with variance equal to the inverse
/// distance-dependent loss; BS↔target and target↔CU links are line of sight
/// with free-space loss. The sensing leakage `q` adds the single target bounce
/// to the direct BS→CU channel.
pub fn generate_channels<T: Scalar>(scene: &Scene, spec: &ScenarioSpec, seed: u64) -> Result<ChannelSet<T>> {
    spec.validate()?;
    let nb = scene.n_bs();
    let nk = scene.n_cu();
    check_len("scene antenna list", nb, scene.bs_antennas.len())?;
    let f = spec.carrier_freq;

    let mut comm = Vec::with_capacity(nb);
    for b in 0..nb {
        let mut row = Vec::with_capacity(nk);
        for k in 0..nk {
            let d = distance(scene.bs_positions[b], scene.cu_positions[k]);
            let var = db_to_linear(-link_path_loss_db(d.max(1e-3), f, spec.pathloss_exponent)?);
            let mut rng = substream(seed, stream::COMM, b as u64, k as u64);
            row.push((0..scene.bs_antennas[b]).map(|_| complex_gaussian(&mut rng, var)).collect::<CVec<T>>());
        }
        comm.push(row);
    }

    let mut cross = Vec::with_capacity(nb);
    for from in 0..nb {
        let mut row = Vec::with_capacity(nb);
        for to in 0..nb {
            if from == to {
                row.push(None);
                continue;
            }
            let d = distance(scene.bs_positions[from], scene.bs_positions[to]);
            let var = db_to_linear(-link_path_loss_db(d.max(1e-3), f, spec.pathloss_exponent)?);
            let (nt, nf) = (scene.bs_antennas[to], scene.bs_antennas[from]);
            // Entry (i, j) has its own stream so the matrix of a smaller array
            // is a sub-block of the matrix of a larger one.
            let m = CMat::from_fn(nt, nf, |i, j| {
                let mut rng = substream(seed, stream::CROSS, (from * 64 + to) as u64, (i * 4096 + j) as u64);
                complex_gaussian(&mut rng, var)
            });
            row.push(Some(m));
        }
        cross.push(row);
    }

    let rcs = db_to_linear(spec.rcs_gain);
    let mut targets = Vec::with_capacity(scene.n_st());
    for &st in &scene.st_positions {
        let mut angle: Vec<T> = Vec::with_capacity(nb);
        let mut amplitude = Vec::with_capacity(nb);
        for b in 0..nb {
            let d = distance(scene.bs_positions[b], st);
            angle.push(cst(array_angle(scene.bs_positions[b], st)));
            amplitude.push(los_amplitude(d, spec)?);
        }
        targets.push(TargetLinks { angle, amplitude, rcs: cst(rcs) });
    }

    let mut leak = comm.clone();
    for (s, &st) in scene.st_positions.iter().enumerate() {
        for k in 0..nk {
            let to_cu: Cplx<T> = los_amplitude(distance(st, scene.cu_positions[k]), spec)?;
            for b in 0..nb {
                let c = targets[s].amplitude[b] * to_cu * targets[s].rcs.sqrt();
                let a = steering_vector(scene.bs_antennas[b], targets[s].angle[b])?;
                for (q, am) in leak[b][k].iter_mut().zip(&a) {
                    *q += c.conj() * am;
                }
            }
        }
    }

    let [lo, hi] = spec.clutter_gain_range;
    let mut clutter = Vec::with_capacity(scene.clutter_positions.len());
    for (c, &pos) in scene.clutter_positions.iter().enumerate() {
        let mut rng = substream(seed, stream::CLUTTER_GAIN, c as u64, 0);
        let gain_db = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let mut angle = Vec::with_capacity(nb);
        let mut gain = Vec::with_capacity(nb);
        for b in 0..nb {
            let d = distance(scene.bs_positions[b], pos).max(1.0);
            let mag = (db_to_linear(gain_db) / db_to_linear(path_loss_db(d, f, Trips::RoundTrip)?)).sqrt();
            let phase = 2.0 * PI * rng.gen::<f64>();
            angle.push(cst(array_angle(scene.bs_positions[b], pos)));
            gain.push(cis::<T>(cst(phase)) * cst::<T>(mag));
        }
        clutter.push(ClutterLinks { angle, gain });
    }

    let set = ChannelSet {
        bs_antennas: scene.bs_antennas.clone(),
        comm,
        cross,
        targets,
        si_loop: vec![cst(db_to_linear(spec.si_loop_gain)); nb],
        leak,
        clutter,
        noise_power: cst(spec.noise_power),
        si_cancellation_db: cst(spec.si_cancellation),
    };
    set.validate()?;
    Ok(set)
}

/// Structured-text dump of a scene and its channels for debugging.
pub fn dump_json<T: Scalar>(scene: &Scene, channels: &ChannelSet<T>) -> Result<String> {
    #[derive(Serialize)]
    #[serde(bound = "T: Scalar")]
    struct Dump<'a, T: Scalar> {
        scene: &'a Scene,
        channels: &'a ChannelSet<T>,
    }
    Ok(serde_json::to_string_pretty(&Dump { scene, channels })?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Cplx<f64>, b: Cplx<f64>) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn steering_examples() {
        let a = steering_vector::<f64>(4, 0.0).unwrap();
        assert!(a.iter().all(|x| close(*x, Cplx::new(1.0, 0.0))));
        let a = steering_vector::<f64>(2, PI / 2.0).unwrap();
        assert!(close(a[0], Cplx::new(1.0, 0.0)) && close(a[1], Cplx::new(-1.0, 0.0)));
        let a = steering_vector::<f64>(3, PI / 6.0).unwrap();
        assert!(close(a[1], Cplx::new(0.0, 1.0)) && close(a[2], Cplx::new(-1.0, 0.0)));
        assert!(steering_vector::<f64>(0, 0.0).is_err());
        assert!(steering_vector::<f64>(2, 2.0).is_err());
    }

    #[test]
    fn steering_derivative_examples() {
        let d = steering_derivative::<f64>(3, PI / 2.0).unwrap();
        assert!(d.iter().all(|x| x.norm() < 1e-12));
        let d = steering_derivative::<f64>(3, 0.0).unwrap();
        assert!(close(d[0], Cplx::new(0.0, 0.0)));
        assert!(close(d[1], Cplx::new(0.0, PI)));
        assert!(close(d[2], Cplx::new(0.0, 2.0 * PI)));
    }

    fn finite_difference(n: usize, theta: f64) -> CVec<f64> {
        let h = 1e-6;
        let p = steering_vector::<f64>(n, theta + h).unwrap();
        let m = steering_vector::<f64>(n, theta - h).unwrap();
        p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
    }

    #[test]
    fn derivative_matches_central_difference_at_quarter_pi() {
        let d = steering_derivative::<f64>(2, PI / 4.0).unwrap();
        let fd = finite_difference(2, PI / 4.0);
        for (a, b) in d.iter().zip(&fd) {
            assert!((a - b).norm() <= 1e-6 * a.norm().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn steering_is_unit_modulus(n in 1usize..32, theta in -1.5f64..1.5) {
            let a = steering_vector::<f64>(n, theta).unwrap();
            prop_assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
            prop_assert!(close(a[0], Cplx::new(1.0, 0.0)));
        }

        #[test]
        fn derivative_matches_finite_difference(n in 1usize..16, theta in -1.5f64..1.5) {
            let d = steering_derivative::<f64>(n, theta).unwrap();
            let fd = finite_difference(n, theta);
            for (a, b) in d.iter().zip(&fd) {
                prop_assert!((a - b).norm() <= 1e-6 * a.norm().max(1.0));
            }
        }

        #[test]
        fn round_trip_is_twice_one_way(d in 0.1f64..5000.0, f in 1e8f64..1e11) {
            let one = path_loss_db(d, f, Trips::OneWay).unwrap();
            let two = path_loss_db(d, f, Trips::RoundTrip).unwrap();
            prop_assert_eq!(two, 2.0 * one);
        }
    }

    #[test]
    fn path_loss_examples() {
        let rt = path_loss_db(300.0, 2.4e9, Trips::RoundTrip).unwrap();
        assert!((rt - 179.2).abs() <= 0.05, "{rt}");
        let f = 2.4e9;
        let unit = SPEED_OF_LIGHT / (4.0 * PI * f);
        assert!(path_loss_db(unit, f, Trips::OneWay).unwrap().abs() < 1e-9);
        let one = path_loss_db(100.0, 2.4e9, Trips::OneWay).unwrap();
        assert!((one - 80.05).abs() <= 0.01, "{one}");
        assert!(path_loss_db(0.0, f, Trips::OneWay).is_err());
        assert!(path_loss_db(-1.0, f, Trips::OneWay).is_err());
    }

    #[test]
    fn link_model_reduces_to_friis_for_exponent_two() {
        let a = link_path_loss_db(123.0, 2.4e9, 2.0).unwrap();
        let b = path_loss_db(123.0, 2.4e9, Trips::OneWay).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn delay_examples() {
        assert_eq!(round_trip_delay(300.0).unwrap(), 2e-6);
        assert_eq!(round_trip_delay(0.0).unwrap(), 0.0);
        assert_eq!(round_trip_delay(150.0).unwrap(), 1e-6);
        assert!(round_trip_delay(-1.0).is_err());
    }

    #[test]
    fn scene_is_deterministic_and_inside_disk() {
        let spec = ScenarioSpec::default();
        let a = generate_scene(&spec, 42).unwrap();
        let b = generate_scene(&spec, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&spec, 43).unwrap();
        assert_ne!(a, c);
        for p in a.bs_positions.iter().chain(&a.cu_positions).chain(&a.st_positions).chain(&a.clutter_positions) {
            assert!(distance(*p, [0.0, 0.0]) <= spec.service_radius);
        }
    }

    #[test]
    fn channels_are_deterministic_and_consistent() {
        let spec = ScenarioSpec::default();
        let scene = generate_scene(&spec, 9).unwrap();
        let a = generate_channels::<f64>(&scene, &spec, 9).unwrap();
        let b = generate_channels::<f64>(&scene, &spec, 9).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        // BS→ST links are exactly α·a_t(θ) with unit-modulus steering.
        let a_t = a.target_steering(0, 1);
        assert!(a_t.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        let alpha = a.targets[0].alpha(1, 1);
        let expected = db_to_linear(spec.rcs_gain)
            / db_to_linear(path_loss_db(distance(scene.bs_positions[1], scene.st_positions[0]), spec.carrier_freq, Trips::RoundTrip).unwrap());
        assert!((alpha.norm_sqr() / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn larger_arrays_extend_smaller_ones() {
        let spec = ScenarioSpec::default().with_uniform_antennas(3);
        let big = spec.with_uniform_antennas(6);
        let scene = generate_scene(&spec, 5).unwrap();
        let mut scene_big = scene.clone();
        scene_big.bs_antennas = big.antennas_per_bs.clone();
        let small = generate_channels::<f64>(&scene, &spec, 5).unwrap();
        let large = generate_channels::<f64>(&scene_big, &big, 5).unwrap();
        assert_eq!(small.comm[1][2][..], large.comm[1][2][..3]);
        let (s, l) = (small.cross[0][1].as_ref().unwrap(), large.cross[0][1].as_ref().unwrap());
        assert_eq!(s[(2, 1)], l[(2, 1)]);
    }

    #[test]
    fn invalid_spec_names_field() {
        let spec = ScenarioSpec { service_radius: -1.0, ..Default::default() };
        match generate_scene(&spec, 0) {
            Err(IsacError::ConfigField { field, .. }) => assert_eq!(field, "service_radius"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dump_is_json() {
        let spec = ScenarioSpec::default();
        let scene = generate_scene(&spec, 1).unwrap();
        let ch = generate_channels::<f64>(&scene, &spec, 1).unwrap();
        let text = dump_json(&scene, &ch).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("scene").is_some() && v.get("channels").is_some());
    }
}
