// SPDX-License-Identifier: Apache-2.0

//! Constituent pulses: envelope shapes, error channels, and the single-pulse
//! propagator obtained by time-ordered integration of the two-state
//! Schrödinger equation (ħ = 1).
//!
//! Integration happens in the diagonal-detuning frame
//!
//! ```text
//! H(t) = 1/2 | -Δ(t)            Ω(t) e^{iφ} |
//!            |  Ω(t) e^{-iφ}    Δ(t)        |
//! ```
//!
//! which is gauge-equivalent to the phase-integral frame
//! `H = (Ω/2) e^{-iδ(t)} |1><2| + h.c.`, `δ(t) = ∫Δ dt'`. With this choice,
//! back-to-back pulses with time-independent parameters share one and the same
//! base propagator. The phase-integral frame is available as an option.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::su2::{Mat2, Propagator};

/// Gaussian envelopes are cut at this many FWHM on each side of the centre.
pub const GAUSSIAN_TRUNCATION_FWHM: f64 = 3.0;

/// `∫ exp(-4 ln2 t²) dt` over the real line, i.e. area per unit FWHM.
pub fn gaussian_area_per_fwhm() -> f64 {
    (PI / (4.0 * std::f64::consts::LN_2)).sqrt()
}

/// A tabulated envelope on a normalised time axis `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledEnvelope {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SampledEnvelope {
    /// Builds an envelope from `(time, value)` pairs. Times must be strictly
    /// increasing; values must lie in `[0, 1]`. The time axis is rescaled to
    /// `[0, 1]` so that the pulse duration stretches it.
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("a sampled envelope needs at least two points".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Domain(format!(
                    "sampled times must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(t, v) in points {
            if !t.is_finite() || !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!(
                    "envelope sample ({t}, {v}) must be finite with value in [0, 1]"
                )));
            }
        }
        let t0 = points[0].0;
        let span = points[points.len() - 1].0 - t0;
        Ok(SampledEnvelope {
            times: points.iter().map(|&(t, _)| (t - t0) / span).collect(),
            values: points.iter().map(|&(_, v)| v).collect(),
        })
    }

    /// Reads a two-column CSV (time, envelope). A non-numeric first row is
    /// treated as a header.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut points = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            if record.len() < 2 {
                return Err(Error::Parse(format!("row {} has fewer than two columns", row + 1)));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(t), Ok(v)) => points.push((t, v)),
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::Parse(format!(
                        "row {}: cannot parse `{}`, `{}` as numbers",
                        row + 1,
                        &record[0],
                        &record[1]
                    )))
                }
            }
        }
        SampledEnvelope::new(&points)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file)
    }

    /// Linear interpolation at normalised time `s ∈ [0, 1]`; zero outside.
    pub fn value(&self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        let idx = self.times.partition_point(|&t| t <= s);
        if idx == 0 {
            return self.values[0];
        }
        if idx >= self.times.len() {
            return self.values[self.values.len() - 1];
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        v0 + (v1 - v0) * (s - t0) / (t1 - t0)
    }

    /// Trapezoidal area over the normalised axis (exact for the linear interpolant).
    pub fn area(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Temporal envelope of a constituent pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PulseShape {
    /// Constant envelope over the full duration.
    Rectangular,
    /// `exp(-4 ln2 (t - t_c)² / FWHM²)` with FWHM = pulse duration, truncated
    /// at ±3 FWHM.
    Gaussian,
    /// Tabulated envelope stretched over the pulse duration.
    Sampled(SampledEnvelope),
}

impl PulseShape {
    pub fn kind(&self) -> &'static str {
        match self {
            PulseShape::Rectangular => "rect",
            PulseShape::Gaussian => "gauss",
            PulseShape::Sampled(_) => "sampled",
        }
    }

    /// Envelope area divided by the duration parameter.
    pub fn area_factor(&self) -> f64 {
        match self {
            PulseShape::Rectangular => 1.0,
            PulseShape::Gaussian => gaussian_area_per_fwhm(),
            PulseShape::Sampled(env) => env.area(),
        }
    }

    /// Length of the integration window divided by the duration parameter.
    pub fn window_factor(&self) -> f64 {
        match self {
            PulseShape::Gaussian => 2.0 * GAUSSIAN_TRUNCATION_FWHM,
            _ => 1.0,
        }
    }

    /// Envelope value at time `t` measured from the start of the window.
    pub fn envelope(&self, t: f64, duration: f64) -> f64 {
        match self {
            PulseShape::Rectangular => {
                if (0.0..=duration).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            }
            PulseShape::Gaussian => {
                let centre = GAUSSIAN_TRUNCATION_FWHM * duration;
                let x = (t - centre) / duration;
                if x.abs() > GAUSSIAN_TRUNCATION_FWHM {
                    0.0
                } else {
                    (-4.0 * std::f64::consts::LN_2 * x * x).exp()
                }
            }
            PulseShape::Sampled(env) => env.value(t / duration),
        }
    }

    /// Whether the envelope is constant over the window.
    pub fn is_flat(&self) -> bool {
        matches!(self, PulseShape::Rectangular)
    }
}

/// One constituent pulse.
///
/// `duration` is the full width for rectangular and sampled envelopes and the
/// FWHM for Gaussian ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub shape: PulseShape,
    /// Peak Rabi frequency Ω (rad per time unit).
    pub omega_peak: f64,
    pub duration: f64,
    pub carrier_phase: f64,
}

impl PulseSpec {
    pub fn new(shape: PulseShape, omega_peak: f64, duration: f64, carrier_phase: f64) -> Result<Self> {
        let spec = PulseSpec {
            shape,
            omega_peak,
            duration,
            carrier_phase,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A pulse whose area equals `area` at peak Rabi frequency `omega_peak`.
    pub fn with_area(shape: PulseShape, omega_peak: f64, area: f64) -> Result<Self> {
        let duration = area / (omega_peak * shape.area_factor());
        PulseSpec::new(shape, omega_peak, duration, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_peak.is_finite() && self.omega_peak >= 0.0) {
            return Err(Error::Domain(format!("omega_peak = {} must be >= 0", self.omega_peak)));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Domain(format!("duration = {} must be > 0", self.duration)));
        }
        if !self.carrier_phase.is_finite() {
            return Err(Error::Domain("carrier phase must be finite".into()));
        }
        Ok(())
    }

    /// Duration for which the pulse area equals π at this peak Rabi frequency.
    pub fn nominal_pi_duration(&self) -> f64 {
        PI / (self.omega_peak * self.shape.area_factor())
    }

    /// Pulse area `∫Ω(t) dt` at nominal amplitude.
    pub fn area(&self) -> f64 {
        self.omega_peak * self.duration * self.shape.area_factor()
    }

    /// Total length of the integration window.
    pub fn window(&self) -> f64 {
        self.duration * self.shape.window_factor()
    }

    pub fn centre(&self) -> f64 {
        0.5 * self.window()
    }

    /// Nominal Rabi frequency at time `t` from the start of the window.
    pub fn rabi(&self, t: f64) -> f64 {
        self.omega_peak * self.shape.envelope(t, self.duration)
    }

    pub fn with_duration(&self, duration: f64) -> Self {
        PulseSpec {
            duration,
            ..self.clone()
        }
    }

    pub fn with_carrier_phase(&self, carrier_phase: f64) -> Self {
        PulseSpec {
            carrier_phase,
            ..self.clone()
        }
    }
}

/// Deviations of a real pulse from its nominal parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorModel {
    /// Multiplies Ω(t); 1 is nominal.
    pub amplitude_scale: f64,
    /// Static detuning Δ₀.
    pub static_detuning: f64,
    /// Linear chirp rate C; the ramp restarts at each pulse centre.
    pub chirp_rate: f64,
    /// Stark coefficient κ: adds κ·Ω(t)²/Ω_peak to the detuning.
    pub stark_coefficient: f64,
    /// Standard deviation of per-pulse random carrier-phase noise.
    pub phase_jitter_std: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        ErrorModel {
            amplitude_scale: 1.0,
            static_detuning: 0.0,
            chirp_rate: 0.0,
            stark_coefficient: 0.0,
            phase_jitter_std: 0.0,
        }
    }
}

impl ErrorModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.amplitude_scale,
            self.static_detuning,
            self.chirp_rate,
            self.stark_coefficient,
            self.phase_jitter_std,
        ];
        if fields.iter().all(|x| x.is_finite()) && self.phase_jitter_std >= 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("error model has non-finite or negative jitter fields: {self:?}")))
        }
    }

    pub fn with_detuning(&self, static_detuning: f64) -> Self {
        ErrorModel {
            static_detuning,
            ..*self
        }
    }

    /// Whether the detuning is constant over a flat-topped pulse.
    pub fn is_time_independent(&self) -> bool {
        self.chirp_rate == 0.0
    }

    /// Per-pulse carrier-phase offsets for an `n`-pulse train. All zero when
    /// no jitter is configured.
    pub fn jitter_offsets(&self, n: usize, seed: u64) -> Vec<f64> {
        if self.phase_jitter_std == 0.0 {
            return vec![0.0; n];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, self.phase_jitter_std).expect("validated std");
        (0..n).map(|_| normal.sample(&mut rng)).collect()
    }

    /// Actual Rabi frequency at time `t`.
    pub fn rabi(&self, spec: &PulseSpec, t: f64) -> f64 {
        self.amplitude_scale * spec.rabi(t)
    }
}

/// Δ(t) = Δ₀ + C·(t − t_centre) + κ·Ω(t)²/Ω_peak.
pub fn instantaneous_detuning(err: &ErrorModel, spec: &PulseSpec, t: f64) -> f64 {
    let stark = if spec.omega_peak > 0.0 && err.stark_coefficient != 0.0 {
        let omega = err.rabi(spec, t);
        err.stark_coefficient * omega * omega / spec.omega_peak
    } else {
        0.0
    };
    err.static_detuning + err.chirp_rate * (t - spec.centre()) + stark
}

/// Stepping scheme for the piecewise-constant-Hamiltonian integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepper {
    /// One exponential of H at the step midpoint (second order).
    Midpoint,
    /// Two exponentials of Gauss-point combinations of H (fourth-order
    /// commutator-free Magnus).
    Magnus4,
}

/// Frame in which the Schrödinger equation is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    DiagonalDetuning,
    PhaseIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub stepper: Stepper,
    pub frame: Frame,
    /// Converged once successive step doublings agree entrywise to this.
    pub rel_tol: f64,
    pub initial_steps: usize,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            stepper: Stepper::Magnus4,
            frame: Frame::DiagonalDetuning,
            rel_tol: 1e-10,
            initial_steps: 8,
            max_steps: 1 << 22,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tol(self, rel_tol: f64) -> Self {
        IntegratorConfig { rel_tol, ..self }
    }
}

/// Outcome of an integration: propagator matrix plus convergence diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct Integration {
    pub matrix: Mat2,
    pub steps: usize,
    pub achieved: f64,
}

// Gauss-Legendre 5-point nodes and weights on [-1, 1].
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

struct Drive<'a> {
    spec: &'a PulseSpec,
    err: &'a ErrorModel,
    frame: Frame,
    phase: Complex64,
}

impl<'a> Drive<'a> {
    fn new(spec: &'a PulseSpec, err: &'a ErrorModel, frame: Frame) -> Self {
        Drive {
            spec,
            err,
            frame,
            phase: Complex64::from_polar(1.0, spec.carrier_phase),
        }
    }

    /// `∫_a^b Δ(t) dt`, analytic for the static and chirp parts.
    fn detuning_integral(&self, a: f64, b: f64) -> f64 {
        let tc = self.spec.centre();
        let linear = self.err.static_detuning * (b - a)
            + 0.5 * self.err.chirp_rate * ((b - tc).powi(2) - (a - tc).powi(2));
        if self.err.stark_coefficient == 0.0 || self.spec.omega_peak == 0.0 {
            return linear;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let quad: f64 = GL5
            .iter()
            .map(|&(x, w)| {
                let om = self.err.rabi(self.spec, mid + half * x);
                w * om * om
            })
            .sum();
        linear + self.err.stark_coefficient / self.spec.omega_peak * quad * half
    }

    /// `(H11, H12)` of the traceless Hamiltonian at `t`; `delta` is the
    /// accumulated phase integral (used only in the phase-integral frame).
    fn hamiltonian(&self, t: f64, delta: f64) -> (f64, Complex64) {
        let omega = self.err.rabi(self.spec, t);
        match self.frame {
            Frame::DiagonalDetuning => (
                -0.5 * instantaneous_detuning(self.err, self.spec, t),
                self.phase * (0.5 * omega),
            ),
            Frame::PhaseIntegral => (0.0, self.phase * Complex64::from_polar(0.5 * omega, -delta)),
        }
    }

    fn evolve(&self, stepper: Stepper, steps: usize) -> Mat2 {
        let window = self.spec.window();
        let h = window / steps as f64;
        let mut u = Mat2::identity();
        let mut delta = 0.0;
        let track_delta = self.frame == Frame::PhaseIntegral;
        for k in 0..steps {
            let t = k as f64 * h;
            let step = match stepper {
                Stepper::Midpoint => {
                    let tm = t + 0.5 * h;
                    let dm = if track_delta { delta + self.detuning_integral(t, tm) } else { 0.0 };
                    let (a, b) = self.hamiltonian(tm, dm);
                    Mat2::exp_traceless_hermitian(a, b, h)
                }
                Stepper::Magnus4 => {
                    let s3 = 3f64.sqrt();
                    let (c1, c2) = (0.5 - s3 / 6.0, 0.5 + s3 / 6.0);
                    let (w1, w2) = (0.25 - s3 / 6.0, 0.25 + s3 / 6.0);
                    let (t1, t2) = (t + c1 * h, t + c2 * h);
                    let (d1, d2) = if track_delta {
                        (
                            delta + self.detuning_integral(t, t1),
                            delta + self.detuning_integral(t, t2),
                        )
                    } else {
                        (0.0, 0.0)
                    };
                    let (a1, b1) = self.hamiltonian(t1, d1);
                    let (a2, b2) = self.hamiltonian(t2, d2);
                    let first = Mat2::exp_traceless_hermitian(w2 * a1 + w1 * a2, b1 * w2 + b2 * w1, h);
                    let second = Mat2::exp_traceless_hermitian(w1 * a1 + w2 * a2, b1 * w1 + b2 * w2, h);
                    second * first
                }
            };
            u = step * u;
            if track_delta {
                delta += self.detuning_integral(t, t + h);
            }
        }
        u
    }
}

/// Integrates the pulse with exactly `steps` uniform steps, no convergence check.
pub fn evolve_fixed(spec: &PulseSpec, err: &ErrorModel, stepper: Stepper, frame: Frame, steps: usize) -> Mat2 {
    Drive::new(spec, err, frame).evolve(stepper, steps.max(1))
}

/// Integrates with step doubling until two successive results agree to
/// `cfg.rel_tol`.
pub fn integrate(spec: &PulseSpec, err: &ErrorModel, cfg: &IntegratorConfig) -> Result<Integration> {
    spec.validate()?;
    err.validate()?;
    let drive = Drive::new(spec, err, cfg.frame);
    let mut steps = cfg.initial_steps.max(1);
    let mut prev = drive.evolve(cfg.stepper, steps);
    let mut achieved = f64::INFINITY;
    while steps * 2 <= cfg.max_steps {
        steps *= 2;
        let next = drive.evolve(cfg.stepper, steps);
        achieved = next.max_abs_diff(&prev);
        if achieved <= cfg.rel_tol {
            return Ok(Integration {
                matrix: next,
                steps,
                achieved,
            });
        }
        prev = next;
    }
    Err(Error::Integration {
        achieved,
        requested: cfg.rel_tol,
        steps,
    })
}

/// Single-pulse propagator with the default integrator settings.
pub fn propagate(spec: &PulseSpec, err: &ErrorModel) -> Result<Propagator> {
    propagate_with(spec, err, &IntegratorConfig::default())
}

pub fn propagate_with(spec: &PulseSpec, err: &ErrorModel, cfg: &IntegratorConfig) -> Result<Propagator> {
    integrate(spec, err, cfg).map(|r| Propagator::from_matrix(&r.matrix))
}

/// Closed-form propagator of a rectangular pulse with constant Ω and Δ.
///
/// With `Ω_e = sqrt(Ω² + Δ²)` and `θ = Ω_e T / 2`:
/// `U11 = cos θ + i (Δ/Ω_e) sin θ`, `U12 = -i (Ω/Ω_e) sin θ e^{iφ}`.
pub fn analytic_rabi(omega: f64, delta: f64, duration: f64, phi: f64) -> Propagator {
    let omega_eff = omega.hypot(delta);
    if omega_eff == 0.0 {
        return Propagator::identity();
    }
    let theta = 0.5 * omega_eff * duration;
    let (s, c) = theta.sin_cos();
    let u11 = Complex64::new(c, delta / omega_eff * s);
    let u12 = Complex64::new(0.0, -omega / omega_eff * s) * Complex64::from_polar(1.0, phi);
    let zero = Complex64::new(0.0, 0.0);
    Propagator::from_matrix(&Mat2::new(u11, u12, zero, zero))
}

/// Fast path for flat pulses with time-independent detuning: the effective
/// constant Ω and Δ including amplitude and Stark errors.
pub fn constant_parameters(spec: &PulseSpec, err: &ErrorModel) -> Option<(f64, f64)> {
    if !spec.shape.is_flat() || !err.is_time_independent() {
        return None;
    }
    let omega = err.amplitude_scale * spec.omega_peak;
    Some((omega, instantaneous_detuning(err, spec, spec.centre())))
}

/// Propagator of one pulse, using the closed form whenever the Hamiltonian is
/// constant and the integrator otherwise.
pub fn base_propagator(spec: &PulseSpec, err: &ErrorModel, cfg: &IntegratorConfig) -> Result<Propagator> {
    match constant_parameters(spec, err) {
        Some((omega, delta)) => Ok(analytic_rabi(omega, delta, spec.duration, spec.carrier_phase)),
        None => propagate_with(spec, err, cfg),
    }
}
