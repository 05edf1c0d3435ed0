// SPDX-License-Identifier: Apache-2.0

//! SU(2) propagators in Stückelberg form.
//!
//! A two-state propagator is stored as three real numbers `(q, alpha, beta)`:
//!
//! ```text
//!     | q e^{iα}      p e^{iβ}  |
//! U = |                         |,   p = sqrt(1 - q²)
//!     | -p e^{-iβ}    q e^{-iα} |
//! ```
//!
//! `q²` is the probability of no transition, `p²` the transition probability.
//! A constant phase shift φ of the Rabi frequency only moves `β` to `β + φ`.
//! Composition multiplies the 2×2 matrices and re-extracts `(q, α, β)`.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on `q` outside `[0, 1]` before it counts as a domain error.
pub const Q_SLACK: f64 = 1e-12;

/// Below this magnitude a Stückelberg amplitude is treated as exactly zero and
/// the phase that rides on it is pinned to 0.
const PHASE_EPS: f64 = 4.0 * f64::EPSILON;

/// Reduce an angle to `(-π, π]`.
///
/// Uses round-half-to-even on the turn count so that the result is identical
/// on every platform, then maps the `-π` edge onto `+π`.
pub fn reduce_phase(x: f64) -> f64 {
    let turns = (x / (2.0 * PI)).round_ties_even();
    let r = x - 2.0 * PI * turns;
    if r <= -PI {
        r + 2.0 * PI
    } else if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// A dense complex 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Mat2([[one, zero], [zero, one]])
    }

    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn diag(a: Complex64, d: Complex64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Mat2([[a, zero], [zero, d]])
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[row][col]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }

    /// `exp(-i · dt · H)` for the traceless Hermitian `H = [[a, b], [b*, -a]]`.
    pub fn exp_traceless_hermitian(a: f64, b: Complex64, dt: f64) -> Self {
        let w = (a * a + b.norm_sqr()).sqrt();
        let theta = w * dt;
        let (s, c) = theta.sin_cos();
        // sin(w dt)/w, finite as w -> 0
        let sinc = if w * dt.abs() < 1e-8 {
            dt * (1.0 - theta * theta / 6.0)
        } else {
            s / w
        };
        let i = Complex64::new(0.0, 1.0);
        let cc = Complex64::new(c, 0.0);
        Mat2([
            [cc - i * sinc * a, -i * sinc * b],
            [-i * sinc * b.conj(), cc + i * sinc * a],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// A two-state propagator in Stückelberg form.
///
/// Invariants: `0 <= q <= 1`; `alpha` and `beta` lie in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Propagator {
    q: f64,
    alpha: f64,
    beta: f64,
}

impl Propagator {
    /// Builds a propagator, clamping `q` into `[0, 1]` when it overshoots by
    /// at most [`Q_SLACK`].
    pub fn new(q: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !q.is_finite() || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite Stückelberg parameters (q={q}, alpha={alpha}, beta={beta})"
            )));
        }
        if !(-Q_SLACK..=1.0 + Q_SLACK).contains(&q) {
            return Err(Error::Domain(format!("q = {q} lies outside [0, 1]")));
        }
        Ok(Propagator {
            q: q.clamp(0.0, 1.0),
            alpha: reduce_phase(alpha),
            beta: reduce_phase(beta),
        })
    }

    pub fn identity() -> Self {
        Propagator {
            q: 1.0,
            alpha: 0.0,
            beta: 0.0,
        }
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    #[inline]
    pub fn p(&self) -> f64 {
        (1.0 - self.q * self.q).max(0.0).sqrt()
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn matrix(&self) -> Mat2 {
        let p = self.p();
        let ea = Complex64::from_polar(1.0, self.alpha);
        let eb = Complex64::from_polar(1.0, self.beta);
        Mat2([[ea * self.q, eb * p], [-eb.conj() * p, ea.conj() * self.q]])
    }

    /// Re-expresses an SU(2) matrix in Stückelberg form. Only the first row
    /// is read; the row is renormalised to absorb rounding drift.
    ///
    /// When `q` (or `p`) vanishes, the phase riding on it is undefined and
    /// is set to 0.
    pub fn from_matrix(m: &Mat2) -> Self {
        let a = m.get(0, 0);
        let b = m.get(0, 1);
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (abs_a, abs_b) = if norm > 0.0 {
            (a.norm() / norm, b.norm() / norm)
        } else {
            (1.0, 0.0)
        };
        let q = abs_a.min(1.0);
        let alpha = if abs_a < PHASE_EPS { 0.0 } else { reduce_phase(a.arg()) };
        let beta = if abs_b < PHASE_EPS { 0.0 } else { reduce_phase(b.arg()) };
        Propagator { q, alpha, beta }
    }

    /// The same pulse with its Rabi frequency shifted by a constant phase.
    pub fn with_phase(&self, phi: f64) -> Self {
        apply_phase(self, phi)
    }

    /// Propagator element `U_11 = q e^{iα}`.
    pub fn u11(&self) -> Complex64 {
        Complex64::from_polar(self.q, self.alpha)
    }

    /// Propagator element `U_21 = -p e^{-iβ}`.
    pub fn u21(&self) -> Complex64 {
        -Complex64::from_polar(self.p(), -self.beta)
    }

    pub fn transition_probability(&self) -> f64 {
        transition_probability(self)
    }

    pub fn infidelity(&self) -> f64 {
        infidelity(self)
    }
}

/// A pulse whose Rabi frequency carries a constant phase `phase`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasedPulse {
    pub base: Propagator,
    pub phase: f64,
}

impl PhasedPulse {
    pub fn new(base: Propagator, phase: f64) -> Self {
        PhasedPulse { base, phase }
    }

    pub fn materialize(&self) -> Propagator {
        apply_phase(&self.base, self.phase)
    }
}

/// Builds a propagator from its Stückelberg variables.
pub fn make_propagator(q: f64, alpha: f64, beta: f64) -> Result<Propagator> {
    Propagator::new(q, alpha, beta)
}

/// Imprints a constant Rabi-frequency phase: `β -> β + φ`, `q` and `α` untouched.
pub fn apply_phase(u: &Propagator, phi: f64) -> Propagator {
    Propagator {
        q: u.q,
        alpha: u.alpha,
        beta: reduce_phase(u.beta + phi),
    }
}

/// Composes pulses in time order: `pulses[0]` acts first, so the result is
/// `U_n ··· U_2 U_1`.
pub fn compose(pulses: &[Propagator]) -> Result<Propagator> {
    if pulses.is_empty() {
        return Err(Error::Domain("cannot compose an empty pulse list".into()));
    }
    if let [only] = pulses {
        return Ok(*only);
    }
    Ok(Propagator::from_matrix(&compose_matrix(pulses)))
}

/// Matrix product `U_n ··· U_1` without re-extraction.
pub fn compose_matrix(pulses: &[Propagator]) -> Mat2 {
    pulses
        .iter()
        .fold(Mat2::identity(), |acc, u| u.matrix() * acc)
}

/// `p² = 1 - q²`.
pub fn transition_probability(u: &Propagator) -> f64 {
    1.0 - u.q * u.q
}

/// `q² = |U_11|²`, the probability of no transition.
pub fn infidelity(u: &Propagator) -> f64 {
    u.q * u.q
}
