// SPDX-License-Identifier: Apache-2.0

//! Rephasing of an inhomogeneously broadened ensemble by composite inversion
//! pulses in a CPMG-style storage window.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::maps::{Grid, RobustnessMap, MISSING};
use crate::pulses::{base_propagator, ErrorModel, IntegratorConfig, PulseShape, PulseSpec};
use crate::sequences::{execute_with_offsets, CompositeSequence};
use crate::su2::Mat2;
use crate::{Error, Result};

/// One-dimensional parameter distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Distribution {
    Fixed { value: f64 },
    Gaussian { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    Samples { values: Vec<f64> },
}

impl Distribution {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Distribution::Fixed { value } => value.is_finite(),
            Distribution::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && *std >= 0.0,
            Distribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Distribution::Samples { values } => !values.is_empty() && values.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid distribution {self:?}")))
        }
    }

    /// Value at cumulative probability `u ∈ (0, 1)`.
    fn quantile(&self, u: f64) -> f64 {
        match self {
            Distribution::Fixed { value } => *value,
            Distribution::Gaussian { mean, std } => {
                if *std == 0.0 {
                    *mean
                } else {
                    StatNormal::new(*mean, *std).expect("validated").inverse_cdf(u)
                }
            }
            Distribution::Uniform { low, high } => low + (high - low) * u,
            Distribution::Samples { values } => {
                let i = ((u * values.len() as f64) as usize).min(values.len() - 1);
                values[i]
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Distribution::Fixed { value } => *value,
            Distribution::Gaussian { mean, std } => {
                if *std == 0.0 {
                    *mean
                } else {
                    Normal::new(*mean, *std).expect("validated").sample(rng)
                }
            }
            Distribution::Uniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.gen_range(*low..*high)
                }
            }
            Distribution::Samples { values } => values[rng.gen_range(0..values.len())],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Equal-probability quantile midpoints; the two distributions are paired
    /// by a seeded permutation.
    Stratified,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    /// Intrinsic detuning of each member.
    pub detuning: Distribution,
    /// Multiplier of the drive amplitude seen by each member.
    pub rabi_scale: Distribution,
    pub member_count: usize,
    pub seed: u64,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Member {
    pub detuning: f64,
    pub rabi_scale: f64,
    pub weight: f64,
}

impl Ensemble {
    pub fn gaussian(sigma: f64, member_count: usize, seed: u64) -> Self {
        Ensemble {
            detuning: Distribution::Gaussian { mean: 0.0, std: sigma },
            rabi_scale: Distribution::Fixed { value: 1.0 },
            member_count,
            seed,
            sampling: Sampling::Stratified,
        }
    }

    /// A single resonant member with nominal drive.
    pub fn single() -> Self {
        Ensemble {
            detuning: Distribution::Fixed { value: 0.0 },
            ..Ensemble::gaussian(0.0, 1, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.member_count == 0 {
            return Err(Error::Domain("an ensemble needs at least one member".into()));
        }
        self.detuning.validate()?;
        self.rabi_scale.validate()
    }

    /// Members with weights summing to one.
    pub fn members(&self) -> Result<Vec<Member>> {
        self.validate()?;
        let n = self.member_count;
        let weight = 1.0 / n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (det, scale): (Vec<f64>, Vec<f64>) = match self.sampling {
            Sampling::Stratified => {
                let u = |k: usize| (k as f64 + 0.5) / n as f64;
                let det = (0..n).map(|k| self.detuning.quantile(u(k))).collect();
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let scale = order.iter().map(|&k| self.rabi_scale.quantile(u(k))).collect();
                (det, scale)
            }
            Sampling::MonteCarlo => (0..n)
                .map(|_| (self.detuning.draw(&mut rng), self.rabi_scale.draw(&mut rng)))
                .unzip(),
        };
        Ok(det
            .into_iter()
            .zip(scale)
            .map(|(detuning, rabi_scale)| Member { detuning, rabi_scale, weight })
            .collect())
    }
}

/// Inversion pulses used inside the storage window.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Inversion {
    /// Instantaneous perfect flips.
    Ideal,
    Composite {
        pulse: PulseSpec,
        sequence: CompositeSequence,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchoProtocol {
    pub storage_time: f64,
    /// 0 (free decay), 1, or 2 inversions.
    pub inversion_count: usize,
    pub inversion: Inversion,
    /// Shifts every inversion later by this amount.
    pub timing_offset: f64,
}

/// Storage window of 600 units with π pulses lasting 3.2 units.
pub const ANALOG_STORAGE_TIME: f64 = 600.0;
pub const ANALOG_PI_DURATION: f64 = 3.2;
/// Detuning spread giving a free-dephasing time of about 20 units.
pub const ANALOG_SIGMA: f64 = 0.05;

impl EchoProtocol {
    /// The default storage analog with rectangular π pulses.
    pub fn analog(sequence: CompositeSequence) -> Self {
        let pulse = PulseSpec::new(
            PulseShape::Rectangular,
            std::f64::consts::PI / ANALOG_PI_DURATION,
            ANALOG_PI_DURATION,
            0.0,
        )
        .expect("valid constants");
        EchoProtocol {
            storage_time: ANALOG_STORAGE_TIME,
            inversion_count: 2,
            inversion: Inversion::Composite { pulse, sequence },
            timing_offset: 0.0,
        }
    }

    pub fn ideal(storage_time: f64, inversion_count: usize) -> Self {
        EchoProtocol {
            storage_time,
            inversion_count,
            inversion: Inversion::Ideal,
            timing_offset: 0.0,
        }
    }

    /// Time taken by one composite inversion.
    pub fn inversion_duration(&self) -> f64 {
        match &self.inversion {
            Inversion::Ideal => 0.0,
            Inversion::Composite { pulse, sequence } => pulse.window() * sequence.len() as f64,
        }
    }

    /// Free-evolution intervals around the inversions.
    pub fn intervals(&self) -> Result<Vec<f64>> {
        if !(self.storage_time.is_finite() && self.storage_time > 0.0 && self.timing_offset.is_finite()) {
            return Err(Error::Domain("storage time must be positive and the offset finite".into()));
        }
        let free = self.storage_time - self.inversion_count as f64 * self.inversion_duration();
        let d = self.timing_offset;
        let out = match self.inversion_count {
            0 => vec![self.storage_time],
            1 => vec![free / 2.0 + d, free / 2.0 - d],
            2 => vec![free / 4.0 + d, free / 2.0, free / 4.0 - d],
            k => return Err(Error::Domain(format!("inversion_count must be 0, 1 or 2, got {k}"))),
        };
        if out.iter().any(|t| *t < 0.0) {
            return Err(Error::Domain(format!(
                "inversions do not fit the storage window: intervals {out:?}"
            )));
        }
        Ok(out)
    }
}

fn free_evolution(delta: f64, t: f64) -> Mat2 {
    Mat2::diag(
        Complex64::from_polar(1.0, 0.5 * delta * t),
        Complex64::from_polar(1.0, -0.5 * delta * t),
    )
}

fn ideal_flip() -> Mat2 {
    let z = Complex64::new(0.0, 0.0);
    let mi = Complex64::new(0.0, -1.0);
    Mat2::new(z, mi, mi, z)
}

fn initial_state() -> Mat2 {
    let h = Complex64::new(0.5, 0.0);
    Mat2::new(h, h, h, h)
}

fn conjugate(u: &Mat2, rho: &Mat2) -> Mat2 {
    *u * *rho * u.adjoint()
}

/// Inversion propagator seen by one member.
fn inversion_matrix(
    proto: &EchoProtocol,
    member: &Member,
    err: &ErrorModel,
    offsets: &[f64],
    integrator: &IntegratorConfig,
) -> Result<Mat2> {
    match &proto.inversion {
        Inversion::Ideal => Ok(ideal_flip()),
        Inversion::Composite { pulse, sequence } => {
            let err = ErrorModel {
                static_detuning: err.static_detuning + member.detuning,
                amplitude_scale: err.amplitude_scale * member.rabi_scale,
                ..*err
            };
            let base = base_propagator(pulse, &err, integrator)?;
            Ok(execute_with_offsets(sequence, &base, offsets)?.matrix())
        }
    }
}

/// Final density matrix of one member. Pulses see `err.static_detuning` on
/// top of the member detuning; free evolution sees the member detuning only.
pub fn evolve_member(
    member: &Member,
    proto: &EchoProtocol,
    err: &ErrorModel,
    integrator: &IntegratorConfig,
    jitter_seed: u64,
) -> Result<Mat2> {
    let intervals = proto.intervals()?;
    let n = match &proto.inversion {
        Inversion::Ideal => 0,
        Inversion::Composite { sequence, .. } => sequence.len(),
    };
    let mut rho = initial_state();
    for (k, t) in intervals.iter().enumerate() {
        if k > 0 {
            let offsets = err.jitter_offsets(n, jitter_seed.wrapping_add(k as u64));
            let u = inversion_matrix(proto, member, err, &offsets, integrator)?;
            rho = conjugate(&u, &rho);
        }
        rho = conjugate(&free_evolution(member.detuning, *t), &rho);
    }
    Ok(rho)
}

/// `|Σ w ρ12(final)|² / |Σ w ρ12(0)|²`.
pub fn rephasing_efficiency(ens: &Ensemble, proto: &EchoProtocol, err: &ErrorModel) -> Result<f64> {
    rephasing_efficiency_with(ens, proto, err, &IntegratorConfig::default())
}

pub fn rephasing_efficiency_with(
    ens: &Ensemble,
    proto: &EchoProtocol,
    err: &ErrorModel,
    integrator: &IntegratorConfig,
) -> Result<f64> {
    err.validate()?;
    proto.intervals()?;
    let members = ens.members()?;
    let coherences: Vec<Complex64> = members
        .par_iter()
        .map(|m| evolve_member(m, proto, err, integrator, ens.seed).map(|rho| rho.get(0, 1) * m.weight))
        .collect::<Result<_>>()?;
    Ok(efficiency_from(&coherences))
}

fn efficiency_from(weighted: &[Complex64]) -> f64 {
    let total: Complex64 = weighted.iter().sum();
    (total.norm_sqr() / 0.25).clamp(0.0, 1.0)
}

/// Efficiency over (pulse detuning offset `Δ/Ω`, single-pulse duration `T/τ`)
/// with ensemble and storage window fixed. Values hold efficiencies.
pub fn efficiency_map(
    ens: &Ensemble,
    proto: &EchoProtocol,
    det_offset_range: (f64, f64),
    dur_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<RobustnessMap> {
    let grid = Grid {
        detuning: det_offset_range,
        duration: dur_range,
        resolution,
    };
    efficiency_map_with(ens, proto, &ErrorModel::default(), &grid, &IntegratorConfig::default())
}

pub fn efficiency_map_with(
    ens: &Ensemble,
    proto: &EchoProtocol,
    err: &ErrorModel,
    grid: &Grid,
    integrator: &IntegratorConfig,
) -> Result<RobustnessMap> {
    err.validate()?;
    let Inversion::Composite { pulse, sequence } = &proto.inversion else {
        return Err(Error::Domain("efficiency maps need composite inversion pulses".into()));
    };
    pulse.validate()?;
    let (nd, nt) = grid.resolution;
    let (d0, d1) = grid.detuning;
    let (t0, t1) = grid.duration;
    if nd < 2 || nt < 2 {
        return Err(Error::Domain("resolution must be at least 2 per axis".into()));
    }
    if ![d0, d1, t0, t1].iter().all(|v| v.is_finite()) || d0 >= d1 || t0 >= t1 || t0 < 0.0 {
        return Err(Error::Domain("grid ranges must be finite, increasing and durations non-negative".into()));
    }
    let omega = pulse.omega_peak;
    let tau = pulse.nominal_pi_duration();
    if !(omega > 0.0) {
        return Err(Error::Domain("maps need a positive peak Rabi frequency".into()));
    }
    let members = ens.members()?;
    let det_axis: Vec<f64> = (0..nd).map(|i| d0 + (d1 - d0) * i as f64 / (nd - 1) as f64).collect();
    let dur_axis: Vec<f64> = (0..nt).map(|i| t0 + (t1 - t0) * i as f64 / (nt - 1) as f64).collect();

    // zero duration means no pulses at all: plain free decay over the window
    let free_decay = EchoProtocol::ideal(proto.storage_time, 0);
    let cell = |d: f64, t: f64| -> Result<f64> {
        let cell_err = err.with_detuning(err.static_detuning + d * omega);
        let cell_proto = EchoProtocol {
            inversion: Inversion::Composite {
                pulse: pulse.with_duration(t * tau),
                sequence: sequence.clone(),
            },
            ..proto.clone()
        };
        let active = if t == 0.0 { &free_decay } else { &cell_proto };
        let weighted: Vec<Complex64> = members
            .iter()
            .map(|m| evolve_member(m, active, &cell_err, integrator, ens.seed).map(|rho| rho.get(0, 1) * m.weight))
            .collect::<Result<_>>()?;
        Ok(efficiency_from(&weighted))
    };

    let values: Vec<Vec<f64>> = dur_axis
        .par_iter()
        .map(|&t| det_axis.iter().map(|&d| cell(d, t).unwrap_or(MISSING)).collect())
        .collect();
    let valid = values.iter().map(|r| r.iter().map(|v| *v != MISSING).collect()).collect();
    Ok(RobustnessMap {
        sequence_label: sequence.label.clone(),
        shape_kind: pulse.shape.kind().to_string(),
        detuning_axis: det_axis,
        duration_axis: dur_axis,
        values,
        valid,
    })
}

/// Fraction of all cells whose efficiency exceeds `level`.
pub fn efficiency_fraction(map: &RobustnessMap, level: f64) -> f64 {
    let total = map.rows() * map.cols();
    if total == 0 {
        return 0.0;
    }
    let above = map
        .values
        .iter()
        .zip(&map.valid)
        .flat_map(|(r, ok)| r.iter().zip(ok))
        .filter(|(v, &ok)| ok && **v > level)
        .count();
    above as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::catalog;
    use std::f64::consts::PI;

    #[test]
    fn ideal_flips_refocus_any_spread() {
        for count in [1, 2] {
            for ens in [
                Ensemble::gaussian(0.3, 200, 1),
                Ensemble {
                    detuning: Distribution::Uniform { low: -2.0, high: 2.0 },
                    sampling: Sampling::MonteCarlo,
                    ..Ensemble::gaussian(0.0, 150, 9)
                },
            ] {
                let eta = rephasing_efficiency(&ens, &EchoProtocol::ideal(600.0, count), &ErrorModel::default()).unwrap();
                assert!((eta - 1.0).abs() < 1e-10, "{count}: {eta}");
            }
        }
    }

    #[test]
    fn free_decay_matches_gaussian() {
        let sigma = 0.05;
        let ens = Ensemble::gaussian(sigma, 2000, 3);
        for t in [5.0, 10.0, 20.0, 30.0] {
            let eta = rephasing_efficiency(&ens, &EchoProtocol::ideal(t, 0), &ErrorModel::default()).unwrap();
            let want = (-(sigma * t).powi(2)).exp();
            assert!((eta / want - 1.0).abs() < 0.01, "t={t}: {eta} vs {want}");
        }
        let long = rephasing_efficiency(&ens, &EchoProtocol::ideal(600.0, 0), &ErrorModel::default()).unwrap();
        assert!(long < 1e-6, "{long}");
    }

    #[test]
    fn composite_beats_single_pulse() {
        let omega = PI / ANALOG_PI_DURATION;
        let ens = Ensemble::gaussian(0.3 * omega, 2000, 11);
        let err = ErrorModel::default();
        let single = rephasing_efficiency(&ens, &EchoProtocol::analog(CompositeSequence::single()), &err).unwrap();
        let u5b = rephasing_efficiency(&ens, &EchoProtocol::analog(catalog("U5b").unwrap()), &err).unwrap();
        assert!(u5b > single, "{u5b} vs {single}");
    }

    #[test]
    fn single_member_matches_propagator_conjugation() {
        let seq = catalog("U3").unwrap();
        let proto = EchoProtocol {
            inversion_count: 1,
            ..EchoProtocol::analog(seq.clone())
        };
        let ens = Ensemble::single();
        let Inversion::Composite { pulse, .. } = &proto.inversion else { unreachable!() };
        for (d, t) in [(0.0, 1.0), (0.3, 0.8), (-0.5, 1.3)] {
            let omega = pulse.omega_peak;
            let spec = pulse.with_duration(t * pulse.nominal_pi_duration());
            let err = ErrorModel::default().with_detuning(d * omega);
            let u = crate::sequences::execute(&seq, &base_propagator(&spec, &err, &IntegratorConfig::default()).unwrap())
                .unwrap()
                .matrix();
            // (U ρ U†)_12 with ρ = ½[[1,1],[1,1]]
            let rho12 = 0.5 * (u.get(0, 0) + u.get(0, 1)) * (u.get(1, 0) + u.get(1, 1)).conj();
            let want = (rho12.norm_sqr() / 0.25).min(1.0);
            let proto_t = EchoProtocol {
                inversion: Inversion::Composite { pulse: spec, sequence: seq.clone() },
                ..proto.clone()
            };
            let got = rephasing_efficiency(&ens, &proto_t, &err).unwrap();
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn density_matrix_stays_physical() {
        let proto = EchoProtocol::analog(catalog("U5a").unwrap());
        let err = ErrorModel { amplitude_scale: 0.9, ..Default::default() };
        for m in Ensemble::gaussian(0.2, 25, 4).members().unwrap() {
            let rho = evolve_member(&m, &proto, &err, &IntegratorConfig::default(), 0).unwrap();
            assert!((rho.trace() - 1.0).norm() < 1e-10);
            assert!(rho.max_abs_diff(&rho.adjoint()) < 1e-10);
        }
    }

    #[test]
    fn echo_of_echo_offset_invariance() {
        let ens = Ensemble::gaussian(0.2, 300, 5);
        let base = rephasing_efficiency(&ens, &EchoProtocol::ideal(600.0, 2), &ErrorModel::default()).unwrap();
        for d in [-100.0, 37.5, 149.0] {
            let p = EchoProtocol { timing_offset: d, ..EchoProtocol::ideal(600.0, 2) };
            let eta = rephasing_efficiency(&ens, &p, &ErrorModel::default()).unwrap();
            assert!((eta - base).abs() < 1e-12);
        }
    }

    #[test]
    fn member_count_convergence() {
        let proto = EchoProtocol::analog(catalog("U3").unwrap());
        let err = ErrorModel::default().with_detuning(0.05);
        for sampling in [Sampling::Stratified, Sampling::MonteCarlo] {
            let eta = |n: usize| {
                let ens = Ensemble { sampling, ..Ensemble::gaussian(0.3, n, 21) };
                rephasing_efficiency(&ens, &proto, &err).unwrap()
            };
            let n = 400;
            assert!((eta(n) - eta(2 * n)).abs() < 2.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn weights_and_validation() {
        let ms = Ensemble::gaussian(0.1, 17, 0).members().unwrap();
        assert!((ms.iter().map(|m| m.weight).sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(Ensemble::gaussian(0.1, 0, 0).members().is_err());
        assert!(Ensemble::gaussian(-0.1, 3, 0).members().is_err());
        let too_long = EchoProtocol { storage_time: 10.0, ..EchoProtocol::analog(catalog("U25a").unwrap()) };
        assert!(too_long.intervals().is_err());
        assert!(EchoProtocol::ideal(10.0, 3).intervals().is_err());
    }

    #[test]
    fn timing_balances_storage() {
        let p = EchoProtocol::analog(catalog("U7b").unwrap());
        let total: f64 = p.intervals().unwrap().iter().sum::<f64>() + 2.0 * p.inversion_duration();
        assert!((total - p.storage_time).abs() < 1e-12);
    }

    #[test]
    fn gaussian_inversions_match_rect_on_resonance() {
        let seq = catalog("U5b").unwrap();
        let rect = EchoProtocol::analog(seq.clone());
        let Inversion::Composite { pulse, .. } = &rect.inversion else { unreachable!() };
        let gpulse = PulseSpec::with_area(PulseShape::Gaussian, pulse.omega_peak, PI).unwrap();
        let gauss = EchoProtocol {
            inversion: Inversion::Composite { pulse: gpulse, sequence: seq },
            storage_time: 2000.0,
            ..rect.clone()
        };
        let rect = EchoProtocol { storage_time: 2000.0, ..rect };
        let grid = Grid { detuning: (-0.5, 0.5), duration: (0.5, 1.5), resolution: (3, 5) };
        let ens = Ensemble::single();
        let err = ErrorModel::default();
        let a = efficiency_map_with(&ens, &rect, &err, &grid, &IntegratorConfig::default()).unwrap();
        let b = efficiency_map_with(&ens, &gauss, &err, &grid, &IntegratorConfig::default()).unwrap();
        for r in 0..a.rows() {
            assert!((a.values[r][1] - b.values[r][1]).abs() < 1e-6);
        }
    }

    #[test]
    fn map_zero_duration_is_free_decay() {
        let ens = Ensemble::gaussian(ANALOG_SIGMA, 200, 0);
        let map = efficiency_map(&ens, &EchoProtocol::analog(catalog("U3").unwrap()), (-1.0, 1.0), (0.0, 2.0), (3, 3)).unwrap();
        assert!(map.values[0].iter().all(|v| *v < 1e-3));
        let (r, c) = map.nearest_cell(0.0, 1.0);
        assert!(map.values[r][c] > 0.95);
        assert_eq!(efficiency_fraction(&map, 2.0), 0.0);
    }
}
