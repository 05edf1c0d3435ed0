// SPDX-License-Identifier: Apache-2.0

//! Infidelity landscapes over (static detuning, single-pulse duration).

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::pulses::{base_propagator, ErrorModel, IntegratorConfig, PulseSpec};
use crate::sequences::{execute, execute_with_offsets, CompositeSequence};
use crate::su2::Propagator;
use crate::{Error, Result};

/// Value stored in cells whose propagation failed.
pub const MISSING: f64 = -1.0;

/// `Q = |U11|²` on a grid. Rows follow the duration axis, columns the detuning axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessMap {
    pub sequence_label: String,
    pub shape_kind: String,
    /// `Δ/Ω`.
    pub detuning_axis: Vec<f64>,
    /// `T/τ` with `τ` the nominal π duration.
    pub duration_axis: Vec<f64>,
    /// `values[row][col]`, [`MISSING`] where `valid` is false.
    pub values: Vec<Vec<f64>>,
    pub valid: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Detuning,
    Duration,
}

/// Grid ranges and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub detuning: (f64, f64),
    pub duration: (f64, f64),
    /// Points along (detuning, duration).
    pub resolution: (usize, usize),
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            detuning: (-1.0, 1.0),
            duration: (0.0, 2.0),
            resolution: (201, 201),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanOptions {
    pub integrator: IntegratorConfig,
    /// Base seed for per-pulse phase jitter.
    pub seed: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            integrator: IntegratorConfig::default(),
            seed: 0,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl RobustnessMap {
    pub fn new(
        sequence_label: impl Into<String>,
        shape_kind: impl Into<String>,
        detuning_axis: Vec<f64>,
        duration_axis: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if detuning_axis.is_empty() || duration_axis.is_empty() {
            return Err(Error::Domain("map axes must be non-empty".into()));
        }
        if !strictly_increasing(&detuning_axis) || !strictly_increasing(&duration_axis) {
            return Err(Error::Domain("map axes must be strictly increasing".into()));
        }
        if values.len() != duration_axis.len() || values.iter().any(|r| r.len() != detuning_axis.len()) {
            return Err(Error::Domain("value matrix does not match the axes".into()));
        }
        let valid = values
            .iter()
            .map(|r| r.iter().map(|v| (0.0..=1.0).contains(v)).collect())
            .collect();
        Ok(RobustnessMap {
            sequence_label: sequence_label.into(),
            shape_kind: shape_kind.into(),
            detuning_axis,
            duration_axis,
            values,
            valid,
        })
    }

    pub fn rows(&self) -> usize {
        self.duration_axis.len()
    }

    pub fn cols(&self) -> usize {
        self.detuning_axis.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.valid
            .get(row)
            .and_then(|r| r.get(col))
            .filter(|&&ok| ok)
            .map(|_| self.values[row][col])
    }

    /// Grid cell closest to `(Δ/Ω, T/τ)`.
    pub fn nearest_cell(&self, detuning: f64, duration: f64) -> (usize, usize) {
        let nearest = |axis: &[f64], x: f64| {
            (0..axis.len())
                .min_by(|&a, &b| (axis[a] - x).abs().total_cmp(&(axis[b] - x).abs()))
                .unwrap_or(0)
        };
        (nearest(&self.duration_axis, duration), nearest(&self.detuning_axis, detuning))
    }

    /// `P = 1 - Q` cellwise; missing cells stay [`MISSING`].
    pub fn fidelity(&self) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .zip(&self.valid)
            .map(|(r, ok)| r.iter().zip(ok).map(|(q, &v)| if v { 1.0 - q } else { MISSING }).collect())
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.valid.iter().flatten().filter(|v| !**v).count()
    }

    /// CSV: `#` metadata lines, a header row of detuning values, then one row
    /// per duration value.
    pub fn write_csv<W: Write, M: Serialize>(&self, out: W, metadata: &M) -> Result<()> {
        let mut out = out;
        let meta = serde_json::to_string(metadata).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(out, "# sequence={} shape={}", self.sequence_label, self.shape_kind)?;
        writeln!(out, "# config={meta}")?;
        writeln!(out, "# rows: T/tau, columns: Delta/Omega, missing={MISSING}")?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        let map_err = |e: csv::Error| Error::Io(e.to_string());
        let mut header = vec!["T/tau \\ Delta/Omega".to_string()];
        header.extend(self.detuning_axis.iter().map(|v| format!("{v}")));
        w.write_record(&header).map_err(map_err)?;
        for (t, row) in self.duration_axis.iter().zip(&self.values) {
            let mut rec = vec![format!("{t}")];
            rec.extend(row.iter().map(|v| format!("{v:e}")));
            w.write_record(&rec).map_err(map_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON with axes, row-major values, validity mask and metadata.
    pub fn to_json<M: Serialize>(&self, metadata: &M) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a, M> {
            metadata: &'a M,
            sequence_label: &'a str,
            shape_kind: &'a str,
            rows: usize,
            cols: usize,
            detuning_axis: &'a [f64],
            duration_axis: &'a [f64],
            values: Vec<f64>,
            valid: Vec<bool>,
            missing_value: f64,
        }
        let doc = Doc {
            metadata,
            sequence_label: &self.sequence_label,
            shape_kind: &self.shape_kind,
            rows: self.rows(),
            cols: self.cols(),
            detuning_axis: &self.detuning_axis,
            duration_axis: &self.duration_axis,
            values: self.values.iter().flatten().copied().collect(),
            valid: self.valid.iter().flatten().copied().collect(),
            missing_value: MISSING,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))
    }
}

fn cell_seed(base: u64, row: usize, col: usize) -> u64 {
    base ^ ((row as u64) << 32 | col as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// One composite infidelity for duration `duration` and static detuning `delta`.
pub fn cell_infidelity(
    seq: &CompositeSequence,
    spec: &PulseSpec,
    err: &ErrorModel,
    duration: f64,
    delta: f64,
    opts: &ScanOptions,
    seed: u64,
) -> Result<f64> {
    let err = err.with_detuning(delta);
    let base = if duration == 0.0 {
        Propagator::identity()
    } else {
        base_propagator(&spec.with_duration(duration), &err, &opts.integrator)?
    };
    let u = if err.phase_jitter_std > 0.0 {
        execute_with_offsets(seq, &base, &err.jitter_offsets(seq.len(), seed))?
    } else {
        execute(seq, &base)?
    };
    Ok(u.infidelity())
}

/// Scans `Q` over `Δ = (Δ/Ω)·Ω` and `T = (T/τ)·τ`. The static detuning of
/// `err_base` is replaced by the grid value.
pub fn scan(
    seq: &CompositeSequence,
    spec: &PulseSpec,
    err_base: &ErrorModel,
    det_range: (f64, f64),
    dur_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<RobustnessMap> {
    let grid = Grid {
        detuning: det_range,
        duration: dur_range,
        resolution,
    };
    scan_with(seq, spec, err_base, &grid, &ScanOptions::default())
}

pub fn scan_with(
    seq: &CompositeSequence,
    spec: &PulseSpec,
    err_base: &ErrorModel,
    grid: &Grid,
    opts: &ScanOptions,
) -> Result<RobustnessMap> {
    spec.validate()?;
    err_base.validate()?;
    let (nd, nt) = grid.resolution;
    if nd < 2 || nt < 2 {
        return Err(Error::Domain("resolution must be at least 2 per axis".into()));
    }
    let (d0, d1) = grid.detuning;
    let (t0, t1) = grid.duration;
    if ![d0, d1, t0, t1].iter().all(|v| v.is_finite()) || d0 >= d1 || t0 >= t1 {
        return Err(Error::Domain("grid ranges must be finite and increasing".into()));
    }
    if t0 < 0.0 {
        return Err(Error::Domain("durations must be non-negative".into()));
    }
    let omega = spec.omega_peak;
    let tau = spec.nominal_pi_duration();
    if !(omega > 0.0 && tau.is_finite()) {
        return Err(Error::Domain("scans need a positive peak Rabi frequency".into()));
    }
    let det_axis = linspace(d0, d1, nd);
    let dur_axis = linspace(t0, t1, nt);

    let cells: Vec<Vec<Option<f64>>> = dur_axis
        .par_iter()
        .enumerate()
        .map(|(row, &t)| {
            det_axis
                .iter()
                .enumerate()
                .map(|(col, &d)| {
                    let seed = cell_seed(opts.seed, row, col);
                    cell_infidelity(seq, spec, err_base, t * tau, d * omega, opts, seed)
                        .ok()
                        .map(|q| q.clamp(0.0, 1.0))
                })
                .collect()
        })
        .collect();

    let values = cells
        .iter()
        .map(|r| r.iter().map(|c| c.unwrap_or(MISSING)).collect())
        .collect();
    let valid = cells.iter().map(|r| r.iter().map(Option::is_some).collect()).collect();
    Ok(RobustnessMap {
        sequence_label: seq.label.clone(),
        shape_kind: spec.shape.kind().to_string(),
        detuning_axis: det_axis,
        duration_axis: dur_axis,
        values,
        valid,
    })
}

/// Fraction of all cells with `Q < threshold`; missing cells never count.
pub fn level_region_fraction(map: &RobustnessMap, threshold: f64) -> f64 {
    let total = map.rows() * map.cols();
    if total == 0 {
        return 0.0;
    }
    let below = map
        .values
        .iter()
        .zip(&map.valid)
        .flat_map(|(r, ok)| r.iter().zip(ok))
        .filter(|(q, &ok)| ok && **q < threshold)
        .count();
    below as f64 / total as f64
}

/// Extent of the contiguous sub-threshold run through `anchor = (row, col)`
/// along `axis`. Each end sits at the linearly interpolated threshold
/// crossing, or half a cell beyond the run where the axis ends or the
/// neighbouring cell is missing.
pub fn bandwidth(map: &RobustnessMap, threshold: f64, axis: Axis, anchor: (usize, usize)) -> Result<f64> {
    let (row, col) = anchor;
    if row >= map.rows() || col >= map.cols() {
        return Err(Error::Domain(format!("anchor ({row}, {col}) lies outside the map")));
    }
    let (axis_values, pos) = match axis {
        Axis::Detuning => (&map.detuning_axis, col),
        Axis::Duration => (&map.duration_axis, row),
    };
    let len = axis_values.len();
    let value = |i: usize| match axis {
        Axis::Detuning => map.get(row, i),
        Axis::Duration => map.get(i, col),
    };
    let below = |i: usize| value(i).is_some_and(|q| q < threshold);
    if !below(pos) {
        return Err(Error::Domain(format!(
            "anchor ({row}, {col}) has Q = {} which is not below {threshold}",
            map.values[row][col]
        )));
    }
    let mut lo = pos;
    while lo > 0 && below(lo - 1) {
        lo -= 1;
    }
    let mut hi = pos;
    while hi + 1 < len && below(hi + 1) {
        hi += 1;
    }
    let step = if len > 1 {
        (axis_values[len - 1] - axis_values[0]) / (len - 1) as f64
    } else {
        0.0
    };
    // crossing between an inside cell and its outside neighbour
    let edge = |inside: usize, outside: Option<usize>, dir: f64| -> f64 {
        let x_in = axis_values[inside];
        match outside.and_then(|o| value(o).map(|q| (o, q))) {
            Some((o, q_out)) => {
                let q_in = value(inside).unwrap_or(0.0);
                let frac = ((threshold - q_in) / (q_out - q_in)).clamp(0.0, 1.0);
                x_in + frac * (axis_values[o] - x_in)
            }
            None => x_in + dir * 0.5 * step,
        }
    };
    let lo_x = edge(lo, lo.checked_sub(1), -1.0);
    let hi_x = edge(hi, (hi + 1 < len).then_some(hi + 1), 1.0);
    Ok(hi_x - lo_x)
}
