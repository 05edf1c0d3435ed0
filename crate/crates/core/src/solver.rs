// SPDX-License-Identifier: Apache-2.0

//! Expansion of the composite `U11` as `Σ_j c_nj(α) q^j` with
//! `c_nj(α) = Σ_m d[j][m] e^{imα}`, and a multi-start phase solver built on it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::optimize::{bfgs, gauss_newton, BfgsOptions};
use crate::sequences::{full_catalog, is_anagram, CompositeSequence, PhaseOverPi};
use crate::su2::{apply_phase, compose_matrix, make_propagator, Propagator};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Sampling scheme used to recover `c_nj(α)` from values of `U11` in `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Interpolation {
    /// `n+1` equispaced points on the complex circle `|q| = radius`.
    Circle { radius: f64 },
    /// `n+1` Chebyshev nodes on `[-1, 1]`, converted to the monomial basis.
    Chebyshev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtractConfig {
    pub interpolation: Interpolation,
    pub beta: f64,
    /// Extraction fails when the a-priori error estimate exceeds this.
    pub max_error_estimate: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            interpolation: Interpolation::Circle { radius: 0.5 },
            beta: 0.0,
            max_error_estimate: 1e-6,
        }
    }
}

/// Harmonic coefficients `d[j][m]`, `0 <= j <= n`, `-n <= m <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    n: usize,
    beta: f64,
    error_estimate: f64,
    d: Vec<Vec<Complex64>>,
}

impl CoefficientTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// The `β` the samples were taken at.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// A-priori bound on the absolute error of the highest-order coefficients.
    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    pub fn get(&self, j: usize, m: i64) -> Complex64 {
        let n = self.n as i64;
        if j > self.n || m.abs() > n {
            return Complex64::new(0.0, 0.0);
        }
        self.d[j][(m + n) as usize]
    }

    /// Structurally allowed harmonics of order `j`: `|m| <= j`, `m ≡ j (mod 2)`.
    pub fn harmonics(&self, j: usize) -> Vec<(i64, Complex64)> {
        let j = j as i64;
        (-j..=j).step_by(2).map(|m| (m, self.get(j as usize, m))).collect()
    }

    /// `c_nj(α)`.
    pub fn c(&self, j: usize, alpha: f64) -> Complex64 {
        let n = self.n as i64;
        if j > self.n {
            return Complex64::new(0.0, 0.0);
        }
        self.d[j]
            .iter()
            .enumerate()
            .map(|(i, v)| v * Complex64::from_polar(1.0, (i as i64 - n) as f64 * alpha))
            .sum()
    }

    /// Reconstructed `U11(q, α)`.
    pub fn eval(&self, q: f64, alpha: f64) -> Complex64 {
        (0..=self.n).rev().fold(Complex64::new(0.0, 0.0), |acc, j| acc * q + self.c(j, alpha))
    }

    pub fn max_abs_order(&self, j: usize) -> f64 {
        if j > self.n {
            return 0.0;
        }
        self.d[j].iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Largest `|d[j][m]|` over `j <= jmax`.
    pub fn max_abs_through(&self, jmax: usize) -> f64 {
        (0..=jmax.min(self.n)).fold(0.0, |m, j| m.max(self.max_abs_order(j)))
    }

    pub fn max_abs_even(&self) -> f64 {
        (0..=self.n).step_by(2).fold(0.0, |m, j| m.max(self.max_abs_order(j)))
    }

    /// `Σ_m |d[j][m]|`.
    pub fn harmonic_sum(&self, j: usize) -> f64 {
        if j > self.n {
            return 0.0;
        }
        self.d[j].iter().map(|v| v.norm()).sum()
    }

    /// `max_α |c_nj(α)|` on an equispaced grid.
    pub fn worst_case(&self, j: usize, samples: usize) -> f64 {
        (0..samples.max(1))
            .map(|l| self.c(j, TWO_PI * l as f64 / samples.max(1) as f64).norm())
            .fold(0.0, f64::max)
    }
}

/// `U11` of the composite with analytically continued `p = sqrt(1 - q²)`.
fn composite_u11(q: Complex64, e_alpha: Complex64, e_phases: &[Complex64]) -> Complex64 {
    let p = (Complex64::new(1.0, 0.0) - q * q).sqrt();
    let a = q * e_alpha;
    let d = q * e_alpha.conj();
    let (mut x, mut y) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    for e in e_phases {
        let b = p * e;
        let c = -p * e.conj();
        (x, y) = (a * x + b * y, c * x + d * y);
    }
    x
}

/// `d[j][m]` of the composite `U(φ_n)···U(φ_1)`.
pub fn extract_coefficients(n: usize, phases: &[f64]) -> Result<CoefficientTable> {
    if n != phases.len() {
        return Err(Error::Domain(format!("n = {n} but {} phases supplied", phases.len())));
    }
    extract_coefficients_with(phases, &ExtractConfig::default())
}

pub fn extract_coefficients_with(phases: &[f64], cfg: &ExtractConfig) -> Result<CoefficientTable> {
    if phases.is_empty() {
        return Err(Error::Domain("at least one phase is required".into()));
    }
    if phases.iter().any(|x| !x.is_finite()) || !cfg.beta.is_finite() {
        return Err(Error::Domain("phases and beta must be finite".into()));
    }
    let table = extract_unchecked(phases, cfg)?;
    if !(table.error_estimate <= cfg.max_error_estimate) {
        return Err(Error::Conditioning { estimate: table.error_estimate });
    }
    Ok(table)
}

fn extract_unchecked(phases: &[f64], cfg: &ExtractConfig) -> Result<CoefficientTable> {
    let n = phases.len();
    let nq = n + 1;
    let na = 2 * n + 2;
    let e_phases: Vec<Complex64> = phases.iter().map(|&p| Complex64::from_polar(1.0, cfg.beta + p)).collect();

    // a[l][j] = c_nj(α_l)
    let mut a = vec![vec![Complex64::new(0.0, 0.0); nq]; na];
    let mut max_sample: f64 = 0.0;
    let amplification;
    match cfg.interpolation {
        Interpolation::Circle { radius } => {
            if !(radius > 0.0 && radius < 1.0) {
                return Err(Error::Domain(format!("circle radius {radius} must lie in (0, 1)")));
            }
            let nodes: Vec<Complex64> = (0..nq)
                .map(|k| Complex64::from_polar(radius, TWO_PI * k as f64 / nq as f64))
                .collect();
            for (l, row) in a.iter_mut().enumerate() {
                let e_alpha = Complex64::from_polar(1.0, TWO_PI * l as f64 / na as f64);
                let values: Vec<Complex64> = nodes.iter().map(|&q| composite_u11(q, e_alpha, &e_phases)).collect();
                max_sample = values.iter().fold(max_sample, |m, v| m.max(v.norm()));
                for (j, out) in row.iter_mut().enumerate() {
                    let s: Complex64 = values
                        .iter()
                        .enumerate()
                        .map(|(k, v)| v * Complex64::from_polar(1.0, -TWO_PI * ((j * k) % nq) as f64 / nq as f64))
                        .sum();
                    *out = s / (nq as f64 * radius.powi(j as i32));
                }
            }
            amplification = radius.powi(-(n as i32));
        }
        Interpolation::Chebyshev => {
            let theta: Vec<f64> = (0..nq).map(|k| PI * (k as f64 + 0.5) / nq as f64).collect();
            // monomial coefficients of T_0..T_n
            let mut t = vec![vec![0.0f64; nq]; nq];
            t[0][0] = 1.0;
            if nq > 1 {
                t[1][1] = 1.0;
            }
            for i in 2..nq {
                for j in 0..nq {
                    let up = if j > 0 { 2.0 * t[i - 1][j - 1] } else { 0.0 };
                    t[i][j] = up - t[i - 2][j];
                }
            }
            amplification = (0..nq).map(|j| (0..nq).map(|i| t[i][j].abs()).sum::<f64>()).fold(0.0, f64::max);
            for (l, row) in a.iter_mut().enumerate() {
                let e_alpha = Complex64::from_polar(1.0, TWO_PI * l as f64 / na as f64);
                let values: Vec<Complex64> = theta
                    .iter()
                    .map(|&th| composite_u11(Complex64::new(th.cos(), 0.0), e_alpha, &e_phases))
                    .collect();
                max_sample = values.iter().fold(max_sample, |m, v| m.max(v.norm()));
                let cheb: Vec<Complex64> = (0..nq)
                    .map(|i| {
                        let s: Complex64 = values.iter().zip(&theta).map(|(v, th)| v * (i as f64 * th).cos()).sum();
                        let w = if i == 0 { 1.0 } else { 2.0 };
                        s * (w / nq as f64)
                    })
                    .collect();
                for (j, out) in row.iter_mut().enumerate() {
                    *out = (0..nq).map(|i| cheb[i] * t[i][j]).sum();
                }
            }
        }
    }

    let width = 2 * n + 1;
    let mut d = vec![vec![Complex64::new(0.0, 0.0); width]; nq];
    for (j, dj) in d.iter_mut().enumerate() {
        for (idx, out) in dj.iter_mut().enumerate() {
            let m = idx as i64 - n as i64;
            let s: Complex64 = (0..na)
                .map(|l| a[l][j] * Complex64::from_polar(1.0, -TWO_PI * (m * l as i64) as f64 / na as f64))
                .sum();
            *out = s / na as f64;
        }
    }
    Ok(CoefficientTable {
        n,
        beta: cfg.beta,
        error_estimate: 4.0 * nq as f64 * f64::EPSILON * max_sample * amplification,
        d,
    })
}

/// Outcome of a phase search or refinement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverResult {
    pub phases: Vec<f64>,
    pub achieved_jmax: usize,
    /// `max |d[j][m]|` over `j <= achieved_jmax`.
    pub residual_low: f64,
    /// `Σ_m |d[achieved_jmax+1][m]|`.
    pub leading_cost: f64,
    /// `max_α |c_n,jmax+1(α)|`.
    pub worst_case_leading: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub seeds: usize,
    pub rng_seed: u64,
    /// A start counts as nullified when the squared-coefficient objective drops below this.
    pub objective_tol: f64,
    pub residual_tol: f64,
    /// Relative window on the leading cost within which results are kept.
    pub tie_tol: f64,
    pub dedup_tol: f64,
    /// Skip escalation and aim for this order directly.
    pub target_jmax: Option<usize>,
    pub max_n: usize,
    pub extract: ExtractConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            seeds: 512,
            rng_seed: 0x5eed_c0de,
            objective_tol: 1e-10,
            residual_tol: 1e-8,
            tie_tol: 1e-6,
            dedup_tol: 1e-5,
            target_jmax: None,
            max_n: 25,
            extract: ExtractConfig::default(),
        }
    }
}

const WORST_CASE_SAMPLES: usize = 256;
const SMOOTHING: [(f64, f64); 4] = [(1e-2, 1e2), (1e-3, 1e4), (1e-4, 1e6), (1e-6, 1e8)];
const ACTIVE_THRESHOLD: f64 = 1e-4;

/// Anagram-symmetric phase list with `φ_1 = first` and `φ_2..φ_h = free`.
fn symmetric_phases(first: f64, free: &[f64], n: usize) -> Vec<f64> {
    let h = n.div_ceil(2);
    let mut ph = vec![0.0; n];
    ph[0] = first;
    ph[1..h].copy_from_slice(&free[..h - 1]);
    for k in 0..h {
        ph[n - 1 - k] = ph[k];
    }
    ph
}

/// Real and imaginary parts of every structural harmonic at odd orders `<= jmax`.
fn low_residuals(t: &CoefficientTable, jmax: usize, out: &mut Vec<f64>) {
    for j in (1..=jmax.min(t.n)).step_by(2) {
        for (_, v) in t.harmonics(j) {
            out.push(v.re);
            out.push(v.im);
        }
    }
}

fn sum_sq_through(t: &CoefficientTable, jmax: usize) -> f64 {
    (0..=jmax.min(t.n)).flat_map(|j| t.d[j].iter()).map(|v| v.norm_sqr()).sum()
}

fn wrap_2pi(x: f64) -> f64 {
    let w = x.rem_euclid(TWO_PI);
    if TWO_PI - w < 1e-12 || w == 0.0 {
        0.0
    } else {
        w
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TWO_PI);
    d.min(TWO_PI - d)
}

/// Representative modulo global shift and global sign flip: `φ_1 = 0`, all
/// phases in `[0, 2π)`, and the first phase farther than `tol` from zero lies
/// in `[0, π)`.
pub fn canonical_gauge(phases: &[f64], tol: f64) -> Vec<f64> {
    let Some(&first) = phases.first() else {
        return Vec::new();
    };
    let mut ph: Vec<f64> = phases.iter().map(|&p| wrap_2pi(p - first)).collect();
    if let Some(&lead) = ph.iter().find(|&&p| p.min(TWO_PI - p) > tol) {
        if lead >= PI {
            ph.iter_mut().for_each(|p| *p = wrap_2pi(-*p));
        }
    }
    ph
}

/// Whether two phase lists coincide modulo global shift and sign flip.
pub fn equivalent_phases(a: &[f64], b: &[f64], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let ca = canonical_gauge(a, tol);
    let cb = canonical_gauge(b, tol);
    ca.iter().zip(&cb).all(|(x, y)| circular_distance(*x, *y) <= tol)
}

fn describe(phases: Vec<f64>, jmax: usize, cfg: &ExtractConfig, residual_tol: f64) -> Result<SolverResult> {
    let t = extract_unchecked(&phases, cfg)?;
    let residual_low = t.max_abs_through(jmax);
    Ok(SolverResult {
        achieved_jmax: jmax,
        leading_cost: t.harmonic_sum(jmax + 1),
        worst_case_leading: t.worst_case(jmax + 1, WORST_CASE_SAMPLES),
        converged: residual_low <= residual_tol,
        residual_low,
        phases,
    })
}

struct Problem<'a> {
    n: usize,
    cfg: &'a SolverConfig,
}

impl Problem<'_> {
    fn phases(&self, x: &[f64]) -> Vec<f64> {
        symmetric_phases(0.0, x, self.n)
    }

    fn table(&self, x: &[f64]) -> Option<CoefficientTable> {
        extract_unchecked(&self.phases(x), &self.cfg.extract).ok()
    }

    /// Drives orders `<= order` to zero from `x0`; returns the point and its residual.
    fn nullify(&self, order: usize, x0: &[f64]) -> (Vec<f64>, f64) {
        let f = |x: &[f64]| self.table(x).map_or(f64::INFINITY, |t| sum_sq_through(&t, order));
        let opts = BfgsOptions { f_target: 1e-24, ..Default::default() };
        let (mut x, fx) = bfgs(&f, x0, &opts);
        if fx <= self.cfg.objective_tol {
            let r = |x: &[f64]| {
                let mut out = Vec::new();
                if let Some(t) = self.table(x) {
                    low_residuals(&t, order, &mut out);
                }
                out
            };
            x = gauss_newton(&r, &x, 30, 1e-15).0;
        }
        let resid = self.table(&x).map_or(f64::INFINITY, |t| t.max_abs_through(order));
        (x, resid)
    }

    /// Minimizes the leading cost at order `lead` while keeping orders `< lead` nullified.
    fn select(&self, lead: usize, x0: &[f64]) -> (Vec<f64>, f64, f64) {
        let low = lead.saturating_sub(1);
        let mut x = x0.to_vec();
        for (eps, mu) in SMOOTHING {
            let f = |x: &[f64]| {
                self.table(x).map_or(f64::INFINITY, |t| {
                    let smooth: f64 = t.harmonics(lead).iter().map(|(_, v)| (v.norm_sqr() + eps * eps).sqrt()).sum();
                    smooth + if low > 0 { mu * sum_sq_through(&t, low) } else { 0.0 }
                })
            };
            x = bfgs(&f, &x, &BfgsOptions::default()).0;
        }

        let Some(t) = self.table(&x) else {
            return (x, f64::INFINITY, f64::INFINITY);
        };
        let active: Vec<i64> = t
            .harmonics(lead)
            .into_iter()
            .filter(|(_, v)| v.norm() < ACTIVE_THRESHOLD)
            .map(|(m, _)| m)
            .collect();
        let r = |x: &[f64]| {
            let mut out = Vec::new();
            if let Some(t) = self.table(x) {
                low_residuals(&t, low, &mut out);
                for &m in &active {
                    let v = t.get(lead, m);
                    out.push(v.re);
                    out.push(v.im);
                }
            }
            out
        };
        let polished = gauss_newton(&r, &x, 30, 1e-15).0;
        let score = |x: &[f64]| {
            self.table(x)
                .map_or((f64::INFINITY, f64::INFINITY), |t| (t.max_abs_through(low), t.harmonic_sum(lead)))
        };
        let (rp, cp) = score(&polished);
        let (rx, cx) = score(&x);
        if rp <= self.cfg.residual_tol || rp <= rx {
            (polished, rp, cp)
        } else {
            (x, rx, cx)
        }
    }
}

/// Multi-start search for anagram-symmetric phases of an odd `n`-pulse sequence.
pub fn solve_phases(n: usize, seed_count: usize) -> Result<Vec<SolverResult>> {
    solve_phases_with(n, &SolverConfig { seeds: seed_count, ..Default::default() })
}

pub fn solve_phases_with(n: usize, cfg: &SolverConfig) -> Result<Vec<SolverResult>> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::Domain(format!("the solver needs an odd pulse count n >= 3, got {n}")));
    }
    if n > cfg.max_n {
        return Err(Error::Domain(format!("n = {n} exceeds max_n = {}", cfg.max_n)));
    }
    if cfg.seeds == 0 {
        return Err(Error::Domain("at least one seed is required".into()));
    }
    if let Some(t) = cfg.target_jmax {
        if t % 2 == 1 || t >= n {
            return Err(Error::Domain(format!("target jmax must be even and below n, got {t}")));
        }
    }
    // conditioning is a property of n and the sampling scheme
    extract_coefficients_with(&vec![0.0; n], &cfg.extract)?;

    let problem = Problem { n, cfg };
    let k = (n - 1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let starts: Vec<Vec<f64>> = (0..cfg.seeds)
        .map(|_| (0..k).map(|_| rng.gen_range(0.0..TWO_PI)).collect())
        .collect();

    let orders: Vec<usize> = match cfg.target_jmax {
        Some(0) => Vec::new(),
        Some(t) => vec![t - 1],
        None => (1..n).step_by(2).collect(),
    };
    let mut jmax = 0;
    let mut pool = starts.clone();
    for order in orders {
        let attempts: Vec<(Vec<f64>, f64)> = starts.par_iter().map(|x0| problem.nullify(order, x0)).collect();
        let converged: Vec<Vec<f64>> = attempts
            .iter()
            .filter(|(_, r)| *r <= cfg.residual_tol)
            .map(|(x, _)| x.clone())
            .collect();
        if converged.is_empty() {
            if cfg.target_jmax.is_some() {
                let (x, _) = attempts
                    .into_iter()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("at least one seed");
                let best = describe(problem.phases(&x), order + 1, &cfg.extract, cfg.residual_tol)?;
                return Ok(vec![SolverResult { converged: false, ..best }]);
            }
            break;
        }
        jmax = order + 1;
        pool = Vec::new();
        for x in converged {
            let ph = problem.phases(&x);
            if !pool.iter().any(|p: &Vec<f64>| equivalent_phases(&problem.phases(p), &ph, 1e-9)) {
                pool.push(x);
            }
        }
    }

    let lead = jmax + 1;
    let selected: Vec<(Vec<f64>, f64, f64)> = pool.par_iter().map(|x0| problem.select(lead, x0)).collect();
    let mut results = Vec::with_capacity(selected.len());
    for (x, _, _) in selected {
        let phases = canonical_gauge(&problem.phases(&x), cfg.dedup_tol);
        results.push(describe(phases, jmax, &cfg.extract, cfg.residual_tol)?);
    }

    let any_converged = results.iter().any(|r| r.converged);
    if any_converged {
        results.retain(|r| r.converged);
    }
    let best = results.iter().map(|r| r.leading_cost).fold(f64::INFINITY, f64::min);
    let window = best + cfg.tie_tol * best.max(1.0);
    results.retain(|r| r.leading_cost <= window);
    results.sort_by(|a, b| {
        a.leading_cost
            .total_cmp(&b.leading_cost)
            .then_with(|| lex_cmp(&a.phases, &b.phases))
    });
    let mut unique: Vec<SolverResult> = Vec::new();
    for r in results {
        if !unique.iter().any(|u| equivalent_phases(&u.phases, &r.phases, cfg.dedup_tol)) {
            unique.push(r);
        }
    }
    if !any_converged {
        unique.truncate(1);
    }
    Ok(unique)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Coefficient diagnostics for a given sequence at its claimed order.
pub fn evaluate(seq: &CompositeSequence) -> Result<SolverResult> {
    let cfg = SolverConfig::default();
    extract_coefficients_with(&seq.phases, &cfg.extract)?;
    describe(seq.phases.clone(), seq.jmax, &cfg.extract, cfg.residual_tol)
}

/// Projects the phases onto the nearest point where all orders `<= seq.jmax`
/// vanish, preserving anagram symmetry and `φ_1`.
pub fn refine(seq: &CompositeSequence) -> Result<SolverResult> {
    let cfg = SolverConfig::default();
    extract_coefficients_with(&seq.phases, &cfg.extract)?;
    let n = seq.len();
    let first = seq.phases[0];
    let symmetric = is_anagram(&seq.phases);
    let build = |x: &[f64]| -> Vec<f64> {
        if symmetric {
            symmetric_phases(first, x, n)
        } else {
            std::iter::once(first).chain(x.iter().copied()).collect()
        }
    };
    let x0: Vec<f64> = if symmetric {
        seq.phases[1..n.div_ceil(2)].to_vec()
    } else {
        seq.phases[1..].to_vec()
    };
    let r = |x: &[f64]| {
        let mut out = Vec::new();
        if let Ok(t) = extract_unchecked(&build(x), &cfg.extract) {
            low_residuals(&t, seq.jmax, &mut out);
        }
        out
    };
    let (x, _) = gauss_newton(&r, &x0, 50, 1e-15);
    describe(build(&x), seq.jmax, &cfg.extract, cfg.residual_tol)
}

/// The sequence itself when its claimed orders vanish, otherwise its refinement.
pub fn resolve(seq: &CompositeSequence) -> Result<CompositeSequence> {
    let cfg = SolverConfig::default();
    if evaluate(seq)?.residual_low <= cfg.residual_tol {
        return Ok(seq.clone());
    }
    let refined = refine(seq)?;
    if !refined.converged {
        return Err(Error::Domain(format!(
            "{}: cannot nullify orders up to {} (residual {:.3e})",
            seq.label, seq.jmax, refined.residual_low
        )));
    }
    Ok(CompositeSequence {
        phases: refined.phases,
        phases_over_pi: None,
        ..seq.clone()
    })
}

/// Catalog label equivalent to `phases` within `tol`, if any.
pub fn match_catalog(phases: &[f64], tol: f64) -> Option<String> {
    full_catalog()
        .into_iter()
        .find(|s| s.len() == phases.len() && equivalent_phases(&s.phases, phases, tol))
        .map(|s| s.label)
}

/// JSON form of a solver result, mirroring the catalog records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionRecord {
    pub label: String,
    pub n: usize,
    pub jmax: usize,
    pub phases_over_pi: Vec<PhaseOverPi>,
    pub residual_low: f64,
    pub leading_cost: f64,
    pub worst_case_leading: f64,
    pub converged: bool,
    /// Catalog entry this solution reproduces, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches: Option<String>,
}

pub fn solution_records(results: &[SolverResult]) -> Vec<SolutionRecord> {
    results
        .iter()
        .enumerate()
        .map(|(i, r)| SolutionRecord {
            label: format!("S{}.{}", r.phases.len(), i + 1),
            n: r.phases.len(),
            jmax: r.achieved_jmax,
            phases_over_pi: r.phases.iter().map(|p| PhaseOverPi::Decimal(p / PI)).collect(),
            residual_low: r.residual_low,
            leading_cost: r.leading_cost,
            worst_case_leading: r.worst_case_leading,
            converged: r.converged,
            matches: match_catalog(&r.phases, 1e-6),
        })
        .collect()
}

/// Settings for the infidelity-exponent fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitConfig {
    pub q_max: f64,
    pub q_min: f64,
    pub samples: usize,
    pub alpha_samples: usize,
    pub beta: f64,
    /// Samples with `Q <= (floor_factor·n·ε·q)²` are discarded as rounding noise.
    pub floor_factor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            q_max: 1e-1,
            q_min: 1e-3,
            samples: 21,
            alpha_samples: 64,
            beta: 0.0,
            floor_factor: 64.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub intercept: f64,
    /// `(q, worst-case Q)` pairs entering the fit.
    pub points: Vec<(f64, f64)>,
    pub discarded: usize,
}

/// Worst case over `α` of the composite infidelity at a given `q`.
pub fn worst_case_infidelity(seq: &CompositeSequence, q: f64, alpha_samples: usize, beta: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for l in 0..alpha_samples.max(1) {
        let alpha = -PI + TWO_PI * l as f64 / alpha_samples.max(1) as f64;
        let base = make_propagator(q, alpha, beta)?;
        let pulses: Vec<Propagator> = seq.phases.iter().map(|&p| apply_phase(&base, p)).collect();
        worst = worst.max(compose_matrix(&pulses).get(0, 0).norm_sqr());
    }
    Ok(worst)
}

/// Slope of `log Q` against `log q` for small `q`.
pub fn order_of_error(seq: &CompositeSequence) -> Result<f64> {
    fit_error_exponent(seq, &FitConfig::default()).map(|f| f.exponent)
}

pub fn fit_error_exponent(seq: &CompositeSequence, cfg: &FitConfig) -> Result<ExponentFit> {
    if !(cfg.q_min > 0.0 && cfg.q_min < cfg.q_max && cfg.q_max <= 1.0) || cfg.samples < 3 {
        return Err(Error::Domain("need 0 < q_min < q_max <= 1 and at least 3 samples".into()));
    }
    let n = seq.len() as f64;
    let (lmax, lmin) = (cfg.q_max.ln(), cfg.q_min.ln());
    let mut points = Vec::new();
    let mut discarded = 0;
    for i in 0..cfg.samples {
        let q = (lmax + (lmin - lmax) * i as f64 / (cfg.samples - 1) as f64).exp();
        let big_q = worst_case_infidelity(seq, q, cfg.alpha_samples, cfg.beta)?;
        let floor = (cfg.floor_factor * n * f64::EPSILON * q).powi(2);
        if big_q > floor {
            points.push((q, big_q));
        } else {
            discarded += 1;
        }
    }
    if points.len() < 3 {
        return Err(Error::Precision(format!(
            "only {} of {} samples of Q lie above the rounding floor; raise q_min/q_max",
            points.len(),
            cfg.samples
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    Ok(ExponentFit {
        exponent,
        intercept: my - exponent * mx,
        points,
        discarded,
    })
}
