//! Survival statistics: per-cell means, curve crossings between lattice
//! sizes, and the finite-size scaling fit
//!
//! ```text
//! T(L, p) = A + B x + C x^2 + D L^(-1/mu),   x = (p - p_fit) L^(1/nu)
//! ```
//!
//! fitted by weighted Levenberg-Marquardt.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SurvivalRecord;
use crate::rules::SimRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("no samples for L = {size}, p = {p}")]
    EmptyCell { size: usize, p: f64 },
    #[error("L = {size}, p = {p}: need at least 2 samples, have {n}")]
    TooFewSamples { size: usize, p: f64, n: usize },
    #[error("curves do not cross on their common p range")]
    NoCrossing,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("fit did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("fit Jacobian is rank deficient")]
    IllConditioned,
    #[error("model is not positive at the starting point, log residuals undefined")]
    NonPositiveModel,
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Mean survival of one `(L, p)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    #[serde(rename = "L")]
    pub size: usize,
    pub p: f64,
    pub mean: f64,
    /// Standard error of the mean, from the `n - 1` sample variance.
    pub stderr: f64,
    pub median: f64,
    pub n_samples: usize,
    pub censored_fraction: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Statistics of one cell's failure times.
pub fn summarize(size: usize, p: f64, times: &[f64], censored: usize) -> Result<CurvePoint> {
    let n = times.len();
    if n == 0 {
        return Err(AnalysisError::EmptyCell { size, p });
    }
    if n < 2 {
        return Err(AnalysisError::TooFewSamples { size, p, n });
    }
    let mean = times.iter().sum::<f64>() / n as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(CurvePoint {
        size,
        p,
        mean,
        stderr: (var / n as f64).sqrt(),
        median: median(&sorted),
        n_samples: n,
        censored_fraction: censored as f64 / n as f64,
    })
}

/// Records grouped by `(L, p)`, in increasing order of both.
pub fn group_cells(records: &[SurvivalRecord]) -> BTreeMap<(usize, u64), Vec<&SurvivalRecord>> {
    let mut cells: BTreeMap<(usize, u64), Vec<&SurvivalRecord>> = BTreeMap::new();
    for r in records {
        // positive floats order like their bit patterns
        cells.entry((r.size, r.p.to_bits())).or_default().push(r);
    }
    cells
}

/// One point per `(L, p)` cell, sorted by `L` then `p`. Cells with censored
/// samples are kept (the cap enters the mean) and logged.
pub fn estimate_curves(records: &[SurvivalRecord]) -> Result<Vec<CurvePoint>> {
    let mut points = Vec::new();
    for ((size, p_bits), cell) in group_cells(records) {
        let p = f64::from_bits(p_bits);
        let times: Vec<f64> = cell.iter().map(|r| r.failure_time).collect();
        let censored = cell.iter().filter(|r| r.censored).count();
        let point = summarize(size, p, &times, censored)?;
        if censored > 0 {
            log::warn!(
                "L = {size}, p = {p}: {censored} of {} samples censored, mean is a lower bound",
                times.len()
            );
        }
        points.push(point);
    }
    Ok(points)
}

/// Distinct sizes in increasing order.
pub fn sizes(points: &[CurvePoint]) -> Vec<usize> {
    let mut s: Vec<usize> = points.iter().map(|c| c.size).collect();
    s.sort_unstable();
    s.dedup();
    s
}

/// The curve of one size, sorted by `p`.
pub fn curve(points: &[CurvePoint], size: usize) -> Vec<CurvePoint> {
    let mut c: Vec<CurvePoint> = points.iter().filter(|c| c.size == size).cloned().collect();
    c.sort_by(|a, b| a.p.total_cmp(&b.p));
    c
}

pub fn require_cell(points: &[CurvePoint], size: usize, p: f64) -> Result<&CurvePoint> {
    points
        .iter()
        .find(|c| c.size == size && c.p == p)
        .ok_or(AnalysisError::EmptyCell { size, p })
}

/// Piecewise-linear interpolation of `ln T` against `ln p`.
fn log_interp(curve: &[(f64, f64)], p: f64) -> f64 {
    let lp = p.ln();
    let i = curve.partition_point(|&(q, _)| q < p);
    if i < curve.len() && curve[i].0 == p {
        return curve[i].1.ln();
    }
    let (p0, t0) = curve[i - 1];
    let (p1, t1) = curve[i];
    let w = (lp - p0.ln()) / (p1.ln() - p0.ln());
    t0.ln() + w * (t1.ln() - t0.ln())
}

/// Lowest crossing of two `(p, T)` curves, each sorted by `p` with positive
/// entries, on their common `p` range.
pub fn crossing_of(small: &[(f64, f64)], large: &[(f64, f64)]) -> Result<f64> {
    if small.len() < 2 || large.len() < 2 {
        return Err(AnalysisError::InsufficientData(
            "each curve needs at least two points".into(),
        ));
    }
    if small.iter().chain(large).any(|&(p, t)| !(p > 0.0 && t > 0.0)) {
        return Err(AnalysisError::InsufficientData(
            "log interpolation needs positive p and T".into(),
        ));
    }
    let lo = small[0].0.max(large[0].0);
    let hi = small[small.len() - 1].0.min(large[large.len() - 1].0);
    if lo >= hi {
        return Err(AnalysisError::NoCrossing);
    }
    let mut grid: Vec<f64> = small
        .iter()
        .chain(large)
        .map(|&(p, _)| p)
        .filter(|&p| p >= lo && p <= hi)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let diff: Vec<(f64, f64)> = grid
        .iter()
        .map(|&p| (p, log_interp(large, p) - log_interp(small, p)))
        .collect();

    let mut prev: Option<(f64, f64)> = None;
    let mut zero_since: Option<f64> = None;
    for &(p, d) in &diff {
        if d == 0.0 {
            zero_since.get_or_insert(p);
            continue;
        }
        if let Some((p0, d0)) = prev {
            if d0.signum() != d.signum() {
                if let Some(pz) = zero_since {
                    return Ok(pz);
                }
                let t = d0 / (d0 - d);
                return Ok((p0.ln() + t * (p.ln() - p0.ln())).exp());
            }
        }
        prev = Some((p, d));
        zero_since = None;
    }
    Err(AnalysisError::NoCrossing)
}

fn as_pairs(curve: &[CurvePoint]) -> Vec<(f64, f64)> {
    curve.iter().map(|c| (c.p, c.mean)).collect()
}

/// Crossing of the mean-survival curves of two sizes. Symmetric in its
/// arguments.
pub fn find_crossing(small: &[CurvePoint], large: &[CurvePoint]) -> Result<f64> {
    let mut a = small.to_vec();
    let mut b = large.to_vec();
    a.sort_by(|x, y| x.p.total_cmp(&y.p));
    b.sort_by(|x, y| x.p.total_cmp(&y.p));
    crossing_of(&as_pairs(&a), &as_pairs(&b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEstimate {
    pub size_small: usize,
    pub size_large: usize,
    pub p_cross: f64,
    /// Percentile bootstrap interval (2.5%, 97.5%) over replicates that
    /// crossed; `NaN` when none did.
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicates: usize,
    pub replicates_crossing: usize,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

fn cell_samples(records: &[SurvivalRecord], size: usize) -> Vec<(f64, Vec<f64>)> {
    group_cells(records)
        .into_iter()
        .filter(|((l, _), _)| *l == size)
        .map(|((_, p), cell)| (f64::from_bits(p), cell.iter().map(|r| r.failure_time).collect()))
        .collect()
}

fn resampled_curve<R: Rng>(cells: &[(f64, Vec<f64>)], rng: &mut R) -> Vec<(f64, f64)> {
    cells
        .iter()
        .map(|(p, times)| {
            let n = times.len();
            let sum: f64 = (0..n).map(|_| times[rng.random_range(0..n)]).sum();
            (*p, sum / n as f64)
        })
        .collect()
}

/// Crossing of sizes `small` and `large` with a bootstrap interval from
/// resampling each cell's failure times.
pub fn bootstrap_crossing(
    records: &[SurvivalRecord],
    small: usize,
    large: usize,
    replicates: usize,
    seed: u64,
) -> Result<CrossingEstimate> {
    let cells_small = cell_samples(records, small);
    let cells_large = cell_samples(records, large);
    let mean_curve = |cells: &[(f64, Vec<f64>)]| -> Vec<(f64, f64)> {
        cells
            .iter()
            .map(|(p, t)| (*p, t.iter().sum::<f64>() / t.len() as f64))
            .collect()
    };
    let p_cross = crossing_of(&mean_curve(&cells_small), &mean_curve(&cells_large))?;
    let mut rng = SimRng::seed_from_u64(seed);
    let mut hits: Vec<f64> = (0..replicates)
        .filter_map(|_| {
            let a = resampled_curve(&cells_small, &mut rng);
            let b = resampled_curve(&cells_large, &mut rng);
            crossing_of(&a, &b).ok()
        })
        .collect();
    hits.sort_by(f64::total_cmp);
    Ok(CrossingEstimate {
        size_small: small,
        size_large: large,
        p_cross,
        ci_low: percentile(&hits, 0.025),
        ci_high: percentile(&hits, 0.975),
        replicates,
        replicates_crossing: hits.len(),
    })
}

/// Crossings of every pair of consecutive sizes present in `records`.
pub fn crossing_table(
    records: &[SurvivalRecord],
    replicates: usize,
    seed: u64,
) -> Vec<(usize, usize, Result<CrossingEstimate>)> {
    let mut s: Vec<usize> = records.iter().map(|r| r.size).collect();
    s.sort_unstable();
    s.dedup();
    s.windows(2)
        .map(|w| (w[0], w[1], bootstrap_crossing(records, w[0], w[1], replicates, seed)))
        .collect()
}

/// Parameters of the scaling law in the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub p_fit: f64,
    pub nu: f64,
    pub mu: f64,
}

pub const FIT_PARAM_NAMES: [&str; 7] = ["A", "B", "C", "D", "p_fit", "nu", "mu"];

impl FitParams {
    pub fn to_array(&self) -> [f64; 7] {
        [self.a, self.b, self.c, self.d, self.p_fit, self.nu, self.mu]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            a: v[0],
            b: v[1],
            c: v[2],
            d: v[3],
            p_fit: v[4],
            nu: v[5],
            mu: v[6],
        }
    }

    pub fn scaling_variable(&self, size: usize, p: f64) -> f64 {
        (p - self.p_fit) * (size as f64).powf(1.0 / self.nu)
    }

    pub fn model(&self, size: usize, p: f64) -> f64 {
        let x = self.scaling_variable(size, p);
        self.a + self.b * x + self.c * x * x + self.d * (size as f64).powf(-1.0 / self.mu)
    }

    /// Partial derivatives of [`FitParams::model`] in [`FitParams::to_array`] order.
    pub fn gradient(&self, size: usize, p: f64) -> [f64; 7] {
        let l = size as f64;
        let ln_l = l.ln();
        let s = l.powf(1.0 / self.nu);
        let x = (p - self.p_fit) * s;
        let dm_dx = self.b + 2.0 * self.c * x;
        let finite = l.powf(-1.0 / self.mu);
        [
            1.0,
            x,
            x * x,
            finite,
            -dm_dx * s,
            dm_dx * x * ln_l * (-1.0 / (self.nu * self.nu)),
            self.d * finite * ln_l / (self.mu * self.mu),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Residuals {
    /// `(T - model) / stderr`
    #[default]
    Linear,
    /// `(ln T - ln model) / (stderr / T)`
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub residuals: Residuals,
    pub max_iterations: usize,
    /// Relative parameter change below which the iteration stops.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            residuals: Residuals::Linear,
            max_iterations: 500,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FitParams,
    /// `(J^T W J)^-1` at the optimum, row-major, in [`FIT_PARAM_NAMES`] order.
    pub covariance: Vec<Vec<f64>>,
    /// Weighted residual sum of squares.
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    /// Bootstrap 2.5% / 97.5% percentiles of `p_fit`, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_fit_interval: Option<(f64, f64)>,
}

impl FitResult {
    pub fn std_errors(&self) -> [f64; 7] {
        std::array::from_fn(|k| self.covariance[k][k].max(0.0).sqrt())
    }
}

/// A fit target: `(L, p, T, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Obs {
    size: usize,
    p: f64,
    t: f64,
    sigma: f64,
}

fn observations(points: &[CurvePoint]) -> Vec<Obs> {
    // zero standard errors (exact data) fall back to unit weights
    let unit = points.iter().any(|c| !(c.stderr > 0.0));
    points
        .iter()
        .map(|c| Obs {
            size: c.size,
            p: c.p,
            t: c.mean,
            sigma: if unit { 1.0 } else { c.stderr },
        })
        .collect()
}

fn check_design(points: &[CurvePoint]) -> Result<()> {
    let mut ps: Vec<u64> = points.iter().map(|c| c.p.to_bits()).collect();
    ps.sort_unstable();
    ps.dedup();
    let ls = sizes(points);
    if ps.len() < 3 || ls.len() < 3 {
        return Err(AnalysisError::InsufficientData(format!(
            "need at least 3 distinct p and 3 distinct L, have {} and {}",
            ps.len(),
            ls.len()
        )));
    }
    if points.len() < 7 {
        return Err(AnalysisError::InsufficientData(
            "need at least 7 points for 7 parameters".into(),
        ));
    }
    Ok(())
}

/// Weighted residuals and their Jacobian; `None` when the model leaves the
/// domain of the residual (log of a non-positive value).
fn residuals(
    obs: &[Obs],
    params: &FitParams,
    mode: Residuals,
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let n = obs.len();
    let mut r = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, 7);
    for (i, o) in obs.iter().enumerate() {
        let m = params.model(o.size, o.p);
        let g = params.gradient(o.size, o.p);
        match mode {
            Residuals::Linear => {
                r[i] = (o.t - m) / o.sigma;
                for k in 0..7 {
                    j[(i, k)] = -g[k] / o.sigma;
                }
            }
            Residuals::Log => {
                if !(m > 0.0) || !(o.t > 0.0) {
                    return None;
                }
                let s = o.sigma / o.t;
                r[i] = (o.t.ln() - m.ln()) / s;
                for k in 0..7 {
                    j[(i, k)] = -g[k] / (m * s);
                }
            }
        }
    }
    (r.iter().all(|v| v.is_finite()) && j.iter().all(|v| v.is_finite())).then_some((r, j))
}

/// Condition threshold on the singular values of the column-scaled Jacobian.
const RANK_TOLERANCE: f64 = 1e-12;

fn rank_deficient(j: &DMatrix<f64>) -> bool {
    let mut scaled = j.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 {
            return true;
        }
        col /= norm;
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    let min = sv.min();
    !(min > RANK_TOLERANCE * max)
}

/// Parameters from this index on (`nu`, `mu`) are optimised in log space.
const LOG_FROM: usize = 5;

const GRADIENT_TOLERANCE: f64 = 1e-8;

fn log_exponents(j: &DMatrix<f64>, params: &FitParams) -> DMatrix<f64> {
    let values = params.to_array();
    let mut jl = j.clone();
    for (k, &v) in values.iter().enumerate().skip(LOG_FROM) {
        let mut col = jl.column_mut(k);
        col *= v;
    }
    jl
}

/// Weighted least-squares fit of the scaling law (damped Gauss-Newton with
/// Marquardt's diagonal scaling).
pub fn fit_scaling(points: &[CurvePoint], init: FitParams, opts: &FitOptions) -> Result<FitResult> {
    check_design(points)?;
    // order independence: sort by (L, p)
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.size.cmp(&b.size).then(a.p.total_cmp(&b.p)));
    let obs = observations(&sorted);
    let mode = opts.residuals;

    let mut params = init;
    let (mut r, mut j) = residuals(&obs, &params, mode).ok_or(AnalysisError::NonPositiveModel)?;
    if rank_deficient(&j) {
        return Err(AnalysisError::IllConditioned);
    }
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        // nu and mu are stepped in log space, which keeps them positive
        let jl = log_exponents(&j, &params);
        let jtj = jl.transpose() * &jl;
        let grad = jl.transpose() * &r;
        // residual orthogonal to every Jacobian column: stationary
        let r_norm = r.norm();
        let cosine = (0..7)
            .map(|k| grad[k].abs() / (jl.column(k).norm() * r_norm).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        if cosine < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        let mut improved = false;
        while lambda < 1e20 {
            let mut a = jtj.clone();
            for k in 0..7 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let cur = params.to_array();
            let trial = FitParams::from_array(std::array::from_fn(|k| {
                if k >= LOG_FROM {
                    cur[k] * step[k].exp()
                } else {
                    cur[k] + step[k]
                }
            }));
            if !(trial.nu > 0.0 && trial.mu > 0.0 && trial.nu.is_finite() && trial.mu.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            match residuals(&obs, &trial, mode) {
                Some((r2, j2)) if r2.norm_squared() <= cost => {
                    let new_cost = r2.norm_squared();
                    let rel_step = (0..7)
                        .map(|k| {
                            if k >= LOG_FROM {
                                step[k].abs()
                            } else {
                                step[k].abs() / (cur[k].abs() + f64::EPSILON)
                            }
                        })
                        .fold(0.0, f64::max);
                    let small_gain = cost - new_cost <= opts.tolerance * cost.max(f64::MIN_POSITIVE);
                    params = trial;
                    r = r2;
                    j = j2;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-15);
                    improved = true;
                    converged = rel_step < opts.tolerance || small_gain;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved {
            // no downhill step at any damping: a stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(AnalysisError::NonConvergence(iterations));
    }
    let jtj = j.transpose() * &j;
    let cov = match jtj.clone().try_inverse() {
        Some(c) => c,
        None => {
            log::warn!("singular normal matrix at the fitted point, covariance from a pseudo-inverse");
            jtj.pseudo_inverse(1e-300).map_err(|_| AnalysisError::IllConditioned)?
        }
    };
    Ok(FitResult {
        params,
        covariance: (0..7).map(|a| (0..7).map(|b| cov[(a, b)]).collect()).collect(),
        chi2: cost,
        dof: obs.len().saturating_sub(7),
        iterations,
        p_fit_interval: None,
    })
}

/// Structured starting point: `p_fit` at the given crossing, `nu = mu = 1`,
/// `A` the grand mean, and `B, C, D` from a linear least-squares fit of
/// `T - A` at those fixed values.
pub fn initial_guess(points: &[CurvePoint], p_cross: f64) -> Result<FitParams> {
    check_design(points)?;
    let a = points.iter().map(|c| c.mean).sum::<f64>() / points.len() as f64;
    let mut guess = FitParams {
        a,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        p_fit: p_cross,
        nu: 1.0,
        mu: 1.0,
    };
    let n = points.len();
    let mut design = DMatrix::zeros(n, 3);
    let mut rhs = DVector::zeros(n);
    for (i, c) in points.iter().enumerate() {
        let x = guess.scaling_variable(c.size, c.p);
        design[(i, 0)] = x;
        design[(i, 1)] = x * x;
        design[(i, 2)] = 1.0 / c.size as f64;
        rhs[i] = c.mean - a;
    }
    let coef = design
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|_| AnalysisError::IllConditioned)?;
    guess.b = coef[0];
    guess.c = coef[1];
    guess.d = coef[2];
    Ok(guess)
}

/// Points of a fit selection: uncensored-only cells at the listed `p`.
pub fn select_points(points: &[CurvePoint], ps: &[f64]) -> Vec<CurvePoint> {
    points
        .iter()
        .filter(|c| ps.iter().any(|&p| (c.p - p).abs() <= 1e-12 * p.abs().max(1e-300)))
        .filter(|c| {
            if c.censored_fraction > 0.0 {
                log::warn!("excluding censored cell L = {}, p = {} from the fit", c.size, c.p);
                false
            } else {
                true
            }
        })
        .cloned()
        .collect()
}

/// Parametric bootstrap of `p_fit`: refits with each mean redrawn from a
/// normal with its standard error. Returns the 2.5% / 97.5% percentiles and
/// the number of replicates that converged.
pub fn bootstrap_p_fit(
    points: &[CurvePoint],
    fit: &FitParams,
    opts: &FitOptions,
    replicates: usize,
    seed: u64,
) -> (f64, f64, usize) {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let noisy: Vec<CurvePoint> = points
            .iter()
            .map(|c| {
                let z: f64 = rng.sample(StandardNormal);
                CurvePoint {
                    mean: c.mean + z * c.stderr,
                    ..c.clone()
                }
            })
            .collect();
        if let Ok(res) = fit_scaling(&noisy, *fit, opts) {
            values.push(res.params.p_fit);
        }
    }
    values.sort_by(f64::total_cmp);
    (
        percentile(&values, 0.025),
        percentile(&values, 0.975),
        values.len(),
    )
}
