//! Direct minimization of the energy, independent of the shooting recursion.
//!
//! The minimizer is a projected descent method on the positions
//! `x₀ … x_N`. Walls are box constraints (`x₀ <= 0`, `x_N >= -L`) enforced by
//! clamping after each trial step; particle ordering is enforced by
//! backtracking, since `1/δ` already diverges when two particles meet. Search
//! directions are scaled by the tridiagonal energy Hessian on the free
//! coordinates (Levenberg-damped until positive definite), which keeps the
//! iteration count independent of the stiffness spread of the chain.
//!
//! It works for any force profile, including non-monotone ones where the
//! fixed point is not unique; [`multi_start_fixed_points`] collects the
//! distinct local minima reached from stratified starts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ModelError, Result};
use crate::force::ForceProfile;
use crate::model::{energy, is_fixed_point, residuals, Classification, Configuration, FixedPointResult, ModelParams};

/// Armijo sufficient-decrease constant.
const ARMIJO: f64 = 1e-4;
/// Halvings before a line search gives up.
const BACKTRACK_LIMIT: usize = 80;
/// Perturbation used by the local-minimality certificate, in units of `L/N`.
const CERTIFICATE_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeSettings {
    /// Largest displacement of any particle in the first trial step of a line search.
    pub step_init: f64,
    /// Convergence threshold on the max-norm of the projected gradient (a force).
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Seed for the jitter of multi-start initial configurations.
    pub seed: u64,
}

impl MinimizeSettings {
    pub fn new(step_init: f64, grad_tol: f64, max_iter: usize, seed: u64) -> Result<Self> {
        if !(step_init > 0.0 && grad_tol > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "step_init and grad_tol must be positive, got {step_init} and {grad_tol}"
            )));
        }
        Ok(MinimizeSettings { step_init, grad_tol, max_iter, seed })
    }

    /// Defaults scaled to the model: `grad_tol = 1e-10·(N/L)²`, `step_init = L/4`.
    pub fn for_params(params: &ModelParams) -> Self {
        MinimizeSettings {
            step_init: 0.25 * params.length(),
            grad_tol: 1e-10 * params.pressure_scale(),
            max_iter: 10_000,
            seed: 0,
        }
    }
}

/// `∂U/∂x_i` for every particle.
///
/// Gap `i` (between `x_{i-1}` and `x_i`) contributes `+1/δ_i²` and gap
/// `i + 1` contributes `-1/δ_{i+1}²`, so for an interior particle
/// `∂U/∂x_i = f_i - f_{i+1} - F(x_i)`; the end particles keep only the gap
/// they touch. The interior entries are exactly `-r_i` of the residuals.
pub fn energy_gradient(positions: &[f64], params: &ModelParams) -> Vec<f64> {
    let n = positions.len() - 1;
    let f: Vec<f64> = positions
        .windows(2)
        .map(|w| {
            let d = w[0] - w[1];
            1.0 / (d * d)
        })
        .collect();
    (0..=n)
        .map(|i| {
            let left = if i >= 1 { f[i - 1] } else { 0.0 };
            let right = if i < n { f[i] } else { 0.0 };
            left - right - params.force_at(positions[i])
        })
        .collect()
}

/// Tridiagonal Hessian: `(diagonal, off_diagonal)` with `off[i]` coupling `i` and `i + 1`.
fn energy_hessian(positions: &[f64], params: &ModelParams) -> (Vec<f64>, Vec<f64>) {
    let n = positions.len() - 1;
    let stiff: Vec<f64> = positions
        .windows(2)
        .map(|w| {
            let d = w[0] - w[1];
            2.0 / (d * d * d)
        })
        .collect();
    let diag = (0..=n)
        .map(|i| {
            let left = if i >= 1 { stiff[i - 1] } else { 0.0 };
            let right = if i < n { stiff[i] } else { 0.0 };
            left + right - params.field().slope_at(positions[i])
        })
        .collect();
    let off = stiff.iter().map(|s| -s).collect();
    (diag, off)
}

/// Solves `(T + μI) d = rhs` for symmetric tridiagonal `T`; `None` unless every pivot is positive.
fn solve_tridiagonal(diag: &[f64], off: &[f64], shift: f64, rhs: &[f64]) -> Option<Vec<f64>> {
    let m = diag.len();
    let mut pivot = vec![0.0; m];
    let mut y = vec![0.0; m];
    for i in 0..m {
        let mut p = diag[i] + shift;
        let mut r = rhs[i];
        if i > 0 {
            let l = off[i - 1] / pivot[i - 1];
            p -= l * off[i - 1];
            r -= l * y[i - 1];
        }
        if !(p > 0.0 && p.is_finite()) {
            return None;
        }
        pivot[i] = p;
        y[i] = r;
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let next = if i + 1 < m { off[i] * x[i + 1] } else { 0.0 };
        x[i] = (y[i] - next) / pivot[i];
    }
    Some(x)
}

/// `U(new) - U(old)`, accumulated from per-term differences so that small
/// steps are not lost to cancellation against the size of `U`.
fn energy_delta(old: &[f64], new: &[f64], params: &ModelParams) -> f64 {
    let field = params.field();
    let pair: f64 = old
        .windows(2)
        .zip(new.windows(2))
        .map(|(o, n)| {
            let d_old = o[0] - o[1];
            let d_new = n[0] - n[1];
            let growth = (n[0] - o[0]) - (n[1] - o[1]);
            -growth / (d_old * d_new)
        })
        .sum();
    let external: f64 = old.iter().zip(new).map(|(&a, &b)| field.integral(a, b)).sum();
    pair - external
}

fn ordering_breach(positions: &[f64]) -> Option<usize> {
    positions.windows(2).position(|w| w[1] >= w[0])
}

/// Result of [`minimize_with_trace`]: the fixed point and the energy change of every accepted step.
#[derive(Debug, Clone)]
pub struct MinimizeTrace {
    pub result: FixedPointResult,
    pub energy_steps: Vec<f64>,
}

/// Minimizes the energy from `start`.
pub fn minimize(params: &ModelParams, start: &Configuration, settings: &MinimizeSettings) -> Result<FixedPointResult> {
    minimize_with_trace(params, start, settings).map(|t| t.result)
}

pub fn minimize_with_trace(
    params: &ModelParams,
    start: &Configuration,
    settings: &MinimizeSettings,
) -> Result<MinimizeTrace> {
    if start.n_gaps() != params.n_gaps() {
        return Err(ModelError::InvalidConfiguration(format!(
            "start has {} gaps, model has {}",
            start.n_gaps(),
            params.n_gaps()
        )));
    }
    let length = params.length();
    if start.positions()[0] > 0.0 || start.last() < -length {
        return Err(ModelError::InvalidConfiguration("start lies outside the walls".into()));
    }
    let n = params.n_gaps();
    let mut x = start.positions().to_vec();
    let mut energy_steps = Vec::new();

    for iteration in 0..=settings.max_iter {
        let g = energy_gradient(&x, params);
        let head_active = x[0] >= 0.0 && g[0] < 0.0;
        let tail_active = x[n] <= -length && g[n] > 0.0;
        let first = usize::from(head_active);
        let end = if tail_active { n } else { n + 1 };
        let projected = g[first..end.max(first)].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if projected <= settings.grad_tol {
            return finish(params, x, iteration, settings, energy_steps);
        }
        if iteration == settings.max_iter {
            break;
        }

        let (diag, off) = energy_hessian(&x, params);
        let diag = &diag[first..end];
        let off = &off[first..end - 1];
        let rhs: Vec<f64> = g[first..end].iter().map(|v| -v).collect();
        let scale = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut shift = 0.0;
        let direction = loop {
            if let Some(d) = solve_tridiagonal(diag, off, shift, &rhs) {
                let slope: f64 = d.iter().zip(&rhs).map(|(a, b)| -a * b).sum();
                if slope < 0.0 {
                    break d;
                }
            }
            shift = if shift == 0.0 { 1e-10 * scale } else { shift * 10.0 };
            if !shift.is_finite() || shift > 1e12 * scale {
                return Err(ModelError::NoConvergence {
                    iterations: iteration,
                    reason: "could not build a descent direction".into(),
                });
            }
        };

        let largest = direction.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut alpha = (settings.step_init / largest).min(1.0);
        let mut trial = x.clone();
        let mut accepted = false;
        let mut last_breach = None;
        for _ in 0..BACKTRACK_LIMIT {
            for (k, d) in direction.iter().enumerate() {
                trial[first + k] = x[first + k] + alpha * d;
            }
            trial[0] = trial[0].min(0.0);
            trial[n] = trial[n].max(-length);
            if let Some(i) = ordering_breach(&trial) {
                last_breach = Some(i);
                alpha *= 0.5;
                continue;
            }
            last_breach = None;
            let predicted: f64 = g.iter().zip(trial.iter().zip(&x)).map(|(gi, (t, o))| gi * (t - o)).sum();
            let change = energy_delta(&x, &trial, params);
            if change <= ARMIJO * predicted && change < 0.0 {
                energy_steps.push(change);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if let Some(index) = last_breach {
                return Err(ModelError::OrderingBreach { iteration, index });
            }
            return Err(ModelError::NoConvergence {
                iterations: iteration,
                reason: format!("line search stalled with projected gradient {projected}"),
            });
        }
        x.copy_from_slice(&trial);
    }
    Err(ModelError::NoConvergence {
        iterations: settings.max_iter,
        reason: "iteration budget exhausted".into(),
    })
}

fn finish(
    params: &ModelParams,
    positions: Vec<f64>,
    iterations: usize,
    settings: &MinimizeSettings,
    energy_steps: Vec<f64>,
) -> Result<MinimizeTrace> {
    let config = Configuration::new(positions, params.length())?;
    let classification = if config.last() <= -params.length() {
        Classification::BoundaryPinned
    } else {
        Classification::Interior
    };
    let delta1 = config.positions()[0] - config.positions()[1];
    let max_residual = residuals(&config, params).max_interior();
    let result = FixedPointResult {
        config,
        classification,
        delta1,
        max_residual,
        tolerance: 10.0 * settings.grad_tol,
        iterations,
    };
    Ok(MinimizeTrace { result, energy_steps })
}

/// Energy change from moving particle `i` by `step`, or `None` if the move
/// leaves the walls or crosses a neighbour.
fn single_move_delta(positions: &[f64], i: usize, step: f64, params: &ModelParams) -> Option<f64> {
    let n = positions.len() - 1;
    let moved = positions[i] + step;
    if moved > 0.0 || moved < -params.length() {
        return None;
    }
    let mut delta = -params.field().integral(positions[i], moved);
    if i >= 1 {
        let d = positions[i - 1] - positions[i];
        let d_new = positions[i - 1] - moved;
        if d_new <= 0.0 {
            return None;
        }
        delta += step / (d * d_new);
    }
    if i < n {
        let d = positions[i] - positions[i + 1];
        let d_new = moved - positions[i + 1];
        if d_new <= 0.0 {
            return None;
        }
        delta -= step / (d * d_new);
    }
    Some(delta)
}

/// True if every admissible single-particle move of size `1e-6·L/N` raises the energy.
pub fn local_minimality_certificate(config: &Configuration, params: &ModelParams) -> bool {
    let eps = CERTIFICATE_STEP * params.gap_scale();
    let x = config.positions();
    (0..x.len()).all(|i| {
        [eps, -eps]
            .iter()
            .filter_map(|&s| single_move_delta(x, i, s, params))
            .all(|d| d > 0.0)
    })
}

/// The single-maximum force profile with many fixed points.
///
/// On `[-1, 1]` it is `a - 2a·x` for `x >= 0` and `a + 2b·x` for `x <= 0`,
/// with `b > a > 0`. The library places it on `[-2, 0]` (shifted by `-1`, so
/// the peak sits at `-1`) and multiplies it by `c·N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonuniquenessProfile {
    pub a_slopepeak: f64,
    pub b_slope: f64,
}

impl NonuniquenessProfile {
    pub const LENGTH: f64 = 2.0;
    pub const PEAK: f64 = -1.0;

    pub fn new(a_slopepeak: f64, b_slope: f64) -> Result<Self> {
        if !(a_slopepeak > 0.0 && b_slope > a_slopepeak && b_slope.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "need b > a > 0, got a={a_slopepeak}, b={b_slope}"
            )));
        }
        Ok(NonuniquenessProfile { a_slopepeak, b_slope })
    }

    /// Unscaled value on the original interval `[-1, 1]`.
    pub fn raw_value(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.a_slopepeak - 2.0 * self.a_slopepeak * x
        } else {
            self.a_slopepeak + 2.0 * self.b_slope * x
        }
    }

    /// Breakpoints on `[-2, 0]` for `α_ren = c·N`.
    pub fn force_profile(&self, c: f64, n_gaps: usize) -> Result<ForceProfile> {
        let scale = c * n_gaps as f64;
        let breakpoints = [-1.0, 0.0, 1.0]
            .iter()
            .map(|&x| (x - 1.0, scale * self.raw_value(x)))
            .collect();
        ForceProfile::piecewise(breakpoints)
    }

    pub fn params(&self, c: f64, n_gaps: usize) -> Result<ModelParams> {
        ModelParams::new(Self::LENGTH, n_gaps, self.force_profile(c, n_gaps)?)
    }
}

/// A verified local minimum of the energy.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMinimum {
    pub result: FixedPointResult,
    pub energy: f64,
}

/// Starting configurations with `m` particles right of the segment midpoint
/// (the translated peak of [`NonuniquenessProfile`]), `m` spread over `0..=N+1`.
pub fn stratified_starts(params: &ModelParams, n_starts: usize, seed: u64) -> Result<Vec<Configuration>> {
    let n = params.n_gaps();
    let length = params.length();
    let split = -0.5 * length;
    let total = n + 1;
    (0..n_starts)
        .map(|s| {
            let m = if n_starts > 1 { (s * total + (n_starts - 1) / 2) / (n_starts - 1) } else { total / 2 };
            let m = m.min(total);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            let mut positions = Vec::with_capacity(total);
            let right_spacing = if m > 0 { -split / m as f64 } else { 0.0 };
            for i in 0..m {
                let jitter = rng.gen_range(-0.25..0.25) * right_spacing;
                positions.push((-(i as f64) * right_spacing + jitter).min(0.0));
            }
            let left = total - m;
            let left_spacing = if left > 0 { (length + split) / left as f64 } else { 0.0 };
            for j in 0..left {
                let jitter = rng.gen_range(-0.25..0.25) * left_spacing;
                positions.push((split - (j + 1) as f64 * left_spacing + jitter).max(-length));
            }
            Configuration::new(positions, length)
        })
        .collect()
}

/// Minimizes from `n_starts` stratified starts and returns the distinct,
/// verified local minima sorted by energy.
///
/// A result is kept only if it satisfies the fixed-point conditions at the
/// minimizer's tolerance and passes [`local_minimality_certificate`]. Two
/// results are the same minimum when their position vectors are closer than
/// `10·√(N+1)·1e-6·L/N`.
pub fn multi_start_fixed_points(
    params: &ModelParams,
    n_starts: usize,
    settings: &MinimizeSettings,
) -> Result<Vec<LocalMinimum>> {
    if n_starts < 2 {
        return Err(ModelError::InvalidParameter(format!("need at least two starts, got {n_starts}")));
    }
    let starts = stratified_starts(params, n_starts, settings.seed)?;
    let results = starts
        .par_iter()
        .map(|start| minimize(params, start, settings))
        .collect::<Result<Vec<_>>>()?;

    let mut verified = results
        .into_iter()
        .filter(|r| is_fixed_point(&r.config, params, r.tolerance) && local_minimality_certificate(&r.config, params))
        .map(|r| {
            let e = energy(&r.config, params)?;
            Ok(LocalMinimum { result: r, energy: e })
        })
        .collect::<Result<Vec<_>>>()?;
    verified.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then_with(|| a.result.config.positions().partial_cmp(b.result.config.positions()).unwrap())
    });

    let threshold = 10.0 * ((params.n_gaps() + 1) as f64).sqrt() * CERTIFICATE_STEP * params.gap_scale();
    let mut distinct: Vec<LocalMinimum> = Vec::new();
    for candidate in verified {
        let duplicate = distinct.iter().any(|kept| {
            let d2: f64 = kept
                .result
                .config
                .positions()
                .iter()
                .zip(candidate.result.config.positions())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2.sqrt() <= threshold
        });
        if !duplicate {
            distinct.push(candidate);
        }
    }
    Ok(distinct)
}
