//! Shooting solver for monotone force profiles.
//!
//! Given the first gap `δ₁`, the interior balance `f_{k+1} = f_k - F(x_k)`
//! determines every later gap, starting from `x₀ = 0`. Both the left-most
//! position `x_N(δ₁)` and the terminal slack `f_N - F(x_N)` decrease in `δ₁`
//! when `F` is non-negative and non-increasing, so the fixed point is the
//! boundary of the set of `δ₁` for which the left-most particle is still
//! right of the wall and still pushed into it. That boundary is located by
//! bisection; which of the two conditions fails first decides whether the
//! left-most particle is pinned to the wall or floats.

use crate::error::{ModelError, Result};
use crate::force::ForceProfile;
use crate::model::{residuals, Classification, Configuration, FixedPointResult, ModelParams};

/// Tolerances for [`solve_fixed_point`] and [`wall_force`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative bracket width on `δ₁` (and on `F` for [`wall_force`]) required for convergence.
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol_rel: 1e-12, max_iter: 200 }
    }
}

/// A completed shot: positions may lie beyond the left wall.
#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    positions: Vec<f64>,
    gaps: Vec<f64>,
    pressures: Vec<f64>,
}

impl Shot {
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Pressures as produced by the recursion (not recomputed from positions).
    pub fn pressures(&self) -> &[f64] {
        &self.pressures
    }

    pub fn terminal_position(&self) -> f64 {
        self.positions[self.positions.len() - 1]
    }

    pub fn terminal_pressure(&self) -> f64 {
        self.pressures[self.pressures.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShootingOutcome {
    Complete(Shot),
    /// The recursion produced `f_k <= 0`; `k` is the first such gap (1-based).
    PressureCollapse { k: usize },
}

/// Running sum with Neumaier compensation.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Generates the configuration implied by the first gap `delta1`.
///
/// The wall at `-L` is ignored here; only [`solve_fixed_point`] looks at it.
pub fn shoot(delta1: f64, params: &ModelParams) -> Result<ShootingOutcome> {
    if !(delta1.is_finite() && delta1 > 0.0) {
        return Err(ModelError::InvalidParameter(format!("delta1 must be positive, got {delta1}")));
    }
    let f1 = 1.0 / (delta1 * delta1);
    if !f1.is_finite() {
        return Err(ModelError::InvalidParameter(format!("delta1 = {delta1} is too small")));
    }
    let n = params.n_gaps();
    let field = params.field();
    let mut positions = Vec::with_capacity(n + 1);
    let mut gaps = Vec::with_capacity(n);
    let mut pressures = Vec::with_capacity(n);
    let mut extent = CompensatedSum::default();

    positions.push(0.0);
    let mut f = f1;
    let mut d = delta1;
    for k in 1..=n {
        if k > 1 {
            f -= field.value_at(positions[k - 1]);
            if f <= 0.0 {
                return Ok(ShootingOutcome::PressureCollapse { k });
            }
            d = 1.0 / f.sqrt();
        }
        extent.add(d);
        positions.push(-extent.value());
        gaps.push(d);
        pressures.push(f);
    }
    Ok(ShootingOutcome::Complete(Shot { positions, gaps, pressures }))
}

struct Probe {
    outcome: ShootingOutcome,
    inside: bool,
}

fn probe(delta1: f64, params: &ModelParams) -> Result<Probe> {
    let outcome = shoot(delta1, params)?;
    let inside = match &outcome {
        ShootingOutcome::Complete(shot) => {
            let x_n = shot.terminal_position();
            x_n > -params.length() && shot.terminal_pressure() - params.force_at(x_n) > 0.0
        }
        ShootingOutcome::PressureCollapse { .. } => false,
    };
    Ok(Probe { outcome, inside })
}

/// Pressure tolerance the solver guarantees for `max_residual` and, for
/// floating solutions, the terminal slack.
///
/// Gaps are recomputed from positions of magnitude up to `N` gaps, so the
/// recomputed pressures carry a relative rounding error of order `ε·N`; the
/// `64·ε·N·f₁` floor covers that, and `tol_rel·(N/L)²` applies whenever it
/// is larger.
pub fn residual_tolerance(params: &ModelParams, tol_rel: f64, f1: f64) -> f64 {
    let n = params.n_gaps() as f64;
    (tol_rel * params.pressure_scale()).max(64.0 * f64::EPSILON * n * f1)
}

/// Checks that the profile satisfies the uniqueness hypotheses: non-negative
/// and non-increasing on the segment.
fn check_monotone_profile(params: &ModelParams) -> Result<()> {
    let field = params.field();
    field.check_non_increasing()?;
    let min = field.min_on(-params.length(), 0.0);
    if min < 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "shooting requires a non-negative force, profile reaches {min}"
        )));
    }
    Ok(())
}

/// Finds the unique fixed point for a non-negative, non-increasing force.
pub fn solve_fixed_point(params: &ModelParams, settings: &SolverSettings) -> Result<FixedPointResult> {
    check_monotone_profile(params)?;
    let length = params.length();
    let n = params.n_gaps();

    // Gaps never shrink under a non-negative force, so δ₁ > L/N overshoots the wall.
    let mut hi = params.gap_scale() * (1.0 + 4.0 * f64::EPSILON);
    if n > 1 {
        let f_max = params.field().max_on(-length, 0.0);
        if f_max > 0.0 {
            hi = hi.min(1.0 / ((n - 1) as f64 * f_max).sqrt());
        }
    }
    let mut grow = 0;
    while probe(hi, params)?.inside {
        hi *= 2.0;
        grow += 1;
        if grow > 64 {
            return Err(ModelError::NoConvergence {
                iterations: grow,
                reason: "could not bracket the first gap".into(),
            });
        }
    }

    let mut lo = 0.0;
    let mut iterations = 0;
    while iterations < settings.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if probe(mid, params)?.inside {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 || hi - lo > settings.tol_rel * hi {
        return Err(ModelError::NoConvergence {
            iterations,
            reason: format!("first-gap bracket [{lo}, {hi}] wider than tolerance"),
        });
    }

    let below = match probe(lo, params)?.outcome {
        ShootingOutcome::Complete(shot) => shot,
        ShootingOutcome::PressureCollapse { k } => {
            return Err(ModelError::NoConvergence {
                iterations,
                reason: format!("pressure collapse at gap {k} inside the bracket"),
            })
        }
    };
    let above = probe(hi, params)?.outcome;
    let wall_first = matches!(&above, ShootingOutcome::Complete(s) if s.terminal_position() <= -length);

    let (classification, shot) = if wall_first {
        let mut shot = below;
        *shot.positions.last_mut().unwrap() = -length;
        (Classification::BoundaryPinned, shot)
    } else {
        let slack = |s: &Shot| (s.terminal_pressure() - params.force_at(s.terminal_position())).abs();
        let shot = match above {
            ShootingOutcome::Complete(a) if a.terminal_position() > -length && slack(&a) < slack(&below) => a,
            _ => below,
        };
        (Classification::Interior, shot)
    };

    let delta1 = shot.gaps[0];
    let f1 = shot.pressures[0];
    let config = Configuration::new(shot.positions, length)?;
    let r = residuals(&config, params);
    let tolerance = residual_tolerance(params, settings.tol_rel, f1);
    let max_residual = r.max_interior();
    let slack_ok = match classification {
        Classification::BoundaryPinned => r.terminal_slack >= -tolerance,
        Classification::Interior => r.terminal_slack.abs() <= tolerance,
    };
    if max_residual > tolerance || !slack_ok {
        return Err(ModelError::NoConvergence {
            iterations,
            reason: format!(
                "residuals above tolerance {tolerance}: interior {max_residual}, terminal slack {}",
                r.terminal_slack
            ),
        });
    }
    Ok(FixedPointResult { config, classification, delta1, max_residual, tolerance, iterations })
}

/// Largest constant force for which the left-most particle stays on the wall.
///
/// Only the length and gap count of `params` are used; its force must be a
/// constant profile.
pub fn wall_force(params: &ModelParams, settings: &SolverSettings) -> Result<f64> {
    if !matches!(params.force(), ForceProfile::Constant { .. }) {
        return Err(ModelError::InvalidParameter("wall force is defined for constant profiles only".into()));
    }
    let length = params.length();
    let n = params.n_gaps();
    let pinned = |force: f64| -> Result<bool> {
        let p = ModelParams::new(length, n, ForceProfile::Constant { value: force })?;
        Ok(solve_fixed_point(&p, settings)?.classification == Classification::BoundaryPinned)
    };

    let mut lo = 0.0;
    let mut hi = 1.0 / (length * length);
    let mut iterations = 0;
    while pinned(hi)? {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if iterations > 2000 {
            return Err(ModelError::NoConvergence {
                iterations,
                reason: "could not bracket the wall force".into(),
            });
        }
    }
    iterations = 0;
    while hi - lo > settings.tol_rel * hi {
        if iterations >= settings.max_iter {
            return Err(ModelError::NoConvergence {
                iterations,
                reason: format!("wall force bracket [{lo}, {hi}] wider than tolerance"),
            });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if pinned(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
