//! Explicit formulas for a constant force.
//!
//! With a constant force the interior balance sums to `f_k = f₁ - (k-1)F`,
//! so every gap follows from the first one. On the half-line (no left wall)
//! the left-most particle floats, `f_N = F`, and the gaps are
//! `δ_k = ((N-k+1)F)^{-1/2}`. The left-most particle leaves the wall at `-L`
//! exactly when that half-line chain becomes shorter than `L`, which gives
//! the critical force `F_cr = (Σ_{k=1..N} k^{-1/2} / L)²`, asymptotically
//! `(4/L²)·N`.
//!
//! # Limiting densities
//!
//! For `F = c·N^γ` the particle density `ρ` on `[-L, 0]` has four regimes.
//! Writing `k = aN` for the continuum index, the gaps of the two linear
//! regimes are `N·δ(a) = bL(1 - s·a)^{-1/2}` with `s = b²cL²` (wall-pinned,
//! `c <= c_cr`) and `N·δ(a) = (c(1 - a))^{-1/2}` (floating, `c > c_cr`).
//! Integrating the gaps gives the position of index `a`,
//!
//! ```text
//! x(a) = -(2bL/s)(1 - √(1 - s·a))          pinned
//! x(a) = -(2/√c)(1 - √(1 - a))             floating
//! ```
//!
//! and `ρ = da/d|x| = 1/(N·δ)`. Inverting `x(a)` makes both densities linear in `x`:
//!
//! ```text
//! ρ(x) = (1 + (bcL/2)·x) / (bL)            on [-L, 0]
//! ρ(x) = √c·(1 + (√c/2)·x)                 on [-2/√c, 0], zero to the left
//! ```
//!
//! The pinned scale factor `b` is fixed by `Σ δ_k = L`, i.e.
//! `b∫₀¹(1 - s·a)^{-1/2} da = 1`, equivalently `2b = 1 + √(1 - b²cL²)`.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// `Σ_{k=1..n} k^{-1/2}`, summed smallest terms first.
pub fn sum_inverse_sqrt(n: usize) -> f64 {
    (1..=n).rev().map(|k| 1.0 / (k as f64).sqrt()).sum()
}

/// Gaps `δ_k = (δ₁⁻² - (k-1)F)^{-1/2}` for `k = 1..=n`.
pub fn gaps_constant_force(delta1: f64, force: f64, n: usize) -> Result<Vec<f64>> {
    if !(delta1.is_finite() && delta1 > 0.0) || !(force.is_finite() && force >= 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "need delta1 > 0 and F >= 0, got delta1={delta1}, F={force}"
        )));
    }
    let f1 = 1.0 / (delta1 * delta1);
    (1..=n)
        .map(|k| {
            if k == 1 {
                return Ok(delta1);
            }
            if 1.0 - delta1 * delta1 * (k - 1) as f64 * force <= 0.0 {
                return Err(ModelError::Domain { k });
            }
            Ok(1.0 / (f1 - (k - 1) as f64 * force).sqrt())
        })
        .collect()
}

/// Floating fixed point of the chain on the half-line: `δ_k = ((N-k+1)F)^{-1/2}`.
pub fn aux_model_gaps(force: f64, n: usize) -> Result<Vec<f64>> {
    if !(force.is_finite() && force > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "half-line model needs F > 0, got {force}"
        )));
    }
    Ok((1..=n).map(|k| 1.0 / (((n - k + 1) as f64) * force).sqrt()).collect())
}

/// `-x_N` of the half-line fixed point, `F^{-1/2} Σ_{k=1..N} k^{-1/2}`.
pub fn aux_model_extent(force: f64, n: usize) -> Result<f64> {
    if !(force.is_finite() && force > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "half-line model needs F > 0, got {force}"
        )));
    }
    Ok(sum_inverse_sqrt(n) / force.sqrt())
}

/// Exact finite-`N` critical force.
pub fn critical_force_exact(n: usize, length: f64) -> f64 {
    let s = sum_inverse_sqrt(n) / length;
    s * s
}

/// Asymptotic critical coefficient `c_cr = 4/L²`, with `F_cr ~ c_cr·N`.
pub fn c_critical(length: f64) -> f64 {
    4.0 / (length * length)
}

/// Finite-`N` critical force together with its asymptotic coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalForce {
    pub exact: f64,
    pub asymptotic_coefficient: f64,
}

impl CriticalForce {
    pub fn new(n: usize, length: f64) -> Self {
        CriticalForce {
            exact: critical_force_exact(n, length),
            asymptotic_coefficient: c_critical(length),
        }
    }
}

/// Scale factor `b` of the first gap, `δ₁ ≈ bL/N`, in the pinned linear regime.
///
/// Solves `2b = 1 + √(1 - b²cL²)` by bisection on `(0, min(1, 1/(L√c))]`.
pub fn phase2_scaling_factor(c: f64, length: f64) -> Result<f64> {
    if !(c > 0.0 && c <= c_critical(length)) {
        return Err(ModelError::InvalidParameter(format!(
            "scaling factor needs 0 < c <= 4/L² = {}, got {c}",
            c_critical(length)
        )));
    }
    let cl2 = c * length * length;
    let excess = |b: f64| 2.0 * b - 1.0 - (1.0 - b * b * cl2).max(0.0).sqrt();
    let mut lo = 0.0;
    let mut hi = 1f64.min(1.0 / cl2.sqrt());
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Force scaling `F = c·N^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceScaling {
    pub c: f64,
    pub gamma: f64,
}

impl ForceScaling {
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0 && gamma.is_finite() && gamma > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "scaling needs c > 0 and gamma > 0, got c={c}, gamma={gamma}"
            )));
        }
        Ok(ForceScaling { c, gamma })
    }

    pub fn force(&self, n: usize) -> f64 {
        self.c * (n as f64).powf(self.gamma)
    }

    /// `γ = 1`, up to rounding of a parsed value.
    pub fn is_linear(&self) -> bool {
        (self.gamma - 1.0).abs() <= 1e-12
    }
}

/// Name of a density regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    Uniform,
    SmoothPositive,
    Detached,
    DeltaAtOrigin,
}

impl PhaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::Uniform => "Uniform",
            PhaseLabel::SmoothPositive => "SmoothPositive",
            PhaseLabel::Detached => "Detached",
            PhaseLabel::DeltaAtOrigin => "DeltaAtOrigin",
        }
    }
}

impl std::fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DensityPhase {
    Uniform,
    SmoothPositive { b: f64 },
    Detached { support_left: f64 },
    DeltaAtOrigin,
}

/// Limiting density for a force scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticDensity {
    pub phase: DensityPhase,
    pub scaling: ForceScaling,
    pub length: f64,
}

impl AsymptoticDensity {
    pub fn label(&self) -> PhaseLabel {
        match self.phase {
            DensityPhase::Uniform => PhaseLabel::Uniform,
            DensityPhase::SmoothPositive { .. } => PhaseLabel::SmoothPositive,
            DensityPhase::Detached { .. } => PhaseLabel::Detached,
            DensityPhase::DeltaAtOrigin => PhaseLabel::DeltaAtOrigin,
        }
    }

    /// Position `x(a)` of continuum index `a ∈ [0, 1]`; `None` for the collapsed phase.
    pub fn position_of_index(&self, a: f64) -> Option<f64> {
        let l = self.length;
        let c = self.scaling.c;
        match self.phase {
            DensityPhase::Uniform => Some(-a * l),
            DensityPhase::SmoothPositive { b } => {
                let s = b * b * c * l * l;
                // 1 - √(1 - s·a) written to avoid cancellation for small s·a
                Some(-(2.0 * b * l) * a / (1.0 + (1.0 - s * a).sqrt()))
            }
            DensityPhase::Detached { .. } => Some(-(2.0 / c.sqrt()) * a / (1.0 + (1.0 - a).sqrt())),
            DensityPhase::DeltaAtOrigin => None,
        }
    }

    /// `ρ(x)`; `None` for the collapsed phase, which has no pointwise density.
    pub fn density_at(&self, x: f64) -> Option<f64> {
        let l = self.length;
        if !(-l..=0.0).contains(&x) {
            return Some(0.0);
        }
        let c = self.scaling.c;
        match self.phase {
            DensityPhase::Uniform => Some(1.0 / l),
            DensityPhase::SmoothPositive { b } => Some((1.0 + 0.5 * b * c * l * x) / (b * l)),
            DensityPhase::Detached { support_left } => {
                if x < support_left {
                    Some(0.0)
                } else {
                    let rc = c.sqrt();
                    Some(rc * (1.0 + 0.5 * rc * x))
                }
            }
            DensityPhase::DeltaAtOrigin => None,
        }
    }
}

/// Limiting density for `F = c·N^γ` on a segment of length `length`.
pub fn asymptotic_density(scaling: ForceScaling, length: f64) -> AsymptoticDensity {
    let c = scaling.c;
    let phase = if scaling.is_linear() {
        if c <= c_critical(length) {
            let b = phase2_scaling_factor(c, length).expect("c checked against c_cr");
            DensityPhase::SmoothPositive { b }
        } else {
            DensityPhase::Detached { support_left: -2.0 / c.sqrt() }
        }
    } else if scaling.gamma < 1.0 {
        DensityPhase::Uniform
    } else {
        DensityPhase::DeltaAtOrigin
    };
    AsymptoticDensity { phase, scaling, length }
}
