//! External force profiles.
//!
//! All profiles are already renormalized: the value stored is the external
//! force divided by the pair interaction constant, so it carries units of
//! length⁻² and balances the pair pressures `1/δ²` directly.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Declared external force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceProfile {
    /// Uniform force `F >= 0`.
    Constant { value: f64 },
    /// Linear interpolation between `(position, value)` breakpoints. The
    /// breakpoints must cover `[-L, 0]`; outside their range the end values
    /// are held constant.
    PiecewiseLinear { breakpoints: Vec<(f64, f64)> },
    /// `F = c·N^γ`, resolved against the number of gaps when the model is built.
    Scaled { c: f64, gamma: f64 },
}

impl ForceProfile {
    pub fn constant(value: f64) -> Result<Self> {
        let profile = ForceProfile::Constant { value };
        profile.validate_shape()?;
        Ok(profile)
    }

    pub fn piecewise(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let profile = ForceProfile::PiecewiseLinear { breakpoints };
        profile.validate_shape()?;
        Ok(profile)
    }

    pub fn scaled(c: f64, gamma: f64) -> Result<Self> {
        let profile = ForceProfile::Scaled { c, gamma };
        profile.validate_shape()?;
        Ok(profile)
    }

    /// Builds the renormalized constant force `(α_ext/α_int)·F₀` from physical constants.
    pub fn from_physical(alpha_ext: f64, alpha_int: f64, raw_force: f64) -> Result<Self> {
        if !(alpha_ext > 0.0 && alpha_int > 0.0) || !alpha_ext.is_finite() || !alpha_int.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "interaction constants must be positive and finite, got alpha_ext={alpha_ext}, alpha_int={alpha_int}"
            )));
        }
        Self::constant(alpha_ext / alpha_int * raw_force)
    }

    /// Checks the invariants that do not depend on the segment length.
    pub(crate) fn validate_shape(&self) -> Result<()> {
        match self {
            ForceProfile::Constant { value } => {
                if !value.is_finite() || *value < 0.0 {
                    return Err(ModelError::InvalidParameter(format!(
                        "constant force must be finite and non-negative, got {value}"
                    )));
                }
            }
            ForceProfile::PiecewiseLinear { breakpoints } => {
                if breakpoints.len() < 2 {
                    return Err(ModelError::InvalidParameter(
                        "piecewise profile needs at least two breakpoints".into(),
                    ));
                }
                if breakpoints.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
                    return Err(ModelError::InvalidParameter(
                        "piecewise breakpoints must be finite".into(),
                    ));
                }
                if let Some(i) = breakpoints.windows(2).position(|w| w[1].0 <= w[0].0) {
                    return Err(ModelError::InvalidParameter(format!(
                        "breakpoint positions must be strictly increasing (breakpoint {})",
                        i + 1
                    )));
                }
            }
            ForceProfile::Scaled { c, gamma } => {
                if !(c.is_finite() && *c > 0.0 && gamma.is_finite() && *gamma > 0.0) {
                    return Err(ModelError::InvalidParameter(format!(
                        "scaled force needs c > 0 and gamma > 0, got c={c}, gamma={gamma}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn validate_coverage(&self, length: f64) -> Result<()> {
        if let ForceProfile::PiecewiseLinear { breakpoints } = self {
            let first = breakpoints[0].0;
            let last = breakpoints[breakpoints.len() - 1].0;
            if first > -length || last < 0.0 {
                return Err(ModelError::InvalidParameter(format!(
                    "piecewise profile covers [{first}, {last}] but must cover [{}, 0]",
                    -length
                )));
            }
        }
        Ok(())
    }

    /// Resolves a scaled profile into the field actually felt by `n_gaps` gaps.
    pub(crate) fn resolve(&self, n_gaps: usize) -> ForceField {
        match self {
            ForceProfile::Constant { value } => ForceField::Constant(*value),
            ForceProfile::Scaled { c, gamma } => ForceField::Constant(c * (n_gaps as f64).powf(*gamma)),
            ForceProfile::PiecewiseLinear { breakpoints } => ForceField::Piecewise(breakpoints.clone()),
        }
    }

    /// The `(c, γ)` pair if this is a scaled profile.
    pub fn scaling(&self) -> Option<(f64, f64)> {
        match self {
            ForceProfile::Scaled { c, gamma } => Some((*c, *gamma)),
            _ => None,
        }
    }
}

/// A force profile resolved for a concrete particle count.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceField {
    Constant(f64),
    Piecewise(Vec<(f64, f64)>),
}

impl ForceField {
    pub fn value_at(&self, x: f64) -> f64 {
        match self {
            ForceField::Constant(v) => *v,
            ForceField::Piecewise(bp) => {
                let i = bp.partition_point(|(p, _)| *p <= x);
                if i == 0 {
                    bp[0].1
                } else if i == bp.len() {
                    bp[bp.len() - 1].1
                } else {
                    let (x0, v0) = bp[i - 1];
                    let (x1, v1) = bp[i];
                    v0 + (v1 - v0) * (x - x0) / (x1 - x0)
                }
            }
        }
    }

    /// dF/dx, taking the segment to the right of a breakpoint. Zero outside the breakpoints.
    pub fn slope_at(&self, x: f64) -> f64 {
        match self {
            ForceField::Constant(_) => 0.0,
            ForceField::Piecewise(bp) => {
                let i = bp.partition_point(|(p, _)| *p <= x);
                if i == 0 || i == bp.len() {
                    0.0
                } else {
                    let (x0, v0) = bp[i - 1];
                    let (x1, v1) = bp[i];
                    (v1 - v0) / (x1 - x0)
                }
            }
        }
    }

    /// Exact `∫_a^b F(x) dx`. Pieces between breakpoints are linear, so the
    /// trapezoid rule on each piece is exact.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            ForceField::Constant(v) => v * (b - a),
            ForceField::Piecewise(bp) => {
                if a == b {
                    return 0.0;
                }
                let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
                let start = bp.partition_point(|(p, _)| *p <= lo);
                let end = bp.partition_point(|(p, _)| *p < hi);
                let mut total = 0.0;
                let mut left = lo;
                let mut f_left = self.value_at(lo);
                for &(p, v) in &bp[start..end] {
                    total += 0.5 * (p - left) * (f_left + v);
                    left = p;
                    f_left = v;
                }
                total += 0.5 * (hi - left) * (f_left + self.value_at(hi));
                sign * total
            }
        }
    }

    /// Largest value on `[lo, hi]`.
    pub fn max_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            ForceField::Constant(v) => *v,
            ForceField::Piecewise(bp) => bp
                .iter()
                .filter(|(p, _)| *p > lo && *p < hi)
                .map(|(_, v)| *v)
                .fold(self.value_at(lo).max(self.value_at(hi)), f64::max),
        }
    }

    pub fn min_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            ForceField::Constant(v) => *v,
            ForceField::Piecewise(bp) => bp
                .iter()
                .filter(|(p, _)| *p > lo && *p < hi)
                .map(|(_, v)| *v)
                .fold(self.value_at(lo).min(self.value_at(hi)), f64::min),
        }
    }

    /// Fails with the first segment on which the profile increases.
    pub fn check_non_increasing(&self) -> Result<()> {
        if let ForceField::Piecewise(bp) = self {
            if let Some(i) = bp.windows(2).position(|w| w[1].1 > w[0].1) {
                return Err(ModelError::MonotonicityViolation {
                    segment: i,
                    from: bp[i].0,
                    to: bp[i + 1].0,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tent() -> ForceField {
        ForceField::Piecewise(vec![(-2.0, -3.0), (-1.0, 1.0), (0.0, -1.0)])
    }

    #[test]
    fn interpolates_and_extends() {
        let f = tent();
        assert_eq!(f.value_at(-1.0), 1.0);
        assert_eq!(f.value_at(-1.5), -1.0);
        assert_eq!(f.value_at(-0.5), 0.0);
        assert_eq!(f.value_at(-5.0), -3.0);
        assert_eq!(f.value_at(3.0), -1.0);
        assert_eq!(f.slope_at(-1.5), 4.0);
        assert_eq!(f.slope_at(-0.5), -2.0);
        assert_eq!(f.slope_at(-3.0), 0.0);
    }

    #[test]
    fn integral_matches_hand_values() {
        let f = tent();
        // two triangles-with-offset: [-2,-1] averages -1, [-1,0] averages 0
        assert!((f.integral(-2.0, 0.0) + 1.0).abs() < 1e-15);
        assert!((f.integral(-1.5, -0.5) - 0.25).abs() < 1e-15);
        assert!((f.integral(-0.5, -1.5) + f.integral(-1.5, -0.5)).abs() < 1e-15);
        assert_eq!(ForceField::Constant(3.0).integral(-1.0, 0.0), 3.0);
        // constant extension left of the first breakpoint
        assert!((f.integral(-3.0, -2.0) + 3.0).abs() < 1e-15);
    }

    #[test]
    fn monotonicity_check_names_segment() {
        let err = tent().check_non_increasing().unwrap_err();
        assert_eq!(err, ModelError::MonotonicityViolation { segment: 0, from: -2.0, to: -1.0 });
        let ok = ForceField::Piecewise(vec![(-1.0, 2.0), (-0.5, 2.0), (0.0, 0.0)]);
        assert!(ok.check_non_increasing().is_ok());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ForceProfile::constant(-1.0).is_err());
        assert!(ForceProfile::constant(f64::NAN).is_err());
        assert!(ForceProfile::scaled(0.0, 1.0).is_err());
        assert!(ForceProfile::scaled(1.0, 0.0).is_err());
        assert!(ForceProfile::piecewise(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(ForceProfile::piecewise(vec![(0.0, 1.0)]).is_err());
        let p = ForceProfile::piecewise(vec![(-0.5, 1.0), (0.0, 0.0)]).unwrap();
        assert!(p.validate_coverage(1.0).is_err());
        assert!(p.validate_coverage(0.5).is_ok());
    }

    #[test]
    fn physical_constructor_divides() {
        let p = ForceProfile::from_physical(2.0, 4.0, 3.0).unwrap();
        assert_eq!(p, ForceProfile::Constant { value: 1.5 });
        assert_eq!(ForceProfile::scaled(2.0, 1.0).unwrap().resolve(50), ForceField::Constant(100.0));
    }
}
