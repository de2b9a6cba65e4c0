//! Model parameters, configurations, the energy functional and fixed-point residuals.
//!
//! Particles are indexed `x₀ … x_N` from the right wall (`x₀ <= 0`) to the left
//! wall (`x_N >= -L`). Gap `k` (1-based, `k = 1..=N`) is `δ_k = x_{k-1} - x_k`
//! and carries the pair pressure `f_k = δ_k⁻²`. Slices returned by
//! [`Configuration::gaps`] and [`Configuration::pressures`] are 0-based, so
//! `gaps()[k - 1]` is `δ_k`.
//!
//! The renormalized energy is
//!
//! ```text
//! U = Σ_{k=1..N} 1/δ_k  -  Σ_{i=0..N} ∫_{-L}^{x_i} F(x) dx
//! ```
//!
//! and a configuration is a fixed point when every interior particle is in
//! force balance, `f_{k+1} + F(x_k) = f_k`, and each end particle either
//! balances or is pushed into its wall.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::force::{ForceField, ForceProfile};

/// Segment length, gap count and the declared force.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    length: f64,
    n_gaps: usize,
    force: ForceProfile,
    field: ForceField,
}

impl ModelParams {
    pub fn new(length: f64, n_gaps: usize, force: ForceProfile) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "segment length must be positive and finite, got {length}"
            )));
        }
        if n_gaps == 0 {
            return Err(ModelError::InvalidParameter("at least one gap is required".into()));
        }
        force.validate_shape()?;
        force.validate_coverage(length)?;
        let field = force.resolve(n_gaps);
        Ok(ModelParams { length, n_gaps, force, field })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `N`; there are `N + 1` particles.
    pub fn n_gaps(&self) -> usize {
        self.n_gaps
    }

    /// The force as declared (a scaled profile keeps its `(c, γ)`).
    pub fn force(&self) -> &ForceProfile {
        &self.force
    }

    /// The force resolved for this particle count.
    pub fn field(&self) -> &ForceField {
        &self.field
    }

    pub fn force_at(&self, x: f64) -> f64 {
        self.field.value_at(x)
    }

    /// Natural length scale `L/N`.
    pub fn gap_scale(&self) -> f64 {
        self.length / self.n_gaps as f64
    }

    /// Natural pressure scale `(N/L)²`, the pressure of the uniform configuration.
    pub fn pressure_scale(&self) -> f64 {
        let s = self.n_gaps as f64 / self.length;
        s * s
    }
}

/// Ordered particle positions `x₀ > x₁ > … > x_N` inside `[-L, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Configuration {
    positions: Vec<f64>,
}

impl Configuration {
    /// Validates ordering and wall containment for a segment of length `length`.
    pub fn new(positions: Vec<f64>, length: f64) -> Result<Self> {
        let config = Self::from_ordered(positions)?;
        let first = config.positions[0];
        let last = *config.positions.last().unwrap();
        if first > 0.0 || last < -length {
            return Err(ModelError::InvalidConfiguration(format!(
                "positions span [{last}, {first}], outside [{}, 0]",
                -length
            )));
        }
        Ok(config)
    }

    /// Validates ordering only; walls are not checked.
    fn from_ordered(positions: Vec<f64>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(ModelError::InvalidConfiguration(
                "a configuration needs at least two particles".into(),
            ));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidConfiguration("positions must be finite".into()));
        }
        for (k, w) in positions.windows(2).enumerate() {
            if w[1] == w[0] {
                return Err(ModelError::DegenerateConfiguration { gap: k + 1 });
            }
            if w[1] > w[0] {
                return Err(ModelError::InvalidConfiguration(format!(
                    "positions must strictly decrease, but x_{} > x_{}",
                    k + 1,
                    k
                )));
            }
        }
        Ok(Configuration { positions })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<f64> {
        self.positions
    }

    pub fn n_gaps(&self) -> usize {
        self.positions.len() - 1
    }

    /// `x_N`, the left-most particle.
    pub fn last(&self) -> f64 {
        self.positions[self.positions.len() - 1]
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[0] - w[1]).collect()
    }

    pub fn pressures(&self) -> Vec<f64> {
        self.positions
            .windows(2)
            .map(|w| {
                let d = w[0] - w[1];
                1.0 / (d * d)
            })
            .collect()
    }
}

impl TryFrom<Vec<f64>> for Configuration {
    type Error = ModelError;

    fn try_from(positions: Vec<f64>) -> Result<Self> {
        Configuration::from_ordered(positions)
    }
}

impl From<Configuration> for Vec<f64> {
    fn from(c: Configuration) -> Self {
        c.positions
    }
}

/// Which terminal condition the left-most particle satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// `x_N = -L` and `f_N >= F(x_N)`.
    BoundaryPinned,
    /// `x_N > -L` and `f_N = F(x_N)`.
    Interior,
}

/// A fixed point together with the diagnostics of the method that found it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub config: Configuration,
    pub classification: Classification,
    /// First gap `δ₁`.
    pub delta1: f64,
    /// `max_k |f_{k+1} + F(x_k) - f_k|` over interior particles.
    pub max_residual: f64,
    /// Pressure tolerance the producing method guarantees for its residuals.
    pub tolerance: f64,
    pub iterations: usize,
}

/// Raw force-balance residuals of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `r_k = f_{k+1} + F(x_k) - f_k` for `k = 1..N-1` (entry `k - 1`).
    pub interior: Vec<f64>,
    /// `s = f_N - F(x_N)`: zero for a floating end particle, `>= 0` when pinned at `-L`.
    pub terminal_slack: f64,
    /// `f_1 + F(x_0)`: zero for a floating right end, `>= 0` when pinned at `0`.
    pub head_slack: f64,
}

impl Residuals {
    pub fn max_interior(&self) -> f64 {
        self.interior.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Renormalized energy of `config`.
pub fn energy(config: &Configuration, params: &ModelParams) -> Result<f64> {
    let interaction = config
        .positions
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let d = w[0] - w[1];
            if d <= 0.0 {
                Err(ModelError::DegenerateConfiguration { gap: k + 1 })
            } else {
                Ok(1.0 / d)
            }
        })
        .sum::<Result<f64>>()?;
    let left = -params.length();
    let external = match params.field() {
        ForceField::Constant(f) => f * config.positions.iter().map(|x| x - left).sum::<f64>(),
        field => config.positions.iter().map(|&x| field.integral(left, x)).sum(),
    };
    let u = interaction - external;
    if !u.is_finite() {
        return Err(ModelError::InvalidConfiguration(format!("energy is not finite ({u})")));
    }
    Ok(u)
}

pub fn residuals(config: &Configuration, params: &ModelParams) -> Residuals {
    let p = &config.positions;
    let f = config.pressures();
    let n = f.len();
    let interior = (1..n).map(|k| f[k] + params.force_at(p[k]) - f[k - 1]).collect();
    Residuals {
        interior,
        terminal_slack: f[n - 1] - params.force_at(p[n]),
        head_slack: f[0] + params.force_at(p[0]),
    }
}

/// Checks all fixed-point conditions at pressure tolerance `tol`.
///
/// An end particle counts as resting on its wall when it sits within
/// `4·ε·L` of it; a resting particle needs non-negative slack, a floating
/// one needs zero slack.
pub fn is_fixed_point(config: &Configuration, params: &ModelParams, tol: f64) -> bool {
    let r = residuals(config, params);
    let wall_tol = 4.0 * f64::EPSILON * params.length();
    let tail_ok = if config.last() <= -params.length() + wall_tol {
        r.terminal_slack >= -tol
    } else {
        r.terminal_slack.abs() <= tol
    };
    let head_ok = if config.positions[0] >= -wall_tol {
        r.head_slack >= -tol
    } else {
        r.head_slack.abs() <= tol
    };
    r.max_interior() <= tol && tail_ok && head_ok
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(length: f64, n: usize, f: f64) -> ModelParams {
        ModelParams::new(length, n, ForceProfile::constant(f).unwrap()).unwrap()
    }

    #[test]
    fn energy_single_gap() {
        let c = Configuration::new(vec![0.0, -1.0], 1.0).unwrap();
        assert_eq!(energy(&c, &params(1.0, 1, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn energy_symmetric_split() {
        let c = Configuration::new(vec![0.0, -0.5, -1.0], 1.0).unwrap();
        assert_eq!(energy(&c, &params(1.0, 2, 0.0)).unwrap(), 4.0);
    }

    #[test]
    fn energy_with_constant_force() {
        // 4 - 1·((0+1) + (-0.5+1) + (-1+1))
        let c = Configuration::new(vec![0.0, -0.5, -1.0], 1.0).unwrap();
        assert_eq!(energy(&c, &params(1.0, 2, 1.0)).unwrap(), 2.5);
    }

    #[test]
    fn energy_piecewise_agrees_with_constant() {
        let flat = ForceProfile::piecewise(vec![(-1.0, 1.0), (-0.3, 1.0), (0.0, 1.0)]).unwrap();
        let pw = ModelParams::new(1.0, 2, flat).unwrap();
        let c = Configuration::new(vec![0.0, -0.5, -1.0], 1.0).unwrap();
        assert!((energy(&c, &pw).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn configuration_validation() {
        assert_eq!(
            Configuration::new(vec![0.0, -0.5, -0.5], 1.0).unwrap_err(),
            ModelError::DegenerateConfiguration { gap: 2 }
        );
        assert!(Configuration::new(vec![0.0, -0.2, -0.1], 1.0).is_err());
        assert!(Configuration::new(vec![0.1, -0.5], 1.0).is_err());
        assert!(Configuration::new(vec![0.0, -1.5], 1.0).is_err());
        assert!(Configuration::new(vec![0.0], 1.0).is_err());
    }

    #[test]
    fn uniform_config_is_fixed_point_without_force() {
        let n = 7;
        let l = 2.0;
        let pos: Vec<f64> = (0..=n).map(|i| -l * i as f64 / n as f64).collect();
        let c = Configuration::new(pos, l).unwrap();
        let p = params(l, n, 0.0);
        let r = residuals(&c, &p);
        assert_eq!(r.interior.len(), n - 1);
        assert!(r.max_interior() < 1e-12 * p.pressure_scale());
        assert!((r.terminal_slack - p.pressure_scale()).abs() < 1e-12 * p.pressure_scale());
        assert!(is_fixed_point(&c, &p, 1e-10 * p.pressure_scale()));
    }

    #[test]
    fn half_line_pressures_balance() {
        // f1 = 2F, f2 = F with F = 1: gaps 1/√2 and 1
        let d1 = 1.0 / 2f64.sqrt();
        let c = Configuration::new(vec![0.0, -d1, -d1 - 1.0], 5.0).unwrap();
        let r = residuals(&c, &params(5.0, 2, 1.0));
        assert!(r.interior[0].abs() < 1e-14);
        assert!(r.terminal_slack.abs() < 1e-14);
    }

    #[test]
    fn perturbed_config_has_nonzero_residual() {
        let c = Configuration::new(vec![0.0, -0.3, -0.5, -1.0], 1.0).unwrap();
        let p = params(1.0, 3, 0.0);
        assert!(residuals(&c, &p).max_interior() > 1.0);
        assert!(!is_fixed_point(&c, &p, 1e-6));
    }

    #[test]
    fn serde_rejects_unordered_positions() {
        assert!(serde_json::from_str::<Configuration>("[0.0, -0.5, -1.0]").is_ok());
        assert!(serde_json::from_str::<Configuration>("[0.0, 0.5]").is_err());
    }
}
