//! Empirical densities, phase detection, parameter sweeps and convergence tables.
//!
//! Phase detection reads three numbers off a solved configuration:
//!
//! * `N·max_k |δ_k - L/N|`: below `0.05` the gaps are uniform to within a
//!   twentieth of a mean gap, reported as `Uniform`;
//! * `|x_N|`: below `3L/√N` the whole chain has collapsed onto the origin,
//!   reported as `DeltaAtOrigin`;
//! * `x_N + L`: above `0.01·L` the chain has left the wall, reported as
//!   `Detached`; otherwise `SmoothPositive`.
//!
//! These thresholds are heuristics tuned to the finite-`N` convergence rates.
//! Whenever a metric lies within a factor of two of its threshold the report
//! is flagged as ambiguous.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{asymptotic_density, AsymptoticDensity, ForceScaling, PhaseLabel};
use crate::error::{ModelError, Result};
use crate::force::ForceProfile;
use crate::model::{Classification, Configuration, FixedPointResult, ModelParams};
use crate::shooting::{solve_fixed_point, SolverSettings};

const UNIFORM_GAP_DEVIATION: f64 = 0.05;
const COLLAPSE_EXTENT: f64 = 3.0;
const DETACH_MARGIN: f64 = 0.01;

/// Particle fractions per uniform bin of `[-L, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    pub bin_edges: Vec<f64>,
    pub mass: Vec<f64>,
    pub n_bins: usize,
}

impl DensityHistogram {
    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Mass per unit length in each bin.
    pub fn density(&self) -> Vec<f64> {
        let w = self.bin_width();
        self.mass.iter().map(|m| m / w).collect()
    }

    /// Total mass of the bins whose centres lie in `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        self.centers()
            .iter()
            .zip(&self.mass)
            .filter(|(c, _)| **c >= lo && **c <= hi)
            .map(|(_, m)| m)
            .sum()
    }
}

/// `round(√N)`, at least one bin.
pub fn default_bins(n_gaps: usize) -> usize {
    ((n_gaps as f64).sqrt().round() as usize).max(1)
}

/// Bins the `N + 1` particles of `config` over `[-length, 0]`.
pub fn histogram(config: &Configuration, length: f64, n_bins: usize) -> Result<DensityHistogram> {
    if n_bins == 0 {
        return Err(ModelError::InvalidParameter("histogram needs at least one bin".into()));
    }
    let width = length / n_bins as f64;
    let mut bin_edges: Vec<f64> = (0..=n_bins).map(|i| -length + i as f64 * width).collect();
    bin_edges[n_bins] = 0.0;
    let mut counts = vec![0usize; n_bins];
    for &x in config.positions() {
        let idx = (((x + length) / width).floor().max(0.0) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let total = config.positions().len() as f64;
    let mass = counts.into_iter().map(|c| c as f64 / total).collect();
    Ok(DensityHistogram { bin_edges, mass, n_bins })
}

/// `N·max_k |δ_k - L/N|`.
pub fn scaled_gap_deviation(config: &Configuration, length: f64) -> f64 {
    let n = config.n_gaps() as f64;
    let mean = length / n;
    n * config.gaps().iter().fold(0.0f64, |m, d| m.max((d - mean).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEvidence {
    pub x_n: f64,
    /// `δ₁·N/L`.
    pub delta1_scaled: f64,
    /// `N·max_k |δ_k - L/N|`.
    pub gap_deviation: f64,
    /// Largest gap between histogram density and prediction at bin centres,
    /// `None` when the prediction has no pointwise density.
    pub sup_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub declared: ForceScaling,
    pub detected: PhaseLabel,
    pub ambiguous: bool,
    pub evidence: PhaseEvidence,
    pub prediction: AsymptoticDensity,
}

fn near(metric: f64, threshold: f64) -> bool {
    metric >= 0.5 * threshold && metric <= 2.0 * threshold
}

/// Detects the density phase of a solved configuration with a scaled force.
pub fn classify_phase(params: &ModelParams, solved: &FixedPointResult, n_bins: Option<usize>) -> Result<PhaseReport> {
    let (c, gamma) = params.force().scaling().ok_or_else(|| {
        ModelError::InvalidParameter("phase classification needs a scaled force c·N^gamma".into())
    })?;
    let declared = ForceScaling::new(c, gamma)?;
    let length = params.length();
    let n = params.n_gaps();
    let config = &solved.config;

    let x_n = config.last();
    let gap_deviation = scaled_gap_deviation(config, length);
    let collapse_extent = COLLAPSE_EXTENT * length / (n as f64).sqrt();
    let detach = DETACH_MARGIN * length;
    let wall_distance = x_n + length;

    let detected = if gap_deviation < UNIFORM_GAP_DEVIATION {
        PhaseLabel::Uniform
    } else if x_n.abs() < collapse_extent {
        PhaseLabel::DeltaAtOrigin
    } else if wall_distance > detach {
        PhaseLabel::Detached
    } else {
        PhaseLabel::SmoothPositive
    };
    let ambiguous = near(gap_deviation, UNIFORM_GAP_DEVIATION)
        || near(x_n.abs(), collapse_extent)
        || near(wall_distance, detach);

    let prediction = asymptotic_density(declared, length);
    let hist = histogram(config, length, n_bins.unwrap_or_else(|| default_bins(n)))?;
    let sup_deviation = hist
        .centers()
        .iter()
        .zip(hist.density())
        .map(|(&x, rho)| prediction.density_at(x).map(|p| (rho - p).abs()))
        .try_fold(0.0f64, |m, d| d.map(|d| m.max(d)));

    Ok(PhaseReport {
        declared,
        detected,
        ambiguous,
        evidence: PhaseEvidence {
            x_n,
            delta1_scaled: solved.delta1 * n as f64 / length,
            gap_deviation,
            sup_deviation,
        },
        prediction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub length: f64,
    pub c: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepSettings {
    pub solver: SolverSettings,
    /// Histogram bins; `None` uses [`default_bins`].
    pub n_bins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowReport {
    pub report: PhaseReport,
    pub classification: Classification,
    pub iterations: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: GridPoint,
    /// Failures are kept per row as their error message.
    pub outcome: std::result::Result<RowReport, ModelError>,
    pub elapsed: Duration,
}

fn run_point(point: &GridPoint, settings: &SweepSettings) -> Result<RowReport> {
    let params = ModelParams::new(point.length, point.n, ForceProfile::scaled(point.c, point.gamma)?)?;
    let solved = solve_fixed_point(&params, &settings.solver)?;
    let report = classify_phase(&params, &solved, settings.n_bins)?;
    Ok(RowReport {
        report,
        classification: solved.classification,
        iterations: solved.iterations,
        max_residual: solved.max_residual,
    })
}

/// Solves and classifies every grid point; rows come back in grid order.
pub fn sweep(grid: &[GridPoint], settings: &SweepSettings) -> Vec<SweepRow> {
    grid.par_iter()
        .map(|point| {
            let started = Instant::now();
            let outcome = run_point(point, settings);
            SweepRow { point: *point, outcome, elapsed: started.elapsed() }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub x_n: f64,
    pub delta1_scaled: f64,
    pub gap_deviation: f64,
}

/// Solves the same force law at increasing `N`.
pub fn convergence_study(
    force: &ForceProfile,
    length: f64,
    n_list: &[usize],
    settings: &SolverSettings,
) -> Result<Vec<ConvergenceRow>> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ModelError::InvalidParameter("particle counts must be strictly increasing".into()));
    }
    n_list
        .par_iter()
        .map(|&n| {
            let params = ModelParams::new(length, n, force.clone())?;
            let solved = solve_fixed_point(&params, settings)?;
            Ok(ConvergenceRow {
                n,
                x_n: solved.config.last(),
                delta1_scaled: solved.delta1 * n as f64 / length,
                gap_deviation: scaled_gap_deviation(&solved.config, length),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, length: f64) -> Configuration {
        Configuration::new((0..=n).map(|i| -length * i as f64 / n as f64).collect(), length).unwrap()
    }

    #[test]
    fn two_particles_two_bins() {
        let h = histogram(&uniform(1, 1.0), 1.0, 2).unwrap();
        assert_eq!(h.mass, vec![0.5, 0.5]);
        assert_eq!(h.bin_edges, vec![-1.0, -0.5, 0.0]);
    }

    #[test]
    fn uniform_histogram_is_flat() {
        let n = 99; // 100 particles, 10 bins
        let h = histogram(&uniform(n, 1.0), 1.0, 10).unwrap();
        let q = 1.0 / (n + 1) as f64;
        for m in &h.mass {
            assert!((m - 0.1).abs() <= q + 1e-12, "{m}");
        }
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_bins_rejected() {
        assert!(histogram(&uniform(3, 1.0), 1.0, 0).is_err());
    }

    #[test]
    fn default_bin_count() {
        assert_eq!(default_bins(10_000), 100);
        assert_eq!(default_bins(1), 1);
        assert_eq!(default_bins(2), 1);
    }

    #[test]
    fn classify_requires_scaled_force() {
        let p = ModelParams::new(1.0, 4, ForceProfile::constant(0.0).unwrap()).unwrap();
        let s = solve_fixed_point(&p, &SolverSettings::default()).unwrap();
        assert!(classify_phase(&p, &s, None).is_err());
    }

    #[test]
    fn empty_sweep() {
        assert!(sweep(&[], &SweepSettings::default()).is_empty());
    }

    #[test]
    fn sweep_keeps_failures_per_row() {
        let grid = [
            GridPoint { n: 10, length: 1.0, c: 1.0, gamma: 0.5 },
            GridPoint { n: 10, length: -1.0, c: 1.0, gamma: 0.5 },
        ];
        let rows = sweep(&grid, &SweepSettings::default());
        assert!(rows[0].outcome.is_ok());
        assert!(matches!(rows[1].outcome, Err(ModelError::InvalidParameter(_))));
    }

    #[test]
    fn convergence_needs_increasing_counts() {
        let f = ForceProfile::constant(0.0).unwrap();
        assert!(convergence_study(&f, 1.0, &[100, 10], &SolverSettings::default()).is_err());
    }

    #[test]
    fn zero_force_rows_have_no_deviation() {
        let f = ForceProfile::constant(0.0).unwrap();
        let rows = convergence_study(&f, 1.0, &[10, 100, 1000], &SolverSettings::default()).unwrap();
        for r in rows {
            assert!(r.gap_deviation < 1e-9, "{r:?}");
            assert!((r.x_n + 1.0).abs() < 1e-15);
            assert!((r.delta1_scaled - 1.0).abs() < 1e-12);
        }
    }
}
