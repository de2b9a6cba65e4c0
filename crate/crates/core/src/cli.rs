//! Command-line front end.
//!
//! Every command writes one artifact, JSON by default or CSV with
//! `--format csv`, to standard output or atomically to `--output`. Model
//! errors exit with status 1 and a JSON object `{"error": kind, "message": ..}`
//! on stderr; usage errors exit with status 2.
//!
//! Tolerances can be overridden from the environment:
//! `COULOMB_CHAIN_TOL_REL`, `COULOMB_CHAIN_MAX_ITER` and `COULOMB_CHAIN_GRAD_TOL`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{convergence_study, default_bins, histogram, sweep, GridPoint, SweepSettings};
use crate::closed_form::{asymptotic_density, CriticalForce, ForceScaling};
use crate::error::ModelError;
use crate::force::ForceProfile;
use crate::model::{Classification, ModelParams};
use crate::oracle::{multi_start_fixed_points, MinimizeSettings, NonuniquenessProfile};
use crate::shooting::{solve_fixed_point, SolverSettings};

#[derive(Debug, Parser)]
#[command(name = "coulomb-chain", version, about = "Equilibria of a nearest-neighbour Coulomb chain on a segment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the artifact here (atomically) instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the fixed point by shooting.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Exact critical force and its large-N coefficient.
    Critical {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
    },
    /// Solve and classify over a grid of N, c and gamma.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        c_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        gamma_list: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[arg(long)]
        bins: Option<usize>,
        /// Include per-row wall-clock time (makes output nondeterministic).
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Histogram of the solved configuration, with the asymptotic prediction for scaled forces.
    Density {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        bins: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Local minima of the energy from stratified multi-start descent.
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 8)]
        starts: usize,
        #[command(flatten)]
        minimizer: MinimizerArgs,
    },
    /// Search for coexisting minima under the non-monotone two-slope profile.
    Nonunique {
        #[arg(long, default_value_t = 51)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 2.0)]
        b: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 4.0, 8.0, 16.0, 32.0])]
        c_list: Vec<f64>,
        #[arg(long, default_value_t = 13)]
        starts: usize,
        #[command(flatten)]
        minimizer: MinimizerArgs,
    },
    /// Solve one force law at increasing N.
    Converge {
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[command(flatten)]
        force: ForceArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub length: f64,
    #[command(flatten)]
    pub force: ForceArgs,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = true)]
pub struct ForceArgs {
    /// Constant renormalized force.
    #[arg(long, conflicts_with_all = ["c", "gamma", "force_piecewise"], allow_negative_numbers = true)]
    pub force: Option<f64>,
    /// Scaled force F = c·N^gamma (needs --gamma).
    #[arg(long, requires = "gamma", conflicts_with = "force_piecewise")]
    pub c: Option<f64>,
    #[arg(long, requires = "c")]
    pub gamma: Option<f64>,
    /// Breakpoints "x:value,x:value,..." on [-L, 0].
    #[arg(long, value_parser = parse_breakpoints, allow_hyphen_values = true)]
    pub force_piecewise: Option<Breakpoints>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoints(pub Vec<(f64, f64)>);

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, env = "COULOMB_CHAIN_TOL_REL", default_value_t = SolverSettings::default().tol_rel)]
    pub tol_rel: f64,
    #[arg(long, env = "COULOMB_CHAIN_MAX_ITER", default_value_t = SolverSettings::default().max_iter)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct MinimizerArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gradient tolerance; defaults to 1e-10·(N/L)².
    #[arg(long, env = "COULOMB_CHAIN_GRAD_TOL")]
    pub grad_tol: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: usize,
}

fn parse_breakpoints(s: &str) -> Result<Breakpoints, String> {
    s.split(',')
        .map(|pair| {
            let (x, v) = pair.split_once(':').ok_or_else(|| format!("expected x:value, got {pair:?}"))?;
            let x = x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))?;
            let v = v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"))?;
            Ok((x, v))
        })
        .collect::<Result<Vec<_>, String>>()
        .map(Breakpoints)
}

impl ForceArgs {
    pub fn profile(&self) -> Result<ForceProfile, ModelError> {
        match (self.force, self.c, self.gamma, &self.force_piecewise) {
            (Some(f), None, None, None) => ForceProfile::constant(f),
            (None, Some(c), Some(g), None) => ForceProfile::scaled(c, g),
            (None, None, None, Some(b)) => ForceProfile::piecewise(b.0.clone()),
            _ => Err(ModelError::InvalidParameter("give exactly one force form".into())),
        }
    }
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams, ModelError> {
        ModelParams::new(self.length, self.n, self.force.profile()?)
    }
}

impl SolverArgs {
    fn settings(&self) -> SolverSettings {
        SolverSettings { tol_rel: self.tol_rel, max_iter: self.max_iter }
    }
}

impl MinimizerArgs {
    fn settings(&self, params: &ModelParams) -> Result<MinimizeSettings, ModelError> {
        let base = MinimizeSettings::for_params(params);
        MinimizeSettings::new(base.step_init, self.grad_tol.unwrap_or(base.grad_tol), self.max_steps, self.seed)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite value in output field {0}")]
    NonFinite(String),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Model(e) => e.kind(),
            CliError::NonFinite(_) => "NonFiniteOutput",
            CliError::Io(_) => "IoError",
            CliError::Csv(_) => "CsvError",
            CliError::Json(_) => "JsonError",
        }
    }
}

/// A rendered artifact: a JSON document, or a table for CSV.
///
/// Documents without a natural table shape go to CSV as `key,value` rows,
/// with nested keys joined by `.` and array entries by index.
enum Artifact {
    Document(Value),
    Table(Vec<Value>),
}

/// Rejects NaN and infinities; `serde_json` would silently turn them into `null`.
fn check_finite(path: &str, values: impl IntoIterator<Item = f64>) -> Result<(), CliError> {
    match values.into_iter().position(|v| !v.is_finite()) {
        Some(i) => Err(CliError::NonFinite(format!("{path}[{i}]"))),
        None => Ok(()),
    }
}

fn params_json(params: &ModelParams) -> Value {
    json!({ "n": params.n_gaps(), "length": params.length(), "force": params.force() })
}

fn classification_str(c: Classification) -> &'static str {
    match c {
        Classification::BoundaryPinned => "BoundaryPinned",
        Classification::Interior => "Interior",
    }
}

fn solve_cmd(model: &ModelArgs, solver: &SolverArgs) -> Result<Artifact, CliError> {
    let params = model.params()?;
    let r = solve_fixed_point(&params, &solver.settings())?;
    let gaps = r.config.gaps();
    let pressures = r.config.pressures();
    check_finite("positions", r.config.positions().iter().copied())?;
    check_finite("pressures", pressures.iter().copied())?;
    Ok(Artifact::Document(json!({
        "params": params_json(&params),
        "positions": r.config.positions(),
        "gaps": gaps,
        "pressures": pressures,
        "classification": classification_str(r.classification),
        "max_residual": r.max_residual,
        "delta1": r.delta1,
        "iterations": r.iterations,
    })))
}

fn critical_cmd(n: usize, length: f64) -> Result<Artifact, CliError> {
    if n == 0 || !(length > 0.0 && length.is_finite()) {
        return Err(ModelError::InvalidParameter(format!("need N >= 1 and L > 0, got N = {n}, L = {length}")).into());
    }
    let cf = CriticalForce::new(n, length);
    check_finite("critical", [cf.exact, cf.asymptotic_coefficient])?;
    Ok(Artifact::Document(serde_json::to_value(cf)?))
}

#[derive(Serialize)]
struct SweepRecord {
    n: usize,
    length: f64,
    c: f64,
    gamma: f64,
    predicted: Option<&'static str>,
    detected: Option<&'static str>,
    ambiguous: Option<bool>,
    classification: Option<&'static str>,
    x_n: Option<f64>,
    delta1_scaled: Option<f64>,
    gap_deviation: Option<f64>,
    sup_deviation: Option<f64>,
    max_residual: Option<f64>,
    iterations: Option<usize>,
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn sweep_cmd(
    n_list: &[usize],
    c_list: &[f64],
    gamma_list: &[f64],
    length: f64,
    bins: Option<usize>,
    timing: bool,
    solver: &SolverArgs,
) -> Result<Artifact, CliError> {
    let mut grid = Vec::with_capacity(n_list.len() * c_list.len() * gamma_list.len());
    for &n in n_list {
        for &gamma in gamma_list {
            for &c in c_list {
                grid.push(GridPoint { n, length, c, gamma });
            }
        }
    }
    let rows = sweep(&grid, &SweepSettings { solver: solver.settings(), n_bins: bins });
    let mut records = Vec::with_capacity(rows.len());
    for row in rows {
        let p = row.point;
        let mut rec = SweepRecord {
            n: p.n,
            length: p.length,
            c: p.c,
            gamma: p.gamma,
            predicted: None,
            detected: None,
            ambiguous: None,
            classification: None,
            x_n: None,
            delta1_scaled: None,
            gap_deviation: None,
            sup_deviation: None,
            max_residual: None,
            iterations: None,
            error: None,
            elapsed_ms: timing.then_some(row.elapsed.as_secs_f64() * 1e3),
        };
        match row.outcome {
            Ok(r) => {
                let ev = r.report.evidence;
                check_finite("sweep", [ev.x_n, ev.delta1_scaled, ev.gap_deviation, r.max_residual])?;
                check_finite("sweep.sup_deviation", ev.sup_deviation)?;
                rec.predicted = Some(r.report.prediction.label().as_str());
                rec.detected = Some(r.report.detected.as_str());
                rec.ambiguous = Some(r.report.ambiguous);
                rec.classification = Some(classification_str(r.classification));
                rec.x_n = Some(ev.x_n);
                rec.delta1_scaled = Some(ev.delta1_scaled);
                rec.gap_deviation = Some(ev.gap_deviation);
                rec.sup_deviation = ev.sup_deviation;
                rec.max_residual = Some(r.max_residual);
                rec.iterations = Some(r.iterations);
            }
            Err(e) => rec.error = Some(format!("{}: {e}", e.kind())),
        }
        records.push(serde_json::to_value(rec)?);
    }
    Ok(Artifact::Table(records))
}

fn density_cmd(model: &ModelArgs, bins: Option<usize>, solver: &SolverArgs) -> Result<Artifact, CliError> {
    let params = model.params()?;
    let r = solve_fixed_point(&params, &solver.settings())?;
    let n_bins = bins.unwrap_or_else(|| default_bins(params.n_gaps()));
    let hist = histogram(&r.config, params.length(), n_bins)?;
    let prediction = match params.force().scaling() {
        Some((c, gamma)) => {
            let density = asymptotic_density(ForceScaling::new(c, gamma)?, params.length());
            hist.centers().iter().map(|&x| density.density_at(x)).collect::<Option<Vec<f64>>>()
        }
        None => None,
    };
    check_finite("bin_edges", hist.bin_edges.iter().copied())?;
    check_finite("mass", hist.mass.iter().copied())?;
    check_finite("prediction", prediction.iter().flatten().copied())?;
    Ok(Artifact::Document(json!({
        "params": params_json(&params),
        "bin_edges": hist.bin_edges,
        "mass": hist.mass,
        "prediction": prediction,
    })))
}

fn oracle_cmd(model: &ModelArgs, starts: usize, minimizer: &MinimizerArgs) -> Result<Artifact, CliError> {
    let params = model.params()?;
    let minima = multi_start_fixed_points(&params, starts, &minimizer.settings(&params)?)?;
    let mut out = Vec::with_capacity(minima.len());
    for m in &minima {
        check_finite("positions", m.result.config.positions().iter().copied())?;
        check_finite("energy", [m.energy, m.result.max_residual])?;
        out.push(json!({
            "energy": m.energy,
            "classification": classification_str(m.result.classification),
            "max_residual": m.result.max_residual,
            "iterations": m.result.iterations,
            "positions": m.result.config.positions(),
        }));
    }
    Ok(Artifact::Document(json!({
        "params": params_json(&params),
        "starts": starts,
        "seed": minimizer.seed,
        "minima": out,
    })))
}

fn nonunique_cmd(
    n: usize,
    a: f64,
    b: f64,
    c_list: &[f64],
    starts: usize,
    minimizer: &MinimizerArgs,
) -> Result<Artifact, CliError> {
    let profile = NonuniquenessProfile::new(a, b)?;
    let mut rows = Vec::with_capacity(c_list.len());
    let mut first_multiple = None;
    for &c in c_list {
        let params = profile.params(c, n)?;
        let minima = multi_start_fixed_points(&params, starts, &minimizer.settings(&params)?)?;
        let energies: Vec<f64> = minima.iter().map(|m| m.energy).collect();
        check_finite("energies", energies.iter().copied())?;
        if minima.len() >= 2 && first_multiple.is_none() {
            first_multiple = Some(c);
        }
        rows.push(json!({ "c": c, "minima": minima.len(), "energies": energies }));
    }
    Ok(Artifact::Document(json!({
        "n": n,
        "length": NonuniquenessProfile::LENGTH,
        "a": a,
        "b": b,
        "starts": starts,
        "seed": minimizer.seed,
        "rows": rows,
        "first_c_with_multiple_minima": first_multiple,
    })))
}

fn converge_cmd(n_list: &[usize], length: f64, force: &ForceArgs, solver: &SolverArgs) -> Result<Artifact, CliError> {
    let rows = convergence_study(&force.profile()?, length, n_list, &solver.settings())?;
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        check_finite("converge", [r.x_n, r.delta1_scaled, r.gap_deviation])?;
        out.push(serde_json::to_value(r)?);
    }
    Ok(Artifact::Table(out))
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&join(k), v, out)),
        Value::Array(items) => items.iter().enumerate().for_each(|(i, v)| flatten(&join(&i.to_string()), v, out)),
        scalar => out.push((prefix.to_string(), scalar_text(scalar))),
    }
}

fn render(artifact: &Artifact, format: Format) -> Result<Vec<u8>, CliError> {
    match (artifact, format) {
        (Artifact::Document(v), Format::Json) => {
            let mut bytes = serde_json::to_vec_pretty(v)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        (Artifact::Table(rows), Format::Json) => {
            let mut bytes = serde_json::to_vec_pretty(rows)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        (Artifact::Document(v), Format::Csv) => {
            let mut pairs = Vec::new();
            flatten("", v, &mut pairs);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["key", "value"])?;
            for (k, v) in pairs {
                w.write_record([k, v])?;
            }
            Ok(w.into_inner().map_err(|e| e.into_error())?)
        }
        (Artifact::Table(rows), Format::Csv) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            if let Some(Value::Object(first)) = rows.first() {
                let header: Vec<&String> = first.keys().collect();
                w.write_record(&header)?;
                for row in rows {
                    w.write_record(header.iter().map(|k| scalar_text(&row[k.as_str()])))?;
                }
            }
            Ok(w.into_inner().map_err(|e| e.into_error())?)
        }
    }
}

fn write_output(bytes: &[u8], path: Option<&Path>) -> Result<(), CliError> {
    match path {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| e.error)?;
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let artifact = match &cli.command {
        Command::Solve { model, solver } => solve_cmd(model, solver)?,
        Command::Critical { n, length } => critical_cmd(*n, *length)?,
        Command::Sweep { n_list, c_list, gamma_list, length, bins, timing, solver } => {
            sweep_cmd(n_list, c_list, gamma_list, *length, *bins, *timing, solver)?
        }
        Command::Density { model, bins, solver } => density_cmd(model, *bins, solver)?,
        Command::Oracle { model, starts, minimizer } => oracle_cmd(model, *starts, minimizer)?,
        Command::Nonunique { n, a, b, c_list, starts, minimizer } => nonunique_cmd(*n, *a, *b, c_list, *starts, minimizer)?,
        Command::Converge { n_list, length, force, solver } => converge_cmd(n_list, *length, force, solver)?,
    };
    let bytes = render(&artifact, cli.format)?;
    write_output(&bytes, cli.output.as_deref())
}

/// Parses the process arguments, runs the command and returns the exit status.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let obj = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{obj}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breakpoints_parse() {
        let b = parse_breakpoints("-1:2, -0.5:1,0:0").unwrap();
        assert_eq!(b.0, vec![(-1.0, 2.0), (-0.5, 1.0), (0.0, 0.0)]);
        assert!(parse_breakpoints("-1;2").is_err());
        assert!(parse_breakpoints("-1:x").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn force_forms_are_exclusive() {
        assert!(Cli::try_parse_from(["cc", "solve", "--n", "4", "--force", "1", "--c", "1", "--gamma", "1"]).is_err());
        assert!(Cli::try_parse_from(["cc", "solve", "--n", "4", "--c", "1"]).is_err());
        assert!(Cli::try_parse_from(["cc", "solve", "--n", "4"]).is_err());
        assert!(Cli::try_parse_from(["cc", "solve", "--n", "4", "--force-piecewise", "-1:1,0:0"]).is_ok());
    }

    #[test]
    fn flatten_paths() {
        let mut out = Vec::new();
        flatten("", &json!({"a": [1.5, null], "b": {"c": "x"}}), &mut out);
        assert_eq!(
            out,
            vec![
                ("a.0".to_string(), "1.5".to_string()),
                ("a.1".to_string(), String::new()),
                ("b.c".to_string(), "x".to_string()),
            ]
        );
    }

    #[test]
    fn non_finite_is_rejected() {
        assert!(check_finite("x", [1.0, f64::NAN]).is_err());
        assert!(check_finite("x", [1.0, 2.0]).is_ok());
    }
}
