//! `run`: execute one experiment config.

use std::path::Path;

use nalgebra::DMatrix;
use sigmafloor_core::bkappa::{bkappa, solve_weighted_min_log, BkappaSolution};
use sigmafloor_core::ensembles::{check_assumptions, EnsembleSpec, Profile};
use sigmafloor_core::montecarlo::{
    bkappa_deviation_curve, distance_smallball_curve, fit_exponent, projection_moment_ratio, sigma_tail_curve,
    spread_proxy_distribution, Metadata, VERSION,
};
use sigmafloor_core::Stream;

use crate::config::{BkappaOptions, DeviationOptions, DistanceOptions, ExperimentConfig, ProjectionOptions, ProxyOptions};
use crate::io::{write_metadata, write_output};
use crate::CliError;

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub operation: String,
    pub rows: usize,
    pub files: Vec<String>,
    /// Short free-form result, e.g. a fitted slope.
    pub note: String,
}

fn bare_metadata(operation: &str, seed: u64, rows: usize, cols: usize) -> Metadata {
    Metadata {
        spec_digest: String::new(),
        seed,
        rows,
        cols,
        operation: operation.to_string(),
        version: VERSION.to_string(),
    }
}

/// `B_kappa` of a matrix (rows) or of squared column norms `y`.
pub fn solve_bkappa(matrix: Option<&[Vec<f64>]>, y: Option<&[f64]>, kappa: f64) -> Result<BkappaSolution, CliError> {
    match (matrix, y) {
        (Some(rows), None) => {
            let n_rows = rows.len();
            let n_cols = rows.first().map_or(0, |r| r.len());
            if n_rows == 0 || n_cols == 0 || rows.iter().any(|r| r.len() != n_cols) {
                return Err(CliError::Config("matrix must be non-empty and rectangular".into()));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            Ok(bkappa(&DMatrix::from_row_slice(n_rows, n_cols, &flat), kappa)?)
        }
        (None, Some(y)) => {
            if !(kappa > 1.0 && kappa.is_finite()) {
                return Err(CliError::Config(format!("kappa must be > 1, got {kappa}")));
            }
            Ok(solve_weighted_min_log(y, -2.0 * y.len() as f64 * kappa.ln())?)
        }
        _ => Err(CliError::Config("give exactly one of `matrix` and `y`".into())),
    }
}

/// JSON form printed by the solver: `{value, S, c, weights}`.
pub fn bkappa_json(sol: &BkappaSolution) -> serde_json::Value {
    serde_json::json!({ "value": sol.value, "S": sol.s, "c": sol.threshold, "weights": sol.weights })
}

/// Runs `cfg`. Relative spec paths resolve against `base`.
pub fn run_config(cfg: &ExperimentConfig, base: &Path) -> Result<RunReport, CliError> {
    let out = cfg.out.as_deref().ok_or_else(|| CliError::Config("field `out` is required (or pass --out)".into()))?;
    let op = cfg.operation.as_str();
    let seed = cfg.seed;
    let mut files = Vec::new();
    let (rows, note) = match op {
        "sigma_tail_curve" => {
            let spec = cfg.require_spec(base)?;
            cfg.no_options()?;
            let curve = sigma_tail_curve(&spec, cfg.require_grid()?, cfg.require_trials()?, seed)?;
            files.push(write_output(out, ".csv", &curve.to_csv())?);
            files.push(write_metadata(out, &curve.metadata)?);
            let note = match fit_exponent(&curve.rows) {
                Ok(f) => format!("slope={:.4}", f.slope),
                Err(e) => format!("fit: {e}"),
            };
            (curve.rows.len(), note)
        }
        "bkappa_deviation_curve" => {
            let spec = cfg.require_spec(base)?;
            let o: DeviationOptions = cfg.options()?;
            let t = bkappa_deviation_curve(&spec, cfg.require_grid()?, cfg.require_trials()?, o.c_factor, o.beta, seed)?;
            files.push(write_output(out, ".csv", &t.to_csv())?);
            files.push(write_metadata(out, &t.metadata)?);
            let ok = t.rows.iter().all(|r| r.row.wilson_hi <= r.bound);
            (t.rows.len(), format!("within_bound={ok}"))
        }
        "projection_moment_ratio" => {
            let spec = cfg.require_spec(base)?;
            let o: ProjectionOptions = cfg.options()?;
            let r = projection_moment_ratio(&spec, o.d, o.subspace, o.p, cfg.require_trials()?, seed)?;
            let csv = format!(
                "p,d,n,trials,ratio,se,ci_lo,ci_hi,reference\n{},{},{},{},{},{},{},{},{}\n",
                r.p,
                r.d,
                r.n,
                r.trials,
                r.ratio,
                r.se,
                r.ci_lo,
                r.ci_hi,
                r.reference.map_or(String::new(), |x| x.to_string())
            );
            files.push(write_output(out, ".csv", &csv)?);
            files.push(write_metadata(out, &Metadata::new(&spec, seed, op))?);
            (1, format!("ratio={:.6} se={:.2e}", r.ratio, r.se))
        }
        "distance_smallball_curve" => {
            let x = cfg.require_spec(base)?;
            let o: DistanceOptions = cfg.options()?;
            let m = match (&o.m_spec, o.d) {
                (Some(src), None) => src.load(base)?,
                (None, Some(d)) if d >= 1 && d < x.rows => {
                    let first = *x.dist(0, 0);
                    EnsembleSpec::new(x.rows, x.rows - d, Profile::constant(first))
                }
                _ => return Err(CliError::Config("field `options`: give exactly one of `m_spec` and `d`".into())),
            };
            let c = distance_smallball_curve(&x, &m, cfg.require_grid()?, cfg.require_trials()?, seed)?;
            files.push(write_output(out, ".csv", &c.centered.to_csv())?);
            files.push(write_output(out, ".shifted.csv", &c.shifted.to_csv())?);
            files.push(write_metadata(out, &c.centered.metadata)?);
            let note = match fit_exponent(&c.centered.rows) {
                Ok(f) => format!("d={} slope={:.4}", c.d, f.slope),
                Err(e) => format!("d={} fit: {e}", c.d),
            };
            (c.centered.rows.len(), note)
        }
        "spread_infimum_proxy" => {
            let spec = cfg.require_spec(base)?;
            let o: ProxyOptions = cfg.options()?;
            let s = spread_proxy_distribution(&spec, &o.columns, o.probes, cfg.require_trials()?, seed)?;
            let mut csv = String::from("trial,proxy\n");
            for (i, v) in s.values.iter().enumerate() {
                csv.push_str(&format!("{i},{v}\n"));
            }
            files.push(write_output(out, ".csv", &csv)?);
            files.push(write_metadata(out, &Metadata::new(&spec, seed, op))?);
            (s.values.len(), format!("q10={:.4} median={:.4} q90={:.4}", s.q10, s.median, s.q90))
        }
        "check_assumptions" => {
            let spec = cfg.require_spec(base)?;
            let report = check_assumptions(&spec, cfg.trials.unwrap_or(100_000) as usize, Stream::from_seed(seed))?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            files.push(write_output(out, ".json", &(json + "\n"))?);
            files.push(write_metadata(out, &Metadata::new(&spec, seed, op))?);
            (report.checks.len(), String::new())
        }
        "bkappa" => {
            let o: BkappaOptions = cfg.options()?;
            let sol = solve_bkappa(o.matrix.as_deref(), o.y.as_deref(), o.kappa)?;
            let json = serde_json::to_string_pretty(&bkappa_json(&sol)).expect("json");
            files.push(write_output(out, ".json", &(json + "\n"))?);
            let (r, c) = match &o.matrix {
                Some(m) => (m.len(), m.first().map_or(0, |r| r.len())),
                None => (0, sol.weights.len()),
            };
            files.push(write_metadata(out, &bare_metadata(op, seed, r, c))?);
            (1, format!("value={}", sol.value))
        }
        other => return Err(CliError::Config(format!("field `operation`: unknown operation `{other}`"))),
    };
    Ok(RunReport { operation: op.to_string(), rows, files, note })
}
