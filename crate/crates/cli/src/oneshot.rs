//! Flag-driven tools: `bkappa`, `classify`, `concentration`.

use sigmafloor_core::anticoncentration::levy_concentration;
use sigmafloor_core::ensembles::{Family, ScalarDistribution};
use sigmafloor_core::sphere::classify;
use sigmafloor_core::Stream;

use crate::io::{parse_csv_matrix, parse_csv_vector};
use crate::run::{bkappa_json, solve_bkappa};
use crate::CliError;

/// Input is a CSV matrix, or JSON: an array `y` or `{"y": [...]}`.
pub fn bkappa_from_text(text: &str, kappa: f64) -> Result<serde_json::Value, CliError> {
    let t = text.trim_start();
    let sol = if t.starts_with('[') || t.starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(t).map_err(|e| CliError::Config(e.to_string()))?;
        let arr = match &v {
            serde_json::Value::Object(m) if m.len() == 1 && m.contains_key("y") => &m["y"],
            serde_json::Value::Array(_) => &v,
            _ => return Err(CliError::Config("JSON input must be an array y or {\"y\": [...]}".into())),
        };
        let y: Vec<f64> = serde_json::from_value(arr.clone()).map_err(|e| CliError::Config(format!("y: {e}")))?;
        solve_bkappa(None, Some(&y), kappa)?
    } else {
        let rows = parse_csv_matrix(t)?;
        solve_bkappa(Some(&rows), None, kappa)?
    };
    Ok(bkappa_json(&sol))
}

pub fn classify_from_text(text: &str, delta: f64, rho: f64) -> Result<serde_json::Value, CliError> {
    let x = parse_csv_vector(text)?;
    let c = classify(&x, delta, rho)?;
    Ok(serde_json::to_value(c).expect("classification serializes"))
}

/// `--dist` accepts a family name or an inline distribution JSON object.
pub fn parse_distribution(arg: &str, alpha: Option<f64>) -> Result<ScalarDistribution, CliError> {
    let d = if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| CliError::Config(format!("--dist: {e}")))?
    } else {
        let family: Family = serde_json::from_value(serde_json::Value::String(arg.to_string()))
            .map_err(|e| CliError::Config(format!("--dist: {e}")))?;
        let mut d = ScalarDistribution::standard(family);
        d.alpha = alpha;
        d
    };
    d.validate()?;
    Ok(d)
}

pub fn concentration(dist: &ScalarDistribution, radius: f64, samples: usize, seed: u64) -> Result<serde_json::Value, CliError> {
    let mut rng = Stream::from_seed(seed).tagged("concentration").rng();
    let mut xs: Vec<f64> = (0..samples).map(|_| dist.sample(&mut rng)).collect();
    xs.sort_by(f64::total_cmp);
    let est = levy_concentration(&xs, radius)?;
    let mut v = serde_json::to_value(est).expect("estimate serializes");
    v["distribution"] = serde_json::to_value(dist).expect("distribution serializes");
    v["seed"] = seed.into();
    Ok(v)
}
