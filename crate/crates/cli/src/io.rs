//! CSV input and result files.

use std::path::Path;

use sigmafloor_core::montecarlo::Metadata;

use crate::CliError;

/// Reads `path`, or standard input for `-`.
pub fn read_input(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)
            .map_err(|e| CliError::Config(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<Vec<f64>, CliError> {
    line.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("line {lineno}: `{}`: {e}", f.trim())))
        })
        .collect()
}

/// Row-major matrix, one row per line, no header.
pub fn parse_csv_matrix(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, i + 1))
        .collect::<Result<_, _>>()?;
    if rows.is_empty() {
        return Err(CliError::Config("empty matrix".into()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Config("ragged matrix rows".into()));
    }
    Ok(rows)
}

/// Single vector on one CSV line.
pub fn parse_csv_vector(text: &str) -> Result<Vec<f64>, CliError> {
    let rows = parse_csv_matrix(text)?;
    if rows.len() != 1 {
        return Err(CliError::Config(format!("expected one line, got {}", rows.len())));
    }
    Ok(rows.into_iter().next().unwrap_or_default())
}

pub fn write_matrix_csv(rows: &[Vec<f64>]) -> String {
    rows.iter()
        .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Writes `{prefix}{suffix}` and returns the path.
pub fn write_output(prefix: &str, suffix: &str, contents: &str) -> Result<String, CliError> {
    let path = format!("{prefix}{suffix}");
    write(Path::new(&path), contents)?;
    Ok(path)
}

/// Writes `{prefix}.meta.json`.
pub fn write_metadata(prefix: &str, meta: &Metadata) -> Result<String, CliError> {
    write_output(prefix, ".meta.json", &(meta.to_json() + "\n"))
}
