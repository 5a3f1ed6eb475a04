//! Summarize a completed run directory: one human-readable text file plus a
//! machine CSV, both derived only from the run's artifacts so repeated
//! invocations are byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::artifacts::{fmt_e, read_manifest};
use crate::errors::{art, CliError, CliResult};

#[derive(Deserialize)]
struct Results {
    metrics: BTreeMap<String, f64>,
}

/// One parsed row of checks.csv: key,metric,value,cmp,threshold,status.
struct CheckRow {
    key: String,
    metric: String,
    value: String,
    cmp: String,
    threshold: String,
    status: String,
}

fn read_checks(dir: &Path) -> CliResult<Vec<CheckRow>> {
    let path = dir.join("checks.csv");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|e| art(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(art(format!("{}: malformed row {line:?}", path.display())));
        }
        rows.push(CheckRow {
            key: parts[0].to_string(),
            metric: parts[1].to_string(),
            value: parts[2].to_string(),
            cmp: parts[3].to_string(),
            threshold: parts[4].to_string(),
            status: parts[5].to_string(),
        });
    }
    Ok(rows)
}

pub fn report_dir(dir: &Path) -> CliResult<()> {
    let manifest = read_manifest(dir)?;
    let results_path = dir.join("results.json");
    let text = std::fs::read_to_string(&results_path)
        .map_err(|e| art(format!("{}: {e}", results_path.display())))?;
    let results: Results = serde_json::from_str(&text)
        .map_err(|e| art(format!("{}: invalid results file: {e}", results_path.display())))?;
    let checks = read_checks(dir)?;
    let n_fail = checks.iter().filter(|c| c.status == "FAIL").count();
    let overall = if n_fail == 0 { "PASS" } else { "FAIL" };

    let mut txt = String::new();
    txt.push_str("run summary\n===========\n");
    txt.push_str(&format!("recipe:       {}\n", manifest.recipe));
    txt.push_str(&format!("seed:         {}\n", manifest.seed));
    txt.push_str(&format!("tool version: {}\n", manifest.tool_version));
    txt.push_str(&format!("config hash:  {}\n", manifest.config_sha256));
    txt.push_str("\nmetrics\n-------\n");
    for (k, &v) in &results.metrics {
        txt.push_str(&format!("{k} = {}\n", fmt_e(v)));
    }
    txt.push_str("\nchecks\n------\n");
    if checks.is_empty() {
        txt.push_str("(none configured)\n");
    }
    for c in &checks {
        txt.push_str(&format!(
            "{}: {} = {} ({} {}): {}\n",
            c.key, c.metric, c.value, c.cmp, c.threshold, c.status
        ));
    }
    txt.push_str("\nartifacts\n---------\n");
    for a in &manifest.artifacts {
        txt.push_str(a);
        txt.push('\n');
    }
    txt.push_str(&format!("\noverall: {overall}\n"));

    let mut csv = String::from("key,metric,value,cmp,threshold,status\n");
    for c in &checks {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.key, c.metric, c.value, c.cmp, c.threshold, c.status
        ));
    }
    for (k, &v) in &results.metrics {
        if !checks.iter().any(|c| &c.metric == k) {
            csv.push_str(&format!(",{k},{},,,\n", fmt_e(v)));
        }
    }

    let txt_path = dir.join("summary.txt");
    std::fs::write(&txt_path, &txt).map_err(|e| art(format!("{}: {e}", txt_path.display())))?;
    let csv_path = dir.join("summary.csv");
    std::fs::write(&csv_path, &csv).map_err(|e| art(format!("{}: {e}", csv_path.display())))?;
    print!("{txt}");

    if n_fail > 0 {
        return Err(CliError::Tolerance(format!("{n_fail} recorded check(s) failed")));
    }
    Ok(())
}
