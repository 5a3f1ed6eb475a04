//! Tolerance evaluation: tolerance keys are `min_<metric>` or `max_<metric>`
//! and bound the named metric from below or above. Recipe defaults merge
//! with the config's `[tolerances]` table, config entries winning.

use std::collections::BTreeMap;

use crate::artifacts::fmt_e;
use crate::errors::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Check {
    pub key: String,
    pub metric: String,
    pub value: f64,
    /// "<=" for max_ keys, ">=" for min_ keys.
    pub cmp: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn status(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }

    pub fn human_line(&self) -> String {
        format!(
            "{} = {} ({} {}): {}",
            self.metric,
            fmt_e(self.value),
            self.cmp,
            fmt_e(self.threshold),
            self.status()
        )
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.key,
            self.metric,
            fmt_e(self.value),
            self.cmp,
            fmt_e(self.threshold),
            self.status()
        )
    }
}

pub fn merge(
    defaults: &[(&str, f64)],
    overrides: &BTreeMap<String, f64>,
) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> =
        defaults.iter().map(|&(k, v)| (k.to_string(), v)).collect();
    for (k, &v) in overrides {
        out.insert(k.clone(), v);
    }
    out
}

/// Evaluate every tolerance against the metric table; unknown metric names
/// are a config error.
pub fn evaluate(
    metrics: &BTreeMap<String, f64>,
    tolerances: &BTreeMap<String, f64>,
) -> CliResult<Vec<Check>> {
    let mut checks = Vec::with_capacity(tolerances.len());
    for (key, &threshold) in tolerances {
        let (metric, is_min) = if let Some(m) = key.strip_prefix("min_") {
            (m, true)
        } else if let Some(m) = key.strip_prefix("max_") {
            (m, false)
        } else {
            return Err(CliError::Config(format!(
                "tolerance key {key:?} must start with min_ or max_"
            )));
        };
        let value = *metrics.get(metric).ok_or_else(|| {
            CliError::Config(format!(
                "tolerance key {key:?} does not match a metric of this run (metrics: {})",
                metrics.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })?;
        let pass = if is_min { value >= threshold } else { value <= threshold };
        checks.push(Check {
            key: key.clone(),
            metric: metric.to_string(),
            value,
            cmp: if is_min { ">=" } else { "<=" },
            threshold,
            pass,
        });
    }
    Ok(checks)
}

/// Sample Pearson correlation; 0 on degenerate input.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_and_max_directions() {
        let metrics: BTreeMap<String, f64> = [("rate".to_string(), 0.5)].into();
        let tols: BTreeMap<String, f64> =
            [("min_rate".to_string(), 0.1), ("max_rate".to_string(), 0.4)].into();
        let checks = evaluate(&metrics, &tols).unwrap();
        assert_eq!(checks.len(), 2);
        let max = checks.iter().find(|c| c.key == "max_rate").unwrap();
        let min = checks.iter().find(|c| c.key == "min_rate").unwrap();
        assert!(!max.pass);
        assert!(min.pass);
    }

    #[test]
    fn unknown_metric_is_config_error() {
        let metrics: BTreeMap<String, f64> = [("rate".to_string(), 0.5)].into();
        let tols: BTreeMap<String, f64> = [("min_nope".to_string(), 0.1)].into();
        assert!(matches!(evaluate(&metrics, &tols), Err(CliError::Config(_))));
    }

    #[test]
    fn unprefixed_key_is_config_error() {
        let metrics: BTreeMap<String, f64> = BTreeMap::new();
        let tols: BTreeMap<String, f64> = [("rate".to_string(), 0.1)].into();
        assert!(matches!(evaluate(&metrics, &tols), Err(CliError::Config(_))));
    }

    #[test]
    fn override_wins_on_merge() {
        let merged = merge(&[("min_r", 1.0), ("max_r", 2.0)], &[("min_r".to_string(), 0.5)].into());
        assert_eq!(merged["min_r"], 0.5);
        assert_eq!(merged["max_r"], 2.0);
    }

    #[test]
    fn pearson_exact_line() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [2.0, 4.0, 6.0];
        assert!((pearson(&xs, &ys) - 1.0).abs() < 1e-14);
        let yd = [6.0, 4.0, 2.0];
        assert!((pearson(&xs, &yd) + 1.0).abs() < 1e-14);
    }
}
