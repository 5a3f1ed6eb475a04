//! Symbol sources: expression text files with a class header, and the
//! builtin symbol table.
//!
//! File format: comment lines start with `#`; an optional first line
//! `class: s=<num> rho=<num> delta=<num>` (each pair optional) sets the
//! class; the remaining non-comment lines joined together are the
//! expression.

use psdocalc_core::space::MetricMeasureSpace;
use psdocalc_core::symbols::{Symbol, SymbolClass};

use crate::errors::{cfg, CliError, CliResult};

pub fn parse_class_pairs(line: &str) -> Result<SymbolClass, String> {
    let mut class = SymbolClass::order_zero();
    for pair in line.split_whitespace() {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| format!("expected key=value in class header, got {pair:?}"))?;
        let v: f64 = value
            .parse()
            .map_err(|_| format!("invalid number {value:?} for {key} in class header"))?;
        match key {
            "s" => class.s = v,
            "rho" => class.rho = v,
            "delta" => class.delta = v,
            other => return Err(format!("unknown class parameter {other:?} (use s, rho, delta)")),
        }
    }
    Ok(class)
}

/// Split a symbol file into its class and expression text.
pub fn parse_symbol_file(text: &str) -> Result<(SymbolClass, String), String> {
    let mut class = SymbolClass::order_zero();
    let mut expr_parts: Vec<&str> = Vec::new();
    let mut saw_content = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_content {
            saw_content = true;
            if let Some(rest) = line.strip_prefix("class:") {
                class = parse_class_pairs(rest)?;
                continue;
            }
        }
        expr_parts.push(line);
    }
    if expr_parts.is_empty() {
        return Err("symbol file has no expression".into());
    }
    Ok((class, expr_parts.join(" ")))
}

pub const BUILTIN_IDS: [&str; 5] =
    ["one", "feature-contrast", "test-s10", "sqrt-weight", "delta-half-family"];

/// Size-aware oscillatory family in the rho = 1, delta = 1/2 class: bumps on
/// dyadic frequency bands riding on x-oscillations whose wavenumber is tied
/// to the band's spectral scale.
fn delta_half_family(n: usize) -> Symbol {
    let nf = n as f64;
    Symbol::real_fn(
        "delta-half-family",
        move |x, xi| {
            let mut acc = 1.0;
            for j in -1i32..=2 {
                let lam = 2f64.powi(j).sqrt().min(3.9);
                let k = ((nf * (1.0 - lam / 2.0).acos() / (2.0 * std::f64::consts::PI)).round()
                    as usize)
                    .max(1);
                let bump = if xi > 0.0 {
                    let r = (xi / 2f64.powi(j)).ln();
                    (-4.0 * r * r).exp()
                } else {
                    0.0
                };
                acc += 0.3 * (2.0 * std::f64::consts::PI * k as f64 * x as f64 / nf).cos() * bump;
            }
            acc
        },
        SymbolClass { s: 0.0, rho: 1.0, delta: 0.5 },
    )
}

pub fn builtin_symbol(id: &str, space: &MetricMeasureSpace) -> CliResult<Symbol> {
    match id {
        "one" => Ok(Symbol::multiplier("one", |_| 1.0, SymbolClass::order_zero())),
        "feature-contrast" => {
            Symbol::from_expr_str("(1 + 0.5 * x0) * xi / (1 + xi)", space, SymbolClass::order_zero())
                .map_err(cfg)
        }
        "test-s10" => {
            Symbol::from_expr_str("1 + 0.5 * x0 * xi / (1 + xi)", space, SymbolClass::order_zero())
                .map_err(cfg)
        }
        "sqrt-weight" => Symbol::from_expr_str(
            "(1 + xi)^0.5",
            space,
            SymbolClass { s: 1.0, rho: 1.0, delta: 0.0 },
        )
        .map_err(cfg),
        "delta-half-family" => Ok(delta_half_family(space.n)),
        other => Err(CliError::Config(format!(
            "unknown builtin symbol {other:?} (available: {})",
            BUILTIN_IDS.join(", ")
        ))),
    }
}
