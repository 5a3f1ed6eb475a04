//! Ad-hoc subcommands outside the config-driven runner: space construction
//! and inspection, and symbol-file parsing.

use std::path::Path;

use psdocalc_core::space::MetricMeasureSpace;
use psdocalc_core::symbols::parse_expr;

use crate::config::{MeasureConfig, SpaceConfig, SpaceKindConfig};
use crate::errors::{art, cfg, CliError, CliResult};
use crate::spacefile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KindArg {
    Cycle,
    Path,
    GridTorus,
    BinaryTree,
    Sierpinski,
}

impl From<KindArg> for SpaceKindConfig {
    fn from(k: KindArg) -> SpaceKindConfig {
        match k {
            KindArg::Cycle => SpaceKindConfig::Cycle,
            KindArg::Path => SpaceKindConfig::Path,
            KindArg::GridTorus => SpaceKindConfig::GridTorus,
            KindArg::BinaryTree => SpaceKindConfig::BinaryTree,
            KindArg::Sierpinski => SpaceKindConfig::Sierpinski,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MeasureArg {
    Counting,
    Degree,
}

impl From<MeasureArg> for MeasureConfig {
    fn from(m: MeasureArg) -> MeasureConfig {
        match m {
            MeasureArg::Counting => MeasureConfig::Counting,
            MeasureArg::Degree => MeasureConfig::Degree,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn space_build(
    kind: KindArg,
    n: Option<usize>,
    nx: Option<usize>,
    ny: Option<usize>,
    levels: Option<usize>,
    level: Option<usize>,
    measure: MeasureArg,
    out: &Path,
) -> CliResult<()> {
    let sc = SpaceConfig { kind: kind.into(), n, nx, ny, levels, level, measure: measure.into() };
    let (spec, mk) = sc.to_spec().map_err(CliError::Config)?;
    let space = MetricMeasureSpace::build(spec, mk).map_err(cfg)?;
    spacefile::save_space(&space, out)?;
    println!("wrote {}: {} points, {} edges", out.display(), space.n, space.edges.len());
    Ok(())
}

pub fn space_stats(file: &Path) -> CliResult<()> {
    let space = spacefile::load_space(file)?;
    let total: f64 = space.measure.iter().sum();
    println!("points:        {}", space.n);
    println!("edges:         {}", space.edges.len());
    println!("diameter:      {}", space.diameter);
    println!("measure:       {:?} (total {total})", space.measure_kind);
    println!("features/pt:   {}", space.features.first().map_or(0, Vec::len));
    match space.doubling_profile(&space.default_doubling_radii()) {
        Ok(prof) => println!("doubling fit:  n = {:.6}, R2 = {:.6}", prof.n_fit, prof.r2),
        // too few usable radii on a very small diameter
        Err(_) => println!("doubling fit:  n/a (space too small)"),
    }
    Ok(())
}

pub fn sym_parse(file: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| art(format!("{}: {e}", file.display())))?;
    let (class, expr_text) =
        crate::symfile::parse_symbol_file(&text).map_err(|e| cfg(format!("{}: {e}", file.display())))?;
    let expr = parse_expr(&expr_text).map_err(|e| cfg(format!("{}: {e}", file.display())))?;
    println!("class: s={} rho={} delta={}", class.s, class.rho, class.delta);
    println!("expr:  {expr_text}");
    match expr.max_feature() {
        Some(k) => println!("uses point features up to x{k}"),
        None => println!("uses no point features (pure spectral multiplier)"),
    }
    Ok(())
}
