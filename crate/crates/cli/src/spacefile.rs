//! Space file format and operator construction shared by subcommands and
//! recipes. A space file is JSON holding the generating parameters plus the
//! derived graph data for inspection; loading rebuilds the space from those
//! parameters (BFS distances included) and cross-checks the stored graph
//! against the rebuild.

use std::path::Path;

use psdocalc_core::operator::{
    divergence_form_const, graph_laplacian, sub_laplacian, SelfAdjointOperator,
};
use psdocalc_core::space::{MeasureKind, MetricMeasureSpace, SpaceSpec};
use serde::{Deserialize, Serialize};

use crate::errors::{art, cfg, CliError, CliResult};

pub const SPACE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    pub schema_version: u32,
    pub kind: SpaceSpec,
    pub measure_kind: MeasureKind,
    pub size: usize,
    pub edges: Vec<(usize, usize)>,
    pub measure: Vec<f64>,
    /// Per-point smooth coordinate features, as exposed to symbol expressions.
    pub points: Vec<Vec<f64>>,
}

pub fn space_json_bytes(space: &MetricMeasureSpace) -> CliResult<Vec<u8>> {
    let file = SpaceFile {
        schema_version: SPACE_SCHEMA_VERSION,
        kind: space.spec.clone(),
        measure_kind: space.measure_kind,
        size: space.n,
        edges: space.edges.clone(),
        measure: space.measure.clone(),
        points: space.features.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(art)?;
    text.push('\n');
    Ok(text.into_bytes())
}

pub fn save_space(space: &MetricMeasureSpace, path: &Path) -> CliResult<()> {
    let bytes = space_json_bytes(space)?;
    std::fs::write(path, bytes).map_err(|e| art(format!("{}: {e}", path.display())))
}

pub fn load_space(path: &Path) -> CliResult<MetricMeasureSpace> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| art(format!("{}: {e}", path.display())))?;
    let file: SpaceFile = serde_json::from_str(&text)
        .map_err(|e| art(format!("{}: invalid space file: {e}", path.display())))?;
    if file.schema_version != SPACE_SCHEMA_VERSION {
        return Err(art(format!(
            "{}: space schema version {} (expected {SPACE_SCHEMA_VERSION})",
            path.display(),
            file.schema_version
        )));
    }
    let space = MetricMeasureSpace::build(file.kind, file.measure_kind).map_err(art)?;
    if space.n != file.size || space.edges != file.edges || space.measure != file.measure {
        return Err(art(format!(
            "{}: stored graph data disagrees with its generating spec",
            path.display()
        )));
    }
    Ok(space)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorChoice {
    GraphLaplacian,
    DivergenceForm,
    SubLaplacian,
}

/// Build the configured operator; `coeff` is the constant edge coefficient of
/// the divergence form and must be absent otherwise.
pub fn build_operator(
    space: &MetricMeasureSpace,
    choice: OperatorChoice,
    coeff: Option<f64>,
) -> CliResult<SelfAdjointOperator> {
    if coeff.is_some() && choice != OperatorChoice::DivergenceForm {
        return Err(CliError::Config(
            "coeff only applies to the divergence-form operator".into(),
        ));
    }
    match choice {
        OperatorChoice::GraphLaplacian => Ok(graph_laplacian(space)),
        OperatorChoice::DivergenceForm => {
            let c = coeff.unwrap_or(1.0);
            if !(c > 0.0) {
                return Err(CliError::Config("coeff must be positive".into()));
            }
            divergence_form_const(space, c).map_err(cfg)
        }
        OperatorChoice::SubLaplacian => Ok(sub_laplacian(space).map_err(cfg)?.0),
    }
}

/// Node count of a spec without building it, for resource limits.
pub fn spec_node_count(spec: &SpaceSpec) -> usize {
    match *spec {
        SpaceSpec::Cycle { n } | SpaceSpec::Path { n } => n,
        SpaceSpec::GridTorus { nx, ny } => nx.saturating_mul(ny),
        SpaceSpec::BinaryTree { levels } => (1usize << (levels + 1).min(60)) - 1,
        SpaceSpec::Sierpinski { level } => (3usize.pow(level.min(12) as u32 + 1) + 3) / 2,
    }
}
