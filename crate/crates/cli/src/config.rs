//! Experiment configuration: strict TOML schema (unknown keys rejected) plus
//! recipe-scope validation so a section or knob a recipe does not read is an
//! error rather than silently ignored.

use std::collections::BTreeMap;

use psdocalc_core::space::{MeasureKind, SpaceSpec};
use serde::Deserialize;

use crate::spacefile::OperatorChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum RecipeId {
    #[serde(rename = "heat-decay")]
    HeatDecay,
    #[serde(rename = "lemma-multiplier")]
    LemmaMultiplier,
    #[serde(rename = "decompose-decay")]
    DecomposeDecay,
    #[serde(rename = "thm-s10")]
    ThmS10,
    #[serde(rename = "thm-s1delta")]
    ThmS1Delta,
    #[serde(rename = "prop-dual-slope")]
    PropDualSlope,
    #[serde(rename = "t1-correlation")]
    T1Correlation,
    #[serde(rename = "paraproduct-bound")]
    ParaproductBound,
    #[serde(rename = "assumption-checks")]
    AssumptionChecks,
}

impl RecipeId {
    pub fn name(self) -> &'static str {
        match self {
            RecipeId::HeatDecay => "heat-decay",
            RecipeId::LemmaMultiplier => "lemma-multiplier",
            RecipeId::DecomposeDecay => "decompose-decay",
            RecipeId::ThmS10 => "thm-s10",
            RecipeId::ThmS1Delta => "thm-s1delta",
            RecipeId::PropDualSlope => "prop-dual-slope",
            RecipeId::T1Correlation => "t1-correlation",
            RecipeId::ParaproductBound => "paraproduct-bound",
            RecipeId::AssumptionChecks => "assumption-checks",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKindConfig {
    Cycle,
    Path,
    GridTorus,
    BinaryTree,
    Sierpinski,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeasureConfig {
    #[default]
    Counting,
    Degree,
}

impl From<MeasureConfig> for MeasureKind {
    fn from(m: MeasureConfig) -> MeasureKind {
        match m {
            MeasureConfig::Counting => MeasureKind::Counting,
            MeasureConfig::Degree => MeasureKind::Degree,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub kind: SpaceKindConfig,
    pub n: Option<usize>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub levels: Option<usize>,
    pub level: Option<usize>,
    #[serde(default)]
    pub measure: MeasureConfig,
}

impl SpaceConfig {
    /// Resolve to a concrete spec, requiring exactly the parameters of the
    /// chosen kind.
    pub fn to_spec(&self) -> Result<(SpaceSpec, MeasureKind), String> {
        let want = |field: &str, v: Option<usize>| {
            v.ok_or_else(|| format!("space.{field} is required for this kind"))
        };
        let reject = |field: &str, v: Option<usize>| {
            if v.is_some() {
                Err(format!("space.{field} is not used by this kind"))
            } else {
                Ok(())
            }
        };
        let spec = match self.kind {
            SpaceKindConfig::Cycle => {
                reject("nx", self.nx)?;
                reject("ny", self.ny)?;
                reject("levels", self.levels)?;
                reject("level", self.level)?;
                SpaceSpec::Cycle { n: want("n", self.n)? }
            }
            SpaceKindConfig::Path => {
                reject("nx", self.nx)?;
                reject("ny", self.ny)?;
                reject("levels", self.levels)?;
                reject("level", self.level)?;
                SpaceSpec::Path { n: want("n", self.n)? }
            }
            SpaceKindConfig::GridTorus => {
                reject("n", self.n)?;
                reject("levels", self.levels)?;
                reject("level", self.level)?;
                SpaceSpec::GridTorus { nx: want("nx", self.nx)?, ny: want("ny", self.ny)? }
            }
            SpaceKindConfig::BinaryTree => {
                reject("n", self.n)?;
                reject("nx", self.nx)?;
                reject("ny", self.ny)?;
                reject("level", self.level)?;
                SpaceSpec::BinaryTree { levels: want("levels", self.levels)? }
            }
            SpaceKindConfig::Sierpinski => {
                reject("n", self.n)?;
                reject("nx", self.nx)?;
                reject("ny", self.ny)?;
                reject("levels", self.levels)?;
                SpaceSpec::Sierpinski { level: want("level", self.level)? }
            }
        };
        Ok((spec, self.measure.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKindConfig {
    GraphLaplacian,
    DivergenceForm,
    SubLaplacian,
}

impl From<OperatorKindConfig> for OperatorChoice {
    fn from(k: OperatorKindConfig) -> OperatorChoice {
        match k {
            OperatorKindConfig::GraphLaplacian => OperatorChoice::GraphLaplacian,
            OperatorKindConfig::DivergenceForm => OperatorChoice::DivergenceForm,
            OperatorKindConfig::SubLaplacian => OperatorChoice::SubLaplacian,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: OperatorKindConfig,
    /// Constant edge coefficient of the divergence form.
    pub coeff: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub builtin: Option<String>,
    pub expr: Option<String>,
    pub s: Option<f64>,
    pub rho: Option<f64>,
    pub delta: Option<f64>,
}

impl SymbolConfig {
    pub fn validate(&self) -> Result<(), String> {
        match (&self.builtin, &self.expr) {
            (Some(_), Some(_)) => Err("symbol.builtin and symbol.expr are mutually exclusive".into()),
            (None, None) => Err("symbol needs either builtin or expr".into()),
            (Some(_), None) => {
                if self.s.is_some() || self.rho.is_some() || self.delta.is_some() {
                    Err("symbol class parameters only apply to symbol.expr".into())
                } else {
                    Ok(())
                }
            }
            (None, Some(_)) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub q_per_octave: Option<usize>,
    pub l_max: Option<usize>,
    pub t_grid: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamConfig {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub nu: Option<f64>,
    pub base_center: Option<usize>,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub x_grid: Option<Vec<f64>>,
    pub draws: Option<usize>,
    pub m_exp: Option<usize>,
    pub m_param: Option<usize>,
    pub m0: Option<usize>,
    pub kappa: Option<f64>,
    pub center_stride: Option<usize>,
    pub j_lo: Option<i64>,
    pub j_hi: Option<i64>,
    pub shell_order: Option<u32>,
    pub probe_extra: Option<usize>,
    pub amplitudes: Option<Vec<f64>>,
}

fn default_max_points() -> usize {
    2048
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub recipe: Option<RecipeId>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: String,
    /// Resource limit: largest space the run may build.
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    pub space: Option<SpaceConfig>,
    pub operator: Option<OperatorConfig>,
    pub symbol: Option<SymbolConfig>,
    pub grids: Option<GridConfig>,
    pub params: Option<ParamConfig>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

/// Which config sections and knobs a recipe reads.
struct Scope {
    space: bool,
    space_required: bool,
    operator: bool,
    symbol: bool,
    grids: &'static [&'static str],
    params: &'static [&'static str],
}

fn scope(recipe: Option<RecipeId>) -> Scope {
    let none: &'static [&'static str] = &[];
    match recipe {
        None => Scope {
            space: true,
            space_required: true,
            operator: true,
            symbol: true,
            grids: none,
            params: &["p", "q"],
        },
        Some(RecipeId::HeatDecay) => Scope {
            space: true,
            space_required: false,
            operator: true,
            symbol: false,
            grids: &["t_grid"],
            params: &["p", "q", "base_center", "x_lo", "x_hi"],
        },
        Some(RecipeId::LemmaMultiplier) => Scope {
            space: true,
            space_required: false,
            operator: true,
            symbol: false,
            grids: &["t_grid"],
            params: &["nu", "p", "q", "base_center", "x_grid"],
        },
        Some(RecipeId::DecomposeDecay) => Scope {
            space: true,
            space_required: false,
            operator: true,
            symbol: true,
            grids: &["l_max", "q_per_octave"],
            params: &["probe_extra"],
        },
        Some(RecipeId::ThmS10) | Some(RecipeId::ThmS1Delta) => Scope {
            space: false,
            space_required: false,
            operator: true,
            symbol: true,
            grids: &["sizes"],
            params: &["p", "q"],
        },
        Some(RecipeId::PropDualSlope) => Scope {
            space: true,
            space_required: false,
            operator: true,
            symbol: false,
            grids: none,
            params: &["j_lo", "j_hi", "shell_order"],
        },
        Some(RecipeId::T1Correlation) => Scope {
            space: true,
            space_required: false,
            operator: true,
            symbol: false,
            grids: &["radii"],
            params: &["m_param", "probe_extra", "amplitudes"],
        },
        Some(RecipeId::ParaproductBound) => Scope {
            space: true,
            space_required: false,
            operator: true,
            symbol: false,
            grids: &["q_per_octave"],
            params: &["m_exp", "draws"],
        },
        Some(RecipeId::AssumptionChecks) => Scope {
            space: false,
            space_required: false,
            operator: false,
            symbol: false,
            grids: none,
            params: &["m0", "kappa", "draws", "center_stride"],
        },
    }
}

fn grid_fields(g: &GridConfig) -> [(&'static str, bool); 5] {
    [
        ("q_per_octave", g.q_per_octave.is_some()),
        ("l_max", g.l_max.is_some()),
        ("t_grid", g.t_grid.is_some()),
        ("radii", g.radii.is_some()),
        ("sizes", g.sizes.is_some()),
    ]
}

fn param_fields(p: &ParamConfig) -> [(&'static str, bool); 18] {
    [
        ("p", p.p.is_some()),
        ("q", p.q.is_some()),
        ("nu", p.nu.is_some()),
        ("base_center", p.base_center.is_some()),
        ("x_lo", p.x_lo.is_some()),
        ("x_hi", p.x_hi.is_some()),
        ("x_grid", p.x_grid.is_some()),
        ("draws", p.draws.is_some()),
        ("m_exp", p.m_exp.is_some()),
        ("m_param", p.m_param.is_some()),
        ("m0", p.m0.is_some()),
        ("kappa", p.kappa.is_some()),
        ("center_stride", p.center_stride.is_some()),
        ("j_lo", p.j_lo.is_some()),
        ("j_hi", p.j_hi.is_some()),
        ("shell_order", p.shell_order.is_some()),
        ("probe_extra", p.probe_extra.is_some()),
        ("amplitudes", p.amplitudes.is_some()),
    ]
}

impl ExperimentConfig {
    pub fn recipe_name(&self) -> &'static str {
        self.recipe.map_or("direct", RecipeId::name)
    }

    /// Cross-field validation beyond the serde schema.
    pub fn validate(&self) -> Result<(), String> {
        let sc = scope(self.recipe);
        let label = self.recipe_name();
        if self.output_dir.is_empty() {
            return Err("output_dir must not be empty".into());
        }
        if self.max_points == 0 {
            return Err("max_points must be positive".into());
        }
        if let Some(space) = &self.space {
            if !sc.space {
                return Err(format!("recipe {label} does not use a [space] section"));
            }
            space.to_spec()?;
        } else if sc.space_required {
            return Err(format!("{label} experiments need a [space] section"));
        }
        if let Some(op) = &self.operator {
            if !sc.operator {
                return Err(format!("recipe {label} does not use an [operator] section"));
            }
            if op.coeff.is_some() && op.kind != OperatorKindConfig::DivergenceForm {
                return Err("operator.coeff only applies to kind = \"divergence_form\"".into());
            }
        }
        if let Some(sym) = &self.symbol {
            if !sc.symbol {
                return Err(format!("recipe {label} does not use a [symbol] section"));
            }
            sym.validate()?;
        }
        if let Some(g) = &self.grids {
            for (name, present) in grid_fields(g) {
                if present && !sc.grids.contains(&name) {
                    return Err(format!("recipe {label} does not use grids.{name}"));
                }
            }
        }
        if let Some(p) = &self.params {
            for (name, present) in param_fields(p) {
                if present && !sc.params.contains(&name) {
                    return Err(format!("recipe {label} does not use params.{name}"));
                }
            }
        }
        Ok(())
    }
}
