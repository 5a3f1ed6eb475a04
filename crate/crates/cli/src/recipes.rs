//! Configuration-driven experiment runner: the built-in recipes plus the
//! direct (recipe-less) experiment. Each recipe writes its CSV artifacts and
//! a metric table; tolerances (recipe defaults merged with the config) gate
//! the exit code. Independent measurements run on the rayon pool; all writes
//! happen on this thread.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use psdocalc_core::bmo;
use psdocalc_core::calculus::PartitionOfUnity;
use psdocalc_core::operator::{
    eigendecompose, heat_decay_report, per_scale_envelope, power_offdiag_report, SpectralData,
};
use psdocalc_core::psido;
use psdocalc_core::sobolev;
use psdocalc_core::space::{MeasureKind, MetricMeasureSpace, SpaceSpec};
use psdocalc_core::symbols::{self, Symbol, SymbolClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::artifacts::{fmt_e, sha256_hex, ArtifactDir};
use crate::config::{ExperimentConfig, RecipeId, SymbolConfig};
use crate::errors::{art, cfg, CliError, CliResult};
use crate::spacefile::{self, OperatorChoice};
use crate::symfile;
use crate::tolerance::{self, pearson};
use crate::witness;

type Metrics = BTreeMap<String, f64>;

pub fn run_config(path: &Path) -> CliResult<()> {
    let raw = std::fs::read(path).map_err(|e| art(format!("{}: {e}", path.display())))?;
    let sha = sha256_hex(&raw);
    let text = std::str::from_utf8(&raw)
        .map_err(|_| CliError::Config(format!("{}: config is not UTF-8", path.display())))?;
    let config: ExperimentConfig = toml::from_str(text)
        .map_err(|e| CliError::Config(format!("{}:\n{e}", path.display())))?;
    config.validate().map_err(CliError::Config)?;

    let mut dir = ArtifactDir::create(Path::new(&config.output_dir))?;
    dir.write_bytes("config.toml", &raw)?;
    let (metrics, defaults) = dispatch(&config, &mut dir)?;
    dir.write_results(&metrics)?;
    let merged = tolerance::merge(defaults, &config.tolerances);
    let checks = tolerance::evaluate(&metrics, &merged)?;
    let check_rows: Vec<String> = checks.iter().map(tolerance::Check::csv_row).collect();
    dir.write_csv("checks.csv", "key,metric,value,cmp,threshold,status", &check_rows)?;
    for check in &checks {
        println!("{}", check.human_line());
    }
    let out_dir = dir.path().display().to_string();
    dir.finish(config.recipe_name(), config.seed, &sha)?;
    println!("run {} complete: artifacts in {}", config.recipe_name(), out_dir);
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Tolerance(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

fn dispatch(
    config: &ExperimentConfig,
    dir: &mut ArtifactDir,
) -> CliResult<(Metrics, &'static [(&'static str, f64)])> {
    match config.recipe {
        None => direct(config, dir),
        Some(RecipeId::HeatDecay) => heat_decay(config, dir),
        Some(RecipeId::LemmaMultiplier) => lemma_multiplier(config, dir),
        Some(RecipeId::DecomposeDecay) => decompose_decay(config, dir),
        Some(RecipeId::ThmS10) => thm_uniform(config, dir, "test-s10", 51),
        Some(RecipeId::ThmS1Delta) => thm_uniform(config, dir, "delta-half-family", 52),
        Some(RecipeId::PropDualSlope) => prop_dual_slope(config, dir),
        Some(RecipeId::T1Correlation) => t1_correlation(config, dir),
        Some(RecipeId::ParaproductBound) => paraproduct_bound(config, dir),
        Some(RecipeId::AssumptionChecks) => assumption_checks(config, dir),
    }
}

// ---------------------------------------------------------------------------
// Shared resolution helpers
// ---------------------------------------------------------------------------

fn check_budget(spec: &SpaceSpec, max_points: usize) -> CliResult<()> {
    let n = spacefile::spec_node_count(spec);
    if n > max_points {
        return Err(CliError::Config(format!(
            "space has {n} points, over the max_points limit of {max_points}"
        )));
    }
    Ok(())
}

fn resolve_space(
    config: &ExperimentConfig,
    default: (SpaceSpec, MeasureKind),
) -> CliResult<MetricMeasureSpace> {
    let (spec, measure) = match &config.space {
        Some(sc) => sc.to_spec().map_err(CliError::Config)?,
        None => default,
    };
    check_budget(&spec, config.max_points)?;
    MetricMeasureSpace::build(spec, measure).map_err(cfg)
}

fn resolve_operator_sd(
    config: &ExperimentConfig,
    space: &MetricMeasureSpace,
    default: OperatorChoice,
    default_coeff: Option<f64>,
) -> CliResult<SpectralData> {
    let (choice, coeff) = match &config.operator {
        Some(oc) => (oc.kind.into(), oc.coeff),
        None => (default, default_coeff),
    };
    let op = spacefile::build_operator(space, choice, coeff)?;
    eigendecompose(&op, space).map_err(art)
}

fn resolve_symbol(
    symbol: &Option<SymbolConfig>,
    space: &MetricMeasureSpace,
    default_builtin: &str,
) -> CliResult<Symbol> {
    match symbol {
        None => symfile::builtin_symbol(default_builtin, space),
        Some(sc) => {
            if let Some(id) = &sc.builtin {
                symfile::builtin_symbol(id, space)
            } else {
                let expr = sc.expr.as_deref().expect("validated");
                let class = SymbolClass {
                    s: sc.s.unwrap_or(0.0),
                    rho: sc.rho.unwrap_or(1.0),
                    delta: sc.delta.unwrap_or(0.0),
                };
                Symbol::from_expr_str(expr, space, class).map_err(cfg)
            }
        }
    }
}

fn grids(config: &ExperimentConfig) -> crate::config::GridConfig {
    config.grids.clone().unwrap_or_default()
}

fn params(config: &ExperimentConfig) -> crate::config::ParamConfig {
    config.params.clone().unwrap_or_default()
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().fold(0.0f64, |m, &v| m.max(v));
    let lo = values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    hi / lo
}

// ---------------------------------------------------------------------------
// Direct experiment: one space, one operator, one symbol, one norm
// ---------------------------------------------------------------------------

fn direct(
    config: &ExperimentConfig,
    dir: &mut ArtifactDir,
) -> CliResult<(Metrics, &'static [(&'static str, f64)])> {
    let space = resolve_space(
        config,
        (SpaceSpec::Cycle { n: 64 }, MeasureKind::Counting),
    )?;
    let sd = resolve_operator_sd(config, &space, OperatorChoice::GraphLaplacian, None)?;
    let symbol = resolve_symbol(&config.symbol, &space, "one")?;
    let pr = params(config);
    let (p, q) = (pr.p.unwrap_or(2.0), pr.q.unwrap_or(2.0));

    let space_json = spacefile::space_json_bytes(&space)?;
    dir.write_bytes("space.json", &space_json)?;
    let eig_rows: Vec<String> =
        sd.eigenvalues.iter().enumerate().map(|(k, &l)| format!("{k},{}", fmt_e(l))).collect();
    dir.write_csv("eig.csv", "k,lambda", &eig_rows)?;

    let kernel = psido::kernel_matrix(&sd, &symbol);
    let est = kernel.op_norm(&space.measure, p, q, config.seed).map_err(art)?;
    dir.write_csv(
        "opnorm.csv",
        "p,q,norm,exact",
        &[format!("{},{},{},{}", fmt_e(p), fmt_e(q), fmt_e(est.value()), est.is_exact())],
    )?;

    let mut metrics = Metrics::new();
    metrics.insert("op_norm".into(), est.value());
    Ok((metrics, &[]))
}

// ---------------------------------------------------------------------------
// heat-decay: Gaussian off-diagonal bounds for the semigroup
// ---------------------------------------------------------------------------

fn heat_decay(
    config: &ExperimentConfig,
    dir: &mut ArtifactDir,
) -> CliResult<(Metrics, &'static [(&'static str, f64)])> {
    let space = resolve_space(
        config,
        (SpaceSpec::Cycle { n: 512 }, MeasureKind::Counting),
    )?;
    let sd = resolve_operator_sd(config, &space, OperatorChoice::GraphLaplacian, None)?;
    let g = grids(config);
    let pr = params(config);
    let ts = g.t_grid.unwrap_or_else(|| vec![1.0, 4.0, 16.0]);
    let (p, q) = (pr.p.unwrap_or(2.0), pr.q.unwrap_or(2.0));
    let x_range = (pr.x_lo.unwrap_or(1.0), pr.x_hi.unwrap_or(60.0));
    let center = pr.base_center.unwrap_or(0);
    let rep = heat_decay_report(&sd, &space, &ts, p, q, center, x_range, config.seed.wrapping_add(31))
        .map_err(art)?;

    let csv = rep.to_csv();
    let mut lines = csv.lines();
    let header = lines.next().unwrap_or_default().to_string();
    let rows: Vec<String> = lines.map(str::to_string).collect();
    dir.write_csv("heat_decay.csv", &header, &rows)?;

    let mut metrics = Metrics::new();
    metrics.insert("gaussian_rate".into(), rep.fitted_rate);
    metrics.insert("r2".into(), rep.r2);
    metrics.insert("n_rows".into(), rep.rows.len() as f64);
    metrics.insert("max_ratio".into(), rep.max_ratio);
    metrics.insert("lower_bound".into(), rep.lower_bound_flag as u8 as f64);
    const DEFAULTS: &[(&str, f64)] = &[
        ("min_gaussian_rate", 0.1),
        ("min_r2", 0.95),
        ("min_n_rows", 30.0),
        ("max_lower_bound", 0.0),
    ];
    Ok((metrics, DEFAULTS))
}

// ---------------------------------------------------------------------------
// lemma-multiplier: off-diagonal order of scaled spectral windows
// ---------------------------------------------------------------------------

fn lemma_multiplier(
    config: &ExperimentConfig,
    dir: &mut ArtifactDir,
) -> CliResult<(Metrics, &'static [(&'static str, f64)])> {
    let space = resolve_space(
        config,
        (SpaceSpec::Cycle { n: 512 }, MeasureKind::Counting),
    )?;
    let sd = resolve_operator_sd(config, &space, OperatorChoice::GraphLaplacian, None)?;
    let g = grids(config);
    let pr = params(config);
    let ts = g.t_grid.unwrap_or_else(|| vec![0.25, 1.0, 4.0]);
    let nu = pr.nu.unwrap_or(3.0);
    let (p, q) = (pr.p.unwrap_or(2.0), pr.q.unwrap_or(2.0));
    let x_grid = pr.x_grid.unwrap_or_else(|| vec![0.0, 2.0, 3.0, 4.0, 6.0, 8.0]);
    let center = pr.base_center.unwrap_or(0);

    // window with vanishing order 2 at zero and super-polynomial decay,
    // sup-normalized over the spectral band at each scale
    let kernels: Vec<(f64, Array2<f64>)> = ts
        .par_iter()
        .map(|&t| {
            let band_sup = sd
                .eigenvalues
                .iter()
                .map(|&l| (t * l).powi(2) * (-t * l).exp())
                .fold(0.0f64, f64::max);
            (t, sd.multiplier_kernel(|l| (t * l).powi(2) * (-t * l).exp() / band_sup))
        })
        .collect();
    let rep = power_offdiag_report(
        &kernels,
        &space,
        sd.order_m,
        nu,
        p,
        q,
        center,
        &x_grid,
        config.seed.wrapping_add(61),
    )
    .map_err(art)?;
    let env = per_scale_envelope(&rep, nu, sd.order_m);

    let csv = rep.to_csv();
    let mut lines = csv.lines();
    let header = lines.next().unwrap_or_default().to_string();
    let rows: Vec<String> = lines.map(str::to_string).collect();
    dir.write_csv("multiplier_decay.csv", &header, &rows)?;
    let env_rows: Vec<String> =
        env.iter().map(|&(t, e)| format!("{},{}", fmt_e(t), fmt_e(e))).collect();
    dir.write_csv("envelope.csv", "t,envelope", &env_rows)?;

    let emax = env.iter().map(|e| e.1).fold(0.0f64, f64::max);
    let emin = env.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let mut metrics = Metrics::new();
    metrics.insert("fitted_order".into(), rep.fitted_rate);
    metrics.insert("envelope_spread".into(), emax / emin);
    metrics.insert("r2".into(), rep.r2);
    metrics.insert("n_rows".into(), rep.rows.len() as f64);
    metrics.insert("lower_bound".into(), rep.lower_bound_flag as u8 as f64);
    const DEFAULTS: &[(&str, f64)] = &[
        ("min_fitted_order", 3.0),
        ("max_envelope_spread", 3.0),
        ("max_lower_bound", 0.0),
    ];
    Ok((metrics, DEFAULTS))
}

// ---------------------------------------------------------------------------
// decompose-decay: elementary decomposition coefficients and reconstruction
// ---------------------------------------------------------------------------

fn decompose_decay(
    config: &ExperimentConfig,
    dir: &mut ArtifactDir,
) -> CliResult<(Metrics, &'static [(&'static str, f64)])> {
    let space = resolve_space(
        config,
        (SpaceSpec::Cycle { n: 64 }, MeasureKind::Counting),
    )?;
    let sd = resolve_operator_sd(config, &space, OperatorChoice::GraphLaplacian, None)?;
    let symbol = resolve_symbol(&config.symbol, &space, "feature-contrast")?;
    let g = grids(config);
    let pr = params(config);
    let l_max = g.l_max.unwrap_or(32);
    let q_per_octave = g.q_per_octave.unwrap_or(64);
    let probe_extra = pr.probe_extra.unwrap_or(64);

    let dec = symbols::decompose(&symbol, &sd, PartitionOfUnity::default(), l_max, q_per_octave)
        .map_err(art)?;
    let probe = symbols::default_probe(&sd, probe_extra);
    let residual = dec.reconstruction_residual(&symbol, &probe);
    let fit = dec.gamma_decay_fit();

    let mut lt_rows = Vec::new();
    for li in 0..2 * l_max + 1 {
        let l = li as i64 - l_max as i64;
        for (i, &t) in dec.t_grid.iter().enumerate() {
            let sup = dec.gammas[i]
                .row(li)
                .iter()
                .fold(0.0f64, |m, z| m.max(z.norm()));
            lt_rows.push(format!("{l},{},{}", fmt_e(t), fmt_e(sup)));
        }
    }
    dir.write_csv("gamma_lt.csv", "l,t,sup_gamma", &lt_rows)?;
    let sup_rows: Vec<String> = dec
        .gamma_sup_by_l()
        .iter()
        .enumerate()
        .map(|(l, &v)| format!("{l},{}", fmt_e(v)))
        .collect();
    dir.write_csv("gamma_sup.csv", "l,sup_gamma", &sup_rows)?;

    let mut metrics = Metrics::new();
    metrics.insert("residual".into(), residual);
    metrics.insert("decay_slope".into(), fit.slope);
    metrics.insert("r2".into(), fit.r2);
    const DEFAULTS: &[(&str, f64)] =
        &[("max_residual", 1e-3), ("max_decay_slope", -4.0), ("min_r2", 0.9)];
    Ok((metrics, DEFAULTS))
}

// ---------------------------------------------------------------------------
// thm-s10 / thm-s1delta: uniform operator norms across refinement levels
// ---------------------------------------------------------------------------

fn thm_uniform(
    config: &ExperimentConfig,
    dir: &mut ArtifactDir,
    default_builtin: &'static str,
    seed_offset: u64,
) -> CliResult<(Metrics, &'static [(&'static str, f64)])> {
    let g = grids(config);
    let pr = params(config);
    let sizes = g.sizes.unwrap_or_else(|| vec![64, 128, 256]);
    if sizes.is_empty() {
        return Err(CliError::Config("grids.sizes must not be empty".into()));
    }
    for &n in &sizes {
        check_budget(&SpaceSpec::Cycle { n }, config.max_points)?;
    }
    let (p, q) = (pr.p.unwrap_or(2.0), pr.q.unwrap_or(2.0));
    let seed = config.seed.wrapping_add(seed_offset);

    let measured: Vec<(usize, f64, bool)> = sizes
        .par_iter()
        .map(|&n| -> CliResult<(usize, f64, bool)> {
            let space =
                MetricMeasureSpace::build(SpaceSpec::Cycle { n }, MeasureKind::Counting)
                    .map_err(cfg)?;
            let sd = resolve_operator_sd(config, &space, OperatorChoice::GraphLaplacian, None)?;
            let symbol = resolve_symbol(&config.symbol, &space, default_builtin)?;
            let kernel = psido::kernel_matrix(&sd, &symbol);
            let est = kernel.op_norm(&space.measure, p, q, seed).map_err(art)?;
            Ok((n, est.value(), est.is_exact()))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let rows: Vec<String> = measured
        .iter()
        .map(|&(n, norm, exact)| format!("{n},{},{exact}", fmt_e(norm)))
        .collect();
    dir.write_csv("level_opnorm.csv", "n,norm,exact", &rows)?;

    let norms: Vec<f64> = measured.iter().map(|m| m.1).collect();
    let mut metrics = Metrics::new();
    metrics.insert("norm_spread".into(), spread(&norms));
    for &(n, norm, _) in &measured {
        metrics.insert(format!("norm_n{n}"), norm);
    }
    const DEFAULTS: &[(&str, f64)] = &[("max_norm_spread", 1.5)];
    Ok((metrics, DEFAULTS))
}

// ---------------------------------------------------------------------------
// prop-dual-slope: commutator norm slopes in the two symbol regimes
// ---------------------------------------------------------------------------

fn prop_dual_slope(
    config: &ExperimentConfig,
    dir: &mut ArtifactDir,
) -> CliResult<(Metrics, &'static [(&'static str, f64)])> {
    let space = resolve_space(
        config,
        (SpaceSpec::Cycle { n: 256 }, MeasureKind::Counting),
    )?;
    let sd =
        resolve_operator_sd(config, &space, OperatorChoice::DivergenceForm, Some(64.0))?;
    let pr = params(config);
    let n0 = pr.shell_order.unwrap_or(2);
    let j_lo = pr.j_lo.unwrap_or(4);
    let j_hi = pr.j_hi.unwrap_or(16);
    if j_hi < j_lo {
        return Err(CliError::Config("params.j_hi must be >= params.j_lo".into()));
    }
    let ts: Vec<f64> = (j_lo..=j_hi).map(|j| 2f64.powf(-(j as f64) / 2.0)).collect();
    let shell = move |u: f64| if u <= 0.0 { 0.0 } else { (u * (1.0 - u).exp()).powi(n0 as i32) };
    if space.features.is_empty() || space.features[0].is_empty() {
        return Err(CliError::Config("space has no point features for the multiplier".into()));
    }
    let gamma0: Array1<f64> = space.features.iter().map(|f| f[0]).collect();

    let seed = config.seed;
    let sd_half = sd.clone();
    let (rep0, rep_half) = rayon::join(
        || {
            psido::commutator_slope(&sd, shell, |_| gamma0.clone(), &ts, seed.wrapping_add(71))
                .map_err(art)
        },
        || {
            psido::commutator_slope(
                &sd,
                shell,
                move |t: f64| {
                    let lam_t = t.powf(-0.5);
                    let k = sd_half.multiplier_kernel(|l| {
                        if l <= 0.0 {
                            0.0
                        } else {
                            let r = (l / lam_t).ln();
                            (-4.0 * r * r).exp()
                        }
                    });
                    let row = k.row(0).to_owned();
                    let sup = row.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                    row.map(|v| v / sup)
                },
                &ts,
                seed.wrapping_add(72),
            )
            .map_err(art)
        },
    );
    let (rep0, rep_half) = (rep0?, rep_half?);

    let rows0: Vec<String> = rep0
        .ts
        .iter()
        .zip(&rep0.norms)
        .map(|(&t, &n)| format!("{},{}", fmt_e(t), fmt_e(n)))
        .collect();
    dir.write_csv("commutator_delta0.csv", "t,norm", &rows0)?;
    let rows_h: Vec<String> = rep_half
        .ts
        .iter()
        .zip(&rep_half.norms)
        .map(|(&t, &n)| format!("{},{}", fmt_e(t), fmt_e(n)))
        .collect();
    dir.write_csv("commutator_half.csv", "t,norm", &rows_h)?;

    let mut metrics = Metrics::new();
    metrics.insert("slope_delta0".into(), rep0.fit.slope);
    metrics.insert("slope_half".into(), rep_half.fit.slope);
    metrics.insert("r2_delta0".into(), rep0.fit.r2);
    metrics.insert("r2_half".into(), rep_half.fit.r2);
    const DEFAULTS: &[(&str, f64)] = &[
        ("min_slope_delta0", 0.3),
        ("max_slope_delta0", 0.7),
        ("min_slope_half", 0.05),
        ("max_slope_half", 0.45),
    ];
    Ok((metrics, DEFAULTS))
}

// ---------------------------------------------------------------------------
// t1-correlation: operator norm against oscillation and seminorm budgets
// ---------------------------------------------------------------------------

fn t1_correlation(
    config: &ExperimentConfig,
    dir: &mut ArtifactDir,
) -> CliResult<(Metrics, &'static [(&'static str, f64)])> {
    let space = resolve_space(
        config,
        (SpaceSpec::Cycle { n: 64 }, MeasureKind::Counting),
    )?;
    let sd = resolve_operator_sd(config, &space, OperatorChoice::GraphLaplacian, None)?;
    let g = grids(config);
    let pr = params(config);
    let m_param = match pr.m_param {
        Some(m) => m,
        None => bmo::default_m_from_doubling(&space).map_err(art)?,
    };
    let radii = g.radii.unwrap_or_else(|| bmo::default_radii(&space));
    let probe_extra = pr.probe_extra.unwrap_or(16);
    let amplitudes =
        pr.amplitudes.unwrap_or_else(|| vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    if amplitudes.len() < 2 {
        return Err(CliError::Config("params.amplitudes needs at least two entries".into()));
    }
    let probe = symbols::default_probe(&sd, probe_extra);
    let seed = config.seed.wrapping_add(83);

    struct Member {
        amplitude: f64,
        op_norm2: f64,
        bmo_t1: f64,
        seminorm_sum: f64,
    }
    let members: Vec<Member> = amplitudes
        .par_iter()
        .enumerate()
        .map(|(i, &a)| -> CliResult<Member> {
            let expr = format!("1 + {a} * x0 * xi / (1 + xi)");
            let symbol =
                Symbol::from_expr_str(&expr, &space, SymbolClass::order_zero()).map_err(cfg)?;
            let t1 = bmo::t1_test(&sd, &space, &symbol, m_param, &radii, seed.wrapping_add(i as u64))
                .map_err(art)?;
            let table = symbols::seminorm(&symbol, &sd, sd.order_m, &[0.0, 1.0], 2, &probe)
                .map_err(art)?;
            let seminorm_sum = table.values.iter().sum();
            Ok(Member { amplitude: a, op_norm2: t1.op_norm2, bmo_t1: t1.t_one_bmo, seminorm_sum })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let rows: Vec<String> = members
        .iter()
        .map(|m| {
            format!(
                "a={},{},{},{}",
                fmt_e(m.amplitude),
                fmt_e(m.op_norm2),
                fmt_e(m.bmo_t1),
                fmt_e(m.seminorm_sum)
            )
        })
        .collect();
    dir.write_csv("correlation.csv", "symbol_id,opnorm2,bmo_t1,seminorm_sum", &rows)?;

    let norms: Vec<f64> = members.iter().map(|m| m.op_norm2).collect();
    let bounds: Vec<f64> = members.iter().map(|m| m.bmo_t1 + m.seminorm_sum).collect();
    let corr = pearson(&norms, &bounds);
    let ratio_max = members
        .iter()
        .map(|m| m.op_norm2 / (m.bmo_t1 + m.seminorm_sum))
        .fold(0.0f64, f64::max);

    let mut metrics = Metrics::new();
    metrics.insert("pearson".into(), corr);
    metrics.insert("bound_ratio_max".into(), ratio_max);
    metrics.insert("n_family".into(), members.len() as f64);
    const DEFAULTS: &[(&str, f64)] = &[("min_pearson", 0.5), ("max_bound_ratio_max", 2.0)];
    Ok((metrics, DEFAULTS))
}

// ---------------------------------------------------------------------------
// paraproduct-bound: paraproduct norms against the modulating function
// ---------------------------------------------------------------------------

fn paraproduct_bound(
    config: &ExperimentConfig,
    dir: &mut ArtifactDir,
) -> CliResult<(Metrics, &'static [(&'static str, f64)])> {
    let space = resolve_space(
        config,
        (SpaceSpec::GridTorus { nx: 16, ny: 16 }, MeasureKind::Counting),
    )?;
    let sd = resolve_operator_sd(config, &space, OperatorChoice::GraphLaplacian, None)?;
    let g = grids(config);
    let pr = params(config);
    let m_exp = pr.m_exp.unwrap_or(2);
    let q_per_octave = g.q_per_octave.unwrap_or(8);
    let draws = pr.draws.unwrap_or(20);
    if draws == 0 {
        return Err(CliError::Config("params.draws must be positive".into()));
    }
    let n = space.n;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(81));
    let norm_seed = config.seed.wrapping_add(82);

    // constants have zero oscillation norm and are annihilated by the windows
    let radii = bmo::default_radii(&space);
    let m_param = bmo::default_m_from_doubling(&space).map_err(art)?;
    let const_f = Array1::from_elem(n, 2.0);
    let osc_const = bmo::bmo_norm(&sd, &space, &const_f, m_param, &radii).map_err(art)?.value;
    let ones = Array1::from_elem(n, 1.0);
    let mut window_const = 0.0f64;
    for &t in &[0.1, 1.0, 7.3] {
        let w = sd.apply_multiplier(|l| (t * l).powi(m_exp as i32) * (-t * l).exp(), &ones);
        window_const = window_const.max(w.iter().fold(0.0f64, |m, &v| m.max(v.abs())));
    }

    // identity and annihilation diagnostics on the first draw
    let g0 = random_vec(n, &mut rng);
    let pp0 = bmo::paraproduct(&sd, &g0, m_exp, q_per_octave).map_err(art)?;
    let f0 = random_vec(n, &mut rng);
    let via_pp = pp0.apply(&sd, &f0);
    let sym0 = pp0.symbol(SymbolClass::order_zero());
    let via_sym = psido::apply_re(&sd, &sym0, &f0);
    let diff: Array1<f64> = via_pp.iter().zip(via_sym.iter()).map(|(a, b)| a - b).collect();
    let identity_rel = psdocalc_core::norms::lp_norm(diff.as_slice().unwrap(), &space.measure, 2.0)
        / psdocalc_core::norms::lp_norm(f0.as_slice().unwrap(), &space.measure, 2.0);
    let p1 = pp0.apply(&sd, &ones);
    let annihilation = p1.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

    let gs: Vec<Array1<f64>> = (0..draws).map(|_| random_vec(n, &mut rng)).collect();
    let measured: Vec<(f64, f64)> = gs
        .par_iter()
        .map(|gv| -> CliResult<(f64, f64)> {
            let pp = bmo::paraproduct(&sd, gv, m_exp, q_per_octave).map_err(art)?;
            let nrm = pp.kernel(&sd).op_norm(&space.measure, 2.0, 2.0, norm_seed).map_err(art)?;
            let gsup = gv.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            Ok((nrm.value(), gsup))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let rows: Vec<String> = measured
        .iter()
        .enumerate()
        .map(|(i, &(nrm, gsup))| {
            format!("{i},{},{},{}", fmt_e(nrm), fmt_e(gsup), fmt_e(nrm / gsup))
        })
        .collect();
    dir.write_csv("paraproduct.csv", "g_id,opnorm2,g_sup,ratio", &rows)?;

    let ratios: Vec<f64> = measured.iter().map(|&(nrm, gsup)| nrm / gsup).collect();
    let mut metrics = Metrics::new();
    metrics.insert("osc_const".into(), osc_const);
    metrics.insert("window_const".into(), window_const);
    metrics.insert("identity_rel".into(), identity_rel);
    metrics.insert("annihilation".into(), annihilation);
    metrics.insert("ratio_spread".into(), spread(&ratios));
    metrics.insert("n_draws".into(), draws as f64);
    const DEFAULTS: &[(&str, f64)] = &[
        ("max_osc_const", 1e-12),
        ("max_window_const", 1e-12),
        ("max_identity_rel", 1e-6),
        ("max_annihilation", 1e-12),
        ("max_ratio_spread", 5.0),
    ];
    Ok((metrics, DEFAULTS))
}

// ---------------------------------------------------------------------------
// assumption-checks: doubling, embedding, and Poincare behavior
// ---------------------------------------------------------------------------

fn assumption_checks(
    config: &ExperimentConfig,
    dir: &mut ArtifactDir,
) -> CliResult<(Metrics, &'static [(&'static str, f64)])> {
    let pr = params(config);
    let m0 = pr.m0.unwrap_or(2);
    let kappa = pr.kappa.unwrap_or(1.0);
    let draws = pr.draws.unwrap_or(32);
    let stride = pr.center_stride.unwrap_or(3);
    if stride == 0 {
        return Err(CliError::Config("params.center_stride must be positive".into()));
    }
    let emb_seed = config.seed.wrapping_add(105);
    let poi_seed = config.seed.wrapping_add(106);

    let trio: [(&str, SpaceSpec); 3] = [
        ("cycle128", SpaceSpec::Cycle { n: 128 }),
        ("torus32", SpaceSpec::GridTorus { nx: 32, ny: 32 }),
        ("sierpinski6", SpaceSpec::Sierpinski { level: 6 }),
    ];
    let doubling: Vec<(String, f64, f64)> = trio
        .par_iter()
        .map(|(id, spec)| -> CliResult<(String, f64, f64)> {
            let space =
                MetricMeasureSpace::build(spec.clone(), MeasureKind::Counting).map_err(art)?;
            let profile =
                space.doubling_profile(&space.default_doubling_radii()).map_err(art)?;
            Ok((id.to_string(), profile.n_fit, profile.r2))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let rows: Vec<String> = doubling
        .iter()
        .map(|(id, n_fit, r2)| format!("{id},{},{}", fmt_e(*n_fit), fmt_e(*r2)))
        .collect();
    dir.write_csv("doubling.csv", "space_id,n_fit,r2", &rows)?;

    // stability of the embedding / Poincare constants under one refinement
    struct LevelOut {
        emb: psdocalc_core::sobolev::InequalityReport,
        poi: psdocalc_core::sobolev::InequalityReport,
        sd: SpectralData,
        space: MetricMeasureSpace,
        radii: Vec<f64>,
    }
    let run_level = |level: usize| -> CliResult<LevelOut> {
        let space =
            MetricMeasureSpace::build(SpaceSpec::Sierpinski { level }, MeasureKind::Counting)
                .map_err(art)?;
        let op = spacefile::build_operator(&space, OperatorChoice::GraphLaplacian, None)?;
        let sd = eigendecompose(&op, &space).map_err(art)?;
        let radii = witness::default_check_radii(&space);
        let emb = sobolev::embedding_check(&sd, &space, m0, kappa, draws, emb_seed, &radii, stride)
            .map_err(art)?;
        let poi =
            sobolev::p2_poincare_check(&sd, &space, draws, poi_seed, &radii, stride).map_err(art)?;
        Ok(LevelOut { emb, poi, sd, space, radii })
    };
    let (l4, l5) = rayon::join(|| run_level(4), || run_level(5));
    let (l4, l5) = (l4?, l5?);

    let emb_ratio = (l5.emb.constant / l4.emb.constant).max(l4.emb.constant / l5.emb.constant);
    let poi_ratio = (l5.poi.constant / l4.poi.constant).max(l4.poi.constant / l5.poi.constant);

    // witness records for the finer level's worst draws
    let f_emb = witness::replay_band_limited(&l5.sd, emb_seed, l5.emb.worst_draw);
    let emb_rows = witness::embedding_witness_rows(
        &l5.sd, &l5.space, &f_emb, m0, kappa, &l5.radii, stride,
    );
    dir.write_csv("witness_embedding.csv", witness::WITNESS_HEADER, &emb_rows)?;
    let f_poi = witness::replay_band_limited(&l5.sd, poi_seed, l5.poi.worst_draw);
    let poi_rows = witness::poincare_witness_rows(&l5.space, &f_poi, &l5.radii, stride);
    dir.write_csv("witness_poincare.csv", witness::WITNESS_HEADER, &poi_rows)?;

    let mut metrics = Metrics::new();
    for (id, n_fit, _) in &doubling {
        let key = match id.as_str() {
            "cycle128" => "doubling_cycle",
            "torus32" => "doubling_torus",
            _ => "doubling_gasket",
        };
        metrics.insert(key.into(), *n_fit);
    }
    metrics.insert("embedding_ratio".into(), emb_ratio);
    metrics.insert("poincare_ratio".into(), poi_ratio);
    metrics.insert("embedding_const".into(), l5.emb.constant);
    metrics.insert("poincare_const".into(), l5.poi.constant);
    const DEFAULTS: &[(&str, f64)] = &[
        ("min_doubling_cycle", 0.85),
        ("max_doubling_cycle", 1.15),
        ("min_doubling_torus", 1.85),
        ("max_doubling_torus", 2.15),
        ("min_doubling_gasket", 1.435),
        ("max_doubling_gasket", 1.735),
        ("max_embedding_ratio", 2.0),
        ("max_poincare_ratio", 2.0),
    ];
    Ok((metrics, DEFAULTS))
}
