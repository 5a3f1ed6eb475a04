//! Nonnegative self-adjoint operators from Dirichlet forms, their dense
//! mu-weighted eigendecomposition, the semigroup, and Gaussian heat-kernel
//! decay reports.

use crate::fit::linfit;
use crate::norms::{self, KernelScalar};
use crate::space::MetricMeasureSpace;
use crate::{eigh, Error, Result};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    GraphLaplacian,
    DivergenceForm,
    SubLaplacian,
}

/// A mu-symmetric nonnegative operator, stored as its action matrix on
/// functions: (Lf)(x) = sum_y matrix[x,y] f(y).
#[derive(Debug, Clone)]
pub struct SelfAdjointOperator {
    pub matrix: Array2<f64>,
    /// Homogeneity order m of the calculus (2 for Dirichlet-form Laplacians).
    pub order_m: f64,
    /// Lower endpoint of the semigroup's L^p boundedness range.
    pub p0: f64,
    pub kind: OperatorKind,
}

/// One discrete vector field per parallel class; L = sum_i X_i^t X_i.
#[derive(Debug, Clone)]
pub struct VectorFieldFamily {
    pub fields: Vec<Array2<f64>>,
}

impl VectorFieldFamily {
    pub fn apply(&self, i: usize, f: &Array1<f64>) -> Array1<f64> {
        self.fields[i].dot(f)
    }

    /// sum_i X_i^t X_i (counting-measure adjoints).
    pub fn sum_of_squares(&self) -> Array2<f64> {
        let n = self.fields[0].nrows();
        let mut acc = Array2::zeros((n, n));
        for x in &self.fields {
            acc = acc + x.t().dot(x);
        }
        acc
    }
}

/// Combinatorial or random-walk graph Laplacian, depending on the measure:
/// counting measure gives D - A; degree measure gives I - D_deg^{-1} A.
/// Both are mu-symmetric and nonnegative.
pub fn graph_laplacian(space: &MetricMeasureSpace) -> SelfAdjointOperator {
    let n = space.n;
    let mut m = Array2::zeros((n, n));
    for &(u, v) in &space.edges {
        m[[u, v]] -= 1.0;
        m[[v, u]] -= 1.0;
        m[[u, u]] += 1.0;
        m[[v, v]] += 1.0;
    }
    for x in 0..n {
        let w = 1.0 / space.measure[x];
        for y in 0..n {
            m[[x, y]] *= w;
        }
    }
    SelfAdjointOperator { matrix: m, order_m: 2.0, p0: 1.0, kind: OperatorKind::GraphLaplacian }
}

/// Divergence-form operator from per-edge conductances:
/// (Lf)(x) = mu(x)^{-1} sum_{y ~ x} a_xy (f(x) - f(y)). Coefficients are keyed
/// by the edge list order and must be strictly positive.
pub fn divergence_form(space: &MetricMeasureSpace, coeff: &[f64]) -> Result<SelfAdjointOperator> {
    if coeff.len() != space.edges.len() {
        return Err(Error::Dim(format!(
            "divergence_form: {} coefficients for {} edges",
            coeff.len(),
            space.edges.len()
        )));
    }
    if coeff.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Invalid("edge coefficients must be strictly positive".into()));
    }
    let n = space.n;
    let mut m = Array2::zeros((n, n));
    for (&(u, v), &a) in space.edges.iter().zip(coeff) {
        m[[u, v]] -= a;
        m[[v, u]] -= a;
        m[[u, u]] += a;
        m[[v, v]] += a;
    }
    for x in 0..n {
        let w = 1.0 / space.measure[x];
        for y in 0..n {
            m[[x, y]] *= w;
        }
    }
    Ok(SelfAdjointOperator { matrix: m, order_m: 2.0, p0: 1.0, kind: OperatorKind::DivergenceForm })
}

/// Constant-coefficient divergence form a_xy = c.
pub fn divergence_form_const(space: &MetricMeasureSpace, c: f64) -> Result<SelfAdjointOperator> {
    divergence_form(space, &vec![c; space.edges.len()])
}

/// Sum-of-squares operator L = sum_i X_i^t X_i from a family of discrete
/// vector fields: coordinate shifts on cycles/tori, the forward difference on
/// paths, and matching-partition difference fields on other graphs.
/// Counting measure only (the field calculus presumes unweighted duality).
pub fn sub_laplacian(space: &MetricMeasureSpace) -> Result<(SelfAdjointOperator, VectorFieldFamily)> {
    use crate::space::SpaceSpec;
    if space.measure.iter().any(|&m| m != 1.0) {
        return Err(Error::Unsupported("sub_laplacian requires the counting measure".into()));
    }
    let n = space.n;
    let mut fields: Vec<Array2<f64>> = Vec::new();
    match &space.spec {
        SpaceSpec::Cycle { .. } => {
            let mut x = Array2::zeros((n, n));
            for i in 0..n {
                x[[i, (i + 1) % n]] += 1.0;
                x[[i, i]] -= 1.0;
            }
            fields.push(x);
        }
        SpaceSpec::GridTorus { nx, ny } => {
            let (nx, ny) = (*nx, *ny);
            let id = |x: usize, y: usize| y * nx + x;
            let mut fx = Array2::zeros((n, n));
            let mut fy = Array2::zeros((n, n));
            for y in 0..ny {
                for x in 0..nx {
                    let u = id(x, y);
                    fx[[u, id((x + 1) % nx, y)]] += 1.0;
                    fx[[u, u]] -= 1.0;
                    fy[[u, id(x, (y + 1) % ny)]] += 1.0;
                    fy[[u, u]] -= 1.0;
                }
            }
            fields.push(fx);
            fields.push(fy);
        }
        SpaceSpec::Path { .. } => {
            let mut x = Array2::zeros((n, n));
            for i in 0..n - 1 {
                x[[i, i + 1]] += 1.0;
                x[[i, i]] -= 1.0;
            }
            fields.push(x);
        }
        _ => {
            // Greedy proper edge coloring; each color class is a matching, and
            // the normalized difference projections square to the class's
            // Laplacian summand.
            let mut color_of = Vec::with_capacity(space.edges.len());
            let mut at_vertex: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut n_colors = 0usize;
            for &(u, v) in &space.edges {
                let mut c = 0;
                while at_vertex[u].contains(&c) || at_vertex[v].contains(&c) {
                    c += 1;
                }
                at_vertex[u].push(c);
                at_vertex[v].push(c);
                color_of.push(c);
                n_colors = n_colors.max(c + 1);
            }
            let s = 0.5f64.sqrt();
            for c in 0..n_colors {
                let mut x = Array2::zeros((n, n));
                for (&(u, v), &cc) in space.edges.iter().zip(&color_of) {
                    if cc == c {
                        x[[u, u]] += s;
                        x[[v, v]] += s;
                        x[[u, v]] -= s;
                        x[[v, u]] -= s;
                    }
                }
                fields.push(x);
            }
        }
    }
    let family = VectorFieldFamily { fields };
    let matrix = family.sum_of_squares();
    Ok((
        SelfAdjointOperator { matrix, order_m: 2.0, p0: 1.0, kind: OperatorKind::SubLaplacian },
        family,
    ))
}

/// Dense spectral data of a mu-symmetric nonnegative operator: eigenvalues
/// ascending, basis columns orthonormal in L^2(mu), deterministic ordering
/// and sign convention.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Array1<f64>,
    /// Columns u_k with <u_j, u_k>_mu = delta_jk.
    pub basis: Array2<f64>,
    pub measure: Vec<f64>,
    pub order_m: f64,
}

pub fn eigendecompose(op: &SelfAdjointOperator, space: &MetricMeasureSpace) -> Result<SpectralData> {
    let (mut vals, basis) = eigh::eigh_mu(&op.matrix, &space.measure)?;
    let lam_max = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let tol = 1e-9 * lam_max.max(1.0);
    for v in vals.iter_mut() {
        if *v < 0.0 {
            if *v < -tol {
                return Err(Error::NotPsd(*v));
            }
            *v = 0.0;
        }
    }
    Ok(SpectralData { eigenvalues: vals, basis, measure: space.measure.clone(), order_m: op.order_m })
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.n() - 1]
    }

    /// Spectral coefficients c_k = <f, u_k>_mu.
    pub fn coeffs(&self, f: &Array1<f64>) -> Array1<f64> {
        let weighted: Array1<f64> = f
            .iter()
            .zip(&self.measure)
            .map(|(v, &m)| v * m)
            .collect();
        self.basis.t().dot(&weighted)
    }

    pub fn synthesize(&self, coeffs: &Array1<f64>) -> Array1<f64> {
        self.basis.dot(coeffs)
    }

    /// F(L) f through the spectral theorem.
    pub fn apply_multiplier(&self, f_of_lambda: impl Fn(f64) -> f64, f: &Array1<f64>) -> Array1<f64> {
        let mut c = self.coeffs(f);
        for (k, v) in c.iter_mut().enumerate() {
            *v *= f_of_lambda(self.eigenvalues[k]);
        }
        self.synthesize(&c)
    }

    /// Complex multiplier applied to a real vector.
    pub fn apply_multiplier_complex(
        &self,
        f_of_lambda: impl Fn(f64) -> Complex64,
        f: &Array1<f64>,
    ) -> Array1<Complex64> {
        let c = self.coeffs(f);
        let n = self.n();
        let mut out = Array1::from_elem(n, Complex64::new(0.0, 0.0));
        for k in 0..n {
            let w = f_of_lambda(self.eigenvalues[k]) * c[k];
            for x in 0..n {
                out[x] += w * self.basis[[x, k]];
            }
        }
        out
    }

    /// Kernel of F(L) with respect to mu: K(x,y) = sum_k F(lambda_k) u_k(x) u_k(y).
    pub fn multiplier_kernel(&self, f_of_lambda: impl Fn(f64) -> f64) -> Array2<f64> {
        let n = self.n();
        let mut scaled = self.basis.clone();
        for k in 0..n {
            let w = f_of_lambda(self.eigenvalues[k]);
            for x in 0..n {
                scaled[[x, k]] *= w;
            }
        }
        scaled.dot(&self.basis.t())
    }

    /// Action matrix of F(L): kernel times diag(mu).
    pub fn multiplier_matrix(&self, f_of_lambda: impl Fn(f64) -> f64) -> Array2<f64> {
        let mut k = self.multiplier_kernel(f_of_lambda);
        let n = self.n();
        for x in 0..n {
            for y in 0..n {
                k[[x, y]] *= self.measure[y];
            }
        }
        k
    }

    pub fn semigroup_apply(&self, t: f64, f: &Array1<f64>) -> Array1<f64> {
        self.apply_multiplier(|l| (-t * l).exp(), f)
    }

    /// Heat kernel p_t(x,y) with respect to mu.
    pub fn semigroup_kernel(&self, t: f64) -> Array2<f64> {
        self.multiplier_kernel(|l| (-t * l).exp())
    }
}

/// One measured off-diagonal block norm.
#[derive(Debug, Clone)]
pub struct DecayRow {
    pub t: f64,
    pub pair_id: usize,
    /// Separation between the two balls (center distance minus both radii,
    /// floored at zero).
    pub distance: f64,
    pub norm: f64,
    /// Value of the fitted decay model at this row's geometry.
    pub model_bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayModel {
    /// norm ~ C exp(-c (d / t^{1/m})^{m/(m-1)}), volume-corrected in C.
    GaussianHeat { m: f64 },
    /// norm ~ C (1 + d/r)^{-nu}
    PowerOffdiag { nu: f64 },
}

/// Off-diagonal decay measurement: rows, fitted model, and goodness of fit.
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    pub model: DecayModel,
    /// Fitted decay rate: c for the Gaussian model, the fitted order for the
    /// power model.
    pub fitted_rate: f64,
    /// Fitted log-prefactor ln C.
    pub fitted_log_c: f64,
    pub r2: f64,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub seed: u64,
    /// True if any norm came from the lower-bound sampler rather than an
    /// exact rule.
    pub lower_bound_flag: bool,
}

impl DecayReport {
    /// Canonical CSV: `t,pair_id,distance,norm,model_bound,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,pair_id,distance,norm,model_bound,ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.t, r.pair_id, r.distance, r.norm, r.model_bound, r.ratio
            ));
        }
        out
    }
}

/// Gaussian heat-kernel decay on ball pairs.
///
/// For each time t, balls of radius r = t^{1/m} are paired at increasing
/// center distances; the L^p -> L^q norm of the localized semigroup block is
/// measured and fitted against exp(-c x) with x = (d / t^{1/m})^{m/(m-1)},
/// d the ball separation. Pairs are kept while x lies in `x_range`.
pub fn heat_decay_report(
    sd: &SpectralData,
    space: &MetricMeasureSpace,
    ts: &[f64],
    p: f64,
    q: f64,
    base_center: usize,
    x_range: (f64, f64),
    seed: u64,
) -> Result<DecayReport> {
    let m_ord = sd.order_m;
    let mm = m_ord / (m_ord - 1.0);
    let mut rows: Vec<(f64, usize, f64, f64, f64)> = Vec::new(); // t, pair, d, x, norm
    let mut lower = false;
    let mut pair_id = 0usize;
    for &t in ts {
        let kernel = sd.semigroup_kernel(t);
        let r = t.powf(1.0 / m_ord);
        let b1 = space.ball(base_center, r);
        if b1.members.is_empty() {
            continue;
        }
        let max_dc = space.diameter.floor() as usize;
        for dc in 1..=max_dc {
            let c2 = space.point_at_distance(base_center, dc as f64);
            if space.dist[[base_center, c2]] != dc as f64 {
                continue;
            }
            let d = (dc as f64 - 2.0 * r).max(0.0);
            let x = (d / r).powf(mm);
            if x < x_range.0 || x > x_range.1 {
                continue;
            }
            let b2 = space.ball(c2, r);
            if b2.members.is_empty() {
                continue;
            }
            let (blk, mu_r, mu_c) = norms::block(&kernel, &space.measure, &b2.members, &b1.members);
            let est = norms::op_norm(&blk, &mu_r, &mu_c, p, q, seed.wrapping_add(pair_id as u64))?;
            lower |= !est.is_exact();
            let norm = est.value();
            if norm > 1e-14 {
                let vol_factor = volume_factor(space.volume(&b1.members), p, q);
                rows.push((t, pair_id, d, x, norm / vol_factor));
                pair_id += 1;
            }
        }
    }
    if rows.len() < 3 {
        return Err(Error::Invalid("heat decay: fewer than 3 usable pairs".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.4.ln()).collect();
    let fit = linfit(&xs, &ys);
    let c = -fit.slope;
    let mut out_rows = Vec::with_capacity(rows.len());
    let mut max_ratio = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    for (t, id, d, x, norm) in rows {
        let model = (fit.intercept + fit.slope * x).exp();
        let ratio = norm / model;
        max_ratio = max_ratio.max(ratio);
        min_ratio = min_ratio.min(ratio);
        out_rows.push(DecayRow { t, pair_id: id, distance: d, norm, model_bound: model, ratio });
    }
    Ok(DecayReport {
        rows: out_rows,
        model: DecayModel::GaussianHeat { m: m_ord },
        fitted_rate: c,
        fitted_log_c: fit.intercept,
        r2: fit.r2,
        max_ratio,
        min_ratio,
        seed,
        lower_bound_flag: lower,
    })
}

/// mu(B)^{1/q - 1/p} normalization used by L^p -> L^q decay models
/// (1 when p = q).
pub fn volume_factor(vol: f64, p: f64, q: f64) -> f64 {
    let ip = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let iq = if q.is_infinite() { 0.0 } else { 1.0 / q };
    vol.powf(iq - ip)
}

/// Generic power-law off-diagonal report over (scale, kernel) pairs.
///
/// For each scale t a kernel is supplied; ball pairs at relative separations
/// `x_grid` (in units of r = t^{1/m}, deduplicated after rounding the center
/// distance) are measured; x = 0 denotes the diagonal pair B1 = B1. Rows are
/// fitted against (1 + d/r)^{-nu}: `fitted_rate` is the fitted decay order
/// from the off-diagonal rows, and ratios compare each row to
/// C (1 + d/r)^{-nu} with C the largest observed prefactor.
pub fn power_offdiag_report<S: KernelScalar>(
    kernels: &[(f64, Array2<S>)],
    space: &MetricMeasureSpace,
    m_ord: f64,
    nu: f64,
    p: f64,
    q: f64,
    base_center: usize,
    x_grid: &[f64],
    seed: u64,
) -> Result<DecayReport> {
    let mut rows: Vec<(f64, usize, f64, f64, f64)> = Vec::new(); // t, id, d, one_plus_x, norm
    let mut lower = false;
    let mut pair_id = 0usize;
    for &(t, ref kernel) in kernels {
        let r = t.powf(1.0 / m_ord);
        let b1 = space.ball(base_center, r);
        if b1.members.is_empty() {
            return Err(Error::Invalid(format!("empty base ball at t = {t}")));
        }
        let mut seen: Vec<usize> = Vec::new();
        for &x in x_grid {
            let (b2, d_eff) = if x == 0.0 {
                (b1.clone(), 0.0)
            } else {
                let dc = (x * r + 2.0 * r).round() as usize;
                if seen.contains(&dc) {
                    continue;
                }
                seen.push(dc);
                let c2 = space.point_at_distance(base_center, dc as f64);
                if space.dist[[base_center, c2]] != dc as f64 {
                    continue;
                }
                (space.ball(c2, r), dc as f64 - 2.0 * r)
            };
            if b2.members.is_empty() {
                continue;
            }
            let (blk, mu_r, mu_c) = norms::block(kernel, &space.measure, &b2.members, &b1.members);
            let est = norms::op_norm(&blk, &mu_r, &mu_c, p, q, seed.wrapping_add(pair_id as u64))?;
            lower |= !est.is_exact();
            let norm = est.value() / volume_factor(space.volume(&b1.members), p, q);
            if norm > 1e-300 {
                rows.push((t, pair_id, d_eff.max(0.0), 1.0 + d_eff.max(0.0) / r, norm));
                pair_id += 1;
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Invalid("power offdiag: no usable pairs".into()));
    }
    // fitted decay order from off-diagonal rows with non-negligible norms
    let far: Vec<&(f64, usize, f64, f64, f64)> =
        rows.iter().filter(|r| r.3 > 1.0 && r.4 > 1e-13).collect();
    let (order, r2) = if far.len() >= 2 {
        let xs: Vec<f64> = far.iter().map(|r| r.3.ln()).collect();
        let ys: Vec<f64> = far.iter().map(|r| r.4.ln()).collect();
        let fit = linfit(&xs, &ys);
        (-fit.slope, fit.r2)
    } else {
        (f64::NAN, f64::NAN)
    };
    // constant of the claimed (1 + d/r)^{-nu} envelope
    let c_env = rows.iter().map(|r| r.4 * r.3.powf(nu)).fold(0.0f64, f64::max);
    let mut out_rows = Vec::with_capacity(rows.len());
    let mut max_ratio = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    for (t, id, d, opx, norm) in rows {
        let model = c_env * opx.powf(-nu);
        let ratio = norm / model;
        max_ratio = max_ratio.max(ratio);
        min_ratio = min_ratio.min(ratio);
        out_rows.push(DecayRow { t, pair_id: id, distance: d, norm, model_bound: model, ratio });
    }
    Ok(DecayReport {
        rows: out_rows,
        model: DecayModel::PowerOffdiag { nu },
        fitted_rate: order,
        fitted_log_c: c_env.ln(),
        r2,
        max_ratio,
        min_ratio,
        seed,
        lower_bound_flag: lower,
    })
}

/// Largest per-scale envelope constant sup over rows at scale t of
/// norm * (1 + d/r)^nu, one entry per distinct t, ordered by t.
pub fn per_scale_envelope(report: &DecayReport, nu: f64, m_ord: f64) -> Vec<(f64, f64)> {
    let mut ts: Vec<f64> = report.rows.iter().map(|r| r.t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.iter()
        .map(|&t| {
            let r = t.powf(1.0 / m_ord);
            let env = report
                .rows
                .iter()
                .filter(|row| row.t == t)
                .map(|row| row.norm * (1.0 + row.distance / r).powf(nu))
                .fold(0.0f64, f64::max);
            (t, env)
        })
        .collect()
}
