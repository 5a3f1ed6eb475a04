//! Smooth Littlewood-Paley partitions of unity on the spectral axis, their
//! exact telescoping identities, and Mihlin-type multiplier condition checks.

use crate::fit::{linfit, LinFit};
use crate::operator::{DecayReport, SpectralData};
use crate::space::MetricMeasureSpace;
use crate::{Error, Result};
use ndarray::Array2;

/// C-infinity step: 0 for x <= 0, 1 for x >= 1, strictly increasing between.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Closed-form derivative of `smooth_step`.
pub fn smooth_step_deriv(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        let s = a + b;
        a * b * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x))) / (s * s)
    }
}

/// Smooth spectral cutoff eta with transition zone (a, b) strictly inside
/// (1, 2): eta = 1 on (-inf, a], 0 on [b, inf). The generator
/// psi(u) = -u eta'(u) then has support [a, b], and the reconstruction window
/// psi_tilde is 1 on [a, b] with support inside [1, 2] (edge width 0.08), so
/// the Fourier-series representation of elementary symbols is alias-free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionOfUnity {
    pub a: f64,
    pub b: f64,
}

pub const PSI_TILDE_EDGE: f64 = 0.08;

impl Default for PartitionOfUnity {
    fn default() -> Self {
        PartitionOfUnity { a: 1.1, b: 1.9 }
    }
}

impl PartitionOfUnity {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(1.0 < a && a < b && b < 2.0) {
            return Err(Error::Invalid(format!("transition zone ({a}, {b}) must satisfy 1 < a < b < 2")));
        }
        if a - PSI_TILDE_EDGE < 1.0 || b + PSI_TILDE_EDGE > 2.0 {
            return Err(Error::Invalid(format!(
                "transition zone ({a}, {b}) leaves no room for the reconstruction window edges"
            )));
        }
        Ok(PartitionOfUnity { a, b })
    }

    /// eta(u): 1 for u <= a, 0 for u >= b.
    pub fn eta(&self, u: f64) -> f64 {
        1.0 - smooth_step((u - self.a) / (self.b - self.a))
    }

    /// psi(u) = -u eta'(u), exactly (closed-form derivative), supported [a, b].
    pub fn psi(&self, u: f64) -> f64 {
        u * smooth_step_deriv((u - self.a) / (self.b - self.a)) / (self.b - self.a)
    }

    /// Reconstruction window: 1 on [a, b], supported in
    /// [a - 0.08, b + 0.08] subset of [1, 2].
    pub fn psi_tilde(&self, u: f64) -> f64 {
        let w = PSI_TILDE_EDGE;
        smooth_step((u - (self.a - w)) / w) * (1.0 - smooth_step((u - self.b) / w))
    }

    /// Dyadic piece at scale 2^j: delta_j(xi) = eta(2^{-j} xi) - eta(2^{-j+1} xi).
    pub fn delta_j(&self, j: i32, xi: f64) -> f64 {
        let s = (-j as f64).exp2();
        self.eta(s * xi) - self.eta(2.0 * s * xi)
    }

    /// sum_{j = j_lo}^{j_hi} delta_j(xi); telescopes to
    /// eta(2^{-j_hi} xi) - eta(2^{-j_lo + 1} xi), hence exactly 1 on
    /// [b 2^{j_lo - 1}, a 2^{j_hi}].
    pub fn dyadic_sum(&self, j_lo: i32, j_hi: i32, xi: f64) -> f64 {
        (j_lo..=j_hi).map(|j| self.delta_j(j, xi)).sum()
    }

    /// Closed form of the continuous resolution:
    /// int_{t0}^{t1} psi(t xi) dt/t = eta(t0 xi) - eta(t1 xi).
    pub fn continuous_exact(&self, t0: f64, t1: f64, xi: f64) -> f64 {
        self.eta(t0 * xi) - self.eta(t1 * xi)
    }

    /// Midpoint quadrature of the same integral on a geometric grid with
    /// q nodes per octave, anchored at t1 and extended past t0 (the overshoot
    /// lands where psi vanishes).
    pub fn continuous_quad(&self, t0: f64, t1: f64, xi: f64, q: usize) -> f64 {
        assert!(t0 < t1 && q > 0);
        let h = std::f64::consts::LN_2 / q as f64;
        let k = ((t1 / t0).ln() / h).ceil() as usize;
        let mut acc = 0.0;
        for i in 0..k {
            let t = t1 * (-(i as f64 + 0.5) * h).exp();
            acc += self.psi(t * xi);
        }
        acc * h
    }

    /// Discrete resolution of the identity on the staggered log-uniform grid
    /// t_i = t1 e^{-(i+0.5)h}: the quadrature sum runs down to the t0
    /// coverage bound, and the coarse part is the tail of the same sum over
    /// nodes above t1. The total is then a log-periodization of psi, so the
    /// error decays superalgebraically in q. Refines q by doubling until the
    /// sup over the probe grid passes `tol` or the cap is hit; returns
    /// (error, final q). Valid on probes with t0 * xi <= a.
    pub fn identity_error_refined(
        &self,
        t0: f64,
        t1: f64,
        probe: &[f64],
        q_start: usize,
        tol: f64,
        q_cap: usize,
    ) -> (f64, usize) {
        let mut q = q_start;
        loop {
            let h = std::f64::consts::LN_2 / q as f64;
            let k = ((t1 / t0).ln() / h).ceil() as i64;
            let mut err = 0.0f64;
            for &xi in probe {
                // contributing nodes: a < t_i xi < b
                let w = (t1 * xi).ln();
                let i_min = ((w - self.b.ln()) / h - 0.5).ceil() as i64;
                let i_max = (((w - self.a.ln()) / h - 0.5).floor() as i64).min(k - 1);
                let mut acc = 0.0;
                for i in i_min..=i_max {
                    let t = t1 * (-(i as f64 + 0.5) * h).exp();
                    acc += self.psi(t * xi);
                }
                err = err.max((acc * h - 1.0).abs());
            }
            if err <= tol || q >= q_cap {
                return (err, q);
            }
            q *= 2;
        }
    }
}

/// Central finite-difference derivative of order beta (1..=4) with one
/// Richardson extrapolation step; relative step scaled per order so the
/// h^beta denominator stays above roundoff.
pub fn derivative(f: &dyn Fn(f64) -> f64, x: f64, beta: usize) -> Result<f64> {
    if beta == 0 {
        return Ok(f(x));
    }
    if beta > 4 {
        return Err(Error::Unsupported("derivatives above order 4".into()));
    }
    let rel = (256.0 * f64::EPSILON).powf(1.0 / (beta as f64 + 2.0));
    let h0 = x.abs().max(1e-8) * rel;
    let stencil = |h: f64| -> f64 {
        match beta {
            1 => (f(x + h) - f(x - h)) / (2.0 * h),
            2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
            3 => (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h),
            _ => (f(x + 2.0 * h) - 4.0 * f(x + h) + 6.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h))
                / (h * h * h * h),
        }
    };
    let a1 = stencil(h0);
    let a2 = stencil(h0 / 2.0);
    Ok((4.0 * a2 - a1) / 3.0)
}

/// Mihlin condition table: values[beta] = sup over the probe grid of
/// |xi^beta F^(beta)(xi)|.
#[derive(Debug, Clone)]
pub struct MultiplierCondition {
    pub beta_values: Vec<f64>,
    pub constant: f64,
}

/// Geometric scale grid with q nodes per octave covering [1/lam_max, 1]:
/// t_i = exp(-(i + 0.5) h) with h = ln 2 / q, for i = 0 .. ceil(ln lam_max / h).
/// Midpoint nodes make the log-uniform quadrature sum telescoping-accurate.
pub fn geometric_scale_grid(lam_max: f64, q: usize) -> Result<(Vec<f64>, f64)> {
    if !(lam_max > 1.0) {
        return Err(Error::Invalid("scale grid needs a spectral band above the unit scale".into()));
    }
    if q == 0 {
        return Err(Error::Invalid("scale grid needs at least one node per octave".into()));
    }
    let h = std::f64::consts::LN_2 / q as f64;
    let k = (lam_max.ln() / h).ceil() as usize;
    Ok(((0..k).map(|i| (-(i as f64 + 0.5) * h).exp()).collect(), h))
}

/// Log-spaced probe grid.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn multiplier_condition(
    f: &dyn Fn(f64) -> f64,
    band: (f64, f64),
    n_probe: usize,
    beta_max: usize,
) -> Result<MultiplierCondition> {
    let probe = log_grid(band.0, band.1, n_probe);
    let mut beta_values = Vec::with_capacity(beta_max + 1);
    for beta in 0..=beta_max {
        let mut sup = 0.0f64;
        for &xi in &probe {
            let d = derivative(f, xi, beta)?;
            sup = sup.max((xi.powi(beta as i32) * d).abs());
        }
        beta_values.push(sup);
    }
    let constant = beta_values.iter().fold(0.0f64, |m, &v| m.max(v));
    Ok(MultiplierCondition { beta_values, constant })
}

/// Thin functional-calculus wrapper (spectral route).
pub fn multiplier_apply(
    sd: &SpectralData,
    f_of_lambda: impl Fn(f64) -> f64,
    f: &ndarray::Array1<f64>,
) -> ndarray::Array1<f64> {
    sd.apply_multiplier(f_of_lambda, f)
}

/// Off-diagonal decay of a family of spectral multipliers F_r(L), measured on
/// ball pairs of radius r and fitted against (1 + d/r)^{-nu}. `family` maps
/// (r, lambda) to the multiplier value.
#[allow(clippy::too_many_arguments)]
pub fn multiplier_offdiag_check(
    sd: &SpectralData,
    space: &MetricMeasureSpace,
    family: &dyn Fn(f64, f64) -> f64,
    r_grid: &[f64],
    nu: f64,
    p: f64,
    q: f64,
    base_center: usize,
    x_grid: &[f64],
    seed: u64,
) -> Result<DecayReport> {
    let kernels: Vec<(f64, Array2<f64>)> = r_grid
        .iter()
        .map(|&r| (r.powf(sd.order_m), sd.multiplier_kernel(|l| family(r, l))))
        .collect();
    crate::operator::power_offdiag_report(&kernels, space, sd.order_m, nu, p, q, base_center, x_grid, seed)
}

/// Composed-scale law: the exact L^2 norm of F_s(L) F_t(L) for the family
/// F_s(u) = (su)^n e^{-su} decays like (s/t)^n for s << t. Returns the fit of
/// log norm against log s over `s_grid` at fixed t.
pub fn composed_multiplier_slope(sd: &SpectralData, n_vanish: u32, s_grid: &[f64], t_fixed: f64) -> LinFit {
    let fam = |u: f64| u.powi(n_vanish as i32) * (-u).exp();
    let ys: Vec<f64> = s_grid
        .iter()
        .map(|&s| {
            sd.eigenvalues
                .iter()
                .map(|&l| (fam(s * l) * fam(t_fixed * l)).abs())
                .fold(0.0f64, f64::max)
                .ln()
        })
        .collect();
    let xs: Vec<f64> = s_grid.iter().map(|s| s.ln()).collect();
    linfit(&xs, &ys)
}
