//! Pseudodifferential operators T_sigma attached to a symbol and the spectral
//! data of the generator: (T_sigma f)(x) = sum_k sigma(x, lambda_k) c_k u_k(x).

use crate::fit::{linfit, LinFit};
use crate::norms::{self, NormEstimate};
use crate::operator::{power_offdiag_report, DecayReport, SpectralData};
use crate::space::MetricMeasureSpace;
use crate::symbols::{ElementaryDecomposition, Symbol};
use crate::Result;
use ndarray::{Array1, Array2};
use num_complex::Complex64;

/// Kernel of T_sigma with respect to mu, split into real and imaginary parts
/// (the imaginary part is omitted for real symbols).
#[derive(Debug, Clone)]
pub struct PsdoKernel {
    pub re: Array2<f64>,
    pub im: Option<Array2<f64>>,
}

impl PsdoKernel {
    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    pub fn n(&self) -> usize {
        self.re.nrows()
    }

    pub fn to_complex(&self) -> Array2<Complex64> {
        let n = self.n();
        let mut out = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
        for x in 0..n {
            for y in 0..n {
                let im = self.im.as_ref().map(|m| m[[x, y]]).unwrap_or(0.0);
                out[[x, y]] = Complex64::new(self.re[[x, y]], im);
            }
        }
        out
    }

    /// Kernel of the mu-adjoint: K*(x, y) = conj K(y, x).
    pub fn adjoint(&self) -> PsdoKernel {
        PsdoKernel {
            re: self.re.t().to_owned(),
            im: self.im.as_ref().map(|m| m.t().map(|v| -v)),
        }
    }

    /// Apply through the kernel: (Tf)(x) = sum_y K(x,y) f(y) mu(y).
    pub fn apply(&self, mu: &[f64], f: &Array1<f64>) -> Array1<Complex64> {
        let fw: Array1<f64> = f.iter().zip(mu).map(|(v, &m)| v * m).collect();
        let re = self.re.dot(&fw);
        match &self.im {
            None => re.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            Some(im) => {
                let imv = im.dot(&fw);
                re.iter().zip(imv.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect()
            }
        }
    }

    /// L^p(mu) -> L^q(mu) operator norm of the kernel action.
    pub fn op_norm(&self, mu: &[f64], p: f64, q: f64, seed: u64) -> Result<NormEstimate> {
        match &self.im {
            None => norms::op_norm(&self.re, mu, mu, p, q, seed),
            Some(_) => norms::op_norm(&self.to_complex(), mu, mu, p, q, seed),
        }
    }
}

/// Dense kernel of T_sigma: K(x,y) = sum_k sigma(x, lambda_k) u_k(x) u_k(y).
pub fn kernel_matrix(sd: &SpectralData, symbol: &Symbol) -> PsdoKernel {
    let n = sd.n();
    if symbol.is_real() {
        let mut w = Array2::zeros((n, n));
        for x in 0..n {
            for k in 0..n {
                w[[x, k]] = symbol.eval_re(x, sd.eigenvalues[k]) * sd.basis[[x, k]];
            }
        }
        PsdoKernel { re: w.dot(&sd.basis.t()), im: None }
    } else {
        let mut wr = Array2::zeros((n, n));
        let mut wi = Array2::zeros((n, n));
        for x in 0..n {
            for k in 0..n {
                let s = symbol.eval(x, sd.eigenvalues[k]);
                wr[[x, k]] = s.re * sd.basis[[x, k]];
                wi[[x, k]] = s.im * sd.basis[[x, k]];
            }
        }
        PsdoKernel { re: wr.dot(&sd.basis.t()), im: Some(wi.dot(&sd.basis.t())) }
    }
}

/// Apply T_sigma through spectral coefficients, without forming the kernel:
/// an independent route used to cross-check `kernel_matrix`.
pub fn apply(sd: &SpectralData, symbol: &Symbol, f: &Array1<f64>) -> Array1<Complex64> {
    let n = sd.n();
    let c = sd.coeffs(f);
    let mut out = Array1::from_elem(n, Complex64::new(0.0, 0.0));
    for x in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            acc += symbol.eval(x, sd.eigenvalues[k]) * (c[k] * sd.basis[[x, k]]);
        }
        out[x] = acc;
    }
    out
}

/// Real-symbol variant of `apply`.
pub fn apply_re(sd: &SpectralData, symbol: &Symbol, f: &Array1<f64>) -> Array1<f64> {
    let n = sd.n();
    let c = sd.coeffs(f);
    let mut out = Array1::zeros(n);
    for x in 0..n {
        let mut acc = 0.0;
        for k in 0..n {
            acc += symbol.eval_re(x, sd.eigenvalues[k]) * c[k] * sd.basis[[x, k]];
        }
        out[x] = acc;
    }
    out
}

/// Off-diagonal decay of the scale-localized pieces T_{sigma psi_tilde(t .)}.
///
/// For each scale the symbol is multiplied by the plateau window at that
/// scale, the kernel is formed, and ball-pair block norms are fitted against
/// the (1 + d/r)^{-nu} envelope.
#[allow(clippy::too_many_arguments)]
pub fn scaled_offdiag_report(
    sd: &SpectralData,
    space: &MetricMeasureSpace,
    symbol: &Symbol,
    partition: crate::calculus::PartitionOfUnity,
    t_grid: &[f64],
    nu: f64,
    p: f64,
    q: f64,
    base_center: usize,
    x_grid: &[f64],
    seed: u64,
) -> Result<DecayReport> {
    if symbol.is_real() {
        let kernels: Vec<(f64, Array2<f64>)> = t_grid
            .iter()
            .map(|&t| {
                let pt = partition;
                let scaled = symbol.scaled_by("window", move |xi| pt.psi_tilde(t * xi));
                (t, kernel_matrix(sd, &scaled).re)
            })
            .collect();
        power_offdiag_report(&kernels, space, sd.order_m, nu, p, q, base_center, x_grid, seed)
    } else {
        let kernels: Vec<(f64, Array2<Complex64>)> = t_grid
            .iter()
            .map(|&t| {
                let pt = partition;
                let scaled = symbol.scaled_by("window", move |xi| pt.psi_tilde(t * xi));
                (t, kernel_matrix(sd, &scaled).to_complex())
            })
            .collect();
        power_offdiag_report(&kernels, space, sd.order_m, nu, p, q, base_center, x_grid, seed)
    }
}

/// Kernel of the commutator [P, M_gamma] for P with kernel k_p:
/// K(x,y) = k_p(x,y) (gamma(y) - gamma(x)).
pub fn commutator_kernel(k_p: &Array2<f64>, gamma: &Array1<f64>) -> Array2<f64> {
    let n = k_p.nrows();
    let mut out = Array2::zeros((n, n));
    for x in 0..n {
        for y in 0..n {
            out[[x, y]] = k_p[[x, y]] * (gamma[y] - gamma[x]);
        }
    }
    out
}

/// Norms of commutators [Psi(tL), M_{gamma_t}] across scales, and the fitted
/// slope of ln norm against ln t. For a Lipschitz-type multiplier family the
/// slope tracks (1 - delta) / 2 in the operator's natural calibration.
#[derive(Debug, Clone)]
pub struct CommutatorSlopeReport {
    pub ts: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: LinFit,
}

pub fn commutator_slope(
    sd: &SpectralData,
    shell: impl Fn(f64) -> f64,
    gamma_at: impl Fn(f64) -> Array1<f64>,
    ts: &[f64],
    seed: u64,
) -> Result<CommutatorSlopeReport> {
    let mut kept_t = Vec::new();
    let mut kept_n = Vec::new();
    for (i, &t) in ts.iter().enumerate() {
        let kp = sd.multiplier_kernel(|l| shell(t * l));
        let gamma = gamma_at(t);
        let kc = commutator_kernel(&kp, &gamma);
        let est = norms::op_norm(&kc, &sd.measure, &sd.measure, 2.0, 2.0, seed.wrapping_add(i as u64))?;
        let v = est.value();
        if v > 1e-13 {
            kept_t.push(t);
            kept_n.push(v);
        }
    }
    let xs: Vec<f64> = kept_t.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = kept_n.iter().map(|v| v.ln()).collect();
    let fit = linfit(&xs, &ys);
    Ok(CommutatorSlopeReport { ts: kept_t, norms: kept_n, fit })
}

/// Apply the reconstructed operator from an elementary decomposition,
/// keeping frequencies |l| <= l_cut:
/// T f ~ T_tau f + sum_{i, l} h gamma_{l, t_i} .* (psi_tilde(t_i L) e^{2 pi i l t_i L} f).
pub fn apply_decomposition(
    dec: &ElementaryDecomposition,
    symbol: &Symbol,
    sd: &SpectralData,
    f: &Array1<f64>,
    l_cut: usize,
) -> Array1<Complex64> {
    let n = sd.n();
    let c = sd.coeffs(f);
    // coarse part tau = eta(xi) sigma
    let mut out = Array1::from_elem(n, Complex64::new(0.0, 0.0));
    for x in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let lam = sd.eigenvalues[k];
            acc += symbol.eval(x, lam) * (dec.partition.eta(lam) * c[k] * sd.basis[[x, k]]);
        }
        out[x] = acc;
    }
    let l_cut = l_cut.min(dec.l_max);
    let two_pi = 2.0 * std::f64::consts::PI;
    for (i, &t) in dec.t_grid.iter().enumerate() {
        let gm = &dec.gammas[i];
        for l in -(l_cut as i64)..=(l_cut as i64) {
            let g = sd.apply_multiplier_complex(
                |lam| {
                    let w = dec.partition.psi_tilde(t * lam);
                    if w == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::from_polar(w, two_pi * l as f64 * t * lam)
                    }
                },
                f,
            );
            let li = (l + dec.l_max as i64) as usize;
            for x in 0..n {
                out[x] += gm[[li, x]] * g[x] * dec.log_weight;
            }
        }
    }
    out
}
