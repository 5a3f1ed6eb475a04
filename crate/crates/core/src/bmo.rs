//! Semigroup-adapted oscillation (BMO-type) norms, T(1)-style diagnostics for
//! pseudodifferential kernels, and the paraproduct construction.

use crate::calculus::geometric_scale_grid;
use crate::operator::SpectralData;
use crate::psido::{self, PsdoKernel};
use crate::space::MetricMeasureSpace;
use crate::symbols::{Symbol, SymbolClass};
use crate::{Error, Result};
use ndarray::{Array1, Array2};

/// Semigroup-adapted oscillation norm: the sup over balls B(z, r) of the
/// mu-average over B of |(I - e^{-r^m L})^M f|.
#[derive(Debug, Clone)]
pub struct BmoReport {
    pub value: f64,
    pub worst_center: usize,
    pub worst_radius: f64,
    pub m_param: usize,
}

/// Default oscillation order from the measured doubling dimension:
/// ceil(n / 4) + 1 cancellations suffice for the volume growth seen.
pub fn default_m_from_doubling(space: &MetricMeasureSpace) -> Result<usize> {
    let prof = space.doubling_profile(&space.default_doubling_radii())?;
    Ok((prof.n_fit / 4.0).ceil().max(1.0) as usize + 1)
}

/// Quarter-octave radii 2^{j/4} from 1 up to the diameter.
pub fn default_radii(space: &MetricMeasureSpace) -> Vec<f64> {
    let mut out = Vec::new();
    let mut j = 0u32;
    loop {
        let r = 2f64.powf(j as f64 / 4.0);
        if r > space.diameter {
            break;
        }
        out.push(r);
        j += 1;
    }
    if out.is_empty() {
        out.push(1.0);
    }
    out
}

/// Pointwise modulus of (I - e^{-tL})^M applied to a complex field given by
/// real and imaginary parts (the operator is real, so parts map separately).
fn oscillation_field(
    sd: &SpectralData,
    f_re: &Array1<f64>,
    f_im: Option<&Array1<f64>>,
    m_param: usize,
    t: f64,
) -> Array1<f64> {
    let mul = |l: f64| (1.0 - (-t * l).exp()).powi(m_param as i32);
    let gre = sd.apply_multiplier(mul, f_re);
    match f_im {
        None => gre.map(|v| v.abs()),
        Some(fi) => {
            let gim = sd.apply_multiplier(mul, fi);
            gre.iter().zip(gim.iter()).map(|(&a, &b)| a.hypot(b)).collect()
        }
    }
}

pub fn bmo_norm(
    sd: &SpectralData,
    space: &MetricMeasureSpace,
    f: &Array1<f64>,
    m_param: usize,
    radii: &[f64],
) -> Result<BmoReport> {
    bmo_norm_complex(sd, space, f, None, m_param, radii)
}

pub fn bmo_norm_complex(
    sd: &SpectralData,
    space: &MetricMeasureSpace,
    f_re: &Array1<f64>,
    f_im: Option<&Array1<f64>>,
    m_param: usize,
    radii: &[f64],
) -> Result<BmoReport> {
    if m_param == 0 {
        return Err(Error::Invalid("oscillation order must be at least 1".into()));
    }
    let mut value = 0.0f64;
    let mut worst_center = 0usize;
    let mut worst_radius = radii.first().copied().unwrap_or(1.0);
    for &r in radii {
        let t = r.powf(sd.order_m);
        let osc = oscillation_field(sd, f_re, f_im, m_param, t);
        for z in 0..space.n {
            let ball = space.ball(z, r);
            if ball.members.is_empty() {
                continue;
            }
            let vol = space.volume(&ball.members);
            let avg: f64 =
                ball.members.iter().map(|&y| osc[y] * space.measure[y]).sum::<f64>() / vol;
            if avg > value {
                value = avg;
                worst_center = z;
                worst_radius = r;
            }
        }
    }
    Ok(BmoReport { value, worst_center, worst_radius, m_param })
}

/// T(1)-style diagnostics of a pseudodifferential kernel: the exact L^2 -> L^2
/// norm next to the oscillation norms of T(1) and T*(1) and the size of the
/// zero-frequency symbol slice.
#[derive(Debug, Clone)]
pub struct T1Report {
    pub op_norm2: f64,
    pub t_one_bmo: f64,
    pub t_star_one_bmo: f64,
    pub sigma_zero_sup: f64,
    pub m_param: usize,
}

pub fn t1_test(
    sd: &SpectralData,
    space: &MetricMeasureSpace,
    symbol: &Symbol,
    m_param: usize,
    radii: &[f64],
    seed: u64,
) -> Result<T1Report> {
    let kernel = psido::kernel_matrix(sd, symbol);
    let est = kernel.op_norm(&space.measure, 2.0, 2.0, seed)?;
    let ones = Array1::from_elem(sd.n(), 1.0);
    let bmo_of = |k: &PsdoKernel| -> Result<f64> {
        let v = k.apply(&space.measure, &ones);
        let re: Array1<f64> = v.iter().map(|z| z.re).collect();
        if k.is_real() {
            Ok(bmo_norm_complex(sd, space, &re, None, m_param, radii)?.value)
        } else {
            let im: Array1<f64> = v.iter().map(|z| z.im).collect();
            Ok(bmo_norm_complex(sd, space, &re, Some(&im), m_param, radii)?.value)
        }
    };
    let t_one_bmo = bmo_of(&kernel)?;
    let t_star_one_bmo = bmo_of(&kernel.adjoint())?;
    let sigma_zero_sup =
        (0..sd.n()).map(|x| symbol.eval(x, 0.0).norm()).fold(0.0f64, f64::max);
    Ok(T1Report { op_norm2: est.value(), t_one_bmo, t_star_one_bmo, sigma_zero_sup, m_param })
}

/// Paraproduct against a fixed function g over a geometric scale grid:
/// Pi_g f = sum_i h (e^{-t_i L} g) .* ((t_i L)^M e^{-t_i L} f).
#[derive(Debug, Clone)]
pub struct Paraproduct {
    pub t_grid: Vec<f64>,
    pub log_weight: f64,
    pub m_exp: usize,
    /// Smoothed copies e^{-t_i L} g, one per scale.
    pub g_smooth: Vec<Array1<f64>>,
}

pub fn paraproduct(
    sd: &SpectralData,
    g: &Array1<f64>,
    m_exp: usize,
    q_per_octave: usize,
) -> Result<Paraproduct> {
    if m_exp == 0 {
        return Err(Error::Invalid("paraproduct exponent must be at least 1".into()));
    }
    let (t_grid, h) = geometric_scale_grid(sd.lambda_max(), q_per_octave)?;
    let g_smooth = t_grid.iter().map(|&t| sd.semigroup_apply(t, g)).collect();
    Ok(Paraproduct { t_grid, log_weight: h, m_exp, g_smooth })
}

impl Paraproduct {
    /// Action matrix: sum_i h diag(e^{-t_i L} g) Q_i with
    /// Q_i = (t_i L)^M e^{-t_i L}.
    pub fn action_matrix(&self, sd: &SpectralData) -> Array2<f64> {
        let n = sd.n();
        let m = self.m_exp as i32;
        let mut acc = Array2::zeros((n, n));
        for (i, &t) in self.t_grid.iter().enumerate() {
            let q = sd.multiplier_matrix(|l| (t * l).powi(m) * (-t * l).exp());
            let gi = &self.g_smooth[i];
            for x in 0..n {
                let w = self.log_weight * gi[x];
                for y in 0..n {
                    acc[[x, y]] += w * q[[x, y]];
                }
            }
        }
        acc
    }

    /// mu-kernel of the paraproduct: action matrix times diag(1/mu).
    pub fn kernel(&self, sd: &SpectralData) -> PsdoKernel {
        let mut a = self.action_matrix(sd);
        let n = sd.n();
        for x in 0..n {
            for y in 0..n {
                a[[x, y]] /= sd.measure[y];
            }
        }
        PsdoKernel { re: a, im: None }
    }

    pub fn apply(&self, sd: &SpectralData, f: &Array1<f64>) -> Array1<f64> {
        let m = self.m_exp as i32;
        let mut acc = Array1::zeros(sd.n());
        for (i, &t) in self.t_grid.iter().enumerate() {
            let qf = sd.apply_multiplier(|l| (t * l).powi(m) * (-t * l).exp(), f);
            let gi = &self.g_smooth[i];
            for x in 0..sd.n() {
                acc[x] += self.log_weight * gi[x] * qf[x];
            }
        }
        acc
    }

    /// The paraproduct's symbol sigma(x, xi) = sum_i h (e^{-t_i L} g)(x)
    /// (t_i xi)^M e^{-t_i xi}; the identity Pi_g = T_sigma is exact on the
    /// spectrum.
    pub fn symbol(&self, class: SymbolClass) -> Symbol {
        let t_grid = self.t_grid.clone();
        let g_smooth = self.g_smooth.clone();
        let h = self.log_weight;
        let m = self.m_exp as i32;
        Symbol::real_fn(
            "paraproduct",
            move |x, xi| {
                let mut acc = 0.0;
                for (i, &t) in t_grid.iter().enumerate() {
                    acc += h * g_smooth[i][x] * (t * xi).powi(m) * (-t * xi).exp();
                }
                acc
            },
            class,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{eigendecompose, graph_laplacian};
    use crate::space::{MeasureKind, SpaceSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cycle(n: usize) -> MetricMeasureSpace {
        MetricMeasureSpace::build(SpaceSpec::Cycle { n }, MeasureKind::Counting).unwrap()
    }

    #[test]
    fn bmo_of_constant_vanishes() {
        let s = cycle(20);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let f = Array1::from_elem(20, 3.5);
        let rep = bmo_norm(&sd, &s, &f, 2, &default_radii(&s)).unwrap();
        assert!(rep.value < 1e-12, "bmo = {}", rep.value);
    }

    #[test]
    fn bmo_is_homogeneous_and_bounded_by_sup() {
        let s = cycle(24);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let f: Array1<f64> =
            (0..24).map(|i| (2.0 * std::f64::consts::PI * i as f64 / 24.0).cos()).collect();
        let radii = default_radii(&s);
        let m = 2usize;
        let b1 = bmo_norm(&sd, &s, &f, m, &radii).unwrap().value;
        let b2 = bmo_norm(&sd, &s, &f.map(|v| 2.0 * v), m, &radii).unwrap().value;
        assert!((b2 - 2.0 * b1).abs() < 1e-12);
        // Markov semigroup: |(I - e^{-tL})^M f| <= 2^M sup |f|
        let sup = f.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(b1 <= 2f64.powi(m as i32) * sup + 1e-12);
        assert!(b1 > 0.0);
    }

    #[test]
    fn default_m_reflects_doubling_dimension() {
        let s = cycle(64);
        // cycles have doubling dimension 1: m = ceil(1/4) + 1 = 2
        assert_eq!(default_m_from_doubling(&s).unwrap(), 2);
    }

    #[test]
    fn t1_multiplier_symbol_oscillations_vanish() {
        let s = cycle(16);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        // x-independent symbol: T(1) = sigma(0) 1 is constant, so both
        // oscillation norms vanish
        let sym = Symbol::multiplier("xi/(1+xi)", |xi| xi / (1.0 + xi), SymbolClass::order_zero());
        let rep = t1_test(&sd, &s, &sym, 2, &default_radii(&s), 3).unwrap();
        assert!(rep.t_one_bmo < 1e-10);
        assert!(rep.t_star_one_bmo < 1e-10);
        assert!(rep.sigma_zero_sup < 1e-12);
        assert!(rep.op_norm2 <= 1.0 + 1e-9);
    }

    #[test]
    fn paraproduct_annihilates_constants_and_matches_symbol() {
        let s = cycle(20);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g: Array1<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pp = paraproduct(&sd, &g, 2, 8).unwrap();
        // Pi_g 1 = 0 exactly: (t L)^M e^{-tL} kills constants
        let ones = Array1::from_elem(20, 1.0);
        let p1 = pp.apply(&sd, &ones);
        assert!(p1.iter().all(|v| v.abs() < 1e-12));
        // Pi_g = T_{sigma_g}: kernels agree to rounding
        let sym = pp.symbol(SymbolClass::order_zero());
        let k_direct = pp.kernel(&sd);
        let k_symbol = psido::kernel_matrix(&sd, &sym);
        for x in 0..20 {
            for y in 0..20 {
                assert!((k_direct.re[[x, y]] - k_symbol.re[[x, y]]).abs() < 1e-10);
            }
        }
        // and the apply routes agree
        let f: Array1<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let via_pp = pp.apply(&sd, &f);
        let via_sym = psido::apply_re(&sd, &sym, &f);
        for x in 0..20 {
            assert!((via_pp[x] - via_sym[x]).abs() < 1e-10);
        }
    }

    #[test]
    fn paraproduct_of_constant_g_is_single_exponential_profile() {
        // e^{-tL} g = c for constant g, so sigma(x, xi) reduces to
        // c sum_i h (t_i xi)^M e^{-t_i xi}: one exponential factor per scale
        let s = cycle(12);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let c = 2.5;
        let g = Array1::from_elem(12, c);
        let pp = paraproduct(&sd, &g, 2, 8).unwrap();
        let sym = pp.symbol(SymbolClass::order_zero());
        for &xi in &[0.3, 1.0, 2.7] {
            let expect: f64 = pp
                .t_grid
                .iter()
                .map(|&t| pp.log_weight * c * (t * xi).powi(2) * (-t * xi).exp())
                .sum();
            assert!((sym.eval_re(0, xi) - expect).abs() < 1e-13);
        }
    }
}
