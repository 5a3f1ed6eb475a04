//! Sobolev scales attached to the generator, mapping norms between them, and
//! sampled embedding / Poincare inequality checks on doubling spaces.

use crate::norms;
use crate::operator::SpectralData;
use crate::psido::PsdoKernel;
use crate::space::MetricMeasureSpace;
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// H^s norm: ||(I + L)^{s/m} f||_{L^2(mu)}.
pub fn sobolev_norm(sd: &SpectralData, f: &Array1<f64>, s: f64) -> f64 {
    let g = sd.apply_multiplier(|l| (1.0 + l).powf(s / sd.order_m), f);
    norms::lp_norm(g.as_slice().unwrap(), &sd.measure, 2.0)
}

/// Exact H^{s_source} -> H^{s_target} operator norm of a kernel operator:
/// the L^2 norm of (I+L)^{s_target/m} T (I+L)^{-s_source/m}.
pub fn mapping_norm(
    sd: &SpectralData,
    kernel: &PsdoKernel,
    s_source: f64,
    s_target: f64,
    seed: u64,
) -> Result<f64> {
    let m = sd.order_m;
    let n = sd.n();
    let mo = sd.multiplier_matrix(|l| (1.0 + l).powf(s_target / m));
    let mi = sd.multiplier_matrix(|l| (1.0 + l).powf(-s_source / m));
    let sandwich = |k: &Array2<f64>| -> Array2<f64> {
        let mut a = k.clone();
        for x in 0..n {
            for y in 0..n {
                a[[x, y]] *= sd.measure[y];
            }
        }
        let mut full = mo.dot(&a).dot(&mi);
        for x in 0..n {
            for y in 0..n {
                full[[x, y]] /= sd.measure[y];
            }
        }
        full
    };
    let kre = sandwich(&kernel.re);
    let est = match &kernel.im {
        None => norms::op_norm(&kre, &sd.measure, &sd.measure, 2.0, 2.0, seed)?,
        Some(im) => {
            let kim = sandwich(im);
            let mut kc = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
            for x in 0..n {
                for y in 0..n {
                    kc[[x, y]] = Complex64::new(kre[[x, y]], kim[[x, y]]);
                }
            }
            norms::op_norm(&kc, &sd.measure, &sd.measure, 2.0, 2.0, seed)?
        }
    };
    Ok(est.value())
}

/// Carre du champ of a graph Dirichlet form:
/// Gamma(f)(x) = (1 / (2 mu(x))) sum_{y ~ x} (f(y) - f(x))^2.
pub fn gamma_field(space: &MetricMeasureSpace, f: &Array1<f64>) -> Array1<f64> {
    let mut g = Array1::zeros(space.n);
    for &(u, v) in &space.edges {
        let d = f[u] - f[v];
        g[u] += d * d;
        g[v] += d * d;
    }
    for x in 0..space.n {
        g[x] /= 2.0 * space.measure[x];
    }
    g
}

/// Result of a sampled inequality check: the largest observed left/right
/// ratio and where it occurred.
#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub constant: f64,
    pub worst_draw: usize,
    pub worst_center: usize,
    pub worst_radius: f64,
    pub n_rows: usize,
}

/// Band-limited random field: uniform coefficients on eigenvalues up to
/// lam_cut, normalized to unit mu-mean-square.
pub fn random_band_limited(sd: &SpectralData, lam_cut: f64, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let n = sd.n();
    let mut c = Array1::zeros(n);
    for k in 0..n {
        if sd.eigenvalues[k] <= lam_cut {
            c[k] = rng.gen_range(-1.0..1.0);
        }
    }
    let f = sd.synthesize(&c);
    let total: f64 = sd.measure.iter().sum();
    let ms = f.iter().zip(&sd.measure).map(|(v, &m)| v * v * m).sum::<f64>() / total;
    if ms > 0.0 {
        let s = ms.sqrt().recip();
        f.map(|v| v * s)
    } else {
        f
    }
}

/// Regularized absolute field |(I + r^m L)^{M0} f| entering the embedding
/// right side at scale r.
pub fn regularized_abs(sd: &SpectralData, f: &Array1<f64>, m0: usize, r: f64) -> Array1<f64> {
    let t = r.powf(sd.order_m);
    sd.apply_multiplier(|l| (1.0 + t * l).powi(m0 as i32), f).map(|v| v.abs())
}

/// Embedding right side at one center: sum_i 2^{-i kappa} avg_{B(z, 2^i r)}
/// of the regularized field, the sum stopping at the first ball that covers
/// the space.
pub fn embedding_rhs(
    space: &MetricMeasureSpace,
    ga: &Array1<f64>,
    kappa: f64,
    z: usize,
    r: f64,
) -> f64 {
    let mut rhs = 0.0;
    let mut i = 0u32;
    loop {
        let ball = space.ball(z, r * 2f64.powi(i as i32));
        if !ball.members.is_empty() {
            let vol = space.volume(&ball.members);
            let avg: f64 =
                ball.members.iter().map(|&y| ga[y] * space.measure[y]).sum::<f64>() / vol;
            rhs += 2f64.powf(-(i as f64) * kappa) * avg;
        }
        if ball.members.len() == space.n {
            break;
        }
        i += 1;
    }
    rhs
}

/// One Poincare comparison on the ball at (z, r): returns
/// (avg_B |f - avg_B f|, r sqrt(avg_B Gamma(f))), or None when the ball is
/// trivial or the energy side vanishes.
pub fn poincare_pair(
    space: &MetricMeasureSpace,
    f: &Array1<f64>,
    gam: &Array1<f64>,
    z: usize,
    r: f64,
) -> Option<(f64, f64)> {
    let ball = space.ball(z, r);
    if ball.members.len() < 2 {
        return None;
    }
    let vol = space.volume(&ball.members);
    let mean: f64 = ball.members.iter().map(|&y| f[y] * space.measure[y]).sum::<f64>() / vol;
    let osc: f64 =
        ball.members.iter().map(|&y| (f[y] - mean).abs() * space.measure[y]).sum::<f64>() / vol;
    let energy: f64 =
        ball.members.iter().map(|&y| gam[y] * space.measure[y]).sum::<f64>() / vol;
    let denom = r * energy.sqrt();
    if denom <= 1e-300 {
        return None;
    }
    Some((osc, denom))
}

/// Pointwise embedding against dyadic averages of a regularized field:
/// |f(z)| <= C sum_i 2^{-i kappa} avg_{B(z, 2^i r)} |(I + r^m L)^{M0} f|,
/// the sum running until a ball covers the space. Reports the largest
/// observed constant over random band-limited draws, centers, and radii.
#[allow(clippy::too_many_arguments)]
pub fn embedding_check(
    sd: &SpectralData,
    space: &MetricMeasureSpace,
    m0: usize,
    kappa: f64,
    draws: usize,
    seed: u64,
    radii: &[f64],
    center_stride: usize,
) -> Result<InequalityReport> {
    if center_stride == 0 {
        return Err(Error::Invalid("center stride must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lam_cut = sd.lambda_max() / 4.0;
    let mut rep = InequalityReport {
        constant: 0.0,
        worst_draw: 0,
        worst_center: 0,
        worst_radius: 0.0,
        n_rows: 0,
    };
    for d in 0..draws {
        let f = random_band_limited(sd, lam_cut, &mut rng);
        for &r in radii {
            let ga = regularized_abs(sd, &f, m0, r);
            for z in (0..space.n).step_by(center_stride) {
                let rhs = embedding_rhs(space, &ga, kappa, z, r);
                if rhs <= 1e-300 {
                    continue;
                }
                rep.n_rows += 1;
                let ratio = f[z].abs() / rhs;
                if ratio > rep.constant {
                    rep.constant = ratio;
                    rep.worst_draw = d;
                    rep.worst_center = z;
                    rep.worst_radius = r;
                }
            }
        }
    }
    Ok(rep)
}

/// L^1 Poincare inequality with the carre du champ on the right:
/// avg_B |f - avg_B f| <= C r sqrt(avg_B Gamma(f)). Reports the largest
/// observed constant over random band-limited draws, centers, and radii.
#[allow(clippy::too_many_arguments)]
pub fn p2_poincare_check(
    sd: &SpectralData,
    space: &MetricMeasureSpace,
    draws: usize,
    seed: u64,
    radii: &[f64],
    center_stride: usize,
) -> Result<InequalityReport> {
    if center_stride == 0 {
        return Err(Error::Invalid("center stride must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lam_cut = sd.lambda_max() / 4.0;
    let mut rep = InequalityReport {
        constant: 0.0,
        worst_draw: 0,
        worst_center: 0,
        worst_radius: 0.0,
        n_rows: 0,
    };
    for d in 0..draws {
        let f = random_band_limited(sd, lam_cut, &mut rng);
        let gam = gamma_field(space, &f);
        for &r in radii {
            for z in (0..space.n).step_by(center_stride) {
                let Some((osc, denom)) = poincare_pair(space, &f, &gam, z, r) else {
                    continue;
                };
                rep.n_rows += 1;
                let ratio = osc / denom;
                if ratio > rep.constant {
                    rep.constant = ratio;
                    rep.worst_draw = d;
                    rep.worst_center = z;
                    rep.worst_radius = r;
                }
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{eigendecompose, graph_laplacian};
    use crate::psido::kernel_matrix;
    use crate::space::{MeasureKind, SpaceSpec};
    use crate::symbols::{Symbol, SymbolClass};

    fn cycle(n: usize) -> MetricMeasureSpace {
        MetricMeasureSpace::build(SpaceSpec::Cycle { n }, MeasureKind::Counting).unwrap()
    }

    #[test]
    fn sobolev_zero_is_l2() {
        let s = cycle(12);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let f: Array1<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let a = sobolev_norm(&sd, &f, 0.0);
        let b = norms::lp_norm(f.as_slice().unwrap(), &s.measure, 2.0);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn sobolev_norm_monotone_in_s() {
        let s = cycle(12);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let f: Array1<f64> = (0..12).map(|i| ((i * i) % 5) as f64).collect();
        assert!(sobolev_norm(&sd, &f, 1.0) >= sobolev_norm(&sd, &f, 0.0));
        assert!(sobolev_norm(&sd, &f, 0.0) >= sobolev_norm(&sd, &f, -1.0));
    }

    #[test]
    fn mapping_norm_of_identity_is_one() {
        let s = cycle(16);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let sym = Symbol::multiplier("1", |_| 1.0, SymbolClass::order_zero());
        let k = kernel_matrix(&sd, &sym);
        for &(src, tgt) in &[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)] {
            let v = mapping_norm(&sd, &k, src, tgt, 1).unwrap();
            assert!((v - 1.0).abs() < 1e-9, "s={src}->{tgt}: {v}");
        }
    }

    #[test]
    fn mapping_norm_tracks_order_shift_exactly() {
        // T = (I + L)^{1/m} maps H^1 -> H^0 isometrically on the scale
        let s = cycle(16);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let m = sd.order_m;
        let sym = Symbol::multiplier("(1+xi)^(1/m)", move |xi| (1.0 + xi).powf(1.0 / m), SymbolClass {
            s: 1.0,
            rho: 1.0,
            delta: 0.0,
        });
        let k = kernel_matrix(&sd, &sym);
        let v = mapping_norm(&sd, &k, 1.0, 0.0, 1).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "norm = {v}");
    }

    #[test]
    fn gamma_field_two_point() {
        let s = MetricMeasureSpace::build(SpaceSpec::Path { n: 2 }, MeasureKind::Counting).unwrap();
        let f = ndarray::array![0.0, 1.0];
        let g = gamma_field(&s, &f);
        assert!((g[0] - 0.5).abs() < 1e-15);
        assert!((g[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn embedding_constant_modest_on_cycle() {
        let s = cycle(32);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let rep = embedding_check(&sd, &s, 2, 1.0, 4, 17, &[1.0, 2.0, 4.0], 2).unwrap();
        assert!(rep.n_rows > 0);
        assert!(rep.constant > 0.0);
        assert!(rep.constant <= 2.0, "constant = {}", rep.constant);
    }

    #[test]
    fn poincare_constant_modest_on_cycle() {
        let s = cycle(32);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let rep = p2_poincare_check(&sd, &s, 4, 23, &[2.0, 4.0, 8.0], 2).unwrap();
        assert!(rep.n_rows > 0);
        assert!(rep.constant > 0.0);
        assert!(rep.constant <= 2.0, "constant = {}", rep.constant);
    }

    #[test]
    fn band_limited_draws_are_normalized_and_deterministic() {
        let s = cycle(24);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let f1 = random_band_limited(&sd, sd.lambda_max() / 4.0, &mut r1);
        let f2 = random_band_limited(&sd, sd.lambda_max() / 4.0, &mut r2);
        for i in 0..24 {
            assert_eq!(f1[i].to_bits(), f2[i].to_bits());
        }
        let total: f64 = s.measure.iter().sum();
        let ms = f1.iter().zip(&s.measure).map(|(v, &m)| v * v * m).sum::<f64>() / total;
        assert!((ms - 1.0).abs() < 1e-12);
    }
}
