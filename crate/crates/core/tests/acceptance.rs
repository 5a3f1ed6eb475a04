//! End-to-end acceptance suite: ten numbered criteria, each with a frozen
//! configuration and explicit tolerance, printing one pass/fail line
//! (run with `--nocapture` to see the lines for passing criteria).

use ndarray::{Array1, Array2};
use psdocalc_core::bmo;
use psdocalc_core::calculus::{log_grid, PartitionOfUnity};
use psdocalc_core::norms;
use psdocalc_core::operator::{
    divergence_form_const, eigendecompose, graph_laplacian, heat_decay_report,
    per_scale_envelope, power_offdiag_report, SpectralData,
};
use psdocalc_core::psido;
use psdocalc_core::sobolev;
use psdocalc_core::space::{MeasureKind, MetricMeasureSpace, SpaceSpec};
use psdocalc_core::symbols::{self, Symbol, SymbolClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn build(spec: SpaceSpec) -> MetricMeasureSpace {
    MetricMeasureSpace::build(spec, MeasureKind::Counting).unwrap()
}

fn cycle_sd(n: usize) -> (MetricMeasureSpace, SpectralData) {
    let s = build(SpaceSpec::Cycle { n });
    let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
    (s, sd)
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rel_err(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y).abs()).fold(0.0f64, f64::max) / scale
}

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:02} {name}: {verdict} ({detail})");
}

#[test]
fn criterion_01_spectral_calculus_oracle_equivalence() {
    let tol = 1e-10;
    let mut worst = 0.0f64;
    for spec in [SpaceSpec::Cycle { n: 64 }, SpaceSpec::GridTorus { nx: 8, ny: 8 }] {
        let s = build(spec);
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let n = s.n;
        let f_mult = |l: f64| (-l).exp() + 0.5 / (1.0 + l);
        let kernel_mult = sd.multiplier_kernel(f_mult);
        let sym =
            Symbol::from_expr_str("(1 + 0.5 * x0) * xi / (1 + xi)", &s, SymbolClass::order_zero())
                .unwrap();
        let kernel_sym = psido::kernel_matrix(&sd, &sym);
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..20 {
            let f = random_vec(n, &mut rng);
            // route A: spectral coefficients; route B: dense kernel matvec
            let a1 = sd.apply_multiplier(f_mult, &f);
            let fw: Array1<f64> = f.iter().zip(&s.measure).map(|(v, &m)| v * m).collect();
            let b1 = kernel_mult.dot(&fw);
            worst = worst.max(rel_err(&a1, &b1));
            let a2 = psido::apply_re(&sd, &sym, &f);
            let b2c = kernel_sym.apply(&s.measure, &f);
            let b2: Array1<f64> = b2c.iter().map(|z| z.re).collect();
            worst = worst.max(rel_err(&a2, &b2));
        }
        // determinism: identical bits on a rerun
        let mut r1 = ChaCha8Rng::seed_from_u64(77);
        let f = random_vec(n, &mut r1);
        let u = sd.apply_multiplier(f_mult, &f);
        let v = sd.apply_multiplier(f_mult, &f);
        assert!(u.iter().zip(v.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    let pass = worst <= tol;
    report(1, "spectral calculus oracle equivalence", pass, &format!("max rel err {worst:.3e} <= {tol:.0e}"));
    assert!(pass);
}

#[test]
fn criterion_02_partition_identities() {
    let p = PartitionOfUnity::default();
    // dyadic telescoping sum = 1 on [2^-7, 2^7]
    let mut dyadic_err = 0.0f64;
    let mut probe = log_grid(2f64.powi(-7), 2f64.powi(7), 200);
    probe.push(2f64.powi(-7));
    probe.push(2f64.powi(7));
    for &xi in &probe {
        dyadic_err = dyadic_err.max((p.dyadic_sum(-9, 9, xi) - 1.0).abs());
    }
    // continuous identity, refined from q = 16 nodes per octave
    let cont_probe = log_grid(0.5, 200.0, 64);
    let (cont_err, q_final) = p.identity_error_refined(1.0 / 256.0, 1.0, &cont_probe, 16, 1e-8, 1024);
    let pass = dyadic_err <= 1e-12 && cont_err <= 1e-8;
    report(
        2,
        "partition identities",
        pass,
        &format!("dyadic err {dyadic_err:.3e} <= 1e-12, continuous err {cont_err:.3e} <= 1e-8 at q = {q_final}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_heat_offdiagonal_decay() {
    let (s, sd) = cycle_sd(512);
    let rep = heat_decay_report(&sd, &s, &[1.0, 4.0, 16.0], 2.0, 2.0, 0, (1.0, 60.0), 31).unwrap();
    let pass = rep.rows.len() >= 30 && rep.fitted_rate > 0.1 && rep.r2 > 0.95 && !rep.lower_bound_flag;
    report(
        3,
        "gaussian heat kernel decay",
        pass,
        &format!(
            "{} pairs, c = {:.4} > 0.1, R2 = {:.4} > 0.95",
            rep.rows.len(),
            rep.fitted_rate,
            rep.r2
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_elementary_decomposition() {
    let (s, sd) = cycle_sd(64);
    let sym =
        Symbol::from_expr_str("(1 + 0.5 * x0) * xi / (1 + xi)", &s, SymbolClass::order_zero())
            .unwrap();
    let dec = symbols::decompose(&sym, &sd, PartitionOfUnity::default(), 32, 64).unwrap();
    let probe = symbols::default_probe(&sd, 64);
    let residual = dec.reconstruction_residual(&sym, &probe);
    let fit = dec.gamma_decay_fit();
    let pass = residual < 1e-3 && fit.slope <= -4.0 && fit.r2 > 0.9;
    report(
        4,
        "elementary symbol decomposition",
        pass,
        &format!(
            "residual {residual:.3e} < 1e-3, decay slope {:.2} <= -4, R2 = {:.3} > 0.9",
            fit.slope, fit.r2
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_uniform_boundedness_across_sizes() {
    // fixed symbol in the rho = 1, delta = 0 class of order zero
    let norm_s10 = |n: usize| -> f64 {
        let (s, sd) = cycle_sd(n);
        let sym =
            Symbol::from_expr_str("1 + 0.5 * x0 * xi / (1 + xi)", &s, SymbolClass::order_zero())
                .unwrap();
        let k = psido::kernel_matrix(&sd, &sym);
        k.op_norm(&s.measure, 2.0, 2.0, 51).unwrap().value()
    };
    // delta = 1/2 family: x-oscillation frequency tied to the spectral scale
    let norm_s1h = |n: usize| -> f64 {
        let (s, sd) = cycle_sd(n);
        let nf = n as f64;
        let sym = Symbol::real_fn(
            "delta-half family",
            move |x, xi| {
                let mut acc = 1.0;
                for j in -1i32..=2 {
                    let lam = 2f64.powi(j).sqrt().min(3.9);
                    let k = ((nf * (1.0 - lam / 2.0).acos() / (2.0 * std::f64::consts::PI))
                        .round() as usize)
                        .max(1);
                    let bump = if xi > 0.0 {
                        let r = (xi / 2f64.powi(j)).ln();
                        (-4.0 * r * r).exp()
                    } else {
                        0.0
                    };
                    acc += 0.3
                        * (2.0 * std::f64::consts::PI * k as f64 * x as f64 / nf).cos()
                        * bump;
                }
                acc
            },
            SymbolClass { s: 0.0, rho: 1.0, delta: 0.5 },
        );
        let k = psido::kernel_matrix(&sd, &sym);
        k.op_norm(&s.measure, 2.0, 2.0, 52).unwrap().value()
    };
    let a: Vec<f64> = [64, 128, 256].iter().map(|&n| norm_s10(n)).collect();
    let b: Vec<f64> = [64, 128, 256].iter().map(|&n| norm_s1h(n)).collect();
    let spread = |v: &[f64]| {
        v.iter().fold(0.0f64, |m, &x| m.max(x)) / v.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    };
    let (sa, sb) = (spread(&a), spread(&b));
    let pass = sa <= 1.5 && sb <= 1.5;
    report(
        5,
        "uniform boundedness across sizes",
        pass,
        &format!("rho=1,delta=0 spread {sa:.4} <= 1.5; rho=1,delta=1/2 spread {sb:.4} <= 1.5"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_scaled_window_offdiagonal_order() {
    let (s, sd) = cycle_sd(512);
    let nu = 3.0;
    let ts = [0.25, 1.0, 4.0];
    let kernels: Vec<(f64, Array2<f64>)> = ts
        .iter()
        .map(|&t| {
            // vanishing order 2 at 0, super-polynomial decay at infinity,
            // normalized to unit sup over the spectral band
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
        &s,
        sd.order_m,
        nu,
        2.0,
        2.0,
        0,
        &[0.0, 2.0, 3.0, 4.0, 6.0, 8.0],
        61,
    )
    .unwrap();
    let env = per_scale_envelope(&rep, nu, sd.order_m);
    let emax = env.iter().map(|e| e.1).fold(0.0f64, f64::max);
    let emin = env.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let spread = emax / emin;
    let pass = rep.fitted_rate >= nu && spread <= 3.0 && !rep.lower_bound_flag;
    report(
        6,
        "scaled window off-diagonal order",
        pass,
        &format!("fitted order {:.2} >= 3, per-scale envelope spread {spread:.2} <= 3", rep.fitted_rate),
    );
    assert!(pass);
}

#[test]
fn criterion_07_adjoint_defect_slope() {
    let s = build(SpaceSpec::Cycle { n: 256 });
    let op = divergence_form_const(&s, 64.0).unwrap();
    let sd = eigendecompose(&op, &s).unwrap();
    let n0 = 2;
    let shell = move |u: f64| if u <= 0.0 { 0.0 } else { (u * (1.0 - u).exp()).powi(n0) };
    let ts: Vec<f64> = (4..=16).map(|j| 2f64.powf(-(j as f64) / 2.0)).collect();
    // delta = 0: fixed Lipschitz-type multiplier
    let gamma0: Array1<f64> =
        (0..256).map(|i| (2.0 * std::f64::consts::PI * i as f64 / 256.0).cos()).collect();
    let rep0 = psido::commutator_slope(&sd, shell, |_| gamma0.clone(), &ts, 71).unwrap();
    // delta = 1/2: band-bump kernel row at the scale-linked eigenvalue
    let sd2 = sd.clone();
    let rep_h = psido::commutator_slope(
        &sd,
        shell,
        move |t: f64| {
            let lam_t = t.powf(-0.5);
            let k = sd2.multiplier_kernel(|l| {
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
        72,
    )
    .unwrap();
    let (t0, th) = (0.5, 0.25); // targets (1 - delta) / m
    let (e0, eh) = ((rep0.fit.slope - t0).abs(), (rep_h.fit.slope - th).abs());
    let pass = e0 <= 0.2 && eh <= 0.2;
    report(
        7,
        "adjoint defect slope",
        pass,
        &format!(
            "delta=0 slope {:.3} (target 0.5 +- 0.2), delta=1/2 slope {:.3} (target 0.25 +- 0.2)",
            rep0.fit.slope, rep_h.fit.slope
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_oscillation_and_paraproduct() {
    let s = build(SpaceSpec::GridTorus { nx: 16, ny: 16 });
    let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
    let n = s.n;
    let radii = bmo::default_radii(&s);
    let m_param = 2usize;
    // oscillation norm of constants
    let const_f = Array1::from_elem(n, 2.0);
    let bmo_const = bmo::bmo_norm(&sd, &s, &const_f, m_param, &radii).unwrap().value;
    // the scale windows annihilate constants
    let ones = Array1::from_elem(n, 1.0);
    let mut window_const = 0.0f64;
    for &t in &[0.1, 1.0, 7.3] {
        let w = sd.apply_multiplier(|l| (t * l).powi(2) * (-t * l).exp(), &ones);
        window_const = window_const.max(w.iter().fold(0.0f64, |m, &v| m.max(v.abs())));
    }
    // paraproduct = its symbol's operator, and batch norm ratios
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let g0 = random_vec(n, &mut rng);
    let pp0 = bmo::paraproduct(&sd, &g0, 2, 8).unwrap();
    let f0 = random_vec(n, &mut rng);
    let via_pp = pp0.apply(&sd, &f0);
    let sym0 = pp0.symbol(SymbolClass::order_zero());
    let via_sym = psido::apply_re(&sd, &sym0, &f0);
    let diff: Array1<f64> = via_pp.iter().zip(via_sym.iter()).map(|(a, b)| a - b).collect();
    let ident_rel = norms::lp_norm(diff.as_slice().unwrap(), &s.measure, 2.0)
        / norms::lp_norm(f0.as_slice().unwrap(), &s.measure, 2.0);
    let p1 = pp0.apply(&sd, &ones);
    let annihilation = p1.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut ratios = Vec::new();
    for _ in 0..20 {
        let g = random_vec(n, &mut rng);
        let pp = bmo::paraproduct(&sd, &g, 2, 8).unwrap();
        let nrm = pp.kernel(&sd).op_norm(&s.measure, 2.0, 2.0, 82).unwrap().value();
        let gsup = g.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        ratios.push(nrm / gsup);
    }
    let rspread = ratios.iter().fold(0.0f64, |m, &v| m.max(v))
        / ratios.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let pass = bmo_const <= 1e-12
        && window_const <= 1e-12
        && ident_rel <= 1e-6
        && annihilation <= 1e-12
        && rspread <= 5.0;
    report(
        8,
        "oscillation norm and paraproduct",
        pass,
        &format!(
            "const osc {bmo_const:.1e}, window-of-1 {window_const:.1e}, identity rel {ident_rel:.1e}, pi(1) {annihilation:.1e}, norm ratio spread {rspread:.3} <= 5"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_sobolev_mapping_stability() {
    // identity cancellation is exact
    let (s0, sd0) = cycle_sd(128);
    let ident = Symbol::multiplier("1", |_| 1.0, SymbolClass::order_zero());
    let k0 = psido::kernel_matrix(&sd0, &ident);
    let v0 = sobolev::mapping_norm(&sd0, &k0, 1.0, 1.0, 91).unwrap();
    let ident_err = (v0 - 1.0).abs();
    drop((s0, sd0));
    // conjugated norms of a fixed order-zero symbol stay level across sizes
    let conj = |n: usize| -> f64 {
        let (s, sd) = cycle_sd(n);
        let sym =
            Symbol::from_expr_str("1 + 0.5 * x0 * xi / (1 + xi)", &s, SymbolClass::order_zero())
                .unwrap();
        let k = psido::kernel_matrix(&sd, &sym);
        sobolev::mapping_norm(&sd, &k, 1.0, 1.0, 92).unwrap()
    };
    let vals: Vec<f64> = [64, 128, 256].iter().map(|&n| conj(n)).collect();
    let spread = vals.iter().fold(0.0f64, |m, &v| m.max(v))
        / vals.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let pass = ident_err <= 1e-10 && spread <= 1.5;
    report(
        9,
        "sobolev mapping stability",
        pass,
        &format!("identity case |1 - {v0:.12}| = {ident_err:.2e} <= 1e-10, spread {spread:.4} <= 1.5"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_geometry_assumptions() {
    // doubling exponents
    let cyc = build(SpaceSpec::Cycle { n: 128 });
    // 32x32 keeps three fit radii below diameter/2; on 16x16 the perimeter
    // term of the discrete ball count still biases the two-point fit.
    let tor = build(SpaceSpec::GridTorus { nx: 32, ny: 32 });
    let gas6 = build(SpaceSpec::Sierpinski { level: 6 });
    let n_of = |s: &MetricMeasureSpace| {
        s.doubling_profile(&s.default_doubling_radii()).unwrap().n_fit
    };
    let (nc, nt, ng) = (n_of(&cyc), n_of(&tor), n_of(&gas6));
    let log3_2 = 3f64.ln() / 2f64.ln();
    let doubling_ok =
        (nc - 1.0).abs() <= 0.15 && (nt - 2.0).abs() <= 0.15 && (ng - log3_2).abs() <= 0.15;
    // embedding and Poincare constants stable under one refinement step
    let check_level = |level: usize| -> (f64, f64) {
        let s = build(SpaceSpec::Sierpinski { level });
        let sd = eigendecompose(&graph_laplacian(&s), &s).unwrap();
        let mut radii = Vec::new();
        let mut j = 0;
        loop {
            let r = 2f64.powf(j as f64 / 2.0);
            if r > s.diameter / 2.0 {
                break;
            }
            radii.push(r);
            j += 1;
        }
        let emb = sobolev::embedding_check(&sd, &s, 2, 1.0, 32, 105, &radii, 3).unwrap();
        let poi = sobolev::p2_poincare_check(&sd, &s, 32, 106, &radii, 3).unwrap();
        (emb.constant, poi.constant)
    };
    let (e4, p4) = check_level(4);
    let (e5, p5) = check_level(5);
    let re = (e5 / e4).max(e4 / e5);
    let rp = (p5 / p4).max(p4 / p5);
    let stable_ok = re <= 2.0 && rp <= 2.0;
    let pass = doubling_ok && stable_ok;
    report(
        10,
        "geometry assumptions",
        pass,
        &format!(
            "doubling cycle {nc:.3} (1 +- 0.15), torus {nt:.3} (2 +- 0.15), gasket {ng:.3} ({log3_2:.3} +- 0.15); embedding ratio {re:.3} <= 2, poincare ratio {rp:.3} <= 2"
        ),
    );
    assert!(pass);
}
