//! Witness-record plumbing for the embedding and Poincare checks: replay a
//! specific random draw and emit per-ball comparison rows.

use ndarray::Array1;
use psdocalc_core::operator::SpectralData;
use psdocalc_core::sobolev::{
    embedding_rhs, gamma_field, poincare_pair, random_band_limited, regularized_abs,
};
use psdocalc_core::space::MetricMeasureSpace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::artifacts::fmt_e;

pub const WITNESS_HEADER: &str = "ball_center,radius,lhs,rhs,ratio";

/// Re-derive the idx-th band-limited draw of the stream seeded with `seed`.
pub fn replay_band_limited(sd: &SpectralData, seed: u64, idx: usize) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lam_cut = sd.lambda_max() / 4.0;
    let mut f = random_band_limited(sd, lam_cut, &mut rng);
    for _ in 0..idx {
        f = random_band_limited(sd, lam_cut, &mut rng);
    }
    f
}

/// Geometric radius ladder 2^{j/2} up to half the diameter.
pub fn default_check_radii(space: &MetricMeasureSpace) -> Vec<f64> {
    let mut radii = Vec::new();
    let mut j = 0;
    loop {
        let r = 2f64.powf(j as f64 / 2.0);
        if r > space.diameter / 2.0 {
            break;
        }
        radii.push(r);
        j += 1;
    }
    radii
}

/// Embedding comparison rows |f(z)| vs the dyadic-average right side.
pub fn embedding_witness_rows(
    sd: &SpectralData,
    space: &MetricMeasureSpace,
    f: &Array1<f64>,
    m0: usize,
    kappa: f64,
    radii: &[f64],
    stride: usize,
) -> Vec<String> {
    let mut rows = Vec::new();
    for &r in radii {
        let ga = regularized_abs(sd, f, m0, r);
        for z in (0..space.n).step_by(stride) {
            let rhs = embedding_rhs(space, &ga, kappa, z, r);
            if rhs <= 1e-300 {
                continue;
            }
            let lhs = f[z].abs();
            rows.push(format!(
                "{z},{},{},{},{}",
                fmt_e(r),
                fmt_e(lhs),
                fmt_e(rhs),
                fmt_e(lhs / rhs)
            ));
        }
    }
    rows
}

/// Poincare comparison rows: ball oscillation vs r sqrt(ball energy).
pub fn poincare_witness_rows(
    space: &MetricMeasureSpace,
    f: &Array1<f64>,
    radii: &[f64],
    stride: usize,
) -> Vec<String> {
    let gam = gamma_field(space, f);
    let mut rows = Vec::new();
    for &r in radii {
        for z in (0..space.n).step_by(stride) {
            let Some((lhs, rhs)) = poincare_pair(space, f, &gam, z, r) else {
                continue;
            };
            rows.push(format!(
                "{z},{},{},{},{}",
                fmt_e(r),
                fmt_e(lhs),
                fmt_e(rhs),
                fmt_e(lhs / rhs)
            ));
        }
    }
    rows
}
