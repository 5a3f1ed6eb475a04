//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! implicit-shift QL with eigenvector accumulation.
//!
//! Self-contained so results are bit-reproducible across machines and free of
//! BLAS backend variation. Accuracy is the classical n*eps*||A|| bound, which
//! the spectral-calculus layer budgets for (residual checks at 1e-9 on the
//! sizes used here).

use crate::{Error, Result};
use ndarray::{Array1, Array2};

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// On entry `z` holds the matrix; on exit it holds the accumulated orthogonal
/// transform, `d` the diagonal and `e` the subdiagonal (`e[0] = 0`).
fn tred2(z: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += z[[i, k]].abs();
            }
            if scale == 0.0 {
                e[i] = z[[i, l]];
            } else {
                for k in 0..=l {
                    z[[i, k]] /= scale;
                    h += z[[i, k]] * z[[i, k]];
                }
                let f = z[[i, l]];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[[i, l]] = f - g;
                let mut fsum = 0.0;
                for j in 0..=l {
                    z[[j, i]] = z[[i, j]] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[[j, k]] * z[[i, k]];
                    }
                    for k in (j + 1)..=l {
                        g += z[[k, j]] * z[[i, k]];
                    }
                    e[j] = g / h;
                    fsum += e[j] * z[[i, j]];
                }
                let hh = fsum / (h + h);
                for j in 0..=l {
                    let f = z[[i, j]];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let upd = f * e[k] + g * z[[i, k]];
                        z[[j, k]] -= upd;
                    }
                }
            }
        } else {
            e[i] = z[[i, l]];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        // d[i] still holds the Householder h for row i here.
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[[i, k]] * z[[k, j]];
                }
                for k in 0..i {
                    let upd = g * z[[k, i]];
                    z[[k, j]] -= upd;
                }
            }
        }
        d[i] = z[[i, i]];
        z[[i, i]] = 1.0;
        for j in 0..i {
            z[[j, i]] = 0.0;
            z[[i, j]] = 0.0;
        }
    }
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix, rotations
/// accumulated into `z`. Returns the index that failed if no convergence.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut Array2<f64>) -> std::result::Result<(), usize> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    // Absolute deflation floor at matrix scale: in gramians of numerically
    // rank-deficient matrices the trailing diagonal can sit many decades below
    // ||T||, and the purely local test never splits there.
    let mut anorm = 0.0f64;
    for i in 0..n {
        anorm = anorm.max(d[i].abs() + e[i].abs());
    }
    let floor = f64::EPSILON * anorm;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(l);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let denom = g + if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / denom;
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[[k, i + 1]];
                    z[[k, i + 1]] = s * z[[k, i]] + c * f;
                    z[[k, i]] = c * z[[k, i]] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues ascending and eigenvectors as columns, deterministic:
/// stable eigenvalue ordering and each column's first component exceeding
/// `1e-12 * ||v||_inf` in magnitude made positive.
pub(crate) fn eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dim(format!("eigh needs square, got {}x{}", n, a.ncols())));
    }
    if n == 0 {
        return Err(Error::Invalid("eigh on empty matrix".into()));
    }
    let mut z = a.clone();
    // Force exact symmetry; rounding asymmetry in the input would otherwise
    // leak into the rotations.
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (z[[i, j]] + z[[j, i]]);
            z[[i, j]] = m;
            z[[j, i]] = m;
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut d, &mut e, &mut z).map_err(Error::NoConverge)?;

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let mut vals = Array1::zeros(n);
    let mut vecs = Array2::zeros((n, n));
    for (new_k, &old_k) in idx.iter().enumerate() {
        vals[new_k] = d[old_k];
        let col = z.column(old_k);
        let mx = col.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > 1e-12 * mx {
                sign = if v >= 0.0 { 1.0 } else { -1.0 };
                break;
            }
        }
        for r in 0..n {
            vecs[[r, new_k]] = sign * col[r];
        }
    }
    Ok((vals, vecs))
}

/// Eigendecomposition of a mu-symmetric operator matrix (action on functions).
///
/// `l` must satisfy mu(x) l[x,y] = mu(y) l[y,x]. The problem is symmetrized as
/// S = D^{1/2} L D^{-1/2} with D = diag(mu); returned basis columns
/// u_k = D^{-1/2} v_k are orthonormal in L^2(mu).
pub(crate) fn eigh_mu(l: &Array2<f64>, mu: &[f64]) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = l.nrows();
    if mu.len() != n || l.ncols() != n {
        return Err(Error::Dim(format!(
            "eigh_mu: matrix {}x{}, measure len {}",
            n,
            l.ncols(),
            mu.len()
        )));
    }
    if mu.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Invalid("measure must be strictly positive".into()));
    }
    let sq: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            s[[i, j]] = l[[i, j]] * sq[i] / sq[j];
        }
    }
    let (vals, v) = eigh(&s)?;
    let mut u = v;
    for r in 0..n {
        let w = 1.0 / sq[r];
        for k in 0..n {
            u[[r, k]] *= w;
        }
    }
    Ok((vals, u))
}
