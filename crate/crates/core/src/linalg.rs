// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense matrix helpers: the principal real logarithm and a few norms.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes on `[0, 1]` for the Padé evaluation of `log(I + X)`.
const LOG_QUADRATURE_POINTS: usize = 8;
/// `‖T - I‖₁` threshold below which the quadrature is accurate to roundoff.
const LOG_THRESHOLD: f64 = 0.25;
const MAX_SQRTS: i32 = 64;

pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.singular_values().max()
}

pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().exp()
}

/// Gauss–Legendre rule on `[0, 1]` by Golub–Welsch.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (eig.eigenvalues[i] + 1.0), v0 * v0)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Diagonal blocks `(start, size)` of a real quasi-triangular Schur factor.
/// Negligible subdiagonal entries are zeroed in place.
fn schur_blocks(t: &mut DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    for j in 0..n {
        for i in j + 2..n {
            t[(i, j)] = 0.0;
        }
    }
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n {
            let scale = (t[(i, i)].abs() + t[(i + 1, i + 1)].abs()).max(f64::MIN_POSITIVE);
            if t[(i + 1, i)].abs() > 1e-14 * scale {
                blocks.push((i, 2));
                i += 2;
                continue;
            }
            t[(i + 1, i)] = 0.0;
        }
        blocks.push((i, 1));
        i += 1;
    }
    blocks
}

/// Reject eigenvalues on the closed negative real axis. Complex pairs whose
/// imaginary part is at roundoff level next to a negative real part count as
/// negative: they come from a perturbed negative double eigenvalue.
fn check_spectrum(t: &DMatrix<f64>, blocks: &[(usize, usize)]) -> Result<()> {
    for &(s, size) in blocks {
        if size == 1 {
            let v = t[(s, s)];
            if v <= 0.0 {
                return Err(Error::LogarithmExistence { re: v, im: 0.0 });
            }
            continue;
        }
        let (a, b, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
        let half_tr = 0.5 * (a + d);
        let disc = 0.25 * (a - d) * (a - d) + b * c;
        if disc >= 0.0 {
            for v in [half_tr - disc.sqrt(), half_tr + disc.sqrt()] {
                if v <= 0.0 {
                    return Err(Error::LogarithmExistence { re: v, im: 0.0 });
                }
            }
        } else {
            let im = (-disc).sqrt();
            if half_tr < 0.0 && im <= 1e-8 * half_tr.abs() {
                return Err(Error::LogarithmExistence { re: half_tr, im });
            }
        }
    }
    Ok(())
}

fn block(m: &DMatrix<f64>, bi: (usize, usize), bj: (usize, usize)) -> DMatrix<f64> {
    m.view((bi.0, bj.0), (bi.1, bj.1)).into_owned()
}

/// Principal square root of a 1×1 or 2×2 block with no eigenvalues on the
/// closed negative real axis: `√A = (A + sI)/√(tr A + 2s)`, `s = √det A`.
fn sqrt_block(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.nrows() == 1 {
        return DMatrix::from_element(1, 1, a[(0, 0)].sqrt());
    }
    let s = a.determinant().sqrt();
    let t = (a.trace() + 2.0 * s).sqrt();
    (a + DMatrix::identity(2, 2) * s) / t
}

/// Solve `A X + X B = C` for small blocks via the Kronecker form.
fn sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (p, q) = (a.nrows(), b.nrows());
    let k = DMatrix::<f64>::identity(q, q).kronecker(a) + b.transpose().kronecker(&DMatrix::identity(p, p));
    let rhs = DVector::from_column_slice(c.as_slice());
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalRank("singular Sylvester system in square root".into()))?;
    Ok(DMatrix::from_column_slice(p, q, x.as_slice()))
}

/// Principal square root of an upper quasi-triangular matrix, block by block.
fn sqrt_quasi_triangular(t: &DMatrix<f64>, blocks: &[(usize, usize)]) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    let mut r = DMatrix::zeros(n, n);
    for (j, &bj) in blocks.iter().enumerate() {
        let rjj = sqrt_block(&block(t, bj, bj));
        r.view_mut((bj.0, bj.0), (bj.1, bj.1)).copy_from(&rjj);
        for i in (0..j).rev() {
            let bi = blocks[i];
            let mut rhs = block(t, bi, bj);
            for &bk in &blocks[i + 1..j] {
                rhs -= block(&r, bi, bk) * block(&r, bk, bj);
            }
            let x = sylvester(&block(&r, bi, bi), &rjj, &rhs)?;
            r.view_mut((bi.0, bj.0), (bi.1, bj.1)).copy_from(&x);
        }
    }
    Ok(r)
}

/// `log(I + X) = ∫₀¹ X (I + sX)⁻¹ ds` by Gauss–Legendre quadrature, which
/// equals the diagonal Padé approximant of the same order.
fn log_near_identity(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut out = DMatrix::zeros(n, n);
    for (node, weight) in gauss_legendre(LOG_QUADRATURE_POINTS) {
        let y = (&id + x * node)
            .lu()
            .solve(x)
            .ok_or_else(|| Error::NumericalRank("singular factor in logarithm quadrature".into()))?;
        out += y * weight;
    }
    Ok(out)
}

/// Principal real logarithm by inverse scaling and squaring on the real
/// Schur form. Fails with [`Error::LogarithmExistence`] when an eigenvalue
/// lies on the closed negative real axis.
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() || n == 0 {
        return Err(Error::Domain(format!("logarithm of a {}x{} matrix", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("logarithm of a non-finite matrix".into()));
    }
    if n == 1 {
        let v = a[(0, 0)];
        if v <= 0.0 {
            return Err(Error::LogarithmExistence { re: v, im: 0.0 });
        }
        return Ok(DMatrix::from_element(1, 1, v.ln()));
    }
    let (q, mut t) = a.clone().schur().unpack();
    let blocks = schur_blocks(&mut t);
    check_spectrum(&t, &blocks)?;

    let id = DMatrix::<f64>::identity(n, n);
    let mut halvings = 0i32;
    while norm1(&(&t - &id)) > LOG_THRESHOLD {
        if halvings == MAX_SQRTS {
            return Err(Error::NumericalRank("square-root iteration did not approach the identity".into()));
        }
        t = sqrt_quasi_triangular(&t, &blocks)?;
        halvings += 1;
    }
    let l = log_near_identity(&(&t - &id))? * 2f64.powi(halvings);
    Ok(&q * l * q.transpose())
}

/// `‖A - Aᵀ‖_max ≤ tol · max(1, ‖A‖_max)`.
pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && (a - a.transpose()).abs().max() <= tol * a.abs().max().max(1.0)
}
