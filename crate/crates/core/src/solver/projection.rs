use faer::linalg::matmul::matmul;
use faer::{Accum, MatRef, Par, Side};

use crate::{CMat, Error, Result, C64};

/// Eigenvalues in `(-PSD_ZERO_TOL, 0)` count as zero.
pub const PSD_ZERO_TOL: f64 = 1e-12;

/// `(H + H^H) / 2`.
pub fn hermitian_part(h: MatRef<'_, C64>) -> CMat {
    let n = h.nrows();
    CMat::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5)
}

/// Nearest positive semidefinite matrix in Frobenius norm.
///
/// The input is symmetrized first. Only the smaller of the positive and
/// negative eigenspaces is used to rebuild the result.
pub fn project_psd(h: MatRef<'_, C64>) -> Result<CMat> {
    let sym = hermitian_part(h);
    let mut out = sym.clone();
    project_psd_into(&sym, &mut out)?;
    Ok(out)
}

/// Writes the PSD projection of the Hermitian matrix `sym` into `out`.
pub(crate) fn project_psd_into(sym: &CMat, out: &mut CMat) -> Result<()> {
    let n = sym.nrows();
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NumericalFailure("Hermitian eigensolver did not converge"))?;
    let u = evd.U();
    let s = evd.S().column_vector();
    let w: alloc::vec::Vec<f64> = (0..n).map(|i| s[i].re).collect();
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("non-finite eigenvalue"));
    }
    // eigenvalues come sorted in nondecreasing order
    let first_pos = w.partition_point(|&x| x <= 0.0);
    let last_neg = w.partition_point(|&x| x <= -PSD_ZERO_TOL);
    let n_neg = last_neg;
    let n_pos = n - first_pos;

    if n_neg == 0 {
        out.copy_from(sym);
        return Ok(());
    }
    if n_pos == 0 {
        out.fill(C64::new(0.0, 0.0));
        return Ok(());
    }
    if n_pos <= n_neg {
        let v = u.subcols(first_pos, n_pos);
        let scaled = CMat::from_fn(n, n_pos, |i, j| v[(i, j)] * w[first_pos + j]);
        matmul(
            out.as_mut(),
            Accum::Replace,
            scaled.as_ref(),
            v.adjoint(),
            C64::new(1.0, 0.0),
            Par::Seq,
        );
    } else {
        let v = u.subcols(0, n_neg);
        let scaled = CMat::from_fn(n, n_neg, |i, j| v[(i, j)] * w[j]);
        out.copy_from(sym);
        matmul(
            out.as_mut(),
            Accum::Add,
            scaled.as_ref(),
            v.adjoint(),
            C64::new(-1.0, 0.0),
            Par::Seq,
        );
    }
    // keep the result exactly Hermitian
    for j in 0..n {
        out[(j, j)].im = 0.0;
        for i in j + 1..n {
            let avg = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
            out[(i, j)] = avg;
            out[(j, i)] = avg.conj();
        }
    }
    Ok(())
}

/// Orthogonal projection onto `{Q : sum of the q-th diagonal of Q = 1 if q == 0 else 0}`.
///
/// Each diagonal is shifted by `(target - current sum) / (diagonal length)`.
/// The input is symmetrized first, so the output is Hermitian.
pub fn project_toeplitz_affine(q: MatRef<'_, C64>) -> CMat {
    let mut out = hermitian_part(q);
    toeplitz_affine_in_place(&mut out);
    out
}

pub(crate) fn toeplitz_affine_in_place(q: &mut CMat) {
    let n = q.nrows();
    for off in 0..n {
        let len = n - off;
        let mut sum = C64::new(0.0, 0.0);
        for r in 0..len {
            sum += q[(r, r + off)];
        }
        let target = if off == 0 { 1.0 } else { 0.0 };
        let shift = (C64::new(target, 0.0) - sum) / len as f64;
        for r in 0..len {
            q[(r, r + off)] += shift;
            if off > 0 {
                q[(r + off, r)] = q[(r, r + off)].conj();
            }
        }
    }
    for d in 0..n {
        q[(d, d)].im = 0.0;
    }
}

/// Largest deviation of any diagonal sum from its target.
pub fn toeplitz_residual(q: MatRef<'_, C64>) -> f64 {
    let n = q.nrows();
    let mut worst = 0.0_f64;
    for off in 0..n {
        for sign in [1i64, -1] {
            if off == 0 && sign < 0 {
                continue;
            }
            let mut sum = C64::new(0.0, 0.0);
            for r in 0..n - off {
                sum += if sign > 0 {
                    q[(r, r + off)]
                } else {
                    q[(r + off, r)]
                };
            }
            let target = if off == 0 { 1.0 } else { 0.0 };
            worst = worst.max((sum - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(h: MatRef<'_, C64>) -> Result<f64> {
    let sym = hermitian_part(h);
    let w = sym
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::NumericalFailure("Hermitian eigensolver did not converge"))?;
    Ok(w.first().copied().unwrap_or(0.0))
}
