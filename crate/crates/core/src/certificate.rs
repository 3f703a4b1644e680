//! Constructive dual certificate built from the squared Fejer kernel.
//!
//! The candidate dual vector is
//!
//! ```text
//! lambda_n = g(n)/M sum_{i,p} e^{-j 2 pi n tau_p^i} b_n^{iH} (alpha_p^i + j 2 pi n beta_p^i)
//! ```
//!
//! which makes every `q_m` a combination of shifted kernels
//! `K_{m,i}(tau_p^i - tau)` and their derivatives. The coefficients are fixed
//! by interpolating `sgn(c_k^m) f_m` with zero slope at every true delay. The
//! instance is certified when the interpolation is exact and
//! `||q_m(tau)||_2 < 1` away from the support.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

// only needed without std, where f64 has no inherent math methods
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{phasor, wrap_distance, Channel, Codebook, GridSpec, Message};
use crate::recovery::DualPolynomial;
use crate::{CMat, Error, Result, C64};

/// Convolution of two triangles, `g(n)` for `n = -2M..2M`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    m: usize,
    g: Vec<f64>,
}

impl KernelWeights {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, n: i64) -> f64 {
        let h = 2 * self.m as i64;
        if n.abs() > h {
            0.0
        } else {
            self.g[(n + h) as usize]
        }
    }

    /// `g(-2M), ..., g(2M)`.
    pub fn as_slice(&self) -> &[f64] {
        &self.g
    }
}

pub fn g_weights(m: usize) -> Result<KernelWeights> {
    if m == 0 {
        return Err(Error::Domain("M must be positive"));
    }
    let mi = m as i64;
    let mf = m as f64;
    let g = (-2 * mi..=2 * mi)
        .map(|n| {
            let lo = (n - mi).max(-mi);
            let hi = (n + mi).min(mi);
            (lo..=hi)
                .map(|l| (1.0 - l.abs() as f64 / mf) * (1.0 - (n - l).abs() as f64 / mf))
                .sum::<f64>()
                / mf
        })
        .collect();
    Ok(KernelWeights { m, g })
}

/// `(-j 2 pi n)^l`.
fn deriv_factor(n: i64, l: u32) -> C64 {
    let w = -2.0 * PI * n as f64;
    match l {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, w),
        2 => C64::new(-w * w, 0.0),
        _ => C64::new(0.0, w).powi(l as i32),
    }
}

/// `l`-th derivative of the squared Fejer kernel, from its Fourier series.
pub fn kernel_scalar(tau: f64, l: u32, weights: &KernelWeights) -> C64 {
    let m = weights.m as i64;
    let mut acc = C64::new(0.0, 0.0);
    for n in -2 * m..=2 * m {
        acc += deriv_factor(n, l) * phasor(n, tau) * weights.get(n);
    }
    acc / m as f64
}

/// `[sin(pi M tau) / (M sin(pi tau))]^4`.
pub fn fejer_closed_form(tau: f64, m: usize) -> f64 {
    let mf = m as f64;
    let den = mf * (PI * tau).sin();
    if den.abs() < 1e-12 {
        // the ratio tends to +-1 at integers, so its fourth power is 1
        return 1.0;
    }
    ((PI * mf * tau).sin() / den).powi(4)
}

/// `K''(0) = -4 pi^2 (M^2 - 1) / 3`.
pub fn kernel_second_derivative_at_zero(m: usize) -> f64 {
    let mf = m as f64;
    -4.0 * PI * PI * (mf * mf - 1.0) / 3.0
}

/// `l`-th derivative of `K_{m,i}(tau) = (1/M) sum_n g(n) e^{-j 2 pi n tau} b_n^m b_n^{iH}`.
pub fn kernel_matrix(
    tau: f64,
    l: u32,
    codebook_m: &Codebook,
    codebook_i: &Codebook,
    weights: &KernelWeights,
) -> Result<CMat> {
    let n = 4 * weights.m + 1;
    if codebook_m.n() != n || codebook_i.n() != n {
        return Err(Error::ShapeMismatch {
            what: "codebook rows",
            expected: n,
            found: codebook_m.n().min(codebook_i.n()),
        });
    }
    let h = 2 * weights.m as i64;
    let mut out = CMat::zeros(codebook_m.k(), codebook_i.k());
    for idx in 0..n {
        let freq = idx as i64 - h;
        let w = weights.get(freq);
        if w == 0.0 {
            continue;
        }
        let s = deriv_factor(freq, l) * phasor(freq, tau) * w;
        for a in 0..codebook_m.k() {
            let ba = codebook_m.at(idx, a) * s;
            for b in 0..codebook_i.k() {
                out[(a, b)] += ba * codebook_i.at(idx, b).conj();
            }
        }
    }
    let scale = 1.0 / weights.m as f64;
    for b in 0..out.ncols() {
        for a in 0..out.nrows() {
            out[(a, b)] *= scale;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CertificateReport {
    /// `alpha[i][p]`, one `k_i`-vector per path.
    pub alpha: Vec<Vec<Vec<C64>>>,
    /// `beta[i][p]`, the derivative-kernel coefficients.
    pub beta: Vec<Vec<Vec<C64>>>,
    /// Dual vector generated by `(alpha, beta)`.
    pub lambda: Vec<C64>,
    /// Max over support points of `||q_m - sgn(c) f_m||` and `kappa ||q_m'||`.
    pub max_interp_error: f64,
    /// Max of `||q_m(tau)||_2` away from the support, or at least 1 when a
    /// neighbourhood of a true delay fails to be strictly concave.
    pub sup_offsupport_norm: f64,
    /// Spectral norm of `I - D` (infinite when `D` is singular).
    pub d_condition: f64,
    pub valid: bool,
}

/// Neighbourhood radius, in units of `1/M`, treated by the concavity test.
pub const NEAR_RADIUS: f64 = 0.1;
/// Interpolation tolerance for a certificate to count as valid.
pub const INTERP_TOL: f64 = 1e-6;

/// Builds the kernel certificate for a planted instance and checks it.
pub fn build_certificate(
    channels: &[Channel],
    messages: &[Message],
    codebooks: &[Codebook],
    grid: GridSpec,
) -> Result<CertificateReport> {
    let r = codebooks.len();
    if channels.len() != r || messages.len() != r {
        return Err(Error::ShapeMismatch {
            what: "users",
            expected: r,
            found: channels.len().min(messages.len()),
        });
    }
    let n = grid.n();
    for (b, f) in codebooks.iter().zip(messages) {
        if b.n() != n {
            return Err(Error::ShapeMismatch {
                what: "codebook rows",
                expected: n,
                found: b.n(),
            });
        }
        if b.k() != f.k() {
            return Err(Error::ShapeMismatch {
                what: "message length",
                expected: b.k(),
                found: f.k(),
            });
        }
    }
    let m = grid.m();
    let weights = g_weights(m)?;
    let kappa = 1.0 / kernel_second_derivative_at_zero(m).abs().sqrt();
    for ch in channels {
        if crate::model::min_separation(&ch.delays()) < 1.0 / m as f64 {
            log::warn!("delays closer than 1/M; the certificate is unlikely to exist");
        }
    }

    // unknown layout: user i, path p occupies offset[i] + p * k_i
    let mut offset = Vec::with_capacity(r);
    let mut half = 0;
    for (b, ch) in codebooks.iter().zip(channels) {
        offset.push(half);
        half += b.k() * ch.s();
    }
    let size = 2 * half;
    let mut d = CMat::zeros(size, size);
    let mut rhs = CMat::zeros(size, 1);
    for (mu, (bm, chm)) in codebooks.iter().zip(channels).enumerate() {
        let km = bm.k();
        for (kk, path) in chm.paths().iter().enumerate() {
            let row = offset[mu] + kk * km;
            let sgn = path.amplitude / path.amplitude.norm();
            for (l, f) in messages[mu].coeffs().iter().enumerate() {
                rhs[(row + l, 0)] = sgn * f;
            }
            for (i, (bi, chi)) in codebooks.iter().zip(channels).enumerate() {
                let ki = bi.k();
                for (p, tp) in chi.delays().into_iter().enumerate() {
                    let col = offset[i] + p * ki;
                    let x = tp - path.delay;
                    let k0 = kernel_matrix(x, 0, bm, bi, &weights)?;
                    let k1 = kernel_matrix(x, 1, bm, bi, &weights)?;
                    let k2 = kernel_matrix(x, 2, bm, bi, &weights)?;
                    for a in 0..km {
                        for b in 0..ki {
                            d[(row + a, col + b)] = k0[(a, b)];
                            d[(row + a, half + col + b)] = -k1[(a, b)] * kappa;
                            d[(half + row + a, col + b)] = k1[(a, b)] * kappa;
                            d[(half + row + a, half + col + b)] = -k2[(a, b)] * (kappa * kappa);
                        }
                    }
                }
            }
        }
    }

    let svd = d
        .thin_svd()
        .map_err(|_| Error::NumericalFailure("SVD did not converge"))?;
    let sv = svd.S().column_vector();
    let smax = sv[0].re;
    let smin = sv[size - 1].re;
    let singular = !(smin > 1e-13 * smax);
    let d_condition = if singular {
        f64::INFINITY
    } else {
        let eye_minus = CMat::from_fn(size, size, |a, b| {
            let e = if a == b {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
            e - d[(a, b)]
        });
        eye_minus
            .singular_values()
            .map_err(|_| Error::NumericalFailure("SVD did not converge"))?
            .first()
            .copied()
            .unwrap_or(0.0)
    };

    let empty = |scale: usize| -> Vec<Vec<Vec<C64>>> {
        codebooks
            .iter()
            .zip(channels)
            .map(|(b, ch)| vec![vec![C64::new(0.0, 0.0); b.k()]; ch.s() * scale])
            .collect()
    };
    if singular {
        return Ok(CertificateReport {
            alpha: empty(1),
            beta: empty(1),
            lambda: vec![C64::new(0.0, 0.0); n],
            max_interp_error: f64::INFINITY,
            sup_offsupport_norm: f64::INFINITY,
            d_condition,
            valid: false,
        });
    }

    // x = V diag(1/s) U^H rhs
    let (u, v) = (svd.U(), svd.V());
    let mut sol = vec![C64::new(0.0, 0.0); size];
    for j in 0..size {
        let mut uy = C64::new(0.0, 0.0);
        for a in 0..size {
            uy += u[(a, j)].conj() * rhs[(a, 0)];
        }
        let coef = uy / sv[j].re;
        for (a, x) in sol.iter_mut().enumerate() {
            *x += v[(a, j)] * coef;
        }
    }

    let mut alpha = empty(1);
    let mut beta = empty(1);
    for (i, b) in codebooks.iter().enumerate() {
        for p in 0..channels[i].s() {
            for l in 0..b.k() {
                let at = offset[i] + p * b.k() + l;
                alpha[i][p][l] = sol[at];
                beta[i][p][l] = sol[half + at] * kappa;
            }
        }
    }

    // lambda_n = g(n)/M sum_{i,p} e^{-j 2 pi n tau_p} b_n^H (alpha + j 2 pi n beta)
    let mut lambda = vec![C64::new(0.0, 0.0); n];
    for (idx, lam) in lambda.iter_mut().enumerate() {
        let freq = grid.freq(idx);
        let w = weights.get(freq) / m as f64;
        if w == 0.0 {
            continue;
        }
        let jw = C64::new(0.0, 2.0 * PI * freq as f64);
        for (i, b) in codebooks.iter().enumerate() {
            for (p, tp) in channels[i].delays().into_iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..b.k() {
                    acc += b.at(idx, l).conj() * (alpha[i][p][l] + jw * beta[i][p][l]);
                }
                *lam += phasor(freq, tp) * acc * w;
            }
        }
    }

    let mut interp = 0.0_f64;
    let mut sup = 0.0_f64;
    let dense = 32 * n;
    let near = NEAR_RADIUS / m as f64;
    for (mu, b) in codebooks.iter().enumerate() {
        let q = DualPolynomial::new(&lambda, b, grid)?;
        let delays = channels[mu].delays();
        for path in channels[mu].paths() {
            let e = q.eval_with_derivatives(path.delay);
            let sgn = path.amplitude / path.amplitude.norm();
            let val: f64 =
                e.q.iter()
                    .zip(messages[mu].coeffs())
                    .map(|(a, f)| (a - sgn * f).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
            let slope: f64 = e.dq.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() * kappa;
            interp = interp.max(val).max(slope);
        }
        for j in 0..dense {
            let t = j as f64 / dense as f64;
            let dist = delays
                .iter()
                .map(|&d| wrap_distance(d, t))
                .fold(f64::INFINITY, f64::min);
            if dist > near {
                sup = sup.max(q.norm(t));
            } else if dist > 0.0 {
                let (_, _, d2f) = q.eval_with_derivatives(t).norm_sqr_derivatives();
                if !(d2f < 0.0) {
                    sup = sup.max(1.0).max(q.norm(t));
                }
            }
        }
    }
    let valid = interp <= INTERP_TOL && sup < 1.0;
    Ok(CertificateReport {
        alpha,
        beta,
        lambda,
        max_interp_error: interp,
        sup_offsupport_norm: sup,
        d_condition,
        valid,
    })
}
