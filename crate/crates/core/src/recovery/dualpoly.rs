use alloc::vec::Vec;
use core::f64::consts::PI;

// only needed without std, where f64 has no inherent math methods
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{Codebook, GridSpec};
use crate::{Error, Result, C64};

/// Vector-valued dual polynomial `q(tau) = sum_n lambda_n e^{j 2 pi n tau} b_n`
/// of one user, with its coefficient vectors `lambda_n b_n` precomputed.
#[derive(Debug, Clone)]
pub struct DualPolynomial {
    freqs: Vec<f64>,
    // coeffs[idx * k + l] = lambda_n b_n(l)
    coeffs: Vec<C64>,
    k: usize,
}

/// Value and first two derivatives of `q` at one point.
#[derive(Debug, Clone)]
pub struct DualPolyEval {
    pub q: Vec<C64>,
    pub dq: Vec<C64>,
    pub d2q: Vec<C64>,
}

impl DualPolyEval {
    /// `(f, f', f'')` for `f(tau) = ||q(tau)||^2`.
    pub fn norm_sqr_derivatives(&self) -> (f64, f64, f64) {
        let mut f = 0.0;
        let mut df = 0.0;
        let mut d2f = 0.0;
        for ((q, dq), d2q) in self.q.iter().zip(&self.dq).zip(&self.d2q) {
            f += q.norm_sqr();
            df += 2.0 * (dq.conj() * q).re;
            d2f += 2.0 * (dq.norm_sqr() + (d2q.conj() * q).re);
        }
        (f, df, d2f)
    }
}

impl DualPolynomial {
    pub fn new(lambda: &[C64], codebook: &Codebook, grid: GridSpec) -> Result<Self> {
        if lambda.len() != grid.n() || codebook.n() != grid.n() {
            return Err(Error::ShapeMismatch {
                what: "dual vector",
                expected: grid.n(),
                found: lambda.len(),
            });
        }
        let k = codebook.k();
        let mut coeffs = Vec::with_capacity(grid.n() * k);
        for (idx, &lam) in lambda.iter().enumerate() {
            for l in 0..k {
                coeffs.push(lam * codebook.at(idx, l));
            }
        }
        Ok(Self {
            freqs: grid.freqs().map(|n| n as f64).collect(),
            coeffs,
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `q(tau)`.
    pub fn eval(&self, tau: f64) -> Vec<C64> {
        let mut q = alloc::vec![C64::new(0.0, 0.0); self.k];
        for (idx, &n) in self.freqs.iter().enumerate() {
            let (s, c) = (2.0 * PI * n * tau).sin_cos();
            let e = C64::new(c, s);
            for (l, ql) in q.iter_mut().enumerate() {
                *ql += e * self.coeffs[idx * self.k + l];
            }
        }
        q
    }

    /// `||q(tau)||_2`.
    pub fn norm(&self, tau: f64) -> f64 {
        self.eval(tau).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `q`, `dq/dtau` and `d^2q/dtau^2` at `tau`.
    pub fn eval_with_derivatives(&self, tau: f64) -> DualPolyEval {
        let zero = C64::new(0.0, 0.0);
        let mut q = alloc::vec![zero; self.k];
        let mut dq = alloc::vec![zero; self.k];
        let mut d2q = alloc::vec![zero; self.k];
        for (idx, &n) in self.freqs.iter().enumerate() {
            let (s, c) = (2.0 * PI * n * tau).sin_cos();
            let e = C64::new(c, s);
            let w = 2.0 * PI * n;
            let e1 = e * C64::new(0.0, w);
            let e2 = e * (-w * w);
            for l in 0..self.k {
                let coef = self.coeffs[idx * self.k + l];
                q[l] += e * coef;
                dq[l] += e1 * coef;
                d2q[l] += e2 * coef;
            }
        }
        DualPolyEval { q, dq, d2q }
    }

    /// `||q||_2` on the uniform grid `tau_j = j / size`.
    pub fn norms_on_grid(&self, size: usize) -> Vec<f64> {
        (0..size).map(|j| self.norm(j as f64 / size as f64)).collect()
    }
}

/// `q_i(tau)` for one user.
pub fn dual_polynomial(lambda: &[C64], codebook: &Codebook, grid: GridSpec, tau: f64) -> Result<Vec<C64>> {
    Ok(DualPolynomial::new(lambda, codebook, grid)?.eval(tau))
}

/// `(q_i(tau), dq_i/dtau)` for one user.
pub fn dual_polynomial_derivative(
    lambda: &[C64],
    codebook: &Codebook,
    grid: GridSpec,
    tau: f64,
) -> Result<(Vec<C64>, Vec<C64>)> {
    let e = DualPolynomial::new(lambda, codebook, grid)?.eval_with_derivatives(tau);
    Ok((e.q, e.dq))
}
