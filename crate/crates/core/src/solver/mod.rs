//! Dual semidefinite program, solved by operator splitting.
//!
//! For every user `i` the block matrix
//!
//! ```text
//! S_i(lambda, Q_i) = [ Q_i   X_i^H ]      X_i = (B^adj lambda)_i
//!                    [ X_i   I     ]
//! ```
//!
//! must be PSD and `Q_i` must have diagonal sums `delta_{q0}`. Together these
//! say `||q_i(tau)||_2 <= 1` on the whole circle. The splitting keeps a PSD
//! copy `Z_i` of every block and a scaled multiplier `U_i`:
//!
//! 1. `(lambda, Q)`: minimize `-Re(lambda^H y) + eta ||lambda|| + rho/2 sum ||S_i - Z_i + U_i||^2`.
//!    Column `n` of `X_i` is `lambda_n b_n^i`, so the `lambda` part is one
//!    scalar problem per frequency (coupled only through the norm penalty),
//!    and the `Q` part is a Toeplitz-affine projection.
//! 2. `Z_i <- P_psd(S_i + U_i)` (with over-relaxation).
//! 3. `U_i <- U_i + S_i - Z_i`.

mod feasibility;
mod projection;

pub use feasibility::{check_dual_feasibility, FeasibilityReport};
pub use projection::{
    hermitian_part, min_eigenvalue, project_psd, project_toeplitz_affine, toeplitz_residual, PSD_ZERO_TOL,
};

use alloc::vec;
use alloc::vec::Vec;

// only needed without std, where f64 has no inherent math methods
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{Codebook, GridSpec, Measurement};
use crate::{CMat, Error, Result, C64};

use projection::{project_psd_into, toeplitz_affine_in_place};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Augmented Lagrangian penalty.
    pub rho: f64,
    pub max_iters: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Over-relaxation factor in `[1, 1.8]`.
    pub over_relaxation: f64,
    /// One `Q` shared by all users instead of one per user.
    pub shared_q: bool,
    pub residual_balancing: bool,
    /// Emit a diagnostic log line every this many iterations (0 disables).
    pub log_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 50_000,
            eps_abs: 1e-8,
            eps_rel: 1e-7,
            over_relaxation: 1.6,
            shared_q: false,
            residual_balancing: true,
            log_every: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.eps_abs > 0.0 && self.eps_rel > 0.0) {
            return Err(Error::Domain("rho and tolerances must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be positive"));
        }
        if !(1.0..=1.8).contains(&self.over_relaxation) {
            return Err(Error::Domain("over_relaxation must lie in [1, 1.8]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub lambda: Vec<C64>,
    /// One Hermitian `N x N` block per user, or a single one when `Q` is shared.
    pub q_blocks: Vec<CMat>,
    /// `Re(lambda^H y) - eta ||lambda||_2`.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl DualSolution {
    /// `Q` block that constrains user `i`.
    pub fn q_for_user(&self, i: usize) -> &CMat {
        if self.q_blocks.len() == 1 {
            &self.q_blocks[0]
        } else {
            &self.q_blocks[i]
        }
    }

    /// `lambda = 0`, `Q = I / N`: feasible for every instance.
    pub fn trivial(n: usize, users: usize, shared_q: bool) -> Self {
        let q = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(1.0 / n as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let count = if shared_q { 1 } else { users };
        Self {
            lambda: vec![C64::new(0.0, 0.0); n],
            q_blocks: vec![q; count],
            objective: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
            status: SolveStatus::Converged,
        }
    }
}

/// Maximizes `Re(lambda^H y)` over the dual feasible set.
pub fn solve_noiseless(
    y: &Measurement,
    codebooks: &[Codebook],
    grid: GridSpec,
    opts: &SolverOptions,
) -> Result<DualSolution> {
    solve_noisy(y, codebooks, grid, 0.0, opts)
}

/// Maximizes `Re(lambda^H y) - eta ||lambda||_2` over the dual feasible set.
pub fn solve_noisy(
    y: &Measurement,
    codebooks: &[Codebook],
    grid: GridSpec,
    eta: f64,
    opts: &SolverOptions,
) -> Result<DualSolution> {
    opts.validate()?;
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::Domain("eta must be finite and nonnegative"));
    }
    let n = grid.n();
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            what: "measurement",
            expected: n,
            found: y.len(),
        });
    }
    if codebooks.is_empty() {
        return Err(Error::Domain("at least one user is required"));
    }
    for b in codebooks {
        if b.n() != n {
            return Err(Error::ShapeMismatch {
                what: "codebook rows",
                expected: n,
                found: b.n(),
            });
        }
    }
    if y.0.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Domain("measurement must be finite"));
    }
    let y_norm = y.norm();
    if y_norm == 0.0 {
        return Ok(DualSolution::trivial(n, codebooks.len(), opts.shared_q));
    }
    let mut admm = Admm::new(y, y_norm, eta, codebooks, opts);
    admm.run()
}

struct Admm<'a> {
    n: usize,
    codebooks: &'a [Codebook],
    opts: &'a SolverOptions,
    /// y / ||y||
    y: Vec<C64>,
    y_orig: &'a [C64],
    /// eta / ||y||
    eta: f64,
    eta_orig: f64,
    /// sum_i ||b_n^i||^2
    row_weight: Vec<f64>,
    rho: f64,
    lambda: Vec<C64>,
    q: Vec<CMat>,
    z: Vec<CMat>,
    u: Vec<CMat>,
    // per-user scratch: current S_i, relaxed input to the projection, previous Z_i
    s: Vec<CMat>,
    t: Vec<CMat>,
    z_old: Vec<CMat>,
}

impl<'a> Admm<'a> {
    fn new(
        y: &'a Measurement,
        y_norm: f64,
        eta: f64,
        codebooks: &'a [Codebook],
        opts: &'a SolverOptions,
    ) -> Self {
        let n = y.len();
        let mut row_weight = vec![0.0; n];
        for b in codebooks {
            for (w, r) in row_weight.iter_mut().zip(b.row_norms_sqr()) {
                *w += r;
            }
        }
        let q0 = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(1.0 / n as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let q_count = if opts.shared_q { 1 } else { codebooks.len() };
        let lambda = vec![C64::new(0.0, 0.0); n];
        let mut z = Vec::with_capacity(codebooks.len());
        let mut u = Vec::with_capacity(codebooks.len());
        for b in codebooks {
            let d = n + b.k();
            let mut zi = CMat::zeros(d, d);
            assemble_block(&mut zi, &q0, &lambda, b);
            z.push(zi);
            u.push(CMat::zeros(d, d));
        }
        Self {
            n,
            codebooks,
            opts,
            y: y.0.iter().map(|v| v / y_norm).collect(),
            y_orig: &y.0,
            eta: eta / y_norm,
            eta_orig: eta,
            row_weight,
            rho: opts.rho,
            lambda,
            q: vec![q0; q_count],
            z,
            u,
            s: codebooks
                .iter()
                .map(|b| CMat::zeros(n + b.k(), n + b.k()))
                .collect(),
            t: codebooks
                .iter()
                .map(|b| CMat::zeros(n + b.k(), n + b.k()))
                .collect(),
            z_old: codebooks
                .iter()
                .map(|b| CMat::zeros(n + b.k(), n + b.k()))
                .collect(),
        }
    }

    fn objective(&self) -> f64 {
        let lin: f64 = self
            .lambda
            .iter()
            .zip(self.y_orig)
            .map(|(l, y)| (l.conj() * y).re)
            .sum();
        lin - self.eta_orig * l2(&self.lambda)
    }

    /// `(lambda, Q)` minimization against `W_i = Z_i - U_i`.
    fn update_primal(&mut self) {
        let n = self.n;
        let rho = self.rho;
        // g_n = sum_i b_n^H v_{i,n}, v_{i,n} = (W21[:, n] + conj(W12[n, :])) / 2
        let mut g = vec![C64::new(0.0, 0.0); n];
        for ((b, z), u) in self.codebooks.iter().zip(&self.z).zip(&self.u) {
            for (col, gn) in g.iter_mut().enumerate() {
                for l in 0..b.k() {
                    let r = n + l;
                    let w21 = z[(r, col)] - u[(r, col)];
                    let w12 = z[(col, r)] - u[(col, r)];
                    let v = (w21 + w12.conj()) * 0.5;
                    *gn += b.at(col, l).conj() * v;
                }
            }
        }
        let mut center = vec![C64::new(0.0, 0.0); n];
        for idx in 0..n {
            let d = self.row_weight[idx];
            if d > 0.0 {
                center[idx] = (g[idx] * rho + self.y[idx] * 0.5) / (rho * d);
            }
        }
        if self.eta > 0.0 {
            let weights: Vec<f64> = self.row_weight.iter().map(|d| rho * d).collect();
            weighted_norm_prox(&mut center, &weights, 0.5 * self.eta);
        }
        self.lambda = center;

        // Q: Toeplitz-affine projection of the (averaged) top-left blocks
        if self.opts.shared_q {
            let users = self.codebooks.len() as f64;
            let q = &mut self.q[0];
            for j in 0..n {
                for i in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for (z, u) in self.z.iter().zip(&self.u) {
                        acc += z[(i, j)] - u[(i, j)];
                    }
                    q[(i, j)] = acc / users;
                }
            }
            hermitize(q);
            toeplitz_affine_in_place(q);
        } else {
            for ((q, z), u) in self.q.iter_mut().zip(&self.z).zip(&self.u) {
                for j in 0..n {
                    for i in 0..n {
                        q[(i, j)] = z[(i, j)] - u[(i, j)];
                    }
                }
                hermitize(q);
                toeplitz_affine_in_place(q);
            }
        }
    }

    fn run(&mut self) -> Result<DualSolution> {
        let alpha = self.opts.over_relaxation;
        let users = self.codebooks.len();
        let dims: usize = self.codebooks.iter().map(|b| (self.n + b.k()).pow(2)).sum();
        let nvars = 2 * self.n + self.q.len() * self.n * self.n;
        let mut adaptations = 0usize;
        let mut status = SolveStatus::MaxIters;
        let mut r_prim = f64::INFINITY;
        let mut r_dual = f64::INFINITY;
        let mut iter = 0usize;
        // best iterate by the larger of the two residual-to-tolerance ratios
        let mut best: Option<(f64, Vec<C64>, Vec<CMat>, f64, f64)> = None;

        while iter < self.opts.max_iters {
            iter += 1;
            self.update_primal();

            let mut prim_sq = 0.0;
            let mut s_sq = 0.0;
            let mut z_sq = 0.0;
            // A^T (Z_new - Z_old) accumulated per variable block
            let mut dual_lambda = vec![C64::new(0.0, 0.0); self.n];
            let mut dual_q = vec![CMat::zeros(self.n, self.n); self.q.len()];
            let mut dual_u_lambda = vec![C64::new(0.0, 0.0); self.n];
            let mut dual_u_q = vec![CMat::zeros(self.n, self.n); self.q.len()];

            for i in 0..users {
                let b = &self.codebooks[i];
                let d = self.n + b.k();
                let qi = if self.q.len() == 1 { 0 } else { i };
                let s = &mut self.s[i];
                assemble_block(s, &self.q[qi], &self.lambda, b);
                s_sq += frob_sq(s);

                let z_old = &mut self.z_old[i];
                z_old.copy_from(&self.z[i]);
                let t = &mut self.t[i];
                for c in 0..d {
                    for r in 0..d {
                        t[(r, c)] = s[(r, c)] * alpha + z_old[(r, c)] * (1.0 - alpha) + self.u[i][(r, c)];
                    }
                }
                if let Err(e) = project_psd_into(t, &mut self.z[i]) {
                    log::warn!("psd projection failed at iter {iter}: {e}");
                    status = SolveStatus::NumericalFailure;
                    break;
                }
                let zi = &self.z[i];
                let ui = &mut self.u[i];
                for c in 0..d {
                    for r in 0..d {
                        let relaxed = s[(r, c)] * alpha + z_old[(r, c)] * (1.0 - alpha);
                        ui[(r, c)] += relaxed - zi[(r, c)];
                        prim_sq += (s[(r, c)] - zi[(r, c)]).norm_sqr();
                    }
                }
                z_sq += frob_sq(zi);
                let dz = zi - &*z_old;
                accumulate_adjoint(&dz, b, self.n, &mut dual_lambda, &mut dual_q[qi]);
                accumulate_adjoint(ui, b, self.n, &mut dual_u_lambda, &mut dual_u_q[qi]);
            }
            if status == SolveStatus::NumericalFailure {
                break;
            }

            r_prim = prim_sq.sqrt();
            r_dual = self.rho * adjoint_norm(&dual_lambda, &dual_q);
            let eps_pri =
                (dims as f64).sqrt() * self.opts.eps_abs + self.opts.eps_rel * s_sq.sqrt().max(z_sq.sqrt());
            let eps_dual = (nvars as f64).sqrt() * self.opts.eps_abs
                + self.opts.eps_rel * self.rho * adjoint_norm(&dual_u_lambda, &dual_u_q);

            if !(r_prim.is_finite() && r_dual.is_finite())
                || self
                    .lambda
                    .iter()
                    .any(|z| !(z.re.is_finite() && z.im.is_finite()))
            {
                status = SolveStatus::NumericalFailure;
                break;
            }
            if self.opts.log_every > 0 && iter.is_multiple_of(self.opts.log_every) {
                log::debug!(
                    "iter={} r_prim={:.6e} r_dual={:.6e} obj={:.12e}",
                    iter,
                    r_prim,
                    r_dual,
                    self.objective()
                );
            }
            if r_prim <= eps_pri && r_dual <= eps_dual {
                status = SolveStatus::Converged;
                break;
            }
            let score = (r_prim / eps_pri).max(r_dual / eps_dual);
            if best.as_ref().is_none_or(|b| score < b.0) {
                match &mut best {
                    Some(b) => {
                        b.0 = score;
                        b.1.copy_from_slice(&self.lambda);
                        for (dst, src) in b.2.iter_mut().zip(&self.q) {
                            dst.copy_from(src);
                        }
                        b.3 = r_prim;
                        b.4 = r_dual;
                    }
                    None => best = Some((score, self.lambda.clone(), self.q.clone(), r_prim, r_dual)),
                }
            }
            if self.opts.residual_balancing
                && adaptations < MAX_RHO_ADAPTATIONS
                && iter.is_multiple_of(RHO_CHECK_EVERY)
            {
                let scale = if r_prim > RHO_RATIO * r_dual {
                    Some(2.0)
                } else if r_dual > RHO_RATIO * r_prim {
                    Some(0.5)
                } else {
                    None
                };
                if let Some(f) = scale {
                    self.rho *= f;
                    for u in &mut self.u {
                        for c in 0..u.ncols() {
                            for r in 0..u.nrows() {
                                u[(r, c)] /= f;
                            }
                        }
                    }
                    adaptations += 1;
                }
            }
        }

        if self.opts.log_every > 0 {
            log::debug!(
                "iter={} r_prim={:.6e} r_dual={:.6e} obj={:.12e}",
                iter,
                r_prim,
                r_dual,
                self.objective()
            );
        }
        if status == SolveStatus::MaxIters {
            if let Some((_, lambda, q, rp, rd)) = best {
                self.lambda = lambda;
                self.q = q;
                r_prim = rp;
                r_dual = rd;
            }
        }
        Ok(DualSolution {
            lambda: self.lambda.clone(),
            q_blocks: self.q.clone(),
            objective: self.objective(),
            primal_residual: r_prim,
            dual_residual: r_dual,
            iterations: iter,
            status,
        })
    }
}

const MAX_RHO_ADAPTATIONS: usize = 10;
const RHO_CHECK_EVERY: usize = 50;
const RHO_RATIO: f64 = 10.0;

/// Writes `[[Q, X^H], [X, I]]` into `s` (sized `N + k`).
fn assemble_block(s: &mut CMat, q: &CMat, lambda: &[C64], b: &Codebook) {
    let n = q.nrows();
    let k = b.k();
    for c in 0..n {
        for r in 0..n {
            s[(r, c)] = q[(r, c)];
        }
    }
    for col in 0..n {
        for l in 0..k {
            let x = lambda[col] * b.at(col, l);
            s[(n + l, col)] = x;
            s[(col, n + l)] = x.conj();
        }
    }
    for l in 0..k {
        for m in 0..k {
            s[(n + l, n + m)] = if l == m {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
        }
    }
}

/// Adds the adjoint of `(lambda, Q) -> S` applied to `m` into the accumulators.
fn accumulate_adjoint(m: &CMat, b: &Codebook, n: usize, lam: &mut [C64], q: &mut CMat) {
    for c in 0..n {
        for r in 0..n {
            q[(r, c)] += m[(r, c)];
        }
    }
    for (col, lc) in lam.iter_mut().enumerate() {
        for l in 0..b.k() {
            let v = m[(n + l, col)] + m[(col, n + l)].conj();
            *lc += b.at(col, l).conj() * v;
        }
    }
}

fn adjoint_norm(lam: &[C64], q: &[CMat]) -> f64 {
    let a: f64 = lam.iter().map(|z| z.norm_sqr()).sum();
    let b: f64 = q.iter().map(frob_sq).sum();
    (a + b).sqrt()
}

fn frob_sq(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            acc += m[(r, c)].norm_sqr();
        }
    }
    acc
}

fn hermitize(m: &mut CMat) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for i in j + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `min_x sum_n a_n |x_n - c_n|^2 + 2 e ||x||_2` in place.
///
/// The minimizer is `x_n = c_n a_n s / (a_n s + e)` where `s = ||x||` is the
/// root of `sum |c_n|^2 a_n^2 / (a_n s + e)^2 = 1`, or zero when
/// `||a * c|| <= e`.
pub(crate) fn weighted_norm_prox(c: &mut [C64], a: &[f64], e: f64) {
    if e <= 0.0 {
        return;
    }
    let grad0: f64 = c
        .iter()
        .zip(a)
        .map(|(z, &w)| z.norm_sqr() * w * w)
        .sum::<f64>()
        .sqrt();
    if grad0 <= e {
        c.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        return;
    }
    // phi(s) is convex and decreasing; Newton from the left converges monotonically
    let mut s = 0.0_f64;
    for _ in 0..200 {
        let mut phi = -1.0;
        let mut dphi = 0.0;
        for (z, &w) in c.iter().zip(a) {
            if w == 0.0 {
                continue;
            }
            let den = w * s + e;
            let t = z.norm_sqr() * w * w / (den * den);
            phi += t;
            dphi -= 2.0 * t * w / den;
        }
        if dphi == 0.0 {
            break;
        }
        let next = s - phi / dphi;
        if (next - s).abs() <= 1e-15 * next.abs().max(1e-300) {
            s = next;
            break;
        }
        s = next;
    }
    for (z, &w) in c.iter_mut().zip(a) {
        *z = if w == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            *z * (w * s / (w * s + e))
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prox_matches_first_order_conditions() {
        let c = [C64::new(1.0, 0.5), C64::new(-0.3, 0.2), C64::new(0.0, 2.0)];
        let a = [1.0, 3.0, 0.5];
        let e = 0.8;
        let mut x = c;
        weighted_norm_prox(&mut x, &a, e);
        let s = l2(&x);
        assert!(s > 0.0);
        for ((xi, ci), ai) in x.iter().zip(&c).zip(&a) {
            // a (x - c) + e x / s = 0
            let g = (xi - ci) * *ai + xi * (e / s);
            assert!(g.norm() < 1e-12, "{g}");
        }
    }

    #[test]
    fn prox_returns_zero_for_large_penalty() {
        let mut x = [C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        weighted_norm_prox(&mut x, &[1.0, 1.0], 10.0);
        assert!(x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn options_are_validated() {
        let mut o = SolverOptions::default();
        assert!(o.validate().is_ok());
        o.over_relaxation = 2.0;
        assert!(o.validate().is_err());
        o = SolverOptions {
            rho: 0.0,
            ..Default::default()
        };
        assert!(o.validate().is_err());
    }
}
