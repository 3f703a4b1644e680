//! Brute-force references for tiny instances.
//!
//! Nothing here calls into the solver, recovery or linear-algebra backends:
//! phasors, products and the least-squares solve are all plain loops, so
//! agreement with the main path carries weight.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

// only needed without std, where f64 has no inherent math methods
#[allow(unused_imports)]
use num_traits::Float;

use crate::certificate::{kernel_scalar, KernelWeights};
use crate::model::{Codebook, GridSpec, LiftedTuple, Measurement};
use crate::{Error, Result, C64};

/// Largest number of support combinations an exhaustive search may visit.
pub const MAX_COMBINATIONS: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Candidate delays are `j / grid_points`; at most 128.
    pub grid_points: usize,
    /// Upper bound on the total number of paths over all users; at most 4.
    pub max_total_paths: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_points: 16,
            max_total_paths: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleFit {
    /// Per user, the chosen grid indices in increasing order.
    pub support: Vec<Vec<usize>>,
    /// Per user, the delays `index / grid_points`.
    pub delays: Vec<Vec<f64>>,
    /// `blocks[i][p]` estimates `c_p f_i`.
    pub blocks: Vec<Vec<Vec<C64>>>,
    /// `||y - A x||_2 / ||y||_2`.
    pub residual: f64,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc
}

/// Number of support combinations visited for these sparsities.
pub fn search_budget(grid_points: usize, sparsities: &[usize]) -> u128 {
    sparsities
        .iter()
        .fold(1u128, |acc, &s| acc.saturating_mul(binomial(grid_points, s)))
}

/// Tries every on-grid support with the given per-user path counts and
/// keeps the one with the smallest least-squares residual.
pub fn exhaustive_grid_recover(
    y: &Measurement,
    codebooks: &[Codebook],
    grid: GridSpec,
    sparsities: &[usize],
    cfg: &OracleConfig,
) -> Result<OracleFit> {
    if sparsities.len() != codebooks.len() {
        return Err(Error::ShapeMismatch {
            what: "sparsities",
            expected: codebooks.len(),
            found: sparsities.len(),
        });
    }
    if cfg.grid_points == 0 || cfg.grid_points > 128 {
        return Err(Error::Domain("grid_points must lie in 1..=128"));
    }
    let total: usize = sparsities.iter().sum();
    if total > cfg.max_total_paths || cfg.max_total_paths > 4 {
        return Err(Error::Domain("too many paths for the exhaustive oracle"));
    }
    let combos = search_budget(cfg.grid_points, sparsities);
    if combos > MAX_COMBINATIONS {
        return Err(Error::BudgetExceeded {
            combinations: combos,
            limit: MAX_COMBINATIONS,
        });
    }
    if y.len() != grid.n() {
        return Err(Error::ShapeMismatch {
            what: "measurement",
            expected: grid.n(),
            found: y.len(),
        });
    }

    let mut current: Vec<Vec<usize>> = sparsities.iter().map(|&s| (0..s).collect()).collect();
    let mut best: Option<OracleFit> = None;
    loop {
        let delays: Vec<Vec<f64>> = current
            .iter()
            .map(|sup| sup.iter().map(|&j| j as f64 / cfg.grid_points as f64).collect())
            .collect();
        if let Some((blocks, residual)) = normal_equations_fit(y, codebooks, &delays, grid)? {
            if best.as_ref().is_none_or(|b| residual < b.residual) {
                best = Some(OracleFit {
                    support: current.clone(),
                    delays,
                    blocks,
                    residual,
                });
            }
        }
        if !advance(&mut current, cfg.grid_points) {
            break;
        }
    }
    best.ok_or(Error::NumericalFailure("every candidate support was singular"))
}

/// Steps a list of increasing index tuples to the next combination.
fn advance(current: &mut [Vec<usize>], n: usize) -> bool {
    for sup in current.iter_mut().rev() {
        let s = sup.len();
        let mut pos = s;
        while pos > 0 {
            pos -= 1;
            if sup[pos] < n - s + pos {
                sup[pos] += 1;
                for j in pos + 1..s {
                    sup[j] = sup[j - 1] + 1;
                }
                return true;
            }
        }
        // this user wrapped around; reset and carry into the previous user
        for (j, v) in sup.iter_mut().enumerate() {
            *v = j;
        }
    }
    false
}

fn cexp_neg(freq: i64, tau: f64) -> C64 {
    let t = -2.0 * PI * freq as f64 * tau;
    C64::new(t.cos(), t.sin())
}

/// Least-squares blocks for fixed delays by Gaussian elimination on the normal
/// equations. `None` when the normal matrix is numerically singular.
pub fn normal_equations_fit(
    y: &Measurement,
    codebooks: &[Codebook],
    delays: &[Vec<f64>],
    grid: GridSpec,
) -> Result<Option<(Vec<Vec<Vec<C64>>>, f64)>> {
    let n = grid.n();
    let half = grid.m() as i64 * 2;
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for (b, ds) in codebooks.iter().zip(delays) {
        for &tau in ds {
            for l in 0..b.k() {
                cols.push(
                    (0..n)
                        .map(|idx| cexp_neg(idx as i64 - half, tau) * b.at(idx, l))
                        .collect(),
                );
            }
        }
    }
    let u = cols.len();
    if u > n {
        return Err(Error::OverParameterized {
            unknowns: u,
            equations: n,
        });
    }
    // augmented [A^H A | A^H y]
    let mut g = vec![vec![C64::new(0.0, 0.0); u + 1]; u];
    for a in 0..u {
        for c in 0..u {
            g[a][c] = (0..n).map(|r| cols[a][r].conj() * cols[c][r]).sum();
        }
        g[a][u] = (0..n).map(|r| cols[a][r].conj() * y.0[r]).sum();
    }
    let scale = (0..u).map(|a| g[a][a].norm()).fold(0.0, f64::max);
    for p in 0..u {
        let piv = (p..u)
            .max_by(|&a, &b| g[a][p].norm().total_cmp(&g[b][p].norm()))
            .unwrap_or(p);
        if g[piv][p].norm() <= 1e-12 * scale {
            return Ok(None);
        }
        g.swap(p, piv);
        for r in p + 1..u {
            let f = g[r][p] / g[p][p];
            for c in p..=u {
                let v = g[p][c];
                g[r][c] -= f * v;
            }
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); u];
    for p in (0..u).rev() {
        let mut acc = g[p][u];
        for c in p + 1..u {
            acc -= g[p][c] * x[c];
        }
        x[p] = acc / g[p][p];
    }

    let ynorm = y.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut res = 0.0;
    for r in 0..n {
        let fit: C64 = (0..u).map(|c| cols[c][r] * x[c]).sum();
        res += (y.0[r] - fit).norm_sqr();
    }
    let residual = if ynorm > 0.0 {
        res.sqrt() / ynorm
    } else {
        res.sqrt()
    };

    let mut it = x.into_iter();
    let blocks = codebooks
        .iter()
        .zip(delays)
        .map(|(b, ds)| {
            ds.iter()
                .map(|_| (0..b.k()).map(|_| it.next().unwrap_or_default()).collect())
                .collect()
        })
        .collect();
    Ok(Some((blocks, residual)))
}

/// Both sides of the adjoint identity by direct summation:
/// `Re sum_n y_n lambda_n` with `y = B(H)`, and `Re sum_i <H_i, (B^adj lambda)_i>`.
pub fn direct_adjoint_pair(
    tuple: &LiftedTuple,
    lambda: &[C64],
    codebooks: &[Codebook],
) -> Result<(f64, f64)> {
    if tuple.blocks.len() != codebooks.len() {
        return Err(Error::ShapeMismatch {
            what: "lifted blocks",
            expected: codebooks.len(),
            found: tuple.blocks.len(),
        });
    }
    let n = lambda.len();
    let mut forward = C64::new(0.0, 0.0);
    for idx in 0..n {
        let mut yn = C64::new(0.0, 0.0);
        for (h, b) in tuple.blocks.iter().zip(codebooks) {
            if h.ncols() != n || b.n() != n || h.nrows() != b.k() {
                return Err(Error::ShapeMismatch {
                    what: "lifted block",
                    expected: n,
                    found: h.ncols(),
                });
            }
            for l in 0..b.k() {
                yn += h[(l, idx)] * b.at(idx, l);
            }
        }
        forward += yn * lambda[idx];
    }
    let mut adjoint = C64::new(0.0, 0.0);
    for (h, b) in tuple.blocks.iter().zip(codebooks) {
        for idx in 0..n {
            for l in 0..b.k() {
                let adj = lambda[idx] * b.at(idx, l);
                adjoint += h[(l, idx)] * adj;
            }
        }
    }
    Ok((forward.re, adjoint.re))
}

/// Central differences of the `(l-1)`-th kernel derivative against the `l`-th,
/// step `1e-5`, max absolute gap divided by `M^l`.
pub fn finite_difference_kernel_check(l: u32, weights: &KernelWeights, taus: &[f64]) -> Result<f64> {
    if !(1..=3).contains(&l) {
        return Err(Error::Domain("derivative order must lie in 1..=3"));
    }
    let h = 1e-5;
    let norm = (weights.m() as f64).powi(l as i32);
    let mut worst = 0.0_f64;
    for &t in taus {
        let fd = (kernel_scalar(t + h, l - 1, weights) - kernel_scalar(t - h, l - 1, weights)) / (2.0 * h);
        worst = worst.max((fd - kernel_scalar(t, l, weights)).norm() / norm);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::g_weights;

    #[test]
    fn combination_walk_is_complete() {
        let mut cur = vec![vec![0, 1], vec![0]];
        let mut count = 1;
        while advance(&mut cur, 4) {
            count += 1;
        }
        assert_eq!(count, 6 * 4);
        assert_eq!(search_budget(4, &[2, 1]), 24);
    }

    #[test]
    fn budget_is_enforced() {
        let g = GridSpec::new(2).unwrap();
        let b = Codebook::new(0, crate::CMat::from_fn(g.n(), 1, |_, _| C64::new(1.0, 0.0)), g).unwrap();
        let y = Measurement::zeros(g.n());
        let cfg = OracleConfig {
            grid_points: 128,
            max_total_paths: 4,
        };
        let err = exhaustive_grid_recover(&y, &[b.clone(), b.clone()], g, &[2, 2], &cfg).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn kernel_first_derivative_matches_differences() {
        let w = g_weights(8).unwrap();
        let taus: Vec<f64> = (0..64).map(|j| j as f64 / 64.0).collect();
        assert!(finite_difference_kernel_check(1, &w, &taus).unwrap() <= 1e-5);
    }

    #[test]
    fn kernel_derivative_vanishes_at_zero() {
        let w = g_weights(5).unwrap();
        assert!(kernel_scalar(0.0, 1, &w).norm() < 1e-10);
    }
}
