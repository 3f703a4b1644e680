use crate::model::{Codebook, GridSpec};
use crate::recovery::dualpoly::DualPolynomial;
use crate::{CMat, Error, Result, C64};

use super::projection::{min_eigenvalue, toeplitz_residual};
use super::DualSolution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// Max over the grid and all users of `||q_i(tau)||_2`.
    pub max_dual_poly_norm: f64,
    /// Smallest eigenvalue over all `[[Q_i, X_i^H], [X_i, I]]`.
    pub min_block_eigenvalue: f64,
    /// Largest deviation of a diagonal sum of any `Q_i` from its target.
    pub toeplitz_residual: f64,
}

/// Measures how far `sol` is from the dual feasible set. Makes no pass/fail call.
pub fn check_dual_feasibility(
    sol: &DualSolution,
    codebooks: &[Codebook],
    grid: GridSpec,
    tau_grid_size: usize,
) -> Result<FeasibilityReport> {
    let n = grid.n();
    if sol.lambda.len() != n {
        return Err(Error::ShapeMismatch {
            what: "dual vector",
            expected: n,
            found: sol.lambda.len(),
        });
    }
    if sol.q_blocks.len() != 1 && sol.q_blocks.len() != codebooks.len() {
        return Err(Error::ShapeMismatch {
            what: "Q blocks",
            expected: codebooks.len(),
            found: sol.q_blocks.len(),
        });
    }
    let mut max_norm = 0.0_f64;
    let mut min_eig = f64::INFINITY;
    for (i, b) in codebooks.iter().enumerate() {
        let p = DualPolynomial::new(&sol.lambda, b, grid)?;
        for v in p.norms_on_grid(tau_grid_size.max(1)) {
            max_norm = max_norm.max(v);
        }
        let q = sol.q_for_user(i);
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::ShapeMismatch {
                what: "Q block",
                expected: n,
                found: q.nrows(),
            });
        }
        let k = b.k();
        let block = CMat::from_fn(n + k, n + k, |r, c| match (r < n, c < n) {
            (true, true) => q[(r, c)],
            (false, true) => sol.lambda[c] * b.at(c, r - n),
            (true, false) => (sol.lambda[r] * b.at(r, c - n)).conj(),
            (false, false) => C64::new(if r == c { 1.0 } else { 0.0 }, 0.0),
        });
        min_eig = min_eig.min(min_eigenvalue(block.as_ref())?);
    }
    let toeplitz = sol
        .q_blocks
        .iter()
        .map(|q| toeplitz_residual(q.as_ref()))
        .fold(0.0_f64, f64::max);
    Ok(FeasibilityReport {
        max_dual_poly_norm: max_norm,
        min_block_eigenvalue: min_eig,
        toeplitz_residual: toeplitz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_point_is_feasible() {
        let g = GridSpec::new(2).unwrap();
        let b = Codebook::new(
            0,
            CMat::from_fn(g.n(), 2, |i, l| C64::new((i + l) as f64, 0.0)),
            g,
        )
        .unwrap();
        let sol = DualSolution::trivial(g.n(), 1, false);
        let r = check_dual_feasibility(&sol, &[b], g, 256).unwrap();
        assert_eq!(r.max_dual_poly_norm, 0.0);
        assert!(r.min_block_eigenvalue >= -1e-14);
        assert!(r.toeplitz_residual <= 1e-12);
    }
}
