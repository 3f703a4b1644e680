mod common;

use common::*;
use obdd_core::model::{synthesize_direct, wrap_distance};
use obdd_core::recovery::{delays_by_grid, delays_by_roots, gram_coefficients, RootOptions};
use obdd_core::solver::{
    check_dual_feasibility, solve_noiseless, solve_noisy, DualSolution, SolveStatus, SolverOptions,
};
use obdd_core::{Channel, GridSpec, Measurement, Message, Path, C64};

fn assert_same_delays(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
    for (x, y) in a.iter().zip(b) {
        assert!(wrap_distance(*x, *y) <= tol, "{a:?} vs {b:?}");
    }
}

fn root_delays(sol: &DualSolution, p: &Planted, i: usize) -> Vec<f64> {
    let g = gram_coefficients(&sol.lambda, &p.codebooks[i], p.grid).unwrap();
    delays_by_roots(&g, &RootOptions::noiseless()).unwrap().delays
}

#[test]
fn zero_measurement_gives_the_trivial_point() {
    let grid = GridSpec::new(3).unwrap();
    let mut rng = rng(20);
    let cbs = vec![
        real_codebook(&mut rng, 0, 2, grid),
        real_codebook(&mut rng, 1, 1, grid),
    ];
    let sol = solve_noiseless(
        &Measurement::zeros(grid.n()),
        &cbs,
        grid,
        &SolverOptions::default(),
    )
    .unwrap();
    assert_eq!(sol.status, SolveStatus::Converged);
    assert!(sol.lambda.iter().all(|z| *z == C64::new(0.0, 0.0)));
    assert_eq!(sol.objective, 0.0);
    let rep = check_dual_feasibility(&sol, &cbs, grid, 256).unwrap();
    assert_eq!(rep.max_dual_poly_norm, 0.0);
    assert!(rep.min_block_eigenvalue >= 0.0);
    assert!(rep.toeplitz_residual <= 1e-12);
}

#[test]
fn single_spike_objective_and_peak() {
    let grid = GridSpec::new(2).unwrap();
    let b = ones_codebook(1, grid);
    let ch = Channel::new(vec![Path {
        amplitude: C64::new(1.0, 0.0),
        delay: 0.3,
    }])
    .unwrap();
    let f = Message::new(vec![C64::new(1.0, 0.0)]).unwrap();
    let y = synthesize_direct(&[ch], &[f], std::slice::from_ref(&b), grid).unwrap();
    let sol = solve_noiseless(&y, std::slice::from_ref(&b), grid, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Converged);
    assert!((sol.objective - 1.0).abs() <= 1e-3, "{}", sol.objective);
    let peak = delays_by_grid(&sol.lambda, &b, grid, 64 * grid.n(), 1e-3).unwrap();
    assert_eq!(peak.len(), 1);
    assert!(wrap_distance(peak.delays[0], 0.3) <= 1e-3);
}

#[test]
fn zero_eta_is_bit_identical_to_noiseless() {
    let p = planted(21, 4, &[(2, 1), (1, 2)], 0.1);
    let opts = SolverOptions {
        max_iters: 300,
        ..Default::default()
    };
    let a = solve_noiseless(&p.y, &p.codebooks, p.grid, &opts).unwrap();
    let b = solve_noisy(&p.y, &p.codebooks, p.grid, 0.0, &opts).unwrap();
    assert_eq!(a.lambda, b.lambda);
    assert_eq!(a.q_blocks, b.q_blocks);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn huge_eta_drives_the_dual_vector_to_zero() {
    let p = planted(22, 3, &[(2, 1)], 0.1);
    let eta = p.y.norm() * p.grid.n() as f64;
    let sol = solve_noisy(&p.y, &p.codebooks, p.grid, eta, &SolverOptions::default()).unwrap();
    let lam = sol.lambda.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!(lam <= 1e-6, "{lam}");
    assert!(sol.objective.abs() <= 1e-6);
}

#[test]
fn scaling_the_dual_vector_scales_the_reported_norm() {
    let p = planted(23, 3, &[(2, 1)], 0.1);
    let mut sol = DualSolution::trivial(p.grid.n(), 1, false);
    let mut rng = rng(23);
    sol.lambda = cvec(&mut rng, p.grid.n());
    let a = check_dual_feasibility(&sol, &p.codebooks, p.grid, 512).unwrap();
    sol.lambda.iter_mut().for_each(|z| *z *= 1e3);
    let b = check_dual_feasibility(&sol, &p.codebooks, p.grid, 512).unwrap();
    assert!(rel_err(b.max_dual_poly_norm, 1e3 * a.max_dual_poly_norm) <= 1e-12);
}

#[test]
fn max_iters_reports_a_finite_iterate() {
    let p = planted(24, 4, &[(2, 2)], 0.1);
    let opts = SolverOptions {
        max_iters: 5,
        ..Default::default()
    };
    let sol = solve_noiseless(&p.y, &p.codebooks, p.grid, &opts).unwrap();
    assert_eq!(sol.status, SolveStatus::MaxIters);
    assert_eq!(sol.iterations, 5);
    assert!(sol.lambda.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    assert!(sol.primal_residual.is_finite() && sol.dual_residual.is_finite());
}

/// Two users on a grid small enough for a quick solve with exact recovery.
#[test]
fn small_instance_recovers_exactly_with_strong_duality() {
    let p = planted(25, 8, &[(2, 2), (2, 1)], 2.0 / 8.0);
    let sol = solve_noiseless(&p.y, &p.codebooks, p.grid, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Converged);
    assert!(rel_err(sol.objective, p.atomic_norm()) <= 1e-2);

    let rep = check_dual_feasibility(&sol, &p.codebooks, p.grid, 4096).unwrap();
    assert!(rep.max_dual_poly_norm <= 1.0 + 1e-3);
    assert!(rep.min_block_eigenvalue >= -1e-6);
    assert!(rep.toeplitz_residual <= 1e-6);
    for q in &sol.q_blocks {
        for c in 0..q.ncols() {
            for r in 0..q.nrows() {
                assert!((q[(r, c)] - q[(c, r)].conj()).norm() <= 1e-10);
            }
        }
    }

    for (i, ch) in p.channels.iter().enumerate() {
        let roots = root_delays(&sol, &p, i);
        assert_same_delays(&roots, &ch.delays(), 1e-3);
        let grid = delays_by_grid(&sol.lambda, &p.codebooks[i], p.grid, 4096, 1e-3).unwrap();
        assert_same_delays(&grid.delays, &roots, 1e-4);
        let q = obdd_core::recovery::DualPolynomial::new(&sol.lambda, &p.codebooks[i], p.grid).unwrap();
        for &t in &ch.delays() {
            assert!((q.norm(t) - 1.0).abs() <= 1e-3);
        }
    }

    let shared = SolverOptions {
        shared_q: true,
        ..Default::default()
    };
    let sol_shared = solve_noiseless(&p.y, &p.codebooks, p.grid, &shared).unwrap();
    assert_eq!(sol_shared.q_blocks.len(), 1);
    for i in 0..p.channels.len() {
        assert_same_delays(&root_delays(&sol_shared, &p, i), &root_delays(&sol, &p, i), 1e-4);
    }
}
