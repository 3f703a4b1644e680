mod common;

use common::*;
use obdd_core::oracle::{
    exhaustive_grid_recover, normal_equations_fit, search_budget, OracleConfig, MAX_COMBINATIONS,
};
use obdd_core::recovery::{least_squares_amplitudes, DelayEstimate};
use obdd_core::{Error, Measurement};

fn estimates(delays: &[Vec<f64>]) -> Vec<DelayEstimate> {
    delays
        .iter()
        .enumerate()
        .map(|(user_id, d)| DelayEstimate {
            user_id,
            delays: d.clone(),
            scores: vec![1.0; d.len()],
        })
        .collect()
}

fn truth_support(p: &Planted, points: usize) -> Vec<Vec<usize>> {
    p.channels
        .iter()
        .map(|c| {
            c.delays()
                .iter()
                .map(|d| (d * points as f64).round() as usize)
                .collect()
        })
        .collect()
}

#[test]
fn planted_grid_support_is_found_exactly() {
    let configs: [&[(usize, usize)]; 3] = [&[(2, 1)], &[(1, 1), (1, 1)], &[(1, 2)]];
    for seed in 0..12 {
        let users = configs[seed as usize % 3];
        let p = planted_on_grid(seed, 2, users, 16);
        let sp: Vec<usize> = users.iter().map(|u| u.1).collect();
        let fit = exhaustive_grid_recover(&p.y, &p.codebooks, p.grid, &sp, &OracleConfig::default()).unwrap();
        assert_eq!(fit.support, truth_support(&p, 16), "seed {seed}");
        assert!(fit.residual <= 1e-9, "seed {seed}: residual {}", fit.residual);
        for (i, blocks) in fit.blocks.iter().enumerate() {
            for (b, path) in blocks.iter().zip(p.channels[i].paths()) {
                let want: Vec<_> = p.messages[i]
                    .coeffs()
                    .iter()
                    .map(|f| path.amplitude * f)
                    .collect();
                assert!(max_abs_diff(b, &want) <= 1e-8);
            }
        }
    }
}

#[test]
fn normal_equations_agree_with_svd_least_squares() {
    for seed in 0..20 {
        let p = planted(100 + seed, 4, &[(2, 2), (1, 1)], 0.15);
        let mut r = rng(seed);
        let y = Measurement(p.y.0.iter().map(|z| z + 0.05 * cnormal(&mut r)).collect());
        // perturbed delays so the fit is not exact
        let delays: Vec<Vec<f64>> = p
            .channels
            .iter()
            .map(|c| {
                c.delays()
                    .iter()
                    .map(|d| (d + 0.01 * normal(&mut r)).rem_euclid(1.0))
                    .collect()
            })
            .collect();
        let (blocks, res) = normal_equations_fit(&y, &p.codebooks, &delays, p.grid)
            .unwrap()
            .unwrap();
        let ls = least_squares_amplitudes(&y, &p.codebooks, &estimates(&delays), p.grid).unwrap();
        assert!(!ls.rank_deficient);
        assert!((res - ls.residual).abs() <= 1e-8, "seed {seed}");
        for (a, b) in blocks.iter().flatten().zip(ls.blocks.iter().flatten()) {
            assert!(max_abs_diff(a, b) <= 1e-8, "seed {seed}");
        }
    }
}

#[test]
fn truth_minimises_the_residual_at_high_snr() {
    for seed in 0..20 {
        let users: &[(usize, usize)] = if seed % 2 == 0 {
            &[(2, 1)]
        } else {
            &[(1, 1), (1, 1)]
        };
        let p = planted_on_grid(200 + seed, 2, users, 16);
        // 30 dB SNR
        let sigma = p.y.norm() / (p.y.len() as f64).sqrt() * 10f64.powf(-30.0 / 20.0) / 2f64.sqrt();
        let mut r = rng(seed);
        let y = Measurement(p.y.0.iter().map(|z| z + sigma * cnormal(&mut r)).collect());
        let sp: Vec<usize> = users.iter().map(|u| u.1).collect();
        let fit = exhaustive_grid_recover(&y, &p.codebooks, p.grid, &sp, &OracleConfig::default()).unwrap();
        assert_eq!(fit.support, truth_support(&p, 16), "seed {seed}");
    }
}

#[test]
fn oversized_search_is_refused() {
    assert!(search_budget(128, &[2, 2]) > MAX_COMBINATIONS);
    let p = planted_on_grid(1, 2, &[(1, 2), (1, 2)], 16);
    let cfg = OracleConfig {
        grid_points: 128,
        max_total_paths: 4,
    };
    let err = exhaustive_grid_recover(&p.y, &p.codebooks, p.grid, &[2, 2], &cfg).unwrap_err();
    assert!(matches!(err, Error::BudgetExceeded { .. }));
    let err =
        exhaustive_grid_recover(&p.y, &p.codebooks, p.grid, &[3, 2], &OracleConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

#[test]
fn too_many_unknowns_are_rejected() {
    let p = planted(5, 1, &[(3, 1)], 0.1);
    // 3 delays x k = 3 gives 9 unknowns for N = 5 equations
    let delays = vec![vec![0.1, 0.4, 0.7]];
    assert!(matches!(
        normal_equations_fit(&p.y, &p.codebooks, &delays, p.grid),
        Err(Error::OverParameterized {
            unknowns: 9,
            equations: 5
        })
    ));
}
