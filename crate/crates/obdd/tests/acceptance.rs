//! Acceptance criteria, one `PASS`/`FAIL` line each.
//!
//! Runs all criteria by default; pass criterion numbers after `--` to run a
//! subset, e.g. `cargo test --test acceptance -- 1 7`.

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use obdd::experiment::{run_experiment, ExperimentConfig, RecoveryConfig, Snr};
use obdd::instance::{gen_instance, Constellation, Instance, InstanceSpec};
use obdd::metrics::{match_delays, nmse, nmse_db};
use obdd::pipeline::{run_pipeline, PipelineOptions};
use obdd::rng::{stream, Stream};
use obdd_core::certificate::{build_certificate, g_weights, kernel_scalar};
use obdd_core::model::{frobenius_pairing, lift_adjoint, lift_forward, synthesize_direct};
use obdd_core::oracle::{exhaustive_grid_recover, finite_difference_kernel_check, OracleConfig};
use obdd_core::recovery::{gram_coefficients, DualPolynomial};
use obdd_core::solver::{
    min_eigenvalue, project_psd, project_toeplitz_affine, toeplitz_residual, SolveStatus, SolverOptions,
};
use obdd_core::{CMat, Channel, Codebook, GridSpec, LiftedTuple, Measurement, Message, Path, C64};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

const DELAY_TOL: f64 = 1e-3;

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn exact(delays: &[f64], inst: &Instance, user: usize) -> bool {
    match_delays(delays, &inst.channels[user].delays(), DELAY_TOL).is_exact()
}

/// Criteria 1, 3 and 5 share their solves: M = 16, (k, s) = (5, 2), (5, 1).
fn noiseless_small() -> Vec<Outcome> {
    let opts = PipelineOptions::default();
    let mut exact_seeds = 0;
    let mut worst_peak = 0.0_f64;
    let mut worst_nmse_db = f64::INFINITY;
    let mut worst_gap = 0.0_f64;
    let mut converged = 0;
    let seeds = 10;
    for seed in 0..seeds {
        let inst = gen_instance(&InstanceSpec::new(16, &[(5, 2), (5, 1)], seed)).unwrap();
        let out = run_pipeline(&inst.y_clean, &inst.codebooks, inst.grid, 0.0, &opts).unwrap();
        if (0..2).all(|u| exact(&out.delays[u].delays, &inst, u)) {
            exact_seeds += 1;
        }
        for (u, b) in inst.codebooks.iter().enumerate() {
            let q = DualPolynomial::new(&out.solution.lambda, b, inst.grid).unwrap();
            let peak = q
                .norms_on_grid(64 * inst.grid.n())
                .into_iter()
                .fold(0.0, f64::max);
            worst_peak = worst_peak.max(peak);
            let (aligned, _) = nmse(&out.messages[u].message_estimate, inst.messages[u].coeffs()).unwrap();
            worst_nmse_db = worst_nmse_db.min(nmse_db(aligned));
        }
        if out.solution.status == SolveStatus::Converged {
            converged += 1;
            let atomic = inst.atomic_norm();
            worst_gap = worst_gap.max((out.solution.objective - atomic).abs() / atomic);
        }
    }
    vec![
        outcome(
            1,
            exact_seeds == seeds && worst_peak <= 1.0 + 1e-3,
            format!("exact on {exact_seeds}/{seeds} seeds, max grid ||q|| = {worst_peak:.6}"),
        ),
        outcome(
            3,
            worst_nmse_db >= 40.0,
            format!("worst per-user aligned NMSE {worst_nmse_db:.1} dB"),
        ),
        outcome(
            5,
            converged > 0 && worst_gap <= 0.01,
            format!("{converged}/{seeds} converged, worst relative duality gap {worst_gap:.2e}"),
        ),
    ]
}

/// Three users at M = 32.
fn multi_user() -> Outcome {
    let opts = PipelineOptions::default();
    let seeds = 10;
    let mut exact_seeds = 0;
    for seed in 0..seeds {
        let inst = gen_instance(&InstanceSpec::new(32, &[(3, 3), (3, 2), (3, 1)], seed)).unwrap();
        let out = run_pipeline(&inst.y_clean, &inst.codebooks, inst.grid, 0.0, &opts).unwrap();
        if (0..3).all(|u| exact(&out.delays[u].delays, &inst, u)) {
            exact_seeds += 1;
        }
    }
    outcome(
        2,
        exact_seeds >= 9,
        format!("exact on {exact_seeds}/{seeds} seeds"),
    )
}

/// ASK-4 symbols at M = 12 over three SNRs.
fn noisy_symbols() -> Outcome {
    let mut instance = InstanceSpec::new(12, &[(3, 1), (3, 1)], 0);
    instance.constellation = Constellation::Ask { order: 4 };
    let cfg = ExperimentConfig {
        instance,
        solver: Default::default(),
        recovery: RecoveryConfig::default(),
        trials: 20,
        snr_db: vec![Snr(20.0), Snr(30.0), Snr(50.0)],
        m_values: Vec::new(),
    };
    let summary = run_experiment(&cfg).unwrap();
    let worst = |snr: f64| {
        let p = summary.points.iter().find(|p| p.snr_db.0 == snr).unwrap();
        p.aggregate
            .mean_ser
            .iter()
            .map(|s| s.unwrap_or(1.0))
            .fold(0.0, f64::max)
    };
    let (s20, s30, s50) = (worst(20.0), worst(30.0), worst(50.0));
    outcome(
        4,
        s30 <= 0.02 && s50 == 0.0,
        format!("worst per-user mean SER: 20 dB {s20:.3}, 30 dB {s30:.3}, 50 dB {s50:.3}"),
    )
}

fn cnormal(rng: &mut ChaCha20Rng) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Solver-free identities.
fn properties() -> Outcome {
    let mut rng = stream(6, Stream::Instance);
    let mut failures = Vec::new();

    let mut adj = 0.0_f64;
    for _ in 0..100 {
        let grid = GridSpec::new(rng.random_range(1..=8)).unwrap();
        let users = rng.random_range(1..=3);
        let codebooks: Vec<Codebook> = (0..users)
            .map(|i| {
                let k = rng.random_range(1..=4);
                Codebook::new(i, CMat::from_fn(grid.n(), k, |_, _| cnormal(&mut rng)), grid).unwrap()
            })
            .collect();
        let tuple = LiftedTuple {
            blocks: codebooks
                .iter()
                .map(|b| CMat::from_fn(b.k(), grid.n(), |_, _| cnormal(&mut rng)))
                .collect(),
        };
        let lambda: Vec<C64> = (0..grid.n()).map(|_| cnormal(&mut rng)).collect();
        let y = lift_forward(&tuple, &codebooks).unwrap();
        let lhs: f64 = y.0.iter().zip(&lambda).map(|(a, b)| a * b).sum::<C64>().re;
        let back = lift_adjoint(&lambda, &codebooks).unwrap();
        let rhs: f64 = tuple
            .blocks
            .iter()
            .zip(&back.blocks)
            .map(|(h, a)| frobenius_pairing(h, a).re)
            .sum();
        adj = adj.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    if adj > 1e-12 {
        failures.push(format!("adjoint {adj:.1e}"));
    }

    let mut gram = 0.0_f64;
    for m in [2, 5, 9] {
        let grid = GridSpec::new(m).unwrap();
        let b = Codebook::new(0, CMat::from_fn(grid.n(), 3, |_, _| cnormal(&mut rng)), grid).unwrap();
        let lambda: Vec<C64> = (0..grid.n()).map(|_| 0.1 * cnormal(&mut rng)).collect();
        let p = gram_coefficients(&lambda, &b, grid).unwrap();
        let q = DualPolynomial::new(&lambda, &b, grid).unwrap();
        for j in 0..1024 {
            let t = j as f64 / 1024.0;
            let v = q.norm(t);
            gram = gram.max((p.p_at(t) - C64::new(1.0 - v * v, 0.0)).norm());
        }
    }
    if gram > 1e-8 {
        failures.push(format!("gram {gram:.1e}"));
    }

    let mut proj = 0.0_f64;
    for n in [3, 7, 12] {
        let h = CMat::from_fn(n, n, |_, _| cnormal(&mut rng));
        let p = project_psd(h.as_ref()).unwrap();
        let pp = project_psd(p.as_ref()).unwrap();
        proj = proj
            .max((&pp - &p).norm_max())
            .max(-min_eigenvalue(p.as_ref()).unwrap() / p.norm_max());
        let t = project_toeplitz_affine(h.as_ref());
        let tt = project_toeplitz_affine(t.as_ref());
        proj = proj.max((&tt - &t).norm_max()).max(toeplitz_residual(t.as_ref()));
    }
    if proj > 1e-10 {
        failures.push(format!("projections {proj:.1e}"));
    }

    let mut fd = 0.0_f64;
    let mut weights = 0.0_f64;
    let mut curvature = 0.0_f64;
    for m in [2, 4, 8, 16, 32] {
        let w = g_weights(m).unwrap();
        let taus: Vec<f64> = (0..200).map(|j| j as f64 / 200.0 + 1e-3).collect();
        for l in 1..=3 {
            fd = fd.max(finite_difference_kernel_check(l, &w, &taus).unwrap());
        }
        weights = weights.max((w.as_slice().iter().sum::<f64>() / m as f64 - 1.0).abs());
        let want = -4.0 * PI * PI * ((m * m) as f64 - 1.0) / 3.0;
        curvature = curvature.max((kernel_scalar(0.0, 2, &w).re - want).abs() / want.abs());
    }
    if fd > 1e-4 {
        failures.push(format!("kernel derivatives {fd:.1e}"));
    }
    if weights > 1e-12 {
        failures.push(format!("weights {weights:.1e}"));
    }
    if curvature > 1e-10 {
        failures.push(format!("K''(0) {curvature:.1e}"));
    }

    let detail = format!(
        "adjoint {adj:.1e}, gram {gram:.1e}, projections {proj:.1e}, kernel fd {fd:.1e}, \
         weights {weights:.1e}, K''(0) {curvature:.1e}"
    );
    outcome(6, failures.is_empty(), detail)
}

/// Grid-aligned instance at M = 2 with delays `j / 16`.
fn grid_instance(
    seed: u64,
    users: &[(usize, usize)],
) -> (GridSpec, Vec<Codebook>, Vec<Channel>, Measurement) {
    let mut rng = stream(seed, Stream::Instance);
    let grid = GridSpec::new(2).unwrap();
    let mut codebooks = Vec::new();
    let mut channels = Vec::new();
    let mut messages = Vec::new();
    for (i, &(k, s)) in users.iter().enumerate() {
        let e = CMat::from_fn(grid.n(), k, |_, _| C64::new(StandardNormal.sample(&mut rng), 0.0));
        codebooks.push(Codebook::new(i, e, grid).unwrap());
        let idx: Vec<usize> = loop {
            let mut idx: Vec<usize> = (0..s).map(|_| rng.random_range(0..16)).collect();
            idx.sort_unstable();
            // at least 3/16 apart, above 1/N, around the circle
            let ok = idx.windows(2).all(|w| w[1] - w[0] >= 3) && (s < 2 || idx[0] + 16 - idx[s - 1] >= 3);
            if ok {
                break idx;
            }
        };
        let paths = idx
            .iter()
            .map(|&j| Path {
                amplitude: C64::from_polar(rng.random_range(0.5..1.5), rng.random_range(0.0..TAU)),
                delay: j as f64 / 16.0,
            })
            .collect();
        channels.push(Channel::new(paths).unwrap());
        messages.push(Message::new((0..k).map(|_| cnormal(&mut rng)).collect()).unwrap());
    }
    let y = synthesize_direct(&channels, &messages, &codebooks, grid).unwrap();
    (grid, codebooks, channels, y)
}

/// Pipeline support against exhaustive search on tiny grid instances.
fn oracle_equivalence() -> Outcome {
    let configs: [&[(usize, usize)]; 3] = [&[(2, 1)], &[(1, 1), (1, 1)], &[(1, 2)]];
    let opts = PipelineOptions::default();
    let mut agree = 0;
    let mut first_mismatch = None;
    for seed in 0..100u64 {
        let users = configs[seed as usize % 3];
        let (grid, codebooks, channels, y) = grid_instance(seed, users);
        let sparsities: Vec<usize> = channels.iter().map(Channel::s).collect();
        let oracle =
            exhaustive_grid_recover(&y, &codebooks, grid, &sparsities, &OracleConfig::default()).unwrap();
        let out = run_pipeline(&y, &codebooks, grid, 0.0, &opts).unwrap();
        let support: Vec<Vec<usize>> = out
            .delays
            .iter()
            .map(|d| {
                let mut idx: Vec<usize> = d
                    .delays
                    .iter()
                    .map(|t| (t * 16.0).round() as usize % 16)
                    .collect();
                idx.sort_unstable();
                idx
            })
            .collect();
        if support == oracle.support {
            agree += 1;
        } else if first_mismatch.is_none() {
            first_mismatch = Some(seed);
        }
    }
    let mut detail = format!("support agrees on {agree}/100 instances");
    if let Some(s) = first_mismatch {
        detail += &format!(", first mismatch at seed {s}");
    }
    outcome(7, agree == 100, detail)
}

/// Certificate validity and SDP recovery at M = 32 with separation 2/M.
fn certificate_consistency() -> Outcome {
    let opts = PipelineOptions {
        solver: SolverOptions {
            eps_abs: 1e-6,
            eps_rel: 1e-5,
            ..Default::default()
        },
        ..Default::default()
    };
    let seeds = 50;
    let mut valid = 0;
    let mut recovered = 0;
    for seed in 0..seeds {
        let mut spec = InstanceSpec::new(32, &[(3, 2), (3, 1)], seed);
        spec.min_sep = Some(2.0 / 32.0);
        let inst = gen_instance(&spec).unwrap();
        let rep = build_certificate(&inst.channels, &inst.messages, &inst.codebooks, inst.grid).unwrap();
        if !rep.valid {
            continue;
        }
        valid += 1;
        let out = run_pipeline(&inst.y_clean, &inst.codebooks, inst.grid, 0.0, &opts).unwrap();
        if (0..2).all(|u| exact(&out.delays[u].delays, &inst, u)) {
            recovered += 1;
        }
    }
    outcome(
        8,
        valid * 10 >= seeds * 9 && recovered == valid,
        format!("certificate valid on {valid}/{seeds} seeds, {recovered}/{valid} valid seeds recovered"),
    )
}

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |id: u32| wanted.is_empty() || wanted.contains(&id);
    let mut outcomes = Vec::new();
    let mut timed = |ids: &[u32], f: &dyn Fn() -> Vec<Outcome>| {
        if ids.iter().any(|&i| run(i)) {
            let start = Instant::now();
            let res = f();
            let secs = start.elapsed().as_secs_f64();
            for o in res.into_iter().filter(|o| run(o.id)) {
                let line = format!(
                    "{} criterion {}: {} ({secs:.1} s)",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.id,
                    o.detail
                );
                println!("{line}");
                outcomes.push(o);
            }
        }
    };
    timed(&[6], &|| vec![properties()]);
    timed(&[7], &|| vec![oracle_equivalence()]);
    timed(&[1, 3, 5], &noiseless_small);
    timed(&[4], &|| vec![noisy_symbols()]);
    timed(&[8], &|| vec![certificate_consistency()]);
    timed(&[2], &|| vec![multi_user()]);
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
