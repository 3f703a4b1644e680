//! Measurement to delays and messages in one call.

use obdd_core::recovery::{
    decode_messages, delays_by_grid, delays_by_roots, gram_coefficients, least_squares_amplitudes,
    DelayEstimate, LeastSquaresFit, RecoveryResult, RootOptions,
};
use obdd_core::solver::{solve_noisy, DualSolution, SolverOptions};
use obdd_core::{Codebook, GridSpec, Measurement};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DelayMethod {
    #[default]
    Roots,
    Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub solver: SolverOptions,
    pub method: DelayMethod,
    /// Grid size of the grid method; `None` means `64 N`.
    pub grid_size: Option<usize>,
    /// Grid-method peak threshold `th`: peaks need `||q|| >= 1 - th`.
    pub threshold: f64,
    /// Root-method options; `None` picks the noiseless or noisy defaults from `eta`.
    pub roots: Option<RootOptions>,
    pub ask_order: Option<u32>,
    /// Estimates whose fitted `|c|` is below this fraction of the largest
    /// fitted `|c|` are dropped and the fit is repeated; 0 disables.
    pub prune_ratio: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            method: DelayMethod::Roots,
            grid_size: None,
            threshold: 1e-3,
            roots: None,
            ask_order: None,
            prune_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub solution: DualSolution,
    pub delays: Vec<DelayEstimate>,
    pub fit: LeastSquaresFit,
    pub messages: Vec<RecoveryResult>,
}

/// Delay estimates for every user from a dual solution.
pub fn estimate_delays(
    sol: &DualSolution,
    codebooks: &[Codebook],
    grid: GridSpec,
    noisy: bool,
    opts: &PipelineOptions,
) -> Result<Vec<DelayEstimate>> {
    let roots = opts.roots.unwrap_or(if noisy {
        RootOptions::noisy()
    } else {
        RootOptions::noiseless()
    });
    let grid_size = opts.grid_size.unwrap_or(64 * grid.n());
    codebooks
        .iter()
        .map(|b| {
            Ok(match opts.method {
                DelayMethod::Roots => delays_by_roots(&gram_coefficients(&sol.lambda, b, grid)?, &roots)?,
                DelayMethod::Grid => delays_by_grid(&sol.lambda, b, grid, grid_size, opts.threshold)?,
            })
        })
        .collect()
}

/// Least squares and message decoding for fixed delay estimates.
///
/// When the estimates carry more unknowns than there are samples, the
/// lowest-scoring delays are dropped until the system is determined. Then
/// delays with fitted `|c| < prune_ratio * max |c|` are removed and the fit is
/// repeated until none qualify.
pub fn recover_messages(
    y: &Measurement,
    codebooks: &[Codebook],
    grid: GridSpec,
    mut delays: Vec<DelayEstimate>,
    ask_order: Option<u32>,
    prune_ratio: f64,
) -> Result<(Vec<DelayEstimate>, LeastSquaresFit, Vec<RecoveryResult>)> {
    loop {
        let unknowns: usize = codebooks.iter().zip(&delays).map(|(b, d)| b.k() * d.len()).sum();
        if unknowns <= grid.n() {
            break;
        }
        // drop the globally weakest estimate
        let (ui, di) = delays
            .iter()
            .enumerate()
            .flat_map(|(u, d)| d.scores.iter().enumerate().map(move |(j, s)| (u, j, *s)))
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .map(|(u, j, _)| (u, j))
            .expect("nonzero unknowns imply an estimate");
        log::debug!(
            "dropping weak delay estimate {} of user {ui}",
            delays[ui].delays[di]
        );
        delays[ui].delays.remove(di);
        delays[ui].scores.remove(di);
    }
    loop {
        let fit = least_squares_amplitudes(y, codebooks, &delays, grid)?;
        let messages = decode_messages(&fit, ask_order)?;
        let largest = messages
            .iter()
            .flat_map(|m| m.amplitude_magnitudes.iter().copied())
            .fold(0.0, f64::max);
        let cut = prune_ratio * largest;
        let mut pruned = false;
        for (d, m) in delays.iter_mut().zip(&messages) {
            let keep: Vec<bool> = m.amplitude_magnitudes.iter().map(|&a| a >= cut).collect();
            if keep.iter().any(|k| !k) {
                pruned = true;
                let mut it = keep.iter();
                d.delays.retain(|_| *it.next().unwrap_or(&true));
                let mut it = keep.iter();
                d.scores.retain(|_| *it.next().unwrap_or(&true));
            }
        }
        if !pruned || largest == 0.0 {
            return Ok((delays, fit, messages));
        }
    }
}

/// Solve, locate delays, fit amplitudes and decode messages.
pub fn run_pipeline(
    y: &Measurement,
    codebooks: &[Codebook],
    grid: GridSpec,
    eta: f64,
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    let solution = solve_noisy(y, codebooks, grid, eta, &opts.solver)?;
    let delays = estimate_delays(&solution, codebooks, grid, eta > 0.0, opts)?;
    let (delays, fit, messages) =
        recover_messages(y, codebooks, grid, delays, opts.ask_order, opts.prune_ratio)?;
    Ok(PipelineOutput {
        solution,
        delays,
        fit,
        messages,
    })
}
