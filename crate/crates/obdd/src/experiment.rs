//! Monte Carlo runs over SNR and problem-size sweeps.

use std::time::Instant;

use rayon::prelude::*;

use obdd_core::solver::{SolveStatus, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::instance::{gen_instance, InstanceSpec};
use crate::metrics::{match_delays, nmse, ser};
use crate::noise::{add_noise, snr_serde};
use crate::pipeline::{run_pipeline, DelayMethod, PipelineOptions};
use crate::rng::trial_seed;

/// SNR in dB; infinite means noiseless. Serialized as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Snr(#[serde(with = "snr_serde")] pub f64);

impl Snr {
    pub const NOISELESS: Snr = Snr(f64::INFINITY);

    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        snr_serde::parse(s).map(Snr)
    }
}

/// Serializable mirror of [`SolverOptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rho: f64,
    pub max_iters: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub over_relaxation: f64,
    pub shared_q: bool,
    pub residual_balancing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverOptions::default().into()
    }
}

impl From<SolverOptions> for SolverConfig {
    fn from(o: SolverOptions) -> Self {
        Self {
            rho: o.rho,
            max_iters: o.max_iters,
            eps_abs: o.eps_abs,
            eps_rel: o.eps_rel,
            over_relaxation: o.over_relaxation,
            shared_q: o.shared_q,
            residual_balancing: o.residual_balancing,
        }
    }
}

impl From<SolverConfig> for SolverOptions {
    fn from(c: SolverConfig) -> Self {
        Self {
            rho: c.rho,
            max_iters: c.max_iters,
            eps_abs: c.eps_abs,
            eps_rel: c.eps_rel,
            over_relaxation: c.over_relaxation,
            shared_q: c.shared_q,
            residual_balancing: c.residual_balancing,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoveryConfig {
    pub method: DelayMethod,
    /// `None` means `64 N`.
    pub grid_size: Option<usize>,
    pub threshold: f64,
    /// Matching radius for delay hits.
    pub match_tol: f64,
    /// Relative amplitude below which estimates are discarded.
    pub prune_ratio: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            method: DelayMethod::Roots,
            grid_size: None,
            threshold: 1e-3,
            match_tol: 1e-3,
            prune_ratio: 0.1,
        }
    }
}

/// One JSON document: the instance template, solver and recovery settings,
/// and the sweep lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Template; its `seed` is the base seed and `m` is replaced by each `m_values` entry.
    pub instance: InstanceSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub recovery: RecoveryConfig,
    pub trials: usize,
    #[serde(default = "default_snrs")]
    pub snr_db: Vec<Snr>,
    /// Problem sizes to sweep; empty means just `instance.m`.
    #[serde(default)]
    pub m_values: Vec<usize>,
}

fn default_snrs() -> Vec<Snr> {
    vec![Snr::NOISELESS]
}

impl ExperimentConfig {
    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            solver: self.solver.into(),
            method: self.recovery.method,
            grid_size: self.recovery.grid_size,
            threshold: self.recovery.threshold,
            roots: None,
            prune_ratio: self.recovery.prune_ratio,
            ask_order: match self.instance.constellation {
                crate::instance::Constellation::Ask { order } => Some(order),
                crate::instance::Constellation::UnitSphere => None,
            },
        }
    }

    fn sizes(&self) -> Vec<usize> {
        if self.m_values.is_empty() {
            vec![self.instance.m]
        } else {
            self.m_values.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub nmse_aligned: f64,
    pub nmse_magnitude: f64,
    pub ser: Option<f64>,
    pub delay_errors: Vec<f64>,
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Converged,
    MaxIters,
    NumericalFailure,
    Error,
}

impl From<SolveStatus> for TrialStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Converged => Self::Converged,
            SolveStatus::MaxIters => Self::MaxIters,
            SolveStatus::NumericalFailure => Self::NumericalFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    pub iterations: usize,
    pub objective: f64,
    pub atomic_norm: f64,
    pub users: Vec<UserMetrics>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        matches!(self.status, TrialStatus::NumericalFailure | TrialStatus::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub failures: usize,
    pub mean_nmse: Vec<f64>,
    pub mean_ser: Vec<Option<f64>>,
    pub mean_max_delay_error: Vec<f64>,
    pub hits: Vec<usize>,
    pub misses: Vec<usize>,
    pub false_alarms: Vec<usize>,
    pub mean_iterations: f64,
    pub mean_wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub m: usize,
    pub n: usize,
    pub snr_db: Snr,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub points: Vec<SweepPoint>,
}

/// One trial: instance, noise, pipeline, metrics. Pipeline errors are recorded, not returned.
pub fn run_trial(
    spec: &InstanceSpec,
    snr: Snr,
    opts: &PipelineOptions,
    match_tol: f64,
    trial: usize,
) -> Result<TrialRecord> {
    let inst = gen_instance(spec)?;
    let (y, noise) = add_noise(&inst.y_clean, snr.0, spec.seed);
    let start = Instant::now();
    let out = run_pipeline(&y, &inst.codebooks, inst.grid, noise.eta, opts);
    let wall = start.elapsed().as_secs_f64();
    let atomic = inst.atomic_norm();

    let failed_users = |inst: &crate::instance::Instance| -> Vec<UserMetrics> {
        inst.channels
            .iter()
            .map(|c| UserMetrics {
                nmse_aligned: 1.0,
                nmse_magnitude: 1.0,
                ser: inst.symbols.as_ref().map(|_| 1.0),
                delay_errors: Vec::new(),
                hits: 0,
                misses: c.s(),
                false_alarms: 0,
            })
            .collect()
    };

    let out = match out {
        Ok(o) => o,
        Err(e) => {
            return Ok(TrialRecord {
                trial,
                seed: spec.seed,
                status: TrialStatus::Error,
                iterations: 0,
                objective: f64::NAN,
                atomic_norm: atomic,
                users: failed_users(&inst),
                wall_time_s: wall,
                error: Some(e.to_string()),
            })
        }
    };
    let status: TrialStatus = out.solution.status.into();
    let users = if status == TrialStatus::NumericalFailure {
        failed_users(&inst)
    } else {
        let mut users = Vec::with_capacity(inst.channels.len());
        for (i, ch) in inst.channels.iter().enumerate() {
            let m = match_delays(&out.delays[i].delays, &ch.delays(), match_tol);
            let rec = &out.messages[i];
            let (aligned, magnitude) = nmse(&rec.message_estimate, inst.messages[i].coeffs())?;
            let ser_i = match (&inst.symbols, &rec.symbols) {
                (Some(truth), Some(est)) => Some(ser(est, &truth[i])),
                (Some(_), None) => Some(1.0),
                _ => None,
            };
            users.push(UserMetrics {
                nmse_aligned: aligned,
                nmse_magnitude: magnitude,
                ser: ser_i,
                hits: m.errors.len(),
                delay_errors: m.errors,
                misses: m.misses,
                false_alarms: m.false_alarms,
            });
        }
        users
    };
    Ok(TrialRecord {
        trial,
        seed: spec.seed,
        status,
        iterations: out.solution.iterations,
        objective: out.solution.objective,
        atomic_norm: atomic,
        users,
        wall_time_s: wall,
        error: None,
    })
}

fn aggregate(trials: &[TrialRecord], users: usize) -> Aggregate {
    let t = trials.len().max(1) as f64;
    let mean = |f: &dyn Fn(&TrialRecord) -> f64| trials.iter().map(f).sum::<f64>() / t;
    let mean_ser = (0..users)
        .map(|u| {
            let vals: Vec<f64> = trials.iter().filter_map(|r| r.users[u].ser).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    Aggregate {
        trials: trials.len(),
        failures: trials.iter().filter(|r| r.failed()).count(),
        mean_nmse: (0..users).map(|u| mean(&|r| r.users[u].nmse_aligned)).collect(),
        mean_ser,
        mean_max_delay_error: (0..users)
            .map(|u| mean(&|r| r.users[u].delay_errors.iter().copied().fold(0.0, f64::max)))
            .collect(),
        hits: (0..users)
            .map(|u| trials.iter().map(|r| r.users[u].hits).sum())
            .collect(),
        misses: (0..users)
            .map(|u| trials.iter().map(|r| r.users[u].misses).sum())
            .collect(),
        false_alarms: (0..users)
            .map(|u| trials.iter().map(|r| r.users[u].false_alarms).sum())
            .collect(),
        mean_iterations: mean(&|r| r.iterations as f64),
        mean_wall_time_s: mean(&|r| r.wall_time_s),
    }
}

/// Runs every `(M, SNR)` point with `trials` trials each. Trial `t` uses
/// seed `base + t` at every point, so points differ only by size and noise level.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    if config.trials == 0 {
        return Err(HarnessError::InvalidSpec("trials must be positive".into()));
    }
    config.instance.validate()?;
    let opts = config.pipeline_options();
    opts.solver.validate()?;
    let mut points = Vec::new();
    for m in config.sizes() {
        for &snr in &config.snr_db {
            // collect() keeps trial order, so the result does not depend on the pool size
            let trials = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let mut spec = config.instance.clone();
                    spec.m = m;
                    spec.seed = trial_seed(config.instance.seed, t as u64);
                    let rec = run_trial(&spec, snr, &opts, config.recovery.match_tol, t)?;
                    log::info!(
                        "m={m} snr={} trial={t} status={:?} iters={} time={:.2}s",
                        snr.0,
                        rec.status,
                        rec.iterations,
                        rec.wall_time_s
                    );
                    Ok(rec)
                })
                .collect::<Result<Vec<_>>>()?;
            let aggregate = aggregate(&trials, config.instance.users.len());
            points.push(SweepPoint {
                m,
                n: 4 * m + 1,
                snr_db: snr,
                trials,
                aggregate,
            });
        }
    }
    Ok(ExperimentSummary { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_round_trips_through_json() {
        let v: Vec<Snr> = serde_json::from_str(r#"[20, "inf", 7.5]"#).unwrap();
        assert_eq!(v, vec![Snr(20.0), Snr::NOISELESS, Snr(7.5)]);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[20.0,"inf",7.5]"#);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let bad = r#"{"instance": {"m": 2, "users": [{"k": 1, "s": 1}]}, "trials": 1, "bogus": 3}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
        let ok = r#"{"instance": {"m": 2, "users": [{"k": 1, "s": 1}]}, "trials": 1}"#;
        let cfg: ExperimentConfig = serde_json::from_str(ok).unwrap();
        assert_eq!(cfg.snr_db, vec![Snr::NOISELESS]);
    }
}
