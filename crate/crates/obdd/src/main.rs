use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use obdd::experiment::{run_experiment, ExperimentConfig, Snr};
use obdd::instance::{gen_instance, InstanceSpec};
use obdd::metrics::{match_delays, nmse, nmse_db, ser};
use obdd::noise::add_noise;
use obdd::persist::{read_json, write_json, InstanceFile, SolutionFile};
use obdd::pipeline::{estimate_delays, recover_messages, DelayMethod, PipelineOptions};
use obdd::tables::{emit_table, TableData};
use obdd_core::certificate::build_certificate;
use obdd_core::solver::solve_noisy;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "obdd",
    version,
    about = "Off-the-grid blind deconvolution and demixing"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Experiment configuration (JSON); `synth` uses its instance and first SNR.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; also where `instance.json` and `solution.json` are read from.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// SNR in dB, or `inf` for noiseless.
    #[arg(long, global = true, value_parser = Snr::parse)]
    snr: Option<Snr>,
    /// Grid size for the grid delay method and the dual polynomial table.
    #[arg(long, global = true)]
    grid_size: Option<usize>,
    /// Peak threshold of the grid delay method.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Absolute stopping tolerance; the relative one is ten times larger.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// One Q block shared by all users.
    #[arg(long, global = true)]
    shared_q: bool,
    #[arg(long, global = true, value_enum)]
    method: Option<DelayMethod>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance and write instance.json.
    Synth,
    /// Solve the dual program for instance.json and write solution.json.
    Solve,
    /// Estimate delays and messages from instance.json and solution.json.
    Recover,
    /// Build the interpolation certificate for the planted instance.
    Certify,
    /// Write the dual polynomial norm curve to dualpoly.dat.
    Dualpoly,
    /// Run a Monte Carlo sweep and write summary.json and sweep.dat.
    Experiment,
}

impl Cli {
    fn load_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => read_json::<ExperimentConfig>(p)?,
            None => ExperimentConfig {
                instance: InstanceSpec::new(16, &[(5, 2), (5, 1)], 0),
                solver: Default::default(),
                recovery: Default::default(),
                trials: 1,
                snr_db: vec![Snr::NOISELESS],
                m_values: Vec::new(),
            },
        };
        if let Some(seed) = self.seed {
            cfg.instance.seed = seed;
        }
        if let Some(snr) = self.snr {
            cfg.snr_db = vec![snr];
        }
        if let Some(v) = self.max_iters {
            cfg.solver.max_iters = v;
        }
        if let Some(tol) = self.tol {
            cfg.solver.eps_abs = tol;
            cfg.solver.eps_rel = 10.0 * tol;
        }
        if self.shared_q {
            cfg.solver.shared_q = true;
        }
        if let Some(m) = self.method {
            cfg.recovery.method = m;
        }
        if let Some(g) = self.grid_size {
            cfg.recovery.grid_size = Some(g);
        }
        if let Some(t) = self.threshold {
            cfg.recovery.threshold = t;
        }
        Ok(cfg)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn load_instance(path: &Path) -> Result<InstanceFile> {
    read_json::<InstanceFile>(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let cfg = cli.load_config()?;
    match cli.cmd {
        Cmd::Synth => {
            let inst = gen_instance(&cfg.instance)?;
            let snr = cfg.snr_db.first().copied().unwrap_or(Snr::NOISELESS);
            let (y, noise) = add_noise(&inst.y_clean, snr.0, cfg.instance.seed);
            let path = cli.path("instance.json");
            write_json(
                &path,
                &InstanceFile::new(&inst, Some(&cfg.instance), &y, Some(noise)),
            )?;
            println!("{}", path.display());
        }
        Cmd::Solve => {
            let file = load_instance(&cli.path("instance.json"))?;
            let (inst, y) = file.to_instance()?;
            let eta = file.noise.map_or(0.0, |n| n.eta);
            let sol = solve_noisy(&y, &inst.codebooks, inst.grid, eta, &cfg.solver.into())?;
            println!(
                "status={:?} iterations={} objective={:.9} atomic_norm={:.9}",
                sol.status,
                sol.iterations,
                sol.objective,
                inst.atomic_norm()
            );
            write_json(&cli.path("solution.json"), &SolutionFile::new(&sol, eta))?;
        }
        Cmd::Recover => {
            let file = load_instance(&cli.path("instance.json"))?;
            let (inst, y) = file.to_instance()?;
            let sol_file: SolutionFile = read_json(&cli.path("solution.json"))?;
            let sol = sol_file.to_solution()?;
            let opts: PipelineOptions = cfg.pipeline_options();
            let ask = inst
                .symbols
                .as_ref()
                .and_then(|_| match file.spec.as_ref()?.constellation {
                    obdd::instance::Constellation::Ask { order } => Some(order),
                    _ => None,
                });
            let delays = estimate_delays(&sol, &inst.codebooks, inst.grid, sol_file.eta > 0.0, &opts)?;
            let (delays, fit, messages) =
                recover_messages(&y, &inst.codebooks, inst.grid, delays, ask, opts.prune_ratio)?;
            let mut users = Vec::new();
            for (i, (d, rec)) in delays.iter().zip(&messages).enumerate() {
                let truth = inst.channels[i].delays();
                let m = match_delays(&d.delays, &truth, cfg.recovery.match_tol);
                let (aligned, _) = nmse(&rec.message_estimate, inst.messages[i].coeffs())?;
                let symbol_error = match (&inst.symbols, &rec.symbols) {
                    (Some(t), Some(e)) => Some(ser(e, &t[i])),
                    _ => None,
                };
                println!(
                    "user {i}: delays {:?} misses={} false_alarms={} nmse_db={:.2}",
                    d.delays,
                    m.misses,
                    m.false_alarms,
                    nmse_db(aligned)
                );
                users.push(json!({
                    "delays": d.delays,
                    "scores": d.scores,
                    "amplitude_magnitudes": rec.amplitude_magnitudes,
                    "message": rec.message_estimate.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                    "symbols": rec.symbols,
                    "degenerate": rec.degenerate,
                    "delay_errors": m.errors,
                    "misses": m.misses,
                    "false_alarms": m.false_alarms,
                    "nmse": aligned,
                    "ser": symbol_error,
                }));
            }
            let report = json!({
                "format_version": obdd::persist::FORMAT_VERSION,
                "ls_residual": fit.residual,
                "rank_deficient": fit.rank_deficient,
                "users": users,
            });
            write_json(&cli.path("recovery.json"), &report)?;
            let polar = TableData::Polar {
                truth: inst.channels.iter().map(|c| c.delays()).collect(),
                estimates: delays.iter().map(|d| d.delays.clone()).collect(),
            };
            emit_table(&polar, &cli.path("polar.dat"))?;
        }
        Cmd::Certify => {
            let (inst, _) = load_instance(&cli.path("instance.json"))?.to_instance()?;
            let rep = build_certificate(&inst.channels, &inst.messages, &inst.codebooks, inst.grid)?;
            println!(
                "valid={} interp_error={:.3e} sup_offsupport={:.6} d_condition={:.6}",
                rep.valid, rep.max_interp_error, rep.sup_offsupport_norm, rep.d_condition
            );
            let finite = |v: f64| v.is_finite().then_some(v);
            write_json(
                &cli.path("certificate.json"),
                &json!({
                    "format_version": obdd::persist::FORMAT_VERSION,
                    "valid": rep.valid,
                    "max_interp_error": finite(rep.max_interp_error),
                    "sup_offsupport_norm": finite(rep.sup_offsupport_norm),
                    "d_condition": finite(rep.d_condition),
                    "lambda": rep.lambda.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                }),
            )?;
        }
        Cmd::Dualpoly => {
            let (inst, _) = load_instance(&cli.path("instance.json"))?.to_instance()?;
            let sol = read_json::<SolutionFile>(&cli.path("solution.json"))?.to_solution()?;
            let size = cli.grid_size.unwrap_or(16 * inst.grid.n());
            let truth: Vec<Vec<f64>> = inst.channels.iter().map(|c| c.delays()).collect();
            let table = TableData::dual_poly(&sol.lambda, &inst.codebooks, inst.grid, &truth, size)?;
            emit_table(&table, &cli.path("dualpoly.dat"))?;
        }
        Cmd::Experiment => {
            if cli.config.is_none() {
                bail!("experiment needs --config");
            }
            let summary = run_experiment(&cfg)?;
            for p in &summary.points {
                println!(
                    "m={} snr={} trials={} failures={} nmse_db={:?} ser={:?} misses={:?} false_alarms={:?}",
                    p.m,
                    p.snr_db.0,
                    p.aggregate.trials,
                    p.aggregate.failures,
                    p.aggregate
                        .mean_nmse
                        .iter()
                        .map(|&v| nmse_db(v))
                        .collect::<Vec<_>>(),
                    p.aggregate.mean_ser,
                    p.aggregate.misses,
                    p.aggregate.false_alarms
                );
            }
            write_json(&cli.path("summary.json"), &summary)?;
            emit_table(&TableData::sweep(&summary), &cli.path("sweep.dat"))?;
        }
    }
    Ok(())
}
