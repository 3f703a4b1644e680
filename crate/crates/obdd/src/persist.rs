//! JSON files for instances and dual solutions.
//!
//! Complex numbers are `[re, im]` pairs and matrices are lists of rows.
//! Every document carries `format_version`; only version 1 is understood.

use std::fs;
use std::path::Path as FsPath;

use obdd_core::solver::{DualSolution, SolveStatus};
use obdd_core::{CMat, Channel, Codebook, GridSpec, Measurement, Message, Path, C64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::instance::{Instance, InstanceSpec};
use crate::noise::NoiseModel;

pub const FORMAT_VERSION: u32 = 1;

type Pair = [f64; 2];

fn pair(z: C64) -> Pair {
    [z.re, z.im]
}

fn unpair(p: Pair) -> C64 {
    C64::new(p[0], p[1])
}

fn vec_out(v: &[C64]) -> Vec<Pair> {
    v.iter().copied().map(pair).collect()
}

fn vec_in(v: &[Pair]) -> Vec<C64> {
    v.iter().copied().map(unpair).collect()
}

fn mat_out(m: &CMat) -> Vec<Vec<Pair>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| pair(m[(r, c)])).collect())
        .collect()
}

fn mat_in(rows: &[Vec<Pair>], what: &str) -> Result<CMat> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(HarnessError::Malformed(format!("{what}: ragged matrix rows")));
    }
    Ok(CMat::from_fn(rows.len(), ncols, |r, c| unpair(rows[r][c])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFile {
    pub amplitude: Pair,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserFile {
    /// `N x k`, row `idx` holds frequency `idx - 2M`.
    pub codebook: Vec<Vec<Pair>>,
    pub paths: Vec<PathFile>,
    pub message: Vec<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub format_version: u32,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<InstanceSpec>,
    pub users: Vec<UserFile>,
    pub y_clean: Vec<Pair>,
    /// Measurement actually handed to the solver; equals `y_clean` when noiseless.
    pub y: Vec<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
}

impl InstanceFile {
    pub fn new(
        inst: &Instance,
        spec: Option<&InstanceSpec>,
        y: &Measurement,
        noise: Option<NoiseModel>,
    ) -> Self {
        let users = inst
            .codebooks
            .iter()
            .zip(&inst.channels)
            .zip(&inst.messages)
            .enumerate()
            .map(|(i, ((b, c), f))| UserFile {
                codebook: mat_out(b.entries()),
                paths: c
                    .paths()
                    .iter()
                    .map(|p| PathFile {
                        amplitude: pair(p.amplitude),
                        delay: p.delay,
                    })
                    .collect(),
                message: vec_out(f.coeffs()),
                symbols: inst.symbols.as_ref().map(|s| s[i].clone()),
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            m: inst.grid.m(),
            spec: spec.cloned(),
            users,
            y_clean: vec_out(&inst.y_clean.0),
            y: vec_out(&y.0),
            noise,
        }
    }

    /// Rebuilds the instance and the solver measurement.
    pub fn to_instance(&self) -> Result<(Instance, Measurement)> {
        check_version(self.format_version)?;
        let grid = GridSpec::new(self.m)?;
        let mut codebooks = Vec::with_capacity(self.users.len());
        let mut channels = Vec::with_capacity(self.users.len());
        let mut messages = Vec::with_capacity(self.users.len());
        for (i, u) in self.users.iter().enumerate() {
            codebooks.push(Codebook::new(i, mat_in(&u.codebook, "codebook")?, grid)?);
            channels.push(Channel::new(
                u.paths
                    .iter()
                    .map(|p| Path {
                        amplitude: unpair(p.amplitude),
                        delay: p.delay,
                    })
                    .collect(),
            )?);
            messages.push(Message::from_unit(vec_in(&u.message))?);
        }
        let symbols = if self.users.iter().all(|u| u.symbols.is_some()) && !self.users.is_empty() {
            Some(self.users.iter().filter_map(|u| u.symbols.clone()).collect())
        } else {
            None
        };
        let inst = Instance {
            grid,
            codebooks,
            channels,
            messages,
            symbols,
            y_clean: Measurement(vec_in(&self.y_clean)),
        };
        let y = Measurement(vec_in(&self.y));
        if y.len() != grid.n() || inst.y_clean.len() != grid.n() {
            return Err(HarnessError::Malformed(format!(
                "measurement length differs from N = {}",
                grid.n()
            )));
        }
        Ok((inst, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusFile {
    Converged,
    MaxIters,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub format_version: u32,
    pub eta: f64,
    pub lambda: Vec<Pair>,
    pub q_blocks: Vec<Vec<Vec<Pair>>>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: StatusFile,
}

impl SolutionFile {
    pub fn new(sol: &DualSolution, eta: f64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            eta,
            lambda: vec_out(&sol.lambda),
            q_blocks: sol.q_blocks.iter().map(mat_out).collect(),
            objective: sol.objective,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            iterations: sol.iterations,
            status: match sol.status {
                SolveStatus::Converged => StatusFile::Converged,
                SolveStatus::MaxIters => StatusFile::MaxIters,
                SolveStatus::NumericalFailure => StatusFile::NumericalFailure,
            },
        }
    }

    pub fn to_solution(&self) -> Result<DualSolution> {
        check_version(self.format_version)?;
        Ok(DualSolution {
            lambda: vec_in(&self.lambda),
            q_blocks: self
                .q_blocks
                .iter()
                .map(|q| mat_in(q, "q block"))
                .collect::<Result<_>>()?,
            objective: self.objective,
            primal_residual: self.primal_residual,
            dual_residual: self.dual_residual,
            iterations: self.iterations,
            status: match self.status {
                StatusFile::Converged => SolveStatus::Converged,
                StatusFile::MaxIters => SolveStatus::MaxIters,
                StatusFile::NumericalFailure => SolveStatus::NumericalFailure,
            },
        })
    }
}

fn check_version(v: u32) -> Result<()> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(HarnessError::FormatVersion(v))
    }
}

/// Pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &FsPath, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &FsPath) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}
