//! Plain-text tables for external plotting tools.
//!
//! One `#` header line naming the columns, then whitespace-separated rows with
//! every number in C `%.12g` style. Short columns are padded with `nan`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use obdd_core::recovery::DualPolynomial;
use obdd_core::{Codebook, GridSpec};

use crate::error::{HarnessError, Result};
use crate::experiment::ExperimentSummary;
use crate::metrics::nmse_db;

/// C `printf("%.12g", v)`.
pub fn fmt_g12(v: f64) -> String {
    const P: i32 = 12;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    // the exponent after rounding to P significant digits decides the style
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, v);
        strip_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Column data for one table kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TableData {
    /// `||q_i(t)||_2` per user on a uniform grid, plus rows at each true delay.
    DualPoly {
        t: Vec<f64>,
        norms: Vec<Vec<f64>>,
        /// `markers[i][row]` is 1 on rows that sit at a true delay of user `i`.
        markers: Vec<Vec<f64>>,
    },
    /// Delays on the unit circle as `(cos 2 pi tau, sin 2 pi tau)`.
    Polar {
        truth: Vec<Vec<f64>>,
        estimates: Vec<Vec<f64>>,
    },
    /// One row per sweep point: `x` then per-user metric columns.
    Sweep {
        x_name: String,
        x: Vec<f64>,
        columns: Vec<(String, Vec<f64>)>,
    },
}

impl TableData {
    /// Samples every user's dual polynomial on `grid_size` points and at the true delays.
    pub fn dual_poly(
        lambda: &[obdd_core::C64],
        codebooks: &[Codebook],
        grid: GridSpec,
        truth: &[Vec<f64>],
        grid_size: usize,
    ) -> Result<Self> {
        let mut t: Vec<f64> = (0..grid_size).map(|j| j as f64 / grid_size as f64).collect();
        t.extend(truth.iter().flatten().copied());
        t.sort_by(f64::total_cmp);
        t.dedup();
        let mut norms = Vec::with_capacity(codebooks.len());
        for b in codebooks {
            let q = DualPolynomial::new(lambda, b, grid)?;
            norms.push(t.iter().map(|&x| q.norm(x)).collect());
        }
        let markers = truth
            .iter()
            .map(|d| t.iter().map(|x| if d.contains(x) { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(Self::DualPoly { t, norms, markers })
    }

    /// Sweep table from an experiment: x is the SNR when several SNRs were
    /// run, else N. Columns per user: NMSE in dB, SER, mean largest delay
    /// error, misses and false alarms; then the failure count.
    pub fn sweep(summary: &ExperimentSummary) -> Self {
        let snrs: Vec<f64> = summary.points.iter().map(|p| p.snr_db.0).collect();
        let by_snr = snrs.iter().any(|&s| s != snrs[0]);
        let (x_name, x) = if by_snr {
            ("snr_db".to_string(), snrs)
        } else {
            (
                "n".to_string(),
                summary.points.iter().map(|p| p.n as f64).collect(),
            )
        };
        let users = summary.points.first().map_or(0, |p| p.aggregate.mean_nmse.len());
        let mut columns = Vec::new();
        for u in 0..users {
            let col = |f: &dyn Fn(&crate::experiment::Aggregate) -> f64| {
                summary.points.iter().map(|p| f(&p.aggregate)).collect::<Vec<_>>()
            };
            columns.push((format!("nmse_db_u{u}"), col(&|a| nmse_db(a.mean_nmse[u]))));
            columns.push((format!("ser_u{u}"), col(&|a| a.mean_ser[u].unwrap_or(f64::NAN))));
            columns.push((format!("delay_err_u{u}"), col(&|a| a.mean_max_delay_error[u])));
            columns.push((format!("misses_u{u}"), col(&|a| a.misses[u] as f64)));
            columns.push((format!("false_alarms_u{u}"), col(&|a| a.false_alarms[u] as f64)));
        }
        columns.push((
            "failures".into(),
            summary
                .points
                .iter()
                .map(|p| p.aggregate.failures as f64)
                .collect(),
        ));
        Self::Sweep { x_name, x, columns }
    }

    fn columns(&self) -> Vec<(String, Vec<f64>)> {
        match self {
            Self::DualPoly { t, norms, markers } => {
                let mut cols = vec![("t".to_string(), t.clone())];
                cols.extend(
                    norms
                        .iter()
                        .enumerate()
                        .map(|(i, v)| (format!("q_norm_u{i}"), v.clone())),
                );
                cols.extend(
                    markers
                        .iter()
                        .enumerate()
                        .map(|(i, v)| (format!("truth_u{i}"), v.clone())),
                );
                cols
            }
            Self::Polar { truth, estimates } => {
                let circle = |d: &[f64]| -> (Vec<f64>, Vec<f64>) {
                    d.iter()
                        .map(|&x| {
                            let (s, c) = (std::f64::consts::TAU * x).sin_cos();
                            (c, s)
                        })
                        .unzip()
                };
                let mut cols = Vec::new();
                for (i, (tr, es)) in truth.iter().zip(estimates).enumerate() {
                    let (tc, ts) = circle(tr);
                    let (ec, se) = circle(es);
                    cols.push((format!("truth_cos_u{i}"), tc));
                    cols.push((format!("truth_sin_u{i}"), ts));
                    cols.push((format!("est_cos_u{i}"), ec));
                    cols.push((format!("est_sin_u{i}"), se));
                }
                cols
            }
            Self::Sweep { x_name, x, columns } => {
                let mut cols = vec![(x_name.clone(), x.clone())];
                cols.extend(columns.iter().cloned());
                cols
            }
        }
    }

    pub fn render(&self) -> String {
        let cols = self.columns();
        let rows = cols.iter().map(|c| c.1.len()).max().unwrap_or(0);
        let mut out = String::new();
        let names: Vec<&str> = cols.iter().map(|c| c.0.as_str()).collect();
        let _ = writeln!(out, "# {}", names.join(" "));
        for r in 0..rows {
            let line: Vec<String> = cols
                .iter()
                .map(|c| fmt_g12(c.1.get(r).copied().unwrap_or(f64::NAN)))
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

/// Writes the rendered table to `path`.
pub fn emit_table(data: &TableData, path: &Path) -> Result<()> {
    fs::write(path, data.render()).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}
