//! Random instances for the integration tests, built only from the public API.

#![allow(dead_code)]

use obdd_core::model::{min_separation, synthesize_direct};
use obdd_core::{CMat, Channel, Codebook, GridSpec, Measurement, Message, Path, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn cnormal<R: Rng>(rng: &mut R) -> C64 {
    C64::new(normal(rng), normal(rng))
}

pub fn real_codebook<R: Rng>(rng: &mut R, user_id: usize, k: usize, grid: GridSpec) -> Codebook {
    let e = CMat::from_fn(grid.n(), k, |_, _| C64::new(normal(rng), 0.0));
    Codebook::new(user_id, e, grid).unwrap()
}

pub fn complex_codebook<R: Rng>(rng: &mut R, user_id: usize, k: usize, grid: GridSpec) -> Codebook {
    let e = CMat::from_fn(grid.n(), k, |_, _| cnormal(rng));
    Codebook::new(user_id, e, grid).unwrap()
}

pub fn ones_codebook(k: usize, grid: GridSpec) -> Codebook {
    Codebook::new(0, CMat::from_fn(grid.n(), k, |_, _| C64::new(1.0, 0.0)), grid).unwrap()
}

pub fn cvec<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| cnormal(rng)).collect()
}

pub fn cmat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cnormal(rng))
}

pub fn message<R: Rng>(rng: &mut R, k: usize) -> Message {
    Message::new(cvec(rng, k)).unwrap()
}

/// `s` delays in `[0, 1)` with wrap-around gaps of at least `sep`.
pub fn delays<R: Rng>(rng: &mut R, s: usize, sep: f64) -> Vec<f64> {
    loop {
        let mut d: Vec<f64> = (0..s).map(|_| rng.random::<f64>()).collect();
        if min_separation(&d) >= sep {
            d.sort_by(f64::total_cmp);
            return d;
        }
    }
}

pub fn channel<R: Rng>(rng: &mut R, delays: &[f64]) -> Channel {
    Channel::new(
        delays
            .iter()
            .map(|&delay| Path {
                amplitude: C64::from_polar(
                    rng.random_range(0.5..1.5),
                    rng.random_range(0.0..std::f64::consts::TAU),
                ),
                delay,
            })
            .collect(),
    )
    .unwrap()
}

pub struct Planted {
    pub grid: GridSpec,
    pub codebooks: Vec<Codebook>,
    pub channels: Vec<Channel>,
    pub messages: Vec<Message>,
    pub y: Measurement,
}

impl Planted {
    pub fn atomic_norm(&self) -> f64 {
        self.channels
            .iter()
            .zip(&self.messages)
            .map(|(c, f)| obdd_core::model::atomic_norm_of_decomposition(c, f))
            .sum()
    }
}

/// Real Gaussian codebooks, `(k, s)` per user, per-user separation `sep`.
pub fn planted(seed: u64, m: usize, users: &[(usize, usize)], sep: f64) -> Planted {
    let mut rng = rng(seed);
    let grid = GridSpec::new(m).unwrap();
    let mut codebooks = Vec::new();
    let mut channels = Vec::new();
    let mut messages = Vec::new();
    for (i, &(k, s)) in users.iter().enumerate() {
        codebooks.push(real_codebook(&mut rng, i, k, grid));
        let d = delays(&mut rng, s, sep);
        channels.push(channel(&mut rng, &d));
        messages.push(message(&mut rng, k));
    }
    let y = synthesize_direct(&channels, &messages, &codebooks, grid).unwrap();
    Planted {
        grid,
        codebooks,
        channels,
        messages,
        y,
    }
}

/// Like [`planted`] but every delay is `j / points` for distinct `j` per user.
pub fn planted_on_grid(seed: u64, m: usize, users: &[(usize, usize)], points: usize) -> Planted {
    let mut rng = rng(seed);
    let grid = GridSpec::new(m).unwrap();
    let mut codebooks = Vec::new();
    let mut channels = Vec::new();
    let mut messages = Vec::new();
    for (i, &(k, s)) in users.iter().enumerate() {
        codebooks.push(real_codebook(&mut rng, i, k, grid));
        let mut idx: Vec<usize> = Vec::new();
        while idx.len() < s {
            let j = rng.random_range(0..points);
            if !idx.contains(&j) {
                idx.push(j);
            }
        }
        idx.sort_unstable();
        let d: Vec<f64> = idx.iter().map(|&j| j as f64 / points as f64).collect();
        channels.push(channel(&mut rng, &d));
        messages.push(message(&mut rng, k));
    }
    let y = synthesize_direct(&channels, &messages, &codebooks, grid).unwrap();
    Planted {
        grid,
        codebooks,
        channels,
        messages,
        y,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
