//! Sampled signal model.
//!
//! Frequencies run over `n = -2M..=2M` and are stored at array position
//! `n + 2M` everywhere in this crate; [`GridSpec::index`] and
//! [`GridSpec::freq`] are the only conversions. Matrix pairings use the
//! bilinear Frobenius form `<A, B> = sum A(i,l) B(i,l)` (no conjugation).

use alloc::vec::Vec;
use core::f64::consts::PI;

// only needed without std, where f64 has no inherent math methods
#[allow(unused_imports)]
use num_traits::Float;

use crate::{CMat, Error, Result, C64};

/// Frequency grid with half-bandwidth index `M` and `N = 4M + 1` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    m: usize,
}

impl GridSpec {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain("half-bandwidth index M must be positive"));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of samples `N = 4M + 1`.
    pub fn n(&self) -> usize {
        4 * self.m + 1
    }

    /// Largest frequency index `2M`.
    pub fn half_width(&self) -> i64 {
        2 * self.m as i64
    }

    /// Array position of frequency `n`.
    #[inline]
    pub fn index(&self, freq: i64) -> usize {
        debug_assert!(freq.abs() <= self.half_width());
        (freq + self.half_width()) as usize
    }

    /// Frequency stored at array position `idx`.
    #[inline]
    pub fn freq(&self, idx: usize) -> i64 {
        idx as i64 - self.half_width()
    }

    /// Frequencies in storage order.
    pub fn freqs(&self) -> impl Iterator<Item = i64> + Clone {
        let h = self.half_width();
        -h..=h
    }
}

/// Known per-user encoding matrix; row `n + 2M` holds `b_n^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub user_id: usize,
    entries: CMat,
}

impl Codebook {
    pub fn new(user_id: usize, entries: CMat, grid: GridSpec) -> Result<Self> {
        if entries.nrows() != grid.n() {
            return Err(Error::ShapeMismatch {
                what: "codebook rows",
                expected: grid.n(),
                found: entries.nrows(),
            });
        }
        if entries.ncols() == 0 {
            return Err(Error::Domain("codebook needs at least one column"));
        }
        for j in 0..entries.ncols() {
            for i in 0..entries.nrows() {
                let z = entries[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::Domain("codebook entries must be finite"));
                }
            }
        }
        Ok(Self { user_id, entries })
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    /// Message length `k`.
    pub fn k(&self) -> usize {
        self.entries.ncols()
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Entry `l` of the row `b_n` stored at position `idx`.
    #[inline]
    pub fn at(&self, idx: usize, l: usize) -> C64 {
        self.entries[(idx, l)]
    }

    /// Row `b_n` at position `idx`, copied out.
    pub fn row(&self, idx: usize) -> Vec<C64> {
        (0..self.k()).map(|l| self.entries[(idx, l)]).collect()
    }

    /// Squared norm of every row, in storage order.
    pub fn row_norms_sqr(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| (0..self.k()).map(|l| self.entries[(i, l)].norm_sqr()).sum())
            .collect()
    }

    /// Isotropy/incoherence diagnostics `(mu_minus, mu_plus)`: the smallest and
    /// largest squared entry magnitude over the codebook.
    pub fn coherence(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for j in 0..self.k() {
            for i in 0..self.n() {
                let v = self.entries[(i, j)].norm_sqr();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub amplitude: C64,
    pub delay: f64,
}

/// Sparse multipath channel of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    paths: Vec<Path>,
}

impl Channel {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Domain("a channel needs at least one path"));
        }
        for p in &paths {
            check_delay(p.delay)?;
            if p.amplitude.norm_sqr() == 0.0 {
                return Err(Error::Domain("path amplitudes must be nonzero"));
            }
        }
        let delays: Vec<f64> = paths.iter().map(|p| p.delay).collect();
        if paths.len() > 1 && min_separation(&delays) <= 0.0 {
            return Err(Error::Domain("path delays must be pairwise distinct"));
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    /// Path count `s`.
    pub fn s(&self) -> usize {
        self.paths.len()
    }

    pub fn delays(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.delay).collect()
    }
}

/// Unit-norm message vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    coeffs: Vec<C64>,
}

impl Message {
    /// Normalizes `coeffs` to unit Euclidean norm.
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        let norm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if coeffs.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain("message must be nonzero and finite"));
        }
        Ok(Self {
            coeffs: coeffs.into_iter().map(|z| z / norm).collect(),
        })
    }

    /// Keeps `coeffs` as given when their norm is already within `1e-12` of 1,
    /// so stored messages reload bit for bit.
    pub fn from_unit(coeffs: Vec<C64>) -> Result<Self> {
        let norm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() <= 1e-12 {
            Ok(Self { coeffs })
        } else {
            Self::new(coeffs)
        }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn k(&self) -> usize {
        self.coeffs.len()
    }
}

/// One `k_i x N` matrix per user.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedTuple {
    pub blocks: Vec<CMat>,
}

impl LiftedTuple {
    pub fn zeros(codebooks: &[Codebook]) -> Self {
        Self {
            blocks: codebooks.iter().map(|b| CMat::zeros(b.k(), b.n())).collect(),
        }
    }

    fn check(&self, codebooks: &[Codebook]) -> Result<()> {
        if self.blocks.len() != codebooks.len() {
            return Err(Error::ShapeMismatch {
                what: "user count",
                expected: codebooks.len(),
                found: self.blocks.len(),
            });
        }
        for (h, b) in self.blocks.iter().zip(codebooks) {
            if h.nrows() != b.k() || h.ncols() != b.n() {
                return Err(Error::ShapeMismatch {
                    what: "lifted block",
                    expected: b.k() * b.n(),
                    found: h.nrows() * h.ncols(),
                });
            }
        }
        Ok(())
    }
}

/// Frequency-domain observation, indexed like [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement(pub Vec<C64>);

impl Measurement {
    pub fn zeros(n: usize) -> Self {
        Self(alloc::vec![C64::new(0.0, 0.0); n])
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn check_delay(tau: f64) -> Result<()> {
    if (0.0..1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::Domain("normalized delay must lie in [0, 1)"))
    }
}

/// `e^{-j 2 pi n tau}`.
#[inline]
pub(crate) fn phasor(freq: i64, tau: f64) -> C64 {
    let (s, c) = (-2.0 * PI * freq as f64 * tau).sin_cos();
    C64::new(c, s)
}

/// Steering vector `a(tau)` with entries `e^{-j 2 pi n tau}`.
pub fn steering_vector(tau: f64, grid: GridSpec) -> Result<Vec<C64>> {
    check_delay(tau)?;
    Ok(grid.freqs().map(|n| phasor(n, tau)).collect())
}

/// `H = sum_k c_k f a(tau_k)^T`.
pub fn build_lifted(channel: &Channel, message: &Message, grid: GridSpec) -> Result<CMat> {
    let f = message.coeffs();
    let mut h = CMat::zeros(f.len(), grid.n());
    for p in channel.paths() {
        let a = steering_vector(p.delay, grid)?;
        for (col, &an) in a.iter().enumerate() {
            let w = p.amplitude * an;
            for (l, &fl) in f.iter().enumerate() {
                h[(l, col)] += w * fl;
            }
        }
    }
    Ok(h)
}

/// `y_n = sum_i <H_i, b_n^i e_n^T>`.
pub fn lift_forward(tuple: &LiftedTuple, codebooks: &[Codebook]) -> Result<Measurement> {
    tuple.check(codebooks)?;
    let n = codebooks.first().map_or(0, Codebook::n);
    let mut y = Measurement::zeros(n);
    for (h, b) in tuple.blocks.iter().zip(codebooks) {
        for (idx, yn) in y.0.iter_mut().enumerate() {
            for l in 0..b.k() {
                *yn += b.at(idx, l) * h[(l, idx)];
            }
        }
    }
    Ok(y)
}

/// `(B^adj lambda)_i = sum_n lambda_n b_n^i e_n^T`: column `n` is `lambda_n b_n^i`.
pub fn lift_adjoint(lambda: &[C64], codebooks: &[Codebook]) -> Result<LiftedTuple> {
    let mut blocks = Vec::with_capacity(codebooks.len());
    for b in codebooks {
        if lambda.len() != b.n() {
            return Err(Error::ShapeMismatch {
                what: "dual vector",
                expected: b.n(),
                found: lambda.len(),
            });
        }
        blocks.push(CMat::from_fn(b.k(), b.n(), |l, idx| lambda[idx] * b.at(idx, l)));
    }
    Ok(LiftedTuple { blocks })
}

/// Clean measurement straight from the path sums:
/// `y_n = sum_i sum_k c_k e^{-j2 pi n tau_k} b_n^T f_i`.
pub fn synthesize_direct(
    channels: &[Channel],
    messages: &[Message],
    codebooks: &[Codebook],
    grid: GridSpec,
) -> Result<Measurement> {
    if channels.len() != codebooks.len() || messages.len() != codebooks.len() {
        return Err(Error::ShapeMismatch {
            what: "user count",
            expected: codebooks.len(),
            found: channels.len().min(messages.len()),
        });
    }
    let mut y = Measurement::zeros(grid.n());
    for ((ch, msg), b) in channels.iter().zip(messages).zip(codebooks) {
        if b.n() != grid.n() {
            return Err(Error::ShapeMismatch {
                what: "codebook rows",
                expected: grid.n(),
                found: b.n(),
            });
        }
        if msg.k() != b.k() {
            return Err(Error::ShapeMismatch {
                what: "message length",
                expected: b.k(),
                found: msg.k(),
            });
        }
        for (idx, n) in grid.freqs().enumerate() {
            let x: C64 = (0..b.k()).map(|l| b.at(idx, l) * msg.coeffs()[l]).sum();
            let h: C64 = ch.paths().iter().map(|p| p.amplitude * phasor(n, p.delay)).sum();
            y.0[idx] += h * x;
        }
    }
    Ok(y)
}

/// Wrap-around distance on the unit circle.
#[inline]
pub fn wrap_distance(a: f64, b: f64) -> f64 {
    // |a - b| keeps the result bit-identical under swapping the arguments
    let d = wrap_unit((a - b).abs());
    d.min(1.0 - d)
}

/// Maps any real to `[0, 1)` modulo 1.
#[inline]
pub fn wrap_unit(t: f64) -> f64 {
    let r = t - t.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Smallest pairwise wrap-around distance; `0.5` for fewer than two delays.
pub fn min_separation(delays: &[f64]) -> f64 {
    let mut best = 0.5_f64;
    for (i, &a) in delays.iter().enumerate() {
        for &b in &delays[i + 1..] {
            best = best.min(wrap_distance(a, b));
        }
    }
    best
}

/// Cost `sum_k |c_k| ||f||_2` of the given decomposition.
pub fn atomic_norm_of_decomposition(channel: &Channel, message: &Message) -> f64 {
    let fnorm = message.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    channel.paths().iter().map(|p| p.amplitude.norm()).sum::<f64>() * fnorm
}

/// Bilinear Frobenius pairing `sum A(i,l) B(i,l)`.
pub fn frobenius_pairing(a: &CMat, b: &CMat) -> C64 {
    debug_assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(i, j)];
        }
    }
    acc
}
