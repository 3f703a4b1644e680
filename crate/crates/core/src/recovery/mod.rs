//! Delay and message extraction from a dual solution.

pub mod dualpoly;

pub use dualpoly::{dual_polynomial, dual_polynomial_derivative, DualPolyEval, DualPolynomial};

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

// only needed without std, where f64 has no inherent math methods
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{phasor, wrap_distance, wrap_unit, Codebook, GridSpec, Measurement};
use crate::{CMat, Error, Result, C64};

/// Coefficients of `||q(tau)||^2 = sum_k u_k z^k`, `z = e^{j 2 pi tau}`, `k = -4M..4M`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramPoly {
    pub user_id: usize,
    m: usize,
    // coeffs[k + 4M] = u_k
    coeffs: Vec<C64>,
}

impl GramPoly {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Largest `|k|` with a stored coefficient.
    pub fn degree(&self) -> i64 {
        4 * self.m as i64
    }

    pub fn coeff(&self, k: i64) -> C64 {
        let d = self.degree();
        if k.abs() > d {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + d) as usize]
        }
    }

    /// `u_{-4M}, ..., u_{4M}`.
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// `p(e^{j 2 pi tau}) = 1 - sum_k u_k e^{j 2 pi k tau}`; real up to rounding.
    pub fn p_at(&self, tau: f64) -> C64 {
        let mut acc = C64::new(1.0, 0.0);
        for (j, u) in self.coeffs.iter().enumerate() {
            let k = j as i64 - self.degree();
            acc -= u * phasor(-k, tau);
        }
        acc
    }

    /// `(f, f', f'')` of `f(tau) = ||q(tau)||^2` from the coefficients alone.
    pub fn norm_sqr_derivatives(&self, tau: f64) -> (f64, f64, f64) {
        let (mut f, mut df, mut d2f) = (0.0, 0.0, 0.0);
        for (j, u) in self.coeffs.iter().enumerate() {
            let k = j as i64 - self.degree();
            let t = u * phasor(-k, tau);
            let w = 2.0 * PI * k as f64;
            f += t.re;
            df -= w * t.im;
            d2f -= w * w * t.re;
        }
        (f, df, d2f)
    }
}

/// `u_k = sum_l lambda_l conj(lambda_{l-k}) b_{l-k}^H b_l`, terms outside the band dropped.
pub fn gram_coefficients(lambda: &[C64], codebook: &Codebook, grid: GridSpec) -> Result<GramPoly> {
    let n = grid.n();
    if lambda.len() != n || codebook.n() != n {
        return Err(Error::ShapeMismatch {
            what: "dual vector",
            expected: n,
            found: lambda.len(),
        });
    }
    let d = n - 1;
    let mut coeffs = vec![C64::new(0.0, 0.0); 2 * d + 1];
    // index difference a - b equals the frequency difference
    for a in 0..n {
        for b in 0..n {
            let mut inner = C64::new(0.0, 0.0);
            for l in 0..codebook.k() {
                inner += codebook.at(b, l).conj() * codebook.at(a, l);
            }
            let k = a as i64 - b as i64;
            coeffs[(k + d as i64) as usize] += lambda[a] * lambda[b].conj() * inner;
        }
    }
    // enforce u_{-k} = conj(u_k)
    for k in 0..=d {
        let avg = (coeffs[d + k] + coeffs[d - k].conj()) * 0.5;
        coeffs[d + k] = avg;
        coeffs[d - k] = avg.conj();
    }
    Ok(GramPoly {
        user_id: codebook.user_id,
        m: grid.m(),
        coeffs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayEstimate {
    pub user_id: usize,
    /// Sorted, in `[0, 1)`.
    pub delays: Vec<f64>,
    /// `||q(tau)||_2` at each delay.
    pub scores: Vec<f64>,
}

impl DelayEstimate {
    pub fn empty(user_id: usize) -> Self {
        Self {
            user_id,
            delays: Vec::new(),
            scores: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Roots with `||z| - 1| <= root_radius_tol` count as unit-circle roots.
    pub root_radius_tol: f64,
    /// Angle clustering radius in units of `tau`; `None` means `1 / (32 M)`.
    pub angle_cluster_tol: Option<f64>,
    pub newton_iters: usize,
}

impl RootOptions {
    pub fn noiseless() -> Self {
        Self {
            root_radius_tol: 1e-3,
            angle_cluster_tol: None,
            newton_iters: 50,
        }
    }

    pub fn noisy() -> Self {
        Self {
            root_radius_tol: 5e-2,
            ..Self::noiseless()
        }
    }
}

impl Default for RootOptions {
    fn default() -> Self {
        Self::noiseless()
    }
}

/// Delays from the unit-circle roots of `z^{4M} p(z)`.
pub fn delays_by_roots(gram: &GramPoly, opts: &RootOptions) -> Result<DelayEstimate> {
    if gram
        .coeffs
        .iter()
        .any(|c| !(c.re.is_finite() && c.im.is_finite()))
    {
        return Err(Error::Domain("Gram coefficients must be finite"));
    }
    let d = gram.degree() as usize;
    // ascending powers of z
    let mut poly: Vec<C64> = gram.coeffs.iter().map(|u| -u).collect();
    poly[d] += C64::new(1.0, 0.0);

    let roots = polynomial_roots(&poly)?;
    let m = gram.m() as f64;
    let cluster_tol = opts.angle_cluster_tol.unwrap_or(1.0 / (32.0 * m));
    let mut angles: Vec<f64> = roots
        .iter()
        .filter(|z| (z.norm() - 1.0).abs() <= opts.root_radius_tol)
        .map(|z| wrap_unit(z.arg() / (2.0 * PI)))
        .collect();
    angles.sort_by(f64::total_cmp);

    let n = (4 * gram.m() + 1) as f64;
    let mut delays: Vec<f64> = cluster_circular(&angles, cluster_tol)
        .into_iter()
        .map(|t| {
            newton_polish(t, opts.newton_iters, 1.0 / (4.0 * n), |x| {
                gram.norm_sqr_derivatives(x)
            })
        })
        .collect();
    delays = dedupe_sorted(delays, cluster_tol);
    let scores = delays
        .iter()
        .map(|&t| gram.norm_sqr_derivatives(t).0.max(0.0).sqrt())
        .collect();
    Ok(DelayEstimate {
        user_id: gram.user_id,
        delays,
        scores,
    })
}

/// Delays from strict local maxima of `||q(tau)||_2` on a uniform grid.
pub fn delays_by_grid(
    lambda: &[C64],
    codebook: &Codebook,
    grid: GridSpec,
    grid_size: usize,
    threshold: f64,
) -> Result<DelayEstimate> {
    if grid_size < 8 * grid.n() {
        return Err(Error::Domain("grid_size must be at least 8N"));
    }
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::Domain("threshold must lie in [0, 1)"));
    }
    let p = DualPolynomial::new(lambda, codebook, grid)?;
    let vals = p.norms_on_grid(grid_size);
    let g = grid_size;
    let mut peaks = Vec::new();
    for j in 0..g {
        let v = vals[j];
        if v > vals[(j + g - 1) % g] && v > vals[(j + 1) % g] && v >= 1.0 - threshold {
            peaks.push(j as f64 / g as f64);
        }
    }
    let n = grid.n() as f64;
    let mut delays: Vec<f64> = peaks
        .into_iter()
        .map(|t| {
            newton_polish(t, 50, 1.0 / (4.0 * n), |x| {
                p.eval_with_derivatives(x).norm_sqr_derivatives()
            })
        })
        .collect();
    delays.sort_by(f64::total_cmp);
    delays = dedupe_sorted(delays, 1.0 / (2.0 * g as f64));
    let scores = delays.iter().map(|&t| p.norm(t)).collect();
    Ok(DelayEstimate {
        user_id: codebook.user_id,
        delays,
        scores,
    })
}

/// Roots of `sum_j c_j z^j` (ascending powers) via companion-matrix eigenvalues.
/// Leading and trailing negligible coefficients are dropped first.
fn polynomial_roots(poly: &[C64]) -> Result<Vec<C64>> {
    let scale = poly.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(Vec::new());
    }
    let negligible = |c: &C64| c.norm() <= 1e-14 * scale;
    let lo = poly.iter().position(|c| !negligible(c)).unwrap_or(0);
    let hi = poly.iter().rposition(|c| !negligible(c)).unwrap_or(0);
    let core = &poly[lo..=hi];
    let deg = core.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = core[deg];
    let comp = CMat::from_fn(deg, deg, |r, c| {
        if c == deg - 1 {
            -core[r] / lead
        } else if r == c + 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    comp.eigenvalues()
        .map_err(|_| Error::NumericalFailure("companion eigensolver did not converge"))
}

/// Groups sorted points on the unit circle whose gaps are at most `tol`
/// and returns each group's circular mean.
fn cluster_circular(sorted: &[f64], tol: f64) -> Vec<f64> {
    if sorted.is_empty() {
        return Vec::new();
    }
    let mut groups: Vec<Vec<f64>> = vec![vec![sorted[0]]];
    for w in sorted.windows(2) {
        if w[1] - w[0] <= tol {
            groups.last_mut().unwrap().push(w[1]);
        } else {
            groups.push(vec![w[1]]);
        }
    }
    if groups.len() > 1 && sorted[0] + 1.0 - sorted[sorted.len() - 1] <= tol {
        let last = groups.pop().unwrap();
        groups[0].extend(last);
    }
    groups.iter().map(|g| circular_mean(g)).collect()
}

fn circular_mean(ts: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for &t in ts {
        let (si, ci) = (2.0 * PI * t).sin_cos();
        s += si;
        c += ci;
    }
    wrap_unit(s.atan2(c) / (2.0 * PI))
}

/// Newton iteration on `f'(tau) = 0` towards a local maximum of `f`.
/// Stops where `f'' >= 0`; steps are clipped to `max_step`.
fn newton_polish(mut tau: f64, iters: usize, max_step: f64, f: impl Fn(f64) -> (f64, f64, f64)) -> f64 {
    for _ in 0..iters {
        let (_, df, d2f) = f(tau);
        if !(d2f < 0.0) {
            break;
        }
        let step = (-df / d2f).clamp(-max_step, max_step);
        tau = wrap_unit(tau + step);
        if step.abs() < 1e-15 {
            break;
        }
    }
    tau
}

/// Sorts and merges points closer than `tol` on the circle.
fn dedupe_sorted(mut ts: Vec<f64>, tol: f64) -> Vec<f64> {
    ts.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(ts.len());
    for t in ts {
        if out.last().is_none_or(|&p| wrap_distance(p, t) > tol) {
            out.push(t);
        }
    }
    if out.len() > 1 && wrap_distance(out[0], out[out.len() - 1]) <= tol {
        out.pop();
    }
    out
}

/// Least-squares fit of `y` on the estimated delays.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    /// `blocks[i][l]` estimates `c_l^i f_i` for the `l`-th delay of user `i`.
    pub blocks: Vec<Vec<Vec<C64>>>,
    /// `||y - A x||_2 / ||y||_2` (0 when `y = 0`).
    pub residual: f64,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Relative singular-value cutoff of the least-squares solve.
pub const LS_RANK_TOL: f64 = 1e-10;

/// Solves for the blocks `c_l^i f_i` given delay estimates.
pub fn least_squares_amplitudes(
    y: &Measurement,
    codebooks: &[Codebook],
    delays: &[DelayEstimate],
    grid: GridSpec,
) -> Result<LeastSquaresFit> {
    let n = grid.n();
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            what: "measurement",
            expected: n,
            found: y.len(),
        });
    }
    if delays.len() != codebooks.len() {
        return Err(Error::ShapeMismatch {
            what: "delay estimates",
            expected: codebooks.len(),
            found: delays.len(),
        });
    }
    let unknowns: usize = codebooks.iter().zip(delays).map(|(b, d)| b.k() * d.len()).sum();
    if unknowns > n {
        return Err(Error::OverParameterized {
            unknowns,
            equations: n,
        });
    }
    let y_norm = y.norm();
    let mut blocks: Vec<Vec<Vec<C64>>> = codebooks
        .iter()
        .zip(delays)
        .map(|(b, d)| vec![vec![C64::new(0.0, 0.0); b.k()]; d.len()])
        .collect();
    if unknowns == 0 {
        return Ok(LeastSquaresFit {
            blocks,
            residual: if y_norm == 0.0 { 0.0 } else { 1.0 },
            rank: 0,
            rank_deficient: false,
        });
    }

    let mut a = CMat::zeros(n, unknowns);
    let mut col = 0;
    for (b, d) in codebooks.iter().zip(delays) {
        for &tau in &d.delays {
            for idx in 0..n {
                let e = phasor(grid.freq(idx), tau);
                for l in 0..b.k() {
                    a[(idx, col + l)] = e * b.at(idx, l);
                }
            }
            col += b.k();
        }
    }

    let svd = a
        .thin_svd()
        .map_err(|_| Error::NumericalFailure("SVD did not converge"))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let smax = if s.nrows() > 0 { s[0].re } else { 0.0 };
    let cutoff = LS_RANK_TOL * smax;
    let mut x = vec![C64::new(0.0, 0.0); unknowns];
    let mut rank = 0;
    for j in 0..s.nrows() {
        let sj = s[j].re;
        if sj <= cutoff || sj == 0.0 {
            continue;
        }
        rank += 1;
        let mut uy = C64::new(0.0, 0.0);
        for r in 0..n {
            uy += u[(r, j)].conj() * y.0[r];
        }
        let coef = uy / sj;
        for (c, xc) in x.iter_mut().enumerate() {
            *xc += v[(c, j)] * coef;
        }
    }

    let mut res = 0.0;
    for r in 0..n {
        let mut ax = C64::new(0.0, 0.0);
        for (c, xc) in x.iter().enumerate() {
            ax += a[(r, c)] * xc;
        }
        res += (y.0[r] - ax).norm_sqr();
    }
    let residual = if y_norm == 0.0 {
        res.sqrt()
    } else {
        res.sqrt() / y_norm
    };

    let mut it = x.into_iter();
    for user in blocks.iter_mut() {
        for block in user.iter_mut() {
            for v in block.iter_mut() {
                *v = it.next().unwrap_or_default();
            }
        }
    }
    Ok(LeastSquaresFit {
        blocks,
        residual,
        rank,
        rank_deficient: rank < unknowns,
    })
}

/// Messages decoded for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub user_id: usize,
    /// `|c_l|` per estimated delay.
    pub amplitude_magnitudes: Vec<f64>,
    /// Unit vector; largest-magnitude entry real and nonnegative.
    pub message_estimate: Vec<C64>,
    pub message_magnitudes: Vec<f64>,
    /// ASK symbols in `0..order`, when a constellation was given.
    pub symbols: Option<Vec<u32>>,
    pub ls_residual: f64,
    /// No nonzero block was available.
    pub degenerate: bool,
}

/// Largest `k log2(order)` decoded by exhaustive search.
pub const ASK_EXHAUSTIVE_BITS: f64 = 16.0;

/// Rank-one consolidation of each user's blocks into `|c|` and `f`, plus optional ASK decoding.
pub fn decode_messages(fit: &LeastSquaresFit, ask_order: Option<u32>) -> Result<Vec<RecoveryResult>> {
    if let Some(o) = ask_order {
        if o < 2 {
            return Err(Error::Domain("ASK order must be at least 2"));
        }
    }
    let mut out = Vec::with_capacity(fit.blocks.len());
    for (user_id, blocks) in fit.blocks.iter().enumerate() {
        let k = blocks.first().map(Vec::len).unwrap_or(0);
        if blocks.iter().any(|b| b.len() != k) {
            return Err(Error::ShapeMismatch {
                what: "message block",
                expected: k,
                found: blocks.iter().map(Vec::len).find(|&l| l != k).unwrap_or(0),
            });
        }
        let total: f64 = blocks.iter().flatten().map(|z| z.norm_sqr()).sum();
        if k == 0 || total == 0.0 {
            let mut f = vec![C64::new(0.0, 0.0); k.max(1)];
            f[0] = C64::new(1.0, 0.0);
            out.push(RecoveryResult {
                user_id,
                amplitude_magnitudes: vec![0.0; blocks.len()],
                message_magnitudes: f.iter().map(|z| z.norm()).collect(),
                message_estimate: f,
                symbols: None,
                ls_residual: fit.residual,
                degenerate: true,
            });
            continue;
        }
        let mat = CMat::from_fn(k, blocks.len(), |l, p| blocks[p][l]);
        let svd = mat
            .thin_svd()
            .map_err(|_| Error::NumericalFailure("SVD did not converge"))?;
        let sigma = svd.S().column_vector()[0].re;
        let u = svd.U();
        let v = svd.V();
        let mut f: Vec<C64> = (0..k).map(|l| u[(l, 0)]).collect();
        canonical_phase(&mut f);
        let amplitude_magnitudes = (0..blocks.len()).map(|p| sigma * v[(p, 0)].norm()).collect();
        let symbols = ask_order.map(|o| decode_ask(&f, o));
        out.push(RecoveryResult {
            user_id,
            amplitude_magnitudes,
            message_magnitudes: f.iter().map(|z| z.norm()).collect(),
            message_estimate: f,
            symbols,
            ls_residual: fit.residual,
            degenerate: false,
        });
    }
    Ok(out)
}

/// Rotates `f` so that its largest-magnitude entry is real and nonnegative.
pub fn canonical_phase(f: &mut [C64]) {
    let Some(pivot) = f
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
    else {
        return;
    };
    let r = pivot.norm();
    if r == 0.0 {
        return;
    }
    let rot = pivot.conj() / r;
    for z in f.iter_mut() {
        *z *= rot;
    }
}

/// `|<f, g>| / ||g||` for a real nonnegative integer vector `g`.
fn ask_score(f: &[C64], g: &[u32]) -> f64 {
    let mut dot = C64::new(0.0, 0.0);
    let mut gg = 0.0;
    for (z, &s) in f.iter().zip(g) {
        dot += z.conj() * s as f64;
        gg += (s as f64) * (s as f64);
    }
    if gg == 0.0 {
        0.0
    } else {
        dot.norm() / gg.sqrt()
    }
}

/// Symbol vector in `{0..order-1}^k \ {0}` best aligned with `f`.
///
/// Exhaustive when `k log2(order) <= 16`, otherwise scale search plus rounding.
/// Among equally aligned candidates the one with the smallest entries wins.
pub fn decode_ask(f: &[C64], order: u32) -> Vec<u32> {
    let k = f.len();
    let bits = k as f64 * (order as f64).log2();
    if bits <= ASK_EXHAUSTIVE_BITS {
        let mut g = vec![0u32; k];
        let mut best = vec![0u32; k];
        let mut best_score = f64::NEG_INFINITY;
        loop {
            // odometer increment, last entry fastest
            let mut pos = k;
            loop {
                if pos == 0 {
                    return best;
                }
                pos -= 1;
                g[pos] += 1;
                if g[pos] < order {
                    break;
                }
                g[pos] = 0;
            }
            let s = ask_score(f, &g);
            if s > best_score + 1e-12 {
                best_score = s;
                best.copy_from_slice(&g);
            }
        }
    }
    let mag: Vec<f64> = f.iter().map(|z| z.norm()).collect();
    let peak = mag.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        let mut g = vec![0; k];
        g[0] = 1;
        return g;
    }
    let mut best = vec![0u32; k];
    let mut best_score = f64::NEG_INFINITY;
    for top in 1..order {
        let mut scale = top as f64 / peak;
        let mut g = vec![0u32; k];
        for _ in 0..4 {
            for (gi, m) in g.iter_mut().zip(&mag) {
                *gi = (m * scale).round().clamp(0.0, (order - 1) as f64) as u32;
            }
            let (num, den) = g
                .iter()
                .zip(&mag)
                .fold((0.0, 0.0), |(a, b), (&gi, m)| (a + gi as f64 * m, b + m * m));
            if num <= 0.0 {
                break;
            }
            scale = num / den;
        }
        let s = ask_score(f, &g);
        if s > best_score + 1e-12 {
            best_score = s;
            best = g;
        }
    }
    best
}
