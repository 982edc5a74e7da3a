//! Channel-level Monte-Carlo simulator used to check the closed forms: ZF
//! access rates with Rayleigh small-scale fading and the Rician backhaul
//! outage.
//!
//! Randomness is drawn from counter-based ChaCha streams (one per access
//! trial, one per chunk of backhaul draws), so estimates do not depend on the
//! number of rayon workers.

use num_complex::Complex64;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::access::AccessModel;
use crate::error::{Error, Result};
use crate::model::{Layout, NetworkParams, Point};
use crate::rng;

pub const DEFAULT_NORM_DRAWS: usize = 2000;
pub const MIN_ACCESS_TRIALS: usize = 1_000;
pub const MIN_BACKHAUL_TRIALS: usize = 100_000;
/// Backhaul draws per RNG stream.
const CHUNK: usize = 4096;
/// Pivots below this fraction of the largest diagonal entry count as a
/// rank-deficient draw.
const PIVOT_REL_FLOOR: f64 = 1e-13;
/// Redraw budget for rank-deficient channel draws.
const MAX_REDRAWS: usize = 64;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
}

impl McEstimate {
    fn from_sums(sum: f64, sum_sq: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        McEstimate {
            mean,
            std_err: (var / nf).sqrt(),
            trials: n,
        }
    }

    fn from_samples(samples: &[f64]) -> Self {
        let (s, s2) = samples
            .iter()
            .fold((0.0, 0.0), |(s, s2), &x| (s + x, s2 + x * x));
        Self::from_sums(s, s2, samples.len())
    }
}

/// Knobs of the access-rate simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub access_trials: usize,
    pub backhaul_trials: usize,
    /// Channel draws behind each power-normalization estimate.
    pub norm_draws: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            access_trials: 10_000,
            backhaul_trials: 1_000_000,
            norm_draws: DEFAULT_NORM_DRAWS,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.access_trials < MIN_ACCESS_TRIALS {
            return Err(Error::config(
                "mc.access_trials",
                format!("must be at least {MIN_ACCESS_TRIALS}"),
            ));
        }
        if self.backhaul_trials < MIN_BACKHAUL_TRIALS {
            return Err(Error::config(
                "mc.backhaul_trials",
                format!("must be at least {MIN_BACKHAUL_TRIALS}"),
            ));
        }
        if self.norm_draws == 0 {
            return Err(Error::config("mc.norm_draws", "must be at least 1"));
        }
        Ok(())
    }
}

/// `CN(0, 1)`: independent real and imaginary parts of variance 1/2.
pub fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Dense complex matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Complex64>,
}

impl ChannelMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ChannelMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_columns(columns: &[Vec<Complex64>]) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, columns.len());
        for (c, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "ragged columns");
            m.col_mut(c).copy_from_slice(col);
        }
        m
    }

    /// `h_k = D_k^{1/2} g_k` with `g_k ~ CN(0, I)`; `amplitudes[k][r]` is the
    /// square root of the large-scale gain of row `r` for column `k`.
    pub fn draw<R: Rng + ?Sized>(amplitudes: &[Vec<f64>], rng: &mut R) -> Self {
        let rows = amplitudes.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, amplitudes.len());
        m.redraw(amplitudes, rng);
        m
    }

    fn redraw<R: Rng + ?Sized>(&mut self, amplitudes: &[Vec<f64>], rng: &mut R) {
        for (c, amp) in amplitudes.iter().enumerate() {
            for (v, a) in self.col_mut(c).iter_mut().zip(amp) {
                *v = cn01(rng) * *a;
            }
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[c * self.rows + r]
    }

    pub fn col(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// `A^H B` as a row-major `cols x other.cols` matrix.
    pub fn adjoint_mul(&self, other: &ChannelMatrix) -> Vec<Complex64> {
        assert_eq!(self.rows, other.rows);
        let mut out = Vec::with_capacity(self.cols * other.cols);
        for i in 0..self.cols {
            for j in 0..other.cols {
                out.push(inner(self.col(i), other.col(j)));
            }
        }
        out
    }

    /// Frobenius norm squared, `tr(A A^H)`.
    pub fn power(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum()
    }
}

/// `a^H b`
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Inverse of the row-major `n x n` matrix `a` by Gauss-Jordan elimination
/// with partial pivoting. `None` when a pivot falls below the relative floor.
pub fn invert(a: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let mut scratch = vec![Complex64::new(0.0, 0.0); n * n];
    let mut inv = scratch.clone();
    invert_into(a, n, &mut scratch, &mut inv).then_some(inv)
}

fn invert_into(a: &[Complex64], n: usize, m: &mut [Complex64], inv: &mut [Complex64]) -> bool {
    assert_eq!(a.len(), n * n);
    let scale = (0..n).map(|i| a[i * n + i].norm()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return false;
    }
    m.copy_from_slice(a);
    inv.fill(Complex64::new(0.0, 0.0));
    for i in 0..n {
        inv[i * n + i] = Complex64::new(1.0, 0.0);
    }
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i * n + c].norm_sqr().total_cmp(&m[j * n + c].norm_sqr()))
            .unwrap();
        if m[p * n + c].norm() < PIVOT_REL_FLOOR * scale {
            return false;
        }
        if p != c {
            for j in 0..n {
                m.swap(p * n + j, c * n + j);
                inv.swap(p * n + j, c * n + j);
            }
        }
        let piv = m[c * n + c].inv();
        for j in 0..n {
            m[c * n + j] *= piv;
            inv[c * n + j] *= piv;
        }
        for r in 0..n {
            if r == c {
                continue;
            }
            let f = m[r * n + c];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                let (mv, iv) = (m[c * n + j], inv[c * n + j]);
                m[r * n + j] -= f * mv;
                inv[r * n + j] -= f * iv;
            }
        }
    }
    true
}

/// Unnormalized ZF directions `H (H^H H)^{-1}` and their squared column
/// norms, which equal the diagonal of `(H^H H)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfDirections {
    pub w: ChannelMatrix,
    pub col_norms: Vec<f64>,
}

pub fn zf_directions(h: &ChannelMatrix) -> Option<ZfDirections> {
    let k = h.cols;
    let gram_inv = invert(&h.adjoint_mul(h), k)?;
    let mut w = ChannelMatrix::zeros(h.rows, k);
    for c in 0..k {
        let col = w.col_mut(c);
        for j in 0..k {
            let coef = gram_inv[j * k + c];
            for (o, x) in col.iter_mut().zip(h.col(j)) {
                *o += x * coef;
            }
        }
    }
    let col_norms = (0..k).map(|c| gram_inv[c * k + c].re).collect();
    Some(ZfDirections { w, col_norms })
}

/// Sample mean of `||v_k||^2` over `draws` fading realizations with fixed
/// large-scale gains. Rank-deficient draws are rejected and redrawn.
pub fn direction_norms<R: Rng + ?Sized>(
    amplitudes: &[Vec<f64>],
    draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let k = amplitudes.len();
    let mut acc = vec![0.0; k];
    let mut h = ChannelMatrix::draw(amplitudes, rng);
    let mut ws = Workspace::new(k);
    let mut diag = vec![0.0; k];
    for i in 0..draws {
        if i > 0 {
            h.redraw(amplitudes, rng);
        }
        let mut tries = 0;
        while !ws.gram_inverse_diag(&h, &mut diag) {
            tries += 1;
            if tries == MAX_REDRAWS {
                return Err(Error::non_finite("channel matrix stayed rank deficient"));
            }
            h.redraw(amplitudes, rng);
        }
        for (a, d) in acc.iter_mut().zip(&diag) {
            *a += d;
        }
    }
    Ok(acc.into_iter().map(|a| a / draws as f64).collect())
}

/// Scratch buffers for repeated `K x K` Gram inversions.
struct Workspace {
    gram: Vec<Complex64>,
    lu: Vec<Complex64>,
    inv: Vec<Complex64>,
}

impl Workspace {
    fn new(k: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); k * k];
        Workspace {
            gram: z.clone(),
            lu: z.clone(),
            inv: z,
        }
    }

    fn fill_gram(&mut self, h: &ChannelMatrix) {
        let k = h.cols;
        for i in 0..k {
            for j in i..k {
                let v = inner(h.col(i), h.col(j));
                self.gram[i * k + j] = v;
                self.gram[j * k + i] = v.conj();
            }
        }
    }

    /// Fills `inv` with `(H^H H)^{-1}`; false when rank deficient.
    fn invert_gram(&mut self, h: &ChannelMatrix) -> bool {
        self.fill_gram(h);
        invert_into(&self.gram, h.cols, &mut self.lu, &mut self.inv)
    }

    /// Diagonal of `(H^H H)^{-1}` through the Cholesky factor `G = L L^H`:
    /// with `T = L^{-1}`, `[G^{-1}]_kk = sum_j |T_jk|^2`.
    fn gram_inverse_diag(&mut self, h: &ChannelMatrix, out: &mut [f64]) -> bool {
        let k = h.cols;
        self.fill_gram(h);
        let scale = (0..k).map(|i| self.gram[i * k + i].re).fold(0.0, f64::max);
        if !(scale > 0.0) {
            return false;
        }
        let l = &mut self.lu;
        for j in 0..k {
            let mut d = self.gram[j * k + j].re;
            for p in 0..j {
                d -= l[j * k + p].norm_sqr();
            }
            if !(d > PIVOT_REL_FLOOR * scale) {
                return false;
            }
            let ljj = d.sqrt();
            l[j * k + j] = Complex64::new(ljj, 0.0);
            for i in j + 1..k {
                let mut v = self.gram[i * k + j];
                for p in 0..j {
                    v -= l[i * k + p] * l[j * k + p].conj();
                }
                l[i * k + j] = v / ljj;
            }
        }
        // forward substitution for T = L^{-1}, one column at a time
        let t = &mut self.inv;
        for c in 0..k {
            let mut norm = 0.0;
            for r in c..k {
                let mut v = if r == c {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                for p in c..r {
                    v -= l[r * k + p] * t[p * k + c];
                }
                v /= l[r * k + r].re;
                t[r * k + c] = v;
                norm += v.norm_sqr();
            }
            out[c] = norm;
        }
        true
    }
}

fn redraw_until_invertible<R: Rng + ?Sized>(
    h: &mut ChannelMatrix,
    amplitudes: &[Vec<f64>],
    rng: &mut R,
    ws: &mut Workspace,
) -> Result<()> {
    for _ in 0..MAX_REDRAWS {
        if ws.invert_gram(h) {
            return Ok(());
        }
        h.redraw(amplitudes, rng);
    }
    Err(Error::non_finite("channel matrix stayed rank deficient"))
}

/// ZF precoder `W = H (H^H H)^{-1} mu` for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub w: ChannelMatrix,
    pub mu: Vec<f64>,
}

/// Scales the ZF directions of `h` so that the expected total power is
/// `power`: `mu_k = sqrt(power / (K * mean_norms[k]))`.
pub fn zf_beamformer(h: &ChannelMatrix, mean_norms: &[f64], power: f64) -> Option<Precoder> {
    let k = h.cols;
    assert_eq!(mean_norms.len(), k);
    let ZfDirections { mut w, .. } = zf_directions(h)?;
    let mu: Vec<f64> = mean_norms
        .iter()
        .map(|&e| (power / (k as f64 * e)).sqrt())
        .collect();
    for (c, &m) in mu.iter().enumerate() {
        for v in w.col_mut(c) {
            *v *= m;
        }
    }
    Some(Precoder { w, mu })
}

/// Square-root path gains, one row per antenna (RRH-major), one column per
/// user.
fn amplitudes(params: &NetworkParams, rrhs: &[Point], users: &[Point]) -> Vec<Vec<f64>> {
    let m = params.antennas_per_rrh;
    users
        .iter()
        .map(|u| {
            rrhs.iter()
                .flat_map(|r| std::iter::repeat_n(params.pathloss(r.dist(u)).sqrt(), m))
                .collect()
        })
        .collect()
}

/// Spectral efficiency (nats/s/Hz) of a typical user of cell `q`, averaged
/// over user positions drawn from the traffic density, Rayleigh fading and
/// the users of the interfering cells.
///
/// Each trial draws `K` users in every cell, builds every cell's ZF
/// precoder with the power normalization estimated from `norm_draws`
/// independent fading draws at those positions, and evaluates user 0 of
/// cell `q` against the coherent inter-cell interference
/// `sum_{q', k'} |h_{q', u}^H w_{q' k'}|^2` under wrap-around geometry.
pub fn mc_access_rate(
    model: &AccessModel,
    layout: &Layout,
    q: usize,
    cfg: &McConfig,
    seed: u64,
) -> Result<McEstimate> {
    if cfg.access_trials < MIN_ACCESS_TRIALS {
        return Err(Error::config(
            "mc.access_trials",
            format!("must be at least {MIN_ACCESS_TRIALS}"),
        ));
    }
    if cfg.norm_draws == 0 {
        return Err(Error::config("mc.norm_draws", "must be at least 1"));
    }
    let samples = (0..cfg.access_trials)
        .into_par_iter()
        .map(|t| access_trial(model, layout, q, cfg.norm_draws, seed, t as u64))
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(&samples))
}

fn access_trial(
    model: &AccessModel,
    layout: &Layout,
    q: usize,
    norm_draws: usize,
    seed: u64,
    trial: u64,
) -> Result<f64> {
    let p = &model.params;
    let k = p.users_per_cell;
    let power = p.access_power_mw();
    let mut rng = rng::stream(seed, rng::MC_STREAM_BASE + trial);

    let precoder = |cell: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Result<(Vec<Point>, Vec<Point>, Precoder)> {
        let (dx, dy) = model.grid.wrap_offset(q, cell);
        let rrhs: Vec<Point> = layout.rrh[cell].iter().map(|r| r.translated(dx, dy)).collect();
        let users: Vec<Point> = (0..k)
            .map(|_| model.traffic.sample(cell, rng).translated(dx, dy))
            .collect();
        let amps = amplitudes(p, &rrhs, &users);
        let norms = direction_norms(&amps, norm_draws, &mut SmallRng::from_rng(rng))?;
        let mut h = ChannelMatrix::draw(&amps, rng);
        redraw_until_invertible(&mut h, &amps, rng, &mut Workspace::new(k))?;
        let pc = zf_beamformer(&h, &norms, power)
            .ok_or_else(|| Error::non_finite("ZF precoder of an invertible draw"))?;
        debug_assert!({
            let g = inner(h.col(0), pc.w.col(0)).norm_sqr();
            (g - pc.mu[0] * pc.mu[0]).abs() <= 1e-8 * pc.mu[0] * pc.mu[0] + 1e-300
        });
        Ok((rrhs, users, pc))
    };

    let (_, users, own) = precoder(q, &mut rng)?;
    let user = users[0];
    let mut interference = 0.0;
    for cell in 0..model.num_cells() {
        if cell == q {
            continue;
        }
        let (rrhs, _, pc) = precoder(cell, &mut rng)?;
        let amp = &amplitudes(p, &rrhs, &[user])[0];
        let h: Vec<Complex64> = amp.iter().map(|a| cn01(&mut rng) * *a).collect();
        interference += (0..k).map(|c| inner(&h, pc.w.col(c)).norm_sqr()).sum::<f64>();
    }
    let signal = own.mu[0] * own.mu[0];
    Ok((signal / (interference + p.access_noise_mw())).ln_1p())
}

/// `|g|^2` for `g = eta1 e^{j theta} + eta2 CN(0, 1)`, `theta` uniform.
pub fn sample_rician_power<R: Rng + ?Sized>(eta1: f64, eta2: f64, rng: &mut R) -> f64 {
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    (Complex64::from_polar(eta1, theta) + cn01(rng) * eta2).norm_sqr()
}

/// Sums `f(|g|^2)` and its square over `trials` Rician draws, chunked into
/// independent streams.
fn rician_sums(params: &NetworkParams, trials: usize, seed: u64, f: impl Fn(f64) -> f64 + Sync) -> McEstimate {
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, rng::MC_STREAM_BASE + c as u64);
            let n = CHUNK.min(trials - c * CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..n {
                let v = f(sample_rician_power(params.eta1, params.eta2, &mut rng));
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = parts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    McEstimate::from_sums(s, s2, trials)
}

/// Empirical probability that the backhaul link at CU distance `cu_distance`
/// cannot carry `K omega R` for cell-average access rate `avg_access_rate`
/// (nats/s/Hz).
pub fn mc_backhaul_outage(
    cu_distance: f64,
    avg_access_rate: f64,
    params: &NetworkParams,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if trials < MIN_BACKHAUL_TRIALS {
        return Err(Error::config(
            "mc.backhaul_trials",
            format!("must be at least {MIN_BACKHAUL_TRIALS}"),
        ));
    }
    let snr = params.rho_c() * params.pathloss(cu_distance);
    let need = params.backhaul_load_ratio() * avg_access_rate;
    Ok(rician_sums(params, trials, seed, |delta| {
        if (snr * delta).ln_1p() <= need {
            1.0
        } else {
            0.0
        }
    }))
}

/// Ergodic backhaul rate `E log(1 + rho_c |g|^2 l(d))` in nats/s/Hz.
pub fn mc_backhaul_rate(cu_distance: f64, params: &NetworkParams, trials: usize, seed: u64) -> McEstimate {
    let snr = params.rho_c() * params.pathloss(cu_distance);
    rician_sums(params, trials, seed, |delta| (snr * delta).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backhaul::{outage_prob, rician_power_cdf};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_amps(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..cols)
            .map(|_| (0..rows).map(|_| rng.random_range(0.05..2.0)).collect())
            .collect()
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let mut r = rng(1);
        for n in 1..=10 {
            let a: Vec<Complex64> = (0..n * n).map(|_| cn01(&mut r)).collect();
            let inv = invert(&a, n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let v: Complex64 = (0..n).map(|l| a[i * n + l] * inv[l * n + j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((v - want).norm() < 1e-10, "n={n} ({i},{j}) {v}");
                }
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let one = Complex64::new(1.0, 0.0);
        assert!(invert(&[one, one, one, one], 2).is_none());
        assert!(invert(&[Complex64::new(0.0, 0.0)], 1).is_none());
    }

    #[test]
    fn cholesky_diagonal_matches_full_inverse() {
        let mut r = rng(12);
        for &(rows, k) in &[(8, 3), (32, 10), (3, 3), (2, 1)] {
            let amps = random_amps(rows, k, &mut r);
            let h = ChannelMatrix::draw(&amps, &mut r);
            let mut ws = Workspace::new(k);
            let mut diag = vec![0.0; k];
            assert!(ws.gram_inverse_diag(&h, &mut diag));
            let full = zf_directions(&h).unwrap().col_norms;
            for (a, b) in diag.iter().zip(&full) {
                assert!((a - b).abs() < 1e-10 * b, "{a} vs {b}");
            }
        }
        // duplicate columns are rank deficient
        let col: Vec<Complex64> = (0..4).map(|_| cn01(&mut r)).collect();
        let h = ChannelMatrix::from_columns(&[col.clone(), col]);
        assert!(!Workspace::new(2).gram_inverse_diag(&h, &mut [0.0; 2]));
    }

    #[test]
    fn zf_directions_invert_the_channel() {
        let mut r = rng(2);
        for &(rows, k) in &[(8, 3), (4, 4), (32, 10), (5, 1)] {
            let amps = random_amps(rows, k, &mut r);
            let h = ChannelMatrix::draw(&amps, &mut r);
            let zf = zf_directions(&h).unwrap();
            let hw = h.adjoint_mul(&zf.w);
            for i in 0..k {
                for j in 0..k {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((hw[i * k + j] - want).norm() < 1e-10);
                }
                let norm: f64 = zf.w.col(i).iter().map(Complex64::norm_sqr).sum();
                assert!((norm - zf.col_norms[i]).abs() < 1e-10 * norm);
            }
        }
    }

    #[test]
    fn single_user_precoder_is_matched_filter() {
        let mut r = rng(3);
        let amps = random_amps(6, 1, &mut r);
        let h = ChannelMatrix::draw(&amps, &mut r);
        let hn: f64 = h.col(0).iter().map(Complex64::norm_sqr).sum();
        let p = 2.5;
        // normalize with this draw's own norm: the precoder then carries p exactly
        let pc = zf_beamformer(&h, &[1.0 / hn], p).unwrap();
        assert!((pc.w.power() - p).abs() < 1e-12);
        // w is a positive multiple of h
        let scale = pc.w.col(0)[0] / h.col(0)[0];
        assert!(scale.im.abs() < 1e-12 && scale.re > 0.0);
        for (w, x) in pc.w.col(0).iter().zip(h.col(0)) {
            assert!((w - x * scale).norm() < 1e-12);
        }
    }

    #[test]
    fn intra_cell_interference_vanishes() {
        let mut r = rng(4);
        let amps = random_amps(8, 3, &mut r);
        let norms = direction_norms(&amps, 200, &mut r).unwrap();
        let p = 1.0;
        for _ in 0..50 {
            let h = ChannelMatrix::draw(&amps, &mut r);
            let pc = zf_beamformer(&h, &norms, p).unwrap();
            let hw = h.adjoint_mul(&pc.w);
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert!(hw[i * 3 + j].norm_sqr() <= 1e-20 * p);
                    }
                }
                assert!((hw[i * 3 + i].norm_sqr() - pc.mu[i] * pc.mu[i]).abs() < 1e-10 * pc.mu[i] * pc.mu[i]);
            }
        }
    }

    #[test]
    fn average_power_meets_budget() {
        let mut r = rng(5);
        let amps = random_amps(8, 3, &mut r);
        let norms = direction_norms(&amps, DEFAULT_NORM_DRAWS, &mut r).unwrap();
        let p = 0.7;
        // fresh draws: the budget holds on average, not per draw
        let n = 20_000;
        let total: f64 = (0..n)
            .map(|_| zf_beamformer(&ChannelMatrix::draw(&amps, &mut r), &norms, p).unwrap().w.power())
            .sum();
        let mean = total / n as f64;
        assert!((mean - p).abs() < 0.02 * p, "mean power {mean}");
    }

    #[test]
    fn iid_direction_norm_matches_inverse_wishart() {
        // E[(H^H H)^{-1}]_kk = 1 / ((rows - K) g) for i.i.d. gain g
        let mut r = rng(6);
        let (rows, k, g) = (8usize, 3usize, 0.4f64);
        let amps = vec![vec![g.sqrt(); rows]; k];
        let norms = direction_norms(&amps, 100_000, &mut r).unwrap();
        let want = 1.0 / ((rows - k) as f64 * g);
        for e in norms {
            assert!((e - want).abs() < 0.01 * want, "{e} vs {want}");
        }
    }

    #[test]
    fn small_scale_fading_is_unit_circular() {
        let mut r = rng(7);
        let n = 200_000;
        let (mut re2, mut im2, mut cross) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = cn01(&mut r);
            re2 += z.re * z.re;
            im2 += z.im * z.im;
            cross += z.re * z.im;
        }
        let n = n as f64;
        assert!((re2 / n - 0.5).abs() < 0.005);
        assert!((im2 / n - 0.5).abs() < 0.005);
        assert!((cross / n).abs() < 0.005);
    }

    #[test]
    fn rician_power_mean() {
        let mut r = rng(8);
        let (e1, e2) = (8.0, 2f64.sqrt());
        let n = 200_000;
        let mean = (0..n).map(|_| sample_rician_power(e1, e2, &mut r)).sum::<f64>() / n as f64;
        let want = e1 * e1 + e2 * e2;
        assert!((mean - want).abs() < 0.01 * want);
    }

    #[test]
    fn rician_power_ks_statistic() {
        let mut r = rng(9);
        let (e1, e2) = (8.0, 2f64.sqrt());
        let n = 1_000_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sample_rician_power(e1, e2, &mut r)).collect();
        xs.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        // evaluate the closed-form CDF on a subsample of order statistics
        for i in (0..n).step_by(500) {
            let f = rician_power_cdf(xs[i], e1, e2).unwrap();
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            d = d.max((f - lo).abs()).max((f - hi).abs());
        }
        assert!(d <= 0.005, "KS {d}");
    }

    fn params() -> NetworkParams {
        NetworkParams::default()
    }

    #[test]
    fn zero_required_rate_never_outages() {
        let est = mc_backhaul_outage(400.0, 0.0, &params(), MIN_BACKHAUL_TRIALS, 1).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn vanishing_pathloss_always_outages() {
        let est = mc_backhaul_outage(1e12, 0.5, &params(), MIN_BACKHAUL_TRIALS, 1).unwrap();
        assert_eq!(est.mean, 1.0);
    }

    #[test]
    fn outage_matches_closed_form() {
        let p = params();
        for &(d, rate) in &[(300.0, 2.0), (800.0, 1.5), (1200.0, 1.0)] {
            let est = mc_backhaul_outage(d, rate, &p, 200_000, 11).unwrap();
            let want = outage_prob(d, rate, &p).unwrap();
            let se = (want * (1.0 - want) / est.trials as f64).sqrt();
            assert!((est.mean - want).abs() <= 3.0 * se.max(1e-6), "d={d}: {} vs {want}", est.mean);
        }
    }

    #[test]
    fn backhaul_estimates_ignore_worker_count() {
        let p = params();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| mc_backhaul_rate(500.0, &p, 20_000, 4));
        let b = three.install(|| mc_backhaul_rate(500.0, &p, 20_000, 4));
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_short_runs() {
        assert!(mc_backhaul_outage(1.0, 1.0, &params(), 10, 0).is_err());
        let cfg = McConfig {
            access_trials: 10,
            ..McConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
