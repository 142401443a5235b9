//! Exact sampling of stationary-increment Gaussian paths on uniform grids.
//!
//! Increments `X((k+1) dt) - X(k dt)` form a stationary Gaussian sequence with
//! autocovariance
//!
//! ```text
//! gamma(k) = ( sigma^2((k+1) dt) - 2 sigma^2(k dt) + sigma^2(|k-1| dt) ) / 2
//! ```
//!
//! which is sampled exactly by circulant embedding (or by a pivoted Cholesky
//! factor for small grids) and cumulatively summed.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::invalid;
use crate::{rng, Error, Result, VarianceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    CirculantEmbedding,
    DenseFactor,
    SumOfFbm,
}

/// One sampled path `X(0), X(dt), ..., X((len-1) dt)` with `X(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub generator: Generator,
}

impl PathGrid {
    /// Builds a path from its increments.
    pub fn from_increments(dt: f64, increments: &[f64], seed: u64, generator: Generator) -> Self {
        let mut values = Vec::with_capacity(increments.len() + 1);
        let mut x = 0.0;
        values.push(x);
        for d in increments {
            x += d;
            values.push(x);
        }
        PathGrid { dt, values, seed, generator }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes the `GSPATH1` binary format: 8-byte magic, then little-endian
    /// `n: u64`, `dt: f64`, `seed: u64`, `model_hash: u64` and `n` values.
    pub fn write_dump(&self, w: &mut impl Write, model_hash: u64) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&model_hash.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads one record written by [`PathGrid::write_dump`]; returns the path
    /// and the model hash. The generator is not stored and reads back as
    /// [`Generator::CirculantEmbedding`].
    pub fn read_dump(r: &mut impl Read) -> Result<(PathGrid, u64)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(invalid("not a GSPATH1 record"));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(r)?) as usize;
        let dt = f64::from_le_bytes(next(r)?);
        let seed = u64::from_le_bytes(next(r)?);
        let hash = u64::from_le_bytes(next(r)?);
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f64::from_le_bytes(next(r)?));
        }
        Ok((PathGrid { dt, values, seed, generator: Generator::CirculantEmbedding }, hash))
    }
}

const DUMP_MAGIC: &[u8; 8] = b"GSPATH1\0";

/// First 8 bytes of the SHA-256 of the model's JSON descriptor.
pub fn model_hash(model: &VarianceModel) -> u64 {
    let json = serde_json::to_vec(&model.descriptor()).expect("descriptor serializes");
    let digest = Sha256::digest(&json);
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Autocovariance `gamma(k)` of the increments on a grid of step `dt`.
pub fn increment_autocov(model: &VarianceModel, dt: f64, k: usize) -> f64 {
    if k == 0 {
        return model.var(dt);
    }
    let k = k as f64;
    0.5 * (model.var((k + 1.0) * dt) - 2.0 * model.var(k * dt) + model.var((k - 1.0) * dt))
}

/// Relative size below which negative circulant eigenvalues count as rounding noise.
const SPECTRUM_TOLERANCE: f64 = 1e-12;

/// Circulant-embedding sampler for `len` increments of a fixed model and step.
///
/// One transform yields two independent increment sequences (real and
/// imaginary parts).
pub struct CirculantSampler {
    len: usize,
    dt: f64,
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    clamped: usize,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("len", &self.len)
            .field("dt", &self.dt)
            .field("embedding", &self.scale.len())
            .field("clamped", &self.clamped)
            .finish()
    }
}

impl CirculantSampler {
    pub fn new(model: &VarianceModel, len: usize, dt: f64) -> Result<Self> {
        if len == 0 {
            return Err(invalid("need at least one increment"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("grid step {dt} must be positive")));
        }
        let size = (2 * len).max(2).next_power_of_two();
        let half = size / 2;
        let gamma: Vec<f64> = (0..=half).map(|k| increment_autocov(model, dt, k)).collect();
        let mut row: Vec<Complex64> = (0..size)
            .map(|j| Complex64::new(gamma[j.min(size - j)], 0.0))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(size);
        fft.process(&mut row);
        let max = row.iter().map(|z| z.re).fold(f64::MIN, f64::max);
        let min = row.iter().map(|z| z.re).fold(f64::MAX, f64::min);
        if min < -SPECTRUM_TOLERANCE * max {
            return Err(Error::NegativeSpectrum { min, max });
        }
        let clamped = row.iter().filter(|z| z.re < 0.0).count();
        let scale = row.iter().map(|z| (z.re.max(0.0) / size as f64).sqrt()).collect();
        Ok(CirculantSampler { len, dt, scale, fft, clamped })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of slightly negative eigenvalues that were set to zero.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Fills `first` and `second` (each of length `len`) with two independent
    /// increment sequences.
    pub fn sample_pair_into(&self, rng: &mut ChaCha8Rng, first: &mut [f64], second: &mut [f64]) {
        let mut buf: Vec<Complex64> = self
            .scale
            .iter()
            .map(|&s| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Complex64::new(s * a, s * b)
            })
            .collect();
        self.fft.process(&mut buf);
        for ((z, x), y) in buf.iter().zip(first.iter_mut()).zip(second.iter_mut()) {
            *x = z.re;
            *y = z.im;
        }
    }

    /// Two independent increment sequences.
    pub fn sample_pair(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let mut a = vec![0.0; self.len];
        let mut b = vec![0.0; self.len];
        self.sample_pair_into(rng, &mut a, &mut b);
        (a, b)
    }
}

fn check_grid(n: usize, dt: f64) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("grid needs at least two points, got {n}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("grid step {dt} must be positive")));
    }
    Ok(())
}

/// Standard fBm with Hurst index `hurst` on `n` grid points.
pub fn sample_fbm(hurst: f64, n: usize, dt: f64, seed: u64) -> Result<PathGrid> {
    check_grid(n, dt)?;
    let sampler = CirculantSampler::new(&VarianceModel::fbm(hurst)?, n - 1, dt)?;
    let (inc, _) = sampler.sample_pair(&mut rng::stream(seed, 0, 0));
    Ok(PathGrid::from_increments(dt, &inc, seed, Generator::CirculantEmbedding))
}

/// Sum of independent `sqrt(w_i) B_{H_i}`, component `i` drawn from the
/// stream `(seed, i)`.
pub fn sample_fbm_sum(model: &VarianceModel, n: usize, dt: f64, seed: u64) -> Result<PathGrid> {
    check_grid(n, dt)?;
    let mut total = vec![0.0; n - 1];
    for (i, (&h, &w)) in model.hursts().iter().zip(model.weights()).enumerate() {
        let sampler = CirculantSampler::new(&VarianceModel::fbm(h)?, n - 1, dt)?;
        let (inc, _) = sampler.sample_pair(&mut rng::stream(seed, i as u64, 0));
        let sw = w.sqrt();
        for (t, d) in total.iter_mut().zip(&inc) {
            *t += sw * d;
        }
    }
    Ok(PathGrid::from_increments(dt, &total, seed, Generator::SumOfFbm))
}

/// Default size limit of the dense factorization.
pub const DENSE_CAP: usize = 4096;

/// Pivoted Cholesky factor of a symmetric positive semi-definite matrix.
///
/// Returns the permutation and the column-major `n x rank` factor `L` with
/// `A[p, p] = L L^T`.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    n: usize,
    perm: Vec<usize>,
    /// Column `j` occupies `factor[j*n .. (j+1)*n]`, indexed by permuted row.
    factor: Vec<f64>,
    rank: usize,
}

impl PivotedCholesky {
    /// Factorizes the matrix given by `entry(i, j)`.
    pub fn new(n: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut diag: Vec<f64> = (0..n).map(|i| entry(i, i)).collect();
        let scale = diag.iter().cloned().fold(0.0, f64::max);
        let tol = 1e-13 * scale * n as f64;
        let mut factor = vec![0.0; n * n];
        let mut rank = 0;
        for k in 0..n {
            let (p, &pivot) = diag[k..]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, v)| (i + k, v))
                .unwrap();
            let most_negative = diag[k..].iter().cloned().fold(f64::INFINITY, f64::min);
            if most_negative < -1e-10 * scale {
                return Err(Error::NotPositiveSemiDefinite { pivot: most_negative, step: k });
            }
            if pivot <= tol {
                break;
            }
            perm.swap(k, p);
            diag.swap(k, p);
            for j in 0..k {
                factor.swap(j * n + k, j * n + p);
            }
            let lkk = pivot.sqrt();
            factor[k * n + k] = lkk;
            for i in (k + 1)..n {
                let mut s = entry(perm[i], perm[k]);
                for j in 0..k {
                    s -= factor[j * n + i] * factor[j * n + k];
                }
                let lik = s / lkk;
                factor[k * n + i] = lik;
                diag[i] -= lik * lik;
            }
            rank += 1;
        }
        Ok(PivotedCholesky { n, perm, factor, rank })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `x = P^T L z` for standard normal `z`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.rank).map(|_| rng.sample(StandardNormal)).collect();
        let mut permuted = vec![0.0; self.n];
        for (j, zj) in z.iter().enumerate() {
            let col = &self.factor[j * self.n..(j + 1) * self.n];
            for i in j..self.n {
                permuted[i] += col[i] * zj;
            }
        }
        let mut out = vec![0.0; self.n];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = permuted[i];
        }
        out
    }
}

/// Dense-factorization sampler for any supported model (at most `cap`
/// increments).
pub fn sample_general(model: &VarianceModel, n: usize, dt: f64, seed: u64, cap: usize) -> Result<PathGrid> {
    check_grid(n, dt)?;
    let m = n - 1;
    if m > cap {
        return Err(Error::CapExceeded { n: m, cap });
    }
    let gamma: Vec<f64> = (0..m).map(|k| increment_autocov(model, dt, k)).collect();
    let chol = PivotedCholesky::new(m, |i, j| gamma[i.abs_diff(j)])?;
    let inc = chol.sample(&mut rng::stream(seed, 0, 0));
    Ok(PathGrid::from_increments(dt, &inc, seed, Generator::DenseFactor))
}
