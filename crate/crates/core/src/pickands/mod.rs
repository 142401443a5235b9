//! Monte Carlo estimation of Pickands-type constants
//! `H_V^Phi(M) = E exp(Phi(sqrt(2) V - sigma_V^2))`.
//!
//! `V` is a centred Gaussian process with stationary increments and `V(0) = 0`:
//! a standard fBm, the degenerate Hurst-one line `t Z`, or a scaled variance
//! model `kappa X`. `Phi` is the supremum or infimum over a grid on `[0, rho]`,
//! or the inf-sup over a product grid.
//!
//! Two estimators of sup-type constants are provided:
//!
//! - [`Method::Plain`] averages `exp(max_i W(t_i))`. Its summands are heavy
//!   tailed (the all-time supremum is roughly exponential with unit rate), so
//!   it is only reliable on short intervals.
//! - [`Method::ShiftedRatio`] uses the exact grid identity
//!   `E max_i e^{W(t_i)} = (K+1) E[ max_i e^{W_J(t_i)} / sum_k e^{W_J(t_k)} ]`
//!   where `J` is uniform on the `K+1` grid indices and
//!   `W_J(t) = sqrt(2) (V(t) - V(t_J)) - sigma^2(|t - t_J|)`. It follows from
//!   tilting by `e^{W(t_J)}` and increment stationarity; the summands lie in
//!   `(0, 1]`.
//!
//! Grid constants are biased (downward for sup); every interval estimate runs
//! the mesh pair `(h, h/2)` on common paths and reports one Richardson step
//! with exponent equal to the local Hölder index of `V`.

mod cache;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::asymptotics::{
    critical_constants, ConstantSource, HorizonCase, PickandsInputs, QueueParams, Regime, RegimeClass,
};
use crate::error::invalid;
use crate::paths::CirculantSampler;
use crate::rng::{mix, stream};
use crate::stats::{fit_line, intercept_weights, Moments};
use crate::variance::ModelDescriptor;
use crate::{Error, Result, VarianceModel};

pub use cache::{cache_key, PickandsCache};

/// Exponents above this are clipped and counted.
pub const EXP_CLIP: f64 = 700.0;

/// Grid divisions of an interval when the Hölder index is at least 1/2.
pub const DEFAULT_DIVISIONS: usize = 512;
/// Grid divisions for rougher processes.
pub const ROUGH_DIVISIONS: usize = 4096;

/// The process `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessDescriptor {
    /// Standard fBm, variance `t^(2 hurst)`.
    Fbm { hurst: f64 },
    /// `t Z` with one standard normal `Z`, variance `t^2`.
    Line,
    /// `kappa X` with `X` a centred process of the given variance model.
    Scaled { kappa: f64, model: ModelDescriptor },
}

impl ProcessDescriptor {
    pub fn check(&self) -> Result<()> {
        match self {
            ProcessDescriptor::Fbm { hurst } if !(*hurst > 0.0 && *hurst < 1.0) => {
                Err(Error::HurstOutOfRange(*hurst))
            }
            ProcessDescriptor::Scaled { kappa, model } => {
                if !(*kappa > 0.0 && kappa.is_finite()) {
                    return Err(invalid(format!("scale kappa={kappa} must be positive")));
                }
                model.build().map(|_| ())
            }
            _ => Ok(()),
        }
    }

    /// `sigma_V^2(t)`.
    pub fn variance_fn(&self) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        self.check()?;
        Ok(match self {
            ProcessDescriptor::Fbm { hurst } => {
                let two_h = 2.0 * hurst;
                Box::new(move |t: f64| t.abs().powf(two_h))
            }
            ProcessDescriptor::Line => Box::new(|t: f64| t * t),
            ProcessDescriptor::Scaled { kappa, model } => {
                let m = model.build()?;
                let k2 = kappa * kappa;
                Box::new(move |t: f64| k2 * m.var(t.abs()))
            }
        })
    }

    /// Local Hölder index of the paths: the mesh exponent of the grid bias.
    pub fn roughness(&self) -> Result<f64> {
        Ok(match self {
            ProcessDescriptor::Fbm { hurst } => *hurst,
            ProcessDescriptor::Line => 2.0,
            ProcessDescriptor::Scaled { model, .. } => model.build()?.alpha0(),
        })
    }

    /// `(G, alpha_1)` with `E (V(t) - V(s))^2 <= G |t - s|^alpha_1` for `|t - s| <= 1`.
    pub fn holder_bound(&self) -> Result<(f64, f64)> {
        Ok(match self {
            ProcessDescriptor::Fbm { hurst } => (1.0, 2.0 * hurst),
            ProcessDescriptor::Line => (1.0, 2.0),
            ProcessDescriptor::Scaled { kappa, model } => {
                let m = model.build()?;
                (kappa * kappa * m.weights().iter().sum::<f64>(), 2.0 * m.alpha0())
            }
        })
    }

    /// Grid divisions per interval used when no mesh is given.
    pub fn default_divisions(&self) -> Result<usize> {
        Ok(if self.roughness()? >= 0.5 { DEFAULT_DIVISIONS } else { ROUGH_DIVISIONS })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    Sup,
    Inf,
    InfSupProduct,
}

/// The functional `Phi` and its index set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalDescriptor {
    pub kind: FunctionalKind,
    /// Length of `[0, rho]`.
    pub interval_t: f64,
    /// Length of `[0, S]`, inf-sup only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_s: Option<f64>,
}

impl FunctionalDescriptor {
    pub fn sup(len: f64) -> Self {
        FunctionalDescriptor { kind: FunctionalKind::Sup, interval_t: len, interval_s: None }
    }

    pub fn inf(len: f64) -> Self {
        FunctionalDescriptor { kind: FunctionalKind::Inf, interval_t: len, interval_s: None }
    }

    pub fn inf_sup(rho: f64, s: f64) -> Self {
        FunctionalDescriptor { kind: FunctionalKind::InfSupProduct, interval_t: rho, interval_s: Some(s) }
    }

    /// `Phi` on a 1-D grid function.
    pub fn apply(&self, f: &[f64]) -> f64 {
        match self.kind {
            FunctionalKind::Sup => f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            FunctionalKind::Inf => f.iter().copied().fold(f64::INFINITY, f64::min),
            FunctionalKind::InfSupProduct => panic!("inf-sup acts on a product grid; use apply_product"),
        }
    }

    /// `inf_t sup_s f(t, s)` for `f` stored row-major with `cols` values of `s` per `t`.
    pub fn apply_product(f: &[f64], cols: usize) -> f64 {
        f.chunks(cols)
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Plain,
    ShiftedRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantKind {
    /// `H[0, rho]` or its inf / inf-sup analogues.
    #[default]
    Interval,
    /// `lim H[0, S] / S`.
    Rate,
}

/// A Monte Carlo Pickands-type constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickandsEstimate {
    #[serde(rename = "V")]
    pub process: ProcessDescriptor,
    pub functional: FunctionalDescriptor,
    #[serde(default)]
    pub constant: ConstantKind,
    #[serde(default)]
    pub method: Method,
    pub value: f64,
    pub stderr: f64,
    /// Coarse grid step of the mesh pair.
    pub mesh: f64,
    pub n: u64,
    pub seed: u64,
    /// Grid estimates at `mesh` and `mesh / 2` before extrapolation.
    pub coarse: f64,
    pub fine: f64,
    pub clips: u64,
    pub holder_bound: (f64, f64),
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn steps_for(len: f64, mesh: f64) -> Result<usize> {
    if !(mesh > 0.0 && mesh.is_finite()) {
        return Err(invalid(format!("mesh {mesh} must be positive")));
    }
    let k = (len / mesh).round();
    if (k * mesh - len).abs() > 1e-9 * len.max(1.0) {
        return Err(invalid(format!("mesh {mesh} does not divide the interval length {len}")));
    }
    Ok(k as usize)
}

fn check_len(len: f64) -> Result<()> {
    if !(len >= 0.0 && len.is_finite()) {
        return Err(invalid(format!("interval length {len} must be finite and >= 0")));
    }
    Ok(())
}

/// Paths of `V` at `0, h, ..., steps h`, two at a time.
struct PathSource {
    kind: SourceKind,
    steps: usize,
    h: f64,
}

enum SourceKind {
    Gaussian { sampler: CirculantSampler, scale: f64 },
    Line,
}

struct PairScratch {
    inc_a: Vec<f64>,
    inc_b: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PathSource {
    fn new(v: &ProcessDescriptor, steps: usize, h: f64) -> Result<Self> {
        let kind = match v {
            ProcessDescriptor::Line => SourceKind::Line,
            ProcessDescriptor::Fbm { hurst } => SourceKind::Gaussian {
                sampler: CirculantSampler::new(&VarianceModel::fbm(*hurst)?, steps.max(1), h)?,
                scale: 1.0,
            },
            ProcessDescriptor::Scaled { kappa, model } => SourceKind::Gaussian {
                sampler: CirculantSampler::new(&model.build()?, steps.max(1), h)?,
                scale: *kappa,
            },
        };
        Ok(PathSource { kind, steps, h })
    }

    fn scratch(&self) -> PairScratch {
        let m = self.steps.max(1);
        PairScratch {
            inc_a: vec![0.0; m],
            inc_b: vec![0.0; m],
            a: vec![0.0; self.steps + 1],
            b: vec![0.0; self.steps + 1],
        }
    }

    fn fill(&self, rng: &mut ChaCha8Rng, sc: &mut PairScratch) {
        match &self.kind {
            SourceKind::Line => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                for i in 0..=self.steps {
                    let t = i as f64 * self.h;
                    sc.a[i] = t * z1;
                    sc.b[i] = t * z2;
                }
            }
            SourceKind::Gaussian { sampler, scale } => {
                sampler.sample_pair_into(rng, &mut sc.inc_a, &mut sc.inc_b);
                sc.a[0] = 0.0;
                sc.b[0] = 0.0;
                for i in 0..self.steps {
                    sc.a[i + 1] = sc.a[i] + scale * sc.inc_a[i];
                    sc.b[i + 1] = sc.b[i] + scale * sc.inc_b[i];
                }
            }
        }
    }
}

const PAIRS_PER_CHUNK: u64 = 256;

/// Runs `n` replicates (paths in pairs) and accumulates `N` statistics per
/// replicate. Chunks are merged in a fixed order, so the result does not
/// depend on the worker count.
fn run<const N: usize>(
    n: u64,
    master: u64,
    source: &PathSource,
    per_pair: bool,
    f: impl Fn(&[f64], &[f64], &mut ChaCha8Rng) -> ([f64; N], u64) + Sync,
) -> ([Moments; N], u64) {
    // per_pair: one replicate consumes both paths of a pair
    let pairs = if per_pair { n } else { n.div_ceil(2) };
    let chunks = pairs.div_ceil(PAIRS_PER_CHUNK);
    let partial: Vec<([Moments; N], u64)> = (0..chunks)
        .into_par_iter()
        .map_init(
            || source.scratch(),
            |sc, chunk| {
                let mut acc = [Moments::default(); N];
                let mut clips = 0;
                let end = ((chunk + 1) * PAIRS_PER_CHUNK).min(pairs);
                for p in chunk * PAIRS_PER_CHUNK..end {
                    let mut rng = stream(master, 0, p);
                    source.fill(&mut rng, sc);
                    let mut push = |(vals, c): ([f64; N], u64)| {
                        for (m, v) in acc.iter_mut().zip(vals) {
                            m.push(v);
                        }
                        clips += c;
                    };
                    if per_pair {
                        push(f(&sc.a, &sc.b, &mut rng));
                    } else {
                        push(f(&sc.a, &[], &mut rng));
                        if 2 * p + 1 < n {
                            push(f(&sc.b, &[], &mut rng));
                        }
                    }
                }
                (acc, clips)
            },
        )
        .collect();
    partial.into_iter().fold(([Moments::default(); N], 0), |(acc, c), (m, k)| {
        let mut out = acc;
        for i in 0..N {
            out[i] = acc[i].merge(m[i]);
        }
        (out, c + k)
    })
}

fn clipped_exp(x: f64) -> (f64, u64) {
    if x > EXP_CLIP {
        (EXP_CLIP.exp(), 1)
    } else {
        (x.exp(), 0)
    }
}

/// `max_i e^{W_J(t_i)} / sum_k e^{W_J(t_k)}` over every `stride`-th grid point,
/// anchored at grid index `j` (in units of `stride`).
fn shifted_ratio(x: &[f64], var: &[f64], stride: usize, j: usize) -> f64 {
    let k = (x.len() - 1) / stride;
    let xj = x[j * stride];
    let w = |i: usize| SQRT_2 * (x[i * stride] - xj) - var[i.abs_diff(j) * stride];
    let top = (0..=k).map(w).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = (0..=k).map(|i| (w(i) - top).exp()).sum();
    1.0 / sum
}

fn richardson(fine: f64, coarse: f64, p: f64) -> f64 {
    let r = 2f64.powf(p);
    (r * fine - coarse) / (r - 1.0)
}

const TAG_INTERVAL: u64 = 1;
const TAG_RATE: u64 = 2;
const TAG_DIRECT: u64 = 3;
const TAG_FACTOR_INF: u64 = 4;
const TAG_FACTOR_SUP: u64 = 5;

/// `H_V^Phi[0, rho]` for `Phi` = sup or inf, with the plain estimator.
pub fn estimate_interval_constant(
    v: &ProcessDescriptor,
    phi: &FunctionalDescriptor,
    mesh: f64,
    n: u64,
    seed: u64,
) -> Result<PickandsEstimate> {
    estimate_interval_with(v, phi, mesh, n, seed, Method::Plain)
}

pub fn estimate_interval_with(
    v: &ProcessDescriptor,
    phi: &FunctionalDescriptor,
    mesh: f64,
    n: u64,
    seed: u64,
    method: Method,
) -> Result<PickandsEstimate> {
    interval_impl(v, phi, mesh, n, mix(seed, &[TAG_INTERVAL]), seed, method)
}

fn interval_impl(
    v: &ProcessDescriptor,
    phi: &FunctionalDescriptor,
    mesh: f64,
    n: u64,
    master: u64,
    seed: u64,
    method: Method,
) -> Result<PickandsEstimate> {
    if phi.kind == FunctionalKind::InfSupProduct {
        return Err(Error::Unsupported("use estimate_infsup_product for the inf-sup functional".into()));
    }
    if method == Method::ShiftedRatio && phi.kind != FunctionalKind::Sup {
        return Err(Error::Unsupported("the shifted-ratio estimator applies to sup functionals only".into()));
    }
    if n < 2 {
        return Err(invalid("need at least two replicates"));
    }
    check_len(phi.interval_t)?;
    let var_fn = v.variance_fn()?;
    let holder_bound = v.holder_bound()?;
    let p = v.roughness()?;
    let mut warnings = Vec::new();
    if p < 0.5 {
        warnings.push(format!("Hölder index {p} < 1/2: grid constants converge slowly in the mesh"));
    }
    let base = PickandsEstimate {
        process: v.clone(),
        functional: *phi,
        constant: ConstantKind::Interval,
        method,
        value: 1.0,
        stderr: 0.0,
        mesh,
        n,
        seed,
        coarse: 1.0,
        fine: 1.0,
        clips: 0,
        holder_bound,
        warnings,
    };
    if phi.interval_t == 0.0 {
        return Ok(base);
    }
    let k = steps_for(phi.interval_t, mesh)?;
    let h = mesh / 2.0;
    let fine_steps = 2 * k;
    let var: Vec<f64> = (0..=fine_steps).map(|i| var_fn(i as f64 * h)).collect();
    let source = PathSource::new(v, fine_steps, h)?;
    let is_sup = phi.kind == FunctionalKind::Sup;

    let (m, clips) = match method {
        Method::Plain => run::<3>(n, master, &source, false, |x, _, _| {
            let (mut fine, mut coarse) = if is_sup {
                (f64::NEG_INFINITY, f64::NEG_INFINITY)
            } else {
                (f64::INFINITY, f64::INFINITY)
            };
            for (i, (xi, vi)) in x.iter().zip(&var).enumerate() {
                let w = SQRT_2 * xi - vi;
                if is_sup {
                    fine = fine.max(w);
                    if i % 2 == 0 {
                        coarse = coarse.max(w);
                    }
                } else {
                    fine = fine.min(w);
                    if i % 2 == 0 {
                        coarse = coarse.min(w);
                    }
                }
            }
            let (ef, c1) = clipped_exp(fine);
            let (ec, c2) = clipped_exp(coarse);
            ([richardson(ef, ec, p), ef, ec], c1 + c2)
        }),
        Method::ShiftedRatio => run::<3>(n, master, &source, false, |x, _, rng| {
            let jf = rng.random_range(0..=fine_steps);
            let jc = rng.random_range(0..=k);
            let ef = (fine_steps + 1) as f64 * shifted_ratio(x, &var, 1, jf);
            let ec = (k + 1) as f64 * shifted_ratio(x, &var, 2, jc);
            ([richardson(ef, ec, p), ef, ec], 0)
        }),
    };
    if clips > 0 {
        return Err(Error::ExponentOverflow { clips });
    }
    Ok(PickandsEstimate {
        value: m[0].mean(),
        stderr: m[0].stderr(),
        fine: m[1].mean(),
        coarse: m[2].mean(),
        ..base
    })
}

/// Plain grid estimates (no extrapolation) of the sup or inf constant on the
/// nested intervals `[0, lengths[i]]`, all read off the same paths, so they are
/// monotone in the length replicate by replicate.
pub fn estimate_nested_intervals(
    v: &ProcessDescriptor,
    kind: FunctionalKind,
    lengths: &[f64],
    mesh: f64,
    n: u64,
    seed: u64,
) -> Result<Vec<(f64, f64, f64)>> {
    const MAX: usize = 16;
    if kind == FunctionalKind::InfSupProduct || lengths.is_empty() || lengths.len() > MAX {
        return Err(invalid(format!("need 1..={MAX} lengths and a sup or inf functional")));
    }
    if lengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("interval lengths must be strictly increasing"));
    }
    let steps: Vec<usize> = lengths
        .iter()
        .map(|&l| check_len(l).and_then(|_| steps_for(l, mesh)))
        .collect::<Result<_>>()?;
    let var_fn = v.variance_fn()?;
    let last = *steps.last().unwrap();
    let var: Vec<f64> = (0..=last).map(|i| var_fn(i as f64 * mesh)).collect();
    let source = PathSource::new(v, last, mesh)?;
    let is_sup = kind == FunctionalKind::Sup;
    let (m, clips) = run::<MAX>(n, mix(seed, &[TAG_INTERVAL, 99]), &source, false, |x, _, _| {
        let mut out = [0.0; MAX];
        let mut clips = 0;
        let mut acc = if is_sup { f64::NEG_INFINITY } else { f64::INFINITY };
        let mut next = 0;
        for (i, (xi, vi)) in x.iter().zip(&var).enumerate() {
            let w = SQRT_2 * xi - vi;
            acc = if is_sup { acc.max(w) } else { acc.min(w) };
            while next < steps.len() && steps[next] == i {
                let (e, c) = clipped_exp(acc);
                out[next] = e;
                clips += c;
                next += 1;
            }
        }
        (out, clips)
    });
    if clips > 0 {
        return Err(Error::ExponentOverflow { clips });
    }
    Ok(lengths.iter().zip(&m).map(|(&l, mo)| (l, mo.mean(), mo.stderr())).collect())
}

/// Rate constant `lim H[0, S] / S` from a schedule of interval lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Extrapolated value; `stderr` propagated through the fit.
    pub estimate: PickandsEstimate,
    /// `H[0, S]` along the schedule.
    pub points: Vec<PickandsEstimate>,
    /// Fitted slope of `H[0, S] / S` against `1 / S`.
    pub slope: f64,
    /// RMS residual of that fit; compare with the point stderrs.
    pub fit_residual: f64,
}

pub const DEFAULT_S_SCHEDULE: [f64; 4] = [4.0, 8.0, 16.0, 32.0];

/// Estimates `H[0, S] / S` along `s_schedule` (shifted-ratio estimator, grid
/// step `meshes[i]` for `s_schedule[i]`) and extrapolates linearly in `1 / S`.
pub fn estimate_rate_constant(
    v: &ProcessDescriptor,
    meshes: &[f64],
    s_schedule: &[f64],
    n: u64,
    seed: u64,
) -> Result<RateEstimate> {
    if s_schedule.len() < 2 || meshes.len() != s_schedule.len() {
        return Err(invalid("need at least two interval lengths and one mesh per length"));
    }
    if s_schedule.iter().any(|&s| !(s > 0.0 && s.is_finite())) || s_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(format!("interval schedule {s_schedule:?} must be positive and strictly increasing")));
    }
    let points = s_schedule
        .iter()
        .zip(meshes)
        .enumerate()
        .map(|(i, (&s, &h))| {
            interval_impl(
                v,
                &FunctionalDescriptor::sup(s),
                h,
                n,
                mix(seed, &[TAG_RATE, i as u64]),
                seed,
                Method::ShiftedRatio,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = s_schedule.iter().map(|s| 1.0 / s).collect();
    let y: Vec<f64> = points.iter().zip(s_schedule).map(|(p, s)| p.value / s).collect();
    let fit = fit_line(&x, &y);
    let w = intercept_weights(&x);
    let stderr = w
        .iter()
        .zip(&points)
        .zip(s_schedule)
        .map(|((wi, p), s)| (wi * p.stderr / s).powi(2))
        .sum::<f64>()
        .sqrt();
    let raw = |f: fn(&PickandsEstimate) -> f64| {
        let ys: Vec<f64> = points.iter().zip(s_schedule).map(|(p, s)| f(p) / s).collect();
        fit_line(&x, &ys).intercept
    };
    let mut warnings = points[0].warnings.clone();
    let se_scale = points.iter().zip(s_schedule).map(|(p, s)| p.stderr / s).fold(0.0, f64::max);
    if fit.rms_residual > 3.0 * se_scale {
        warnings.push(format!(
            "H[0,S]/S departs from a line in 1/S (rms residual {:.3e} vs point stderr {:.3e})",
            fit.rms_residual, se_scale
        ));
    }
    let last = points.last().unwrap();
    let estimate = PickandsEstimate {
        process: v.clone(),
        functional: last.functional,
        constant: ConstantKind::Rate,
        method: Method::ShiftedRatio,
        value: fit.intercept,
        stderr,
        mesh: last.mesh,
        n,
        seed,
        coarse: raw(|p| p.coarse),
        fine: raw(|p| p.fine),
        clips: 0,
        holder_bound: last.holder_bound,
        warnings,
    };
    Ok(RateEstimate { estimate, points, slope: fit.slope, fit_residual: fit.rms_residual })
}

/// Direct and factored estimates of the inf-sup constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfSupEstimate {
    /// `E exp(inf_t sup_s (sqrt 2 V(t,s) - sigma^2(t,s)))` on the product grid,
    /// `V(t, s) = V1(t) + V2(s)` with independent copies.
    pub direct: PickandsEstimate,
    /// 1-D inf constant on `[0, rho]`.
    pub inf: PickandsEstimate,
    /// 1-D sup constant on `[0, S]`.
    pub sup: PickandsEstimate,
    pub product: f64,
    pub product_stderr: f64,
    /// `|direct - product|` in units of the combined standard error.
    pub discrepancy: f64,
}

/// All three estimates use the single grid step `mesh` (no extrapolation) so
/// that they target the same grid constant.
pub fn estimate_infsup_product(
    v: &ProcessDescriptor,
    rho: f64,
    s: f64,
    mesh: f64,
    n: u64,
    seed: u64,
) -> Result<InfSupEstimate> {
    check_len(rho)?;
    check_len(s)?;
    if n < 2 {
        return Err(invalid("need at least two replicates"));
    }
    let kt = steps_for(rho, mesh)?;
    let ks = steps_for(s, mesh)?;
    let var_fn = v.variance_fn()?;
    let holder_bound = v.holder_bound()?;
    let steps = kt.max(ks);
    let var: Vec<f64> = (0..=steps).map(|i| var_fn(i as f64 * mesh)).collect();
    let source = PathSource::new(v, steps, mesh)?;

    let (dm, dclips) = {
        let var = &var;
        run::<1>(n, mix(seed, &[TAG_DIRECT]), &source, true, move |a, b, _| {
            // honest product-grid evaluation
            let mut grid = Vec::with_capacity((kt + 1) * (ks + 1));
            for i in 0..=kt {
                for j in 0..=ks {
                    grid.push(SQRT_2 * (a[i] + b[j]) - var[i] - var[j]);
                }
            }
            let (e, c) = clipped_exp(FunctionalDescriptor::apply_product(&grid, ks + 1));
            ([e], c)
        })
    };
    let one_d = |kind: FunctionalKind, k: usize, tag: u64| {
        let var = &var;
        run::<1>(n, mix(seed, &[tag]), &source, false, move |x, _, _| {
            let w = (0..=k).map(|i| SQRT_2 * x[i] - var[i]);
            let e = if kind == FunctionalKind::Sup {
                w.fold(f64::NEG_INFINITY, f64::max)
            } else {
                w.fold(f64::INFINITY, f64::min)
            };
            let (e, c) = clipped_exp(e);
            ([e], c)
        })
    };
    let (im, iclips) = one_d(FunctionalKind::Inf, kt, TAG_FACTOR_INF);
    let (sm, sclips) = one_d(FunctionalKind::Sup, ks, TAG_FACTOR_SUP);
    let clips = dclips + iclips + sclips;
    if clips > 0 {
        return Err(Error::ExponentOverflow { clips });
    }
    let make = |phi: FunctionalDescriptor, m: &Moments| PickandsEstimate {
        process: v.clone(),
        functional: phi,
        constant: ConstantKind::Interval,
        method: Method::Plain,
        value: m.mean(),
        stderr: m.stderr(),
        mesh,
        n,
        seed,
        coarse: m.mean(),
        fine: m.mean(),
        clips: 0,
        holder_bound,
        warnings: Vec::new(),
    };
    let direct = make(FunctionalDescriptor::inf_sup(rho, s), &dm[0]);
    let inf = make(FunctionalDescriptor::inf(rho), &im[0]);
    let sup = make(FunctionalDescriptor::sup(s), &sm[0]);
    let product = inf.value * sup.value;
    let product_stderr = ((inf.stderr * sup.value).powi(2) + (inf.value * sup.stderr).powi(2)).sqrt();
    let combined = (direct.stderr.powi(2) + product_stderr.powi(2)).sqrt();
    let discrepancy = if combined > 0.0 { (direct.value - product).abs() / combined } else { 0.0 };
    Ok(InfSupEstimate { direct, inf, sup, product, product_stderr, discrepancy })
}

/// Monte Carlo settings for [`constants_for_theorem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickandsSettings {
    pub n: u64,
    #[serde(default)]
    pub seed: u64,
    /// Grid divisions per interval; default by roughness.
    #[serde(default)]
    pub divisions: Option<usize>,
    #[serde(default = "default_schedule")]
    pub s_schedule: Vec<f64>,
    /// Only read constants from the cache; a miss is an error.
    #[serde(default)]
    pub offline: bool,
}

fn default_schedule() -> Vec<f64> {
    DEFAULT_S_SCHEDULE.to_vec()
}

impl PickandsSettings {
    pub fn new(n: u64, seed: u64) -> Self {
        PickandsSettings { n, seed, divisions: None, s_schedule: default_schedule(), offline: false }
    }
}

/// `V` of the local limit in each regime.
pub fn local_process(model: &VarianceModel, q: QueueParams, regime: Regime) -> Result<ProcessDescriptor> {
    Ok(match regime.class {
        RegimeClass::Zero => ProcessDescriptor::Fbm { hurst: model.alpha0() },
        RegimeClass::Infinite => ProcessDescriptor::Fbm { hurst: model.alpha_inf() },
        RegimeClass::Finite => {
            let ts = critical_constants(model, q)?.tau_star;
            let kappa = (1.0 + q.c * ts.powf(q.beta))
                / (SQRT_2 * regime.phi * ts.powf(2.0 * model.alpha_inf()));
            ProcessDescriptor::Scaled { kappa, model: model.descriptor() }
        }
    })
}

/// Constants needed by the asymptotic evaluators, with their estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub inputs: PickandsInputs,
    pub process: ProcessDescriptor,
    pub estimates: Vec<PickandsEstimate>,
}

/// Estimates `H[0, rho]`, `H^inf[0, rho]` (bounded windows with `rho > 0`) and
/// the rate constant for the local process of `regime`, reusing `cache`
/// entries when present.
pub fn constants_for_theorem(
    model: &VarianceModel,
    q: QueueParams,
    regime: Regime,
    case: HorizonCase,
    settings: &PickandsSettings,
    mut cache: Option<&mut PickandsCache>,
) -> Result<TheoremConstants> {
    let v = local_process(model, q, regime)?;
    let divisions = match settings.divisions {
        Some(0) => return Err(invalid("grid divisions must be positive")),
        Some(d) => d,
        None => v.default_divisions()?,
    };
    let mut estimates = Vec::new();
    let offline = settings.offline;
    let mut lookup = |key: String, compute: &dyn Fn() -> Result<PickandsEstimate>| -> Result<PickandsEstimate> {
        if let Some(c) = cache.as_deref_mut() {
            if let Some(hit) = c.get(&key) {
                return Ok(hit.clone());
            }
            if offline {
                return Err(Error::MissingPickandsInput("cached constant (estimation disabled)"));
            }
            let e = compute()?;
            c.insert(key, e.clone())?;
            Ok(e)
        } else if offline {
            Err(Error::MissingPickandsInput("constant cache (estimation disabled)"))
        } else {
            compute()
        }
    };
    let (n, seed) = (settings.n, settings.seed);
    let mut inputs = PickandsInputs { source: ConstantSource::Estimated, ..Default::default() };
    if let HorizonCase::Bounded { rho } = case {
        if rho > 0.0 {
            let mesh = rho / divisions as f64;
            for phi in [FunctionalDescriptor::sup(rho), FunctionalDescriptor::inf(rho)] {
                let key = cache_key(&v, &phi, ConstantKind::Interval, &[mesh], &[], n, seed);
                let e = lookup(key, &|| estimate_interval_constant(&v, &phi, mesh, n, seed))?;
                estimates.push(e);
            }
        }
    }
    let meshes: Vec<f64> = settings.s_schedule.iter().map(|s| s / divisions as f64).collect();
    let phi = FunctionalDescriptor::sup(*settings.s_schedule.last().unwrap_or(&0.0));
    let key = cache_key(&v, &phi, ConstantKind::Rate, &meshes, &settings.s_schedule, n, seed);
    let rate = lookup(key, &|| {
        estimate_rate_constant(&v, &meshes, &settings.s_schedule, n, seed).map(|r| r.estimate)
    })?;
    estimates.push(rate);

    let mut stderrs = vec![None, None, None];
    for e in &estimates {
        let slot = match (e.constant, e.functional.kind) {
            (ConstantKind::Interval, FunctionalKind::Sup) => 0,
            (ConstantKind::Interval, _) => 1,
            (ConstantKind::Rate, _) => 2,
        };
        let target = [&mut inputs.sup_interval, &mut inputs.inf_interval, &mut inputs.rate];
        *target.into_iter().nth(slot).unwrap() = Some(e.value);
        stderrs[slot] = Some(e.stderr);
    }
    inputs.stderrs = stderrs;
    Ok(TheoremConstants { inputs, process: v, estimates })
}
