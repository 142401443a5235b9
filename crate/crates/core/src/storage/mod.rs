//! Storage-process simulation and Monte Carlo estimation of
//! `psi_0(u) = P(Q(0) > u)`, `P(sup_{[0,T]} Q > u)` and `P(inf_{[0,T]} Q > u)`.
//!
//! Paths start at `X(0) = 0`. Since `Q(t)` only depends on the increments of
//! `X` after `t`, and increments are stationary, `(Q(t))_{t in [0,T]}` built
//! this way has the law of the stationary storage process on `[0, T]`.
//!
//! Two engines share one interface:
//!
//! - the grid engine samples `X` exactly on a uniform grid (circulant
//!   embedding) and evaluates `Q` on that grid, which under-estimates the
//!   continuous suprema;
//! - the Brownian engine (single Brownian component with linear drain)
//!   additionally samples the exact maximum of the Brownian bridge between
//!   grid nodes, so the supremum over `s` in `Q(t)` is exact in continuous
//!   time and only `t` is discretized.

mod engine;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{classify_regime, critical_constants, fluctuation_scale, QueueParams};
use crate::error::invalid;
use crate::optimize::bisect;
use crate::paths::PathGrid;
use crate::stats::{nested_ratio_ci, wilson_interval, RatioCi, Z95};
use crate::{Error, Result, VarianceModel};

pub use engine::Engine;

/// Default number of standard deviations of drift surplus at the horizon.
pub const DEFAULT_SAFETY: f64 = 6.0;

/// Smallest `s` with `c s^beta >= u + safety sigma(s)`, but never less than
/// `u^(1/beta) tau*`.
///
/// Beyond `s` the drain exceeds the level by `safety` standard deviations of
/// the input, so suprema attained later are negligible.
pub fn horizon_for(model: &VarianceModel, q: QueueParams, u: f64, safety: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(invalid(format!("level u={u} must be positive")));
    }
    if !(safety >= 0.0 && safety.is_finite()) {
        return Err(invalid(format!("safety factor {safety} must be finite and >= 0")));
    }
    let ts = critical_constants(model, q)?.tau_star;
    let gap = |s: f64| q.c * s.powf(q.beta) - u - safety * model.sigma(s);
    let mut hi = (u / q.c).powf(1.0 / q.beta).max(1.0);
    while gap(hi) < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Optimizer("horizon equation has no root".into()));
        }
    }
    let root = bisect(gap, 0.0, hi, 1e-13 * hi)?;
    // bisection leaves the root within tolerance on either side; step to the feasible side
    let root = if gap(root) < 0.0 { root * (1.0 + 1e-12) } else { root };
    Ok(root.max(u.powf(1.0 / q.beta) * ts))
}

/// Drift surplus at the horizon end in units of the input's standard deviation.
pub fn truncation_margin(model: &VarianceModel, q: QueueParams, u: f64, horizon: f64) -> f64 {
    (q.c * horizon.powf(q.beta) - u) / model.sigma(horizon)
}

/// `Q` on the observation grid of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageSample {
    /// `Q(0), Q(dt), ...` up to the observation end.
    pub q_values: Vec<f64>,
    /// Length of the look-ahead window in the supremum.
    pub horizon: f64,
    /// See [`truncation_margin`].
    pub truncation_margin: f64,
}

/// `Q(t) = max over grid s in [t, t + horizon] of X(s) - X(t) - c (s-t)^beta`
/// for grid `t <= observe_until`.
pub fn q_process(
    path: &PathGrid,
    model: &VarianceModel,
    q: QueueParams,
    observe_until: f64,
    horizon: f64,
) -> Result<StorageSample> {
    if !(observe_until >= 0.0) || !(horizon > 0.0) {
        return Err(invalid("observation end must be >= 0 and horizon > 0"));
    }
    let dt = path.dt;
    let n_obs = (observe_until / dt + 1e-9).floor() as usize;
    let n_h = (horizon / dt - 1e-9).ceil() as usize;
    let needed = n_obs + n_h + 1;
    if path.len() < needed {
        return Err(Error::PathTooShort { len: path.len(), needed });
    }
    let x = &path.values[..needed];
    let q_values = if q.beta == 1.0 {
        engine::sliding_linear(x, q.c * dt, n_obs, n_h)
    } else {
        let drain: Vec<f64> = (0..=n_h).map(|k| q.c * (k as f64 * dt).powf(q.beta)).collect();
        let suffix = engine::suffix_max(x);
        (0..=n_obs)
            .map(|i| engine::q_at(x, &suffix, &drain, i, i + n_h))
            .collect()
    };
    Ok(StorageSample {
        q_values,
        horizon: n_h as f64 * dt,
        truncation_margin: truncation_margin(model, q, 0.0, n_h as f64 * dt),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `sup_{t in [0,T]} Q(t) > u`.
    Sup,
    /// `inf_{t in [0,T]} Q(t) > u`.
    Inf,
    /// `Q(0) > u`.
    #[serde(alias = "point")]
    PointZero,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Sup => "sup",
            Mode::Inf => "inf",
            Mode::PointZero => "point_zero",
        }
    }
}

/// Grid-step policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshPolicy {
    /// Use exactly this step.
    Fixed { dt: f64 },
    /// Start from `dt` (default `min(Delta(u), u^(1/beta) tau*) / 8`) and halve
    /// until the estimates move by less than half a confidence-interval width.
    Adaptive {
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default = "default_halvings")]
        max_halvings: u32,
    },
}

fn default_halvings() -> u32 {
    3
}

impl Default for MeshPolicy {
    fn default() -> Self {
        MeshPolicy::Adaptive { dt: None, max_halvings: default_halvings() }
    }
}

/// Monte Carlo settings shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n: u64,
    pub seed: u64,
    #[serde(default)]
    pub mesh: MeshPolicy,
    #[serde(default = "default_safety")]
    pub safety: f64,
    /// Force an engine; by default the Brownian engine is used whenever it applies.
    #[serde(default)]
    pub engine: Option<Engine>,
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY
}

impl McConfig {
    pub fn new(n: u64, seed: u64) -> Self {
        McConfig { n, seed, mesh: MeshPolicy::default(), safety: DEFAULT_SAFETY, engine: None }
    }

    pub fn with_mesh(mut self, mesh: MeshPolicy) -> Self {
        self.mesh = mesh;
        self
    }
}

/// A rare-event probability estimate with a Wilson 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mode: Mode,
    pub u: f64,
    /// Observation window `T`.
    pub window: f64,
    pub p_hat: f64,
    pub n: u64,
    pub hits: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub engine: Engine,
    /// Number of mesh halvings applied to the starting step.
    pub halvings: u32,
    pub runtime_seconds: f64,
    pub warnings: Vec<String>,
}

impl McEstimate {
    fn new(mode: Mode, hits: u64, run: &RunInfo) -> Self {
        let (ci_low, ci_high) = wilson_interval(hits, run.n, Z95);
        McEstimate {
            mode,
            u: run.u,
            window: run.window,
            p_hat: hits as f64 / run.n as f64,
            n: run.n,
            hits,
            ci_low,
            ci_high,
            seed: run.seed,
            dt: run.dt,
            horizon: run.horizon,
            engine: run.engine,
            halvings: run.halvings,
            runtime_seconds: run.runtime,
            warnings: run.warnings.clone(),
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Hit counts of the three events on a common path ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HitCounts {
    pub point: u64,
    pub sup: u64,
    pub inf: u64,
}

impl HitCounts {
    pub fn get(&self, mode: Mode) -> u64 {
        match mode {
            Mode::Sup => self.sup,
            Mode::Inf => self.inf,
            Mode::PointZero => self.point,
        }
    }

    fn add(self, o: HitCounts) -> HitCounts {
        HitCounts { point: self.point + o.point, sup: self.sup + o.sup, inf: self.inf + o.inf }
    }
}

struct RunInfo {
    u: f64,
    window: f64,
    n: u64,
    seed: u64,
    dt: f64,
    horizon: f64,
    engine: Engine,
    halvings: u32,
    runtime: f64,
    warnings: Vec<String>,
    hits: HitCounts,
}

/// Default starting step `min(Delta(u), u^(1/beta) tau*) / 8`.
pub fn default_dt(model: &VarianceModel, q: QueueParams, u: f64) -> Result<f64> {
    let regime = classify_regime(model, q.beta)?;
    let ts = critical_constants(model, q)?.tau_star;
    let delta = fluctuation_scale(model, q, regime, ts, u)?;
    Ok(delta.min(u.powf(1.0 / q.beta) * ts) / 8.0)
}

fn run(model: &VarianceModel, q: QueueParams, u: f64, window: f64, cfg: &McConfig) -> Result<RunInfo> {
    let start = Instant::now();
    if !(u > 0.0 && u.is_finite()) {
        return Err(invalid(format!("level u={u} must be positive")));
    }
    if !(window >= 0.0 && window.is_finite()) {
        return Err(invalid(format!("window T={window} must be finite and >= 0")));
    }
    if cfg.n < 100 {
        return Err(invalid(format!("need at least 100 replicates, got {}", cfg.n)));
    }
    q.check_for(model)?;
    let horizon = horizon_for(model, q, u, cfg.safety)?;
    let engine = match cfg.engine {
        Some(Engine::Brownian) if !Engine::brownian_applies(model, q) => {
            return Err(Error::Unsupported("Brownian engine needs one H=1/2 component and beta=1".into()))
        }
        Some(e) => e,
        None if Engine::brownian_applies(model, q) => Engine::Brownian,
        None => Engine::Grid,
    };
    let (dt0, max_halvings, adaptive) = match cfg.mesh {
        MeshPolicy::Fixed { dt } => (dt, 0, false),
        MeshPolicy::Adaptive { dt, max_halvings } => {
            (dt.map_or_else(|| default_dt(model, q, u), Ok)?, max_halvings, true)
        }
    };
    if !(dt0 > 0.0 && dt0.is_finite()) {
        return Err(invalid(format!("grid step {dt0} must be positive")));
    }
    let mut warnings = Vec::new();
    let plan = engine::Plan::new(window, horizon, dt0);

    // Without a window the Brownian engine is exact in continuous time.
    let mesh_free = engine == Engine::Brownian && plan.n_window == 0;
    let (hits, halvings) = if !adaptive || mesh_free || max_halvings == 0 {
        let levels = engine::simulate(model, q, u, &plan, 0, 0, cfg)?;
        (levels[0], 0)
    } else {
        let mut chosen = None;
        let mut last = HitCounts::default();
        for k in 1..=max_halvings {
            let levels = engine::simulate(model, q, u, &plan, k, 1, cfg)?;
            let (fine, coarse) = (levels[0], levels[1]);
            last = fine;
            if mesh_converged(fine, coarse, cfg.n) {
                chosen = Some((fine, k));
                break;
            }
        }
        chosen.unwrap_or_else(|| {
            warnings.push(format!(
                "mesh refinement did not settle within {max_halvings} halvings; reporting the finest grid"
            ));
            (last, max_halvings)
        })
    };
    if engine == Engine::Grid {
        warnings.push("grid suprema under-estimate continuous suprema (lower-biased sup/point estimates)".into());
    }
    let dt = plan.dt0 / f64::from(1u32 << halvings);
    Ok(RunInfo {
        u,
        window,
        n: cfg.n,
        seed: cfg.seed,
        dt,
        horizon,
        engine,
        halvings,
        runtime: start.elapsed().as_secs_f64(),
        warnings,
        hits,
    })
}

/// Finer and coarser estimates differ by less than half a CI width in every mode.
fn mesh_converged(fine: HitCounts, coarse: HitCounts, n: u64) -> bool {
    [Mode::PointZero, Mode::Sup, Mode::Inf].iter().all(|&m| {
        let (lo, hi) = wilson_interval(fine.get(m), n, Z95);
        let diff = (fine.get(m) as f64 - coarse.get(m) as f64).abs() / n as f64;
        diff < 0.5 * (hi - lo)
    })
}

/// Monte Carlo estimate of one tail probability.
pub fn estimate_psi(
    model: &VarianceModel,
    q: QueueParams,
    u: f64,
    window: f64,
    mode: Mode,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let r = run(model, q, u, window, cfg)?;
    Ok(McEstimate::new(mode, r.hits.get(mode), &r))
}

/// All three estimates from one common path ensemble.
pub fn estimate_all(
    model: &VarianceModel,
    q: QueueParams,
    u: f64,
    window: f64,
    cfg: &McConfig,
) -> Result<[McEstimate; 3]> {
    let r = run(model, q, u, window, cfg)?;
    Ok([
        McEstimate::new(Mode::Sup, r.hits.sup, &r),
        McEstimate::new(Mode::PointZero, r.hits.point, &r),
        McEstimate::new(Mode::Inf, r.hits.inf, &r),
    ])
}

/// Strong-Piterbarg diagnostic on common random numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiterbargReport {
    pub sup: McEstimate,
    pub point: McEstimate,
    pub inf: McEstimate,
    /// `psi_sup / psi_0`.
    pub sup_over_point: RatioCi,
    /// `psi_0 / psi_inf`.
    pub point_over_inf: RatioCi,
    /// Both ratio intervals contain 1.
    pub consistent: bool,
}

pub fn piterbarg_report(
    model: &VarianceModel,
    q: QueueParams,
    u: f64,
    window: f64,
    cfg: &McConfig,
) -> Result<PiterbargReport> {
    let [sup, point, inf] = estimate_all(model, q, u, window, cfg)?;
    let sup_over_point = nested_ratio_ci(sup.hits, point.hits);
    let point_over_inf = nested_ratio_ci(point.hits, inf.hits);
    let consistent = sup_over_point.contains(1.0) && point_over_inf.contains(1.0);
    Ok(PiterbargReport { sup, point, inf, sup_over_point, point_over_inf, consistent })
}

#[cfg(test)]
mod tests;
