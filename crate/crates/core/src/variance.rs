//! Variance functions of centered stationary-increment Gaussian inputs.
//!
//! Half-index convention: `sigma^2` is regularly varying with index `2 alpha`
//! at each end, so `sigma(t)` behaves like `t^alpha`. For a sum of independent
//! fBm, `alpha_0` is the smallest and `alpha_inf` the largest Hurst index.

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{optimize, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `sigma^2(t) = sum_i w_i t^(2 H_i)` for independent fBm components.
    FbmSum,
    /// `sigma^2(t) = w t^(2H)`.
    GeneralPowerLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceModel {
    kind: ModelKind,
    /// Strictly decreasing.
    hursts: Vec<f64>,
    weights: Vec<f64>,
    alpha0: f64,
    alpha_inf: f64,
}

/// Serialized form used by experiment configs:
/// `{"type":"fbm_sum","hursts":[...],"weights":[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelDescriptor {
    FbmSum {
        hursts: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    PowerLaw {
        hurst: f64,
        #[serde(default = "one")]
        weight: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ModelDescriptor {
    pub fn build(&self) -> Result<VarianceModel> {
        match self {
            ModelDescriptor::FbmSum { hursts, weights } => {
                let w = weights.clone().unwrap_or_else(|| vec![1.0; hursts.len()]);
                make_fbm_sum(hursts, &w)
            }
            ModelDescriptor::PowerLaw { hurst, weight } => VarianceModel::power_law(*weight, *hurst),
        }
    }
}

/// Builds `sigma^2(t) = sum_i w_i t^(2 H_i)`.
///
/// Components are sorted by decreasing Hurst index; equal indices are rejected.
pub fn make_fbm_sum(hursts: &[f64], weights: &[f64]) -> Result<VarianceModel> {
    if hursts.is_empty() {
        return Err(Error::EmptyModel);
    }
    if hursts.len() != weights.len() {
        return Err(Error::LengthMismatch { hursts: hursts.len(), weights: weights.len() });
    }
    for &h in hursts {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::HurstOutOfRange(h));
        }
    }
    for &w in weights {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::NonPositiveWeight(w));
        }
    }
    let mut pairs: Vec<(f64, f64)> = hursts.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateHurst(w[0].0));
        }
    }
    let (hursts, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(VarianceModel {
        kind: ModelKind::FbmSum,
        alpha0: *hursts.last().unwrap(),
        alpha_inf: hursts[0],
        hursts,
        weights,
    })
}

impl VarianceModel {
    /// Standard fBm with Hurst index `hurst`.
    pub fn fbm(hurst: f64) -> Result<Self> {
        make_fbm_sum(&[hurst], &[1.0])
    }

    pub fn power_law(weight: f64, hurst: f64) -> Result<Self> {
        let mut m = make_fbm_sum(&[hurst], &[weight])?;
        m.kind = ModelKind::GeneralPowerLaw;
        Ok(m)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn hursts(&self) -> &[f64] {
        &self.hursts
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn alpha_inf(&self) -> f64 {
        self.alpha_inf
    }

    /// Weight of the largest-Hurst component.
    pub fn leading_weight(&self) -> f64 {
        self.weights[0]
    }

    /// Weight of the smallest-Hurst component.
    pub fn trailing_weight(&self) -> f64 {
        *self.weights.last().unwrap()
    }

    pub fn is_single_term(&self) -> bool {
        self.hursts.len() == 1
    }

    pub fn has_unit_weights(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    pub fn descriptor(&self) -> ModelDescriptor {
        match self.kind {
            ModelKind::FbmSum => ModelDescriptor::FbmSum {
                hursts: self.hursts.clone(),
                weights: Some(self.weights.clone()),
            },
            ModelKind::GeneralPowerLaw => ModelDescriptor::PowerLaw {
                hurst: self.hursts[0],
                weight: self.weights[0],
            },
        }
    }

    /// Short label such as `fbm_sum[0.75,0.4]`.
    pub fn label(&self) -> String {
        let hs: Vec<String> = self.hursts.iter().map(|h| format!("{h}")).collect();
        let mut s = format!("fbm_sum[{}]", hs.join(";"));
        if !self.has_unit_weights() {
            let ws: Vec<String> = self.weights.iter().map(|w| format!("{w}")).collect();
            s.push_str(&format!("w[{}]", ws.join(";")));
        }
        s
    }

    /// `sigma^2(t)`; errors on negative `t`.
    pub fn sigma2(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.var(t))
    }

    /// `sigma^2(t)` without the sign check; `t` must be non-negative.
    #[inline]
    pub fn var(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        self.hursts
            .iter()
            .zip(&self.weights)
            .map(|(h, w)| w * t.powf(2.0 * h))
            .sum()
    }

    /// `sigma(t)`.
    #[inline]
    pub fn sigma(&self, t: f64) -> f64 {
        self.var(t).sqrt()
    }

    /// First derivative of `sigma^2` for `t > 0`.
    pub fn dsigma2(&self, t: f64) -> f64 {
        self.hursts
            .iter()
            .zip(&self.weights)
            .map(|(h, w)| w * 2.0 * h * t.powf(2.0 * h - 1.0))
            .sum()
    }

    /// Second derivative of `sigma^2` for `t > 0`.
    pub fn ddsigma2(&self, t: f64) -> f64 {
        self.hursts
            .iter()
            .zip(&self.weights)
            .map(|(h, w)| w * 2.0 * h * (2.0 * h - 1.0) * t.powf(2.0 * h - 2.0))
            .sum()
    }

    /// Generalized inverse of `sigma`: the `t` with `sigma(t) = x`.
    pub fn sigma_inverse(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(invalid(format!("sigma_inverse of negative value {x}")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        if self.is_single_term() {
            let (h, w) = (self.hursts[0], self.weights[0]);
            return Ok((x * x / w).powf(0.5 / h));
        }
        // Per-component inverses bracket the root: sigma^2 >= w_i t^(2H_i) for each i.
        let target = x * x;
        let n = self.hursts.len() as f64;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for (h, w) in self.hursts.iter().zip(&self.weights) {
            lo = lo.min((target / (n * w)).powf(0.5 / h));
            hi = hi.max((target / w).powf(0.5 / h));
        }
        // bisect on log t for uniform relative precision
        let f = |lt: f64| (self.var(lt.exp()) / target).ln();
        let lt = optimize::bisect(f, lo.ln() - 1.0, hi.ln() + 1.0, 1e-15)?;
        Ok(lt.exp())
    }

    /// Checks the local bounds `c1 t^2 <= sigma^2(t) <= c2 t^gamma` on a
    /// near-zero grid and fits the regular-variation half-indices.
    pub fn validate(&self, near_zero_grid: &[f64]) -> Result<ModelValidationReport> {
        validate_model(self, near_zero_grid)
    }
}

/// Outcome of [`validate_model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelValidationReport {
    pub c1: f64,
    pub c2: f64,
    pub gamma: f64,
    pub fitted_alpha0: f64,
    pub fitted_alpha_inf: f64,
    pub declared_alpha0: f64,
    pub declared_alpha_inf: f64,
    pub passed: bool,
}

/// Window for the small-time index fit.
pub const ALPHA0_FIT_WINDOW: (f64, f64) = (1e-6, 1e-3);
/// Window for the large-time index fit.
pub const ALPHA_INF_FIT_WINDOW: (f64, f64) = (1e3, 1e6);
/// Tolerance on fitted versus declared half-indices.
pub const INDEX_FIT_TOLERANCE: f64 = 0.05;

pub fn validate_model(model: &VarianceModel, near_zero_grid: &[f64]) -> Result<ModelValidationReport> {
    if near_zero_grid.is_empty() {
        return Err(invalid("near-zero grid is empty"));
    }
    if let Some(&t) = near_zero_grid.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        return Err(invalid(format!("grid point {t} outside (0, 1]")));
    }
    let c1 = near_zero_grid
        .iter()
        .map(|&t| model.var(t) / (t * t))
        .fold(f64::INFINITY, f64::min);
    let gamma = 0.95 * (2.0 * model.alpha0()).min(2.0);
    let c2 = near_zero_grid
        .iter()
        .map(|&t| model.var(t) / t.powf(gamma))
        .fold(0.0, f64::max);
    let fitted_alpha0 = fit_half_index(model, ALPHA0_FIT_WINDOW);
    let fitted_alpha_inf = fit_half_index(model, ALPHA_INF_FIT_WINDOW);
    let bounds_hold = near_zero_grid.iter().all(|&t| {
        let v = model.var(t);
        c1 * t * t <= v * (1.0 + 1e-12) && v <= c2 * t.powf(gamma) * (1.0 + 1e-12)
    });
    let passed = c1 > 0.0
        && c2.is_finite()
        && bounds_hold
        && (fitted_alpha0 - model.alpha0()).abs() <= INDEX_FIT_TOLERANCE
        && (fitted_alpha_inf - model.alpha_inf()).abs() <= INDEX_FIT_TOLERANCE;
    Ok(ModelValidationReport {
        c1,
        c2,
        gamma,
        fitted_alpha0,
        fitted_alpha_inf,
        declared_alpha0: model.alpha0(),
        declared_alpha_inf: model.alpha_inf(),
        passed,
    })
}

/// Half the log-log slope of `sigma^2` over a geometric grid on `window`.
fn fit_half_index(model: &VarianceModel, window: (f64, f64)) -> f64 {
    let k = 31;
    let (la, lb) = (window.0.ln(), window.1.ln());
    let x: Vec<f64> = (0..k).map(|i| la + (lb - la) * i as f64 / (k - 1) as f64).collect();
    let y: Vec<f64> = x.iter().map(|&lt| model.var(lt.exp()).ln()).collect();
    crate::stats::fit_line(&x, &y).slope / 2.0
}

/// Geometric grid of `k` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let (la, lb) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| (la + (lb - la) * i as f64 / (k.max(2) - 1) as f64).exp())
        .collect()
}
