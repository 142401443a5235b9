//! Deterministic side: regime, critical constants, finite-`u` solvers and
//! the exact tail asymptotics of `sup`/`inf` of the storage process.
//!
//! For a level `u` put `s = u^(1/beta)` and
//!
//! ```text
//! sigma_u(tau) = sigma(s tau) / (sigma(s) (1 + c tau^beta))
//! m(u)         = inf_t u (1 + c t^beta) / sigma(s t)
//! ```
//!
//! The probability that `Q` exceeds `u` somewhere in `[0, T_u]` is governed by
//! the neighbourhood of the maximizer of `sigma_u` and by `Psi(m(u))`.

mod closed_form;
mod horizon;
mod tail;

pub use closed_form::{closed_form_window, eval_corollary_fbm_sum};
pub use horizon::{HorizonCase, HorizonForm, HorizonSpec};
pub use tail::{ln_normal_tail, mills_tail, normal_tail};

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::optimize::{bisect, bracketed_max, golden_section_max};
use crate::{Error, Result, VarianceModel};

/// Drain coefficient `c` and exponent `beta` of `c (s - t)^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueParams {
    pub c: f64,
    pub beta: f64,
}

impl QueueParams {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        let q = QueueParams { c, beta };
        q.check()?;
        Ok(q)
    }

    fn check(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("drain coefficient c={} must be positive", self.c)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("drain exponent beta={} must be positive", self.beta)));
        }
        Ok(())
    }

    /// Checks that `Q` is a.s. finite for `model`, i.e. `beta > alpha_inf`.
    pub fn check_for(&self, model: &VarianceModel) -> Result<()> {
        self.check()?;
        if self.beta <= model.alpha_inf() {
            return Err(Error::InfeasibleDrain { beta: self.beta, alpha_inf: model.alpha_inf() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeClass {
    /// `sigma^2(u^(1/beta)) / u -> 0`: local behaviour of `X` near zero matters.
    Zero,
    /// Finite positive limit: `X` itself (rescaled) is the local process.
    Finite,
    /// Limit is infinite: the large-time index governs the local process.
    Infinite,
}

impl RegimeClass {
    pub fn label(self) -> &'static str {
        match self {
            RegimeClass::Zero => "zero",
            RegimeClass::Finite => "finite",
            RegimeClass::Infinite => "infinite",
        }
    }
}

/// `phi = lim sigma^2(u^(1/beta)) / u` and its class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    #[serde(with = "extended_real")]
    pub phi: f64,
    pub class: RegimeClass,
}

/// Serializes `+inf` as the string `"inf"` so JSON output re-parses.
mod extended_real {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            "inf".serialize(s)
        } else {
            x.serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {t}"))),
        }
    }
}

/// Relative tolerance for treating `2 alpha_inf` and `beta` as equal.
const BOUNDARY_TOL: f64 = 1e-12;

pub fn classify_regime(model: &VarianceModel, beta: f64) -> Result<Regime> {
    if beta <= model.alpha_inf() {
        return Err(Error::InfeasibleDrain { beta, alpha_inf: model.alpha_inf() });
    }
    let lead = 2.0 * model.alpha_inf();
    Ok(if (lead - beta).abs() <= BOUNDARY_TOL * beta {
        Regime { phi: model.leading_weight(), class: RegimeClass::Finite }
    } else if lead < beta {
        Regime { phi: 0.0, class: RegimeClass::Zero }
    } else {
        Regime { phi: f64::INFINITY, class: RegimeClass::Infinite }
    })
}

/// `u`-independent constants of the local expansion around the maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalConstants {
    /// Limiting maximizer of `sigma_u`.
    pub tau_star: f64,
    /// `tau*^(-alpha_inf) beta / (beta - alpha_inf)`.
    pub a: f64,
    /// `tau*^(-(alpha_inf + 2)) alpha_inf beta`.
    pub b_big: f64,
    /// Curvature `b_big / (2 a)`.
    pub b: f64,
}

pub fn critical_constants(model: &VarianceModel, q: QueueParams) -> Result<CriticalConstants> {
    q.check_for(model)?;
    let (al, be, c) = (model.alpha_inf(), q.beta, q.c);
    let tau_star = (al / (c * (be - al))).powf(1.0 / be);
    let a = tau_star.powf(-al) * be / (be - al);
    let b_big = tau_star.powf(-(al + 2.0)) * al * be;

    // the closed form must be the argmax of tau^al / (1 + c tau^be)
    let g = |t: f64| al * t.ln() - (c * t.powf(be)).ln_1p();
    let (coarse, _) = bracketed_max(g, tau_star, 1e-13)?;
    let found = polish_maximizer(|t| al / t - c * be * t.powf(be - 1.0) / (1.0 + c * t.powf(be)), coarse);
    if (found - tau_star).abs() > 1e-10 * tau_star.max(1.0) {
        return Err(Error::Optimizer(format!(
            "closed-form maximizer {tau_star} disagrees with numeric argmax {found}"
        )));
    }
    Ok(CriticalConstants { tau_star, a, b_big, b: b_big / (2.0 * a) })
}

/// Everything the tail formulas need at one level `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalQuantities {
    pub tau_star: f64,
    pub a: f64,
    pub b_big: f64,
    pub b: f64,
    /// Maximizer of `sigma_u` at this `u`.
    pub tau_u: f64,
    /// `-sigma_u''(tau_u) / (2 sigma_u(tau_u))`.
    pub b_u: f64,
    /// `m(u)`.
    pub m_u: f64,
    /// `u (1 + c tau*^beta) / (sigma(u^(1/beta)) tau*^alpha_inf)`.
    pub m_star_u: f64,
    /// Local fluctuation time scale.
    pub delta_u: f64,
    pub u: f64,
}

/// `ln sigma_u(tau)` up to the `tau`-free term `-ln sigma(s)`.
fn log_profile(model: &VarianceModel, q: QueueParams, s: f64, tau: f64) -> f64 {
    0.5 * model.var(s * tau).ln() - (q.c * tau.powf(q.beta)).ln_1p()
}

/// `d/dtau ln sigma_u(tau)`.
fn log_profile_slope(model: &VarianceModel, q: QueueParams, s: f64, tau: f64) -> f64 {
    let x = s * tau;
    0.5 * s * model.dsigma2(x) / model.var(x)
        - q.c * q.beta * tau.powf(q.beta - 1.0) / (1.0 + q.c * tau.powf(q.beta))
}

/// `sigma_u(tau)`.
pub fn scaled_profile(model: &VarianceModel, q: QueueParams, u: f64, tau: f64) -> f64 {
    let s = u.powf(1.0 / q.beta);
    model.sigma(s * tau) / (model.sigma(s) * (1.0 + q.c * tau.powf(q.beta)))
}

/// Level-`u` objective `u (1 + c t^beta) / sigma(u^(1/beta) t)`.
pub fn standardized_level(model: &VarianceModel, q: QueueParams, u: f64, t: f64) -> f64 {
    u * (1.0 + q.c * t.powf(q.beta)) / model.sigma(u.powf(1.0 / q.beta) * t)
}

/// `Delta(u)`: 1 in the finite regime, otherwise the inverse of `sigma` at
/// `sqrt(2) sigma^2(u^(1/beta) tau*) / (u (1 + c tau*^beta))`.
pub fn fluctuation_scale(
    model: &VarianceModel,
    q: QueueParams,
    regime: Regime,
    tau_star: f64,
    u: f64,
) -> Result<f64> {
    if regime.class == RegimeClass::Finite {
        return Ok(1.0);
    }
    let s = u.powf(1.0 / q.beta);
    let x = SQRT_2 * model.var(s * tau_star) / (u * (1.0 + q.c * tau_star.powf(q.beta)));
    model.sigma_inverse(x)
}

pub fn finite_u_quantities(model: &VarianceModel, q: QueueParams, u: f64) -> Result<CriticalQuantities> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(invalid(format!("level u={u} must be positive")));
    }
    let cc = critical_constants(model, q)?;
    let regime = classify_regime(model, q.beta)?;
    let s = u.powf(1.0 / q.beta);
    let ts = cc.tau_star;

    let (coarse, _) = bracketed_max(|t| log_profile(model, q, s, t), ts, 1e-12)?;
    let tau_u = polish_maximizer(|t| log_profile_slope(model, q, s, t), coarse);

    // m(u) from its own minimization, so that the duality with tau_u is a check
    let objective = |t: f64| -standardized_level(model, q, u, t);
    let (_, neg_m) = golden_section_max(objective, tau_u * 0.5, tau_u * 2.0, 1e-12);
    let m_u = -neg_m;

    let f = |t: f64| scaled_profile(model, q, u, t);
    let second = |h: f64| (f(tau_u + h) - 2.0 * f(tau_u) + f(tau_u - h)) / (h * h);
    let h = 1e-4 * tau_u;
    let curvature = (4.0 * second(h / 2.0) - second(h)) / 3.0;
    let b_u = -curvature / (2.0 * f(tau_u));

    let m_star_u = u * (1.0 + q.c * ts.powf(q.beta)) / (model.sigma(s) * ts.powf(model.alpha_inf()));
    let delta_u = fluctuation_scale(model, q, regime, ts, u)?;
    Ok(CriticalQuantities {
        tau_star: ts,
        a: cc.a,
        b_big: cc.b_big,
        b: cc.b,
        tau_u,
        b_u,
        m_u,
        m_star_u,
        delta_u,
        u,
    })
}

/// Refines a golden-section maximizer by bisection on the derivative, which
/// is far better conditioned than the flat objective near its maximum.
fn polish_maximizer(slope: impl Fn(f64) -> f64, guess: f64) -> f64 {
    let mut w = 1e-6 * guess;
    for _ in 0..30 {
        let (lo, hi) = ((guess - w).max(guess * 1e-3), guess + w);
        if slope(lo) > 0.0 && slope(hi) < 0.0 {
            return bisect(&slope, lo, hi, 1e-16 * guess).unwrap_or(guess);
        }
        w *= 4.0;
    }
    guess
}

/// The two algebraically equivalent forms of the common prefactor (without
/// `Delta(u)`):
///
/// - `sqrt(2 a pi / b_big) u^(1/beta - 1) sigma(u^(1/beta) tau*) / (1 + c tau*^beta)`
/// - `sqrt(pi / b) u^(1/beta) / m*(u)`
///
/// They coincide exactly for pure power-law variances and asymptotically otherwise.
pub fn prefactor_forms(model: &VarianceModel, q: QueueParams, u: f64) -> Result<(f64, f64)> {
    let cq = finite_u_quantities(model, q, u)?;
    let ts = cq.tau_star;
    let s = u.powf(1.0 / q.beta);
    let first = (2.0 * cq.a * PI / cq.b_big).sqrt() * u.powf(1.0 / q.beta - 1.0) * model.sigma(s * ts)
        / (1.0 + q.c * ts.powf(q.beta));
    let second = (PI / cq.b).sqrt() * u.powf(1.0 / q.beta) / cq.m_star_u;
    Ok((first, second))
}

/// Scaling `kappa = (1 + c tau*^beta) / (sqrt(2) phi tau*^(2 alpha_inf))` of the
/// local process `kappa X` in the finite regime.
pub fn finite_regime_scale(model: &VarianceModel, q: QueueParams) -> Result<f64> {
    let regime = classify_regime(model, q.beta)?;
    if regime.class != RegimeClass::Finite {
        return Err(Error::Unsupported(format!(
            "local scale kappa only exists in the finite regime, not {}",
            regime.class.label()
        )));
    }
    let ts = critical_constants(model, q)?.tau_star;
    Ok((1.0 + q.c * ts.powf(q.beta)) / (SQRT_2 * regime.phi * ts.powf(2.0 * model.alpha_inf())))
}

/// Which tail function multiplies the prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// `Psi(m(u))`.
    #[default]
    ExactPhi,
    /// `exp(-m^2/2) / (m sqrt(2 pi))`.
    #[serde(alias = "mills")]
    MillsRatio,
}

impl TailMode {
    pub fn eval(self, m: f64) -> Result<f64> {
        match self {
            TailMode::ExactPhi => Ok(normal_tail(m)),
            TailMode::MillsRatio => mills_tail(m),
        }
    }

    /// Natural logarithm of [`TailMode::eval`], finite where the value underflows.
    pub fn ln_eval(self, m: f64) -> Result<f64> {
        match self {
            TailMode::ExactPhi => Ok(ln_normal_tail(m)),
            TailMode::MillsRatio => {
                mills_tail(m)?;
                Ok(-0.5 * m * m - (m * (2.0 * PI).sqrt()).ln())
            }
        }
    }
}

/// Where numeric Pickands constants came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantSource {
    #[default]
    UserSupplied,
    Estimated,
    ClosedForm,
}

/// Numeric Pickands-type constants for the local process of the active regime.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickandsInputs {
    /// `H[0, rho]` (sup over the window).
    #[serde(default)]
    pub sup_interval: Option<f64>,
    /// `H^inf[0, rho]`.
    #[serde(default)]
    pub inf_interval: Option<f64>,
    /// Rate constant `lim H[0, S] / S`.
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub source: ConstantSource,
    /// Standard errors of estimated constants, in the order above.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stderrs: Vec<Option<f64>>,
}

impl PickandsInputs {
    pub fn with_rate(rate: f64) -> Self {
        PickandsInputs { rate: Some(rate), ..Default::default() }
    }

    fn rate(&self) -> Result<f64> {
        self.rate.ok_or(Error::MissingPickandsInput("rate constant"))
    }

    /// `H[0, rho]`, taking `H[0, 0] = 1` when not supplied.
    fn sup_interval(&self, rho: f64) -> Result<f64> {
        match self.sup_interval {
            Some(v) => Ok(v),
            None if rho == 0.0 => Ok(1.0),
            None => Err(Error::MissingPickandsInput("interval constant H[0, rho]")),
        }
    }

    fn inf_interval(&self, rho: f64) -> Result<f64> {
        match self.inf_interval {
            Some(v) => Ok(v),
            None if rho == 0.0 => Ok(1.0),
            None => Err(Error::MissingPickandsInput("inf-interval constant H^inf[0, rho]")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Sup,
    Inf,
}

/// Identifies the asymptotic display that produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremCase {
    pub quantity: Quantity,
    pub regime: RegimeClass,
    /// `true` for the growing-window case (`T_u / Delta(u) -> inf`).
    pub growing_window: bool,
    /// `true` when evaluated through the explicit fBm-sum power-of-`u` form.
    pub closed_form: bool,
}

impl TheoremCase {
    /// Compact tag such as `sup/zero/ii` or `closed/infinite/i`.
    pub fn tag(&self) -> String {
        let head = match (self.closed_form, self.quantity) {
            (true, _) => "closed",
            (false, Quantity::Sup) => "sup",
            (false, Quantity::Inf) => "inf",
        };
        let case = if self.growing_window { "ii" } else { "i" };
        format!("{head}/{}/{case}", self.regime.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantPart {
    pub pickands_factor: f64,
    pub prefactor: f64,
    pub tail_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticResult {
    /// Exactly `pickands_factor * prefactor * tail_factor`.
    pub value: f64,
    /// `ln value`, computed without underflow.
    pub ln_value: f64,
    pub theorem_case: TheoremCase,
    pub regime: Regime,
    pub constant_part: ConstantPart,
    pub tail_mode: TailMode,
    /// Window length `T_u` the value refers to.
    pub window: f64,
    pub warnings: Vec<String>,
}

impl AsymptoticResult {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        theorem_case: TheoremCase,
        regime: Regime,
        pickands_factor: f64,
        prefactor: f64,
        m: f64,
        tail_mode: TailMode,
        window: f64,
        mut warnings: Vec<String>,
    ) -> Result<Self> {
        let tail_factor = tail_mode.eval(m)?;
        if tail_factor == 0.0 {
            warnings.push(format!("tail factor underflows at m(u)={m}; see ln_value"));
        }
        Ok(AsymptoticResult {
            value: pickands_factor * prefactor * tail_factor,
            ln_value: pickands_factor.ln() + prefactor.ln() + tail_mode.ln_eval(m)?,
            theorem_case,
            regime,
            constant_part: ConstantPart { pickands_factor, prefactor, tail_factor },
            tail_mode,
            window,
            warnings,
        })
    }
}

/// Shared state of one evaluation.
struct Setup {
    regime: Regime,
    cq: CriticalQuantities,
    case: HorizonCase,
    window: f64,
    /// `sqrt(2 a pi / b_big) u^(1/beta - 1) sigma(u^(1/beta) tau*) / (1 + c tau*^beta)`.
    base: f64,
    warnings: Vec<String>,
}

fn setup(
    model: &VarianceModel,
    q: QueueParams,
    u: f64,
    horizon: &HorizonSpec,
    constants: &PickandsInputs,
    tail_mode: TailMode,
) -> Result<Setup> {
    horizon.check()?;
    let regime = classify_regime(model, q.beta)?;
    let cq = finite_u_quantities(model, q, u)?;
    let case = horizon.case(model, q, regime, &cq)?;
    let window = horizon.window(&cq);
    let ts = cq.tau_star;
    let s = u.powf(1.0 / q.beta);
    let base = (2.0 * cq.a * PI / cq.b_big).sqrt() * u.powf(1.0 / q.beta - 1.0) * model.sigma(s * ts)
        / (1.0 + q.c * ts.powf(q.beta));
    tail_mode.eval(cq.m_u)?;
    let mut warnings = Vec::new();
    if case == HorizonCase::Growing {
        let limit = horizon.beta1 * cq.m_star_u * cq.m_star_u;
        if window.ln() >= limit {
            warnings.push(format!(
                "growth condition fails at u={u}: ln T_u = {:.4} >= beta1 m*(u)^2 = {limit:.4}",
                window.ln()
            ));
        }
    }
    for (name, se) in ["sup_interval", "inf_interval", "rate"].iter().zip(&constants.stderrs) {
        if let Some(se) = se {
            warnings.push(format!("{name} is a Monte Carlo estimate (stderr {se:.3e})"));
        }
    }
    Ok(Setup { regime, cq, case, window, base, warnings })
}

/// Exact asymptotics of `P(sup_{t in [0, T_u]} Q(t) > u)`.
pub fn eval_psi_sup(
    model: &VarianceModel,
    q: QueueParams,
    u: f64,
    horizon: &HorizonSpec,
    constants: &PickandsInputs,
    tail_mode: TailMode,
) -> Result<AsymptoticResult> {
    let st = setup(model, q, u, horizon, constants, tail_mode)?;
    let rate = constants.rate()?;
    let delta = st.cq.delta_u;
    let (pickands, prefactor, growing) = match st.case {
        HorizonCase::Bounded { rho } => (constants.sup_interval(rho)? * rate, st.base / delta, false),
        HorizonCase::Growing => (rate * rate, st.base * st.window / (delta * delta), true),
    };
    let case = TheoremCase {
        quantity: Quantity::Sup,
        regime: st.regime.class,
        growing_window: growing,
        closed_form: false,
    };
    AsymptoticResult::assemble(case, st.regime, pickands, prefactor, st.cq.m_u, tail_mode, st.window, st.warnings)
}

/// Exact asymptotics of `P(inf_{t in [0, T_u]} Q(t) > u)` (bounded windows only).
pub fn eval_psi_inf(
    model: &VarianceModel,
    q: QueueParams,
    u: f64,
    horizon: &HorizonSpec,
    constants: &PickandsInputs,
    tail_mode: TailMode,
) -> Result<AsymptoticResult> {
    let st = setup(model, q, u, horizon, constants, tail_mode)?;
    let HorizonCase::Bounded { rho } = st.case else {
        return Err(Error::Unsupported(
            "no asymptotics are available for inf over a window with T_u / Delta(u) -> inf".into(),
        ));
    };
    let pickands = constants.inf_interval(rho)? * constants.rate()?;
    let case = TheoremCase {
        quantity: Quantity::Inf,
        regime: st.regime.class,
        growing_window: false,
        closed_form: false,
    };
    AsymptoticResult::assemble(
        case,
        st.regime,
        pickands,
        st.base / st.cq.delta_u,
        st.cq.m_u,
        tail_mode,
        st.window,
        st.warnings,
    )
}

/// Asymptotics of `P(Q(0) > u)`: the sup formula at `rho = 0`.
pub fn eval_psi0(
    model: &VarianceModel,
    q: QueueParams,
    u: f64,
    rate: f64,
    tail_mode: TailMode,
) -> Result<AsymptoticResult> {
    eval_psi_sup(model, q, u, &HorizonSpec::rho_times_delta(0.0), &PickandsInputs::with_rate(rate), tail_mode)
}

/// Window below which the three probabilities `psi_inf`, `psi_0`, `psi_sup`
/// are predicted to be asymptotically equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiterbargWindow {
    pub delta_u: f64,
    /// `Delta(u) / ln(e + u)`.
    pub window: f64,
}

/// Suggested window for the strong Piterbarg property.
///
/// Equivalence requires `T_u / Delta(u) -> 0`; the `1 / ln(e + u)` factor is
/// one such choice. With `T_u / Delta(u) -> rho > 0` the three tails differ by
/// the ratios of `H[0, rho]`, `1` and `H^inf[0, rho]`, so none of the
/// equivalences survive.
pub fn piterbarg_window(model: &VarianceModel, q: QueueParams, u: f64) -> Result<PiterbargWindow> {
    let regime = classify_regime(model, q.beta)?;
    let ts = critical_constants(model, q)?.tau_star;
    let delta_u = fluctuation_scale(model, q, regime, ts, u)?;
    Ok(PiterbargWindow { delta_u, window: delta_u / (std::f64::consts::E + u).ln() })
}

#[cfg(test)]
mod tests;
