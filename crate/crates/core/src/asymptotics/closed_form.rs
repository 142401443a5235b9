//! Explicit power-of-`u` forms for sums of independent unit-weight fBm,
//! `sigma^2(t) = sum_i t^(2 H_i)`.
//!
//! With `h` the local index (`H_n` when `2 H_1 < beta`, `H_1` when
//! `2 H_1 > beta`) and `K = 1 + c tau*^beta`:
//!
//! ```text
//! bounded window: H[0,rho] H 2^((h-1)/(2h)) sqrt(a pi / b_big) K^((1-h)/h) tau*^(-H_1 (2-h)/h)
//!                 u^((h + beta - 2 H_1 + H_1 h - beta h) / (beta h)) Psi(m(u))
//! growing window: H^2 2^((h-2)/(2h)) sqrt(a pi / b_big) K^((2-h)/h) tau*^(-H_1 (4-h)/h)
//!                 T_u u^((h + 2 beta - 4 H_1 + H_1 h - beta h) / (beta h)) Psi(m(u))
//! ```
//!
//! and for `2 H_1 = beta` the prefactor is
//! `sqrt(2 a pi / b_big) tau*^(H_1) / K  u^((1 - H_1) / (2 H_1))`, times `T_u`
//! for a growing window. These agree exactly with the general evaluators for
//! a single fBm and asymptotically for sums.

use std::f64::consts::{PI, SQRT_2};

use super::horizon::delta_growth_exponent;
use super::{
    classify_regime, finite_u_quantities, AsymptoticResult, HorizonCase, HorizonSpec, PickandsInputs,
    Quantity, QueueParams, RegimeClass, TailMode, TheoremCase,
};
use crate::{Error, Result, VarianceModel};

fn local_index(model: &VarianceModel, class: RegimeClass) -> f64 {
    match class {
        RegimeClass::Zero => model.alpha0(),
        _ => model.alpha_inf(),
    }
}

/// The window `T_u` whose rescaling `T_u u^((beta - 2 H_1)/(beta h))` equals
/// `rho (sqrt(2) tau*^(2 H_1) / K)^(1/h)`; for one fBm this is `rho Delta(u)`.
pub fn closed_form_window(model: &VarianceModel, q: QueueParams, u: f64, rho: f64) -> Result<f64> {
    let regime = classify_regime(model, q.beta)?;
    let cq = finite_u_quantities(model, q, u)?;
    if regime.class == RegimeClass::Finite {
        return Ok(rho);
    }
    let h = local_index(model, regime.class);
    let h1 = model.alpha_inf();
    let ts = cq.tau_star;
    let k = 1.0 + q.c * ts.powf(q.beta);
    let scale = (SQRT_2 * ts.powf(2.0 * h1) / k).powf(1.0 / h);
    Ok(rho * scale * u.powf(delta_growth_exponent(model, q, regime)))
}

/// Tail asymptotics of `sup_{[0, T_u]} Q` through the explicit fBm-sum forms.
pub fn eval_corollary_fbm_sum(
    model: &VarianceModel,
    q: QueueParams,
    u: f64,
    horizon: &HorizonSpec,
    constants: &PickandsInputs,
    tail_mode: TailMode,
) -> Result<AsymptoticResult> {
    if !model.has_unit_weights() {
        return Err(Error::Unsupported("closed forms assume unit weights".into()));
    }
    horizon.check()?;
    let regime = classify_regime(model, q.beta)?;
    let cq = finite_u_quantities(model, q, u)?;
    let case = horizon.case(model, q, regime, &cq)?;
    let window = horizon.window(&cq);
    let rate = constants.rate()?;
    let (h1, be) = (model.alpha_inf(), q.beta);
    let ts = cq.tau_star;
    let k = 1.0 + q.c * ts.powf(be);
    let root = (cq.a * PI / cq.b_big).sqrt();

    let growing = case == HorizonCase::Growing;
    let (pickands, prefactor) = match (regime.class, case) {
        (RegimeClass::Finite, HorizonCase::Bounded { rho }) => {
            let pre = SQRT_2 * root * ts.powf(h1) / k * u.powf((1.0 - h1) / (2.0 * h1));
            (constants.sup_interval(rho)? * rate, pre)
        }
        (RegimeClass::Finite, HorizonCase::Growing) => {
            let pre = SQRT_2 * root * ts.powf(h1) / k * window * u.powf((1.0 - h1) / (2.0 * h1));
            (rate * rate, pre)
        }
        (class, HorizonCase::Bounded { rho }) => {
            let h = local_index(model, class);
            let pre = 2f64.powf((h - 1.0) / (2.0 * h)) * root * k.powf((1.0 - h) / h)
                / ts.powf(h1 * (2.0 - h) / h)
                * u.powf((h + be - 2.0 * h1 + h1 * h - be * h) / (be * h));
            (constants.sup_interval(rho)? * rate, pre)
        }
        (class, HorizonCase::Growing) => {
            let h = local_index(model, class);
            let pre = 2f64.powf((h - 2.0) / (2.0 * h)) * root * k.powf((2.0 - h) / h)
                / ts.powf(h1 * (4.0 - h) / h)
                * window
                * u.powf((h + 2.0 * be - 4.0 * h1 + h1 * h - be * h) / (be * h));
            (rate * rate, pre)
        }
    };
    let mut warnings = Vec::new();
    if !model.is_single_term() {
        warnings.push("closed form differs from the general evaluator by slowly varying factors".into());
    }
    let theorem_case = TheoremCase {
        quantity: Quantity::Sup,
        regime: regime.class,
        growing_window: growing,
        closed_form: true,
    };
    AsymptoticResult::assemble(theorem_case, regime, pickands, prefactor, cq.m_u, tail_mode, window, warnings)
}
