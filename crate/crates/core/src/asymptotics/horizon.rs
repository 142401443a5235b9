//! Observation windows `T_u` and the bounded/growing case split.

use serde::{Deserialize, Serialize};

use super::{CriticalQuantities, QueueParams, Regime, RegimeClass};
use crate::error::invalid;
use crate::{Result, VarianceModel};

/// How `T_u` depends on `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum HorizonForm {
    /// `T_u = length` for every `u`.
    Constant { length: f64 },
    /// `T_u = rho Delta(u)`.
    RhoTimesDelta { rho: f64 },
    /// `T_u = coefficient u^exponent`.
    PowerLaw { coefficient: f64, exponent: f64 },
}

/// Serialized flat, e.g. `{"form":"rho_times_delta","rho":1.0,"beta1":0.25}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlatHorizon", into = "FlatHorizon")]
pub struct HorizonSpec {
    pub form: HorizonForm,
    /// Growth-check exponent in `T_u = o(exp(beta1 m*(u)^2))`, in `(0, 1/2)`.
    pub beta1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FormTag {
    Constant,
    RhoTimesDelta,
    PowerLaw,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatHorizon {
    form: FormTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coefficient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponent: Option<f64>,
    #[serde(default = "default_beta1")]
    beta1: f64,
}

impl TryFrom<FlatHorizon> for HorizonSpec {
    type Error = String;

    fn try_from(f: FlatHorizon) -> std::result::Result<Self, String> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| format!("horizon form needs `{name}`"));
        let stray = |present: bool, name: &str| {
            if present {
                Err(format!("`{name}` does not apply to this horizon form"))
            } else {
                Ok(())
            }
        };
        let form = match f.form {
            FormTag::Constant => {
                stray(f.rho.is_some() || f.coefficient.is_some() || f.exponent.is_some(), "rho/coefficient/exponent")?;
                HorizonForm::Constant { length: need(f.length, "length")? }
            }
            FormTag::RhoTimesDelta => {
                stray(f.length.is_some() || f.coefficient.is_some() || f.exponent.is_some(), "length/coefficient/exponent")?;
                HorizonForm::RhoTimesDelta { rho: need(f.rho, "rho")? }
            }
            FormTag::PowerLaw => {
                stray(f.length.is_some() || f.rho.is_some(), "length/rho")?;
                HorizonForm::PowerLaw {
                    coefficient: need(f.coefficient, "coefficient")?,
                    exponent: need(f.exponent, "exponent")?,
                }
            }
        };
        let spec = HorizonSpec { form, beta1: f.beta1 };
        spec.check().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

impl From<HorizonSpec> for FlatHorizon {
    fn from(h: HorizonSpec) -> Self {
        let mut f = FlatHorizon {
            form: FormTag::Constant,
            length: None,
            rho: None,
            coefficient: None,
            exponent: None,
            beta1: h.beta1,
        };
        match h.form {
            HorizonForm::Constant { length } => f.length = Some(length),
            HorizonForm::RhoTimesDelta { rho } => {
                f.form = FormTag::RhoTimesDelta;
                f.rho = Some(rho);
            }
            HorizonForm::PowerLaw { coefficient, exponent } => {
                f.form = FormTag::PowerLaw;
                f.coefficient = Some(coefficient);
                f.exponent = Some(exponent);
            }
        }
        f
    }
}

fn default_beta1() -> f64 {
    0.25
}

/// Asymptotic relation between `T_u` and `Delta(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum HorizonCase {
    /// `T_u / Delta(u) -> rho` with `rho` finite.
    Bounded { rho: f64 },
    /// `T_u / Delta(u) -> inf`.
    Growing,
}

impl HorizonSpec {
    pub fn rho_times_delta(rho: f64) -> Self {
        HorizonSpec { form: HorizonForm::RhoTimesDelta { rho }, beta1: default_beta1() }
    }

    pub fn constant(length: f64) -> Self {
        HorizonSpec { form: HorizonForm::Constant { length }, beta1: default_beta1() }
    }

    pub fn power_law(coefficient: f64, exponent: f64) -> Self {
        HorizonSpec { form: HorizonForm::PowerLaw { coefficient, exponent }, beta1: default_beta1() }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.beta1 > 0.0 && self.beta1 < 0.5) {
            return Err(invalid(format!("beta1={} must lie in (0, 1/2)", self.beta1)));
        }
        match self.form {
            HorizonForm::Constant { length } if !(length >= 0.0 && length.is_finite()) => {
                Err(invalid(format!("window length {length} must be finite and >= 0")))
            }
            HorizonForm::RhoTimesDelta { rho } if !(rho >= 0.0 && rho.is_finite()) => {
                Err(invalid(format!("rho={rho} must be finite and >= 0")))
            }
            HorizonForm::PowerLaw { coefficient, exponent }
                if !(coefficient >= 0.0 && coefficient.is_finite() && exponent.is_finite()) =>
            {
                Err(invalid(format!("power-law window {coefficient} u^{exponent} is invalid")))
            }
            _ => Ok(()),
        }
    }

    /// `T_u` at the level of `cq`.
    pub fn window(&self, cq: &CriticalQuantities) -> f64 {
        match self.form {
            HorizonForm::Constant { length } => length,
            HorizonForm::RhoTimesDelta { rho } => rho * cq.delta_u,
            HorizonForm::PowerLaw { coefficient, exponent } => coefficient * cq.u.powf(exponent),
        }
    }

    /// Decides the case from the `u`-growth of `T_u` against that of `Delta(u)`.
    ///
    /// `Delta(u)` grows like `u^e` with `e = (2 alpha_inf / beta - 1) / h`, where
    /// `h` is `alpha_0` in the zero regime and `alpha_inf` in the infinite one
    /// (`e = 0` in the finite regime). When the exponents tie, `rho` is read
    /// off as `T_u / Delta(u)` at the current level.
    pub fn case(
        &self,
        model: &VarianceModel,
        q: QueueParams,
        regime: Regime,
        cq: &CriticalQuantities,
    ) -> Result<HorizonCase> {
        self.check()?;
        let growth = delta_growth_exponent(model, q, regime);
        let compare = |exponent: f64, rho: f64| {
            if (exponent - growth).abs() <= 1e-12 * growth.abs().max(1.0) {
                HorizonCase::Bounded { rho }
            } else if exponent < growth {
                HorizonCase::Bounded { rho: 0.0 }
            } else {
                HorizonCase::Growing
            }
        };
        Ok(match self.form {
            HorizonForm::RhoTimesDelta { rho } => HorizonCase::Bounded { rho },
            HorizonForm::Constant { length } => {
                if length == 0.0 {
                    HorizonCase::Bounded { rho: 0.0 }
                } else {
                    compare(0.0, length / cq.delta_u)
                }
            }
            HorizonForm::PowerLaw { coefficient, exponent } => {
                if coefficient == 0.0 {
                    HorizonCase::Bounded { rho: 0.0 }
                } else {
                    compare(exponent, self.window(cq) / cq.delta_u)
                }
            }
        })
    }
}

/// Exponent `e` with `Delta(u)` regularly varying of index `e`.
pub(crate) fn delta_growth_exponent(model: &VarianceModel, q: QueueParams, regime: Regime) -> f64 {
    let local = match regime.class {
        RegimeClass::Finite => return 0.0,
        RegimeClass::Zero => model.alpha0(),
        RegimeClass::Infinite => model.alpha_inf(),
    };
    (2.0 * model.alpha_inf() / q.beta - 1.0) / local
}
