//! Subcommand bodies. Each returns the rows of its result table.

use std::collections::BTreeMap;

use gse_core::asymptotics::{
    classify_regime, eval_psi0, eval_psi_inf, eval_psi_sup, finite_u_quantities, piterbarg_window,
    AsymptoticResult, ConstantSource, CriticalQuantities, HorizonCase, HorizonForm, PickandsInputs, Regime,
    TailMode,
};
use gse_core::pickands::{constants_for_theorem, PickandsCache, PickandsEstimate, PickandsSettings};
use gse_core::paths::{model_hash, sample_fbm_sum};
use gse_core::storage::{estimate_psi, piterbarg_report, Engine, McEstimate, Mode};
use gse_core::variance::{log_grid, ModelValidationReport};
use gse_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::Checked;

/// Run-wide settings resolved from flags, environment and config.
pub struct Context {
    pub seed: u64,
    pub timestamps: bool,
    pub offline: bool,
    pub cache: Option<PickandsCache>,
}

/// Pickands inputs per horizon case, estimated once per run.
struct Constants<'a> {
    exp: &'a Checked,
    regime: Regime,
    memo: BTreeMap<u64, (PickandsInputs, Vec<PickandsEstimate>)>,
}

impl<'a> Constants<'a> {
    fn new(exp: &'a Checked) -> Result<Self> {
        let regime = classify_regime(&exp.model, exp.queue.beta)?;
        Ok(Constants { exp, regime, memo: BTreeMap::new() })
    }

    fn get(&mut self, case: HorizonCase, ctx: &mut Context) -> Result<PickandsInputs> {
        Ok(self.get_with_estimates(case, ctx)?.0)
    }

    fn get_with_estimates(
        &mut self,
        case: HorizonCase,
        ctx: &mut Context,
    ) -> Result<(PickandsInputs, Vec<PickandsEstimate>)> {
        if let Some(c) = &self.exp.config.pickands.constants {
            return Ok((PickandsInputs { source: ConstantSource::UserSupplied, ..c.clone() }, Vec::new()));
        }
        let key = match case {
            HorizonCase::Bounded { rho } => rho.to_bits(),
            HorizonCase::Growing => u64::MAX,
        };
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let p = &self.exp.config.pickands;
        let settings = PickandsSettings {
            n: p.n,
            seed: ctx.seed,
            divisions: p.divisions,
            s_schedule: p.s_schedule.clone(),
            offline: ctx.offline,
        };
        let tc = constants_for_theorem(&self.exp.model, self.exp.queue, self.regime, case, &settings, ctx.cache.as_mut())?;
        let out = (tc.inputs, tc.estimates);
        self.memo.insert(key, out.clone());
        Ok(out)
    }
}

fn level_quantities(exp: &Checked, u: f64) -> Result<(CriticalQuantities, HorizonCase)> {
    let cq = finite_u_quantities(&exp.model, exp.queue, u)?;
    let regime = classify_regime(&exp.model, exp.queue.beta)?;
    let case = exp.config.horizon.case(&exp.model, exp.queue, regime, &cq)?;
    Ok((cq, case))
}

fn require_levels(exp: &Checked) -> Result<&[f64]> {
    if exp.config.levels.is_empty() {
        return Err(Error::InvalidArgument("config lists no levels".into()));
    }
    Ok(&exp.config.levels)
}

/// Unsupported combinations become row warnings; anything else aborts.
fn only_unsupported(r: Result<AsymptoticResult>) -> Result<Result<AsymptoticResult>> {
    match r {
        Err(e @ Error::Unsupported(_)) => Ok(Err(e)),
        Err(e) => Err(e),
        Ok(a) => Ok(Ok(a)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    pub u: f64,
    pub quantity: String,
    pub theorem: Option<String>,
    pub regime: String,
    pub window: f64,
    pub rho: Option<f64>,
    pub m_u: f64,
    pub delta_u: f64,
    pub value: Option<f64>,
    pub ln_value: Option<f64>,
    pub tail_mode: TailMode,
    pub constants_source: ConstantSource,
    pub sup_interval: Option<f64>,
    pub inf_interval: Option<f64>,
    pub rate: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn asymptotics(exp: &Checked, ctx: &mut Context) -> Result<Vec<AsymptoticsRow>> {
    let mut consts = Constants::new(exp)?;
    let tail = exp.config.tail_mode;
    let mut rows = Vec::new();
    for &u in require_levels(exp)? {
        let (cq, case) = level_quantities(exp, u)?;
        let inputs = consts.get(case, ctx)?;
        let (rho, growing) = match case {
            HorizonCase::Bounded { rho } => (Some(rho), false),
            HorizonCase::Growing => (None, true),
        };
        let regime_label = consts.regime.class.label();
        let row = |quantity: &str, window: f64, rho: Option<f64>, inputs: &PickandsInputs, r: Result<AsymptoticResult>| {
            let base = AsymptoticsRow {
                u,
                quantity: quantity.into(),
                theorem: None,
                regime: regime_label.into(),
                window,
                rho,
                m_u: cq.m_u,
                delta_u: cq.delta_u,
                value: None,
                ln_value: None,
                tail_mode: tail,
                constants_source: inputs.source,
                sup_interval: inputs.sup_interval,
                inf_interval: inputs.inf_interval,
                rate: inputs.rate,
                warnings: Vec::new(),
            };
            match r {
                Ok(a) => AsymptoticsRow {
                    theorem: Some(a.theorem_case.tag()),
                    value: Some(a.value),
                    ln_value: Some(a.ln_value),
                    window: a.window,
                    warnings: a.warnings,
                    ..base
                },
                Err(e) => AsymptoticsRow { warnings: vec![e.to_string()], ..base },
            }
        };
        let horizon = &exp.config.horizon;
        let window = horizon.window(&cq);
        let sup_name = if growing { "psi_sup_ii" } else { "psi_sup_i" };
        let sup = only_unsupported(eval_psi_sup(&exp.model, exp.queue, u, horizon, &inputs, tail))?;
        rows.push(row(sup_name, window, rho, &inputs, sup));
        let inf = only_unsupported(eval_psi_inf(&exp.model, exp.queue, u, horizon, &inputs, tail))?;
        rows.push(row("psi_inf", window, rho, &inputs, inf));
        let point_inputs = consts.get(HorizonCase::Bounded { rho: 0.0 }, ctx)?;
        let rate = point_inputs.rate.ok_or(Error::MissingPickandsInput("rate constant"))?;
        let p0 = only_unsupported(eval_psi0(&exp.model, exp.queue, u, rate, tail))?;
        rows.push(row("psi0", 0.0, Some(0.0), &point_inputs, p0));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRow {
    pub u: f64,
    pub mode: Mode,
    pub window: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
    pub hits: u64,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub engine: Engine,
    pub halvings: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    pub warnings: Vec<String>,
}

impl SimulateRow {
    fn new(e: McEstimate, timestamps: bool) -> Self {
        SimulateRow {
            u: e.u,
            mode: e.mode,
            window: e.window,
            p_hat: e.p_hat,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            n: e.n,
            hits: e.hits,
            seed: e.seed,
            dt: e.dt,
            horizon: e.horizon,
            engine: e.engine,
            halvings: e.halvings,
            runtime_seconds: timestamps.then_some(e.runtime_seconds),
            warnings: e.warnings,
        }
    }
}

fn mc_window(exp: &Checked, mode: Mode, cq: &CriticalQuantities) -> f64 {
    match mode {
        Mode::PointZero => 0.0,
        _ => exp.config.horizon.window(cq),
    }
}

pub fn simulate(exp: &Checked, ctx: &mut Context, dump: Option<&std::path::Path>) -> Result<Vec<SimulateRow>> {
    let mode = exp.config.mc.mode;
    let cfg = exp.mc_config(ctx.seed);
    let mut rows = Vec::new();
    for (i, &u) in require_levels(exp)?.iter().enumerate() {
        let (cq, _) = level_quantities(exp, u)?;
        let window = mc_window(exp, mode, &cq);
        let e = estimate_psi(&exp.model, exp.queue, u, window, mode, &cfg)?;
        if i == 0 {
            if let Some(path) = dump {
                let n = ((e.window + e.horizon) / e.dt).ceil() as usize + 1;
                let grid = sample_fbm_sum(&exp.model, n, e.dt, ctx.seed)?;
                let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
                grid.write_dump(&mut f, model_hash(&exp.model))?;
            }
        }
        rows.push(SimulateRow::new(e, ctx.timestamps));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub u: f64,
    pub mode: Mode,
    pub window: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub asymptotic: f64,
    pub theorem: String,
    /// `p_hat / asymptotic` with the Wilson interval mapped through the same ratio.
    pub ratio: f64,
    pub ratio_low: f64,
    pub ratio_high: f64,
    pub ratio_covers_one: bool,
    pub n: u64,
    pub dt: f64,
    pub warnings: Vec<String>,
}

pub fn compare(exp: &Checked, ctx: &mut Context) -> Result<Vec<CompareRow>> {
    let mode = exp.config.mc.mode;
    let cfg = exp.mc_config(ctx.seed);
    let tail = exp.config.tail_mode;
    let mut consts = Constants::new(exp)?;
    let mut rows = Vec::new();
    for &u in require_levels(exp)? {
        let (cq, case) = level_quantities(exp, u)?;
        let horizon = &exp.config.horizon;
        let asym = match mode {
            Mode::Sup => eval_psi_sup(&exp.model, exp.queue, u, horizon, &consts.get(case, ctx)?, tail)?,
            Mode::Inf => eval_psi_inf(&exp.model, exp.queue, u, horizon, &consts.get(case, ctx)?, tail)?,
            Mode::PointZero => {
                let inputs = consts.get(HorizonCase::Bounded { rho: 0.0 }, ctx)?;
                let rate = inputs.rate.ok_or(Error::MissingPickandsInput("rate constant"))?;
                eval_psi0(&exp.model, exp.queue, u, rate, tail)?
            }
        };
        let window = mc_window(exp, mode, &cq);
        let e = estimate_psi(&exp.model, exp.queue, u, window, mode, &cfg)?;
        let (ratio, ratio_low, ratio_high) = (e.p_hat / asym.value, e.ci_low / asym.value, e.ci_high / asym.value);
        let mut warnings = asym.warnings;
        warnings.extend(e.warnings);
        rows.push(CompareRow {
            u,
            mode,
            window,
            p_hat: e.p_hat,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            asymptotic: asym.value,
            theorem: asym.theorem_case.tag(),
            ratio,
            ratio_low,
            ratio_high,
            ratio_covers_one: ratio_low <= 1.0 && 1.0 <= ratio_high,
            n: e.n,
            dt: e.dt,
            warnings,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiterbargRow {
    pub u: f64,
    pub delta_u: f64,
    pub window: f64,
    pub p_sup: f64,
    pub p_point: f64,
    pub p_inf: f64,
    pub sup_over_point: f64,
    pub sup_over_point_low: f64,
    pub sup_over_point_high: f64,
    pub point_over_inf: f64,
    pub point_over_inf_low: f64,
    pub point_over_inf_high: f64,
    pub consistent: bool,
    pub n: u64,
    pub dt: f64,
    pub warnings: Vec<String>,
}

/// Windows come from the horizon spec when it is a plain constant length,
/// otherwise from the Piterbarg window `Delta(u) / ln(e + u)`.
pub fn piterbarg(exp: &Checked, ctx: &mut Context) -> Result<Vec<PiterbargRow>> {
    let cfg = exp.mc_config(ctx.seed);
    let mut rows = Vec::new();
    for &u in require_levels(exp)? {
        let w = piterbarg_window(&exp.model, exp.queue, u)?;
        let window = match exp.config.horizon.form {
            HorizonForm::Constant { length } => length,
            _ => w.window,
        };
        let r = piterbarg_report(&exp.model, exp.queue, u, window, &cfg)?;
        rows.push(PiterbargRow {
            u,
            delta_u: w.delta_u,
            window,
            p_sup: r.sup.p_hat,
            p_point: r.point.p_hat,
            p_inf: r.inf.p_hat,
            sup_over_point: r.sup_over_point.ratio,
            sup_over_point_low: r.sup_over_point.low,
            sup_over_point_high: r.sup_over_point.high,
            point_over_inf: r.point_over_inf.ratio,
            point_over_inf_low: r.point_over_inf.low,
            point_over_inf_high: r.point_over_inf.high,
            consistent: r.consistent,
            n: r.point.n,
            dt: r.point.dt,
            warnings: r.point.warnings,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickandsRow {
    pub process: String,
    pub constant: String,
    pub functional: String,
    pub interval_t: f64,
    pub interval_s: Option<f64>,
    pub method: String,
    pub value: f64,
    pub stderr: f64,
    pub mesh: f64,
    pub n: u64,
    pub seed: u64,
    pub fine: f64,
    pub coarse: f64,
    pub clips: u64,
    pub holder_g: f64,
    pub holder_alpha: f64,
    pub warnings: Vec<String>,
}

fn label<T: Serialize>(x: &T) -> String {
    match serde_json::to_value(x) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(v) => v.to_string(),
        Err(_) => String::new(),
    }
}

impl From<PickandsEstimate> for PickandsRow {
    fn from(e: PickandsEstimate) -> Self {
        PickandsRow {
            process: label(&e.process),
            constant: label(&e.constant),
            functional: label(&e.functional.kind),
            interval_t: e.functional.interval_t,
            interval_s: e.functional.interval_s,
            method: label(&e.method),
            value: e.value,
            stderr: e.stderr,
            mesh: e.mesh,
            n: e.n,
            seed: e.seed,
            fine: e.fine,
            coarse: e.coarse,
            clips: e.clips,
            holder_g: e.holder_bound.0,
            holder_alpha: e.holder_bound.1,
            warnings: e.warnings,
        }
    }
}

/// Constants for every distinct horizon case among the levels (or the
/// horizon's own `rho` when no levels are given).
pub fn pickands(exp: &Checked, ctx: &mut Context) -> Result<Vec<PickandsRow>> {
    if exp.config.pickands.constants.is_some() {
        return Err(Error::InvalidArgument("constants are user-supplied; nothing to estimate".into()));
    }
    let mut cases = Vec::new();
    if exp.config.levels.is_empty() {
        match exp.config.horizon.form {
            HorizonForm::RhoTimesDelta { rho } => cases.push(HorizonCase::Bounded { rho }),
            _ => return Err(Error::InvalidArgument("config lists no levels".into())),
        }
    }
    for &u in &exp.config.levels {
        let (_, case) = level_quantities(exp, u)?;
        if !cases.contains(&case) {
            cases.push(case);
        }
    }
    let mut consts = Constants::new(exp)?;
    let mut rows: Vec<PickandsRow> = Vec::new();
    for case in cases {
        for e in consts.get_with_estimates(case, ctx)?.1 {
            let row = PickandsRow::from(e);
            if !rows.contains(&row) {
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateRow {
    pub model: String,
    #[serde(flatten)]
    pub report: ModelValidationReport,
}

pub fn validate(exp: &Checked) -> Result<Vec<ValidateRow>> {
    let report = exp.model.validate(&log_grid(0.01, 1.0, 21))?;
    Ok(vec![ValidateRow { model: exp.model.label(), report }])
}
