use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HitCounts, McConfig};
use crate::asymptotics::QueueParams;
use crate::paths::CirculantSampler;
use crate::rng::stream;
use crate::{Result, VarianceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Exact Gaussian grid paths, suprema over grid points.
    Grid,
    /// Brownian input with linear drain; exact bridge maxima between nodes.
    Brownian,
}

impl Engine {
    pub fn brownian_applies(model: &VarianceModel, q: QueueParams) -> bool {
        model.is_single_term() && model.hursts()[0] == 0.5 && q.beta == 1.0
    }
}

/// Grid layout at the coarsest level.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Plan {
    pub dt0: f64,
    /// Steps covering the observation window.
    pub n_window: usize,
    /// Steps covering the look-ahead horizon.
    pub n_horizon: usize,
}

impl Plan {
    pub fn new(window: f64, horizon: f64, dt: f64) -> Plan {
        let (dt0, n_window) = if window > 0.0 {
            let n = ((window / dt) - 1e-9).ceil().max(1.0) as usize;
            (window / n as f64, n)
        } else {
            (dt, 0)
        };
        let n_horizon = ((horizon / dt0) - 1e-9).ceil().max(1.0) as usize;
        Plan { dt0, n_window, n_horizon }
    }
}

/// Hit counts at `halvings` and the `coarser` levels below it, finest first.
pub(crate) fn simulate(
    model: &VarianceModel,
    q: QueueParams,
    u: f64,
    plan: &Plan,
    halvings: u32,
    coarser: u32,
    cfg: &McConfig,
) -> Result<Vec<HitCounts>> {
    let strides: Vec<usize> = (0..=coarser).map(|l| 1usize << l).collect();
    let empty = || vec![HitCounts::default(); strides.len()];
    let merge = |a: Vec<HitCounts>, b: Vec<HitCounts>| a.into_iter().zip(b).map(|(x, y)| x.add(y)).collect();
    let engine = cfg.engine.unwrap_or(if Engine::brownian_applies(model, q) {
        Engine::Brownian
    } else {
        Engine::Grid
    });
    let round = u64::from(halvings);
    match engine {
        Engine::Grid => {
            let refine = 1usize << halvings;
            let dt = plan.dt0 / refine as f64;
            let n_w = plan.n_window * refine;
            let steps = (plan.n_window + plan.n_horizon) * refine;
            let sampler = CirculantSampler::new(model, steps, dt)?;
            let pairs = cfg.n.div_ceil(2);
            let counts = (0..pairs)
                .into_par_iter()
                .map_init(
                    || Scratch::new(steps),
                    |sc, p| {
                        let mut rng = stream(cfg.seed, round, p);
                        sampler.sample_pair_into(&mut rng, &mut sc.a, &mut sc.b);
                        let mut out = empty();
                        let paths = if 2 * p + 1 < cfg.n { 2 } else { 1 };
                        for which in 0..paths {
                            let inc = if which == 0 { &sc.a } else { &sc.b };
                            cumulate(inc, &mut sc.x);
                            for (slot, &r) in out.iter_mut().zip(&strides) {
                                *slot = slot.add(grid_hits(&sc.x, r, dt * r as f64, n_w / r, q, u, &mut sc.work));
                            }
                        }
                        out
                    },
                )
                .reduce(empty, merge);
            Ok(counts)
        }
        Engine::Brownian => {
            let w = model.leading_weight();
            let counts = (0..cfg.n)
                .into_par_iter()
                .map_init(
                    BrownianScratch::default,
                    |sc, rep| {
                        let mut rng = stream(cfg.seed, round, rep);
                        sc.fill(&mut rng, plan, halvings, w, q.c);
                        strides.iter().map(|&r| sc.hits(r, u)).collect::<Vec<_>>()
                    },
                )
                .reduce(empty, merge);
            Ok(counts)
        }
    }
}

struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    work: Vec<f64>,
}

impl Scratch {
    fn new(steps: usize) -> Self {
        Scratch { a: vec![0.0; steps], b: vec![0.0; steps], x: vec![0.0; steps + 1], work: Vec::new() }
    }
}

fn cumulate(inc: &[f64], x: &mut [f64]) {
    x[0] = 0.0;
    for (k, d) in inc.iter().enumerate() {
        x[k + 1] = x[k] + d;
    }
}

fn classify(q_values: impl Iterator<Item = f64>, u: f64) -> HitCounts {
    let (mut first, mut hi, mut lo) = (f64::NAN, f64::MIN, f64::MAX);
    for (i, v) in q_values.enumerate() {
        if i == 0 {
            first = v;
        }
        hi = hi.max(v);
        lo = lo.min(v);
    }
    let hits = HitCounts { point: u64::from(first > u), sup: u64::from(hi > u), inf: u64::from(lo > u) };
    assert!(hits.inf <= hits.point && hits.point <= hits.sup, "pathwise ordering inf <= Q(0) <= sup violated");
    hits
}

/// Hits of one grid path read at `stride`, with `n_obs` observation steps.
/// `work` is scratch for the suffix maxima.
fn grid_hits(x: &[f64], stride: usize, dt: f64, n_obs: usize, q: QueueParams, u: f64, work: &mut Vec<f64>) -> HitCounts {
    let len = (x.len() - 1) / stride + 1;
    let at = |j: usize| x[j * stride];
    work.clear();
    work.resize(len, 0.0);
    if q.beta == 1.0 {
        // Q(t_i) = max_{j >= i} z_j - z_i with z_j = x_j - c t_j
        let step = q.c * dt;
        let mut m = f64::MIN;
        for j in (0..len).rev() {
            m = m.max(at(j) - step * j as f64);
            work[j] = m;
        }
        classify((0..=n_obs).map(|i| work[i] - (at(i) - step * i as f64)), u)
    } else {
        let xs: Vec<f64> = (0..len).map(at).collect();
        let mut m = f64::MIN;
        for j in (0..len).rev() {
            m = m.max(xs[j]);
            work[j] = m;
        }
        let drain: Vec<f64> = (0..len).map(|k| q.c * (k as f64 * dt).powf(q.beta)).collect();
        classify((0..=n_obs).map(|i| q_at(&xs, work, &drain, i, len - 1)), u)
    }
}

/// Running maximum from the right.
pub(crate) fn suffix_max(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut m = f64::MIN;
    for j in (0..x.len()).rev() {
        m = m.max(x[j]);
        out[j] = m;
    }
    out
}

/// `max_{i <= j <= end} x_j - x_i - drain[j - i]`, stopping once the suffix
/// maximum can no longer beat the drain.
pub(crate) fn q_at(x: &[f64], suffix: &[f64], drain: &[f64], i: usize, end: usize) -> f64 {
    let mut best = 0.0f64;
    for j in i + 1..=end {
        let d = drain[j - i];
        if suffix[j] - x[i] - d <= best {
            break;
        }
        best = best.max(x[j] - x[i] - d);
    }
    best
}

/// Linear drain with an exact `[i, i + n_h]` look-ahead via a monotone deque.
pub(crate) fn sliding_linear(x: &[f64], c_dt: f64, n_obs: usize, n_h: usize) -> Vec<f64> {
    let z = |j: usize| x[j] - c_dt * j as f64;
    let mut deque = std::collections::VecDeque::new();
    let mut out = vec![0.0; n_obs + 1];
    let mut next = 0;
    for i in 0..=n_obs {
        while next <= i + n_h {
            while deque.back().is_some_and(|&b| z(b) <= z(next)) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        while deque.front().is_some_and(|&f| f < i) {
            deque.pop_front();
        }
        out[i] = z(deque[0]) - z(i);
    }
    out
}

/// Window nodes, per-step bridge maxima and the exact supremum after the window.
#[derive(Default)]
struct BrownianScratch {
    nodes: Vec<f64>,
    maxima: Vec<f64>,
    tail_max: f64,
}

/// Maximum of a Brownian bridge from `a` to `b` with total variance `var`
/// (inverse of `P(M > m) = exp(-2 (m - a)(m - b) / var)`).
fn bridge_max(rng: &mut ChaCha8Rng, a: f64, b: f64, var: f64) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    0.5 * (a + b + ((a - b) * (a - b) - 2.0 * var * u.ln()).sqrt())
}

impl BrownianScratch {
    fn fill(&mut self, rng: &mut ChaCha8Rng, plan: &Plan, halvings: u32, w: f64, c: f64) {
        let refine = 1usize << halvings;
        let n_w = plan.n_window * refine;
        let h = plan.dt0 / refine as f64;
        self.nodes.clear();
        self.maxima.clear();
        self.nodes.push(0.0);
        let mut y = 0.0;
        for _ in 0..n_w {
            let z: f64 = rng.sample(StandardNormal);
            let next = y - c * h + (w * h).sqrt() * z;
            self.maxima.push(bridge_max(rng, y, next, w * h));
            self.nodes.push(next);
            y = next;
        }
        let h = plan.dt0;
        let mut top = f64::MIN;
        for _ in 0..plan.n_horizon {
            let z: f64 = rng.sample(StandardNormal);
            let next = y - c * h + (w * h).sqrt() * z;
            top = top.max(bridge_max(rng, y, next, w * h));
            y = next;
        }
        self.tail_max = top;
    }

    fn hits(&self, stride: usize, u: f64) -> HitCounts {
        let n = self.maxima.len() / stride;
        let mut q = vec![0.0; n + 1];
        let mut g = self.tail_max;
        q[n] = g - self.nodes[n * stride];
        for i in (0..n).rev() {
            for m in &self.maxima[i * stride..(i + 1) * stride] {
                g = g.max(*m);
            }
            q[i] = g - self.nodes[i * stride];
        }
        classify(q.into_iter(), u)
    }
}
