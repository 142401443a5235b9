use super::*;
use crate::variance::make_fbm_sum;

fn fbm(h: f64) -> VarianceModel {
    VarianceModel::fbm(h).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn regime_classes() {
    assert_eq!(classify_regime(&fbm(0.3), 1.0).unwrap().class, RegimeClass::Zero);
    let f = classify_regime(&fbm(0.5), 1.0).unwrap();
    assert_eq!((f.class, f.phi), (RegimeClass::Finite, 1.0));
    let w = make_fbm_sum(&[0.5, 0.2], &[3.0, 1.0]).unwrap();
    assert_eq!(classify_regime(&w, 1.0).unwrap().phi, 3.0);
    let i = classify_regime(&fbm(0.75), 1.0).unwrap();
    assert_eq!(i.class, RegimeClass::Infinite);
    assert!(i.phi.is_infinite());
    assert!(matches!(classify_regime(&fbm(0.75), 0.7), Err(Error::InfeasibleDrain { .. })));
}

#[test]
fn regime_json_round_trips_infinity() {
    let r = classify_regime(&fbm(0.75), 1.0).unwrap();
    let s = serde_json::to_string(&r).unwrap();
    assert!(s.contains("\"inf\""));
    let back: Regime = serde_json::from_str(&s).unwrap();
    assert_eq!(back, r);
}

/// Curvature of `g(tau) = tau^al / (1 + c tau^be)` at its maximum by finite
/// differences, independent of the closed form.
fn numeric_curvature(al: f64, c: f64, be: f64, t: f64) -> f64 {
    let g = |x: f64| x.powf(al) / (1.0 + c * x.powf(be));
    let h = 1e-3 * t;
    let d2 = (g(t + h) - 2.0 * g(t) + g(t - h)) / (h * h);
    -d2 / (2.0 * g(t))
}

#[test]
fn critical_constants_examples() {
    let q = QueueParams::new(1.0, 1.0).unwrap();
    let bm = critical_constants(&fbm(0.5), q).unwrap();
    assert!((bm.tau_star - 1.0).abs() < 1e-12);
    assert!((bm.a - 2.0).abs() < 1e-12 && (bm.b_big - 0.5).abs() < 1e-12);
    assert!((bm.b - 0.125).abs() < 1e-12);
    assert!((numeric_curvature(0.5, 1.0, 1.0, 1.0) - 0.125).abs() < 1e-6);
    let f = critical_constants(&fbm(0.75), q).unwrap();
    assert!((f.tau_star - 3.0).abs() < 1e-12);
    for (h, c, be) in [(0.3, 2.0, 1.0), (0.75, 1.0, 1.0), (0.6, 0.5, 1.5)] {
        let cc = critical_constants(&fbm(h), QueueParams::new(c, be).unwrap()).unwrap();
        let num = numeric_curvature(h, c, be, cc.tau_star);
        assert!(rel(cc.b, num) < 1e-5, "{h} {c} {be}: {} vs {num}", cc.b);
    }
    assert!(matches!(
        critical_constants(&fbm(0.75), QueueParams::new(1.0, 0.75).unwrap()),
        Err(Error::InfeasibleDrain { .. })
    ));
}

#[test]
fn finite_u_examples() {
    let q = QueueParams::new(1.0, 1.0).unwrap();
    let bm = finite_u_quantities(&fbm(0.5), q, 100.0).unwrap();
    assert!(rel(bm.m_u, 20.0) < 1e-12);
    assert_eq!(bm.delta_u, 1.0);
    assert!(rel(bm.b_u, 0.125) < 1e-6);
    let rough = finite_u_quantities(&fbm(0.25), q, 100.0).unwrap();
    assert!(rel(rough.delta_u, 1.40625e-5) < 1e-12, "{}", rough.delta_u);
}

#[test]
fn m_u_is_dual_to_tau_u_and_an_infimum() {
    let models = [
        fbm(0.5),
        fbm(0.25),
        fbm(0.75),
        make_fbm_sum(&[0.75, 0.4], &[1.0, 1.0]).unwrap(),
        make_fbm_sum(&[0.45, 0.2], &[2.0, 0.5]).unwrap(),
    ];
    for m in &models {
        for &(c, be) in &[(1.0, 1.0), (2.0, 1.2)] {
            let q = QueueParams::new(c, be).unwrap();
            for u in [10.0, 1e3, 1e6] {
                let cq = finite_u_quantities(m, q, u).unwrap();
                let dual = standardized_level(m, q, u, cq.tau_u);
                assert!(rel(cq.m_u, dual) < 1e-10, "{} u={u}", m.label());
                for t in crate::variance::log_grid(cq.tau_u / 50.0, cq.tau_u * 50.0, 41) {
                    assert!(cq.m_u <= standardized_level(m, q, u, t) * (1.0 + 1e-14));
                }
            }
        }
    }
}

#[test]
fn pure_power_law_maximizer_is_tau_star() {
    for h in [0.2, 0.5, 0.75, 0.9] {
        let q = QueueParams::new(1.5, 1.0).unwrap();
        for u in [1.0, 100.0, 1e6] {
            let cq = finite_u_quantities(&fbm(h), q, u).unwrap();
            assert!(rel(cq.tau_u, cq.tau_star) < 1e-12, "{h} {u}: {} {}", cq.tau_u, cq.tau_star);
        }
    }
}

#[test]
fn mixed_model_solvers_converge() {
    let m = make_fbm_sum(&[0.75, 0.4], &[1.0, 1.0]).unwrap();
    let q = QueueParams::new(1.0, 1.0).unwrap();
    let ladder: Vec<CriticalQuantities> =
        [1e2, 1e4, 1e6].iter().map(|&u| finite_u_quantities(&m, q, u).unwrap()).collect();
    for w in ladder.windows(2) {
        assert!((w[1].tau_u - w[1].tau_star).abs() < (w[0].tau_u - w[0].tau_star).abs());
        assert!((w[1].b_u - w[1].b).abs() < (w[0].b_u - w[0].b).abs());
    }
    let last = ladder.last().unwrap();
    assert!((last.b_u - last.b).abs() <= 0.02 * last.b);
}

#[test]
fn brownian_tail_is_exactly_exponential() {
    for c in [0.5, 1.0, 2.0] {
        let q = QueueParams::new(c, 1.0).unwrap();
        for u in 1..=10 {
            let u = u as f64;
            let r = eval_psi_sup(
                &fbm(0.5),
                q,
                u,
                &HorizonSpec::rho_times_delta(0.0),
                &PickandsInputs::with_rate(2.0 * c * c),
                TailMode::MillsRatio,
            )
            .unwrap();
            assert!(rel(r.value, (-2.0 * c * u).exp()) < 1e-10, "c={c} u={u}");
            let cp = r.constant_part;
            assert_eq!(r.value, cp.pickands_factor * cp.prefactor * cp.tail_factor);
            let p0 = eval_psi0(&fbm(0.5), q, u, 2.0 * c * c, TailMode::MillsRatio).unwrap();
            assert_eq!(p0.value, r.value);
        }
    }
}

#[test]
fn finite_regime_scale_for_brownian() {
    let q = QueueParams::new(1.5, 1.0).unwrap();
    let k = finite_regime_scale(&fbm(0.5), q).unwrap();
    assert!(rel(k, SQRT_2 * 1.5) < 1e-12);
    assert!(finite_regime_scale(&fbm(0.75), q).is_err());
}

#[test]
fn prefactor_forms_agree_for_power_laws() {
    for h in [0.2, 0.3, 0.5, 0.75, 0.9] {
        for &(c, be) in &[(1.0, 1.0), (2.0, 1.0), (0.5, 1.7)] {
            let q = QueueParams::new(c, be).unwrap();
            for u in [10.0, 1e3, 1e6] {
                let (a, b) = prefactor_forms(&fbm(h), q, u).unwrap();
                assert!(rel(a, b) < 1e-12, "H={h} c={c} beta={be} u={u}: {a} {b}");
            }
        }
    }
    let mixed = make_fbm_sum(&[0.75, 0.4], &[1.0, 1.0]).unwrap();
    let q = QueueParams::new(1.0, 1.0).unwrap();
    let gaps: Vec<f64> = [10.0, 1e3, 1e6]
        .iter()
        .map(|&u| {
            let (a, b) = prefactor_forms(&mixed, q, u).unwrap();
            rel(a, b)
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] < 0.01, "{gaps:?}");
}

fn inputs() -> PickandsInputs {
    PickandsInputs {
        sup_interval: Some(1.7),
        inf_interval: Some(0.6),
        rate: Some(0.9),
        ..Default::default()
    }
}

#[test]
fn theorem_matches_closed_form_for_single_fbm() {
    for h in [0.3, 0.5, 0.75] {
        for c in [1.0, 2.0] {
            let q = QueueParams::new(c, 1.0).unwrap();
            for u in [50.0, 200.0] {
                let m = fbm(h);
                let bounded = HorizonSpec::constant(0.0);
                let horizons = [
                    HorizonSpec {
                        form: HorizonForm::Constant { length: closed_form_window(&m, q, u, 1.3).unwrap() },
                        ..bounded
                    },
                    HorizonSpec::rho_times_delta(1.3),
                    HorizonSpec::power_law(1.0, 3.0),
                ];
                for hz in &horizons {
                    for mode in [TailMode::ExactPhi, TailMode::MillsRatio] {
                        let g = eval_psi_sup(&m, q, u, hz, &inputs(), mode).unwrap();
                        let k = eval_corollary_fbm_sum(&m, q, u, hz, &inputs(), mode).unwrap();
                        assert_eq!(g.theorem_case.growing_window, k.theorem_case.growing_window);
                        assert!((k.ln_value - g.ln_value).exp_m1().abs() < 1e-8, "H={h} c={c} u={u} {hz:?}");
                        if g.value > 0.0 {
                            assert!(rel(k.value, g.value) < 1e-8);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn closed_form_window_is_rho_delta_for_single_fbm() {
    let q = QueueParams::new(2.0, 1.0).unwrap();
    for h in [0.3, 0.75] {
        let cq = finite_u_quantities(&fbm(h), q, 200.0).unwrap();
        let w = closed_form_window(&fbm(h), q, 200.0, 0.7).unwrap();
        assert!(rel(w, 0.7 * cq.delta_u) < 1e-12);
    }
}

#[test]
fn closed_form_is_asymptotic_for_sums() {
    let m = make_fbm_sum(&[0.75, 0.4], &[1.0, 1.0]).unwrap();
    let q = QueueParams::new(1.0, 1.0).unwrap();
    let hz = HorizonSpec::power_law(1.0, 1.0);
    let gap = |u: f64| {
        let g = eval_psi_sup(&m, q, u, &hz, &inputs(), TailMode::ExactPhi).unwrap();
        let k = eval_corollary_fbm_sum(&m, q, u, &hz, &inputs(), TailMode::ExactPhi).unwrap();
        assert!(!k.warnings.is_empty());
        (g.ln_value - k.ln_value).abs()
    };
    let gaps = [gap(50.0), gap(1e3), gap(1e6)];
    assert!(gaps[2] < gaps[1] && gaps[1] < gaps[0], "{gaps:?}");
    let weighted = make_fbm_sum(&[0.75], &[2.0]).unwrap();
    assert!(matches!(
        eval_corollary_fbm_sum(&weighted, q, 50.0, &hz, &inputs(), TailMode::ExactPhi),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn bounded_window_prefactor_exponents() {
    let q = QueueParams::new(1.0, 1.0).unwrap();
    let slope = |h: f64| {
        let at = |u: f64| {
            eval_corollary_fbm_sum(&fbm(h), q, u, &HorizonSpec::rho_times_delta(1.0), &inputs(), TailMode::ExactPhi)
                .unwrap()
                .constant_part
                .prefactor
        };
        (at(1e4) / at(1e3)).ln() / 10f64.ln()
    };
    assert!((slope(0.75) - 1.0 / 12.0).abs() < 1e-9);
    assert!((slope(0.5) - 0.5).abs() < 1e-9);
    // the general evaluator sees the same power of u
    let gen = |u: f64| {
        eval_psi_sup(&fbm(0.75), q, u, &HorizonSpec::rho_times_delta(1.0), &inputs(), TailMode::ExactPhi)
            .unwrap()
            .constant_part
            .prefactor
    };
    assert!(((gen(1e4) / gen(1e3)).ln() / 10f64.ln() - 1.0 / 12.0).abs() < 1e-9);
}

#[test]
fn inf_and_sup_coincide_at_zero_window() {
    let q = QueueParams::new(1.0, 1.0).unwrap();
    for m in [fbm(0.3), fbm(0.5), fbm(0.75)] {
        let hz = HorizonSpec::rho_times_delta(0.0);
        let rate = PickandsInputs::with_rate(1.1);
        let s = eval_psi_sup(&m, q, 30.0, &hz, &rate, TailMode::ExactPhi).unwrap();
        let i = eval_psi_inf(&m, q, 30.0, &hz, &rate, TailMode::ExactPhi).unwrap();
        assert_eq!(s.value, i.value);
        let hz1 = HorizonSpec::rho_times_delta(1.0);
        let s1 = eval_psi_sup(&m, q, 30.0, &hz1, &inputs(), TailMode::ExactPhi).unwrap();
        let i1 = eval_psi_inf(&m, q, 30.0, &hz1, &inputs(), TailMode::ExactPhi).unwrap();
        assert!(i1.value < s1.value);
    }
    assert!(matches!(
        eval_psi_inf(&fbm(0.3), q, 30.0, &HorizonSpec::power_law(1.0, 1.0), &inputs(), TailMode::ExactPhi),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn missing_constants_are_reported() {
    let q = QueueParams::new(1.0, 1.0).unwrap();
    let r = eval_psi_sup(&fbm(0.75), q, 10.0, &HorizonSpec::rho_times_delta(1.0), &PickandsInputs::with_rate(1.0), TailMode::ExactPhi);
    assert!(matches!(r, Err(Error::MissingPickandsInput(_))));
    let r = eval_psi_sup(&fbm(0.75), q, 10.0, &HorizonSpec::rho_times_delta(0.0), &PickandsInputs::default(), TailMode::ExactPhi);
    assert!(matches!(r, Err(Error::MissingPickandsInput(_))));
}

#[test]
fn value_is_continuous_as_rho_vanishes() {
    let q = QueueParams::new(1.0, 1.0).unwrap();
    let base = eval_psi_sup(&fbm(0.75), q, 20.0, &HorizonSpec::rho_times_delta(0.0), &PickandsInputs::with_rate(0.8), TailMode::ExactPhi)
        .unwrap()
        .value;
    for rho in [1e-2f64, 1e-4, 1e-6] {
        // any interval constant tending to one as rho -> 0
        let inp = PickandsInputs { sup_interval: Some(1.0 + rho.sqrt()), ..PickandsInputs::with_rate(0.8) };
        let v = eval_psi_sup(&fbm(0.75), q, 20.0, &HorizonSpec::rho_times_delta(rho), &inp, TailMode::ExactPhi)
            .unwrap()
            .value;
        assert!(rel(v, base) <= 1.01 * rho.sqrt());
    }
}

#[test]
fn horizon_case_selection() {
    let q = QueueParams::new(1.0, 1.0).unwrap();
    let case = |m: &VarianceModel, hz: HorizonSpec| {
        let regime = classify_regime(m, 1.0).unwrap();
        let cq = finite_u_quantities(m, q, 50.0).unwrap();
        hz.case(m, q, regime, &cq).unwrap()
    };
    // Delta grows in the infinite regime, shrinks in the zero regime
    assert_eq!(case(&fbm(0.75), HorizonSpec::constant(5.0)), HorizonCase::Bounded { rho: 0.0 });
    assert_eq!(case(&fbm(0.3), HorizonSpec::constant(5.0)), HorizonCase::Growing);
    assert_eq!(case(&fbm(0.5), HorizonSpec::constant(5.0)), HorizonCase::Bounded { rho: 5.0 });
    assert_eq!(case(&fbm(0.5), HorizonSpec::power_law(1.0, 0.5)), HorizonCase::Growing);
    assert_eq!(case(&fbm(0.75), HorizonSpec::power_law(1.0, 0.5)), HorizonCase::Bounded { rho: 0.0 });
    assert_eq!(case(&fbm(0.75), HorizonSpec::power_law(1.0, 0.8)), HorizonCase::Growing);
    assert_eq!(case(&fbm(0.75), HorizonSpec::power_law(1.0, 0.2)), HorizonCase::Bounded { rho: 0.0 });
    let HorizonCase::Bounded { rho } = case(&fbm(0.75), HorizonSpec::power_law(2.0, 2.0 / 3.0)) else {
        panic!("tied exponents must be bounded");
    };
    let cq = finite_u_quantities(&fbm(0.75), q, 50.0).unwrap();
    assert!(rel(rho, 2.0 * 50f64.powf(2.0 / 3.0) / cq.delta_u) < 1e-12);
}

#[test]
fn growth_condition_warns() {
    let q = QueueParams::new(1.0, 1.0).unwrap();
    let big = HorizonSpec::power_law(1.0, 40.0);
    let r = eval_psi_sup(&fbm(0.75), q, 5.0, &big, &inputs(), TailMode::ExactPhi).unwrap();
    assert!(r.warnings.iter().any(|w| w.contains("growth")));
    let ok = HorizonSpec::power_law(1.0, 1.0);
    let r = eval_psi_sup(&fbm(0.75), q, 50.0, &ok, &inputs(), TailMode::ExactPhi).unwrap();
    assert!(r.warnings.is_empty());
}

#[test]
fn horizon_json_is_flat_and_strict() {
    let h: HorizonSpec = serde_json::from_str(r#"{"form":"rho_times_delta","rho":1.0}"#).unwrap();
    assert_eq!(h, HorizonSpec::rho_times_delta(1.0));
    let s = serde_json::to_string(&HorizonSpec::power_law(2.0, 0.5)).unwrap();
    let back: HorizonSpec = serde_json::from_str(&s).unwrap();
    assert_eq!(back, HorizonSpec::power_law(2.0, 0.5));
    assert!(serde_json::from_str::<HorizonSpec>(r#"{"form":"rho_times_delta","rho":1,"x":2}"#).is_err());
    assert!(serde_json::from_str::<HorizonSpec>(r#"{"form":"constant","rho":1}"#).is_err());
    assert!(serde_json::from_str::<HorizonSpec>(r#"{"form":"constant","length":1,"beta1":0.7}"#).is_err());
}

#[test]
fn piterbarg_windows() {
    let q = QueueParams::new(1.0, 1.0).unwrap();
    let w = piterbarg_window(&fbm(0.25), q, 100.0).unwrap();
    assert!(rel(w.window, 1.40625e-5 / (std::f64::consts::E + 100.0).ln()) < 1e-12);
    let f = piterbarg_window(&fbm(0.5), q, 100.0).unwrap();
    assert_eq!(f.delta_u, 1.0);
    // Delta(u) ~ u^((2H-1)/H) for one fBm with beta = 1
    let a = piterbarg_window(&fbm(0.75), q, 1e3).unwrap().delta_u;
    let b = piterbarg_window(&fbm(0.75), q, 1e4).unwrap().delta_u;
    assert!(((b / a).log10() - 2.0 / 3.0).abs() < 1e-12);
}
