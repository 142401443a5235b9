use gse_core::asymptotics::*;
use gse_core::stats::wilson_interval;
use gse_core::variance::make_fbm_sum;
use gse_core::VarianceModel;
use proptest::prelude::*;

fn two_term() -> impl Strategy<Value = VarianceModel> {
    (0.55f64..0.95, 0.05f64..0.5, 0.1f64..10.0, 0.1f64..10.0)
        .prop_map(|(h1, h2, w1, w2)| make_fbm_sum(&[h1, h2], &[w1, w2]).unwrap())
}

proptest! {
    #[test]
    fn sigma_inverse_round_trips(m in two_term(), lt in -8.0f64..8.0) {
        let t = lt.exp();
        let back = m.sigma_inverse(m.sigma(t)).unwrap();
        prop_assert!((back / t - 1.0).abs() < 1e-9, "{t} -> {back}");
    }

    #[test]
    fn variance_is_increasing(m in two_term(), lt in -8.0f64..8.0, step in 0.01f64..2.0) {
        let t = lt.exp();
        prop_assert!(m.var(t * (1.0 + step)) > m.var(t));
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(n in 1u64..1_000_000, frac in 0.0f64..=1.0) {
        let hits = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(hits, n, 1.96);
        let p = hits as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }

    #[test]
    fn inf_below_point_below_sup(h in 0.2f64..0.95, c in 0.5f64..3.0, u in 5.0f64..500.0, rho in 0.1f64..4.0) {
        let m = VarianceModel::fbm(h).unwrap();
        let q = QueueParams::new(c, 1.0).unwrap();
        let inputs = PickandsInputs {
            sup_interval: Some(1.0 + rho),
            inf_interval: Some(1.0 / (1.0 + rho)),
            rate: Some(0.8),
            ..Default::default()
        };
        let hz = HorizonSpec::rho_times_delta(rho);
        let sup = eval_psi_sup(&m, q, u, &hz, &inputs, TailMode::ExactPhi).unwrap();
        let inf = eval_psi_inf(&m, q, u, &hz, &inputs, TailMode::ExactPhi).unwrap();
        let point = eval_psi0(&m, q, u, 0.8, TailMode::ExactPhi).unwrap();
        prop_assert!(inf.ln_value < point.ln_value && point.ln_value < sup.ln_value);
    }
}
