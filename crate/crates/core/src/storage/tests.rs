use super::*;
use crate::paths::sample_fbm;

fn q(c: f64, beta: f64) -> QueueParams {
    QueueParams::new(c, beta).unwrap()
}

#[test]
fn horizon_solves_drift_equation() {
    let m = VarianceModel::fbm(0.75).unwrap();
    let h = horizon_for(&m, q(1.0, 1.0), 10.0, 6.0).unwrap();
    // s = 10 + 6 s^0.75 has its root near 1335.6
    assert!((h - 10.0 - 6.0 * h.powf(0.75)).abs() < 1e-6 * h, "h={h}");
    assert!((h - 1335.55).abs() < 0.05, "h={h}");
    assert!((truncation_margin(&m, q(1.0, 1.0), 10.0, h) - 6.0).abs() < 1e-6);

    let bm = VarianceModel::fbm(0.5).unwrap();
    let h = horizon_for(&bm, q(1.0, 1.0), 10.0, 0.0).unwrap();
    assert!((h - 10.0).abs() < 1e-9);
    assert!(horizon_for(&bm, q(1.0, 1.0), -1.0, 6.0).is_err());
}

fn brute_q(x: &[f64], dt: f64, qp: QueueParams, n_obs: usize, n_h: usize) -> Vec<f64> {
    (0..=n_obs)
        .map(|i| {
            (i..=i + n_h)
                .map(|j| x[j] - x[i] - qp.c * ((j - i) as f64 * dt).powf(qp.beta))
                .fold(f64::MIN, f64::max)
        })
        .collect()
}

#[test]
fn q_process_matches_brute_force() {
    let m = VarianceModel::fbm(0.7).unwrap();
    let path = sample_fbm(0.7, 400, 0.1, 3).unwrap();
    for beta in [1.0, 1.6] {
        let qp = q(0.8, beta);
        let s = q_process(&path, &m, qp, 10.0, 25.0).unwrap();
        let want = brute_q(&path.values, 0.1, qp, 100, 250);
        assert_eq!(s.q_values.len(), want.len());
        for (a, b) in s.q_values.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "beta={beta}: {a} vs {b}");
        }
        assert!(s.q_values.iter().all(|&v| v >= 0.0));
    }
    assert!(matches!(
        q_process(&path, &m, q(1.0, 1.0), 30.0, 20.0),
        Err(Error::PathTooShort { .. })
    ));
}

#[test]
fn brownian_point_probability_is_exact() {
    let bm = VarianceModel::fbm(0.5).unwrap();
    let cfg = McConfig::new(40_000, 11);
    for u in [0.5, 1.0] {
        let e = estimate_psi(&bm, q(1.0, 1.0), u, 0.0, Mode::PointZero, &cfg).unwrap();
        let truth = (-2.0 * u).exp();
        assert_eq!(e.engine, Engine::Brownian);
        assert!(e.ci_low <= truth && truth <= e.ci_high, "u={u}: {e:?}");
    }
}

#[test]
fn zero_window_collapses_modes() {
    let m = VarianceModel::fbm(0.7).unwrap();
    let cfg = McConfig::new(2_000, 5).with_mesh(MeshPolicy::Fixed { dt: 0.5 });
    let [sup, point, inf] = estimate_all(&m, q(1.0, 1.0), 2.0, 0.0, &cfg).unwrap();
    assert_eq!(sup.hits, point.hits);
    assert_eq!(inf.hits, point.hits);
}

#[test]
fn estimates_are_reproducible_across_thread_counts() {
    let m = crate::variance::make_fbm_sum(&[0.8, 0.6], &[1.0, 1.0]).unwrap();
    let cfg = McConfig::new(1_001, 42).with_mesh(MeshPolicy::Fixed { dt: 0.5 });
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_all(&m, q(1.0, 1.0), 2.0, 1.0, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(3));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.hits, y.hits);
    }
    assert!(a[2].hits <= a[1].hits && a[1].hits <= a[0].hits);
}

#[test]
fn brownian_engine_agrees_with_fine_grid() {
    // grid suprema approach the exact ones from below as the mesh shrinks
    let bm = VarianceModel::fbm(0.5).unwrap();
    let mut cfg = McConfig::new(20_000, 9).with_mesh(MeshPolicy::Fixed { dt: 0.01 });
    let exact = estimate_psi(&bm, q(1.0, 1.0), 1.0, 0.0, Mode::PointZero, &cfg).unwrap();
    cfg.engine = Some(Engine::Grid);
    let grid = estimate_psi(&bm, q(1.0, 1.0), 1.0, 0.0, Mode::PointZero, &cfg).unwrap();
    assert!(grid.p_hat < exact.p_hat);
    assert!(grid.p_hat > 0.8 * exact.p_hat, "{} vs {}", grid.p_hat, exact.p_hat);
}

#[test]
fn adaptive_mesh_reports_halvings() {
    let m = VarianceModel::fbm(0.75).unwrap();
    let cfg = McConfig::new(2_000, 1);
    let e = estimate_psi(&m, q(1.0, 1.0), 2.0, 1.0, Mode::Sup, &cfg).unwrap();
    assert!(e.halvings >= 1);
    assert!(e.dt > 0.0 && e.horizon > 0.0);
}

#[test]
fn piterbarg_ratios_are_ordered() {
    let bm = VarianceModel::fbm(0.5).unwrap();
    let cfg = McConfig::new(20_000, 3);
    let r = piterbarg_report(&bm, q(1.0, 1.0), 1.0, 2.0, &cfg).unwrap();
    assert!(r.sup_over_point.ratio >= 1.0 && r.point_over_inf.ratio >= 1.0);
    // a window twice the fluctuation scale is far from the Piterbarg limit
    assert!(!r.consistent);
}

#[test]
fn rejects_bad_inputs() {
    let bm = VarianceModel::fbm(0.5).unwrap();
    let cfg = McConfig::new(50, 1);
    assert!(estimate_psi(&bm, q(1.0, 1.0), 1.0, 0.0, Mode::Sup, &cfg).is_err());
    let cfg = McConfig::new(500, 1);
    assert!(estimate_psi(&bm, q(1.0, 1.0), 1.0, -1.0, Mode::Sup, &cfg).is_err());
    let mut forced = cfg;
    forced.engine = Some(Engine::Brownian);
    let m = VarianceModel::fbm(0.7).unwrap();
    assert!(matches!(
        estimate_psi(&m, q(1.0, 1.0), 1.0, 0.0, Mode::Sup, &forced),
        Err(Error::Unsupported(_))
    ));
}
