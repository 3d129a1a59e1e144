use psireg::simulation::{
    calibrate_censoring_rate, child_rng, contaminate, emit_curve_data, gen_covariate_path,
    gen_dataset, run_coverage_study, run_gmse_study, select_bandwidth, simulate_replication,
    BandwidthPolicy, Contamination, ContaminationMode, Model, Scenario,
};
use psireg::{EstimatorConfig, KernelFamily, PsiSpec};

fn stationary_moments(path: &[f64]) -> (f64, f64) {
    let n = path.len() as f64;
    let m1 = path.iter().sum::<f64>() / n;
    let m2 = path.iter().map(|x| x * x).sum::<f64>() / n;
    (m1, m2)
}

#[test]
fn covariate_path_has_stationary_moments() {
    let path = gen_covariate_path(100_000, &mut child_rng(5, 0));
    let (m1, m2) = stationary_moments(&path);
    // mean 0.5 / 0.6, second moment var + mean^2 with var = 0.25 / 0.84
    assert!((m1 - 5.0 / 6.0).abs() < 0.01, "mean {m1}");
    assert!(
        (m2 - (0.25 / 0.84 + 25.0 / 36.0)).abs() < 0.02,
        "second moment {m2}"
    );
    // nothing lands in the gap between the two pieces of the support
    assert!(path
        .iter()
        .all(|&x| !(x > 2.0 / 3.0 + 1e-12 && x < 1.0 - 1e-12)));
}

#[test]
fn time_averages_agree_across_windows() {
    let path = gen_covariate_path(200_000, &mut child_rng(6, 0));
    let (a, _) = stationary_moments(&path[..100_000]);
    let (b, _) = stationary_moments(&path[100_000..]);
    assert!((a - b).abs() < 0.01);
}

#[test]
fn calibrated_rate_increases_with_target() {
    for model in [Model::M1, Model::M2, Model::M3] {
        let low = calibrate_censoring_rate(model, 0.01, 0.2, 50_000, &mut child_rng(1, 9)).unwrap();
        let high =
            calibrate_censoring_rate(model, 0.01, 0.4, 50_000, &mut child_rng(1, 9)).unwrap();
        assert!(high > low, "{model}: {low} vs {high}");
    }
}

#[test]
fn calibration_is_reproducible_across_seeds() {
    let a = calibrate_censoring_rate(Model::M2, 0.01, 0.2, 100_000, &mut child_rng(11, 0)).unwrap();
    let b = calibrate_censoring_rate(Model::M2, 0.01, 0.2, 100_000, &mut child_rng(12, 0)).unwrap();
    assert!((a / b - 1.0).abs() < 0.02, "{a} vs {b}");
}

#[test]
fn censoring_fraction_matches_closed_form() {
    // P(C < T) = 1 - E exp(-rate T); for the Bernoulli AR covariate the
    // transform factorizes over the innovations
    let rate = 5.0_f64;
    let sigma = 0.01_f64;
    let laplace: f64 = (0..60)
        .map(|k| 0.5 * (1.0 + (-rate * 0.4_f64.powi(k)).exp()))
        .product();
    let expected = 1.0 - laplace * (0.5 * rate * rate * sigma * sigma).exp();
    let data = gen_dataset(Model::M2, 100_000, sigma, rate, &mut child_rng(21, 0));
    let got = data.censoring_fraction();
    assert!((got - expected).abs() < 0.01, "{got} vs {expected}");
}

#[test]
fn vanishing_rate_means_no_censoring() {
    let data = gen_dataset(Model::M3, 5_000, 0.01, 1e-9, &mut child_rng(2, 0));
    assert_eq!(data.censoring_fraction(), 0.0);
}

#[test]
fn contamination_counts_and_modes() {
    let base = gen_dataset(Model::M1, 101, 0.01, 0.5, &mut child_rng(3, 0));

    let mut latent = base.clone();
    let idx = contaminate(
        &mut latent,
        0.3,
        10.0,
        ContaminationMode::Latent,
        &mut child_rng(4, 0),
    )
    .unwrap();
    assert_eq!(idx.len(), 31);
    assert!(idx.windows(2).all(|w| w[0] < w[1]));
    for i in 0..101 {
        let factor = if idx.contains(&i) { 10.0 } else { 1.0 };
        assert_eq!(latent.lifetimes[i], base.lifetimes[i] * factor);
        let o = &latent.observations[i];
        assert_eq!(o.y, latent.lifetimes[i].min(latent.censoring[i]));
        assert_eq!(o.delta, latent.lifetimes[i] <= latent.censoring[i]);
    }

    let mut observed = base.clone();
    let idx = contaminate(
        &mut observed,
        0.3,
        10.0,
        ContaminationMode::Observed,
        &mut child_rng(4, 0),
    )
    .unwrap();
    for i in 0..101 {
        let factor = if idx.contains(&i) { 10.0 } else { 1.0 };
        assert_eq!(observed.observations[i].y, base.observations[i].y * factor);
        assert_eq!(observed.observations[i].delta, base.observations[i].delta);
    }

    assert!(contaminate(
        &mut observed,
        0.0,
        10.0,
        ContaminationMode::Observed,
        &mut child_rng(4, 0)
    )
    .is_err());
}

#[test]
fn replications_are_deterministic() {
    let s = Scenario::new(Model::M1, 200, 0.4, 77);
    let rate = s.censoring_rate().unwrap();
    let a = simulate_replication(&s, rate, 3).unwrap();
    let b = simulate_replication(&s, rate, 3).unwrap();
    let c = simulate_replication(&s, rate, 4).unwrap();
    assert_eq!(a.observations, b.observations);
    assert_ne!(a.observations, c.observations);
}

#[test]
fn noiseless_uncensored_fit_is_exact() {
    let mut s = Scenario::new(Model::M1, 150, 0.2, 8);
    s.target_cr = None;
    s.fixed_rate = Some(1e-12);
    s.sigma = 0.0;
    s.replications = 3;
    let cfg = EstimatorConfig {
        kernel: KernelFamily::Indicator,
        psi: PsiSpec::Identity,
        ..EstimatorConfig::default()
    };
    let r = run_gmse_study(&s, &cfg, 1e-9, Some(1)).unwrap();
    assert!(r.gmse_m < 1e-20, "{}", r.gmse_m);
    assert!(r.gmse_nw < 1e-20, "{}", r.gmse_nw);
    assert_eq!(r.realized_cr, 0.0);
}

#[test]
fn realized_censoring_is_near_target() {
    for (model, cr) in [(Model::M1, 0.2), (Model::M2, 0.4), (Model::M3, 0.6)] {
        let mut s = Scenario::new(model, 300, cr, 31);
        s.replications = 20;
        let r = run_gmse_study(&s, &EstimatorConfig::default(), 0.2, None).unwrap();
        assert!(
            (r.realized_cr - cr).abs() < 0.03,
            "{model} {cr}: {}",
            r.realized_cr
        );
    }
}

#[test]
fn single_point_grid_selects_that_point() {
    let mut s = Scenario::new(Model::M2, 200, 0.2, 5);
    s.replications = 4;
    let t = select_bandwidth(&s, &EstimatorConfig::default(), &[0.17], None).unwrap();
    assert_eq!(t.bandwidth_m(), 0.17);
    assert_eq!(t.bandwidth_nw(), 0.17);
    assert!(select_bandwidth(&s, &EstimatorConfig::default(), &[], None).is_err());
}

#[test]
fn grid_selection_prefers_smaller_bandwidth_on_ties() {
    let mut s = Scenario::new(Model::M1, 100, 0.2, 6);
    s.target_cr = None;
    s.fixed_rate = Some(1e-12);
    s.sigma = 0.0;
    s.replications = 2;
    let cfg = EstimatorConfig {
        kernel: KernelFamily::Indicator,
        ..EstimatorConfig::default()
    };
    // both bandwidths isolate every point, so both are exact
    let t = select_bandwidth(&s, &cfg, &[2e-9, 1e-9], None).unwrap();
    assert_eq!(t.bandwidth_m(), 1e-9);
}

#[test]
fn gmse_is_stable_across_seeds() {
    let run = |seed| {
        let mut s = Scenario::new(Model::M1, 300, 0.2, seed);
        s.replications = 50;
        run_gmse_study(&s, &EstimatorConfig::default(), 0.1, None).unwrap()
    };
    let (a, b) = (run(100), run(200));
    assert!((a.realized_cr - b.realized_cr).abs() < 0.06);
    assert!(
        a.gmse_m / b.gmse_m < 2.0 && b.gmse_m / a.gmse_m < 2.0,
        "{} vs {}",
        a.gmse_m,
        b.gmse_m
    );
    assert!(a.gmse_nw / b.gmse_nw < 2.0 && b.gmse_nw / a.gmse_nw < 2.0);
}

#[test]
fn wider_level_never_lowers_coverage() {
    let mut s = Scenario::new(Model::M2, 300, 0.2, 41);
    s.replications = 60;
    let cfg = EstimatorConfig {
        kernel: KernelFamily::Indicator,
        mhat_with_delta: true,
        ..EstimatorConfig::default()
    };
    let x = [1.0 / 3.0];
    let narrow = run_coverage_study(&s, &cfg, &x, 0.5, None).unwrap();
    let wide = run_coverage_study(&s, &cfg, &x, 0.999_999, None).unwrap();
    assert!(wide.points[0].coverage >= narrow.points[0].coverage);
    assert!(wide.points[0].coverage > 0.95);
}

#[test]
fn curves_mark_points_outside_the_design() {
    let mut s = Scenario::new(Model::M3, 400, 0.2, 13);
    s.target_cr = None;
    s.fixed_rate = Some(1e-12);
    s.sigma = 0.0;
    let grid: Vec<f64> = (0..=20).map(|i| -0.5 + 0.125 * i as f64).collect();
    let rows = emit_curve_data(&s, &EstimatorConfig::default(), &grid, 0.02).unwrap();
    assert_eq!(rows.len(), grid.len());
    let data = simulate_replication(&s, s.censoring_rate().unwrap(), 0).unwrap();
    // the support has gaps, so accuracy is only checked where data is close
    let near_data = |x: f64| data.covariates().any(|c| (c - x).abs() < 0.02);
    for r in &rows {
        if r.x < 0.0 || r.x > 5.0 / 3.0 {
            assert!(r.theta_hat.is_none() && r.nw.is_none(), "{r:?}");
        }
        if let (Some(t), true) = (r.theta_hat, near_data(r.x)) {
            assert!((t - r.truth).abs() < 0.1, "{r:?}");
        }
    }
    assert!(rows.iter().any(|r| r.theta_hat.is_some()));
}

#[test]
fn comparator_degrades_with_contamination_factor() {
    let run = |k| {
        let mut s = Scenario::new(Model::M1, 300, 0.2, 55);
        s.replications = 10;
        s.contamination = Some(Contamination {
            fraction: 0.3,
            factor: k,
            mode: ContaminationMode::Latent,
        });
        s.bandwidth_policy = BandwidthPolicy::Fixed(0.2);
        run_gmse_study(&s, &EstimatorConfig::default(), 0.2, None)
            .unwrap()
            .gmse_nw
    };
    let g: Vec<f64> = [5.0, 10.0, 20.0].into_iter().map(run).collect();
    assert!(g[0] < g[1] && g[1] < g[2], "{g:?}");
}
