use smallcell_core::experiments::{
    run_sweep_with_workers, CsiMode, PrecoderKind, SchemeName, SweepParam,
};
use smallcell_core::ScenarioConfig;

fn small(trials: usize) -> ScenarioConfig {
    ScenarioConfig {
        trials,
        ..ScenarioConfig::default()
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let cfg = small(40);
    let values = [0.0, 10.0];
    let one = run_sweep_with_workers(&cfg, SweepParam::PtDbm, &values, Some(1)).unwrap();
    let three = run_sweep_with_workers(&cfg, SweepParam::PtDbm, &values, Some(3)).unwrap();
    assert_eq!(one, three);
    let again = run_sweep_with_workers(&cfg, SweepParam::PtDbm, &values, Some(1)).unwrap();
    assert_eq!(one, again);
}

#[test]
fn adding_points_leaves_existing_points_unchanged() {
    let cfg = small(15);
    let a = run_sweep_with_workers(&cfg, SweepParam::PowerRatio, &[2.0, 6.0], Some(1)).unwrap();
    let b = run_sweep_with_workers(&cfg, SweepParam::PowerRatio, &[6.0, 4.0, 2.0, 1.0], Some(1))
        .unwrap();
    let pick = |c: &smallcell_core::CurveSet, v: f64| {
        c.points
            .iter()
            .find(|p| p.sweep_value == v)
            .unwrap()
            .clone()
    };
    assert_eq!(pick(&a, 2.0), pick(&b, 2.0));
    assert_eq!(pick(&a, 6.0), pick(&b, 6.0));
}

#[test]
fn different_seeds_give_different_draws() {
    let a = run_sweep_with_workers(&small(20), SweepParam::PtDbm, &[10.0], Some(1)).unwrap();
    let cfg = ScenarioConfig {
        master_seed: 2,
        ..small(20)
    };
    let b = run_sweep_with_workers(&cfg, SweepParam::PtDbm, &[10.0], Some(1)).unwrap();
    assert_ne!(a.points[0].series[0].mean, b.points[0].series[0].mean);
}

#[test]
fn points_are_sorted_and_rates_grow_with_power() {
    let curves =
        run_sweep_with_workers(&small(100), SweepParam::PtDbm, &[20.0, 0.0, 10.0], None).unwrap();
    assert_eq!(curves.sweep_name, "p_t_dbm");
    let xs: Vec<f64> = curves.points.iter().map(|p| p.sweep_value).collect();
    assert_eq!(xs, vec![0.0, 10.0, 20.0]);
    for scheme in ["distributed_hybrid", "collocated_digital"] {
        let s = curves.series(scheme);
        assert_eq!(s.len(), 3);
        for w in s.windows(2) {
            assert!(
                w[1].1.mean > w[0].1.mean + w[0].1.ci95 + w[1].1.ci95,
                "{scheme}: {s:?}"
            );
        }
        assert!(s.iter().all(|(_, st)| st.trials == 100 && st.ci95 > 0.0));
    }
}

#[test]
fn invalid_points_are_rejected_not_fatal() {
    let curves =
        run_sweep_with_workers(&small(10), SweepParam::NCl, &[0.0, 2.0, 2.5], Some(1)).unwrap();
    assert_eq!(curves.points.len(), 1);
    assert_eq!(curves.points[0].sweep_value, 2.0);
    let rejected: Vec<f64> = curves.rejected.iter().map(|r| r.sweep_value).collect();
    assert_eq!(rejected, vec![0.0, 2.5]);
}

#[test]
fn n_sbs_sweep_rejects_unbalanced_counts() {
    // K = 3, N_R = 2: only N divisible by 3 yields an integer N_D.
    let cfg = ScenarioConfig {
        k_users: 3,
        n_sbs: 3,
        n_r: 2,
        n_d: 2,
        m_bs: 150,
        trials: 5,
        ..ScenarioConfig::default()
    };
    cfg.validate().unwrap();
    let curves = run_sweep_with_workers(&cfg, SweepParam::NSbs, &[2.0, 3.0], Some(1)).unwrap();
    assert_eq!(curves.points.len(), 1);
    assert!(
        curves.rejected[0].reason.contains("N·N_R = K·N_D"),
        "{}",
        curves.rejected[0].reason
    );
}

#[test]
fn closed_form_series_match_direct_evaluation() {
    let cfg = ScenarioConfig {
        schemes: vec![SchemeName::ClosedForm],
        trials: 1,
        ..ScenarioConfig::default()
    };
    let curves = run_sweep_with_workers(&cfg, SweepParam::PtDbm, &[10.0], Some(1)).unwrap();
    let series = &curves.points[0].series;
    let get = |name: &str| series.iter().find(|s| s.scheme == name).unwrap().mean;
    let (k, n, m, p) = (2.0, 3.0, 50.0, 6.0);
    let pt = 10f64.powf(10.0 / 10.0);
    let loss = 10f64.powf(-80.76 / 10.0);
    let noise = 10f64.powf(-74.0 / 10.0);
    let dist = k * n * (1.0 + loss * m * p * pt / (k * n) / noise).log2();
    let coll = k * (1.0 + loss * n * m * p * pt / k / noise).log2();
    assert!((get("closed_form_distributed") - dist).abs() < 1e-9 * dist);
    assert!((get("closed_form_collocated") - coll).abs() < 1e-9 * coll);
    assert!((get("closed_form_gap") - (dist - coll)).abs() < 1e-9);
    assert!(series.iter().all(|s| s.ci95 == 0.0 && s.trials == 1));
}

#[test]
fn zero_forcing_and_estimated_csi_run() {
    for (precoder, csi) in [
        (PrecoderKind::ZfStacked, CsiMode::Genie),
        (PrecoderKind::SvdPerUser, CsiMode::Estimated),
        (PrecoderKind::ZfStacked, CsiMode::Estimated),
    ] {
        let cfg = ScenarioConfig {
            precoder,
            csi,
            ..small(20)
        };
        let curves = run_sweep_with_workers(&cfg, SweepParam::PtDbm, &[10.0], Some(2)).unwrap();
        for s in &curves.points[0].series {
            assert!(
                s.mean.is_finite() && s.mean > 0.0,
                "{precoder:?} {csi:?}: {s:?}"
            );
        }
    }
}

#[test]
fn config_round_trips_through_json() {
    let cfg = ScenarioConfig {
        power_ratio: 0.1 + 0.2,
        pilot_energy_dbm: Some(-3.3),
        ..ScenarioConfig::default()
    };
    let text = serde_json::to_string(&cfg).unwrap();
    let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg, back);
}
