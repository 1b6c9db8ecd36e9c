mod common;

use doorstep::descent::DeliveryTarget;
use doorstep::harness::{
    build_report, emit_trajectory_svg, mean_std, read_trials, run_trial, run_trial_on, run_trials, trajectory_svg,
    trial_plan, write_trials, HarnessConfig, HarnessError, HouseSpec, Method, TrialResult, TrialStatus, REPORT_SCHEMA,
    TRIAL_SCHEMA,
};
use doorstep::simworld::{generate_world, DoorMode};
use std::sync::OnceLock;

fn small() -> HarnessConfig {
    HarnessConfig {
        corpus_size: 4,
        ..HarnessConfig::default()
    }
}

fn small_trials() -> &'static [TrialResult] {
    static TRIALS: OnceLock<Vec<TrialResult>> = OnceLock::new();
    TRIALS.get_or_init(|| run_trials(&small()))
}

#[test]
fn plan_runs_both_methods_on_the_front_door_and_proposed_on_the_rest() {
    let cfg = HarnessConfig::default();
    let plan = trial_plan(&cfg);
    let front = plan.iter().filter(|p| p.2 == DeliveryTarget::FrontDoor).count();
    assert_eq!(front, 2 * cfg.corpus_size);
    assert_eq!(plan.len() - front, 3 * cfg.corpus_size);
    assert!(plan
        .iter()
        .filter(|p| p.2 != DeliveryTarget::FrontDoor)
        .all(|p| p.1 == Method::Proposed));
    let houses = cfg.houses();
    assert_eq!(houses.len(), 20);
    assert!(houses.iter().enumerate().all(|(i, h)| h.door_mode == [DoorMode::Open, DoorMode::Recessed][i % 2]));
    assert_eq!(houses, cfg.houses());
}

#[test]
fn trials_are_well_formed() {
    let trials = small_trials();
    assert_eq!(trials.len(), trial_plan(&small()).len());
    for t in trials {
        assert_eq!(t.schema, TRIAL_SCHEMA);
        assert!(t.elapsed > 0.0, "{t:?}");
        assert!(!t.trajectory.is_empty());
        if t.status == TrialStatus::Delivered {
            assert!(t.path_length.is_finite() && t.path_length > 0.0);
            assert!(t.final_pose.unwrap().altitude <= 0.05);
        }
        if t.status == TrialStatus::Timeout {
            let cap = match t.method {
                Method::Proposed => small().descent.time_cap,
                Method::Frontier => small().frontier.time_cap,
            };
            assert_eq!(t.elapsed, cap);
        }
    }
}

#[test]
fn yard_deliveries_land_in_their_region() {
    let cfg = small();
    for t in small_trials().iter().filter(|t| t.target != DeliveryTarget::FrontDoor) {
        assert_eq!(t.status, TrialStatus::Delivered, "house {} {:?}", t.house, t.target);
        let h = HouseSpec { index: t.house, seed: t.seed, door_mode: t.door_mode };
        let w = generate_world(&cfg.world_params(&h)).unwrap();
        let end = t.final_pose.unwrap();
        assert!(w.in_target_region(end.position(), t.target), "house {} {:?}", t.house, t.target);
        // clearance holds on the capture's pixel grid; ground truth may differ by a pixel diagonal
        let pixel = w.start_altitude / cfg.camera.focal;
        let clr = w.obstacle_clearance(end.position());
        assert!(clr >= cfg.descent.clearance - pixel * 2f64.sqrt(), "house {} {:?}: {clr}", t.house, t.target);
    }
}

#[test]
fn enclosed_front_door_times_out_at_the_frontier_cap() {
    let cfg = HarnessConfig::default();
    let house = HouseSpec {
        index: 0,
        seed: 7,
        door_mode: DoorMode::Enclosed,
    };
    let t = run_trial(&house, Method::Frontier, DeliveryTarget::FrontDoor, &cfg);
    assert_eq!(t.status, TrialStatus::Timeout);
    assert_eq!(t.elapsed, cfg.frontier.time_cap);
    let p = run_trial(&house, Method::Proposed, DeliveryTarget::FrontDoor, &cfg);
    assert_ne!(p.status, TrialStatus::Delivered);
}

#[test]
fn yard_trajectories_move_laterally_then_descend() {
    for t in small_trials().iter().filter(|t| t.target == DeliveryTarget::BackYard) {
        let spot = t.descent_point.unwrap();
        let poses: Vec<_> = t.trajectory.iter().map(|tp| tp.pose).collect();
        let start_alt = poses[0].altitude;
        // altitude only drops once the drone is over the descent point
        let first_drop = poses.iter().position(|p| p.altitude < start_alt - 1e-9).unwrap();
        assert!(poses[first_drop].position().distance(spot) < 1e-6, "house {}", t.house);
        assert!(poses[first_drop..].iter().all(|p| p.position().distance(spot) < 1e-6));
    }
}

#[test]
fn single_trials_are_deterministic() {
    let cfg = HarnessConfig::default();
    let house = HouseSpec {
        index: 3,
        seed: 7,
        door_mode: DoorMode::Recessed,
    };
    for m in [Method::Proposed, Method::Frontier] {
        let a = run_trial(&house, m, DeliveryTarget::FrontDoor, &cfg);
        let w = generate_world(&cfg.world_params(&house)).unwrap();
        assert_eq!(a, run_trial_on(&w, &house, m, DeliveryTarget::FrontDoor, &cfg));
    }
}

#[test]
fn report_statistics_match_the_rows() {
    let trials = small_trials();
    let r = build_report(trials);
    assert_eq!(r.schema, REPORT_SCHEMA);
    assert_eq!(r.rows.len(), trials.len());
    assert_eq!(r.to_csv().lines().count(), trials.len() + 1);
    for m in &r.methods {
        let times: Vec<f64> = r
            .rows
            .iter()
            .filter(|row| row.method == m.method && row.target == DeliveryTarget::FrontDoor)
            .map(|row| row.elapsed)
            .collect();
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        assert!((m.mean_elapsed - mean).abs() < 1e-9);
        assert_eq!(m.trials, times.len());
    }
    let p = r.method(Method::Proposed).unwrap().mean_elapsed;
    let f = r.method(Method::Frontier).unwrap().mean_elapsed;
    assert!((r.ratio - f / p).abs() < 1e-12);
    assert!((r.percent_slower - 100.0 * (r.ratio - 1.0)).abs() < 1e-9);
    // row order does not depend on trial order
    let mut rev = trials.to_vec();
    rev.reverse();
    assert_eq!(build_report(&rev), r);
}

#[test]
fn sample_statistics() {
    assert_eq!(mean_std(&[42.0]), (42.0, 0.0));
    let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert!(mean_std(&[]).0.is_nan());
}

#[test]
fn trial_log_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trials.jsonl");
    write_trials(&path, small_trials()).unwrap();
    assert_eq!(read_trials(&path).unwrap(), small_trials());
    std::fs::write(&path, "\n{\"schema\": 1}\n").unwrap();
    match read_trials(&path) {
        Err(HarnessError::TrialLog { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn svg_ends_at_the_landing_point() {
    let cfg = small();
    let t = small_trials()
        .iter()
        .find(|t| t.method == Method::Proposed && t.status == TrialStatus::Delivered && t.approach_point.is_some())
        .unwrap();
    let h = HouseSpec { index: t.house, seed: t.seed, door_mode: t.door_mode };
    let w = generate_world(&cfg.world_params(&h)).unwrap();
    let svg = trajectory_svg(t, &w).unwrap();
    let pts = svg
        .lines()
        .find(|l| l.contains("class=\"trajectory\""))
        .and_then(|l| l.split("points=\"").nth(1))
        .and_then(|s| s.split('"').next())
        .unwrap();
    let last: Vec<f64> = pts.split(' ').last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let goal = t.approach_point.unwrap();
    let scale = 10.0;
    assert!((last[0] - (goal.x - w.bounds.min.x) * scale).abs() <= 0.2 * scale);
    assert!((last[1] - (goal.y - w.bounds.min.y) * scale).abs() <= 0.2 * scale);
    assert_eq!(pts.split(' ').count(), t.trajectory.len());

    let dir = tempfile::tempdir().unwrap();
    let mut empty = t.clone();
    empty.trajectory.clear();
    let path = dir.path().join("empty.svg");
    assert!(matches!(emit_trajectory_svg(&empty, &w, &path), Err(HarnessError::EmptyTrajectory)));
    assert!(!path.exists());
}

#[test]
fn config_toml_round_trips_and_rejects_unknown_keys() {
    let cfg = HarnessConfig::default();
    assert_eq!(HarnessConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    assert_eq!(common::default_config(), cfg);
    assert!(HarnessConfig::from_toml("corpus_sise = 3").is_err());
    assert!(HarnessConfig::from_toml("[descent]\nclearence = 1.0").is_err());
    let partial = HarnessConfig::from_toml("corpus_size = 3\n[descent]\nclearance = 1.5").unwrap();
    assert_eq!(partial.corpus_size, 3);
    assert_eq!(partial.descent.clearance, 1.5);
    assert_eq!(partial.descent.hover_height, cfg.descent.hover_height);
    let bad = HarnessConfig {
        extra_targets: vec![DeliveryTarget::FrontDoor],
        ..HarnessConfig::default()
    };
    assert!(bad.validate().is_err());
}
