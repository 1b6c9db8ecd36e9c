mod common;

use common::flight_at;
use doorstep::descent::{run_descent, CameraModel, DeliveryTarget, DescentConfig, DescentStatus};
use doorstep::simworld::{generate_world, DoorMode, DronePose, GeneratorParams};

#[test]
fn descents_keep_clearance_and_reach_their_region() {
    let suite = common::descent_suite(12, 7);
    assert!(suite.clearance_failures.is_empty(), "{:?}", suite.clearance_failures);
    assert!(suite.region_failures.is_empty(), "{:?}", suite.region_failures);
    assert_eq!(suite.successes, suite.runs);
    assert!(suite.yard_agreement >= 0.95, "{}", suite.yard_agreement);
}

#[test]
fn small_gps_offsets_still_pick_the_recipient() {
    let (right, total) = common::gps_small_offset(15, 2.0, 8);
    assert_eq!(right, total);
}

#[test]
fn nothing_below_means_no_roof() {
    let w = generate_world(&GeneratorParams {
        seed: 2,
        door_mode: DoorMode::Open,
        ..GeneratorParams::default()
    })
    .unwrap();
    let cam = CameraModel::centered(160, 160, 80.0, 80.0);
    let mut flight = flight_at(DronePose::new(500.0, 500.0, 25.0, 0.0));
    let out = run_descent(&mut flight, &w, DeliveryTarget::BackYard, &cam, &DescentConfig::default());
    assert_eq!(out.status, DescentStatus::NoRoofVisible);
    assert!(out.descent_point.is_none());
    // the failed capture still costs a control step
    assert!(flight.time() > 0.0);
}

#[test]
fn impossible_clearance_finds_no_spot() {
    let w = generate_world(&GeneratorParams {
        seed: 2,
        door_mode: DoorMode::Open,
        ..GeneratorParams::default()
    })
    .unwrap();
    let cam = CameraModel::centered(160, 160, 80.0, 80.0);
    let mut flight = flight_at(common::start_pose(&w));
    let cfg = DescentConfig {
        clearance: 40.0,
        ..DescentConfig::default()
    };
    let out = run_descent(&mut flight, &w, DeliveryTarget::FrontYard, &cam, &cfg);
    assert_eq!(out.status, DescentStatus::NoSafeSpot);
}
