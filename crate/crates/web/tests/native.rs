// SPDX-License-Identifier: MIT OR Apache-2.0

use serde_json::Value;
use tsgan_web::{change_point_json, coupling_decay_json, sliced_w1_json};

#[test]
fn change_point_demo_shape() {
    let v: Value = serde_json::from_str(&change_point_json(4.0, 60, 1).unwrap()).unwrap();
    assert_eq!(v["true_change_index"], 600);
    assert_eq!(v["series_first_coordinate"].as_array().unwrap().len(), 1000);
    assert_eq!(v["block_losses"].as_array().unwrap().len(), 16);
    assert_eq!(v["window_losses"].as_array().unwrap().len(), 100);
    let est = v["estimate"].as_u64().unwrap();
    let start = v["group_start"].as_u64().unwrap();
    assert!((start..start + 100).contains(&est));
    assert!(change_point_json(f64::NAN, 10, 1).is_err());
}

#[test]
fn coupling_demo_matches_ar1() {
    let v: Value = serde_json::from_str(&coupling_decay_json(0.5, 0.0, 0.0, 60, 2).unwrap()).unwrap();
    let slope = v["slope"].as_f64().unwrap();
    assert!((slope - 0.5f64.ln()).abs() < 1e-6);
    assert_eq!(v["contracting"], true);
}

#[test]
fn sliced_demo_orders_distances() {
    let v: Value = serde_json::from_str(&sliced_w1_json(3, 500, 2.0, 1.0, 3).unwrap()).unwrap();
    assert!(v["value"].as_f64().unwrap() > 5.0 * v["per_sample_floor"].as_f64().unwrap());
    assert!(sliced_w1_json(0, 10, 0.0, 1.0, 0).is_err());
}
