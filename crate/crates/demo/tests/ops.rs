use nphmc_demo::*;

fn floats(v: &serde_json::Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn histogram_masses_sum_to_one() {
    let v = geometric_histogram_value(0.2, 0.1, 5, 500, 1).unwrap();
    let total: f64 = floats(&v["empirical"]).iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(v["k"].as_array().unwrap().len(), 21);
    assert!(v["tvd"].as_f64().unwrap() < 0.3);
}

#[test]
fn bad_input_becomes_error_json() {
    assert!(geometric_histogram(2.0, 0.1, 5, 100, 0).contains("\"error\""));
    assert!(two_branch_trajectory(f64::NAN, 1.0, 0.1, 3, 0).contains("\"error\""));
}

#[test]
fn walk_density_is_a_density() {
    let v = walk_density_value(0.1, 10, 200, 3).unwrap();
    let area: f64 = floats(&v["density"]).iter().sum::<f64>() * 4.0 / 120.0;
    assert!(area > 0.8 && area < 1.2, "{area}");
}

#[test]
fn trajectory_extends_after_crossing() {
    let v = two_branch_trajectory_value(-3.1, 1.2, 0.4008, 3, 0).unwrap();
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 4);
    assert_eq!(pts[2]["q"].as_array().unwrap().len(), 1);
    assert_eq!(pts[3]["q"].as_array().unwrap().len(), 2);
    assert_eq!(v["initial"]["q"].as_array().unwrap().len(), 2);
}

#[test]
fn outputs_are_deterministic() {
    assert_eq!(walk_density(0.1, 10, 100, 9), walk_density(0.1, 10, 100, 9));
}
