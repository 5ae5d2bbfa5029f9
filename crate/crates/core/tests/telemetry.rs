use nalgebra::Vector3;
use thrustwalk::sim::scenario::{column_names, COLUMN_COUNT};
use thrustwalk::sim::{read_csv, run_scenario, write_csv, SimConfig};

fn run(duration: f64) -> thrustwalk::sim::RunResult {
    let mut c = SimConfig::default();
    c.scenario.duration = duration;
    run_scenario(c).unwrap()
}

#[test]
fn empty_log_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    write_csv(&path, &[("config_sha256", "abc".into())], &[], None).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "# config_sha256: abc");
    assert_eq!(lines[1].split(',').count(), COLUMN_COUNT);
    assert!(read_csv(&path).unwrap().is_empty());
}

#[test]
fn round_trip_is_exact() {
    let result = run(0.5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    write_csv(&path, &[("thrustwalk", "test".into())], &result.records, Some("end")).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back, result.records);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("t,px,py,pz,roll,pitch,yaw"));
    assert_eq!(text.lines().last().unwrap(), "# end");
}

#[test]
fn ten_seconds_at_default_decimation_gives_2000_rows() {
    let result = run(10.0);
    assert!(result.fault.is_none());
    assert_eq!(result.records.len(), 2000);
    let dt = 5e-4;
    for (k, r) in result.records.iter().enumerate() {
        assert_eq!(r.time, (10 * k) as f64 * dt);
    }
}

#[test]
fn header_matches_documented_order() {
    let names = column_names();
    let fr = names.iter().position(|n| n == "foot_x_fr").unwrap();
    let bl = names.iter().position(|n| n == "contact_bl").unwrap();
    assert_eq!(fr, 23);
    assert_eq!(bl, 23 + 4 * 13 - 1);
    assert_eq!(&names[COLUMN_COUNT - 6..], ["r_fx", "r_fy", "r_fz", "r_mx", "r_my", "r_mz"]);
}

#[test]
fn unreadable_and_malformed_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let err = read_csv(&missing).unwrap_err().to_string();
    assert!(err.contains("missing.csv"), "{err}");

    let bad = dir.path().join("bad.csv");
    let mut text = column_names().join(",");
    text.push('\n');
    text.push_str(&vec!["x"; COLUMN_COUNT].join(","));
    text.push('\n');
    std::fs::write(&bad, text).unwrap();
    assert!(read_csv(&bad).unwrap_err().to_string().contains("row 1"));

    let blocked = dir.path().join("no_such_dir").join("out.csv");
    assert!(write_csv(&blocked, &[], &[], None).is_err());
}

#[test]
fn estimator_columns_are_zero_off_contact() {
    let mut c = SimConfig::default();
    c.scenario.duration = 2.0;
    c.scenario.desired_velocity = Vector3::new(0.2, 0.0, 0.0);
    let result = run_scenario(c).unwrap();
    let mut swing_rows = 0;
    for r in &result.records {
        for i in 0..4 {
            if !r.contact[i] {
                swing_rows += 1;
                assert_eq!(r.true_grf[i], Vector3::zeros());
                assert_eq!(r.observer_feet[i], Vector3::zeros());
                assert_eq!(r.constrained_feet[i], Vector3::zeros());
            }
        }
    }
    assert!(swing_rows > 100);
}
