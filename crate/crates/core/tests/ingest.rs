use std::fmt::Write as _;
use std::path::Path;

use catalog_core::data::highd::ingest_tracks;
use catalog_core::{BehaviorClass, Error};

const META: &str = "id,drivingDirection\n1,2\n2,2\n3,2\n";

/// Rows for one vehicle driving along +x at 30 m/s in a fixed lane.
fn rows(out: &mut String, id: u32, frames: std::ops::Range<i64>, x0: f64, lane: i32) {
    let y = 3.75 * (lane as f64 - 0.5);
    for f in frames {
        let x = x0 + 30.0 * f as f64 / 25.0;
        writeln!(out, "{f},{id},{x:.3},{y:.3},30.0,0.0,{lane}").unwrap();
    }
}

fn write(dir: &Path, tracks: &str) -> (std::path::PathBuf, std::path::PathBuf) {
    let t = dir.join("01_tracks.csv");
    let m = dir.join("01_tracksMeta.csv");
    std::fs::write(&t, tracks).unwrap();
    std::fs::write(&m, META).unwrap();
    (t, m)
}

fn header() -> String {
    "frame,id,x,y,xVelocity,yVelocity,laneId\n".to_string()
}

#[test]
fn three_vehicles_make_one_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = header();
    rows(&mut csv, 1, 0..125, 100.0, 3);
    rows(&mut csv, 2, 0..75, 130.0, 3);
    rows(&mut csv, 3, 0..75, 80.0, 4);
    let (t, m) = write(dir.path(), &csv);

    let out = ingest_tracks(&t, &m).unwrap();
    assert_eq!(out.dataset.len(), 1);
    let s = &out.dataset.scenarios[0];
    assert_eq!(s.present_count(), 3);
    assert_eq!(s.class(), BehaviorClass::LaneKeep);
    // target-frame origin
    assert_eq!(s.get(0, 0, 0), 0.0);
    assert_eq!(s.get(0, 1, 0), 0.0);
}

#[test]
fn short_recording_yields_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = header();
    rows(&mut csv, 1, 0..74, 100.0, 3);
    rows(&mut csv, 2, 0..74, 130.0, 3);
    rows(&mut csv, 3, 0..74, 80.0, 4);
    let (t, m) = write(dir.path(), &csv);
    let out = ingest_tracks(&t, &m).unwrap();
    assert!(out.dataset.is_empty());
}

#[test]
fn non_numeric_value_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = header();
    rows(&mut csv, 1, 0..5, 100.0, 3);
    csv.push_str("5,1,abc,7.5,30.0,0.0,3\n");
    let (t, m) = write(dir.path(), &csv);
    match ingest_tracks(&t, &m) {
        Err(Error::Parse { path, line, message }) => {
            assert_eq!(path, t);
            assert_eq!(line, 7);
            assert!(message.contains("abc"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn missing_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let err = ingest_tracks(&missing, &missing).unwrap_err();
    assert!(err.to_string().contains("nope.csv"), "{err}");
}
