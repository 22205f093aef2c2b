use std::fs;
use std::path::Path;

use aquaglide::config::{parse_value, ScenarioConfig, DEFAULTS_JSON};
use aquaglide::experiments::{run_preset, run_single, run_sweep, Axis, AxisValues, OutputFormat, SweepSpec};

fn discharge_spec() -> SweepSpec {
    SweepSpec::new(
        parse_value(DEFAULTS_JSON, "defaults").unwrap(),
        ".",
        vec![Axis {
            path: "launch.discharge_deg".into(),
            values: AxisValues::List(vec![10.into(), 30.into(), 50.into()]),
            labels: None,
        }],
    )
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_produce_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_sweep(&discharge_spec(), 1, Some(a.path()), OutputFormat::Csv).unwrap();
    run_sweep(&discharge_spec(), 3, Some(b.path()), OutputFormat::Csv).unwrap();
    assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()));
}

#[test]
fn aggregate_matches_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    run_sweep(&discharge_spec(), 0, Some(dir.path()), OutputFormat::Csv).unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("aggregate.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for (i, (row, label)) in rows.iter().zip(["10", "30", "50"]).enumerate() {
        assert_eq!(&row[0], label);
        let side: serde_json::Value = serde_json::from_slice(
            &fs::read(dir.path().join(format!("run_{i:03}_{label}.summary.json"))).unwrap(),
        )
        .unwrap();
        for (col, key) in [(1, "glide_distance"), (2, "max_altitude"), (3, "flight_time"), (4, "post_apogee_distance")] {
            assert_eq!(row[col].parse::<f64>().unwrap(), side["summary"][key].as_f64().unwrap(), "{key}");
        }
    }
}

#[test]
fn single_run_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("launch15.json");
    fs::write(&cfg, ScenarioConfig::default().to_json()).unwrap();
    let out = run_single(&cfg, &dir.path().join("out"), OutputFormat::Csv).unwrap();
    assert!(out.trajectory.summary.glide_distance > 0.0);
    assert!(out.trajectory_path.ends_with("launch15.csv"));
    let text = fs::read_to_string(&out.trajectory_path).unwrap();
    assert_eq!(text.lines().count(), out.trajectory.samples.len() + 1);
}

#[test]
fn ground_effect_flag_helps_at_low_discharge() {
    let mut doc = parse_value(DEFAULTS_JSON, "defaults").unwrap();
    doc["launch"]["discharge_deg"] = 10.into();
    let spec = SweepSpec::new(
        doc,
        ".",
        vec![Axis {
            path: "environment.ground_effect_enabled".into(),
            values: AxisValues::List(vec![false.into(), true.into()]),
            labels: Some(vec!["off".into(), "on".into()]),
        }],
    );
    let r = run_sweep(&spec, 0, None, OutputFormat::Csv).unwrap();
    let d = r.distances();
    assert!(d[1].unwrap() >= d[0].unwrap());
}

#[test]
fn preset_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_preset("opening-angle", None, 0, Some(dir.path()), OutputFormat::Json).unwrap();
    assert_eq!(report.sweep.rows.len(), 4);
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("run_003_90.json").exists());
}
