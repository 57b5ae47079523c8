//! The `ibfd` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ibfd::cli::read_snapshot;
use serde_json::Value;

fn ibfd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibfd"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const HILL: &str = r#"{
    "grid": {"shape": [81, 81], "spacing": [12.5, 12.5]},
    "geometry": {"kind": "hill", "base": 700.0, "amplitude": 90.0, "wavelength": 450.0, "centre": [500.0]},
    "equation": "acoustic1",
    "material": {"c": 1500.0, "rho": 1000.0},
    "source": {"f0": 6.0, "location": [480.0, 420.0]},
    "time": {"duration": 0.2},
    "outputs": {"snapshot_stride": 20, "receivers": [{"location": [300.0, 600.0]}, {"location": [310.0, 590.0], "field": "vx"}]}
}"#;

#[test]
fn run_writes_snapshots_traces_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "hill.json", HILL);
    let out = tmp.path().join("out");
    let o = ibfd(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let steps = summary["steps"].as_u64().unwrap() as usize;
    let dt = summary["dt"].as_f64().unwrap();
    assert!((steps as f64 * dt - 0.2).abs() < 1e-12);
    let expected: Vec<usize> = (0..=steps).step_by(20).collect();
    for field in ["p", "vx", "vy"] {
        for &k in &expected {
            let (h, data) = read_snapshot(&out.join(format!("{field}_{k:06}.snap"))).unwrap();
            assert_eq!(h.field, field);
            assert_eq!(h.dims, vec![81, 81]);
            assert_eq!(data.len(), 81 * 81);
            let t = if field == "p" { k as f64 * dt } else { (k as f64 - 0.5) * dt };
            assert!((h.time - t).abs() < 1e-12);
        }
        assert!(!out.join(format!("{field}_{:06}.snap", expected.last().unwrap() + 20)).exists());
    }

    let trace = fs::read_to_string(out.join("receiver_000_p.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("t,value"));
    // one sample per step
    let times: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(times.len(), steps);
    assert!((times[0] - dt).abs() < 1e-12 && (times[steps - 1] - 0.2).abs() < 1e-12);
    assert!(out.join("receiver_001_vx.csv").exists());
}

#[test]
fn config_errors_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = HILL.replace(r#""duration": 0.2"#, r#""duration": 0.2, "courant": 1.5"#);
    let cfg = write(tmp.path(), "bad.json", &bad);
    let o = ibfd(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("time.courant"), "{}", stderr(&o));

    let cfg = write(tmp.path(), "nokind.json", &HILL.replace(r#""kind": "hill", "#, ""));
    let o = ibfd(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("geometry.kind"), "{}", stderr(&o));

    let missing = tmp.path().join("absent.json");
    let o = ibfd(&["run", "--config", missing.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("absent.json"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "hill.json", HILL);
    let blocker = write(tmp.path(), "file", "");
    let o = ibfd(&["run", "--config", cfg.to_str().unwrap(), "--out", blocker.join("sub").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn stencil_dump_reports_interior_and_modified_nodes() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
        "grid": {"shape": [41, 41], "spacing": [0.5, 0.5]},
        "geometry": {"kind": "flat", "height": 15.2},
        "equation": "acoustic2",
        "material": {"c": 1.0},
        "time": {"duration": 1.0}
    }"#;
    let cfg = write(tmp.path(), "flat.json", text);
    let out = tmp.path().join("dump");
    let o = ibfd(&["stencil-dump", "--config", cfg.to_str().unwrap(), "--points", "20,10;20,29", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let records: Value = serde_json::from_str(&fs::read_to_string(out.join("stencils.json")).unwrap()).unwrap();
    let records = records.as_array().unwrap();
    assert_eq!(records.len(), 4);

    let classic = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
    for r in &records[..2] {
        assert_eq!(r["kind"], "interior");
        assert!(r["diagnostics"].is_null());
        let taps = r["taps"].as_array().unwrap();
        assert_eq!(taps.len(), 5);
        for (t, w) in taps.iter().zip(classic) {
            assert!((t["weight"].as_f64().unwrap() - w / 0.25).abs() < 1e-12);
            assert_eq!(t["field"], "p");
        }
    }
    // node 29 sits 0.7 below the surface: the vertical stencil reaches past it
    let vertical = &records[3];
    assert_eq!(vertical["kind"], "modified");
    assert_eq!(vertical["index"], serde_json::json!([20, 29]));
    assert!(vertical["diagnostics"]["rank"].as_u64().unwrap() >= 15);
    let offsets: Vec<i64> = vertical["taps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["offset"][1].as_i64().unwrap())
        .collect();
    assert!(offsets.iter().all(|&o| o <= 1), "{offsets:?}");

    let o = ibfd(&["stencil-dump", "--config", cfg.to_str().unwrap(), "--points", "20,41"]);
    assert!(!o.status.success());
}

#[test]
fn sdf_of_a_flat_dem_is_the_vertical_distance() {
    let tmp = tempfile::tempdir().unwrap();
    let dem = write(
        tmp.path(),
        "flat.asc",
        "ncols 1\nnrows 30\nxllcorner 0\nyllcorner -5\ncellsize 10\nNODATA_value -9999\n".to_string().as_str(),
    );
    let mut text = fs::read_to_string(&dem).unwrap();
    text.push_str(&"123.5\n".repeat(30));
    fs::write(&dem, text).unwrap();
    let out = tmp.path().join("sdf");
    let o = ibfd(&[
        "sdf", "--dem", dem.to_str().unwrap(), "--shape", "25,21", "--spacing", "10,10", "--origin", "0,50", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, values) = read_snapshot(&out.join("sdf.snap")).unwrap();
    assert_eq!(h.dims, vec![25, 21]);
    for i in 0..25 {
        for j in 0..21 {
            let y = 50.0 + 10.0 * j as f64;
            assert!((values[i * 21 + j] - (123.5 - y)).abs() < 1e-9);
        }
    }
}

#[test]
fn dem_paths_resolve_next_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let sub = tmp.path().join("case");
    fs::create_dir(&sub).unwrap();
    let mut dem = String::from("ncols 14\nnrows 1\nxllcorner -10\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n");
    dem.push_str(&(0..14).map(|c| format!("{}", 80.0 + 2.0 * c as f64)).collect::<Vec<_>>().join(" "));
    write(&sub, "ramp.asc", &dem);
    let text = r#"{
        "grid": {"shape": [11, 13], "spacing": [10.0, 10.0]},
        "geometry": {"kind": "dem", "path": "ramp.asc"},
        "equation": "acoustic2",
        "material": {"c": 100.0},
        "time": {"duration": 0.05},
        "outputs": {"snapshot_stride": 1000}
    }"#;
    let cfg = write(&sub, "dem.json", text);
    let out = tmp.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_ibfd"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["boundary_points"].as_u64().unwrap() > 0);
}

#[test]
fn converge_writes_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
        "grid": {"shape": [5, 5], "spacing": [1.0, 1.0]},
        "equation": "acoustic2",
        "material": {"c": 1.0},
        "time": {"duration": 1.0}
    }"#;
    let cfg = write(tmp.path(), "conv.json", text);
    let out = tmp.path().join("conv");
    let o = ibfd(&["converge", "--config", cfg.to_str().unwrap(), "--resolutions", "0.1,0.05,0.025", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("convergence.json")).unwrap()).unwrap();
    assert_eq!(report["entries"].as_array().unwrap().len(), 3);
    assert!(report["slope"].as_f64().unwrap() > 3.0);
    assert!(fs::read_to_string(out.join("convergence.txt")).unwrap().contains("fitted slope"));
}
