use std::path::Path;
use std::process::{Command, Output};

fn pendulum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pendulum"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn assert_svg(path: &Path) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.len() < 2 * 1024 * 1024, "{} bytes", text.len());
    let doc = roxmltree::Document::parse(&text).expect("valid XML");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
}

#[test]
fn trajectory_conserves_momentum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let svg = dir.path().join("traj.svg");
    let o = pendulum(&[
        "trajectory",
        "--quadratic",
        "--j",
        "0.4",
        "--h",
        "1.2",
        "--t-max",
        "20",
        "--out",
        out.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&std::fs::read_to_string(&out).unwrap());
    let (cj, ch) = (column(&header, "j"), column(&header, "h"));
    assert_eq!(rows.len(), 201);
    for r in &rows {
        let j: f64 = r[cj].parse().unwrap();
        let h: f64 = r[ch].parse().unwrap();
        assert!((j - 0.4).abs() <= 1e-9 && (h - 1.2).abs() <= 1e-9, "{j} {h}");
    }
    assert_svg(&svg);
}

#[test]
fn zero_time_gives_initial_point() {
    let o = pendulum(&["trajectory", "--t-max", "0"]);
    assert!(o.status.success());
    let (header, rows) = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 1);
    let x: Vec<f64> = ["x", "y", "z", "u", "v", "w"]
        .iter()
        .map(|c| rows[0][column(&header, c)].parse().unwrap())
        .collect();
    let w = 1.2f64 * 2.0 - 0.16;
    assert_eq!(x[..5], [1.0, 0.0, 0.0, 0.0, 0.4]);
    assert!((x[5] - w.sqrt()).abs() < 1e-15);
}

#[test]
fn general_potential_trajectory() {
    let o = pendulum(&[
        "trajectory",
        "--potential",
        "z^2*(1+0.3*z*(1-z^2))",
        "--dpotential",
        "2*z+0.9*z^2-1.5*z^4",
        "--j",
        "0.3",
        "--h",
        "0.8",
        "--t-max",
        "5",
        "--samples",
        "11",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 11);
    for r in rows {
        assert!((r["h"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    }
}

#[test]
fn domain_errors_exit_2() {
    let o = pendulum(&["trajectory", "--j", "0", "--h", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("outside momentum image"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);

    assert_eq!(pendulum(&["trajectory", "--x0", "1,0,0,0,1"]).status.code(), Some(2));
    assert_eq!(pendulum(&["actions", "--j", "0.4"]).status.code(), Some(2));
    assert_eq!(
        pendulum(&["trajectory", "--potential", "z^3", "--dpotential", "3*z^2"]).status.code(),
        Some(2)
    );
    assert_eq!(pendulum(&["bogus"]).status.code(), Some(2));
}

#[test]
fn actions_single_fiber() {
    let o = pendulum(&["actions", "--j", "0.4", "--h", "1.2"]);
    assert!(o.status.success());
    let (header, rows) = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(
        header.join(","),
        "j,h,k,ell,S_formula,T_formula,S_oracle,T_oracle,A2,discrepancy_flag"
    );
    assert_eq!(rows.len(), 1);
    let t: f64 = rows[0][column(&header, "T_formula")].parse().unwrap();
    let t_oracle: f64 = rows[0][column(&header, "T_oracle")].parse().unwrap();
    let flag = &rows[0][column(&header, "discrepancy_flag")];
    assert_eq!(flag == "1", (t - t_oracle).abs() / t_oracle > 1e-6);
    assert_eq!(flag, "0");
}

#[test]
fn actions_boundary_fiber_has_empty_periods() {
    let o = pendulum(&["actions", "--j", "0.5", "--h", "0.125"]);
    assert!(o.status.success());
    let (header, rows) = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 1);
    for c in ["S_formula", "T_formula", "A2"] {
        assert_eq!(rows[0][column(&header, c)], "");
    }
}

#[test]
fn actions_grid_is_populated_with_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("t.svg");
    let o = pendulum(&[
        "actions",
        "--j",
        "-0.8,-0.3,0.3,0.8",
        "--h",
        "0.6,1.4,2.0",
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.iter().all(|c| !c.is_empty())));
    assert_svg(&svg);
}

#[test]
fn periods_table_reports_published_values() {
    let o = pendulum(&["periods", "--j", "0", "--h", "0.25,0.5,0.75", "--format", "json"]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for r in rows.as_array().unwrap() {
        for key in ["T", "T_published", "T_published_special", "T_oracle"] {
            assert!(r[key].as_f64().is_some(), "{key} missing in {r}");
        }
    }
}

#[test]
fn verify_default_grid() {
    let o = pendulum(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 25);
}

#[test]
fn verify_is_deterministic() {
    let a = pendulum(&["verify", "--seed", "42", "--grid", "3"]);
    let b = pendulum(&["verify", "--seed", "42", "--grid", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_surfaces_published_discrepancy() {
    let o = pendulum(&["verify", "--tol", "1e-4", "--j", "0", "--h", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("T_published_special"), "{err}");
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["records"][0]["pass"], false);
}

#[test]
fn map_image_is_valid_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("image.svg");
    let o = pendulum(&["map-image", "--out", svg.to_str().unwrap()]);
    assert!(o.status.success());
    assert_svg(&svg);
}
