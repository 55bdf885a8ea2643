use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urbanflow"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn toy_solves_optimally() {
    let o = run(&[&"solve", &scenario("toy.toml")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("status: optimal"), "{out}");
    assert!(out.contains("objective: (2, 6)"), "{out}");
    assert!(out.contains("exit(v1,s2,6)."), "{out}");
}

#[test]
fn solve_output_passes_check() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("model.lp");
    for name in ["toy.toml", "roundabout.toml"] {
        let o = run(&[&"solve", &scenario(name), &"--output", &model]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        let c = run(&[&"check", &scenario(name), &model]);
        assert_eq!(c.status.code(), Some(0), "{name}: {}{}", stdout(&c), stderr(&c));
        assert!(stdout(&c).contains("feasible"));
    }
}

#[test]
fn exported_facts_describe_the_instance() {
    let dir = TempDir::new().unwrap();
    let facts = dir.path().join("facts.lp");
    let o = run(&[&"solve", &scenario("toy.toml"), &"--export-facts", &facts]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&facts).unwrap();
    for needle in ["possibleRouteOfVehicle(v1,v1_r0).", "link(s1,s2).", "capacity(s1,19)."] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
}

#[test]
fn tampered_model_reports_violations() {
    let dir = TempDir::new().unwrap();
    let good = stdout(&run(&[&"solve", &scenario("toy.toml")]));
    let bad = write(&dir, "bad.lp", &good.replace("exit(v1,s1,3).", "exit(v1,s1,1).").replace("enter(v1,s2,3).", "enter(v1,s2,1)."));
    let o = run(&[&"check", &scenario("toy.toml"), &bad]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains("r10"), "{out}");

    let late = write(&dir, "late.lp", &good.replace("exit(v1,s2,6).", "exit(v1,s2,40)."));
    let o = run(&[&"check", &scenario("toy.toml"), &late]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("r5"), "{}", stdout(&o));
}

#[test]
fn unknown_vehicle_in_model_is_input_error() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.lp", "solutionRoute(ghost,ghost_r0).\n");
    let o = run(&[&"check", &scenario("toy.toml"), &model]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ghost"), "{}", stderr(&o));
}

#[test]
fn unreadable_scenario_is_input_error() {
    let o = run(&[&"solve", &"/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn dangling_link_is_named() {
    let dir = TempDir::new().unwrap();
    let text = r#"
[network]
junctions = ["a", "b", "c"]
streets = [
    { id = "s1", from = "a", to = "b", length = 100.0 },
    { id = "s2", from = "b", to = "c", length = 100.0 },
]
links = [["s1", "s2"], ["s1", "nowhere"]]
"#;
    let p = write(&dir, "bad.toml", text);
    let o = run(&[&"preprocess", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));
}

#[test]
fn preprocess_lists_roundabout_expansion() {
    let o = run(&[&"preprocess", &scenario("roundabout.toml")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("roundabout ra"), "{out}");
    assert!(out.contains("map ring0 -> "), "{out}");
    assert!(out.contains("ra_in0_out1"), "{out}");
}

#[test]
fn simulate_compares_both_policies() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("kpi.csv");
    let log = dir.path().join("events.log");
    let o = run(&[&"simulate", &scenario("roundabout.toml"), &"--runs", &"5", &"--csv", &csv, &"--log", &log]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    let header = table.lines().next().unwrap();
    assert!(header.contains("optimized") && header.contains("shortest"), "{table}");
    assert_eq!(table.lines().count(), 7, "{table}");

    let rows: Vec<String> = std::fs::read_to_string(&csv).unwrap().lines().map(str::to_owned).collect();
    assert!(rows[0].starts_with("policy,run,"));
    assert_eq!(rows.len(), 1 + 2 * 5);
    let log_text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(log_text.matches("# optimized run ").count(), 5);
    assert_eq!(log_text.matches("# shortest run ").count(), 5);

    // same seed, same files
    let csv2 = dir.path().join("kpi2.csv");
    let log2 = dir.path().join("events2.log");
    let again = run(&[&"simulate", &scenario("roundabout.toml"), &"--runs", &"5", &"--csv", &csv2, &"--log", &log2]);
    assert_eq!(stdout(&again), table);
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&csv2).unwrap());
    assert_eq!(std::fs::read(&log).unwrap(), std::fs::read(&log2).unwrap());
}

#[test]
fn single_policy_has_one_column() {
    let o = run(&[&"simulate", &scenario("toy.toml"), &"--policy", &"shortest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let header = stdout(&o).lines().next().unwrap().to_owned();
    assert!(header.contains("shortest") && !header.contains("optimized"), "{header}");
}

#[test]
fn empty_demand_gives_zero_kpis() {
    let dir = TempDir::new().unwrap();
    let text = r#"
[network]
junctions = ["a", "b", "c", "d"]
streets = [
    { id = "s1", from = "a", to = "b", length = 100.0 },
    { id = "s2", from = "b", to = "c", length = 100.0 },
    { id = "s3", from = "b", to = "d", length = 100.0 },
]
"#;
    let p = write(&dir, "empty.toml", text);
    let o = run(&[&"simulate", &p]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for line in stdout(&o).lines().skip(1) {
        let values: Vec<&str> = line.split_whitespace().rev().take(2).collect();
        assert_eq!(values, ["0.00", "0.00"], "{line}");
    }
}

#[test]
fn help_lists_subcommands() {
    let o = run(&[&"--help"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for cmd in ["preprocess", "solve", "simulate", "check"] {
        assert!(out.contains(cmd), "{out}");
    }
}
