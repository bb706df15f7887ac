use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(format!("{name}.json"))
}

fn darboux(args: &[&str], out: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_darboux"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn default_identities_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = darboux(&["identities"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir.path().join("identities.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["tool"], "darboux");
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["scenario_hash"].as_str().unwrap().len(), 64);
    // every margin is logged
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("crum_k3") && stdout.contains("hermiticity_spread"));
}

#[test]
fn sum_of_auxiliaries_exits_with_a_check_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = darboux(&["identities", "--scenario", scenario("v_sum").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-Hermitizable"));
    let report = read_json(dir.path().join("identities.json"));
    assert_eq!(report["passed"], false);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let odd = darboux(&["identities", "--scenario", scenario("odd_n").to_str().unwrap()], dir.path());
    assert_eq!(odd.status.code(), Some(2));
    assert!(!dir.path().join("identities.json").exists());
    let missing = darboux(&["residuals", "--scenario", "/nonexistent.json"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    let small = darboux(&["residuals", "--grid-points", "10"], dir.path());
    assert_eq!(small.status.code(), Some(2));
    let hbar = darboux(&["residuals", "--hbar", "-1"], dir.path());
    assert_eq!(hbar.status.code(), Some(2));
    let no_transform = darboux(&["potential", "--scenario", scenario("free_particle").to_str().unwrap()], dir.path());
    assert_eq!(no_transform.status.code(), Some(2));
    let unknown = darboux(&["wiggle"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn typo_in_a_scenario_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("default")).unwrap().replace("\"track_extremum\"", "\"track_extremun\"");
    let path = dir.path().join("typo.json");
    std::fs::write(&path, text).unwrap();
    let out = darboux(&["potential", "--scenario", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("track_extremun"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let path = scenario("inverse_square");
    let args = ["residuals", "--scenario", path.to_str().unwrap(), "--seed", "11"];
    assert_eq!(darboux(&args, a.path()).status.code(), Some(0));
    assert_eq!(darboux(&args, b.path()).status.code(), Some(0));
    for f in ["residuals.json", "residuals.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn overrides_change_the_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    darboux(&["identities", "--seed", "1"], a.path());
    darboux(&["identities", "--seed", "2", "--hbar", "0.5"], b.path());
    let ra = read_json(a.path().join("identities.json"));
    let rb = read_json(b.path().join("identities.json"));
    assert_ne!(ra["scenario_hash"], rb["scenario_hash"]);
    assert_eq!(rb["seed"], 2);
}

#[test]
fn potential_writes_the_samples_and_the_track() {
    let dir = tempfile::tempdir().unwrap();
    let out = darboux(&["potential"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("deltaV.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x,deltaV"));
    let track = std::fs::read_to_string(dir.path().join("extremum.csv")).unwrap();
    assert_eq!(track.lines().next(), Some("t,x,depth"));
    // the feature moves with x_p = cos t
    let xs: Vec<f64> = track.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi - lo > 1.9, "{lo} {hi}");
}

#[test]
fn free_particle_evolve_matches_the_spreading_packet() {
    let dir = tempfile::tempdir().unwrap();
    let out = darboux(&["evolve", "--scenario", scenario("free_particle").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir.path().join("evolve.json"));
    let check = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "evolve_l2_deviation").unwrap();
    assert!(check["value"].as_f64().unwrap() < 1e-5);
    assert!(dir.path().join("evolve.csv").exists());
}
