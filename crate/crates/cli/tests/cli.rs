use std::process::{Command, Output};

fn kcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kcl"))
        .args(args)
        .env_remove("KCL_JOBS")
        .output()
        .expect("spawn kcl")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn verdicts(o: &Output) -> Vec<String> {
    let mut r = csv::Reader::from_reader(&o.stdout[..]);
    let idx = r.headers().unwrap().iter().position(|h| h == "verdict").unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn ve_sweep_passes_and_is_reproducible() {
    let a = kcl(&["ve-check", "--random", "30", "--seed", "7", "--jobs", "1"]);
    let b = kcl(&["ve-check", "--random", "30", "--seed", "7", "--jobs", "4"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v = verdicts(&a);
    assert!(v.iter().filter(|x| *x == "PASS").count() > 300);
    assert!(!v.iter().any(|x| x == "FAIL"));
    let c = kcl(&["ve-check", "--random", "30", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn json_output_is_byte_identical() {
    let args = ["flows", "--op", "torus", "--a", "1", "--b", "2", "--p0", "0.1,0.1", "--p1", "0.35,0.6", "--samples", "20000", "--seed", "3", "--format", "json"];
    let a = kcl(&args);
    let b = kcl(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["tool"], "kcl");
    assert_eq!(v["seed"], 3);
    assert_eq!(v["rows"][0]["verdict"], "PASS");
}

#[test]
fn malformed_weights_are_a_schema_error() {
    let sys = r#"{"d":1,"sizes":[3],"weights":["1/3","1/3","4/3"]}"#;
    let o = kcl(&["ve-check", "--system", sys, "--e", "0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("weights sum to 2"));
    assert!(o.stdout.is_empty());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&kcl(&["ve-check", "--random", "3"])), 2);
    assert_eq!(code(&kcl(&["flows", "--op", "window", "--arcs", "0:1/2"])), 2);
    assert_eq!(code(&kcl(&["renewal", "--dist", "exp:-1", "--op", "k", "--seed", "1"])), 2);
    assert_eq!(code(&kcl(&["no-such-command"])), 2);
    assert_eq!(code(&kcl(&["ve-check", "--sizes", "4", "--e", "9"])), 2);
}

#[test]
fn module_errors_exit_three() {
    let o = kcl(&["epodur", "--sizes", "3,3", "--e", "0,4,8", "--horizon", "1", "--z", "2,2"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("poset:"));
    let o = kcl(&["renewal", "--dist", "lattice:2,4:1/2,1/2", "--op", "limit", "--c", "1", "--seed", "1"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("renewal:"));
}

#[test]
fn failed_checks_exit_one() {
    // At n = 4 the triangle is far from its asymptotics, but the exact
    // pair equality still holds.
    let o = kcl(&["torus-demo", "--n", "4"]);
    assert_eq!(code(&o), 1);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("exact=19/16"));
    assert!(text.contains("avg|r.du.| = avg|a.ep.(-)|,n=4,r.du.=19/16;a.ep.(-)=19/16,,,equal,PASS"));
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command":"identities","random":4,"seed":11,"identity":"KAC,SF","max_points":12}"#).unwrap();
    let out = dir.path().join("out.csv");
    let o = kcl(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let direct = kcl(&["identities", "--random", "4", "--seed", "11", "--identity", "KAC,SF", "--max-points", "12"]);
    assert_eq!(std::fs::read(&out).unwrap(), direct.stdout);

    std::fs::write(&cfg, r#"{"command":"identities","bogus_key":1}"#).unwrap();
    assert_eq!(code(&kcl(&["--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn equidecomp_emits_verified_artifacts() {
    let sys = r#"{"d":1,"permutations":[[1,2,0,4,3]]}"#;
    let o = kcl(&["equidecomp", "--system", sys, "--f", "1,0,0,1,0", "--g", "0,0,1,0,1", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["artifacts"][0]["verdict"], "witness");
    assert_eq!(v["rows"][1]["values"], "value=1/2");
    let o = kcl(&["equidecomp", "--system", sys, "--f", "1,0,0,1,1", "--g", "0,0,1,0,1", "--op", "decompose", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["artifacts"][0]["verdict"], "certificate");
    assert_eq!(v["rows"][0]["verdict"], "PASS");
}

#[test]
fn odometer_exhaustive_and_sampled() {
    let o = kcl(&["odometer", "--sizes", "2,2", "--e", "1", "--depth", "2"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("value=1/1"));
    let o = kcl(&["odometer", "--sizes", "4,4", "--e", "0,5", "--depth", "3", "--samples", "5000", "--seed", "9"]);
    assert_eq!(code(&o), 0);
}
