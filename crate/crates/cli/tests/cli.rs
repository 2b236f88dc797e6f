use std::path::Path;
use std::process::{Command, Output};

fn zlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn classify_well_posed_point() {
    let o = zlab(&["classify", "--s", "1", "--l", "0", "--d", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "WellPosed");
}

#[test]
fn classify_accepts_fractions() {
    let o = zlab(&["classify", "--s", "1/2", "--l", "0", "--d", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "WellPosed");
}

#[test]
fn zero_period_is_a_validation_error() {
    let o = zlab(&["resonances", "--gamma", "1,0", "--kmax", "4", "--sigma", "1", "--threshold", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("torus") && err.contains("gamma[1] must be > 0"), "{err}");
}

#[test]
fn missing_key_is_named() {
    let o = zlab(&["classify", "--s", "1", "--d", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("params.l"), "{}", stderr(&o));
}

#[test]
fn bad_flag_exits_with_one() {
    let o = zlab(&["classify", "--nonsense", "3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn resonances_contain_known_record() {
    let o = zlab(&["resonances", "--gamma", "1,1", "--kmax", "16", "--sigma", "+1", "--threshold", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    let body = lines.collect::<Vec<_>>().join("\n");
    let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["k1", "k2", "kprime1", "kprime2", "sigma", "M"]
    );
    let found = rdr.records().map(|r| r.unwrap()).any(|r| {
        let v: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
        v[..5] == [9.0, -1.0, 4.0, -10.0, 1.0] && v[5] <= 1.0
    });
    assert!(found);
}

#[test]
fn unknown_config_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"command":"classify","params":{"s":1,"l":0,"d":2,"bogus":1}}"#);
    let o = zlab(&["--config", &cfg, "classify"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));

    let cfg = write(dir.path(), "t.json", r#"{"command":"classify","extra":true}"#);
    let o = zlab(&["--config", &cfg, "classify"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("extra"), "{}", stderr(&o));

    let cfg = write(dir.path(), "g.json", r#"{"torus":{"gamma":[1,1],"gama":[1]},"params":{"kmax":2,"sigma":1,"threshold":1}}"#);
    let o = zlab(&["--config", &cfg, "resonances"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gama"), "{}", stderr(&o));
}

#[test]
fn command_mismatch_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"command":"count","params":{"s":1,"l":0,"d":2}}"#);
    let o = zlab(&["--config", &cfg, "classify"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("command"));
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"command":"classify","params":{"s":1,"l":0,"d":2}}"#);
    let o = zlab(&["--config", &cfg, "classify"]);
    assert_eq!(stdout(&o).trim(), "WellPosed");
    let o = zlab(&["--config", &cfg, "classify", "--s", "0.1", "--l", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_ne!(stdout(&o).trim(), "WellPosed");

    let cfg = write(
        dir.path(),
        "r.json",
        r#"{"seed":9,"torus":{"gamma":[1,1]},"params":{"kmax":3,"sigma":1,"threshold":1}}"#,
    );
    let a = zlab(&["--config", &cfg, "resonances"]);
    let b = zlab(&["--config", &cfg, "resonances", "--gamma", "1,2", "--seed", "4"]);
    let (ha, hb) = (stdout(&a).lines().next().unwrap().to_string(), stdout(&b).lines().next().unwrap().to_string());
    assert!(ha.contains(r#""seed":9"#) && ha.contains(r#""gamma":[1.0,1.0]"#), "{ha}");
    assert!(hb.contains(r#""seed":4"#) && hb.contains(r#""gamma":[1.0,2.0]"#), "{hb}");
}

#[test]
fn seeded_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["count", "--gamma", "1,1.5", "--N", "40", "--mu", "1", "--nu", "2", "--X", "1", "--rotations", "4", "--seed", "11"],
        &["solve", "--gamma", "1,1.5", "--kmax", "3", "--dt", "0.01", "--T", "0.03", "--seed", "2"],
        &["norms", "--gamma", "1,1.5", "--kmax", "3", "--s", "1", "--seed", "5"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let a = dir.path().join(format!("a{i}"));
        let b = dir.path().join(format!("b{i}"));
        for p in [&a, &b] {
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--output", p.to_str().unwrap()]);
            let o = zlab(&full);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "run {i}");
    }
    let o = zlab(&["count", "--gamma", "1,1.5", "--N", "40", "--mu", "1", "--nu", "2", "--X", "1", "--rotations", "4", "--seed", "12"]);
    assert_ne!(stdout(&o).as_bytes(), std::fs::read(dir.path().join("a0")).unwrap().as_slice());
}

#[test]
fn json_outputs_parse_without_nan() {
    let o = zlab(&["inflate", "--case", "iii", "--s", "0.55", "--l", "0.4", "--Nmin", "32", "--Nmax", "128"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(!text.contains("NaN") && !text.contains("Infinity"));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["header"]["command"], "inflate");
    assert_eq!(v["per_N"].as_array().unwrap().len(), 3);
    assert!(v["slope"]["slope"].as_f64().unwrap().abs() < 1e-6);

    let o = zlab(&["solve", "--gamma", "1,1.5", "--kmax", "2", "--dt", "0.01", "--T", "0.02", "--lambda-im", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for line in stdout(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if v.get("header").is_none() {
            assert!(v["hamiltonian"].is_null());
            assert!(v["mass"].as_f64().unwrap() > 0.0);
        }
    }
}

#[test]
fn solve_snapshots_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let snaps = dir.path().join("s.jsonl");
    let o = zlab(&[
        "solve", "--gamma", "1,1.5", "--kmax", "2", "--dt", "0.01", "--T", "0.02", "--snap-every", "1", "--snapshots",
        snaps.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&snaps).unwrap();
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    let u = write(dir.path(), "u.json", &last["u"].to_string());
    let o = zlab(&["norms", "--gamma", "1,1.5", "--kmax", "2", "--u", &u]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["sobolev_norm"].as_f64().unwrap() > 0.0);
}

#[test]
fn norms_csv_has_shell_header() {
    let o = zlab(&["norms", "--gamma", "1,1", "--kmax", "2", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().nth(1), Some("N,L,norm"));
}

#[test]
fn estimate_single_block() {
    let o = zlab(&[
        "estimate", "--gamma", "1,1.4142135623730951", "--class", "VeryLowWave", "--grid-spec", "1,4,4,1,1,1",
        "--restarts", "1", "--seed", "1", "--jobs", "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let row = text.lines().nth(2).unwrap();
    assert!(row.starts_with("single,1,VeryLowWave,1,4,4,1,1,1,1,"), "{row}");
}
