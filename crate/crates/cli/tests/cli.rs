//! End-to-end runs of the `tribokey` binary.

use std::process::{Command, Output};

use serde_json::Value;

fn tribokey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tribokey"))
        .args(args)
        .env_remove("QKD_SEED")
        .output()
        .expect("run tribokey")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn table_one_matches_golden() {
    let out = tribokey(&["tables", "--table", "t1", "--n", "10"]);
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        include_str!("golden/table_i_n10.csv")
    );
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--seed", "7", "--rounds", "300", "--trials", "50",
    ];
    let a = json(&tribokey(&args));
    let b = json(&tribokey(&args));
    assert_eq!(a, b);
    assert_eq!(a["result"]["digests_match"], true);
    assert_eq!(a["result"]["matches_direct"], true);
    let other = json(&tribokey(&[
        "simulate", "--seed", "8", "--rounds", "300", "--trials", "50",
    ]));
    assert_ne!(a["result"]["digest"], other["result"]["digest"]);
}

#[test]
fn seed_from_environment() {
    let run = |env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_tribokey"));
        c.args(["simulate", "--rounds", "100", "--trials", "10"])
            .env_remove("QKD_SEED");
        if let Some(s) = env {
            c.env("QKD_SEED", s);
        }
        json(&c.output().unwrap())["result"]["digest"].clone()
    };
    assert_eq!(
        run(Some("7")),
        json(&tribokey(&[
            "simulate", "--seed", "7", "--rounds", "100", "--trials", "10"
        ]))["result"]["digest"]
    );
    assert_ne!(run(Some("7")), run(Some("8")));
}

#[test]
fn eve_analysis_lists_transcript_keys() {
    let v = json(&tribokey(&["eve-analysis", "--variant", "v0"]));
    let reports = v["result"]
        .as_array()
        .cloned()
        .unwrap_or_else(|| vec![v["result"].clone()]);
    let rows = reports[0]["transcripts"].as_array().unwrap();
    let row = rows.iter().find(|r| r["bits"] == "000").unwrap();
    let keys: Vec<u64> = row["keys"]
        .as_array()
        .unwrap()
        .iter()
        .map(|k| k.as_u64().unwrap())
        .collect();
    assert!(keys.contains(&6) && keys.contains(&11), "{keys:?}");
}

#[test]
fn csv_and_out_file() {
    let dir = std::env::temp_dir().join(format!("tribokey-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rate.csv");
    let out = tribokey(&[
        "rate-sweep",
        "--format",
        "csv",
        "--max-km",
        "20",
        "--step-km",
        "10",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# "));
    assert!(lines.len() > 3);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_supplies_defaults() {
    let dir = std::env::temp_dir().join(format!("tribokey-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cfg.json");
    std::fs::write(&path, r#"{"seed": 7, "rounds": 100, "trials": 10}"#).unwrap();
    let from_file = json(&tribokey(&["simulate", "--config", path.to_str().unwrap()]));
    let from_flags = json(&tribokey(&[
        "simulate", "--seed", "7", "--rounds", "100", "--trials", "10",
    ]));
    assert_eq!(
        from_file["result"]["digest"],
        from_flags["result"]["digest"]
    );
    std::fs::write(&path, r#"{"sede": 7}"#).unwrap();
    assert_eq!(
        tribokey(&["simulate", "--config", path.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes() {
    assert_eq!(tribokey(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(tribokey(&["simulate", "--n", "6"]).status.code(), Some(1));
    assert_eq!(
        tribokey(&["simulate", "--convention", "sideways"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        tribokey(&["tables", "--table", "t1"]).status.code(),
        Some(0)
    );
    assert_eq!(tribokey(&["--help"]).status.code(), Some(0));
}

#[test]
fn parameter_mismatch_exits_two() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let bin = env!("CARGO_BIN_EXE_tribokey");
    let bob = Command::new(bin)
        .args([
            "exchange", "--role", "bob", "--listen", &addr, "--seed", "1", "--rounds", "10",
        ])
        .env_remove("QKD_SEED")
        .stdout(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let alice = tribokey(&[
        "exchange",
        "--role",
        "alice",
        "--connect",
        &addr,
        "--seed",
        "1",
        "--rounds",
        "20",
    ]);
    let bob = bob.wait_with_output().unwrap();
    assert_eq!(alice.status.code(), Some(2));
    assert_eq!(bob.status.code(), Some(2));
}
