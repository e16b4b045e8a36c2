use std::process::{Command, Output};

use serde_json::Value;

fn levy_exit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levy-exit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_lines(o: &Output) -> Vec<Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn without_seconds(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("seconds");
    v
}

#[test]
fn compute_survival_table() {
    let o = levy_exit(&["compute", "survival", "--model", "bm:mu=1,sigma=1.4142", "--lambda", "1", "--u", "0:2:0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u,phi,phi_hat"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][1], 0.0);
    for r in &rows {
        assert!(r[1] <= r[2] && r[2] <= 1.0, "{r:?}");
    }
}

#[test]
fn verify_two_ids() {
    let o = levy_exit(&["verify", "--ids", "I1,I4", "--n", "1e6", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = json_lines(&o);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["identity_id"], "I1");
    assert_eq!(rows[1]["identity_id"], "I4");
    for r in &rows {
        assert_eq!(r["pass"], true);
        assert_eq!(r["n"], 1_000_000);
        assert!(r["z"].as_f64().unwrap() < 4.0);
    }
}

#[test]
fn verify_all_is_reproducible() {
    let args = ["verify", "--ids", "all", "--n", "2e4", "--seed", "3"];
    let first = levy_exit(&args);
    let second = levy_exit(&args);
    let (a, b) = (json_lines(&first), json_lines(&second));
    assert_eq!(a.len(), 13);
    let ids: Vec<String> = a.iter().map(|r| r["identity_id"].as_str().unwrap().to_string()).collect();
    assert_eq!(ids, (1..=13).map(|i| format!("I{i}")).collect::<Vec<_>>());
    for (x, y) in a.into_iter().zip(b) {
        assert_eq!(without_seconds(x), without_seconds(y));
    }
}

#[test]
fn dumped_config_reloads() {
    let o = levy_exit(&["simulate", "--dump-config", "--u", "1.25", "--alpha", "0.1", "--lower", "parisian:3"]);
    assert_eq!(o.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, stdout(&o)).unwrap();
    let again = levy_exit(&["simulate", "--dump-config", "--config", path.to_str().unwrap()]);
    assert_eq!(stdout(&again), stdout(&o));
    assert!(stdout(&o).contains("lower = \"parisian:3\""));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "u = 1.0\nalpha = 0.2\nn = 5000\nseed = 11\n").unwrap();
    let o = levy_exit(&["simulate", "--config", path.to_str().unwrap(), "--u", "0.25"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = json_lines(&o);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["u"], 0.25);
    assert_eq!(rows[0]["alpha"], 0.2);
    assert_eq!(rows[0]["n"], 5000);
    assert_eq!(rows[0]["seed"], 11);
    let closed = rows[0]["closed_form"].as_f64().unwrap();
    let (mean, se) = (rows[0]["mean"].as_f64().unwrap(), rows[0]["std_error"].as_f64().unwrap());
    assert!((mean - closed).abs() < 5.0 * se);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "lamda = 2.0\n").unwrap();
    let o = levy_exit(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(levy_exit(&["verify", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(levy_exit(&["compute", "survival", "--lambda", "-1"]).status.code(), Some(1));
    let jd = "jd:mu=1,sigma=1,up_rate=0.5,up=exp(2),down_rate=0.5,down=exp(1)";
    assert_eq!(levy_exit(&["compute", "phi", "--model", jd]).status.code(), Some(1));
    assert_eq!(levy_exit(&["--help"]).status.code(), Some(0));
}

#[test]
fn out_file_and_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wh.csv");
    let o = levy_exit(&["compute", "wh", "--alpha", "0,0.5", "--beta", "0.3", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);

    let o = levy_exit(&["verify", "--ids", "I1", "--n", "1e4", "--format", "csv"]);
    let text = stdout(&o);
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("identity_id,lhs,rhs,se_lhs,se_rhs,z,n,seed,seconds,pass"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn json_numbers_round_trip() {
    let o = levy_exit(&["compute", "phi", "--alpha", "0.1,0.7", "--format", "json"]);
    for line in stdout(&o).lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        for (_, x) in v.as_object().unwrap() {
            if let Some(f) = x.as_f64() {
                let text = format!("{f:.16e}");
                assert!(line.contains(&text), "{line} lacks {text}");
            }
        }
    }
}
