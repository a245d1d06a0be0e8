use std::path::PathBuf;
use std::process::{Command, Output};

fn jsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jsr")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("jsr-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn estimate_finds_long_product() {
    let o = jsr(&["estimate", "-f", "C15"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("1^15 2"), "{}", stdout(&o));
}

#[test]
fn exact_on_fixture_exits_zero() {
    let o = jsr(&["exact", "-f", "C15", "-q"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("JSR = 1.068939106"), "{}", stdout(&o));
}

#[test]
fn bounds_only_exits_one() {
    let o = jsr(&["exact", "-f", "C15", "--candidates", "1 2", "--max-iterations", "2", "-q"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn malformed_file_reports_line() {
    let p = scratch("bad.txt", "2 1\n1 2\n3 x\n");
    let o = jsr(&["exact", "-i", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn complex_leading_exits_four() {
    let p = scratch("rot.txt", "2 1\n0 -2\n2 0\n");
    let o = jsr(&["exact", "-i", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn capacity_of_pp() {
    let o = jsr(&["--json", "capacity", "pp"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let cap = &v["capacity"];
    assert!((cap[0].as_f64().unwrap() - 0.5).abs() < 1e-9, "{v}");
    assert!((cap[1].as_f64().unwrap() - 0.5).abs() < 1e-9, "{v}");
}

#[test]
fn daubechies_regularity() {
    let o = jsr(&["regularity", "--daubechies", "2", "-q"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0.5500"), "{}", stdout(&o));
}

#[test]
fn mask_file_regularity() {
    let p = scratch("mask.txt", "dilation -3\n3/12\n3/12\n4/12\n3/12\n3/12\n4/12\n3/12\n3/12\n4/12\n3/12\n3/12\n");
    let o = jsr(&["--json", "regularity", "--mask", p.to_str().unwrap(), "--order", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let a = v["holder"][0].as_f64().unwrap();
    assert!((a - 0.9413).abs() < 5e-4, "{v}");
}

#[test]
fn trace_rows_match_iterations() {
    let p = scratch("trace.csv", "");
    let o = jsr(&["--json", "exact", "-f", "C15", "--trace", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("iteration,vertices,selected,added,b,"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    assert_eq!(rows.len() as u64, v["iterations"].as_u64().unwrap(), "{v}");
    let b: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(b.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn single_thread_is_deterministic() {
    let a = jsr(&["--threads", "1", "--json", "exact", "-f", "subdiv-example", "-q"]);
    let b = jsr(&["--threads", "1", "--json", "exact", "-f", "subdiv-example", "-q"]);
    fn drop_times(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(m) => {
                m.remove("elapsed_ms");
                m.values_mut().for_each(drop_times);
            }
            serde_json::Value::Array(a) => a.iter_mut().for_each(drop_times),
            _ => {}
        }
    }
    let strip = |o: &Output| {
        let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        drop_times(&mut v);
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn fixtures_listing() {
    let o = jsr(&["fixtures"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("X119"));
}
