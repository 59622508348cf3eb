use std::path::PathBuf;
use std::process::{Command, Output};

fn hsbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsbp")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("hsbp-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let k = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[k].to_string()).collect()
}

#[test]
fn solve_all_paths_agree() {
    let o = hsbp(&["solve", "--mesh", "two-block", "--order", "2", "--path", "all"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(column(&out, "path"), ["monolithic", "trace", "volume"]);
    for d in column(&out, "max_difference") {
        assert!(d.parse::<f64>().unwrap() < 1e-8);
    }
    assert!(String::from_utf8_lossy(&o.stderr).contains("path agreement"));
}

#[test]
fn all_neumann_reports_singular() {
    let o = hsbp(&["spd-check", "--config", "all-neumann", "--samples", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let res = column(&out, "result");
    assert_eq!(res.len(), 12);
    assert!(res.iter().all(|r| r == "singular"));
}

#[test]
fn neumann_and_global_checks_pass() {
    for cfg in ["neumann3", "two-block"] {
        let o = hsbp(&["spd-check", "--config", cfg, "--samples", "3", "--order", "4"]);
        assert_eq!(o.status.code(), Some(0), "{cfg}");
        assert!(column(&stdout(&o), "result").iter().all(|r| r == "positive"));
    }
}

#[test]
fn counts_match_refinement_formula() {
    let o = hsbp(&["counts", "--mesh", "builtin:disk56", "--levels", "2"]);
    let out = stdout(&o);
    assert_eq!(column(&out, "volume_points"), ["18144", "68600"]);
    assert_eq!(column(&out, "trace_points"), ["1728", "3360"]);
    assert_eq!(column(&out, "ratio"), ["10.5", "20.4"]);
}

#[test]
fn output_is_deterministic() {
    let a = hsbp(&["tau-sweep", "--order", "2", "--seed", "9"]);
    let b = hsbp(&["tau-sweep", "--order", "2", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let scales = column(&stdout(&a), "tau_scale");
    assert_eq!(scales.len(), 11);
}

#[test]
fn converge_writes_rates() {
    let dir = scratch("converge");
    let o = hsbp(&["converge", "--order", "2", "--levels", "2", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.join("converge.csv")).unwrap();
    let rates = column(&text, "volume_rate");
    assert_eq!(rates[0], "");
    let r: f64 = rates[1].parse().unwrap();
    assert!((r - 2.0).abs() < 0.2, "{r}");
}

#[test]
fn config_errors_exit_2() {
    for args in [
        &["solve", "--order", "3"][..],
        &["solve", "--order", "4", "--n", "4"],
        &["solve", "--tau-scale", "0.5"],
        &["solve", "--mesh", "/nonexistent/mesh.txt"],
        &["solve", "--mesh", "builtin:nope"],
        &["bogus"],
    ] {
        let o = hsbp(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn mesh_file_is_read_not_modified() {
    let dir = scratch("meshfile");
    let path = dir.join("two.mesh");
    let text = "block 0 0 1 0 1 1 0 1\nblock 1 0 2 0 2 1 1 1\niface 1 2 2 1 aligned\n\
                bc 1 1 D\nbc 1 3 D\nbc 1 4 N\nbc 2 2 D\nbc 2 3 D\nbc 2 4 N\n";
    std::fs::write(&path, text).unwrap();
    let o = hsbp(&["solve", "--mesh", path.to_str().unwrap(), "--order", "4", "--n", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let err: f64 = column(&stdout(&o), "max_error")[0].parse().unwrap();
    assert!(err < 1e-10);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);

    std::fs::write(&path, "block 0 0 1 0\n").unwrap();
    let o = hsbp(&["solve", "--mesh", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn export_writes_readable_matrices() {
    let dir = scratch("export");
    let o = hsbp(&["export", "--order", "2", "--n", "4", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let mono = std::fs::read_to_string(dir.join("monolithic.mtx")).unwrap();
    let m = hsbp::export::read_matrix_market(&mono).unwrap();
    assert_eq!(m.nrows, 2 * 25 + 5);
    assert_eq!(m.asymmetry(), 0.0);
    let s = hsbp::export::read_matrix_market(&std::fs::read_to_string(dir.join("trace_schur.mtx")).unwrap()).unwrap();
    assert_eq!(s.nrows, 5);
    let pattern = std::fs::read_to_string(dir.join("monolithic_sparsity.csv")).unwrap();
    assert_eq!(pattern.lines().count(), m.nnz() + 1);
}
