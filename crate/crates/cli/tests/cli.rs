use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fmeanshift"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, kind: &str, n: &str, seed: &str) -> Output {
    run(dir, &["--seed", seed, "simulate", kind, "--n", n, "--grid-points", "31", "--out", "s.csv"])
}

#[test]
fn simulate_writes_labelled_table() {
    let d = tempfile::tempdir().unwrap();
    let o = simulate(d.path(), "elliptical_sincos", "12", "4");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 13);
    assert!(lines[0].starts_with("label,0,"));
    assert_eq!(lines[0].split(',').count(), 32);
    let sample = fmeanshift::io::read_curves_csv::<f64>(d.path().join("s.csv")).unwrap();
    assert_eq!(sample.len(), 12);
    assert_eq!(sample.labels().unwrap().iter().filter(|l| l.as_str() == sample.labels().unwrap()[0]).count(), 6);
}

#[test]
fn scan_table_has_one_row_per_bandwidth() {
    let d = tempfile::tempdir().unwrap();
    assert!(simulate(d.path(), "elliptical_sincos", "20", "1").status.success());
    let o = run(d.path(), &["scan", "--curves", "s.csv", "--values", "100", "--table", "t.csv", "--out", "r.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(d.path().join("t.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "bandwidth,fraction,nonatomic_clusters,clustered_curves,modes");
    assert_eq!(lines.len(), 101);
    let h: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(h.windows(2).all(|w| w[0] < w[1]));
    let report = fmeanshift::io::RunReport::from_toml(&fs::read_to_string(d.path().join("r.toml")).unwrap()).unwrap();
    assert_eq!(report.command, "scan");
    assert_eq!(report.scan.unwrap().bandwidths.len(), 100);
}

#[test]
fn test_modes_reports_both_statistics() {
    let d = tempfile::tempdir().unwrap();
    assert!(simulate(d.path(), "signal_clutter", "30", "3").status.success());
    let o = run(d.path(), &["--seed", "3", "test-modes", "--curves", "s.csv", "--boot", "100", "--table", "t.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("lambda_eigen ="));
    assert!(report.contains("lambda_paper ="));
    assert!(report.contains("sha256 ="));
    let table = fs::read_to_string(d.path().join("t.csv")).unwrap();
    assert!(table.starts_with("mode,cluster_size,atomic,lambda_eigen,lambda_paper,ci_lo,ci_hi,significant"));
    assert!(table.lines().count() >= 2);
}

#[test]
fn same_seed_same_report() {
    let d = tempfile::tempdir().unwrap();
    assert!(simulate(d.path(), "signal_clutter", "24", "9").status.success());
    let once = |seed: &str| {
        let o = run(d.path(), &["--seed", seed, "test-modes", "--curves", "s.csv", "--boot", "100", "--random-split"]);
        assert!(o.status.success(), "{}", stderr(&o));
        o.stdout
    };
    assert_eq!(once("5"), once("5"));
    assert_ne!(once("5"), once("6"));
}

#[test]
fn config_and_io_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert!(simulate(d.path(), "elliptical_sincos", "10", "1").status.success());
    let o = run(d.path(), &["cluster", "--curves", "s.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]"), "{}", stderr(&o));

    let o = run(d.path(), &["cluster", "--curves", "missing.csv", "--bandwidth", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[io]"));

    fs::write(d.path().join("bad.csv"), "0,0.5,1\n1,x,3\n").unwrap();
    let o = run(d.path(), &["cluster", "--curves", "bad.csv", "--bandwidth", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.starts_with("error[parse]") && e.contains("bad.csv"), "{e}");
}

#[test]
fn degenerate_feature_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let sigs = d.path().join("sigs");
    fs::create_dir(&sigs).unwrap();
    // constant velocity: no tangential acceleration at all
    let mut text = String::from("40\n");
    for i in 0..40 {
        text.push_str(&format!("{} {} {}\n", 2 * i, i, 10 * i));
    }
    fs::write(sigs.join("line.txt"), text).unwrap();
    let o = run(d.path(), &["cluster", "--signatures", "sigs", "--bandwidth", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[numerical]"));
}

#[test]
fn failure_leaves_no_partial_output() {
    let d = tempfile::tempdir().unwrap();
    assert!(simulate(d.path(), "elliptical_sincos", "16", "2").status.success());
    // the report destination cannot be created, so the modes table must not appear either
    let o = run(
        d.path(),
        &["cluster", "--curves", "s.csv", "--bandwidth", "1", "--modes-csv", "modes.csv", "--out", "no/such/dir/r.toml"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.path().join("modes.csv").exists());
    let mut names: Vec<String> = fs::read_dir(d.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["s.csv"]);
    assert!(o.stdout.is_empty());

    let o = run(d.path(), &["cluster", "--curves", "s.csv", "--bandwidth", "1", "--modes-csv", "modes.csv", "--out", "r.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.path().join("modes.csv").exists() && d.path().join("r.toml").exists());
}

#[test]
fn baseline_prints_scores_and_clusters() {
    let d = tempfile::tempdir().unwrap();
    assert!(simulate(d.path(), "elliptical_sincos", "20", "1").status.success());
    let o = run(d.path(), &["baseline", "--curves", "s.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "label,pc1,pc2,cluster");
    assert_eq!(lines.len(), 21);
}
