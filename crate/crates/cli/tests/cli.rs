use std::path::Path;
use std::process::{Command, Output};

fn vlsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlsf"))
        .args(args)
        .env_remove("VLSF_THREADS")
        .output()
        .expect("failed to start the binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn small_experiment(out: &Path, plot: &Path, threads: &str) -> Output {
    vlsf(&[
        "--threads",
        threads,
        "experiment",
        "run",
        "--channel1",
        "bsc:0.11",
        "--channel2",
        "bsc:0.11",
        "--eps",
        "0.05",
        "--l",
        "100,200",
        "--trials",
        "2000",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
        "--plot",
        plot.to_str().unwrap(),
    ])
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(vlsf(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        vlsf(&["bounds", "converse", "--channel1", "bsc:0.11"]).status.code(),
        Some(2)
    );
    let o = vlsf(&[
        "bounds",
        "converse",
        "--channel1",
        "bsc:0.11",
        "--channel2",
        "bsc:0.11",
        "--eps",
        "0.05",
        "--l",
        "",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = vlsf(&[
        "bounds",
        "converse",
        "--channel1",
        "bsc:0.11",
        "--channel2",
        "bsc:0.11",
        "--eps",
        "1.2",
        "--l",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_channels_exit_with_one() {
    let o = vlsf(&["channel", "validate", "bsc:1.5"]);
    assert_eq!(o.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"input_size":2,"output_size":2,"rows":[[0.5,0.6],[0.5,0.5]]}"#).unwrap();
    let o = vlsf(&["channel", "validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let good = dir.path().join("good.json");
    std::fs::write(
        &good,
        r#"{"input_size":2,"output_size":2,"rows":[[0.4,0.6],[0.5,0.5]]}"#,
    )
    .unwrap();
    let o = vlsf(&["channel", "validate", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = vlsf(&["channel", "validate", "bsc:0.11", "bec:0.2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn critical_epsilon_is_printed() {
    let o = vlsf(&["asymptotics", "critical-eps"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.1968).abs() < 5e-4);
}

#[test]
fn simulation_output_is_reproducible() {
    let args = [
        "simulate",
        "vlsf",
        "--channel1",
        "bsc:0.11",
        "--channel2",
        "bsc:0.2",
        "--gamma",
        "20",
        "--trials",
        "3000",
        "--seed",
        "5",
    ];
    let a = vlsf(&args);
    let b = vlsf(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let mut other = args.to_vec();
    let last = other.len() - 1;
    other[last] = "6";
    assert_ne!(vlsf(&other).stdout, a.stdout);
}

#[test]
fn converse_csv_has_one_row_per_blocklength() {
    let o = vlsf(&[
        "bounds",
        "converse",
        "--channel1",
        "bsc:0.11",
        "--channel2",
        "bsc:0.11",
        "--eps",
        "0.05",
        "--l",
        "50,100",
        "--clt",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "l,log_m_nats,log_m_bits,mode,certified");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("50,"));
    assert!(lines[2].contains(",clt,false"));
}

#[test]
fn exact_converse_rows_are_certified() {
    let o = vlsf(&[
        "bounds",
        "converse",
        "--channel1",
        "bsc:0.11",
        "--channel2",
        "bsc:0.11",
        "--eps",
        "0.05",
        "--l",
        "50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let nats: f64 = row[1].parse().unwrap();
    let bits: f64 = row[2].parse().unwrap();
    assert!((bits - nats / 2f64.ln()).abs() < 1e-9);
    assert_eq!(&row[3..], ["exact", "true"]);
}

#[test]
fn experiment_failure_leaves_no_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let plot = dir.path().join("missing").join("run.gp");
    let o = small_experiment(&out, &plot, "1");
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn experiment_rows_are_ordered_and_plot_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let plot = dir.path().join("run.gp");
    let o = small_experiment(&out, &plot, "2");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "l,converse_logm,achiev_logm,achiev_stderr,asym_lower,asym_upper,eps,seed,labels"
    );
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let converse: f64 = f[1].parse().unwrap();
        let achiev: f64 = f[2].parse().unwrap();
        assert!(converse > achiev, "{line}");
        assert_eq!(f[7], "7");
        assert!(f[8].contains("achiev=montecarlo"));
    }
    assert!(std::fs::read_to_string(&plot).unwrap().contains("run.csv"));
}
