use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bitcompose")).args(args).output().unwrap()
}

fn body(out: &Output) -> Vec<String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn dse_default_grid() {
    let out = run(&["dse", "--slices", "1,2"]);
    assert!(out.status.success());
    let rows = body(&out);
    assert_eq!(rows.len(), 11);
    let p = rows.iter().find(|r| r.starts_with("2,16,")).unwrap();
    let power: f64 = p.split(',').nth(2).unwrap().parse().unwrap();
    assert!((power - 0.5).abs() < 0.075, "{power}");
}

#[test]
fn missing_params_file_is_input_error() {
    let out = run(&["dse", "--params", "/nonexistent/params.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["dse", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["compare", "--network", "rnn", "--config", "style=vector"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--network", "rnn", "--memory", "custom"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_network_is_input_error() {
    assert_eq!(run(&["simulate", "--network", "mobilenet"]).status.code(), Some(2));
}

#[test]
fn self_compare_is_unity() {
    let out = run(&["compare", "--network", "cifar10", "--config", "style=scalar", "--config", "style=scalar"]);
    assert!(out.status.success());
    for row in body(&out).iter().skip(1) {
        let f: Vec<_> = row.split(',').collect();
        assert_eq!(&f[6..], ["1.000000", "1.000000"], "{row}");
    }
}

#[test]
fn conventional_warns_on_heterogeneous() {
    let out = run(&["simulate", "--network", "cifar10", "--style", "conventional"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning:"));
    let quiet = run(&["simulate", "--network", "cifar10", "--style", "conventional", "--homogeneous"]);
    assert!(!stderr(&quiet).contains("warning:"));
}

#[test]
fn out_flag_writes_file_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("alexnet.csv");
    let out = run(&["simulate", "--network", "alexnet", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# command: simulate"));
    assert!(text.contains("# input network:alexnet: sha256:"));
    assert!(stderr(&out).contains("manifest sha256:"));
}

#[test]
fn most_conv_layers_compute_bound() {
    let out = run(&["simulate", "--network", "vgg16", "--homogeneous"]);
    let rows = body(&out);
    let conv: Vec<_> = rows.iter().filter(|r| r.split(',').nth(1) == Some("conv")).collect();
    let compute = conv.iter().filter(|r| r.ends_with(",compute")).count();
    assert!(2 * compute > conv.len(), "{compute} of {}", conv.len());
}

#[test]
fn network_file_matches_bundled_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rnn.toml");
    std::fs::write(&path, bitcompose::workloads::bundled_source("rnn").unwrap()).unwrap();
    let a = run(&["simulate", "--network", "rnn"]);
    let b = run(&["simulate", "--network", path.to_str().unwrap()]);
    assert_eq!(body(&a), body(&b));
}
