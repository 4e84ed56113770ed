use std::process::{Command, Output};

fn nsqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsqkd")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn rates_noiseless_chsh() {
    let o = nsqkd(&["rates", "--n", "2", "--p", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "N,p,r_opt,I_AB,I_BE_bound,K\n2,1.000000,0.000000,1.000000,0.585786,0.414214\n");
    let echo = String::from_utf8(o.stderr).unwrap();
    assert!(echo.contains("n=2") && echo.contains("p=1") && echo.contains("precision=6"), "{echo}");
}

#[test]
fn rates_at_three_setting_threshold_is_zero() {
    let o = nsqkd(&["rates", "--n", "3", "--p", "0.8889"]);
    assert!(stdout(&o).ends_with(",0.000000\n"));
}

#[test]
fn rates_without_correlations() {
    let o = nsqkd(&["rates", "--n", "2", "--p", "0", "--preprocess"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).ends_with(",0.000000\n"));
}

#[test]
fn precision_flag() {
    let o = nsqkd(&["rates", "--n", "2", "--p", "1", "--precision", "10"]);
    assert!(stdout(&o).ends_with(",0.4142135624\n"), "{}", stdout(&o));
}

#[test]
fn thresholds() {
    let plain = stdout(&nsqkd(&["threshold", "--n", "2"]));
    let v: f64 = plain.trim().parse().unwrap();
    assert!((v - 0.9038).abs() <= 5e-4);
    assert_eq!(plain.trim().split('.').nth(1).unwrap().len(), 5);
    let pre: f64 = stdout(&nsqkd(&["threshold", "--n", "2", "--preprocess"])).trim().parse().unwrap();
    assert!((pre - 0.8740).abs() <= 5e-4);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(nsqkd(&["rates", "--n", "2", "--p", "1.5"]).status.code(), Some(1));
    assert_eq!(nsqkd(&["rates", "--n", "1", "--p", "0.9"]).status.code(), Some(1));
    assert_eq!(nsqkd(&["rates", "--n", "2", "--p", "1", "--bogus"]).status.code(), Some(1));
    assert_eq!(nsqkd(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(nsqkd(&["verify-bounds", "--n", "9"]).status.code(), Some(1));
    let o = nsqkd(&["rates", "--n", "2", "--p", "1.5"]);
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());
}

#[test]
fn curve_is_sorted_and_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = Command::new(env!("CARGO_BIN_EXE_nsqkd"))
            .args(["curve", "--n-list", "5,2,3", "--p-min", "0.9", "--p-max", "1", "--step", "0.05", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert!(!text.contains('\r'));
    let keys: Vec<(usize, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].to_string())
        })
        .collect();
    assert_eq!(keys.len(), 9);
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys[0], (2, "0.900000".to_string()));
}

#[test]
fn curve_to_unwritable_path_fails() {
    let o = nsqkd(&["curve", "--n-list", "2", "--p-min", "0.9", "--p-max", "1", "--step", "0.1", "--out", "/nonexistent/dir/x.csv"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn verify_bounds_reports_tight_minimum() {
    let o = nsqkd(&["verify-bounds", "--n", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("beta,lp_min,bound"));
    assert_eq!(text.lines().count(), 12);
    assert_eq!(text.lines().last(), Some("1.0,1.000000,1.000000"));
}

#[test]
fn simulate_writes_reproducible_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    let mut summaries = Vec::new();
    for path in &paths {
        let o = Command::new(env!("CARGO_BIN_EXE_nsqkd"))
            .args(["simulate", "--n", "2", "--p", "0.95", "--rounds", "20000", "--q", "0.5", "--qprime", "0.5"])
            .args(["--adversarial", "--seed", "11", "--out"])
            .arg(path)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        summaries.push(stdout(&o));
    }
    assert_eq!(summaries[0], summaries[1]);
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
    let transcript = std::fs::read_to_string(&paths[0]).unwrap();
    assert!(transcript.starts_with("round_index,x,y,a,b,sift_tag,eve_component\n"));
    assert_eq!(transcript.lines().count(), 20_001);
    let s = &summaries[0];
    assert!(s.starts_with("quantity,value,std_error\n"));
    for key in ["chain_est,", "qber_est,", "eve_info,", "key_count,", "test_count,", "key_length_bits,"] {
        assert!(s.contains(key), "{s}");
    }
}

#[test]
fn simulate_rejects_bad_probabilities() {
    let o = nsqkd(&["simulate", "--n", "2", "--p", "1", "--rounds", "10", "--q", "1.0", "--qprime", "0.5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
}
