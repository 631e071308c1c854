use std::process::Command;

use proptest::prelude::*;
use sparse_twf::cli::pgm::{load_pgm, write_pgm};
use sparse_twf::cli::{
    format_real, main_with_args, parse_args, read_records, write_records, CliError, Format,
    SubcommandKind,
};
use sparse_twf::experiments::{inv_snr, ConvergenceRecord, ExperimentRecord};
use sparse_twf::linalg::Mat;
use sparse_twf::model::Link;
use sparse_twf::Error;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-twf"))
}

fn record(trial: usize, cosine_error: f64) -> ExperimentRecord {
    ExperimentRecord {
        trial,
        link: Link::H2,
        p: 1000,
        s: 5,
        n: 863,
        inv_snr: inv_snr(5, 1000, 863),
        cosine_error,
        dist: (2.0 * cosine_error).sqrt(),
        iterations: 17,
        support_ok_all_iters: trial % 2 == 0,
        seed: u64::MAX - trial as u64,
        error: None,
    }
}

#[test]
fn fig2_flag_keeps_other_defaults() {
    let cfg = parse_args(&["fig2", "--n", "863"]).unwrap();
    assert_eq!(cfg.subcommand, SubcommandKind::Fig2);
    let fig = cfg.fig2_config().unwrap();
    assert_eq!((fig.p, fig.s, fig.n, fig.trials), (1000, 5, 863, 50));
    assert_eq!((fig.total_iters, fig.report_range), (1000, (101, 300)));
    assert_eq!(cfg.init.gamma, 2.0);
    assert!(!cfg.init.split);
    assert_eq!((cfg.twf.kappa, cfg.twf.eta, cfg.twf.tol), (15.0, 0.005, 1e-4));
    assert_eq!(cfg.sigma, 1.0);
    assert_eq!(cfg.format, Format::Csv);
}

#[test]
fn flag_beats_config_beats_default() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"eta": 0.01, "kappa": 9.0, "n": [500, 1000], "link": "h3", "split": true}"#).unwrap();
    let p = path.to_str().unwrap();
    let cfg = parse_args(&["simulate", "--config", p, "--eta", "0.002"]).unwrap();
    assert_eq!(cfg.twf.eta, 0.002);
    assert_eq!(cfg.twf.kappa, 9.0);
    assert_eq!(cfg.twf.tol, 1e-4);
    assert!(cfg.init.split);
    assert_eq!(cfg.link, Some(vec![Link::H3]));
    assert_eq!(cfg.n, Some(vec![500, 1000]));
    // Two sample sizes are fine for a sweep but not for one trial.
    assert!(cfg.fig1_config().n_values == vec![500, 1000]);
    assert!(cfg.sim_config().is_err());

    let cfg = parse_args(&["fig1", "--config", p, "--split", "false", "--n", "200,400", "--link", "h1,h2"]).unwrap();
    assert!(!cfg.init.split);
    assert_eq!(cfg.fig1_config().n_values, vec![200, 400]);
    assert_eq!(cfg.fig1_config().links, vec![Link::H1, Link::H2]);
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"etta": 0.01}"#).unwrap();
    let err = parse_args(&["fig1", "--config", path.to_str().unwrap()]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    std::fs::write(&path, r#"{"max-iter": 10}"#).unwrap();
    assert!(parse_args(&["fig1", "--config", path.to_str().unwrap()]).is_err());
    std::fs::write(&path, r#"{"max_iter": 10}"#).unwrap();
    assert_eq!(parse_args(&["fig1", "--config", path.to_str().unwrap()]).unwrap().twf.max_iter, 10);
}

#[test]
fn usage_errors_exit_two() {
    for argv in [
        vec!["bogus"],
        vec![],
        vec!["fig1", "--nope"],
        vec!["fig1", "--n", "ten"],
        vec!["simulate", "--link", "h9"],
        vec!["simulate", "--kappa", "-1"],
        vec!["simulate", "--parallelism", "0"],
    ] {
        let err = parse_args(&argv).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{argv:?}: {err}");
        assert!(matches!(err, CliError::Usage(_)));
    }
    assert!(matches!(parse_args(&["--help"]).unwrap_err(), CliError::Help(_)));
    assert_eq!(main_with_args(&["simulate", "--p", "10", "--s", "20"]), 2);
}

#[test]
fn binary_exit_codes() {
    let out = bin().arg("bogus").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = bin().args(["gradcheck", "--trials", "20"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    let out = bin().args(["image", "--image", "/nonexistent/x.pgm"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin()
        .args(["fig1", "--p", "20", "--s", "2", "--n", "200", "--link", "h1", "--trials", "2", "--out", "/nonexistent/dir/out.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_prints_json_summary() {
    let out = bin()
        .args(["simulate", "--p", "50", "--s", "2", "--n", "2000", "--link", "square", "--sigma", "0", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["cosine_error"].as_f64().unwrap() < 0.05);
    assert_eq!(v["config"]["p"], 50);
}

#[test]
fn fig1_csv_from_binary_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig1.csv");
    let args = ["fig1", "--p", "30", "--s", "2", "--n", "300,600", "--link", "h1", "--trials", "3", "--seed", "5"];
    let status = bin().args(args).arg("--out").arg(&path).output().unwrap().status;
    assert!(status.success());
    let records: Vec<ExperimentRecord> = read_records(&path, Format::Csv).unwrap();
    assert_eq!(records.len(), 6);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("trial,link,p,s,n,inv_snr,cosine_error,dist,iterations,support_ok_all_iters,seed\n"));

    let again = dir.path().join("again.csv");
    let status = bin()
        .args(args)
        .args(["--parallelism", "3", "--out"])
        .arg(&again)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn fig2_writes_records_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig2.csv");
    let status = bin()
        .args(["fig2", "--p", "40", "--n", "400", "--s", "2", "--link", "h1", "--trials", "2", "--max-iter", "120"])
        .arg("--out")
        .arg(&path)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let records: Vec<ConvergenceRecord> = read_records(&path, Format::Csv).unwrap();
    assert!(records.iter().all(|r| (101..=120).contains(&r.t)));
    let agg = std::fs::read_to_string(dir.path().join("fig2.aggregate.csv")).unwrap();
    assert!(agg.starts_with("link,t,mean,stderr,count\n"));
}

#[test]
fn image_round_trip_through_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("in.pgm");
    let img = sparse_twf::experiments::synthetic_image(40, 40, 4).unwrap();
    write_pgm(&src, &img).unwrap();
    assert_eq!(load_pgm(&src).unwrap(), img);
    let dst = dir.path().join("out.pgm");
    let out = bin()
        .args(["image", "--rank-s", "1", "--n-mult", "60", "--link", "square", "--sigma", "0"])
        .arg("--image")
        .arg(&src)
        .arg("--out")
        .arg(&dst)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["alignment"].as_f64().unwrap() >= 0.999);
    let rec = load_pgm(&dst).unwrap();
    assert_eq!((rec.rows(), rec.cols()), (40, 40));
}

#[test]
fn pgm_files_p2_p5_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let p2 = dir.path().join("a.pgm");
    std::fs::write(&p2, "P2\n2 2\n255\n0 255\n255 0\n").unwrap();
    let p5 = dir.path().join("b.pgm");
    let mut bytes = b"P5 2 2 255\n".to_vec();
    bytes.extend([0u8, 255, 255, 0]);
    std::fs::write(&p5, &bytes).unwrap();
    let expected = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    assert_eq!(load_pgm(&p2).unwrap(), expected);
    assert_eq!(load_pgm(&p5).unwrap(), expected);
    bytes.pop();
    std::fs::write(&p5, &bytes).unwrap();
    let err = load_pgm(&p5).unwrap_err();
    match err {
        Error::Context { source, .. } => assert!(matches!(*source, Error::Parse { offset: 14, .. })),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn empty_and_single_record_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.csv");
    write_records::<ExperimentRecord>(&[], &path, Format::Csv).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "trial,link,p,s,n,inv_snr,cosine_error,dist,iterations,support_ok_all_iters,seed\n"
    );
    let one = vec![record(0, 1.0 / 3.0)];
    write_records(&one, &path, Format::Csv).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().contains(",0.33333333333333331,"));
    assert_eq!(read_records::<ExperimentRecord>(&path, Format::Csv).unwrap(), one);
    let json = dir.path().join("e.json");
    write_records(&one, &json, Format::Json).unwrap();
    assert_eq!(read_records::<ExperimentRecord>(&json, Format::Json).unwrap(), one);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v[0]["support_ok_all_iters"], true);
}

#[test]
fn write_to_missing_directory_fails() {
    let err = write_records::<ExperimentRecord>(&[], "/nonexistent/dir/x.csv", Format::Csv).unwrap_err();
    assert!(matches!(err, Error::Io(_)));
}

proptest! {
    #[test]
    fn csv_reals_round_trip_exactly(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        let back: f64 = format_real(v).parse().unwrap();
        if v.is_nan() {
            prop_assert!(back.is_nan());
        } else {
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn convergence_records_round_trip(
        rows in proptest::collection::vec((0usize..50, 1usize..1000, any::<f64>(), -40.0f64..0.0), 0..20)
    ) {
        let records: Vec<ConvergenceRecord> = rows
            .into_iter()
            .filter(|r| r.2.is_finite())
            .map(|(trial, t, err_t, log_gap)| ConvergenceRecord { trial, link: Link::H3, t, err_t, log_gap })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_records(&records, &path, Format::Csv).unwrap();
        prop_assert_eq!(read_records::<ConvergenceRecord>(&path, Format::Csv).unwrap(), records);
    }

    #[test]
    fn stored_inv_snr_matches_formula(s in 1usize..20, p in 20usize..5000, n in 2usize..100_000) {
        let r = ExperimentRecord { s, p, n, inv_snr: inv_snr(s, p, n), ..record(0, 0.1) };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_records(std::slice::from_ref(&r), &path, Format::Csv).unwrap();
        let back = &read_records::<ExperimentRecord>(&path, Format::Csv).unwrap()[0];
        prop_assert!((back.inv_snr - s as f64 * ((p as f64).ln() / n as f64).sqrt()).abs() <= 1e-12);
    }
}
