//! Interface contract of the `eqp` binary: flag precedence, exit codes,
//! format equivalence, and agreement with direct library calls.

use std::collections::BTreeMap;
use std::process::{Command, Output};

use eqp::equilibrium::equilibrium_price;
use eqp::model::{CallContract, MarketParams};
use eqp::numerics::Probability;
use eqp::physical::prob_positive_return;

fn eqp_cmd() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_eqp"));
    // keep the ambient environment from leaking into precedence tests
    cmd.env_remove("EQP_DAY_COUNT");
    cmd.env_remove("RAYON_NUM_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    eqp_cmd().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> (String, String) {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    (
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn exit_code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

/// Header + first data row of a one-record CSV.
fn csv_record(stdout: &str) -> BTreeMap<String, String> {
    let mut lines = stdout.lines();
    let header = lines.next().expect("header row");
    let row = lines.next().expect("data row");
    header
        .split(',')
        .map(str::to_string)
        .zip(row.split(',').map(str::to_string))
        .collect()
}

fn field_f64(rec: &BTreeMap<String, String>, key: &str) -> f64 {
    rec[key].parse().unwrap_or_else(|_| panic!("field {key} = {:?} not a number", rec[key]))
}

#[test]
fn zero_premium_at_knife_edge_drift_gives_one_quarter() {
    let (stdout, _) = run_ok(&[
        "prob", "--premium", "0", "--s0", "100", "--strike", "100", "--mu", "0.005", "--sigma",
        "0.1", "--ttm-days", "60", "--rate", "0.05",
    ]);
    let rec = csv_record(&stdout);
    assert_eq!(rec["p"], "0.25");
    assert_eq!(field_f64(&rec, "n_e1"), 0.5);
    assert_eq!(field_f64(&rec, "n_e2"), 0.5);
}

#[test]
fn equilibrium_quote_prints_value_and_status() {
    let (stdout, _) = run_ok(&[
        "price-eq", "--s0", "100", "--strike", "100", "--mu", "0.05", "--sigma", "0.1", "--rate",
        "0.05", "--ttm-days", "60", "--target-p", "0.2",
    ]);
    let rec = csv_record(&stdout);
    assert_eq!(rec["status"], "priced");

    let m = MarketParams::new(100.0, 0.05, 0.1, 0.05, 365).unwrap();
    let c = CallContract::from_days(100.0, 60.0, &m).unwrap();
    let quote = equilibrium_price(&m, &c, Probability::new(0.2).unwrap()).unwrap();
    // shortest round-trip printing must reproduce the library value bit for bit
    assert_eq!(field_f64(&rec, "value"), quote.value.unwrap());
    assert_eq!(field_f64(&rec, "raw_value"), quote.raw_value.unwrap());
    assert_eq!(field_f64(&rec, "exercise_p"), quote.exercise_p.value());
}

#[test]
fn the_binary_adds_no_numerics_of_its_own() {
    let m = MarketParams::new(123.0, -0.07, 0.31, 0.021, 360).unwrap();
    let c = CallContract::from_days(117.5, 91.0, &m).unwrap();

    let (stdout, _) = run_ok(&[
        "price-bs", "--s0", "123", "--strike", "117.5", "--sigma", "0.31", "--rate", "0.021",
        "--ttm-days", "91", "--day-count", "360",
    ]);
    let bs = eqp::bs::bs_price(&m, &c);
    assert_eq!(field_f64(&csv_record(&stdout), "bs_value"), bs);

    let (stdout, _) = run_ok(&[
        "prob", "--s0", "123", "--strike", "117.5", "--mu", "-0.07", "--sigma", "0.31", "--rate",
        "0.021", "--ttm-days", "91", "--day-count", "360", "--use-bs",
    ]);
    let rec = csv_record(&stdout);
    let r = prob_positive_return(&m, &c, bs).unwrap();
    assert_eq!(field_f64(&rec, "p"), r.p.value());
    assert_eq!(field_f64(&rec, "e1"), r.e1);
    assert_eq!(field_f64(&rec, "e2"), r.e2);
    assert_eq!(field_f64(&rec, "premium"), bs);

    let (stdout, _) = run_ok(&[
        "implied-vol", "--s0", "123", "--strike", "117.5", "--rate", "0.021", "--ttm-days", "91",
        "--day-count", "360", "--price", &format!("{bs}"),
    ]);
    let iv = field_f64(&csv_record(&stdout), "implied_vol");
    assert_eq!(iv, eqp::implied_vol::implied_vol(&m, &c, bs).unwrap());
    assert!((iv - 0.31).abs() < 1e-9);
}

#[test]
fn json_and_csv_carry_identical_numbers() {
    let args = [
        "price-eq", "--strike", "95", "--mu", "0.12", "--target-p", "0.4",
    ];
    let (csv_text, _) = run_ok(&args);
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let (json_text, _) = run_ok(&json_args);

    let rec = csv_record(&csv_text);
    let json: serde_json::Value = serde_json::from_str(&json_text).unwrap();
    for key in [
        "s0", "strike", "mu", "sigma", "rate", "t_days", "ttm_years", "target_p", "raw_value",
        "value", "exercise_p",
    ] {
        assert_eq!(
            field_f64(&rec, key),
            json[key].as_f64().unwrap(),
            "field {key} differs between formats"
        );
    }
    assert_eq!(rec["status"], json["status"].as_str().unwrap());
}

#[test]
fn unreachable_targets_print_empty_values_in_both_formats() {
    // the exercise probability caps well below 0.99 for a falling stock
    let args = [
        "price-eq", "--strike", "110", "--mu", "-0.2", "--target-p", "0.99",
    ];
    let (csv_text, _) = run_ok(&args);
    let rec = csv_record(&csv_text);
    assert_eq!(rec["status"], "infeasible");
    assert_eq!(rec["value"], "");
    assert_eq!(rec["raw_value"], "");

    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let (json_text, _) = run_ok(&json_args);
    let json: serde_json::Value = serde_json::from_str(&json_text).unwrap();
    assert!(json["value"].is_null());
    assert!(json["raw_value"].is_null());
    assert_eq!(
        field_f64(&rec, "exercise_p"),
        json["exercise_p"].as_f64().unwrap()
    );
}

#[test]
fn usage_problems_exit_64() {
    assert_eq!(exit_code(&["price-bs", "--strike", "100", "--bogus", "1"]), 64);
    assert_eq!(exit_code(&["price-bs"]), 64); // no strike anywhere
    assert_eq!(exit_code(&["prob", "--strike", "100", "--mu", "0.1"]), 64); // no premium source
    assert_eq!(
        exit_code(&["prob", "--strike", "100", "--mu", "0.1", "--premium", "1", "--use-bs"]),
        64
    );
    assert_eq!(exit_code(&["scan", "--threshold", "0.5"]), 64); // neither preset nor axes
    assert_eq!(
        exit_code(&["scan", "--threshold", "0.5", "--axis", "K=80:120"]),
        64
    ); // malformed axis
    assert_eq!(exit_code(&["no-such-command"]), 64);
}

#[test]
fn invalid_inputs_exit_2() {
    assert_eq!(exit_code(&["price-bs", "--strike", "100", "--sigma", "-0.5"]), 2);
    assert_eq!(exit_code(&["price-bs", "--strike", "100", "--day-count", "100"]), 2);
    assert_eq!(
        exit_code(&["price-eq", "--strike", "100", "--mu", "0.1", "--target-p", "1.5"]),
        2
    );
    // a call can never cost more than the stock
    assert_eq!(exit_code(&["implied-vol", "--strike", "100", "--price", "150"]), 2);
    // target-p is not a market axis
    assert_eq!(
        exit_code(&["scan", "--threshold", "0.5", "--axis", "p=0.1:0.9:0.1", "--mu", "0.1"]),
        2
    );
    // custom grid with mu neither swept nor fixed
    assert_eq!(
        exit_code(&["scan", "--threshold", "0.5", "--axis", "K=90:110:10"]),
        2
    );
}

#[test]
fn day_count_resolution_order_is_flag_config_env_default() {
    let ttm = |args: &[&str], env_day_count: Option<&str>| -> f64 {
        let mut cmd = eqp_cmd();
        if let Some(v) = env_day_count {
            cmd.env("EQP_DAY_COUNT", v);
        }
        let out = cmd.args(["price-bs", "--strike", "100"]).args(args).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        field_f64(&csv_record(&String::from_utf8(out.stdout).unwrap()), "ttm_years")
    };

    let dir = std::env::temp_dir().join(format!("eqp-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("conf");
    std::fs::write(&cfg, "day-count=360\n# comment\nsigma=0.1\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    assert_eq!(ttm(&[], None), 60.0 / 365.0); // default
    assert_eq!(ttm(&[], Some("252")), 60.0 / 252.0); // env beats default
    assert_eq!(ttm(&["--config", cfg], Some("252")), 60.0 / 360.0); // config beats env
    assert_eq!(
        ttm(&["--config", cfg, "--day-count", "366"], Some("252")),
        60.0 / 366.0
    ); // flag beats config

    assert_eq!(run(&["price-bs", "--strike", "100", "--config", "/no/such/file"]).status.code(), Some(2));
    let bad = dir.join("bad");
    std::fs::write(&bad, "volatility=0.2\n").unwrap();
    assert_eq!(
        run(&["price-bs", "--strike", "100", "--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let mut cmd = eqp_cmd();
    cmd.env("EQP_DAY_COUNT", "abc");
    assert_eq!(cmd.args(["price-bs", "--strike", "100"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn config_file_supplies_any_common_flag() {
    let dir = std::env::temp_dir().join(format!("eqp-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("market");
    std::fs::write(&cfg, "strike=105\ns0=110\nsigma=0.25\nrate=0.01\nttm-days=30\n").unwrap();
    let (stdout, _) = run_ok(&["price-bs", "--config", cfg.to_str().unwrap()]);
    let rec = csv_record(&stdout);
    assert_eq!(field_f64(&rec, "strike"), 105.0);
    assert_eq!(field_f64(&rec, "s0"), 110.0);
    assert_eq!(field_f64(&rec, "sigma"), 0.25);
    assert_eq!(field_f64(&rec, "rate"), 0.01);
    assert_eq!(field_f64(&rec, "t_days"), 30.0);
}

#[test]
fn out_flag_writes_exactly_the_stdout_bytes() {
    let (stdout, _) = run_ok(&["price-bs", "--strike", "100"]);
    let dir = std::env::temp_dir().join(format!("eqp-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bs.csv");
    let (piped, _) = run_ok(&["price-bs", "--strike", "100", "--out", path.to_str().unwrap()]);
    assert!(piped.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout);
}

#[test]
fn table_run_reports_the_reference_comparison() {
    let (stdout, stderr) = run_ok(&["table", "--target-p", "0.2"]);
    assert!(stdout.starts_with("target_p,s0,sigma,rate,t_days,day_count,mu,strike,"));
    // 26 growth rates x 17 strikes behind the header
    assert_eq!(stdout.lines().count(), 1 + 26 * 17);
    assert!(stderr.contains("best-fit convention"));
    assert!(stderr.contains("max BS-row residual"));
    assert!(stderr.contains("sign test"));
}

#[test]
fn custom_scan_takes_unswept_values_from_flags() {
    let (stdout, _) = run_ok(&[
        "scan", "--threshold", "0.01", "--axis", "K=90:110:10", "--axis", "mu=-0.1,0.1",
        "--sigma", "0.15",
    ]);
    let mut rows = 0;
    for line in stdout.lines().skip(1) {
        let rec: Vec<&str> = line.split(',').collect();
        // s0,day_count,strike,mu,sigma,rate,t_days,...
        assert_eq!(rec[4], "0.15");
        assert_eq!(rec[5], "0.05");
        assert_eq!(rec[6], "60");
        rows += 1;
    }
    assert!(rows > 0 && rows <= 6);
}

#[test]
fn mc_check_reports_gap_sizes() {
    let out = run(&["mc-check", "--paths", "50000", "--cases", "3", "--seed", "7"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let header = stdout.lines().next().unwrap();
    assert!(header.contains("p_gap_se") && header.contains("bs_gap_se"));
    assert_eq!(stdout.lines().count(), 1 + 3);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("max probability gap"));
}
