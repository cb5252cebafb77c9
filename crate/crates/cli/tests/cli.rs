use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_immune-sim"))
        .args(args)
        .env_remove("PATHOGEN_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const GOLDEN_HEADER: &str = "model,dim,lambda,r,trials,survivors,estimate,ci_low,ci_high,seed,wall_time_s";

#[test]
fn golden_csv_header() {
    assert_eq!(immune_sim_cli::format::CSV_HEADER, GOLDEN_HEADER);
    let o = bin(&["estimate", "--model", "m3", "--lambda", "2", "--r", "0.4", "--trials", "50", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], GOLDEN_HEADER);
    assert_eq!(lines.len(), 2);
    // zero successes: the Wilson upper bound reduces to z^2 / (n + z^2)
    let z2 = 2.575_829_303_548_901_f64.powi(2);
    let ci_high = format!("{:.9}", z2 / (50.0 + z2));
    assert_eq!(lines[1], format!("m3,,2,0.4,50,0,0,0,{ci_high},3,0"));
}

#[test]
fn estimate_matches_analytic_value() {
    let o = bin(&["estimate", "--model", "m3", "--lambda", "2", "--r", "0.75", "--trials", "10000", "--seed", "42"]);
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let est: f64 = row[6].parse().unwrap();
    assert!((est - 1.0 / 3.0).abs() < 0.02, "{est}");
}

#[test]
fn numeric_inputs_echo_back() {
    let o = bin(&[
        "sweep", "--model", "m2", "--lambda", "0.45,1.1", "--r", "0.1:0.3:0.1", "--trials", "5", "--seed", "8",
        "--max-pop", "50",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let cells: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].to_string(), f[3].to_string())
        })
        .collect();
    let want: Vec<(String, String)> = ["0.45", "1.1"]
        .iter()
        .flat_map(|l| ["0.1", "0.2", "0.3"].iter().map(move |r| (l.to_string(), r.to_string())))
        .collect();
    assert_eq!(cells, want);
}

#[test]
fn validation_errors_exit_2() {
    for args in [
        vec!["run", "--model", "s1", "--dim", "0", "--lambda", "1", "--r", "0.5"],
        vec!["run", "--model", "m1", "--dim", "1", "--lambda", "1", "--r", "0.5"],
        vec!["run", "--model", "s1", "--lambda", "1", "--r", "0.5"],
        vec!["estimate", "--model", "m9", "--lambda", "1", "--r", "0.5"],
        vec!["estimate", "--model", "m3", "--lambda", "-1", "--r", "0.5"],
        vec!["estimate", "--model", "m3", "--lambda", "1", "--r", "1.5"],
        vec!["estimate", "--model", "m3", "--lambda", "1", "--r", "0.5", "--confidence", "1"],
        vec!["sweep", "--model", "m3", "--lambda", "1,2", "--r", "0.5,1.5", "--trials", "3"],
        vec!["bisect", "--model", "m3", "--axis", "r", "--lo", "0.1", "--hi", "0.9"],
        vec!["analytic", "--model", "s2", "--lambda", "1", "--r", "0.5"],
        vec!["estimate", "--model", "m3"],
    ] {
        let o = bin(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn invalid_bracket_exits_4() {
    let o = bin(&[
        "bisect", "--model", "m3", "--lambda", "2", "--axis", "r", "--lo", "0.6", "--hi", "0.9", "--trials", "2000",
        "--max-pop", "1000", "--seed", "9",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bracket invalid"));
}

#[test]
fn event_cap_exits_3_with_output() {
    let o = bin(&["run", "--model", "m1", "--lambda", "3", "--r", "0.5", "--max-events", "5", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("\"stop_reason\": \"event_cap\""));
    let o = bin(&["estimate", "--model", "m1", "--lambda", "3", "--r", "0.5", "--max-events", "5", "--trials", "20"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn bisect_csv_and_json() {
    let args = [
        "bisect", "--model", "m3", "--lambda", "2", "--axis", "r", "--lo", "0.1", "--hi", "0.9", "--resolution",
        "0.05", "--trials", "2000", "--max-pop", "2000", "--seed", "9",
    ];
    let o = bin(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let last = text.lines().last().unwrap();
    let (lo, hi) = last.split_once(',').unwrap();
    let lo: f64 = lo.strip_prefix("bracket_lo=").unwrap().parse().unwrap();
    let hi: f64 = hi.strip_prefix("bracket_hi=").unwrap().parse().unwrap();
    assert!(lo <= 0.5 && 0.5 <= hi && hi - lo <= 0.05, "[{lo}, {hi}]");
    let mut json_args = args.to_vec();
    json_args.extend(["--out-format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&bin(&json_args).stdout).unwrap();
    assert_eq!(v["bracket_lo"].as_f64().unwrap(), lo);
    assert_eq!(v["rows"].as_array().unwrap().len(), text.lines().count() - 2);
}

#[test]
fn run_json_shape() {
    let o = bin(&["run", "--model", "m3", "--lambda", "2", "--r", "0.4", "--seed", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "extinct");
    assert_eq!(v["final_population"], 0);

    let o = bin(&[
        "run", "--model", "s3", "--dim", "1", "--lambda", "2.5", "--r", "1", "--seed", "4", "--series",
        "--genealogy", "--max-pop", "60",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let series = v["series"].as_array().unwrap();
    assert!(series.iter().all(|p| {
        let p = p.as_array().unwrap();
        p.len() == 5 || (p.len() == 3 && p[1] == 0)
    }));
    let g = v["genealogy"].as_array().unwrap();
    assert_eq!(g[0]["type_id"], 1);
    assert!(g[0]["parent"].is_null());
}

#[test]
fn analytic_outputs() {
    let v: serde_json::Value =
        serde_json::from_slice(&bin(&["analytic", "--model", "m3", "--lambda", "2", "--r", "0.75"]).stdout).unwrap();
    assert_eq!(v["survival_probability"].to_string(), "0.333333333");
    assert_eq!(v["survives"], true);
    let v: serde_json::Value =
        serde_json::from_slice(&bin(&["analytic", "--model", "m2", "--lambda", "4", "--r", "0.5"]).stdout).unwrap();
    assert_eq!(v["mean_offspring"], "inf");
    let v: serde_json::Value =
        serde_json::from_slice(&bin(&["analytic", "--model", "m1", "--lambda", "1", "--r", "0.5", "--chain-n", "4"]).stdout)
            .unwrap();
    assert_eq!(v["survives"], true);
    assert_eq!(v["chain_n"], 4);
    // p = 2 / 3, (2p - 1) / p = 1/2
    assert_eq!(v["stay_above"].as_f64().unwrap(), 0.5);
}

#[test]
fn env_seed_and_flag_precedence() {
    let args = ["estimate", "--model", "m1", "--lambda", "1", "--r", "0.5", "--trials", "40", "--max-pop", "200"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_immune-sim"))
        .args(args)
        .env("PATHOGEN_SEED", "77")
        .output()
        .unwrap();
    let mut explicit = args.to_vec();
    explicit.extend(["--seed", "77"]);
    assert_eq!(with_env.stdout, bin(&explicit).stdout);
    let flag_wins = Command::new(env!("CARGO_BIN_EXE_immune-sim"))
        .args(&explicit[..explicit.len() - 1])
        .arg("5")
        .env("PATHOGEN_SEED", "77")
        .output()
        .unwrap();
    assert!(stdout(&flag_wins).lines().nth(1).unwrap().ends_with(",5,0"));
}

#[test]
fn config_file_and_atomic_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# estimate settings\nmodel=m3\nlambda=2\nr=0.4\ntrials=30\nseed=11\n").unwrap();
    let out = dir.path().join("out.csv");
    let o = bin(&[
        "estimate",
        "--config",
        conf.to_str().unwrap(),
        "--r",
        "0.75",
        "--out-path",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("m3,,2,0.75,30,"));
    assert!(text.lines().nth(1).unwrap().ends_with(",11,0"));
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 2);
}

#[test]
fn sweep_reruns_reproduce_cells() {
    let base = [
        "sweep", "--model", "m3", "--lambda", "1.5,2.5", "--r", "0.5,0.9", "--trials", "300", "--seed", "21",
        "--max-pop", "500", "--out-format", "json",
    ];
    let a: serde_json::Value = serde_json::from_slice(&bin(&base).stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&bin(&base).stdout).unwrap();
    assert_eq!(a, b);
    let rows = a["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!((rows[1]["lambda"].as_f64(), rows[1]["r"].as_f64()), (Some(1.5), Some(0.9)));
}

#[test]
fn help_exits_zero() {
    let o = bin(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("bisect"));
}
