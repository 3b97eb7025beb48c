use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsemul"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_on(args: &[&str], files: &[&str]) -> Output {
    let paths: Vec<String> = files
        .iter()
        .map(|f| data(f).to_string_lossy().into_owned())
        .collect();
    let mut all: Vec<&str> = args.to_vec();
    all.extend(paths.iter().map(String::as_str));
    run(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn naive_product_matches_golden_file() {
    let o = run_on(&["multiply", "--algo", "naive"], &["p.sp", "q.sp"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(o.stdout, fs::read(data("r.sp")).unwrap());
}

#[test]
fn heuristic_product_is_deterministic() {
    let args = [
        "multiply",
        "--algo",
        "heuristic",
        "--tau",
        "1.5",
        "--seed",
        "4",
    ];
    let a = run_on(&args, &["p.sp", "q.sp"]);
    let b = run_on(&args, &["p.sp", "q.sp"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, fs::read(data("r.sp")).unwrap());
}

#[test]
fn too_few_boxes_exit_with_fallback_code() {
    // twelve candidate terms into five boxes: the game cannot be won
    let o = run_on(&["multiply", "--seed", "1"], &["p.sp", "q.sp"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(o.stdout, fs::read(data("r.sp")).unwrap());
}

#[test]
fn unconditional_product_with_json_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.sp");
    let o = run_on(
        &[
            "multiply",
            "--algo",
            "unconditional",
            "--seed",
            "9",
            "--json",
            "--out",
            out.to_str().unwrap(),
        ],
        &["p.sp", "q.sp"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(&out).unwrap(), fs::read(data("r.sp")).unwrap());
    let summary: serde_json::Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert_eq!(summary["algo"], "unconditional");
    assert_eq!(summary["terms"], 10);
    assert_eq!(summary["fallback"], false);
}

#[test]
fn verify_exit_codes() {
    let ok = run_on(&["verify", "--seed", "2"], &["p.sp", "q.sp", "r.sp"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = run_on(&["verify", "--seed", "2"], &["p.sp", "q.sp", "r_wrong.sp"]);
    assert_eq!(bad.status.code(), Some(3));
    let missing = run_on(&["verify", "--seed", "2"], &["p.sp", "q.sp", "absent.sp"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn malformed_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sp");
    fs::write(&bad, "SP1 n=2\n3 1\n").unwrap();
    let o = run(&[
        "multiply",
        "--algo",
        "naive",
        bad.to_str().unwrap(),
        data("q.sp").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn out_of_range_parameters_are_rejected() {
    assert_eq!(run(&["dynamics", "--tau", "2"]).status.code(), Some(1));
    let o = run_on(&["multiply", "--eps", "1.5"], &["p.sp", "q.sp"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn dynamics_csv() {
    let o = run(&["dynamics", "--tau", "0.5", "--rounds", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "i,k,p");
    assert!(lines[1].contains("0.13534"), "{}", lines[1]);
    assert_eq!(lines.len(), 1 + 2 * 7);
    assert_eq!(lines[8], "2,1,0.06643");
}

#[test]
fn simulation_csv_is_reproducible() {
    let args = ["simulate", "--t", "2000", "--tau", "0.5", "--seed", "1"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("i,k,N\n"));
    // every ball sits in some first-throw box in round one
    let round_one: u64 = text
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("1,"))
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert!(round_one <= 2000 && round_one > 1900, "{round_one}");
    assert!(stderr(&a).contains("won") || stderr(&a).contains("lost"));
}

#[test]
fn missing_seed_is_drawn_and_reported() {
    let o = run(&["simulate", "--t", "100", "--tau", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let err = stderr(&o);
    let seed = err
        .lines()
        .find_map(|l| l.strip_prefix("seed: "))
        .expect("seed reported");
    // replaying with the reported seed reproduces the table
    let again = run(&["simulate", "--t", "100", "--tau", "0.5", "--seed", seed]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn generated_inputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    for (name, seed) in [("a.sp", "1"), ("b.sp", "2")] {
        let out = path(name);
        let args = [
            "gen", "--n", "3", "--t", "40", "--d", "12", "--seed", seed, "--out", &out,
        ];
        assert_eq!(run(&args).status.code(), Some(0));
    }
    let first = fs::read(path("a.sp")).unwrap();
    let again = path("a2.sp");
    run(&[
        "gen", "--n", "3", "--t", "40", "--d", "12", "--seed", "1", "--out", &again,
    ]);
    assert_eq!(first, fs::read(&again).unwrap());

    let prod = path("ab.sp");
    let o = run(&[
        "multiply",
        "--seed",
        "5",
        "--out",
        &prod,
        &path("a.sp"),
        &path("b.sp"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let naive = run(&["multiply", "--algo", "naive", &path("a.sp"), &path("b.sp")]);
    assert_eq!(fs::read(&prod).unwrap(), naive.stdout);
    let v = run(&["verify", "--seed", "3", &path("a.sp"), &path("b.sp"), &prod]);
    assert_eq!(v.status.code(), Some(0));
}

#[test]
fn taucrit_brackets_the_closed_form() {
    let o = run(&["taucrit", "--tol", "1e-4", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (lo, hi) = (v["lo"].as_f64().unwrap(), v["hi"].as_f64().unwrap());
    let closed = v["closed_form"].as_f64().unwrap();
    assert!(hi - lo <= 1e-4);
    assert!(lo < closed && closed < hi, "{lo} {closed} {hi}");
}

#[test]
fn densebench_reports_the_support_size() {
    let o = run(&[
        "densebench",
        "--n",
        "2",
        "--d",
        "100",
        "--tau",
        "1.14",
        "--seed",
        "0",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["balls"], 5151);
    assert_eq!(v["boxes"], 5872);
}

#[test]
fn bench_runs_every_route() {
    let o = run(&[
        "bench", "--n", "3", "--t", "60", "--d", "20", "--seed", "7", "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let runs = v["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    assert!(runs[1]["cyclic_share"].as_f64().unwrap() <= 1.0);
}
