use std::path::Path;
use std::process::{Command, Output};

use kolmonet::builders::basket_call_net;

const D1_CONFIG: &str = "\
# d = 1 call under Black-Scholes
seed = 42
d = 1
payoff = basket_call
strike = 0.5
alpha = 0.02
beta = 0.2
T = 1
measure = uniform:0:1
epsilon = 0.01
";

fn kolmonet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kolmonet"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), D1_CONFIG).unwrap();
    dir
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn build_succeeds_and_writes_outputs() {
    let dir = setup();
    let o = kolmonet(dir.path(), &["build", "--config", "run.cfg", "--out", "psi.ann"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("psi.ann").exists());
    let report = std::fs::read_to_string(dir.path().join("psi.csv")).unwrap();
    assert_eq!(report, stdout(&o));
    let rows = csv_rows(&report);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "kolmonet-sweep-v1");
    let error: f64 = rows[1][7].parse().unwrap();
    assert!(error <= 0.01);
    assert_eq!(rows[1][10], "true");
}

#[test]
fn forced_failure_exits_nonzero_with_report() {
    let dir = setup();
    let o = kolmonet(
        dir.path(),
        &["build", "--config", "run.cfg", "--epsilon", "1e-9", "--max_attempts", "1", "--n_cap", "64", "--out", "f.ann"],
    );
    assert_eq!(o.status.code(), Some(1));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[1][10], "false");
    assert!(rows[1][7].parse::<f64>().unwrap() > 1e-9);
    assert!(dir.path().join("f.csv").exists());
}

#[test]
fn config_errors_name_the_key_and_line() {
    let dir = setup();
    std::fs::write(dir.path().join("nopay.cfg"), D1_CONFIG.replace("payoff = basket_call\n", "")).unwrap();
    let o = kolmonet(dir.path(), &["build", "--config", "nopay.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing required key `payoff`"), "{}", stderr(&o));

    std::fs::write(dir.path().join("bad.cfg"), "seed = 1\nd = 1\nvolatility = 0.2\n").unwrap();
    let o = kolmonet(dir.path(), &["build", "--config", "bad.cfg"]);
    assert!(stderr(&o).contains("bad.cfg:3: unknown key `volatility`"), "{}", stderr(&o));

    let o = kolmonet(dir.path(), &["build", "--config", "run.cfg", "--epsilon", "tiny"]);
    assert!(stderr(&o).contains("command line: invalid value for `epsilon`"), "{}", stderr(&o));

    std::fs::write(dir.path().join("noseed.cfg"), D1_CONFIG.replace("seed = 42\n", "")).unwrap();
    let o = kolmonet(dir.path(), &["build", "--config", "noseed.cfg"]);
    assert!(stderr(&o).contains("missing required key `seed`"));
}

#[test]
fn price_modes() {
    let dir = setup();
    let net = basket_call_net(&[1.0, 2.0], 0.5).unwrap();
    net.save(std::fs::File::create(dir.path().join("phi.ann")).unwrap()).unwrap();
    let o = kolmonet(dir.path(), &["price", "--network", "phi.ann", "--x", "0.25,0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "network = 0.75");

    let o = kolmonet(dir.path(), &["price", "--network", "phi.ann", "--x", "0.25"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("length 1"), "{}", stderr(&o));

    let o = kolmonet(dir.path(), &["price", "--config", "run.cfg", "--x", "1"]);
    let price: f64 = stdout(&o).lines().next().unwrap().trim_start_matches("oracle = ").parse().unwrap();
    let exact = kolmonet::oracles::bs_call_1d(1.0, 0.5, 0.02, 0.2, 1.0).unwrap();
    assert_eq!(price, exact);
}

#[test]
fn built_network_tracks_oracle() {
    let dir = setup();
    let o = kolmonet(dir.path(), &["build", "--config", "run.cfg", "--out", "psi.ann"]);
    assert!(o.status.success());
    let mut sq = 0.0;
    for i in 0..10 {
        let x = format!("{}", (i as f64 + 0.5) / 10.0);
        let o = kolmonet(dir.path(), &["price", "--config", "run.cfg", "--network", "psi.ann", "--x", &x, "--both"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let out = stdout(&o);
        let diff: f64 = out.lines().find_map(|l| l.strip_prefix("difference = ")).unwrap().parse().unwrap();
        sq += diff * diff;
    }
    assert!((sq / 10.0).sqrt() <= 0.01);
}

fn strip_time(csv: &str) -> Vec<Vec<String>> {
    csv_rows(csv).into_iter().map(|mut r| {
        r.remove(11);
        r
    }).collect()
}

#[test]
fn sweep_is_deterministic_and_within_bounds() {
    let dir = setup();
    let args = [
        "sweep", "--config", "run.cfg", "--d_list", "1,2,4", "--eps_list", "0.1", "--eval_samples", "100",
        "--oracle_samples", "20000",
    ];
    let a = kolmonet(dir.path(), &args);
    let b = kolmonet(dir.path(), &args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(strip_time(&stdout(&a)), strip_time(&stdout(&b)));
    let rows = csv_rows(&stdout(&a));
    assert_eq!(rows.len(), 4);
    for (i, r) in rows[1..].iter().enumerate() {
        assert_eq!(r[0], i.to_string());
        let d: usize = r[1].parse().unwrap();
        let n: usize = r[4].parse().unwrap();
        let (params, nonzero): (usize, usize) = (r[5].parse().unwrap(), r[6].parse().unwrap());
        assert!(params <= n * n * (d + 3) && nonzero <= n * (d + 3));
        let (err, se): (f64, f64) = (r[7].parse().unwrap(), r[8].parse().unwrap());
        if r[10] == "true" {
            assert!(err <= 0.1 + 2.0 * se);
        }
    }
    assert!(stderr(&a).contains("fit param_count over 3 cells: d-exponent"), "{}", stderr(&a));
}

#[test]
fn sweep_writes_file_and_warns_on_single_cell() {
    let dir = setup();
    let o = kolmonet(dir.path(), &["sweep", "--config", "run.cfg", "--epsilon", "0.1", "--out", "s.csv"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("warning: fewer than 3"));
    let rows = csv_rows(&std::fs::read_to_string(dir.path().join("s.csv")).unwrap());
    assert_eq!(rows.len(), 2);
    let o = kolmonet(dir.path(), &["sweep", "--config", "run.cfg", "--mode", "theory"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_suites() {
    let dir = setup();
    let o = kolmonet(dir.path(), &["verify", "core"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("summary suite=core checks=5 passed=5 failed=0"));

    let strip = |o: &Output| -> Vec<String> {
        stdout(o).lines().map(|l| l.rsplit_once(" (").map_or(l, |(a, _)| a).to_string()).collect()
    };
    let a = kolmonet(dir.path(), &["verify", "sde", "--seed", "9"]);
    let b = kolmonet(dir.path(), &["verify", "sde", "--seed", "9"]);
    assert!(a.status.success(), "{}", stdout(&a));
    assert_eq!(strip(&a), strip(&b));

    let o = kolmonet(dir.path(), &["verify", "fast"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown suite `fast`"));
}
