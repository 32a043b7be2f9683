use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use covbalance::pgm::encode_pgm;
use covbalance::plot::read_plot_path;
use covbalance::record::RunTable;
use covbalance_core::problem::Image;
use covbalance_core::{CovVariant, OptimizerSpec, ProblemSpec, StrategySpec, SweepAxis};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_covbalance"));
    c.env_remove("COVBALANCE_OUT_DIR");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

const QUICK: &str = "[problem]\nkind = \"quadratic\"\nnoise = 0.1\n[optimizer]\nname = \"sgd\"\nlr = 0.01\n[run]\niterations = 95\nrecord_every = 10\n";

#[test]
fn help_lists_every_name_once() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let help = String::from_utf8(out.stdout).unwrap();
    let tokens: Vec<&str> = help
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
        .filter(|t| !t.is_empty())
        .collect();
    let variants: Vec<&str> = CovVariant::ALL.iter().map(|v| v.name()).collect();
    let names = StrategySpec::NAMES
        .iter()
        .chain(&variants)
        .chain(&ProblemSpec::NAMES)
        .chain(&SweepAxis::NAMES)
        .chain(&OptimizerSpec::NAMES);
    for name in names {
        let count = tokens.iter().filter(|t| *t == name).count();
        assert_eq!(count, 1, "`{name}` appears {count} times in:\n{help}");
    }
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "quick.toml", QUICK);
    let out = run_in(dir.path(), &["run", "--config", "quick.toml", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let csv = dir.path().join("out/quick/cov_3.csv");
    let table = RunTable::read_path(&csv).unwrap();
    assert_eq!(table.rows.len(), 10);
    assert_eq!(table.loss_names, vec!["q0", "q1"]);
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("step,loss_q0,loss_q1,weight_q0,weight_q1,objective,dist_to_opt\n"));
    let summary = std::fs::read_to_string(dir.path().join("out/quick/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 2);
    // defaults appear explicitly
    assert!(lines[1].contains(",cov,ratio-cov,full,,sgd,0.01,0.0,95,10,"), "{}", lines[1]);
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "quick.toml", QUICK);
    let out = bin()
        .current_dir(dir.path())
        .env("COVBALANCE_OUT_DIR", "from-env")
        .args(["run", "--config", "quick.toml"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", text(&out));
    assert!(dir.path().join("from-env/quick/cov_0.csv").exists());
    let out = bin()
        .current_dir(dir.path())
        .env("COVBALANCE_OUT_DIR", "from-env")
        .args(["run", "--config", "quick.toml", "--out-dir", "flag"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("flag/quick/cov_0.csv").exists());
}

#[test]
fn csv_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "ms.toml",
        "[problem]\nkind = \"multiscale\"\nsize = 8\ndetail_noise = 0.05\npixel_noise = 0.01\n[strategy]\nvariant = \"loss-inverse\"\n[run]\niterations = 50\n",
    );
    for out_dir in ["a", "b"] {
        let out = run_in(dir.path(), &["run", "--config", "ms.toml", "--out-dir", out_dir, "--seed", "9"]);
        assert!(out.status.success(), "{}", text(&out));
    }
    let a = std::fs::read(dir.path().join("a/ms/cov_9.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/ms/cov_9.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[strategy]\nname = \"best\"\n", "strategy.name"),
        ("[optimizer]\nlr = 0.0\n", "optimizer.lr"),
        ("[problem]\nkind = \"stereo\"\nlosses = 3\n", "problem.losses"),
        ("[optimizer]\nlearning_rate = 0.1\n", "learning_rate"),
        ("[problem]\nkind = \"synthetic\"\nlevels = [1.0]\n[strategy]\nname = \"gradnorm\"\n", "strategy.name"),
    ];
    for (i, (config, key)) in cases.iter().enumerate() {
        let name = format!("bad{i}.toml");
        write(dir.path(), &name, config);
        let out = run_in(dir.path(), &["run", "--config", &name]);
        assert_eq!(out.status.code(), Some(2), "{config}: {}", text(&out));
        assert!(text(&out).contains(key), "{config}: {}", text(&out));
    }
    let out = run_in(dir.path(), &["run", "--config", "bad0.toml"]);
    for name in StrategySpec::NAMES {
        assert!(text(&out).contains(name));
    }
    let out = run_in(dir.path(), &["sweep", "--axis", "momentum", "--values", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("--axis") && text(&out).contains("temperature"), "{}", text(&out));
    let out = run_in(dir.path(), &["sweep", "--axis", "temperature", "--values", "2"]);
    assert_eq!(out.status.code(), Some(2), "temperature needs gradnorm: {}", text(&out));
    let out = run_in(dir.path(), &["compare", "--strategies", "cov,nope", "--seeds", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_in(dir.path(), &["run", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn aborted_run_exits_1_and_keeps_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "zero.toml",
        "[problem]\nkind = \"synthetic\"\nlevels = [1.0, 0.0]\n[strategy]\nname = \"uncertainty\"\n[run]\niterations = 10\n",
    );
    let out = run_in(dir.path(), &["run", "--config", "zero.toml"]);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out));
    assert!(dir.path().join("out/zero/uncertainty_0.csv").exists());
    let summary = std::fs::read_to_string(dir.path().join("out/zero/summary.csv")).unwrap();
    assert!(summary.contains(",aborted,"), "{summary}");
}

#[test]
fn sweep_over_decay_gives_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "quick.toml", QUICK);
    let out = run_in(dir.path(), &["sweep", "--config", "quick.toml", "--axis", "decay", "--values", "full,20,100"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let summary = std::fs::read_to_string(dir.path().join("out/quick/summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for (row, value) in rows.iter().zip(["full", "20", "100"]) {
        assert!(row.contains(&format!(",decay,{value},")), "{row}");
    }
    for value in ["full", "20", "100"] {
        assert!(dir.path().join(format!("out/quick/decay-{value}/cov_0.csv")).exists());
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn compare_prints_win_rate_matrix() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "quick.toml", QUICK);
    let out = run_in(
        dir.path(),
        &[
            "compare",
            "--config",
            "quick.toml",
            "--strategies",
            "cov,equal,gradnorm,mgda,uncertainty,cov:loss-inverse",
            "--seeds",
            "32",
            "--jobs",
            "4",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("win rate"));
    let matrix = std::fs::read_to_string(dir.path().join("out/quick/win_rates.csv")).unwrap();
    let rows: Vec<Vec<String>> = matrix.lines().map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows[0], ["strategy", "cov", "equal", "gradnorm", "mgda", "uncertainty", "cov-loss-inverse"]);
    for i in 1..=6 {
        assert_eq!(rows[i][i], "0.5");
        for j in 1..=6 {
            let a: f64 = rows[i][j].parse().unwrap();
            let b: f64 = rows[j][i].parse().unwrap();
            assert_eq!(a + b, 1.0);
        }
    }
    let summary = std::fs::read_to_string(dir.path().join("out/quick/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 6 * 32);
    assert!(dir.path().join("out/quick/cov-loss-inverse_31.csv").exists());
}

#[test]
fn export_plot_data_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "unc.toml", "[problem]\nkind = \"mixed-norm\"\n[strategy]\nname = \"uncertainty\"\n[run]\niterations = 30\n");
    assert!(run_in(dir.path(), &["run", "--config", "unc.toml"]).status.success());
    let out = run_in(dir.path(), &["export-plot-data", "out/unc", "--out-dir", "plots"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let original = RunTable::read_path(&dir.path().join("out/unc/uncertainty_0.csv")).unwrap();
    assert!(original.has_raw_weights());
    let back = read_plot_path(&dir.path().join("plots/plot-data/uncertainty_0.plot.csv")).unwrap();
    assert_eq!(back, original);
    let out = run_in(dir.path(), &["export-plot-data", "plots/missing"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn pgm_targets_load_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let img = Image::synthetic(8, 8);
    std::fs::write(dir.path().join("target.pgm"), encode_pgm(&img)).unwrap();
    write(
        dir.path(),
        "img.toml",
        "[problem]\nkind = \"stereo\"\nimage = \"target.pgm\"\n[run]\niterations = 20\n",
    );
    let out = run_in(dir.path(), &["run", "--config", "img.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let table = RunTable::read_path(&dir.path().join("out/img/cov_0.csv")).unwrap();
    assert_eq!(table.loss_names.len(), 8);

    std::fs::write(dir.path().join("ascii.pgm"), "P2\n1 1\n255\n0\n").unwrap();
    write(dir.path(), "bad.toml", "[problem]\nkind = \"image-fit\"\nimage = \"ascii.pgm\"\n");
    let out = run_in(dir.path(), &["run", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("problem.image"));
}

#[test]
fn shipped_configs_resolve() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let loaded = covbalance::config::LoadedConfig::load(&path).unwrap();
        loaded.resolve().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 2);
}
