use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chimera-tts"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("CHIMERA_TTS_OUT")
        .output()
        .expect("spawn chimera-tts")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CONFIG: &str = r#"
seed = 5
sizes = [1]
instances = 30
target_successes = 10
cap = 100000
k_grid = [5, 10]
tail_k = 10

[[algorithms]]
algorithm = "sa"
t_a = 20
"#;

#[test]
fn generate_solve_anneal_tts_fit() {
    let dir = tempfile::tempdir().unwrap();
    let insts = dir.path().join("inst");
    let o = cli(&["--seed", "3", "--out", path(&insts), "generate", "--size", "1", "--count", "40"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_dir(&insts).unwrap().count(), 40);

    let e0 = dir.path().join("e0.csv");
    assert_eq!(code(&cli(&["--out", path(&e0), "solve", "--instances", path(&insts)])), 0);
    let text = fs::read_to_string(&e0).unwrap();
    assert!(text.starts_with("instance_id,E0\n"));
    assert_eq!(text.lines().count(), 41);

    let one = insts.join("000000.txt");
    let o = cli(&["--seed", "1", "anneal", "--instance", path(&one), "--algorithm", "sa", "--t-a", "50", "--repetitions", "5"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().next(), Some("run_index,success_fraction,final_energy"));
    assert_eq!(stdout.lines().count(), 6);
    assert_eq!(stdout, String::from_utf8(cli(&["--seed", "1", "anneal", "--instance", path(&one), "--algorithm", "sa", "--t-a", "50", "--repetitions", "5"]).stdout).unwrap());

    let records = dir.path().join("tts.csv");
    let o = cli(&[
        "--seed", "2", "--threads", "2", "--out", path(&records), "tts", "--instances", path(&insts), "--e0", path(&e0),
        "--algorithm", "sqa", "--t-a", "20", "--beta", "10", "-M", "8", "--target-successes", "10",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&records).unwrap();
    assert!(text.starts_with("instance_id,s,tau,repetitions,successes,is_upper_bound\n"));
    assert_eq!(text.lines().count(), 41);

    let fit = dir.path().join("fit");
    let o = cli(&["--out", path(&fit), "fit-tail", "--records", path(&records), "--scan", "5,10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fit.join("scan.json").exists());
}

#[test]
fn pipeline_report_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("camp");
    let o = cli(&["--out", path(&out), "pipeline", "--config", path(&cfg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.csv", "manifest.json", "checkpoint.json", "e0/L1.csv", "tts/L1_sa_ta20.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let o = cli(&["--out", path(&out), "report"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("algorithm,schedule,N,k,u,xi,xi_se,sigma,sigma_se,error"));

    fs::write(out.join("e0/L1.csv"), "instance_id,E0\n0,0\n").unwrap();
    let o = cli(&["--out", path(&out), "report"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("e0/L1.csv"));

    fs::write(&cfg, CONFIG.replace("seed = 5", "seed = 6")).unwrap();
    let o = cli(&["--out", path(&out), "resume", "--config", path(&cfg)]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("- seed = 5") && err.contains("+ seed = 6"), "{err}");
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("env_out");
    let o = Command::new(env!("CARGO_BIN_EXE_chimera-tts"))
        .args(["pipeline", "--config", path(&cfg), "--stop-after", "solve"])
        .env("CHIMERA_TTS_OUT", &out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("e0/L1.csv").exists());
    assert!(!out.join("summary.csv").exists());
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cli(&["generate", "--size", "1"])), 2);
    assert_eq!(code(&cli(&["--out", path(dir.path()), "generate", "--size", "0"])), 2);
    assert_eq!(code(&cli(&["pipeline", "--config", "/nonexistent/c.toml"])), 2);
    assert_eq!(code(&cli(&["bogus-command"])), 2);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, CONFIG.replace("sizes = [1]", "sizes = [9]")).unwrap();
    assert_eq!(code(&cli(&["--out", path(dir.path()), "pipeline", "--config", path(&bad)])), 2);

    let inst = dir.path().join("i.txt");
    fs::write(&inst, "chimera 1 8 0\n0 4 1\n").unwrap();
    let o = cli(&["anneal", "--instance", path(&inst), "--algorithm", "sa", "--t-a", "0"]);
    assert!([2, 3].contains(&code(&o)));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.txt");
    fs::write(&inst, "chimera 1 8 0\n0 4 2\n").unwrap();
    let o = cli(&["anneal", "--instance", path(&inst), "--algorithm", "sa", "--t-a", "10"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"));

    let insts = dir.path().join("inst");
    assert_eq!(code(&cli(&["--out", path(&insts), "generate", "--size", "1", "--count", "3"])), 0);
    let e0 = dir.path().join("e0.csv");
    fs::write(&e0, "instance_id,E0\n0,-10\n").unwrap();
    let o = cli(&["tts", "--instances", path(&insts), "--e0", path(&e0), "--algorithm", "sa", "--t-a", "10"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains('1'));
}
