use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;
use std::process::{Command, Output};

use noisebound_cli::{exit_code, run_custom, run_preset, run_qsl_report, EnsembleOverrides, PresetName};

const BIN: &str = env!("CARGO_BIN_EXE_noisebound");

const FIG1A_CONFIG: &str = "\
[control]
label = fig1a
initial = 1
time = pi/2

[hamiltonian]
u = 1
terms = Y

[channel.1]
operator = X
gamma = sweep
";

fn noisebound(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("NOISEBOUND_SEED").output().unwrap()
}

fn rows(csv_text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn real(s: &str) -> f64 {
    s.parse().unwrap()
}

fn small(gammas: &[f64], n: usize, seed: u64) -> EnsembleOverrides {
    EnsembleOverrides {
        gammas: Some(gammas.to_vec()),
        n_traj: Some(n),
        seed: Some(seed),
        dt: Some(PI / 800.0),
        ..Default::default()
    }
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn zero_noise_row_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero.csv");
    let mut summary = Vec::new();
    assert!(run_preset(PresetName::Fig1a, 1.0, small(&[0.0], 64, 1), Some(&out), &mut summary).unwrap());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(
        text.starts_with("preset,gamma,f_star,mean_F,stderr_F,mean_re_overlap,stderr_overlap,n_traj,dt,seed,stepper\n")
    );
    let r = &rows(&text)[0];
    assert_eq!(r[0], "fig1a");
    assert_eq!(real(&r[2]), 1.0);
    assert!((real(&r[3]) - 1.0).abs() < 1e-12);
    assert_eq!((r[7].as_str(), r[9].as_str(), r[10].as_str()), ("64", "1", "unitary"));
}

#[test]
fn config_matching_a_preset_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fig1a.conf", FIG1A_CONFIG);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let o = small(&[0.2, 0.7], 200, 17);
    run_preset(PresetName::Fig1a, 1.0, o.clone(), Some(&a), &mut Vec::new()).unwrap();
    run_custom(&cfg, o, Some(&b), &mut Vec::new()).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_values_apply_and_flags_override_them() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{FIG1A_CONFIG}\n[ensemble]\nn_traj = 100\nseed = 5\nstepper = em\n[control.extra]\n");
    let bad = write(dir.path(), "bad.conf", &text);
    let out = noisebound(&["custom", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(exit_code::USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 18"), "{}", String::from_utf8_lossy(&out.stderr));

    let text = format!("{FIG1A_CONFIG}\n[ensemble]\nn_traj = 100\nseed = 5\nstepper = em\n");
    let good = write(dir.path(), "good.conf", &text);
    let out = noisebound(&["custom", good.to_str().unwrap(), "--gammas", "0.3", "--seed", "6", "--dt", "0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &rows(&String::from_utf8(out.stdout).unwrap())[0];
    assert_eq!((r[7].as_str(), r[9].as_str(), r[10].as_str()), ("100", "6", "em"));
}

#[test]
fn two_channel_config_multiplies_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{FIG1A_CONFIG}\n[channel.2]\noperator = Z\ngamma = sweep\n");
    let cfg = write(dir.path(), "xz.conf", &text);
    let out = dir.path().join("xz.csv");
    run_custom(&cfg, small(&[0.25, 0.5, 1.0], 64, 2), Some(&out), &mut Vec::new()).unwrap();
    for r in rows(&std::fs::read_to_string(&out).unwrap()) {
        let g = real(&r[1]);
        // two channels, each contributing gamma^2 T with T = pi/2
        let expected = (-2.0 * g * g * PI / 2.0).exp();
        assert!((real(&r[2]) - expected).abs() <= 1e-12 * expected, "{r:?}");
    }
}

#[test]
fn collective_noise_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = "\
[control]
initial = +0
time = pi/2
[hamiltonian]
terms = -0.5*X@X - 0.5*Y@Y - 0.5*Z@Z
[channel.1]
operator = X@I + I@X
gamma = 0.5
";
    let cfg = write(dir.path(), "collective.conf", text);
    let out = noisebound(&["custom", cfg.to_str().unwrap(), "--gammas", "0.5", "--n-traj", "10"]);
    assert_eq!(out.status.code(), Some(exit_code::VALIDATION));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("channel 0"), "{err}");
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = FIG1A_CONFIG.replace("operator = X", "operator = X@X");
    let cfg = write(dir.path(), "dims.conf", &text);
    let out = noisebound(&["custom", cfg.to_str().unwrap(), "--n-traj", "10"]);
    assert_eq!(out.status.code(), Some(exit_code::VALIDATION));
}

#[test]
fn usage_and_io_exit_codes() {
    assert_eq!(noisebound(&["preset", "fig9"]).status.code(), Some(exit_code::USAGE));
    assert_eq!(noisebound(&["preset", "fig1a", "--gammas", "0.5,0.2"]).status.code(), Some(exit_code::USAGE));
    assert_eq!(noisebound(&["preset", "fig1a", "--stepper", "rk4"]).status.code(), Some(exit_code::USAGE));
    assert_eq!(noisebound(&["custom", "/nonexistent/model.conf"]).status.code(), Some(exit_code::IO));
    let out = noisebound(&["preset", "fig1a", "--gammas", "0.5", "--n-traj", "10", "--out", "/nonexistent/dir/x.csv"]);
    assert_eq!(out.status.code(), Some(exit_code::IO));
}

#[test]
fn csv_is_reproducible_across_runs_and_threads() {
    let base = ["preset", "fig2b", "--gammas", "0.4,1.2", "--n-traj", "300", "--dt", "0.005", "--seed", "11"];
    let run = |threads: &str| {
        let mut args = base.to_vec();
        args.extend(["--threads", threads]);
        let out = noisebound(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let one = run("1");
    assert_eq!(one, run("1"));
    assert_eq!(one, run("4"));
    assert_eq!(rows(&String::from_utf8(one).unwrap()).len(), 2);
}

#[test]
fn seed_falls_back_to_environment() {
    let out = Command::new(BIN)
        .args(["preset", "fig1a", "--gammas", "0.5", "--n-traj", "10"])
        .env("NOISEBOUND_SEED", "424242")
        .output()
        .unwrap();
    assert_eq!(rows(&String::from_utf8(out.stdout).unwrap())[0][9], "424242");
    let flag = Command::new(BIN)
        .args(["preset", "fig1a", "--gammas", "0.5", "--n-traj", "10", "--seed", "3"])
        .env("NOISEBOUND_SEED", "424242")
        .output()
        .unwrap();
    assert_eq!(rows(&String::from_utf8(flag.stdout).unwrap())[0][9], "3");
}

#[test]
fn fig2a_reports_both_noise_types_and_a_crossing() {
    let out = noisebound(&["preset", "fig2a", "--gammas", "0.5,1.5", "--n-traj", "256", "--dt", "0.005"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let labels: Vec<String> = rows(&stdout).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(labels, ["fig2a-local", "fig2a-local", "fig2a-global", "fig2a-global"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("crossing"));
}

#[test]
fn qsl_noiseless_qubit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("qsl.csv");
    assert!(run_qsl_report(PresetName::Fig1a, 1.0, small(&[0.0], 16, 1), Some(&out), &mut Vec::new()).unwrap());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("preset,gamma,mean_bures_angle,stderr,t_qsl,T,satisfied\n"));
    let r = &rows(&text)[0];
    assert!((real(&r[2]) - PI / 2.0).abs() < 1e-9);
    assert!((real(&r[4]) - FRAC_1_SQRT_2).abs() < 1e-9);
    assert_eq!(real(&r[5]), PI / 2.0);
    assert_eq!(r[6], "true");
}

#[test]
fn qsl_holds_on_a_noisy_grid() {
    let dir = tempfile::tempdir().unwrap();
    for name in PresetName::ALL {
        let out = dir.path().join(format!("{name}.csv"));
        assert!(run_qsl_report(name, 1.0, small(&[0.25, 0.5, 1.0], 200, 8), Some(&out), &mut Vec::new()).unwrap());
        for r in rows(&std::fs::read_to_string(&out).unwrap()) {
            assert_eq!(r[6], "true", "{r:?}");
            assert!(real(&r[4]) <= real(&r[5]));
        }
    }
}
