use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use popslab::kernels::Snr;
use popslab::solver::sinr_of_pair;
use popslab_cli::formats::codebook_from_text;
use tempfile::TempDir;

const TINY: &str = "\
[lattice]
kind = hexagonal
Q = 8
N = 10

[channel]
BdTm = 0.01

[pops]
D_over_T = 2
max_iters = 5
window_search = 1
K_grid = 2 3
";

fn popslab(dir: &Path, command: &str, descriptor: &str, extra: &[&str]) -> Output {
    let config = dir.join(format!("{command}.ini"));
    fs::write(&config, descriptor).unwrap();
    Command::new(env!("CARGO_BIN_EXE_popslab"))
        .arg(command)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn optimize_writes_reproducible_artifacts() {
    let dir = TempDir::new().unwrap();
    assert_ok(&popslab(dir.path(), "optimize", TINY, &[]));
    let first: Vec<String> = ["trace.csv", "waveforms.csv", "codebook.popscb"].iter().map(|f| read(dir.path(), f)).collect();
    assert!(first[0].starts_with("axis,sinr_dB\n1,"));
    assert_eq!(first[0].lines().count(), 1 + 2 * 5);
    assert!(first[1].starts_with("axis,phi_re,phi_im,psi_re,psi_im\n"));

    assert_ok(&popslab(dir.path(), "optimize", TINY, &["--threads", "1"]));
    for (f, before) in ["trace.csv", "waveforms.csv", "codebook.popscb"].iter().zip(&first) {
        assert_eq!(&read(dir.path(), f), before, "{f} changed between runs");
    }
}

#[test]
fn codebook_file_reproduces_recorded_sir() {
    let dir = TempDir::new().unwrap();
    assert_ok(&popslab(dir.path(), "optimize", TINY, &[]));
    let book = codebook_from_text(&read(dir.path(), "codebook.popscb")).unwrap();
    let e = &book.entries()[0];
    let again = sinr_of_pair(&e.phi, &e.psi, &e.design_channel().unwrap(), &e.cfg, Snr::Infinite).unwrap();
    assert!((again - e.design_sinr_db).abs() <= 1e-9, "{again} vs {}", e.design_sinr_db);
    assert!((e.phi.norm() - 1.0).abs() < 1e-12 && (e.psi.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn sweep_ft_emits_one_row_per_value() {
    let dir = TempDir::new().unwrap();
    let text = format!("{TINY}\n[sweep]\naxis = ft\nvalues = 1.25 1.5 2\nkinds = hexagonal rectangular\n");
    assert_ok(&popslab(dir.path(), "sweep", &text, &[]));
    let csv = read(dir.path(), "sweep.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "axis,hexagonal_D2,rectangular_D2,ofdm");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1.25,") && lines[3].starts_with("2,"));
    assert!(read(dir.path(), "sweep.meta").contains("BdTm = 0.01"));
}

#[test]
fn psd_and_sensitivity_reuse_a_codebook() {
    let dir = TempDir::new().unwrap();
    assert_ok(&popslab(dir.path(), "optimize", TINY, &[]));
    let book = dir.path().join("out").join("codebook.popscb");
    let with_input = format!("{TINY}\n[input]\ncodebook = {}\n", book.display());

    assert_ok(&popslab(dir.path(), "psd", &format!("{with_input}\n[sweep]\noversample = 4\nsubcarriers = 3\n"), &[]));
    let psd = read(dir.path(), "psd.csv");
    assert!(psd.starts_with("axis,hexagonal,hexagonal_aggregate\n-4,"));
    assert_eq!(psd.lines().count(), 1 + 32);

    let sens = format!("{with_input}\n[sweep]\naxis = time\nvalues = -2 0 2\n");
    assert_ok(&popslab(dir.path(), "sensitivity", &sens, &[]));
    let csv = read(dir.path(), "sensitivity.csv");
    assert!(csv.starts_with("axis,hexagonal,ofdm\n-2,"));
    let zero: Vec<f64> = csv.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let recorded = codebook_from_text(&fs::read_to_string(&book).unwrap()).unwrap().entries()[0].design_sinr_db;
    assert_eq!(zero[1], recorded);

    let fractional = format!("{with_input}\n[sweep]\naxis = time\nvalues = 0.5\n");
    assert_eq!(popslab(dir.path(), "sensitivity", &fractional, &[]).status.code(), Some(2));
}

#[test]
fn codebook_command_writes_entries_and_envelope() {
    let dir = TempDir::new().unwrap();
    let text = format!("{TINY}\n[sweep]\nspreads = 1e-2 1e-3\nvalues = 1e-4 1e-3 1e-2\n");
    assert_ok(&popslab(dir.path(), "codebook", &text, &[]));
    let book = codebook_from_text(&read(dir.path(), "codebook.popscb")).unwrap();
    assert_eq!(book.entries().len(), 2);
    assert_eq!(book.entries()[0].design_spread, 1e-3);
    let csv = read(dir.path(), "mismatch.csv");
    assert!(csv.starts_with("axis,design_1e-3,design_1e-2,envelope\n0.0001,"));
}

#[test]
fn validate_passes_on_desk_config() {
    let dir = TempDir::new().unwrap();
    let text = "\
command = validate
[lattice]
Q = 16
N = 20
[channel]
BdTm = 0.01
[pops]
snr_dB = 20
D_over_T = 3
max_iters = 20
window_search = 2
K_grid = 3
";
    let out = popslab(dir.path(), "validate", text, &["--seed", "7"]);
    assert_ok(&out);
    let csv = read(dir.path(), "validate.csv");
    assert!(csv.starts_with("axis,analytic_dB,simulated_dB,ci95_dB,gap_dB\n10000,"));
}

#[test]
fn validate_exit_status_tracks_the_tolerance() {
    let dir = TempDir::new().unwrap();
    let text = format!("{TINY}\n[sweep]\ntrials = 100\n");
    for seed in ["1", "2", "3"] {
        let out = popslab(dir.path(), "validate", &text, &["--seed", seed]);
        let row = read(dir.path(), "validate.csv");
        let gap: f64 = row.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
        let expected = if gap.abs() <= 0.2 { 0 } else { 3 };
        assert_eq!(out.status.code(), Some(expected), "seed {seed}, gap {gap}");
    }
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = popslab(dir.path(), "optimize", "[lattice]\nQ = 8\nN = 10\nQ = 12\n", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("E_PARSE") && err.contains("line 4") && err.contains("line 2"), "{err}");

    let out = popslab(dir.path(), "sweep", &format!("command = optimize\n{TINY}"), &[]);
    assert_eq!(out.status.code(), Some(2));

    let out = popslab(dir.path(), "transmogrify", TINY, &[]);
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_popslab"))
        .args(["optimize", "--config"])
        .arg(dir.path().join("missing.ini"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));

    let bad_input = format!("{TINY}\n[input]\ncodebook = {}\n", dir.path().join("nope.popscb").display());
    assert_eq!(popslab(dir.path(), "psd", &bad_input, &[]).status.code(), Some(5));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("t.ini");
    fs::write(&config, TINY).unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_popslab"))
            .args(["optimize", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join("out"))
            .env("POPSLAB_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_ok(&run("1"));
    assert_eq!(run("0").status.code(), Some(2));
}
