mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::tiny_config;

fn cpnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpnet")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, data: &Path, extra: &str) -> std::path::PathBuf {
    let mut config = tiny_config(&dir.join("run"));
    config.data.dir = Some(data.to_path_buf());
    config.data.train_fraction = 0.5;
    let path = dir.join("config.toml");
    std::fs::write(&path, format!("{}\n{extra}", config.to_toml())).unwrap();
    path
}

fn png_count(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count()
}

#[test]
fn toy_data_train_generate_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = cpnet(&["make-toy-data", "--seed", "1", "--clips", "2", "--frames", "14", "--res", "32", "--out", s(&data)]);
    ok(&out);
    assert_eq!(png_count(&data.join("clip_0000")), 14);

    let config = write_config(dir.path(), &data, "");
    let stdout = ok(&cpnet(&["train", "--config", s(&config)]));
    assert!(stdout.contains("iteration 10"), "{stdout}");
    let ckpt = dir.path().join("run/ckpt_0000010.safetensors");
    assert!(ckpt.exists());

    let video = dir.path().join("video");
    let track = data.join("clip_0000/landmarks.csv");
    ok(&cpnet(&["generate", "--ckpt", s(&ckpt), "--track", s(&track), "--out", s(&video)]));
    assert_eq!(png_count(&video), 14 - 6);

    let csv = dir.path().join("scores.csv");
    let stdout = ok(&cpnet(&["evaluate", "--ckpt", s(&ckpt), "--data", s(&data), "--csv", s(&csv)]));
    assert!(stdout.contains("mean") && stdout.contains("SSIM"), "{stdout}");
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 4);

    // Continuing to 12 iterations from the saved checkpoint.
    let longer = write_config(dir.path(), &data, "");
    let text = std::fs::read_to_string(&longer).unwrap().replace("iterations = 10", "iterations = 12");
    std::fs::write(&longer, text).unwrap();
    let stdout = ok(&cpnet(&["train", "--config", s(&longer), "--resume", s(&ckpt)]));
    assert!(stdout.contains("iteration 12"), "{stdout}");
}

#[test]
fn ablate_table_four_emits_finite_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&cpnet(&["make-toy-data", "--clips", "2", "--frames", "14", "--res", "32", "--out", s(&data)]));
    let config = write_config(dir.path(), &data, "");
    let text = std::fs::read_to_string(&config).unwrap().replace("iterations = 10", "iterations = 3");
    std::fs::write(&config, text).unwrap();
    let stdout = ok(&cpnet(&["ablate", "--config", s(&config), "--table", "4"]));
    assert!(stdout.starts_with("Table 4"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("run/table4.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for (row, lambda) in rows.iter().zip(["1", "0.5", "0.1", "0.05"]) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[0], lambda);
        for cell in &cells[1..3] {
            assert!(cell.parse::<f64>().unwrap().is_finite(), "{row}");
        }
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "learning_rate = -1.0\n").unwrap();
    assert_eq!(cpnet(&["train", "--config", s(&bad)]).status.code(), Some(2));
    std::fs::write(&bad, "[loss]\nunknown = 1\n").unwrap();
    assert_eq!(cpnet(&["ablate", "--config", s(&bad), "--table", "4"]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(cpnet(&["train", "--config", s(&missing)]).status.code(), Some(2));
    assert_eq!(cpnet(&["ablate", "--config", s(&bad), "--table", "5"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing.safetensors");
    let out = cpnet(&["generate", "--ckpt", s(&missing), "--track", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    // Clips too short for the configured sequence length.
    let data = dir.path().join("data");
    ok(&cpnet(&["make-toy-data", "--clips", "1", "--frames", "8", "--res", "32", "--out", s(&data)]));
    let config = write_config(dir.path(), &data, "");
    assert_eq!(cpnet(&["train", "--config", s(&config)]).status.code(), Some(3));
}
