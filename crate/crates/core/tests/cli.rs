//! Drives the `glassnerf` binary end to end on a tiny dataset and checks
//! artifacts and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn glassnerf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glassnerf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn generate(dir: &Path, scene: &str) {
    let out = glassnerf(&[
        "generate",
        "--scene",
        scene,
        "--out",
        p(dir),
        "--train",
        "2",
        "--val",
        "1",
        "--test",
        "1",
        "--width",
        "12",
        "--height",
        "12",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn train(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--data",
        p(data),
        "--out",
        p(out),
        "--iterations",
        "2",
        "--rays",
        "16",
        "--width",
        "8",
        "--quiet",
        "--deterministic",
    ];
    args.extend_from_slice(extra);
    glassnerf(&args)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_train_render_eval_extract() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    generate(&data, "slab-checker");
    assert!(data.join("transforms.json").is_file());

    let config = tmp.path().join("patch.json");
    fs::write(&config, r#"{"render": {"coarse_samples": 8}, "learning_rate": 1e-3}"#).unwrap();
    let out = train(&data, &run, &["--config", p(&config), "--learning-rate", "3e-3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let echo = read_json(&run.join("config.json"));
    // flag beats file beats preset
    assert_eq!(echo["train"]["learning_rate"], 3e-3);
    assert_eq!(echo["train"]["render"]["coarse_samples"], 8);
    assert_eq!(echo["train"]["field"]["width"], 8);
    let checkpoint = run.join("checkpoint.bin");
    assert!(checkpoint.is_file());

    let renders = tmp.path().join("renders");
    let out = glassnerf(&[
        "render",
        "--checkpoint",
        p(&checkpoint),
        "--data",
        p(&data),
        "--out",
        p(&renders),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for suffix in ["color", "vi", "vd", "depth"] {
        assert!(renders.join(format!("000_{suffix}.png")).is_file(), "missing {suffix}");
    }
    assert_eq!(read_json(&renders.join("render.json"))["views"], 1);

    let report = tmp.path().join("eval.json");
    let out = glassnerf(&[
        "eval",
        "--checkpoint",
        p(&checkpoint),
        "--data",
        p(&data),
        "--out",
        p(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&report);
    assert!(report["metrics"]["mean_psnr"].as_f64().unwrap().is_finite());
    assert_eq!(report["metrics"]["quantized"], true);
    assert_eq!(report["train"]["learning_rate"], 3e-3);

    let xyz = tmp.path().join("glass.xyz");
    let out = glassnerf(&[
        "extract-glass",
        "--checkpoint",
        p(&checkpoint),
        "--data",
        p(&data),
        "--out",
        p(&xyz),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(xyz.is_file());
    assert!(read_json(&xyz.with_extension("json"))["glass"]["points"].is_u64());
}

#[test]
fn eval_without_glass_ground_truth_warns_and_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    generate(&data, "no-glass");
    assert_eq!(code(&train(&data, &run, &[])), 0);
    let out = glassnerf(&[
        "eval",
        "--checkpoint",
        p(&run.join("checkpoint.bin")),
        "--data",
        p(&data),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("surface error omitted"));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["glass"]["surface_error"].is_null());
}

#[test]
fn input_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    generate(&data, "slab-checker");
    assert_eq!(code(&train(&data, &run, &[])), 0);
    let checkpoint = run.join("checkpoint.bin");

    let poses = tmp.path().join("poses.json");
    fs::write(
        &poses,
        r#"{"camera_angle_x": 0.7, "width": 8, "height": 8, "frames": [{"transform_matrix": [[1, 0]]}]}"#,
    )
    .unwrap();
    let out = glassnerf(&[
        "render",
        "--checkpoint",
        p(&checkpoint),
        "--poses",
        p(&poses),
        "--out",
        p(tmp.path()),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    let missing = tmp.path().join("nowhere");
    assert_eq!(code(&train(&missing, &run, &[])), 2);

    let patch = tmp.path().join("patch.json");
    fs::write(&patch, r#"{"render": {"coarse_sampels": 8}}"#).unwrap();
    let out = train(&data, &tmp.path().join("run2"), &["--config", p(&patch)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("coarse_sampels"));

    assert_eq!(
        code(&glassnerf(&[
            "generate",
            "--scene",
            "no-such-scene",
            "--out",
            p(&missing)
        ])),
        2
    );
    assert_eq!(code(&glassnerf(&["train", "--bogus"])), 2);
    assert_eq!(
        code(&glassnerf(&["--threads", "0", "generate", "--out", p(&missing)])),
        2
    );
}

#[test]
fn corrupt_checkpoint_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "slab-checker");
    let checkpoint = tmp.path().join("checkpoint.bin");
    fs::write(&checkpoint, "{\"iteration\": 3, \"model\": ").unwrap();
    let out = glassnerf(&["eval", "--checkpoint", p(&checkpoint), "--data", p(&data)]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let out = glassnerf(&[
        "train",
        "--data",
        p(&data),
        "--out",
        p(&tmp.path().join("run")),
        "--resume",
        p(&checkpoint),
    ]);
    assert_eq!(code(&out), 3);
}
