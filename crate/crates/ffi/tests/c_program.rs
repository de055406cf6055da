//! Compiles the C example against the generated header and the static
//! library, then checks its output against the Rust predictions.

use std::path::{Path, PathBuf};
use std::process::Command;

use forumguard::artifact::save_pipeline;
use forumguard::linear::{LinearModelConfig, LossKind};
use forumguard::pipeline::{fit_pipeline, ModelSpec, PipelineSpec};

fn static_lib() -> Option<PathBuf> {
    // Test binaries live in <target>/<profile>/deps.
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libforumguard_ffi.a");
    lib.is_file().then_some(lib)
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn c_example_matches_rust_predictions() {
    let Some(lib) = static_lib().filter(|_| have_cc()) else {
        eprintln!("skipping: no C compiler or static library");
        return;
    };
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("classify");
    let status = Command::new("cc")
        .arg(crate_dir.join("examples/classify.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .args(["-std=c99", "-Wall", "-Werror"])
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C example failed to build");

    let texts = ["horrible noob uninstall", "well played team", "noob trash", "good game"];
    let labels = [1, 0, 1, 0];
    let spec = PipelineSpec::new(ModelSpec::Linear(LinearModelConfig::new(LossKind::Hinge)));
    let model = fit_pipeline(&texts, &labels, &spec, None).unwrap();
    let model_path = dir.path().join("m.fgm");
    save_pipeline(&model_path, &model).unwrap();

    let out = Command::new(&exe).arg(&model_path).args(texts).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let expected = model.predict_texts(&texts).unwrap();
    assert_eq!(stdout.lines().count(), texts.len());
    for ((line, want), text) in stdout.lines().zip(&expected).zip(texts) {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields[0], want.label.to_string());
        assert_eq!(fields[1].parse::<f64>().unwrap().to_bits(), want.score.to_bits());
        assert_eq!(fields[2], text);
    }

    let missing = Command::new(&exe).arg(dir.path().join("none.fgm")).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("load failed"));
}
