//! Compiles a C program against the generated header and the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const CONFIG: &str = r#"
[dataset]
splits = [200, 60, 60]

[dataset.synthetic]
num_classes = 3
input_dim = 6
n_per_class = 110
spread = 0.3

[corruption]
label_noise_rate = 0.1

[irreducible]
hidden_dims = [12]
max_epochs = 10

[model]
hidden_dims = [12]
dropout_rate = 0.2

[selection]
kind = "reducible"
large_batch_size = 30
batch_size = 6
total_steps = 40
eval_every = 10

[output]
charts = false
"#;

/// `target/<profile>/deps`, where cargo leaves the library next to this test.
fn deps_dir() -> PathBuf {
    std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    let lib = deps_dir().join("libgoldiprox_ffi.a");
    assert!(lib.is_file(), "{} not built", lib.display());
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");

    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = Command::new(&exe)
        .arg(&cfg)
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
