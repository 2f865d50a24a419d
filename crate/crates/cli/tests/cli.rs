use std::path::Path;
use std::process::{Command, Output};

fn ispbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ispbench")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_ppm(path: &Path, w: usize, h: usize) {
    let mut bytes = format!("P6\n# test\n{w} {h}\n255\n").into_bytes();
    bytes.extend((0..w * h * 3).map(|i| (i * 37 % 256) as u8));
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn ppm_input_writes_json_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("in.ppm");
    let out = dir.path().join("r.json");
    write_ppm(&img, 8, 6);
    let o = ispbench(&[
        "--image", img.to_str().unwrap(), "--points", "16", "--reps", "1", "--stage", "gamut",
        "--format", "json", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    assert_eq!(v["run"]["width"], 8);
    assert_eq!(v["run"]["height"], 6);
    assert_eq!(v["stages"][0]["stage"], "gamut");
}

#[test]
fn raw_bayer_input_runs_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("in.raw");
    let bytes: Vec<u8> = (0..8 * 4).flat_map(|i| (i as f32 / 32.0).to_le_bytes()).collect();
    std::fs::write(&raw, bytes).unwrap();
    let o = ispbench(&[
        "--image", raw.to_str().unwrap(), "--raw-size", "8x4", "--points", "8", "--reps", "1",
        "--format", "csv",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("stage,variant,status,"));
    for stage in ["demosaic", "denoise", "transform", "gamut", "tonemap"] {
        assert!(text.contains(&format!("\n{stage},REF,PASS")), "{stage}");
    }
}

#[test]
fn params_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.toml");
    std::fs::write(&params, "[gamut]\ngenerate = { points = 5, seed = 1 }\n[tone]\nkind = \"gamma\"\ngamma = 2.2\n").unwrap();
    let o = ispbench(&[
        "--synth", "8x4:gradient", "--params", params.to_str().unwrap(), "--reps", "1", "--stage", "tonemap",
        "--format", "json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["run"]["points"], 5);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("x.bin");
    std::fs::write(&raw, [0u8; 16]).unwrap();
    let p = dir.path().join("p.toml");
    std::fs::write(&p, "[gamut]\nbogus = 1\n").unwrap();
    for args in [
        vec!["--image", raw.to_str().unwrap()],
        vec!["--image", raw.to_str().unwrap(), "--raw-size", "8x8"],
        vec!["--synth", "4x4:noise", "--stage", "demosaic", "--variants", "RIW"],
        vec!["--synth", "4x4:noise", "--params", p.to_str().unwrap()],
        vec!["--synth", "4x4:sparkles"],
        vec!["--synth", "4x4:noise", "--format", "xml"],
        vec!["--synth", "4x4:noise", "--channel-depth", "0", "--mode", "dataflow"],
    ] {
        let o = ispbench(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn corrupted_variant_exits_one() {
    let o = ispbench(&[
        "--synth", "8x4:noise:1", "--points", "4", "--reps", "1", "--stage", "denoise", "--variants", "RI,RIW",
        "--corrupt-variant", "RIW", "--format", "json",
    ]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["stages"][0]["rows"].as_array().unwrap();
    assert_eq!(rows[0]["status"], "PASS");
    assert_eq!(rows[1]["status"], "FAILED");
    assert!(rows[1]["timing"].is_null());
}
