#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use manipseg::synth::Scenario;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_manipseg"));
    c.env("RUST_LOG", "warn");
    c
}

pub fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// A box slid along a table by a small hand: a few hundred points, quick to track.
pub fn small_scenario() -> Scenario {
    serde_json::from_value(serde_json::json!({
        "name": "slide",
        "frames": 18,
        "noise_sigma": 0.001,
        "seed": 5,
        "bodies": [
            {"name": "table", "color": [0.5, 0.5, 0.5],
             "shape": {"box": {"center": [0.0, 0.1, 0.8], "half_extents": [0.15, 0.02, 0.1], "spacing": 0.025}}},
            {"name": "box", "color": [0.2, 0.4, 0.8],
             "shape": {"box": {"center": [0.0, 0.0, 0.8], "half_extents": [0.03, 0.04, 0.03], "spacing": 0.015}},
             "keyframes": [{"frame": 6, "offset": [0.0, 0.0, 0.0]}, {"frame": 12, "offset": [0.06, 0.0, 0.0]}]},
            {"name": "hand", "color": [0.85, 0.6, 0.45], "parent": 1,
             "shape": {"sphere": {"center": [0.0, 0.0, 0.735], "radius": 0.025, "spacing": 0.01}},
             "keyframes": [
                {"frame": 0, "offset": [0.04, -0.04, -0.04]},
                {"frame": 5, "offset": [0.0, 0.0, 0.0]},
                {"frame": 13, "offset": [0.0, 0.0, 0.0]},
                {"frame": 17, "offset": [0.0, -0.04, -0.04]}
             ]}
        ],
        "actor": 2,
        "object": 1
    }))
    .expect("valid scenario")
}

/// Write the small scenario under `dir` via `synth`, returning its config path.
pub fn small_scene(dir: &Path) -> PathBuf {
    let scn = dir.join("slide.json");
    fs::write(&scn, serde_json::to_string_pretty(&small_scenario()).unwrap()).unwrap();
    let out = run(&["synth", scn.to_str().unwrap(), "--out", "scene"], dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("scene").join("config.json")
}

/// Every file under `dir`, relative path -> bytes, sorted.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, acc: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    let mut acc = Vec::new();
    walk(dir, dir, &mut acc);
    acc.sort();
    acc
}
