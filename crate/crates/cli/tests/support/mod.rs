//! Helpers for driving the `ssisar` binary.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn ssisar(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssisar")).args(args).current_dir(cwd).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn ok(o: Output) -> String {
    assert!(o.status.success(), "exit {:?}\nstderr: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

/// Small, fast experiment: 16x16 lattice, 2-stage network.
pub fn tiny_config(extra: serde_json::Value) -> serde_json::Value {
    let mut base = serde_json::json!({
        "radar": {"n": 16, "m": 16},
        "sampling": {"mode": "uniform-random", "keep_range": 0.75, "keep_azimuth": 0.75},
        "noise": {"snr_db": 30.0},
        "scene": {"min_scatterers": 2, "max_scatterers": 4, "margin_px": 2},
        "net": {"stages": 2, "kernel": 3, "features": 4, "inner_gd": 2},
        "denoiser": {"base": 2},
        "train": {"epochs": 1, "batch": 2, "lr": 1e-3},
        "admm": {"outer_iters": 20, "inner_gd_iters": 2},
        "seed": 5
    });
    merge(&mut base, extra);
    base
}

fn merge(a: &mut serde_json::Value, b: serde_json::Value) {
    match (a, b) {
        (serde_json::Value::Object(a), serde_json::Value::Object(b)) => {
            for (k, v) in b {
                merge(a.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (a, b) => *a = b,
    }
}

pub fn write_config(dir: &Path, name: &str, cfg: &serde_json::Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

pub fn read_dir_sorted(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

/// Every file below `dir`, relative path and bytes, sorted.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for p in read_dir_sorted(&d) {
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
