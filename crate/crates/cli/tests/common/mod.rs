// SPDX-License-Identifier: MIT OR Apache-2.0

#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timeinf"))
        .current_dir(dir)
        .args(args)
        .env("TIMEINF_THREADS", "2")
        .output()
        .expect("binary runs")
}

pub fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Data rows of a CSV file, header dropped.
pub fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

pub fn column(path: &Path, i: usize) -> Vec<f64> {
    rows(path).iter().map(|r| r[i].parse().unwrap()).collect()
}

pub fn json_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    serde_json::from_str(text.trim()).unwrap()
}

pub fn write_column(path: &Path, header: &str, values: impl IntoIterator<Item = String>) {
    let mut text = format!("{header}\n");
    for v in values {
        text.push_str(&v);
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}
