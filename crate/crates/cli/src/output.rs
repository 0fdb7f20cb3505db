//! CSV and JSON writers. Floats use Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use sfrac_core::{Grid, QuatField, RealField};

fn coords_prefix(grid: &Grid, idx: usize, out: &mut String) {
    let x = grid.coords(idx);
    let _ = write!(out, "{},{},{}", x[0], x[1], x[2]);
}

/// `x1,x2,x3,q0,q1,q2,q3`, one row per interior node in storage order.
pub fn fields_csv(q: &QuatField) -> String {
    let mut out = String::from("x1,x2,x3,q0,q1,q2,q3\n");
    for i in 0..q.grid.len() {
        coords_prefix(&q.grid, i, &mut out);
        for c in &q.comps {
            let _ = write!(out, ",{}", c[i]);
        }
        out.push('\n');
    }
    out
}

/// `x1,x2,x3,v`.
pub fn snapshot_csv(v: &RealField) -> String {
    let mut out = String::from("x1,x2,x3,v\n");
    for (i, val) in v.values.iter().enumerate() {
        coords_prefix(&v.grid, i, &mut out);
        let _ = writeln!(out, ",{val}");
    }
    out
}

/// `t,l2`.
pub fn trace_csv(times: &[f64], l2: &[f64]) -> String {
    let mut out = String::from("t,l2\n");
    for (t, v) in times.iter().zip(l2) {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

pub fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir, name, &text)
}
