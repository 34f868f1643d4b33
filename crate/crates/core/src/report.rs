//! Byte-stable JSON reports and their plain-text rendering.
//!
//! Keys are sorted, floats are written as `%.12e`, integers stay integers
//! and non-finite floats become `null`.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "extrad";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Version of the report layout described by `docs/report.schema.json`.
pub const REPORT_FORMAT: u64 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else {
        "null".into()
    }
}

/// Serializes through `serde_json::Value`, whose maps are key-sorted.
pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialize")
}

pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, v: &Value, level: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, item, level + 1);
                if k + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                indent(out, level + 1);
                out.push_str(&serde_json::to_string(key).expect("key serializes"));
                out.push_str(": ");
                write_value(out, &map[*key], level + 1);
                if k + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
    }
}

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) if v.is_f64() => format!("{x:.6e}"),
        Some(_) => v.to_string(),
        None => "-".into(),
    }
}

fn flag(pass: Option<bool>) -> &'static str {
    match pass {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "----",
    }
}

/// Human-readable summary of one report. Rows whose constant deviates from
/// its oracle value are prefixed with `!`.
pub fn render_text(name: &str, report: &Value) -> String {
    let mut out = String::new();
    let command = report["command"].as_str().unwrap_or("?");
    let _ = writeln!(out, "== {name} ({command})");
    if let Some(d) = report["input"]["sha256"].as_str() {
        let _ = writeln!(out, "input sha256 {d}");
    }
    if let Some(rows) = report["constants"].as_array() {
        let _ = writeln!(out, "constants:");
        let _ = writeln!(
            out,
            "    {:<22} {:>14} {:>14} {:>14} {:>14}",
            "name", "oracle", "override", "reference", "delta"
        );
        for row in rows {
            let deviates = row["deviates"].as_bool().unwrap_or(false);
            let _ = writeln!(
                out,
                "  {} {:<22} {:>14} {:>14} {:>14} {:>14}",
                if deviates { "!" } else { " " },
                row["name"].as_str().unwrap_or("?"),
                num(&row["oracle"]),
                num(&row["override"]),
                num(&row["reference"]),
                num(&row["delta"]),
            );
        }
    }
    if let Some(v) = report.get("verdict").filter(|v| !v.is_null()) {
        let _ = writeln!(
            out,
            "verdict: scheme {} guaranteed {} of {}",
            v["scheme"].as_str().unwrap_or("?"),
            v["guaranteed_count"],
            v["theorem_count"]
        );
        if !v["oracle_guaranteed_count"].is_null() {
            let _ = writeln!(
                out,
                "  with oracle constants only: {}",
                v["oracle_guaranteed_count"]
            );
        }
        for slot in v["slots"].as_array().into_iter().flatten() {
            let _ = writeln!(
                out,
                "  [{}] {} {} radii ({}, {})",
                flag(slot["pass"].as_bool()),
                slot["label"].as_str().unwrap_or("?"),
                slot["condition"].as_str().unwrap_or("?"),
                num(&slot["radii"][0]),
                num(&slot["radii"][1]),
            );
            for r in slot["reports"].as_array().into_iter().flatten() {
                let deviates = r["deviations"].as_array().is_some_and(|d| !d.is_empty());
                let _ = writeln!(
                    out,
                    "  {}   [{}] component {} lhs {} margin {}{}{}",
                    if deviates { "!" } else { " " },
                    flag(r["pass"].as_bool()),
                    r["component"],
                    num(&r["lhs"]),
                    num(&r["margin"]),
                    r["reason"]
                        .as_str()
                        .map(|s| format!(" ({s})"))
                        .unwrap_or_default(),
                    if r["oracle_lhs"].is_null() {
                        String::new()
                    } else {
                        format!(" oracle lhs {}", num(&r["oracle_lhs"]))
                    },
                );
            }
        }
    }
    if let Some(n) = report.get("nonexistence").filter(|v| !v.is_null()) {
        let _ = writeln!(
            out,
            "non-existence ({}): {}",
            n["theorem"].as_str().unwrap_or("?"),
            flag(n["pass"].as_bool())
        );
        for c in n["components"].as_array().into_iter().flatten() {
            let _ = writeln!(
                out,
                "    [{}] component {} {} scalar {} witness {}",
                flag(c["pass"].as_bool()),
                c["component"],
                c["mode"].as_str().unwrap_or("?"),
                num(&c["scalar_lhs"]),
                if c["witness"].is_null() {
                    "none".to_string()
                } else {
                    c["witness"]["z"].to_string()
                },
            );
        }
    }
    if let Some(s) = report.get("solver").filter(|v| !v.is_null()) {
        let _ = writeln!(
            out,
            "solver: {} distinct converged solution(s)",
            s["distinct_solutions"]
        );
        for o in s["outcomes"].as_array().into_iter().flatten() {
            let _ = writeln!(
                out,
                "    [{}] seed {} residual {} iterations {} sup ({}, {})",
                if o["converged"].as_bool() == Some(true) {
                    "CONV"
                } else {
                    "----"
                },
                o["seed"],
                num(&o["residual"]),
                o["iterations"],
                num(&o["sup_norm"][0]),
                num(&o["sup_norm"][1]),
            );
        }
    }
    if let Some(devs) = report["deviations"].as_array().filter(|d| !d.is_empty()) {
        let _ = writeln!(out, "deviations:");
        for d in devs {
            let _ = writeln!(
                out,
                "  ! {:<22} oracle {} published {} delta {} ({})",
                d["name"].as_str().unwrap_or("?"),
                num(&d["oracle"]),
                num(&d["paper"]),
                num(&d["delta"]),
                d["source"].as_str().unwrap_or("?"),
            );
        }
    }
    out
}
