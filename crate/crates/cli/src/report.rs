//! Deterministic text output: CSV and JSON emitters with lossless float
//! formatting, SHA-256 checksums, and the run manifest.
//!
//! Everything here is byte-stable: floats are printed with 17 significant
//! digits (exact round trip for doubles), field order is fixed, and no
//! timestamps or environment details leak into the files. Rerunning the same
//! config with the same seed must reproduce every byte.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use srpt_lab_core::stats::TrendReport;

/// Lossless double: 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").expect("write to String");
    }
    s
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => write!(out, "\\u{:04x}", c as u32).expect("write to String"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn json_f64_array(xs: &[f64]) -> String {
    let mut out = String::from("[");
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*x));
    }
    out.push(']');
    out
}

pub fn trend_json(t: &TrendReport) -> String {
    format!(
        "{{\"statistic\":{},\"r\":{},\"median\":{},\"monotone_decreasing\":{},\"margin\":{}}}\n",
        json_string(&t.statistic),
        json_f64_array(&t.r),
        json_f64_array(&t.median),
        t.monotone_decreasing,
        fmt_f64(t.margin),
    )
}

/// Terminal-marginal goodness of fit against the reflected Brownian oracle,
/// reported per r. `terminal_ks` is absent when the run started nonempty
/// (the oracle marginal assumes a zero start).
pub fn diagnostics_json(
    drift: f64,
    variance: f64,
    horizon: f64,
    terminal_ks: Option<&[(f64, f64)]>,
) -> String {
    let mut out = String::from("{");
    write!(
        out,
        "\"drift\":{},\"variance\":{},\"horizon\":{},\"terminal_ks\":",
        fmt_f64(drift),
        fmt_f64(variance),
        fmt_f64(horizon),
    )
    .expect("write to String");
    match terminal_ks {
        None => out.push_str("null"),
        Some(pairs) => {
            out.push('[');
            for (i, (r, ks)) in pairs.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{{\"r\":{},\"ks\":{}}}", fmt_f64(*r), fmt_f64(*ks))
                    .expect("write to String");
            }
            out.push(']');
        }
    }
    out.push_str("}\n");
    out
}

pub fn rbm_comparison_json(
    drift: f64,
    variance: f64,
    t: f64,
    step: f64,
    n: usize,
    seed: u64,
    ks: f64,
) -> String {
    format!(
        "{{\"drift\":{},\"variance\":{},\"t\":{},\"step\":{},\"n\":{n},\"seed\":{seed},\"ks\":{}}}\n",
        fmt_f64(drift),
        fmt_f64(variance),
        fmt_f64(t),
        fmt_f64(step),
        fmt_f64(ks),
    )
}

/// Manifest: config hash, base seed, and every written file with its
/// checksum, sorted by name. Written last so it covers the whole run.
pub fn manifest_json(config_sha256: &str, base_seed: u64, files: &[(String, String)]) -> String {
    let mut sorted: Vec<&(String, String)> = files.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = String::from("{");
    write!(
        out,
        "\"config_sha256\":{},\"base_seed\":{base_seed},\"files\":[",
        json_string(config_sha256),
    )
    .expect("write to String");
    for (i, (name, sha)) in sorted.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(
            out,
            "{{\"name\":{},\"sha256\":{}}}",
            json_string(name),
            json_string(sha),
        )
        .expect("write to String");
    }
    out.push_str("]}\n");
    out
}

/// Incremental CSV builder with a fixed header.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Csv {
            buf,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "CSV row width mismatch");
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}
