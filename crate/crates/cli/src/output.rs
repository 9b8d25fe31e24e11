//! Result rows, gate outcomes, `results.csv` and `manifest.json`.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;

pub const CSV_HEADER: &str = "experiment,n,N,L,tau,sample_id,quantity,value";

/// One line of `results.csv`. `tau` is 0 for rows that do not depend on a
/// phase; `N` and `L` are 0 for experiments without a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub size: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub tau: f64,
    pub sample_id: u64,
    pub quantity: String,
    pub value: f64,
}

/// Outcome of one acceptance gate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub experiment: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Suite position, then experiment, tau, sample and quantity. Rows within an
/// experiment are generated in a fixed order, so this is only a safeguard
/// against scheduling changing the output.
pub fn sort_rows(rows: &mut [(usize, Row)]) {
    rows.sort_by(|(ia, a), (ib, b)| {
        ia.cmp(ib)
            .then_with(|| a.experiment.cmp(&b.experiment))
            .then_with(|| a.tau.total_cmp(&b.tau))
            .then_with(|| a.sample_id.cmp(&b.sample_id))
            .then_with(|| a.quantity.cmp(&b.quantity))
            .then_with(|| a.value.total_cmp(&b.value).then(Ordering::Equal))
    });
}

fn number(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:?}")
    }
}

pub fn render_csv(rows: &[Row]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.experiment,
            r.n,
            r.size,
            number(r.length),
            number(r.tau),
            r.sample_id,
            r.quantity,
            number(r.value)
        );
    }
    out
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub experiments: Vec<&'a str>,
    pub tolerances: &'a crate::config::Tolerances,
    pub rows: usize,
    pub gates: &'a [Gate],
    pub exit_code: i32,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_outputs(
    dir: &Path,
    config_text: &str,
    config: &Config,
    rows: &[Row],
    gates: &[Gate],
    threads: usize,
    exit_code: i32,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), render_csv(rows))?;
    let manifest = Manifest {
        tool: "cgolab",
        version: env!("CARGO_PKG_VERSION"),
        core_version: cgolab_core::VERSION,
        config_sha256: sha256_hex(config_text.as_bytes()),
        seed: config.seed,
        threads,
        experiments: config.experiments.iter().map(|e| e.experiment.as_str()).collect(),
        tolerances: &config.tolerances,
        rows: rows.len(),
        gates,
        exit_code,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("manifest.json"), json + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(tau: f64, id: u64, q: &str) -> Row {
        Row {
            experiment: "x".into(),
            n: 3,
            size: 16,
            length: std::f64::consts::TAU,
            tau,
            sample_id: id,
            quantity: q.into(),
            value: 0.1,
        }
    }

    #[test]
    fn header_and_formatting() {
        let csv = render_csv(&[row(4.0, 2, "a")]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("x,3,16,6.283185307179586,4.0,2,a,0.1"));
        assert_eq!(number(f64::NAN), "NaN");
        assert_eq!(number(1e-300), "1e-300");
    }

    #[test]
    fn canonical_order() {
        let mut rows = vec![(1, row(1.0, 0, "a")), (0, row(8.0, 1, "b")), (0, row(8.0, 0, "c")), (0, row(2.0, 5, "a"))];
        sort_rows(&mut rows);
        let keys: Vec<_> = rows.iter().map(|(i, r)| (*i, r.tau, r.sample_id)).collect();
        assert_eq!(keys, vec![(0, 2.0, 5), (0, 8.0, 0), (0, 8.0, 1), (1, 1.0, 0)]);
    }

    #[test]
    fn digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
