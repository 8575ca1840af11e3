//! Chain CSV, summary JSON and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pmmh::{Chain, ChainSample};

const FIXED_COLUMNS: [&str; 5] = ["iter", "sign", "accepted", "nu", "log_abs_like"];

/// Writes one row per iterate: `iter`, the parameters, `sign`, `accepted`,
/// `nu`, `log_abs_like`.
pub fn write_chain_csv(chain: &Chain, names: &[&str], path: impl AsRef<Path>) -> Result<()> {
    let dim = chain.samples.first().map_or(names.len(), |s| s.theta.len());
    if dim != names.len() {
        return Err(Error::Config(format!("{} parameter names for a {dim}-dimensional chain", names.len())));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iter"];
    header.extend_from_slice(names);
    header.extend_from_slice(&FIXED_COLUMNS[1..]);
    w.write_record(&header)?;
    for (i, s) in chain.samples.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(s.theta.iter().map(|v| format!("{v:e}")));
        rec.push(s.sign.to_string());
        rec.push((s.accepted as u8).to_string());
        rec.push(format!("{:e}", s.nu));
        rec.push(format!("{:e}", s.log_abs_like));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, row: usize) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Data(format!("row {row}: cannot parse {field:?}")))
}

/// Reads a chain written by [`write_chain_csv`]. A file with only parameter
/// columns (and optionally `sign`) is accepted too; missing columns default
/// to a positive sign, `accepted = false` and NaN.
pub fn read_chain_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Chain)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let param_cols: Vec<usize> = (0..headers.len()).filter(|&i| !FIXED_COLUMNS.contains(&headers[i].as_str())).collect();
    if param_cols.is_empty() {
        return Err(Error::Data("chain file has no parameter columns".into()));
    }
    let (sign_c, acc_c, nu_c, ll_c) = (col("sign"), col("accepted"), col("nu"), col("log_abs_like"));
    let mut samples = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let theta = param_cols.iter().map(|&c| parse(&rec[c], row)).collect::<Result<Vec<f64>>>()?;
        let sign: i8 = sign_c.map(|c| parse(&rec[c], row)).transpose()?.unwrap_or(1);
        if sign != 1 && sign != -1 {
            return Err(Error::Data(format!("row {row}: sign must be +-1, got {sign}")));
        }
        samples.push(ChainSample {
            theta,
            sign,
            accepted: acc_c.map(|c| parse::<u8>(&rec[c], row)).transpose()?.unwrap_or(0) == 1,
            nu: nu_c.map(|c| parse(&rec[c], row)).transpose()?.unwrap_or(f64::NAN),
            log_abs_like: ll_c.map(|c| parse(&rec[c], row)).transpose()?.unwrap_or(f64::NAN),
        });
    }
    let names = param_cols.iter().map(|&c| headers[c].clone()).collect();
    Ok((names, Chain { samples, runtime_secs: f64::NAN }))
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Git-style object hash: SHA-256 of `"blob <len>\0"` followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(content_hash(&fs::read(path)?))
}

/// Everything needed to re-run a command bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Input path to content hash.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, args: Vec<String>, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            config: serde_json::to_value(config)?,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    pub fn seed(mut self, name: &str, seed: u64) -> Self {
        self.seeds.insert(name.to_string(), seed);
        self
    }

    pub fn input(mut self, path: impl AsRef<Path>) -> Result<Self> {
        let hash = hash_file(&path)?;
        self.inputs.insert(path.as_ref().display().to_string(), hash);
        Ok(self)
    }

    pub fn output(mut self, path: impl AsRef<Path>) -> Self {
        self.outputs.push(path.as_ref().display().to_string());
        self
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::diagnostics::{summarize, ChainSummary};

    fn chain() -> Chain {
        let samples = (0..200)
            .map(|i| ChainSample {
                theta: vec![i as f64 * 0.1, 1.0 / (i + 1) as f64],
                sign: if i % 7 == 0 { -1 } else { 1 },
                accepted: i % 2 == 0,
                nu: 0.5 + i as f64,
                log_abs_like: -(i as f64),
            })
            .collect();
        Chain { samples, runtime_secs: 2.0 }
    }

    #[test]
    fn chain_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let c = chain();
        write_chain_csv(&c, &["a", "b"], &p).unwrap();
        let (names, back) = read_chain_csv(&p).unwrap();
        assert_eq!(names, vec!["a", "b"]);
        assert_eq!(back.samples, c.samples);
    }

    #[test]
    fn parameter_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "theta\n0.1\n0.2\n").unwrap();
        let (names, c) = read_chain_csv(&p).unwrap();
        assert_eq!(names, vec!["theta"]);
        assert_eq!(c.samples[1].theta, vec![0.2]);
        assert_eq!(c.samples[1].sign, 1);
    }

    #[test]
    fn summary_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        let s = summarize(&chain(), 50, 0.95).unwrap().named(&["a", "b"]);
        write_json(&s, &p).unwrap();
        let back: ChainSummary = read_json(&p).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn git_style_hash() {
        // the SHA-256 object id git assigns to an empty blob
        assert_eq!(content_hash(b""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
    }

    #[test]
    fn manifest_records_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "abc").unwrap();
        let m = Manifest::new("test", vec!["x".into()], &serde_json::json!({"k": 1})).unwrap().seed("main", 7).input(&input).unwrap();
        let p = dir.path().join("m.json");
        m.write(&p).unwrap();
        let back: Manifest = read_json(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.inputs.values().next().unwrap(), &content_hash(b"abc"));
    }
}
