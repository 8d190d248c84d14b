//! CSV files and the run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Six significant digits, plain notation between 1e-4 and 1e15.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..15).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        // a value like 9.999996 rounds up a digit; redo with one decimal less
        let rounded_up = s.parse::<f64>().is_ok_and(|r| r.abs() >= 10f64.powi(exp + 1));
        let s = if rounded_up && decimals > 0 {
            format!("{v:.prec$}", prec = decimals - 1)
        } else {
            s
        };
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.5e}")
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub settings: serde_json::Value,
    pub outputs: Vec<OutputFile>,
}

/// Writes CSV files into one directory and remembers them for the manifest.
pub struct OutDir {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl OutDir {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        fs::write(self.dir.join(name), &bytes)?;
        self.files.push(OutputFile {
            file: name.to_string(),
            rows: rows.len(),
            sha256: hex_digest(&bytes),
        });
        Ok(())
    }

    pub fn finish(
        self,
        command: &str,
        config_hash: String,
        started_unix: u64,
        settings: serde_json::Value,
    ) -> io::Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash,
            started_unix,
            finished_unix: unix_now(),
            settings,
            outputs: self.files,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        fs::write(self.dir.join("manifest.json"), text + "\n")?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(35074.0), "35074");
        assert_eq!(sig6(35074.123456), "35074.1");
        assert_eq!(sig6(12.142857142857142), "12.1429");
        assert_eq!(sig6(-0.00123456789), "-0.00123457");
        assert_eq!(sig6(9.9999996), "10");
        assert_eq!(sig6(999999.6), "1000000");
        assert_eq!(sig6(1.5e-7), "1.50000e-7");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(2.0), "2");
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            hex_digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
