//! On-disk cache for Monte Carlo calibration tables.
//!
//! One table per file, keyed by (kind, n, reps, seed, null params). The
//! format is plain text: `#`-prefixed header lines with `key value` pairs,
//! then one statistic value per line at 17 significant digits (lossless
//! for f64), sorted ascending.

use std::fs;
use std::path::{Path, PathBuf};

use super::{mc_calibrate, McModel, McTable, NullLaw};
use crate::error::{Error, Result};
use crate::statistics::StatKind;

const FORMAT_LINE: &str = "# mixdetect calibration table v1";

/// FNV-1a, used only to keep file names short.
fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct CalibrationCache {
    dir: PathBuf,
}

impl CalibrationCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn file_path(&self, kind: StatKind, n: usize, reps: usize, seed: u64, params: &str) -> PathBuf {
        self.dir.join(format!(
            "mc_{}_{n}_{reps}_{seed}_{:016x}.txt",
            kind.name(),
            fnv1a(params)
        ))
    }

    /// Where the table with these keys lives in the cache.
    pub fn path_for(
        &self,
        kind: StatKind,
        n: usize,
        reps: usize,
        seed: u64,
        model: Option<&McModel>,
    ) -> Result<PathBuf> {
        let params = super::params_echo(kind, model)?;
        Ok(self.file_path(kind, n, reps, seed, &params))
    }

    /// Load the table if a matching file exists, otherwise simulate it and
    /// store the result.
    pub fn load_or_compute(
        &self,
        kind: StatKind,
        n: usize,
        reps: usize,
        seed: u64,
        model: Option<&McModel>,
    ) -> Result<NullLaw> {
        let params = super::params_echo(kind, model)?;
        let path = self.file_path(kind, n, reps, seed, &params);
        if let Ok(table) = load_table(&path) {
            if table.kind == kind
                && table.n == n
                && table.reps == reps
                && table.seed == seed
                && table.params == params
            {
                return Ok(NullLaw::MonteCarlo(table));
            }
        }
        let law = mc_calibrate(kind, n, reps, seed, model)?;
        if let NullLaw::MonteCarlo(table) = &law {
            fs::create_dir_all(&self.dir)?;
            fs::write(&path, render_table(table))?;
        }
        Ok(law)
    }

    /// Store a table computed elsewhere.
    pub fn store(&self, table: &McTable) -> Result<PathBuf> {
        let path = self.file_path(table.kind, table.n, table.reps, table.seed, &table.params);
        fs::create_dir_all(&self.dir)?;
        fs::write(&path, render_table(table))?;
        Ok(path)
    }
}

pub fn render_table(t: &McTable) -> String {
    let mut out = String::with_capacity(t.values().len() * 24 + 200);
    out.push_str(FORMAT_LINE);
    out.push('\n');
    out.push_str(&format!("# kind {}\n", t.kind.name()));
    out.push_str(&format!("# n {}\n", t.n));
    out.push_str(&format!("# reps {}\n", t.reps));
    out.push_str(&format!("# seed {}\n", t.seed));
    out.push_str(&format!("# params {}\n", t.params));
    for v in t.values() {
        out.push_str(&format!("{v:.16e}\n"));
    }
    out
}

pub fn load_table(path: &Path) -> Result<McTable> {
    let text = fs::read_to_string(path)?;
    let mut kind: Option<StatKind> = None;
    let mut n: Option<usize> = None;
    let mut reps: Option<usize> = None;
    let mut seed: Option<u64> = None;
    let mut params: Option<String> = None;
    let mut values = Vec::new();
    let bad = |what: &str| Error::Calibration(format!("malformed calibration table: {what}"));

    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != FORMAT_LINE {
                return Err(bad("unknown format line"));
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) = rest.split_once(' ').ok_or_else(|| bad("header entry"))?;
            match key {
                "kind" => kind = Some(StatKind::parse(value)?),
                "n" => n = Some(value.parse().map_err(|_| bad("n"))?),
                "reps" => reps = Some(value.parse().map_err(|_| bad("reps"))?),
                "seed" => seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "params" => params = Some(value.to_string()),
                _ => return Err(bad("unknown header key")),
            }
        } else if !line.trim().is_empty() {
            values.push(line.trim().parse::<f64>().map_err(|_| bad("value line"))?);
        }
    }

    let (kind, n, reps, seed, params) = (
        kind.ok_or_else(|| bad("missing kind"))?,
        n.ok_or_else(|| bad("missing n"))?,
        reps.ok_or_else(|| bad("missing reps"))?,
        seed.ok_or_else(|| bad("missing seed"))?,
        params.ok_or_else(|| bad("missing params"))?,
    );
    if values.len() != reps {
        return Err(bad("value count does not match reps"));
    }
    Ok(McTable::new(kind, n, reps, seed, params, values))
}
