//! Dataset ingestion and persistence.
//!
//! Two formats are understood:
//!
//! * **structured records** (`.jsonl`): one JSON object per line,
//!
//!   ```text
//!   {"id":"nacl","lattice":[[5.6,0,0],[0,5.6,0],[0,0,5.6]],"frac_coords":[[0,0,0],[0.5,0.5,0.5]],"numbers":[11,17],"target":1.0}
//!   ```
//!
//!   `lattice` rows are lattice vectors in Å, `frac_coords` are fractional
//!   site coordinates (wrapped into `[0,1)` on load), `numbers` are atomic
//!   numbers and `target` is the property value. `target` may also be a
//!   string holding a float literal such as `"NaN"`; non-finite targets are
//!   rejected. Blank lines and lines starting with `#` are skipped.
//!
//! * **extended XYZ**: per frame an atom count line, a comment line with
//!   `Lattice="ax ay az bx by bz cx cy cz"` and a `target=<value>` key
//!   (optionally `id=<name>`), then one `Symbol x y z` line per atom with
//!   Cartesian positions in Å.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::{atomic_number, element_symbol, CrystalStructure, LabeledDataset, Lattice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    StructuredRecords,
    ExtendedXyz,
}

impl DatasetFormat {
    /// Guess from file extension; anything but `.xyz`/`.extxyz` is records.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("xyz") | Some("extxyz") => DatasetFormat::ExtendedXyz,
            _ => DatasetFormat::StructuredRecords,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TargetField {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    id: String,
    lattice: [[f64; 3]; 3],
    frac_coords: Vec<[f64; 3]>,
    numbers: Vec<u32>,
    target: TargetField,
}

#[derive(Debug, Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    lattice: [[f64; 3]; 3],
    frac_coords: &'a [[f64; 3]],
    numbers: &'a [u32],
    target: f64,
}

pub fn parse_dataset(path: &Path, format: DatasetFormat) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let source = path.display().to_string();
    match format {
        DatasetFormat::StructuredRecords => parse_records_str(&text, &name, &source),
        DatasetFormat::ExtendedXyz => parse_extxyz_str(&text, &name, &source),
    }
}

pub fn parse_records_str(text: &str, name: &str, source: &str) -> Result<LabeledDataset> {
    let mut structures = Vec::new();
    let mut targets = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let loc = format!("line {}", lineno + 1);
        let rec: RecordIn = serde_json::from_str(trimmed)
            .map_err(|e| Error::parse(source, loc.clone(), e.to_string()))?;
        let target = match rec.target {
            TargetField::Number(v) => v,
            TargetField::Text(s) => s.trim().parse::<f64>().map_err(|_| {
                Error::parse(source, loc.clone(), format!("target `{s}` is not a number"))
            })?,
        };
        if !target.is_finite() {
            return Err(Error::Validation(format!(
                "{source} {loc}: target of `{}` is not finite",
                rec.id
            )));
        }
        let lattice = Lattice::new(rec.lattice).map_err(|e| at(source, &loc, e))?;
        let s = CrystalStructure::new(lattice, rec.frac_coords, rec.numbers, rec.id)
            .map_err(|e| at(source, &loc, e))?;
        structures.push(s);
        targets.push(target);
    }
    LabeledDataset::new(structures, targets, name)
}

fn at(source: &str, loc: &str, e: Error) -> Error {
    match e {
        Error::Validation(m) => Error::Validation(format!("{source} {loc}: {m}")),
        Error::Geometry(m) => Error::Geometry(format!("{source} {loc}: {m}")),
        other => other,
    }
}

/// Canonical structured-records text for a dataset.
pub fn records_to_string(data: &LabeledDataset) -> String {
    let mut out = String::new();
    for (s, &t) in data.structures().iter().zip(data.targets()) {
        let rec = RecordOut {
            id: s.id(),
            lattice: s.lattice().rows(),
            frac_coords: s.fractional_coords(),
            numbers: s.atomic_numbers(),
            target: t,
        };
        out.push_str(&serde_json::to_string(&rec).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_records(data: &LabeledDataset, path: &Path) -> Result<()> {
    fs::write(path, records_to_string(data)).map_err(|e| Error::io(path, e))
}

pub fn parse_extxyz_str(text: &str, name: &str, source: &str) -> Result<LabeledDataset> {
    let lines: Vec<&str> = text.lines().collect();
    let mut pos = 0;
    let mut frame = 0;
    let mut structures = Vec::new();
    let mut targets = Vec::new();
    while pos < lines.len() {
        if lines[pos].trim().is_empty() {
            pos += 1;
            continue;
        }
        let loc = format!("frame {frame} (line {})", pos + 1);
        let n: usize = lines[pos]
            .trim()
            .parse()
            .map_err(|_| Error::parse(source, &loc, "expected atom count"))?;
        let comment = lines
            .get(pos + 1)
            .ok_or_else(|| Error::parse(source, &loc, "missing comment line"))?;
        let keys = parse_comment(comment);
        let lattice_str = lookup(&keys, "Lattice")
            .ok_or_else(|| Error::parse(source, &loc, "missing Lattice key"))?;
        let vals: Vec<f64> = lattice_str
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(source, &loc, "bad Lattice value"))?;
        if vals.len() != 9 {
            return Err(Error::parse(source, &loc, "Lattice needs 9 numbers"));
        }
        let rows = [
            [vals[0], vals[1], vals[2]],
            [vals[3], vals[4], vals[5]],
            [vals[6], vals[7], vals[8]],
        ];
        let target_str = lookup(&keys, "target")
            .ok_or_else(|| Error::parse(source, &loc, "missing target key"))?;
        let target: f64 = target_str
            .parse()
            .map_err(|_| Error::parse(source, &loc, "bad target value"))?;
        if !target.is_finite() {
            return Err(Error::Validation(format!(
                "{source} {loc}: target is not finite"
            )));
        }
        let id = lookup(&keys, "id")
            .map(str::to_string)
            .unwrap_or_else(|| format!("{name}-{frame}"));
        let mut positions = Vec::with_capacity(n);
        let mut numbers = Vec::with_capacity(n);
        for k in 0..n {
            let line_idx = pos + 2 + k;
            let line = lines.get(line_idx).ok_or_else(|| {
                Error::parse(source, &loc, format!("expected {n} atom lines"))
            })?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() < 4 {
                return Err(Error::parse(
                    source,
                    format!("line {}", line_idx + 1),
                    "atom line needs symbol and 3 coordinates",
                ));
            }
            let z = atomic_number(parts[0]).ok_or_else(|| {
                Error::parse(
                    source,
                    format!("line {}", line_idx + 1),
                    format!("unknown element `{}`", parts[0]),
                )
            })?;
            let mut p = [0.0; 3];
            for d in 0..3 {
                p[d] = parts[1 + d].parse().map_err(|_| {
                    Error::parse(source, format!("line {}", line_idx + 1), "bad coordinate")
                })?;
            }
            positions.push(p);
            numbers.push(z);
        }
        let lattice = Lattice::new(rows).map_err(|e| at(source, &loc, e))?;
        let s = CrystalStructure::from_cartesian(lattice, &positions, numbers, id)
            .map_err(|e| at(source, &loc, e))?;
        structures.push(s);
        targets.push(target);
        pos += 2 + n;
        frame += 1;
    }
    LabeledDataset::new(structures, targets, name)
}

fn lookup<'a>(keys: &'a [(String, String)], key: &str) -> Option<&'a str> {
    keys.iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(key))
        .map(|(_, v)| v.as_str())
}

/// Splits `k=v k2="quoted value"` pairs.
fn parse_comment(line: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut chars = line.trim().chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        let mut value = String::new();
        if chars.peek() == Some(&'=') {
            chars.next();
            if chars.peek() == Some(&'"') {
                chars.next();
                for c in chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                    value.push(c);
                }
            } else {
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() {
                        break;
                    }
                    value.push(c);
                    chars.next();
                }
            }
        }
        out.push((key, value));
    }
    out
}

/// Extended-XYZ text for a dataset (Cartesian positions).
pub fn extxyz_to_string(data: &LabeledDataset) -> String {
    let mut out = String::new();
    for (s, &t) in data.structures().iter().zip(data.targets()) {
        let r = s.lattice().rows();
        out.push_str(&format!("{}\n", s.len()));
        out.push_str(&format!(
            "Lattice=\"{} {} {} {} {} {} {} {} {}\" Properties=species:S:1:pos:R:3 target={} id={}\n",
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2], t,
            s.id()
        ));
        for (i, &z) in s.atomic_numbers().iter().enumerate() {
            let p = s.cartesian(i);
            out.push_str(&format!(
                "{} {} {} {}\n",
                element_symbol(z).expect("validated atomic number"),
                p.x,
                p.y,
                p.z
            ));
        }
    }
    out
}
