//! Plain numeric CSV descriptor matrices: one row per structure, no header.
//! Lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub fn parse_descriptor_csv(text: &str, source: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::parse(source, format!("row {}", r + 1), e.to_string()))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| {
                    Error::parse(
                        source,
                        format!("row {}, column {}", r + 1, c + 1),
                        format!("`{cell}` is not numeric"),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    source,
                    format!("row {}", r + 1),
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::parse(
                source,
                format!("row {}, column {}", r + 1, c + 1),
                "non-finite value",
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(source, "row 1", "descriptor table is empty"));
    }
    Ok(rows)
}

pub fn load_external_descriptors(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_descriptor_csv(&text, &path.display().to_string())
}

pub fn descriptors_to_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_descriptors(rows: &[Vec<f64>], path: &Path) -> Result<()> {
    fs::write(path, descriptors_to_csv(rows)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_by_two() {
        let m = parse_descriptor_csv("1,2\n3,4\n5,6\n", "mem").unwrap();
        assert_eq!(m, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
    }

    #[test]
    fn wide_rows_accepted() {
        let row: Vec<String> = (0..1024).map(|i| (i as f64 * 0.5).to_string()).collect();
        let text = format!("{}\n{}\n", row.join(","), row.join(","));
        let m = parse_descriptor_csv(&text, "mem").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].len(), 1024);
    }

    #[test]
    fn ragged_is_parse_error() {
        assert!(matches!(
            parse_descriptor_csv("1,2\n3\n", "mem"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn non_numeric_is_parse_error() {
        assert!(matches!(
            parse_descriptor_csv("1,x\n", "mem"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![vec![0.1, -2.5e-17, 1.0 / 3.0], vec![7.0, 0.0, 1e300]];
        let back = parse_descriptor_csv(&descriptors_to_csv(&rows), "mem").unwrap();
        assert_eq!(rows, back);
    }
}
