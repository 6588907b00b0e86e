//! Plain-text artifacts: NIG-pass files, truth files and metric reports.
//!
//! NIG-pass file:
//!
//! ```text
//! T,N
//! 2,3
//! t,i,gamma,nu,alpha,beta
//! 0,0,1.5,0.8,2.1,0.3
//! ...
//! ```
//!
//! Rows are sorted by `(t, i)` and every cell is present exactly once.
//! Truth file: header `index,target`, one row per evaluated sample.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evidential::NigParams;
use crate::metrics::{MetricReport, UNCERTAINTY_NAMES};
use crate::runtime::PassTensor;

pub const SUMMARY_ROW: &str = "__summary__";

pub fn passes_to_string(p: &PassTensor) -> String {
    let mut out = format!("T,N\n{},{}\nt,i,gamma,nu,alpha,beta\n", p.passes(), p.samples());
    for t in 0..p.passes() {
        for (i, c) in p.row(t).iter().enumerate() {
            out.push_str(&format!(
                "{t},{i},{},{},{},{}\n",
                c.gamma, c.nu, c.alpha, c.beta
            ));
        }
    }
    out
}

pub fn parse_passes(text: &str, source: &str) -> Result<PassTensor> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let mut expect = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse(source, "end of file", format!("missing {what}")))
    };
    let at = |no: usize| format!("line {no}");
    let (no, header) = expect("`T,N` header")?;
    if header != "T,N" {
        return Err(Error::parse(source, at(no), "expected `T,N`"));
    }
    let (no, shape) = expect("shape row")?;
    let (t, n) = shape
        .split_once(',')
        .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
        .ok_or_else(|| Error::parse(source, at(no), "expected `<T>,<N>`"))?;
    if t == 0 {
        return Err(Error::parse(source, at(no), "T must be at least 1"));
    }
    let (no, cols) = expect("column header")?;
    if cols != "t,i,gamma,nu,alpha,beta" {
        return Err(Error::parse(source, at(no), "expected `t,i,gamma,nu,alpha,beta`"));
    }
    let mut rows: Vec<Vec<NigParams>> = vec![Vec::with_capacity(n); t];
    for k in 0..t * n {
        let (no, line) = expect("data row")?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::parse(source, at(no), "expected 6 fields"));
        }
        let (want_t, want_i) = (k / n, k % n);
        if fields[0].parse::<usize>().ok() != Some(want_t)
            || fields[1].parse::<usize>().ok() != Some(want_i)
        {
            return Err(Error::parse(
                source,
                at(no),
                format!("expected cell ({want_t}, {want_i}); rows must be sorted by (t, i)"),
            ));
        }
        let v: Vec<f64> = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(source, at(no), e.to_string()))?;
        rows[want_t].push(NigParams::new(v[0], v[1], v[2], v[3]));
    }
    if let Some((no, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::parse(source, at(no), format!("unexpected trailing row `{extra}`")));
    }
    PassTensor::from_rows(rows)
}

pub fn write_passes(p: &PassTensor, path: &Path) -> Result<()> {
    fs::write(path, passes_to_string(p)).map_err(|e| Error::io(path, e))
}

pub fn read_passes(path: &Path) -> Result<PassTensor> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_passes(&text, &path.display().to_string())
}

pub fn truth_to_string(idx: &[usize], targets: &[f64]) -> String {
    let mut out = String::from("index,target\n");
    for (i, t) in idx.iter().zip(targets) {
        out.push_str(&format!("{i},{t}\n"));
    }
    out
}

/// Returns `(indices, targets)`.
pub fn parse_truth(text: &str, source: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "index,target")) => {}
        _ => return Err(Error::parse(source, "line 1", "expected `index,target`")),
    }
    let mut idx = Vec::new();
    let mut targets = Vec::new();
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::parse(source, format!("line {}", k + 1), "expected `<index>,<target>`");
        let (a, b) = line.split_once(',').ok_or_else(bad)?;
        let t: f64 = b.parse().map_err(|_| bad())?;
        if !t.is_finite() {
            return Err(bad());
        }
        idx.push(a.parse().map_err(|_| bad())?);
        targets.push(t);
    }
    Ok((idx, targets))
}

pub fn write_truth(idx: &[usize], targets: &[f64], path: &Path) -> Result<()> {
    fs::write(path, truth_to_string(idx, targets)).map_err(|e| Error::io(path, e))
}

pub fn read_truth(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_truth(&text, &path.display().to_string())
}

fn report_row(r: &MetricReport) -> String {
    let mut cells = vec![
        r.name.clone(),
        r.n_samples.to_string(),
        r.mae.to_string(),
        r.eviu.to_string(),
        r.d_mae.to_string(),
        r.d_unc.to_string(),
        r.d_eviu.to_string(),
    ];
    for key in UNCERTAINTY_NAMES {
        cells.push(r.spearman_for(key).map(|v| v.to_string()).unwrap_or_default());
    }
    cells.join(",")
}

/// Per-task rows followed by the summary row.
pub fn report_csv(tasks: &[MetricReport], summary: &MetricReport) -> String {
    let mut out = String::from(
        "task,n_samples,mae,eviu,d_mae,d_unc,d_eviu,spearman_eviu,spearman_d_unc,spearman_d_eviu\n",
    );
    for r in tasks.iter().chain(std::iter::once(summary)) {
        out.push_str(&report_row(r));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    scenario: &'a str,
    tasks: Vec<MetricReport>,
    summary: &'a MetricReport,
}

pub fn report_json(scenario: &str, tasks: &[MetricReport], summary: &MetricReport) -> String {
    let doc = ReportDoc {
        scenario,
        tasks: tasks
            .iter()
            .map(|t| MetricReport {
                per_sample: None,
                ..t.clone()
            })
            .collect(),
        summary,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor() -> PassTensor {
        PassTensor::from_rows(vec![
            vec![NigParams::new(0.1, 1.0, 2.0, 0.5), NigParams::new(-3.0, 0.2, 1.5, 7.0)],
            vec![NigParams::new(1e-17, 3.5, 1.000001, 2e5), NigParams::new(0.3, 0.1, 9.0, 1.0)],
        ])
        .unwrap()
    }

    #[test]
    fn pass_file_round_trip() {
        let t = tensor();
        let text = passes_to_string(&t);
        let back = parse_passes(&text, "mem").unwrap();
        assert_eq!(back, t);
        assert_eq!(passes_to_string(&back), text);
    }

    #[test]
    fn pass_file_errors() {
        let text = passes_to_string(&tensor());
        let swapped = text.replace("1,0,", "9,9,");
        assert!(matches!(parse_passes(&swapped, "m"), Err(Error::Parse { .. })));
        let bad_alpha = text.replace("0,1,-3,0.2,1.5,7", "0,1,-3,0.2,1,7");
        let err = parse_passes(&bad_alpha, "m").unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("t = 0, i = 1")), "{err}");
        let truncated: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(parse_passes(&truncated, "m").is_err());
    }

    #[test]
    fn truth_round_trip() {
        let text = truth_to_string(&[4, 9], &[1.25, -0.1]);
        assert_eq!(parse_truth(&text, "m").unwrap(), (vec![4, 9], vec![1.25, -0.1]));
        assert!(parse_truth("index,target\n1,NaN\n", "m").is_err());
    }
}
