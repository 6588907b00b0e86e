//! Split manifests: one compact JSON document per scenario.
//!
//! ```text
//! {"format":"split-manifest/v1","strategy":"SOAP-LOCO","seed":7,"n_samples":200,
//!  "params":{"k":4},"tasks":[{"name":"cluster_000","train":[..],"val":[..],"test":[..]}, ...]}
//! ```
//!
//! Index lists are ascending; tasks keep generation order. Writing a parsed
//! manifest reproduces the input bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioParams, SplitTask, Strategy};
use crate::error::{Error, Result};

const FORMAT: &str = "split-manifest/v1";

#[derive(Serialize, Deserialize)]
struct ManifestDoc {
    format: String,
    strategy: Strategy,
    seed: u64,
    n_samples: usize,
    params: ScenarioParams,
    tasks: Vec<SplitTask>,
}

pub fn scenario_to_manifest(s: &Scenario) -> String {
    let doc = ManifestDoc {
        format: FORMAT.to_string(),
        strategy: s.strategy,
        seed: s.seed,
        n_samples: s.n_samples,
        params: s.params.clone(),
        tasks: s.tasks.clone(),
    };
    let mut out = serde_json::to_string(&doc).expect("manifest serializes");
    out.push('\n');
    out
}

pub fn parse_manifest(text: &str, source: &str) -> Result<Scenario> {
    let doc: ManifestDoc = serde_json::from_str(text)
        .map_err(|e| Error::parse(source, format!("line {}", e.line()), e.to_string()))?;
    if doc.format != FORMAT {
        return Err(Error::parse(
            source,
            "format",
            format!("unsupported manifest format `{}`", doc.format),
        ));
    }
    let mut tasks = doc.tasks;
    for t in &mut tasks {
        t.train.sort_unstable();
        t.val.sort_unstable();
        t.test.sort_unstable();
    }
    let s = Scenario {
        strategy: doc.strategy,
        seed: doc.seed,
        n_samples: doc.n_samples,
        params: doc.params,
        tasks,
    };
    s.validate()?;
    Ok(s)
}

pub fn write_manifest(s: &Scenario, path: &Path) -> Result<()> {
    fs::write(path, scenario_to_manifest(s)).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitting::loco_split;

    #[test]
    fn byte_identical_reload() {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()])
            .collect();
        let s = loco_split(&x, 3, 2, Strategy::SoapLoco).unwrap();
        let text = scenario_to_manifest(&s);
        let back = parse_manifest(&text, "mem").unwrap();
        assert_eq!(back, s);
        assert_eq!(scenario_to_manifest(&back), text);
    }

    #[test]
    fn rejects_invalid_manifest() {
        let bad = r#"{"format":"split-manifest/v1","strategy":"LOCO","seed":0,"n_samples":2,"params":{},"tasks":[{"name":"a","train":[0],"val":[],"test":[0]}]}"#;
        assert!(parse_manifest(bad, "mem").is_err());
        assert!(parse_manifest("{", "mem").is_err());
    }
}
