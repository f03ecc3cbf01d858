//! Run configuration: a single JSON document, with command-line flags
//! overriding individual fields. Reports embed the fully resolved config.

use anyhow::{anyhow, bail, Context};
use expweb_core::{family_from_alias, ExpSum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilySpec {
    Alias(String),
    Coeffs { n: usize, coeffs: Vec<[f64; 2]> },
}

impl FamilySpec {
    pub fn build(&self) -> anyhow::Result<ExpSum> {
        match self {
            FamilySpec::Alias(a) => family_from_alias(a)
                .ok_or_else(|| anyhow!("config field `family`: unknown alias {a:?}")),
            FamilySpec::Coeffs { n, coeffs } => {
                if *n != coeffs.len() {
                    bail!(
                        "config field `family.n` = {n} does not match {} coefficients",
                        coeffs.len()
                    );
                }
                let cs = coeffs
                    .iter()
                    .map(|&[re, im]| Complex64::new(re, im))
                    .collect();
                ExpSum::new(cs).map_err(|e| anyhow!("config field `family.coeffs`: {e}"))
            }
        }
    }
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilySpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// 0 = use all available cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    /// x0, x1, y0, y1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 4]>,
    /// width, height.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub res: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_survivors: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            anyhow!(
                "config parse error at line {}, column {}: {e}",
                e.line(),
                e.column()
            )
        })
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text)
    }

    /// Resolve workers = 0 to the machine parallelism so reports record the
    /// actual value used.
    pub fn resolve_workers(&mut self) {
        if self.workers == 0 {
            self.workers = std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrips_losslessly() {
        let cfg = RunConfig {
            family: FamilySpec::Coeffs {
                n: 3,
                coeffs: vec![[1.0, 0.0], [0.5, -0.25], [2.0, 1.0]],
            },
            seed: 17,
            workers: 2,
            out: Some(PathBuf::from("report.json")),
            nu: Some(20.0),
            sigma: Some(0.08),
            eta: None,
            tau: None,
            eps0: None,
            window: Some([-40.0, 40.0, -40.0, 40.0]),
            res: Some([64, 64]),
            samples: Some(100_000),
            depth: Some(3),
            dump_survivors: None,
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back = RunConfig::from_json(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn malformed_config_reports_location() {
        let err = RunConfig::from_json("{\"family\": \"cosx\", \"seed\": \"oops\"}").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line") && msg.contains("column"), "{msg}");
        let err = RunConfig::from_json("{\"family\": \"cosx\", \"bogus\": 1}").unwrap_err();
        assert!(format!("{err}").contains("bogus"));
    }

    #[test]
    fn family_specs_build() {
        assert_eq!(FamilySpec::Alias("cosx".into()).build().unwrap().order(), 4);
        let bad = FamilySpec::Coeffs {
            n: 2,
            coeffs: vec![[1.0, 0.0]],
        };
        assert!(bad.build().is_err());
        let zero = FamilySpec::Coeffs {
            n: 1,
            coeffs: vec![[0.0, 0.0]],
        };
        assert!(zero.build().is_err());
    }
}
