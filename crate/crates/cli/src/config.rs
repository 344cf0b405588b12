use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;
use tribokey::PumpWindow;

use crate::Format;

/// Defaults read from `--config`. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub n: Option<u32>,
    pub window: Option<WindowSpec>,
    pub rounds: Option<u32>,
    pub check_fraction: Option<f64>,
    pub convention: Option<String>,
    pub variant: Option<String>,
    pub eve: Option<String>,
    pub trials: Option<u64>,
    pub check_rounds: Option<Vec<u64>>,
    pub alpha: Option<f64>,
    pub jobs: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<std::path::PathBuf>,
    pub max_km: Option<f64>,
    pub step_km: Option<f64>,
    pub configs: Option<Vec<u32>>,
    pub n_list: Option<Vec<u32>>,
    pub pulse_rate: Option<f64>,
    pub mu: Option<f64>,
    pub fiber_loss: Option<f64>,
    pub eta: Option<f64>,
    pub dark_count: Option<f64>,
    pub gate: Option<f64>,
    pub sift: Option<f64>,
    pub ecpa: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WindowSpec {
    Pair([u32; 2]),
    Text(String),
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn window(&self) -> anyhow::Result<Option<PumpWindow>> {
        match &self.window {
            None => Ok(None),
            Some(WindowSpec::Pair([lo, hi])) => Ok(Some(PumpWindow::new(*lo, *hi)?)),
            Some(WindowSpec::Text(s)) => parse_window(s).map(Some),
        }
    }
}

/// Accepts `lo..hi`, `lo,hi`, `lo-hi` or `[lo, hi]`.
pub fn parse_window(s: &str) -> anyhow::Result<PumpWindow> {
    let t = s.trim().trim_start_matches('[').trim_end_matches(']');
    let parts: Vec<&str> = if t.contains("..") {
        t.split("..").collect()
    } else {
        t.split([',', '-']).collect()
    };
    if parts.len() != 2 {
        bail!("window {s:?} must look like lo..hi");
    }
    let lo: u32 = parts[0]
        .trim()
        .parse()
        .with_context(|| format!("window {s:?}"))?;
    let hi: u32 = parts[1]
        .trim()
        .trim_start_matches('=')
        .parse()
        .with_context(|| format!("window {s:?}"))?;
    Ok(PumpWindow::new(lo, hi)?)
}

/// Flag, else config file, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_forms() {
        for s in ["4..11", "4,11", "4-11", "[4, 11]", "4..=11"] {
            assert_eq!(
                parse_window(s).unwrap(),
                PumpWindow::new(4, 11).unwrap(),
                "{s}"
            );
        }
        assert!(parse_window("4").is_err());
        assert!(parse_window("2..9").is_err());
    }

    #[test]
    fn file_keys() {
        let f: FileConfig = serde_json::from_str(r#"{"seed": 3, "window": [5, 20]}"#).unwrap();
        assert_eq!(f.window().unwrap(), Some(PumpWindow::new(5, 20).unwrap()));
        let f: FileConfig = serde_json::from_str(r#"{"window": "4..11"}"#).unwrap();
        assert_eq!(f.window().unwrap(), Some(PumpWindow::new(4, 11).unwrap()));
        assert!(serde_json::from_str::<FileConfig>(r#"{"colour": 1}"#).is_err());
        assert_eq!(pick(None, Some(2), 1), 2);
        assert_eq!(pick(Some(3), Some(2), 1), 3);
    }
}
