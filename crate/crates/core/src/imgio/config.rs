//! Pipeline hyperparameters and the `key=value` config file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::{Error, Result};

/// Exact solver used for the reconciliation program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    GraphCut,
    BruteForce,
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graphcut" => Ok(SolverKind::GraphCut),
            "bruteforce" => Ok(SolverKind::BruteForce),
            other => Err(Error::InvalidParameter(format!(
                "solver must be graphcut or bruteforce, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::GraphCut => "graphcut",
            SolverKind::BruteForce => "bruteforce",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Mixture components per GMM.
    pub components: usize,
    /// Patch grid size per dimension.
    pub split: usize,
    /// Colour-similarity temperature.
    pub theta: f64,
    /// Smoothness trade-off.
    pub lambda: f64,
    /// Log-likelihood clip bound.
    pub clip: f64,
    pub seed: u64,
    pub solver: SolverKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            components: 5,
            split: 10,
            theta: 20.0,
            lambda: 2.0,
            clip: 100.0,
            seed: 0,
            solver: SolverKind::GraphCut,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.components == 0 {
            return bad("components must be positive".into());
        }
        if self.split == 0 {
            return bad("split must be positive".into());
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return bad(format!("theta must be positive, got {}", self.theta));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(self.clip.is_finite() && self.clip > 0.0) {
            return bad(format!("clip must be positive, got {}", self.clip));
        }
        Ok(())
    }

    /// Overlay `key=value` lines onto `self`. Blank lines and `#` comments
    /// are ignored; unknown keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                reason: format!("expected key=value, got {trimmed:?}"),
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|reason| Error::Config {
                    line: line_no,
                    reason,
                })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("cannot parse {value:?} for {key}"))
        }
        match key {
            "components" => self.components = parse(key, value)?,
            "split" => self.split = parse(key, value)?,
            "theta" => self.theta = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "clip" => self.clip = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "solver" => self.solver = value.parse().map_err(|e: Error| e.to_string())?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }
}
