use std::fmt;
use std::str::FromStr;

use crate::{LearnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Success,
    Interruption,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Success => "success",
            Target::Interruption => "interruption",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "success" | "sr" => Ok(Target::Success),
            "interruption" | "ir" => Ok(Target::Interruption),
            _ => Err(format!(
                "unknown target `{s}` (expected success or interruption)"
            )),
        }
    }
}

/// Feature rows with their two trained targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub success: Vec<f64>,
    pub interruption: Vec<f64>,
}

impl Dataset {
    pub fn new(
        ids: Vec<String>,
        x: Vec<Vec<f64>>,
        success: Vec<f64>,
        interruption: Vec<f64>,
    ) -> Result<Self> {
        let n = ids.len();
        if x.len() != n || success.len() != n || interruption.len() != n {
            return Err(LearnError::Format(
                "row counts of ids, features and targets differ".into(),
            ));
        }
        if let Some(first) = x.first() {
            let d = first.len();
            if let Some(bad) = x.iter().find(|r| r.len() != d) {
                return Err(LearnError::WidthMismatch {
                    expected: d,
                    got: bad.len(),
                });
            }
        }
        Ok(Dataset {
            ids,
            x,
            success,
            interruption,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn width(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn target(&self, t: Target) -> &[f64] {
        match t {
            Target::Success => &self.success,
            Target::Interruption => &self.interruption,
        }
    }
}

/// Copies the given columns of every row.
pub fn select_columns(x: &[Vec<f64>], columns: &[usize]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|r| columns.iter().map(|&c| r[c]).collect())
        .collect()
}

pub(crate) fn check_width(x: &[Vec<f64>], d: usize) -> Result<()> {
    match x.iter().find(|r| r.len() != d) {
        Some(r) => Err(LearnError::WidthMismatch {
            expected: d,
            got: r.len(),
        }),
        None => Ok(()),
    }
}
