use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{DiscordError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub label: String,
    pub values: Vec<f64>,
}

/// Labeled instances in the UCR text layout: one instance per line, the
/// class label first, then the values. Fields may be separated by commas,
/// tabs or spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct InstancePool {
    pub instances: Vec<Instance>,
    pub source: PathBuf,
}

fn normalize_label(raw: &str) -> String {
    match raw.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", v as i64),
        _ => raw.to_string(),
    }
}

impl InstancePool {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| DiscordError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut instances = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty());
            let label = normalize_label(fields.next().unwrap_or_default());
            let values = fields
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| DiscordError::Parse(format!("line {}: bad value '{f}'", lineno + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() < 2 {
                return Err(DiscordError::Parse(format!(
                    "line {}: an instance needs at least 2 values",
                    lineno + 1
                )));
            }
            instances.push(Instance { label, values });
        }
        Ok(Self {
            instances,
            source: source.to_path_buf(),
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Distinct labels in order of first appearance.
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for inst in &self.instances {
            if !out.contains(&inst.label) {
                out.push(inst.label.clone());
            }
        }
        out
    }

    pub fn with_class(&self, label: &str) -> Self {
        let label = normalize_label(label);
        Self {
            instances: self.instances.iter().filter(|i| i.label == label).cloned().collect(),
            source: self.source.clone(),
        }
    }

    pub fn without_class(&self, label: &str) -> Self {
        let label = normalize_label(label);
        Self {
            instances: self.instances.iter().filter(|i| i.label != label).cloned().collect(),
            source: self.source.clone(),
        }
    }

    /// Length of the first instance; UCR datasets are equal-length.
    pub fn instance_len(&self) -> Option<usize> {
        self.instances.first().map(|i| i.values.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_separators() {
        let text = "1,0.5,0.25,1\n2\t3\t4\t5\n 1.0000000e+00  7 8 9\n";
        let pool = InstancePool::parse(text, Path::new("x.txt")).unwrap();
        assert_eq!(pool.len(), 3);
        assert_eq!(pool.classes(), vec!["1".to_string(), "2".to_string()]);
        assert_eq!(pool.with_class("1").len(), 2);
        assert_eq!(pool.without_class("1").instances[0].values, vec![3.0, 4.0, 5.0]);
        assert_eq!(pool.instance_len(), Some(3));
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(InstancePool::parse("1,2\n", Path::new("x")).is_err());
        assert!(InstancePool::parse("1,2,x\n", Path::new("x")).is_err());
        assert!(InstancePool::parse("1,2,NaN\n", Path::new("x")).is_err());
    }
}
