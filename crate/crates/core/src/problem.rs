//! Model files: a team or decoupled model plus optional `info` and `split`
//! fields.

use std::path::Path;

use serde_json::Value;

use crate::decoupled::{embed, DecoupledModel, Split};
use crate::error::{Error, Result};
use crate::info::{InfoSpec, InfoStructure};
use crate::model::{TeamModel, Violation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Problem {
    Team(TeamModel),
    Decoupled(DecoupledModel),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemFile {
    pub problem: Problem,
    pub info: Option<InfoSpec>,
    pub split: Option<Split>,
}

/// Delay used when neither the file nor the caller names a structure.
pub const DEFAULT_DELAY: usize = 1;

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let field = |name: &str| value.get(name).filter(|v| !v.is_null()).cloned();
        let info = field("info").map(serde_json::from_value).transpose()?;
        let split = field("split").map(serde_json::from_value).transpose()?;
        let problem = match value.get("kind").and_then(Value::as_str) {
            None | Some("team") => Problem::Team(TeamModel::from_doc(serde_json::from_value(value)?)),
            Some("decoupled") => Problem::Decoupled(DecoupledModel::from_doc(serde_json::from_value(value)?)),
            Some(other) => return Err(Error::Parse(format!("unknown model kind {other:?}"))),
        };
        Ok(ProblemFile { problem, info, split })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Vec<Violation> {
        match &self.problem {
            Problem::Team(m) => m.validate(),
            Problem::Decoupled(d) => d.validate(),
        }
    }

    pub fn decoupled(&self) -> Option<&DecoupledModel> {
        match &self.problem {
            Problem::Decoupled(d) => Some(d),
            Problem::Team(_) => None,
        }
    }

    /// The team model, embedding a decoupled one on its product state.
    pub fn team_model(&self) -> Result<TeamModel> {
        match &self.problem {
            Problem::Team(m) => {
                m.ensure_valid()?;
                Ok(m.clone())
            }
            Problem::Decoupled(d) => embed(d),
        }
    }

    /// `delay` overrides the file's `info`; without either, delayed sharing
    /// with [`DEFAULT_DELAY`].
    pub fn info(&self, model: &TeamModel, delay: Option<usize>) -> Result<InfoStructure> {
        let spec = match (delay, &self.info) {
            (Some(d), _) => InfoSpec::Delayed { d },
            (None, Some(spec)) => spec.clone(),
            (None, None) => InfoSpec::Delayed { d: DEFAULT_DELAY },
        };
        spec.build(model)
    }

    /// The state split: implied by a decoupled model, else the `split` field.
    pub fn split(&self) -> Option<Split> {
        match &self.problem {
            Problem::Decoupled(d) => Some(Split::of(d)),
            Problem::Team(_) => self.split.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoupled::coupled_example;

    #[test]
    fn team_file_with_info_and_split() {
        let (m, split) = coupled_example();
        let mut v = m.to_json_value();
        v["info"] = serde_json::json!({"kind": "delayed", "d": 2});
        v["split"] = serde_json::to_value(&split).unwrap();
        let f = ProblemFile::parse(&v.to_string()).unwrap();
        assert_eq!(f.problem, Problem::Team(m.clone()));
        assert_eq!(f.split(), Some(split));
        assert_eq!(f.info(&m, None).unwrap().delay, Some(2));
        assert_eq!(f.info(&m, Some(1)).unwrap().delay, Some(1));
    }

    #[test]
    fn unknown_kind_is_a_parse_error() {
        let (m, _) = coupled_example();
        let mut v = m.to_json_value();
        v["kind"] = serde_json::json!("other");
        assert!(matches!(ProblemFile::parse(&v.to_string()), Err(Error::Parse(_))));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(ProblemFile::load("/nonexistent/model.json"), Err(Error::Io(_))));
    }
}
