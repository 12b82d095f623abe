use std::path::{Path, PathBuf};

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("{path}: {source}")]
    InFile { path: PathBuf, source: Box<CliError> },

    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] geowl_core::Error),
}

impl CliError {
    pub fn in_file(self, path: &Path) -> CliError {
        CliError::InFile { path: path.to_path_buf(), source: Box::new(self) }
    }

    fn root(&self) -> &CliError {
        match self {
            CliError::InFile { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn kind(&self) -> &'static str {
        use geowl_core::Error as E;
        match self.root() {
            CliError::Parse { .. } => "ParseError",
            CliError::Io { .. } => "IoError",
            CliError::Config(_) => "InvalidConfig",
            CliError::InFile { .. } => unreachable!(),
            CliError::Core(e) => match e {
                E::InvalidCloud(_) => "InvalidCloud",
                E::DegenerateCloud => "DegenerateCloud",
                E::InvalidConfig(_) => "InvalidConfig",
                E::TooLarge { .. } => "TooLarge",
                E::NoStabilization { .. } => "NoStabilization",
                E::ZeroMass => "ZeroMass",
                E::NegativeRadicand { .. } => "NegativeRadicand",
                E::CoincidentAnchors { .. } => "CoincidentAnchors",
                E::InconsistentDistances { .. } => "InconsistentDistances",
                E::MissingOrientation => "MissingOrientation",
                E::NotCentered { .. } => "NotCentered",
                E::VerificationFailed(_) => "VerificationFailed",
                E::InvalidArgument(_) => "InvalidArgument",
            },
        }
    }

    /// 1 for bad input or configuration, 2 for failures inside a computation.
    pub fn exit_code(&self) -> u8 {
        use geowl_core::Error as E;
        match self.root() {
            CliError::Parse { .. } | CliError::Io { .. } | CliError::Config(_) => 1,
            CliError::Core(E::InvalidCloud(_) | E::DegenerateCloud | E::InvalidConfig(_) | E::InvalidArgument(_)) => 1,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = json!({ "kind": self.kind(), "message": self.to_string() });
        if let CliError::Parse { line, .. } = self.root() {
            obj["line"] = json!(line);
        }
        if let CliError::InFile { path, .. } = self {
            obj["path"] = json!(path.display().to_string());
        }
        json!({ "error": obj })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_and_kinds() {
        let e = CliError::Parse { line: 3, reason: "x".into() }.in_file(Path::new("a.xyz"));
        assert_eq!(e.exit_code(), 1);
        assert_eq!(e.kind(), "ParseError");
        assert_eq!(e.to_json()["error"]["line"], 3);
        let e = CliError::from(geowl_core::Error::NoStabilization { cap: 8 });
        assert_eq!(e.exit_code(), 2);
        assert_eq!(e.to_json()["error"]["kind"], "NoStabilization");
        assert_eq!(CliError::from(geowl_core::Error::TooLarge { budget: 1 }).exit_code(), 2);
        assert_eq!(CliError::Config("k".into()).exit_code(), 1);
    }
}
