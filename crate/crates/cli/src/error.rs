use std::fmt;

use serde_json::json;

/// Exit code for bad configuration, usage or input files.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for failures of the dynamics or the numerics.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(attractors_core::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }

    pub fn kind(&self) -> &'static str {
        if self.exit_code() == EXIT_NUMERICAL {
            "numerical"
        } else {
            "config"
        }
    }

    /// The single-line JSON written to stderr.
    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<attractors_core::Error> for CliError {
    fn from(e: attractors_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use attractors_core::Error;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::config("x").exit_code(), 2);
        assert_eq!(CliError::from(Error::UnknownSystem("q".into())).exit_code(), 2);
        assert_eq!(
            CliError::from(Error::NumericalBlowup { step: 3, index: 0 }).exit_code(),
            3
        );
        let v: serde_json::Value =
            serde_json::from_str(&CliError::from(Error::DegenerateSeparation { step: 1 }).to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "numerical");
        assert_eq!(v["error"]["exit_code"], 3);
    }
}
