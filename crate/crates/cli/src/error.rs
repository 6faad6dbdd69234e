use std::fmt;

use serde::Serialize;

/// Failure of a CLI command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed arguments or input files (exit 1).
    Input(String),
    /// Error raised by the library; the exit code follows
    /// [`mueller_core::Error::is_inconsistency`].
    Core(mueller_core::Error),
    /// The command ran but its data admit no valid answer (exit 2). The
    /// report is still written.
    Rejected { message: String, report: serde_json::Value },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Core(e) if !e.is_inconsistency() => 1,
            CliError::Core(_) | CliError::Rejected { .. } => 2,
        }
    }

    /// JSON body written for exit code 2, so the failure stays machine-readable.
    pub fn report(&self) -> Option<ErrorReport> {
        match self {
            CliError::Input(_) => None,
            CliError::Core(e) if !e.is_inconsistency() => None,
            CliError::Core(e) => Some(ErrorReport {
                error: e.kind().to_string(),
                message: e.to_string(),
                report: match e {
                    mueller_core::Error::NoValidCandidate(r) => {
                        serde_json::to_value(r.as_ref()).expect("reports serialize")
                    }
                    _ => serde_json::Value::Null,
                },
            }),
            CliError::Rejected { message, report } => Some(ErrorReport {
                error: "NotValidated".to_string(),
                message: message.clone(),
                report: report.clone(),
            }),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Core(e) if e.is_inconsistency() => write!(f, "inconsistent data: {e}"),
            CliError::Core(e) => write!(f, "input error: {e}"),
            CliError::Rejected { message, .. } => write!(f, "inconsistent data: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mueller_core::Error> for CliError {
    fn from(e: mueller_core::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: String,
    pub message: String,
    pub report: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;
    use mueller_core::Error;

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 1);
        assert_eq!(
            CliError::from(Error::PairCount {
                expected: "6",
                found: 5
            })
            .exit_code(),
            1
        );
        assert_eq!(CliError::from(Error::InvalidStokes("x".into())).exit_code(), 1);
        let e = CliError::from(Error::NoConvergedRoot { starts: 64 });
        assert_eq!(e.exit_code(), 2);
        assert_eq!(e.report().unwrap().error, "NoConvergedRoot");
        let e = CliError::Rejected {
            message: "m".into(),
            report: serde_json::Value::Null,
        };
        assert_eq!(e.exit_code(), 2);
        assert_eq!(e.report().unwrap().error, "NotValidated");
        assert!(CliError::Input("x".into()).report().is_none());
    }
}
