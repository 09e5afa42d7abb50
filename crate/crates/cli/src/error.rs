use std::fmt;

/// What went wrong, which fixes the exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad flags or malformed input files.
    Usage,
    /// A value outside the domain of the computation.
    Domain,
    Infeasible,
    /// The empirical audit or a certificate failed.
    Audit,
    Io,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Domain => "domain",
            ErrorKind::Infeasible => "infeasible",
            ErrorKind::Audit => "audit",
            ErrorKind::Io => "io",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn io(context: impl fmt::Display, err: std::io::Error) -> Self {
        CliError {
            kind: ErrorKind::Io,
            message: format!("{context}: {err}"),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// One-line JSON form written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind.as_str(),
            "message": self.message,
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<hdp_mean::Error> for CliError {
    fn from(e: hdp_mean::Error) -> Self {
        let kind = match &e {
            hdp_mean::Error::Domain(_) => ErrorKind::Domain,
            hdp_mean::Error::Usage(_) => ErrorKind::Usage,
            hdp_mean::Error::Infeasible { .. } => ErrorKind::Infeasible,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError {
            kind: ErrorKind::Io,
            message: format!("writing csv: {e}"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(CliError::usage("x").exit_code(), 2);
        assert_eq!(CliError::from(hdp_mean::Error::Domain("x".into())).exit_code(), 1);
        assert_eq!(CliError::from(hdp_mean::Error::Usage("x".into())).exit_code(), 2);
        let e = CliError::from(hdp_mean::Error::Infeasible {
            mechanism: "SM",
            reason: "x".into(),
        });
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn json_error_is_one_line() {
        let j = CliError::usage("missing --eps1\nsecond line").to_json();
        assert!(!j.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["error"], "usage");
        assert_eq!(v["exit_code"], 2);
    }
}
