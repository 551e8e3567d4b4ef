use std::fmt;
use std::path::Path;

use treevne_core::bench::BenchError;
use treevne_core::format::FormatError;
use treevne_core::generators::GenError;
use treevne_core::lp::LpError;
use treevne_core::{ModelError, OracleError, SolveError};

/// A failed command: a stable kind tag plus a one-line message.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            kind,
            message: message.into(),
        }
    }

    pub fn in_file(self, path: &Path) -> Self {
        Failure {
            message: format!("{}: {}", path.display(), self.message),
            ..self
        }
    }

    /// Single line for the error stream.
    pub fn render(&self, json: bool) -> String {
        let message = self.message.replace('\n', " ");
        if json {
            serde_json::json!({"error": self.kind, "message": message}).to_string()
        } else {
            format!("error[{}]: {message}", self.kind)
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

macro_rules! failure_from {
    ($($ty:ty => $kind:literal),* $(,)?) => {
        $(impl From<$ty> for Failure {
            fn from(e: $ty) -> Self {
                Failure::new($kind, e.to_string())
            }
        })*
    };
}

failure_from! {
    std::io::Error => "io",
    csv::Error => "io",
    FormatError => "format",
    ModelError => "model",
    GenError => "generator",
    LpError => "lp",
    BenchError => "bench",
    OracleError => "oracle",
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let kind = match e {
            SolveError::Timeout => "timeout",
            SolveError::Model(_) => "model",
            _ => "solver",
        };
        Failure::new(kind, e.to_string())
    }
}
