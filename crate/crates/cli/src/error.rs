//! Error classes and their process exit codes.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Unparseable command line.
    Usage,
    /// Invalid configuration or arguments.
    Config,
    /// Missing, unreadable or malformed input; unwritable output.
    Io,
    /// A metric whose denominator is zero (e.g. FAR without detections).
    UndefinedMetric,
    /// Failure inside a computation (training divergence, tracker error).
    Compute,
}

impl ErrorKind {
    /// Exit status; 2 matches clap's own usage-error status.
    pub fn code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Config => 3,
            ErrorKind::Io => 4,
            ErrorKind::UndefinedMetric => 5,
            ErrorKind::Compute => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Config => "config",
            ErrorKind::Io => "io",
            ErrorKind::UndefinedMetric => "undefined_metric",
            ErrorKind::Compute => "compute",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn config(m: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, m)
    }

    pub fn io(m: impl Into<String>) -> Self {
        Self::new(ErrorKind::Io, m)
    }

    pub fn compute(m: impl Into<String>) -> Self {
        Self::new(ErrorKind::Compute, m)
    }

    /// Single-line, machine-readable rendering for stderr.
    pub fn line(&self) -> String {
        let msg = self.message.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
        format!("tctrack-error code={} kind={} message=\"{msg}\"", self.kind.code(), self.kind.as_str())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<tctrack_core::formats::FormatError> for CliError {
    fn from(e: tctrack_core::formats::FormatError) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<tctrack_core::nn::NnError> for CliError {
    fn from(e: tctrack_core::nn::NnError) -> Self {
        match e {
            tctrack_core::nn::NnError::Io(_) | tctrack_core::nn::NnError::Format(_) => CliError::io(e.to_string()),
            _ => CliError::compute(e.to_string()),
        }
    }
}

macro_rules! compute_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::compute(e.to_string())
            }
        }
    )*};
}

compute_from!(
    tctrack_core::detect::DetectError,
    tctrack_core::track::TrackError,
    tctrack_core::tune::TuneError,
    tctrack_core::data::DataError,
    tctrack_core::synth::SynthError
);
