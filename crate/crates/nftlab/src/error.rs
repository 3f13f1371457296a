use std::path::PathBuf;

/// Error type shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input violated an operation's stated precondition.
    #[error("input contract violation: {0}")]
    InputContract(String),

    /// A brute-force oracle was requested on a task whose answer space
    /// exceeds the enumeration cap.
    #[error("oracle unavailable: answer space {size} exceeds cap {cap}")]
    OracleUnavailable { size: u128, cap: u64 },

    /// A question with exact correctness rate 0 or 1 has no Bayes split.
    #[error("degenerate question {question}: exact correctness rate {rate}")]
    DegenerateQuestion { question: u32, rate: f64 },

    /// A mini-batch partition could not be formed.
    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    /// Group-normalized advantage is undefined (all rewards equal, std = 0).
    #[error("undefined advantage: all {count} rewards equal {value}")]
    UndefinedAdvantage { count: usize, value: u8 },

    /// Configuration file or override problem.
    #[error("config error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { message: String, line: Option<usize> },

    /// A gradient entry became non-finite during an optimizer update.
    #[error("non-finite gradient at question {question}, context {context}, token {token}: {value}")]
    NonFiniteGradient {
        question: u32,
        context: usize,
        token: u32,
        value: f64,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Checkpoint parse or fingerprint mismatch.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config {
            message: message.into(),
            line: None,
        }
    }

    pub fn config_at(message: impl Into<String>, line: usize) -> Self {
        Error::Config {
            message: message.into(),
            line: Some(line),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
