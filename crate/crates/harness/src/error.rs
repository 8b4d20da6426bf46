use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run {index} (seed {seed:#018x}) failed: {source}")]
    Run {
        index: usize,
        seed: u64,
        #[source]
        source: dgreedy_core::Error,
    },
    #[error("traces differ in length: {0}")]
    Mismatch(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// failures inside a run, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) | HarnessError::Mismatch(_) => 2,
            HarnessError::Run { source, .. } => match source {
                dgreedy_core::Error::Config(_) | dgreedy_core::Error::Topology(_) => 2,
                _ => 3,
            },
            HarnessError::Io { .. } => 1,
        }
    }
}
