use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] eternal::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{failed} of {total} checks failed")]
    VerifyFailed { failed: usize, total: usize },
}

impl CliError {
    /// 2 no bracket, 3 exponent range, 4 wrong regime, 5 time step
    /// underflow, 6 domain too small, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        use eternal::Error as E;
        match self {
            CliError::Core(E::BracketFailure { .. }) => 2,
            CliError::Core(E::RangeViolation(_)) => 3,
            CliError::Core(E::WrongRegime { .. }) => 4,
            CliError::Core(E::CflFailure { .. }) => 5,
            CliError::Core(E::DomainTooSmall { .. }) => 6,
            _ => 1,
        }
    }
}
