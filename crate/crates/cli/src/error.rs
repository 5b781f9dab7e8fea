// SPDX-License-Identifier: MIT OR Apache-2.0

/// Exit status 0 is success; these map to 1 (internal or numerical) and
/// 2 (usage or input).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Output(String),
    #[error(transparent)]
    Core(#[from] timeinf::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Output(_) => 1,
            CliError::Core(e) if e.is_numerical() => 1,
            CliError::Core(_) => 2,
        }
    }
}
