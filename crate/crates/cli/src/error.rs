use std::fmt;

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 1,
    Divergence = 2,
    PartialCompare = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ExitKind,
    pub msg: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Config,
            msg: msg.into(),
        }
    }

    pub fn divergence(msg: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Divergence,
            msg: msg.into(),
        }
    }

    pub fn partial(msg: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::PartialCompare,
            msg: msg.into(),
        }
    }

    pub fn code(&self) -> u8 {
        self.kind as u8
    }

    /// The final stderr line: `ERROR code=<n> msg=<single-line message>`.
    pub fn status_line(&self) -> String {
        let msg: String = self.msg.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }).collect();
        format!("ERROR code={} msg={}", self.code(), msg)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<aniso_ebm::trainer::TrainError> for CliError {
    fn from(e: aniso_ebm::trainer::TrainError) -> Self {
        use aniso_ebm::samplers::SamplerError;
        use aniso_ebm::trainer::TrainError;
        match e {
            TrainError::Divergence { .. } | TrainError::Sampler(SamplerError::Divergence { .. }) => Self::divergence(e.to_string()),
            other => Self::config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::config(format!("io: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_line_is_one_line() {
        let e = CliError::divergence("chain 3\ndiverged");
        assert_eq!(e.status_line(), "ERROR code=2 msg=chain 3 diverged");
        assert_eq!(CliError::config("x").code(), 1);
        assert_eq!(CliError::partial("x").code(), 3);
    }
}
