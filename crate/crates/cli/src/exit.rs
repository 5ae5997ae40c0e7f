use pfcycle::Error;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Code {
    Io = 1,
    Config = 2,
    Infeasible = 3,
    Numeric = 4,
    Verification = 5,
}

#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub message: String,
}

impl Failure {
    pub fn new(code: Code, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Code::Config, message)
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        Self::new(Code::Io, format!("{context}: {e}"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Usage(_) | Error::Parameter(_) => Code::Config,
            Error::Range(_) | Error::NoiseBound(_) | Error::Certification(_) => Code::Infeasible,
            Error::Numeric(_) | Error::Step { .. } | Error::Domain(_) => Code::Numeric,
        };
        Self::new(code, e.to_string())
    }
}
