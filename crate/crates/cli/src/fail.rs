use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Internal = 1,
    Config = 2,
    Parse = 3,
    Degenerate = 4,
    Validation = 5,
}

#[derive(Debug)]
pub struct Fail {
    pub exit: Exit,
    pub error: anyhow::Error,
}

impl Fail {
    pub fn new(exit: Exit, error: impl Into<anyhow::Error>) -> Self {
        Self {
            exit,
            error: error.into(),
        }
    }

    pub fn msg(exit: Exit, message: impl fmt::Display) -> Self {
        Self::new(exit, anyhow::anyhow!("{message}"))
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type Outcome<T> = Result<T, Fail>;

pub trait OrExit<T> {
    fn or_exit(self, exit: Exit, context: impl FnOnce() -> String) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_exit(self, exit: Exit, context: impl FnOnce() -> String) -> Outcome<T> {
        self.map_err(|e| Fail::new(exit, e.into().context(context())))
    }
}
