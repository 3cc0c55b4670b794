use std::fmt;

use greybox::ErrorKind;

/// Exit codes: 0 success, 2 usage, 3 data format, 4 numerical failure,
/// 5 results written but the optimiser did not converge.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Data(m) => write!(f, "data: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<greybox::Error> for Failure {
    fn from(e: greybox::Error) -> Self {
        let msg = e.to_string();
        match e.kind() {
            ErrorKind::Usage => Failure::Usage(msg),
            ErrorKind::Data => Failure::Data(msg),
            ErrorKind::Numerical => Failure::Numerical(msg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Done => 0,
            Status::NotConverged => 5,
        }
    }
}
