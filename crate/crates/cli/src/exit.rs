use std::fmt;

/// Failures raised by the driver itself rather than the library.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Data(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

pub const CONFIG: u8 = 2;
pub const DATA: u8 = 3;
pub const NUMERIC: u8 = 4;

/// Process exit status for an error chain.
pub fn code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Config(_) => CONFIG,
                Failure::Data(_) => DATA,
            };
        }
        if let Some(e) = cause.downcast_ref::<colontcn::Error>() {
            use colontcn::Error::*;
            return match e {
                Config(_) => CONFIG,
                NonFinite(_) | Diverged { .. } => NUMERIC,
                Shape(_) | Parse { .. } | Data(_) | Format { .. } | Io { .. } => DATA,
            };
        }
        if cause.is::<std::io::Error>() {
            return DATA;
        }
    }
    1
}
