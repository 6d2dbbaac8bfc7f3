//! Exit-code classification.
//!
//! Everything a user can fix by changing arguments, configuration or input
//! files is a validation failure (exit 1); I/O trouble and failures during
//! a run are runtime failures (exit 2).

use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Marks an error as caused by bad arguments, configuration or inputs.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

macro_rules! invalid {
    ($($arg:tt)*) => {
        anyhow::Error::new($crate::error::Invalid(format!($($arg)*)))
    };
}
pub(crate) use invalid;

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<rawsr_core::Error>() {
            return match e {
                rawsr_core::Error::NonFiniteLoss { .. } => EXIT_RUNTIME,
                _ => EXIT_VALIDATION,
            };
        }
    }
    EXIT_RUNTIME
}
