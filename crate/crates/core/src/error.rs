use alloc::string::String;
use core::fmt;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A tensor or vector had the wrong length or shape.
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A value that must be finite was NaN or infinite.
    NonFinite(String),
    /// Caption has no tokens left after stop-word and vocabulary filtering.
    EmptyCaption,
    /// No frame timestamp falls inside the pooling interval.
    NoFramesInInterval { start: f64, end: f64 },
    /// A record or configuration violated an invariant.
    Invalid(String),
    /// Not enough distinct videos to fill a minibatch.
    NotEnoughVideos { required: usize, available: usize },
    /// More steps than frames in a localization problem.
    TooManySteps { steps: usize, frames: usize },
    /// Index was built with a different checkpoint.
    FingerprintMismatch,
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                what,
                expected,
                actual,
            } => write!(f, "shape mismatch for {what}: expected {expected}, got {actual}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::EmptyCaption => f.write_str("caption is empty after filtering"),
            Error::NoFramesInInterval { start, end } => {
                write!(f, "no frames in interval [{start}, {end})")
            }
            Error::Invalid(msg) => f.write_str(msg),
            Error::NotEnoughVideos {
                required,
                available,
            } => write!(
                f,
                "minibatch needs {required} distinct videos but only {available} are available"
            ),
            Error::TooManySteps { steps, frames } => {
                write!(f, "cannot place {steps} ordered steps on {frames} frames")
            }
            Error::FingerprintMismatch => {
                f.write_str("index fingerprint does not match the checkpoint parameters")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            actual,
        })
    }
}
