use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::actor::ComponentSummary;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("no overlap: every correspondence was rejected in every ICP iteration")]
    NoOverlap,

    #[error("registration failed at frame {frame}: {reason}")]
    Tracking { frame: usize, reason: Box<Error> },

    #[error("actor selection matched {} components (expected exactly one)", candidates.len())]
    AmbiguousSelection { candidates: Vec<ComponentSummary> },

    #[error("degenerate point configuration: {0}")]
    Degenerate(&'static str),

    #[error("no consensus: no hypothesis gathered at least 3 inliers")]
    NoConsensus,

    #[error("object lost: inlier intersection is empty (per-frame inlier counts {inlier_counts:?})")]
    ObjectLost { inlier_counts: Vec<(usize, usize)> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn ensure_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            found,
        })
    }
}
