use thiserror::Error;

use crate::cavity::Param;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("z = {z} mm lies outside the optical path [0, {total}] mm")]
    OutOfDomain { z: f64, total: f64 },

    #[error("singular ABCD transform: C·q + D vanishes")]
    SingularTransform,

    #[error("unstable resonator: g = {g}")]
    UnstableResonator { g: f64 },

    #[error("degenerate imaging: round-trip B element is zero, mode radius undefined")]
    DegenerateImaging,

    #[error("no stable region for {param} in [{lo}, {hi}] mm")]
    NoStableRegion { param: Param, lo: f64, hi: f64 },

    #[error("stable region for {param} extends past the search range [{lo}, {hi}] mm")]
    UnboundedRegion { param: Param, lo: f64, hi: f64 },

    #[error("no g = 0 crossing for {param} inside [{lo}, {hi}] mm")]
    NoSolution { param: Param, lo: f64, hi: f64 },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }
}
