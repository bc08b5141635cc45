//! Identifiers for the three self-invertible video transforms.

use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// One of the supported video transforms.
///
/// Each one is its own inverse, and horizontal flipping commutes with time
/// reversal, so the set `{identity, HF, TR, HFTR}` is closed under
/// composition (see [`TransformId::then`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransformId {
    /// Horizontal flip: column `w` becomes column `W - 1 - w`.
    Hf,
    /// Time reversal: frame `t` becomes frame `T - 1 - t`.
    Tr,
    /// Horizontal flip followed by time reversal.
    HfTr,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown transform id {0:?} (expected HF, TR or HFTR)")]
pub struct UnknownTransform(pub alloc::string::String);

impl TransformId {
    pub const ALL: [TransformId; 3] = [TransformId::Hf, TransformId::Tr, TransformId::HfTr];

    pub fn flips(self) -> bool {
        matches!(self, TransformId::Hf | TransformId::HfTr)
    }

    pub fn reverses_time(self) -> bool {
        matches!(self, TransformId::Tr | TransformId::HfTr)
    }

    /// Builds the transform that flips and/or reverses; `None` is the identity.
    pub fn from_parts(flip: bool, reverse: bool) -> Option<TransformId> {
        match (flip, reverse) {
            (false, false) => None,
            (true, false) => Some(TransformId::Hf),
            (false, true) => Some(TransformId::Tr),
            (true, true) => Some(TransformId::HfTr),
        }
    }

    /// Composition of `self` followed by `next`; `None` is the identity.
    pub fn then(self, next: TransformId) -> Option<TransformId> {
        TransformId::from_parts(
            self.flips() ^ next.flips(),
            self.reverses_time() ^ next.reverses_time(),
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TransformId::Hf => "HF",
            TransformId::Tr => "TR",
            TransformId::HfTr => "HFTR",
        }
    }

    /// Position in [`TransformId::ALL`].
    pub fn index(self) -> usize {
        match self {
            TransformId::Hf => 0,
            TransformId::Tr => 1,
            TransformId::HfTr => 2,
        }
    }
}

impl fmt::Display for TransformId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransformId {
    type Err = UnknownTransform;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("hf") {
            Ok(TransformId::Hf)
        } else if s.eq_ignore_ascii_case("tr") {
            Ok(TransformId::Tr)
        } else if s.eq_ignore_ascii_case("hftr") {
            Ok(TransformId::HfTr)
        } else {
            Err(UnknownTransform(s.into()))
        }
    }
}
