use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// The four non-acted affective states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AffectLabel {
    Concentrating,
    Triumphant,
    Frustrated,
    Defeated,
}

impl AffectLabel {
    pub const COUNT: usize = 4;
    pub const ALL: [AffectLabel; 4] = [
        AffectLabel::Concentrating,
        AffectLabel::Triumphant,
        AffectLabel::Frustrated,
        AffectLabel::Defeated,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// One-letter code used in tables (C, T, F, D).
    pub fn short(self) -> char {
        match self {
            AffectLabel::Concentrating => 'C',
            AffectLabel::Triumphant => 'T',
            AffectLabel::Frustrated => 'F',
            AffectLabel::Defeated => 'D',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AffectLabel::Concentrating => "concentrating",
            AffectLabel::Triumphant => "triumphant",
            AffectLabel::Frustrated => "frustrated",
            AffectLabel::Defeated => "defeated",
        }
    }
}

impl fmt::Display for AffectLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AffectLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|l| {
                l.name() == lower
                    || lower.len() == 1 && lower.starts_with(l.short().to_ascii_lowercase())
            })
            .ok_or_else(|| Error::Config(format!("unknown affect label `{s}`")))
    }
}
