use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::mask::BinaryMask;

/// Structure prototype classes. Type I is the swap marker; II to IV are
/// overlap layouts. Mirror images belong to the same class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrototypeClass {
    #[serde(rename = "I")]
    TypeI,
    #[serde(rename = "II")]
    TypeII,
    #[serde(rename = "III")]
    TypeIII,
    #[serde(rename = "IV")]
    TypeIV,
}

impl PrototypeClass {
    pub const ALL: [PrototypeClass; 4] = [Self::TypeI, Self::TypeII, Self::TypeIII, Self::TypeIV];

    pub fn is_swap(self) -> bool {
        self == Self::TypeI
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TypeI => "I",
            Self::TypeII => "II",
            Self::TypeIII => "III",
            Self::TypeIV => "IV",
        }
    }
}

impl fmt::Display for PrototypeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrototypeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(Self::TypeI),
            "II" => Ok(Self::TypeII),
            "III" => Ok(Self::TypeIII),
            "IV" => Ok(Self::TypeIV),
            _ => Err(Error::Parse(format!("unknown prototype class {s:?}"))),
        }
    }
}

/// A first-stage detection. The mask, when present, is cropped to `bbox`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeDetection {
    pub bbox: BBox,
    pub class: PrototypeClass,
    pub score: f64,
    pub mask: Option<BinaryMask>,
}

impl PrototypeDetection {
    pub fn new(
        bbox: BBox,
        class: PrototypeClass,
        score: f64,
        mask: Option<BinaryMask>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Parse(format!("score {score} outside [0, 1]")));
        }
        if let Some(m) = &mask {
            if m.dimensions() != (bbox.w, bbox.h) {
                return Err(Error::DimensionMismatch {
                    expected: (bbox.w, bbox.h),
                    actual: m.dimensions(),
                });
            }
        }
        Ok(Self {
            bbox,
            class,
            score,
            mask,
        })
    }
}
