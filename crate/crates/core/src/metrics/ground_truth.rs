use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Grid;

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`, origin top-left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct PixelBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        PixelBox { x0, y0, x1, y1 }
    }

    pub fn is_valid(&self) -> bool {
        self.x0 < self.x1 && self.y0 < self.y1
    }

    pub fn area(&self) -> u64 {
        u64::from(self.x1.saturating_sub(self.x0)) * u64::from(self.y1.saturating_sub(self.y0))
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.y0 as usize..self.y1 as usize).contains(&row)
            && (self.x0 as usize..self.x1 as usize).contains(&col)
    }
}

impl From<[u32; 4]> for PixelBox {
    fn from([x0, y0, x1, y1]: [u32; 4]) -> Self {
        PixelBox { x0, y0, x1, y1 }
    }
}

impl From<PixelBox> for [u32; 4] {
    fn from(b: PixelBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeType {
    #[default]
    None,
    /// Hand-selected clip with no visible sounding object.
    Real,
    /// Mismatched audio/video from different classes.
    AutoEasy,
    /// Mismatched audio/video from the same class.
    AutoHard,
}

impl NegativeType {
    pub fn as_str(&self) -> &'static str {
        match self {
            NegativeType::None => "none",
            NegativeType::Real => "real",
            NegativeType::AutoEasy => "auto-easy",
            NegativeType::AutoHard => "auto-hard",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SizeBucket {
    Small,
    Medium,
    Large,
    Huge,
}

impl SizeBucket {
    pub const ALL: [SizeBucket; 4] = [
        SizeBucket::Small,
        SizeBucket::Medium,
        SizeBucket::Large,
        SizeBucket::Huge,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SizeBucket::Small => "small",
            SizeBucket::Medium => "medium",
            SizeBucket::Large => "large",
            SizeBucket::Huge => "huge",
        }
    }
}

/// Consensus ground truth for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    weights: Grid,
    pub boxes: Vec<PixelBox>,
    pub class: Option<String>,
    pub negative_type: NegativeType,
}

impl GroundTruth {
    pub fn new(
        weights: Grid,
        boxes: Vec<PixelBox>,
        class: Option<String>,
        negative_type: NegativeType,
    ) -> Result<Self> {
        if weights.rank() != 2 {
            return Err(Error::Structural("ground-truth weights must be 2-D".into()));
        }
        if weights.data().iter().any(|&g| !(0.0..=1.0).contains(&g)) {
            return Err(Error::Structural(
                "ground-truth weights outside [0, 1]".into(),
            ));
        }
        let empty = weights.data().iter().all(|&g| g == 0.0);
        if empty != boxes.is_empty() {
            return Err(Error::Structural(
                "a sample is negative exactly when it has no boxes and no weight".into(),
            ));
        }
        if empty == (negative_type == NegativeType::None) {
            return Err(Error::Structural(format!(
                "negative type `{}` inconsistent with ground truth",
                negative_type.as_str()
            )));
        }
        Ok(GroundTruth {
            weights,
            boxes,
            class,
            negative_type,
        })
    }

    pub fn negative(height: usize, width: usize, negative_type: NegativeType) -> Result<Self> {
        Self::new(Grid::zeros(&[height, width]), vec![], None, negative_type)
    }

    pub fn weights(&self) -> &Grid {
        &self.weights
    }

    pub fn is_positive(&self) -> bool {
        !self.boxes.is_empty()
    }

    /// Number of pixels with nonzero weight.
    pub fn area(&self) -> usize {
        self.weights.data().iter().filter(|&&g| g > 0.0).count()
    }

    pub fn height(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.weights.shape()[1]
    }
}

pub fn size_bucket_for_area(area: u64) -> Option<SizeBucket> {
    match area {
        0 => None,
        1..=1023 => Some(SizeBucket::Small),
        1024..=9215 => Some(SizeBucket::Medium),
        9216..=20735 => Some(SizeBucket::Large),
        _ => Some(SizeBucket::Huge),
    }
}

/// Bucket by ground-truth area: `[1, 32²)`, `[32², 96²)`, `[96², 144²)`,
/// `[144², 224²]`; boundary areas belong to the upper bucket.
pub fn size_bucket(gt: &GroundTruth) -> Result<SizeBucket> {
    size_bucket_for_area(gt.area() as u64).ok_or_else(|| {
        Error::ContractViolation("size bucket requested for a negative sample".into())
    })
}
