use std::collections::HashSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{GroundTruth, NegativeType, PixelBox};
use crate::numerics::Grid;

/// Frame extents annotations refer to.
pub const FRAME: (usize, usize) = (224, 224);

/// One annotated sample, stored as a single JSON object per line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub id: String,
    #[serde(default)]
    pub class: Option<String>,
    #[serde(default)]
    pub boxes: Vec<PixelBox>,
    pub negative: bool,
    #[serde(default)]
    pub negative_type: NegativeType,
    /// Sample whose audio track an automated negative uses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_id: Option<String>,
    /// Sample whose frame an automated negative uses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
}

impl AnnotationRecord {
    pub fn positive(id: impl Into<String>, class: Option<String>, boxes: Vec<PixelBox>) -> Self {
        AnnotationRecord {
            id: id.into(),
            class,
            boxes,
            negative: false,
            negative_type: NegativeType::None,
            audio_id: None,
            video_id: None,
        }
    }

    pub fn validate(&self, height: usize, width: usize) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty sample id".into());
        }
        if self.negative {
            if !self.boxes.is_empty() {
                return Err(format!("negative sample `{}` has boxes", self.id));
            }
            if self.negative_type == NegativeType::None {
                return Err(format!(
                    "negative sample `{}` lacks a negative_type",
                    self.id
                ));
            }
        } else {
            if self.boxes.is_empty() {
                return Err(format!("positive sample `{}` has no boxes", self.id));
            }
            if self.negative_type != NegativeType::None {
                return Err(format!(
                    "positive sample `{}` tagged `{}`",
                    self.id,
                    self.negative_type.as_str()
                ));
            }
        }
        for b in &self.boxes {
            if !b.is_valid() {
                return Err(format!(
                    "box [{}, {}, {}, {}] of `{}` needs x0 < x1 and y0 < y1",
                    b.x0, b.y0, b.x1, b.y1, self.id
                ));
            }
            if b.x1 as usize > width || b.y1 as usize > height {
                return Err(format!(
                    "box [{}, {}, {}, {}] of `{}` leaves the {width}x{height} frame",
                    b.x0, b.y0, b.x1, b.y1, self.id
                ));
            }
        }
        Ok(())
    }

    /// Consensus ground truth on the `height x width` frame.
    pub fn ground_truth(&self, height: usize, width: usize) -> Result<GroundTruth> {
        if self.negative {
            let mut gt = GroundTruth::negative(height, width, self.negative_type)?;
            gt.class = self.class.clone();
            Ok(gt)
        } else {
            GroundTruth::new(
                rasterize_consensus(&self.boxes, height, width)?,
                self.boxes.clone(),
                self.class.clone(),
                NegativeType::None,
            )
        }
    }
}

/// Validated annotation set with its frame extents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub records: Vec<AnnotationRecord>,
    pub height: usize,
    pub width: usize,
    /// Free-form provenance lines; not serialized with the records.
    pub notes: Vec<String>,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        DatasetManifest {
            records: vec![],
            height: FRAME.0,
            width: FRAME.1,
            notes: vec![],
        }
    }
}

impl DatasetManifest {
    pub fn new(records: Vec<AnnotationRecord>, height: usize, width: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        for (k, r) in records.iter().enumerate() {
            r.validate(height, width)
                .map_err(|message| Error::Validation {
                    line: k + 1,
                    message,
                })?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Validation {
                    line: k + 1,
                    message: format!("duplicate sample id `{}`", r.id),
                });
            }
        }
        Ok(DatasetManifest {
            records,
            height,
            width,
            notes: vec![],
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.records.iter().filter(|r| !r.negative).count()
    }

    pub fn negatives(&self) -> usize {
        self.records.iter().filter(|r| r.negative).count()
    }

    /// Ground truth of every record, computed in parallel, in record order.
    pub fn ground_truths(&self) -> Result<Vec<GroundTruth>> {
        self.records
            .par_iter()
            .map(|r| r.ground_truth(self.height, self.width))
            .collect()
    }
}

/// Reads one JSON record per line; blank lines are skipped. Errors carry
/// the 1-based line number.
pub fn load_annotations(
    source: impl BufRead,
    height: usize,
    width: usize,
) -> Result<DatasetManifest> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (k, line) in source.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::Validation {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord =
            serde_json::from_str(&line).map_err(|e| Error::Validation {
                line: line_no,
                message: e.to_string(),
            })?;
        record
            .validate(height, width)
            .map_err(|message| Error::Validation {
                line: line_no,
                message,
            })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::Validation {
                line: line_no,
                message: format!("duplicate sample id `{}`", record.id),
            });
        }
        records.push(record);
    }
    Ok(DatasetManifest {
        records,
        height,
        width,
        notes: vec![],
    })
}

pub fn load_annotations_file(
    path: &std::path::Path,
    height: usize,
    width: usize,
) -> Result<DatasetManifest> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_annotations(std::io::BufReader::new(file), height, width)
}

pub fn write_annotations(manifest: &DatasetManifest, mut out: impl Write) -> Result<()> {
    for r in &manifest.records {
        let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(())
}

/// Coverage-fraction consensus: each pixel gets the share of boxes that
/// cover it. Boxes are half-open `[x0, x1) x [y0, y1)` with `x` the column.
pub fn rasterize_consensus(boxes: &[PixelBox], height: usize, width: usize) -> Result<Grid> {
    if height == 0 || width == 0 {
        return Err(Error::Structural("frame extents must be nonzero".into()));
    }
    if boxes.is_empty() {
        return Err(Error::ContractViolation(
            "a positive sample needs at least one box".into(),
        ));
    }
    let mut counts = vec![0u32; height * width];
    for b in boxes {
        let (x1, y1) = ((b.x1 as usize).min(width), (b.y1 as usize).min(height));
        for row in (b.y0 as usize)..y1 {
            for c in &mut counts[row * width + b.x0 as usize..row * width + x1.max(b.x0 as usize)] {
                *c += 1;
            }
        }
    }
    let total = boxes.len() as f64;
    Grid::new(
        vec![height, width],
        counts.into_iter().map(|c| c as f64 / total).collect(),
    )
}
