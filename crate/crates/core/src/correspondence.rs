//! Soft code predictions per observed point and the quantities derived from
//! them: quantized code, per-bit confidence, trust bit and initial bit.

use std::io::{BufRead, Write};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorrespondenceError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("soft code value {value} at bit {bit} is outside [0, 1]")]
    InvalidCode { bit: usize, value: f64 },
    #[error("soft code is empty")]
    EmptyCode,
    #[error("line {line}: code has {found} bits, expected {expected}")]
    LengthMismatch { line: usize, expected: usize, found: usize },
}

/// Raw per-bit prediction in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftCode(Vec<f64>);

impl SoftCode {
    pub fn new(values: Vec<f64>) -> Result<Self, CorrespondenceError> {
        if values.is_empty() {
            return Err(CorrespondenceError::EmptyCode);
        }
        if let Some((bit, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(CorrespondenceError::InvalidCode { bit, value });
        }
        Ok(SoftCode(values))
    }

    /// Exact binary prediction of a `bits`-deep integer code.
    pub fn from_code(code: u32, bits: u32) -> Self {
        SoftCode((0..bits).map(|k| f64::from((code >> (bits - 1 - k)) & 1)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Rounds each bit to the nearest of {0, 1}; 0.5 rounds up.
pub fn quantize(code: &SoftCode) -> Vec<u8> {
    code.0.iter().map(|&v| u8::from(v >= 0.5)).collect()
}

/// Quantized code packed with bit 0 most significant.
pub fn quantized_code(code: &SoftCode) -> u32 {
    code.0.iter().fold(0u32, |acc, &v| (acc << 1) | u32::from(v >= 0.5))
}

/// Per-bit correctness confidence `1 - |c - round(c)|`, each in `[0.5, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector(Vec<f64>);

impl ConfidenceVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ConfidenceVector {
    fn from(values: Vec<f64>) -> Self {
        ConfidenceVector(values)
    }
}

pub fn confidence(code: &SoftCode) -> ConfidenceVector {
    ConfidenceVector(
        code.0
            .iter()
            .map(|&v| {
                let bit = if v >= 0.5 { 1.0 } else { 0.0 };
                1.0 - (v - bit).abs()
            })
            .collect(),
    )
}

/// Length of the longest prefix whose bits all have confidence `>= 0.5 + margin`.
pub fn trust_bit(confidence: &ConfidenceVector, margin: f64) -> u32 {
    confidence.0.iter().take_while(|&&p| p >= 0.5 + margin).count() as u32
}

/// First code level a point is matched at: `max(j, m_default)`, capped at `bits`.
pub fn initial_bit(trust_bit: u32, m_default: u32, bits: u32) -> u32 {
    trust_bit.max(m_default).min(bits)
}

/// Benchmark-only ground truth attached to a correspondence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    /// Generated from this encoded vertex.
    Vertex(u32),
    /// A gross outlier with no true model point.
    Outlier,
}

/// One observed camera-frame point and its soft code.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub point: Point3<f64>,
    pub code: SoftCode,
    pub truth: Option<Truth>,
}

impl Correspondence {
    pub fn new(point: Point3<f64>, code: SoftCode) -> Self {
        Correspondence {
            point,
            code,
            truth: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    p: [f64; 3],
    code: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_vertex: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_outlier: Option<bool>,
}

/// Parses JSON-lines correspondences; blank lines are skipped. All codes
/// must share one length.
pub fn parse_correspondences(text: &str) -> Result<Vec<Correspondence>, CorrespondenceError> {
    read_correspondences(text.as_bytes())
}

pub fn read_correspondences<R: BufRead>(reader: R) -> Result<Vec<Correspondence>, CorrespondenceError> {
    let mut out = Vec::new();
    let mut width = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| CorrespondenceError::Parse {
            line: ln,
            message: e.to_string(),
        })?;
        if !record.p.iter().all(|c| c.is_finite()) {
            return Err(CorrespondenceError::Parse {
                line: ln,
                message: "point is not finite".into(),
            });
        }
        let expected = *width.get_or_insert(record.code.len());
        if record.code.len() != expected {
            return Err(CorrespondenceError::LengthMismatch {
                line: ln,
                expected,
                found: record.code.len(),
            });
        }
        let code = SoftCode::new(record.code).map_err(|e| CorrespondenceError::Parse {
            line: ln,
            message: e.to_string(),
        })?;
        let truth = match (record.gt_vertex, record.gt_outlier) {
            (Some(_), Some(true)) => {
                return Err(CorrespondenceError::Parse {
                    line: ln,
                    message: "gt_vertex and gt_outlier are mutually exclusive".into(),
                })
            }
            (Some(v), _) => Some(Truth::Vertex(v)),
            (None, Some(true)) => Some(Truth::Outlier),
            (None, _) => None,
        };
        out.push(Correspondence {
            point: Point3::from(record.p),
            code,
            truth,
        });
    }
    Ok(out)
}

pub fn write_correspondences<W: Write>(mut writer: W, corrs: &[Correspondence]) -> Result<(), CorrespondenceError> {
    for c in corrs {
        let record = Record {
            p: [c.point.x, c.point.y, c.point.z],
            code: c.code.values().to_vec(),
            gt_vertex: match c.truth {
                Some(Truth::Vertex(v)) => Some(v),
                _ => None,
            },
            gt_outlier: matches!(c.truth, Some(Truth::Outlier)).then_some(true),
        };
        serde_json::to_writer(&mut writer, &record).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
