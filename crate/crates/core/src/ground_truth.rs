//! Measured needle shapes.
//!
//! CSV layout: a first line `unit=mm` (or `unit=m`), then a header `x,y`,
//! then one point per row in W, ordered from the entry point to the tip.

use std::io::Read;
use std::path::Path;

use nalgebra::Point2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GroundTruthError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("first line must be `unit=mm` or `unit=m`, got {0:?}")]
    MissingUnit(String),
    #[error("expected header `x,y`, got {0:?}")]
    Header(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("a ground-truth polyline needs at least 2 points, got {0}")]
    TooShort(usize),
    #[error("points {0} and {1} coincide (zero-length segment)")]
    ZeroLengthSegment(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub label: String,
    /// Points in W (m), entry first.
    pub points: Vec<Point2<f64>>,
}

impl GroundTruth {
    pub fn new(label: impl Into<String>, points: Vec<Point2<f64>>) -> Result<Self, GroundTruthError> {
        if points.len() < 2 {
            return Err(GroundTruthError::TooShort(points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(GroundTruthError::Row {
                    row: i + 1,
                    message: "non-finite coordinate".into(),
                });
            }
        }
        for i in 1..points.len() {
            if points[i] == points[i - 1] {
                return Err(GroundTruthError::ZeroLengthSegment(i - 1, i));
            }
        }
        Ok(Self {
            label: label.into(),
            points,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GroundTruthError> {
        let path = path.as_ref();
        let io = |source| GroundTruthError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut text = String::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(io)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&text, label)
    }

    pub fn parse(text: &str, label: impl Into<String>) -> Result<Self, GroundTruthError> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        let scale = match first.trim().replace(' ', "").as_str() {
            "unit=mm" => 1e-3,
            "unit=m" => 1.0,
            other => return Err(GroundTruthError::MissingUnit(other.to_string())),
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(rest.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| GroundTruthError::Header(e.to_string()))?
            .clone();
        if header.len() != 2 || &header[0] != "x" || &header[1] != "y" {
            return Err(GroundTruthError::Header(header.iter().collect::<Vec<_>>().join(",")));
        }
        let mut points = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| GroundTruthError::Row {
                row,
                message: e.to_string(),
            })?;
            let value = |k: usize| -> Result<f64, GroundTruthError> {
                record[k].parse::<f64>().map_err(|_| GroundTruthError::Row {
                    row,
                    message: format!("cannot parse {:?}", &record[k]),
                })
            };
            points.push(Point2::new(value(0)? * scale, value(1)? * scale));
        }
        Self::new(label, points)
    }

    /// CSV text in millimetres.
    pub fn to_csv_mm(&self) -> String {
        let mut out = String::from("unit=mm\nx,y\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.x * 1e3, p.y * 1e3));
        }
        out
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}
