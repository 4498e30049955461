//! Loop files.
//!
//! CSV: header `t,x,y`, then one row per node with `t = k/N`.
//! JSON: `{"n": N, "points": [[x, y], ...]}`, with an optional
//! `"interpolation": "polygonal"` key for piecewise-linear loops.
//!
//! Numbers are written in shortest round-trip form, so a loop survives a
//! write/read cycle bitwise.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Interpolation, LoopCurve, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopFileFormat {
    Csv,
    Json,
}

impl LoopFileFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonLoop {
    n: usize,
    points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    interpolation: Option<Interpolation>,
}

impl Serialize for LoopCurve {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.json_doc().serialize(serializer)
    }
}

impl LoopCurve {
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut s = String::with_capacity(n * 48 + 8);
        s.push_str("t,x,y\n");
        for (k, p) in self.points().iter().enumerate() {
            let t = k as f64 / n as f64;
            let _ = writeln!(s, "{t},{},{}", p.re, p.im);
        }
        s
    }

    fn json_doc(&self) -> JsonLoop {
        JsonLoop {
            n: self.n(),
            points: self.points().iter().map(|p| [p.re, p.im]).collect(),
            interpolation: match self.interpolation() {
                Interpolation::Polygonal => Some(Interpolation::Polygonal),
                Interpolation::Trigonometric => None,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.json_doc()).expect("loop serialisation cannot fail")
    }

    /// Parse the CSV format; the result uses the trigonometric reading.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::LoopFormat("empty file".into()))?;
        if header.trim() != "t,x,y" {
            return Err(Error::LoopFormat(format!(
                "expected header \"t,x,y\", found {header:?}"
            )));
        }
        let mut ts = Vec::new();
        let mut points = Vec::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::LoopFormat(format!(
                    "row {}: expected 3 columns, found {}",
                    row + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::LoopFormat(format!("row {}: {s:?}: {e}", row + 1)))
            };
            ts.push(parse(fields[0])?);
            points.push(Point::new(parse(fields[1])?, parse(fields[2])?));
        }
        let n = points.len();
        for (k, t) in ts.iter().enumerate() {
            let expected = k as f64 / n as f64;
            if (t - expected).abs() > 1e-9 {
                return Err(Error::LoopFormat(format!(
                    "row {}: parameter {t} is not {k}/{n}",
                    k + 1
                )));
            }
        }
        LoopCurve::trigonometric(points)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: JsonLoop =
            serde_json::from_str(text).map_err(|e| Error::LoopFormat(e.to_string()))?;
        if doc.n != doc.points.len() {
            return Err(Error::LoopFormat(format!(
                "\"n\" is {} but {} points are listed",
                doc.n,
                doc.points.len()
            )));
        }
        let points = doc.points.iter().map(|p| Point::new(p[0], p[1])).collect();
        LoopCurve::new(points, doc.interpolation.unwrap_or_default())
    }
}

/// Read a loop file; the format comes from the extension, or from the first
/// non-blank character when the extension is unknown.
pub fn read_loop_file(path: &Path) -> Result<LoopCurve> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::LoopFormat(format!("{}: {e}", path.display())))?;
    let format = LoopFileFormat::from_path(path).unwrap_or_else(|| {
        if text.trim_start().starts_with('{') {
            LoopFileFormat::Json
        } else {
            LoopFileFormat::Csv
        }
    });
    match format {
        LoopFileFormat::Csv => LoopCurve::from_csv(&text),
        LoopFileFormat::Json => LoopCurve::from_json(&text),
    }
}

pub fn write_loop_csv(u: &LoopCurve, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, u.to_csv())
}

pub fn write_loop_json(u: &LoopCurve, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, u.to_json())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn wobbly() -> LoopCurve {
        LoopCurve::from_fn(48, |t| {
            Point::from_polar(1.0 + 0.1 * (6.0 * PI * t).sin(), 2.0 * PI * t) + Point::new(1e-17, 3.3)
        })
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let u = wobbly();
        let v = LoopCurve::from_csv(&u.to_csv()).unwrap();
        assert_eq!(u, v);
        assert!(u.to_csv().starts_with("t,x,y\n0,"));
    }

    #[test]
    fn json_round_trip_keeps_interpolation() {
        let u = wobbly();
        let v = LoopCurve::from_json(&u.to_json()).unwrap();
        assert_eq!(u, v);
        assert!(!u.to_json().contains("interpolation"));
        let p = u.with_interpolation(Interpolation::Polygonal);
        assert_eq!(LoopCurve::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(matches!(LoopCurve::from_csv(""), Err(Error::LoopFormat(_))));
        assert!(matches!(
            LoopCurve::from_csv("x,y\n1,2\n"),
            Err(Error::LoopFormat(_))
        ));
        assert!(matches!(
            LoopCurve::from_csv("t,x,y\n0,1\n"),
            Err(Error::LoopFormat(_))
        ));
        assert!(matches!(
            LoopCurve::from_csv("t,x,y\n0,1,abc\n"),
            Err(Error::LoopFormat(_))
        ));
        assert!(matches!(
            LoopCurve::from_json("{\"n\": 3, \"points\": []}"),
            Err(Error::LoopFormat(_))
        ));
        let short = "t,x,y\n0,0,0\n0.5,1,1\n";
        assert!(matches!(
            LoopCurve::from_csv(short),
            Err(Error::TooFewNodes { .. })
        ));
    }
}
