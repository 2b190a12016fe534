//! File formats: tangle JSON documents and CSV point lists.
//!
//! A tangle document is
//! `{"n": 4, "closed": true, "V": [[x,y,z], …], "T0": [x,y,z]}` with `n + 1`
//! tangents. Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{TangentChain, TangleCurve, Vec3};
use crate::error::{Result, TangleError};
use crate::validation::ValidationReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangleDocument {
    pub n: usize,
    pub closed: bool,
    #[serde(rename = "V")]
    pub v: Vec<[f64; 3]>,
    #[serde(rename = "T0", default)]
    pub t0: [f64; 3],
}

impl TangleDocument {
    pub fn from_curve(curve: &TangleCurve, closed: bool) -> Self {
        Self {
            n: curve.links(),
            closed,
            v: curve
                .chain()
                .vectors()
                .iter()
                .map(|x| (*x).into())
                .collect(),
            t0: curve.base_translation().into(),
        }
    }

    pub fn from_chain(chain: &TangentChain, closed: bool) -> Self {
        Self::from_curve(&TangleCurve::new(chain.clone(), Vec3::zeros()), closed)
    }

    /// The stored tangents, checked for count and finiteness only; use
    /// [`crate::validation`] to measure how close they are to a tangle.
    pub fn chain(&self) -> Result<TangentChain> {
        if self.v.len() != self.n + 1 {
            return Err(TangleError::LengthMismatch {
                expected: self.n + 1,
                actual: self.v.len(),
            });
        }
        if self.n == 0 {
            return Err(TangleError::InvalidInput(
                "a tangle needs at least one link".into(),
            ));
        }
        if self
            .v
            .iter()
            .chain([&self.t0])
            .flatten()
            .any(|c| !c.is_finite())
        {
            return Err(TangleError::InvalidInput("non-finite coordinate".into()));
        }
        Ok(TangentChain::from_vectors_unchecked(
            self.v.iter().map(|x| Vec3::from(*x)).collect(),
        ))
    }

    pub fn curve(&self) -> Result<TangleCurve> {
        Ok(TangleCurve::new(self.chain()?, Vec3::from(self.t0)))
    }
}

/// Worst residuals over a geodesic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSummary {
    pub max_angle_deviation_deg: f64,
    pub max_norm_deviation: f64,
}

impl From<&ValidationReport> for GeodesicSummary {
    fn from(r: &ValidationReport) -> Self {
        Self {
            max_angle_deviation_deg: r.max_orthogonality_deviation_degrees,
            max_norm_deviation: r.max_norm_deviation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicDocument {
    pub tangles: Vec<TangleDocument>,
    pub summary: GeodesicSummary,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn read_tangle(path: &Path) -> Result<TangleDocument> {
    read_json(path)
}

/// Parses `x,y,z` rows (or `t,x,y,z`, keeping the last three columns).
/// A non-numeric first row is treated as a header.
pub fn parse_points_csv<R: Read>(reader: R) -> Result<Vec<Vec3>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut points = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(e) => {
                return Err(TangleError::InvalidInput(format!("row {}: {e}", row + 1)));
            }
        };
        let xyz = match values.len() {
            3 => &values[..],
            4 => &values[1..],
            k => {
                return Err(TangleError::InvalidInput(format!(
                    "row {}: expected 3 columns, found {k}",
                    row + 1
                )))
            }
        };
        points.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }
    Ok(points)
}

pub fn read_points_csv(path: &Path) -> Result<Vec<Vec3>> {
    parse_points_csv(File::open(path)?)
}

/// Writes `t,x,y,z` with a header row.
pub fn write_polyline_csv<W: Write>(writer: W, params: &[f64], points: &[Vec3]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "x", "y", "z"])?;
    for (t, p) in params.iter().zip(points) {
        w.write_record([t, &p.x, &p.y, &p.z].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes headerless `x,y,z` rows.
pub fn write_points_csv<W: Write>(writer: W, points: &[Vec3]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.write_record([p.x, p.y, p.z].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use proptest::prelude::*;

    #[test]
    fn document_layout() {
        let doc = TangleDocument::from_chain(&catalog::circle4(), true);
        let value: serde_json::Value = serde_json::from_str(&to_json(&doc).unwrap()).unwrap();
        assert_eq!(value["n"], 4);
        assert_eq!(value["closed"], true);
        assert_eq!(value["V"].as_array().unwrap().len(), 5);
        assert_eq!(value["V"][1], serde_json::json!([-1.0, 0.0, 0.0]));
        assert_eq!(value["T0"], serde_json::json!([0.0, 0.0, 0.0]));
    }

    #[test]
    fn wrong_vector_count_is_rejected() {
        let mut doc = TangleDocument::from_chain(&catalog::circle4(), true);
        doc.v.pop();
        assert!(matches!(
            doc.chain(),
            Err(TangleError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn csv_with_and_without_header() {
        let with = "x,y,z\n1,2,3\n4.5, 5, -6e-1\n";
        let pts = parse_points_csv(with.as_bytes()).unwrap();
        assert_eq!(
            pts,
            vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.5, 5.0, -0.6)]
        );
        let without = "1,2,3\n4.5,5,-0.6\n";
        assert_eq!(parse_points_csv(without.as_bytes()).unwrap(), pts);
        let four = "t,x,y,z\n0,1,2,3\n0.1,4.5,5,-0.6\n";
        assert_eq!(parse_points_csv(four.as_bytes()).unwrap(), pts);
        assert!(parse_points_csv("1,2,3\n1,x,3\n".as_bytes()).is_err());
        assert!(parse_points_csv("1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn polyline_csv_round_trip() {
        let pts = vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0 / 3.0, -2.0, 1e-17)];
        let mut buf = Vec::new();
        write_polyline_csv(&mut buf, &[0.0, 0.5], &pts).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y,z\n0,0.1,0.2,0.3\n"));
        assert_eq!(parse_points_csv(buf.as_slice()).unwrap(), pts);
        let mut plain = Vec::new();
        write_points_csv(&mut plain, &pts).unwrap();
        assert_eq!(parse_points_csv(plain.as_slice()).unwrap(), pts);
    }

    proptest! {
        #[test]
        fn json_round_trip_is_lossless(
            coords in proptest::collection::vec(-1e3..1e3f64, 18),
            t0 in proptest::array::uniform3(-1e6..1e6f64),
        ) {
            let doc = TangleDocument {
                n: 5,
                closed: false,
                v: coords.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
                t0,
            };
            let back: TangleDocument = serde_json::from_str(&to_json(&doc).unwrap()).unwrap();
            prop_assert_eq!(back, doc);
        }
    }
}
