//! File formats: the JSON tuple schema, JSON reports with 17-significant-digit
//! floats, and CSV export of range samples.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{OtkError, Result};
use crate::linalg::ComplexMatrix;
use crate::tuple::OperatorTuple;

/// Wire form of a tuple: `{"d": .., "n": .., "matrices": [[[ [re, im], .. ], ..], ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TupleFile {
    pub d: usize,
    pub n: usize,
    pub matrices: Vec<Vec<Vec<[f64; 2]>>>,
}

impl From<&OperatorTuple> for TupleFile {
    fn from(a: &OperatorTuple) -> Self {
        let n = a.n();
        let matrices = a
            .matrices()
            .iter()
            .map(|m| {
                (0..n)
                    .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
                    .collect()
            })
            .collect();
        Self { d: a.d(), n, matrices }
    }
}

impl TryFrom<TupleFile> for OperatorTuple {
    type Error = OtkError;

    fn try_from(f: TupleFile) -> Result<Self> {
        if f.d == 0 || f.n == 0 {
            return Err(OtkError::InvalidInput("d and n must be positive".into()));
        }
        if f.matrices.len() != f.d {
            return Err(OtkError::InvalidInput(format!(
                "declared d = {} but found {} matrices",
                f.d,
                f.matrices.len()
            )));
        }
        let mut mats = Vec::with_capacity(f.d);
        for (j, rows) in f.matrices.iter().enumerate() {
            if rows.len() != f.n {
                return Err(OtkError::InvalidInput(format!(
                    "matrix {j} has {} rows, expected {}",
                    rows.len(),
                    f.n
                )));
            }
            let mut data = Vec::with_capacity(f.n * f.n);
            for (i, row) in rows.iter().enumerate() {
                if row.len() != f.n {
                    return Err(OtkError::InvalidInput(format!(
                        "matrix {j} row {i} has {} entries, expected {}",
                        row.len(),
                        f.n
                    )));
                }
                data.extend(row.iter().map(|[re, im]| Complex64::new(*re, *im)));
            }
            mats.push(ComplexMatrix::new(f.n, f.n, data)?);
        }
        OperatorTuple::new(mats)
    }
}

pub fn tuple_to_json(a: &OperatorTuple) -> String {
    to_json_compact(&TupleFile::from(a))
}

pub fn tuple_from_json(s: &str) -> Result<OperatorTuple> {
    let f: TupleFile = serde_json::from_str(s)?;
    f.try_into()
}

pub fn read_tuple(path: &Path) -> Result<OperatorTuple> {
    tuple_from_json(&fs::read_to_string(path)?)
}

pub fn write_tuple(path: &Path, a: &OperatorTuple) -> Result<()> {
    let mut s = tuple_to_json(a);
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Writes every `f64` with 17 significant digits, enough to round-trip exactly.
struct SigDigits<F>(F);

impl<F: Formatter> Formatter for SigDigits<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn serialize_with<T: Serialize, F: Formatter>(value: &T, fmt: F) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits(fmt));
    value
        .serialize(&mut ser)
        .expect("in-memory serialization of plain data cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn to_json_compact<T: Serialize>(value: &T) -> String {
    serialize_with(value, CompactFormatter)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    serialize_with(value, PrettyFormatter::new())
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = to_json_pretty(value);
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
