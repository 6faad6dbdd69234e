//! JSON wire formats and the canonical number formatter.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), which is enough
//! for every `f64` to round-trip exactly.

use std::io;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Error;
use crate::lorentz::{ComplexParameter, MuellerMatrix};
use crate::stokes::{MeasurementPair, StokesVector};

/// `{"s0": number, "s": [x, y, z]}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StokesJson {
    pub s0: f64,
    pub s: [f64; 3],
}

impl From<StokesVector> for StokesJson {
    fn from(v: StokesVector) -> Self {
        Self {
            s0: v.s0(),
            s: [v.s().x, v.s().y, v.s().z],
        }
    }
}

impl TryFrom<StokesJson> for StokesVector {
    type Error = Error;

    fn try_from(j: StokesJson) -> Result<Self, Error> {
        StokesVector::new(j.s0, Vector3::from(j.s))
    }
}

/// `{"in": {...}, "out": {...}}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairJson {
    #[serde(rename = "in")]
    pub input: StokesJson,
    #[serde(rename = "out")]
    pub output: StokesJson,
}

impl From<MeasurementPair> for PairJson {
    fn from(p: MeasurementPair) -> Self {
        Self {
            input: p.input.into(),
            output: p.output.into(),
        }
    }
}

impl TryFrom<PairJson> for MeasurementPair {
    type Error = Error;

    fn try_from(j: PairJson) -> Result<Self, Error> {
        MeasurementPair::new(j.input.try_into()?, j.output.try_into()?)
    }
}

/// `{"re": [4 numbers], "im": [4 numbers]}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KJson {
    pub re: [f64; 4],
    pub im: [f64; 4],
}

impl From<ComplexParameter> for KJson {
    fn from(k: ComplexParameter) -> Self {
        let c = k.components();
        Self {
            re: c.map(|z| z.re),
            im: c.map(|z| z.im),
        }
    }
}

impl From<KJson> for ComplexParameter {
    fn from(j: KJson) -> Self {
        let mut c = [Complex64::new(0.0, 0.0); 4];
        for (i, z) in c.iter_mut().enumerate() {
            *z = Complex64::new(j.re[i], j.im[i]);
        }
        ComplexParameter::new_unchecked(c)
    }
}

/// Row-major array of 16 numbers.
pub fn matrix_to_json(m: &MuellerMatrix) -> Vec<f64> {
    m.to_row_major().to_vec()
}

pub fn matrix_from_json(v: &[f64]) -> Result<MuellerMatrix, String> {
    let arr: [f64; 16] = v
        .try_into()
        .map_err(|_| format!("expected 16 numbers, found {}", v.len()))?;
    Ok(MuellerMatrix::from_row_major(&arr))
}

/// Pretty-printing formatter that writes floats with 17 significant digits.
#[derive(Default)]
pub struct CanonicalFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_key(w)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes `value` in the canonical form (pretty, 17 significant digits,
/// trailing newline).
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}
