//! Serde adapters for complex values and non-finite reals.
//!
//! Complex numbers are written as `{"re": .., "im": ..}`. Infinite and NaN
//! reals are written as the strings `"inf"`, `"-inf"` and `"nan"`.

use faer::{c64, Mat};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

pub mod ext_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct ExtVisitor;

    impl Visitor<'_> for ExtVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("unexpected string `{other}`"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cplx {
    #[serde(with = "ext_f64")]
    pub re: f64,
    #[serde(with = "ext_f64")]
    pub im: f64,
}

impl From<c64> for Cplx {
    fn from(z: c64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<Cplx> for c64 {
    fn from(z: Cplx) -> Self {
        c64::new(z.re, z.im)
    }
}

pub mod cplx_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[c64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|z| Cplx::from(*z)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<c64>, D::Error> {
        Ok(Vec::<Cplx>::deserialize(d)?.into_iter().map(c64::from).collect())
    }
}

/// Complex matrix stored as a list of columns.
pub mod cplx_columns {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Mat<c64>, s: S) -> Result<S::Ok, S::Error> {
        let cols: Vec<Vec<Cplx>> = (0..m.ncols())
            .map(|j| (0..m.nrows()).map(|i| Cplx::from(m[(i, j)])).collect())
            .collect();
        cols.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat<c64>, D::Error> {
        let cols = Vec::<Vec<Cplx>>::deserialize(d)?;
        let rows = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != rows) {
            return Err(de::Error::custom("ragged mode columns"));
        }
        Ok(Mat::from_fn(rows, cols.len(), |i, j| cols[j][i].into()))
    }
}
