//! Serde helpers for the wire formats: complex numbers as [re, im] pairs.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub mod complex_pair {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Complex64, ser: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Complex64, D::Error> {
        let pair = <[f64; 2]>::deserialize(de)?;
        Ok(Complex64::new(pair[0], pair[1]))
    }
}

pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], ser: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(de)?;
        Ok(pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }
}
