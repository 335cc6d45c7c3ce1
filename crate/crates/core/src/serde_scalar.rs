//! Serializes generic scalars as JSON numbers.

use serde::Serializer;

use crate::scalar::Scalar;

pub fn serialize<S: Serializer, T: Scalar>(value: &T, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_f64(value.to_f64())
}
