//! Serde adapters that write matrices as nested JSON arrays (`[[..], [..]]`)
//! and vectors as flat arrays.

use ndarray::{Array1, Array2};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn serialize<S, T>(a: &Array2<T>, serializer: S) -> Result<S::Ok, S::Error>
where
    S: Serializer,
    T: Serialize + Clone,
{
    let rows: Vec<Vec<T>> = a.rows().into_iter().map(|r| r.to_vec()).collect();
    rows.serialize(serializer)
}

pub fn deserialize<'de, D, T>(deserializer: D) -> Result<Array2<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de> + Clone,
{
    let rows = Vec::<Vec<T>>::deserialize(deserializer)?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(D::Error::custom("ragged matrix rows"));
    }
    let nrows = rows.len();
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect()).map_err(D::Error::custom)
}

pub mod vector {
    use super::*;

    pub fn serialize<S, T>(a: &Array1<T>, serializer: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
        T: Serialize + Clone,
    {
        a.to_vec().serialize(serializer)
    }

    pub fn deserialize<'de, D, T>(deserializer: D) -> Result<Array1<T>, D::Error>
    where
        D: Deserializer<'de>,
        T: Deserialize<'de>,
    {
        Ok(Array1::from_vec(Vec::<T>::deserialize(deserializer)?))
    }
}
