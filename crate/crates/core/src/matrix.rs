//! Dense helpers shared by the models, plus serde adapters that store
//! matrices as row-major arrays of arrays.

use ndarray::{Array1, Array2, ArrayView2, Axis};

pub fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
}

/// `x · wᵀ + b` for a batch `x` (rows are samples) and a layer `w` stored
/// as (out × in).
pub fn affine(x: &ArrayView2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut z = x.dot(&w.t());
    z += b;
    z
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// `log(sum(exp(row)))` computed stably.
pub fn log_sum_exp(row: ndarray::ArrayView1<f64>) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Array2<f64> {
    let mut flat = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        flat.extend_from_slice(r);
    }
    Array2::from_shape_vec((rows.len(), cols), flat).expect("row widths checked by caller")
}

pub fn select_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

pub mod serde_array2 {
    use ndarray::Array2;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(a: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = a.outer_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(super::from_rows(&rows, cols))
    }
}

/// Like [`serde_array2`] but keeps the column count for empty matrices.
pub mod serde_array2_shaped {
    use ndarray::Array2;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Shaped {
        rows: usize,
        cols: usize,
        data: Vec<Vec<f64>>,
    }

    pub fn serialize<S: Serializer>(a: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        Shaped {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.outer_iter().map(|r| r.to_vec()).collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let sh = Shaped::deserialize(d)?;
        if sh.data.len() != sh.rows || sh.data.iter().any(|r| r.len() != sh.cols) {
            return Err(D::Error::custom("matrix data does not match declared shape"));
        }
        Ok(super::from_rows(&sh.data, sh.cols))
    }
}

pub mod serde_array1 {
    use ndarray::Array1;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(a: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
        a.to_vec().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array1<f64>, D::Error> {
        Ok(Array1::from(Vec::<f64>::deserialize(d)?))
    }
}
