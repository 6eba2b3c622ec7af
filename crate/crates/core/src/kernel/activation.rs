use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Elementwise or row-wise nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    /// Max-shifted softmax of `row / temperature`.
    RowSoftmax(f64),
}

impl Nonlinearity {
    pub fn apply(self, x: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Nonlinearity::Relu => Ok(x.map(relu)),
            Nonlinearity::LeakyRelu(slope) => Ok(x.map(|v| leaky_relu(v, slope))),
            Nonlinearity::Sigmoid => Ok(x.map(sigmoid)),
            Nonlinearity::RowSoftmax(t) => {
                if !(t > 0.0) {
                    return Err(Error::InvalidArgument(format!("softmax temperature must be > 0, got {t}")));
                }
                let mut out = x.map(|v| v / t);
                for i in 0..out.rows() {
                    softmax_in_place(out.row_mut(i));
                }
                Ok(out)
            }
        }
    }
}

/// Free-function form of [`Nonlinearity::apply`].
pub fn apply_nonlinearity(kind: Nonlinearity, x: &DenseMatrix) -> Result<DenseMatrix> {
    kind.apply(x)
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Rescales every non-zero row to unit L2 norm; zero rows pass through.
pub fn row_l2_normalize(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
    out
}
