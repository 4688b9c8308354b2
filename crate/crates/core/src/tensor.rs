//! Dense row-major `f64` tensors of rank one to four.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const MAX_RANK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::InvalidShape(alloc::format!(
            "rank must be in 1..={MAX_RANK}, got {}",
            shape.len()
        )));
    }
    if shape.contains(&0) {
        return Err(Error::InvalidShape(alloc::format!(
            "dimensions must be positive, got {shape:?}"
        )));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::filled(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Result<Self> {
        Self::filled(shape, 1.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Result<Self> {
        let len = check_shape(shape)?;
        if !value.is_finite() {
            return Err(Error::NonFinite("fill value"));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = check_shape(shape)?;
        if data.len() != len {
            return Err(Error::InvalidShape(alloc::format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data"));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Rank-1 tensor holding `data`.
    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::from_vec(&[n], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the flat buffer. Callers are responsible for
    /// keeping entries finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                found: other.shape.clone(),
            })
        }
    }

    /// Number of entries that are not exactly zero.
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn finite_or(self, what: &'static str) -> Result<Self> {
        if self.is_all_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(what))
        }
    }

    /// Squared Frobenius norm, summed in flat index order.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.frobenius_norm_sq())
    }

    /// `a * x + y`, elementwise.
    pub fn axpy(a: f64, x: &Tensor, y: &Tensor) -> Result<Tensor> {
        x.same_shape(y)?;
        let data = x
            .data
            .iter()
            .zip(&y.data)
            .map(|(xi, yi)| a * xi + yi)
            .collect();
        Tensor {
            shape: x.shape.clone(),
            data,
        }
        .finite_or("axpy result")
    }

    /// Hadamard product.
    pub fn elementwise_mul(x: &Tensor, y: &Tensor) -> Result<Tensor> {
        x.same_shape(y)?;
        let data = x.data.iter().zip(&y.data).map(|(a, b)| a * b).collect();
        Tensor {
            shape: x.shape.clone(),
            data,
        }
        .finite_or("elementwise product")
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        Tensor::axpy(-1.0, other, self)
    }

    pub fn scale(&self, a: f64) -> Result<Tensor> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| a * v).collect(),
        }
        .finite_or("scaled tensor")
    }

    /// Frobenius inner product `tr(selfᵀ other)`.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// In-place `self += a * x`.
    pub fn add_scaled(&mut self, a: f64, x: &Tensor) -> Result<()> {
        self.same_shape(x)?;
        for (s, xi) in self.data.iter_mut().zip(&x.data) {
            *s += a * xi;
        }
        if self.is_all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("accumulated tensor"))
        }
    }
}

pub fn frobenius_norm(t: &Tensor) -> f64 {
    t.frobenius_norm()
}

pub fn axpy(a: f64, x: &Tensor, y: &Tensor) -> Result<Tensor> {
    Tensor::axpy(a, x, y)
}

pub fn elementwise_mul(x: &Tensor, y: &Tensor) -> Result<Tensor> {
    Tensor::elementwise_mul(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(frobenius_norm(&t(&[1, 2], &[3.0, 4.0])), 5.0);
        assert_eq!(frobenius_norm(&Tensor::zeros(&[3, 2, 2]).unwrap()), 0.0);
        assert_eq!(frobenius_norm(&t(&[2, 2], &[1.0; 4])), 2.0);
    }

    #[test]
    fn axpy_examples() {
        let y = t(&[2], &[3.0, 4.0]);
        let x = t(&[2], &[1.0, 2.0]);
        assert_eq!(axpy(0.0, &x, &y).unwrap(), y);
        assert_eq!(axpy(1.0, &x, &y).unwrap().data(), &[4.0, 6.0]);
        assert_eq!(axpy(-1.0, &y, &y).unwrap(), Tensor::zeros(&[2]).unwrap());
    }

    #[test]
    fn axpy_shape_mismatch() {
        let x = t(&[2], &[1.0, 2.0]);
        let y = t(&[1, 2], &[1.0, 2.0]);
        assert!(matches!(
            axpy(1.0, &x, &y),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn hadamard_examples() {
        let x = t(&[2, 2], &[1.5, -2.0, 0.25, 7.0]);
        let ones = Tensor::ones(&[2, 2]).unwrap();
        let zeros = Tensor::zeros(&[2, 2]).unwrap();
        assert_eq!(elementwise_mul(&x, &ones).unwrap(), x);
        assert_eq!(elementwise_mul(&x, &zeros).unwrap(), zeros);
        let p = elementwise_mul(&t(&[2], &[2.0, 3.0]), &t(&[2], &[4.0, 5.0])).unwrap();
        assert_eq!(p.data(), &[8.0, 15.0]);
        assert!(elementwise_mul(&x, &Tensor::ones(&[4]).unwrap()).is_err());
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(Tensor::zeros(&[]).is_err());
        assert!(Tensor::zeros(&[1, 1, 1, 1, 1]).is_err());
        assert!(Tensor::zeros(&[2, 0]).is_err());
        assert!(Tensor::from_vec(&[2], vec![1.0]).is_err());
        assert!(Tensor::from_vec(&[1], vec![f64::NAN]).is_err());
        let big = t(&[1], &[f64::MAX]);
        assert_eq!(axpy(2.0, &big, &big), Err(Error::NonFinite("axpy result")));
    }

    #[test]
    fn count_nonzero_counts_exact_zeros() {
        assert_eq!(t(&[4], &[0.0, -0.0, 1e-300, 2.0]).count_nonzero(), 2);
    }
}
