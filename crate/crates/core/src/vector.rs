//! Data vectors and image layout tags.

use std::fmt;

use crate::error::{Error, Result};

/// Image layout of a flat vector: channel-major, then rows, then columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "shape {channels}x{height}x{width} has a zero extent"
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
        })
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// A point in data space, optionally tagged with an image layout and with the
/// dataset index it was drawn from.
///
/// The index is only consulted by embedding tables computed outside the
/// engine, which can look a vector up but cannot evaluate arbitrary inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector {
    values: Vec<f64>,
    shape: Option<Shape>,
    key: Option<usize>,
}

impl DataVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("data vector"));
        }
        Ok(Self {
            values,
            shape: None,
            key: None,
        })
    }

    pub fn with_shape(values: Vec<f64>, shape: Shape) -> Result<Self> {
        if shape.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                actual: values.len(),
            });
        }
        let mut v = Self::new(values)?;
        v.shape = Some(shape);
        Ok(v)
    }

    /// Attaches the dataset index this vector corresponds to.
    pub fn keyed(mut self, key: usize) -> Self {
        self.key = Some(key);
        self
    }

    /// Replaces the values, keeping the shape tag and key.
    pub(crate) fn replace_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            shape: self.shape,
            key: self.key,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> Option<Shape> {
        self.shape
    }

    pub fn key(&self) -> Option<usize> {
        self.key
    }

    /// Returns a copy scaled to unit Euclidean norm.
    pub fn l2_normalized(&self) -> Result<Self> {
        let mut values = self.values.clone();
        normalize_in_place(&mut values)?;
        Ok(self.replace_values(values))
    }
}

pub(crate) fn normalize_in_place(values: &mut [f64]) -> Result<()> {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Degenerate(
            "cannot normalize a zero or non-finite vector".into(),
        ));
    }
    values.iter_mut().for_each(|v| *v /= norm);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_length() {
        let shape = Shape::new(1, 2, 2).unwrap();
        assert!(DataVector::with_shape(vec![0.0; 4], shape).is_ok());
        assert!(matches!(
            DataVector::with_shape(vec![0.0; 5], shape),
            Err(Error::DimensionMismatch {
                expected: 4,
                actual: 5
            })
        ));
    }

    #[test]
    fn empty_vector_rejected() {
        assert!(DataVector::new(vec![]).is_err());
        assert!(Shape::new(0, 3, 3).is_err());
    }

    #[test]
    fn normalization() {
        let v = DataVector::new(vec![3.0, 4.0]).unwrap().keyed(7);
        let n = v.l2_normalized().unwrap();
        assert_eq!(n.values(), &[0.6, 0.8]);
        assert_eq!(n.key(), Some(7));
        assert!(DataVector::new(vec![0.0, 0.0]).unwrap().l2_normalized().is_err());
    }
}
