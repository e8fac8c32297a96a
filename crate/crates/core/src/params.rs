//! Flat parameter vectors with named segments.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("segment `{name}` at {start}..{end} overlaps or leaves a gap (expected start {expected})")]
    BadLayout {
        name: String,
        start: usize,
        end: usize,
        expected: usize,
    },
    #[error("parameter length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("no segment named `{0}`")]
    UnknownSegment(String),
}

/// A named contiguous slice of a [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// The model parameter vector θ, stored flat with a layout of named segments.
///
/// Segments always partition `0..values.len()` in order, without gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Vec<Segment>,
}

impl ParamVector {
    /// Builds a vector from `(name, values)` pairs laid out back to back.
    pub fn from_segments<S: Into<String>>(parts: Vec<(S, Vec<f64>)>) -> Self {
        let mut values = Vec::new();
        let mut layout = Vec::with_capacity(parts.len());
        for (name, v) in parts {
            layout.push(Segment {
                name: name.into(),
                start: values.len(),
                len: v.len(),
            });
            values.extend(v);
        }
        Self { values, layout }
    }

    /// Builds a vector from raw values and an explicit layout, validating the partition.
    pub fn with_layout(values: Vec<f64>, layout: Vec<Segment>) -> Result<Self, ParamError> {
        let mut expected = 0;
        for seg in &layout {
            if seg.start != expected {
                return Err(ParamError::BadLayout {
                    name: seg.name.clone(),
                    start: seg.start,
                    end: seg.start + seg.len,
                    expected,
                });
            }
            expected += seg.len;
        }
        if expected != values.len() {
            return Err(ParamError::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { values, layout })
    }

    pub fn empty() -> Self {
        Self {
            values: Vec::new(),
            layout: Vec::new(),
        }
    }

    /// A vector of zeros with the same layout.
    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            layout: self.layout.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &[Segment] {
        &self.layout
    }

    pub fn segment(&self, name: &str) -> Result<&[f64], ParamError> {
        self.layout
            .iter()
            .find(|s| s.name == name)
            .map(|s| &self.values[s.range()])
            .ok_or_else(|| ParamError::UnknownSegment(name.to_string()))
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, ParamError> {
        if values.len() != self.values.len() {
            return Err(ParamError::LengthMismatch {
                expected: self.values.len(),
                actual: values.len(),
            });
        }
        Ok(Self {
            values,
            layout: self.layout.clone(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_partition_the_vector() {
        let p = ParamVector::from_segments(vec![("a", vec![1.0, 2.0]), ("b", vec![]), ("c", vec![3.0])]);
        assert_eq!(p.len(), 3);
        assert_eq!(p.segment("a").unwrap(), &[1.0, 2.0]);
        assert!(p.segment("b").unwrap().is_empty());
        assert_eq!(p.segment("c").unwrap(), &[3.0]);
        let rebuilt = ParamVector::with_layout(p.values().to_vec(), p.layout().to_vec()).unwrap();
        assert_eq!(rebuilt, p);
    }

    #[test]
    fn overlapping_layout_is_rejected() {
        let layout = vec![
            Segment { name: "a".into(), start: 0, len: 2 },
            Segment { name: "b".into(), start: 1, len: 2 },
        ];
        assert!(matches!(
            ParamVector::with_layout(vec![0.0; 3], layout),
            Err(ParamError::BadLayout { .. })
        ));
    }

    #[test]
    fn short_layout_is_rejected() {
        let layout = vec![Segment { name: "a".into(), start: 0, len: 2 }];
        assert_eq!(
            ParamVector::with_layout(vec![0.0; 3], layout),
            Err(ParamError::LengthMismatch { expected: 2, actual: 3 })
        );
    }
}
