//! Flat parameter vectors with a named-segment manifest.
//!
//! A `ParamVector` is one contiguous `Vec<f64>`; the `Manifest` records which
//! slice belongs to which network segment ("layer3.weight", shape 64 x 10).
//! Two vectors may be combined only when their manifests describe the same
//! layout.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;

/// One named slice of the flat vector. `rows * cols` entries starting at
/// `offset`; vectors (biases) use `cols == 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Segment layout shared by every vector of one network. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Manifest {
    segments: Arc<Vec<Segment>>,
    total: usize,
}

impl Manifest {
    /// Segments must tile `0..total` contiguously in order.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let mut expected = 0usize;
        for seg in &segments {
            if seg.offset != expected {
                return Err(Error::Structure(format!(
                    "segment {} starts at {} but previous segments end at {}",
                    seg.name, seg.offset, expected
                )));
            }
            if seg.len() == 0 {
                return Err(Error::Structure(format!("segment {} is empty", seg.name)));
            }
            expected += seg.len();
        }
        if expected == 0 {
            return Err(Error::Structure("manifest has no parameters".into()));
        }
        Ok(Manifest {
            segments: Arc::new(segments),
            total: expected,
        })
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Layout equality. Pointer equality short-circuits the common case of
    /// vectors built from the same manifest clone.
    pub fn same_layout(&self, other: &Manifest) -> bool {
        Arc::ptr_eq(&self.segments, &other.segments) || *self.segments == *other.segments
    }

    pub(crate) fn check_same(&self, other: &Manifest, what: &str) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::ManifestMismatch(what.to_string()))
        }
    }
}

/// Flat `f64` parameter vector plus its layout.
#[derive(Debug, Clone)]
pub struct ParamVector {
    manifest: Manifest,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(manifest: Manifest) -> Self {
        let n = manifest.len();
        ParamVector {
            manifest,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(manifest: Manifest, values: Vec<f64>) -> Result<Self> {
        if values.len() != manifest.len() {
            return Err(Error::Structure(format!(
                "value count {} does not match manifest length {}",
                values.len(),
                manifest.len()
            )));
        }
        Ok(ParamVector { manifest, values })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
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

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        let seg = self.manifest.segment(name)?;
        Some(&self.values[seg.offset..seg.offset + seg.len()])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let seg = self.manifest.segment(name)?.clone();
        Some(&mut self.values[seg.offset..seg.offset + seg.len()])
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        self.manifest.check_same(&other.manifest, "dot")?;
        Ok(linalg::dot(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.values)
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.manifest.check_same(&other.manifest, "sub")?;
        let values = (0..self.values.len())
            .map(|i| self.values[i] - other.values[i])
            .collect();
        Ok(ParamVector {
            manifest: self.manifest.clone(),
            values,
        })
    }

    /// Elementwise `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &ParamVector) -> Result<ParamVector> {
        self.manifest.check_same(&other.manifest, "axpy")?;
        let values = (0..self.values.len())
            .map(|i| self.values[i] + scale * other.values[i])
            .collect();
        Ok(ParamVector {
            manifest: self.manifest.clone(),
            values,
        })
    }

    pub fn scale(&self, factor: f64) -> ParamVector {
        ParamVector {
            manifest: self.manifest.clone(),
            values: self.values.iter().map(|v| factor * v).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
