use crate::error::{MctnError, Result};

/// One modality of one sample: a zero-padded `max_len x dim` matrix plus the
/// number of real (pre-padding) frames. Rows at or beyond `len()` are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    dim: usize,
    true_len: usize,
    max_len: usize,
    data: Vec<f64>,
}

impl FeatureSequence {
    /// Unpadded sequence from its frames.
    pub fn from_frames(frames: &[Vec<f64>]) -> Result<Self> {
        zero_pad(frames, frames.len())
    }

    pub fn zeros(len: usize, dim: usize) -> Result<Self> {
        if len == 0 || dim == 0 {
            return Err(MctnError::EmptySequence);
        }
        Ok(FeatureSequence { dim, true_len: len, max_len: len, data: vec![0.0; len * dim] })
    }

    /// True (unpadded) length.
    pub fn len(&self) -> usize {
        self.true_len
    }

    pub fn is_empty(&self) -> bool {
        self.true_len == 0
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Frame `t` of the padded matrix; zero for padding rows.
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        assert!(t < self.true_len, "padding rows are immutable");
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    /// The real frames, without padding.
    pub fn frames(&self) -> Vec<Vec<f64>> {
        (0..self.true_len).map(|t| self.frame(t).to_vec()).collect()
    }

    pub fn padded_data(&self) -> &[f64] {
        &self.data
    }

    /// Re-pads to `max_len` rows.
    pub fn padded(&self, max_len: usize) -> Result<Self> {
        zero_pad(&self.frames(), max_len)
    }

    /// Drops padding rows.
    pub fn truncated(&self) -> Self {
        let mut out = self.clone();
        out.data.truncate(self.true_len * self.dim);
        out.max_len = self.true_len;
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Concatenates sequences of equal true length along the feature axis.
    pub fn concat_features(parts: &[&FeatureSequence]) -> Result<Self> {
        let first = parts.first().ok_or(MctnError::EmptySequence)?;
        let len = first.true_len;
        if let Some(bad) = parts.iter().find(|p| p.true_len != len) {
            return Err(MctnError::Dimension {
                context: "concatenated sequence length".into(),
                expected: len,
                actual: bad.true_len,
            });
        }
        let frames: Vec<Vec<f64>> = (0..len)
            .map(|t| parts.iter().flat_map(|p| p.frame(t).iter().copied()).collect())
            .collect();
        let max_len = parts.iter().map(|p| p.max_len).max().unwrap_or(len);
        zero_pad(&frames, max_len)
    }
}

/// Pads an `L x d` sequence with zero rows up to `max_len`.
pub fn zero_pad(frames: &[Vec<f64>], max_len: usize) -> Result<FeatureSequence> {
    let len = frames.len();
    if len == 0 {
        return Err(MctnError::EmptySequence);
    }
    if len > max_len {
        return Err(MctnError::TooLong { len, max_len });
    }
    let dim = frames[0].len();
    if dim == 0 {
        return Err(MctnError::EmptySequence);
    }
    let mut data = Vec::with_capacity(max_len * dim);
    for (t, f) in frames.iter().enumerate() {
        if f.len() != dim {
            return Err(MctnError::Dimension {
                context: format!("frame {t}"),
                expected: dim,
                actual: f.len(),
            });
        }
        data.extend_from_slice(f);
    }
    data.resize(max_len * dim, 0.0);
    Ok(FeatureSequence { dim, true_len: len, max_len, data })
}
