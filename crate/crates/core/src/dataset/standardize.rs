use serde::{Deserialize, Serialize};

use crate::sensing::OBSERVATION_DIM;
use crate::{Error, Result};

use super::Frame;

/// Observation plus preferred velocity.
pub const INPUT_DIM: usize = OBSERVATION_DIM + 2;

/// Per-feature Z-score transform fitted on training inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    /// Identity transform of the given width.
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Builds a transform from stored statistics. Non-positive or
    /// non-finite deviations are rejected.
    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::ShapeMismatch {
                expected: mean.len(),
                got: std.len(),
            });
        }
        if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(
                "standardizer statistics must be finite with std > 0".into(),
            ));
        }
        Ok(Standardizer { mean, std })
    }

    /// Population mean and deviation of each input feature. Constant
    /// features get a deviation of 1.
    pub fn fit(frames: &[Frame]) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "standardizer needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let n = frames.len() as f64;
        let mut mean = vec![0.0; INPUT_DIM];
        for frame in frames {
            for (m, x) in mean.iter_mut().zip(frame.input()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; INPUT_DIM];
        for frame in frames {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(frame.input()) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                got: input.len(),
            });
        }
        Ok(input
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn apply_in_place(&self, input: &mut [f64]) -> Result<()> {
        if input.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                got: input.len(),
            });
        }
        for (x, (m, s)) in input.iter_mut().zip(self.mean.iter().zip(&self.std)) {
            *x = (*x - m) / s;
        }
        Ok(())
    }
}
