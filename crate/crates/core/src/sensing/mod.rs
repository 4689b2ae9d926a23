//! Simulated lidar and scan-to-scan velocity estimation.

mod cpd;
mod lidar;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::{Error, Result};

pub use cpd::{estimate_flow, estimate_flow_ego, register, CpdConfig, Registration};
pub use lidar::{perturb_scan, raycast_scan};

/// Beams per scan, one per degree.
pub const BEAMS: usize = 360;
/// Lidar range, m.
pub const MAX_RANGE: f64 = 4.0;
/// Flattened observation length: ranges then interleaved flow components.
pub const OBSERVATION_DIM: usize = BEAMS * 3;

/// Direction of beam `i` in the scan's own frame.
#[inline]
pub fn beam_direction(i: usize) -> Vec2 {
    Vec2::from_angle((i as f64).to_radians())
}

/// One 360° range scan. Beam `i` points `i` degrees counter-clockwise from
/// the scan frame's +x axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    ranges: Vec<f64>,
    hits: Vec<bool>,
    min_range: f64,
    max_range: f64,
}

impl Scan {
    /// A scan that saw nothing.
    pub fn empty(min_range: f64, max_range: f64) -> Self {
        Scan {
            ranges: vec![max_range; BEAMS],
            hits: vec![false; BEAMS],
            min_range,
            max_range,
        }
    }

    /// Panics unless both arrays hold [`BEAMS`] entries.
    pub fn from_parts(ranges: Vec<f64>, hits: Vec<bool>, min_range: f64, max_range: f64) -> Self {
        assert_eq!(ranges.len(), BEAMS);
        assert_eq!(hits.len(), BEAMS);
        Scan {
            ranges,
            hits,
            min_range,
            max_range,
        }
    }

    /// Rebuilds a scan from stored ranges; beams at `max_range` are no-hit.
    pub fn from_ranges(ranges: Vec<f64>, min_range: f64, max_range: f64) -> Result<Self> {
        if ranges.len() != BEAMS {
            return Err(Error::ShapeMismatch {
                expected: BEAMS,
                got: ranges.len(),
            });
        }
        let hits = ranges.iter().map(|&r| r < max_range).collect();
        Ok(Scan::from_parts(ranges, hits, min_range, max_range))
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn hits(&self) -> &[bool] {
        &self.hits
    }

    pub fn min_range(&self) -> f64 {
        self.min_range
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn hit_count(&self) -> usize {
        self.hits.iter().filter(|&&h| h).count()
    }

    /// Hit beams as (beam index, point) with points relative to the scan
    /// origin.
    pub fn points(&self) -> Vec<(usize, Vec2)> {
        (0..BEAMS)
            .filter(|&i| self.hits[i])
            .map(|i| (i, beam_direction(i) * self.ranges[i]))
            .collect()
    }

    /// The scan as seen by a sensor rotated `k` whole degrees clockwise,
    /// i.e. the world rotated `k` degrees counter-clockwise.
    pub fn rotate_beams(&self, k: usize) -> Scan {
        let mut ranges = vec![0.0; BEAMS];
        let mut hits = vec![false; BEAMS];
        for i in 0..BEAMS {
            ranges[(i + k) % BEAMS] = self.ranges[i];
            hits[(i + k) % BEAMS] = self.hits[i];
        }
        Scan::from_parts(ranges, hits, self.min_range, self.max_range)
    }
}

/// Estimated velocity of every beam's return point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanFlow {
    velocities: Vec<Vec2>,
}

impl ScanFlow {
    pub fn new(velocities: Vec<Vec2>) -> Result<Self> {
        if velocities.len() != BEAMS {
            return Err(Error::ShapeMismatch {
                expected: BEAMS,
                got: velocities.len(),
            });
        }
        Ok(ScanFlow { velocities })
    }

    pub fn zeros() -> Self {
        ScanFlow {
            velocities: vec![Vec2::ZERO; BEAMS],
        }
    }

    pub fn velocities(&self) -> &[Vec2] {
        &self.velocities
    }
}

/// A scan plus its flow, the main-branch network input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub scan: Scan,
    pub flow: ScanFlow,
}

impl Observation {
    /// `[r_0 .. r_359, vx_0, vy_0, .. vx_359, vy_359]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(OBSERVATION_DIM);
        out.extend_from_slice(self.scan.ranges());
        for v in self.flow.velocities() {
            out.push(v.x);
            out.push(v.y);
        }
        out
    }

    /// Inverse of [`Observation::flatten`]; hit flags are recovered from
    /// `max_range`.
    pub fn from_flat(values: &[f64], min_range: f64, max_range: f64) -> Result<Self> {
        if values.len() != OBSERVATION_DIM {
            return Err(Error::ShapeMismatch {
                expected: OBSERVATION_DIM,
                got: values.len(),
            });
        }
        let scan = Scan::from_ranges(values[..BEAMS].to_vec(), min_range, max_range)?;
        let flow = values[BEAMS..]
            .chunks_exact(2)
            .map(|c| Vec2::new(c[0], c[1]))
            .collect();
        Ok(Observation {
            scan,
            flow: ScanFlow::new(flow)?,
        })
    }
}
