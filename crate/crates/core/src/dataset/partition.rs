//! The 61-class partition of the velocity-increment plane.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::{Error, Result};

pub const CLASS_COUNT: usize = 61;
const SECTORS: usize = 12;
const RINGS: usize = 5;
const SECTOR_WIDTH: f64 = 2.0 * PI / SECTORS as f64;

/// A centre disc plus five rings of twelve 30° sectors. Sector 0 starts at
/// angle -π; ring boundaries are half-open on the outside, and anything
/// beyond the last boundary belongs to the outer ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityPartition {
    center_radius: f64,
    ring_boundaries: [f64; RINGS],
    centroids: Vec<Vec2>,
}

impl Default for VelocityPartition {
    /// Geometric ring spacing for a 3.5 m/s agent; increments reach 7 m/s.
    fn default() -> Self {
        VelocityPartition::new(0.35, [0.9, 1.8, 3.2, 5.0, 7.0]).expect("valid default partition")
    }
}

impl VelocityPartition {
    pub fn new(center_radius: f64, ring_boundaries: [f64; RINGS]) -> Result<Self> {
        let mut previous = center_radius;
        if center_radius <= 0.0 {
            return Err(Error::InvalidParameter(
                "center radius must be positive".into(),
            ));
        }
        for &b in &ring_boundaries {
            if !(b > previous) {
                return Err(Error::InvalidParameter(
                    "ring boundaries must ascend from the center radius".into(),
                ));
            }
            previous = b;
        }
        let mut centroids = Vec::with_capacity(CLASS_COUNT);
        centroids.push(Vec2::ZERO);
        for ring in 0..RINGS {
            let inner = if ring == 0 {
                center_radius
            } else {
                ring_boundaries[ring - 1]
            };
            let outer = ring_boundaries[ring];
            // Area centroid of an annular sector.
            let half = SECTOR_WIDTH / 2.0;
            let radial = 2.0 / 3.0 * (outer.powi(3) - inner.powi(3))
                / (outer.powi(2) - inner.powi(2))
                * half.sin()
                / half;
            for sector in 0..SECTORS {
                centroids.push(Vec2::from_angle(sector_mid_angle(sector)) * radial);
            }
        }
        Ok(VelocityPartition {
            center_radius,
            ring_boundaries,
            centroids,
        })
    }

    pub fn class_count(&self) -> usize {
        CLASS_COUNT
    }

    pub fn center_radius(&self) -> f64 {
        self.center_radius
    }

    pub fn ring_boundaries(&self) -> &[f64; RINGS] {
        &self.ring_boundaries
    }

    pub fn centroids(&self) -> &[Vec2] {
        &self.centroids
    }

    pub fn centroid(&self, class: usize) -> Vec2 {
        self.centroids[class]
    }

    /// Class of a velocity increment.
    pub fn label(&self, dv: Vec2) -> usize {
        let speed = dv.length();
        if speed < self.center_radius {
            return 0;
        }
        let ring = self
            .ring_boundaries
            .iter()
            .position(|&b| speed < b)
            .unwrap_or(RINGS - 1);
        let shifted = (dv.angle() + PI).rem_euclid(2.0 * PI);
        let sector = ((shifted / SECTOR_WIDTH).floor() as usize).min(SECTORS - 1);
        1 + ring * SECTORS + sector
    }

    /// Radial and angular bounds of a class region: (inner, outer, start
    /// angle, end angle). The centre cell spans the full circle.
    pub fn bounds(&self, class: usize) -> (f64, f64, f64, f64) {
        if class == 0 {
            return (0.0, self.center_radius, -PI, PI);
        }
        let ring = (class - 1) / SECTORS;
        let sector = (class - 1) % SECTORS;
        let inner = if ring == 0 {
            self.center_radius
        } else {
            self.ring_boundaries[ring - 1]
        };
        let start = -PI + sector as f64 * SECTOR_WIDTH;
        (
            inner,
            self.ring_boundaries[ring],
            start,
            start + SECTOR_WIDTH,
        )
    }

    /// Uniform sample from a class region (area-uniform).
    pub fn sample<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> Vec2 {
        let (inner, outer, start, end) = self.bounds(class);
        let u: f64 = rng.random();
        let r = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
        let angle = start + rng.random::<f64>() * (end - start);
        Vec2::from_angle(angle) * r
    }
}

/// Class of `dv` under the reflection y → -y.
pub fn mirror_class(class: usize) -> usize {
    if class == 0 {
        return 0;
    }
    let ring = (class - 1) / SECTORS;
    let sector = (class - 1) % SECTORS;
    1 + ring * SECTORS + (SECTORS - 1 - sector)
}

fn sector_mid_angle(sector: usize) -> f64 {
    -PI + (sector as f64 + 0.5) * SECTOR_WIDTH
}

/// Class of a velocity increment under `partition`.
pub fn label_velocity(dv: Vec2, partition: &VelocityPartition) -> usize {
    partition.label(dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn center_cell() {
        assert_eq!(label_velocity(Vec2::ZERO, &VelocityPartition::default()), 0);
    }

    #[test]
    fn centroids_label_themselves() {
        let p = VelocityPartition::default();
        assert_eq!(p.centroids().len(), CLASS_COUNT);
        for c in 0..CLASS_COUNT {
            assert_eq!(p.label(p.centroid(c)), c);
        }
        assert_eq!(p.label(p.centroid(17)), 17);
    }

    #[test]
    fn far_increments_clamp_to_outer_ring() {
        let p = VelocityPartition::default();
        let dv = Vec2::new(100.0, 0.0);
        let class = p.label(dv);
        assert_eq!((class - 1) / SECTORS, RINGS - 1);
        assert_eq!(class, p.label(Vec2::new(6.0, 0.0)));
    }

    #[test]
    fn samples_stay_in_region() {
        let p = VelocityPartition::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for c in 0..CLASS_COUNT {
            for _ in 0..50 {
                let s = p.sample(c, &mut rng);
                assert_eq!(p.label(s), c, "class {c} sample {s}");
            }
        }
    }

    #[test]
    fn mirror_map_is_an_involution() {
        for c in 0..CLASS_COUNT {
            assert_eq!(mirror_class(mirror_class(c)), c);
        }
    }

    #[test]
    fn rejects_unordered_boundaries() {
        assert!(VelocityPartition::new(1.0, [0.9, 1.8, 3.2, 5.0, 7.0]).is_err());
    }
}
