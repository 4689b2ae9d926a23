//! Expert data: generation, cleansing, augmentation, standardization,
//! velocity classes and the on-disk format.
//!
//! Frames are stored in single precision from the moment they are created,
//! so labels computed in memory always agree with labels recomputed from a
//! file.

mod augment;
mod generate;
mod io;
mod kmeans;
mod partition;
mod standardize;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::sensing::{BEAMS, OBSERVATION_DIM};

pub use augment::{augment, cleanse, cleanse_one, mirror_frame, AugmentConfig};
pub use generate::{generate_frame, generate_frames, GeneratedFrame, GenerationConfig, Scene};
pub use io::{
    load_dataset, read_dataset, save_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION,
};
pub use kmeans::{kmeans, KMeans};
pub use partition::{label_velocity, mirror_class, VelocityPartition, CLASS_COUNT};
pub use standardize::{Standardizer, INPUT_DIM};

/// Generation parameters recorded with each frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub protect_radius: f32,
    pub time_horizon: f32,
    pub neighbor_count: u16,
    pub noise_sigma: f32,
}

/// One supervised example in the recording agent's local frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Flattened observation, see [`crate::sensing::Observation::flatten`].
    pub observation: Vec<f32>,
    /// Preferred velocity minus current velocity, local frame.
    pub pref_velocity: [f32; 2],
    /// Expert velocity minus current velocity, local frame.
    pub expert_velocity: [f32; 2],
    pub label: u16,
    pub meta: FrameMeta,
}

impl Frame {
    pub fn pref_velocity(&self) -> Vec2 {
        Vec2::new(self.pref_velocity[0] as f64, self.pref_velocity[1] as f64)
    }

    pub fn expert_velocity(&self) -> Vec2 {
        Vec2::new(
            self.expert_velocity[0] as f64,
            self.expert_velocity[1] as f64,
        )
    }

    pub fn ranges(&self) -> &[f32] {
        &self.observation[..BEAMS]
    }

    /// Network input: observation followed by the preferred velocity.
    pub fn input(&self) -> Vec<f64> {
        let mut input = Vec::with_capacity(OBSERVATION_DIM + 2);
        input.extend(self.observation.iter().map(|&v| v as f64));
        input.push(self.pref_velocity[0] as f64);
        input.push(self.pref_velocity[1] as f64);
        input
    }

    /// True when the stored label matches the expert velocity's class.
    pub fn is_consistent(&self, partition: &VelocityPartition) -> bool {
        self.observation.len() == OBSERVATION_DIM
            && (self.label as usize) < CLASS_COUNT
            && partition.label(self.expert_velocity()) == self.label as usize
    }
}

pub(crate) fn to_f32_pair(v: Vec2) -> [f32; 2] {
    [v.x as f32, v.y as f32]
}
