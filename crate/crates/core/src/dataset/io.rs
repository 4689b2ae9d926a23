//! Binary dataset files (little-endian).
//!
//! ```text
//! "MACA" | version u16 | frame count u64 | observation dim u32 | class count u16
//! per frame: observation f32 × dim | pref f32 × 2 | expert f32 × 2 | label u16
//!            | protect radius f32 | time horizon f32 | neighbour count u16 | noise sigma f32
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::sensing::OBSERVATION_DIM;
use crate::{Error, Result};

use super::{Frame, FrameMeta, CLASS_COUNT};

pub const DATASET_MAGIC: &[u8; 4] = b"MACA";
pub const DATASET_VERSION: u16 = 1;

pub fn write_dataset<W: Write>(mut w: W, frames: &[Frame]) -> Result<()> {
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&(frames.len() as u64).to_le_bytes())?;
    w.write_all(&(OBSERVATION_DIM as u32).to_le_bytes())?;
    w.write_all(&(CLASS_COUNT as u16).to_le_bytes())?;
    let mut buf = Vec::with_capacity(4 * (OBSERVATION_DIM + 8) + 8);
    for frame in frames {
        if frame.observation.len() != OBSERVATION_DIM {
            return Err(Error::ShapeMismatch {
                expected: OBSERVATION_DIM,
                got: frame.observation.len(),
            });
        }
        buf.clear();
        for v in frame
            .observation
            .iter()
            .chain(&frame.pref_velocity)
            .chain(&frame.expert_velocity)
        {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&frame.label.to_le_bytes());
        buf.extend_from_slice(&frame.meta.protect_radius.to_le_bytes());
        buf.extend_from_slice(&frame.meta.time_horizon.to_le_bytes());
        buf.extend_from_slice(&frame.meta.neighbor_count.to_le_bytes());
        buf.extend_from_slice(&frame.meta.noise_sigma.to_le_bytes());
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("dataset file is truncated".into())
        } else {
            Error::Io(e)
        }
    })?;
    Ok(b)
}

fn f32_at(b: &[u8], i: usize) -> f32 {
    f32::from_le_bytes(b[i..i + 4].try_into().expect("4 bytes"))
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes(b[i..i + 2].try_into().expect("2 bytes"))
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<Vec<Frame>> {
    if &take::<4, _>(&mut r)? != DATASET_MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    let version = u16::from_le_bytes(take(&mut r)?);
    if version != DATASET_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset version {version}"
        )));
    }
    let count = u64::from_le_bytes(take(&mut r)?);
    let dim = u32::from_le_bytes(take(&mut r)?) as usize;
    let classes = u16::from_le_bytes(take(&mut r)?) as usize;
    if dim != OBSERVATION_DIM || classes != CLASS_COUNT {
        return Err(Error::Format(format!(
            "dataset has observation dim {dim} and {classes} classes, expected {OBSERVATION_DIM} and {CLASS_COUNT}"
        )));
    }
    let record = 4 * dim + 16 + 2 + 8 + 2 + 4;
    let mut buf = vec![0u8; record];
    let mut frames = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format("dataset file is truncated".into())
            } else {
                Error::Io(e)
            }
        })?;
        let observation = (0..dim).map(|i| f32_at(&buf, 4 * i)).collect();
        let o = 4 * dim;
        let label = u16_at(&buf, o + 16);
        if label as usize >= CLASS_COUNT {
            return Err(Error::Format(format!("label {label} out of range")));
        }
        frames.push(Frame {
            observation,
            pref_velocity: [f32_at(&buf, o), f32_at(&buf, o + 4)],
            expert_velocity: [f32_at(&buf, o + 8), f32_at(&buf, o + 12)],
            label,
            meta: FrameMeta {
                protect_radius: f32_at(&buf, o + 18),
                time_horizon: f32_at(&buf, o + 22),
                neighbor_count: u16_at(&buf, o + 26),
                noise_sigma: f32_at(&buf, o + 28),
            },
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after last frame".into()));
    }
    Ok(frames)
}

pub fn save_dataset(path: &Path, frames: &[Frame]) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), frames)
}

pub fn load_dataset(path: &Path) -> Result<Vec<Frame>> {
    read_dataset(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(seed: u16) -> Frame {
        Frame {
            observation: (0..OBSERVATION_DIM)
                .map(|i| i as f32 * 0.5 - seed as f32)
                .collect(),
            pref_velocity: [1.5, -0.25],
            expert_velocity: [0.1, 0.2],
            label: seed % 61,
            meta: FrameMeta {
                protect_radius: 0.5,
                time_horizon: 2.0,
                neighbor_count: 7,
                noise_sigma: 0.03,
            },
        }
    }

    #[test]
    fn header_layout() {
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &[frame(1), frame(2)]).unwrap();
        assert_eq!(&bytes[..4], b"MACA");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u64::from_le_bytes(bytes[6..14].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[14..18].try_into().unwrap()), 1080);
        assert_eq!(u16::from_le_bytes([bytes[18], bytes[19]]), 61);
        assert_eq!(bytes.len(), 20 + 2 * (4 * 1080 + 32));
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let frames: Vec<Frame> = (0..5).map(frame).collect();
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &frames).unwrap();
        let back = read_dataset(bytes.as_slice()).unwrap();
        assert_eq!(back, frames);
        let mut again = Vec::new();
        write_dataset(&mut again, &back).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &[frame(1)]).unwrap();
        assert!(matches!(
            read_dataset(&bytes[..bytes.len() - 3]),
            Err(Error::Format(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_dataset(bad.as_slice()),
            Err(Error::Format(_))
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            read_dataset(long.as_slice()),
            Err(Error::Format(_))
        ));
    }
}
