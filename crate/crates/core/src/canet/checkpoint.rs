//! Checkpoint files: a text header terminated by an `end` line, then
//! little-endian blocks. Each layer (main branch in order, auxiliary, head)
//! stores its weights row-major as outputs × inputs followed by its biases,
//! all f32; the standardizer mean and deviation follow as f64.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::dataset::Standardizer;
use crate::{Error, Result};

use super::{Architecture, CaNet, Dense, Real};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "avoidnet-checkpoint";

fn join(v: &[usize]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_checkpoint<T: Real, W: Write>(mut w: W, model: &CaNet<T>, seed: u64) -> Result<()> {
    let a = &model.architecture;
    writeln!(w, "{MAGIC} {CHECKPOINT_VERSION}")?;
    writeln!(w, "main {}", join(&a.main))?;
    writeln!(w, "aux {} {}", a.aux_in, a.aux_width)?;
    writeln!(w, "classes {}", a.classes)?;
    writeln!(w, "dropout {}", model.dropout)?;
    writeln!(w, "seed {seed}")?;
    writeln!(w, "standardizer {}", model.standardizer.dim())?;
    writeln!(w, "end")?;
    for layer in model.layers() {
        for v in layer.weights.iter().chain(layer.bias.iter()) {
            w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
    }
    for v in model
        .standardizer
        .mean()
        .iter()
        .chain(model.standardizer.std())
    {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn parse_line<'a>(line: &'a str, key: &str) -> Result<Vec<&'a str>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::Format(format!(
            "expected `{key}` line, found `{}`",
            line.trim()
        )));
    }
    Ok(parts.collect())
}

fn parse_usizes(parts: &[&str]) -> Result<Vec<usize>> {
    parts
        .iter()
        .map(|p| {
            p.parse()
                .map_err(|_| Error::Format(format!("bad integer `{p}`")))
        })
        .collect()
}

fn read_f32s<R: Read, T: Real>(r: &mut R, n: usize) -> Result<Vec<T>> {
    let mut buf = vec![0u8; 4 * n];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("checkpoint is truncated".into()))?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| T::from_f64(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
        .collect())
}

/// Reads a checkpoint; returns the model and the recorded seed.
pub fn read_checkpoint<T: Real, R: Read>(r: R) -> Result<(CaNet<T>, u64)> {
    let mut r = BufReader::new(r);
    let mut header = Vec::new();
    loop {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("checkpoint header is truncated".into()));
        }
        if line.trim() == "end" {
            break;
        }
        header.push(line);
        if header.len() > 16 {
            return Err(Error::Format("checkpoint header is too long".into()));
        }
    }
    if header.len() != 7 {
        return Err(Error::Format("checkpoint header is incomplete".into()));
    }
    let version = parse_line(&header[0], MAGIC)?;
    if version != [CHECKPOINT_VERSION.to_string().as_str()] {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version:?}"
        )));
    }
    let main = parse_usizes(&parse_line(&header[1], "main")?)?;
    let aux = parse_usizes(&parse_line(&header[2], "aux")?)?;
    let classes = parse_usizes(&parse_line(&header[3], "classes")?)?;
    let dropout: f64 = parse_line(&header[4], "dropout")?
        .first()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format("bad dropout".into()))?;
    let seed: u64 = parse_line(&header[5], "seed")?
        .first()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format("bad seed".into()))?;
    let std_dim = parse_usizes(&parse_line(&header[6], "standardizer")?)?;
    if aux.len() != 2 || classes.len() != 1 || std_dim.len() != 1 {
        return Err(Error::Format("malformed checkpoint header".into()));
    }
    let architecture = Architecture {
        main,
        aux_in: aux[0],
        aux_width: aux[1],
        classes: classes[0],
    };
    architecture.validate()?;
    if std_dim[0] != architecture.input_dim() {
        return Err(Error::Format(
            "standardizer width does not match the network".into(),
        ));
    }

    let mut model = CaNet::<T>::zeros(architecture)?;
    model.dropout = dropout;
    for layer in model.layers_mut() {
        let (rows, cols) = layer.weights.dim();
        let weights = read_f32s::<_, T>(&mut r, rows * cols)?;
        let bias = read_f32s::<_, T>(&mut r, rows)?;
        *layer = Dense {
            weights: Array2::from_shape_vec((rows, cols), weights).expect("sized block"),
            bias: Array1::from_vec(bias),
        };
    }
    let dim = std_dim[0];
    let mut buf = vec![0u8; 16 * dim];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("checkpoint is truncated".into()))?;
    let values: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    model.standardizer = Standardizer::from_parts(values[..dim].to_vec(), values[dim..].to_vec())?;
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok((model, seed))
}

pub fn save_checkpoint<T: Real>(path: &Path, model: &CaNet<T>, seed: u64) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), model, seed)
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<(CaNet<T>, u64)> {
    read_checkpoint(File::open(path)?)
}
