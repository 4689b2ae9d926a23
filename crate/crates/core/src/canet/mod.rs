//! The two-branch classifier mapping an observation and a preferred
//! velocity to a distribution over velocity classes.
//!
//! The main branch is a stack of dense ReLU layers with dropout over the
//! 1080 observation features; the auxiliary branch lifts the two preferred
//! velocity features to 256 ReLU units. Their outputs are concatenated and
//! fed to a softmax head. Everything is generic over the float type so the
//! gradient check can run in double precision while bulk training uses
//! single precision.

mod checkpoint;
mod folds;
mod real;
mod train;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::dataset::{Standardizer, CLASS_COUNT, INPUT_DIM};
use crate::sensing::OBSERVATION_DIM;
use crate::{Error, Result};

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION,
};
pub use folds::{stratified_folds, stratified_group_folds};
pub use real::Real;
pub use train::{
    evaluate, frames_to_matrix, train, train_matrices, EpochRecord, History, TrainConfig,
};

/// Layer widths of the network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Main branch widths, input first.
    pub main: Vec<usize>,
    pub aux_in: usize,
    pub aux_width: usize,
    pub classes: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            main: vec![OBSERVATION_DIM, 1024, 1024, 512, 256],
            aux_in: INPUT_DIM - OBSERVATION_DIM,
            aux_width: 256,
            classes: CLASS_COUNT,
        }
    }
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        self.main[0] + self.aux_in
    }

    pub fn validate(&self) -> Result<()> {
        if self.main.len() < 2
            || self.main.contains(&0)
            || self.aux_in == 0
            || self.aux_width == 0
            || self.classes < 2
        {
            return Err(Error::InvalidParameter(format!(
                "invalid architecture {self:?}"
            )));
        }
        Ok(())
    }
}

/// Dense layer `y = x·Wᵀ + b` with `W` stored as outputs × inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// He-uniform weights, zero biases.
    pub fn he_uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        Dense {
            weights: Array2::from_shape_simple_fn((outputs, inputs), || {
                T::from_f64(dist.sample(rng))
            }),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut y = x.dot(&self.weights.t());
        y += &self.bias;
        y
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.bias.iter())
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Cache<T> {
    /// Input to each main layer, then the main branch output.
    main_inputs: Vec<Array2<T>>,
    /// Per main layer: ReLU output before dropout.
    main_relu: Vec<Array2<T>>,
    /// Per main layer: scaled keep mask (train mode only).
    masks: Vec<Option<Array2<T>>>,
    aux_input: Array2<T>,
    aux_out: Array2<T>,
    concat: Array2<T>,
    logits: Array2<T>,
    pub probabilities: Array2<T>,
}

/// The classifier with its bundled input standardizer.
#[derive(Clone, Debug, PartialEq)]
pub struct CaNet<T> {
    pub architecture: Architecture,
    pub main: Vec<Dense<T>>,
    pub aux: Dense<T>,
    pub head: Dense<T>,
    pub dropout: f64,
    pub standardizer: Standardizer,
}

/// Gradients share the model's layout.
pub type Gradients<T> = Vec<Dense<T>>;

fn relu_in_place<T: Real>(a: &mut Array2<T>) {
    a.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
}

fn softmax_rows<T: Real>(logits: &Array2<T>) -> Array2<T> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

impl<T: Real> CaNet<T> {
    /// He-uniform initialised network with the default architecture and an
    /// identity standardizer.
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::with_architecture(Architecture::default(), rng)
            .expect("default architecture is valid")
    }

    pub fn with_architecture<R: Rng + ?Sized>(
        architecture: Architecture,
        rng: &mut R,
    ) -> Result<Self> {
        architecture.validate()?;
        let main = architecture
            .main
            .windows(2)
            .map(|w| Dense::he_uniform(w[0], w[1], rng))
            .collect();
        let aux = Dense::he_uniform(architecture.aux_in, architecture.aux_width, rng);
        let head = Dense::he_uniform(
            architecture.main.last().copied().unwrap_or(0) + architecture.aux_width,
            architecture.classes,
            rng,
        );
        Ok(CaNet {
            standardizer: Standardizer::identity(architecture.input_dim()),
            architecture,
            main,
            aux,
            head,
            dropout: 0.2,
        })
    }

    /// Every parameter zero.
    pub fn zeros(architecture: Architecture) -> Result<Self> {
        architecture.validate()?;
        let main = architecture
            .main
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        Ok(CaNet {
            standardizer: Standardizer::identity(architecture.input_dim()),
            aux: Dense::zeros(architecture.aux_in, architecture.aux_width),
            head: Dense::zeros(
                architecture.main.last().copied().unwrap_or(0) + architecture.aux_width,
                architecture.classes,
            ),
            main,
            architecture,
            dropout: 0.2,
        })
    }

    pub fn with_standardizer(mut self, standardizer: Standardizer) -> Result<Self> {
        if standardizer.dim() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: standardizer.dim(),
            });
        }
        self.standardizer = standardizer;
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim()
    }

    pub fn classes(&self) -> usize {
        self.architecture.classes
    }

    /// Layers in storage order: main branch, auxiliary layer, head.
    pub fn layers(&self) -> Vec<&Dense<T>> {
        self.main.iter().chain([&self.aux, &self.head]).collect()
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Dense<T>> {
        self.main
            .iter_mut()
            .chain([&mut self.aux, &mut self.head])
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|l| l.parameter_count()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers().iter().all(|l| l.is_finite())
    }

    /// Converts to another float type.
    pub fn cast<U: Real>(&self) -> CaNet<U> {
        let conv = |l: &Dense<T>| Dense {
            weights: l.weights.mapv(|v| U::from_f64(v.as_f64())),
            bias: l.bias.mapv(|v| U::from_f64(v.as_f64())),
        };
        CaNet {
            architecture: self.architecture.clone(),
            main: self.main.iter().map(conv).collect(),
            aux: conv(&self.aux),
            head: conv(&self.head),
            dropout: self.dropout,
            standardizer: self.standardizer.clone(),
        }
    }

    /// Forward pass over a batch of standardized inputs (one per row).
    pub fn forward_batch<R: Rng + ?Sized>(
        &self,
        x: ArrayView2<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Cache<T>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let split = self.architecture.main[0];
        let keep = 1.0 - self.dropout;
        let scale = T::from_f64(1.0 / keep);

        let mut main_inputs = Vec::with_capacity(self.main.len() + 1);
        let mut main_relu = Vec::with_capacity(self.main.len());
        let mut masks = Vec::with_capacity(self.main.len());
        let mut a = x.slice(s![.., ..split]).to_owned();
        for layer in &self.main {
            let mut h = layer.forward(a.view());
            relu_in_place(&mut h);
            let (out, mask) = if mode == Mode::Train && self.dropout > 0.0 {
                let mask = Array2::from_shape_simple_fn(h.raw_dim(), || {
                    if rng.random::<f64>() < keep {
                        scale
                    } else {
                        T::zero()
                    }
                });
                (&h * &mask, Some(mask))
            } else {
                (h.clone(), None)
            };
            main_inputs.push(a);
            main_relu.push(h);
            masks.push(mask);
            a = out;
        }
        let aux_input = x.slice(s![.., split..]).to_owned();
        let mut aux_out = self.aux.forward(aux_input.view());
        relu_in_place(&mut aux_out);
        let concat =
            ndarray::concatenate(Axis(1), &[a.view(), aux_out.view()]).expect("same batch size");
        main_inputs.push(a);
        let logits = self.head.forward(concat.view());
        let probabilities = softmax_rows(&logits);
        Ok(Cache {
            main_inputs,
            main_relu,
            masks,
            aux_input,
            aux_out,
            concat,
            logits,
            probabilities,
        })
    }

    /// Class probabilities for one standardized input.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &[T],
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Vec<T>, Cache<T>)> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("one row");
        let cache = self.forward_batch(x, mode, rng)?;
        Ok((cache.probabilities.row(0).to_vec(), cache))
    }

    /// Class probabilities for a raw (unstandardized) input, eval mode.
    pub fn predict(&self, raw_input: &[f64]) -> Result<Vec<f64>> {
        let standardized = self.standardizer.apply(raw_input)?;
        let x: Vec<T> = standardized.into_iter().map(T::from_f64).collect();
        // Eval mode draws nothing from the generator.
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let (p, _) = self.forward(&x, Mode::Eval, &mut rng)?;
        Ok(p.into_iter().map(|v| v.as_f64()).collect())
    }

    /// Mean cross-entropy of a forward pass against `labels`.
    pub fn loss(&self, cache: &Cache<T>, labels: &[usize]) -> f64 {
        let mut total = 0.0;
        for (row, &y) in cache.logits.rows().into_iter().zip(labels) {
            let max = row
                .iter()
                .fold(T::neg_infinity(), |m, &v| m.max(v))
                .as_f64();
            let lse = max
                + row
                    .iter()
                    .map(|&v| (v.as_f64() - max).exp())
                    .sum::<f64>()
                    .ln();
            total += lse - row[y].as_f64();
        }
        total / labels.len() as f64
    }

    /// Gradient of the mean cross-entropy with respect to every parameter.
    pub fn backward(&self, cache: &Cache<T>, labels: &[usize]) -> Gradients<T> {
        let batch = labels.len();
        let inv = T::from_f64(1.0 / batch as f64);
        let mut d_logits = cache.probabilities.clone();
        for (mut row, &y) in d_logits.rows_mut().into_iter().zip(labels) {
            row[y] -= T::one();
            row.mapv_inplace(|v| v * inv);
        }
        let head = Dense {
            weights: d_logits.t().dot(&cache.concat),
            bias: d_logits.sum_axis(Axis(0)),
        };
        let d_concat = d_logits.dot(&self.head.weights);
        let split = *self.architecture.main.last().expect("non-empty main");

        let mut d_aux = d_concat.slice(s![.., split..]).to_owned();
        ndarray::Zip::from(&mut d_aux)
            .and(&cache.aux_out)
            .for_each(|d, &h| {
                if h <= T::zero() {
                    *d = T::zero();
                }
            });
        let aux = Dense {
            weights: d_aux.t().dot(&cache.aux_input),
            bias: d_aux.sum_axis(Axis(0)),
        };

        let mut grads: Vec<Dense<T>> = Vec::with_capacity(self.main.len() + 2);
        let mut d_a = d_concat.slice(s![.., ..split]).to_owned();
        for l in (0..self.main.len()).rev() {
            let mut dz = d_a;
            match &cache.masks[l] {
                Some(mask) => ndarray::Zip::from(&mut dz)
                    .and(mask)
                    .and(&cache.main_relu[l])
                    .for_each(|d, &m, &h| *d = if h > T::zero() { *d * m } else { T::zero() }),
                None => ndarray::Zip::from(&mut dz)
                    .and(&cache.main_relu[l])
                    .for_each(|d, &h| {
                        if h <= T::zero() {
                            *d = T::zero();
                        }
                    }),
            }
            grads.push(Dense {
                weights: dz.t().dot(&cache.main_inputs[l]),
                bias: dz.sum_axis(Axis(0)),
            });
            d_a = if l > 0 {
                dz.dot(&self.main[l].weights)
            } else {
                Array2::zeros((0, 0))
            };
        }
        grads.reverse();
        grads.push(aux);
        grads.push(head);
        grads
    }

    /// Loss and gradients for a labelled batch.
    pub fn loss_and_grad<R: Rng + ?Sized>(
        &self,
        x: ArrayView2<T>,
        labels: &[usize],
        mode: Mode,
        rng: &mut R,
    ) -> Result<(f64, Gradients<T>, Cache<T>)> {
        if x.nrows() != labels.len() {
            return Err(Error::ShapeMismatch {
                expected: x.nrows(),
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.classes()) {
            return Err(Error::InvalidParameter(format!("label {bad} out of range")));
        }
        let cache = self.forward_batch(x, mode, rng)?;
        let loss = self.loss(&cache, labels);
        let grads = self.backward(&cache, labels);
        Ok((loss, grads, cache))
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<'a, T: PartialOrd + Copy + 'a>(values: impl IntoIterator<Item = &'a T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, &v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map_or(0, |(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> Architecture {
        Architecture {
            main: vec![12, 10, 8],
            aux_in: 2,
            aux_width: 6,
            classes: 5,
        }
    }

    #[test]
    fn zero_weights_are_uniform() {
        let net = CaNet::<f64>::zeros(Architecture::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x: Vec<f64> = (0..INPUT_DIM).map(|i| (i as f64).sin()).collect();
        let (p, cache) = net.forward(&x, Mode::Eval, &mut rng).unwrap();
        for v in &p {
            assert!((v - 1.0 / 61.0).abs() < 1e-12);
        }
        assert!((net.loss(&cache, &[7]) - 61f64.ln()).abs() < 1e-12);
        assert_eq!(argmax(&p), 0);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let net = CaNet::<f32>::zeros(small()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            net.forward(&[0.0; 13], Mode::Eval, &mut rng),
            Err(Error::ShapeMismatch {
                expected: 14,
                got: 13
            })
        ));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = CaNet::<f64>::with_architecture(small(), &mut rng).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..14).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let (p, _) = net.forward(&x, Mode::Eval, &mut rng).unwrap();
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn train_mode_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = CaNet::<f32>::with_architecture(small(), &mut rng).unwrap();
        let x: Vec<f32> = (0..14).map(|i| i as f32 * 0.1).collect();
        let a = net
            .forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap()
            .0;
        let b = net
            .forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap()
            .0;
        assert_eq!(a, b);
    }

    #[test]
    fn confident_prediction_has_near_zero_loss() {
        let mut net = CaNet::<f64>::zeros(small()).unwrap();
        net.head.bias[3] = 60.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, cache) = net.forward(&[0.0; 14], Mode::Eval, &mut rng).unwrap();
        assert!(net.loss(&cache, &[3]) < 1e-20);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5, 0.1]), 1);
        assert_eq!(argmax(&[1.0; 4]), 0);
    }
}
