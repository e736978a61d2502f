use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Method;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense layer `out = weight · x + bias`, `weight` row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weight: vec![T::zero(); inputs * outputs], bias: vec![T::zero(); outputs] }
    }

    fn random(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut l = Self::zeros(inputs, outputs);
        fill_uniform(&mut l.weight, inputs, rng);
        l
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.inputs);
        (0..self.outputs)
            .map(|o| {
                let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                row.iter().zip(x).fold(self.bias[o], |acc, (&w, &v)| acc + w * v)
            })
            .collect()
    }
}

/// One attention branch: `a_i = softmax_i(w · tanh(V h_i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead<T> {
    /// `hidden × dim`, row-major.
    pub v: Vec<T>,
    pub w: Vec<T>,
    pub hidden: usize,
    pub dim: usize,
}

impl<T: Real> AttentionHead<T> {
    pub fn zeros(hidden: usize, dim: usize) -> Self {
        Self { v: vec![T::zero(); hidden * dim], w: vec![T::zero(); hidden], hidden, dim }
    }

    fn random(hidden: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut h = Self::zeros(hidden, dim);
        fill_uniform(&mut h.v, dim, rng);
        fill_uniform(&mut h.w, hidden, rng);
        h
    }

    /// `tanh(V h)`.
    pub fn hidden_activation(&self, h: &[T]) -> Vec<T> {
        (0..self.hidden)
            .map(|m| {
                let row = &self.v[m * self.dim..(m + 1) * self.dim];
                row.iter().zip(h).fold(T::zero(), |acc, (&a, &b)| acc + a * b).tanh()
            })
            .collect()
    }

    /// Attention logit `w · tanh(V h)`.
    pub fn logit(&self, h: &[T]) -> T {
        self.hidden_activation(h).iter().zip(&self.w).fold(T::zero(), |acc, (&t, &w)| acc + t * w)
    }
}

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
fn fill_uniform<T: Real>(values: &mut [T], fan_in: usize, rng: &mut ChaCha8Rng) {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    for v in values {
        *v = T::of(rng.random_range(-bound..=bound));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Attention hidden size `M`.
    pub hidden: usize,
    /// Parallel attention heads whose pooled vectors are concatenated.
    pub heads: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hidden: 32, heads: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilModel<T> {
    pub method: Method,
    pub classes: Vec<String>,
    pub dim: usize,
    pub config: ModelConfig,
    pub seed: u64,
    /// Empty unless `method` is attention pooling.
    pub attention: Vec<AttentionHead<T>>,
    /// Classifier on the pooled vector (`heads · dim` inputs for attention).
    pub head: Linear<T>,
    /// Per-patch classifier for the instance methods.
    pub patch_head: Linear<T>,
}

impl<T: Real> MilModel<T> {
    pub fn new(method: Method, classes: Vec<String>, dim: usize, config: ModelConfig, seed: u64) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::InvalidArgument("need at least two classes".into()));
        }
        if dim == 0 || config.hidden == 0 || config.heads == 0 {
            return Err(Error::InvalidArgument("embedding dim, hidden size and head count must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = classes.len();
        let attention = if method == Method::Abmilp {
            (0..config.heads).map(|_| AttentionHead::random(config.hidden, dim, &mut rng)).collect()
        } else {
            Vec::new()
        };
        let pooled = if method == Method::Abmilp { config.heads * dim } else { dim };
        let head = Linear::random(pooled, k, &mut rng);
        let patch_head = Linear::random(dim, k, &mut rng);
        Ok(Self { method, classes, dim, config, seed, attention, head, patch_head })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Trainable parameters for this model's method, flattened: attention
    /// heads (`V` then `w`), then the classifier head (weight then bias), or
    /// the patch head for instance methods.
    pub fn flatten_params(&self) -> Vec<T> {
        let mut out = Vec::new();
        for h in &self.attention {
            out.extend_from_slice(&h.v);
            out.extend_from_slice(&h.w);
        }
        let lin = if self.method.is_instance() { &self.patch_head } else { &self.head };
        out.extend_from_slice(&lin.weight);
        out.extend_from_slice(&lin.bias);
        out
    }

    pub fn set_params(&mut self, flat: &[T]) {
        let mut it = flat.iter().copied();
        let mut fill = |dst: &mut [T]| dst.iter_mut().for_each(|d| *d = it.next().expect("parameter vector too short"));
        for h in &mut self.attention {
            fill(&mut h.v);
            fill(&mut h.w);
        }
        let lin = if self.method.is_instance() { &mut self.patch_head } else { &mut self.head };
        fill(&mut lin.weight);
        fill(&mut lin.bias);
    }

    pub fn is_finite(&self) -> bool {
        self.flatten_params().iter().all(|v| v.is_finite())
    }
}

/// Per-dimension standardization fitted on training instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Real> FeatureScaler<T> {
    /// Dimensions with zero spread get scale 1.
    pub fn fit<'a>(instances: impl Iterator<Item = &'a Vec<T>>) -> Option<Self> {
        let rows: Vec<&Vec<T>> = instances.collect();
        let dim = rows.first()?.len();
        let n = T::of(rows.len() as f64);
        let mut mean = vec![T::zero(); dim];
        for r in &rows {
            for (m, &v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); dim];
        for r in &rows {
            for ((s, &v), &m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > T::of(1e-12) {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Some(Self { mean, scale })
    }

    pub fn transform(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((&v, &m), &s)| (v - m) / s).collect()
    }

    pub fn transform_bag(&self, bag: &super::Bag<T>) -> super::Bag<T> {
        super::Bag { instances: bag.instances.iter().map(|h| self.transform(h)).collect(), ..bag.clone() }
    }
}
