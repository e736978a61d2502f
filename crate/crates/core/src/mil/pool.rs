use super::model::{AttentionHead, MilModel};
use super::{Bag, Method};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Softmax with max subtraction.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Attention pooling of one bag through one head: returns the pooled vector
/// `z = Σ a_i h_i` and the weights `a`.
pub fn abmilp_pool<T: Real>(h: &[Vec<T>], head: &AttentionHead<T>) -> (Vec<T>, Vec<T>) {
    assert!(!h.is_empty(), "attention pooling needs at least one instance");
    let logits: Vec<T> = h.iter().map(|hi| head.logit(hi)).collect();
    let a = softmax(&logits);
    (weighted_sum(h, &a), a)
}

pub(crate) fn weighted_sum<T: Real>(h: &[Vec<T>], a: &[T]) -> Vec<T> {
    let mut z = vec![T::zero(); h[0].len()];
    for (hi, &ai) in h.iter().zip(a) {
        for (zj, &v) in z.iter_mut().zip(hi) {
            *zj += ai * v;
        }
    }
    z
}

pub fn pool_embedding_max<T: Real>(h: &[Vec<T>]) -> Vec<T> {
    assert!(!h.is_empty(), "max pooling needs at least one instance");
    let mut out = h[0].clone();
    for hi in &h[1..] {
        for (o, &v) in out.iter_mut().zip(hi) {
            *o = o.max(v);
        }
    }
    out
}

pub fn pool_embedding_mean<T: Real>(h: &[Vec<T>]) -> Vec<T> {
    assert!(!h.is_empty(), "mean pooling needs at least one instance");
    let mut out = vec![T::zero(); h[0].len()];
    for hi in h {
        for (o, &v) in out.iter_mut().zip(hi) {
            *o += v;
        }
    }
    let n = T::of(h.len() as f64);
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Per-patch class probabilities from the patch head.
pub fn instance_scores<T: Real>(h: &[Vec<T>], model: &MilModel<T>) -> Vec<Vec<T>> {
    h.iter().map(|hi| softmax(&model.patch_head.forward(hi))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstancePool {
    Mv,
    Max,
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstancePooled<T> {
    /// Class scores summing to one (vote fractions for majority voting).
    pub probs: Vec<T>,
    pub label: usize,
    /// Majority vote had several top classes; the lowest index won.
    pub tie: bool,
}

pub fn pool_instance<T: Real>(scores: &[Vec<T>], mode: InstancePool) -> InstancePooled<T> {
    assert!(!scores.is_empty(), "instance pooling needs at least one row");
    let k = scores[0].len();
    match mode {
        InstancePool::Mv => {
            let mut votes = vec![0usize; k];
            for row in scores {
                votes[argmax(row)] += 1;
            }
            let top = *votes.iter().max().expect("non-empty");
            let tie = votes.iter().filter(|&&v| v == top).count() > 1;
            let label = votes.iter().position(|&v| v == top).expect("non-empty");
            let n = T::of(scores.len() as f64);
            InstancePooled { probs: votes.iter().map(|&v| T::of(v as f64) / n).collect(), label, tie }
        }
        InstancePool::Max => {
            let mut m = pool_embedding_max(scores);
            let s: T = m.iter().copied().sum();
            m.iter_mut().for_each(|v| *v /= s);
            InstancePooled { label: argmax(&m), probs: m, tie: false }
        }
        InstancePool::Mean => {
            let m = pool_embedding_mean(scores);
            InstancePooled { label: argmax(&m), probs: m, tie: false }
        }
    }
}

impl<T: Real> MilModel<T> {
    /// Concatenated pooled vector over all heads and each head's weights.
    pub fn attention_pool(&self, h: &[Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
        let mut z = Vec::with_capacity(self.attention.len() * self.dim);
        let mut weights = Vec::with_capacity(self.attention.len());
        for head in &self.attention {
            let (zk, ak) = abmilp_pool(h, head);
            z.extend(zk);
            weights.push(ak);
        }
        (z, weights)
    }

    /// Attention weight of each instance averaged over heads.
    pub fn mean_attention(&self, h: &[Vec<T>]) -> Vec<T> {
        let (_, weights) = self.attention_pool(h);
        let k = T::of(weights.len() as f64);
        (0..h.len()).map(|i| weights.iter().map(|a| a[i]).sum::<T>() / k).collect()
    }
}

/// Class probabilities for one image under `method`.
pub fn forward_image<T: Real>(bag: &Bag<T>, model: &MilModel<T>, method: Method) -> Result<Vec<T>> {
    if method != model.method {
        return Err(Error::MethodMismatch { model: model.method.to_string(), requested: method.to_string() });
    }
    if bag.is_empty() {
        return Err(Error::InvalidArgument(format!("bag `{}` has no instances", bag.image_id)));
    }
    if bag.dim() != model.dim {
        return Err(Error::DimensionMismatch(format!(
            "bag `{}` has dim {}, model expects {}",
            bag.image_id,
            bag.dim(),
            model.dim
        )));
    }
    let h = &bag.instances;
    Ok(match method {
        Method::Abmilp => softmax(&model.head.forward(&model.attention_pool(h).0)),
        Method::Emax => softmax(&model.head.forward(&pool_embedding_max(h))),
        Method::Emean => softmax(&model.head.forward(&pool_embedding_mean(h))),
        Method::Mv => pool_instance(&instance_scores(h, model), InstancePool::Mv).probs,
        Method::Imax => pool_instance(&instance_scores(h, model), InstancePool::Max).probs,
        Method::Imean => pool_instance(&instance_scores(h, model), InstancePool::Mean).probs,
    })
}
