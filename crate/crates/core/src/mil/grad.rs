use super::model::{AttentionHead, Linear, MilModel};
use super::pool::{pool_embedding_max, pool_embedding_mean, softmax, weighted_sum};
use super::{Bag, Method};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gradients with the same shapes as the trainable part of a [`MilModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub attention: Vec<AttentionHead<T>>,
    /// Classifier head for embedding methods, patch head for instance methods.
    pub linear: Linear<T>,
}

impl<T: Real> Gradients<T> {
    fn zeros_like(model: &MilModel<T>) -> Self {
        let lin = if model.method.is_instance() { &model.patch_head } else { &model.head };
        Self {
            attention: model.attention.iter().map(|h| AttentionHead::zeros(h.hidden, h.dim)).collect(),
            linear: Linear::zeros(lin.inputs, lin.outputs),
        }
    }

    /// Same order as [`MilModel::flatten_params`].
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for h in &self.attention {
            out.extend_from_slice(&h.v);
            out.extend_from_slice(&h.w);
        }
        out.extend_from_slice(&self.linear.weight);
        out.extend_from_slice(&self.linear.bias);
        out
    }
}

/// Mean categorical cross-entropy over `bags` plus `wd·‖params‖²/2`, with
/// exact gradients for every trainable parameter of the model's method.
pub fn loss_and_gradients<T: Real>(model: &MilModel<T>, bags: &[&Bag<T>], wd: T) -> Result<(T, Gradients<T>)> {
    let n = T::of(bags.len() as f64);
    let weights = vec![T::one() / n; bags.len()];
    weighted_loss_and_gradients(model, bags, &weights, wd)
}

/// Like [`loss_and_gradients`] with an explicit weight per bag.
pub(crate) fn weighted_loss_and_gradients<T: Real>(
    model: &MilModel<T>,
    bags: &[&Bag<T>],
    weights: &[T],
    wd: T,
) -> Result<(T, Gradients<T>)> {
    if bags.is_empty() {
        return Err(Error::NoBags);
    }
    let mut grads = Gradients::zeros_like(model);
    let mut loss = T::zero();
    for (bag, &weight) in bags.iter().zip(weights) {
        if bag.is_empty() {
            return Err(Error::InvalidArgument(format!("bag `{}` has no instances", bag.image_id)));
        }
        let l = match model.method {
            Method::Abmilp => abmilp_backward(model, bag, weight, &mut grads),
            Method::Emax | Method::Emean => pooled_backward(model, bag, weight, &mut grads),
            Method::Mv | Method::Imax | Method::Imean => instance_backward(model, bag, weight, &mut grads),
        };
        if !l.is_finite() {
            return Err(Error::NonFiniteLoss(bag.image_id.clone()));
        }
        loss += weight * l;
    }
    if wd != T::zero() {
        let params = model.flatten_params();
        loss += wd * params.iter().map(|&p| p * p).sum::<T>() / T::of(2.0);
        let lin = if model.method.is_instance() { &model.patch_head } else { &model.head };
        for (g, h) in grads.attention.iter_mut().zip(&model.attention) {
            add_scaled(&mut g.v, &h.v, wd);
            add_scaled(&mut g.w, &h.w, wd);
        }
        add_scaled(&mut grads.linear.weight, &lin.weight, wd);
        add_scaled(&mut grads.linear.bias, &lin.bias, wd);
    }
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(bags[0].image_id.clone()));
    }
    Ok((loss, grads))
}

fn add_scaled<T: Real>(dst: &mut [T], src: &[T], k: T) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += k * s;
    }
}

/// Cross-entropy of `logits` against `label`; accumulates `scale·∂/∂(W,b)`
/// into `grad` and returns the loss together with `Wᵀ·∂loss/∂logits`.
fn classifier_backward<T: Real>(
    layer: &Linear<T>,
    x: &[T],
    label: usize,
    scale: T,
    grad: &mut Linear<T>,
    want_input_grad: bool,
) -> (T, Vec<T>) {
    let logits = layer.forward(x);
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let log_sum = logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln() + max;
    let loss = log_sum - logits[label];
    let mut delta = softmax(&logits);
    delta[label] -= T::one();
    let mut dx = if want_input_grad { vec![T::zero(); layer.inputs] } else { Vec::new() };
    for (o, &d) in delta.iter().enumerate() {
        let row = o * layer.inputs;
        grad.bias[o] += scale * d;
        for (j, &xj) in x.iter().enumerate() {
            grad.weight[row + j] += scale * d * xj;
        }
        if want_input_grad {
            for (j, dxj) in dx.iter_mut().enumerate() {
                *dxj += d * layer.weight[row + j];
            }
        }
    }
    (loss, dx)
}

fn abmilp_backward<T: Real>(model: &MilModel<T>, bag: &Bag<T>, scale: T, grads: &mut Gradients<T>) -> T {
    let h = &bag.instances;
    let dim = model.dim;
    let mut z = Vec::with_capacity(model.attention.len() * dim);
    let mut cache = Vec::with_capacity(model.attention.len());
    for head in &model.attention {
        let t: Vec<Vec<T>> = h.iter().map(|hi| head.hidden_activation(hi)).collect();
        let logits: Vec<T> = t.iter().map(|ti| ti.iter().zip(&head.w).map(|(&a, &b)| a * b).sum()).collect();
        let a = softmax(&logits);
        z.extend(weighted_sum(h, &a));
        cache.push((t, a));
    }
    let (loss, dz) = classifier_backward(&model.head, &z, bag.label, scale, &mut grads.linear, true);
    for (k, (head, (t, a))) in model.attention.iter().zip(cache).enumerate() {
        let dzk = &dz[k * dim..(k + 1) * dim];
        let da: Vec<T> = h.iter().map(|hi| hi.iter().zip(dzk).map(|(&x, &g)| x * g).sum()).collect();
        let mean_da: T = a.iter().zip(&da).map(|(&ai, &d)| ai * d).sum();
        let g = &mut grads.attention[k];
        for i in 0..h.len() {
            let dl = scale * a[i] * (da[i] - mean_da);
            for m in 0..head.hidden {
                let tm = t[i][m];
                g.w[m] += dl * tm;
                let du = dl * head.w[m] * (T::one() - tm * tm);
                let row = &mut g.v[m * dim..(m + 1) * dim];
                for (gv, &x) in row.iter_mut().zip(&h[i]) {
                    *gv += du * x;
                }
            }
        }
    }
    loss
}

fn pooled_backward<T: Real>(model: &MilModel<T>, bag: &Bag<T>, scale: T, grads: &mut Gradients<T>) -> T {
    let z = if model.method == Method::Emax {
        pool_embedding_max(&bag.instances)
    } else {
        pool_embedding_mean(&bag.instances)
    };
    classifier_backward(&model.head, &z, bag.label, scale, &mut grads.linear, false).0
}

// Each patch carries its image's label; a bag's loss is the mean over its patches.
fn instance_backward<T: Real>(model: &MilModel<T>, bag: &Bag<T>, scale: T, grads: &mut Gradients<T>) -> T {
    let per = scale / T::of(bag.len() as f64);
    let mut total = T::zero();
    for hi in &bag.instances {
        total += classifier_backward(&model.patch_head, hi, bag.label, per, &mut grads.linear, false).0;
    }
    total / T::of(bag.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::super::model::ModelConfig;
    use super::*;

    fn bag(instances: Vec<Vec<f64>>, label: usize) -> Bag<f64> {
        Bag {
            image_id: "img".into(),
            patch_ids: (0..instances.len()).map(|i| format!("p{i}")).collect(),
            instances,
            clone: String::new(),
            label,
            isolate: String::new(),
            preparation: String::new(),
        }
    }

    fn classes() -> Vec<String> {
        vec!["A".into(), "B".into(), "C".into()]
    }

    #[test]
    fn zero_decay_is_plain_cross_entropy() {
        let m = MilModel::<f64>::new(Method::Abmilp, classes(), 3, ModelConfig { hidden: 4, heads: 2 }, 5).unwrap();
        let b = bag(vec![vec![0.1, 0.2, -0.3], vec![1.0, 0.0, 0.5]], 1);
        let (l0, _) = loss_and_gradients(&m, &[&b], 0.0).unwrap();
        let p = super::super::pool::forward_image(&b, &m, Method::Abmilp).unwrap();
        assert!((l0 + p[1].ln()).abs() < 1e-12);
        let (l1, _) = loss_and_gradients(&m, &[&b], 0.1).unwrap();
        let norm: f64 = m.flatten_params().iter().map(|p| p * p).sum();
        assert!((l1 - l0 - 0.05 * norm).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_has_small_loss() {
        let mut m = MilModel::<f64>::new(Method::Emean, classes(), 2, ModelConfig::default(), 0).unwrap();
        m.head = Linear::zeros(2, 3);
        m.head.bias = vec![50.0, 0.0, 0.0];
        let b = bag(vec![vec![1.0, 1.0]], 0);
        let (l, _) = loss_and_gradients(&m, &[&b], 0.0).unwrap();
        assert!(l < 1e-15);
    }

    #[test]
    fn non_finite_loss_names_bag() {
        let m = MilModel::<f64>::new(Method::Emean, classes(), 2, ModelConfig::default(), 0).unwrap();
        let b = bag(vec![vec![f64::NAN, 1.0]], 0);
        match loss_and_gradients(&m, &[&b], 0.0) {
            Err(Error::NonFiniteLoss(id)) => assert_eq!(id, "img"),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn finite_difference_check(method: Method) {
        let config = ModelConfig { hidden: 4, heads: 2 };
        let m = MilModel::<f64>::new(method, classes(), 5, config, 11).unwrap();
        let b1 = bag((0..4).map(|i| (0..5).map(|j| ((i * 5 + j) as f64 * 0.37).sin()).collect()).collect(), 2);
        let b2 = bag((0..3).map(|i| (0..5).map(|j| ((i * 7 + j) as f64 * 0.91).cos()).collect()).collect(), 0);
        let wd = 0.01;
        let (_, g) = loss_and_gradients(&m, &[&b1, &b2], wd).unwrap();
        let analytic = g.flatten();
        let params = m.flatten_params();
        assert_eq!(analytic.len(), params.len());
        for i in 0..params.len() {
            let mut plus = m.clone();
            let mut minus = m.clone();
            let mut p = params.clone();
            p[i] += 1e-5;
            plus.set_params(&p);
            p[i] -= 2e-5;
            minus.set_params(&p);
            let lp = loss_and_gradients(&plus, &[&b1, &b2], wd).unwrap().0;
            let lm = loss_and_gradients(&minus, &[&b1, &b2], wd).unwrap().0;
            let numeric = (lp - lm) / 2e-5;
            let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-4, "{method} param {i}: {} vs {numeric}", analytic[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for m in [Method::Abmilp, Method::Emax, Method::Emean, Method::Mv] {
            finite_difference_check(m);
        }
    }
}
