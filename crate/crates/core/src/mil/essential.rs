use serde::{Deserialize, Serialize};

use super::model::MilModel;
use super::pool::{argmax, forward_image};
use super::{Bag, Method};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Highest-attention patches of one correctly classified image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssentialPatches {
    pub image_id: String,
    pub clone: String,
    pub patch_ids: Vec<String>,
    /// Attention weights (averaged over heads) of the selected patches.
    pub weights: Vec<f64>,
}

/// Indices of the `k` largest values, largest first; ties go to the lower index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Top-2 patches by attention for each bag the model classifies correctly.
pub fn essential_patches<T: Real>(model: &MilModel<T>, bags: &[Bag<T>]) -> Result<Vec<EssentialPatches>> {
    if model.method != Method::Abmilp {
        return Err(Error::MethodMismatch { model: model.method.to_string(), requested: Method::Abmilp.to_string() });
    }
    let mut out = Vec::new();
    for bag in bags {
        let probs = forward_image(bag, model, Method::Abmilp)?;
        if argmax(&probs) != bag.label {
            continue;
        }
        let a: Vec<f64> = model.mean_attention(&bag.instances).into_iter().map(Real::as_f64).collect();
        let top = top_k(&a, 2);
        out.push(EssentialPatches {
            image_id: bag.image_id.clone(),
            clone: bag.clone.clone(),
            patch_ids: top.iter().map(|&i| bag.patch_ids[i].clone()).collect(),
            weights: top.iter().map(|&i| a[i]).collect(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::model::{Linear, ModelConfig};
    use super::*;

    #[test]
    fn picks_two_largest() {
        assert_eq!(top_k(&[0.7, 0.2, 0.1], 2), vec![0, 1]);
        assert_eq!(top_k(&[0.2, 0.4, 0.4], 2), vec![1, 2]);
        assert_eq!(top_k(&[1.0], 2), vec![0]);
    }

    fn model() -> MilModel<f64> {
        let classes = vec!["A".to_string(), "B".into()];
        let mut m = MilModel::new(Method::Abmilp, classes, 2, ModelConfig { hidden: 3, heads: 1 }, 1).unwrap();
        m.head = Linear::zeros(2, 2);
        m.head.bias = vec![1.0, 0.0];
        m
    }

    fn bag(label: usize, n: usize) -> Bag<f64> {
        Bag {
            image_id: format!("img{label}{n}"),
            patch_ids: (0..n).map(|i| format!("p{i}")).collect(),
            instances: (0..n).map(|i| vec![i as f64, -(i as f64)]).collect(),
            clone: String::new(),
            label,
            isolate: String::new(),
            preparation: String::new(),
        }
    }

    #[test]
    fn only_correct_bags() {
        let out = essential_patches(&model(), &[bag(0, 4), bag(1, 4), bag(0, 1)]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].patch_ids.len(), 2);
        assert_eq!(out[1].patch_ids, vec!["p0".to_string()]);
    }
}
