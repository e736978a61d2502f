use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grad::{loss_and_gradients, weighted_loss_and_gradients};
use super::metrics::evaluate;
use super::model::MilModel;
use super::Bag;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// How each gradient step sees the training bags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchMode {
    /// One bag per step: a class drawn uniformly, then a bag of that class.
    Sampled,
    /// All bags per step, each class carrying equal total weight.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub lr: f64,
    pub wd: f64,
    pub steps: usize,
    /// The learning rate is multiplied by `decay` every `decay_every` steps.
    pub decay_every: usize,
    pub decay: f64,
    pub batch: BatchMode,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { lr: 0.05, wd: 1e-4, steps: 3000, decay_every: 1000, decay: 0.1, batch: BatchMode::Sampled, seed: 0 }
    }
}

impl TrainParams {
    pub fn lr_at(&self, step: usize) -> f64 {
        let k = if self.decay_every == 0 { 0 } else { step / self.decay_every };
        self.lr * self.decay.powi(k as i32)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: MilModel<T>,
    /// Loss of the step's batch, recorded before each update.
    pub loss_history: Vec<f64>,
}

/// Gradient descent on `bags` with step decay and class-balanced batches.
pub fn train<T: Real>(mut model: MilModel<T>, bags: &[Bag<T>], params: &TrainParams) -> Result<TrainOutcome<T>> {
    let k = model.n_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, b) in bags.iter().enumerate() {
        if b.label >= k {
            return Err(Error::InvalidArgument(format!("bag `{}` has label {} of {k} classes", b.image_id, b.label)));
        }
        if b.dim() != model.dim {
            return Err(Error::DimensionMismatch(format!(
                "bag `{}` has dim {}, model expects {}",
                b.image_id,
                b.dim(),
                model.dim
            )));
        }
        by_class[b.label].push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::MissingClass(model.classes[c].clone()));
    }
    if !(params.lr >= 0.0 && params.wd >= 0.0) {
        return Err(Error::InvalidArgument("learning rate and weight decay must be >= 0".into()));
    }
    let wd = T::of(params.wd);
    let all: Vec<&Bag<T>> = bags.iter().collect();
    let full_weights: Vec<T> =
        bags.iter().map(|b| T::one() / T::of((k * by_class[b.label].len()) as f64)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut history = Vec::with_capacity(params.steps);
    let mut flat = model.flatten_params();
    for step in 0..params.steps {
        let (loss, grads) = match params.batch {
            BatchMode::Sampled => {
                let class = rng.random_range(0..k);
                let members = &by_class[class];
                let bag = &bags[members[rng.random_range(0..members.len())]];
                loss_and_gradients(&model, &[bag], wd)?
            }
            BatchMode::Full => weighted_loss_and_gradients(&model, &all, &full_weights, wd)?,
        };
        history.push(loss.as_f64());
        let lr = T::of(params.lr_at(step));
        for (p, g) in flat.iter_mut().zip(grads.flatten()) {
            *p -= lr * g;
        }
        model.set_params(&flat);
    }
    if !model.is_finite() {
        return Err(Error::NonFiniteLoss("parameters diverged".into()));
    }
    Ok(TrainOutcome { model, loss_history: history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lr: f64,
    pub wd: f64,
    pub validation_accuracy: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub cells: Vec<GridCell>,
    pub best_lr: f64,
    pub best_wd: f64,
}

/// Trains one model per `(lr, wd)` pair on `train_bags` and keeps the pair with
/// the best accuracy on `validation_bags`; ties go to the lower lr, then wd.
pub fn grid_search<T: Real>(
    template: &MilModel<T>,
    train_bags: &[Bag<T>],
    validation_bags: &[Bag<T>],
    lrs: &[f64],
    wds: &[f64],
    base: &TrainParams,
) -> Result<GridSearch> {
    if lrs.is_empty() || wds.is_empty() {
        return Err(Error::InvalidArgument("grid search needs non-empty lr and wd grids".into()));
    }
    if validation_bags.is_empty() {
        return Err(Error::InvalidArgument("grid search needs validation bags".into()));
    }
    let mut cells = Vec::with_capacity(lrs.len() * wds.len());
    for &lr in lrs {
        for &wd in wds {
            let params = TrainParams { lr, wd, ..*base };
            let out = train(template.clone(), train_bags, &params)?;
            let report = evaluate(&out.model, validation_bags, template.method)?;
            cells.push(GridCell {
                lr,
                wd,
                validation_accuracy: report.accuracy,
                final_loss: out.loss_history.last().copied().unwrap_or(f64::NAN),
            });
        }
    }
    let best = cells
        .iter()
        .min_by(|a, b| {
            b.validation_accuracy
                .total_cmp(&a.validation_accuracy)
                .then(a.lr.total_cmp(&b.lr))
                .then(a.wd.total_cmp(&b.wd))
        })
        .expect("non-empty grid");
    Ok(GridSearch { best_lr: best.lr, best_wd: best.wd, cells })
}
