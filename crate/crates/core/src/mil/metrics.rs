use serde::{Deserialize, Serialize};

use super::model::MilModel;
use super::pool::{argmax, forward_image};
use super::{Bag, Method};
use crate::error::Result;
use crate::scalar::Real;
use crate::stats::{mean, midranks, sample_variance};

/// Image-level classification metrics, all fractions in `[0, 1]`.
/// Precision, recall, F1 and AUC are macro averages over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<String>,
    pub n: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` where a ranking score is unavailable (majority voting) or no
    /// class has both positives and negatives.
    pub auc: Option<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    /// Some per-class precision or recall was 0/0 and counted as 0.
    pub zero_division: bool,
}

/// Builds a report from true labels, predicted labels and class scores.
pub fn metrics_from_predictions(
    classes: &[String],
    labels: &[usize],
    predicted: &[usize],
    scores: Option<&[Vec<f64>]>,
) -> MetricsReport {
    let k = classes.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (&t, &p) in labels.iter().zip(predicted) {
        confusion[t][p] += 1;
    }
    let n = labels.len();
    let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();
    let mut zero_division = false;
    let mut ratio = |num: u64, den: u64| {
        if den == 0 {
            zero_division = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let (mut precision, mut recall, mut f1) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let tp = confusion[c][c];
        let predicted_c: u64 = (0..k).map(|t| confusion[t][c]).sum();
        let actual_c: u64 = confusion[c].iter().sum();
        let p = ratio(tp, predicted_c);
        let r = ratio(tp, actual_c);
        precision += p;
        recall += r;
        f1 += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let auc = scores.and_then(|s| macro_auc(labels, s, k));
    MetricsReport {
        classes: classes.to_vec(),
        n,
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        precision: precision / k as f64,
        recall: recall / k as f64,
        f1: f1 / k as f64,
        auc,
        confusion,
        zero_division,
    }
}

// One-vs-rest AUC per class from the rank-sum statistic with midranks,
// averaged over classes that have both positives and negatives.
fn macro_auc(labels: &[usize], scores: &[Vec<f64>], k: usize) -> Option<f64> {
    let mut total = 0.0;
    let mut defined = 0;
    for c in 0..k {
        let s: Vec<f64> = scores.iter().map(|row| row[c]).collect();
        let pos = labels.iter().filter(|&&l| l == c).count();
        let neg = labels.len() - pos;
        if pos == 0 || neg == 0 {
            continue;
        }
        let (ranks, _) = midranks(&s);
        let rank_sum: f64 = labels.iter().zip(&ranks).filter(|(&l, _)| l == c).map(|(_, &r)| r).sum();
        total += (rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos * neg) as f64;
        defined += 1;
    }
    (defined > 0).then(|| total / defined as f64)
}

/// Runs `model` over labeled bags.
pub fn evaluate<T: Real>(model: &MilModel<T>, bags: &[Bag<T>], method: Method) -> Result<MetricsReport> {
    let mut labels = Vec::with_capacity(bags.len());
    let mut predicted = Vec::with_capacity(bags.len());
    let mut scores = Vec::with_capacity(bags.len());
    for bag in bags {
        let p: Vec<f64> = forward_image(bag, model, method)?.into_iter().map(Real::as_f64).collect();
        labels.push(bag.label);
        predicted.push(argmax(&p));
        scores.push(p);
    }
    let ranked = (method != Method::Mv).then_some(scores.as_slice());
    Ok(metrics_from_predictions(&model.classes, &labels, &predicted, ranked))
}

/// Mean and sample standard deviation of one metric across folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Self {
        let std = if values.len() > 1 { sample_variance(values).sqrt() } else { 0.0 };
        Self { mean: mean(values), std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub folds: usize,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub auc: Option<MeanStd>,
}

impl MetricsSummary {
    pub fn from_reports(reports: &[MetricsReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let pick = |f: fn(&MetricsReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
        let aucs: Option<Vec<f64>> = reports.iter().map(|r| r.auc).collect();
        Some(Self {
            folds: reports.len(),
            accuracy: pick(|r| r.accuracy),
            precision: pick(|r| r.precision),
            recall: pick(|r| r.recall),
            f1: pick(|r| r.f1),
            auc: aucs.map(|a| MeanStd::of(&a)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes() -> Vec<String> {
        vec!["A".into(), "B".into(), "C".into()]
    }

    #[test]
    fn perfect_predictor() {
        let labels = [0, 1, 2, 0];
        let scores: Vec<Vec<f64>> = labels.iter().map(|&l| (0..3).map(|c| (c == l) as u8 as f64).collect()).collect();
        let r = metrics_from_predictions(&classes(), &labels, &labels, Some(&scores));
        assert_eq!((r.accuracy, r.f1, r.auc), (1.0, 1.0, Some(1.0)));
        assert!(!r.zero_division);
    }

    #[test]
    fn constant_scores_give_half_auc() {
        let labels = [0, 1, 2, 2];
        let scores = vec![vec![1.0 / 3.0; 3]; 4];
        let r = metrics_from_predictions(&classes(), &labels, &[0; 4], Some(&scores));
        assert_eq!(r.auc, Some(0.5));
        assert!(r.zero_division);
    }

    #[test]
    fn confusion_accuracy() {
        let labels = [0, 0, 1, 1, 2, 2];
        let predicted = [0, 0, 1, 1, 0, 2];
        let r = metrics_from_predictions(&classes(), &labels, &predicted, None);
        assert_eq!(r.confusion, vec![vec![2, 0, 0], vec![0, 2, 0], vec![1, 0, 1]]);
        assert!((r.accuracy - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.auc, None);
        let p = (2.0 / 3.0 + 1.0 + 1.0) / 3.0;
        assert!((r.precision - p).abs() < 1e-15);
    }

    #[test]
    fn summary_uses_sample_std() {
        let mk = |acc| MetricsReport {
            classes: classes(),
            n: 1,
            accuracy: acc,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            auc: None,
            confusion: vec![],
            zero_division: false,
        };
        let s = MetricsSummary::from_reports(&[mk(0.5), mk(0.7)]).unwrap();
        assert!((s.accuracy.mean - 0.6).abs() < 1e-15);
        assert!((s.accuracy.std - 0.02f64.sqrt()).abs() < 1e-15);
        assert!(s.auc.is_none());
    }
}
