use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::class::{canonical_classes, ClassId};

fn check_lengths<A, B>(a: &[A], b: &[B]) -> Result<(), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// Twice the Mann–Whitney count: `2·#{p > n} + #{p = n}` over all
/// positive/negative pairs. AUC is this divided by `2·|pos|·|neg|`.
pub fn auc_binary_doubled(positive: &[f64], negative: &[f64]) -> u64 {
    let mut neg = negative.to_vec();
    neg.sort_by(f64::total_cmp);
    positive
        .iter()
        .map(|&p| {
            let below = neg.partition_point(|&n| n < p) as u64;
            let not_above = neg.partition_point(|&n| n <= p) as u64;
            2 * below + (not_above - below)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub macro_auc: f64,
    /// One entry per class; `None` where the class had no positives or no negatives.
    pub per_class: Vec<Option<f64>>,
    pub skipped: Vec<ClassId>,
}

/// One-vs-rest AUC per class from column `k` of `scores` (which follows
/// `classes`), macro-averaged over the classes that have both positive and
/// negative samples.
pub fn auc_macro_ovr(labels: &[ClassId], scores: &[Vec<f64>], classes: &[ClassId]) -> Result<AucSummary, EvalError> {
    check_lengths(labels, scores)?;
    if let Some(row) = scores.iter().find(|r| r.len() != classes.len()) {
        return Err(EvalError::InvalidInput(format!("score row of length {} for {} classes", row.len(), classes.len())));
    }
    let mut per_class = Vec::with_capacity(classes.len());
    let mut skipped = Vec::new();
    for (k, class) in classes.iter().enumerate() {
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (label, row) in labels.iter().zip(scores) {
            if label == class { pos.push(row[k]) } else { neg.push(row[k]) }
        }
        if pos.is_empty() || neg.is_empty() {
            per_class.push(None);
            skipped.push(class.clone());
            continue;
        }
        let doubled = auc_binary_doubled(&pos, &neg);
        per_class.push(Some(doubled as f64 / (2 * pos.len() * neg.len()) as f64));
    }
    let evaluated: Vec<f64> = per_class.iter().flatten().copied().collect();
    if evaluated.is_empty() {
        return Err(EvalError::NoEvaluableClass);
    }
    let macro_auc = evaluated.iter().sum::<f64>() / evaluated.len() as f64;
    Ok(AucSummary { macro_auc, per_class, skipped })
}

/// Rows are true classes, columns predicted classes, both in `classes` order.
pub fn confusion_matrix(labels: &[ClassId], predictions: &[ClassId], classes: &[ClassId]) -> Result<Vec<Vec<u64>>, EvalError> {
    check_lengths(labels, predictions)?;
    let index = |c: &ClassId| {
        classes.iter().position(|k| k == c).ok_or_else(|| EvalError::InvalidInput(format!("class {c} not in class list")))
    };
    let mut m = vec![vec![0u64; classes.len()]; classes.len()];
    for (l, p) in labels.iter().zip(predictions) {
        m[index(l)?][index(p)?] += 1;
    }
    Ok(m)
}

pub fn accuracy(labels: &[ClassId], predictions: &[ClassId]) -> Result<f64, EvalError> {
    check_lengths(labels, predictions)?;
    let hits = labels.iter().zip(predictions).filter(|(l, p)| l == p).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Unweighted mean of per-class `2PR/(P+R)` over classes seen in either
/// list; `0/0` counts as 0 for precision, recall and F1 alike.
pub fn f1_macro(labels: &[ClassId], predictions: &[ClassId]) -> Result<f64, EvalError> {
    check_lengths(labels, predictions)?;
    let classes = canonical_classes(labels.iter().chain(predictions));
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let total: f64 = classes
        .iter()
        .map(|c| {
            let tp = labels.iter().zip(predictions).filter(|(l, p)| *l == c && *p == c).count();
            let predicted = predictions.iter().filter(|p| *p == c).count();
            let actual = labels.iter().filter(|l| *l == c).count();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, actual);
            if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) }
        })
        .sum();
    Ok(total / classes.len() as f64)
}

/// Per test patient: `(patient, true label, most frequent prediction)`, ties
/// going to the earlier class in `classes`.
pub fn patient_majority_vote(
    patients: &[String],
    labels: &[ClassId],
    predictions: &[ClassId],
    classes: &[ClassId],
) -> Result<Vec<(String, ClassId, ClassId)>, EvalError> {
    check_lengths(labels, predictions)?;
    check_lengths(patients, labels)?;
    let mut votes: BTreeMap<&String, (&ClassId, Vec<usize>)> = BTreeMap::new();
    for ((pid, label), pred) in patients.iter().zip(labels).zip(predictions) {
        let k = classes.iter().position(|c| c == pred).ok_or_else(|| EvalError::InvalidInput(format!("class {pred} not in class list")))?;
        let entry = votes.entry(pid).or_insert_with(|| (label, vec![0; classes.len()]));
        entry.1[k] += 1;
    }
    Ok(votes
        .into_iter()
        .map(|(pid, (label, counts))| {
            let k = crate::classify::argmax_first(&counts);
            (pid.clone(), label.clone(), classes[k].clone())
        })
        .collect())
}
