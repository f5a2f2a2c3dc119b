//! Covariance mixup along affine-invariant geodesics.
//!
//! A synthetic matrix is the weighted Fréchet mean of two training matrices
//! with weights `(1 − α, α)`, which is exactly the geodesic point at `α`.

use std::collections::BTreeMap;

use rand_distr::{Beta, Distribution};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{canonical_classes, ClassId};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::spd::{geodesic, SpdError, SpdMatrix, SpdSample};

/// Patient id carried by every synthetic sample; never assigned to a real patient.
pub const SYNTHETIC_PATIENT_ID: &str = "__synthetic__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    WithinClass,
    CrossClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixupConfig {
    pub beta_a: f64,
    pub beta_b: f64,
    pub pairing: Pairing,
    /// Only these classes receive synthetic samples; all classes when absent.
    pub target_classes: Option<Vec<ClassId>>,
    /// Synthetic samples per class. Absent: top every class up to the
    /// largest class count. Classes missing from the map get none.
    pub samples_per_class: Option<BTreeMap<ClassId, usize>>,
    pub seed: u64,
}

impl Default for MixupConfig {
    fn default() -> Self {
        MixupConfig {
            beta_a: 1.0,
            beta_b: 1.0,
            pairing: Pairing::WithinClass,
            target_classes: None,
            samples_per_class: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("class {0} has too few samples to draw a mixing pair")]
    ClassTooSmall(ClassId),
    #[error("sample {0} has no label")]
    MissingLabel(usize),
    #[error("invalid mixup config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Spd(#[from] SpdError),
}

/// Weighted mean of `c1` and `c2` with weights `(1 − alpha, alpha)`.
pub fn mix_pair<T: Scalar>(c1: &SpdMatrix<T>, c2: &SpdMatrix<T>, alpha: T) -> Result<SpdMatrix<T>, SpdError> {
    geodesic(c1, c2, alpha)
}

impl MixupConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        for (name, v) in [("beta_a", self.beta_a), ("beta_b", self.beta_b)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(AugmentError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Synthetic sample count per class, in canonical class order.
    pub fn budget(&self, class_sizes: &BTreeMap<ClassId, usize>) -> BTreeMap<ClassId, usize> {
        let majority = class_sizes.values().copied().max().unwrap_or(0);
        class_sizes
            .iter()
            .map(|(c, &n)| {
                let targeted = self.target_classes.as_ref().is_none_or(|t| t.contains(c));
                let count = match (&self.samples_per_class, targeted) {
                    (_, false) => 0,
                    (Some(map), true) => map.get(c).copied().unwrap_or(0),
                    (None, true) => majority - n,
                };
                (c.clone(), count)
            })
            .collect()
    }
}

/// Returns the input samples followed by the synthetic ones.
///
/// Synthetic sample `i` draws its α and pair from its own random stream, so
/// the output does not depend on how the work is scheduled. Within-class
/// pairs are two distinct samples of the class. Cross-class pairs take the
/// first endpoint from the budgeted class and the second from any other
/// class; the label goes to the endpoint with the larger weight (the first
/// on a tie), so cross-class budgets count draws, not final labels.
pub fn augment_training_set<T: Scalar>(
    samples: &[SpdSample<T>],
    config: &MixupConfig,
) -> Result<Vec<SpdSample<T>>, AugmentError> {
    config.validate()?;
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        let label = s.label.as_ref().ok_or(AugmentError::MissingLabel(i))?;
        by_class.entry(label.clone()).or_default().push(i);
    }
    let sizes: BTreeMap<ClassId, usize> = by_class.iter().map(|(c, v)| (c.clone(), v.len())).collect();
    let budget = config.budget(&sizes);

    let mut jobs: Vec<&ClassId> = Vec::new();
    for (class, &count) in &budget {
        if count == 0 {
            continue;
        }
        let own = by_class[class].len();
        let enough = match config.pairing {
            Pairing::WithinClass => own >= 2,
            Pairing::CrossClass => own >= 1 && by_class.len() >= 2,
        };
        if !enough {
            return Err(AugmentError::ClassTooSmall(class.clone()));
        }
        jobs.extend(std::iter::repeat_n(class, count));
    }

    let beta = Beta::new(config.beta_a, config.beta_b).map_err(|e| AugmentError::InvalidConfig(e.to_string()))?;
    let classes = canonical_classes(by_class.keys());
    let synthetic: Vec<SpdSample<T>> = jobs
        .par_iter()
        .enumerate()
        .map(|(position, &class)| {
            let mut rng = stream_rng(config.seed, position as u64);
            let alpha: f64 = beta.sample(&mut rng);
            let own = &by_class[class];
            let (first, second) = match config.pairing {
                Pairing::WithinClass => {
                    let a = rng.random_range(0..own.len());
                    let mut b = rng.random_range(0..own.len() - 1);
                    if b >= a {
                        b += 1;
                    }
                    (own[a], own[b])
                }
                Pairing::CrossClass => {
                    let others: usize = samples.len() - own.len();
                    let a = own[rng.random_range(0..own.len())];
                    let mut pick = rng.random_range(0..others);
                    let mut b = 0;
                    for c in classes.iter().filter(|c| *c != class) {
                        let members = &by_class[c];
                        if pick < members.len() {
                            b = members[pick];
                            break;
                        }
                        pick -= members.len();
                    }
                    (a, b)
                }
            };
            let label = if alpha > 0.5 { &samples[second] } else { &samples[first] }.label.clone();
            let matrix = mix_pair(&samples[first].matrix, &samples[second].matrix, T::of(alpha))?;
            Ok(SpdSample { matrix, weight: T::one(), label, patient_id: Some(SYNTHETIC_PATIENT_ID.to_owned()) })
        })
        .collect::<Result<_, AugmentError>>()?;

    let mut out = samples.to_vec();
    out.extend(synthetic);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::default_class_templates;
    use crate::spd::{airm_distance, weighted_karcher_mean, KarcherConfig};
    use std::f64::consts::E;

    fn labelled(m: &SpdMatrix<f64>, label: &str, patient: &str) -> SpdSample<f64> {
        SpdSample::labelled(m.clone(), ClassId::new(label)).with_patient(patient)
    }

    fn two_class(na: usize, nb: usize) -> Vec<SpdSample<f64>> {
        let t = default_class_templates(3, 2, 0.7, 4);
        let mut out = Vec::new();
        for i in 0..na {
            let m = crate::spd::spd_power(&t[0], 1.0 + 0.05 * i as f64).unwrap();
            out.push(labelled(&m, "A", &format!("a{i}")));
        }
        for i in 0..nb {
            let m = crate::spd::spd_power(&t[1], 1.0 + 0.1 * i as f64).unwrap();
            out.push(labelled(&m, "B", &format!("b{i}")));
        }
        out
    }

    #[test]
    fn endpoints_and_scalar_closed_form() {
        let a = SpdMatrix::from_diagonal(&[1.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[E.powi(4)]).unwrap();
        assert_eq!(mix_pair(&a, &b, 0.0).unwrap(), a);
        assert_eq!(mix_pair(&a, &b, 1.0).unwrap(), b);
        assert!((mix_pair(&a, &b, 0.25).unwrap().data()[[0, 0]] - E).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_iterative_mean() {
        let t = default_class_templates(4, 2, 1.2, 8);
        let cfg = KarcherConfig { tol: 1e-12, max_iter: 500, closed_form_pairs: false };
        for alpha in [0.1, 0.37, 0.5, 0.9] {
            let mixed = mix_pair(&t[0], &t[1], alpha).unwrap();
            let iter = weighted_karcher_mean(&[&t[0], &t[1]], &[1.0 - alpha, alpha], &cfg).unwrap();
            let rel = crate::spd::frobenius_norm(&(mixed.data() - iter.data())) / crate::spd::frobenius_norm(iter.data());
            assert!(rel < 1e-8, "alpha {alpha}: {rel}");
        }
    }

    #[test]
    fn zero_budget_is_identity() {
        let s = two_class(4, 3);
        let cfg = MixupConfig { samples_per_class: Some(BTreeMap::new()), ..MixupConfig::default() };
        assert_eq!(augment_training_set(&s, &cfg).unwrap(), s);
    }

    #[test]
    fn top_up_to_majority() {
        let s = two_class(10, 3);
        let out = augment_training_set(&s, &MixupConfig::default()).unwrap();
        let count = |c: &str| out.iter().filter(|x| x.label.as_ref().unwrap().as_str() == c).count();
        assert_eq!((count("A"), count("B")), (10, 10));
        assert_eq!(&out[..13], &s[..]);
        for x in &out[13..] {
            assert_eq!(x.patient_id.as_deref(), Some(SYNTHETIC_PATIENT_ID));
        }
    }

    #[test]
    fn identical_parents_give_parent() {
        let a = default_class_templates(3, 1, 0.5, 1).remove(0);
        let s: Vec<_> = (0..3).map(|i| labelled(&a, "A", &format!("p{i}"))).chain([labelled(&SpdMatrix::identity(3), "B", "q")]).collect();
        let cfg = MixupConfig { samples_per_class: Some([(ClassId::new("A"), 5)].into()), ..MixupConfig::default() };
        let out = augment_training_set(&s, &cfg).unwrap();
        for x in &out[4..] {
            assert!(airm_distance(&x.matrix, &a).unwrap() < 1e-10);
        }
    }

    #[test]
    fn synthetic_points_lie_between_parents() {
        let s = two_class(5, 5);
        let out = augment_training_set(&s, &MixupConfig { samples_per_class: Some([(ClassId::new("A"), 20)].into()), ..MixupConfig::default() }).unwrap();
        let class_a: Vec<_> = s.iter().filter(|x| x.label.as_ref().unwrap().as_str() == "A").collect();
        for x in &out[10..] {
            assert_eq!(x.label.as_ref().unwrap().as_str(), "A");
            let found = class_a.iter().any(|p| {
                class_a.iter().any(|q| {
                    let total = airm_distance(&p.matrix, &q.matrix).unwrap();
                    let via = airm_distance(&p.matrix, &x.matrix).unwrap() + airm_distance(&x.matrix, &q.matrix).unwrap();
                    total > 0.0 && (via - total).abs() <= 1e-8 * total
                })
            });
            assert!(found);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let s = two_class(6, 2);
        let cfg = MixupConfig { seed: 11, ..MixupConfig::default() };
        assert_eq!(augment_training_set(&s, &cfg).unwrap(), augment_training_set(&s, &cfg).unwrap());
        let other = MixupConfig { seed: 12, ..MixupConfig::default() };
        assert_ne!(augment_training_set(&s, &cfg).unwrap(), augment_training_set(&s, &other).unwrap());
    }

    #[test]
    fn cross_class_label_follows_heavier_endpoint() {
        let s = two_class(4, 4);
        // Beta(50, 1) puts α near 1, so labels go to the other class
        let cfg = MixupConfig {
            beta_a: 50.0,
            beta_b: 1.0,
            pairing: Pairing::CrossClass,
            samples_per_class: Some([(ClassId::new("A"), 6)].into()),
            ..MixupConfig::default()
        };
        let out = augment_training_set(&s, &cfg).unwrap();
        assert!(out[8..].iter().all(|x| x.label.as_ref().unwrap().as_str() == "B"));
        let near_first = MixupConfig { beta_a: 1.0, beta_b: 50.0, ..cfg };
        let out = augment_training_set(&s, &near_first).unwrap();
        assert!(out[8..].iter().all(|x| x.label.as_ref().unwrap().as_str() == "A"));
    }

    #[test]
    fn target_classes_restrict_budget() {
        let s = two_class(3, 7);
        let cfg = MixupConfig { target_classes: Some(vec![ClassId::new("B")]), ..MixupConfig::default() };
        assert_eq!(augment_training_set(&s, &cfg).unwrap().len(), 10);
    }

    #[test]
    fn errors() {
        let s = two_class(5, 1);
        assert_eq!(
            augment_training_set(&s, &MixupConfig::default()).unwrap_err(),
            AugmentError::ClassTooSmall(ClassId::new("B"))
        );
        let bad = MixupConfig { beta_a: 0.0, ..MixupConfig::default() };
        assert!(matches!(augment_training_set(&s, &bad), Err(AugmentError::InvalidConfig(_))));
        let cross = MixupConfig { pairing: Pairing::CrossClass, ..MixupConfig::default() };
        assert!(augment_training_set(&s, &cross).is_ok());
    }
}
