use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::augment::SYNTHETIC_PATIENT_ID;
use crate::class::ClassId;
use crate::rng::derive_seed;

/// One leave-out repetition: a single held-out patient per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub repetition_index: usize,
    pub test_patients: BTreeMap<ClassId, String>,
    pub train_patients: BTreeSet<String>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn is_test(&self, patient_id: &str) -> bool {
        self.test_patients.values().any(|p| p == patient_id)
    }

    pub fn is_train(&self, patient_id: &str) -> bool {
        self.train_patients.contains(patient_id)
    }
}

/// Repetition `r` draws from a generator seeded with `derive_seed(master_seed, r)`;
/// classes are visited in canonical order and patients within a class in id
/// order, so plans do not depend on input order. Duplicate `(patient, class)`
/// pairs are allowed (one per recording); synthetic samples are ignored.
pub fn make_splits(
    patients: &[(String, ClassId)],
    repetitions: usize,
    master_seed: u64,
) -> Result<Vec<SplitPlan>, EvalError> {
    let mut label_of: BTreeMap<&str, &ClassId> = BTreeMap::new();
    for (pid, class) in patients {
        if pid == SYNTHETIC_PATIENT_ID {
            continue;
        }
        if let Some(prev) = label_of.insert(pid, class) {
            if prev != class {
                return Err(EvalError::InconsistentPatient(pid.clone()));
            }
        }
    }
    let mut by_class: BTreeMap<&ClassId, Vec<&str>> = BTreeMap::new();
    for (&pid, &class) in &label_of {
        by_class.entry(class).or_default().push(pid);
    }
    if by_class.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if let Some((class, _)) = by_class.iter().find(|(_, p)| p.len() < 2) {
        return Err(EvalError::ClassTooSmall((*class).clone()));
    }

    Ok((0..repetitions)
        .map(|r| {
            let seed = derive_seed(master_seed, r as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let test_patients: BTreeMap<ClassId, String> = by_class
                .iter()
                .map(|(&class, members)| (class.clone(), members[rng.random_range(0..members.len())].to_owned()))
                .collect();
            let train_patients = label_of
                .keys()
                .filter(|p| !test_patients.values().any(|t| t == *p))
                .map(|p| (*p).to_owned())
                .collect();
            SplitPlan { repetition_index: r, test_patients, train_patients, seed }
        })
        .collect())
}
