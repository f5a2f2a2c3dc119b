use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use proptest::prelude::*;

use geodesic_ecg::augment::{MixupConfig, SYNTHETIC_PATIENT_ID};
use geodesic_ecg::eval::{auc_binary_doubled, auc_macro_ovr, make_splits};
use geodesic_ecg::features::{fit_tangent, BaseLabel, TangentMode};
use geodesic_ecg::spd::{KarcherConfig, SpdMatrix, SpdSample};
use geodesic_ecg::ClassId;

fn patients_strategy() -> impl Strategy<Value = Vec<(String, ClassId)>> {
    prop::collection::vec(2usize..6, 2..5).prop_map(|counts| {
        let mut out = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for p in 0..n {
                out.push((format!("p{c}_{p}"), ClassId::new(format!("class{c}"))));
            }
        }
        out.push((SYNTHETIC_PATIENT_ID.to_string(), ClassId::new("class0")));
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn splits_hold_out_one_real_patient_per_class(patients in patients_strategy(), seed in any::<u64>()) {
        let classes: BTreeSet<&ClassId> = patients.iter().map(|(_, c)| c).collect();
        for plan in make_splits(&patients, 20, seed).unwrap() {
            prop_assert_eq!(plan.test_patients.len(), classes.len());
            prop_assert!(!plan.is_test(SYNTHETIC_PATIENT_ID));
            for (class, p) in &plan.test_patients {
                prop_assert!(!plan.is_train(p));
                prop_assert!(patients.iter().any(|(q, c)| q == p && c == class));
            }
            let real: usize = patients.iter().filter(|(p, _)| p != SYNTHETIC_PATIENT_ID).count();
            prop_assert_eq!(plan.train_patients.len() + plan.test_patients.len(), real);
        }
    }

    #[test]
    fn splits_are_reproducible(patients in patients_strategy(), seed in any::<u64>()) {
        prop_assert_eq!(make_splits(&patients, 5, seed).unwrap(), make_splits(&patients, 5, seed).unwrap());
    }

    #[test]
    fn binary_auc_is_rank_based(
        pos in prop::collection::vec(0i32..6, 1..12),
        neg in prop::collection::vec(0i32..6, 1..12),
    ) {
        let (p, n): (Vec<f64>, Vec<f64>) = (pos.iter().map(|&v| v as f64).collect(), neg.iter().map(|&v| v as f64).collect());
        let doubled = auc_binary_doubled(&p, &n);
        // any strictly increasing transform leaves the pair counts unchanged
        let (pe, ne): (Vec<f64>, Vec<f64>) = (p.iter().map(|v| v.exp()).collect(), n.iter().map(|v| v.exp()).collect());
        prop_assert_eq!(doubled, auc_binary_doubled(&pe, &ne));
        // swapping the roles complements the statistic
        prop_assert_eq!(doubled + auc_binary_doubled(&n, &p), 2 * (p.len() * n.len()) as u64);
    }

    #[test]
    fn macro_auc_ignores_row_order(rows in prop::collection::vec((0usize..3, prop::collection::vec(0.0..1.0f64, 3)), 6..20)) {
        let classes: Vec<ClassId> = (0..3).map(|i| ClassId::new(format!("c{i}"))).collect();
        let labels: Vec<ClassId> = rows.iter().map(|(l, _)| classes[*l].clone()).collect();
        let scores: Vec<Vec<f64>> = rows.iter().map(|(_, s)| s.clone()).collect();
        let forward = auc_macro_ovr(&labels, &scores, &classes);
        let (rl, rs): (Vec<ClassId>, Vec<Vec<f64>>) = (labels.iter().rev().cloned().collect(), scores.iter().rev().cloned().collect());
        let backward = auc_macro_ovr(&rl, &rs, &classes);
        match (forward, backward) {
            (Ok(f), Ok(b)) => {
                prop_assert_eq!(f.per_class, b.per_class);
                prop_assert!(f.macro_auc >= 0.0 && f.macro_auc <= 1.0);
            }
            (f, b) => prop_assert_eq!(f.is_err(), b.is_err()),
        }
    }

    #[test]
    fn default_budget_tops_up_to_largest_class(sizes in prop::collection::vec(1usize..40, 1..6)) {
        let counts: BTreeMap<ClassId, usize> =
            sizes.iter().enumerate().map(|(i, &n)| (ClassId::new(format!("c{i}")), n)).collect();
        let budget = MixupConfig::default().budget(&counts);
        let largest = *sizes.iter().max().unwrap();
        for (class, n) in &counts {
            prop_assert_eq!(n + budget.get(class).copied().unwrap_or(0), largest);
        }
    }
}

fn diag(values: &[f64]) -> SpdMatrix<f64> {
    SpdMatrix::new(Array2::from_diag(&ndarray::Array1::from(values.to_vec()))).unwrap()
}

#[test]
fn multiple_tangent_blocks_follow_sorted_class_order() {
    let samples = vec![
        SpdSample::labelled(diag(&[4.0, 1.0]), ClassId::new("zeta")),
        SpdSample::labelled(diag(&[1.0, 1.0]), ClassId::new("alpha")),
        SpdSample::labelled(diag(&[4.0, 1.0]), ClassId::new("zeta")),
        SpdSample::labelled(diag(&[1.0, 9.0]), ClassId::new("mid")),
    ];
    let model = fit_tangent(&samples, TangentMode::Multiple, &KarcherConfig::default()).unwrap();
    let labels: Vec<&BaseLabel> = model.base_points().map(|(l, _)| l).collect();
    let names: Vec<String> = labels
        .iter()
        .map(|l| match l {
            BaseLabel::Class(c) => c.to_string(),
            BaseLabel::Global => "global".into(),
        })
        .collect();
    assert_eq!(names, ["alpha", "mid", "zeta"]);
    assert_eq!(model.block_len(), 3);
    assert_eq!(model.feature_dim(), 9);

    // a point equal to a class mean maps to zero in that class's block
    let v = model.transform(&diag(&[4.0, 1.0])).unwrap();
    assert!(v.slice(ndarray::s![6..9]).iter().all(|x| x.abs() < 1e-12));
    assert!(v.slice(ndarray::s![0..3]).iter().any(|x| x.abs() > 0.1));
}

#[test]
fn single_tangent_space_has_one_block() {
    let samples: Vec<SpdSample<f64>> = [[1.0, 2.0], [2.0, 1.0], [1.5, 1.5]].iter().map(|d| SpdSample::new(diag(d))).collect();
    let model = fit_tangent(&samples, TangentMode::Single, &KarcherConfig::default()).unwrap();
    assert_eq!(model.feature_dim(), 3);
    assert!(matches!(model.base_points().next().unwrap().0, BaseLabel::Global));
}
