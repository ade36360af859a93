use std::collections::BTreeSet;
use std::fs;

use hyperbilevel::data::{
    generate, load, read_feature_csv, read_labels_csv, split, synthesize_to, SplitSpec, SyntheticSpec,
};
use hyperbilevel::Error;
use proptest::prelude::*;

fn class_sizes(truth: &[usize], n_classes: usize, members: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for v in members {
        counts[truth[v]] += 1;
    }
    counts
}

fn arb_truth() -> impl Strategy<Value = (Vec<usize>, usize)> {
    (2usize..=5).prop_flat_map(|l| {
        // Every class present: a prefix 0..l, then arbitrary draws.
        proptest::collection::vec(0..l, 0..150).prop_map(move |rest| {
            let mut truth: Vec<usize> = (0..l).chain(rest).collect();
            let shift = truth.len() / 3;
            truth.rotate_left(shift);
            (truth, l)
        })
    })
}

fn arb_split_spec() -> impl Strategy<Value = SplitSpec> {
    (0.01f64..0.99, 0.0f64..0.9, 0.0f64..0.9, any::<u64>()).prop_map(|(label_rate, test_fraction, ov, seed)| {
        SplitSpec {
            label_rate,
            test_fraction,
            outer_val_fraction: ov,
            seed,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn split_is_a_partition((truth, l) in arb_truth(), spec in arb_split_spec()) {
        let s = split(&truth, l, &spec).unwrap();
        let labeled: Vec<usize> = s.labels.labeled().iter().map(|p| p.0).collect();
        let unlabeled = s.unlabeled_train();
        let mut all: Vec<usize> = labeled.iter().chain(&unlabeled).chain(&s.test).chain(&s.outer_val).copied().collect();
        let total = all.len();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(total, truth.len());
        prop_assert_eq!(all, (0..truth.len()).collect::<Vec<_>>());
        for &(v, c) in s.labels.labeled() {
            prop_assert_eq!(truth[v], c);
        }
        let per_class = class_sizes(&truth, l, labeled.iter().copied());
        prop_assert!(per_class.iter().all(|&c| c >= 1));
    }

    #[test]
    fn labeled_budget_is_stratified((truth, l) in arb_truth(), spec in arb_split_spec()) {
        let s = split(&truth, l, &spec).unwrap();
        let test: BTreeSet<usize> = s.test.iter().copied().collect();
        let train: Vec<usize> = (0..truth.len()).filter(|v| !test.contains(v)).collect();
        let train_sizes = class_sizes(&truth, l, train.iter().copied());
        let budget = (spec.label_rate * train.len() as f64 - 1e-9).ceil();
        let drawn = class_sizes(
            &truth,
            l,
            s.labels.labeled().iter().map(|p| p.0).chain(s.outer_val.iter().copied()),
        );
        for c in 0..l {
            let proportional = budget * train_sizes[c] as f64 / train.len() as f64;
            prop_assert!((drawn[c] as f64 - proportional).abs() <= 1.0 + 1e-9,
                "class {}: drew {} for proportional {}", c, drawn[c], proportional);
        }
    }

    #[test]
    fn generator_classes_are_balanced(n in 8usize..300, l in 2usize..6, seed in any::<u64>()) {
        let mut spec = SyntheticSpec::moderate(seed);
        spec.n_subjects = n;
        spec.n_classes = l;
        for m in &mut spec.modalities {
            m.k = 3;
        }
        let (mods, truth) = generate(&spec).unwrap();
        let sizes = class_sizes(&truth, l, 0..n);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert!(mods.iter().all(|m| m.n_subjects() == n));
    }
}

#[test]
fn same_seed_same_split() {
    let truth: Vec<usize> = (0..200).map(|i| i % 4).collect();
    let spec = SplitSpec {
        seed: 17,
        ..SplitSpec::default()
    };
    let a = split(&truth, 4, &spec).unwrap();
    let b = split(&truth, 4, &spec).unwrap();
    assert_eq!(a.labels.labeled(), b.labels.labeled());
    assert_eq!((a.test, a.outer_val), (b.test, b.outer_val));
}

#[test]
fn synthesized_dataset_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SyntheticSpec::planted(4);
    spec.n_subjects = 60;
    let manifest = synthesize_to(dir.path(), &spec).unwrap();
    let ds = load(&manifest).unwrap();
    let (mods, truth) = generate(&spec).unwrap();
    assert_eq!(ds.n_subjects(), 60);
    assert_eq!(ds.full_labels().unwrap(), truth);
    assert_eq!(ds.class_count(), Some(4));
    for (a, b) in ds.modalities.iter().zip(&mods) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.kind, b.kind);
        assert_eq!(a.features, b.features);
    }
    let text = fs::read_to_string(dir.path().join("labels.csv")).unwrap();
    assert!(text.starts_with("# seed=4\n"));
}

#[test]
fn feature_csv_errors_name_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    fs::write(&p, "a,b\n1,2\n3,oops\n").unwrap();
    match read_feature_csv(&p) {
        Err(Error::NonNumeric { line, column, cell, .. }) => {
            assert_eq!((line, column, cell.as_str()), (3, 2, "oops"));
        }
        other => panic!("expected a non-numeric error, got {other:?}"),
    }
    fs::write(&p, "a,b\n").unwrap();
    assert!(matches!(read_feature_csv(&p), Err(Error::NoDataRows(_))));
    fs::write(&p, "a,b\n1,2\n3\n").unwrap();
    assert!(read_feature_csv(&p).is_err());
    assert!(matches!(
        read_feature_csv(&dir.path().join("missing.csv")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn labels_csv_with_and_without_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("l.csv");
    fs::write(&p, "# seed=1\nsubject_index,class_label\n0,1\n5,0\n").unwrap();
    assert_eq!(read_labels_csv(&p).unwrap(), vec![(0, 1), (5, 0)]);
    fs::write(&p, "2,3\n").unwrap();
    assert_eq!(read_labels_csv(&p).unwrap(), vec![(2, 3)]);
    fs::write(&p, "2,3\n4,x\n").unwrap();
    assert!(read_labels_csv(&p).is_err());
}

#[test]
fn row_count_mismatch_names_both_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "f\n1\n2\n3\n").unwrap();
    fs::write(dir.path().join("b.csv"), "f\n1\n2\n").unwrap();
    fs::write(
        dir.path().join("m.toml"),
        "[[modality]]\nname = \"a\"\npath = \"a.csv\"\nkind = \"phenotype\"\nk = 1\n\n\
         [[modality]]\nname = \"b\"\npath = \"b.csv\"\nkind = \"phenotype\"\nk = 1\n",
    )
    .unwrap();
    let err = load(&dir.path().join("m.toml")).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::RowCountMismatch { .. }), "{msg}");
    assert!(msg.contains("a.csv") && msg.contains("b.csv"), "{msg}");
}

#[test]
fn invalid_specs_are_rejected() {
    let bad = SplitSpec {
        label_rate: 0.0,
        ..SplitSpec::default()
    };
    assert!(bad.validate().is_err());
    let mut spec = SyntheticSpec::moderate(0);
    spec.n_classes = 1;
    assert!(spec.validate().is_err());
    assert!(SyntheticSpec::from_toml("n_subjects = \"many\"").is_err());
}
