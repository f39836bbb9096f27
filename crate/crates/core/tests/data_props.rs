//! Feature filtering keeps track of original columns and settles after one pass.

use graphconv::data::{filter_features, Dataset, TargetValues};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Column {
    Zero,
    Constant(f64),
    Sparse(Vec<Option<f64>>),
    Dense(Vec<f64>),
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (2usize..12, 1usize..10).prop_flat_map(|(rows, cols)| {
        let column = prop_oneof![
            Just(Column::Zero),
            (-3.0f64..3.0).prop_map(Column::Constant),
            prop::collection::vec(prop::option::weighted(0.3, -3.0f64..3.0), rows)
                .prop_map(Column::Sparse),
            prop::collection::vec(-3.0f64..3.0, rows).prop_map(Column::Dense),
        ];
        prop::collection::vec(column, cols).prop_map(move |columns| {
            let mut features = vec![0.0; rows * cols];
            for (j, c) in columns.iter().enumerate() {
                for i in 0..rows {
                    features[i * cols + j] = match c {
                        Column::Zero => 0.0,
                        Column::Constant(v) => *v,
                        Column::Sparse(v) => v[i].unwrap_or(0.0),
                        Column::Dense(v) => v[i],
                    };
                }
            }
            let targets = TargetValues::Classes((0..rows).map(|i| i % 3).collect());
            Dataset::new(features, rows, cols, targets).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn filtering_twice_changes_nothing(
        data in dataset_strategy(),
        min_active in 0usize..6,
        drop_constant in any::<bool>(),
    ) {
        let Ok(once) = filter_features(&data, min_active, drop_constant) else {
            return Ok(());
        };
        let twice = filter_features(&once, min_active, drop_constant).unwrap();
        prop_assert_eq!(twice.features(), once.features());
        prop_assert_eq!(twice.feature_index_map(), once.feature_index_map());
        prop_assert!(once.feature_index_map().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn restoring_dropped_columns_round_trips(
        data in dataset_strategy(),
        min_active in 1usize..6,
        drop_constant in any::<bool>(),
    ) {
        let Ok(kept) = filter_features(&data, min_active, drop_constant) else {
            return Ok(());
        };
        let restored = kept.restore_dropped(data.n_features()).unwrap();
        prop_assert_eq!(restored.n_features(), data.n_features());
        prop_assert_eq!(restored.feature_index_map(), &(0..data.n_features()).collect::<Vec<_>>()[..]);
        for i in 0..data.n_obs() {
            for j in 0..data.n_features() {
                let expect = if kept.feature_index_map().contains(&j) { data.row(i)[j] } else { 0.0 };
                prop_assert_eq!(restored.row(i)[j], expect);
            }
        }
        let again = filter_features(&restored, min_active, drop_constant).unwrap();
        prop_assert_eq!(again.features(), kept.features());
        prop_assert_eq!(again.feature_index_map(), kept.feature_index_map());
        prop_assert_eq!(again.targets(), kept.targets());
    }
}
