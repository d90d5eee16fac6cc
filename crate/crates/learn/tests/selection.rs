use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resil_core::par::Schedule;
use resil_learn::ranking::ranks_of;
use resil_learn::{
    fold_partition, grid_points, grid_search, kfold_cv, rank_features, top_k_sweep, train_pipeline,
    CvConfig, Dataset, Grid, LearnError, MiBins, ModelKind, ModelSpec, PipelineConfig, Target,
};

fn cv(k: usize, seed: u64) -> CvConfig {
    CvConfig {
        k,
        seed,
        ..CvConfig::default()
    }
}

fn noise_with_signal(
    n: usize,
    d: usize,
    informative: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let y = x.iter().map(|r| 0.1 + 0.8 * r[informative]).collect();
    (x, y)
}

#[test]
fn exact_copy_of_target_ranks_first() {
    let (x, y) = noise_with_signal(80, 6, 3, 1);
    let r = rank_features(&x, &y, MiBins::SqrtRows).unwrap();
    assert_eq!(ranks_of(&r.p_value)[3], 1);
    assert_eq!(ranks_of(&r.mutual_information)[3], 1);
}

#[test]
fn constant_feature_has_last_variance_and_zero_mi() {
    let (mut x, y) = noise_with_signal(40, 4, 0, 2);
    for r in &mut x {
        r[2] = 0.5;
    }
    let r = rank_features(&x, &y, MiBins::SqrtRows).unwrap();
    assert_eq!(*r.variance.last().unwrap(), 2);
    let col: Vec<f64> = x.iter().map(|r| r[2]).collect();
    assert_eq!(resil_learn::ranking::mutual_information(&col, &y, 7), 0.0);
}

#[test]
fn ranking_needs_three_rows() {
    let err = rank_features(&[vec![1.0], vec![2.0]], &[0.0, 1.0], MiBins::SqrtRows);
    assert_eq!(
        err.unwrap_err(),
        LearnError::TooFewRows { needed: 3, got: 2 }
    );
}

#[test]
fn knn_grid_prefers_one_neighbour_on_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let centres = [
        [0.0, 0.0],
        [10.0, 0.0],
        [0.0, 10.0],
        [10.0, 10.0],
        [5.0, 20.0],
        [20.0, 5.0],
        [20.0, 20.0],
        [-10.0, 5.0],
    ];
    let labels = [0.1, 0.9, 0.4, 0.7, 0.2, 0.6, 0.3, 0.8];
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (c, l) in centres.iter().zip(labels) {
        for _ in 0..3 {
            x.push(vec![
                c[0] + rng.random_range(-0.3..0.3),
                c[1] + rng.random_range(-0.3..0.3),
            ]);
            y.push(l);
        }
    }
    let mut grid = Grid::new();
    grid.insert("k".into(), vec![1.0, 5.0, 25.0]);
    let r = grid_search(ModelKind::Knn, &grid, &x, &y, &cv(6, 3)).unwrap();
    assert_eq!(r.best.get("k"), 1.0);
    assert_eq!(r.evaluated.len(), 3);
}

#[test]
fn singleton_grid_returns_its_point() {
    let (x, y) = noise_with_signal(20, 2, 0, 6);
    let mut grid = Grid::new();
    grid.insert("lambda".into(), vec![0.5]);
    let r = grid_search(ModelKind::Ridge, &grid, &x, &y, &cv(5, 0)).unwrap();
    assert_eq!(
        r.best,
        ModelSpec::new(ModelKind::Ridge)
            .with("lambda", 0.5)
            .unwrap()
    );
}

#[test]
fn grid_evaluates_every_combination() {
    let (x, y) = noise_with_signal(20, 2, 0, 7);
    let mut grid = Grid::new();
    grid.insert("max_depth".into(), vec![1.0, 2.0, 3.0]);
    grid.insert("min_leaf".into(), vec![1.0, 2.0]);
    let r = grid_search(ModelKind::Tree, &grid, &x, &y, &cv(4, 0)).unwrap();
    assert_eq!(r.evaluated.len(), 6);
    assert_eq!(grid_points(ModelKind::Tree, &grid).unwrap().len(), 6);
}

#[test]
fn sweep_finds_the_informative_feature() {
    let (x, y) = noise_with_signal(60, 6, 0, 8);
    let spec = ModelSpec::new(ModelKind::Knn).with("k", 3.0).unwrap();
    let ranking = rank_features(&x, &y, MiBins::SqrtRows).unwrap();
    assert_eq!(ranking.global[0], 0);
    let s = top_k_sweep(&x, &y, &spec, &ranking, &cv(5, 1)).unwrap();
    assert_eq!(
        s.curve.iter().map(|c| c.0).collect::<Vec<_>>(),
        vec![2, 3, 4, 5, 6]
    );
    assert_eq!(s.best_k, 2);
    assert_eq!(s.selected[0], 0);
    // more noise dimensions never help knn here
    assert!(s.curve.windows(2).all(|w| w[1].1 <= w[0].1 + 0.02));
    assert_eq!(s, top_k_sweep(&x, &y, &spec, &ranking, &cv(5, 1)).unwrap());
}

#[test]
fn leave_one_out_is_supported() {
    let (x, y) = noise_with_signal(12, 2, 1, 9);
    let r = kfold_cv(&x, &y, &ModelSpec::new(ModelKind::Knn), &cv(12, 0)).unwrap();
    assert_eq!(r.folds.len(), 12);
}

#[test]
fn cv_is_schedule_independent() {
    let (x, y) = noise_with_signal(40, 3, 1, 10);
    let spec = ModelSpec::new(ModelKind::Forest)
        .with("n_trees", 10.0)
        .unwrap();
    let seq = CvConfig {
        schedule: Schedule::Sequential,
        ..cv(10, 4)
    };
    assert_eq!(
        kfold_cv(&x, &y, &spec, &seq).unwrap(),
        kfold_cv(&x, &y, &spec, &cv(10, 4)).unwrap()
    );
}

fn synthetic_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..30).map(|_| rng.random::<f64>()).collect())
        .collect();
    let s = x.iter().map(|r| 0.2 + 0.6 * r[4]).collect();
    let i = x.iter().map(|r| 0.1 + 0.3 * r[7] * r[8]).collect();
    Dataset::new((0..n).map(|i| format!("k{i}")).collect(), x, s, i).unwrap()
}

#[test]
fn pipeline_report_and_reproducibility() {
    let data = synthetic_dataset(60, 11);
    let mut grid = Grid::new();
    grid.insert("n_stages".into(), vec![20.0, 40.0]);
    let config = PipelineConfig {
        grid: Some(grid),
        bags: 3,
        seed: 5,
        ..PipelineConfig::default()
    };
    let (p, report) = train_pipeline(&data, Target::Success, &config).unwrap();
    assert!((2..=30).contains(&report.chosen_k));
    assert_eq!(p.selected.len(), report.chosen_k);
    assert_eq!(p.ensemble.len(), 3);
    assert!(report.cv_variance >= 0.0);
    let (again, report2) = train_pipeline(&data, Target::Success, &config).unwrap();
    assert_eq!(p.to_json(), again.to_json());
    assert_eq!(report, report2);
}

#[test]
fn pipeline_rejects_tiny_datasets() {
    let data = synthetic_dataset(9, 12);
    let err = train_pipeline(&data, Target::Success, &PipelineConfig::default()).unwrap_err();
    assert!(matches!(err, LearnError::TooFewRows { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn folds_partition_rows(n in 2usize..300, k in 2usize..20, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = fold_partition(n, k, seed);
        prop_assert_eq!(folds.len(), k);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn duplicated_rows_keep_rankings(seed in any::<u64>(), n in 5usize..40, d in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 0.5 + rng.random::<f64>() * 0.5).collect();
        let bins = MiBins::Fixed(5);
        let once = rank_features(&x, &y, bins).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
        let twice = rank_features(&x2, &y2, bins).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn rankings_are_permutations(seed in any::<u64>(), n in 3usize..30, d in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| (rng.random_range(0..4)) as f64).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let r = rank_features(&x, &y, MiBins::SqrtRows).unwrap();
        for order in [&r.variance, &r.p_value, &r.mutual_information, &r.global] {
            let mut o = order.clone();
            o.sort_unstable();
            prop_assert_eq!(o, (0..d).collect::<Vec<_>>());
        }
    }
}
