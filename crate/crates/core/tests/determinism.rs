//! Results must not depend on the number of worker threads.

use imave::selection::select_dimension;
use imave::{
    generate_data, imave2_fit, imave_fit, run_replication_study, CvConfig, EtaMode, FitConfig, GShape, ScenarioSpec,
    StudyConfig,
};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

const POOLS: [usize; 3] = [1, 2, 5];

#[test]
fn fits_are_identical_across_pool_sizes() {
    let ds = generate_data(&ScenarioSpec::standard(GShape::Logistic, 300, 8)).unwrap().dataset;
    let cfg = FitConfig::default();
    let reference =
        in_pool(1, || (imave_fit(&ds, 1, EtaMode::SongPi, &cfg).unwrap(), imave2_fit(&ds, 2, &cfg).unwrap()));
    for threads in POOLS {
        let again =
            in_pool(threads, || (imave_fit(&ds, 1, EtaMode::SongPi, &cfg).unwrap(), imave2_fit(&ds, 2, &cfg).unwrap()));
        assert_eq!(again, reference, "{threads} threads");
    }
}

#[test]
fn cross_validation_is_identical_across_pool_sizes() {
    let ds = generate_data(&ScenarioSpec::two_index(150, 2)).unwrap().dataset;
    let cv = CvConfig { seed: 5, ..CvConfig::default() };
    let cfg = FitConfig { max_iter: 5, ..FitConfig::default() };
    let reference = in_pool(1, || select_dimension(&ds, 2, &cv, &cfg).unwrap());
    for threads in POOLS {
        assert_eq!(in_pool(threads, || select_dimension(&ds, 2, &cv, &cfg).unwrap()), reference);
    }
}

#[test]
fn study_is_identical_across_pool_sizes() {
    let cfg = StudyConfig {
        shapes: vec![GShape::Gaussian],
        sizes: vec![100],
        reps: 3,
        seed: 21,
        test_size: 300,
        ..StudyConfig::default()
    };
    let reference = in_pool(1, || run_replication_study(&cfg).unwrap());
    for threads in POOLS {
        assert_eq!(in_pool(threads, || run_replication_study(&cfg).unwrap()), reference);
    }
}
