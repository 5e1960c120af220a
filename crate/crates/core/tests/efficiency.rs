use imave::efficiency::{estimate_eta_star, residuals};
use imave::{generate_data, imave_fit, Dataset, EtaMode, FitConfig, GEstimate, GShape, KernelFamily, ScenarioSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPAN: KernelFamily = KernelFamily::Epanechnikov;

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

fn sup_error(n: usize) -> f64 {
    let mut spec = ScenarioSpec::standard(GShape::Linear, n, 30 + n as u64);
    spec.sigma = 0.0;
    spec.gamma = 0.0;
    let sim = generate_data(&spec).unwrap();
    let ghat = GEstimate::new(&sim.dataset, &sim.b0, EPAN, None).unwrap();
    (0..=40)
        .map(|k| {
            let u = -1.0 + 0.05 * k as f64;
            let x = [u / 2.0; 4];
            (ghat.predict(&x).unwrap().value() - spec.g_at(&x)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn contrast_smoother_error_shrinks_with_n() {
    let (small, large) = (sup_error(500), sup_error(2000));
    assert!(large < small, "{large} >= {small}");
}

fn first_stage(shape: GShape, n: usize, seed: u64) -> (imave::SimulatedData, imave::FitResult) {
    let sim = generate_data(&ScenarioSpec::standard(shape, n, seed)).unwrap();
    let fit = imave_fit(&sim.dataset, 1, EtaMode::Zero, &FitConfig::default()).unwrap();
    (sim, fit)
}

#[test]
fn residuals_track_the_main_effect() {
    let mut r: Vec<f64> = (0..5)
        .map(|seed| {
            let (sim, fit) = first_stage(GShape::Linear, 1000, 3 + seed);
            let ghat = GEstimate::new(&sim.dataset, &fit.b, EPAN, None).unwrap();
            let eps = residuals(&sim.dataset, &ghat).unwrap();
            correlation(&eps, &sim.main_effect)
        })
        .collect();
    r.sort_by(f64::total_cmp);
    assert!(r[2] > 0.9, "correlations {r:?}");
}

#[test]
fn flipping_treatments_flips_the_subtracted_term() {
    let (sim, fit) = first_stage(GShape::Gaussian, 200, 4);
    let ds = &sim.dataset;
    let ghat = GEstimate::new(ds, &fit.b, EPAN, None).unwrap();
    let eps = residuals(ds, &ghat).unwrap();
    let raw = ds.to_raw();
    let flipped_t: Vec<i32> = ds.t().iter().map(|t| -t).collect();
    let flipped = Dataset::new(ds.x_rows().to_vec(), ds.n(), ds.p(), ds.y().to_vec(), flipped_t, 2, raw.pi).unwrap();
    let g: Vec<f64> = ghat.predict_rows(ds.x_rows()).unwrap().iter().map(|s| s.value()).collect();
    // Same g_hat, opposite treatment signs.
    for i in 0..ds.n() {
        let direct = flipped.y()[i] - 0.5 * flipped.t()[i] as f64 * g[i];
        assert!((direct - (2.0 * ds.y()[i] - eps[i])).abs() < 1e-9);
    }
}

#[test]
fn eta_star_at_the_origin_matches_smoothed_truth() {
    // The true main effect vanishes at the origin, but a p-dimensional
    // smoother of it does not; compare against that smoothed truth.
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let (sim, fit) = first_stage(GShape::Linear, 1000, 100 + seed);
        let ghat = GEstimate::new(&sim.dataset, &fit.b, EPAN, None).unwrap();
        let eps = residuals(&sim.dataset, &ghat).unwrap();
        let eta = estimate_eta_star(&sim.dataset, &eps, EPAN, None).unwrap();
        let smoothed = estimate_eta_star(&sim.dataset, &sim.main_effect, EPAN, Some(eta.bandwidth())).unwrap();
        let gap = eta.predict(&[0.0; 4]).value() - smoothed.predict(&[0.0; 4]).value();
        worst = worst.max(gap.abs());
    }
    assert!(worst < 0.2, "gap up to {worst}");
}

#[test]
fn constant_residuals_give_a_constant_eta_star() {
    let sim = generate_data(&ScenarioSpec::standard(GShape::Linear, 100, 11)).unwrap();
    let eta = estimate_eta_star(&sim.dataset, &vec![2.5; 100], EPAN, None).unwrap();
    for x in [[0.0; 4], [0.3, -0.2, 0.1, 0.9], [9.0; 4]] {
        assert!((eta.predict(&x).value() - 2.5).abs() < 1e-12);
    }
}

#[test]
fn eta_star_is_bounded_by_the_residuals() {
    let (sim, fit) = first_stage(GShape::Logistic, 300, 5);
    let ghat = GEstimate::new(&sim.dataset, &fit.b, EPAN, None).unwrap();
    let eps = residuals(&sim.dataset, &ghat).unwrap();
    let (lo, hi) = eps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let eta = estimate_eta_star(&sim.dataset, &eps, EPAN, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let queries: Vec<f64> = (0..10_000 * 4).map(|_| rng.random_range(-4.0..4.0)).collect();
    for s in eta.predict_rows(&queries) {
        assert!(s.value() >= lo - 1e-9 && s.value() <= hi + 1e-9);
    }
}

#[test]
fn smoothers_ignore_sample_order() {
    let (sim, fit) = first_stage(GShape::Gaussian, 200, 7);
    let ds = &sim.dataset;
    let order: Vec<usize> = (0..ds.n()).map(|i| (i * 37) % ds.n()).collect();
    let shuffled = ds.subset(&order).unwrap();
    let a = GEstimate::new(ds, &fit.b, EPAN, None).unwrap();
    let b = GEstimate::new(&shuffled, &fit.b, EPAN, None).unwrap();
    let eps_a = residuals(ds, &a).unwrap();
    let eps_b: Vec<f64> = order.iter().map(|&i| eps_a[i]).collect();
    let ea = estimate_eta_star(ds, &eps_a, EPAN, None).unwrap();
    let eb = estimate_eta_star(&shuffled, &eps_b, EPAN, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        assert!((a.predict(&x).unwrap().value() - b.predict(&x).unwrap().value()).abs() < 1e-12);
        assert!((ea.predict(&x).value() - eb.predict(&x).value()).abs() < 1e-12);
    }
}

#[test]
fn zero_eta_star_reproduces_the_first_stage() {
    let sim = generate_data(&ScenarioSpec::standard(GShape::Logistic, 250, 9)).unwrap();
    let cfg = FitConfig::default();
    let first = imave_fit(&sim.dataset, 1, EtaMode::Zero, &cfg).unwrap();
    let refit = imave_fit(&sim.dataset, 1, EtaMode::EstimatedStar(vec![0.0; 250]), &cfg).unwrap();
    assert_eq!(refit.b, first.b);
    assert_eq!(refit.loss_trace, first.loss_trace);
    assert_eq!(refit.local_fits, first.local_fits);
}

#[test]
fn any_fixed_offset_keeps_ratios_unbiased() {
    let cfg = FitConfig::default();
    let reps = 10;
    let mut sums = [0.0; 3];
    for rep in 0..reps {
        let sim = generate_data(&ScenarioSpec::standard(GShape::Linear, 2000, 500 + rep)).unwrap();
        let fit = imave_fit(&sim.dataset, 1, EtaMode::Fixed(vec![5.0; 2000]), &cfg).unwrap();
        let b = fit.b.matrix();
        for j in 0..3 {
            sums[j] += b[(j + 1, 0)] / b[(0, 0)];
        }
    }
    for s in sums {
        let mean = s / reps as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean ratio {mean}");
    }
}

#[test]
fn constant_weighted_outcome_gives_a_constant_g_hat() {
    // T Y / pi = 4 on every row.
    let sim = generate_data(&ScenarioSpec::standard(GShape::Linear, 120, 12)).unwrap();
    let ds = &sim.dataset;
    let y: Vec<f64> = ds.t().iter().map(|&t| t as f64).collect();
    let flat =
        Dataset::new(ds.x_rows().to_vec(), ds.n(), ds.p(), y, ds.t().to_vec(), 2, Some(vec![0.25; 120])).unwrap();
    let ghat = GEstimate::new(&flat, &sim.b0, EPAN, None).unwrap();
    for x in [[0.0; 4], [1.0, -1.0, 0.5, 0.2], [-7.0; 4]] {
        assert!((ghat.predict(&x).unwrap().value() - 4.0).abs() < 1e-12);
    }
}
