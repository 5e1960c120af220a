use imave::{generate_data, imave2_fit, imave_fit, EtaMode, FitConfig, GShape, ScenarioSpec};

fn main() -> imave::Result<()> {
    let sim = generate_data(&ScenarioSpec::standard(GShape::Logistic, 500, 1))?;
    let cfg = FitConfig::default();

    let first = imave_fit(&sim.dataset, 1, EtaMode::Zero, &cfg)?;
    let second = imave2_fit(&sim.dataset, 1, &cfg)?;
    for (name, fit) in [("imave", &first), ("imave2", &second)] {
        let b = fit.b.matrix();
        println!(
            "{name:>7}: b = {:.3?}  distance {:.4}  iterations {}",
            b.as_slice(),
            fit.b.subspace_distance(sim.b0.matrix()),
            fit.iterations
        );
    }
    Ok(())
}
