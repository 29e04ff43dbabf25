use localizability::estimation::*;
use localizability::fisher::{crlb_unconstrained, fim, NoiseModel, DEFAULT_PINV_TOL};
use localizability::geometry::{build_graph, Configuration};
use localizability::instances::random_rigid_network;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn single_tag_mse_is_near_the_crlb() {
    let graph = build_graph(2, 1, 4, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
    let config = Configuration::from_points(
        2,
        &[vec![2.0, 3.0], vec![0.0, 0.0], vec![5.0, 0.0], vec![5.0, 5.0], vec![0.0, 5.0]],
    )
    .unwrap();
    let noise = NoiseModel::additive(0.1);
    let bound = crlb_unconstrained(&fim(&graph, &config, &noise).unwrap().tag_block(), DEFAULT_PINV_TOL).bound.trace();
    let inst = StepInstance { graph, config, bodies: None };
    let stats = monte_carlo(&[inst], EstimatorKind::Unconstrained, &noise, 10_000, 5, &LsOptions::default()).unwrap();
    let s = stats.steps[0].tags[0].stats;
    // The estimator is efficient here, so the MSE fluctuates around the bound:
    // the lower end is checked through the 3-sigma confidence bound.
    assert!(s.b_plus >= bound && s.mse <= 2.0 * bound, "mse {} b+ {} bound {bound}", s.mse, s.b_plus);
}

#[test]
fn noiseless_triangulation_recovers_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for dim in [2, 3] {
        let (graph, config) = random_rigid_network(dim, dim + 2, 12, true, &mut rng).unwrap();
        let meas = MeasurementSet::exact(&graph, &config).unwrap();
        let truth = config.head(graph.tag_count());
        let guess = truth.map(|v| v + 0.1 * rng.random_range(-1.0..1.0));
        let est = ls_localize(&graph, &config, &meas, &guess, &LsOptions::default()).unwrap();
        assert!((est.positions - truth).amax() < 1e-8);
        assert!(est.gradient_norm < 1e-10);
    }
}

#[test]
fn unbiased_regime_mse_is_not_below_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (graph, config) = random_rigid_network(2, 4, 6, true, &mut rng).unwrap();
    let noise = NoiseModel::additive(0.05);
    let b = crlb_unconstrained(&fim(&graph, &config, &noise).unwrap().tag_block(), DEFAULT_PINV_TOL).bound;
    let inst = StepInstance { graph: graph.clone(), config, bodies: None };
    let m = 400;
    let stats = monte_carlo(&[inst], EstimatorKind::Unconstrained, &noise, m, 3, &LsOptions::default()).unwrap();
    for t in &stats.steps[0].tags {
        let n = 2;
        let tr = b.view((n * t.tag, n * t.tag), (n, n)).trace();
        assert!(
            t.stats.mse >= tr - 3.0 * t.stats.var.sqrt() / (m as f64).sqrt(),
            "tag {}: {} vs {tr}",
            t.tag,
            t.stats.mse
        );
    }
}
