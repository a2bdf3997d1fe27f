mod oracles;

use traitwave_core::classical::ModelSpec;

#[test]
fn naive_bayes_matches_density_product() {
    for seed in 0..50 {
        let inst = oracles::random_instance(seed);
        let model = ModelSpec::GaussianNaiveBayes
            .fit(&inst.x, &inst.y, 0)
            .unwrap();
        for probe in &inst.probes {
            let expected = oracles::naive_bayes_posterior(&inst.x, &inst.y, probe);
            let got = model.predict_proba(probe);
            assert!(
                (got - expected).abs() < 1e-6,
                "seed {seed}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn logistic_matches_gradient_descent() {
    let strengths = [0.01, 0.1, 1.0, 10.0];
    for seed in 0..50u64 {
        let inst = oracles::random_instance(1000 + seed);
        let l2 = strengths[seed as usize % 4];
        let model = ModelSpec::LogisticRegression { l2 }
            .fit(&inst.x, &inst.y, 0)
            .unwrap();
        let reference = oracles::logistic_by_gradient_descent(&inst.x, &inst.y, l2);
        for probe in &inst.probes {
            let expected = reference(probe);
            let got = model.predict_proba(probe);
            assert!(
                (got - expected).abs() < 1e-6,
                "seed {seed} l2 {l2}: {got} vs {expected}"
            );
        }
    }
}
