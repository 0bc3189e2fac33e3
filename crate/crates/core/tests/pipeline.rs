//! End-to-end runs through samplers, learners and the oracle.

use rcn_sq_core::classify::{analytic_error, build_ground_truth, mc_error, opt_error, Embedding};
use rcn_sq_core::hidden::{random_direction, HiddenInstance, LabeledSource, NullInstance};
use rcn_sq_core::io::{read_samples, write_samples, InstanceFile};
use rcn_sq_core::noise::NoiseMatrix;
use rcn_sq_core::sq::{
    corrected_gradient_variance, sq_sgd_softmax, tester_from_learner, CheatingLearner, ConstantLearner, Decision,
    OracleMode, SgdConfig, SqOracle, Target,
};
use rcn_sq_core::univariate::CombSpec;
use rcn_sq_core::Execution;

fn spec() -> CombSpec {
    CombSpec::new(0.25, 1e-3, 4, 3).unwrap()
}

#[test]
fn noise_free_instance_is_realizable() {
    let inst = HiddenInstance::new_unchecked(random_direction(6, 3), spec(), vec![0.5, 0.5], NoiseMatrix::identity(3))
        .unwrap();
    let gt = build_ground_truth(&inst);
    assert_eq!(opt_error(&inst), 0.0);
    assert!(analytic_error(&inst, &gt).unwrap().err.abs() < 1e-12);
    let mc = mc_error(&inst, &gt, 50_000, 1, Execution::Parallel).unwrap();
    assert_eq!(mc.err, 0.0);
}

#[test]
fn backward_correction_variance_blows_up_near_singularity() {
    // Moving mass of the last row into its own column takes it off the span
    // of the others; the smallest singular value is then of order eps.
    let perturbed = |eps: f64| {
        NoiseMatrix::new(vec![vec![0.6, 0.0, 0.4], vec![0.0, 0.6, 0.4], vec![0.3 - 0.5 * eps, 0.3 - 0.5 * eps, 0.4 + eps]]).unwrap()
    };
    let data = NullInstance::new(3, NoiseMatrix::eq1()).unwrap().sample_n(4000, 9, Execution::Parallel);
    let emb = Embedding::Identity(3);
    assert!(perturbed(0.01).sigma_min() < 0.02);
    let variances: Vec<f64> = [0.1, 0.03, 0.01, 0.003]
        .iter()
        .map(|&eps| corrected_gradient_variance(&data, &perturbed(eps), &emb).unwrap())
        .collect();
    for w in variances.windows(2) {
        assert!(w[1] > 5.0 * w[0], "{variances:?}");
    }
}

#[test]
fn empirical_oracle_tester_separates_null_and_alternative() {
    let alt = HiddenInstance::eq1(random_direction(8, 5), spec()).unwrap();
    let alpha = 0.1 * alt.spec().inner_mass();
    let learner = CheatingLearner::new(alt.clone());
    let null = Target::Null(NullInstance::new(8, alt.noise().clone()).unwrap());
    for (target, want) in [(null, Decision::AcceptNull), (Target::Hidden(alt.clone()), Decision::RejectNull)] {
        let mut oracle = SqOracle::new(target, alpha / 4.0, OracleMode::Empirical { n: None, seed: 2 }).unwrap();
        let out = tester_from_learner(&learner, alt.noise(), alpha, &mut oracle).unwrap();
        assert_eq!(out.decision, want);
        assert_eq!(oracle.transcript().len(), 1);
        assert!(oracle.transcript()[0].true_expectation.is_none());
    }
    let mut oracle = SqOracle::analytic(Target::Hidden(alt.clone()), alpha / 4.0).unwrap();
    let out = tester_from_learner(&ConstantLearner::default(), alt.noise(), alpha, &mut oracle).unwrap();
    assert_eq!(out.decision, Decision::AcceptNull);
}

#[test]
fn sgd_on_the_null_cannot_beat_the_constant() {
    let h = NoiseMatrix::eq1();
    let null = NullInstance::new(4, h.clone()).unwrap();
    let mut oracle = SqOracle::analytic(Target::Null(null.clone()), 0.0).unwrap().with_pool(5000, 1);
    let cfg = SgdConfig { steps: 100, loss_every: 50, ..SgdConfig::default() };
    let report = sq_sgd_softmax(&mut oracle, &cfg).unwrap();
    let mc = mc_error(&null, &report.model, 100_000, 4, Execution::Parallel).unwrap();
    assert!(mc.err >= 1.0 - h.get(2, 2) - 4.0 * mc.stderr, "{mc:?}");
}

#[test]
fn instance_files_and_samples_round_trip() {
    let text = r#"{"N": 5, "v": {"seed": 3}, "spec": {"delta": 0.25, "xi": 0.001, "m": 4, "k": 3},
                   "a": [0.5, 0.5], "matrix": "eq1"}"#;
    let file = InstanceFile::from_json(text).unwrap();
    let inst = file.instance().unwrap();
    assert_eq!(inst.v(), random_direction(5, 3).as_slice());
    let again = InstanceFile::from_json(&file.to_json().unwrap()).unwrap();
    assert_eq!(again, file);

    let samples = inst.sample_n(200, 0, Execution::Sequential);
    let mut buf = Vec::new();
    write_samples(&mut buf, 5, &samples).unwrap();
    assert_eq!(read_samples(std::str::from_utf8(&buf).unwrap()).unwrap(), samples);
}
