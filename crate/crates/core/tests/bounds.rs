mod common;

use boxverify::bounds_engine::{
    candidates_from, estimate_output_bounds, evaluate_samples, extract_optima, refine_bounds, BoundsCache,
    EstimateConfig, EstimateError, EvaluatedSamples, Provenance,
};
use boxverify::onnx_runtime::{LayerOp, Network};
use boxverify::optimizer::OptConfig;
use boxverify::sampler::{InputBox, SampleSet};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn samples(points: &[&[f64]]) -> SampleSet {
    SampleSet {
        points: points.iter().map(|p| p.to_vec()).collect(),
        seed: 0,
    }
}

fn unit_box(d: usize) -> InputBox {
    InputBox::new(vec![0.0; d], vec![1.0; d]).unwrap()
}

/// y = |x − 0.5| written with two ReLUs.
fn v_shape() -> Network {
    Network::from_layers(
        1,
        vec![
            LayerOp::dense(vec![vec![1.0, -1.0]]),
            LayerOp::bias(vec![-0.5, 0.5]),
            LayerOp::Relu,
            LayerOp::dense(vec![vec![1.0], vec![1.0]]),
        ],
    )
    .unwrap()
}

#[test]
fn candidates_on_identity() {
    let id = common::affine(vec![vec![1.0]], vec![0.0]);
    let c = extract_optima(&id, &samples(&[&[0.1], &[0.9], &[0.4]])).unwrap();
    assert_eq!(c.outputs[0].argmin_point, vec![0.1]);
    assert_eq!(c.outputs[0].argmax_point, vec![0.9]);

    let c = extract_optima(&id, &samples(&[&[0.3]])).unwrap();
    assert_eq!(c.outputs[0].argmin_point, c.outputs[0].argmax_point);
}

#[test]
fn candidates_follow_sign_flip() {
    let net = common::affine(vec![vec![1.0, -1.0]], vec![0.0, 0.0]);
    let c = extract_optima(&net, &samples(&[&[0.2], &[0.8]])).unwrap();
    assert_eq!((c.outputs[0].min_value, c.outputs[0].max_value), (0.2, 0.8));
    assert_eq!(c.outputs[1].argmin_point, vec![0.8]);
    assert_eq!(c.outputs[1].argmax_point, vec![0.2]);
}

#[test]
fn ties_go_to_the_first_row() {
    let evaluated = EvaluatedSamples {
        samples: samples(&[&[0.0], &[1.0], &[2.0]]),
        outputs: vec![vec![5.0], vec![5.0], vec![5.0]],
    };
    let c = candidates_from(&evaluated);
    assert_eq!(c.outputs[0].argmin_point, vec![0.0]);
    assert_eq!(c.outputs[0].argmax_point, vec![0.0]);
}

#[test]
fn affine_net_reaches_both_corners() {
    let net = common::affine(vec![vec![2.0]], vec![1.0]);
    let b = unit_box(1);
    let c = extract_optima(&net, &samples(&[&[0.4], &[0.6]])).unwrap();
    let r = refine_bounds(&net, &b, &c, &OptConfig::default());
    assert!(
        (r.outputs[0].lo - 1.0).abs() <= 1e-6 && (r.outputs[0].hi - 3.0).abs() <= 1e-6,
        "{r:?}"
    );
}

#[test]
fn refinement_finds_the_kink_minimum() {
    let net = v_shape();
    let b = unit_box(1);
    let c = extract_optima(&net, &samples(&[&[0.2], &[0.49], &[0.9]])).unwrap();
    let r = refine_bounds(&net, &b, &c, &OptConfig::default());
    let lo = &r.outputs[0];
    assert!(lo.lo <= 1e-8, "{lo:?}");
    assert!((lo.lo_witness[0] - 0.5).abs() <= 1e-8, "{lo:?}");
    assert_eq!(lo.hi, 0.5);
}

#[test]
fn two_two_one_against_dense_grid() {
    let net = common::two_two_one();
    let b = InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let est = estimate_output_bounds(&net, &b, 42, &EstimateConfig::default(), None).unwrap();
    let (grid_lo, grid_hi) = common::grid_range(&net, b.lo(), b.hi(), 201)[0];
    let bound = &est.bounds.outputs[0];
    assert!(
        bound.lo >= grid_lo - 0.02 && bound.hi <= grid_hi + 0.02,
        "{bound:?} vs [{grid_lo}, {grid_hi}]"
    );
    for y in est.outputs.as_ref().unwrap() {
        assert!(bound.lo <= y[0] && y[0] <= bound.hi);
    }
}

#[test]
fn identity_on_a_wide_interval() {
    let net = common::affine(vec![vec![1.0]], vec![0.0]);
    let b = InputBox::new(vec![-2.0], vec![5.0]).unwrap();
    let est = estimate_output_bounds(&net, &b, 1, &EstimateConfig::default(), None).unwrap();
    let (lo, hi) = est.bounds.intervals()[0];
    assert!((lo + 2.0).abs() <= 1e-6 && (hi - 5.0).abs() <= 1e-6, "[{lo}, {hi}]");
}

#[test]
fn constant_net_has_a_point_range() {
    let net = common::affine(vec![vec![0.0], vec![0.0]], vec![1.25]);
    let est = estimate_output_bounds(&net, &unit_box(2), 3, &EstimateConfig::default(), None).unwrap();
    assert_eq!(est.bounds.intervals(), vec![(1.25, 1.25)]);
}

#[test]
fn dimension_and_config_errors() {
    let net = common::two_two_one();
    let err = estimate_output_bounds(&net, &unit_box(3), 0, &EstimateConfig::default(), None).unwrap_err();
    assert_eq!(
        err,
        EstimateError::DimensionMismatch {
            box_dim: 3,
            input_dim: 2
        }
    );
    let cfg = EstimateConfig {
        samples_per_input: 0,
        ..EstimateConfig::default()
    };
    assert_eq!(
        estimate_output_bounds(&net, &unit_box(2), 0, &cfg, None).unwrap_err(),
        EstimateError::NoSamples
    );
}

#[test]
fn second_run_comes_from_the_cache_without_inference() {
    let dir = tempfile::tempdir().unwrap();
    let cache = BoundsCache::open(dir.path()).unwrap();
    let net = common::random_relu_net(&mut ChaCha8Rng::seed_from_u64(11), &[3, 8, 2]);
    let b = InputBox::new(vec![-1.0, 0.0, 2.0], vec![1.0, 0.5, 3.0]).unwrap();
    let cfg = EstimateConfig::default();

    let fresh = estimate_output_bounds(&net, &b, 7, &cfg, Some(&cache)).unwrap();
    assert_eq!(fresh.bounds.provenance, Provenance::Fresh);
    let calls = net.inference_count();
    assert!(calls > 0);

    let cached = estimate_output_bounds(&net, &b, 7, &cfg, Some(&cache)).unwrap();
    assert_eq!(cached.bounds.provenance, Provenance::Cache);
    assert_eq!(net.inference_count(), calls);
    assert_eq!(cached.bounds.outputs, fresh.bounds.outputs);
    assert_eq!(cached.samples.points, fresh.samples.points);
    assert!(cached.outputs.is_none());

    // A different seed is a different key.
    let other = estimate_output_bounds(&net, &b, 8, &cfg, Some(&cache)).unwrap();
    assert_eq!(other.bounds.provenance, Provenance::Fresh);
}

#[test]
fn corrupt_cache_entry_is_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let cache = BoundsCache::open(dir.path()).unwrap();
    let net = common::two_two_one();
    let b = unit_box(2);
    let cfg = EstimateConfig::default();
    let fresh = estimate_output_bounds(&net, &b, 1, &cfg, Some(&cache)).unwrap();
    let key = boxverify::bounds_engine::CacheKey::new(&net, &b, 1, &cfg);
    std::fs::write(cache.path_for(&key), "[]").unwrap();
    let again = estimate_output_bounds(&net, &b, 1, &cfg, Some(&cache)).unwrap();
    assert_eq!(again.bounds.provenance, Provenance::Fresh);
    assert_eq!(again.bounds.outputs, fresh.bounds.outputs);
    let third = estimate_output_bounds(&net, &b, 1, &cfg, Some(&cache)).unwrap();
    assert_eq!(third.bounds.provenance, Provenance::Cache);
}

#[test]
fn sampled_outputs_are_evaluated_in_order() {
    let net = common::two_two_one();
    let s = samples(&[&[1.0, 2.0], &[0.0, 0.0], &[-1.0, 1.0]]);
    let e = evaluate_samples(&net, &s).unwrap();
    assert_eq!(e.outputs, vec![vec![3.0], vec![0.0], vec![0.0]]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bounds_cover_samples_and_witnesses_reproduce(
        seed in any::<u64>(),
        dims in prop::collection::vec(1usize..7, 2..4),
        sample_seed in any::<u64>(),
    ) {
        let net = common::random_relu_net(&mut ChaCha8Rng::seed_from_u64(seed), &dims);
        let b = InputBox::new(vec![-1.0; dims[0]], vec![1.0; dims[0]]).unwrap();
        let cfg = EstimateConfig { samples_per_input: 10, ..EstimateConfig::default() };
        let est = estimate_output_bounds(&net, &b, sample_seed, &cfg, None).unwrap();
        let outputs = est.outputs.as_ref().unwrap();
        for (j, bound) in est.bounds.outputs.iter().enumerate() {
            prop_assert!(bound.lo <= bound.hi);
            for y in outputs {
                prop_assert!(bound.lo <= y[j] && y[j] <= bound.hi);
            }
            prop_assert!(b.contains(&bound.lo_witness) && b.contains(&bound.hi_witness));
            let at_lo = net.infer(&bound.lo_witness).unwrap()[j];
            let at_hi = net.infer(&bound.hi_witness).unwrap()[j];
            prop_assert!((at_lo - bound.lo).abs() <= 1e-9 && (at_hi - bound.hi).abs() <= 1e-9);
        }
    }
}
