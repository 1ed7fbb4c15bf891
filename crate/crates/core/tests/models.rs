mod common;

use common::{grid, random_curves, random_locations, small_dataset};
use nalgebra::{DMatrix, DVector};
use stfnn::fnn::{NetworkSpec, TrainConfig};
use stfnn::models::{
    fit_flm, fit_flm_sp, fit_gwflm, select_bandwidth, transform_gw_data, default_bandwidth_grid, EstimatorKind,
    EstimatorSpec, Fit, FitMode, TrainedModel,
};
use stfnn::simgen::{generate, Scenario, SimConfig};
use stfnn::{Error, KernelFamily, KernelSpec, SpatialDataset};

fn quick_train() -> TrainConfig {
    TrainConfig {
        max_iterations: 400,
        ..TrainConfig::default()
    }
}

fn spec(kind: EstimatorKind, family: Option<KernelFamily>, h: Option<f64>) -> EstimatorSpec {
    let mut s = EstimatorSpec::new(kind, family).unwrap().with_train(quick_train());
    if let Some(h) = h {
        s = s.with_bandwidth(h).unwrap();
    }
    s
}

#[test]
fn flm_recovers_an_exact_linear_response() {
    let g = grid(51);
    let (samples, coefs) = random_curves(40, 3, &g);
    let y: Vec<f64> = coefs.iter().map(|a| 1.5 + 2.0 * a[0] - a[1] + 0.5 * a[3]).collect();
    let ds = SpatialDataset::new(samples, y.clone(), random_locations(40, 3, 5.0)).unwrap();
    let model = fit_flm(&ds, 0.999999).unwrap();
    for i in 0..ds.len() {
        let p = model.predict_in_sample(&ds.samples()[i], i).unwrap();
        assert!((p - y[i]).abs() < 1e-8, "residual {}", p - y[i]);
    }
}

#[test]
fn flm_sp_with_constant_locations_matches_flm() {
    let base = small_dataset(30, 5);
    let ds = SpatialDataset::new(
        base.samples().to_vec(),
        base.responses().to_vec(),
        vec![vec![2.0, -1.0]; 30],
    )
    .unwrap();
    let a = fit_flm(&ds, 0.99).unwrap();
    let b = fit_flm_sp(&ds, 0.99).unwrap();
    for i in 0..ds.len() {
        let pa = a.predict_in_sample(&ds.samples()[i], i).unwrap();
        let pb = b.predict_in_sample(&ds.samples()[i], i).unwrap();
        assert!((pa - pb).abs() < 1e-8);
    }
}

#[test]
fn flm_rejects_too_few_samples() {
    let g = grid(21);
    let (samples, _) = random_curves(3, 1, &g);
    let ds = SpatialDataset::new(samples, vec![1.0, 2.0, 4.0], random_locations(3, 1, 1.0)).unwrap();
    assert!(matches!(fit_flm(&ds, 1.0), Err(Error::Singular(_))));
}

#[test]
fn spec_validation() {
    assert!(EstimatorSpec::new(EstimatorKind::Gwfnn, None).is_err());
    assert!(EstimatorSpec::new(EstimatorKind::Flm, Some(KernelFamily::Gaussian)).is_err());
    assert!(EstimatorSpec::new(EstimatorKind::Gwflm, Some(KernelFamily::Nearest)).is_err());
    assert!(EstimatorSpec::new(EstimatorKind::Sarflm, Some(KernelFamily::Nearest))
        .unwrap()
        .with_bandwidth(2.5)
        .is_err());
    let s = EstimatorSpec::new(EstimatorKind::Gwfnn, Some(KernelFamily::Gaussian)).unwrap();
    assert!(s.needs_bandwidth());
    assert!(s.kernel().is_err());
    assert_eq!(s.label(), "GWFNN_Gaussian");
    assert_eq!("fnn_sp".parse::<EstimatorKind>().unwrap(), EstimatorKind::FnnSp);
    assert_eq!("SARFNN".parse::<EstimatorKind>().unwrap(), EstimatorKind::Sarfnn);
    assert!("gwr".parse::<EstimatorKind>().is_err());
}

#[test]
fn gw_transform_examples() {
    let ds = small_dataset(3, 2);
    let t = transform_gw_data(&ds, &[1.0, 0.25, 0.0]).unwrap();
    assert_eq!(t.samples()[0], ds.samples()[0]);
    assert_eq!(t.responses()[0], ds.responses()[0]);
    for (a, b) in t.samples()[1].curves()[0].values().iter().zip(ds.samples()[1].curves()[0].values()) {
        assert_eq!(*a, 0.5 * b);
    }
    assert_eq!(t.responses()[1], 0.5 * ds.responses()[1]);
    assert!(t.samples()[2].curves()[0].values().iter().all(|v| *v == 0.0));
    assert_eq!(t.responses()[2], 0.0);
    assert!(transform_gw_data(&ds, &[1.0, -0.1, 0.0]).is_err());
    assert!(transform_gw_data(&ds, &[1.0, 0.5]).is_err());
}

/// Weighted normal equations solved directly, with weights from the
/// Gaussian formula written out here.
fn gwflm_oracle(scores: &[Vec<f64>], y: &[f64], locations: &[Vec<f64>], u: usize, h: f64) -> Vec<f64> {
    let n = y.len();
    let p = scores[0].len() + 1;
    let z = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { scores[i][j - 1] });
    let w = DMatrix::from_fn(n, n, |i, j| {
        if i != j {
            return 0.0;
        }
        let d: f64 = locations[i]
            .iter()
            .zip(&locations[u])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        (-0.5 * (d / h) * (d / h)).exp()
    });
    let yv = DVector::from_column_slice(y);
    let lhs = z.transpose() * &w * &z;
    let rhs = z.transpose() * &w * yv;
    lhs.lu().solve(&rhs).unwrap().iter().copied().collect()
}

#[test]
fn gwflm_matches_the_weighted_normal_equations() {
    for seed in 0..10 {
        let ds = small_dataset(25, seed);
        let h = 2.0 + seed as f64;
        let kernel = KernelSpec::gw(KernelFamily::Gaussian, h).unwrap();
        let enc = stfnn::fda::ScoreEncoder::fit(&ds, 0.99).unwrap();
        let scores: Vec<Vec<f64>> = ds.samples().iter().map(|s| enc.scores(s).unwrap()).collect();
        for u in [0, 7, 24] {
            let head = fit_gwflm(&ds, &kernel, u, 0.99).unwrap();
            let oracle = gwflm_oracle(&scores, ds.responses(), ds.locations(), u, h);
            assert!((head.intercept - oracle[0]).abs() < 1e-8);
            for (a, b) in head.coefficients.iter().zip(&oracle[1..]) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn gwflm_with_unit_weights_is_flm() {
    let ds = small_dataset(30, 9);
    let flm = fit_flm(&ds, 0.99).unwrap();
    let gw = TrainedModel::fit(&ds, &spec(EstimatorKind::Gwflm, Some(KernelFamily::Gaussian), Some(1e12))).unwrap();
    assert_eq!(gw.local_model_count(), 30);
    for i in 0..ds.len() {
        let a = flm.predict_in_sample(&ds.samples()[i], i).unwrap();
        let b = gw.predict_in_sample(&ds.samples()[i], i).unwrap();
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn gwfnn_with_huge_bandwidth_is_fnn() {
    let ds = small_dataset(30, 4);
    let fnn = TrainedModel::fit(&ds, &spec(EstimatorKind::Fnn, None, None)).unwrap();
    let gw = TrainedModel::fit(&ds, &spec(EstimatorKind::Gwfnn, Some(KernelFamily::Gaussian), Some(1e12))).unwrap();
    for i in 0..ds.len() {
        let a = fnn.predict_in_sample(&ds.samples()[i], i).unwrap();
        let b = gw.predict_in_sample(&ds.samples()[i], i).unwrap();
        assert!((a - b).abs() < 1e-3);
        let c = gw.predict_out_of_sample(&ds.samples()[i], &[50.0, 50.0]).unwrap();
        assert!((a - c).abs() < 1e-3);
    }
}

#[test]
fn gwfnn_far_apart_points_fit_their_own_response() {
    let g = grid(21);
    let (samples, _) = random_curves(2, 11, &g);
    let ds = SpatialDataset::new(samples, vec![1.0, -2.0], vec![vec![0.0, 0.0], vec![100.0, 0.0]]).unwrap();
    let s = EstimatorSpec::new(EstimatorKind::Gwfnn, Some(KernelFamily::DoublePower))
        .unwrap()
        .with_bandwidth(1.0)
        .unwrap();
    let model = TrainedModel::fit(&ds, &s).unwrap();
    for i in 0..2 {
        let p = model.predict_in_sample(&ds.samples()[i], i).unwrap();
        assert!((p - ds.responses()[i]).abs() < 0.05, "{p}");
    }
    let err = model.predict_out_of_sample(&ds.samples()[0], &[50.0, 50.0]).unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)));
}

#[test]
fn gw_predictions_are_deterministic() {
    let ds = small_dataset(20, 6);
    let s = spec(EstimatorKind::Gwfnn, Some(KernelFamily::Exponential), Some(3.0));
    let a = TrainedModel::fit(&ds, &s).unwrap();
    let b = TrainedModel::fit(&ds, &s).unwrap();
    for i in 0..ds.len() {
        let pa = a.predict_in_sample(&ds.samples()[i], i).unwrap();
        assert_eq!(pa, a.predict_in_sample(&ds.samples()[i], i).unwrap());
        assert_eq!(pa, b.predict_in_sample(&ds.samples()[i], i).unwrap());
    }
    let deferred = TrainedModel::fit_with_mode(&ds, &s, FitMode::OutOfSampleOnly).unwrap();
    assert!(matches!(deferred.fitted(), Fit::Deferred));
    assert!(deferred.predict_in_sample(&ds.samples()[0], 0).is_err());
    let p = deferred.predict(&ds.samples()[0], &ds.locations()[0]).unwrap();
    assert_eq!(p, a.predict_out_of_sample(&ds.samples()[0], &ds.locations()[0]).unwrap());
}

fn neighbour_average(ds: &SpatialDataset, target: &[f64], h: f64, skip: Option<usize>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, s) in ds.locations().iter().enumerate() {
        if Some(j) == skip {
            continue;
        }
        let d: f64 = s.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let k = if d == 0.0 { 0.0 } else { (-0.5 * (d / h) * (d / h)).exp() };
        num += k * ds.responses()[j];
        den += k;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

#[test]
fn sar_covariate_matches_brute_force() {
    let ds = small_dataset(25, 8);
    let h = 2.5;
    let model = TrainedModel::fit(&ds, &spec(EstimatorKind::Sarflm, Some(KernelFamily::Gaussian), Some(h))).unwrap();
    let lag = model.sar_weights().unwrap().lag(ds.responses()).unwrap();
    let Fit::Linear(head) = model.fitted() else { panic!("linear fit expected") };
    let enc = model.encoder();
    for i in 0..ds.len() {
        let oracle = neighbour_average(&ds, &ds.locations()[i], h, Some(i));
        assert!((lag[i] - oracle).abs() < 1e-12);
        let scores = enc.scores(&ds.samples()[i]).unwrap();
        let expected = head.predict(&scores, &[oracle]).unwrap();
        assert!((model.predict_in_sample(&ds.samples()[i], i).unwrap() - expected).abs() < 1e-12);
        // At a training point the new-location row excludes that point, as
        // the SAR kernel vanishes at distance zero.
        let oos = stfnn::models::sar_covariate_out_of_sample(&model, &ds.locations()[i]).unwrap();
        assert!((oos - oracle).abs() < 1e-12);
    }
    let far = stfnn::models::sar_covariate_out_of_sample(&model, &[1e6, 1e6]).unwrap();
    assert_eq!(far, 0.0);
    let scores = enc.scores(&ds.samples()[0]).unwrap();
    let p = model.predict_out_of_sample(&ds.samples()[0], &[1e6, 1e6]).unwrap();
    assert!((p - head.predict(&scores, &[0.0]).unwrap()).abs() < 1e-12);
}

#[test]
fn zero_sar_kernel_reduces_to_the_plain_models() {
    let ds = small_dataset(30, 12);
    let flm = fit_flm(&ds, 0.99).unwrap();
    let sarflm = TrainedModel::fit(&ds, &spec(EstimatorKind::Sarflm, Some(KernelFamily::DoublePower), Some(1e-6))).unwrap();
    let fnn = TrainedModel::fit(&ds, &spec(EstimatorKind::Fnn, None, None)).unwrap();
    let sarfnn = TrainedModel::fit(&ds, &spec(EstimatorKind::Sarfnn, Some(KernelFamily::DoublePower), Some(1e-6))).unwrap();
    for i in 0..ds.len() {
        let x = &ds.samples()[i];
        let a = flm.predict_in_sample(x, i).unwrap();
        assert!((a - sarflm.predict_in_sample(x, i).unwrap()).abs() < 1e-10);
        assert_eq!(fnn.predict_in_sample(x, i).unwrap(), sarfnn.predict_in_sample(x, i).unwrap());
    }
}

#[test]
fn sar_coefficient_is_positive_under_dependency() {
    let ds = generate(&SimConfig::new(Scenario::Dependency, 21)).unwrap();
    let s = EstimatorSpec::new(EstimatorKind::Sarflm, Some(KernelFamily::Nearest))
        .unwrap()
        .with_bandwidth(4.0)
        .unwrap();
    let model = TrainedModel::fit(&ds, &s).unwrap();
    let Fit::Linear(head) = model.fitted() else { panic!("linear fit expected") };
    assert!(head.extra_coefficients[0] > 0.0);
}

#[test]
fn fnn_sp_sees_the_coordinates() {
    let ds = small_dataset(30, 13);
    let model = TrainedModel::fit(&ds, &spec(EstimatorKind::FnnSp, None, None)).unwrap();
    let Fit::Network(net) = model.fitted() else { panic!("network expected") };
    assert_eq!(net.spec().extra_scalar_inputs, 2);
    let x = &ds.samples()[0];
    let a = model.predict_out_of_sample(x, &[0.0, 0.0]).unwrap();
    let b = model.predict_out_of_sample(x, &[10.0, 10.0]).unwrap();
    assert_ne!(a, b);
}

#[test]
fn model_json_round_trip() {
    let ds = small_dataset(20, 14);
    for s in [
        spec(EstimatorKind::Flm, None, None),
        spec(EstimatorKind::Sarfnn, Some(KernelFamily::Nearest), Some(3.0)),
        spec(EstimatorKind::Gwflm, Some(KernelFamily::Gaussian), Some(4.0)),
    ] {
        let model = TrainedModel::fit(&ds, &s).unwrap();
        let text = serde_json::to_string(&model).unwrap();
        let back: TrainedModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, model);
        for i in 0..ds.len() {
            let x = &ds.samples()[i];
            assert_eq!(model.predict(x, &ds.locations()[i]).unwrap(), back.predict(x, &ds.locations()[i]).unwrap());
        }
    }
}

#[test]
fn custom_network_shapes() {
    let ds = small_dataset(25, 15);
    let net = NetworkSpec::new(3, &[8, 4], 0).unwrap();
    let s = spec(EstimatorKind::Sarfnn, Some(KernelFamily::Gaussian), Some(3.0))
        .with_network(net)
        .unwrap();
    let model = TrainedModel::fit(&ds, &s).unwrap();
    let Fit::Network(n) = model.fitted() else { panic!("network expected") };
    assert_eq!(n.spec().hidden_widths(), vec![8, 4]);
    assert_eq!(n.spec().extra_scalar_inputs, 1);
}

#[test]
fn bandwidth_selection_rules() {
    let ds = small_dataset(30, 16);
    let template = EstimatorSpec::new(EstimatorKind::Gwflm, Some(KernelFamily::Gaussian)).unwrap();
    let one = select_bandwidth(&ds, &template, &[3.0], 5, 0).unwrap();
    assert_eq!(one.bandwidth, 3.0);
    assert_eq!(one.scores.len(), 1);
    // Weights are exactly 1 for both candidates, so the scores tie.
    let tie = select_bandwidth(&ds, &template, &[1e13, 1e12], 5, 0).unwrap();
    assert_eq!(tie.scores[0].rmse, tie.scores[1].rmse);
    assert_eq!(tie.bandwidth, 1e12);
    assert!(select_bandwidth(&ds, &template, &[], 5, 0).is_err());
    let grid = default_bandwidth_grid(ds.locations(), KernelFamily::Gaussian).unwrap();
    assert_eq!(grid.len(), 8);
    let best = select_bandwidth(&ds, &template, &grid, 5, 0).unwrap();
    let min = best.scores.iter().filter_map(|s| s.rmse).fold(f64::INFINITY, f64::min);
    assert_eq!(best.scores.iter().find(|s| s.bandwidth == best.bandwidth).unwrap().rmse, Some(min));
}

#[test]
fn nearest_grid_is_clipped() {
    let locs = random_locations(6, 1, 1.0);
    let g = default_bandwidth_grid(&locs, KernelFamily::Nearest).unwrap();
    assert_eq!(g, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
}
