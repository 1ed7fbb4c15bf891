mod common;

use common::{grid, random_curves, random_locations};
use stfnn::fda::{evaluate_param_function, ScoreEncoder};
use stfnn::fnn::{functional_neuron_forward, train, Activation, LayerSpec, Network, NetworkParameters, NetworkSpec, TrainConfig, TrainingRow};
use stfnn::models::fit_flm;
use stfnn::rng::Stream;
use stfnn::SpatialDataset;

#[test]
fn functional_neuron_matches_quadrature_and_score_path() {
    let g = grid(101);
    let (samples, coefs) = random_curves(30, 1, &g);
    let y: Vec<f64> = coefs.iter().map(|a| a[0]).collect();
    let ds = SpatialDataset::new(samples, y, random_locations(30, 1, 1.0)).unwrap();
    let enc = ScoreEncoder::fit(&ds, 0.999).unwrap();
    let basis = &enc.features()[0].basis;
    let k = basis.len();
    let mut rng = Stream::new(2, 0);
    for _ in 0..20 {
        let beta: Vec<f64> = (0..k).map(|_| rng.standard_normal()).collect();
        let b = rng.standard_normal();
        let x = &ds.samples()[rng.below(30) as usize];
        // Oracle: evaluate W(t) and integrate the product with a hand-written
        // trapezoid rule.
        let w = evaluate_param_function(&beta, basis).unwrap();
        let v = x.curves()[0].values();
        let pts = g.points();
        let mut integral = 0.0;
        for i in 1..pts.len() {
            integral += 0.5 * (pts[i] - pts[i - 1]) * (w[i] * v[i] + w[i - 1] * v[i - 1]);
        }
        let oracle = (b + integral).tanh();
        let direct = functional_neuron_forward(x, &beta, b, std::slice::from_ref(basis), Activation::Tanh).unwrap();
        assert!((direct - oracle).abs() < 1e-12);
        // Network path: centered scores with the bias absorbing beta . c_mean.
        let scores = enc.scores(x).unwrap();
        let shift: f64 = beta.iter().zip(&enc.mean_projection()).map(|(a, c)| a * c).sum();
        let spec = NetworkSpec {
            functional_neurons: 1,
            functional_activation: Activation::Tanh,
            numeric_layers: vec![LayerSpec { width: 1, activation: Activation::Identity }],
            extra_scalar_inputs: 0,
        };
        let mut values = beta.clone();
        values.extend([b + shift, 1.0, 0.0]);
        let params = NetworkParameters::from_flat(&spec, k, values).unwrap();
        let mut net = Network::for_params(&params);
        let via_scores = net.forward(params.as_slice(), &scores, &[]).unwrap();
        assert!((via_scores - oracle).abs() < 1e-10, "{via_scores} vs {oracle}");
    }
}

#[test]
fn linear_network_converges_to_flm() {
    let g = grid(51);
    let (samples, coefs) = random_curves(60, 4, &g);
    let mut rng = Stream::new(4, 1);
    let y: Vec<f64> = coefs.iter().map(|a| 0.5 + a[0] - 2.0 * a[2] + 0.3 * rng.standard_normal()).collect();
    let ds = SpatialDataset::new(samples, y, random_locations(60, 4, 1.0)).unwrap();
    let flm = fit_flm(&ds, 0.99).unwrap();
    let enc = flm.encoder();
    let spec = NetworkSpec {
        functional_neurons: 1,
        functional_activation: Activation::Identity,
        numeric_layers: vec![LayerSpec { width: 1, activation: Activation::Identity }],
        extra_scalar_inputs: 0,
    };
    let rows: Vec<TrainingRow> = ds
        .samples()
        .iter()
        .zip(ds.responses())
        .map(|(x, y)| TrainingRow::new(enc.scores(x).unwrap(), Vec::new(), *y))
        .collect();
    let config = TrainConfig {
        max_iterations: 20000,
        tolerance: 1e-12,
        ..TrainConfig::default()
    };
    let net = train(&rows, &spec, &config).unwrap();
    for (i, r) in rows.iter().enumerate() {
        let a = net.predict(&r.inputs, &[]).unwrap();
        let b = flm.predict_in_sample(&ds.samples()[i], i).unwrap();
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = Stream::new(8, 0);
    for case in 0..20 {
        let input_dim = 1 + rng.below(5) as usize;
        let extra = rng.below(3) as usize;
        let hidden: Vec<usize> = (0..rng.below(3)).map(|_| 1 + rng.below(4) as usize).collect();
        let spec = NetworkSpec::new(1 + rng.below(4) as usize, &hidden, extra).unwrap();
        let params = NetworkParameters::init(&spec, input_dim, case, 1.0);
        let x: Vec<f64> = (0..input_dim).map(|_| rng.standard_normal()).collect();
        let e: Vec<f64> = (0..extra).map(|_| rng.standard_normal()).collect();
        let t = rng.standard_normal();
        let mut net = Network::for_params(&params);
        let (_, grad) = net.gradient(params.as_slice(), &x, &e, t).unwrap();
        let mut p = params.as_slice().to_vec();
        for i in 0..p.len() {
            let h = 1e-6;
            let orig = p[i];
            p[i] = orig + h;
            let up = net.gradient(&p, &x, &e, t).unwrap().0;
            p[i] = orig - h;
            let down = net.gradient(&p, &x, &e, t).unwrap().0;
            p[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-5 * (1.0 + fd.abs()), "case {case} param {i}: {fd} vs {}", grad[i]);
        }
    }
}
