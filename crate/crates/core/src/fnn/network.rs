use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{Error, Result};
use crate::fda::{evaluate_param_function, trapezoid_integrate, BasisSystem, FunctionalSample};
use crate::rng::{streams, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

/// Layer layout of a functional neural network. The last numeric layer is
/// the regression output and must have width 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub functional_neurons: usize,
    pub functional_activation: Activation,
    pub numeric_layers: Vec<LayerSpec>,
    /// Scalar covariates that bypass the functional layer and join its outputs.
    pub extra_scalar_inputs: usize,
}

impl NetworkSpec {
    /// `functional_neurons` tanh functional neurons, tanh hidden layers of the
    /// given widths, then an identity output neuron.
    pub fn new(functional_neurons: usize, hidden: &[usize], extra_scalar_inputs: usize) -> Result<Self> {
        let mut numeric_layers: Vec<LayerSpec> = hidden
            .iter()
            .map(|&width| LayerSpec {
                width,
                activation: Activation::Tanh,
            })
            .collect();
        numeric_layers.push(LayerSpec {
            width: 1,
            activation: Activation::Identity,
        });
        let spec = NetworkSpec {
            functional_neurons,
            functional_activation: Activation::Tanh,
            numeric_layers,
            extra_scalar_inputs,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.functional_neurons == 0 {
            return Err(Error::invalid("at least one functional neuron is required"));
        }
        if self.numeric_layers.is_empty() {
            return Err(Error::invalid("at least the output layer is required"));
        }
        if self.numeric_layers.iter().any(|l| l.width == 0) {
            return Err(Error::invalid("numeric layers must have positive width"));
        }
        if self.numeric_layers.last().map(|l| l.width) != Some(1) {
            return Err(Error::invalid("the output layer must have width 1"));
        }
        Ok(())
    }

    pub fn with_extra_inputs(&self, extra: usize) -> NetworkSpec {
        NetworkSpec {
            extra_scalar_inputs: extra,
            ..self.clone()
        }
    }

    /// Widths of the hidden numeric layers, output excluded.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.numeric_layers[..self.numeric_layers.len() - 1]
            .iter()
            .map(|l| l.width)
            .collect()
    }
}

/// Offsets of every parameter block in the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
struct Layout {
    input_dim: usize,
    functional: usize,
    extra: usize,
    /// (weights offset, bias offset, fan in, fan out) per numeric layer.
    layers: Vec<(usize, usize, usize, usize)>,
    fbias: usize,
    total: usize,
}

impl Layout {
    fn new(spec: &NetworkSpec, input_dim: usize) -> Self {
        let j = spec.functional_neurons;
        let mut off = j * input_dim;
        let fbias = off;
        off += j;
        let mut layers = Vec::with_capacity(spec.numeric_layers.len());
        let mut fan_in = j + spec.extra_scalar_inputs;
        for l in &spec.numeric_layers {
            let w = off;
            off += l.width * fan_in;
            let b = off;
            off += l.width;
            layers.push((w, b, fan_in, l.width));
            fan_in = l.width;
        }
        Layout {
            input_dim,
            functional: j,
            extra: spec.extra_scalar_inputs,
            layers,
            fbias,
            total: off,
        }
    }
}

/// All trainable values of a network: functional-neuron coefficients and
/// biases, then numeric-layer weights (row-major, fan-out x fan-in) and biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ParamsRepr", try_from = "ParamsRepr")]
pub struct NetworkParameters {
    spec: NetworkSpec,
    layout: Layout,
    values: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct NeuronRepr {
    beta: Vec<f64>,
    bias: f64,
}

#[derive(Clone, Serialize, Deserialize)]
struct DenseRepr {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct ParamsRepr {
    spec: NetworkSpec,
    input_dim: usize,
    functional: Vec<NeuronRepr>,
    layers: Vec<DenseRepr>,
}

impl From<NetworkParameters> for ParamsRepr {
    fn from(p: NetworkParameters) -> Self {
        let functional = (0..p.layout.functional)
            .map(|j| NeuronRepr {
                beta: p.beta(j).to_vec(),
                bias: p.functional_bias(j),
            })
            .collect();
        let layers = p
            .layout
            .layers
            .iter()
            .map(|&(w, b, fin, fout)| DenseRepr {
                weights: (0..fout)
                    .map(|o| p.values[w + o * fin..w + (o + 1) * fin].to_vec())
                    .collect(),
                bias: p.values[b..b + fout].to_vec(),
            })
            .collect();
        ParamsRepr {
            spec: p.spec,
            input_dim: p.layout.input_dim,
            functional,
            layers,
        }
    }
}

impl TryFrom<ParamsRepr> for NetworkParameters {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        r.spec.validate()?;
        let layout = Layout::new(&r.spec, r.input_dim);
        let mut values = Vec::with_capacity(layout.total);
        if r.functional.len() != layout.functional || r.layers.len() != layout.layers.len() {
            return Err(Error::shape("parameter blocks do not match the network spec"));
        }
        for n in &r.functional {
            if n.beta.len() != r.input_dim {
                return Err(Error::shape("functional coefficient length mismatch"));
            }
            values.extend(&n.beta);
        }
        values.extend(r.functional.iter().map(|n| n.bias));
        for (d, &(_, _, fin, fout)) in r.layers.iter().zip(&layout.layers) {
            if d.weights.len() != fout || d.bias.len() != fout || d.weights.iter().any(|w| w.len() != fin) {
                return Err(Error::shape("numeric layer shape mismatch"));
            }
            d.weights.iter().for_each(|w| values.extend(w));
            values.extend(&d.bias);
        }
        NetworkParameters::from_flat(&r.spec, r.input_dim, values)
    }
}

impl NetworkParameters {
    pub fn zeros(spec: &NetworkSpec, input_dim: usize) -> Self {
        let layout = Layout::new(spec, input_dim);
        NetworkParameters {
            spec: spec.clone(),
            values: vec![0.0; layout.total],
            layout,
        }
    }

    /// Symmetric uniform weights `U(-s/sqrt(fan_in), s/sqrt(fan_in))`, zero biases.
    ///
    /// The first numeric layer's fan-in counts only the functional neurons and
    /// its extra-input columns come from a separate stream, so adding scalar
    /// inputs leaves every other initial weight unchanged.
    pub fn init(spec: &NetworkSpec, input_dim: usize, seed: u64, scale: f64) -> Self {
        let mut p = NetworkParameters::zeros(spec, input_dim);
        let mut main = Stream::new(seed, streams::NET_INIT);
        let mut extra = Stream::new(seed, streams::NET_INIT_EXTRA);
        let l = p.layout.clone();
        let a = scale / (input_dim.max(1) as f64).sqrt();
        for v in &mut p.values[..l.functional * input_dim] {
            *v = main.uniform_range(-a, a);
        }
        for (idx, &(w, _, fin, fout)) in l.layers.iter().enumerate() {
            let own_in = if idx == 0 { l.functional } else { fin };
            let a = scale / (own_in as f64).sqrt();
            for o in 0..fout {
                for i in 0..fin {
                    let rng = if idx == 0 && i >= l.functional {
                        &mut extra
                    } else {
                        &mut main
                    };
                    p.values[w + o * fin + i] = rng.uniform_range(-a, a);
                }
            }
        }
        p
    }

    pub fn from_flat(spec: &NetworkSpec, input_dim: usize, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(spec, input_dim);
        if values.len() != layout.total {
            return Err(Error::shape(format!(
                "{} parameter values for a network with {}",
                values.len(),
                layout.total
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("network parameters must be finite"));
        }
        Ok(NetworkParameters {
            spec: spec.clone(),
            layout,
            values,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input_dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Basis coefficients of functional neuron `j`, concatenated over features.
    pub fn beta(&self, j: usize) -> &[f64] {
        let d = self.layout.input_dim;
        &self.values[j * d..(j + 1) * d]
    }

    pub fn functional_bias(&self, j: usize) -> f64 {
        self.values[self.layout.fbias + j]
    }

    /// Weight from input `i` to unit `o` of numeric layer `layer`.
    pub fn weight(&self, layer: usize, o: usize, i: usize) -> f64 {
        let (w, _, fin, _) = self.layout.layers[layer];
        self.values[w + o * fin + i]
    }

    pub fn set_weight(&mut self, layer: usize, o: usize, i: usize, v: f64) {
        let (w, _, fin, _) = self.layout.layers[layer];
        self.values[w + o * fin + i] = v;
    }

    pub fn bias(&self, layer: usize, o: usize) -> f64 {
        let (_, b, _, _) = self.layout.layers[layer];
        self.values[b + o]
    }
}

/// Gradient of the loss with respect to every parameter, same layout as
/// [`NetworkParameters::as_slice`].
pub type Gradient = Vec<f64>;

/// Forward/backward evaluation with reusable scratch buffers.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    layout: Layout,
    /// Pre-activations and activations: index 0 is the functional layer,
    /// then one entry per numeric layer.
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    layer_in: Vec<f64>,
}

impl Network {
    pub fn new(spec: &NetworkSpec, input_dim: usize) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(spec, input_dim);
        let mut widths = vec![spec.functional_neurons];
        widths.extend(spec.numeric_layers.iter().map(|l| l.width));
        Ok(Network {
            spec: spec.clone(),
            pre: widths.iter().map(|&w| vec![0.0; w]).collect(),
            act: widths.iter().map(|&w| vec![0.0; w]).collect(),
            delta: widths.iter().map(|&w| vec![0.0; w]).collect(),
            layer_in: vec![0.0; spec.functional_neurons + spec.extra_scalar_inputs],
            layout,
        })
    }

    pub fn for_params(params: &NetworkParameters) -> Self {
        Network::new(&params.spec, params.layout.input_dim).expect("parameters carry a valid spec")
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    fn check(&self, params: &[f64], inputs: &[f64], extras: &[f64]) -> Result<()> {
        if params.len() != self.layout.total {
            return Err(Error::shape("parameter vector does not match the network"));
        }
        if inputs.len() != self.layout.input_dim {
            return Err(Error::shape(format!(
                "{} basis coordinates, network expects {}",
                inputs.len(),
                self.layout.input_dim
            )));
        }
        if extras.len() != self.layout.extra {
            return Err(Error::shape(format!(
                "{} extra scalars, network expects {}",
                extras.len(),
                self.layout.extra
            )));
        }
        Ok(())
    }

    /// Prediction for one sample given its basis coordinates and extra scalars.
    pub fn forward(&mut self, params: &[f64], inputs: &[f64], extras: &[f64]) -> Result<f64> {
        self.check(params, inputs, extras)?;
        Ok(self.forward_unchecked(params, inputs, extras))
    }

    pub(crate) fn forward_unchecked(&mut self, params: &[f64], inputs: &[f64], extras: &[f64]) -> f64 {
        let l = &self.layout;
        let d = l.input_dim;
        let fa = self.spec.functional_activation;
        for j in 0..l.functional {
            let beta = &params[j * d..(j + 1) * d];
            let mut z = params[l.fbias + j];
            for (b, x) in beta.iter().zip(inputs) {
                z += b * x;
            }
            self.pre[0][j] = z;
            let a = fa.value(z);
            self.act[0][j] = a;
            self.layer_in[j] = a;
        }
        self.layer_in[l.functional..].copy_from_slice(extras);
        for (k, &(w, b, fin, fout)) in l.layers.iter().enumerate() {
            let act = self.spec.numeric_layers[k].activation;
            let (prev, rest) = self.act.split_at_mut(k + 1);
            let input: &[f64] = if k == 0 { &self.layer_in } else { &prev[k] };
            for o in 0..fout {
                let row = &params[w + o * fin..w + (o + 1) * fin];
                let mut z = 0.0;
                for (wv, x) in row.iter().zip(input) {
                    z += wv * x;
                }
                z += params[b + o];
                self.pre[k + 1][o] = z;
                rest[0][o] = act.value(z);
            }
        }
        self.act[l.layers.len()][0]
    }

    /// Adds `scale * d(output)/d(params)` into `grad`; must follow a forward
    /// pass on the same sample.
    pub(crate) fn accumulate_gradient(&mut self, params: &[f64], inputs: &[f64], scale: f64, grad: &mut [f64]) {
        let l = &self.layout;
        let nl = l.layers.len();
        for k in (0..nl).rev() {
            let (w, b, fin, fout) = l.layers[k];
            let act = self.spec.numeric_layers[k].activation;
            if k == nl - 1 {
                for o in 0..fout {
                    self.delta[k + 1][o] = scale * act.derivative_from(self.pre[k + 1][o], self.act[k + 1][o]);
                }
            } else {
                let (wn, _, fin_n, fout_n) = l.layers[k + 1];
                for o in 0..fout {
                    let mut s = 0.0;
                    for u in 0..fout_n {
                        s += params[wn + u * fin_n + o] * self.delta[k + 2][u];
                    }
                    self.delta[k + 1][o] = s * act.derivative_from(self.pre[k + 1][o], self.act[k + 1][o]);
                }
            }
            let input: &[f64] = if k == 0 { &self.layer_in } else { &self.act[k] };
            for o in 0..fout {
                let dl = self.delta[k + 1][o];
                if dl == 0.0 {
                    continue;
                }
                let g = &mut grad[w + o * fin..w + (o + 1) * fin];
                for (gv, x) in g.iter_mut().zip(input) {
                    *gv += dl * x;
                }
                grad[b + o] += dl;
            }
        }
        // Functional layer: U'(pre) * sum_o W[o][j] delta[o], then
        // d pre / d beta_{j,q} = q-th basis coordinate of the input.
        let (w0, _, fin0, fout0) = l.layers[0];
        let fa = self.spec.functional_activation;
        let d = l.input_dim;
        for j in 0..l.functional {
            let mut s = 0.0;
            for o in 0..fout0 {
                s += params[w0 + o * fin0 + j] * self.delta[1][o];
            }
            let dj = s * fa.derivative_from(self.pre[0][j], self.act[0][j]);
            self.delta[0][j] = dj;
            if dj == 0.0 {
                continue;
            }
            let g = &mut grad[j * d..(j + 1) * d];
            for (gv, x) in g.iter_mut().zip(inputs) {
                *gv += dj * x;
            }
            grad[l.fbias + j] += dj;
        }
    }

    /// Gradient of `0.5 (prediction - target)^2` for one sample.
    pub fn gradient(&mut self, params: &[f64], inputs: &[f64], extras: &[f64], target: f64) -> Result<(f64, Gradient)> {
        self.check(params, inputs, extras)?;
        let y = self.forward_unchecked(params, inputs, extras);
        let mut grad = vec![0.0; params.len()];
        self.accumulate_gradient(params, inputs, y - target, &mut grad);
        Ok((0.5 * (y - target).powi(2), grad))
    }
}

/// One functional neuron evaluated by direct quadrature:
/// `U(b + sum_r int W_r(beta_r, t) X_r(t) dt)` with `W_r` expanded on `bases[r]`.
/// `beta` concatenates the per-feature coefficient vectors.
pub fn functional_neuron_forward(
    sample: &FunctionalSample,
    beta: &[f64],
    bias: f64,
    bases: &[BasisSystem],
    activation: Activation,
) -> Result<f64> {
    if sample.n_features() != bases.len() {
        return Err(Error::shape(format!(
            "sample has {} features, {} bases given",
            sample.n_features(),
            bases.len()
        )));
    }
    let total: usize = bases.iter().map(|b| b.len()).sum();
    if beta.len() != total {
        return Err(Error::shape(format!("{} coefficients for {total} basis functions", beta.len())));
    }
    let mut z = bias;
    let mut off = 0;
    for (curve, basis) in sample.curves().iter().zip(bases) {
        if !curve.same_grid(basis.grid()) {
            return Err(Error::shape("sample curve is not on the basis grid"));
        }
        let w = evaluate_param_function(&beta[off..off + basis.len()], basis)?;
        let prod: Vec<f64> = w.iter().zip(curve.values()).map(|(a, b)| a * b).collect();
        z += trapezoid_integrate(&prod, basis.grid())?;
        off += basis.len();
    }
    Ok(activation.value(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::new(0, &[2], 0).is_err());
        assert!(NetworkSpec::new(4, &[0], 0).is_err());
        let mut s = NetworkSpec::new(4, &[2], 0).unwrap();
        s.numeric_layers.last_mut().unwrap().width = 2;
        assert!(s.validate().is_err());
    }

    #[test]
    fn zero_params_give_zero() {
        let spec = NetworkSpec::new(3, &[2], 1).unwrap();
        let p = NetworkParameters::zeros(&spec, 4);
        let mut net = Network::for_params(&p);
        let y = net.forward(p.as_slice(), &[1.0, -2.0, 0.5, 3.0], &[7.0]).unwrap();
        assert_eq!(y, 0.0);
    }

    #[test]
    fn shape_errors() {
        let spec = NetworkSpec::new(2, &[], 1).unwrap();
        let p = NetworkParameters::zeros(&spec, 3);
        let mut net = Network::for_params(&p);
        assert!(net.forward(p.as_slice(), &[1.0, 2.0], &[0.0]).is_err());
        assert!(net.forward(p.as_slice(), &[1.0, 2.0, 3.0], &[]).is_err());
    }

    #[test]
    fn extra_scalar_with_zero_weights_is_ignored() {
        let spec = NetworkSpec::new(3, &[2], 1).unwrap();
        let mut p = NetworkParameters::init(&spec, 4, 9, 1.0);
        for o in 0..2 {
            p.set_weight(0, o, 3, 0.0);
        }
        let mut net = Network::for_params(&p);
        let x = [0.3, -0.2, 1.0, 0.1];
        let a = net.forward(p.as_slice(), &x, &[0.0]).unwrap();
        let b = net.forward(p.as_slice(), &x, &[123.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_shares_weights_across_extra_inputs() {
        let base = NetworkSpec::new(4, &[2], 0).unwrap();
        let with = base.with_extra_inputs(1);
        let p0 = NetworkParameters::init(&base, 3, 5, 1.0);
        let p1 = NetworkParameters::init(&with, 3, 5, 1.0);
        for j in 0..4 {
            assert_eq!(p0.beta(j), p1.beta(j));
        }
        for o in 0..2 {
            for i in 0..4 {
                assert_eq!(p0.weight(0, o, i), p1.weight(0, o, i));
            }
        }
        assert_eq!(p0.weight(1, 0, 1), p1.weight(1, 0, 1));
    }

    #[test]
    fn gradient_zero_at_exact_fit() {
        let spec = NetworkSpec::new(2, &[3], 1).unwrap();
        let p = NetworkParameters::init(&spec, 3, 1, 1.0);
        let mut net = Network::for_params(&p);
        let x = [0.1, 0.2, -0.3];
        let y = net.forward(p.as_slice(), &x, &[0.4]).unwrap();
        let (loss, g) = net.gradient(p.as_slice(), &x, &[0.4], y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn serde_round_trip() {
        let spec = NetworkSpec::new(3, &[2], 1).unwrap();
        let p = NetworkParameters::init(&spec, 5, 42, 1.0);
        let s = serde_json::to_string(&p).unwrap();
        let q: NetworkParameters = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
