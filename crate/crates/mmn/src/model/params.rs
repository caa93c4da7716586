//! Named parameter store: initialization, tape binding, and pretrained
//! embedding loading.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use crate::numerics::{Scalar, Tape, Tensor, Var};

use super::config::ModelConfig;
use super::ModelError;

/// All learnable tensors, keyed by stable names. The sorted key order makes
/// initialization, checkpointing and optimizer traversal deterministic.
#[derive(Debug, Clone)]
pub struct Parameters<T: Scalar> {
    tensors: BTreeMap<String, Tensor<T>>,
}

/// Shape of every parameter a configuration implies, in name order.
pub fn expected_shapes(config: &ModelConfig) -> BTreeMap<String, Vec<usize>> {
    let d = config.d_emb;
    let k = config.kernel_size;
    let mut shapes = BTreeMap::new();
    shapes.insert("emb".to_string(), vec![config.vocab_size, d]);
    for l in 1..=config.encoder_layers {
        for gate in ["filter", "gate"] {
            shapes.insert(format!("enc.{}.{}.v", l, gate), vec![k, d, d]);
            shapes.insert(format!("enc.{}.{}.g", l, gate), vec![d]);
            shapes.insert(format!("enc.{}.{}.b", l, gate), vec![d]);
        }
        shapes.insert(format!("enc.{}.ln.gain", l), vec![d]);
        shapes.insert(format!("enc.{}.ln.bias", l), vec![d]);
    }
    for l in 1..=config.decoder_layers {
        for gate in ["filter", "gate"] {
            shapes.insert(format!("dec.{}.{}.v", l, gate), vec![k, d, d]);
            shapes.insert(format!("dec.{}.{}.g", l, gate), vec![d]);
            shapes.insert(format!("dec.{}.{}.b", l, gate), vec![d]);
        }
        shapes.insert(format!("dec.{}.cond_filter", l), vec![d, d]);
        shapes.insert(format!("dec.{}.cond_gate", l), vec![d, d]);
        shapes.insert(format!("dec.{}.ln.gain", l), vec![d]);
        shapes.insert(format!("dec.{}.ln.bias", l), vec![d]);
    }
    for s in 1..=config.levels() {
        shapes.insert(format!("query.{}.w", s), vec![d, d]);
        shapes.insert(format!("query.{}.b", s), vec![d]);
    }
    shapes.insert("out.v".to_string(), vec![(config.levels() + 1) * d, config.vocab_size]);
    shapes.insert("out.g".to_string(), vec![config.vocab_size]);
    if config.output_bias {
        shapes.insert("out.b".to_string(), vec![config.vocab_size]);
    }
    shapes
}

impl<T: Scalar> Parameters<T> {
    /// Xavier initialization for matrices and filters, zeros for biases,
    /// ones for layer-norm gains, and `g = ‖v‖` for weight-norm scales (so
    /// every normalized filter starts equal to its direction tensor).
    /// Deterministic for a fixed seed.
    pub fn init(config: &ModelConfig, seed: u64) -> Parameters<T> {
        config.validate().expect("invalid model configuration");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for (name, shape) in expected_shapes(config) {
            let tensor = init_tensor(&name, &shape, &mut rng);
            tensors.insert(name, tensor);
        }
        let mut params = Parameters { tensors };
        // weight-norm scales start at the per-channel norms of their v
        for prefix in params
            .tensors
            .keys()
            .filter(|n| n.ends_with(".v"))
            .map(|n| n[..n.len() - 2].to_string())
            .collect::<Vec<_>>()
        {
            let v = params.get(&format!("{}.v", prefix));
            let channels = *v.shape().last().unwrap();
            let norms = channel_norms(v.data(), channels);
            let g = params.tensors.get_mut(&format!("{}.g", prefix)).expect("paired g");
            g.data_mut().copy_from_slice(&norms);
        }
        if config.freeze_embeddings {
            params.set_frozen("emb");
        }
        params
    }

    fn set_frozen(&mut self, name: &str) {
        let t = self.tensors.remove(name).expect("unknown parameter");
        // rebuild without the gradient accumulator
        let frozen = Tensor::from_vec(t.shape().to_vec(), t.data().to_vec());
        self.tensors.insert(name.to_string(), frozen);
    }

    pub fn get(&self, name: &str) -> &Tensor<T> {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {:?}", name))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor<T> {
        self.tensors
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {:?}", name))
    }

    pub fn insert(&mut self, name: String, tensor: Tensor<T>) {
        self.tensors.insert(name, tensor);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.tensors.iter()
    }

    pub fn map(&self) -> &BTreeMap<String, Tensor<T>> {
        &self.tensors
    }

    pub fn map_mut(&mut self) -> &mut BTreeMap<String, Tensor<T>> {
        &mut self.tensors
    }

    pub fn num_values(&self) -> usize {
        self.tensors.values().map(|t| t.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for t in self.tensors.values_mut() {
            t.zero_grad();
        }
    }

    /// Copies every tensor onto a tape as a tracked (or constant, if frozen)
    /// leaf, in sorted name order.
    pub fn bind(&self, tape: &mut Tape<T>) -> BoundParams {
        let vars = self
            .tensors
            .iter()
            .map(|(name, tensor)| (name.clone(), tape.input(tensor)))
            .collect();
        BoundParams { vars }
    }

    /// Accumulates tape gradients back into the parameter tensors.
    pub fn absorb_grads(&mut self, bound: &BoundParams, grads: &crate::numerics::Gradients<T>) {
        for (name, var) in &bound.vars {
            if let Some(g) = grads.get(*var) {
                let tensor = self.tensors.get_mut(name).expect("bound unknown parameter");
                if tensor.requires_grad() {
                    tensor.accumulate_grad(g);
                }
            }
        }
    }
}

fn init_tensor<T: Scalar>(name: &str, shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<T> {
    if name.ends_with("ln.gain") {
        return Tensor::full(shape.to_vec(), T::one()).with_grad();
    }
    if name.ends_with(".b") || name.ends_with("ln.bias") {
        return Tensor::zeros(shape.to_vec()).with_grad();
    }
    if name.ends_with(".g") {
        // overwritten with channel norms after the paired v exists
        return Tensor::full(shape.to_vec(), T::one()).with_grad();
    }
    let (fan_in, fan_out) = crate::numerics::tensor::xavier_fans(shape);
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let numel: usize = shape.iter().product();
    let data: Vec<T> = (0..numel)
        .map(|_| T::from_f64(rng.gen_range(-bound..=bound)))
        .collect();
    Tensor::from_vec(shape.to_vec(), data).with_grad()
}

fn channel_norms<T: Scalar>(v: &[T], channels: usize) -> Vec<T> {
    let rows = v.len() / channels;
    let mut norms = vec![T::zero(); channels];
    for r in 0..rows {
        for c in 0..channels {
            let x = v[r * channels + c];
            norms[c] += x * x;
        }
    }
    norms.iter().map(|n| n.sqrt()).collect()
}

/// Tape handles for every parameter of one forward pass.
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    /// Binding over externally created variables; the gradient-checking
    /// harness drives the forward pass through this.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Var)>) -> BoundParams {
        BoundParams { vars: pairs.into_iter().collect() }
    }

    pub fn get(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("parameter {:?} not bound", name))
    }

    pub fn try_get(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }
}

/// Overwrites embedding rows with vectors from a textual embedding file
/// (token followed by `d_emb` numbers per line; an optional two-integer
/// header line is skipped). In-vocabulary tokens take the file vector;
/// everything else keeps its Xavier row. Returns how many rows were loaded.
pub fn load_pretrained_embeddings<T: Scalar>(
    path: &Path,
    vocab: &crate::corpus::Vocabulary,
    params: &mut Parameters<T>,
) -> Result<usize, ModelError> {
    let emb = params.get_mut("emb");
    let d_emb = emb.shape()[1];
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut loaded = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let token = match fields.next() {
            Some(t) => t,
            None => continue,
        };
        let values: Vec<&str> = fields.collect();
        if idx == 0 && values.len() == 1 && token.parse::<usize>().is_ok() {
            continue; // "count dim" header
        }
        if values.len() != d_emb {
            return Err(ModelError::EmbeddingDimMismatch {
                expected: d_emb,
                found: values.len(),
                line: idx + 1,
            });
        }
        if let Some(id) = vocab.id(token) {
            let row = emb.data_mut();
            for (j, value) in values.iter().enumerate() {
                let parsed: f64 = value.parse().map_err(|_| ModelError::Malformed {
                    what: format!("embedding value {:?} at line {}", value, idx + 1),
                })?;
                row[id * d_emb + j] = T::from_f64(parsed);
            }
            loaded += 1;
        }
    }
    Ok(loaded)
}
