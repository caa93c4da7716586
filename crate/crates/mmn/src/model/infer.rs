//! Inference without the tape: weight-normalized filters are materialized
//! once, documents are encoded once, and decoding appends one position per
//! step instead of re-running the causal stack.
//!
//! Every arithmetic step reuses the kernels the tape ops are built on, in
//! the same accumulation order, so teacher-forced logits and incremental
//! logits agree bit-for-bit.

use crate::corpus::{BOS_ID, EOS_ID};
use crate::numerics::kernels::{
    conv1d_row, layer_norm_row, matvec_row, softmax_in_place, weight_norm_filter, Padding,
};
use crate::numerics::Scalar;

use super::config::{ModelConfig, EPS_LAYER_NORM};
use super::params::Parameters;

struct ConvPair<T> {
    filter_w: Vec<T>,
    filter_b: Vec<T>,
    gate_w: Vec<T>,
    gate_b: Vec<T>,
    ln_gain: Vec<T>,
    ln_bias: Vec<T>,
}

struct DecoderLayer<T> {
    conv: ConvPair<T>,
    cond_filter: Vec<T>, // [d, d]
    cond_gate: Vec<T>,
}

/// A read-only model with weight normalization already applied. Immutable
/// during inference; any number of decode sessions may share one.
pub struct InferenceModel<T: Scalar> {
    pub config: ModelConfig,
    emb: Vec<T>,
    encoder: Vec<ConvPair<T>>,
    decoder: Vec<DecoderLayer<T>>,
    queries: Vec<(Vec<T>, Vec<T>)>,
    w_out: Vec<T>,
    b_out: Option<Vec<T>>,
}

/// Per-document state produced by [`InferenceModel::encode_document`].
pub struct EncodedDocument<T> {
    /// (M_s^a, M_s^c) per level, each `[N, d]`.
    pub memories: Vec<(Vec<T>, Vec<T>)>,
    pub d_whole: Vec<T>,
    pub positions: usize,
    /// Conditioning vectors per decoder layer: (W_f·d_whole, W_g·d_whole).
    cond: Vec<(Vec<T>, Vec<T>)>,
}

/// Growing decoder state: generated ids plus per-layer states over all
/// produced positions. The state at position t never depends on later
/// positions, which is what makes appending sound.
pub struct DecodeState<T> {
    /// Conditioned convolution inputs per layer: (x_f, x_g), each `[t, d]`.
    layer_inputs: Vec<(Vec<T>, Vec<T>)>,
    /// Raw layer states o^0..o^L, each `[t, d]`.
    layer_states: Vec<Vec<T>>,
    /// Generated summary ids (excluding BOS, including a final EOS if hit).
    pub generated: Vec<usize>,
    steps: usize,
}

impl<T: Scalar> InferenceModel<T> {
    pub fn new(config: &ModelConfig, params: &Parameters<T>) -> Self {
        config.validate().expect("invalid model configuration");
        let wn = |prefix: &str| {
            let v = params.get(&format!("{}.v", prefix));
            let g = params.get(&format!("{}.g", prefix));
            weight_norm_filter(v.data(), g.data(), *v.shape().last().unwrap())
        };
        let vec_of = |name: &str| params.get(name).data().to_vec();
        let encoder = (1..=config.encoder_layers)
            .map(|l| ConvPair {
                filter_w: wn(&format!("enc.{}.filter", l)),
                filter_b: vec_of(&format!("enc.{}.filter.b", l)),
                gate_w: wn(&format!("enc.{}.gate", l)),
                gate_b: vec_of(&format!("enc.{}.gate.b", l)),
                ln_gain: vec_of(&format!("enc.{}.ln.gain", l)),
                ln_bias: vec_of(&format!("enc.{}.ln.bias", l)),
            })
            .collect();
        let decoder = (1..=config.decoder_layers)
            .map(|l| DecoderLayer {
                conv: ConvPair {
                    filter_w: wn(&format!("dec.{}.filter", l)),
                    filter_b: vec_of(&format!("dec.{}.filter.b", l)),
                    gate_w: wn(&format!("dec.{}.gate", l)),
                    gate_b: vec_of(&format!("dec.{}.gate.b", l)),
                    ln_gain: vec_of(&format!("dec.{}.ln.gain", l)),
                    ln_bias: vec_of(&format!("dec.{}.ln.bias", l)),
                },
                cond_filter: vec_of(&format!("dec.{}.cond_filter", l)),
                cond_gate: vec_of(&format!("dec.{}.cond_gate", l)),
            })
            .collect();
        let queries = (1..=config.levels())
            .map(|s| (vec_of(&format!("query.{}.w", s)), vec_of(&format!("query.{}.b", s))))
            .collect();
        InferenceModel {
            config: config.clone(),
            emb: vec_of("emb"),
            encoder,
            decoder,
            queries,
            w_out: wn("out"),
            b_out: if config.output_bias { Some(vec_of("out.b")) } else { None },
        }
    }

    fn embed(&self, id: usize) -> &[T] {
        let d = self.config.d_emb;
        assert!(id < self.config.vocab_size, "token id {} out of range", id);
        &self.emb[id * d..(id + 1) * d]
    }

    /// Encoder forward over a document; mirrors the tape path exactly.
    pub fn encode_document(&self, document_ids: &[usize]) -> EncodedDocument<T> {
        assert!(!document_ids.is_empty(), "encode: empty document");
        let d = self.config.d_emb;
        let n = document_ids.len();
        let k = self.config.kernel_size;
        let mut d0 = Vec::with_capacity(n * d);
        for &id in document_ids {
            d0.extend_from_slice(self.embed(id));
        }
        let mut keep: Vec<Option<Vec<T>>> = vec![None; self.config.encoder_layers + 1];
        keep[0] = Some(d0.clone());
        let mut state = d0.clone();
        for (l0, layer) in self.encoder.iter().enumerate() {
            let dilation = ModelConfig::dilation(l0 + 1);
            let mut next = vec![T::zero(); n * d];
            let mut h_f = vec![T::zero(); d];
            let mut h_g = vec![T::zero(); d];
            for s in 0..n {
                conv1d_row(&state, n, d, &layer.filter_w, &layer.filter_b, k, dilation, Padding::Centered, s, &mut h_f);
                conv1d_row(&state, n, d, &layer.gate_w, &layer.gate_b, k, dilation, Padding::Centered, s, &mut h_g);
                let row = &mut next[s * d..(s + 1) * d];
                for c in 0..d {
                    let gtu = h_f[c].tanh() * sigmoid(h_g[c]);
                    row[c] = state[s * d + c] + gtu;
                }
                let pre = row.to_vec();
                layer_norm_row(&pre, &layer.ln_gain, &layer.ln_bias, T::from_f64(EPS_LAYER_NORM), row);
            }
            state = next;
            if self.config.memory_layers.contains(&(l0 + 1)) {
                keep[l0 + 1] = Some(state.clone());
            }
        }
        // maxpool over time, ties to the lowest index
        let mut d_whole = state[..d].to_vec();
        for r in 1..n {
            for c in 0..d {
                if state[r * d + c] > d_whole[c] {
                    d_whole[c] = state[r * d + c];
                }
            }
        }
        let d0 = keep[0].take().unwrap();
        let memories = self
            .config
            .memory_layers
            .iter()
            .map(|&m| {
                let m_a = keep[m].clone().expect("memory layer state kept");
                let m_c: Vec<T> = m_a.iter().zip(&d0).map(|(&a, &b)| a + b).collect();
                (m_a, m_c)
            })
            .collect();
        let cond = self
            .decoder
            .iter()
            .map(|layer| {
                let mut cf = vec![T::zero(); d];
                let mut cg = vec![T::zero(); d];
                matvec_row(&d_whole, &layer.cond_filter, None, &mut cf);
                matvec_row(&d_whole, &layer.cond_gate, None, &mut cg);
                (cf, cg)
            })
            .collect();
        EncodedDocument { memories, d_whole, positions: n, cond }
    }

    /// Starts a decode session; the first decoder input is BOS.
    pub fn start(&self) -> DecodeState<T> {
        DecodeState {
            layer_inputs: vec![(Vec::new(), Vec::new()); self.config.decoder_layers],
            layer_states: vec![Vec::new(); self.config.decoder_layers + 1],
            generated: Vec::new(),
            steps: 0,
        }
    }

    /// Advances one step: appends the next input token (BOS, then the last
    /// generated id unless given explicitly) and returns the logits `[V]`
    /// for the next position.
    pub fn decode_step(&self, state: &mut DecodeState<T>, doc: &EncodedDocument<T>) -> Vec<T> {
        let input_id = if state.steps == 0 {
            BOS_ID
        } else {
            *state.generated.last().expect("state out of sync")
        };
        self.advance(state, doc, input_id)
    }

    /// Teacher-forced variant of [`Self::decode_step`]: feeds a given token.
    pub fn advance(
        &self,
        state: &mut DecodeState<T>,
        doc: &EncodedDocument<T>,
        input_id: usize,
    ) -> Vec<T> {
        let d = self.config.d_emb;
        let k = self.config.kernel_size;
        let t = state.steps;
        state.layer_states[0].extend_from_slice(self.embed(input_id));
        for (l0, layer) in self.decoder.iter().enumerate() {
            let dilation = ModelConfig::dilation(l0 + 1);
            let (cf, cg) = &doc.cond[l0];
            // conditioned inputs for this position
            {
                let row_start = t * d;
                let below = &state.layer_states[l0][row_start..row_start + d];
                let (x_f, x_g) = &mut state.layer_inputs[l0];
                for c in 0..d {
                    x_f.push(below[c] + cf[c]);
                }
                for c in 0..d {
                    x_g.push(below[c] + cg[c]);
                }
            }
            let (x_f, x_g) = &state.layer_inputs[l0];
            let mut h_f = vec![T::zero(); d];
            let mut h_g = vec![T::zero(); d];
            conv1d_row(x_f, t + 1, d, &layer.conv.filter_w, &layer.conv.filter_b, k, dilation, Padding::Causal, t, &mut h_f);
            conv1d_row(x_g, t + 1, d, &layer.conv.gate_w, &layer.conv.gate_b, k, dilation, Padding::Causal, t, &mut h_g);
            let below = &state.layer_states[l0][t * d..(t + 1) * d];
            let mut pre = vec![T::zero(); d];
            for c in 0..d {
                pre[c] = below[c] + h_f[c].tanh() * sigmoid(h_g[c]);
            }
            let mut normed = vec![T::zero(); d];
            layer_norm_row(&pre, &layer.conv.ln_gain, &layer.conv.ln_bias, T::from_f64(EPS_LAYER_NORM), &mut normed);
            state.layer_states[l0 + 1].extend_from_slice(&normed);
        }
        state.steps += 1;
        let top = &state.layer_states[self.config.decoder_layers][t * d..(t + 1) * d];
        self.logits_for(top, doc)
    }

    /// Queries, memory reads and output projection for one top state row.
    fn logits_for(&self, top: &[T], doc: &EncodedDocument<T>) -> Vec<T> {
        let d = self.config.d_emb;
        let v = self.config.vocab_size;
        let n = doc.positions;
        let scale = T::from_f64(1.0 / (d as f64).sqrt());
        let mut concat: Vec<T> = Vec::with_capacity((self.queries.len() + 1) * d);
        for (s, (w_q, b_q)) in self.queries.iter().enumerate() {
            let mut q = vec![T::zero(); d];
            matvec_row(top, w_q, None, &mut q);
            for c in 0..d {
                q[c] = (q[c] + b_q[c]).tanh();
            }
            let (m_a, m_c) = &doc.memories[s];
            let mut scores = vec![T::zero(); n];
            for (r, score) in scores.iter_mut().enumerate() {
                let row = &m_a[r * d..(r + 1) * d];
                let mut acc = T::zero();
                for c in 0..d {
                    acc += q[c] * row[c];
                }
                *score = acc * scale;
            }
            softmax_in_place(&mut scores);
            let mut read = vec![T::zero(); d];
            matvec_row(&scores, m_c, None, &mut read);
            concat.extend_from_slice(&read);
        }
        concat.extend_from_slice(top);
        let mut logits = vec![T::zero(); v];
        matvec_row(&concat, &self.w_out, None, &mut logits);
        if let Some(b) = &self.b_out {
            for (l, bv) in logits.iter_mut().zip(b) {
                *l += *bv;
            }
        }
        logits
    }

    /// Greedy decoding: encode once, repeatedly take the argmax token (ties
    /// to the lowest id), stop at EOS or `max_len`. BOS/EOS never appear in
    /// the returned ids.
    pub fn greedy_decode(&self, document_ids: &[usize], max_len: usize) -> Vec<usize> {
        assert!(max_len >= 1, "greedy_decode: max_len must be at least 1");
        let doc = self.encode_document(document_ids);
        let mut state = self.start();
        for _ in 0..max_len {
            let logits = self.decode_step(&mut state, &doc);
            let next = argmax(&logits);
            if next == EOS_ID {
                break;
            }
            state.generated.push(next);
        }
        state.generated.clone()
    }

    /// Teacher-forced log-probabilities of each target token (natural log,
    /// un-smoothed); the ingredient for perplexity.
    pub fn target_log_probs(&self, document_ids: &[usize], summary_ids: &[usize]) -> Vec<T> {
        let doc = self.encode_document(document_ids);
        let mut state = self.start();
        let mut input = BOS_ID;
        let mut out = Vec::with_capacity(summary_ids.len());
        for &target in summary_ids {
            let logits = self.advance(&mut state, &doc, input);
            out.push(log_softmax_at(&logits, target));
            input = target;
        }
        out
    }
}

/// Lowest-index argmax.
pub fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn log_softmax_at<T: Scalar>(logits: &[T], index: usize) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut z = T::zero();
    for &l in logits {
        z += (l - max).exp();
    }
    logits[index] - max - z.ln()
}
