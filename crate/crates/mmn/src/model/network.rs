//! Tape-based forward pass: encoder, multi-level memory, conditioned causal
//! decoder, memory attention and output projection.
//!
//! Everything here runs on the autodiff tape, so one `backward` call after
//! [`teacher_forced_loss`] yields gradients for the whole network. Greedy
//! decoding has a separate incremental path in [`super::infer`], kept
//! bit-compatible with this one through the shared kernels.

use crate::corpus::BOS_ID;
use crate::numerics::{Padding, Scalar, Tape, Var};

use super::config::{ModelConfig, EPS_LAYER_NORM};
use super::params::BoundParams;

/// Per-layer encoder states d^0..d^L plus the pooled document embedding.
pub struct EncoderOutput {
    pub layers: Vec<Var>,
    pub d_whole: Var,
}

/// Input/output memory pair for one level.
pub struct MemoryLevel {
    pub input: Var,
    pub output: Var,
}

/// All memory levels, in config order.
pub struct MemorySet {
    pub levels: Vec<MemoryLevel>,
}

/// One normalized gated tanh unit:
/// `LayerNorm(x + tanh(conv_f(x)) ∘ σ(conv_g(x)))` with weight-normalized
/// filters. `padding` selects the encoder (centered) or decoder (causal)
/// variant.
#[allow(clippy::too_many_arguments)]
pub fn ngtu_block<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    filter: (Var, Var, Var),
    gate: (Var, Var, Var),
    ln: (Var, Var),
    dilation: usize,
    padding: Padding,
) -> Var {
    let w_f = tape.weight_norm(filter.0, filter.1);
    let h_f = tape.conv1d(x, w_f, filter.2, dilation, padding);
    let w_g = tape.weight_norm(gate.0, gate.1);
    let h_g = tape.conv1d(x, w_g, gate.2, dilation, padding);
    let t = tape.tanh(h_f);
    let s = tape.sigmoid(h_g);
    let gtu = tape.mul(t, s);
    let residual = tape.add(x, gtu);
    tape.layer_norm(residual, ln.0, ln.1, T::from_f64(EPS_LAYER_NORM))
}

/// Runs the dilated-convolution encoder over a token id sequence.
pub fn encode<T: Scalar>(
    tape: &mut Tape<T>,
    params: &BoundParams,
    config: &ModelConfig,
    document_ids: &[usize],
) -> EncoderOutput {
    assert!(!document_ids.is_empty(), "encode: empty document");
    let emb = params.get("emb");
    let d0 = tape.gather_rows(emb, document_ids);
    let mut layers = vec![d0];
    for l in 1..=config.encoder_layers {
        let x = *layers.last().unwrap();
        let next = ngtu_block(
            tape,
            x,
            (
                params.get(&format!("enc.{}.filter.v", l)),
                params.get(&format!("enc.{}.filter.g", l)),
                params.get(&format!("enc.{}.filter.b", l)),
            ),
            (
                params.get(&format!("enc.{}.gate.v", l)),
                params.get(&format!("enc.{}.gate.g", l)),
                params.get(&format!("enc.{}.gate.b", l)),
            ),
            (
                params.get(&format!("enc.{}.ln.gain", l)),
                params.get(&format!("enc.{}.ln.bias", l)),
            ),
            ModelConfig::dilation(l),
            Padding::Centered,
        );
        layers.push(next);
    }
    let d_whole = tape.maxpool_time(*layers.last().unwrap());
    EncoderOutput { layers, d_whole }
}

/// Key/value memories from the configured encoder layers:
/// `M_s^a = d^{m(s)}` and `M_s^c = d^{m(s)} + d^0`.
pub fn build_memories<T: Scalar>(
    tape: &mut Tape<T>,
    config: &ModelConfig,
    encoder: &EncoderOutput,
) -> MemorySet {
    let d0 = encoder.layers[0];
    let levels = config
        .memory_layers
        .iter()
        .map(|&m| {
            let input = encoder.layers[m];
            let output = tape.add(input, d0);
            MemoryLevel { input, output }
        })
        .collect();
    MemorySet { levels }
}

/// Scaled dot-product read over one memory level:
/// `softmax(q·M_aᵀ / √d_emb) · M_c`, with PAD positions masked out.
pub fn attend<T: Scalar>(
    tape: &mut Tape<T>,
    q: Var,
    memory: &MemoryLevel,
    mask: Option<&[bool]>,
    d_emb: usize,
) -> Var {
    let scores = tape.matmul_bt(q, memory.input);
    let scaled = tape.scale(scores, T::from_f64(1.0 / (d_emb as f64).sqrt()));
    let weights = tape.masked_softmax_rows(scaled, mask);
    tape.matmul(weights, memory.output)
}

/// Runs the causal decoder stack over shifted summary ids, globally
/// conditioned on the document embedding. Returns the top state o^L `[T, d]`.
pub fn decoder_states<T: Scalar>(
    tape: &mut Tape<T>,
    params: &BoundParams,
    config: &ModelConfig,
    d_whole: Var,
    input_ids: &[usize],
) -> Var {
    assert!(!input_ids.is_empty(), "decoder: empty input");
    let emb = params.get("emb");
    let mut state = tape.gather_rows(emb, input_ids);
    let d = config.d_emb;
    let whole_row = tape.reshape(d_whole, vec![1, d]);
    for l in 1..=config.decoder_layers {
        let cond_f = params.get(&format!("dec.{}.cond_filter", l));
        let cond_g = params.get(&format!("dec.{}.cond_gate", l));
        let cf = tape.matmul(whole_row, cond_f);
        let cg = tape.matmul(whole_row, cond_g);
        let x_f = tape.add_row_broadcast(state, cf);
        let x_g = tape.add_row_broadcast(state, cg);

        let w_f = tape.weight_norm(
            params.get(&format!("dec.{}.filter.v", l)),
            params.get(&format!("dec.{}.filter.g", l)),
        );
        let h_f = tape.conv1d(
            x_f,
            w_f,
            params.get(&format!("dec.{}.filter.b", l)),
            ModelConfig::dilation(l),
            Padding::Causal,
        );
        let w_g = tape.weight_norm(
            params.get(&format!("dec.{}.gate.v", l)),
            params.get(&format!("dec.{}.gate.g", l)),
        );
        let h_g = tape.conv1d(
            x_g,
            w_g,
            params.get(&format!("dec.{}.gate.b", l)),
            ModelConfig::dilation(l),
            Padding::Causal,
        );
        let t = tape.tanh(h_f);
        let s = tape.sigmoid(h_g);
        let h_a = tape.mul(t, s);
        let residual = tape.add(state, h_a);
        state = tape.layer_norm(
            residual,
            params.get(&format!("dec.{}.ln.gain", l)),
            params.get(&format!("dec.{}.ln.bias", l)),
            T::from_f64(EPS_LAYER_NORM),
        );
    }
    state
}

/// Per-level queries, memory reads, concatenation and output projection.
/// Returns pre-softmax logits `[T, V]`.
pub fn output_logits<T: Scalar>(
    tape: &mut Tape<T>,
    params: &BoundParams,
    config: &ModelConfig,
    top_state: Var,
    memories: &MemorySet,
    mask: Option<&[bool]>,
) -> Var {
    let mut parts = Vec::with_capacity(memories.levels.len() + 1);
    for (s, level) in memories.levels.iter().enumerate() {
        let w_q = params.get(&format!("query.{}.w", s + 1));
        let b_q = params.get(&format!("query.{}.b", s + 1));
        let lin = tape.matmul(top_state, w_q);
        let aff = tape.add_row_broadcast(lin, b_q);
        let q = tape.tanh(aff);
        parts.push(attend(tape, q, level, mask, config.d_emb));
    }
    parts.push(top_state);
    let concat = tape.concat_cols(&parts);
    let w_o = tape.weight_norm(params.get("out.v"), params.get("out.g"));
    let logits = tape.matmul(concat, w_o);
    match params.try_get("out.b") {
        Some(b) => tape.add_row_broadcast(logits, b),
        None => logits,
    }
}

/// Decoder input for teacher forcing: `<bos>` followed by the summary
/// content (the terminating `<eos>` becomes the last prediction target
/// instead of an input).
pub fn decoder_input(summary_ids: &[usize]) -> Vec<usize> {
    assert!(!summary_ids.is_empty(), "empty summary");
    let mut input = Vec::with_capacity(summary_ids.len());
    input.push(BOS_ID);
    input.extend_from_slice(&summary_ids[..summary_ids.len() - 1]);
    input
}

/// Full teacher-forced forward pass to logits `[T, V]`.
pub fn teacher_forced_logits<T: Scalar>(
    tape: &mut Tape<T>,
    params: &BoundParams,
    config: &ModelConfig,
    document_ids: &[usize],
    summary_ids: &[usize],
) -> Var {
    let encoder = encode(tape, params, config, document_ids);
    let memories = build_memories(tape, config, &encoder);
    let input = decoder_input(summary_ids);
    let top = decoder_states(tape, params, config, encoder.d_whole, &input);
    output_logits(tape, params, config, top, &memories, None)
}

/// Teacher-forced label-smoothed loss for one example.
pub fn teacher_forced_loss<T: Scalar>(
    tape: &mut Tape<T>,
    params: &BoundParams,
    config: &ModelConfig,
    document_ids: &[usize],
    summary_ids: &[usize],
) -> Var {
    let logits = teacher_forced_logits(tape, params, config, document_ids, summary_ids);
    tape.label_smoothed_cross_entropy(logits, summary_ids, T::from_f64(config.eps_smooth))
}
