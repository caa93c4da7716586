//! Finite-difference verification of tape gradients.
//!
//! Runs in 64-bit: central differences with the default step h = 1e−5 need
//! the precision. The harness perturbs every element of every differentiable
//! input, rebuilds the forward pass through a user closure, and compares the
//! directional derivative against the tape's vector-Jacobian product.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use super::tape::{Tape, Var};

/// Forward-pass builder handed to [`grad_check`]. The harness registers the
/// inputs as tracked variables and passes their handles in declaration order;
/// the closure wires them into an output variable.
pub type ForwardFn = dyn Fn(&mut Tape<f64>, &[Var]) -> Var;

/// Compares analytic gradients against central finite differences.
///
/// `inputs` are `(shape, data)` pairs; every element of every input is
/// perturbed. Vector outputs are projected onto a fixed random direction so
/// a single scalar is differentiated. Returns the max relative error over
/// all input elements.
pub fn grad_check(
    forward: &ForwardFn,
    inputs: &[(Vec<usize>, Vec<f64>)],
    h: f64,
    seed: u64,
) -> f64 {
    let eval = |datas: &[Vec<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs
            .iter()
            .zip(datas)
            .map(|((shape, _), d)| tape.variable(shape.clone(), d.clone()))
            .collect();
        let out = forward(&mut tape, &vars);
        (tape, vars, out)
    };

    let datas: Vec<Vec<f64>> = inputs.iter().map(|(_, d)| d.clone()).collect();

    // analytic pass
    let (tape, vars, out) = eval(&datas);
    let out_len = tape.data(out).len();
    // the projection stream must be decorrelated from the input streams: a
    // projection parallel to an input can sit in an operation's null space
    // (normalization layers) and hide real errors behind a zero gradient
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let projection: Vec<f64> = (0..out_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let grads = tape.backward_seeded(out, &projection);
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(&datas)
        .map(|(v, d)| grads.get(*v).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; d.len()]))
        .collect();

    let project = |datas: &[Vec<f64>]| -> f64 {
        let (tape, _, out) = eval(datas);
        tape.data(out).iter().zip(&projection).map(|(y, p)| y * p).sum()
    };

    let mut max_rel = 0.0f64;
    let mut perturbed = datas.clone();
    for (i, data) in datas.iter().enumerate() {
        for j in 0..data.len() {
            let orig = perturbed[i][j];
            perturbed[i][j] = orig + h;
            let plus = project(&perturbed);
            perturbed[i][j] = orig - h;
            let minus = project(&perturbed);
            perturbed[i][j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            // below the finite-difference noise floor both estimates count
            // as zero and therefore agree
            if analytic[i][j].abs() < 1e-7 && numeric.abs() < 1e-7 {
                continue;
            }
            let denom = analytic[i][j].abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic[i][j] - numeric).abs() / denom;
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}

/// Reproducible uniform values in (−0.5, 0.5); keeps grad-check fixtures
/// away from kinks like max-pool ties.
pub fn random_data(numel: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..numel).map(|_| rng.gen_range(-0.5..0.5)).collect()
}
