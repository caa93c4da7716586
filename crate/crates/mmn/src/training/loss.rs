//! Label-smoothed cross-entropy: the plain forward form, the smoothed
//! target construction, and its analytic loss floor.
//!
//! The smoothed target assigns 1−ε to the gold word and ε/V to each of the
//! V−1 alternatives, taken literally from its defining construction, so the
//! distribution sums to 1 − ε/V rather than 1. Nothing here renormalizes.

use crate::numerics::Scalar;

/// The smoothed target distribution for one position.
pub fn smoothed_target(gold: usize, vocab_size: usize, eps: f64) -> Vec<f64> {
    assert!(gold < vocab_size, "gold id out of range");
    let mut q = vec![eps / vocab_size as f64; vocab_size];
    q[gold] = 1.0 - eps;
    q
}

/// Total probability mass of the smoothed target: exactly `1 − ε/V`.
pub fn smoothed_target_mass(vocab_size: usize, eps: f64) -> f64 {
    1.0 - eps / vocab_size as f64
}

/// Mean over positions of `−Σ_y q(y)·log p(y)`, computed directly from
/// logits `[T, V]` (row-major) with a numerically stable log-softmax.
pub fn label_smoothed_loss<T: Scalar>(logits: &[T], targets: &[usize], eps: f64, vocab_size: usize) -> f64 {
    assert!(!targets.is_empty(), "loss needs at least one position");
    assert_eq!(logits.len(), targets.len() * vocab_size, "logit row per target");
    let uniform = eps / vocab_size as f64;
    let gt_mass = 1.0 - eps;
    let mut total = 0.0;
    for (r, &gold) in targets.iter().enumerate() {
        let row = &logits[r * vocab_size..(r + 1) * vocab_size];
        let max = row.iter().map(|x| x.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for x in row {
            z += (x.as_f64() - max).exp();
        }
        let log_z = z.ln() + max;
        let mut sum_logp = 0.0;
        for x in row {
            sum_logp += x.as_f64() - log_z;
        }
        let logp_gold = row[gold].as_f64() - log_z;
        total -= gt_mass * logp_gold + uniform * (sum_logp - logp_gold);
    }
    total / targets.len() as f64
}

/// The minimum attainable smoothed loss per position. The optimum predicts
/// the normalized target q/Z (Z = 1 − ε/V), giving
/// `−Σ q·log q + Z·log Z`; zero when ε is zero.
pub fn loss_floor(vocab_size: usize, eps: f64) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    let v = vocab_size as f64;
    let uniform = eps / v;
    let gt = 1.0 - eps;
    let z = 1.0 - uniform;
    let entropy = -(gt * gt.ln() + (v - 1.0) * uniform * uniform.ln());
    entropy + z * z.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tape;

    #[test]
    fn target_mass_is_one_minus_eps_over_v() {
        for (v, eps) in [(4usize, 0.1f64), (15000, 0.1), (64, 0.05), (7, 0.0)] {
            let q = smoothed_target(0, v, eps);
            let total: f64 = q.iter().sum();
            assert!(
                (total - smoothed_target_mass(v, eps)).abs() < 1e-9,
                "v={} eps={} total={}",
                v,
                eps,
                total
            );
        }
    }

    #[test]
    fn gold_mass_is_one_minus_eps() {
        let q = smoothed_target(2, 4, 0.1);
        assert!((q[2] - 0.9).abs() < 1e-15);
        assert!((q[0] - 0.025).abs() < 1e-15);
    }

    #[test]
    fn uniform_logits_frozen_value() {
        // V=4, ε=0.1 -> 0.975·ln 4
        let logits = vec![0.0f64; 4];
        let loss = label_smoothed_loss(&logits, &[1], 0.1, 4);
        assert!((loss - 0.975 * 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_eps_is_plain_cross_entropy() {
        let logits = vec![0.3f64, -0.2, 1.4, 0.0, 0.0, 0.1, -0.4, 0.2];
        let targets = [2, 1];
        let loss = label_smoothed_loss(&logits, &targets, 0.0, 4);
        let mut expected = 0.0;
        for (r, &gold) in targets.iter().enumerate() {
            let row = &logits[r * 4..(r + 1) * 4];
            let z: f64 = row.iter().map(|x| x.exp()).sum();
            expected -= (row[gold].exp() / z).ln();
        }
        expected /= 2.0;
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn plain_form_agrees_with_tape_op() {
        let logits: Vec<f64> = crate::numerics::random_data(3 * 5, 17);
        let targets = [0, 4, 2];
        let plain = label_smoothed_loss(&logits, &targets, 0.1, 5);
        let mut tape = Tape::new();
        let l = tape.constant(vec![3, 5], logits);
        let loss = tape.label_smoothed_cross_entropy(l, &targets, 0.1);
        assert!((plain - tape.scalar(loss)).abs() < 1e-12);
    }

    #[test]
    fn floor_is_attained_by_normalized_target() {
        let (v, eps) = (6usize, 0.1f64);
        let z = smoothed_target_mass(v, eps);
        // logits = log(q/Z) reach the optimum exactly
        let q = smoothed_target(3, v, eps);
        let logits: Vec<f64> = q.iter().map(|&p| (p / z).ln()).collect();
        let loss = label_smoothed_loss(&logits, &[3], eps, v);
        let floor = loss_floor(v, eps);
        assert!((loss - floor).abs() < 1e-12, "loss {} floor {}", loss, floor);
        // and nearby distributions do worse
        let mut worse = logits.clone();
        worse[0] += 0.05;
        assert!(label_smoothed_loss(&worse, &[3], eps, v) > floor);
    }

    #[test]
    fn zero_eps_floor_is_zero() {
        assert_eq!(loss_floor(64, 0.0), 0.0);
    }
}
