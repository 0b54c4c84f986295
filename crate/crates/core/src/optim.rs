//! Adam with bias correction.

use num_traits::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay (`p -= lr * wd * p`). Zero gives plain Adam.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// One Adam update over a flat parameter slice. `step` is the 1-based
/// index of this update and drives the bias correction.
///
/// Arithmetic runs in `f64` regardless of storage type.
pub fn adam_update<T: Float>(
    cfg: &AdamConfig,
    step: u64,
    params: &mut [T],
    grads: &[T],
    m: &mut [T],
    v: &mut [T],
) {
    debug_assert!(step >= 1);
    debug_assert!(params.len() == grads.len() && m.len() == grads.len() && v.len() == grads.len());
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..params.len() {
        let g = grads[i].to_f64().unwrap();
        let mi = cfg.beta1 * m[i].to_f64().unwrap() + (1.0 - cfg.beta1) * g;
        let vi = cfg.beta2 * v[i].to_f64().unwrap() + (1.0 - cfg.beta2) * g * g;
        let m_hat = mi / bc1;
        let v_hat = vi / bc2;
        let mut p = params[i].to_f64().unwrap();
        if cfg.weight_decay != 0.0 {
            p -= cfg.learning_rate * cfg.weight_decay * p;
        }
        p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        m[i] = T::from(mi).unwrap();
        v[i] = T::from(vi).unwrap();
        params[i] = T::from(p).unwrap();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form first step: m̂ = g, v̂ = g², so the update is
    /// lr·g/(|g|+ε).
    #[test]
    fn first_step_matches_scalar_oracle() {
        let cfg = AdamConfig::with_learning_rate(0.01);
        for &g in &[0.5f64, -2.0, 1e-3, 7.25] {
            let mut p = [1.0f64];
            let mut m = [0.0];
            let mut v = [0.0];
            adam_update(&cfg, 1, &mut p, &[g], &mut m, &mut v);
            // Independent recomputation following the textbook recurrences.
            let m1 = 0.1 * g;
            let v1 = 0.001 * g * g;
            let m_hat = m1 / (1.0 - 0.9);
            let v_hat = v1 / (1.0 - 0.999);
            let expected = 1.0 - 0.01 * m_hat / (v_hat.sqrt() + 1e-8);
            assert!((p[0] - expected).abs() < 1e-10, "g={g}");
            assert!((m[0] - m1).abs() < 1e-15);
            assert!((v[0] - v1).abs() < 1e-15);
        }
    }

    #[test]
    fn second_step_matches_scalar_oracle() {
        let cfg = AdamConfig::with_learning_rate(0.001);
        let (g1, g2) = (0.3f64, -0.7f64);
        let mut p = [0.25f64];
        let mut m = [0.0];
        let mut v = [0.0];
        adam_update(&cfg, 1, &mut p, &[g1], &mut m, &mut v);
        adam_update(&cfg, 2, &mut p, &[g2], &mut m, &mut v);

        let mut pe = 0.25f64;
        let (mut me, mut ve) = (0.0f64, 0.0f64);
        for (t, g) in [(1, g1), (2, g2)] {
            me = 0.9 * me + 0.1 * g;
            ve = 0.999 * ve + 0.001 * g * g;
            let mh = me / (1.0 - 0.9f64.powi(t));
            let vh = ve / (1.0 - 0.999f64.powi(t));
            pe -= 0.001 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p[0] - pe).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let cfg = AdamConfig::with_learning_rate(0.01);
        let mut p = [0.5f32, -1.5, 3.0];
        let before = p;
        let mut m = [0.0f32; 3];
        let mut v = [0.0f32; 3];
        for step in 1..=10 {
            adam_update(&cfg, step, &mut p, &[0.0; 3], &mut m, &mut v);
        }
        for (a, b) in p.iter().zip(before) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_decay_is_decoupled() {
        let cfg = AdamConfig {
            weight_decay: 0.1,
            ..AdamConfig::with_learning_rate(0.01)
        };
        let mut p = [2.0f64];
        adam_update(&cfg, 1, &mut p, &[0.0], &mut [0.0], &mut [0.0]);
        assert!((p[0] - (2.0 - 0.01 * 0.1 * 2.0)).abs() < 1e-15);
    }
}
