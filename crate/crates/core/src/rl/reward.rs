use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub eps_ann: f64,
    pub a: f64,
    pub b: f64,
    pub kde_bandwidth: f64,
    pub discount: f64,
    pub top_k: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            eps_ann: 0.01,
            a: 0.003,
            b: 0.003,
            kde_bandwidth: 0.3,
            discount: 0.99,
            top_k: 10,
        }
    }
}

/// Novelty bonus for a movement ending at `x`: `a - b * density`, where
/// density is the mean Gaussian kernel over earlier positions and is zero
/// for an empty trace.
pub fn exploration_reward(trace: &[(f64, f64)], x: (f64, f64), cfg: &RewardConfig) -> f64 {
    if trace.is_empty() {
        return cfg.a;
    }
    let two_h2 = 2.0 * cfg.kde_bandwidth * cfg.kde_bandwidth;
    let density = trace
        .iter()
        .map(|p| {
            let d2 = (p.0 - x.0).powi(2) + (p.1 - x.1).powi(2);
            (-d2 / two_h2).exp()
        })
        .sum::<f64>()
        / trace.len() as f64;
    cfg.a - cfg.b * density
}

pub fn annotate_reward(miou_after: f64, miou_before: f64, cfg: &RewardConfig) -> f64 {
    (miou_after - miou_before) - cfg.eps_ann
}

pub fn collect_reward(miou_after: f64, miou_before: f64) -> f64 {
    miou_after - miou_before
}

pub fn final_reward(miou_final: f64, miou_initial: f64) -> f64 {
    miou_final - miou_initial
}

/// Discounted returns, computed backwards.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exploration_examples() {
        let cfg = RewardConfig::default();
        assert_eq!(exploration_reward(&[], (1.0, 2.0), &cfg), 0.003);
        assert_eq!(exploration_reward(&[(1.0, 2.0)], (1.0, 2.0), &cfg), 0.0);
        let r = exploration_reward(&[(1.3, 2.0)], (1.0, 2.0), &cfg);
        assert!((r - 0.003 * (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!((r - 0.001180).abs() < 1e-6);
    }

    #[test]
    fn perception_reward_examples() {
        let cfg = RewardConfig::default();
        assert_eq!(annotate_reward(0.3, 0.3, &cfg), -0.01);
        assert!((annotate_reward(0.35, 0.30, &cfg) - 0.04).abs() < 1e-12);
        assert!(annotate_reward(0.31, 0.30, &cfg).abs() < 1e-12);
        assert_eq!(collect_reward(0.3, 0.3), 0.0);
        assert!((collect_reward(0.32, 0.30) - 0.02).abs() < 1e-12);
        assert!((collect_reward(0.29, 0.30) + 0.01).abs() < 1e-12);
        assert_eq!(final_reward(0.2, 0.2), 0.0);
        assert!((final_reward(0.40, 0.10) - 0.30).abs() < 1e-12);
    }

    #[test]
    fn returns_discount_backwards() {
        let r = discounted_returns(&[1.0, 0.0, 2.0], 0.5);
        assert_eq!(r, vec![1.5, 1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn exploration_is_translation_invariant(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 0..20),
            x in (-5.0f64..5.0, -5.0f64..5.0),
            shift in (-100.0f64..100.0, -100.0f64..100.0),
        ) {
            let cfg = RewardConfig::default();
            let moved: Vec<(f64, f64)> = pts.iter().map(|p| (p.0 + shift.0, p.1 + shift.1)).collect();
            let a = exploration_reward(&pts, x, &cfg);
            let b = exploration_reward(&moved, (x.0 + shift.0, x.1 + shift.1), &cfg);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
