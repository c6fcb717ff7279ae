use std::f64::consts::PI;

use super::config::TrainConfig;

/// Learning rate at fractional epoch `t`: linear warmup, then cosine decay
/// from `lr` to `min_lr` at the final epoch.
pub fn learning_rate(cfg: &TrainConfig, t: f64) -> f64 {
    let warmup = cfg.warmup_epochs.min(cfg.epochs) as f64;
    if t < warmup {
        return cfg.lr * t / warmup;
    }
    let span = (cfg.epochs as f64 - warmup).max(f64::MIN_POSITIVE);
    let progress = ((t - warmup) / span).clamp(0.0, 1.0);
    cfg.min_lr + (cfg.lr - cfg.min_lr) * 0.5 * (1.0 + (PI * progress).cos())
}

/// Adam with decoupled weight decay on a flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamW {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    decay: Vec<bool>,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamW {
    pub fn new(cfg: &TrainConfig, decay: Vec<bool>) -> Self {
        let n = decay.len();
        AdamW {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
            decay,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            if self.decay[k] {
                params[k] -= lr * self.weight_decay * params[k];
            }
            params[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        let cfg = TrainConfig::default();
        assert_eq!(learning_rate(&cfg, 0.0), 0.0);
        assert!((learning_rate(&cfg, 10.0) - 5e-4).abs() < 1e-15);
        assert!((learning_rate(&cfg, 20.0) - 1e-3).abs() < 1e-15);
        assert!((learning_rate(&cfg, 600.0) - 1e-5).abs() < 1e-15);
        let mid = learning_rate(&cfg, 310.0);
        assert!((mid - (1e-5 + (1e-3 - 1e-5) * 0.5)).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for e in 20..=600 {
            let lr = learning_rate(&cfg, e as f64);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        // bias-corrected first step is lr * sign(g)
        let cfg = TrainConfig::default();
        let mut opt = AdamW::new(&cfg, vec![false, false]);
        let mut p = vec![1.0, -1.0];
        opt.step(&mut p, &[0.5, -3.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn decay_only_on_flagged() {
        let cfg = TrainConfig {
            weight_decay: 0.5,
            ..TrainConfig::default()
        };
        let mut opt = AdamW::new(&cfg, vec![true, false]);
        let mut p = vec![2.0, 2.0];
        opt.step(&mut p, &[0.0, 0.0], 0.1);
        assert!((p[0] - 1.9).abs() < 1e-12);
        assert_eq!(p[1], 2.0);
    }

    #[test]
    fn minimises_quadratic() {
        let cfg = TrainConfig::default();
        let mut opt = AdamW::new(&cfg, vec![false; 3]);
        let target = [0.3, -0.2, 0.8];
        let mut p = vec![0.0; 3];
        for _ in 0..2000 {
            let g: Vec<f64> = p.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            opt.step(&mut p, &g, 0.01);
        }
        for (a, b) in p.iter().zip(&target) {
            assert!((a - b).abs() < 1e-3);
        }
    }
}
