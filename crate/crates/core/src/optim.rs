//! AdamW with decoupled weight decay and a warmup + cosine learning-rate schedule.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::encoder::{ParamGrads, SharedEncoderParams};
use crate::error::{Error, Result};
use crate::math;

/// Hyper-parameters of the update rule.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamWConfig {
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            weight_decay: 0.1,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
        }
    }
}

/// Linear warmup from 0 to `base_lr` over `warmup_steps`, then cosine decay
/// to 0 at `total_steps`.
pub fn lr_at(step: u64, total_steps: u64, warmup_steps: u64, base_lr: f64) -> f64 {
    let step = step.min(total_steps);
    if step < warmup_steps {
        return base_lr * step as f64 / warmup_steps as f64;
    }
    let decay = total_steps.saturating_sub(warmup_steps);
    if decay == 0 {
        return base_lr;
    }
    let progress = (step - warmup_steps) as f64 / decay as f64;
    0.5 * base_lr * (1.0 + math::cos(PI * progress))
}

/// First and second moment estimates, one buffer per tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &SharedEncoderParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.infos().iter().map(|i| vec![0.0; i.len()]).collect();
        Self {
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    fn shapes_match(&self, params: &SharedEncoderParams) -> bool {
        let ok = |m: &Vec<Vec<f64>>| {
            m.len() == params.num_tensors() && m.iter().enumerate().all(|(i, v)| v.len() == params.tensor(i).len())
        };
        ok(&self.first) && ok(&self.second)
    }
}

/// One AdamW update. Tensors flagged without decay (gains, biases, the
/// temperature) skip the `param ← param − lr·wd·param` shrink.
pub fn optimizer_step(
    params: &mut SharedEncoderParams,
    grads: &ParamGrads,
    state: &mut OptimizerState,
    lr: f64,
    cfg: &AdamWConfig,
) -> Result<()> {
    if !grads.shapes_match(params) || !state.shapes_match(params) {
        return Err(Error::ShapeMismatch(format!(
            "gradients/optimizer state do not match {} parameter tensors",
            params.num_tensors()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - math::powi(cfg.beta1, t);
    let bc2 = 1.0 - math::powi(cfg.beta2, t);
    for (id, (info, values)) in params.iter_mut().enumerate() {
        let g = grads.tensor(id);
        let m = &mut state.first[id];
        let v = &mut state.second[id];
        let shrink = if info.decay { 1.0 - lr * cfg.weight_decay } else { 1.0 };
        for k in 0..values.len() {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            let mhat = m[k] / bc1;
            let vhat = v[k] / bc2;
            values[k] = values[k] * shrink - lr * mhat / (math::sqrt(vhat) + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{init_params, Sharing, SharedEncoderConfig};

    fn params() -> SharedEncoderParams {
        init_params(&SharedEncoderConfig::toy(Sharing::Shared), 3).unwrap()
    }

    #[test]
    fn schedule_anchors() {
        let (total, warm, lr) = (1000, 50, 1e-3);
        assert_eq!(lr_at(0, total, warm, lr), 0.0);
        assert!((lr_at(warm, total, warm, lr) - lr).abs() < 1e-15);
        assert!(lr_at(total, total, warm, lr).abs() < 1e-12);
        assert!((lr_at(25, total, warm, lr) - lr / 2.0).abs() < 1e-15);
        // Continuity at the junction.
        let before = lr_at(warm - 1, total, warm, lr) + lr / warm as f64;
        assert!((before - lr_at(warm, total, warm, lr)).abs() < 1e-12);
        assert_eq!(lr_at(5, 10, 0, 1.0), 0.5);
    }

    #[test]
    fn schedule_is_monotone_after_warmup() {
        let mut prev = f64::INFINITY;
        for s in 50..=1000 {
            let v = lr_at(s, 1000, 50, 1e-3);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn zero_grads_without_decay_leave_params_unchanged() {
        let mut p = params();
        let before = p.clone();
        let g = p.zeros_like();
        let mut st = OptimizerState::new(&p);
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        };
        optimizer_step(&mut p, &g, &mut st, 1e-3, &cfg).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn decay_shrinks_only_flagged_tensors() {
        let mut p = params();
        let before = p.clone();
        let g = p.zeros_like();
        let mut st = OptimizerState::new(&p);
        let (lr, wd) = (1e-2, 0.1);
        let cfg = AdamWConfig {
            weight_decay: wd,
            ..AdamWConfig::default()
        };
        optimizer_step(&mut p, &g, &mut st, lr, &cfg).unwrap();
        for (id, info) in p.infos().iter().enumerate() {
            for (a, b) in p.tensor(id).iter().zip(before.tensor(id)) {
                let want = if info.decay { b * (1.0 - lr * wd) } else { *b };
                assert!((a - want).abs() < 1e-18, "{}", info.name);
            }
        }
    }

    #[test]
    fn first_step_matches_closed_form() {
        // After one step m̂ = g and v̂ = g², so Δ = −lr·g/(|g| + eps).
        let mut p = params();
        let id = p.logit_scale_id();
        let t0 = p.tensor(id)[0];
        let mut g = p.zeros_like();
        let grad = 0.37;
        g.tensor_mut(id)[0] = grad;
        let mut st = OptimizerState::new(&p);
        let cfg = AdamWConfig::default();
        let lr = 1e-3;
        optimizer_step(&mut p, &g, &mut st, lr, &cfg).unwrap();
        let want = t0 - lr * grad / (grad.abs() + cfg.eps);
        assert!((p.tensor(id)[0] - want).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = params();
        let other = init_params(&SharedEncoderConfig::toy(Sharing::Unshared), 3).unwrap();
        let g = other.zeros_like();
        let mut st = OptimizerState::new(&p);
        assert!(matches!(
            optimizer_step(&mut p, &g, &mut st, 1e-3, &AdamWConfig::default()),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
