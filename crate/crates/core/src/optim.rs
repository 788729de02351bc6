//! Adam and plain SGD over named parameter sets.

use crate::error::{Error, Result};
use crate::model::ParameterSet;
use crate::scalar::Scalar;

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// First and second moment estimates, mirroring the parameters.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: ParameterSet<T>,
    pub v: ParameterSet<T>,
    pub t: u64,
}

pub fn adam_init<T: Scalar>(params: &ParameterSet<T>, config: AdamConfig) -> Result<AdamState<T>> {
    config.validate()?;
    Ok(AdamState {
        config,
        m: params.zeros_like(),
        v: params.zeros_like(),
        t: 0,
    })
}

fn check_update<T: Scalar>(params: &ParameterSet<T>, grads: &ParameterSet<T>) -> Result<()> {
    if !params.congruent(grads) {
        return Err(Error::Update(
            "gradient names or shapes do not match the parameters".into(),
        ));
    }
    if let Some((name, _)) = grads.iter().find(|(_, g)| !g.all_finite()) {
        return Err(Error::Update(format!("non-finite gradient in {name}")));
    }
    Ok(())
}

/// One bias-corrected Adam step. On error neither the state nor the
/// parameters are modified.
pub fn adam_step<T: Scalar>(
    state: &mut AdamState<T>,
    params: &mut ParameterSet<T>,
    grads: &ParameterSet<T>,
) -> Result<()> {
    check_update(params, grads)?;
    if !params.congruent(&state.m) {
        return Err(Error::Update(
            "optimizer state does not match the parameters".into(),
        ));
    }
    let t = state.t + 1;
    let cfg = state.config;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - cfg.beta1), T::lit(1.0 - cfg.beta2));
    let t_exp = i32::try_from(t).unwrap_or(i32::MAX);
    let corr1 = T::lit(1.0 - cfg.beta1.powi(t_exp));
    let corr2 = T::lit(1.0 - cfg.beta2.powi(t_exp));
    let (lr, eps) = (T::lit(cfg.lr), T::lit(cfg.eps));

    let layers = params
        .iter_mut()
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
        .zip(grads.iter());
    for ((((_, p), (_, m)), (_, v)), (_, g)) in layers {
        let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
        for i in 0..p.len() {
            let gi = g.data()[i];
            m[i] = b1 * m[i] + one_b1 * gi;
            v[i] = b2 * v[i] + one_b2 * gi * gi;
            let m_hat = m[i] / corr1;
            let v_hat = v[i] / corr2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    state.t = t;
    Ok(())
}

/// `θ ← θ − lr·g`
pub fn sgd_step<T: Scalar>(params: &mut ParameterSet<T>, grads: &ParameterSet<T>, lr: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    check_update(params, grads)?;
    let lr = T::lit(lr);
    for ((_, p), (_, g)) in params.iter_mut().zip(grads.iter()) {
        for (pi, &gi) in p.data_mut().iter_mut().zip(g.data()) {
            *pi -= lr * gi;
        }
    }
    Ok(())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(grads: &mut ParameterSet<T>, max_norm: f64) -> f64 {
    let norm = grads.squared_norm().as_f64().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = T::lit(max_norm / norm);
        for (_, g) in grads.iter_mut() {
            g.scale(s);
        }
    }
    norm
}
