//! Leaky integrate-and-fire dynamics and the ATan surrogate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SpikeError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    /// Membrane time constant in steps.
    pub tau_m: f64,
    pub v_th: f64,
    pub v_reset: f64,
    /// Membrane resistance.
    pub r: f64,
}

impl LifParams {
    pub fn new(tau_m: f64, v_th: f64, v_reset: f64, r: f64) -> Result<Self, SpikeError> {
        if !(tau_m >= 1.0) || !tau_m.is_finite() {
            return Err(SpikeError::InvalidParams(format!("tau_m must be >= 1, got {tau_m}")));
        }
        if !(v_th > v_reset) || !v_th.is_finite() || !v_reset.is_finite() || !r.is_finite() {
            return Err(SpikeError::InvalidParams(format!(
                "v_th ({v_th}) must exceed v_reset ({v_reset})"
            )));
        }
        Ok(Self { tau_m, v_th, v_reset, r })
    }

    /// τ_m = 2.0 and V_th = 0.5, with V_reset = 0 and R = 1.
    pub fn encoder_default() -> Self {
        Self { tau_m: 2.0, v_th: 0.5, v_reset: 0.0, r: 1.0 }
    }

    /// τ_m = 2.0 and V_th = 0.6 for the recurrent layer.
    pub fn recurrent_default() -> Self {
        Self { tau_m: 2.0, v_th: 0.6, v_reset: 0.0, r: 1.0 }
    }

    /// Pre-reset membrane potential after one Euler step with Δt = 1.
    #[inline]
    pub fn integrate(&self, v: f64, current: f64) -> f64 {
        v + (-(v - self.v_reset) + self.r * current) / self.tau_m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifState {
    pub v: Vec<f64>,
    pub spiked: Vec<u8>,
}

impl LifState {
    pub fn new(n: usize, p: &LifParams) -> Self {
        Self { v: vec![p.v_reset; n], spiked: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// One explicit-Euler step. Neurons reaching `v_th` spike and reset.
pub fn lif_step(state: &LifState, input: &[f64], p: &LifParams) -> Result<(LifState, Vec<u8>), SpikeError> {
    if input.len() != state.v.len() {
        return Err(SpikeError::DimensionMismatch { expected: state.v.len(), got: input.len() });
    }
    let mut v = Vec::with_capacity(input.len());
    let mut spikes = Vec::with_capacity(input.len());
    for (&v0, &i) in state.v.iter().zip(input) {
        let u = p.integrate(v0, i);
        if u >= p.v_th {
            spikes.push(1);
            v.push(p.v_reset);
        } else {
            spikes.push(0);
            v.push(u);
        }
    }
    Ok((LifState { v, spiked: spikes.clone() }, spikes))
}

/// ATan surrogate derivative: `(α/2) / (1 + (π α u / 2)²)`.
pub fn atan_surrogate_grad(u: f64, alpha: f64) -> f64 {
    let x = PI * alpha * u / 2.0;
    (alpha / 2.0) / (1.0 + x * x)
}

/// Smooth ATan primitive whose derivative is [`atan_surrogate_grad`].
pub fn atan_smooth(u: f64, alpha: f64) -> f64 {
    (PI * alpha * u / 2.0).atan() / PI + 0.5
}

/// Spike nonlinearity used in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpikeFn {
    /// Hard threshold forward, ATan surrogate backward.
    Heaviside { alpha: f64 },
    /// ATan primitive in both directions; exact gradients for checking.
    Smooth { alpha: f64 },
}

impl SpikeFn {
    #[inline]
    pub fn forward(self, u: f64) -> f64 {
        match self {
            SpikeFn::Heaviside { .. } => {
                if u >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeFn::Smooth { alpha } => atan_smooth(u, alpha),
        }
    }

    #[inline]
    pub fn grad(self, u: f64) -> f64 {
        match self {
            SpikeFn::Heaviside { alpha } | SpikeFn::Smooth { alpha } => atan_surrogate_grad(u, alpha),
        }
    }

    pub fn smoothed(self) -> Self {
        match self {
            SpikeFn::Heaviside { alpha } | SpikeFn::Smooth { alpha } => SpikeFn::Smooth { alpha },
        }
    }
}

/// Cached values of one differentiable LIF step over a layer.
#[derive(Debug, Clone, Default)]
pub struct LifTrace {
    pub v_prev: Vec<f64>,
    /// Pre-reset potential.
    pub u: Vec<f64>,
    pub s: Vec<f64>,
}

/// Differentiable layer step: `u = integrate(v, I)`, `s = S(u - v_th)`,
/// `v' = u (1 - s) + v_reset s`. Writes the new potentials into `v`.
pub fn lif_forward(v: &mut [f64], current: &[f64], p: &LifParams, f: SpikeFn) -> LifTrace {
    let mut trace = LifTrace { v_prev: v.to_vec(), u: Vec::with_capacity(v.len()), s: Vec::with_capacity(v.len()) };
    for (vi, &i) in v.iter_mut().zip(current) {
        let u = p.integrate(*vi, i);
        let s = f.forward(u - p.v_th);
        *vi = u * (1.0 - s) + p.v_reset * s;
        trace.u.push(u);
        trace.s.push(s);
    }
    trace
}

/// Backward of [`lif_forward`]. `dv_next` is the adjoint of the new
/// potential and is replaced by the adjoint of the previous one; `ds` is
/// the adjoint of the spikes from downstream. Returns the adjoint of the
/// input current.
pub fn lif_backward(trace: &LifTrace, dv_next: &mut [f64], ds: &[f64], p: &LifParams, f: SpikeFn) -> Vec<f64> {
    let leak = 1.0 - 1.0 / p.tau_m;
    let gain = p.r / p.tau_m;
    let mut dcur = Vec::with_capacity(ds.len());
    for k in 0..ds.len() {
        let (u, s) = (trace.u[k], trace.s[k]);
        let dvn = dv_next[k];
        let ds_total = ds[k] + dvn * (p.v_reset - u);
        let du = dvn * (1.0 - s) + ds_total * f.grad(u - p.v_th);
        dv_next[k] = du * leak;
        dcur.push(du * gain);
    }
    dcur
}
