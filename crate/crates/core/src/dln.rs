//! Two-layer diagonal linear network `β = u⊙u − v⊙v` trained by full-batch gradient descent.
//!
//! With `u(0) = v(0) = α·1` the gradient flow of
//! `L(u,v) = (1/2n)‖X(u⊙u − v⊙v) − Y‖²` converges to the interpolant that
//! minimizes the hypentropy potential `Q_α` (see [`crate::calib`]).

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{as_slice, dot, row_major};
use crate::model::rng::{rng_from_seed, standard_normal, Rng};

/// Gaussian perturbation of the parameter gradients, off by default.
///
/// Each step adds `scale·√L·ξ` to `∂L/∂u` and `∂L/∂v` with independent
/// standard normal `ξ` per coordinate, where `L` is the current mean squared
/// training loss. The injected variance per unit of training time grows with
/// the learning rate and vanishes at interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradNoise {
    pub scale: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DlnConfig {
    pub alpha: f64,
    pub lr: f64,
    pub max_epochs: u64,
    /// Stop once the mean squared training loss falls to this level.
    pub loss_tol: f64,
    /// Declare divergence when the loss exceeds this multiple of its initial value.
    pub divergence_factor: f64,
    pub grad_noise: Option<GradNoise>,
}

impl Default for DlnConfig {
    fn default() -> Self {
        Self { alpha: 0.00102, lr: 1e-3, max_epochs: 2_000_000, loss_tol: 1e-10, divergence_factor: 1e6, grad_noise: None }
    }
}

impl DlnConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("alpha", self.alpha), ("lr", self.lr), ("loss_tol", self.loss_tol), ("divergence_factor", self.divergence_factor)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::SpecInvalid(format!("{name} = {v} must be positive")));
            }
        }
        if self.max_epochs == 0 {
            return Err(Error::SpecInvalid("max_epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlnState {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub epoch: u64,
}

impl DlnState {
    pub fn beta(&self) -> Array1<f64> {
        &self.u * &self.u - &self.v * &self.v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainStatus {
    Interpolated,
    MaxEpochs,
    Diverged,
}

impl TrainStatus {
    pub fn label(&self) -> &'static str {
        match self {
            TrainStatus::Interpolated => "interpolated",
            TrainStatus::MaxEpochs => "max_epochs",
            TrainStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub beta: Array1<f64>,
    pub epochs_run: u64,
    pub final_loss: f64,
    pub status: TrainStatus,
}

pub fn dln_init(d: usize, alpha: f64) -> Result<DlnState> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::DomainError(format!("alpha = {alpha} must be positive")));
    }
    Ok(DlnState { u: Array1::from_elem(d, alpha), v: Array1::from_elem(d, alpha), epoch: 0 })
}

/// Writes `g = (1/n)Xᵀ(Xβ − Y)` into `g` and returns the loss `‖Xβ − Y‖²/n`.
/// Rows are taken in pairs: both residuals first, then one sweep over `g`.
#[inline(always)]
fn loss_and_grad_impl(x: &[f64], n: usize, d: usize, y: &[f64], beta: &[f64], g: &mut [f64]) -> f64 {
    g.iter_mut().for_each(|v| *v = 0.0);
    let mut sse = 0.0;
    let inv_n = 1.0 / n as f64;
    let mut i = 0;
    while i + 1 < n {
        let (r0, r1) = (&x[i * d..(i + 1) * d], &x[(i + 1) * d..(i + 2) * d]);
        let e0 = dot(r0, beta) - y[i];
        let e1 = dot(r1, beta) - y[i + 1];
        sse += e0 * e0 + e1 * e1;
        let (c0, c1) = (e0 * inv_n, e1 * inv_n);
        for ((gj, &a), &b) in g.iter_mut().zip(r0).zip(r1) {
            *gj += c0 * a + c1 * b;
        }
        i += 2;
    }
    if i < n {
        let row = &x[i * d..(i + 1) * d];
        let e = dot(row, beta) - y[i];
        sse += e * e;
        let c = e * inv_n;
        for (gj, &a) in g.iter_mut().zip(row) {
            *gj += c * a;
        }
    }
    sse * inv_n
}

/// Same arithmetic as the portable path (no fused multiply-add), so results are bit-identical.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn loss_and_grad_avx2(x: &[f64], n: usize, d: usize, y: &[f64], beta: &[f64], g: &mut [f64]) -> f64 {
    loss_and_grad_impl(x, n, d, y, beta, g)
}

fn loss_and_grad(x: &[f64], n: usize, d: usize, y: &[f64], beta: &[f64], g: &mut [f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the required CPU feature was detected at runtime.
        return unsafe { loss_and_grad_avx2(x, n, d, y, beta, g) };
    }
    loss_and_grad_impl(x, n, d, y, beta, g)
}

struct Workspace {
    beta: Vec<f64>,
    g: Vec<f64>,
}

fn refresh_beta(state: &DlnState, beta: &mut [f64]) {
    for ((b, &u), &v) in beta.iter_mut().zip(state.u.iter()).zip(state.v.iter()) {
        *b = u * u - v * v;
    }
}

fn apply_update(state: &mut DlnState, g: &[f64], lr: f64, noise: Option<(&mut Rng, f64)>) -> Result<()> {
    match noise {
        None => {
            for ((u, v), &gj) in state.u.iter_mut().zip(state.v.iter_mut()).zip(g) {
                *u -= lr * 2.0 * gj * *u;
                *v += lr * 2.0 * gj * *v;
            }
        }
        Some((rng, amp)) => {
            for ((u, v), &gj) in state.u.iter_mut().zip(state.v.iter_mut()).zip(g) {
                let (nu, nv) = (amp * standard_normal(rng), amp * standard_normal(rng));
                *u -= lr * (2.0 * gj * *u + nu);
                *v += lr * (2.0 * gj * *v - nv);
            }
        }
    }
    state.epoch += 1;
    if state.u.iter().chain(state.v.iter()).all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("DLN parameters at epoch {}", state.epoch)))
    }
}

/// One full-batch gradient step on `L(u,v) = (1/2n)‖X(u⊙u − v⊙v) − Y‖²`.
pub fn dln_step(state: &mut DlnState, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, lr: f64) -> Result<()> {
    let (n, d) = x.dim();
    check_len(n, y.len())?;
    check_len(d, state.u.len())?;
    let xs = row_major(&x);
    let mut beta = vec![0.0; d];
    refresh_beta(state, &mut beta);
    let mut g = vec![0.0; d];
    loss_and_grad(&xs, n, d, &as_slice(&y), &beta, &mut g);
    apply_update(state, &g, lr, None)
}

pub fn dln_train(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, cfg: &DlnConfig) -> Result<TrainReport> {
    dln_train_observed(x, y, cfg, |_, _| {})
}

/// [`dln_train`] calling `observe(epoch, loss)` with the loss before every step.
pub fn dln_train_observed(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, cfg: &DlnConfig, mut observe: impl FnMut(u64, f64)) -> Result<TrainReport> {
    cfg.validate()?;
    let (n, d) = x.dim();
    check_len(n, y.len())?;
    let xs = row_major(&x);
    let ys = as_slice(&y);
    let mut state = dln_init(d, cfg.alpha)?;
    let mut ws = Workspace { beta: vec![0.0; d], g: vec![0.0; d] };
    let mut rng = cfg.grad_noise.map(|gn| rng_from_seed(gn.seed));
    let mut loss0 = None;

    let status = loop {
        refresh_beta(&state, &mut ws.beta);
        let loss = loss_and_grad(&xs, n, d, &ys, &ws.beta, &mut ws.g);
        observe(state.epoch, loss);
        let l0 = *loss0.get_or_insert(loss);
        if !loss.is_finite() || loss > cfg.divergence_factor * l0.max(f64::MIN_POSITIVE) {
            break (TrainStatus::Diverged, loss);
        }
        if loss <= cfg.loss_tol {
            break (TrainStatus::Interpolated, loss);
        }
        if state.epoch >= cfg.max_epochs {
            break (TrainStatus::MaxEpochs, loss);
        }
        let noise = match (&mut rng, cfg.grad_noise) {
            (Some(r), Some(gn)) => Some((r, gn.scale * loss.sqrt())),
            _ => None,
        };
        if apply_update(&mut state, &ws.g, cfg.lr, noise).is_err() {
            break (TrainStatus::Diverged, f64::INFINITY);
        }
    };
    Ok(TrainReport { beta: Array1::from_vec(ws.beta), epochs_run: state.epoch, final_loss: status.1, status: status.0 })
}
