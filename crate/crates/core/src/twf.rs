//! Thresholded Wirtinger flow on the empirical variance loss
//!
//! ```text
//! ℓₙ(β) = n⁻¹ Σ [y⁽ⁱ⁾ − (x⁽ⁱ⁾ᵀβ)² − ξₙ(β)]²,   ξₙ(β) = μₙ − ‖β‖²
//! β⁽ᵏ⁺¹⁾ = T_{η·τ(β⁽ᵏ⁾)}[β⁽ᵏ⁾ − η ∇ℓₙ(β⁽ᵏ⁾)]
//! ```
//!
//! When the initializer reports `ρₙ < 0` every response is negated before the
//! loop starts, and `μₙ` is the mean of the negated responses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{initialize, InitConfig, InitOutput};
use crate::linalg::{all_finite, axpy, dot, norm, normalized, Mat, RngStream};
use crate::metrics::{cosine_error, dist, support_contained, support_size};
use crate::model::{Dataset, GroundTruth};

/// Threshold constant used by the convergence theory, as opposed to the
/// experimental default of 15.
pub const THEORY_KAPPA: f64 = 8.944_271_909_999_16; // √80

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwfConfig {
    pub kappa: f64,
    /// Step size.
    pub eta: f64,
    /// Stop once `‖β⁽ᵗ⁾ − β⁽ᵗ⁻¹⁾‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub record_trace: bool,
    /// When false the loop always runs `max_iter` steps.
    pub early_stop: bool,
}

impl Default for TwfConfig {
    fn default() -> Self {
        Self {
            kappa: 15.0,
            eta: 0.005,
            tol: 1e-4,
            max_iter: 1000,
            record_trace: false,
            early_stop: true,
        }
    }
}

impl TwfConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("eta", self.eta), ("tol", self.tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be positive and finite")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwfState {
    pub beta: Vec<f64>,
    pub iteration: usize,
    /// Mean of the (possibly negated) responses.
    pub mu_n: f64,
    /// `+1.0` or `−1.0`.
    pub y_sign: f64,
}

impl TwfState {
    pub fn new(data: &Dataset, beta: Vec<f64>, y_sign: f64) -> Self {
        Self {
            beta,
            iteration: 0,
            mu_n: y_sign * data.mean_response(),
            y_sign,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// `dist(β/‖β‖, β*)` when the truth is known.
    pub dist: Option<f64>,
    /// `1 − |⟨β, β*⟩|/‖β‖` when the truth is known.
    pub cosine_error: Option<f64>,
    pub step_norm: f64,
    pub support_size: usize,
    pub support_contained: Option<bool>,
    /// `τ(β⁽ᵗ⁻¹⁾)` used to produce this iterate; `None` for the initializer.
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwfTrace {
    pub entries: Vec<TraceEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    /// Unit norm.
    pub beta_hat: Vec<f64>,
    /// Last iterate before normalisation.
    pub beta_final: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Option<TwfTrace>,
    pub init: InitOutput,
}

/// Per-sample quantities shared by the loss, gradient and threshold.
struct Residuals {
    /// `x⁽ⁱ⁾ᵀβ`
    proj: Vec<f64>,
    /// `sign·y⁽ⁱ⁾ − (x⁽ⁱ⁾ᵀβ)² − ξₙ(β)`
    resid: Vec<f64>,
}

fn check_dims(data: &Dataset, beta: &[f64]) -> Result<()> {
    if beta.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: beta.len(),
        });
    }
    Ok(())
}

fn residuals(x: &Mat, y: &[f64], sign: f64, beta: &[f64], mu_n: f64) -> Residuals {
    let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    let xi = xi_n(mu_n, beta);
    let mut proj = Vec::with_capacity(y.len());
    let mut resid = Vec::with_capacity(y.len());
    for (i, &yi) in y.iter().enumerate() {
        let row = x.row(i);
        let t: f64 = if support.len() * 4 < beta.len() {
            support.iter().map(|&j| row[j] * beta[j]).sum()
        } else {
            dot(row, beta)
        };
        proj.push(t);
        resid.push(sign * yi - t * t - xi);
    }
    Residuals { proj, resid }
}

fn gradient_from(x: &Mat, beta: &[f64], r: &Residuals) -> Vec<f64> {
    // (I − x xᵀ)β = β − x (xᵀβ)
    let n = r.resid.len() as f64;
    let total: f64 = r.resid.iter().sum();
    let mut g = vec![0.0; beta.len()];
    for (i, (&ri, &ti)) in r.resid.iter().zip(&r.proj).enumerate() {
        let c = ri * ti;
        if c != 0.0 {
            axpy(-c, x.row(i), &mut g);
        }
    }
    axpy(total, beta, &mut g);
    g.iter_mut().for_each(|v| *v *= 4.0 / n);
    g
}

fn threshold_from(n: usize, p: usize, kappa: f64, r: &Residuals) -> f64 {
    let sum: f64 = r
        .resid
        .iter()
        .zip(&r.proj)
        .map(|(ri, ti)| ri * ri * ti * ti)
        .sum();
    let nf = n as f64;
    kappa * (((nf * p as f64).ln() / (nf * nf)) * sum).sqrt()
}

/// `μₙ − ‖β‖²`
pub fn xi_n(mu_n: f64, beta: &[f64]) -> f64 {
    mu_n - dot(beta, beta)
}

/// Empirical variance loss.
pub fn loss(data: &Dataset, beta: &[f64], mu_n: f64) -> Result<f64> {
    check_dims(data, beta)?;
    let r = residuals(&data.x, &data.y, 1.0, beta, mu_n);
    Ok(r.resid.iter().map(|v| v * v).sum::<f64>() / data.n() as f64)
}

/// `(4/n) Σ rᵢ (I − x⁽ⁱ⁾x⁽ⁱ⁾ᵀ)β`, accumulated without forming `p × p` matrices.
pub fn gradient(data: &Dataset, beta: &[f64], mu_n: f64) -> Result<Vec<f64>> {
    check_dims(data, beta)?;
    let r = residuals(&data.x, &data.y, 1.0, beta, mu_n);
    Ok(gradient_from(&data.x, beta, &r))
}

/// Adaptive threshold `τ(β)`.
pub fn threshold_value(data: &Dataset, beta: &[f64], mu_n: f64, kappa: f64) -> Result<f64> {
    check_dims(data, beta)?;
    let r = residuals(&data.x, &data.y, 1.0, beta, mu_n);
    Ok(threshold_from(data.n(), data.p(), kappa, &r))
}

/// Keeps `w_j` when `|w_j| ≥ τ`, zero otherwise.
pub fn hard_threshold(w: &[f64], tau: f64) -> Vec<f64> {
    w.iter().map(|&v| if v.abs() >= tau { v } else { 0.0 }).collect()
}

/// Result of one update, with the threshold that was applied.
struct StepOutcome {
    state: TwfState,
    tau: f64,
}

fn step_inner(data: &Dataset, state: &TwfState, cfg: &TwfConfig) -> Result<StepOutcome> {
    check_dims(data, &state.beta)?;
    let next_iter = state.iteration + 1;
    let r = residuals(&data.x, &data.y, state.y_sign, &state.beta, state.mu_n);
    let grad = gradient_from(&data.x, &state.beta, &r);
    let tau = threshold_from(data.n(), data.p(), cfg.kappa, &r);
    let mut w = state.beta.clone();
    axpy(-cfg.eta, &grad, &mut w);
    if !all_finite(&w) || !tau.is_finite() {
        return Err(Error::NumericOverflow { iteration: next_iter });
    }
    Ok(StepOutcome {
        state: TwfState {
            beta: hard_threshold(&w, cfg.eta * tau),
            iteration: next_iter,
            mu_n: state.mu_n,
            y_sign: state.y_sign,
        },
        tau,
    })
}

/// One thresholded gradient step.
pub fn step(data: &Dataset, state: &TwfState, cfg: &TwfConfig) -> Result<TwfState> {
    if !all_finite(&state.beta) {
        return Err(Error::NumericOverflow {
            iteration: state.iteration,
        });
    }
    step_inner(data, state, cfg).map(|o| o.state)
}

fn trace_entry(
    beta: &[f64],
    iteration: usize,
    step_norm: f64,
    threshold: Option<f64>,
    truth: Option<&GroundTruth>,
) -> TraceEntry {
    let (d, ce, contained) = match truth {
        Some(t) => {
            let ce = cosine_error(beta, &t.beta_star).ok();
            let d = normalized(beta).and_then(|u| dist(&u, &t.beta_star).ok());
            (d, ce, Some(support_contained(beta, &t.support)))
        }
        None => (None, None, None),
    };
    TraceEntry {
        iteration,
        dist: d,
        cosine_error: ce,
        step_norm,
        support_size: support_size(beta),
        support_contained: contained,
        threshold,
    }
}

/// Runs the loop from `init.beta0`.
pub fn run(
    data: &Dataset,
    init: &InitOutput,
    cfg: &TwfConfig,
    truth: Option<&GroundTruth>,
) -> Result<EstimationResult> {
    cfg.validate()?;
    check_dims(data, &init.beta0)?;
    if init.rho_n == 0.0 {
        return Err(Error::DegenerateSignal);
    }
    let y_sign = init.rho_n.signum();
    let mut state = TwfState::new(data, init.beta0.clone(), y_sign);
    let mut trace = cfg.record_trace.then(|| TwfTrace {
        entries: vec![trace_entry(&state.beta, 0, 0.0, None, truth)],
    });

    let mut converged = false;
    while state.iteration < cfg.max_iter {
        let StepOutcome { state: next, tau } = step_inner(data, &state, cfg)?;
        let step_norm = norm(&crate::linalg::sub(&next.beta, &state.beta));
        if next.beta.iter().all(|v| *v == 0.0) {
            return Err(Error::DegenerateIterate {
                iteration: next.iteration,
            });
        }
        if let Some(t) = trace.as_mut() {
            t.entries
                .push(trace_entry(&next.beta, next.iteration, step_norm, Some(tau), truth));
        }
        state = next;
        if cfg.early_stop && step_norm <= cfg.tol {
            converged = true;
            break;
        }
    }

    let beta_hat = normalized(&state.beta).ok_or(Error::DegenerateIterate {
        iteration: state.iteration,
    })?;
    Ok(EstimationResult {
        beta_hat,
        beta_final: state.beta,
        iterations: state.iteration,
        converged,
        trace,
        init: init.clone(),
    })
}

/// Initialization followed by the thresholded flow.
pub fn estimate(
    data: &Dataset,
    init_cfg: &InitConfig,
    twf_cfg: &TwfConfig,
    truth: Option<&GroundTruth>,
    rng: &mut RngStream,
) -> Result<EstimationResult> {
    let init = initialize(data, init_cfg, rng).map_err(|e| e.context("initialization"))?;
    run(data, &init, twf_cfg, truth)
}
