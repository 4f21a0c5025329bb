//! Recovery of the monochromatic pattern `x` from a broadband measurement
//! `b` by minimizing `ε(x) = ‖b - Σ a_i A_i(x)‖²`.
//!
//! Two update rules are provided. The plain rule is `x ← x - α ∇ε`. The
//! momentum rule keeps a velocity:
//!
//! ```text
//! v ← (v - ∇ε) (1 - f dt)
//! x ← x + v dt
//! ```
//!
//! Iteration starts from `x_0 = b`, `v_0 = 0`. With projection enabled the
//! iterate is clipped to be non-negative after every update; the velocity
//! is left alone.

use std::io::Write;
use std::sync::mpsc::SyncSender;

use crate::error::{param_err, Error, Result};
use crate::grid::RealGrid;
use crate::spectrum::{apply_poly, apply_poly_adjoint, apply_poly_adjoint_scaled, AdjointScaling, BoundSpectrum};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    Plain,
    #[default]
    Momentum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Plain-mode step size.
    pub step_size: f64,
    /// Momentum-mode time step.
    pub dt: f64,
    /// Momentum-mode friction.
    pub friction: f64,
    pub max_iter: usize,
    /// Stop once `sqrt(ε) / ‖b‖` falls to this value. Zero disables the check.
    pub residual_tol: f64,
    pub project: bool,
    pub mode: Mode,
    /// Per-channel weighting of the back-projection used for the update.
    pub scaling: AdjointScaling,
    /// Abort when `ε_n > divergence_factor * ε_0`.
    pub divergence_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            dt: 1.0,
            friction: 0.2,
            max_iter: 500,
            residual_tol: 0.0,
            project: true,
            mode: Mode::Momentum,
            scaling: AdjointScaling::ChannelNormalized,
            divergence_factor: 1e6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return param_err(format!("step size must be positive, got {}", self.step_size));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return param_err(format!("dt must be positive, got {}", self.dt));
        }
        let damping = self.friction * self.dt;
        if !(0.0..1.0).contains(&damping) {
            return param_err(format!("friction * dt must be in [0, 1), got {damping}"));
        }
        if self.max_iter == 0 {
            return param_err("max_iter must be at least 1");
        }
        if !(self.residual_tol >= 0.0) {
            return param_err(format!("residual tolerance must be >= 0, got {}", self.residual_tol));
        }
        if !(self.divergence_factor > 1.0) {
            return param_err("divergence factor must exceed 1");
        }
        Ok(())
    }
}

/// Iterate, velocity and residual history of a running solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    x: RealGrid,
    v: RealGrid,
    iteration: usize,
    trace: Vec<f64>,
}

impl SolverState {
    pub fn new(x0: RealGrid) -> Self {
        let v = x0.map(|_| 0.0);
        Self {
            x: x0,
            v,
            iteration: 0,
            trace: Vec::new(),
        }
    }

    pub fn x(&self) -> &RealGrid {
        &self.x
    }

    pub fn v(&self) -> &RealGrid {
        &self.v
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// `ε_n` of every completed iteration, evaluated at the iterate the
    /// step started from.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn into_parts(self) -> (RealGrid, Vec<f64>) {
        (self.x, self.trace)
    }
}

/// `Δb = b - Σ a_i A_i(x)` and `ε = ‖Δb‖²`.
pub fn residual(x: &RealGrid, b: &RealGrid, spec: &BoundSpectrum) -> Result<(f64, RealGrid)> {
    x.same_shape(b, "residual")?;
    let delta = b.sub(&apply_poly(x, spec)?)?;
    Ok((delta.norm_sqr(), delta))
}

/// `∇ε = -2 Σ a_i A_iᵀ(Δb)`.
pub fn gradient(delta: &RealGrid, spec: &BoundSpectrum) -> Result<RealGrid> {
    Ok(apply_poly_adjoint(delta, spec)?.scaled(-2.0))
}

/// Update direction used by [`solve`]; equals [`gradient`] for
/// [`AdjointScaling::Exact`].
pub fn descent_gradient(delta: &RealGrid, spec: &BoundSpectrum, scaling: AdjointScaling) -> Result<RealGrid> {
    Ok(apply_poly_adjoint_scaled(delta, spec, scaling)?.scaled(-2.0))
}

/// Clips every pixel at zero.
pub fn project_nonneg(x: &RealGrid) -> RealGrid {
    x.map(|&v| v.max(0.0))
}

fn project_in_place(x: &mut RealGrid) {
    x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
}

/// `x ← x - α ∇ε`; `epsilon` is recorded as this iteration's residual.
pub fn step_plain(state: &mut SolverState, grad: &RealGrid, epsilon: f64, alpha: f64, project: bool) -> Result<()> {
    state.x.axpy(-alpha, grad)?;
    if project {
        project_in_place(&mut state.x);
    }
    state.trace.push(epsilon);
    state.iteration += 1;
    Ok(())
}

/// `v ← (v - ∇ε)(1 - f dt)`, `x ← x + v dt`.
pub fn step_momentum(
    state: &mut SolverState,
    grad: &RealGrid,
    epsilon: f64,
    dt: f64,
    friction: f64,
    project: bool,
) -> Result<()> {
    state.v.same_shape(grad, "step_momentum")?;
    let damping = 1.0 - friction * dt;
    for ((v, x), g) in state
        .v
        .data_mut()
        .iter_mut()
        .zip(state.x.data_mut().iter_mut())
        .zip(grad.data())
    {
        *v = (*v - g) * damping;
        *x += *v * dt;
    }
    if project {
        project_in_place(&mut state.x);
    }
    state.trace.push(epsilon);
    state.iteration += 1;
    Ok(())
}

/// Snapshot sent to an observer after each iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: RealGrid,
    /// `ε_n` for each completed iteration.
    pub trace: Vec<f64>,
    /// `ε` at the returned `x`.
    pub final_epsilon: f64,
    /// Whether the residual tolerance stopped the run.
    pub converged: bool,
    pub b_norm: f64,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    fn relative(&self, eps: f64) -> f64 {
        if self.b_norm > 0.0 {
            eps.sqrt() / self.b_norm
        } else {
            eps.sqrt()
        }
    }

    /// `sqrt(ε) / ‖b‖` at the returned iterate.
    pub fn final_relative_residual(&self) -> f64 {
        self.relative(self.final_epsilon)
    }

    /// Writes `iteration,epsilon,relative_residual` rows, one per trace entry.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,epsilon,relative_residual")?;
        for (n, &eps) in self.trace.iter().enumerate() {
            writeln!(out, "{},{:e},{:e}", n, eps, self.relative(eps))?;
        }
        Ok(())
    }
}

/// Runs the configured iteration from `x_0 = b`.
pub fn solve(b: &RealGrid, spec: &BoundSpectrum, cfg: &SolverConfig) -> Result<Solution> {
    solve_observed(b, spec, cfg, None)
}

/// [`solve`] that also reports progress. Sends never block: a full channel
/// drops the snapshot.
pub fn solve_observed(
    b: &RealGrid,
    spec: &BoundSpectrum,
    cfg: &SolverConfig,
    observer: Option<&SyncSender<Progress>>,
) -> Result<Solution> {
    cfg.validate()?;
    if b.shape() != spec.shape() {
        return Err(Error::Shape(format!(
            "measurement is {}x{} but spectrum is bound to {}x{}",
            b.width(),
            b.height(),
            spec.shape().0,
            spec.shape().1
        )));
    }
    if !b.is_finite() {
        return param_err("measurement contains non-finite values");
    }
    let b_norm = b.norm();
    let mut state = SolverState::new(b.clone());
    let mut eps0 = None;
    let mut converged = false;

    for n in 0..cfg.max_iter {
        let (eps, delta) = residual(&state.x, b, spec)?;
        if !eps.is_finite() || !state.x.is_finite() {
            return Err(Error::Diverged { iteration: n, epsilon: eps });
        }
        let e0 = *eps0.get_or_insert(eps);
        if e0 > 0.0 && eps > cfg.divergence_factor * e0 {
            return Err(Error::Diverged { iteration: n, epsilon: eps });
        }
        if eps == 0.0 {
            converged = true;
            break;
        }
        if cfg.residual_tol > 0.0 {
            let rel = if b_norm > 0.0 { eps.sqrt() / b_norm } else { eps.sqrt() };
            if rel <= cfg.residual_tol {
                converged = true;
                break;
            }
        }
        let grad = descent_gradient(&delta, spec, cfg.scaling)?;
        match cfg.mode {
            Mode::Plain => step_plain(&mut state, &grad, eps, cfg.step_size, cfg.project)?,
            Mode::Momentum => step_momentum(&mut state, &grad, eps, cfg.dt, cfg.friction, cfg.project)?,
        }
        if let Some(tx) = observer {
            let _ = tx.try_send(Progress { iteration: n, epsilon: eps });
        }
    }

    let (final_epsilon, _) = residual(&state.x, b, spec)?;
    if !final_epsilon.is_finite() || !state.x.is_finite() {
        return Err(Error::Diverged {
            iteration: state.iteration,
            epsilon: final_epsilon,
        });
    }
    let (x, trace) = state.into_parts();
    Ok(Solution {
        x,
        trace,
        final_epsilon,
        converged,
        b_norm,
    })
}
