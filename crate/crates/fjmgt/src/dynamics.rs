//! Time integration of the semi-discrete Volterra system.
//!
//! In the eigenbasis the equation reduces to one third-order modal ODE per
//! mode, coupled only through the quadratic interaction tensor:
//!
//! ```text
//! ξ‴ + (1/τ)·ξ″ + c²λ·ξ′ + (c²λ/τ)·ξ + (δλ/τ)·(𝔎 ∗ ξ″) = N(ξ′, ξ″)
//! ```
//!
//! with `N_j = −(2k/τ)·Σ_{il} T[j,i,l]·ξ′_i·ξ″_l`. The stepper treats the
//! stiff linear part with a Crank–Nicolson half-step on the first-order form
//! `(ξ, ξ′, ξ″)`, the nonlinearity with a second-order Adams–Bashforth
//! extrapolation, and the memory term with product-integration weights — the
//! lag-0 weight applied implicitly to the new `ξ″`, the retarded lags
//! explicitly. The per-mode implicit matrix has determinant
//! `1 + g + h²·c²λ + h³·c²λ/τ ≥ 1`, so the scheme never hits a singular
//! solve for admissible parameters.

use ndarray::{Array1, Array3};

use crate::kernel::{
    convolve_history, convolve_retarded, quadrature_weights, KernelSpec, QuadratureWeights,
};
use crate::spectral::SpectralBasis;
use crate::{Error, Result};

/// Physical constants of the model: relaxation time `τ`, wave speed `c`,
/// nonlinearity strength `k`, and the memory kernel with its damping `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    tau: f64,
    c: f64,
    k: f64,
    kernel: KernelSpec,
}

impl PhysicalParams {
    /// Validates `τ > 0`, `c > 0`, and finite `k` (either sign is physical).
    pub fn new(tau: f64, c: f64, k: f64, kernel: KernelSpec) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "relaxation time must be positive and finite, got {tau}"
            )));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "wave speed must be positive and finite, got {c}"
            )));
        }
        if !k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "nonlinearity strength must be finite, got {k}"
            )));
        }
        Ok(Self { tau, c, k, kernel })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }
}

/// Coefficients `(a₂, a₁, a₀, μ)` of the modal ODE
/// `ξ‴ + a₂ξ″ + a₁ξ′ + a₀ξ + μ·(𝔎∗ξ″) = N` at eigenvalue `λ`.
///
/// The linear characteristic polynomial factorises as
/// `(s + 1/τ)(s² + c²λ)`, which the tests pin down.
pub fn modal_ode_coefficients(params: &PhysicalParams, lambda: f64) -> (f64, f64, f64, f64) {
    let a2 = 1.0 / params.tau;
    let a1 = params.c * params.c * lambda;
    let a0 = a1 / params.tau;
    let mem = params.kernel.delta() * lambda / params.tau;
    (a2, a1, a0, mem)
}

/// Galerkin nonlinearity `N_j = −(2k/τ)·Σ_{il} T[j,i,l]·(ξ_t)_i·(ξ_tt)_l`.
///
/// The tensor is fully symmetric, so the contraction order is free; this
/// implementation folds the last index first so both contractions are plain
/// matrix–vector products.
///
/// Panics if the tensor is not `n×n×n` for the coefficient length `n`; the
/// stepper establishes that invariant once at construction.
pub fn nonlinear_rhs(
    tensor: &Array3<f64>,
    k: f64,
    tau: f64,
    xi_t: &Array1<f64>,
    xi_tt: &Array1<f64>,
) -> Array1<f64> {
    let n = xi_t.len();
    assert_eq!(tensor.dim(), (n, n, n), "interaction tensor shape mismatch");
    assert_eq!(xi_tt.len(), n, "velocity/acceleration length mismatch");
    let flat =
        tensor.view().into_shape_with_order((n * n, n)).expect("interaction tensor is contiguous");
    let folded = flat.dot(xi_tt);
    let matrix = folded.into_shape_with_order((n, n)).expect("contraction output is contiguous");
    matrix.dot(xi_t) * (-2.0 * k / tau)
}

/// Per-mode precomputed solve data for the implicit half of the step.
#[derive(Debug, Clone, Copy)]
struct ModeSolve {
    /// `a₀ = c²λ/τ` — the ξ coefficient.
    a0: f64,
    /// `a₁ = c²λ` — the ξ′ coefficient.
    a1: f64,
    /// `μ = δλ/τ` — the memory coefficient.
    mem: f64,
    /// Inverse of the 3×3 implicit Crank–Nicolson matrix.
    minv: [[f64; 3]; 3],
}

/// State record emitted at output strides: the modal coefficient vectors of
/// `ψ`, `ψ_t`, `ψ_tt`, the reconstructed `ψ_ttt` (from the equation itself),
/// and the memory convolution `𝔎 ∗ ξ_tt` at the record time.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub step: u64,
    pub t: f64,
    pub xi: Array1<f64>,
    pub xi_t: Array1<f64>,
    pub xi_tt: Array1<f64>,
    pub xi_ttt: Array1<f64>,
    pub conv_xi_tt: Array1<f64>,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Reached the configured end time.
    Completed,
    /// The continuation monitor crossed its cap at time `t` with value `q`.
    MonitorFired { t: f64, q: f64 },
    /// The next step produced non-finite values; the state at `t` is the
    /// last finite one.
    BlowupSuspected { t: f64 },
    /// A hard step cap stopped the run before the end time.
    MaxStepsReached { t: f64 },
}

/// A completed (or aborted) run: stride samples plus the termination status.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub status: Termination,
    pub dt: f64,
}

/// Verdict returned by the per-sample callback of [`run`] and [`drive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleVerdict {
    Continue,
    /// Stop the run and report this termination status.
    Halt(Termination),
}

/// Outcome of a single [`Stepper::advance`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Advanced,
    /// The tentative new state contained NaN or ±∞; the stepper state is
    /// unchanged.
    NonFinite,
}

/// The IMEX Crank–Nicolson stepper.
///
/// Holds the modal state, the `ξ_tt` history required by the memory term
/// (empty when the kernel is inactive, which keeps the `δ = 0` path bitwise
/// identical to the zero-kernel path), and the previous nonlinear term for
/// the Adams–Bashforth extrapolation. Construction precomputes the inverse
/// of every per-mode implicit matrix, so a step is one 3×3 multiply per mode
/// plus the retarded convolution.
pub struct Stepper<'a> {
    basis: &'a SpectralBasis,
    tensor: &'a Array3<f64>,
    params: PhysicalParams,
    dt: f64,
    n_steps: u64,
    weights: Option<QuadratureWeights>,
    modes: Vec<ModeSolve>,
    step: u64,
    xi: Array1<f64>,
    xi_t: Array1<f64>,
    xi_tt: Array1<f64>,
    history: Vec<Array1<f64>>,
    n_prev: Option<Array1<f64>>,
}

/// Resumable snapshot of a stepper's mutable state. The static configuration
/// (basis, parameters, `dt`, horizon) is *not* part of the snapshot and must
/// match at restore time; the checkpoint layer enforces that with a config
/// hash.
#[derive(Debug, Clone, PartialEq)]
pub struct StepperSnapshot {
    pub step: u64,
    pub xi: Array1<f64>,
    pub xi_t: Array1<f64>,
    pub xi_tt: Array1<f64>,
    pub history: Vec<Array1<f64>>,
    pub n_prev: Option<Array1<f64>>,
}

impl<'a> Stepper<'a> {
    /// Builds a stepper at `t = 0` from projected initial data
    /// `(ξ(0), ξ′(0), ξ″(0))` for a run of `n_steps` steps of size `dt`.
    pub fn new(
        basis: &'a SpectralBasis,
        tensor: &'a Array3<f64>,
        params: &PhysicalParams,
        init: &[Array1<f64>; 3],
        dt: f64,
        n_steps: u64,
    ) -> Result<Self> {
        let snapshot = StepperSnapshot {
            step: 0,
            xi: init[0].clone(),
            xi_t: init[1].clone(),
            xi_tt: init[2].clone(),
            history: if params.kernel.is_active() { vec![init[2].clone()] } else { Vec::new() },
            n_prev: None,
        };
        Self::restore(basis, tensor, params, dt, n_steps, snapshot)
    }

    /// Rebuilds a stepper mid-run from a snapshot (checkpoint resume).
    pub fn restore(
        basis: &'a SpectralBasis,
        tensor: &'a Array3<f64>,
        params: &PhysicalParams,
        dt: f64,
        n_steps: u64,
        snapshot: StepperSnapshot,
    ) -> Result<Self> {
        let n = basis.n_modes();
        if tensor.dim() != (n, n, n) {
            return Err(Error::ShapeMismatch(format!(
                "interaction tensor is {:?}, basis has {n} modes",
                tensor.dim()
            )));
        }
        for (name, arr) in
            [("xi", &snapshot.xi), ("xi_t", &snapshot.xi_t), ("xi_tt", &snapshot.xi_tt)]
        {
            if arr.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has length {}, basis has {n} modes",
                    arr.len()
                )));
            }
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive and finite, got {dt}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("a run needs at least one step".into()));
        }
        if snapshot.step > n_steps {
            return Err(Error::InvalidParameter(format!(
                "snapshot at step {} lies past the {n_steps}-step horizon",
                snapshot.step
            )));
        }
        let memory_active = params.kernel.is_active();
        if memory_active {
            if snapshot.history.len() as u64 != snapshot.step + 1 {
                return Err(Error::ShapeMismatch(format!(
                    "memory history has {} records, step {} requires {}",
                    snapshot.history.len(),
                    snapshot.step,
                    snapshot.step + 1
                )));
            }
            if snapshot.history.iter().any(|h| h.len() != n) {
                return Err(Error::ShapeMismatch("memory history width mismatch".into()));
            }
        } else if !snapshot.history.is_empty() {
            return Err(Error::ShapeMismatch(
                "memory history present but the kernel is inactive".into(),
            ));
        }
        if let Some(prev) = &snapshot.n_prev {
            if prev.len() != n {
                return Err(Error::ShapeMismatch("cached nonlinear term width mismatch".into()));
            }
        }

        let weights = if memory_active {
            Some(quadrature_weights(params.kernel(), dt, n_steps as usize)?)
        } else {
            None
        };

        let h = 0.5 * dt;
        let w0 = weights.as_ref().map_or(0.0, |w| w.moments[0]);
        let mut modes = Vec::with_capacity(n);
        for (j, &lambda) in basis.eigenvalues().iter().enumerate() {
            let (a2, a1, a0, mem) = modal_ode_coefficients(params, lambda);
            let g = h * a2 + dt * mem * w0;
            let det = 1.0 + g + h * h * a1 + h * h * h * a0;
            if !(det.is_finite() && det >= 0.5) {
                return Err(Error::SingularStep { mode: j, det });
            }
            // Closed-form inverse of [[1,−h,0],[0,1,−h],[h·a0, h·a1, 1+g]].
            let minv = [
                [(1.0 + g + h * h * a1) / det, h * (1.0 + g) / det, h * h / det],
                [-h * h * a0 / det, (1.0 + g) / det, h / det],
                [-h * a0 / det, -(h * a1 + h * h * a0) / det, 1.0 / det],
            ];
            modes.push(ModeSolve { a0, a1, mem, minv });
        }

        Ok(Self {
            basis,
            tensor,
            params: params.clone(),
            dt,
            n_steps,
            weights,
            modes,
            step: snapshot.step,
            xi: snapshot.xi,
            xi_t: snapshot.xi_t,
            xi_tt: snapshot.xi_tt,
            history: snapshot.history,
            n_prev: snapshot.n_prev,
        })
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Current time, always the bitwise-stable product `step · dt` so that a
    /// resumed run reproduces the original time stamps exactly.
    pub fn t(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> u64 {
        self.n_steps
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn basis(&self) -> &SpectralBasis {
        self.basis
    }

    /// Clones the mutable state for checkpointing.
    pub fn snapshot(&self) -> StepperSnapshot {
        StepperSnapshot {
            step: self.step,
            xi: self.xi.clone(),
            xi_t: self.xi_t.clone(),
            xi_tt: self.xi_tt.clone(),
            history: self.history.clone(),
            n_prev: self.n_prev.clone(),
        }
    }

    fn nonlinear_now(&self) -> Option<Array1<f64>> {
        (self.params.k != 0.0).then(|| {
            nonlinear_rhs(self.tensor, self.params.k, self.params.tau, &self.xi_t, &self.xi_tt)
        })
    }

    /// Advances one step, or reports that the tentative state went
    /// non-finite (in which case nothing is mutated).
    pub fn advance(&mut self) -> Result<StepOutcome> {
        if self.step >= self.n_steps {
            return Err(Error::InvalidParameter(format!(
                "stepping past the configured horizon of {} steps",
                self.n_steps
            )));
        }
        let n = self.basis.n_modes();
        let dt = self.dt;
        let h = 0.5 * dt;
        let tau = self.params.tau;

        // Adams–Bashforth-2 extrapolation of the nonlinearity to the
        // midpoint; the first step has no history and uses N(t₀).
        let n_curr = self.nonlinear_now();
        let n_ex = match (&n_curr, &self.n_prev) {
            (Some(cur), Some(prev)) => Some(1.5 * cur - 0.5 * prev),
            (Some(cur), None) => Some(cur.clone()),
            (None, _) => None,
        };

        // Explicit retarded part of the memory convolution at t_{m+1}; the
        // lag-0 weight sits inside the implicit matrix.
        let retarded = match &self.weights {
            Some(w) => Some(convolve_retarded(w, &self.history, self.step as usize)?),
            None => None,
        };

        let mut new_xi = Array1::zeros(n);
        let mut new_xi_t = Array1::zeros(n);
        let mut new_xi_tt = Array1::zeros(n);
        for j in 0..n {
            let ModeSolve { a0, a1, mem, minv } = self.modes[j];
            let (x0, x1, x2) = (self.xi[j], self.xi_t[j], self.xi_tt[j]);
            let forcing =
                n_ex.as_ref().map_or(0.0, |v| v[j]) - mem * retarded.as_ref().map_or(0.0, |v| v[j]);
            let r =
                [x0 + h * x1, x1 + h * x2, x2 + h * (-a0 * x0 - a1 * x1 - x2 / tau) + dt * forcing];
            new_xi[j] = minv[0][0] * r[0] + minv[0][1] * r[1] + minv[0][2] * r[2];
            new_xi_t[j] = minv[1][0] * r[0] + minv[1][1] * r[1] + minv[1][2] * r[2];
            new_xi_tt[j] = minv[2][0] * r[0] + minv[2][1] * r[1] + minv[2][2] * r[2];
        }

        let finite = new_xi.iter().chain(new_xi_t.iter()).chain(new_xi_tt.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Ok(StepOutcome::NonFinite);
        }

        self.xi = new_xi;
        self.xi_t = new_xi_t;
        self.xi_tt = new_xi_tt;
        self.step += 1;
        if self.weights.is_some() {
            self.history.push(self.xi_tt.clone());
        }
        self.n_prev = n_curr;
        Ok(StepOutcome::Advanced)
    }

    /// Emits the state record at the current time, reconstructing `ξ‴` from
    /// the equation and evaluating the memory convolution at `t`.
    pub fn sample(&self) -> Sample {
        let n = self.basis.n_modes();
        let m = self.step as usize;
        let conv = match &self.weights {
            Some(w) if m > 0 => {
                convolve_history(w, &self.history, m - 1).expect("history is self-consistent")
            }
            _ => Array1::zeros(n),
        };
        let n_vec = self.nonlinear_now();
        let mut xi_ttt = Array1::zeros(n);
        for j in 0..n {
            let ModeSolve { a0, a1, mem, .. } = self.modes[j];
            xi_ttt[j] = -(self.xi_tt[j] / self.params.tau)
                - a1 * self.xi_t[j]
                - a0 * self.xi[j]
                - mem * conv[j]
                + n_vec.as_ref().map_or(0.0, |v| v[j]);
        }
        Sample {
            step: self.step,
            t: self.t(),
            xi: self.xi.clone(),
            xi_t: self.xi_t.clone(),
            xi_tt: self.xi_tt.clone(),
            xi_ttt,
            conv_xi_tt: conv,
        }
    }
}

/// Run configuration: step size, horizon in steps (`t_end = n_steps·dt`),
/// output stride, and an optional hard cap below the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub dt: f64,
    pub n_steps: u64,
    pub output_stride: u64,
    pub hard_cap: Option<u64>,
}

/// Drives a stepper from its current position to `limit` steps, sampling at
/// the stride and at the final step, feeding every sample to the callback.
///
/// The callback can halt the run (monitor policy lives with the caller).
/// Returns the collected samples and how the run ended. Samples are only
/// taken *after* steps, so resuming from a checkpoint does not re-emit the
/// record that was current when the checkpoint was written.
pub fn drive(
    stepper: &mut Stepper,
    limit: u64,
    stride: u64,
    mut on_sample: impl FnMut(&Stepper, &Sample) -> SampleVerdict,
) -> Result<(Vec<Sample>, Termination)> {
    if stride == 0 {
        return Err(Error::InvalidParameter("output stride must be at least 1".into()));
    }
    if limit > stepper.n_steps() {
        return Err(Error::InvalidParameter(format!(
            "step limit {limit} exceeds the configured horizon {}",
            stepper.n_steps()
        )));
    }
    let mut samples = Vec::new();
    let mut last_sampled = None;
    while stepper.step_index() < limit {
        match stepper.advance()? {
            StepOutcome::Advanced => {}
            StepOutcome::NonFinite => {
                let t = stepper.t();
                if last_sampled != Some(stepper.step_index()) {
                    let s = stepper.sample();
                    on_sample(stepper, &s);
                    samples.push(s);
                }
                return Ok((samples, Termination::BlowupSuspected { t }));
            }
        }
        let at = stepper.step_index();
        if at.is_multiple_of(stride) || at == limit {
            let s = stepper.sample();
            last_sampled = Some(at);
            let verdict = on_sample(stepper, &s);
            samples.push(s);
            if let SampleVerdict::Halt(status) = verdict {
                return Ok((samples, status));
            }
        }
    }
    let status = if stepper.step_index() == stepper.n_steps() {
        Termination::Completed
    } else {
        Termination::MaxStepsReached { t: stepper.t() }
    };
    Ok((samples, status))
}

/// Runs a fresh simulation: builds the stepper, emits the `t = 0` record,
/// then drives to the horizon (or the hard cap / a callback halt / loss of
/// finiteness, whichever comes first).
pub fn run(
    basis: &SpectralBasis,
    tensor: &Array3<f64>,
    params: &PhysicalParams,
    init: &[Array1<f64>; 3],
    cfg: &RunConfig,
    mut on_sample: impl FnMut(&Stepper, &Sample) -> SampleVerdict,
) -> Result<Trajectory> {
    let mut stepper = Stepper::new(basis, tensor, params, init, cfg.dt, cfg.n_steps)?;
    let first = stepper.sample();
    let mut samples = Vec::new();
    let verdict = on_sample(&stepper, &first);
    samples.push(first);
    if let SampleVerdict::Halt(status) = verdict {
        return Ok(Trajectory { samples, status, dt: cfg.dt });
    }
    let limit = cfg.hard_cap.map_or(cfg.n_steps, |cap| cap.min(cfg.n_steps));
    let (mut rest, status) = drive(&mut stepper, limit, cfg.output_stride, on_sample)?;
    samples.append(&mut rest);
    Ok(Trajectory { samples, status, dt: cfg.dt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eigenpairs, triple_product_tensor, DomainSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn setup_1d(n: usize) -> (SpectralBasis, Array3<f64>) {
        let basis = eigenpairs(&DomainSpec::new(1, vec![PI]).unwrap(), n).unwrap();
        let tensor = triple_product_tensor(&basis);
        (basis, tensor)
    }

    fn linear_params(tau: f64, c: f64) -> PhysicalParams {
        PhysicalParams::new(tau, c, 0.0, KernelSpec::zero()).unwrap()
    }

    /// Exact solution of `τξ‴ + ξ″ + c²λξ + τc²λξ′ = 0`: the characteristic
    /// roots are `−1/τ` and `±iω` with `ω = c√λ`.
    fn exact_linear(tau: f64, omega: f64, init: [f64; 3], t: f64) -> [f64; 3] {
        let [x0, x1, x2] = init;
        let a = tau * tau * (x2 + omega * omega * x0) / (1.0 + tau * tau * omega * omega);
        let b = x0 - a;
        let c = (x1 + a / tau) / omega;
        let e = (-t / tau).exp();
        let (s, co) = (omega * t).sin_cos();
        [
            a * e + b * co + c * s,
            -a / tau * e - b * omega * s + c * omega * co,
            a / (tau * tau) * e - b * omega * omega * co - c * omega * omega * s,
        ]
    }

    fn collect_run(
        basis: &SpectralBasis,
        tensor: &Array3<f64>,
        params: &PhysicalParams,
        init: &[Array1<f64>; 3],
        cfg: &RunConfig,
    ) -> Trajectory {
        run(basis, tensor, params, init, cfg, |_, _| SampleVerdict::Continue).unwrap()
    }

    #[test]
    fn modal_coefficients_factorise_the_characteristic_polynomial() {
        let params = linear_params(0.7, 1.3);
        let lambda = 4.0;
        let (a2, a1, a0, mem) = modal_ode_coefficients(&params, lambda);
        // (s + 1/τ)(s² + c²λ) = s³ + a₂s² + a₁s + a₀
        assert_relative_eq!(a2, 1.0 / 0.7, max_relative = 1e-15);
        assert_relative_eq!(a1, 1.3 * 1.3 * lambda, max_relative = 1e-15);
        assert_relative_eq!(a0, a1 * a2, max_relative = 1e-15);
        assert_eq!(mem, 0.0);
    }

    #[test]
    #[allow(clippy::needless_range_loop)] // r/c double-index is the clearest way to write M⁻¹·M
    fn implicit_matrix_inverse_is_exact() {
        let (basis, tensor) = setup_1d(3);
        let kernel = KernelSpec::abel(0.5, 0.4).unwrap();
        let params = PhysicalParams::new(0.9, 1.1, 0.0, kernel).unwrap();
        let dt = 1e-2;
        let stepper = Stepper::new(
            &basis,
            &tensor,
            &params,
            &[Array1::zeros(3), Array1::zeros(3), Array1::zeros(3)],
            dt,
            10,
        )
        .unwrap();
        let h = 0.5 * dt;
        let w0 = stepper.weights.as_ref().unwrap().moments[0];
        for (j, m) in stepper.modes.iter().enumerate() {
            let (a2, a1, a0, mem) = modal_ode_coefficients(&params, basis.eigenvalues()[j]);
            let g = h * a2 + dt * mem * w0;
            let mat = [[1.0, -h, 0.0], [0.0, 1.0, -h], [h * a0, h * a1, 1.0 + g]];
            for r in 0..3 {
                for c in 0..3 {
                    let prod: f64 = (0..3).map(|i| m.minv[r][i] * mat[i][c]).sum();
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert!((prod - expect).abs() < 1e-14, "mode {j}: (M⁻¹·M)[{r}][{c}] = {prod}");
                }
            }
        }
    }

    #[test]
    fn linear_single_mode_tracks_the_closed_form() {
        let (basis, tensor) = setup_1d(1);
        let (tau, c) = (1.0, 1.0);
        let params = linear_params(tau, c);
        let init = [
            Array1::from_vec(vec![1.0]),
            Array1::from_vec(vec![0.5]),
            Array1::from_vec(vec![-0.25]),
        ];
        let cfg = RunConfig { dt: 1e-3, n_steps: 1000, output_stride: 1000, hard_cap: None };
        let traj = collect_run(&basis, &tensor, &params, &init, &cfg);
        assert_eq!(traj.status, Termination::Completed);
        let last = traj.samples.last().unwrap();
        assert_relative_eq!(last.t, 1.0, max_relative = 1e-15);
        let omega = c * basis.eigenvalues()[0].sqrt();
        let exact = exact_linear(tau, omega, [1.0, 0.5, -0.25], 1.0);
        // Crank–Nicolson phase error at ω = 1 over one unit is ~dt²·ω³/12.
        assert_relative_eq!(last.xi[0], exact[0], max_relative = 3e-7);
        assert_relative_eq!(last.xi_t[0], exact[1], max_relative = 3e-6);
        assert_relative_eq!(last.xi_tt[0], exact[2], max_relative = 3e-6);
    }

    #[test]
    fn linear_error_contracts_at_second_order() {
        let (basis, tensor) = setup_1d(1);
        let params = linear_params(1.0, 2.0);
        let init = [
            Array1::from_vec(vec![0.8]),
            Array1::from_vec(vec![-0.3]),
            Array1::from_vec(vec![0.6]),
        ];
        let omega = 2.0 * basis.eigenvalues()[0].sqrt();
        let exact = exact_linear(1.0, omega, [0.8, -0.3, 0.6], 0.5);
        let mut errs = Vec::new();
        for &(dt, n) in &[(1e-3, 500u64), (5e-4, 1000u64)] {
            let cfg = RunConfig { dt, n_steps: n, output_stride: n, hard_cap: None };
            let traj = collect_run(&basis, &tensor, &params, &init, &cfg);
            errs.push((traj.samples.last().unwrap().xi[0] - exact[0]).abs());
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (3.4..=4.6).contains(&ratio),
            "halving dt should quarter the error, got ratio {ratio}"
        );
    }

    #[test]
    fn nonlinear_rhs_matches_the_frozen_single_mode_value() {
        let (_, tensor) = setup_1d(1);
        let xi_t = Array1::from_vec(vec![1.0]);
        let xi_tt = Array1::from_vec(vec![1.0]);
        // −(2·1/1)·T[0,0,0] = −2·(2/π)^{3/2}·(4/3)
        let n = nonlinear_rhs(&tensor, 1.0, 1.0, &xi_t, &xi_tt);
        assert_relative_eq!(n[0], -1.354_530_899_930_474, max_relative = 1e-13);
    }

    #[test]
    fn nonlinear_runs_self_converge_at_second_order() {
        let (basis, tensor) = setup_1d(2);
        let params = PhysicalParams::new(1.0, 1.0, 0.8, KernelSpec::zero()).unwrap();
        let init = [
            Array1::from_vec(vec![0.4, -0.2]),
            Array1::from_vec(vec![0.1, 0.3]),
            Array1::from_vec(vec![-0.3, 0.05]),
        ];
        let mut finals = Vec::new();
        for &(dt, n) in &[(2e-3, 125u64), (1e-3, 250), (5e-4, 500)] {
            let cfg = RunConfig { dt, n_steps: n, output_stride: n, hard_cap: None };
            let traj = collect_run(&basis, &tensor, &params, &init, &cfg);
            finals.push(traj.samples.last().unwrap().xi.clone());
        }
        let d01 = (&finals[0] - &finals[1]).iter().map(|v| v.abs()).fold(0.0, f64::max);
        let d12 = (&finals[1] - &finals[2]).iter().map(|v| v.abs()).fold(0.0, f64::max);
        let ratio = d01 / d12;
        assert!(
            (3.3..=4.7).contains(&ratio),
            "successive Richardson differences should contract ×4, got {ratio}"
        );
    }

    /// With an exponential kernel the memory admits the exact augmentation
    /// `z′ = scale·ξ″ − rate·z`, so a high-resolution RK4 integration of the
    /// augmented ODE is an independent oracle for the Volterra stepper.
    #[test]
    fn exponential_memory_tracks_the_augmented_ode() {
        let (basis, tensor) = setup_1d(1);
        let (rate, scale, delta) = (2.0, 1.0, 0.8);
        let kernel = KernelSpec::exponential(rate, scale, delta).unwrap();
        let params = PhysicalParams::new(1.0, 1.0, 0.0, kernel).unwrap();
        let lambda = basis.eigenvalues()[0];
        let (a2, a1, a0, mem) = modal_ode_coefficients(&params, lambda);

        // Reference: RK4 on (ξ, ξ′, ξ″, z) at dt = 1e-5.
        let f = |y: [f64; 4]| {
            [
                y[1],
                y[2],
                -a2 * y[2] - a1 * y[1] - a0 * y[0] - mem * y[3],
                scale * y[2] - rate * y[3],
            ]
        };
        let mut y = [1.0, 0.0, -0.5, 0.0];
        let h = 1e-5;
        for _ in 0..100_000 {
            let k1 = f(y);
            let k2 = f(std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]));
            let k3 = f(std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]));
            let k4 = f(std::array::from_fn(|i| y[i] + h * k3[i]));
            y = std::array::from_fn(|i| {
                y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            });
        }

        let init = [
            Array1::from_vec(vec![1.0]),
            Array1::from_vec(vec![0.0]),
            Array1::from_vec(vec![-0.5]),
        ];
        let mut errs = Vec::new();
        for &(dt, n) in &[(1e-3, 1000u64), (5e-4, 2000)] {
            let cfg = RunConfig { dt, n_steps: n, output_stride: n, hard_cap: None };
            let traj = collect_run(&basis, &tensor, &params, &init, &cfg);
            errs.push((traj.samples.last().unwrap().xi[0] - y[0]).abs());
        }
        // The product-integration memory is first-order accurate, so demand
        // a small absolute error and at least linear contraction.
        assert!(errs[0] < 2e-4, "dt = 1e-3 drifted {} from the ODE oracle", errs[0]);
        assert!(
            errs[0] / errs[1] > 1.6,
            "memory error should contract at least linearly, got {}",
            errs[0] / errs[1]
        );
    }

    #[test]
    fn abel_with_zero_delta_is_bitwise_the_memoryless_path() {
        let (basis, tensor) = setup_1d(3);
        let abel = PhysicalParams::new(1.0, 1.0, 0.5, KernelSpec::abel(0.5, 0.0).unwrap()).unwrap();
        let none = PhysicalParams::new(1.0, 1.0, 0.5, KernelSpec::zero()).unwrap();
        let init = [
            Array1::from_vec(vec![0.3, -0.1, 0.2]),
            Array1::from_vec(vec![0.05, 0.4, -0.2]),
            Array1::from_vec(vec![-0.15, 0.0, 0.1]),
        ];
        let cfg = RunConfig { dt: 1e-3, n_steps: 200, output_stride: 50, hard_cap: None };
        let a = collect_run(&basis, &tensor, &abel, &init, &cfg);
        let b = collect_run(&basis, &tensor, &none, &init, &cfg);
        assert_eq!(a, b, "δ = 0 must take the memoryless branch bitwise");
    }

    #[test]
    fn runaway_growth_is_reported_as_suspected_blowup() {
        let (basis, tensor) = setup_1d(1);
        let params = PhysicalParams::new(1.0, 1.0, 5.0, KernelSpec::zero()).unwrap();
        // Large negative velocity data drives the quadratic term into
        // finite-time runaway.
        let init = [
            Array1::from_vec(vec![0.0]),
            Array1::from_vec(vec![-3.0]),
            Array1::from_vec(vec![-3.0]),
        ];
        let cfg = RunConfig { dt: 1e-3, n_steps: 1000, output_stride: 10, hard_cap: None };
        let traj = collect_run(&basis, &tensor, &params, &init, &cfg);
        let Termination::BlowupSuspected { t } = traj.status else {
            panic!("expected suspected blow-up, got {:?}", traj.status);
        };
        assert!((0.1..0.5).contains(&t), "runaway detected at unexpected t = {t}");
        let last = traj.samples.last().unwrap();
        assert!(last.xi_tt[0].is_finite(), "the last recorded state must stay finite");
    }

    #[test]
    fn snapshot_restore_resumes_bitwise() {
        let (basis, tensor) = setup_1d(4);
        let kernel = KernelSpec::abel(0.4, 0.6).unwrap();
        let params = PhysicalParams::new(0.8, 1.2, 0.7, kernel).unwrap();
        let init = [
            Array1::from_vec(vec![0.3, -0.1, 0.2, 0.05]),
            Array1::from_vec(vec![0.0, 0.25, -0.15, 0.1]),
            Array1::from_vec(vec![-0.2, 0.1, 0.0, 0.3]),
        ];
        let mut full = Stepper::new(&basis, &tensor, &params, &init, 1e-3, 300).unwrap();
        let mut half = Stepper::new(&basis, &tensor, &params, &init, 1e-3, 300).unwrap();
        for _ in 0..100 {
            assert_eq!(full.advance().unwrap(), StepOutcome::Advanced);
            assert_eq!(half.advance().unwrap(), StepOutcome::Advanced);
        }
        let snap = half.snapshot();
        let mut resumed = Stepper::restore(&basis, &tensor, &params, 1e-3, 300, snap).unwrap();
        for _ in 0..200 {
            assert_eq!(full.advance().unwrap(), StepOutcome::Advanced);
            assert_eq!(resumed.advance().unwrap(), StepOutcome::Advanced);
        }
        assert_eq!(full.sample(), resumed.sample(), "resume must be bitwise transparent");
    }

    #[test]
    fn restore_validates_history_and_horizon() {
        let (basis, tensor) = setup_1d(2);
        let kernel = KernelSpec::abel(0.5, 1.0).unwrap();
        let params = PhysicalParams::new(1.0, 1.0, 0.0, kernel).unwrap();
        let good = StepperSnapshot {
            step: 1,
            xi: Array1::zeros(2),
            xi_t: Array1::zeros(2),
            xi_tt: Array1::zeros(2),
            history: vec![Array1::zeros(2); 2],
            n_prev: None,
        };
        assert!(Stepper::restore(&basis, &tensor, &params, 1e-3, 10, good.clone()).is_ok());
        let mut missing = good.clone();
        missing.history.pop();
        assert!(Stepper::restore(&basis, &tensor, &params, 1e-3, 10, missing).is_err());
        let mut past = good;
        past.step = 11;
        past.history = vec![Array1::zeros(2); 12];
        assert!(Stepper::restore(&basis, &tensor, &params, 1e-3, 10, past).is_err());
    }

    #[test]
    fn sampling_happens_on_stride_and_at_the_end() {
        let (basis, tensor) = setup_1d(1);
        let params = linear_params(1.0, 1.0);
        let init =
            [Array1::from_vec(vec![1.0]), Array1::from_vec(vec![0.0]), Array1::from_vec(vec![0.0])];
        let cfg = RunConfig { dt: 1e-2, n_steps: 25, output_stride: 10, hard_cap: None };
        let traj = collect_run(&basis, &tensor, &params, &init, &cfg);
        let steps: Vec<u64> = traj.samples.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 10, 20, 25]);
        for s in &traj.samples {
            assert_eq!(s.t, s.step as f64 * 1e-2, "time stamps are exactly step·dt");
        }
    }

    #[test]
    fn hard_cap_stops_early_with_the_right_status() {
        let (basis, tensor) = setup_1d(1);
        let params = linear_params(1.0, 1.0);
        let init =
            [Array1::from_vec(vec![1.0]), Array1::from_vec(vec![0.0]), Array1::from_vec(vec![0.0])];
        let cfg = RunConfig { dt: 1e-2, n_steps: 100, output_stride: 10, hard_cap: Some(30) };
        let traj = collect_run(&basis, &tensor, &params, &init, &cfg);
        assert_eq!(traj.status, Termination::MaxStepsReached { t: 30.0 * 1e-2 });
        assert_eq!(traj.samples.last().unwrap().step, 30);
    }

    #[test]
    fn callback_halt_propagates_its_status() {
        let (basis, tensor) = setup_1d(1);
        let params = linear_params(1.0, 1.0);
        let init =
            [Array1::from_vec(vec![1.0]), Array1::from_vec(vec![0.0]), Array1::from_vec(vec![0.0])];
        let cfg = RunConfig { dt: 1e-2, n_steps: 100, output_stride: 5, hard_cap: None };
        let fired = Termination::MonitorFired { t: 0.05, q: 42.0 };
        let traj = run(&basis, &tensor, &params, &init, &cfg, |_, s| {
            if s.step >= 5 {
                SampleVerdict::Halt(fired)
            } else {
                SampleVerdict::Continue
            }
        })
        .unwrap();
        assert_eq!(traj.status, fired);
        assert_eq!(traj.samples.last().unwrap().step, 5);
    }

    #[test]
    fn params_validation_rejects_bad_constants() {
        let kernel = KernelSpec::zero();
        assert!(PhysicalParams::new(0.0, 1.0, 0.0, kernel).is_err());
        assert!(PhysicalParams::new(1.0, -1.0, 0.0, kernel).is_err());
        assert!(PhysicalParams::new(1.0, 1.0, f64::NAN, kernel).is_err());
        assert!(PhysicalParams::new(1.0, 1.0, -2.0, kernel).is_ok());
    }
}
