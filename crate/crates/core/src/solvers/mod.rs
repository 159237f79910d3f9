//! Bregman-Kaczmarz iterations for `A(X) = B` regularized by a strongly
//! convex `f`:
//!
//! ```text
//! Z^{k+1} = Z^k + t A(i)^T (B(i) - A(i) X^k) / ||A(i)||^2
//! X^{k+1} = grad f*(Z^{k+1})
//! ```
//!
//! starting from `Z^0 = 0`, with `i = i(k)` chosen by a [`ControlSequence`].
//! The batched variant accumulates several increments before one proximal
//! step; [`linbreg`] is the full-gradient linearized Bregman method.

mod analysis;
mod constraints;
mod control;
mod engine;
mod trace;

pub use analysis::{compute_beta, dual_value, frequency_energy_ratios};
pub use constraints::{ConstraintKind, LinearConstraintSet};
pub use control::{BatchMode, BatchOrder, BatchSchedule, ControlSequence};
pub use trace::{SolveTrace, StopReason, TraceRecord, CSV_HEADER};

use crate::convex::Regularizer;
use crate::error::{arg_err, dim_err, Result};
use crate::tensor::Tensor3;
use control::{BatchSource, FullSource, SequenceSource};
use engine::{dispatch, Scaling};

/// What to do when the step size exceeds the guaranteed range
/// `t < 2 alpha_f / N3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Safety {
    /// Reject for tensor systems (`N3 > 1`), warn for matrix and vector ones.
    Auto,
    Enforce,
    Warn,
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    /// Step size `t`.
    pub step: f64,
    /// Hard cap on outer iterations.
    pub max_iters: usize,
    /// Stop when the relative change of `X` at a check drops below this;
    /// zero disables the test.
    pub tol: f64,
    /// Record the trace (and test `tol`) every this many iterations.
    pub trace_every: usize,
    /// Record `||A(X) - B||` at trace points. Costs one full product.
    pub record_residual: bool,
    /// Ground truth for relative errors and Bregman distances.
    pub reference: Option<Tensor3>,
    pub safety: Safety,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            max_iters: 1000,
            tol: 0.0,
            trace_every: 10,
            record_residual: true,
            reference: None,
            safety: Safety::Auto,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// Final primal iterate.
    pub x: Tensor3,
    /// Final dual iterate.
    pub z: Tensor3,
    pub trace: SolveTrace,
}

fn validate(cs: &LinearConstraintSet, reg: &Regularizer, cfg: &SolveConfig) -> Result<()> {
    if !(cfg.step > 0.0) || !cfg.step.is_finite() {
        return arg_err(format!("step size must be positive and finite, got {}", cfg.step));
    }
    if !(cfg.tol >= 0.0) {
        return arg_err(format!("tolerance must be nonnegative, got {}", cfg.tol));
    }
    if cfg.trace_every == 0 {
        return arg_err("trace_every must be at least 1");
    }
    if matches!(reg, Regularizer::MatrixNuclearElastic { .. }) && cs.n3() != 1 {
        return dim_err("matrix_nuclear_elastic needs a matrix unknown; use tensor_tnn_elastic");
    }
    Ok(())
}

/// Checks `t < 2 alpha / N3`; returns the warnings to attach to the trace.
fn step_safety(cs: &LinearConstraintSet, reg: &Regularizer, cfg: &SolveConfig) -> Result<Vec<String>> {
    let n3 = cs.n3();
    let bound = 2.0 * reg.strong_convexity() / n3 as f64;
    if cfg.step < bound {
        return Ok(Vec::new());
    }
    let msg = format!("step size {} is outside the guaranteed range t < {bound}", cfg.step);
    let enforce = match cfg.safety {
        Safety::Auto => n3 > 1,
        Safety::Enforce => true,
        Safety::Warn => false,
    };
    if enforce {
        arg_err(msg)
    } else {
        Ok(vec![msg])
    }
}

/// Single-constraint iteration driven by `seq`.
pub fn solve(
    cs: &LinearConstraintSet,
    reg: &Regularizer,
    seq: &ControlSequence,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    validate(cs, reg, cfg)?;
    let warnings = step_safety(cs, reg, cfg)?;
    let mut src = SequenceSource::new(seq, cs.norms_sq(), cfg.max_iters)?;
    dispatch(cs, reg, &mut src, Scaling::PerConstraint(cfg.step), cfg, warnings)
}

/// [`solve`] on the right-hand side `B + E`. The trace records
/// `max_i ||E(i)|| / ||A(i)||`.
pub fn solve_noisy(
    cs: &LinearConstraintSet,
    noise: &[f64],
    reg: &Regularizer,
    seq: &ControlSequence,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    let noisy = cs.clone().with_noise(noise)?;
    let mut r = solve(&noisy, reg, seq, cfg)?;
    r.trace.noise_level = Some(noisy.noise_level());
    Ok(r)
}

/// Batched iteration: every outer step gathers the increments of
/// `schedule.size` constraints, all evaluated at the same `X^k`, then
/// applies one proximal step.
pub fn solve_batched(
    cs: &LinearConstraintSet,
    reg: &Regularizer,
    schedule: &BatchSchedule,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    validate(cs, reg, cfg)?;
    let warnings = step_safety(cs, reg, cfg)?;
    let mut src = BatchSource::new(schedule, cs.len())?;
    let scaling = match schedule.mode {
        BatchMode::Sum => Scaling::PerConstraint(cfg.step),
        BatchMode::Slab => Scaling::Slab(cfg.step),
    };
    dispatch(cs, reg, &mut src, scaling, cfg, warnings)
}

/// Linearized Bregman: `Z += t A^T (B - A(X))`, `X = grad f*(Z)`.
/// For masked entries this is `Z += t (B - X)` on the observed set.
pub fn linbreg(cs: &LinearConstraintSet, reg: &Regularizer, cfg: &SolveConfig) -> Result<SolveResult> {
    validate(cs, reg, cfg)?;
    let mut src = FullSource(cs.len());
    dispatch(cs, reg, &mut src, Scaling::Plain(cfg.step), cfg, Vec::new())
}
