//! End-to-end experiment runners shared by the command line and the tests.
//!
//! Every experiment is described by a problem spec and a [`SolverSpec`];
//! both deserialize from configuration files and reject unknown keys.

use super::deconv::{blur, gaussian_kernel, DeconvProblem};
use super::generators::{
    gen_checkerboard, gen_lowrank_tensor_problem, gen_sparse_problem, synthetic_house, synthetic_sequence, MaskBox,
};
use super::image::{psnr, read_pgm, relerr, ssim_global, Image};
use crate::convex::Regularizer;
use crate::error::{arg_err, Result};
use crate::random::{gaussian_vec, seeded_rng};
use crate::solvers::{
    linbreg, solve, solve_batched, solve_noisy, BatchMode, BatchOrder, BatchSchedule, ControlSequence,
    LinearConstraintSet, Safety, SolveConfig, SolveResult, SolveTrace,
};
use crate::tensor::{Matrix, Tensor3};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Regularized Kaczmarz, single or batched.
    Kaczmarz,
    /// Full-gradient linearized Bregman baseline.
    Linbreg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Cyclic,
    UniformRandom,
    WeightedRandom,
    /// Batches only: consecutive chunks of a per-sweep permutation.
    Shuffled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchModeKind {
    Sum,
    Slab,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyKind {
    Auto,
    Enforce,
    Warn,
}

/// Solver settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub kind: SolverKind,
    pub sequence: SequenceKind,
    pub step: f64,
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub trace_every: usize,
    /// Constraints per outer step; 1 is plain Kaczmarz.
    pub batch: usize,
    pub batch_mode: BatchModeKind,
    pub safety: SafetyKind,
    /// Record `||A(X) - B||` at trace points.
    pub record_residual: bool,
}

/// Optional overrides of a [`SolverSpec`], as read from a configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub kind: Option<SolverKind>,
    pub sequence: Option<SequenceKind>,
    pub step: Option<f64>,
    pub lambda: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub trace_every: Option<usize>,
    pub batch: Option<usize>,
    pub batch_mode: Option<BatchModeKind>,
    pub safety: Option<SafetyKind>,
    pub record_residual: Option<bool>,
}

impl SolverSpec {
    pub fn apply(&self, o: &SolverOverrides) -> SolverSpec {
        SolverSpec {
            kind: o.kind.unwrap_or(self.kind),
            sequence: o.sequence.unwrap_or(self.sequence),
            step: o.step.unwrap_or(self.step),
            lambda: o.lambda.unwrap_or(self.lambda),
            max_iters: o.max_iters.unwrap_or(self.max_iters),
            tol: o.tol.unwrap_or(self.tol),
            trace_every: o.trace_every.unwrap_or(self.trace_every),
            batch: o.batch.unwrap_or(self.batch),
            batch_mode: o.batch_mode.unwrap_or(self.batch_mode),
            safety: o.safety.unwrap_or(self.safety),
            record_residual: o.record_residual.unwrap_or(self.record_residual),
        }
    }

    fn config(&self, reference: Option<Tensor3>) -> SolveConfig {
        SolveConfig {
            step: self.step,
            max_iters: self.max_iters,
            tol: self.tol,
            trace_every: self.trace_every,
            record_residual: self.record_residual,
            reference,
            safety: match self.safety {
                SafetyKind::Auto => Safety::Auto,
                SafetyKind::Enforce => Safety::Enforce,
                SafetyKind::Warn => Safety::Warn,
            },
        }
    }

    fn sequence(&self, seed: u64) -> Result<ControlSequence> {
        Ok(match self.sequence {
            SequenceKind::Cyclic => ControlSequence::Cyclic,
            SequenceKind::UniformRandom => ControlSequence::UniformRandom { seed },
            SequenceKind::WeightedRandom => ControlSequence::WeightedRandom { seed },
            SequenceKind::Shuffled => return arg_err("the shuffled sequence needs batch > 1"),
        })
    }

    fn schedule(&self, seed: u64) -> BatchSchedule {
        let order = match self.sequence {
            SequenceKind::Cyclic => BatchOrder::Cyclic,
            SequenceKind::Shuffled => BatchOrder::Shuffled { seed },
            SequenceKind::UniformRandom | SequenceKind::WeightedRandom => BatchOrder::Random { seed },
        };
        let mode = match self.batch_mode {
            BatchModeKind::Sum => BatchMode::Sum,
            BatchModeKind::Slab => BatchMode::Slab,
        };
        BatchSchedule::new(self.batch, order, mode)
    }

    /// Runs the selected method on `cs`.
    pub fn run(
        &self,
        cs: &LinearConstraintSet,
        reg: &Regularizer,
        seed: u64,
        reference: Option<Tensor3>,
    ) -> Result<SolveResult> {
        let cfg = self.config(reference);
        match self.kind {
            SolverKind::Linbreg => linbreg(cs, reg, &cfg),
            SolverKind::Kaczmarz if self.batch > 1 => solve_batched(cs, reg, &self.schedule(seed), &cfg),
            SolverKind::Kaczmarz if self.batch == 1 => solve(cs, reg, &self.sequence(seed)?, &cfg),
            SolverKind::Kaczmarz => arg_err("batch size must be at least 1"),
        }
    }
}

/// Sparse vector recovery from Gaussian measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SparseSpec {
    pub m: usize,
    pub n: usize,
    pub sparsity: usize,
    /// Noise level `max_i |e_i| / ||a_i||`; zero for exact data.
    pub noise: f64,
}

impl Default for SparseSpec {
    fn default() -> Self {
        Self { m: 200, n: 1000, sparsity: 10, noise: 0.0 }
    }
}

/// Checkerboard inpainting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InpaintSpec {
    pub size: usize,
    pub tile: usize,
    pub box_top: usize,
    pub box_left: usize,
    pub box_height: usize,
    pub box_width: usize,
}

impl Default for InpaintSpec {
    fn default() -> Self {
        let b = MaskBox::CHECKERBOARD_128;
        Self { size: 128, tile: 16, box_top: b.top, box_left: b.left, box_height: b.height, box_width: b.width }
    }
}

/// Low tubal-rank tensor recovery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TensorSpec {
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub n3: usize,
    pub rank: usize,
}

impl Default for TensorSpec {
    fn default() -> Self {
        Self { n1: 200, n2: 100, k: 100, n3: 100, rank: 2 }
    }
}

/// Single-image deconvolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeblurSpec {
    /// Grayscale PGM to blur; the synthetic house scene when absent.
    pub image: Option<PathBuf>,
    pub height: usize,
    pub width: usize,
    pub kernel_size: usize,
    pub kernel_sigma: f64,
    /// Symmetric extension width; kernel half-width rounded up plus 10
    /// when absent.
    pub pad: Option<usize>,
}

impl Default for DeblurSpec {
    fn default() -> Self {
        Self { image: None, height: 256, width: 256, kernel_size: 9, kernel_sigma: 2.0, pad: None }
    }
}

/// Deconvolution of a frame sequence sharing one kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VideoSpec {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub kernel_size: usize,
    pub kernel_sigma: f64,
    pub pad: Option<usize>,
}

impl Default for VideoSpec {
    fn default() -> Self {
        Self { height: 128, width: 128, frames: 12, kernel_size: 5, kernel_sigma: 2.0, pad: None }
    }
}

/// Default extension width for a `size x size` kernel.
pub fn default_pad(kernel_size: usize) -> usize {
    kernel_size.saturating_sub(1).div_ceil(2) + 10
}

/// One experiment family with its problem parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Experiment {
    Sparse(SparseSpec),
    Inpaint(InpaintSpec),
    Tensor(TensorSpec),
    Deblur(DeblurSpec),
    Video(VideoSpec),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Sparse(_) => "sparse",
            Experiment::Inpaint(_) => "inpaint",
            Experiment::Tensor(_) => "tensor",
            Experiment::Deblur(_) => "deblur",
            Experiment::Video(_) => "video",
        }
    }

    /// Solver settings used unless overridden.
    pub fn default_solver(&self) -> SolverSpec {
        let base = SolverSpec {
            kind: SolverKind::Kaczmarz,
            sequence: SequenceKind::Cyclic,
            step: 1.0,
            lambda: 0.0,
            max_iters: 1000,
            tol: 0.0,
            trace_every: 10,
            batch: 1,
            batch_mode: BatchModeKind::Sum,
            safety: SafetyKind::Auto,
            record_residual: true,
        };
        match self {
            Experiment::Sparse(_) => {
                SolverSpec { step: 40.0, lambda: 10.0, max_iters: 200_000, trace_every: 200, ..base }
            }
            Experiment::Inpaint(_) => SolverSpec { step: 9.0, lambda: 1500.0, max_iters: 800, batch: 2000, ..base },
            Experiment::Tensor(_) => SolverSpec {
                max_iters: 2000,
                trace_every: 20,
                safety: SafetyKind::Warn,
                record_residual: false,
                ..base
            },
            Experiment::Deblur(_) => {
                SolverSpec { lambda: 0.1, batch: 80, batch_mode: BatchModeKind::Slab, safety: SafetyKind::Warn, ..base }
            }
            Experiment::Video(_) => SolverSpec {
                lambda: 0.01,
                batch: 60,
                batch_mode: BatchModeKind::Slab,
                safety: SafetyKind::Warn,
                ..base
            },
        }
    }

    /// Generates the problem, solves it and evaluates the result.
    pub fn run(&self, solver: &SolverSpec, seed: u64) -> Result<Outcome> {
        match self {
            Experiment::Sparse(s) => run_sparse(s, solver, seed),
            Experiment::Inpaint(s) => run_inpaint(s, solver, seed),
            Experiment::Tensor(s) => run_tensor(s, solver, seed),
            Experiment::Deblur(s) => run_deblur(s, solver, seed),
            Experiment::Video(s) => run_video(s, solver, seed),
        }
    }
}

/// Result of an experiment run.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub trace: SolveTrace,
    /// Named scalar results in a fixed order.
    pub metrics: Vec<(String, f64)>,
    /// Named images to be written by the caller.
    pub images: Vec<(String, Image)>,
}

impl Outcome {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// `name=value` pairs on one line.
    pub fn summary(&self) -> String {
        let show = |v: f64| if v.fract() == 0.0 && v.abs() < 1e15 { format!("{v}") } else { format!("{v:.6e}") };
        self.metrics.iter().map(|(n, v)| format!("{n}={}", show(*v))).collect::<Vec<_>>().join(" ")
    }
}

fn final_rel_err(trace: &SolveTrace) -> f64 {
    trace.final_record().rel_err.unwrap_or(f64::NAN)
}

/// First recorded iteration whose relative error is at most `level`.
pub fn first_iter_below(trace: &SolveTrace, level: f64) -> Option<usize> {
    trace.records.iter().find(|r| r.rel_err.is_some_and(|e| e <= level)).map(|r| r.iter)
}

fn run_sparse(spec: &SparseSpec, solver: &SolverSpec, seed: u64) -> Result<Outcome> {
    let p = gen_sparse_problem(spec.m, spec.n, spec.sparsity, seed)?;
    let cs = LinearConstraintSet::vector_rows(&p.a, &p.b)?;
    let reg = Regularizer::elastic_l1(solver.lambda)?;
    let reference = (spec.sparsity > 0).then(|| Tensor3::from_vector(&p.x));
    let result = if spec.noise > 0.0 {
        if solver.kind != SolverKind::Kaczmarz || solver.batch != 1 {
            return arg_err("noisy sparse runs use the single-row Kaczmarz solver");
        }
        let noise = scaled_noise(&cs, spec.noise, seed ^ NOISE_STREAM)?;
        solve_noisy(&cs, &noise, &reg, &solver.sequence(seed)?, &solver.config(reference))?
    } else {
        solver.run(&cs, &reg, seed, reference)?
    };
    // Work per outer iteration in units of full passes over the rows.
    let per_iter = match solver.kind {
        SolverKind::Linbreg => 1.0,
        SolverKind::Kaczmarz => solver.batch as f64 / spec.m as f64,
    };
    let mut metrics = vec![
        ("rel_err".to_string(), final_rel_err(&result.trace)),
        ("iterations".to_string(), result.trace.iterations as f64),
    ];
    for level in [1e-2, 1e-3] {
        let passes = first_iter_below(&result.trace, level).map_or(f64::INFINITY, |k| k as f64 * per_iter);
        metrics.push((format!("passes_to_{level:e}"), passes));
    }
    if let Some(eps) = result.trace.noise_level {
        metrics.push(("noise_level".to_string(), eps));
    }
    Ok(Outcome { trace: result.trace, metrics, images: Vec::new() })
}

/// Keeps noise streams apart from problem streams sharing a seed.
const NOISE_STREAM: u64 = 0x006e_6f69_7365;

/// Gaussian per-constraint noise scaled so that `max_i |e_i| / ||a_i|| = eps`.
pub fn scaled_noise(cs: &LinearConstraintSet, eps: f64, seed: u64) -> Result<Vec<f64>> {
    if cs.rhs().len() != cs.len() {
        return arg_err("scaled noise is defined for one scalar per constraint");
    }
    let mut rng = seeded_rng(seed);
    let g = gaussian_vec(&mut rng, cs.len());
    let level = g.iter().zip(cs.norms_sq()).map(|(e, n)| e.abs() / n.sqrt()).fold(0.0, f64::max);
    if level == 0.0 {
        return Ok(g);
    }
    Ok(g.iter().map(|e| e * eps / level).collect())
}

fn run_inpaint(spec: &InpaintSpec, solver: &SolverSpec, _seed: u64) -> Result<Outcome> {
    let mask = MaskBox { top: spec.box_top, left: spec.box_left, height: spec.box_height, width: spec.box_width };
    let board = gen_checkerboard(spec.size, spec.tile, (mask.height * mask.width > 0).then_some(mask))?;
    let cs =
        LinearConstraintSet::masked_entries(spec.size, spec.size, board.observed.clone(), board.observed_values())?;
    let reg = Regularizer::matrix_nuclear_elastic(solver.lambda)?;
    let truth = Tensor3::from_matrix(&board.image.to_matrix());
    let result = solver.run(&cs, &reg, _seed, Some(truth))?;
    let recovered = Image::from_matrix(&result.x.frontal_slice(0), board.image.i_max())?;
    let observed = Image::from_fn(spec.size, spec.size, board.image.i_max(), |r, c| {
        if mask.height * mask.width > 0
            && (mask.top..mask.top + mask.height).contains(&r)
            && (mask.left..mask.left + mask.width).contains(&c)
        {
            0.0
        } else {
            board.image.get(r, c)
        }
    })?;
    let metrics = vec![
        ("psnr".to_string(), psnr(&recovered, &board.image)?),
        ("ssim".to_string(), ssim_global(&recovered, &board.image)?),
        ("rel_err".to_string(), relerr(&recovered, &board.image)?),
        ("observed".to_string(), board.observed.len() as f64),
        ("iterations".to_string(), result.trace.iterations as f64),
    ];
    let images = vec![
        ("original".to_string(), board.image),
        ("observed".to_string(), observed),
        ("recovered".to_string(), recovered.clamp_nonnegative()),
    ];
    Ok(Outcome { trace: result.trace, metrics, images })
}

fn run_tensor(spec: &TensorSpec, solver: &SolverSpec, seed: u64) -> Result<Outcome> {
    let p = gen_lowrank_tensor_problem(spec.n1, spec.n2, spec.k, spec.n3, spec.rank, seed)?;
    let cs = LinearConstraintSet::tensor_slices(p.a, p.b)?;
    let reg = Regularizer::tensor_tnn_elastic(solver.lambda)?;
    let result = solver.run(&cs, &reg, seed, Some(p.x))?;
    let metrics = vec![
        ("rel_err".to_string(), final_rel_err(&result.trace)),
        ("iterations".to_string(), result.trace.iterations as f64),
    ];
    Ok(Outcome { trace: result.trace, metrics, images: Vec::new() })
}

fn clean_image(spec: &DeblurSpec) -> Result<Image> {
    match &spec.image {
        Some(path) => read_pgm(File::open(path)?),
        None => synthetic_house(spec.height, spec.width),
    }
}

fn run_deconvolution(
    clean: &[Image],
    size: usize,
    sigma: f64,
    pad: Option<usize>,
    solver: &SolverSpec,
    seed: u64,
) -> Result<(SolveTrace, Vec<Image>, Vec<Image>)> {
    let kernel: Matrix = gaussian_kernel(size, sigma)?;
    let blurry = clean.iter().map(|im| blur(im, &kernel)).collect::<Result<Vec<_>>>()?;
    let prob = DeconvProblem::new(&blurry, &kernel, pad.unwrap_or_else(|| default_pad(size)))?;
    let cs = LinearConstraintSet::tensor_slices(prob.a.clone(), prob.b.clone())?;
    let reg = Regularizer::tensor_tnn_elastic(solver.lambda)?;
    let result = solver.run(&cs, &reg, seed, None)?;
    let recovered = prob.recover(&result.x)?;
    Ok((result.trace, blurry, recovered))
}

fn run_deblur(spec: &DeblurSpec, solver: &SolverSpec, seed: u64) -> Result<Outcome> {
    let clean = clean_image(spec)?;
    let (trace, mut blurry, mut recovered) =
        run_deconvolution(std::slice::from_ref(&clean), spec.kernel_size, spec.kernel_sigma, spec.pad, solver, seed)?;
    let (blurry, recovered) = (blurry.remove(0), recovered.remove(0));
    let metrics = vec![
        ("psnr_blurry".to_string(), psnr(&blurry, &clean)?),
        ("psnr".to_string(), psnr(&recovered, &clean)?),
        ("ssim_blurry".to_string(), ssim_global(&blurry, &clean)?),
        ("ssim".to_string(), ssim_global(&recovered, &clean)?),
        ("rel_err".to_string(), relerr(&recovered, &clean)?),
        ("iterations".to_string(), trace.iterations as f64),
    ];
    let images =
        vec![("original".to_string(), clean), ("blurry".to_string(), blurry), ("recovered".to_string(), recovered)];
    Ok(Outcome { trace, metrics, images })
}

fn run_video(spec: &VideoSpec, solver: &SolverSpec, seed: u64) -> Result<Outcome> {
    let clean = synthetic_sequence(spec.height, spec.width, spec.frames)?;
    let (trace, blurry, recovered) =
        run_deconvolution(&clean, spec.kernel_size, spec.kernel_sigma, spec.pad, solver, seed)?;
    let mean = |xs: &[Image]| -> Result<f64> {
        let mut total = 0.0;
        for (x, c) in xs.iter().zip(&clean) {
            total += psnr(x, c)?;
        }
        Ok(total / clean.len() as f64)
    };
    let metrics = vec![
        ("psnr_blurry".to_string(), mean(&blurry)?),
        ("psnr".to_string(), mean(&recovered)?),
        ("iterations".to_string(), trace.iterations as f64),
    ];
    let mut images = Vec::new();
    for (f, (b, r)) in blurry.into_iter().zip(recovered).enumerate() {
        images.push((format!("blurry_{f:02}"), b));
        images.push((format!("recovered_{f:02}"), r));
    }
    Ok(Outcome { trace, metrics, images })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(mut s: SolverSpec, iters: usize) -> SolverSpec {
        s.max_iters = iters;
        s.trace_every = iters;
        s
    }

    #[test]
    fn small_runs_of_every_family() {
        let cases = [
            Experiment::Sparse(SparseSpec { m: 20, n: 40, sparsity: 3, noise: 0.0 }),
            Experiment::Inpaint(InpaintSpec {
                size: 16,
                tile: 4,
                box_top: 4,
                box_left: 4,
                box_height: 6,
                box_width: 6,
            }),
            Experiment::Tensor(TensorSpec { n1: 12, n2: 4, k: 3, n3: 5, rank: 1 }),
            Experiment::Deblur(DeblurSpec {
                height: 16,
                width: 16,
                kernel_size: 3,
                kernel_sigma: 1.0,
                ..Default::default()
            }),
            Experiment::Video(VideoSpec {
                height: 16,
                width: 16,
                frames: 2,
                kernel_size: 3,
                kernel_sigma: 1.0,
                pad: None,
            }),
        ];
        for e in cases {
            let mut s = e.default_solver();
            s.batch = s.batch.min(10);
            let out = e.run(&quick(s, 20), 1).unwrap();
            assert_eq!(out.trace.iterations, 20, "{}", e.name());
            assert!(out.metrics.iter().all(|(_, v)| !v.is_nan()), "{}: {}", e.name(), out.summary());
        }
    }

    #[test]
    fn noise_is_scaled_exactly() {
        let p = gen_sparse_problem(30, 10, 2, 4).unwrap();
        let cs = LinearConstraintSet::vector_rows(&p.a, &p.b).unwrap();
        let e = scaled_noise(&cs, 0.25, 9).unwrap();
        let cs = cs.with_noise(&e).unwrap();
        assert!((cs.noise_level() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn overrides_apply_field_by_field() {
        let base = Experiment::Sparse(SparseSpec::default()).default_solver();
        let o = SolverOverrides { step: Some(2.0), batch: Some(4), ..Default::default() };
        let s = base.apply(&o);
        assert_eq!((s.step, s.batch, s.lambda), (2.0, 4, base.lambda));
        assert_eq!(default_pad(9), 14);
        assert_eq!(default_pad(5), 12);
    }
}
