//! Shared iteration loop and the per-representation state it drives.
//!
//! t-product systems keep the dual and primal iterates as stored Fourier
//! slices (real slices when `n3 = 1`), so a single-constraint step costs
//! one pass over the unknown and needs no transforms. Entry-wise systems
//! keep plain matrices.

use super::constraints::{LinearConstraintSet, System};
use super::control::IndexSource;
use super::trace::{SolveTrace, StopReason, TraceRecord};
use super::{SolveConfig, SolveResult};
use crate::convex::Regularizer;
use crate::error::{dim_err, Error, Result};
use crate::tensor::{Matrix, Scalar, Spectrum, Tensor3};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::time::Instant;

/// How the step size is distributed over a batch.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Scaling {
    /// `t / ||A(i)||^2` per constraint.
    PerConstraint(f64),
    /// `t / sum_{i in batch} ||A(i)||^2`.
    Slab(f64),
    /// `t`, for full-gradient steps.
    Plain(f64),
}

pub(crate) trait Backend {
    type State: Clone;
    fn encode(&self, t: &Tensor3) -> Result<Self::State>;
    /// Applies one update with the given per-constraint scales and returns
    /// the summed squared residuals of the constraints before the update.
    fn step(&mut self, batch: &[usize], scales: &[f64]) -> f64;
    /// Recomputes the primal iterate from the dual one; returns `h(X)`.
    fn prox(&mut self, reg: &Regularizer) -> Result<f64>;
    fn snapshot(&self) -> Self::State;
    fn norm_sq(&self, s: &Self::State) -> f64;
    /// `||X - s||^2`.
    fn dist_sq(&self, s: &Self::State) -> f64;
    /// `<Z - X, s - X>`.
    fn dual_gap_inner(&self, s: &Self::State) -> f64;
    /// `||A(X) - B||^2`.
    fn residual_sq(&self) -> f64;
    fn is_finite(&self) -> bool;
    fn x(&self) -> Result<Tensor3>;
    fn z(&self) -> Result<Tensor3>;
}

/// Representation of stored frequency slices for one scalar field.
pub(crate) trait Field: Scalar {
    fn encode(t: &Tensor3) -> Vec<DMatrix<Self>>;
    fn decode(v: &[DMatrix<Self>], n3: usize) -> Result<Tensor3>;
    fn prox(reg: &Regularizer, z: &[DMatrix<Self>], n3: usize) -> Result<(Vec<DMatrix<Self>>, f64)>;
    /// `sum_l x[l] a[l]`.
    fn dot(x: &[Self], a: &[Self]) -> Self;
    /// `y[l] += c conj(a[l])`.
    fn axpy_conj(y: &mut [Self], c: Self, a: &[Self]);
}

impl Field for f64 {
    fn encode(t: &Tensor3) -> Vec<Matrix> {
        vec![t.frontal_slice(0)]
    }

    fn decode(v: &[Matrix], _n3: usize) -> Result<Tensor3> {
        Ok(Tensor3::from_matrix(&v[0]))
    }

    fn prox(reg: &Regularizer, z: &[Matrix], _n3: usize) -> Result<(Vec<Matrix>, f64)> {
        if matches!(reg, Regularizer::SquaredFro) {
            return Ok((z.to_vec(), 0.0));
        }
        let (x, h) = reg.prox(&Tensor3::from_matrix(&z[0]))?;
        Ok((vec![x.frontal_slice(0)], h))
    }

    fn dot(x: &[f64], a: &[f64]) -> f64 {
        x.iter().zip(a).map(|(p, q)| p * q).sum()
    }

    fn axpy_conj(y: &mut [f64], c: f64, a: &[f64]) {
        for (v, w) in y.iter_mut().zip(a) {
            *v += c * w;
        }
    }
}

impl Field for Complex64 {
    fn encode(t: &Tensor3) -> Vec<DMatrix<Complex64>> {
        Spectrum::from_real(t).slices().to_vec()
    }

    fn decode(v: &[DMatrix<Complex64>], n3: usize) -> Result<Tensor3> {
        Spectrum::from_slices(n3, v.to_vec())?.to_real()
    }

    fn prox(reg: &Regularizer, z: &[DMatrix<Complex64>], n3: usize) -> Result<(Vec<DMatrix<Complex64>>, f64)> {
        if matches!(reg, Regularizer::SquaredFro) {
            return Ok((z.to_vec(), 0.0));
        }
        let spec = Spectrum::from_slices(n3, z.to_vec())?;
        let (x, h) = if reg.is_spectral() {
            reg.prox_spectrum(&spec)?
        } else {
            let (x, h) = reg.prox(&spec.to_real()?)?;
            (Spectrum::from_real(&x), h)
        };
        Ok((x.slices().to_vec(), h))
    }

    fn dot(x: &[Complex64], a: &[Complex64]) -> Complex64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (p, q) in x.iter().zip(a) {
            re += p.re * q.re - p.im * q.im;
            im += p.re * q.im + p.im * q.re;
        }
        Complex64::new(re, im)
    }

    fn axpy_conj(y: &mut [Complex64], c: Complex64, a: &[Complex64]) {
        for (v, w) in y.iter_mut().zip(a) {
            v.re += c.re * w.re + c.im * w.im;
            v.im += c.im * w.re - c.re * w.im;
        }
    }
}

/// State of a t-product system over stored frequencies.
pub(crate) struct TProd<T: Field> {
    n2: usize,
    k: usize,
    n3: usize,
    weights: Vec<f64>,
    /// Per frequency, `F(A)_j` transposed (`n2 x n1`): column `i` is row `i`.
    at: Vec<DMatrix<T>>,
    /// Per frequency, `F(B)_j` transposed (`k x n1`).
    bt: Vec<DMatrix<T>>,
    z: Vec<DMatrix<T>>,
    /// `None` while the proximal map is the identity and `X = Z`.
    x: Option<Vec<DMatrix<T>>>,
    res: Vec<T>,
}

impl<T: Field> TProd<T> {
    pub(crate) fn new(a: &Tensor3, b: &Tensor3) -> Self {
        let (_, n2, n3) = a.dims();
        let k = b.dims().1;
        let at: Vec<_> = T::encode(a).into_iter().map(|m| m.transpose()).collect();
        let bt: Vec<_> = T::encode(b).into_iter().map(|m| m.transpose()).collect();
        let nf = at.len();
        let weights = (0..nf).map(|j| if j == 0 || 2 * j == n3 { 1.0 } else { 2.0 }).collect();
        let z = (0..nf).map(|_| DMatrix::zeros(n2, k)).collect();
        Self { n2, k, n3, weights, at, bt, z, x: None, res: Vec::new() }
    }

    fn xs(&self) -> &[DMatrix<T>] {
        self.x.as_deref().unwrap_or(&self.z)
    }

    fn weighted<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        (0..self.weights.len()).map(|j| self.weights[j] * f(j)).sum::<f64>() / self.n3 as f64
    }
}

impl<T: Field> Backend for TProd<T> {
    type State = Vec<DMatrix<T>>;

    fn encode(&self, t: &Tensor3) -> Result<Self::State> {
        Ok(T::encode(t))
    }

    fn step(&mut self, batch: &[usize], scales: &[f64]) -> f64 {
        let Self { n2, k, n3, weights, at, bt, z, x, res } = self;
        let (n2, k, nf) = (*n2, *k, weights.len());
        res.clear();
        res.resize(batch.len() * nf * k, T::zero());
        let mut total = 0.0;
        let xv: &[DMatrix<T>] = x.as_deref().unwrap_or(z);
        for (bi, &i) in batch.iter().enumerate() {
            for j in 0..nf {
                let a = &at[j].as_slice()[i * n2..(i + 1) * n2];
                let b = &bt[j].as_slice()[i * k..(i + 1) * k];
                let xs = xv[j].as_slice();
                let r = &mut res[(bi * nf + j) * k..(bi * nf + j + 1) * k];
                let mut sq = 0.0;
                for c in 0..k {
                    r[c] = b[c] - T::dot(&xs[c * n2..(c + 1) * n2], a);
                    sq += r[c].modulus_squared();
                }
                total += weights[j] * sq;
            }
        }
        for (bi, &i) in batch.iter().enumerate() {
            let s = scales[bi];
            for j in 0..nf {
                let a = &at[j].as_slice()[i * n2..(i + 1) * n2];
                let r = &res[(bi * nf + j) * k..(bi * nf + j + 1) * k];
                let zs = z[j].as_mut_slice();
                for c in 0..k {
                    T::axpy_conj(&mut zs[c * n2..(c + 1) * n2], r[c].scale(s), a);
                }
            }
        }
        total / *n3 as f64
    }

    fn prox(&mut self, reg: &Regularizer) -> Result<f64> {
        if reg.prox_is_identity() {
            self.x = None;
            return Ok(0.0);
        }
        let (x, h) = T::prox(reg, &self.z, self.n3)?;
        self.x = Some(x);
        Ok(h)
    }

    fn snapshot(&self) -> Self::State {
        self.xs().to_vec()
    }

    fn norm_sq(&self, s: &Self::State) -> f64 {
        self.weighted(|j| s[j].norm_squared())
    }

    fn dist_sq(&self, s: &Self::State) -> f64 {
        let x = self.xs();
        self.weighted(|j| (&x[j] - &s[j]).norm_squared())
    }

    fn dual_gap_inner(&self, s: &Self::State) -> f64 {
        let x = self.xs();
        self.weighted(|j| {
            let u = &self.z[j] - &x[j];
            let v = &s[j] - &x[j];
            u.dotc(&v).real()
        })
    }

    fn residual_sq(&self) -> f64 {
        let x = self.xs();
        self.weighted(|j| (self.at[j].tr_mul(&x[j]) - self.bt[j].transpose()).norm_squared())
    }

    fn is_finite(&self) -> bool {
        self.xs().iter().chain(&self.z).all(|m| m.iter().all(|v| v.real().is_finite() && v.imaginary().is_finite()))
    }

    fn x(&self) -> Result<Tensor3> {
        T::decode(self.xs(), self.n3)
    }

    fn z(&self) -> Result<Tensor3> {
        T::decode(&self.z, self.n3)
    }
}

enum EntryCoefs {
    Dense(Vec<Matrix>),
    Mask(Vec<(usize, usize)>),
}

/// State of an entry-wise matrix system.
pub(crate) struct Entries {
    coefs: EntryCoefs,
    b: Vec<f64>,
    z: Matrix,
    x: Matrix,
    res: Vec<f64>,
}

impl Entries {
    fn residual(&self, i: usize) -> f64 {
        match &self.coefs {
            EntryCoefs::Dense(a) => self.b[i] - a[i].dot(&self.x),
            EntryCoefs::Mask(idx) => self.b[i] - self.x[idx[i]],
        }
    }
}

impl Backend for Entries {
    type State = Matrix;

    fn encode(&self, t: &Tensor3) -> Result<Matrix> {
        Ok(t.frontal_slice(0))
    }

    fn step(&mut self, batch: &[usize], scales: &[f64]) -> f64 {
        let mut res = std::mem::take(&mut self.res);
        res.clear();
        res.extend(batch.iter().map(|&i| self.residual(i)));
        for ((&i, &r), &s) in batch.iter().zip(&res).zip(scales) {
            match &self.coefs {
                EntryCoefs::Dense(a) => {
                    for (zv, av) in self.z.iter_mut().zip(a[i].iter()) {
                        *zv += s * r * av;
                    }
                }
                EntryCoefs::Mask(idx) => self.z[idx[i]] += s * r,
            }
        }
        let total = res.iter().map(|r| r * r).sum();
        self.res = res;
        total
    }

    fn prox(&mut self, reg: &Regularizer) -> Result<f64> {
        let (x, h) = f64::prox(reg, std::slice::from_ref(&self.z), 1)?;
        self.x = x.into_iter().next().expect("one slice");
        Ok(h)
    }

    fn snapshot(&self) -> Matrix {
        self.x.clone()
    }

    fn norm_sq(&self, s: &Matrix) -> f64 {
        s.norm_squared()
    }

    fn dist_sq(&self, s: &Matrix) -> f64 {
        (&self.x - s).norm_squared()
    }

    fn dual_gap_inner(&self, s: &Matrix) -> f64 {
        (&self.z - &self.x).dot(&(s - &self.x))
    }

    fn residual_sq(&self) -> f64 {
        (0..self.b.len()).map(|i| self.residual(i).powi(2)).sum()
    }

    fn is_finite(&self) -> bool {
        self.x.iter().chain(self.z.iter()).all(|v| v.is_finite())
    }

    fn x(&self) -> Result<Tensor3> {
        Ok(Tensor3::from_matrix(&self.x))
    }

    fn z(&self) -> Result<Tensor3> {
        Ok(Tensor3::from_matrix(&self.z))
    }
}

/// Runs the iteration on the representation suited to the system.
pub(crate) fn dispatch(
    cs: &LinearConstraintSet,
    reg: &Regularizer,
    src: &mut dyn IndexSource,
    scaling: Scaling,
    cfg: &SolveConfig,
    warnings: Vec<String>,
) -> Result<SolveResult> {
    let rhs = cs.observed_rhs();
    match &cs.system {
        System::TProduct { a, .. } if a.dims().2 == 1 => {
            run(TProd::<f64>::new(a, &rhs), cs, reg, src, scaling, cfg, warnings)
        }
        System::TProduct { a, .. } => run(TProd::<Complex64>::new(a, &rhs), cs, reg, src, scaling, cfg, warnings),
        System::Entries { rows, cols, a, .. } => {
            let be = Entries {
                coefs: EntryCoefs::Dense(a.clone()),
                b: rhs.into_vec(),
                z: Matrix::zeros(*rows, *cols),
                x: Matrix::zeros(*rows, *cols),
                res: Vec::new(),
            };
            run(be, cs, reg, src, scaling, cfg, warnings)
        }
        System::Masked { rows, cols, idx, .. } => {
            let be = Entries {
                coefs: EntryCoefs::Mask(idx.clone()),
                b: rhs.into_vec(),
                z: Matrix::zeros(*rows, *cols),
                x: Matrix::zeros(*rows, *cols),
                res: Vec::new(),
            };
            run(be, cs, reg, src, scaling, cfg, warnings)
        }
    }
}

fn run<B: Backend>(
    mut be: B,
    cs: &LinearConstraintSet,
    reg: &Regularizer,
    src: &mut dyn IndexSource,
    scaling: Scaling,
    cfg: &SolveConfig,
    warnings: Vec<String>,
) -> Result<SolveResult> {
    let start = Instant::now();
    let reference = match &cfg.reference {
        Some(y) => {
            if y.dims() != cs.unknown_dims() {
                return dim_err(format!("reference {:?} vs unknown {:?}", y.dims(), cs.unknown_dims()));
            }
            Some((be.encode(y)?, reg.nonsmooth_value(y)?, y.fro_norm()))
        }
        None => None,
    };
    let every = cfg.trace_every.max(1);
    let mut h = 0.0;
    let record = |be: &B, iter: usize, index: Option<usize>, h: f64, rel_change, step_sq| -> TraceRecord {
        let (rel_err, bregman) = match &reference {
            Some((y, hy, ynorm)) => {
                let d2 = be.dist_sq(y);
                let rel = if *ynorm > 0.0 { Some(d2.sqrt() / ynorm) } else { None };
                let breg = 0.5 * d2 + (hy - h) - be.dual_gap_inner(y);
                (rel, Some(breg))
            }
            None => (None, None),
        };
        TraceRecord {
            iter,
            index,
            residual: cfg.record_residual.then(|| be.residual_sq().sqrt()),
            rel_change,
            rel_err,
            bregman,
            step_residual_sq: step_sq,
        }
    };
    let mut records = vec![record(&be, 0, None, h, None, None)];
    let mut batch = Vec::new();
    let mut scales = Vec::new();
    let mut stop = StopReason::MaxIters;
    let mut iterations = 0;
    for k in 0..cfg.max_iters {
        src.next_batch(&mut batch);
        scales.clear();
        match scaling {
            Scaling::PerConstraint(t) => scales.extend(batch.iter().map(|&i| t / cs.norm_sq(i))),
            Scaling::Slab(t) => {
                let total: f64 = batch.iter().map(|&i| cs.norm_sq(i)).sum();
                scales.resize(batch.len(), t / total);
            }
            Scaling::Plain(t) => scales.resize(batch.len(), t),
        }
        let check = (k + 1) % every == 0 || k + 1 == cfg.max_iters;
        let prev = check.then(|| be.snapshot());
        let step_sq = be.step(&batch, &scales);
        if !step_sq.is_finite() {
            return Err(Error::Diverged { iter: k + 1 });
        }
        h = be.prox(reg)?;
        iterations = k + 1;
        if check {
            if !be.is_finite() {
                return Err(Error::Diverged { iter: k + 1 });
            }
            let rel_change = prev.and_then(|p| {
                let n = be.norm_sq(&p);
                (n > 0.0).then(|| (be.dist_sq(&p) / n).sqrt())
            });
            records.push(record(&be, k + 1, batch.first().copied(), h, rel_change, Some(step_sq)));
            if cfg.tol > 0.0 && rel_change.is_some_and(|r| r < cfg.tol) {
                stop = StopReason::Tolerance;
                break;
            }
        }
    }
    let noise_level = cs.has_noise().then(|| cs.noise_level());
    Ok(SolveResult {
        x: be.x()?,
        z: be.z()?,
        trace: SolveTrace {
            records,
            stop,
            iterations,
            warnings,
            noise_level,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    })
}
