//! Algebraic identities of the t-product and the tensor thresholding
//! operator, checked on random small tensors. Backs the `selftest` command.
//!
//! Every check draws fresh shapes with all dimensions at most
//! [`MAX_DIM`] and reports the worst scaled discrepancy.

use crate::convex::{stt, tsvd};
use crate::error::Result;
use crate::linalg::svt;
use crate::random::{gaussian_vec, seeded_rng, Rng64};
use crate::solvers::LinearConstraintSet;
use crate::tensor::{fft_tubes, tprod_fft, tprod_fft_with_inverse_scale, tprod_naive, Tensor3};
use rand::Rng;

/// Scaled tolerance shared by all identities.
pub const TOL: f64 = 1e-10;
pub const MAX_DIM: usize = 8;
pub const DEFAULT_INSTANCES: usize = 100;

/// Outcome of one identity over all instances.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub instances: usize,
    /// Worst scaled discrepancy.
    pub error: f64,
    pub passed: bool,
}

/// Suite options.
#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    pub instances: usize,
    /// Routes the t-products under test through an inverse FFT scaled by
    /// `1/n3^2`. Used to show that the suite catches a broken transform.
    pub corrupt_fft: bool,
}

impl SuiteOptions {
    pub fn new(seed: u64) -> Self {
        Self { seed, instances: DEFAULT_INSTANCES, corrupt_fft: false }
    }
}

fn random(rng: &mut Rng64, n1: usize, n2: usize, n3: usize) -> Tensor3 {
    Tensor3::new(n1, n2, n3, gaussian_vec(rng, n1 * n2 * n3)).expect("sizes match")
}

fn dim(rng: &mut Rng64) -> usize {
    rng.random_range(1..=MAX_DIM)
}

fn rel(a: &Tensor3, b: &Tensor3) -> Result<f64> {
    Ok(a.sub(b)?.fro_norm() / b.fro_norm().max(f64::MIN_POSITIVE))
}

struct Suite {
    opts: SuiteOptions,
    rng: Rng64,
}

impl Suite {
    fn tprod(&self, a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
        if self.opts.corrupt_fft {
            let n3 = a.dims().2 as f64;
            tprod_fft_with_inverse_scale(a, b, 1.0 / (n3 * n3))
        } else {
            tprod_fft(a, b)
        }
    }

    /// Runs `f` on `instances` random `(n1, n2, n3, k)` shapes.
    fn check(&mut self, name: &'static str, f: impl Fn(&Self, &mut Rng64, [usize; 4]) -> Result<f64>) -> Result<Check> {
        let mut rng = self.rng.clone();
        let mut error: f64 = 0.0;
        for _ in 0..self.opts.instances {
            let dims = [dim(&mut rng), dim(&mut rng), dim(&mut rng), dim(&mut rng)];
            let e = f(self, &mut rng, dims)?;
            error = if e.is_nan() { f64::INFINITY } else { error.max(e) };
        }
        self.rng = rng;
        Ok(Check { name, instances: self.opts.instances, error, passed: error <= TOL })
    }
}

/// Runs every identity.
pub fn run_suite(opts: SuiteOptions) -> Result<Vec<Check>> {
    let mut s = Suite { opts, rng: seeded_rng(opts.seed) };
    Ok(vec![
        s.check("tprod_fft_matches_naive", |s, rng, [n1, n2, n3, k]| {
            let (a, b) = (random(rng, n1, n2, n3), random(rng, n2, k, n3));
            rel(&s.tprod(&a, &b)?, &tprod_naive(&a, &b)?)
        })?,
        s.check("adjoint_identity", |s, rng, [n1, n2, n3, k]| {
            // <A * X, Y> = <X, A^T * Y>
            let (a, x, y) = (random(rng, n1, n2, n3), random(rng, n2, k, n3), random(rng, n1, k, n3));
            let lhs = s.tprod(&a, &x)?.inner(&y)?;
            let rhs = x.inner(&s.tprod(&a.transpose_t(), &y)?)?;
            Ok((lhs - rhs).abs() / (a.fro_norm() * x.fro_norm() * y.fro_norm()))
        })?,
        s.check("product_norm_bound", |s, rng, [n1, n2, n3, k]| {
            let (a, x) = (random(rng, n1, n2, n3), random(rng, n2, k, n3));
            let bound = (n3 as f64).sqrt() * a.fro_norm() * x.fro_norm();
            Ok((s.tprod(&a, &x)?.fro_norm() - bound).max(0.0) / bound)
        })?,
        s.check("frequency_factorization", |s, rng, [n1, n2, n3, k]| {
            // Each Fourier slice of A * B is the product of the slices.
            let (a, b) = (random(rng, n1, n2, n3), random(rng, n2, k, n3));
            let (fa, fb, fc) = (fft_tubes(&a), fft_tubes(&b), fft_tubes(&s.tprod(&a, &b)?));
            let mut worst: f64 = 0.0;
            for j in 0..n3 {
                let expect = fa.frontal_slice(j) * fb.frontal_slice(j);
                let scale = fa.frontal_slice(j).norm() * fb.frontal_slice(j).norm();
                worst = worst.max((fc.frontal_slice(j) - expect).norm() / scale.max(f64::MIN_POSITIVE));
            }
            Ok(worst)
        })?,
        s.check("slice_norm_additivity", |_, rng, [n1, n2, n3, _]| {
            let a = random(rng, n1, n2, n3);
            let sum: f64 = (0..n1).map(|i| a.horizontal_slice(i).fro_norm_sq()).sum();
            Ok((sum - a.fro_norm_sq()).abs() / a.fro_norm_sq())
        })?,
        s.check("stt_is_slicewise_svt", |_, rng, [n1, n2, n3, _]| {
            let x = random(rng, n1, n2, n3);
            let lam = rng.random_range(0.0..2.0);
            let fx = fft_tubes(&x);
            let fy = fft_tubes(&stt(&x, lam)?);
            let mut worst: f64 = 0.0;
            for j in 0..n3 {
                let expect = svt(&fx.frontal_slice(j), lam)?;
                worst = worst.max((fy.frontal_slice(j) - expect).norm() / fx.frontal_slice(j).norm());
            }
            Ok(worst)
        })?,
        s.check("bcirc_is_multiplicative", |s, rng, [n1, n2, n3, k]| {
            let (a, b) = (random(rng, n1, n2, n3), random(rng, n2, k, n3));
            let rhs = a.bcirc() * b.bcirc();
            Ok((s.tprod(&a, &b)?.bcirc() - &rhs).norm() / (a.bcirc().norm() * b.bcirc().norm()))
        })?,
        s.check("tprod_is_associative", |s, rng, [n1, n2, n3, k]| {
            let (a, b, c) = (random(rng, n1, n2, n3), random(rng, n2, k, n3), random(rng, k, n1, n3));
            let lhs = s.tprod(&s.tprod(&a, &b)?, &c)?;
            let rhs = tprod_naive(&a, &tprod_naive(&b, &c)?)?;
            Ok(lhs.sub(&rhs)?.fro_norm() / (n3 as f64 * a.fro_norm() * b.fro_norm() * c.fro_norm()))
        })?,
        s.check("tsvd_reconstructs", |s, rng, [n1, n2, n3, _]| {
            let a = random(rng, n1, n2, n3);
            let f = tsvd(&a)?;
            rel(&s.tprod(&s.tprod(&f.u, &f.s)?, &f.v.transpose_t())?, &a)
        })?,
        s.check("constraint_adjoint", |_, rng, [n1, n2, n3, k]| {
            let cs = LinearConstraintSet::tensor_slices(random(rng, n1, n2, n3), random(rng, n1, k, n3))?;
            let (x, y) = (random(rng, n2, k, n3), random(rng, n1, k, n3));
            let lhs = cs.apply(&x)?.inner(&y)?;
            let rhs = x.inner(&cs.adjoint(&y)?)?;
            Ok((lhs - rhs).abs() / (cs.coefficients().expect("tensor system").fro_norm() * x.fro_norm() * y.fro_norm()))
        })?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_suite(SuiteOptions { instances: 30, ..SuiteOptions::new(3) }).unwrap() {
            assert!(c.passed, "{} error {:e}", c.name, c.error);
        }
    }

    #[test]
    fn corrupted_transform_is_caught() {
        let opts = SuiteOptions { instances: 30, corrupt_fft: true, ..SuiteOptions::new(3) };
        let failed: Vec<_> = run_suite(opts).unwrap().into_iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert!(failed.contains(&"frequency_factorization"), "{failed:?}");
        assert!(failed.contains(&"tprod_fft_matches_naive"));
        assert!(!failed.contains(&"slice_norm_additivity"));
    }

    #[test]
    fn reports_are_reproducible() {
        let opts = SuiteOptions { instances: 10, ..SuiteOptions::new(11) };
        assert_eq!(run_suite(opts).unwrap(), run_suite(opts).unwrap());
    }
}
