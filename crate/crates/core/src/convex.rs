//! Strongly convex regularizers `f = h + 1/2 ||.||_F^2` and the tensor SVD.
//!
//! Every regularizer here is 1-strongly convex, so the gradient of its
//! conjugate is the proximal map of the nonsmooth part `h`.
//!
//! The DFT along tubes is unnormalized, so `||X||_F^2 = (1/n3) sum_j
//! ||F(X)_j||_F^2`. For the tensor nuclear norm regularizer `h` is taken as
//! `lambda * tnn(X) / n3`; with that scaling its proximal map thresholds
//! every Fourier slice at exactly `lambda`, which is what [`stt`] does.

use crate::error::{arg_err, dim_err, Result};
use crate::linalg::{check_lambda, shrink, svd, svt_with_nuclear, Svd};
use crate::tensor::{CMatrix, Matrix, Spectrum, Tensor3};
use num_complex::Complex64;

/// Kind and weight of a regularizer. All kinds have strong convexity 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer {
    /// `1/2 ||x||^2`.
    SquaredFro,
    /// `lambda ||x||_1 + 1/2 ||x||^2`.
    ElasticL1 { lambda: f64 },
    /// `lambda ||X||_* + 1/2 ||X||^2` on matrices.
    MatrixNuclearElastic { lambda: f64 },
    /// `lambda tnn(X) / n3 + 1/2 ||X||^2` on third-order tensors.
    TensorTnnElastic { lambda: f64 },
}

impl Regularizer {
    pub fn squared_fro() -> Self {
        Regularizer::SquaredFro
    }

    pub fn elastic_l1(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Regularizer::ElasticL1 { lambda })
    }

    pub fn matrix_nuclear_elastic(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Regularizer::MatrixNuclearElastic { lambda })
    }

    pub fn tensor_tnn_elastic(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Regularizer::TensorTnnElastic { lambda })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Regularizer::SquaredFro => 0.0,
            Regularizer::ElasticL1 { lambda }
            | Regularizer::MatrixNuclearElastic { lambda }
            | Regularizer::TensorTnnElastic { lambda } => lambda,
        }
    }

    /// Strong convexity modulus `alpha_f`.
    pub fn strong_convexity(&self) -> f64 {
        1.0
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::SquaredFro => "squared_fro",
            Regularizer::ElasticL1 { .. } => "elastic_l1",
            Regularizer::MatrixNuclearElastic { .. } => "matrix_nuclear_elastic",
            Regularizer::TensorTnnElastic { .. } => "tensor_tnn_elastic",
        }
    }

    /// True when the proximal map acts slice-wise on the tube spectrum.
    pub fn is_spectral(&self) -> bool {
        match self {
            Regularizer::SquaredFro | Regularizer::TensorTnnElastic { .. } => true,
            Regularizer::MatrixNuclearElastic { .. } => true,
            Regularizer::ElasticL1 { lambda } => *lambda == 0.0,
        }
    }

    fn check_shape(&self, x: &Tensor3) -> Result<()> {
        if let Regularizer::MatrixNuclearElastic { .. } = self {
            if x.dims().2 != 1 {
                return dim_err(format!("matrix nuclear norm applied to a {:?} tensor", x.dims()));
            }
        }
        Ok(())
    }

    /// Nonsmooth part `h(x)`.
    pub fn nonsmooth_value(&self, x: &Tensor3) -> Result<f64> {
        self.check_shape(x)?;
        Ok(match *self {
            Regularizer::SquaredFro => 0.0,
            Regularizer::ElasticL1 { lambda } => lambda * x.as_slice().iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::MatrixNuclearElastic { lambda } | Regularizer::TensorTnnElastic { lambda } => {
                if lambda == 0.0 {
                    0.0
                } else {
                    lambda * tnn(x)? / x.dims().2 as f64
                }
            }
        })
    }

    /// `f(x)`.
    pub fn value(&self, x: &Tensor3) -> Result<f64> {
        Ok(self.nonsmooth_value(x)? + 0.5 * x.fro_norm_sq())
    }

    /// `grad f*(z)`, the proximal map of `h` at `z`.
    pub fn grad_conj(&self, z: &Tensor3) -> Result<Tensor3> {
        self.prox(z).map(|(x, _)| x)
    }

    /// `grad f*(z)` together with `h` evaluated there.
    pub fn prox(&self, z: &Tensor3) -> Result<(Tensor3, f64)> {
        self.check_shape(z)?;
        match *self {
            Regularizer::SquaredFro => Ok((z.clone(), 0.0)),
            Regularizer::ElasticL1 { lambda } => {
                let x = z.map(|v| shrink(v, lambda));
                let h = lambda * x.as_slice().iter().map(|v| v.abs()).sum::<f64>();
                Ok((x, h))
            }
            Regularizer::MatrixNuclearElastic { lambda } => {
                let (m, nuc) = svt_with_nuclear(&z.frontal_slice(0), lambda)?;
                Ok((Tensor3::from_matrix(&m), lambda * nuc))
            }
            Regularizer::TensorTnnElastic { lambda } => {
                let (s, t) = stt_spectrum(&Spectrum::from_real(z), lambda)?;
                Ok((s.to_real()?, lambda * t / z.dims().2 as f64))
            }
        }
    }

    /// True when `grad f*` is the identity map.
    pub fn prox_is_identity(&self) -> bool {
        self.lambda() == 0.0
    }

    /// Proximal map applied to a tube spectrum. Only for spectral kinds.
    pub fn prox_spectrum(&self, z: &Spectrum) -> Result<(Spectrum, f64)> {
        let n3 = z.dims().2 as f64;
        match *self {
            Regularizer::SquaredFro => Ok((z.clone(), 0.0)),
            Regularizer::ElasticL1 { lambda: 0.0 } => Ok((z.clone(), 0.0)),
            Regularizer::MatrixNuclearElastic { lambda } | Regularizer::TensorTnnElastic { lambda } => {
                if lambda == 0.0 {
                    return Ok((z.clone(), 0.0));
                }
                let (s, t) = stt_spectrum(z, lambda)?;
                Ok((s, lambda * t / n3))
            }
            Regularizer::ElasticL1 { .. } => arg_err("elastic_l1 has no slice-wise spectral proximal map"),
        }
    }

    /// `h` evaluated on a tube spectrum. Only for spectral kinds.
    pub fn nonsmooth_value_spectrum(&self, x: &Spectrum) -> Result<f64> {
        match *self {
            Regularizer::SquaredFro | Regularizer::ElasticL1 { lambda: 0.0 } => Ok(0.0),
            Regularizer::MatrixNuclearElastic { lambda } | Regularizer::TensorTnnElastic { lambda } => {
                if lambda == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(lambda * tnn_spectrum(x)? / x.dims().2 as f64)
                }
            }
            Regularizer::ElasticL1 { .. } => arg_err("elastic_l1 is not evaluated on spectra"),
        }
    }

    /// `f*(z) = <z, x> - f(x)` with `x = grad f*(z)`.
    pub fn conj_value(&self, z: &Tensor3) -> Result<f64> {
        let (x, h) = self.prox(z)?;
        Ok(z.inner(&x)? - h - 0.5 * x.fro_norm_sq())
    }

    /// Bregman distance `D_f^z(grad f*(z), y) = f(y) + f*(z) - <z, y>`.
    pub fn bregman(&self, z: &Tensor3, y: &Tensor3) -> Result<f64> {
        let (x, hx) = self.prox(z)?;
        let hy = self.nonsmooth_value(y)?;
        bregman_parts(z, &x, hx, y, hy)
    }
}

/// `f(y) - f(x) - <z, y - x>` arranged to limit cancellation.
pub(crate) fn bregman_parts(z: &Tensor3, x: &Tensor3, hx: f64, y: &Tensor3, hy: f64) -> Result<f64> {
    let d = y.sub(x)?;
    let zx = z.sub(x)?;
    Ok(0.5 * d.fro_norm_sq() + (hy - hx) - zx.inner(&d)?)
}

pub(crate) fn is_real_frequency(j: usize, n3: usize) -> bool {
    j == 0 || 2 * j == n3
}

pub(crate) fn real_part(m: &CMatrix) -> Matrix {
    m.map(|z| z.re)
}

pub(crate) fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Singular value thresholding of every stored Fourier slice. Returns the
/// thresholded spectrum and its tensor nuclear norm.
pub fn stt_spectrum(z: &Spectrum, lambda: f64) -> Result<(Spectrum, f64)> {
    check_lambda(lambda)?;
    let n3 = z.dims().2;
    let mut out = Vec::with_capacity(z.slices().len());
    let mut total = 0.0;
    for (j, s) in z.slices().iter().enumerate() {
        let (m, nuc) = if is_real_frequency(j, n3) {
            let (m, nuc) = svt_with_nuclear(&real_part(s), lambda)?;
            (to_complex(&m), nuc)
        } else {
            svt_with_nuclear(s, lambda)?
        };
        total += z.weight(j) * nuc;
        out.push(m);
    }
    Ok((Spectrum::from_slices(n3, out)?, total))
}

/// Sum of nuclear norms of all `n3` Fourier slices.
pub fn tnn_spectrum(x: &Spectrum) -> Result<f64> {
    let n3 = x.dims().2;
    let mut total = 0.0;
    for (j, s) in x.slices().iter().enumerate() {
        let nuc: f64 =
            if is_real_frequency(j, n3) { svd(&real_part(s))?.s.iter().sum() } else { svd(s)?.s.iter().sum() };
        total += x.weight(j) * nuc;
    }
    Ok(total)
}

/// Tensor singular value thresholding: SVT of every Fourier slice of `x`
/// at threshold `lambda`.
pub fn stt(x: &Tensor3, lambda: f64) -> Result<Tensor3> {
    stt_spectrum(&Spectrum::from_real(x), lambda)?.0.to_real()
}

/// Tensor nuclear norm `sum_j ||F(X)_j||_*` over all `n3` frequencies.
pub fn tnn(x: &Tensor3) -> Result<f64> {
    tnn_spectrum(&Spectrum::from_real(x))
}

/// t-SVD factors, `X = U * S * V^T` in the t-product sense, with
/// `r = min(n1, n2)` lateral slices.
#[derive(Clone, Debug)]
pub struct Tsvd {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
}

/// t-SVD computed slice-wise in the Fourier domain.
pub fn tsvd(x: &Tensor3) -> Result<Tsvd> {
    let (n1, n2, n3) = x.dims();
    let r = n1.min(n2);
    let spec = Spectrum::from_real(x);
    let (mut us, mut ss, mut vs) = (Vec::new(), Vec::new(), Vec::new());
    for (j, m) in spec.slices().iter().enumerate() {
        let d: Svd<Complex64> = if is_real_frequency(j, n3) {
            let d = svd(&real_part(m))?;
            Svd { u: to_complex(&d.u), s: d.s, v: to_complex(&d.v) }
        } else {
            svd(m)?
        };
        let mut sm = CMatrix::zeros(r, r);
        for (k, &s) in d.s.iter().enumerate() {
            sm[(k, k)] = Complex64::new(s, 0.0);
        }
        us.push(d.u);
        ss.push(sm);
        vs.push(d.v);
    }
    Ok(Tsvd {
        u: Spectrum::from_slices(n3, us)?.to_real()?,
        s: Spectrum::from_slices(n3, ss)?.to_real()?,
        v: Spectrum::from_slices(n3, vs)?.to_real()?,
    })
}
