use super::{CMatrix, ComplexTensor3, Tensor3};
use crate::error::{dim_err, Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Imaginary residue tolerated when returning to the real domain, relative
/// to the norm of the result.
const IMAG_RESIDUE_TOL: f64 = 1e-8;

/// In-place DFT of every tube of a slice-major buffer. Forward is
/// unnormalized; inverse carries the `1/n3` factor.
fn transform_tubes(data: &mut [Complex64], plane: usize, n3: usize, inverse: bool) {
    if n3 == 1 {
        return;
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); data.len()];
    for k in 0..n3 {
        for t in 0..plane {
            buf[t * n3 + k] = data[t + plane * k];
        }
    }
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let fft = if inverse { p.plan_fft_inverse(n3) } else { p.plan_fft_forward(n3) };
        fft.process(&mut buf);
    });
    let scale = if inverse { 1.0 / n3 as f64 } else { 1.0 };
    for k in 0..n3 {
        for t in 0..plane {
            data[t + plane * k] = buf[t * n3 + k] * scale;
        }
    }
}

/// Unnormalized DFT along the third mode.
pub fn fft_tubes(t: &Tensor3) -> ComplexTensor3 {
    let mut c = t.to_complex();
    let (n1, n2, n3) = c.dims();
    transform_tubes(c.as_mut_slice(), n1 * n2, n3, false);
    c
}

/// Inverse DFT along the third mode, including the `1/n3` factor.
pub fn ifft_tubes(t: &ComplexTensor3) -> ComplexTensor3 {
    let mut c = t.clone();
    let (n1, n2, n3) = c.dims();
    transform_tubes(c.as_mut_slice(), n1 * n2, n3, true);
    c
}

/// Inverse DFT followed by a check that the result is real.
pub fn ifft_tubes_real(t: &ComplexTensor3) -> Result<Tensor3> {
    real_part_checked(&ifft_tubes(t))
}

fn real_part_checked(c: &ComplexTensor3) -> Result<Tensor3> {
    let (n1, n2, n3) = c.dims();
    let re: Vec<f64> = c.as_slice().iter().map(|z| z.re).collect();
    let im_sq: f64 = c.as_slice().iter().map(|z| z.im * z.im).sum();
    let out = Tensor3::new(n1, n2, n3, re)?;
    let norm = out.fro_norm();
    if im_sq.sqrt() > IMAG_RESIDUE_TOL * norm {
        return Err(Error::Numerical(format!(
            "inverse transform left an imaginary residue {:.3e} against result norm {:.3e}",
            im_sq.sqrt(),
            norm
        )));
    }
    Ok(out)
}

/// Fourier-domain frontal slices of a real tensor. Only frequencies
/// `0..=n3/2` are stored; the rest are their complex conjugates.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    n1: usize,
    n2: usize,
    n3: usize,
    slices: Vec<CMatrix>,
}

impl Spectrum {
    /// Number of stored frequencies for a tube length `n3`.
    pub fn stored(n3: usize) -> usize {
        n3 / 2 + 1
    }

    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        let slices = (0..Self::stored(n3)).map(|_| CMatrix::zeros(n1, n2)).collect();
        Self { n1, n2, n3, slices }
    }

    pub fn from_real(t: &Tensor3) -> Self {
        let (n1, n2, n3) = t.dims();
        let full = fft_tubes(t);
        let slices = (0..Self::stored(n3)).map(|k| full.frontal_slice(k)).collect();
        Self { n1, n2, n3, slices }
    }

    /// Builds a spectrum from stored slices `0..=n3/2`.
    pub fn from_slices(n3: usize, slices: Vec<CMatrix>) -> Result<Self> {
        if slices.len() != Self::stored(n3) {
            return dim_err(format!("{} slices for tube length {n3}", slices.len()));
        }
        let (n1, n2) = slices[0].shape();
        if slices.iter().any(|s| s.shape() != (n1, n2)) {
            return dim_err("spectrum slices differ in shape");
        }
        Ok(Self { n1, n2, n3, slices })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    pub fn slices(&self) -> &[CMatrix] {
        &self.slices
    }

    pub fn slices_mut(&mut self) -> &mut [CMatrix] {
        &mut self.slices
    }

    /// Multiplicity of stored frequency `j` in the full spectrum.
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || 2 * j == self.n3 {
            1.0
        } else {
            2.0
        }
    }

    /// All `n3` frequency slices, filling the upper half by conjugation.
    pub fn full(&self) -> ComplexTensor3 {
        let mut out = ComplexTensor3::zeros(self.n1, self.n2, self.n3);
        for k in 0..self.n3 {
            let s =
                if k < self.slices.len() { self.slices[k].clone() } else { self.slices[self.n3 - k].map(|z| z.conj()) };
            out.set_frontal_slice(k, &s).expect("slice shape");
        }
        out
    }

    pub fn to_real(&self) -> Result<Tensor3> {
        ifft_tubes_real(&self.full())
    }

    pub(crate) fn to_real_scaled(&self, inverse_scale: f64) -> Result<Tensor3> {
        let full = self.full();
        let (n1, n2, n3) = full.dims();
        let mut c = full.clone();
        transform_tubes(c.as_mut_slice(), n1 * n2, n3, true);
        let c = c.scale(inverse_scale * n3 as f64);
        real_part_checked(&c)
    }

    /// Squared Frobenius norm of the real tensor this spectrum represents.
    pub fn norm_sq(&self) -> f64 {
        let s: f64 = self.slices.iter().enumerate().map(|(j, m)| self.weight(j) * m.norm_squared()).sum();
        s / self.n3 as f64
    }

    /// Real inner product of the represented real tensors.
    pub fn inner(&self, other: &Spectrum) -> Result<f64> {
        if self.dims() != other.dims() {
            return dim_err(format!("spectrum inner: {:?} vs {:?}", self.dims(), other.dims()));
        }
        let s: f64 =
            self.slices.iter().zip(&other.slices).enumerate().map(|(j, (a, b))| self.weight(j) * a.dotc(b).re).sum();
        Ok(s / self.n3 as f64)
    }

    /// Squared norm of the difference of two represented tensors.
    pub fn dist_sq(&self, other: &Spectrum) -> f64 {
        let s: f64 = self
            .slices
            .iter()
            .zip(&other.slices)
            .enumerate()
            .map(|(j, (a, b))| {
                let d: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
                self.weight(j) * d
            })
            .sum();
        s / self.n3 as f64
    }

    /// Slice-wise product, the Fourier image of the t-product.
    pub fn mul(&self, other: &Spectrum) -> Result<Spectrum> {
        if self.n2 != other.n1 || self.n3 != other.n3 {
            return dim_err(format!("t-product of {:?} with {:?}", self.dims(), other.dims()));
        }
        let slices = self.slices.iter().zip(&other.slices).map(|(a, b)| a * b).collect();
        Ok(Spectrum { n1: self.n1, n2: other.n2, n3: self.n3, slices })
    }

    pub fn is_finite(&self) -> bool {
        self.slices.iter().all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

/// t-product computed slice-wise in the Fourier domain.
pub fn tprod_fft(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    check_tprod_dims(a, b)?;
    Spectrum::from_real(a).mul(&Spectrum::from_real(b))?.to_real()
}

/// [`tprod_fft`] with a caller-chosen inverse scale in place of `1/n3`.
/// Only useful as a deliberately broken variant for negative controls.
#[doc(hidden)]
pub fn tprod_fft_with_inverse_scale(a: &Tensor3, b: &Tensor3, inverse_scale: f64) -> Result<Tensor3> {
    check_tprod_dims(a, b)?;
    Spectrum::from_real(a).mul(&Spectrum::from_real(b))?.to_real_scaled(inverse_scale)
}

fn check_tprod_dims(a: &Tensor3, b: &Tensor3) -> Result<()> {
    let (n1, n2, n3) = a.dims();
    let (m2, k, m3) = b.dims();
    if n2 != m2 || n3 != m3 {
        return dim_err(format!("t-product of {n1}x{n2}x{n3} with {m2}x{k}x{m3}"));
    }
    Ok(())
}
