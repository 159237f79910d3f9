//! Third-order tensors and the t-product algebra.
//!
//! A tensor of size `n1 x n2 x n3` is stored frontal slice after frontal
//! slice, each slice column-major, so entry `(i, j, k)` lives at
//! `i + n1 * (j + n2 * k)`. A frontal slice is therefore one contiguous
//! column-major `n1 x n2` block, the same layout `nalgebra` uses.

mod fft;
pub mod io;

pub use fft::{fft_tubes, ifft_tubes, ifft_tubes_real, tprod_fft, tprod_fft_with_inverse_scale, Spectrum};

use crate::error::{dim_err, Result};
use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

/// Real dense matrix.
pub type Matrix = DMatrix<f64>;
/// Complex dense matrix.
pub type CMatrix = DMatrix<Complex64>;

/// Scalar field of a tensor: `f64` or `Complex64`.
pub trait Scalar: ComplexField<RealField = f64> + Copy + crate::linalg::Gesdd {}
impl Scalar for f64 {}
impl Scalar for Complex64 {}

/// Dense third-order tensor over a scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<T>,
}

/// Real third-order tensor.
pub type Tensor3 = Tensor<f64>;
/// Complex third-order tensor, used for Fourier-domain slices.
pub type ComplexTensor3 = Tensor<Complex64>;

impl<T: Scalar> Tensor<T> {
    pub fn new(n1: usize, n2: usize, n3: usize, data: Vec<T>) -> Result<Self> {
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return dim_err(format!("tensor dimensions must be positive, got {n1}x{n2}x{n3}"));
        }
        if data.len() != n1 * n2 * n3 {
            return dim_err(format!("{} values supplied for a {n1}x{n2}x{n3} tensor", data.len()));
        }
        Ok(Self { n1, n2, n3, data })
    }

    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        assert!(n1 > 0 && n2 > 0 && n3 > 0, "tensor dimensions must be positive");
        Self { n1, n2, n3, data: vec![T::zero(); n1 * n2 * n3] }
    }

    pub fn from_fn(n1: usize, n2: usize, n3: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut t = Self::zeros(n1, n2, n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    t.data[i + n1 * (j + n2 * k)] = f(i, j, k);
                }
            }
        }
        t
    }

    /// Builds a tensor from `n3` frontal slices of equal shape.
    pub fn from_frontal_slices(slices: &[DMatrix<T>]) -> Result<Self> {
        let Some(first) = slices.first() else {
            return dim_err("at least one frontal slice is required");
        };
        let (n1, n2) = first.shape();
        let mut data = Vec::with_capacity(n1 * n2 * slices.len());
        for s in slices {
            if s.shape() != (n1, n2) {
                return dim_err(format!("slice of shape {:?} does not match {n1}x{n2}", s.shape()));
            }
            data.extend_from_slice(s.as_slice());
        }
        Self::new(n1, n2, slices.len(), data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.n1 && j < self.n2 && k < self.n3);
        i + self.n1 * (j + self.n2 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Frontal slice `k` as an `n1 x n2` matrix.
    pub fn frontal_slice(&self, k: usize) -> DMatrix<T> {
        let len = self.n1 * self.n2;
        DMatrix::from_column_slice(self.n1, self.n2, &self.data[k * len..(k + 1) * len])
    }

    pub fn set_frontal_slice(&mut self, k: usize, m: &DMatrix<T>) -> Result<()> {
        if m.shape() != (self.n1, self.n2) {
            return dim_err(format!("slice shape {:?} vs tensor {}x{}", m.shape(), self.n1, self.n2));
        }
        let len = self.n1 * self.n2;
        self.data[k * len..(k + 1) * len].copy_from_slice(m.as_slice());
        Ok(())
    }

    pub fn frontal_slices(&self) -> Vec<DMatrix<T>> {
        (0..self.n3).map(|k| self.frontal_slice(k)).collect()
    }

    /// Horizontal slice `i`, a `1 x n2 x n3` tensor.
    pub fn horizontal_slice(&self, i: usize) -> Self {
        Self::from_fn(1, self.n2, self.n3, |_, j, k| self.get(i, j, k))
    }

    /// Tube fiber `(i, j, :)`.
    pub fn tube(&self, i: usize, j: usize) -> Vec<T> {
        (0..self.n3).map(|k| self.get(i, j, k)).collect()
    }

    /// Stacks the frontal slices vertically into an `n1*n3 x n2` matrix.
    pub fn unfold(&self) -> DMatrix<T> {
        let (n1, n2, n3) = self.dims();
        DMatrix::from_fn(n1 * n3, n2, |r, j| self.get(r % n1, j, r / n1))
    }

    /// Inverse of [`Tensor::unfold`].
    pub fn fold(m: &DMatrix<T>, n1: usize, n2: usize, n3: usize) -> Result<Self> {
        if m.shape() != (n1 * n3, n2) {
            return dim_err(format!("cannot fold a {:?} matrix into {n1}x{n2}x{n3}", m.shape()));
        }
        Ok(Self::from_fn(n1, n2, n3, |i, j, k| m[(k * n1 + i, j)]))
    }

    /// Block circulant matrix: block `(p, q)` is frontal slice `(p - q) mod n3`.
    pub fn bcirc(&self) -> DMatrix<T> {
        let (n1, n2, n3) = self.dims();
        DMatrix::from_fn(n1 * n3, n2 * n3, |r, c| {
            let (p, i) = (r / n1, r % n1);
            let (q, j) = (c / n2, c % n2);
            self.get(i, j, (p + n3 - q) % n3)
        })
    }

    /// Tensor transpose: slice 0 is the conjugate transpose of slice 0 and
    /// slice `k` that of slice `n3 - k`.
    pub fn transpose_t(&self) -> Self {
        let (n1, n2, n3) = self.dims();
        Self::from_fn(n2, n1, n3, |i, j, k| self.get(j, i, (n3 - k) % n3).conjugate())
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.dims() == other.dims()
    }

    fn check_same(&self, other: &Self, op: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            dim_err(format!("{op}: {:?} vs {:?}", self.dims(), other.dims()))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "add")?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "sub")?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn scale(&self, s: f64) -> Self {
        let data = self.data.iter().map(|&a| a.scale(s)).collect();
        Self { data, ..*self }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        self.check_same(other, "axpy")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b.scale(s);
        }
        Ok(())
    }

    /// Real inner product `Re sum conj(a) b`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same(other, "inner")?;
        Ok(self.data.iter().zip(&other.data).map(|(&a, &b)| (a.conjugate() * b).real()).sum())
    }

    pub fn fro_norm_sq(&self) -> f64 {
        self.data.iter().map(|a| a.modulus_squared()).sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.fro_norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.real().is_finite() && a.imaginary().is_finite())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        Tensor { n1: self.n1, n2: self.n2, n3: self.n3, data: self.data.iter().map(|&a| f(a)).collect() }
    }
}

impl Tensor3 {
    pub fn to_complex(&self) -> ComplexTensor3 {
        self.map(|a| Complex64::new(a, 0.0))
    }

    /// Drops unit dimensions, keeping the remaining ones in order.
    pub fn squeeze(&self) -> Squeezed {
        let dims = [self.n1, self.n2, self.n3];
        let kept: Vec<usize> = dims.iter().copied().filter(|&d| d != 1).collect();
        match kept.len() {
            0 => Squeezed::Scalar(self.data[0]),
            1 => Squeezed::Vector(self.data.clone()),
            2 => Squeezed::Matrix(Matrix::from_column_slice(kept[0], kept[1], &self.data)),
            _ => Squeezed::Tensor(self.clone()),
        }
    }

    /// Wraps a matrix as an `n1 x n2 x 1` tensor.
    pub fn from_matrix(m: &Matrix) -> Self {
        Self { n1: m.nrows(), n2: m.ncols(), n3: 1, data: m.as_slice().to_vec() }
    }

    /// Wraps a vector as an `n x 1 x 1` tensor.
    pub fn from_vector(v: &[f64]) -> Self {
        Self { n1: v.len(), n2: 1, n3: 1, data: v.to_vec() }
    }
}

/// Result of [`Tensor3::squeeze`].
#[derive(Clone, Debug, PartialEq)]
pub enum Squeezed {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Matrix),
    Tensor(Tensor3),
}

/// Circulant matrix whose first column is `v`; column `c` is `v` shifted
/// down cyclically by `c`.
pub fn circ<T: Scalar>(v: &[T]) -> DMatrix<T> {
    let n = v.len();
    DMatrix::from_fn(n, n, |r, c| v[(r + n - c) % n])
}

/// Reference t-product `fold(bcirc(a) * unfold(b))`.
pub fn tprod_naive<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n1, n2, n3) = a.dims();
    let (m2, k, m3) = b.dims();
    if n2 != m2 || n3 != m3 {
        return dim_err(format!("t-product of {n1}x{n2}x{n3} with {m2}x{k}x{m3}"));
    }
    Tensor::fold(&(a.bcirc() * b.unfold()), n1, k, n3)
}
