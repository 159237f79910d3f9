//! Two-dimensional circular convolution written as a t-product.
//!
//! An `m x n` image `X` becomes the `n x 1 x m` tensor with
//! `X(j, 0, i) = X[i, j]`, and a kernel `H`, zero-padded to `m x n`, becomes
//! the `n x n x m` tensor whose frontal slice `i` is `circ(H[i, :])`. Then
//! `A * X` is the tensor form of the circular convolution `H (*) X`.

use super::image::{pad_symmetric, Image};
use crate::error::{arg_err, dim_err, Result};
use crate::tensor::{circ, Matrix, Tensor3};

/// Builds the `n x n x m` operator of `h` for `m1 x n1` images, where
/// `m = m1 + m2 - 1` and `n = n1 + n2 - 1`.
pub fn kernel_to_tensor(h: &Matrix, m1: usize, n1: usize) -> Result<Tensor3> {
    let (m2, n2) = h.shape();
    if m1 == 0 || n1 == 0 || m2 == 0 || n2 == 0 {
        return dim_err("kernel and image dimensions must be positive");
    }
    let (m, n) = (m1 + m2 - 1, n1 + n2 - 1);
    let mut slices = Vec::with_capacity(m);
    let mut row = vec![0.0; n];
    for i in 0..m {
        row.iter_mut().for_each(|v| *v = 0.0);
        if i < m2 {
            for j in 0..n2 {
                row[j] = h[(i, j)];
            }
        }
        slices.push(circ(&row));
    }
    Tensor3::from_frontal_slices(&slices)
}

/// `X(j, 0, i) = x[i, j]`.
pub fn image_to_tensor(x: &Matrix) -> Tensor3 {
    frames_to_tensor(std::slice::from_ref(x)).expect("a single frame is always consistent")
}

/// Inverse of [`image_to_tensor`].
pub fn tensor_to_image(t: &Tensor3) -> Result<Matrix> {
    if t.dims().1 != 1 {
        return dim_err(format!("expected an n x 1 x m tensor, got {:?}", t.dims()));
    }
    Ok(tensor_to_frames(t).remove(0))
}

/// Stacks `p` equally sized `m x n` frames into an `n x p x m` tensor.
pub fn frames_to_tensor(frames: &[Matrix]) -> Result<Tensor3> {
    let Some(first) = frames.first() else {
        return dim_err("no frames supplied");
    };
    let (m, n) = first.shape();
    if frames.iter().any(|f| f.shape() != (m, n)) {
        return dim_err("frames differ in size");
    }
    Ok(Tensor3::from_fn(n, frames.len(), m, |j, f, i| frames[f][(i, j)]))
}

/// Inverse of [`frames_to_tensor`].
pub fn tensor_to_frames(t: &Tensor3) -> Vec<Matrix> {
    let (n, p, m) = t.dims();
    (0..p).map(|f| Matrix::from_fn(m, n, |i, j| t.get(j, f, i))).collect()
}

/// Direct circular convolution of `x` with `h` zero-padded to the size of `x`.
pub fn conv2_circular(h: &Matrix, x: &Matrix) -> Result<Matrix> {
    let (m, n) = x.shape();
    let (m2, n2) = h.shape();
    if m2 > m || n2 > n {
        return dim_err(format!("kernel {m2}x{n2} larger than image {m}x{n}"));
    }
    Ok(Matrix::from_fn(m, n, |i, j| {
        let mut acc = 0.0;
        for a in 0..m2 {
            for b in 0..n2 {
                acc += h[(a, b)] * x[((i + m - a) % m, (j + n - b) % n)];
            }
        }
        acc
    }))
}

/// Normalized `size x size` Gaussian kernel.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Matrix> {
    if size == 0 || size.is_multiple_of(2) {
        return arg_err(format!("kernel size must be odd, got {size}"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return arg_err(format!("kernel width must be positive, got {sigma}"));
    }
    let c = (size / 2) as f64;
    let k = Matrix::from_fn(size, size, |a, b| {
        let (da, db) = (a as f64 - c, b as f64 - c);
        (-(da * da + db * db) / (2.0 * sigma * sigma)).exp()
    });
    let total = k.sum();
    Ok(k / total)
}

fn half_widths(h: &Matrix) -> Result<(usize, usize)> {
    let (kh, kw) = h.shape();
    if kh % 2 == 0 || kw % 2 == 0 {
        return arg_err(format!("kernel dimensions must be odd, got {kh}x{kw}"));
    }
    Ok((kh / 2, kw / 2))
}

/// Blurs `clean` with the centred kernel `h`, without wrap-around: the
/// image is extended symmetrically, convolved circularly and cut back.
pub fn blur(clean: &Image, h: &Matrix) -> Result<Image> {
    let (hh, hw) = half_widths(h)?;
    let q = hh.max(hw).max(1);
    let padded = pad_symmetric(clean, q)?;
    let b = conv2_circular(h, &padded.to_matrix())?;
    let full = Image::from_matrix(&b, clean.i_max())?;
    full.window(q + hh, q + hw, clean.height(), clean.width())
}

/// A blurred image or sequence cast as `A * X = B`.
#[derive(Clone, Debug)]
pub struct DeconvProblem {
    pub a: Tensor3,
    pub b: Tensor3,
    pad: usize,
    half: (usize, usize),
    height: usize,
    width: usize,
    i_max: f64,
}

impl DeconvProblem {
    /// Extends every observed frame symmetrically by `pad` and builds the
    /// operator of `h` on the extended grid.
    pub fn new(observed: &[Image], h: &Matrix, pad: usize) -> Result<Self> {
        let half = half_widths(h)?;
        let Some(first) = observed.first() else {
            return dim_err("no frames supplied");
        };
        if pad < half.0.max(half.1) {
            return arg_err(format!("padding {pad} is smaller than the kernel half-width"));
        }
        let frames =
            observed.iter().map(|im| pad_symmetric(im, pad).map(|p| p.to_matrix())).collect::<Result<Vec<_>>>()?;
        let b = frames_to_tensor(&frames)?;
        let (m, n) = frames[0].shape();
        let a = kernel_to_tensor(h, m + 1 - h.nrows(), n + 1 - h.ncols())?;
        Ok(Self { a, b, pad, half, height: first.height(), width: first.width(), i_max: first.i_max() })
    }

    /// Cuts the frames of a solution back to the observed size, projecting
    /// intensities onto the nonnegative values.
    pub fn recover(&self, x: &Tensor3) -> Result<Vec<Image>> {
        if x.dims() != (self.a.dims().1, self.b.dims().1, self.b.dims().2) {
            return dim_err(format!("solution has shape {:?}", x.dims()));
        }
        tensor_to_frames(x)
            .iter()
            .map(|f| {
                Image::from_matrix(f, self.i_max)?
                    .window(self.pad - self.half.0, self.pad - self.half.1, self.height, self.width)
                    .map(|im| im.clamp_nonnegative())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian, seeded_rng};
    use crate::tensor::tprod_naive;

    #[test]
    fn delta_kernel_is_identity() {
        let h = Matrix::from_element(1, 1, 1.0);
        let a = kernel_to_tensor(&h, 3, 4).unwrap();
        let x = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64);
        let xt = image_to_tensor(&x);
        assert_eq!(tprod_naive(&a, &xt).unwrap(), xt);
    }

    #[test]
    fn operator_matches_direct_convolution() {
        let mut rng = seeded_rng(3);
        let h = Matrix::from_fn(3, 3, |_, _| gaussian(&mut rng));
        let x = Matrix::from_fn(8, 8, |_, _| gaussian(&mut rng));
        let a = kernel_to_tensor(&h, 6, 6).unwrap();
        let y = tensor_to_image(&tprod_naive(&a, &image_to_tensor(&x)).unwrap()).unwrap();
        let d = conv2_circular(&h, &x).unwrap();
        assert!((y - d).norm() < 1e-12);
    }

    #[test]
    fn index_mapping() {
        let x = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = image_to_tensor(&x);
        assert_eq!(t.dims(), (3, 1, 2));
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(t.get(j, 0, i), x[(i, j)]);
            }
        }
        assert_eq!(tensor_to_image(&t).unwrap(), x);
    }

    #[test]
    fn gaussian_kernel_preserves_constants() {
        let h = gaussian_kernel(9, 2.0).unwrap();
        assert!((h.sum() - 1.0).abs() < 1e-15);
        let x = Matrix::from_element(12, 12, 7.0);
        let y = conv2_circular(&h, &x).unwrap();
        assert!(y.iter().all(|v| (v - 7.0).abs() < 1e-12));
        assert!(gaussian_kernel(4, 1.0).is_err());
    }

    #[test]
    fn recover_inverts_the_padding_of_a_delta_blur() {
        let clean = Image::from_fn(6, 7, 255.0, |r, c| (r * 7 + c) as f64).unwrap();
        let mut h = Matrix::zeros(3, 3);
        h[(1, 1)] = 1.0;
        assert_eq!(blur(&clean, &h).unwrap(), clean);
        let p = DeconvProblem::new(std::slice::from_ref(&clean), &h, 3).unwrap();
        // The centred delta shifts by its half-width, which recover undoes.
        let x = tprod_naive(&p.a, &p.b).unwrap();
        let shifted = Tensor3::from_fn(x.dims().0, 1, x.dims().2, |j, _, i| {
            let (n, m) = (x.dims().0, x.dims().2);
            p.b.get((j + 1) % n, 0, (i + 1) % m)
        });
        assert!(tprod_naive(&p.a, &shifted).unwrap().sub(&p.b).unwrap().fro_norm() < 1e-12);
        assert_eq!(p.recover(&shifted).unwrap()[0], clean);
    }
}
