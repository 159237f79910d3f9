//! Seeded problem generators and synthetic test images.

use super::image::Image;
use crate::convex::{is_real_frequency, real_part, to_complex};
use crate::error::{arg_err, dim_err, Result};
use crate::linalg::svd;
use crate::random::{gaussian, seeded_rng};
use crate::tensor::{tprod_fft, CMatrix, Matrix, Spectrum, Tensor3};
use nalgebra::DMatrix;
use rand::seq::index::sample;

/// `A x = b` with a sparse `x`.
#[derive(Clone, Debug)]
pub struct SparseProblem {
    pub a: Matrix,
    pub x: Vec<f64>,
    pub b: Vec<f64>,
}

/// Gaussian `m x n` matrix and an `s`-sparse signal whose nonzeros are
/// drawn from `N(1, 1)` on a uniformly random support.
pub fn gen_sparse_problem(m: usize, n: usize, s: usize, seed: u64) -> Result<SparseProblem> {
    if m == 0 || n == 0 {
        return dim_err("problem dimensions must be positive");
    }
    if s > n {
        return arg_err(format!("sparsity {s} exceeds dimension {n}"));
    }
    let mut rng = seeded_rng(seed);
    let a = Matrix::from_fn(m, n, |_, _| gaussian(&mut rng));
    let mut x = vec![0.0; n];
    let mut support = sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    for i in support {
        x[i] = 1.0 + gaussian(&mut rng);
    }
    let b = (&a * nalgebra::DVector::from_column_slice(&x)).as_slice().to_vec();
    Ok(SparseProblem { a, x, b })
}

/// Rectangle of missing pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskBox {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl MaskBox {
    /// An 80 x 104 box in a 128 x 128 image, leaving 8064 observed pixels.
    pub const CHECKERBOARD_128: MaskBox = MaskBox { top: 24, left: 12, height: 80, width: 104 };

    fn contains(&self, r: usize, c: usize) -> bool {
        (self.top..self.top + self.height).contains(&r) && (self.left..self.left + self.width).contains(&c)
    }
}

/// Checkerboard image and the observed pixel set.
#[derive(Clone, Debug)]
pub struct Checkerboard {
    pub image: Image,
    /// Observed `(row, col)` pixels, row-major.
    pub observed: Vec<(usize, usize)>,
}

impl Checkerboard {
    /// Observed intensities in the order of `observed`.
    pub fn observed_values(&self) -> Vec<f64> {
        self.observed.iter().map(|&(r, c)| self.image.get(r, c)).collect()
    }
}

/// `size x size` board of `tile x tile` squares with intensities 0 and 1.
/// Every pixel outside `mask` is observed.
pub fn gen_checkerboard(size: usize, tile: usize, mask: Option<MaskBox>) -> Result<Checkerboard> {
    if size == 0 || tile == 0 || !size.is_multiple_of(tile) {
        return arg_err(format!("tile {tile} does not divide size {size}"));
    }
    if let Some(b) = mask {
        if b.top + b.height > size || b.left + b.width > size {
            return arg_err(format!("mask box {b:?} exceeds a {size}x{size} image"));
        }
    }
    let image = Image::from_fn(size, size, 1.0, |r, c| ((r / tile + c / tile) % 2) as f64)?;
    let observed = (0..size)
        .flat_map(|r| (0..size).map(move |c| (r, c)))
        .filter(|&(r, c)| !mask.is_some_and(|b| b.contains(r, c)))
        .collect();
    Ok(Checkerboard { image, observed })
}

/// `A * X = B` with a low tubal-rank `X`.
#[derive(Clone, Debug)]
pub struct TensorProblem {
    pub a: Tensor3,
    pub x: Tensor3,
    pub b: Tensor3,
}

/// Keeps the `r` largest singular values of every Fourier slice.
pub fn truncate_tubal_rank(x: &Tensor3, r: usize) -> Result<Tensor3> {
    let n3 = x.dims().2;
    let spec = Spectrum::from_real(x);
    let slices = spec
        .slices()
        .iter()
        .enumerate()
        .map(
            |(j, m)| {
                if is_real_frequency(j, n3) {
                    Ok(to_complex(&truncate(&real_part(m), r)?))
                } else {
                    truncate(m, r)
                }
            },
        )
        .collect::<Result<Vec<CMatrix>>>()?;
    Spectrum::from_slices(n3, slices)?.to_real()
}

fn truncate<T: crate::tensor::Scalar>(m: &DMatrix<T>, r: usize) -> Result<DMatrix<T>> {
    let d = svd(m)?;
    let k = r.min(d.s.len());
    let mut us = d.u.columns(0, k).into_owned();
    for (c, &s) in d.s.iter().take(k).enumerate() {
        us.column_mut(c).scale_mut(s);
    }
    Ok(us * d.v.columns(0, k).adjoint())
}

/// Gaussian `n1 x n2 x n3` operator and a Gaussian `n2 x k x n3` unknown cut
/// to tubal rank `r`; `B = A * X`.
pub fn gen_lowrank_tensor_problem(
    n1: usize,
    n2: usize,
    k: usize,
    n3: usize,
    r: usize,
    seed: u64,
) -> Result<TensorProblem> {
    if n1 == 0 || n2 == 0 || k == 0 || n3 == 0 {
        return dim_err("problem dimensions must be positive");
    }
    if r == 0 || r > n2.min(k) {
        return arg_err(format!("tubal rank {r} outside 1..={}", n2.min(k)));
    }
    let mut rng = seeded_rng(seed);
    let a = Tensor3::from_fn(n1, n2, n3, |_, _, _| gaussian(&mut rng));
    let full = Tensor3::from_fn(n2, k, n3, |_, _, _| gaussian(&mut rng));
    let x = if r == n2.min(k) { full } else { truncate_tubal_rank(&full, r)? };
    let b = tprod_fft(&a, &x)?;
    Ok(TensorProblem { a, x, b })
}

/// A piecewise-smooth scene in `[0, 255]`: graded sky, a house with roof,
/// windows and door, and textured ground.
pub fn synthetic_house(height: usize, width: usize) -> Result<Image> {
    let (h, w) = (height as f64, width as f64);
    Image::from_fn(height, width, 255.0, |r, c| {
        let (y, x) = (r as f64 / h, c as f64 / w);
        let mut v = 200.0 - 60.0 * y;
        if y > 0.78 {
            v = 90.0 + 25.0 * ((x * 40.0).sin() * (y * 25.0).cos());
        }
        let roof_peak = 0.22;
        let in_roof = y > roof_peak && y < 0.42 && (x - 0.5).abs() < 0.34 * (y - roof_peak) / (0.42 - roof_peak);
        if in_roof {
            v = 70.0 + 30.0 * (((y - roof_peak) * 60.0).floor() % 2.0);
        }
        if (0.42..=0.82).contains(&y) && (x - 0.5).abs() < 0.3 {
            v = 170.0 + 20.0 * x;
            let window = |x0: f64| (x - x0).abs() < 0.06 && (y - 0.55).abs() < 0.06;
            if window(0.33) || window(0.67) {
                v = 35.0;
            }
            if (x - 0.5).abs() < 0.05 && y > 0.64 {
                v = 110.0;
            }
        }
        v.clamp(0.0, 255.0)
    })
}

/// `frames` images of a slowly deforming scene of ellipses.
pub fn synthetic_sequence(height: usize, width: usize, frames: usize) -> Result<Vec<Image>> {
    if frames == 0 {
        return dim_err("at least one frame is required");
    }
    (0..frames)
        .map(|f| {
            let phase = f as f64 / frames.max(2) as f64;
            Image::from_fn(height, width, 255.0, |r, c| {
                let (y, x) = (2.0 * r as f64 / height as f64 - 1.0, 2.0 * c as f64 / width as f64 - 1.0);
                let ellipse =
                    |cx: f64, cy: f64, ax: f64, ay: f64| ((x - cx) / ax).powi(2) + ((y - cy) / ay).powi(2) < 1.0;
                let mut v = 20.0;
                if ellipse(0.0, 0.0, 0.8, 0.9) {
                    v = 120.0;
                }
                if ellipse(0.0, 0.0, 0.7 - 0.1 * phase, 0.8 - 0.05 * phase) {
                    v = 160.0;
                }
                if ellipse(-0.3, -0.1, 0.15 + 0.1 * phase, 0.3) || ellipse(0.3, -0.1, 0.25 - 0.1 * phase, 0.3) {
                    v = 60.0;
                }
                if ellipse(0.0, 0.45, 0.2, 0.1 + 0.05 * phase) {
                    v = 230.0;
                }
                v
            })
        })
        .collect()
}

/// Numerical rank of `m` using the singular value threshold of
/// [`crate::linalg::sigma_extremes`].
pub fn numerical_rank(m: &Matrix) -> Result<usize> {
    let d = svd(m)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * smax;
    Ok(d.s.iter().filter(|&&s| s > tol).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::tsvd;
    use nalgebra::ComplexField;

    fn modulus_max(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.modulus()).fold(0.0, f64::max)
    }

    #[test]
    fn sparse_problem_shapes_and_consistency() {
        let p = gen_sparse_problem(200, 1000, 10, 7).unwrap();
        assert_eq!(p.a.shape(), (200, 1000));
        assert_eq!(p.x.iter().filter(|v| **v != 0.0).count(), 10);
        let b = &p.a * nalgebra::DVector::from_column_slice(&p.x);
        assert_eq!(b.as_slice(), &p.b[..]);
        let z = gen_sparse_problem(5, 8, 0, 1).unwrap();
        assert!(z.x.iter().chain(&z.b).all(|v| *v == 0.0));
        assert!(gen_sparse_problem(5, 8, 9, 1).is_err());
    }

    #[test]
    fn checkerboard_mask_and_rank() {
        let cb = gen_checkerboard(128, 16, Some(MaskBox::CHECKERBOARD_128)).unwrap();
        assert_eq!(cb.observed.len(), 8064);
        assert_eq!(numerical_rank(&cb.image.to_matrix()).unwrap(), 2);
        assert_eq!(gen_checkerboard(8, 2, None).unwrap().observed.len(), 64);
        assert!(gen_checkerboard(10, 3, None).is_err());
        let bad = MaskBox { top: 5, left: 0, height: 4, width: 2 };
        assert!(gen_checkerboard(8, 2, Some(bad)).is_err());
    }

    #[test]
    fn lowrank_tensor_has_bounded_tubal_rank() {
        let p = gen_lowrank_tensor_problem(8, 5, 4, 6, 2, 11).unwrap();
        let t = tsvd(&p.x).unwrap();
        let spec = Spectrum::from_real(&t.s);
        for s in spec.slices() {
            let scale = modulus_max(s);
            let nonzero = (0..s.nrows().min(s.ncols())).filter(|&k| s[(k, k)].modulus() > 1e-10 * scale).count();
            assert!(nonzero <= 2);
        }
        let full = gen_lowrank_tensor_problem(8, 5, 4, 6, 4, 11).unwrap();
        let mut rng = seeded_rng(11);
        let _ = Tensor3::from_fn(8, 5, 6, |_, _, _| gaussian(&mut rng));
        let raw = Tensor3::from_fn(5, 4, 6, |_, _, _| gaussian(&mut rng));
        assert_eq!(full.x, raw);
        assert!(tprod_fft(&p.a, &p.x).unwrap().sub(&p.b).unwrap().fro_norm() == 0.0);
    }

    #[test]
    fn synthetic_images_in_range() {
        let h = synthetic_house(64, 64).unwrap();
        assert!(h.pixels().iter().all(|v| (0.0..=255.0).contains(v)));
        let s = synthetic_sequence(32, 32, 4).unwrap();
        assert_eq!(s.len(), 4);
        assert_ne!(s[0], s[3]);
    }
}
