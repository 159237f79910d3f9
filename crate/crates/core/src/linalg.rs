//! Dense SVD and thresholding operators.
//!
//! The SVD calls LAPACK's divide-and-conquer driver (`dgesdd` / `zgesdd`)
//! and returns an economy factorization in descending order with a
//! deterministic phase for every singular pair.

use crate::error::{arg_err, Error, Result};
use crate::tensor::Scalar;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::os::raw::{c_char, c_int};

/// LAPACK economy SVD for one scalar type. `a` is overwritten.
pub trait Gesdd: Sized {
    /// Returns LAPACK's `info`.
    fn gesdd(m: usize, n: usize, a: &mut [Self], s: &mut [f64], u: &mut [Self], vt: &mut [Self]) -> i32;
}

const JOBZ: &[u8] = b"S";

impl Gesdd for f64 {
    fn gesdd(m: usize, n: usize, a: &mut [f64], s: &mut [f64], u: &mut [f64], vt: &mut [f64]) -> i32 {
        let k = m.min(n);
        let (mi, ni, ki) = (m as c_int, n as c_int, k as c_int);
        let mut iwork = vec![0 as c_int; 8 * k];
        let mut info = 0;
        let mut query = 0.0;
        unsafe {
            lapack_sys::dgesdd_(
                JOBZ.as_ptr() as *const c_char,
                &mi,
                &ni,
                a.as_mut_ptr(),
                &mi,
                s.as_mut_ptr(),
                u.as_mut_ptr(),
                &mi,
                vt.as_mut_ptr(),
                &ki,
                &mut query,
                &-1,
                iwork.as_mut_ptr(),
                &mut info,
            );
        }
        if info != 0 {
            return info;
        }
        let lwork = query as c_int;
        let mut work = vec![0.0; lwork.max(1) as usize];
        unsafe {
            lapack_sys::dgesdd_(
                JOBZ.as_ptr() as *const c_char,
                &mi,
                &ni,
                a.as_mut_ptr(),
                &mi,
                s.as_mut_ptr(),
                u.as_mut_ptr(),
                &mi,
                vt.as_mut_ptr(),
                &ki,
                work.as_mut_ptr(),
                &lwork,
                iwork.as_mut_ptr(),
                &mut info,
            );
        }
        info
    }
}

impl Gesdd for Complex64 {
    fn gesdd(m: usize, n: usize, a: &mut [Self], s: &mut [f64], u: &mut [Self], vt: &mut [Self]) -> i32 {
        let k = m.min(n);
        let big = m.max(n);
        let (mi, ni, ki) = (m as c_int, n as c_int, k as c_int);
        let mut iwork = vec![0 as c_int; 8 * k];
        let mut rwork = vec![0.0; (5 * k * k + 7 * k).max(2 * big * k + 2 * k * k + k)];
        let mut info = 0;
        let mut query = Complex64::new(0.0, 0.0);
        unsafe {
            lapack_sys::zgesdd_(
                JOBZ.as_ptr() as *const c_char,
                &mi,
                &ni,
                a.as_mut_ptr() as *mut _,
                &mi,
                s.as_mut_ptr(),
                u.as_mut_ptr() as *mut _,
                &mi,
                vt.as_mut_ptr() as *mut _,
                &ki,
                &mut query as *mut Complex64 as *mut _,
                &-1,
                rwork.as_mut_ptr(),
                iwork.as_mut_ptr(),
                &mut info,
            );
        }
        if info != 0 {
            return info;
        }
        let lwork = query.re as c_int;
        let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
        unsafe {
            lapack_sys::zgesdd_(
                JOBZ.as_ptr() as *const c_char,
                &mi,
                &ni,
                a.as_mut_ptr() as *mut _,
                &mi,
                s.as_mut_ptr(),
                u.as_mut_ptr() as *mut _,
                &mi,
                vt.as_mut_ptr() as *mut _,
                &ki,
                work.as_mut_ptr() as *mut _,
                &lwork,
                rwork.as_mut_ptr(),
                iwork.as_mut_ptr(),
                &mut info,
            );
        }
        info
    }
}

/// Economy SVD `m = u * diag(s) * v^H`.
#[derive(Clone, Debug)]
pub struct Svd<T: Scalar> {
    /// `rows x r` with orthonormal columns, `r = min(rows, cols)`.
    pub u: DMatrix<T>,
    /// Singular values, descending.
    pub s: Vec<f64>,
    /// `cols x r` with orthonormal columns.
    pub v: DMatrix<T>,
}

impl<T: Scalar> Svd<T> {
    pub fn reconstruct(&self) -> DMatrix<T> {
        let mut us = self.u.clone();
        for (k, &s) in self.s.iter().enumerate() {
            us.column_mut(k).scale_mut(s);
        }
        us * self.v.adjoint()
    }
}

/// Economy SVD with a fixed phase convention: the largest-magnitude entry of
/// each left singular vector (lowest index on ties) is real and
/// nonnegative, and the right vector carries the same phase.
pub fn svd<T: Scalar>(m: &DMatrix<T>) -> Result<Svd<T>> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return arg_err("svd of an empty matrix");
    }
    if m.iter().any(|z| !z.real().is_finite() || !z.imaginary().is_finite()) {
        return Err(Error::Numerical("svd input contains non-finite entries".into()));
    }
    let r = rows.min(cols);
    if m.iter().all(|z| z.is_zero()) {
        return Ok(Svd { u: DMatrix::identity(rows, r), s: vec![0.0; r], v: DMatrix::identity(cols, r) });
    }
    let mut a = m.as_slice().to_vec();
    let mut s = vec![0.0; r];
    let mut u = DMatrix::<T>::zeros(rows, r);
    let mut vt = DMatrix::<T>::zeros(r, cols);
    let info = T::gesdd(rows, cols, &mut a, &mut s, u.as_mut_slice(), vt.as_mut_slice());
    if info > 0 {
        return Err(Error::SvdNonConvergence { rows, cols });
    }
    if info < 0 {
        return Err(Error::Numerical(format!("gesdd rejected argument {}", -info)));
    }
    let mut v = vt.adjoint();
    for k in 0..r {
        let mut best = 0;
        let mut best_mag = -1.0;
        for p in 0..rows {
            let mag = u[(p, k)].modulus();
            if mag > best_mag {
                best_mag = mag;
                best = p;
            }
        }
        if best_mag > 0.0 {
            let phase = u[(best, k)].unscale(best_mag).conjugate();
            for p in 0..rows {
                u[(p, k)] *= phase;
            }
            for p in 0..cols {
                v[(p, k)] *= phase;
            }
            u[(best, k)] = T::from_real(u[(best, k)].modulus());
        }
    }
    Ok(Svd { u, s, v })
}

/// Scalar shrinkage `sign(x) max(|x| - lambda, 0)`.
#[inline]
pub fn shrink(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Entrywise soft thresholding.
pub fn soft_threshold(x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    Ok(x.iter().map(|&v| shrink(v, lambda)).collect())
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return arg_err(format!("threshold must be a finite nonnegative number, got {lambda}"));
    }
    Ok(())
}

/// Singular value thresholding `U max(S - lambda, 0) V^H`.
pub fn svt<T: Scalar>(m: &DMatrix<T>, lambda: f64) -> Result<DMatrix<T>> {
    svt_with_nuclear(m, lambda).map(|(x, _)| x)
}

/// [`svt`] that also returns the nuclear norm of the result.
pub fn svt_with_nuclear<T: Scalar>(m: &DMatrix<T>, lambda: f64) -> Result<(DMatrix<T>, f64)> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        let nuc = if m.iter().all(|z| z.is_zero()) { 0.0 } else { svd(m)?.s.iter().sum() };
        return Ok((m.clone(), nuc));
    }
    let dec = svd(m)?;
    let keep = dec.s.iter().take_while(|&&s| s > lambda).count();
    if keep == 0 {
        return Ok((DMatrix::zeros(m.nrows(), m.ncols()), 0.0));
    }
    let mut us = dec.u.columns(0, keep).into_owned();
    let mut nuc = 0.0;
    for k in 0..keep {
        let s = dec.s[k] - lambda;
        nuc += s;
        us.column_mut(k).scale_mut(s);
    }
    Ok((us * dec.v.columns(0, keep).adjoint(), nuc))
}

/// Largest and smallest nonzero singular value. Singular values at or below
/// `max(rows, cols) * eps * sigma_max` count as zero.
pub fn sigma_extremes<T: Scalar>(m: &DMatrix<T>) -> Result<(f64, f64)> {
    let dec = svd(m)?;
    let smax = dec.s[0];
    if smax == 0.0 {
        return arg_err("sigma_extremes of the zero matrix");
    }
    let cut = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * smax;
    let smin = dec.s.iter().copied().filter(|&s| s > cut).fold(smax, f64::min);
    Ok((smax, smin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn orthonormal_defect<T: Scalar>(q: &DMatrix<T>) -> f64 {
        let g = q.adjoint() * q;
        (g - DMatrix::<T>::identity(q.ncols(), q.ncols())).norm()
    }

    #[test]
    fn diagonal_example() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        let d = svd(&m).unwrap();
        assert_eq!(d.s, vec![4.0, 3.0]);
        assert!((d.reconstruct() - &m).norm() < 1e-14);
        assert_eq!(d.u[(1, 0)], 1.0);
        assert!((d.v[(1, 0)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_uses_identity_factors() {
        let d = svd(&DMatrix::<f64>::zeros(3, 2)).unwrap();
        assert_eq!(d.s, vec![0.0, 0.0]);
        assert_eq!(d.u, DMatrix::identity(3, 2));
        assert_eq!(d.v, DMatrix::identity(2, 2));
    }

    #[test]
    fn rejects_nonfinite_input() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(svd(&m), Err(Error::Numerical(_))));
    }

    #[test]
    fn complex_phase_convention() {
        let m = DMatrix::from_fn(3, 4, |i, j| Complex64::new((i + 2 * j) as f64 - 2.0, (i * j) as f64 - 1.0));
        let d = svd(&m).unwrap();
        assert!((d.reconstruct() - &m).norm() < 1e-13 * m.norm());
        for k in 0..3 {
            let col = d.u.column(k);
            let (p, _) = col.iter().enumerate().fold(
                (0, -1.0),
                |(bp, bm), (p, z)| {
                    if z.norm() > bm {
                        (p, z.norm())
                    } else {
                        (bp, bm)
                    }
                },
            );
            assert!(col[p].im.abs() < 1e-15 && col[p].re > 0.0);
        }
    }

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(&[3.0, -0.5, -2.0], 1.0).unwrap(), vec![2.0, 0.0, -1.0]);
        assert!(soft_threshold(&[1.0], -0.1).is_err());
        assert!(soft_threshold(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn svt_of_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let (x, nuc) = svt_with_nuclear(&m, 2.0).unwrap();
        assert!((x - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() < 1e-15);
        assert!((nuc - 1.0).abs() < 1e-15);
        assert!(svt(&m, -1.0).is_err());
        assert_eq!(svt(&m, 0.0).unwrap(), m);
    }

    #[test]
    fn sigma_extremes_skips_numerical_zeros() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let (smax, smin) = sigma_extremes(&m).unwrap();
        assert!((smax - (70.0f64).sqrt()).abs() < 1e-12);
        assert_eq!(smin, smax);
        assert!(sigma_extremes(&DMatrix::<f64>::zeros(2, 2)).is_err());
    }

    fn cmat(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
        proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), rows * cols)
            .prop_map(move |v| DMatrix::from_iterator(rows, cols, v.into_iter().map(|(a, b)| Complex64::new(a, b))))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn svd_factorization_invariants((r, c) in (1usize..7, 1usize..7), seed in any::<u64>()) {
            let mut s = seed;
            let m = DMatrix::from_fn(r, c, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                Complex64::new(((s >> 40) as f64) / 1e7 - 0.8, ((s >> 20) & 0xfff) as f64 / 4096.0 - 0.5)
            });
            let d = svd(&m).unwrap();
            prop_assert!((d.reconstruct() - &m).norm() <= 1e-12 * (1.0 + m.norm()));
            prop_assert!(orthonormal_defect(&d.u) < 1e-12);
            prop_assert!(orthonormal_defect(&d.v) < 1e-12);
            prop_assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(d.s.iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn svd_is_deterministic(m in cmat(4, 3)) {
            let a = svd(&m).unwrap();
            let b = svd(&m).unwrap();
            prop_assert_eq!(a.u, b.u);
            prop_assert_eq!(a.s, b.s);
            prop_assert_eq!(a.v, b.v);
        }

        #[test]
        fn svt_is_prox_of_nuclear_norm(m in cmat(3, 4), lambda in 0.0..6.0f64) {
            // Optimality: the result beats random nearby candidates on
            // lambda * ||X||_* + 0.5 * ||X - M||^2.
            let x = svt(&m, lambda).unwrap();
            let obj = |y: &DMatrix<Complex64>| {
                lambda * svd(y).unwrap().s.iter().sum::<f64>() + 0.5 * (y - &m).norm_squared()
            };
            let fx = obj(&x);
            for t in 1..6 {
                let p = DMatrix::from_fn(3, 4, |i, j| Complex64::new(((i * 7 + j * 3 + t) % 5) as f64 - 2.0, ((i + j * t) % 3) as f64 - 1.0));
                let y = &x + p * Complex64::new(0.05, 0.0);
                prop_assert!(obj(&y) >= fx - 1e-10);
            }
        }
    }
}
