use super::constraints::LinearConstraintSet;
use crate::convex::Regularizer;
use crate::error::{arg_err, Result};
use crate::tensor::{fft_tubes, Tensor3};

/// `r_ij = ||F(A(i))_j||^2 / ||F(A(i))||^2` for every horizontal slice `i`
/// and frequency `j`, as an `n1 x n3` row-major table.
pub fn frequency_energy_ratios(a: &Tensor3) -> Vec<Vec<f64>> {
    let (n1, n2, n3) = a.dims();
    let f = fft_tubes(a);
    (0..n1)
        .map(|i| {
            let e: Vec<f64> = (0..n3).map(|j| (0..n2).map(|l| f.get(i, l, j).norm_sqr()).sum()).collect();
            let total: f64 = e.iter().sum();
            e.iter().map(|v| v / total).collect()
        })
        .collect()
}

/// `beta = min_{i,j} t r_ij (1 - t r_ij)` over frequencies carrying energy.
/// Requires `0 < t < 2 / n3`.
pub fn compute_beta(a: &Tensor3, t: f64) -> Result<f64> {
    let n3 = a.dims().2;
    if !(t > 0.0 && t < 2.0 / n3 as f64) {
        return arg_err(format!("step {t} outside (0, 2/{n3})"));
    }
    if (0..a.dims().0).any(|i| a.horizontal_slice(i).fro_norm_sq() == 0.0) {
        return arg_err("coefficient tensor has a zero horizontal slice");
    }
    let beta = frequency_energy_ratios(a)
        .into_iter()
        .flatten()
        .filter(|&r| r > 0.0)
        .map(|r| t * r * (1.0 - t * r))
        .fold(f64::INFINITY, f64::min);
    Ok(beta)
}

/// Dual objective `g(Y) = f*(A^T Y) - <Y, B>`; weak duality gives
/// `g(Y) >= -f(X)` for every feasible `X`.
pub fn dual_value(cs: &LinearConstraintSet, reg: &Regularizer, y: &Tensor3) -> Result<f64> {
    let aty = cs.adjoint(y)?;
    Ok(reg.conj_value(&aty)? - y.inner(&cs.observed_rhs())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_tubes_give_t_one_minus_t() {
        let a = Tensor3::from_fn(2, 3, 4, |i, j, _| (1 + i + j) as f64);
        let t = 0.3;
        assert!((compute_beta(&a, t).unwrap() - t * (1.0 - t)).abs() < 1e-15);
    }

    #[test]
    fn step_range_checked() {
        let a = Tensor3::from_fn(2, 3, 4, |i, j, k| (1 + i + j + k) as f64);
        assert!(compute_beta(&a, 0.5).is_err());
        assert!(compute_beta(&a, 0.0).is_err());
        assert!(compute_beta(&a, 0.49).unwrap() > 0.0);
    }
}
