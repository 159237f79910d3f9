use crate::error::{arg_err, dim_err, Result};
use crate::tensor::{tprod_fft, Matrix, Tensor3};

/// Which family a constraint set was built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    TensorSlices,
    MatrixRows,
    VectorRows,
    MatrixEntries,
    MaskedEntries,
}

impl ConstraintKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::TensorSlices => "tensor_slices",
            ConstraintKind::MatrixRows => "matrix_rows",
            ConstraintKind::VectorRows => "vector_rows",
            ConstraintKind::MatrixEntries => "matrix_entries",
            ConstraintKind::MaskedEntries => "masked_entries",
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum System {
    /// `A * X = B` with `A: n1 x n2 x n3`, `B: n1 x k x n3`. Matrix and
    /// vector rows are the case `n3 = 1`.
    TProduct { a: Tensor3, b: Tensor3 },
    /// `<A_i, X> = b_i` for matrices `A_i` shaped like `X`.
    Entries { rows: usize, cols: usize, a: Vec<Matrix>, b: Vec<f64> },
    /// `X[p_i, q_i] = b_i`.
    Masked { rows: usize, cols: usize, idx: Vec<(usize, usize)>, b: Vec<f64> },
}

/// A family of linear constraints split into single constraints, each
/// with a nonzero coefficient block.
#[derive(Clone, Debug)]
pub struct LinearConstraintSet {
    kind: ConstraintKind,
    pub(crate) system: System,
    norms_sq: Vec<f64>,
    /// Additive perturbation of the right-hand side, laid out like it.
    noise: Option<Vec<f64>>,
}

impl LinearConstraintSet {
    /// Horizontal slices of `A * X = B`.
    pub fn tensor_slices(a: Tensor3, b: Tensor3) -> Result<Self> {
        Self::tproduct(ConstraintKind::TensorSlices, a, b)
    }

    /// Rows of `A X = B` for matrices.
    pub fn matrix_rows(a: &Matrix, b: &Matrix) -> Result<Self> {
        Self::tproduct(ConstraintKind::MatrixRows, Tensor3::from_matrix(a), Tensor3::from_matrix(b))
    }

    /// Rows of `A x = b`.
    pub fn vector_rows(a: &Matrix, b: &[f64]) -> Result<Self> {
        Self::tproduct(ConstraintKind::VectorRows, Tensor3::from_matrix(a), Tensor3::from_vector(b))
    }

    /// Trace constraints `<A_i, X> = b_i`.
    pub fn matrix_entries(a: Vec<Matrix>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return dim_err(format!("{} coefficient matrices for {} values", a.len(), b.len()));
        }
        let (rows, cols) = a[0].shape();
        if a.iter().any(|m| m.shape() != (rows, cols)) {
            return dim_err("coefficient matrices differ in shape");
        }
        let norms_sq = a.iter().map(|m| m.norm_squared()).collect();
        Self::checked(ConstraintKind::MatrixEntries, System::Entries { rows, cols, a, b }, norms_sq)
    }

    /// Observed entries `X[p, q] = value` of a `rows x cols` matrix.
    pub fn masked_entries(rows: usize, cols: usize, idx: Vec<(usize, usize)>, b: Vec<f64>) -> Result<Self> {
        if idx.is_empty() || idx.len() != b.len() {
            return dim_err(format!("{} positions for {} values", idx.len(), b.len()));
        }
        if let Some(&(p, q)) = idx.iter().find(|&&(p, q)| p >= rows || q >= cols) {
            return dim_err(format!("entry ({p}, {q}) outside a {rows}x{cols} matrix"));
        }
        let norms_sq = vec![1.0; idx.len()];
        Self::checked(ConstraintKind::MaskedEntries, System::Masked { rows, cols, idx, b }, norms_sq)
    }

    fn tproduct(kind: ConstraintKind, a: Tensor3, b: Tensor3) -> Result<Self> {
        let (n1, _, n3) = a.dims();
        let (m1, _, m3) = b.dims();
        if n1 != m1 || n3 != m3 {
            return dim_err(format!("coefficients {:?} and right-hand side {:?}", a.dims(), b.dims()));
        }
        let norms_sq = (0..n1).map(|i| a.horizontal_slice(i).fro_norm_sq()).collect();
        Self::checked(kind, System::TProduct { a, b }, norms_sq)
    }

    fn checked(kind: ConstraintKind, system: System, norms_sq: Vec<f64>) -> Result<Self> {
        if let Some(i) = norms_sq.iter().position(|&n: &f64| !(n > 0.0) || !n.is_finite()) {
            return arg_err(format!("constraint {i} has a zero or non-finite coefficient block"));
        }
        let s = Self { kind, system, norms_sq, noise: None };
        if s.rhs().iter().any(|v| !v.is_finite()) {
            return arg_err("right-hand side contains non-finite values");
        }
        Ok(s)
    }

    /// Adds the perturbation `e` to the right-hand side. `e` has the shape of
    /// `B` (t-product kinds) or one entry per constraint.
    pub fn with_noise(mut self, e: &[f64]) -> Result<Self> {
        let len = self.rhs().len();
        if e.len() != len {
            return dim_err(format!("noise of length {} for a right-hand side of length {len}", e.len()));
        }
        self.noise = if e.iter().all(|&v| v == 0.0) { None } else { Some(e.to_vec()) };
        Ok(self)
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    /// Number of single constraints.
    pub fn len(&self) -> usize {
        self.norms_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms_sq.is_empty()
    }

    /// `||A(i)||_F^2`.
    pub fn norm_sq(&self, i: usize) -> f64 {
        self.norms_sq[i]
    }

    pub fn norms_sq(&self) -> &[f64] {
        &self.norms_sq
    }

    /// Tube length `N3` of the system; 1 for the matrix and vector kinds.
    pub fn n3(&self) -> usize {
        match &self.system {
            System::TProduct { a, .. } => a.dims().2,
            _ => 1,
        }
    }

    /// Shape of the unknown.
    pub fn unknown_dims(&self) -> (usize, usize, usize) {
        match &self.system {
            System::TProduct { a, b } => (a.dims().1, b.dims().1, a.dims().2),
            System::Entries { rows, cols, .. } | System::Masked { rows, cols, .. } => (*rows, *cols, 1),
        }
    }

    /// Shape of the right-hand side (and of a dual variable).
    pub fn rhs_dims(&self) -> (usize, usize, usize) {
        match &self.system {
            System::TProduct { b, .. } => b.dims(),
            _ => (self.len(), 1, 1),
        }
    }

    /// Noise-free right-hand side in storage order.
    pub fn rhs(&self) -> &[f64] {
        match &self.system {
            System::TProduct { b, .. } => b.as_slice(),
            System::Entries { b, .. } | System::Masked { b, .. } => b,
        }
    }

    /// Right-hand side actually used by the solvers.
    pub fn observed_rhs(&self) -> Tensor3 {
        let (r1, r2, r3) = self.rhs_dims();
        let mut data = self.rhs().to_vec();
        if let Some(e) = &self.noise {
            for (d, e) in data.iter_mut().zip(e) {
                *d += e;
            }
        }
        Tensor3::new(r1, r2, r3, data).expect("rhs shape")
    }

    pub fn has_noise(&self) -> bool {
        self.noise.is_some()
    }

    /// `max_i ||E(i)|| / ||A(i)||`, zero without noise.
    pub fn noise_level(&self) -> f64 {
        let Some(e) = &self.noise else { return 0.0 };
        let (r1, r2, r3) = self.rhs_dims();
        (0..self.len())
            .map(|i| {
                let mut s = 0.0;
                for k in 0..r3 {
                    for j in 0..r2 {
                        let v = e[i + r1 * (j + r2 * k)];
                        s += v * v;
                    }
                }
                (s / self.norms_sq[i]).sqrt()
            })
            .fold(0.0, f64::max)
    }

    fn check_unknown(&self, x: &Tensor3) -> Result<()> {
        if x.dims() != self.unknown_dims() {
            return dim_err(format!("unknown of shape {:?}, expected {:?}", x.dims(), self.unknown_dims()));
        }
        Ok(())
    }

    /// `A(X)`, shaped like the right-hand side.
    pub fn apply(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check_unknown(x)?;
        match &self.system {
            System::TProduct { a, .. } => tprod_fft(a, x),
            System::Entries { a, .. } => {
                let xm = x.frontal_slice(0);
                let v: Vec<f64> = a.iter().map(|m| m.dot(&xm)).collect();
                Ok(Tensor3::from_vector(&v))
            }
            System::Masked { idx, .. } => {
                let v: Vec<f64> = idx.iter().map(|&(p, q)| x.get(p, q, 0)).collect();
                Ok(Tensor3::from_vector(&v))
            }
        }
    }

    /// Adjoint `A^T(Y)`, shaped like the unknown.
    pub fn adjoint(&self, y: &Tensor3) -> Result<Tensor3> {
        if y.dims() != self.rhs_dims() {
            return dim_err(format!("dual of shape {:?}, expected {:?}", y.dims(), self.rhs_dims()));
        }
        match &self.system {
            System::TProduct { a, .. } => tprod_fft(&a.transpose_t(), y),
            System::Entries { rows, cols, a, .. } => {
                let mut m = Matrix::zeros(*rows, *cols);
                for (ai, &yi) in a.iter().zip(y.as_slice()) {
                    m += ai * yi;
                }
                Ok(Tensor3::from_matrix(&m))
            }
            System::Masked { rows, cols, idx, .. } => {
                let mut t = Tensor3::zeros(*rows, *cols, 1);
                for (&(p, q), &yi) in idx.iter().zip(y.as_slice()) {
                    t.set(p, q, 0, t.get(p, q, 0) + yi);
                }
                Ok(t)
            }
        }
    }

    /// `||A(X) - B~||_F` against the observed right-hand side.
    pub fn residual_norm(&self, x: &Tensor3) -> Result<f64> {
        Ok(self.apply(x)?.sub(&self.observed_rhs())?.fro_norm())
    }

    /// Coefficient tensor of the t-product kinds.
    pub fn coefficients(&self) -> Option<&Tensor3> {
        match &self.system {
            System::TProduct { a, .. } => Some(a),
            _ => None,
        }
    }
}
