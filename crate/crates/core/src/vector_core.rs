//! Norm calculus: gradients, Hessians and third-derivative tensors of the
//! Euclidean norm, its skewed variants `z -> |Sz|`, and the l_p norms.
//!
//! Every derivative is undefined at the origin, where the norm only has the
//! unit ball as subdifferential. These functions return
//! [`Error::ZeroVector`] there instead of picking an element of the ball; the
//! median solvers own the subgradient semantics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// A preference vector in `R^d`.
pub type Point = DVector<f64>;

/// Builds a [`Point`] from a slice of coordinates.
pub fn point(coords: &[f64]) -> Point {
    DVector::from_column_slice(coords)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Symmetric positive-definite matrix, validated on construction.
///
/// Used for preference skews `S`, median skews `Sigma` and loss Hessians.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry (to `1e-12 * max|entry|`) and positive definiteness
    /// (by Cholesky factorization). The stored matrix is exactly symmetrized.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::NotSpd(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        let scale = m.amax();
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSpd(format!("asymmetry {asym:e} exceeds tolerance")));
        }
        let sym = (&m + m.transpose()) * 0.5;
        if sym.clone().cholesky().is_none() {
            return Err(Error::NotSpd("Cholesky factorization failed".into()));
        }
        Ok(Self { m: sym })
    }

    /// Symmetrizes `m` before validating; for products like `A H A` that are
    /// symmetric only up to rounding.
    pub fn from_symmetrized(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Self::new(m);
        }
        let sym = (&m + m.transpose()) * 0.5;
        Self::new(sym)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    /// Eigenvalues in ascending order with matching unit eigenvectors as columns.
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.m.clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(self.dim(), order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(self.dim(), self.dim());
        for (col, &i) in order.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(i));
        }
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let (v, _) = self.eigen();
        v[v.len() - 1]
    }

    fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let (values, vectors) = self.eigen();
        let mapped = DMatrix::from_diagonal(&values.map(f));
        let out = &vectors * mapped * vectors.transpose();
        (&out + out.transpose()) * 0.5
    }

    pub fn inverse(&self) -> Self {
        Self {
            m: self.spectral_map(|l| 1.0 / l),
        }
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        Self {
            m: self.spectral_map(f64::sqrt),
        }
    }

    pub fn inverse_sqrt(&self) -> Self {
        Self {
            m: self.spectral_map(|l| 1.0 / l.sqrt()),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.m * factor)
    }

    /// `self^2`.
    pub fn squared(&self) -> Self {
        Self {
            m: self.spectral_map(|l| l * l),
        }
    }

    /// Congruence `A self A` for a symmetric `A`.
    pub fn congruence(&self, a: &SpdMatrix) -> Result<Self> {
        Self::from_symmetrized(a.matrix() * &self.m * a.matrix())
    }

    pub fn apply(&self, z: &Point) -> Result<Point> {
        check_dim(self.dim(), z.len())?;
        Ok(&self.m * z)
    }
}

/// Dense, fully symmetric `d x d x d` tensor of third derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ThirdDerivTensor {
    dim: usize,
    data: Vec<f64>,
}

impl ThirdDerivTensor {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize, k: usize) -> &mut f64 {
        &mut self.data[(i * self.dim + j) * self.dim + k]
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &ThirdDerivTensor, factor: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    /// Contraction along the first index: `M[j][k] = sum_i T[i][j][k] v[i]`.
    pub fn contract(&self, v: &Point) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |j, k| (0..d).map(|i| self.get(i, j, k) * v[i]).sum())
    }

    /// Full contraction `T[a, b, c]`.
    pub fn apply3(&self, a: &Point, b: &Point, c: &Point) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    acc += self.get(i, j, k) * a[i] * b[j] * c[k];
                }
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `z / |z|_2`.
pub fn unit_vector(z: &Point) -> Result<Point> {
    let n = z.norm();
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(z / n)
}

/// Hessian of `|z|_2`: `(I - u u^T) / |z|_2` with `u = z / |z|_2`.
pub fn euclid_hessian(z: &Point) -> Result<DMatrix<f64>> {
    let n = z.norm();
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    let u = z / n;
    let d = z.len();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        (delta - u[i] * u[j]) / n
    }))
}

/// Third derivative of `|z|_2`:
/// `(3 u_i u_j u_k - u_i d_jk - u_j d_ik - u_k d_ij) / |z|_2^2`.
pub fn euclid_third_derivative(z: &Point) -> Result<ThirdDerivTensor> {
    let n = z.norm();
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    let u = z / n;
    let d = z.len();
    let inv = 1.0 / (n * n);
    let mut t = ThirdDerivTensor::zeros(d);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let f = 3.0 * u[i] * u[j] * u[k]
                    - u[i] * delta(j, k)
                    - u[j] * delta(i, k)
                    - u[k] * delta(i, j);
                *t.at_mut(i, j, k) = f * inv;
            }
        }
    }
    Ok(t)
}

/// `|z|_p` for `p` in `[1, inf]`.
pub fn lp_norm(z: &Point, p: f64) -> f64 {
    if p.is_infinite() {
        return z.amax();
    }
    if p == 1.0 {
        return z.iter().map(|v| v.abs()).sum();
    }
    let m = z.amax();
    if m == 0.0 {
        return 0.0;
    }
    m * z.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// A subgradient of `|z|_p`; it has unit `l_q` norm where `1/p + 1/q = 1`.
///
/// For `p = 1` zero coordinates get 0. For `p = inf` the whole mass goes to
/// the lowest-index coordinate of maximal magnitude.
pub fn lp_gradient(z: &Point, p: f64) -> Result<Point> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("p must lie in [1, inf], got {p}")));
    }
    let m = z.amax();
    if m == 0.0 {
        return Err(Error::ZeroVector);
    }
    let d = z.len();
    if p == 1.0 {
        return Ok(z.map(|v| if v == 0.0 { 0.0 } else { v.signum() }));
    }
    if p.is_infinite() {
        let idx = (0..d).find(|&i| z[i].abs() == m).unwrap_or(0);
        let mut g = DVector::zeros(d);
        g[idx] = z[idx].signum();
        return Ok(g);
    }
    // Scale by the max entry so |z_i|^(p-1) cannot overflow for large p.
    let scaled: Vec<f64> = z.iter().map(|v| v.abs() / m).collect();
    let norm_p = scaled.iter().map(|t| t.powf(p)).sum::<f64>().powf(1.0 / p);
    Ok(DVector::from_fn(d, |i, _| {
        z[i].signum() * (scaled[i] / norm_p).powf(p - 1.0)
    }))
}

/// `|z|_Sigma = |Sigma z|_2`.
pub fn skewed_norm(z: &Point, sigma: &SpdMatrix) -> Result<f64> {
    Ok(sigma.apply(z)?.norm())
}

/// Gradient of `|z|_Sigma`: `Sigma Sigma z / |z|_Sigma`.
pub fn skewed_gradient(z: &Point, sigma: &SpdMatrix) -> Result<Point> {
    let sz = sigma.apply(z)?;
    let n = sz.norm();
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(sigma.matrix() * sz / n)
}

/// Hessian of `|z|_Sigma`: `Sigma * euclid_hessian(Sigma z) * Sigma`.
pub fn skewed_hessian_of_norm(z: &Point, sigma: &SpdMatrix) -> Result<DMatrix<f64>> {
    let sz = sigma.apply(z)?;
    let h = euclid_hessian(&sz)?;
    let out = sigma.matrix() * h * sigma.matrix();
    Ok((&out + out.transpose()) * 0.5)
}
