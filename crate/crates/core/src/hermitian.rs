//! Dense complex matrices, Hermitian eigen-decomposition and weighted norms.
//!
//! The eigensolver is a cyclic complex Jacobi iteration; eigenvalues are
//! returned in descending order with unitary eigenvectors as columns.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{FormField, Grid};
use crate::C64;

pub const MAX_JACOBI_SWEEPS: usize = 100;

fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![czero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidArgument("ragged matrix rows".into()));
        }
        Ok(CMatrix { rows: r, cols: c, data: rows.concat() })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Result<Self> {
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidArgument("column length mismatch".into()));
        }
        Ok(CMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == czero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect())
    }

    pub fn scale(&self, c: C64) -> CMatrix {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch { expected: self.rows * self.cols, got: other.rows * other.cols });
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Scale row `i` by `d[i]` and column `j` by `e[j]`.
    pub fn scale_rows_cols(&self, d: &[f64], e: &[f64]) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * (d[i] * e[j]))
    }
}

/// Hermitian matrix; construction symmetrizes and records the asymmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    matrix: CMatrix,
    /// Largest `|a_ij - conj(a_ji)|` of the input.
    pub asymmetry: f64,
}

#[derive(Debug, Clone)]
pub struct Eigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Unitary matrix with the matching eigenvectors as columns.
    pub vectors: CMatrix,
}

impl HermitianMatrix {
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::InvalidArgument(format!("matrix is {}x{}, not square", m.rows, m.cols)));
        }
        let n = m.rows;
        let mut asymmetry: f64 = 0.0;
        let mut sym = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let a = m[(i, j)];
                let b = m[(j, i)].conj();
                asymmetry = asymmetry.max((a - b).norm());
                sym[(i, j)] = 0.5 * (a + b);
            }
        }
        if sym.data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        Ok(HermitianMatrix { matrix: sym, asymmetry })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        Self::from_matrix(CMatrix::from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Cyclic complex Jacobi eigen-decomposition.
    pub fn eig(&self) -> Result<Eigen> {
        let n = self.dim();
        let mut a = self.matrix.clone();
        let mut v = CMatrix::identity(n);
        let scale = a.frobenius_norm();
        let off_norm = |a: &CMatrix| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += a[(i, j)].norm_sqr();
                    }
                }
            }
            s.sqrt()
        };
        let mut converged = scale == 0.0;
        let mut sweeps = 0;
        while !converged {
            if off_norm(&a) <= 1e-15 * scale {
                converged = true;
                break;
            }
            if sweeps == MAX_JACOBI_SWEEPS {
                break;
            }
            sweeps += 1;
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    if mag <= 1e-300 || mag <= 1e-18 * scale {
                        a[(p, q)] = czero();
                        a[(q, p)] = czero();
                        continue;
                    }
                    let phase_conj = (apq / mag).conj();
                    let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let u00 = C64::new(c, 0.0);
                    let u01 = C64::new(s, 0.0);
                    let u10 = -s * phase_conj;
                    let u11 = c * phase_conj;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = akp * u00 + akq * u10;
                        a[(k, q)] = akp * u01 + akq * u11;
                        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                        v[(k, p)] = vkp * u00 + vkq * u10;
                        v[(k, q)] = vkp * u01 + vkq * u11;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = u00.conj() * apk + u10.conj() * aqk;
                        a[(q, k)] = u01.conj() * apk + u11.conj() * aqk;
                    }
                    a[(p, q)] = czero();
                    a[(q, p)] = czero();
                    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                }
            }
        }
        if !converged {
            return Err(Error::NoConvergence(format!(
                "Jacobi eigensolver: off-diagonal norm {:.3e} after {MAX_JACOBI_SWEEPS} sweeps",
                off_norm(&a)
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(j, j)].re.partial_cmp(&a[(i, i)].re).unwrap());
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
        Ok(Eigen { values, vectors })
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*self.eig()?.values.last().unwrap_or(&0.0))
    }

    /// Positive semidefinite up to `tol * max(1, |largest eigenvalue|)`.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        let e = self.eig()?;
        let big = e.values.iter().map(|v| v.abs()).fold(1.0, f64::max);
        Ok(e.values.iter().all(|&v| v >= -tol * big))
    }

    /// Unique positive semidefinite square root.
    pub fn sqrt_psd(&self) -> Result<HermitianMatrix> {
        let e = self.eig()?;
        let big = e.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if let Some(&bad) = e.values.iter().find(|&&v| v < -1e-12 * big.max(1e-300)) {
            return Err(Error::Precondition(format!("matrix is not positive semidefinite (eigenvalue {bad})")));
        }
        let n = self.dim();
        let roots: Vec<f64> = e.values.iter().map(|v| v.max(0.0).sqrt()).collect();
        let m = CMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| e.vectors[(i, k)] * roots[k] * e.vectors[(j, k)].conj()).sum()
        });
        HermitianMatrix::from_matrix(m)
    }

    /// `<A^{-1} f, f>` for positive definite `A`.
    pub fn norm_a_sq(&self, f: &[C64]) -> Result<f64> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: f.len() });
        }
        let e = self.eig()?;
        let n = self.dim();
        let mut total = 0.0;
        for k in 0..n {
            let lambda = e.values[k];
            if !(lambda > 0.0) {
                return Err(Error::Precondition(format!(
                    "matrix is not positive definite (eigenvalue {lambda})"
                )));
            }
            let proj: C64 = (0..n).map(|i| e.vectors[(i, k)].conj() * f[i]).sum();
            total += proj.norm_sqr() / lambda;
        }
        Ok(total)
    }

    /// `<A u, u>` for a vector `u`.
    pub fn quadratic_form(&self, u: &[C64]) -> Result<f64> {
        let au = self.matrix.mul_vec(u)?;
        Ok(au.iter().zip(u).map(|(a, b)| (a * b.conj()).re).sum())
    }
}

/// Values of the weight expression at every node.
pub fn weight_at_nodes(grid: &Grid, phi: &Expr) -> Result<Vec<f64>> {
    let mut z = vec![czero(); grid.dim()];
    let mut out = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        grid.coords_into(k, &mut z);
        out.push(phi.eval_complex(&z)?);
    }
    Ok(out)
}

/// `(∫ |f|^r e^{-phi})^{1/r}` with the pointwise Euclidean coefficient norm.
pub fn weighted_lp_norm(f: &FormField, phi: &Expr, r: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("exponent r = {r} must be positive")));
    }
    let phi_vals = weight_at_nodes(&f.grid, phi)?;
    let norms = f.pointwise_norm_sq();
    let total: f64 = (0..f.grid.len())
        .map(|k| norms[k].powf(0.5 * r) * (-phi_vals[k]).exp() * f.grid.weight(k))
        .sum();
    Ok(total.powf(1.0 / r))
}

/// Weighted inner product `∫ <f, g> e^{-phi}` of two forms of equal degree.
pub fn pairing(f: &FormField, g: &FormField, phi: &Expr) -> Result<C64> {
    if f.p != g.p || f.q != g.q {
        return Err(Error::InvalidArgument("forms have different degrees".into()));
    }
    if f.grid.len() != g.grid.len() {
        return Err(Error::DimensionMismatch { expected: f.grid.len(), got: g.grid.len() });
    }
    let phi_vals = weight_at_nodes(&f.grid, phi)?;
    let mut total = czero();
    for (key, fc) in f.coefficients() {
        if let Some(gc) = g.get(&key.0, &key.1) {
            for k in 0..f.grid.len() {
                total += fc.values[k] * gc.values[k].conj() * ((-phi_vals[k]).exp() * f.grid.weight(k));
            }
        }
    }
    Ok(total)
}
