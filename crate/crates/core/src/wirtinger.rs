//! Finite-difference Wirtinger derivatives, dbar of forms, Levi forms.
//!
//! First derivatives use centered differences where both lattice neighbors
//! are nodes, second-order one-sided differences near the mask edge, and
//! first-order one-sided differences as a last resort.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{increasing_multi_indices, FormField, ScalarField, Stencil};
use crate::hermitian::{CMatrix, HermitianMatrix};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Real,
    Imag,
}

fn directional(field: &ScalarField, axis: usize, dir: Direction) -> Result<Vec<C64>> {
    let grid = &field.grid;
    if axis >= grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: axis + 1 });
    }
    let ax = grid.axis(axis);
    let stride = grid.stride(axis);
    let h = ax.h;
    let vals = &field.values;
    let mut out = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let l = grid.local(k, axis);
        let base = k - l * stride;
        let at = |m: u32| vals[base + m as usize * stride];
        let f0 = vals[k];
        let st = match dir {
            Direction::Real => ax.stencil_x(l),
            Direction::Imag => ax.stencil_y(l),
        };
        let d = match st {
            Stencil::Central { minus, plus } => (at(plus) - at(minus)) / (2.0 * h),
            Stencil::Forward2 { step1, step2 } => (-3.0 * f0 + 4.0 * at(step1) - at(step2)) / (2.0 * h),
            Stencil::Backward2 { step1, step2 } => (3.0 * f0 - 4.0 * at(step1) + at(step2)) / (2.0 * h),
            Stencil::Forward1 { step1 } => (at(step1) - f0) / h,
            Stencil::Backward1 { step1 } => (f0 - at(step1)) / h,
            Stencil::Isolated => return Err(Error::GridTooSmall { node: k }),
        };
        out.push(d);
    }
    Ok(out)
}

/// Derivative with respect to the real part of coordinate `axis`.
pub fn partial_x(field: &ScalarField, axis: usize) -> Result<ScalarField> {
    ScalarField::new(field.grid.clone(), directional(field, axis, Direction::Real)?)
}

/// Derivative with respect to the imaginary part of coordinate `axis`.
pub fn partial_y(field: &ScalarField, axis: usize) -> Result<ScalarField> {
    ScalarField::new(field.grid.clone(), directional(field, axis, Direction::Imag)?)
}

/// `∂/∂z = (∂x - i ∂y) / 2`.
pub fn d_dz(field: &ScalarField, axis: usize) -> Result<ScalarField> {
    let dx = directional(field, axis, Direction::Real)?;
    let dy = directional(field, axis, Direction::Imag)?;
    let i = C64::new(0.0, 1.0);
    ScalarField::new(field.grid.clone(), dx.iter().zip(&dy).map(|(a, b)| 0.5 * (a - i * b)).collect())
}

/// `∂/∂zbar = (∂x + i ∂y) / 2`.
pub fn d_dzbar(field: &ScalarField, axis: usize) -> Result<ScalarField> {
    let dx = directional(field, axis, Direction::Real)?;
    let dy = directional(field, axis, Direction::Imag)?;
    let i = C64::new(0.0, 1.0);
    ScalarField::new(field.grid.clone(), dx.iter().zip(&dy).map(|(a, b)| 0.5 * (a + i * b)).collect())
}

/// Euclidean Laplacian `sum_j 4 ∂_j ∂bar_j`, built from composed stencils.
pub fn laplacian(field: &ScalarField) -> Result<ScalarField> {
    let mut total = ScalarField::zeros(&field.grid);
    for axis in 0..field.grid.dim() {
        let term = d_dz(&d_dzbar(field, axis)?, axis)?;
        total = total.add(&term.scale(C64::new(4.0, 0.0)))?;
    }
    Ok(total)
}

/// Sign of the permutation taking `from` to `to`; 0 if `to` is not a
/// rearrangement of `from` or an index repeats.
pub fn multiindex_sign(from: &[usize], to: &[usize]) -> i8 {
    if from.len() != to.len() {
        return 0;
    }
    let mut sorted_from = from.to_vec();
    let mut sorted_to = to.to_vec();
    sorted_from.sort_unstable();
    sorted_to.sort_unstable();
    if sorted_from != sorted_to || sorted_from.windows(2).any(|w| w[0] == w[1]) {
        return 0;
    }
    let positions: Vec<usize> = from.iter().map(|f| to.iter().position(|t| t == f).unwrap()).collect();
    let mut inversions = 0usize;
    for a in 0..positions.len() {
        for b in a + 1..positions.len() {
            if positions[a] > positions[b] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// dbar of a (p,q)-form, a (p,q+1)-form.
pub fn dbar_form(form: &FormField) -> Result<FormField> {
    let n = form.grid.dim();
    if form.q + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "dbar of a ({}, {}) form does not exist in dimension {n}",
            form.p, form.q
        )));
    }
    let mut out = FormField::new(&form.grid, form.p, form.q + 1)?;
    let p_sign = if form.p.is_multiple_of(2) { 1.0 } else { -1.0 };
    for i_idx in increasing_multi_indices(n, form.p) {
        for m_idx in increasing_multi_indices(n, form.q + 1) {
            let mut acc: Option<ScalarField> = None;
            for &j in &m_idx {
                let rest: Vec<usize> = m_idx.iter().copied().filter(|&t| t != j).collect();
                let Some(coef) = form.get(&i_idx, &rest) else { continue };
                let mut from = vec![j];
                from.extend_from_slice(&rest);
                let sign = multiindex_sign(&from, &m_idx) as f64 * p_sign;
                let term = d_dzbar(coef, j)?.scale(C64::new(sign, 0.0));
                acc = Some(match acc {
                    Some(a) => a.add(&term)?,
                    None => term,
                });
            }
            if let Some(a) = acc {
                out.set(i_idx.clone(), m_idx, a)?;
            }
        }
    }
    Ok(out)
}

/// Largest `|∂f/∂zbar_j|` over all axes at nodes where `keep` holds.
pub fn cr_residual_where(field: &ScalarField, keep: impl Fn(usize) -> bool) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for axis in 0..field.grid.dim() {
        let d = d_dzbar(field, axis)?;
        worst = worst.max(d.sup_norm_where(&keep).0);
    }
    Ok(worst)
}

/// Cauchy-Riemann residual over interior nodes (centered stencils on every axis).
pub fn cr_residual(field: &ScalarField) -> Result<f64> {
    let grid = field.grid.clone();
    cr_residual_where(field, |k| grid.depth(k) >= 1)
}

/// Holomorphy verdict: interior CR residual at most `10 h^2`.
pub fn is_holomorphic(field: &ScalarField) -> Result<bool> {
    let h = field.grid.spacing();
    Ok(cr_residual(field)? <= 10.0 * h * h)
}

/// Default finite-difference step for Levi forms at `point`.
pub fn default_levi_step(point: &[C64]) -> f64 {
    let norm = point.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    1e-4 * (1.0 + norm)
}

/// Complex Hessian `(∂²f / ∂z_j ∂zbar_k)` of a real function by central
/// differences on the real Hessian.
pub fn levi_form_fn(f: &dyn Fn(&[C64]) -> Result<f64>, point: &[C64], h_fd: Option<f64>) -> Result<HermitianMatrix> {
    let n = point.len();
    let h = h_fd.unwrap_or_else(|| default_levi_step(point));
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step {h} must be positive")));
    }
    let shift = |shifts: &[(usize, f64)]| -> Result<f64> {
        let mut z = point.to_vec();
        for &(r, d) in shifts {
            if r % 2 == 0 {
                z[r / 2].re += d;
            } else {
                z[r / 2].im += d;
            }
        }
        f(&z)
    };
    let m = 2 * n;
    let f0 = f(point)?;
    let mut hess = vec![vec![0.0; m]; m];
    for r in 0..m {
        let fp = shift(&[(r, h)])?;
        let fm = shift(&[(r, -h)])?;
        hess[r][r] = (fp - 2.0 * f0 + fm) / (h * h);
        for s in r + 1..m {
            let fpp = shift(&[(r, h), (s, h)])?;
            let fpm = shift(&[(r, h), (s, -h)])?;
            let fmp = shift(&[(r, -h), (s, h)])?;
            let fmm = shift(&[(r, -h), (s, -h)])?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[r][s] = v;
            hess[s][r] = v;
        }
    }
    let a = CMatrix::from_fn(n, n, |j, k| {
        let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
        0.25 * C64::new(hess[xj][xk] + hess[yj][yk], hess[xj][yk] - hess[yj][xk])
    });
    HermitianMatrix::from_matrix(a)
}

/// Levi form of a weight expression at a point of C^n.
pub fn levi_form(weight: &Expr, point: &[C64], h_fd: Option<f64>) -> Result<HermitianMatrix> {
    let f = |z: &[C64]| -> Result<f64> { Ok(weight.eval_complex(z)?) };
    levi_form_fn(&f, point, h_fd)
}
