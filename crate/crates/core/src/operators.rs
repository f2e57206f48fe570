//! Finite-dimensional models of the Hilbert-space operator theory behind L2
//! estimates: weighted adjoints, graph complements, solvability with a norm
//! bound and the basic estimate for a pair `S . T = 0`.
//!
//! A weighted space carries `<x, y> = sum x_k conj(y_k) w_k`. Every operator is
//! handled in whitened coordinates `x -> sqrt(w) x`, where the weighted inner
//! product becomes the standard one and the matrix becomes
//! `B = sqrt(W_t) M sqrt(W_s)^-1`. Singular values come from a one-sided
//! complex Jacobi iteration, which keeps small singular values accurate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::hermitian::CMatrix;
use crate::C64;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Residual allowed in subspace identities.
pub const SUBSPACE_TOLERANCE: f64 = 1e-10;
/// Relative slack allowed on audited inequalities.
pub const AUDIT_SLACK: f64 = 1e-8;
const MAX_SVD_SWEEPS: usize = 60;

fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

fn std_dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

fn std_norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `C^n` with a diagonal positive weight in the inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSpace {
    weights: Vec<f64>,
}

impl WeightedSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("weighted space needs dimension >= 1".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidArgument(format!("weights must be positive, got {w}")));
        }
        Ok(WeightedSpace { weights })
    }

    pub fn unit(dim: usize) -> Result<Self> {
        WeightedSpace::new(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn inner(&self, x: &[C64], y: &[C64]) -> C64 {
        x.iter().zip(y).zip(&self.weights).map(|((a, b), w)| a * b.conj() * *w).sum()
    }

    pub fn norm(&self, x: &[C64]) -> f64 {
        x.iter().zip(&self.weights).map(|(a, w)| a.norm_sqr() * w).sum::<f64>().sqrt()
    }

    fn whiten(&self, x: &[C64]) -> Vec<C64> {
        x.iter().zip(&self.weights).map(|(a, w)| a * w.sqrt()).collect()
    }

    fn unwhiten(&self, x: &[C64]) -> Vec<C64> {
        x.iter().zip(&self.weights).map(|(a, w)| a / w.sqrt()).collect()
    }

    fn check_len(&self, x: &[C64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// Orthonormal basis (in this inner product) of the span of `vectors`.
    pub fn orthonormal_basis(&self, vectors: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        for v in vectors {
            self.check_len(v)?;
        }
        let white: Vec<Vec<C64>> = vectors.iter().map(|v| self.whiten(v)).collect();
        Ok(orthonormalize(&white).iter().map(|q| self.unwhiten(q)).collect())
    }
}

/// Modified Gram-Schmidt with reorthogonalization; drops dependent vectors.
fn orthonormalize(vectors: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let scale = vectors.iter().map(|v| std_norm(v)).fold(0.0, f64::max);
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = std_dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let n = std_norm(&w);
        if n > RANK_TOLERANCE * scale && n > 0.0 {
            basis.push(w.iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// Distance from `v` to the span of the orthonormal `basis`.
fn distance_to_span(v: &[C64], basis: &[Vec<C64>]) -> f64 {
    let mut w = v.to_vec();
    for q in basis {
        let c = std_dot(&w, q);
        for (wi, qi) in w.iter_mut().zip(q) {
            *wi -= c * qi;
        }
    }
    std_norm(&w)
}

/// Largest distance from a unit vector of either span to the other span.
/// Both inputs must be orthonormal; a dimension mismatch gives 1.
fn subspace_mismatch(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    if a.len() != b.len() {
        return 1.0;
    }
    let ab = a.iter().map(|v| distance_to_span(v, b)).fold(0.0, f64::max);
    let ba = b.iter().map(|v| distance_to_span(v, a)).fold(0.0, f64::max);
    ab.max(ba)
}

/// Singular value decomposition `B V = U S` of a dense matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Descending singular values, one per column of the input.
    pub singular: Vec<f64>,
    /// Right singular vectors, columns of a unitary matrix.
    pub right: Vec<Vec<C64>>,
    /// Left singular vectors for the nonzero singular values.
    pub left: Vec<Vec<C64>>,
    pub rank: usize,
}

impl Svd {
    /// Right singular vectors spanning the null space.
    pub fn null_space(&self) -> &[Vec<C64>] {
        &self.right[self.rank..]
    }

    pub fn smallest_nonzero(&self) -> Option<f64> {
        self.rank.checked_sub(1).map(|k| self.singular[k])
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(b: &CMatrix) -> Result<Svd> {
    let n = b.cols();
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| b.column(j)).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { C64::new(1.0, 0.0) } else { czero() }).collect())
        .collect();
    if cols.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { node: 0 });
    }
    // Columns below roundoff of the whole matrix are left alone.
    let negligible = (f64::EPSILON * b.frobenius_norm()).powi(2);
    let mut converged = false;
    for _ in 0..MAX_SVD_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|x| x.norm_sqr()).sum();
                let gamma: C64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a.conj() * b).sum();
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, phase, c, s);
                rotate(&mut v, p, q, phase, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!("Jacobi SVD after {MAX_SVD_SWEEPS} sweeps")));
    }
    let mut order: Vec<(f64, usize)> = cols.iter().enumerate().map(|(j, c)| (std_norm(c), j)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let top = order.first().map_or(0.0, |o| o.0);
    let rank = order.iter().take_while(|o| o.0 > RANK_TOLERANCE * top && o.0 > 0.0).count();
    let singular = order.iter().map(|o| o.0).collect();
    let right = order.iter().map(|o| v[o.1].clone()).collect();
    let left = order[..rank]
        .iter()
        .map(|&(s, j)| cols[j].iter().map(|x| x / s).collect())
        .collect();
    Ok(Svd { singular, right, left, rank })
}

/// Apply the rotation that zeroes the (p, q) column inner product.
fn rotate(cols: &mut [Vec<C64>], p: usize, q: usize, phase: C64, c: f64, s: f64) {
    let len = cols[p].len();
    for i in 0..len {
        let a = cols[p][i];
        let b = cols[q][i] * phase.conj();
        cols[p][i] = a * c - b * s;
        cols[q][i] = a * s + b * c;
    }
}

/// Extend an orthonormal family to an orthonormal basis of `C^dim`.
fn complete_basis(family: &[Vec<C64>], dim: usize) -> Vec<Vec<C64>> {
    let mut all = family.to_vec();
    for k in 0..dim {
        let mut e = vec![czero(); dim];
        e[k] = C64::new(1.0, 0.0);
        all.push(e);
    }
    let full = orthonormalize(&all);
    full[family.len()..].to_vec()
}

/// A linear map between weighted spaces, stored as a target x source matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOpModel {
    pub source: WeightedSpace,
    pub target: WeightedSpace,
    pub matrix: CMatrix,
}

impl LinearOpModel {
    pub fn new(source: WeightedSpace, target: WeightedSpace, matrix: CMatrix) -> Result<Self> {
        if matrix.rows() != target.dim() {
            return Err(Error::DimensionMismatch { expected: target.dim(), got: matrix.rows() });
        }
        if matrix.cols() != source.dim() {
            return Err(Error::DimensionMismatch { expected: source.dim(), got: matrix.cols() });
        }
        Ok(LinearOpModel { source, target, matrix })
    }

    /// Operator between unit-weight spaces.
    pub fn unweighted(matrix: CMatrix) -> Result<Self> {
        let s = WeightedSpace::unit(matrix.cols())?;
        let t = WeightedSpace::unit(matrix.rows())?;
        LinearOpModel::new(s, t, matrix)
    }

    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.matrix.mul_vec(x)
    }

    /// The adjoint for the weighted inner products: `W_s^-1 M^H W_t`.
    pub fn adjoint(&self) -> LinearOpModel {
        let inv: Vec<f64> = self.source.weights.iter().map(|w| 1.0 / w).collect();
        let matrix = self.matrix.adjoint().scale_rows_cols(&inv, &self.target.weights);
        LinearOpModel { source: self.target.clone(), target: self.source.clone(), matrix }
    }

    fn whitened(&self) -> CMatrix {
        let d: Vec<f64> = self.target.weights.iter().map(|w| w.sqrt()).collect();
        let e: Vec<f64> = self.source.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        self.matrix.scale_rows_cols(&d, &e)
    }

    /// Singular value decomposition of the whitened matrix.
    pub fn svd(&self) -> Result<Svd> {
        svd(&self.whitened())
    }

    /// Weighted-orthonormal basis of the null space, in source coordinates.
    pub fn null_space(&self) -> Result<Vec<Vec<C64>>> {
        let d = self.svd()?;
        Ok(d.null_space().iter().map(|v| self.source.unwhiten(v)).collect())
    }

    /// Weighted-orthonormal basis of the range, in target coordinates.
    pub fn range_basis(&self) -> Result<Vec<Vec<C64>>> {
        let d = self.svd()?;
        Ok(d.left.iter().map(|u| self.target.unwhiten(u)).collect())
    }

    /// Weighted-orthonormal basis of the orthogonal complement of the range.
    pub fn range_complement(&self) -> Result<Vec<Vec<C64>>> {
        let d = self.svd()?;
        Ok(complete_basis(&d.left, self.target.dim())
            .iter()
            .map(|u| self.target.unwhiten(u))
            .collect())
    }

    /// Minimal-norm solution of `T x = z`, without any bound check.
    pub fn minimal_norm_solve(&self, z: &[C64]) -> Result<Vec<C64>> {
        self.target.check_len(z)?;
        let d = self.svd()?;
        let zw = self.target.whiten(z);
        let mut x = vec![czero(); self.source.dim()];
        for k in 0..d.rank {
            let c = std_dot(&zw, &d.left[k]) / d.singular[k];
            for (xi, vi) in x.iter_mut().zip(&d.right[k]) {
                *xi += c * vi;
            }
        }
        let x = self.source.unwhiten(&x);
        let tx = self.apply(&x)?;
        let diff: Vec<C64> = tx.iter().zip(z).map(|(a, b)| a - b).collect();
        let res = self.target.norm(&diff);
        let zn = self.target.norm(z);
        if res > SUBSPACE_TOLERANCE * zn.max(f64::MIN_POSITIVE) && res > 0.0 {
            return Err(Error::Precondition(format!(
                "right-hand side is outside the range (residual {res:.3e}, norm {zn:.3e})"
            )));
        }
        Ok(x)
    }
}

/// Check that the annihilator of the graph of `T` under the pairing
/// `(y1, y2)(x, T x) = <x, y1> - <T x, y2>` is exactly the graph `{(T* y, y)}`.
pub fn graph_perp_check(t: &LinearOpModel) -> Result<Certificate> {
    let (n, m) = (t.source.dim(), t.target.dim());
    if n > 32 || m > 32 {
        return Err(Error::InvalidArgument(format!("graph check supports dims <= 32, got {m}x{n}")));
    }
    // Row k is the conjugate of the functional (y1, y2) -> pairing with (e_k, T e_k).
    let pairing = CMatrix::from_fn(n, n + m, |k, j| {
        if j < n {
            if j == k {
                C64::new(t.source.weights[k], 0.0)
            } else {
                czero()
            }
        } else {
            let r = j - n;
            -t.matrix[(r, k)].conj() * t.target.weights[r]
        }
    });
    let d = svd(&pairing)?;
    if d.rank != n {
        return Err(Error::NoConvergence(format!("pairing matrix has rank {} instead of {n}", d.rank)));
    }
    let annihilator = orthonormalize(d.null_space());
    let adj = t.adjoint();
    let graph: Vec<Vec<C64>> = (0..m)
        .map(|j| {
            let mut col = adj.matrix.column(j);
            col.extend((0..m).map(|i| if i == j { C64::new(1.0, 0.0) } else { czero() }));
            col
        })
        .collect();
    let graph = orthonormalize(&graph);
    let mismatch = subspace_mismatch(&annihilator, &graph);
    Ok(Certificate::upper_bound("graph_perp", mismatch, SUBSPACE_TOLERANCE, 0.0)
        .with_param("source_dim", n)
        .with_param("target_dim", m)
        .with_param("complement_dim", annihilator.len()))
}

/// Residual of `null(T*) = range(T)^perp` as subspaces of the target.
pub fn range_perp_residual(t: &LinearOpModel) -> Result<f64> {
    let adj = t.adjoint();
    let null_adj: Vec<Vec<C64>> = adj.null_space()?.iter().map(|v| t.target.whiten(v)).collect();
    let perp: Vec<Vec<C64>> = t.range_complement()?.iter().map(|v| t.target.whiten(v)).collect();
    Ok(subspace_mismatch(&orthonormalize(&null_adj), &orthonormalize(&perp)))
}

/// Smallest constant with `|P_F y| <= C |T* y|` for all `y`, together with a
/// vector attaining it when the constant is finite and nonzero.
#[derive(Debug, Clone)]
pub struct EstimateConstant {
    pub value: f64,
    pub extremal: Option<Vec<C64>>,
}

/// Optimal constant of the dual estimate over the subspace spanned by `f_basis`.
///
/// `range(T)` must lie in `span(F)`. When `F` is exactly the range the
/// constant is `1 / sigma_min`; when `F` is strictly larger a nonzero `y` in
/// `F` is orthogonal to the range, so `T* y = 0` and no finite constant exists.
pub fn estimate_constant_with_witness(t: &LinearOpModel, f_basis: &[Vec<C64>]) -> Result<EstimateConstant> {
    let f = t.target.orthonormal_basis(f_basis)?;
    let fw: Vec<Vec<C64>> = f.iter().map(|v| t.target.whiten(v)).collect();
    let whitened = t.whitened();
    let scale = whitened.frobenius_norm();
    for j in 0..whitened.cols() {
        let col = whitened.column(j);
        let dist = distance_to_span(&col, &fw);
        if dist > SUBSPACE_TOLERANCE * scale.max(f64::MIN_POSITIVE) && dist > 0.0 {
            return Err(Error::Precondition(format!(
                "range is not contained in F (column {j} at distance {dist:.3e})"
            )));
        }
    }
    let d = svd(&whitened)?;
    if f.len() > d.rank {
        return Ok(EstimateConstant { value: f64::INFINITY, extremal: None });
    }
    match d.smallest_nonzero() {
        None => Ok(EstimateConstant { value: 0.0, extremal: None }),
        Some(s) => {
            let y = t.target.unwhiten(&d.left[d.rank - 1]);
            Ok(EstimateConstant { value: 1.0 / s, extremal: Some(y) })
        }
    }
}

pub fn estimate_constant(t: &LinearOpModel, f_basis: &[Vec<C64>]) -> Result<f64> {
    estimate_constant_with_witness(t, f_basis).map(|e| e.value)
}

/// Minimal-norm solution of `T x = z` checked against `|x| <= C |z|`.
pub fn solve_with_bound(t: &LinearOpModel, z: &[C64], c: f64) -> Result<Vec<C64>> {
    let x = t.minimal_norm_solve(z)?;
    let (xn, zn) = (t.source.norm(&x), t.target.norm(z));
    if xn > c * zn * (1.0 + SUBSPACE_TOLERANCE) {
        return Err(Error::Precondition(format!(
            "constant {c} is below the optimal estimate (|x| = {xn:.6e}, |z| = {zn:.6e})"
        )));
    }
    Ok(x)
}

/// Minimal-norm `f` with `T* f = v`; `v` must be orthogonal to `null(T)`.
pub fn solve_adjoint(t: &LinearOpModel, v: &[C64], c: f64) -> Result<Vec<C64>> {
    t.source.check_len(v)?;
    let vn = t.source.norm(v);
    for x in t.null_space()? {
        let p = t.source.inner(v, &x).norm();
        if p > SUBSPACE_TOLERANCE * vn.max(1.0) {
            return Err(Error::Precondition(format!(
                "v is not orthogonal to the null space (pairing {p:.3e})"
            )));
        }
    }
    let f = t.adjoint().minimal_norm_solve(v)?;
    let fnorm = t.target.norm(&f);
    if fnorm > c * vn * (1.0 + SUBSPACE_TOLERANCE) {
        return Err(Error::Precondition(format!(
            "constant {c} is below the optimal estimate (|f| = {fnorm:.6e}, |v| = {vn:.6e})"
        )));
    }
    Ok(f)
}

/// Constant for the basic estimate `|f| <= C(|T* f| + |S f|)`: the larger of
/// `1 / sigma_min(T)` and the inverse of the smallest singular value of `S`
/// on `null(T*)`. Infinite when `S` has a kernel inside `null(T*)`.
pub fn basic_estimate_constant(t: &LinearOpModel, s: &LinearOpModel) -> Result<f64> {
    let dt = t.svd()?;
    let c_t = dt.smallest_nonzero().map_or(0.0, |x| 1.0 / x);
    let complement = complete_basis(&dt.left, t.target.dim());
    if complement.is_empty() {
        return Ok(c_t);
    }
    // S restricted to null(T*), in whitened coordinates on both sides.
    let ws = s.whitened();
    let restricted_cols: Vec<Vec<C64>> = complement.iter().map(|q| ws.mul_vec(q)).collect::<Result<_>>()?;
    let r = CMatrix::from_columns(s.target.dim(), &restricted_cols)?;
    let dr = svd(&r)?;
    if dr.rank < complement.len() {
        return Ok(f64::INFINITY);
    }
    let c_s = 1.0 / dr.singular[dr.rank - 1];
    Ok(c_t.max(c_s))
}

/// Vectors at which the basic estimate is tight: the weakest directions of
/// `T*` on the range and of `S` on `null(T*)`, in target coordinates.
fn extremal_vectors(t: &LinearOpModel, s: &LinearOpModel) -> Result<Vec<Vec<C64>>> {
    let dt = t.svd()?;
    let mut out = Vec::new();
    if dt.rank > 0 {
        out.push(t.target.unwhiten(&dt.left[dt.rank - 1]));
    }
    let complement = complete_basis(&dt.left, t.target.dim());
    if !complement.is_empty() {
        let ws = s.whitened();
        let cols: Vec<Vec<C64>> = complement.iter().map(|q| ws.mul_vec(q)).collect::<Result<_>>()?;
        let dr = svd(&CMatrix::from_columns(s.target.dim(), &cols)?)?;
        if let Some(v) = dr.right.get(dr.rank.saturating_sub(1)) {
            let mut y = vec![czero(); t.target.dim()];
            for (coef, q) in v.iter().zip(&complement) {
                for (yi, qi) in y.iter_mut().zip(q) {
                    *yi += coef * qi;
                }
            }
            out.push(t.target.unwhiten(&y));
        }
    }
    Ok(out)
}

fn random_c64(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| random_c64(rng)).collect()
}

/// Randomized audit of the basic estimate `(1) |f| <= C(|T* f| + |S f|)` and
/// of its bilinear form `(2) |<u, y>| <= C(|T* y| |u| + |S u| |y|)`.
///
/// `samples` random vectors and pairs are drawn from `seed`; the extremal
/// vectors are always included. Also checks `null(T*) = range(T)^perp`. The
/// certificate's lhs is the largest observed ratio and rhs is `C (1 + 1e-8)`.
pub fn basic_estimate_equivalence(
    t: &LinearOpModel,
    s: &LinearOpModel,
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<Certificate> {
    if s.source != t.target {
        return Err(Error::InvalidArgument("S must act on the target space of T".into()));
    }
    let st = s.matrix.matmul(&t.matrix)?;
    let st_norm = st.frobenius_norm();
    if st_norm > 1e-12 * (1.0 + s.matrix.frobenius_norm() * t.matrix.frobenius_norm()) {
        return Err(Error::Precondition(format!("S . T is not zero (norm {st_norm:.3e})")));
    }
    let adj = t.adjoint();
    let y_space = &t.target;
    let dim = y_space.dim();
    let ratio1 = |f: &[C64]| -> Result<f64> {
        let den = adj.target.norm(&adj.apply(f)?) + s.target.norm(&s.apply(f)?);
        let num = y_space.norm(f);
        Ok(if num == 0.0 { 0.0 } else { num / den })
    };
    let ratio2 = |y: &[C64], u: &[C64]| -> Result<f64> {
        let num = y_space.inner(u, y).norm();
        let den = adj.target.norm(&adj.apply(y)?) * y_space.norm(u) + s.target.norm(&s.apply(u)?) * y_space.norm(y);
        Ok(if num == 0.0 { 0.0 } else { num / den })
    };

    let bound = c * (1.0 + AUDIT_SLACK);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0f64, String::new(), Vec::new());
    let mut violations = [0usize; 2];
    let mut record = |which: usize, r: f64, label: String, v: &[C64], worst: &mut (f64, String, Vec<C64>)| {
        if !(r <= bound) {
            violations[which] += 1;
        }
        if r > worst.0 || r.is_nan() {
            *worst = (r, label, v.to_vec());
        }
    };
    let extremal = extremal_vectors(t, s)?;
    for (k, f) in extremal.iter().enumerate() {
        record(0, ratio1(f)?, format!("estimate (1) extremal vector {k}"), f, &mut worst);
        record(1, ratio2(f, f)?, format!("estimate (2) extremal pair {k}"), f, &mut worst);
    }
    for i in 0..samples {
        let f = random_vector(&mut rng, dim);
        record(0, ratio1(&f)?, format!("estimate (1) sample {i}"), &f, &mut worst);
        let y = random_vector(&mut rng, dim);
        let u = random_vector(&mut rng, dim);
        record(1, ratio2(&y, &u)?, format!("estimate (2) sample {i}"), &y, &mut worst);
    }
    let perp = range_perp_residual(t)?;
    let mut lhs = worst.0;
    let mut witness = Witness::at_point(worst.1, &worst.2);
    if perp > SUBSPACE_TOLERANCE {
        lhs = f64::INFINITY;
        witness = Witness::new("null(T*) differs from range(T)^perp", vec![perp]);
    }
    Ok(Certificate::upper_bound("basic_estimate", lhs, bound, 0.0)
        .with_witness(witness)
        .with_param("constant", c)
        .with_param("samples", samples)
        .with_param("seed", seed)
        .with_param("violations_1", violations[0])
        .with_param("violations_2", violations[1])
        .with_param("range_perp_residual", perp))
}

/// Operator pair `(T, S)` with `S . T = 0`.
#[derive(Debug, Clone)]
pub struct OperatorInstance {
    pub t: LinearOpModel,
    pub s: LinearOpModel,
}

/// Seeded random instance with dimensions in `1..=max_dim`. The rank of `T`
/// is sometimes reduced, and `S` annihilates exactly the range of `T`.
pub fn random_instance(seed: u64, max_dim: usize) -> Result<OperatorInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_dim = max_dim.max(1);
    let n = rng.random_range(1..=max_dim);
    let m = rng.random_range(1..=max_dim);
    let weights = |k: usize, rng: &mut ChaCha8Rng| -> Vec<f64> { (0..k).map(|_| rng.random_range(0.5..2.0)).collect() };
    let source = WeightedSpace::new(weights(n, &mut rng))?;
    let target = WeightedSpace::new(weights(m, &mut rng))?;
    let full = n.min(m);
    let rank = if rng.random::<f64>() < 0.3 { rng.random_range(0..=full) } else { full };
    let left = CMatrix::from_fn(m, rank, |_, _| random_c64(&mut rng));
    let right = CMatrix::from_fn(rank, n, |_, _| random_c64(&mut rng));
    let matrix = if rank == 0 { CMatrix::zeros(m, n) } else { left.matmul(&right)? };
    let t = LinearOpModel::new(source, target.clone(), matrix)?;

    let complement = t.range_complement()?;
    let rows = complement.len().max(1);
    let z_space = WeightedSpace::new(weights(rows, &mut rng))?;
    // Row k is the functional y -> <y, q_k>, scaled by a random factor.
    let s_matrix = CMatrix::from_fn(rows, m, |k, j| match complement.get(k) {
        Some(q) => q[j].conj() * target.weights()[j],
        None => czero(),
    });
    let factors: Vec<f64> = (0..rows).map(|_| rng.random_range(0.5..2.0)).collect();
    let s_matrix = s_matrix.scale_rows_cols(&factors, &vec![1.0; m]);
    let s = LinearOpModel::new(target, z_space, s_matrix)?;
    Ok(OperatorInstance { t, s })
}

/// Run every operator check over `count` random instances seeded from `seed`.
/// Returns one aggregated certificate per property.
pub fn audit_random_instances(seed: u64, count: usize, max_dim: usize, samples: usize) -> Result<Vec<Certificate>> {
    let mut graph = (0.0f64, 0u64);
    let mut involution = (0.0f64, 0u64);
    let mut range_perp = (0.0f64, 0u64);
    let mut bound = (f64::NEG_INFINITY, 0u64);
    let mut basic = (f64::NEG_INFINITY, 0u64);
    let mut basic_violations = 0usize;
    let bump = |slot: &mut (f64, u64), value: f64, s: u64| {
        if value > slot.0 || value.is_nan() {
            *slot = (value, s);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let s = rng.random::<u64>();
        let inst = random_instance(s, max_dim)?;
        let t = &inst.t;
        bump(&mut graph, graph_perp_check(t)?.lhs, s);
        let back = t.adjoint().adjoint();
        bump(&mut involution, back.matrix.sub(&t.matrix)?.max_abs(), s);
        bump(&mut range_perp, range_perp_residual(t)?, s);

        let c_t = estimate_constant(t, &t.range_basis()?)?;
        let mut zrng = ChaCha8Rng::seed_from_u64(s ^ 0x9e37_79b9_7f4a_7c15);
        let x0 = random_vector(&mut zrng, t.source.dim());
        let z = t.apply(&x0)?;
        let x = solve_with_bound(t, &z, c_t)?;
        // Relative excess of |x| over C |z|.
        let excess = (t.source.norm(&x) - c_t * t.target.norm(&z)) / (c_t * t.target.norm(&z)).max(f64::MIN_POSITIVE);
        bump(&mut bound, excess, s);

        let c = basic_estimate_constant(t, &inst.s)?;
        let cert = basic_estimate_equivalence(t, &inst.s, c, samples, s)?;
        bump(&mut basic, cert.lhs / cert.rhs - 1.0, s);
        for key in ["violations_1", "violations_2"] {
            if let Some(crate::certificate::ParamValue::Int(v)) = cert.parameters.get(key) {
                basic_violations += *v as usize;
            }
        }
    }
    let tag = |c: Certificate, worst_seed: u64| {
        c.with_param("instances", count)
            .with_param("seed", seed)
            .with_param("max_dim", max_dim)
            .with_witness(Witness::new("worst instance seed", vec![worst_seed as f64]))
    };
    Ok(vec![
        tag(Certificate::upper_bound("operator_graph_perp", graph.0, SUBSPACE_TOLERANCE, 0.0), graph.1),
        tag(Certificate::upper_bound("operator_adjoint_involution", involution.0, 1e-12, 0.0), involution.1),
        tag(Certificate::upper_bound("operator_range_perp", range_perp.0, SUBSPACE_TOLERANCE, 0.0), range_perp.1),
        tag(Certificate::upper_bound("operator_solve_bound", bound.0, SUBSPACE_TOLERANCE, 0.0), bound.1),
        tag(Certificate::upper_bound("operator_basic_estimate", basic.0, 0.0, 0.0), basic.1)
            .with_param("samples", samples)
            .with_param("violations", basic_violations),
    ])
}

/// JSON form of an operator: matrices as nested arrays of `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub matrix: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub source_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub target_weights: Option<Vec<f64>>,
}

impl OperatorSpec {
    pub fn to_model(&self) -> Result<LinearOpModel> {
        let rows: Vec<Vec<C64>> =
            self.matrix.iter().map(|r| r.iter().map(|p| C64::new(p[0], p[1])).collect()).collect();
        let m = CMatrix::from_rows(&rows)?;
        if m.rows() == 0 || m.cols() == 0 {
            return Err(Error::InvalidArgument("operator matrix must be nonempty".into()));
        }
        let source = WeightedSpace::new(self.source_weights.clone().unwrap_or_else(|| vec![1.0; m.cols()]))?;
        let target = WeightedSpace::new(self.target_weights.clone().unwrap_or_else(|| vec![1.0; m.rows()]))?;
        LinearOpModel::new(source, target, m)
    }
}
