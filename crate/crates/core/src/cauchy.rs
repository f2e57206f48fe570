//! Cauchy integrals, the planar Cauchy transform and power-series coefficients.
//!
//! The transform `u(ζ) = (1/π) ∫ φ(z) / (ζ - z) dλ(z)` is discretized with the
//! grid quadrature weights; lattice offsets closer than `1.5 h` are dropped
//! from the singular kernel. On a grid it is evaluated as a lattice
//! convolution with zero padding, one slice at a time along the chosen axis.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::grid::{AxisGrid, Grid, ScalarField};
use crate::wirtinger::{cr_residual_where, d_dzbar};
use crate::C64;

/// Lattice offsets with squared length at most this (in units of h^2) are
/// excluded from the singular kernel, i.e. `|z - ζ| < 1.5 h`.
const EXCLUDED_OFFSET_SQ: i64 = 2;

/// Default fraction of the outer radius kept away from the boundary when
/// measuring dbar residuals.
pub const DEFAULT_INTERIOR_MARGIN: f64 = 0.1;

/// Equally spaced nodes on a circle.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    pub center: C64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourGrid {
    pub fn new(center: C64, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidDomain(format!("contour radius {radius} must be positive")));
        }
        if nodes < 8 {
            return Err(Error::ResolutionTooLow { got: nodes, min: 8 });
        }
        Ok(ContourGrid { center, radius, nodes })
    }

    pub fn points(&self) -> Vec<C64> {
        (0..self.nodes)
            .map(|k| self.center + C64::from_polar(self.radius, 2.0 * PI * k as f64 / self.nodes as f64))
            .collect()
    }
}

/// Cauchy-Pompeiu reconstruction
/// `u(ζ) = (1/2πi) ∮ u/(z-ζ) dz - (1/π) ∫ (∂u/∂zbar)/(z-ζ) dλ`.
///
/// The area term is included when `dbar_u` is given; its grid should cover
/// the disc bounded by the contour.
pub fn cauchy_integral(
    boundary_values: &[C64],
    contour: &ContourGrid,
    dbar_u: Option<&ScalarField>,
    zeta: C64,
) -> Result<C64> {
    if boundary_values.len() != contour.nodes {
        return Err(Error::DimensionMismatch { expected: contour.nodes, got: boundary_values.len() });
    }
    let dist = contour.radius - (zeta - contour.center).norm();
    if dist <= 0.0 {
        return Err(Error::OutsideDomain);
    }
    let scale = match dbar_u {
        Some(f) => f.grid.spacing(),
        None => 2.0 * PI * contour.radius / contour.nodes as f64,
    };
    if dist < 3.0 * scale {
        return Err(Error::Precondition(format!(
            "point is {dist:.3e} from the contour, closer than 3h = {:.3e}",
            3.0 * scale
        )));
    }
    let mut total = C64::new(0.0, 0.0);
    for (z, u) in contour.points().iter().zip(boundary_values) {
        total += u * (z - contour.center) / (z - zeta);
    }
    total /= contour.nodes as f64;
    if let Some(f) = dbar_u {
        if f.grid.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: f.grid.dim() });
        }
        total += cauchy_sum(f, zeta);
    }
    Ok(total)
}

/// `(1/π) Σ w φ(z) / (ζ - z)` over nodes with `|z - ζ| >= 1.5 h`.
fn cauchy_sum(phi: &ScalarField, zeta: C64) -> C64 {
    let grid = &phi.grid;
    let h = grid.axis(0).h;
    let mut total = C64::new(0.0, 0.0);
    for k in 0..grid.len() {
        let d = zeta - grid.coord(k, 0);
        if d.norm_sqr() >= 2.25 * h * h {
            total += phi.values[k] * grid.weight(k) / d;
        }
    }
    total / PI
}

/// Cauchy transform of a field on a planar domain, evaluated at any point.
pub fn cauchy_transform(phi: &ScalarField, zeta: C64) -> Result<C64> {
    if phi.grid.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: phi.grid.dim() });
    }
    Ok(cauchy_sum(phi, zeta))
}

/// Zero-padded FFT convolution with the truncated kernel `1/(π d)` on one
/// axis lattice.
pub struct LatticeConvolver {
    side: usize,
    pad: usize,
    kernel_hat: Vec<C64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl LatticeConvolver {
    pub fn new(axis: &AxisGrid) -> Self {
        let side = axis.side;
        let pad = 2 * side;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(pad);
        let inverse = planner.plan_fft_inverse(pad);
        let mut kernel = vec![C64::new(0.0, 0.0); pad * pad];
        let s = side as i64;
        for di in -(s - 1)..s {
            for dj in -(s - 1)..s {
                if di * di + dj * dj <= EXCLUDED_OFFSET_SQ {
                    continue;
                }
                let d = C64::new(di as f64, dj as f64) * axis.h;
                let row = di.rem_euclid(pad as i64) as usize;
                let col = dj.rem_euclid(pad as i64) as usize;
                kernel[row * pad + col] = 1.0 / (PI * d);
            }
        }
        let mut conv = LatticeConvolver { side, pad, kernel_hat: Vec::new(), forward, inverse };
        conv.fft2(&mut kernel, true);
        conv.kernel_hat = kernel;
        conv
    }

    fn fft2(&self, buf: &mut [C64], forward: bool) {
        let plan = if forward { &self.forward } else { &self.inverse };
        plan.process(buf);
        transpose(buf, self.pad);
        plan.process(buf);
        transpose(buf, self.pad);
    }

    /// Transform of `values * weights` for one slice; values are per local
    /// node of `axis`.
    fn apply_slice(&self, axis: &AxisGrid, input: &[C64], buf: &mut [C64], out: &mut [C64]) {
        buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let w = axis.weights();
        for (l, v) in input.iter().enumerate() {
            let (i, j) = axis.cell(l);
            buf[i * self.pad + j] = v * w[l];
        }
        self.fft2(buf, true);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.fft2(buf, false);
        let norm = 1.0 / (self.pad * self.pad) as f64;
        for (l, o) in out.iter_mut().enumerate() {
            let (i, j) = axis.cell(l);
            *o = buf[i * self.pad + j] * norm;
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }
}

fn transpose(buf: &mut [C64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Cauchy transform along one axis, applied slice by slice.
pub fn cauchy_transform_axis(phi: &ScalarField, axis: usize) -> Result<ScalarField> {
    let grid = &phi.grid;
    if axis >= grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: axis + 1 });
    }
    let ax = grid.axis(axis);
    let conv = LatticeConvolver::new(ax);
    let stride = grid.stride(axis);
    let count = ax.len();
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    let mut buf = vec![C64::new(0.0, 0.0); conv.pad * conv.pad];
    let mut slice_in = vec![C64::new(0.0, 0.0); count];
    let mut slice_out = vec![C64::new(0.0, 0.0); count];
    for base in 0..grid.len() {
        if grid.local(base, axis) != 0 {
            continue;
        }
        for l in 0..count {
            slice_in[l] = phi.values[base + l * stride];
        }
        if slice_in.iter().all(|v| *v == C64::new(0.0, 0.0)) {
            continue;
        }
        conv.apply_slice(ax, &slice_in, &mut buf, &mut slice_out);
        for l in 0..count {
            out[base + l * stride] = slice_out[l];
        }
    }
    ScalarField::new(grid.clone(), out)
}

/// Nodes at distance at least `margin * (outer radius)` from the boundary
/// in every axis.
pub fn interior_region(grid: &Grid, margin: f64) -> Vec<bool> {
    (0..grid.len())
        .map(|k| {
            (0..grid.dim()).all(|a| {
                let f = grid.axis(a).domain;
                f.boundary_distance(grid.coord(k, a)) >= margin * f.r_outer
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DbarSolution {
    pub u: ScalarField,
    /// `sup |∂u/∂zbar - φ|` over the interior region.
    pub residual: f64,
    pub certificate: Certificate,
}

/// Solve `∂u/∂zbar = φ` on a planar domain by the Cauchy transform.
pub fn solve_dbar_1d(phi: &ScalarField) -> Result<DbarSolution> {
    solve_dbar_1d_with(phi, DEFAULT_INTERIOR_MARGIN)
}

/// As [`solve_dbar_1d`] with a chosen interior margin (fraction of radius).
pub fn solve_dbar_1d_with(phi: &ScalarField, interior_margin: f64) -> Result<DbarSolution> {
    let grid = phi.grid.clone();
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: grid.dim() });
    }
    if let Some(k) = phi.values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite { node: k });
    }
    let u = cauchy_transform_axis(phi, 0)?;
    let du = d_dzbar(&u, 0)?;
    let region = interior_region(&grid, interior_margin);
    let diff = du.sub(phi)?;
    let (residual, worst) = diff.sup_norm_where(|k| region[k]);
    let h = grid.spacing();
    let mut cert = Certificate::upper_bound("dbar_1d_residual", residual, 10.0 * h * h, 0.0)
        .with_param("h", h)
        .with_param("interior_margin", interior_margin)
        .with_param("nodes", grid.len());
    if let Some(k) = worst {
        cert = cert.with_witness(Witness::at_point("worst residual node", &grid.coords(k)));
    }
    Ok(DbarSolution { u, residual, certificate: cert })
}

/// Bound on the holomorphic defect `cr_residual(u - particular)` in the
/// one-variable refinement study.
pub const HOLOMORPHIC_DEFECT_TOLERANCE: f64 = 1e-3;

/// Right-hand side of `∂u/∂zbar = φ` with a known particular solution.
#[derive(Debug, Clone, Copy)]
pub struct DbarExample {
    pub name: &'static str,
    pub data: fn(C64) -> C64,
    pub particular: fn(C64) -> C64,
}

/// `φ = 1, zbar, e^z` with particular solutions `zbar, zbar^2/2, zbar e^z`.
pub fn dbar_examples() -> Vec<DbarExample> {
    vec![
        DbarExample { name: "one", data: |_| C64::new(1.0, 0.0), particular: |z| z.conj() },
        DbarExample { name: "zbar", data: |z| z.conj(), particular: |z| 0.5 * z.conj() * z.conj() },
        DbarExample { name: "exp", data: |z| z.exp(), particular: |z| z.conj() * z.exp() },
    ]
}

/// Solve at each resolution and measure how far `u - particular` is from
/// holomorphic on the interior region. The defect must decrease strictly and
/// end below [`HOLOMORPHIC_DEFECT_TOLERANCE`].
pub fn dbar_1d_refinement(
    domain: &crate::grid::DomainSpec,
    example: &DbarExample,
    resolutions: &[usize],
) -> Result<Certificate> {
    if resolutions.len() < 2 {
        return Err(Error::InvalidArgument("refinement study needs at least two resolutions".into()));
    }
    let mut defects = Vec::new();
    let mut finest = None;
    for &res in resolutions {
        let grid = crate::grid::build_uniform_grid(domain, res)?;
        if grid.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: grid.dim() });
        }
        let phi = ScalarField::sample(&grid, |z| (example.data)(z[0]))?;
        let sol = solve_dbar_1d(&phi)?;
        let particular = ScalarField::sample(&grid, |z| (example.particular)(z[0]))?;
        let region = interior_region(&grid, DEFAULT_INTERIOR_MARGIN);
        let defect = cr_residual_where(&sol.u.sub(&particular)?, |k| region[k])?;
        defects.push(defect);
        finest = Some((grid.spacing(), sol.residual));
    }
    if let Some(w) = defects.windows(2).find(|w| w[1] >= w[0]) {
        return Err(Error::ResolutionInsufficient(format!(
            "holomorphic defect did not decrease under refinement ({:.3e} -> {:.3e})",
            w[0], w[1]
        )));
    }
    let (h, residual) = finest.expect("at least two levels");
    Ok(Certificate::upper_bound(
        format!("dbar_1d_{}", example.name),
        *defects.last().expect("non-empty"),
        HOLOMORPHIC_DEFECT_TOLERANCE,
        0.0,
    )
    .with_param("h", h)
    .with_param("dbar_residual", residual)
    .with_param("resolutions", resolutions.iter().map(|&r| r as f64).collect::<Vec<_>>())
    .with_param("defects", defects))
}

/// Equally spaced nodes on the distinguished boundary of a polydisc.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    pub centers: Vec<C64>,
    pub radii: Vec<f64>,
    pub nodes_per_circle: usize,
}

impl TorusGrid {
    pub fn new(centers: Vec<C64>, radii: Vec<f64>, nodes_per_circle: usize) -> Result<Self> {
        if centers.len() != radii.len() || centers.is_empty() {
            return Err(Error::DimensionMismatch { expected: centers.len(), got: radii.len() });
        }
        if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidDomain("torus radii must be positive".into()));
        }
        if nodes_per_circle < 8 {
            return Err(Error::ResolutionTooLow { got: nodes_per_circle, min: 8 });
        }
        Ok(TorusGrid { centers, radii, nodes_per_circle })
    }

    pub fn dim(&self) -> usize {
        self.radii.len()
    }

    pub fn len(&self) -> usize {
        self.nodes_per_circle.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node points in mixed radix order, last axis fastest.
    pub fn points(&self) -> Vec<Vec<C64>> {
        let m = self.nodes_per_circle;
        let n = self.dim();
        (0..self.len())
            .map(|mut idx| {
                let mut p = vec![C64::new(0.0, 0.0); n];
                for a in (0..n).rev() {
                    let k = idx % m;
                    idx /= m;
                    p[a] = self.centers[a] + C64::from_polar(self.radii[a], 2.0 * PI * k as f64 / m as f64);
                }
                p
            })
            .collect()
    }
}

/// Taylor coefficients `a_α` of a holomorphic function about the torus center.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    pub dim: usize,
    pub max_order: usize,
    /// Mixed radix over `(max_order + 1)^dim`, last index fastest.
    pub coeffs: Vec<C64>,
}

impl PowerSeries {
    fn flat(&self, alpha: &[usize]) -> usize {
        alpha.iter().fold(0, |acc, &a| acc * (self.max_order + 1) + a)
    }

    pub fn get(&self, alpha: &[usize]) -> Option<C64> {
        if alpha.len() != self.dim || alpha.iter().any(|&a| a > self.max_order) {
            return None;
        }
        Some(self.coeffs[self.flat(alpha)])
    }

    pub fn multi_indices(&self) -> Vec<Vec<usize>> {
        let k = self.max_order + 1;
        (0..self.coeffs.len())
            .map(|mut idx| {
                let mut a = vec![0; self.dim];
                for slot in a.iter_mut().rev() {
                    *slot = idx % k;
                    idx /= k;
                }
                a
            })
            .collect()
    }

    /// Evaluate the truncated series at `z` about `center`.
    pub fn evaluate(&self, center: &[C64], z: &[C64]) -> C64 {
        self.multi_indices()
            .iter()
            .zip(&self.coeffs)
            .map(|(alpha, a)| {
                let mut term = *a;
                for (j, &e) in alpha.iter().enumerate() {
                    term *= (z[j] - center[j]).powu(e as u32);
                }
                term
            })
            .sum()
    }
}

/// Coefficients `a_α = r^{-α} m^{-n} Σ u(θ) e^{-i α·θ}` for every
/// `α` with entries at most `max_order`.
pub fn power_series(torus: &TorusGrid, values: &[C64], max_order: usize) -> Result<PowerSeries> {
    let m = torus.nodes_per_circle;
    let n = torus.dim();
    if values.len() != torus.len() {
        return Err(Error::DimensionMismatch { expected: torus.len(), got: values.len() });
    }
    if 2 * max_order >= m {
        return Err(Error::ResolutionTooLow { got: m, min: 2 * max_order + 1 });
    }
    let twiddle: Vec<C64> = (0..m).map(|j| C64::from_polar(1.0, -2.0 * PI * j as f64 / m as f64)).collect();
    let k = max_order + 1;
    let mut dims = vec![m; n];
    let mut data = values.to_vec();
    for axis in 0..n {
        let outer: usize = dims[..axis].iter().product();
        let inner: usize = dims[axis + 1..].iter().product();
        let mut next = vec![C64::new(0.0, 0.0); outer * k * inner];
        for o in 0..outer {
            for i in 0..inner {
                for alpha in 0..k {
                    let mut acc = C64::new(0.0, 0.0);
                    for t in 0..m {
                        acc += data[(o * m + t) * inner + i] * twiddle[(alpha * t) % m];
                    }
                    next[(o * k + alpha) * inner + i] = acc / m as f64 / torus.radii[axis].powi(alpha as i32);
                }
            }
        }
        data = next;
        dims[axis] = k;
    }
    Ok(PowerSeries { dim: n, max_order, coeffs: data })
}

/// Check `|a_α| r^α <= M` for every computed coefficient.
pub fn cauchy_inequality_check(series: &PowerSeries, bound: f64, radii: &[f64]) -> Result<Certificate> {
    if radii.len() != series.dim {
        return Err(Error::DimensionMismatch { expected: series.dim, got: radii.len() });
    }
    let mut worst = (0.0, vec![0; series.dim]);
    for (alpha, a) in series.multi_indices().into_iter().zip(&series.coeffs) {
        let scaled = a.norm() * alpha.iter().zip(radii).map(|(&e, r)| r.powi(e as i32)).product::<f64>();
        if scaled > worst.0 {
            worst = (scaled, alpha);
        }
    }
    Ok(Certificate::upper_bound("cauchy_inequality", worst.0, bound, 1e-8 * bound.abs())
        .with_witness(Witness::new("multi-index", worst.1.iter().map(|&a| a as f64).collect()))
        .with_param("max_order", series.max_order))
}
