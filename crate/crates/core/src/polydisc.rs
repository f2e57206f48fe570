//! dbar solver on polydiscs by iterated one-variable Cauchy transforms.
//!
//! For a dbar-closed (0,1)-form `f = Σ f_j dzbar_j` the coordinates are
//! processed from last to first. At step `k` the remaining data
//! `g_k = f_k - ∂/∂zbar_k (Σ_{j>k} G_j)` is holomorphic in the later
//! variables on the cutoff core, and `G_k` is the Cauchy transform in `z_k`
//! of `ψ(z_k) g_k`. The sum `u = Σ G_k` solves `∂bar u = f` on the inner
//! polydisc `D'`.

use std::sync::Arc;

use crate::cauchy::cauchy_transform_axis;
use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::grid::{build_uniform_grid, DomainSpec, FormField, Grid, ScalarField};
use crate::wirtinger::{d_dzbar, dbar_form};
use crate::C64;

/// Multiple of `h^2` allowed for the discrete dbar-closure residual.
pub const CLOSURE_TOLERANCE_FACTOR: f64 = 50.0;

/// Multiple of `h` allowed for the solver residual on `D'`.
pub const RESIDUAL_TOLERANCE_FACTOR: f64 = 20.0;

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// Radial cutoff per axis: 1 on `|z_k - c_k| <= inner_k`, 0 from
/// `inner_k + 0.75 (outer_k - inner_k)` outward, quintic in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutoff {
    pub centers: Vec<C64>,
    pub inner: Vec<f64>,
    pub support: Vec<f64>,
}

impl Cutoff {
    pub fn new(centers: Vec<C64>, inner: Vec<f64>, outer: Vec<f64>) -> Result<Self> {
        if centers.len() != inner.len() || inner.len() != outer.len() {
            return Err(Error::DimensionMismatch { expected: centers.len(), got: inner.len() });
        }
        if inner.iter().zip(&outer).any(|(i, o)| !(*i > 0.0 && i < o)) {
            return Err(Error::InvalidArgument("cutoff radii must satisfy 0 < inner < outer".into()));
        }
        let support = inner.iter().zip(&outer).map(|(i, o)| i + 0.75 * (o - i)).collect();
        Ok(Cutoff { centers, inner, support })
    }

    pub fn value(&self, axis: usize, z: C64) -> f64 {
        let t = (z - self.centers[axis]).norm();
        let (a, b) = (self.inner[axis], self.support[axis]);
        1.0 - smoothstep((t - a) / (b - a))
    }

    /// Whether `z_axis` lies in the region where the cutoff is identically 1.
    pub fn in_core(&self, axis: usize, z: C64) -> bool {
        (z - self.centers[axis]).norm() <= self.inner[axis]
    }
}

/// One step of the iteration: the Cauchy transform in `z_k` of `ψ(z_k) g`.
///
/// Requires `∂g/∂zbar_j ≈ 0` (within `tol`) for every `j > k` at interior
/// nodes whose later coordinates lie in the cutoff core.
pub fn solve_step(g: &ScalarField, k: usize, cutoff: &Cutoff, tol: f64) -> Result<ScalarField> {
    let grid = g.grid.clone();
    let n = grid.dim();
    if k >= n || cutoff.inner.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: cutoff.inner.len().max(k + 1) });
    }
    let check_region: Vec<bool> = (0..grid.len())
        .map(|node| grid.depth(node) >= 1 && (k + 1..n).all(|j| cutoff.in_core(j, grid.coord(node, j))))
        .collect();
    for j in k + 1..n {
        let d = d_dzbar(g, j)?;
        let (worst, at) = d.sup_norm_where(|node| check_region[node]);
        if worst > tol {
            let where_ = at.map(|node| format!(" at {:?}", grid.coords(node))).unwrap_or_default();
            return Err(Error::Precondition(format!(
                "data is not holomorphic in z{}: |∂/∂zbar{}| = {worst:.3e} > {tol:.3e}{where_}",
                j + 1,
                j + 1
            )));
        }
    }
    let mut cut = g.clone();
    for (node, v) in cut.values.iter_mut().enumerate() {
        *v *= cutoff.value(k, grid.coord(node, k));
    }
    cauchy_transform_axis(&cut, k)
}

#[derive(Debug, Clone)]
pub struct PolydiscSolution {
    pub u: ScalarField,
    /// `sup |∂bar u - f|` over nodes of `D'`.
    pub residual: f64,
    pub closure_residual: f64,
    pub certificate: Certificate,
}

fn polydisc_axes(domain: &DomainSpec) -> Result<(Vec<C64>, Vec<f64>)> {
    match domain {
        DomainSpec::Polydisc { centers, radii } => Ok((centers.clone(), radii.clone())),
        DomainSpec::Product { discs } => {
            Ok((discs.iter().map(|d| d.center).collect(), discs.iter().map(|d| d.radius).collect()))
        }
        DomainSpec::Disc { center, radius } => Ok((vec![*center], vec![*radius])),
        DomainSpec::Annulus { .. } => Err(Error::InvalidDomain("polydisc solver needs a product of discs".into())),
    }
}

/// Largest dbar-closure residual of a (0,1)-form at interior nodes.
pub fn closure_residual(f: &FormField) -> Result<f64> {
    if f.grid.dim() < 2 {
        return Ok(0.0);
    }
    let d = dbar_form(f)?;
    let grid = f.grid.clone();
    let mut worst: f64 = 0.0;
    for (_, coef) in d.coefficients() {
        worst = worst.max(coef.sup_norm_where(|k| grid.depth(k) >= 1).0);
    }
    Ok(worst)
}

/// Solve `∂bar u = f` for a dbar-closed (0,1)-form on a polydisc, with the
/// residual certified on the concentric polydisc of radii `shrink * r`.
pub fn solve_dbar_polydisc(f: &FormField, shrink: f64) -> Result<PolydiscSolution> {
    let grid = f.grid.clone();
    let n = grid.dim();
    if f.p != 0 || f.q != 1 {
        return Err(Error::InvalidArgument(format!("expected a (0,1)-form, got ({}, {})", f.p, f.q)));
    }
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(Error::InvalidArgument(format!("shrink factor {shrink} must lie in (0, 1)")));
    }
    let (centers, radii) = polydisc_axes(grid.domain())?;
    for (key, coef) in f.coefficients() {
        if let Some(k) = coef.values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Precondition(format!("coefficient {key:?} is non-finite at node {k}")));
        }
    }
    let h = grid.spacing();
    let closure_tol = CLOSURE_TOLERANCE_FACTOR * h * h;
    let closure = closure_residual(f)?;
    if closure > closure_tol {
        return Err(Error::Precondition(format!(
            "form is not dbar-closed: residual {closure:.3e} > {closure_tol:.3e}"
        )));
    }

    let inner_radii: Vec<f64> = radii.iter().map(|r| shrink * r).collect();
    let core: Vec<f64> = inner_radii.iter().zip(&radii).map(|(a, r)| 0.5 * (a + r)).collect();
    let cutoff = Cutoff::new(centers.clone(), core, radii.clone())?;

    let mut u = ScalarField::zeros(&grid);
    for k in (0..n).rev() {
        let mut g = f.component_01(k);
        if k + 1 < n {
            g = g.sub(&d_dzbar(&u, k)?)?;
        }
        let step = solve_step(&g, k, &cutoff, closure_tol)?;
        u = u.add(&step)?;
    }

    let in_inner: Vec<bool> = (0..grid.len())
        .map(|node| (0..n).all(|a| (grid.coord(node, a) - centers[a]).norm() <= inner_radii[a]))
        .collect();
    let mut pointwise = vec![0.0; grid.len()];
    for j in 0..n {
        let d = d_dzbar(&u, j)?.sub(&f.component_01(j))?;
        for (p, v) in pointwise.iter_mut().zip(&d.values) {
            *p += v.norm_sqr();
        }
    }
    let mut residual: f64 = 0.0;
    let mut worst = None;
    for node in 0..grid.len() {
        if in_inner[node] && pointwise[node].sqrt() >= residual {
            residual = pointwise[node].sqrt();
            worst = Some(node);
        }
    }
    let mut certificate =
        Certificate::upper_bound("dbar_polydisc_residual", residual, RESIDUAL_TOLERANCE_FACTOR * h, 0.0)
            .with_param("h", h)
            .with_param("shrink", shrink)
            .with_param("closure_residual", closure)
            .with_param("nodes", grid.len());
    if let Some(node) = worst {
        certificate = certificate.with_witness(Witness::at_point("worst residual node", &grid.coords(node)));
    }
    Ok(PolydiscSolution { u, residual, closure_residual: closure, certificate })
}

#[derive(Debug, Clone)]
pub struct RefinementStudy {
    pub resolutions: Vec<usize>,
    pub spacings: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Certificate of the finest level, annotated with the study.
    pub certificate: Certificate,
}

/// Solve at several resolutions; the residual must decrease strictly.
pub fn polydisc_refinement_study(
    domain: &DomainSpec,
    resolutions: &[usize],
    shrink: f64,
    form: &dyn Fn(&Arc<Grid>) -> Result<FormField>,
) -> Result<RefinementStudy> {
    if resolutions.len() < 2 {
        return Err(Error::InvalidArgument("refinement study needs at least two resolutions".into()));
    }
    let mut spacings = Vec::new();
    let mut residuals = Vec::new();
    let mut last = None;
    for &res in resolutions {
        let grid = build_uniform_grid(domain, res)?;
        let f = form(&grid)?;
        let sol = solve_dbar_polydisc(&f, shrink)?;
        spacings.push(grid.spacing());
        residuals.push(sol.residual);
        last = Some(sol);
    }
    if let Some(w) = residuals.windows(2).find(|w| w[1] >= w[0]) {
        return Err(Error::ResolutionInsufficient(format!(
            "residual did not decrease under refinement ({:.3e} -> {:.3e})",
            w[0], w[1]
        )));
    }
    let mut certificate = last.expect("at least two levels").certificate;
    certificate = certificate
        .with_param("resolutions", resolutions.iter().map(|&r| r as f64).collect::<Vec<_>>())
        .with_param("residuals", residuals.clone());
    Ok(RefinementStudy { resolutions: resolutions.to_vec(), spacings, residuals, certificate })
}

/// A dbar-closed (0,1)-form on C^2 with a known primitive.
#[derive(Debug, Clone, Copy)]
pub struct ClosedFormExample {
    pub name: &'static str,
    pub components: fn(&[C64]) -> [C64; 2],
    pub primitive: fn(&[C64]) -> C64,
}

/// Shipped closed forms: `dzbar1`, `zbar2 dzbar1 + zbar1 dzbar2` and the
/// dbar of `zbar1^2 e^{z2} + |z2|^2`.
pub fn closed_form_examples() -> Vec<ClosedFormExample> {
    vec![
        ClosedFormExample {
            name: "constant",
            components: |_| [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            primitive: |z| z[0].conj(),
        },
        ClosedFormExample {
            name: "bilinear",
            components: |z| [z[1].conj(), z[0].conj()],
            primitive: |z| z[0].conj() * z[1].conj(),
        },
        ClosedFormExample {
            name: "exponential",
            components: |z| [2.0 * z[0].conj() * z[1].exp(), z[1]],
            primitive: |z| z[0].conj() * z[0].conj() * z[1].exp() + z[1].norm_sqr(),
        },
    ]
}

impl ClosedFormExample {
    pub fn sample(&self, grid: &Arc<Grid>) -> Result<FormField> {
        if grid.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: grid.dim() });
        }
        let f = self.components;
        let f1 = ScalarField::sample(grid, |z| f(z)[0])?;
        let f2 = ScalarField::sample(grid, |z| f(z)[1])?;
        FormField::from_01_coefficients(grid, vec![f1, f2])
    }
}
