//! Subharmonic and plurisubharmonic checks, mollification, exhaustions.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{DomainSpec, Grid, ScalarField};
use crate::quadrature;
use crate::wirtinger::levi_form_fn;
use crate::C64;

/// Values of `-∞` (poles of logarithms) are replaced by this floor.
pub const NEG_INFINITY_FLOOR: f64 = -1e12;

/// Absolute slack of the sub-mean and mollification checks.
pub const SUBMEAN_TOLERANCE: f64 = 1e-9;

/// Smallest Levi eigenvalue accepted by [`psh_test`] is `-PSH_TOLERANCE`;
/// above `+PSH_TOLERANCE` the function is reported strictly psh.
pub const PSH_TOLERANCE: f64 = 1e-6;

fn clamp_value(v: f64) -> f64 {
    if v.is_nan() {
        NEG_INFINITY_FLOOR
    } else {
        v.max(NEG_INFINITY_FLOOR)
    }
}

/// Trapezoid mean of `u` over the circle `|ζ - center| = radius`.
///
/// The mean is taken on the aligned nodes and on nodes rotated by half a
/// step. For smooth `u` the two agree to rounding; a logarithmic pole on or
/// near the circle drags down only the node set passing close to it, so the
/// larger of the two is returned. Poles are clamped to [`NEG_INFINITY_FLOOR`].
pub fn circle_mean(u: &dyn Fn(C64) -> f64, center: C64, radius: f64, nodes: usize) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("circle radius {radius} must be positive")));
    }
    if nodes < 8 {
        return Err(Error::ResolutionTooLow { got: nodes, min: 8 });
    }
    let sample = |offset: f64| -> f64 {
        let total: f64 = (0..nodes)
            .map(|k| {
                let theta = 2.0 * PI * (k as f64 + offset) / nodes as f64;
                clamp_value(u(center + C64::from_polar(radius, theta)))
            })
            .sum();
        total / nodes as f64
    };
    Ok(sample(0.0).max(sample(0.5)))
}

/// Sub-mean value test `u(z) <= mean over circle` at every probe and radius.
pub fn submean_test(u: &dyn Fn(C64) -> f64, probes: &[C64], radii: &[f64], nodes: usize) -> Result<Certificate> {
    if probes.is_empty() || radii.is_empty() {
        return Err(Error::InvalidArgument("need at least one probe and one radius".into()));
    }
    let mut worst: Option<(f64, f64, f64, C64, f64)> = None;
    for &z in probes {
        let center_value = clamp_value(u(z));
        for &r in radii {
            let mean = circle_mean(u, z, r, nodes)?;
            let margin = mean - center_value;
            if worst.is_none_or(|w| margin < w.0) {
                worst = Some((margin, center_value, mean, z, r));
            }
        }
    }
    let (_, lhs, rhs, z, r) = worst.expect("non-empty sweep");
    Ok(Certificate::upper_bound("submean", lhs, rhs, SUBMEAN_TOLERANCE)
        .with_witness(Witness::new("probe (x, y) and radius", vec![z.re, z.im, r]))
        .with_param("probes", probes.len())
        .with_param("radii", radii.to_vec())
        .with_param("circle_nodes", nodes))
}

/// Check that `phi` (an expression in `x1`) is convex and non-decreasing on
/// the range of `u` met by the sub-mean test, then run the sub-mean test on
/// `phi ∘ u`.
pub fn convex_compose_check(
    phi: &Expr,
    u: &dyn Fn(C64) -> f64,
    probes: &[C64],
    radii: &[f64],
    nodes: usize,
) -> Result<Certificate> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &z in probes {
        let mut record = |v: f64| {
            let v = clamp_value(v);
            lo = lo.min(v);
            hi = hi.max(v);
        };
        record(u(z));
        for &r in radii {
            for k in 0..nodes {
                record(u(z + C64::from_polar(r, 2.0 * PI * k as f64 / nodes as f64)));
            }
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument("no finite values of u on the probe circles".into()));
    }
    if hi == lo {
        hi = lo + 1.0;
    }
    let samples = 1001;
    let values: Vec<f64> = (0..samples)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            phi.eval(&[t, 0.0])
        })
        .collect::<std::result::Result<_, _>>()?;
    let scale = values.iter().map(|v| v.abs()).fold(1.0, f64::max);
    for (i, w) in values.windows(2).enumerate() {
        if w[1] - w[0] < -1e-12 * scale {
            let t = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            return Err(Error::Precondition(format!("outer function is decreasing near t = {t:.6e}")));
        }
    }
    for (i, w) in values.windows(3).enumerate() {
        if w[0] - 2.0 * w[1] + w[2] < -1e-9 * scale {
            let t = lo + (hi - lo) * (i + 1) as f64 / (samples - 1) as f64;
            return Err(Error::Precondition(format!("outer function is not convex near t = {t:.6e}")));
        }
    }
    let composed = |z: C64| -> f64 {
        let v = clamp_value(u(z));
        phi.eval(&[v, 0.0]).unwrap_or(f64::NAN)
    };
    let cert = submean_test(&composed, probes, radii, nodes)?;
    Ok(Certificate { check: "convex_compose_submean".into(), ..cert }
        .with_param("range_low", lo)
        .with_param("range_high", hi))
}

/// Normalized radial bump `c δ^{-2} p(|z|/δ)` with `p(t) = 1 - S(t)`,
/// `S` the quintic smoothstep, supported in `|z| < δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialKernel {
    pub delta: f64,
    /// `c` such that the kernel has unit mass.
    pub normalization: f64,
}

fn bump_profile(t: f64) -> f64 {
    if t >= 1.0 {
        return 0.0;
    }
    let t = t.max(0.0);
    1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

impl RadialKernel {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel radius {delta} must be positive")));
        }
        let mass = 2.0 * PI * quadrature::integrate(|t| t * bump_profile(t), 0.0, 1.0, 4, 12);
        Ok(RadialKernel { delta, normalization: 1.0 / mass })
    }

    pub fn value(&self, z: C64) -> f64 {
        self.normalization / (self.delta * self.delta) * bump_profile(z.norm() / self.delta)
    }
}

/// Discrete mollification `u_δ(z) = Σ κ(d) u(z - d)` of a field on a planar
/// grid, with lattice weights `κ ∝ p(|d|/δ)` renormalized to sum 1.
/// The result lives on the `δ`-shrunk domain on the same lattice.
pub fn mollify(u: &ScalarField, kernel: &RadialKernel) -> Result<ScalarField> {
    let grid = u.grid.clone();
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: grid.dim() });
    }
    let delta = kernel.delta;
    let shrunk = grid.domain().shrunk(delta)?;
    let sub = grid.subgrid(&shrunk)?;
    let ax = grid.axis(0);
    let h = ax.h;
    let reach = (delta / h).ceil() as isize;
    let mut stencil = Vec::new();
    for di in -reach..=reach {
        for dj in -reach..=reach {
            let d = C64::new(di as f64 * h, dj as f64 * h);
            let w = bump_profile(d.norm() / delta);
            if w > 0.0 {
                stencil.push((di, dj, w));
            }
        }
    }
    let total: f64 = stencil.iter().map(|s| s.2).sum();
    if total <= 0.0 {
        return Err(Error::ResolutionTooLow { got: ax.side, min: (4.0 * ax.domain.r_outer / delta) as usize });
    }
    let sub_ax = sub.axis(0);
    let mut values = Vec::with_capacity(sub.len());
    for l in 0..sub_ax.len() {
        let (i, j) = sub_ax.cell(l);
        let mut acc = C64::new(0.0, 0.0);
        for &(di, dj, w) in &stencil {
            let node = ax
                .node_at(i as isize - di, j as isize - dj)
                .ok_or(Error::OutsideDomain)?;
            acc += u.values[node] * (w / total);
        }
        values.push(acc);
    }
    ScalarField::new(sub, values)
}

/// Check `u_{δ_big} >= u_{δ_small}` node-wise on the `δ_big`-shrunk grid.
/// `δ_small = 0` compares against `u` itself.
pub fn mollify_monotone_check(u: &ScalarField, delta_big: f64, delta_small: f64) -> Result<Certificate> {
    if !(delta_big > delta_small && delta_small >= 0.0) {
        return Err(Error::InvalidArgument("need delta_big > delta_small >= 0".into()));
    }
    let big = mollify(u, &RadialKernel::new(delta_big)?)?;
    let small = if delta_small > 0.0 { mollify(u, &RadialKernel::new(delta_small)?)? } else { u.clone() };
    let small_on_big = small.restrict(&big.grid)?;
    let mut worst = (f64::INFINITY, 0usize);
    for k in 0..big.grid.len() {
        let m = big.values[k].re - small_on_big.values[k].re;
        if m < worst.0 {
            worst = (m, k);
        }
    }
    let k = worst.1;
    Ok(Certificate::upper_bound(
        "mollify_monotone",
        small_on_big.values[k].re,
        big.values[k].re,
        SUBMEAN_TOLERANCE,
    )
    .with_witness(Witness::at_point("node", &big.grid.coords(k)))
    .with_param("delta_big", delta_big)
    .with_param("delta_small", delta_small))
}

/// Check `(u_a)_b = (u_b)_a` node-wise on the grid where both are defined.
pub fn mollify_commute_check(u: &ScalarField, delta_a: f64, delta_b: f64) -> Result<Certificate> {
    let ka = RadialKernel::new(delta_a)?;
    let kb = RadialKernel::new(delta_b)?;
    let ab = mollify(&mollify(u, &ka)?, &kb)?;
    let ba = mollify(&mollify(u, &kb)?, &ka)?;
    let common = if ab.grid.len() <= ba.grid.len() { ab.grid.clone() } else { ba.grid.clone() };
    let ab = ab.restrict(&common)?;
    let ba = ba.restrict(&common)?;
    let mut worst = (0.0f64, 0usize);
    for k in 0..common.len() {
        let d = (ab.values[k] - ba.values[k]).norm();
        if d > worst.0 {
            worst = (d, k);
        }
    }
    let mut cert = Certificate::upper_bound("mollify_commute", worst.0, 0.0, SUBMEAN_TOLERANCE)
        .with_param("delta_a", delta_a)
        .with_param("delta_b", delta_b)
        .with_param("nodes", common.len());
    if !common.is_empty() {
        cert = cert.with_witness(Witness::at_point("node", &common.coords(worst.1)));
    }
    Ok(cert)
}

#[derive(Debug, Clone)]
pub struct PshVerdict {
    pub certificate: Certificate,
    pub min_eigenvalue: f64,
    /// Smallest eigenvalue above `PSH_TOLERANCE` at every probe.
    pub strict: bool,
}

/// Plurisubharmonicity test by Levi-form eigenvalues at probe points.
pub fn psh_test_fn(f: &dyn Fn(&[C64]) -> Result<f64>, probes: &[Vec<C64>]) -> Result<PshVerdict> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("no probe points".into()));
    }
    let mut worst = (f64::INFINITY, 0usize);
    for (i, p) in probes.iter().enumerate() {
        let lam = levi_form_fn(f, p, None)?.min_eigenvalue()?;
        if lam < worst.0 {
            worst = (lam, i);
        }
    }
    let certificate = Certificate::upper_bound("psh", 0.0, worst.0, PSH_TOLERANCE)
        .with_witness(Witness::at_point("probe with smallest Levi eigenvalue", &probes[worst.1]))
        .with_param("probes", probes.len());
    Ok(PshVerdict { certificate, min_eigenvalue: worst.0, strict: worst.0 > PSH_TOLERANCE })
}

/// Plurisubharmonicity test of a weight expression.
pub fn psh_test(weight: &Expr, probes: &[Vec<C64>]) -> Result<PshVerdict> {
    let f = |z: &[C64]| -> Result<f64> { Ok(weight.eval_complex(z)?) };
    psh_test_fn(&f, probes)
}

/// `-log d(z)` with `d` the distance to the complement of the domain.
pub fn neg_log_distance(domain: &DomainSpec, z: &[C64]) -> Result<f64> {
    let d = domain.boundary_distance(z)?;
    if d <= 0.0 {
        return Err(Error::OutsideDomain);
    }
    Ok(-d.ln())
}

/// `-log d` sampled at the nodes of a grid.
pub fn neg_log_dist_field(grid: &Arc<Grid>) -> Result<ScalarField> {
    let domain = grid.domain().clone();
    ScalarField::try_sample(grid, |z| Ok(C64::new(neg_log_distance(&domain, z)?, 0.0)))
}

/// Exhaustion function `|z|^2 - log d` at the nodes of a grid.
pub fn exhaustion_field(grid: &Arc<Grid>) -> Result<ScalarField> {
    let domain = grid.domain().clone();
    ScalarField::try_sample(grid, |z| {
        let norm2: f64 = z.iter().map(|w| w.norm_sqr()).sum();
        Ok(C64::new(norm2 + neg_log_distance(&domain, z)?, 0.0))
    })
}
