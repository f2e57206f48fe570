//! Weighted L2 estimates with explicit constants.
//!
//! Contents: the logarithmic auxiliary weights `rho = log(|z|^2 + s^2)`,
//! `eta = -rho + log(-rho)`, `psi = -log(eta)` with their derivative identities;
//! the cutoff constant `C` and the optimised constant `C'` of the extension
//! estimate; the weighted dbar estimate `int |u|^2 e^-phi <= int |f|_A^2 e^-phi`
//! for the minimal solution; the extension inequality with the singular density
//! `1 / (|z_n|^2 log^2 |z_n|^2)`; and the L^p iteration, breakdown exponents and
//! openness threshold for model weights.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cauchy::solve_dbar_1d;
use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{build_grid, DomainSpec, FormField, Grid, ScalarField};
use crate::polydisc::solve_dbar_polydisc;
use crate::quadrature::{gauss_legendre, halton_disc, integrate};
use crate::wirtinger::levi_form;
use crate::C64;

/// Tolerance for finite-difference identities, relative to `1 + |value|`.
pub const IDENTITY_TOLERANCE: f64 = 1e-5;
/// Slack for inequalities, relative to `max(1, |value|)`.
pub const INEQUALITY_TOLERANCE: f64 = 1e-8;
/// Relative step of the finite differences, scaled by `sqrt(|z|^2 + s^2)`.
pub const WEIGHT_FD_STEP: f64 = 1e-3;
/// Levi eigenvalues at or below this are treated as singular.
pub const LEVI_SINGULAR: f64 = 1e-10;

/// One row of a sweep written to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub point: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// `rho`, `eta` and `psi` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChenValues {
    pub rho: f64,
    pub eta: f64,
    pub psi: f64,
}

/// Closed-form derivatives of the auxiliary weights at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChenDerivatives {
    pub rho_z: C64,
    pub rho_zbar: C64,
    pub rho_zzbar: f64,
    pub eta_z: C64,
    pub eta_zzbar: f64,
    pub psi_zzbar: f64,
    pub psi_z_sq: f64,
}

/// The auxiliary weights for a fixed `s` in `(0, e^-1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChenWeights {
    s: f64,
}

fn raw_values(s: f64, z: C64) -> ChenValues {
    let rho = (z.norm_sqr() + s * s).ln();
    let eta = -rho + (-rho).ln();
    ChenValues { rho, eta, psi: -eta.ln() }
}

impl ChenWeights {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < (-0.5f64).exp()) {
            return Err(Error::InvalidArgument(format!("s = {s} must lie in (0, e^-1/2)")));
        }
        Ok(ChenWeights { s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Largest admissible `|z|`: `|z|^2 + s^2 < e^-1`.
    pub fn admissible_radius(&self) -> f64 {
        ((-1.0f64).exp() - self.s * self.s).sqrt()
    }

    fn check(&self, z: C64) -> Result<()> {
        let t = z.norm_sqr() + self.s * self.s;
        if !(t < (-1.0f64).exp()) {
            return Err(Error::OutsideDomain);
        }
        Ok(())
    }

    pub fn values(&self, z: C64) -> Result<ChenValues> {
        self.check(z)?;
        Ok(raw_values(self.s, z))
    }

    pub fn derivatives(&self, z: C64) -> Result<ChenDerivatives> {
        let v = self.values(z)?;
        let s2 = self.s * self.s;
        let t = z.norm_sqr() + s2;
        let rho_z = z.conj() / t;
        let rho_zbar = z / t;
        let rho_zzbar = s2 / (t * t);
        let factor = 1.0 + 1.0 / (-v.rho);
        let eta_z = -factor * rho_z;
        let rho_z_sq = rho_z.norm_sqr();
        let eta_zzbar = -factor * rho_zzbar - rho_z_sq / (v.rho * v.rho);
        let psi_zzbar = -eta_zzbar / v.eta + eta_z.norm_sqr() / (v.eta * v.eta);
        let psi_z_sq = factor * factor * rho_z_sq / (v.eta * v.eta);
        Ok(ChenDerivatives { rho_z, rho_zbar, rho_zzbar, eta_z, eta_zzbar, psi_zzbar, psi_z_sq })
    }
}

/// `(rho, eta, psi)` at `z`; errors when `|z|^2 + s^2 >= e^-1`.
pub fn chen_weights(s: f64, z: C64) -> Result<ChenValues> {
    ChenWeights::new(s)?.values(z)
}

/// Fourth-order finite differences of a real function of `z = x + iy`.
struct Fd {
    dx: f64,
    dy: f64,
    dxx: f64,
    dyy: f64,
}

fn fourth_order(g: &dyn Fn(C64) -> f64, z: C64, h: f64) -> Fd {
    let at = |dx: f64, dy: f64| g(z + C64::new(dx, dy));
    let g0 = g(z);
    let first = |p1: f64, m1: f64, p2: f64, m2: f64| (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    let second = |p1: f64, m1: f64, p2: f64, m2: f64| (-p2 + 16.0 * p1 - 30.0 * g0 + 16.0 * m1 - m2) / (12.0 * h * h);
    let (xp1, xm1, xp2, xm2) = (at(h, 0.0), at(-h, 0.0), at(2.0 * h, 0.0), at(-2.0 * h, 0.0));
    let (yp1, ym1, yp2, ym2) = (at(0.0, h), at(0.0, -h), at(0.0, 2.0 * h), at(0.0, -2.0 * h));
    Fd {
        dx: first(xp1, xm1, xp2, xm2),
        dy: first(yp1, ym1, yp2, ym2),
        dxx: second(xp1, xm1, xp2, xm2),
        dyy: second(yp1, ym1, yp2, ym2),
    }
}

impl Fd {
    fn d_z(&self) -> C64 {
        C64::new(0.5 * self.dx, -0.5 * self.dy)
    }
    fn d_zbar(&self) -> C64 {
        C64::new(0.5 * self.dx, 0.5 * self.dy)
    }
    fn d_zzbar(&self) -> f64 {
        0.25 * (self.dxx + self.dyy)
    }
}

/// Sample points for the weight checks: `count` Halton points in the
/// admissible disc (shrunk by 0.999) plus `count / 10` in `|z| <= s`.
pub fn chen_sample_points(s: f64, count: usize) -> Result<Vec<C64>> {
    let w = ChenWeights::new(s)?;
    let mut pts = halton_disc(count, 0.999 * w.admissible_radius());
    pts.extend(halton_disc(count / 10, s));
    Ok(pts)
}

struct Tracker {
    name: &'static str,
    worst: f64,
    at: Option<(C64, f64, f64)>,
    count: usize,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Tracker { name, worst: f64::NEG_INFINITY, at: None, count: 0 }
    }

    fn push(&mut self, score: f64, z: C64, a: f64, b: f64) {
        self.count += 1;
        if score > self.worst || score.is_nan() {
            self.worst = score;
            self.at = Some((z, a, b));
        }
    }

    fn certificate(&self, rhs: f64, tolerance: f64, s: f64, pair: (&str, &str)) -> Certificate {
        let lhs = if self.count == 0 { 0.0 } else { self.worst };
        let mut c = Certificate::upper_bound(self.name, lhs, rhs, tolerance)
            .with_param("s", s)
            .with_param("points", self.count);
        if let Some((z, a, b)) = self.at {
            c = c.with_witness(Witness::new(
                format!("worst point (x, y, {}, {})", pair.0, pair.1),
                vec![z.re, z.im, a, b],
            ));
        }
        c
    }
}

/// Result of the weight identity sweep.
#[derive(Debug, Clone)]
pub struct WeightSweep {
    /// Six identities then three inequalities.
    pub certificates: Vec<Certificate>,
    /// Per-point inequality data.
    pub rows: Vec<SweepRow>,
}

/// Verify the derivative identities and lower bounds of the auxiliary weights.
///
/// Identities compare fourth-order finite differences (step
/// `h_rel * sqrt(|z|^2 + s^2)`) with closed forms: the score is
/// `|fd - exact| / (1 + |exact|)` against `1e-5`. Inequalities use the closed
/// form of `psi_zzbar` and score `(bound - psi_zzbar) / max(1, |psi_zzbar|)`
/// against zero with slack `1e-8`. The last bound is only tested where
/// `|z| <= s`.
pub fn weight_identities_check(s: f64, points: &[C64], h_rel: f64) -> Result<WeightSweep> {
    let w = ChenWeights::new(s)?;
    if !(h_rel > 0.0 && h_rel <= 1e-2) {
        return Err(Error::InvalidArgument(format!("relative FD step {h_rel} must lie in (0, 1e-2]")));
    }
    let mut t_rho_zbar = Tracker::new("weight_rho_zbar");
    let mut t_rho_zzbar = Tracker::new("weight_rho_zzbar");
    let mut t_eta_z = Tracker::new("weight_eta_z");
    let mut t_eta_zzbar = Tracker::new("weight_eta_zzbar");
    let mut t_psi_zzbar = Tracker::new("weight_psi_zzbar");
    let mut t_psi_z = Tracker::new("weight_psi_z_modulus");
    let mut t_low_eta = Tracker::new("weight_psi_zzbar_bound_eta_z");
    let mut t_low_rho = Tracker::new("weight_psi_zzbar_bound_rho_zzbar");
    let mut t_low_small = Tracker::new("weight_psi_zzbar_bound_small_z");
    let mut rows = Vec::new();

    let rho_f = |z: C64| raw_values(s, z).rho;
    let eta_f = |z: C64| raw_values(s, z).eta;
    let psi_f = |z: C64| raw_values(s, z).psi;
    let rel = |fd: C64, exact: C64| (fd - exact).norm() / (1.0 + exact.norm());
    let below = |bound: f64, value: f64| (bound - value) / value.abs().max(1.0);

    for &z in points {
        let v = w.values(z)?;
        let d = w.derivatives(z)?;
        let t = z.norm_sqr() + s * s;
        let h = h_rel * t.sqrt();
        let fr = fourth_order(&rho_f, z, h);
        let fe = fourth_order(&eta_f, z, h);
        let fp = fourth_order(&psi_f, z, h);

        t_rho_zbar.push(rel(fr.d_zbar(), d.rho_zbar), z, fr.d_zbar().norm(), d.rho_zbar.norm());
        let re = |x: f64| C64::new(x, 0.0);
        t_rho_zzbar.push(rel(re(fr.d_zzbar()), re(d.rho_zzbar)), z, fr.d_zzbar(), d.rho_zzbar);
        t_eta_z.push(rel(fe.d_z(), d.eta_z), z, fe.d_z().norm(), d.eta_z.norm());
        t_eta_zzbar.push(rel(re(fe.d_zzbar()), re(d.eta_zzbar)), z, fe.d_zzbar(), d.eta_zzbar);
        t_psi_zzbar.push(rel(re(fp.d_zzbar()), re(d.psi_zzbar)), z, fp.d_zzbar(), d.psi_zzbar);
        let fd_psi_z_sq = fp.d_z().norm_sqr();
        t_psi_z.push(rel(re(fd_psi_z_sq), re(d.psi_z_sq)), z, fd_psi_z_sq, d.psi_z_sq);

        let mut ineq = |tracker: &mut Tracker, bound: f64| {
            let score = below(bound, d.psi_zzbar);
            tracker.push(score, z, bound, d.psi_zzbar);
            rows.push(SweepRow {
                label: tracker.name.to_string(),
                point: vec![z.re, z.im],
                lhs: bound,
                rhs: d.psi_zzbar,
                margin: d.psi_zzbar - bound,
            });
        };
        let one_minus_rho = 1.0 - v.rho;
        let b_eta = (1.0 / (v.eta * v.eta) + 1.0 / (v.eta * one_minus_rho * one_minus_rho)) * d.eta_z.norm_sqr();
        ineq(&mut t_low_eta, b_eta);
        ineq(&mut t_low_rho, s * s / (v.eta * t * t));
        if z.norm_sqr() <= s * s {
            ineq(&mut t_low_small, d.rho_z.norm_sqr() / v.eta);
        }
    }

    let eq = ("finite difference", "closed form");
    let ineq = ("lower bound", "psi_zzbar");
    let mut certificates = Vec::new();
    for t in [&t_rho_zbar, &t_rho_zzbar, &t_eta_z, &t_eta_zzbar, &t_psi_zzbar, &t_psi_z] {
        certificates.push(t.certificate(IDENTITY_TOLERANCE, 0.0, s, eq).with_param("h_rel", h_rel));
    }
    for t in [&t_low_eta, &t_low_rho, &t_low_small] {
        certificates.push(t.certificate(0.0, INEQUALITY_TOLERANCE, s, ineq));
    }
    Ok(WeightSweep { certificates, rows })
}

/// Order chain `1 < -rho < eta < -2 rho` and `-log(4 log(1/s)) < psi < 0` at
/// every point. The score is the largest of the differences that must be
/// negative; the certificate passes iff it stays below zero.
pub fn order_chain_check(s: f64, points: &[C64]) -> Result<Certificate> {
    let w = ChenWeights::new(s)?;
    let psi_floor = -(4.0 * (1.0 / s).ln()).ln();
    let mut worst = (f64::NEG_INFINITY, C64::new(0.0, 0.0));
    for &z in points {
        let v = w.values(z)?;
        let gaps = [1.0 + v.rho, -v.rho - v.eta, v.eta + 2.0 * v.rho, v.psi, psi_floor - v.psi];
        let g = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if g > worst.0 || g.is_nan() {
            worst = (g, z);
        }
    }
    let lhs = if points.is_empty() { f64::NEG_INFINITY } else { worst.0 };
    let mut cert = Certificate::upper_bound("weight_order_chain", lhs, 0.0, 0.0)
        .with_param("s", s)
        .with_param("points", points.len());
    if lhs == 0.0 {
        // Strict inequalities: equality fails.
        cert.pass = false;
    }
    Ok(cert.with_witness(Witness::at_point("point with the tightest inequality", &[worst.1])))
}

/// Decreasing cutoff profile, equal to 1 for `t <= 1/2` and 0 for `t >= 1`.
#[derive(Debug, Clone)]
pub enum ChiProfile {
    /// `1 - S((t - lo) / (hi - lo))` with the quintic smoothstep `S`.
    Smoothstep { lo: f64, hi: f64 },
    /// Expression in `x1 = t`; derivative by central differences.
    Expression(Expr),
}

impl Default for ChiProfile {
    fn default() -> Self {
        ChiProfile::Smoothstep { lo: 0.5, hi: 1.0 }
    }
}

fn smoothstep_derivative(u: f64) -> f64 {
    if (0.0..=1.0).contains(&u) {
        30.0 * u * u * (1.0 - u) * (1.0 - u)
    } else {
        0.0
    }
}

impl ChiProfile {
    pub fn value(&self, t: f64) -> Result<f64> {
        match self {
            ChiProfile::Smoothstep { lo, hi } => {
                let u = ((t - lo) / (hi - lo)).clamp(0.0, 1.0);
                Ok(1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u))
            }
            ChiProfile::Expression(e) => Ok(e.eval(&[t, 0.0])?),
        }
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        match self {
            ChiProfile::Smoothstep { lo, hi } => Ok(-smoothstep_derivative((t - lo) / (hi - lo)) / (hi - lo)),
            ChiProfile::Expression(_) => {
                let h = 1e-6;
                Ok((self.value(t + h)? - self.value(t - h)?) / (2.0 * h))
            }
        }
    }

    /// Check the boundary values and monotonicity on a sampled grid.
    pub fn validate(&self) -> Result<()> {
        if let ChiProfile::Smoothstep { lo, hi } = self {
            if !(0.5 <= *lo && lo < hi && *hi <= 1.0) {
                return Err(Error::Precondition(format!("smoothstep bridge [{lo}, {hi}] must lie in [1/2, 1]")));
            }
        }
        for k in 0..=200 {
            let t = k as f64 / 200.0 * 0.5;
            if (self.value(t)? - 1.0).abs() > 1e-12 {
                return Err(Error::Precondition(format!("chi({t}) must equal 1")));
            }
            let t = 1.0 + k as f64 / 200.0;
            if self.value(t)?.abs() > 1e-12 {
                return Err(Error::Precondition(format!("chi({t}) must equal 0")));
            }
        }
        let mut prev = self.value(0.5)?;
        for k in 1..=2000 {
            let t = 0.5 + 0.5 * k as f64 / 2000.0;
            let v = self.value(t)?;
            if v > prev + 1e-12 {
                return Err(Error::Precondition(format!("chi is not decreasing near t = {t}")));
            }
            prev = v;
        }
        Ok(())
    }

    /// Interval outside which `chi'` vanishes.
    fn support(&self) -> (f64, f64) {
        match self {
            ChiProfile::Smoothstep { lo, hi } => (*lo, *hi),
            ChiProfile::Expression(_) => (0.5, 1.0),
        }
    }
}

/// The cutoff constant with its cross-checks.
#[derive(Debug, Clone)]
pub struct ChenConstant {
    /// Radial Gauss-Legendre value of `2 pi int chi'(t)^2 (t + 1)^2 dt`.
    pub value: f64,
    /// Cartesian tensor-product value of the same area integral.
    pub cartesian: f64,
    /// `(s, value)` for the integral rescaled by `z = s w`.
    pub rescaled: Vec<(f64, f64)>,
    pub certificates: Vec<Certificate>,
}

/// Agreement required between independent evaluations of the constant.
pub const CONSTANT_AGREEMENT: f64 = 1e-6;

/// `C = 2 int_{1/2 < |w|^2 < 1} chi'(|w|^2)^2 (|w|^2 + 1)^2 dA(w)`, evaluated
/// radially, cross-checked by a Cartesian tensor rule and by the rescaled
/// integrals `2 int chi'(|z|^2/s^2)^2 (|z|^2 + s^2)^2 / s^6 dA(z)` for each `s`.
pub fn chen_constant(profile: &ChiProfile, scales: &[f64]) -> Result<ChenConstant> {
    profile.validate()?;
    let (lo, hi) = profile.support();
    let dchi = |t: f64| profile.derivative(t).unwrap_or(f64::NAN);
    let value = 2.0 * PI * integrate(|t| dchi(t).powi(2) * (t + 1.0).powi(2), lo, hi, 64, 10);

    // Cartesian rule on [-1, 1]^2; the integrand is supported in the annulus.
    let panels = 400;
    let (gx, gw) = gauss_legendre(4);
    let step = 2.0 / panels as f64;
    let mut cart_nodes = Vec::with_capacity(panels * 4);
    for p in 0..panels {
        let mid = -1.0 + (p as f64 + 0.5) * step;
        for (x, w) in gx.iter().zip(&gw) {
            cart_nodes.push((mid + 0.5 * step * x, 0.5 * step * w));
        }
    }
    let mut cartesian = 0.0;
    for &(x, wx) in &cart_nodes {
        let mut row = 0.0;
        for &(y, wy) in &cart_nodes {
            let t = x * x + y * y;
            if t > lo && t < hi {
                row += wy * dchi(t).powi(2) * (t + 1.0).powi(2);
            }
        }
        cartesian += wx * row;
    }
    cartesian *= 2.0;

    let mut rescaled = Vec::new();
    for &s in scales {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("scale {s} must be positive")));
        }
        let s2 = s * s;
        let f = |r: f64| {
            let t = r * r;
            dchi(t / s2).powi(2) * (t + s2).powi(2) / (s2 * s2 * s2) * r
        };
        rescaled.push((s, 4.0 * PI * integrate(f, s * lo.sqrt(), s * hi.sqrt(), 64, 10)));
    }

    let dual = (value - cartesian).abs() / value.abs();
    let mut certificates = vec![Certificate::upper_bound("chen_constant_dual_quadrature", dual, CONSTANT_AGREEMENT, 0.0)
        .with_param("radial", value)
        .with_param("cartesian", cartesian)];
    let (worst, worst_s) = rescaled
        .iter()
        .map(|(s, v)| ((v - value).abs() / value.abs(), *s))
        .fold((0.0, f64::NAN), |a, b| if b.0 >= a.0 { b } else { a });
    certificates.push(
        Certificate::upper_bound("chen_constant_rescaling", worst, CONSTANT_AGREEMENT, 0.0)
            .with_param("constant", value)
            .with_param("scales", scales.to_vec())
            .with_param("rescaled", rescaled.iter().map(|p| p.1).collect::<Vec<f64>>())
            .with_witness(Witness::new("scale with the largest deviation", vec![worst_s])),
    );
    Ok(ChenConstant { value, cartesian, rescaled, certificates })
}

/// `x^2 / (x^2 + 4x + 1)`, the lower bound of the weight ratio with `x = -rho`.
pub fn sixth_ratio(x: f64) -> f64 {
    x * x / (x * x + 4.0 * x + 1.0)
}

/// Minimum of `x^2 / (x^2 + 4x + 1)` over a log-spaced sweep of `[1, 1e6]`
/// compared with `1/6`; also records where the minimum sits.
pub fn sixth_bound_check(samples: usize) -> Result<(Certificate, Vec<SweepRow>)> {
    if samples < 2 {
        return Err(Error::InvalidArgument("sweep needs at least two points".into()));
    }
    let mut rows = Vec::with_capacity(samples);
    let mut best = (f64::INFINITY, f64::NAN);
    for k in 0..samples {
        let x = 10f64.powf(6.0 * k as f64 / (samples - 1) as f64);
        let v = sixth_ratio(x);
        if v < best.0 {
            best = (v, x);
        }
        rows.push(SweepRow { label: "sixth_bound".into(), point: vec![x], lhs: 1.0 / 6.0, rhs: v, margin: v - 1.0 / 6.0 });
    }
    let cert = Certificate::upper_bound("weight_sixth_bound", 1.0 / 6.0, best.0, 1e-12)
        .with_param("samples", samples)
        .with_param("argmin_x", best.1)
        .with_witness(Witness::new("sweep point of the minimum", vec![best.1]));
    Ok((cert, rows))
}

/// `g(r) = (1 + 1/r) / (1/6 - 4r)` on `(0, 1/24)`.
pub fn r0_objective(r: f64) -> f64 {
    (1.0 + 1.0 / r) / (1.0 / 6.0 - 4.0 * r)
}

/// Analytic derivative of [`r0_objective`].
pub fn r0_objective_derivative(r: f64) -> f64 {
    let d = 1.0 / 6.0 - 4.0 * r;
    (-(d) / (r * r) + 4.0 * (1.0 + 1.0 / r)) / (d * d)
}

/// Stationary point of `g`: positive root of `4r^2 + 8r - 1/6 = 0`.
pub fn r0_closed_form() -> f64 {
    (-8.0 + (64.0f64 + 8.0 / 3.0).sqrt()) / 8.0
}

#[derive(Debug, Clone)]
pub struct R0Result {
    pub r0: f64,
    pub c_prime: f64,
    pub certificates: Vec<Certificate>,
}

/// Golden-section minimisation of `g` on `(1e-6, 1/24 - 1e-6)`, checked
/// against the closed-form root and first-order stationarity.
pub fn optimize_r0() -> R0Result {
    let (mut a, mut b) = (1e-6, 1.0 / 24.0 - 1e-6);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (r0_objective(c), r0_objective(d));
    for _ in 0..200 {
        if b - a < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = r0_objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = r0_objective(d);
        }
    }
    let r0 = 0.5 * (a + b);
    let c_prime = r0_objective(r0);
    let exact = r0_closed_form();
    let c_exact = r0_objective(exact);
    let stationarity = r0_objective_derivative(r0).abs() * r0 / c_prime;
    let certificates = vec![
        Certificate::upper_bound("r0_closed_form", (r0 - exact).abs(), 1e-8, 0.0)
            .with_param("r0", r0)
            .with_param("closed_form", exact),
        Certificate::upper_bound("r0_stationarity", stationarity, 1e-6, 0.0).with_param("r0", r0),
        Certificate::upper_bound("r0_constant", (c_prime - c_exact).abs() / c_exact, 1e-6, 0.0)
            .with_param("c_prime", c_prime)
            .with_param("closed_form", c_exact),
    ];
    R0Result { r0, c_prime, certificates }
}

/// Options of the weighted dbar certificate.
#[derive(Debug, Clone)]
pub struct HormanderOptions {
    /// Degrees of the holomorphic polynomial spaces projected out.
    pub degrees: Vec<usize>,
    /// Shrink factor of the certified polydisc in two variables.
    pub shrink: f64,
}

impl Default for HormanderOptions {
    fn default() -> Self {
        HormanderOptions { degrees: vec![4, 8, 10, 12], shrink: 0.8 }
    }
}

#[derive(Debug, Clone)]
pub struct HormanderResult {
    /// Solution after projecting out polynomials of the largest degree.
    pub u: ScalarField,
    pub lhs_by_degree: Vec<(usize, f64)>,
    pub rhs: f64,
    pub certificate: Certificate,
    pub monotone: Certificate,
}

fn monomial_exponents(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut alpha = vec![0usize; dim];
        fill_exponents(&mut alpha, 0, total, &mut out);
    }
    out
}

fn fill_exponents(alpha: &mut Vec<usize>, k: usize, left: usize, out: &mut Vec<Vec<usize>>) {
    if k + 1 == alpha.len() {
        alpha[k] = left;
        out.push(alpha.clone());
        return;
    }
    for a in (0..=left).rev() {
        alpha[k] = a;
        fill_exponents(alpha, k + 1, left - a, out);
    }
}

fn polydisc_centers_radii(domain: &DomainSpec) -> Result<(Vec<C64>, Vec<f64>)> {
    match domain {
        DomainSpec::Disc { center, radius } => Ok((vec![*center], vec![*radius])),
        DomainSpec::Polydisc { centers, radii } => Ok((centers.clone(), radii.clone())),
        DomainSpec::Product { discs } => Ok((discs.iter().map(|d| d.center).collect(), discs.iter().map(|d| d.radius).collect())),
        DomainSpec::Annulus { .. } => Err(Error::InvalidDomain("weighted dbar certificate needs a disc or polydisc".into())),
    }
}

/// Solve `dbar u = f` and certify `int |u|^2 e^-phi <= int |f|_A^2 e^-phi`.
///
/// The particular solution comes from the Cauchy transform (one variable) or
/// the polydisc solver (two variables, certified on the shrunk polydisc, where
/// both integrals are then taken). Solutions differ by holomorphic functions,
/// so the weighted projection onto holomorphic polynomials of each degree is
/// subtracted; this bounds the minimal norm from above. `A` is the Levi form
/// of `phi` at every node and must be positive definite.
pub fn hormander_solve(phi: &Expr, f: &FormField, options: &HormanderOptions) -> Result<HormanderResult> {
    let grid = f.grid.clone();
    let n = grid.dim();
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidArgument(format!("weighted dbar certificate supports n = 1 or 2, got {n}")));
    }
    if f.p != 0 || f.q != 1 {
        return Err(Error::InvalidArgument(format!("expected a (0,1)-form, got ({}, {})", f.p, f.q)));
    }
    if options.degrees.is_empty() {
        return Err(Error::InvalidArgument("no projection degrees".into()));
    }
    let mut degrees = options.degrees.clone();
    degrees.sort_unstable();
    degrees.dedup();
    let (centers, radii) = polydisc_centers_radii(grid.domain())?;

    let (u, region): (ScalarField, Vec<usize>) = if n == 1 {
        (solve_dbar_1d(&f.component_01(0))?.u, (0..grid.len()).collect())
    } else {
        let sol = solve_dbar_polydisc(f, options.shrink)?;
        let inner: Vec<f64> = radii.iter().map(|r| options.shrink * r).collect();
        let region = (0..grid.len())
            .filter(|&k| (0..n).all(|a| (grid.coord(k, a) - centers[a]).norm() <= inner[a]))
            .collect();
        (sol.u, region)
    };

    // Weighted measure and |f|_A^2 on the region.
    let mut measure = Vec::with_capacity(region.len());
    let mut rhs = 0.0;
    let mut z = vec![C64::new(0.0, 0.0); n];
    for &k in &region {
        grid.coords_into(k, &mut z);
        let weight = (-phi.eval_complex(&z)?).exp();
        let a = levi_form(phi, &z, None)?;
        let lam = a.min_eigenvalue()?;
        if !(lam > LEVI_SINGULAR) {
            return Err(Error::Precondition(format!(
                "Levi form of the weight is singular at node {k} {:?} (smallest eigenvalue {lam:.3e})",
                z.iter().map(|c| (c.re, c.im)).collect::<Vec<_>>()
            )));
        }
        let fk: Vec<C64> = (0..n).map(|j| f.component_01(j).values[k]).collect();
        let m = grid.weight(k) * weight;
        rhs += a.norm_a_sq(&fk)? * m;
        measure.push(m);
    }

    // Weighted Gram-Schmidt on monomials (z - c)^alpha, lowest degree first.
    let top = *degrees.last().unwrap();
    let exps = monomial_exponents(n, top);
    let inner = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).zip(&measure).map(|((x, y), m)| x * y.conj() * *m).sum() };
    let mut residual: Vec<C64> = region.iter().map(|&k| u.values[k]).collect();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut lhs_by_degree = Vec::new();
    let mut next_degree = 0;
    for (idx, alpha) in exps.iter().enumerate() {
        let mut p: Vec<C64> = region
            .iter()
            .map(|&k| (0..n).map(|a| (grid.coord(k, a) - centers[a]).powu(alpha[a] as u32)).product())
            .collect();
        let norm0 = inner(&p, &p).re.sqrt();
        for _ in 0..2 {
            for q in &basis {
                let c = inner(&p, q);
                for (pi, qi) in p.iter_mut().zip(q) {
                    *pi -= c * qi;
                }
            }
        }
        let norm = inner(&p, &p).re.sqrt();
        if norm > 1e-10 * norm0 && norm > 0.0 {
            for v in p.iter_mut() {
                *v /= norm;
            }
            let c = inner(&residual, &p);
            for (r, q) in residual.iter_mut().zip(&p) {
                *r -= c * q;
            }
            basis.push(p);
        }
        let deg: usize = alpha.iter().sum();
        let last_of_degree = exps.get(idx + 1).is_none_or(|b| b.iter().sum::<usize>() > deg);
        while last_of_degree && next_degree < degrees.len() && degrees[next_degree] == deg {
            lhs_by_degree.push((deg, inner(&residual, &residual).re));
            next_degree += 1;
        }
    }

    let mut corrected = ScalarField::zeros(&grid);
    for (i, &k) in region.iter().enumerate() {
        corrected.values[k] = residual[i];
    }
    let lhs = lhs_by_degree.last().map_or(f64::NAN, |p| p.1);
    let lhs_values: Vec<f64> = lhs_by_degree.iter().map(|p| p.1).collect();
    let degree_list: Vec<f64> = lhs_by_degree.iter().map(|p| p.0 as f64).collect();
    let certificate = Certificate::upper_bound("hormander_estimate", lhs, rhs, 0.0)
        .with_param("degree", top)
        .with_param("h", grid.spacing())
        .with_param("nodes", region.len())
        .with_param("lhs_by_degree", lhs_values.clone())
        .with_param("degrees", degree_list);
    let increase = lhs_values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let increase = if lhs_values.len() < 2 { 0.0 } else { increase };
    let monotone = Certificate::upper_bound("hormander_projection_monotone", increase, 0.0, 1e-12 * lhs_values[0].abs())
        .with_param("lhs_by_degree", lhs_values);
    Ok(HormanderResult { u: corrected, lhs_by_degree, rhs, certificate, monotone })
}

/// Holomorphic polynomial `sum c_alpha z^alpha`, used for extension data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub exponent: Vec<usize>,
    pub coeff: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HolomorphicPolynomial {
    pub terms: Vec<PolyTerm>,
}

impl HolomorphicPolynomial {
    pub fn constant(c: C64) -> Self {
        HolomorphicPolynomial { terms: vec![PolyTerm { exponent: vec![], coeff: [c.re, c.im] }] }
    }

    /// Number of leading variables the polynomial uses.
    pub fn dim(&self) -> usize {
        self.terms.iter().map(|t| t.exponent.len()).max().unwrap_or(0)
    }

    pub fn evaluate(&self, z: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|t| {
                let mono: C64 = t.exponent.iter().zip(z).map(|(a, zi)| zi.powu(*a as u32)).product();
                C64::new(t.coeff[0], t.coeff[1]) * mono
            })
            .sum()
    }
}

/// Radius of the disc around `z_n = 0` excluded from quadrature: nodes with
/// `|z_n| < 2h` are dropped and their cells reach at most `h / sqrt(2)` further.
pub fn ot_excluded_radius(h: f64) -> f64 {
    (2.0 + std::f64::consts::FRAC_1_SQRT_2) * h
}

/// `int_{|w| < r} dA / (|w|^2 log^2 |w|^2) = pi / |log r^2|` for `r < 1`.
pub fn singular_tail(r: f64) -> f64 {
    PI / (2.0 * r.ln()).abs()
}

/// Check the extension inequality
/// `int |F|^2 e^-phi / (|z_n|^2 log^2 |z_n|^2) <= 8 C' C int_{Omega'} |f|^2 e^-phi`
/// on `Omega = Omega' x disc(0, r_n)` with `r_n < e^-1/2`.
///
/// The left side drops nodes near `z_n = 0` and adds the analytic tail of the
/// singular density times `sup |F|^2 e^-phi` times the volume of `Omega'`.
#[allow(clippy::too_many_arguments)]
pub fn ot_extend_check(
    domain: &DomainSpec,
    nodes_per_axis: usize,
    phi: &Expr,
    f: &dyn Fn(&[C64]) -> C64,
    extension: &dyn Fn(&[C64]) -> C64,
    c_chen: f64,
    c_prime: f64,
) -> Result<Certificate> {
    let (centers, radii) = polydisc_centers_radii(domain)?;
    let n = centers.len();
    if n < 2 {
        return Err(Error::InvalidDomain("extension needs at least two variables".into()));
    }
    if centers[n - 1].norm() > 0.0 {
        return Err(Error::InvalidDomain("last factor must be a disc centred at 0".into()));
    }
    let r_n = radii[n - 1];
    if !(r_n < (-0.5f64).exp()) {
        return Err(Error::Precondition(format!("sup |z_n| = {r_n} must be below e^-1/2")));
    }
    let grid = build_grid(domain, &vec![nodes_per_axis; n])?;
    let slice_domain = DomainSpec::product(&centers[..n - 1].iter().cloned().zip(radii[..n - 1].iter().cloned()).collect::<Vec<_>>());
    let slice = build_grid(&slice_domain, &vec![nodes_per_axis; n - 1])?;

    // Slice agreement and right-hand side.
    let mut rhs_integral = 0.0;
    let mut mismatch: f64 = 0.0;
    let mut zp = vec![C64::new(0.0, 0.0); n];
    for k in 0..slice.len() {
        slice.coords_into(k, &mut zp[..n - 1]);
        zp[n - 1] = C64::new(0.0, 0.0);
        let fv = f(&zp[..n - 1]);
        mismatch = mismatch.max((extension(&zp) - fv).norm() / (1.0 + fv.norm()));
        rhs_integral += slice.weight(k) * fv.norm_sqr() * (-phi.eval_complex(&zp)?).exp();
    }
    if !(mismatch <= 1e-8) {
        return Err(Error::Precondition(format!("extension differs from f on the slice z_n = 0 (by {mismatch:.3e})")));
    }

    let h = grid.axis(n - 1).h;
    let cut = 2.0 * h;
    let excluded = ot_excluded_radius(h);
    let mut lhs_included = 0.0;
    let mut sup_density: f64 = 0.0;
    let mut z = vec![C64::new(0.0, 0.0); n];
    for k in 0..grid.len() {
        grid.coords_into(k, &mut z);
        let val = extension(&z).norm_sqr() * (-phi.eval_complex(&z)?).exp();
        let r2 = z[n - 1].norm_sqr();
        if r2.sqrt() < cut {
            sup_density = sup_density.max(val);
            continue;
        }
        let log = r2.ln();
        lhs_included += grid.weight(k) * val / (r2 * log * log);
    }
    // The excluded set is a thin neighbourhood of the slice; bound its
    // density by the largest value seen there and on the slice itself.
    for k in 0..slice.len() {
        slice.coords_into(k, &mut zp[..n - 1]);
        zp[n - 1] = C64::new(0.0, 0.0);
        sup_density = sup_density.max(extension(&zp).norm_sqr() * (-phi.eval_complex(&zp)?).exp());
    }
    let tail = singular_tail(excluded);
    let slice_volume = slice_domain.volume();
    let tail_bound = sup_density * slice_volume * tail;
    let lhs_upper = lhs_included + tail_bound;
    let factor = 8.0 * c_prime * c_chen;
    let rhs = factor * rhs_integral;
    Ok(Certificate::upper_bound("ot_extension", lhs_upper, rhs, 0.0)
        .with_param("lhs_quadrature", lhs_included)
        .with_param("tail_bound", tail_bound)
        .with_param("tail_integral", tail)
        .with_param("excluded_radius", excluded)
        .with_param("sup_density_near_slice", sup_density)
        .with_param("rhs_slice_integral", rhs_integral)
        .with_param("constant_factor", factor)
        .with_param("c_chen", c_chen)
        .with_param("c_prime", c_prime)
        .with_param("h", h)
        .with_param("nodes", grid.len()))
}

/// Sequence `A_0, ..., A_steps` of `A_n = A_{n-1} (C_0 / A_{n-1})^{p/2}`.
pub fn lp_iteration(a0: f64, c0: f64, p: f64, steps: usize) -> Result<Vec<f64>> {
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must lie in (0, 2]")));
    }
    if !(a0 > 0.0 && c0 > 0.0) {
        return Err(Error::InvalidArgument("A_0 and C_0 must be positive".into()));
    }
    let mut out = Vec::with_capacity(steps + 1);
    let mut a = a0;
    out.push(a);
    for _ in 0..steps {
        a *= (c0 / a).powf(p / 2.0);
        out.push(a);
    }
    Ok(out)
}

/// `C_0 (A_0 / C_0)^{(1 - p/2)^n}`.
pub fn lp_closed_form(a0: f64, c0: f64, p: f64, n: usize) -> f64 {
    c0 * ((1.0 - p / 2.0).powi(n as i32) * (a0 / c0).ln()).exp()
}

/// Certificates for the iteration: agreement with the closed form (relative
/// 1e-12), monotone approach towards `C_0`, and `|A_N - C_0| / C_0 <= 1e-6`.
pub fn lp_iteration_check(a0: f64, c0: f64, p: f64, steps: usize) -> Result<Vec<Certificate>> {
    let seq = lp_iteration(a0, c0, p, steps)?;
    let dev = seq
        .iter()
        .enumerate()
        .map(|(n, a)| ((a - lp_closed_form(a0, c0, p, n)) / lp_closed_form(a0, c0, p, n)).abs())
        .fold(0.0, f64::max);
    let wrong_way = seq
        .windows(2)
        .map(|w| if a0 >= c0 { w[1] - w[0] } else { w[0] - w[1] })
        .fold(0.0, f64::max);
    let last = *seq.last().unwrap();
    let params = |c: Certificate| c.with_param("a0", a0).with_param("c0", c0).with_param("p", p).with_param("steps", steps);
    Ok(vec![
        params(Certificate::upper_bound("lp_iteration_closed_form", dev, 1e-12, 0.0)),
        params(Certificate::upper_bound("lp_iteration_monotone", wrong_way, 0.0, 1e-15 * a0.max(c0))),
        params(Certificate::upper_bound("lp_iteration_convergence", (last - c0).abs() / c0, 1e-6, 0.0).with_param("last", last)),
    ])
}

/// Necessary condition `2/p >= (nq + 2)/((n + 1) q)` from extending `z^n`,
/// with model norms `delta^{2/p}` (extension) and `c_n delta^{(nq+2)/((n+1)q)}`
/// (restriction, `c_n = (nq + 2)^{-1/q}`), plus the first model's `p <= q`.
pub fn lp_breakdown_exponents(n: usize, p: f64, q: f64, deltas: &[f64]) -> Result<Certificate> {
    if n < 1 || !(p > 0.0 && p.is_finite() && q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidArgument("need n >= 1 and finite positive p, q".into()));
    }
    let nf = n as f64;
    let extension_exponent = 2.0 / p;
    let restriction_exponent = (nf * q + 2.0) / ((nf + 1.0) * q);
    let c_n = (nf * q + 2.0).powf(-1.0 / q);
    let ext: Vec<f64> = deltas.iter().map(|d| d.powf(extension_exponent)).collect();
    let res: Vec<f64> = deltas.iter().map(|d| c_n * d.powf(restriction_exponent)).collect();
    let ratios: Vec<f64> = ext.iter().zip(&res).map(|(a, b)| a / b).collect();
    Ok(Certificate::upper_bound("lp_breakdown_exponents", restriction_exponent, extension_exponent, 1e-12)
        .with_param("n", n)
        .with_param("p", p)
        .with_param("q", q)
        .with_param("c_n", c_n)
        .with_param("deltas", deltas.to_vec())
        .with_param("extension_norms", ext)
        .with_param("restriction_norms", res)
        .with_param("norm_ratios", ratios)
        .with_param("first_model_p_le_q", if p <= q { "holds" } else { "fails" }))
}

/// Passes iff the necessary condition of [`lp_breakdown_exponents`] fails
/// strictly: the restriction exponent exceeds `2/p` by more than `1e-12`.
pub fn lp_breakdown_refutation(n: usize, p: f64, q: f64, deltas: &[f64]) -> Result<Certificate> {
    let base = lp_breakdown_exponents(n, p, q, deltas)?;
    let mut cert = Certificate::upper_bound("lp_breakdown_refuted", base.rhs + 1e-12, base.lhs, 0.0);
    cert.parameters = base.parameters;
    Ok(cert)
}

/// Finiteness of `int_{|z|<1} |z|^{pk} e^{-phi}` for `phi = 2 alpha log|z|`,
/// decided analytically (`pk - 2 alpha > -2`) and numerically from partial
/// sums over dyadic annuli `2^-(L+1) < |z| < 2^-L`. Also checks that every
/// truncated weight `max(phi, -j)` gives a finite integral, non-decreasing in `j`.
pub fn openness_threshold_demo(p: f64, k: usize, alpha: f64, j_max: usize) -> Result<Certificate> {
    if !(p > 0.0 && alpha > 0.0) {
        return Err(Error::InvalidArgument("p and alpha must be positive".into()));
    }
    let beta = p * k as f64 - 2.0 * alpha;
    let analytic_finite = beta > -2.0;
    let boundary = (beta + 2.0).abs() < 1e-12;

    // Dyadic annuli, integrated in t = log r: 2 pi int e^{(beta + 2) t} dt.
    let levels = 40;
    let ln2 = 2f64.ln();
    let annulus = |l: usize| {
        let hi = -(l as f64) * ln2;
        2.0 * PI * integrate(|t| ((beta + 2.0) * t).exp(), hi - ln2, hi, 1, 12)
    };
    let pieces: Vec<f64> = (0..levels).map(annulus).collect();
    let growth = pieces[levels - 1] / pieces[levels - 2];
    let numeric_finite = growth < 1.0 - 1e-6;
    let partial: f64 = pieces.iter().sum();

    // Truncated weights: e^{-max(phi, -j)} = min(|z|^{-2 alpha}, e^j).
    let mut truncated = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let rj = (-(j as f64) / (2.0 * alpha)).exp().min(1.0);
        let inner = 2.0 * PI * (j as f64).exp() * rj.powf(p * k as f64 + 2.0) / (p * k as f64 + 2.0);
        let outer = if rj < 1.0 {
            let logs = |t: f64| ((beta + 2.0) * t).exp();
            2.0 * PI * integrate(logs, rj.ln(), 0.0, 64, 12)
        } else {
            0.0
        };
        truncated.push(inner + outer);
    }
    let truncation_ok = truncated.iter().all(|v| v.is_finite()) && truncated.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let agree = analytic_finite == numeric_finite;
    let lhs = if agree && truncation_ok { 0.0 } else { 1.0 };
    Ok(Certificate::upper_bound("openness_threshold", lhs, 0.0, 0.0)
        .with_param("p", p)
        .with_param("k", k)
        .with_param("alpha", alpha)
        .with_param("exponent", beta)
        .with_param("analytic", if analytic_finite { "finite" } else if boundary { "divergent_boundary" } else { "divergent" })
        .with_param("numeric", if numeric_finite { "finite" } else { "divergent" })
        .with_param("level_growth", growth)
        .with_param("partial_sum", partial)
        .with_param("truncated_integrals", truncated))
}

/// Coefficient function of a form, evaluated at a point.
pub type CoefficientFn<'a> = &'a dyn Fn(&[C64]) -> C64;

/// Build the (0,1)-form with the given coefficient functions on a grid.
pub fn form_from_fn(grid: &Arc<Grid>, coeffs: &[CoefficientFn<'_>]) -> Result<FormField> {
    let fields = coeffs.iter().map(|c| ScalarField::sample(grid, |z| c(z))).collect::<Result<Vec<_>>>()?;
    FormField::from_01_coefficients(grid, fields)
}

/// `int_{|z| < radius} e^{-scale |z|^2} dA`.
pub fn disc_gaussian_mass(radius: f64, scale: f64) -> f64 {
    PI * (1.0 - (-scale * radius * radius).exp()) / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::grid::build_uniform_grid;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn chen_values_at_origin() {
        let v = chen_weights(0.1, c(0.0, 0.0)).unwrap();
        let rho = 0.01f64.ln();
        assert!((v.rho - rho).abs() < 1e-15);
        let eta = -rho + (-rho).ln();
        assert!((v.eta - eta).abs() < 1e-14);
        assert!((v.eta - 6.1324).abs() < 1e-4);
        assert!((v.psi + eta.ln()).abs() < 1e-15);
        assert!((v.psi + 1.8137).abs() < 2e-4);
    }

    #[test]
    fn chen_domain_boundary_is_rejected() {
        let s = 0.1;
        let r = ((-1.0f64).exp() - s * s).sqrt();
        assert!(matches!(chen_weights(s, c(r, 0.0)), Err(Error::OutsideDomain)));
        assert!(chen_weights(s, c(0.99 * r, 0.0)).is_ok());
        assert!(ChenWeights::new(0.7).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let d = ChenWeights::new(0.1).unwrap().derivatives(c(0.1, 0.0)).unwrap();
        assert!((d.rho_zzbar - 25.0).abs() < 1e-12);
        assert!((d.rho_zbar - c(5.0, 0.0)).norm() < 1e-12);
    }

    /// Independent oracle: differentiate rho, eta, psi by complex-step style
    /// second-order differences with Richardson extrapolation.
    fn richardson_laplacian(g: &dyn Fn(C64) -> f64, z: C64, h: f64) -> f64 {
        let lap = |h: f64| (g(z + c(h, 0.0)) + g(z - c(h, 0.0)) + g(z + c(0.0, h)) + g(z - c(0.0, h)) - 4.0 * g(z)) / (h * h);
        (4.0 * lap(h / 2.0) - lap(h)) / 3.0 / 4.0
    }

    #[test]
    fn psi_zzbar_matches_richardson_oracle() {
        let s = 0.05;
        let w = ChenWeights::new(s).unwrap();
        for z in [c(0.02, 0.01), c(0.3, -0.2), c(0.0, 0.0)] {
            let psi = |p: C64| raw_values(s, p).psi;
            let oracle = richardson_laplacian(&psi, z, 1e-3 * (z.norm_sqr() + s * s).sqrt());
            let exact = w.derivatives(z).unwrap().psi_zzbar;
            assert!((oracle - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "{oracle} {exact}");
        }
    }

    #[test]
    fn weight_identities_pass_on_small_sweep() {
        for s in [0.1, 0.01, 0.001] {
            let pts = chen_sample_points(s, 500).unwrap();
            let sweep = weight_identities_check(s, &pts, WEIGHT_FD_STEP).unwrap();
            assert_eq!(sweep.certificates.len(), 9);
            for cert in &sweep.certificates {
                assert!(cert.pass, "{}", cert.summary_line());
            }
            let oc = order_chain_check(s, &pts).unwrap();
            assert!(oc.pass, "{} {:?}", oc.summary_line(), oc.witness);
        }
    }

    #[test]
    fn chen_constant_matches_simpson_oracle() {
        let cc = chen_constant(&ChiProfile::default(), &[0.5, 0.1]).unwrap();
        // Composite Simpson in t on the bridge.
        let m = 20000;
        let f = |t: f64| {
            let u = (t - 0.5) / 0.5;
            let d = 30.0 * u * u * (1.0 - u) * (1.0 - u) / 0.5;
            d * d * (t + 1.0) * (t + 1.0)
        };
        let hstep = 0.5 / m as f64;
        let mut s = f(0.5) + f(1.0);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(0.5 + i as f64 * hstep);
        }
        let oracle = 2.0 * PI * s * hstep / 3.0;
        assert!((cc.value - oracle).abs() / oracle < 1e-10, "{} {oracle}", cc.value);
        for cert in &cc.certificates {
            assert!(cert.pass, "{}", cert.summary_line());
        }
    }

    #[test]
    fn narrow_bridge_and_bad_profiles() {
        let narrow = chen_constant(&ChiProfile::Smoothstep { lo: 0.5, hi: 0.6 }, &[0.5]).unwrap();
        assert!(narrow.value > chen_constant(&ChiProfile::default(), &[]).unwrap().value);
        let increasing = ChiProfile::Expression(parse_expr("x1").unwrap());
        assert!(matches!(chen_constant(&increasing, &[]), Err(Error::Precondition(_))));
        assert!(chen_constant(&ChiProfile::Smoothstep { lo: 0.4, hi: 1.0 }, &[]).is_err());
    }

    #[test]
    fn sixth_bound_examples() {
        assert_eq!(sixth_ratio(1.0), 1.0 / 6.0);
        assert!((sixth_ratio(2.0) - 4.0 / 13.0).abs() < 1e-15);
        assert!((sixth_ratio(1e9) - 1.0).abs() < 1e-8);
        let (cert, rows) = sixth_bound_check(10_000).unwrap();
        assert!(cert.pass);
        assert_eq!(rows.len(), 10_000);
        assert_eq!(cert.witness.unwrap().values[0], 1.0);
    }

    #[test]
    fn r0_matches_closed_form() {
        let res = optimize_r0();
        let exact = (-8.0 + (64.0f64 + 8.0 / 3.0).sqrt()) / 8.0;
        assert!((exact - 0.0206).abs() < 1e-4);
        assert!((4.0 * exact * exact + 8.0 * exact - 1.0 / 6.0).abs() < 1e-15);
        assert!((res.r0 - exact).abs() < 1e-8);
        assert!(r0_objective(exact + 1e-3) >= res.c_prime && r0_objective(exact - 1e-3) >= res.c_prime);
        assert!(res.c_prime > 500.0 && res.c_prime < 700.0);
        for cert in &res.certificates {
            assert!(cert.pass, "{}", cert.summary_line());
        }
    }

    #[test]
    fn hormander_on_disc_with_gaussian_weight() {
        let grid = build_uniform_grid(&DomainSpec::disc(c(0.0, 0.0), 1.0), 64).unwrap();
        let one = |_: &[C64]| c(1.0, 0.0);
        let f = form_from_fn(&grid, &[&one]).unwrap();
        let phi = parse_expr("x1^2 + y1^2").unwrap();
        let res = hormander_solve(&phi, &f, &HormanderOptions { degrees: vec![4, 8, 12], shrink: 0.8 }).unwrap();
        assert!(res.certificate.pass && res.certificate.margin > 0.0);
        assert!(res.monotone.pass);
        let analytic_rhs = disc_gaussian_mass(1.0, 1.0);
        assert!((res.rhs - analytic_rhs).abs() / analytic_rhs < 0.02);
        // The minimal solution is conj(z): lhs = pi (1 - 2/e).
        let lhs = res.lhs_by_degree.last().unwrap().1;
        assert!((lhs - PI * (1.0 - 2.0 / E)).abs() < 0.03, "{lhs}");
    }

    #[test]
    fn hormander_zero_form_and_doubled_weight() {
        let grid = build_uniform_grid(&DomainSpec::disc(c(0.0, 0.0), 1.0), 32).unwrap();
        let zero = |_: &[C64]| c(0.0, 0.0);
        let f0 = form_from_fn(&grid, &[&zero]).unwrap();
        let phi = parse_expr("x1^2 + y1^2").unwrap();
        let res = hormander_solve(&phi, &f0, &HormanderOptions::default()).unwrap();
        assert_eq!(res.rhs, 0.0);
        assert!(res.certificate.pass);

        let one = |_: &[C64]| c(1.0, 0.0);
        let f1 = form_from_fn(&grid, &[&one]).unwrap();
        let phi2 = parse_expr("2*(x1^2 + y1^2)").unwrap();
        let res = hormander_solve(&phi2, &f1, &HormanderOptions::default()).unwrap();
        assert!(res.certificate.pass);
        assert!((res.rhs - 0.5 * disc_gaussian_mass(1.0, 2.0)).abs() < 0.02 * res.rhs);
    }

    #[test]
    fn hormander_rejects_flat_weight() {
        let grid = build_uniform_grid(&DomainSpec::disc(c(0.0, 0.0), 1.0), 16).unwrap();
        let one = |_: &[C64]| c(1.0, 0.0);
        let f = form_from_fn(&grid, &[&one]).unwrap();
        let phi = parse_expr("x1").unwrap();
        let err = hormander_solve(&phi, &f, &HormanderOptions::default()).unwrap_err();
        assert!(err.to_string().contains("singular"), "{err}");
    }

    #[test]
    fn hormander_two_variables() {
        let grid = build_uniform_grid(&DomainSpec::unit_polydisc(2), 16).unwrap();
        let one = |_: &[C64]| c(1.0, 0.0);
        let zero = |_: &[C64]| c(0.0, 0.0);
        let f = form_from_fn(&grid, &[&one, &zero]).unwrap();
        let phi = parse_expr("x1^2 + y1^2 + x2^2 + y2^2").unwrap();
        let res = hormander_solve(&phi, &f, &HormanderOptions { degrees: vec![2, 4], shrink: 0.8 }).unwrap();
        assert!(res.certificate.pass, "{}", res.certificate.summary_line());
        assert!(res.monotone.pass);
    }

    #[test]
    fn singular_tail_matches_quadrature() {
        let r: f64 = 0.05;
        // In t = log r: 2 pi r dr / (r^2 (2t)^2) = 2 pi dt / (4 t^2). Quadrature on
        // [-200, log r] plus the exact remainder below -200.
        let body = 2.0 * PI * integrate(|t: f64| 1.0 / (4.0 * t * t), -200.0, r.ln(), 2000, 8);
        let oracle = body + 2.0 * PI / (4.0 * 200.0);
        assert!((singular_tail(r) - oracle).abs() / oracle < 1e-6, "{} {oracle}", singular_tail(r));
    }

    #[test]
    fn ot_check_trivial_zero_and_wild() {
        let domain = DomainSpec::product(&[(c(0.0, 0.0), 0.9), (c(0.0, 0.0), 0.5)]);
        let phi = parse_expr("x1^2 + y1^2 + x2^2 + y2^2").unwrap();
        let cc = chen_constant(&ChiProfile::default(), &[]).unwrap().value;
        let cp = optimize_r0().c_prime;
        let one = |_: &[C64]| c(1.0, 0.0);
        let cert = ot_extend_check(&domain, 16, &phi, &one, &one, cc, cp).unwrap();
        assert!(cert.pass, "{}", cert.summary_line());
        let zero = |_: &[C64]| c(0.0, 0.0);
        let cert = ot_extend_check(&domain, 16, &phi, &zero, &zero, cc, cp).unwrap();
        assert!(cert.pass && cert.lhs == 0.0 && cert.rhs == 0.0);
        let wild = |z: &[C64]| c(1.0, 0.0) + z[1] / 0.001;
        let cert = ot_extend_check(&domain, 16, &phi, &one, &wild, cc, cp).unwrap();
        assert!(cert.lhs.is_finite());
        let bad = |_: &[C64]| c(2.0, 0.0);
        assert!(ot_extend_check(&domain, 16, &phi, &one, &bad, cc, cp).is_err());
        let wide = DomainSpec::product(&[(c(0.0, 0.0), 0.9), (c(0.0, 0.0), 0.7)]);
        assert!(ot_extend_check(&wide, 16, &phi, &one, &one, cc, cp).is_err());
    }

    #[test]
    fn lp_iteration_examples() {
        assert!(lp_iteration(1.0, 1.0, 1.0, 10).unwrap().iter().all(|a| *a == 1.0));
        let seq = lp_iteration(10.0, 1.0, 1.0, 25).unwrap();
        assert!((seq[1] - 10f64.sqrt()).abs() < 1e-12);
        assert!((seq[2] - 1.7783).abs() < 1e-4);
        assert!((seq[25] - 1.0).abs() <= 1e-6);
        let up = lp_iteration(0.1, 1.0, 1.0, 25).unwrap();
        assert!(up.windows(2).all(|w| w[1] > w[0]));
        for cert in lp_iteration_check(10.0, 1.0, 1.0, 25).unwrap() {
            assert!(cert.pass, "{}", cert.summary_line());
        }
        assert!(lp_iteration(1.0, 1.0, 2.5, 3).is_err());
    }

    #[test]
    fn breakdown_examples() {
        assert!(lp_breakdown_exponents(1, 2.0, 2.0, &[0.1]).unwrap().pass);
        assert!(!lp_breakdown_exponents(1, 3.0, 3.0, &[0.1]).unwrap().pass);
        assert!(lp_breakdown_refutation(1, 3.0, 3.0, &[0.1]).unwrap().pass);
        assert!(!lp_breakdown_refutation(1, 2.0, 2.0, &[0.1]).unwrap().pass);
        let big = lp_breakdown_exponents(100, 2.0, 2.0, &[0.1]).unwrap();
        assert!(big.pass && big.margin < 0.01);
    }

    #[test]
    fn openness_examples() {
        let flag = |p, k, a| match openness_threshold_demo(p, k, a, 20).unwrap().parameters["analytic"].clone() {
            crate::certificate::ParamValue::Text(t) => t,
            _ => unreachable!(),
        };
        assert_eq!(flag(2.0, 1, 1.0), "finite");
        assert_eq!(flag(2.0, 0, 2.0), "divergent");
        assert_eq!(flag(2.0, 0, 1.0), "divergent_boundary");
        for (p, k, a) in [(2.0, 1, 1.0), (2.0, 0, 2.0), (2.0, 0, 1.0), (1.0, 3, 2.4), (3.0, 1, 3.0)] {
            assert!(openness_threshold_demo(p, k, a, 20).unwrap().pass);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn order_chain_holds_everywhere(s in 1e-4f64..0.6, u in 0.0f64..1.0, th in 0.0f64..6.3) {
            let w = ChenWeights::new(s).unwrap();
            let z = C64::from_polar(0.999 * u * w.admissible_radius(), th);
            let v = w.values(z).unwrap();
            prop_assert!(1.0 < -v.rho && -v.rho < v.eta && v.eta < -2.0 * v.rho);
            prop_assert!(v.psi < 0.0 && v.psi > -(4.0 * (1.0 / s).ln()).ln());
        }

        #[test]
        fn lp_iteration_matches_closed_form(a0 in 0.01f64..100.0, c0 in 0.01f64..100.0, p in 0.05f64..1.99) {
            let seq = lp_iteration(a0, c0, p, 30).unwrap();
            for (n, a) in seq.iter().enumerate() {
                let exact = lp_closed_form(a0, c0, p, n);
                prop_assert!(((a - exact) / exact).abs() <= 1e-12);
            }
        }

        #[test]
        fn sixth_ratio_bounded_below(x in 1.0f64..1e6) {
            prop_assert!(sixth_ratio(x) >= 1.0 / 6.0 - 1e-15);
        }
    }
}
