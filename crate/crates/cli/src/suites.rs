//! Suites: each turns its config section into certificates and CSV sweeps.
//!
//! A module error inside a step becomes a failed certificate named after
//! the step, so one bad input never hides the other checks.

use std::sync::Arc;

use scvlab_core::cauchy::{cauchy_inequality_check, dbar_1d_refinement, dbar_examples, power_series, TorusGrid};
use scvlab_core::error::{Error, Result};
use scvlab_core::expr::{parse_expr, Expr};
use scvlab_core::grid::{build_uniform_grid, DomainSpec, FormField, Grid, ScalarField};
use scvlab_core::hormander::{
    chen_constant, chen_sample_points, form_from_fn, hormander_solve, lp_breakdown_exponents,
    lp_breakdown_refutation, lp_iteration_check, openness_threshold_demo, optimize_r0, order_chain_check,
    ot_extend_check, sixth_bound_check, weight_identities_check, ChiProfile, HormanderOptions,
};
use scvlab_core::hulls::{hull_distance_agreement, poly_hull_membership, write_hull_csv, CompactSample};
use scvlab_core::operators::{audit_random_instances, graph_perp_check};
use scvlab_core::polydisc::{closed_form_examples, polydisc_refinement_study};
use scvlab_core::psh::{convex_compose_check, mollify_commute_check, mollify_monotone_check, psh_test, submean_test};
use scvlab_core::quadrature::halton_disc;
use scvlab_core::{Certificate, C64};

use crate::config::{CompactConfig, ComplexExpr, ConfigFile, Expectation};
use crate::output::Csv;
use crate::{Command, ConfigError};

const DEFAULT_WEIGHT: &str = "x1^2 + y1^2";
const DEFAULT_RESOLUTION_1D: usize = 128;
const DEFAULT_RESOLUTION_2D: usize = 32;
const DEFAULT_PSH_RESOLUTION: usize = 96;
const DEFAULT_HULL_RESOLUTION: usize = 96;

#[derive(Debug, Default)]
pub struct SuiteOutput {
    pub certificates: Vec<Certificate>,
    pub csvs: Vec<Csv>,
}

impl SuiteOutput {
    /// Run a step; an error becomes a failed certificate called `name`.
    fn step(&mut self, name: &str, f: impl FnOnce(&mut Vec<Csv>) -> Result<Vec<Certificate>>) {
        match f(&mut self.csvs) {
            Ok(certs) => self.certificates.extend(certs),
            Err(e) => self.certificates.push(Certificate::failed(name, e.to_string())),
        }
    }
}

fn invalid(pointer: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid { pointer: pointer.to_string(), message: message.to_string() }
}

fn parse_at(src: &str, pointer: &str) -> std::result::Result<Expr, ConfigError> {
    parse_expr(src).map_err(|e| invalid(pointer, e))
}

/// Semantic checks that serde cannot express: expressions parse, domains
/// are valid, sizes are positive.
pub fn validate(c: &ConfigFile) -> std::result::Result<(), ConfigError> {
    if let Some(d) = &c.domain {
        d.validate().map_err(|e| invalid("/domain", e))?;
    }
    if let Some(w) = &c.weight {
        parse_at(w, "/weight")?;
    }
    if let Some(p) = &c.psi {
        parse_at(p, "/psi")?;
    }
    if c.resolution == Some(0) {
        return Err(invalid("/resolution", "must be positive"));
    }
    let s = &c.suites;
    s.solve_dbar.domain_1d.validate().map_err(|e| invalid("/suites/solve-dbar/domain_1d", e))?;
    s.solve_dbar.domain_2d.validate().map_err(|e| invalid("/suites/solve-dbar/domain_2d", e))?;
    s.ot.domain.validate().map_err(|e| invalid("/suites/ot/domain", e))?;
    parse_at(&s.ot.weight, "/suites/ot/weight")?;
    for (i, comp) in s.hormander.form.iter().enumerate() {
        match comp {
            ComplexExpr::Real(e) => {
                parse_at(e, &format!("/suites/hormander/form/{i}"))?;
            }
            ComplexExpr::Pair([re, im]) => {
                parse_at(re, &format!("/suites/hormander/form/{i}/0"))?;
                parse_at(im, &format!("/suites/hormander/form/{i}/1"))?;
            }
        }
    }
    if s.weights.s.is_empty() {
        return Err(invalid("/suites/weights/s", "need at least one scale"));
    }
    Ok(())
}

pub fn run_suite(command: Command, c: &ConfigFile, seed: u64) -> SuiteOutput {
    let mut out = SuiteOutput::default();
    match command {
        Command::SolveDbar => solve_dbar(c, &mut out),
        Command::Cauchy => cauchy(c, &mut out),
        Command::Psh => psh(c, &mut out),
        Command::Hull => hull(c, seed, &mut out),
        Command::Operator => operator(c, seed, &mut out),
        Command::Hormander => hormander(c, &mut out),
        Command::Ot => ot(c, &mut out),
        Command::Lp => lp(c, &mut out),
        Command::Weights => weights(c, &mut out),
        Command::All => {
            for s in Command::SUITES {
                let o = run_suite(s, c, seed);
                out.certificates.extend(o.certificates);
                out.csvs.extend(o.csvs);
            }
        }
    }
    out
}

fn resolution(suite: Option<usize>, c: &ConfigFile, default: usize) -> usize {
    suite.or(c.resolution).unwrap_or(default)
}

fn domain_1d_or_disc(c: &ConfigFile) -> DomainSpec {
    c.domain.clone().unwrap_or_else(|| DomainSpec::disc(0.0.into(), 1.0))
}

fn weight_expr(c: &ConfigFile) -> Result<Expr> {
    Ok(parse_expr(c.weight.as_deref().unwrap_or(DEFAULT_WEIGHT))?)
}

fn solve_dbar(c: &ConfigFile, out: &mut SuiteOutput) {
    let cfg = &c.suites.solve_dbar;
    let n = resolution(cfg.resolution, c, DEFAULT_RESOLUTION_1D);
    let levels = [n / 4, n / 2, n];
    for ex in dbar_examples() {
        let name = format!("dbar_1d_{}", ex.name);
        out.step(&name, |_| Ok(vec![dbar_1d_refinement(&cfg.domain_1d, &ex, &levels)?]));
    }
    let n2 = cfg.resolution_2d;
    let levels_2d = [n2 / 2, (2 * n2) / 3, n2];
    for ex in closed_form_examples() {
        let name = format!("dbar_polydisc_{}", ex.name);
        out.step(&name, |_| {
            let study = polydisc_refinement_study(&cfg.domain_2d, &levels_2d, cfg.shrink, &|g: &Arc<Grid>| ex.sample(g))?;
            let mut cert = study.certificate;
            cert.check = name.clone();
            Ok(vec![cert])
        });
    }
}

fn cauchy(c: &ConfigFile, out: &mut SuiteOutput) {
    let cfg = &c.suites.cauchy;
    out.step("power_series_geometric", |_| {
        let torus = TorusGrid::new(vec![C64::new(0.0, 0.0)], vec![cfg.series_radius], cfg.nodes)?;
        let values: Vec<C64> = torus.points().iter().map(|z| 1.0 / (1.0 - z[0])).collect();
        let series = power_series(&torus, &values, cfg.max_order)?;
        let mut worst = (0.0f64, 0usize);
        for (k, a) in series.coeffs.iter().enumerate() {
            let e = (a - 1.0).norm();
            if e > worst.0 {
                worst = (e, k);
            }
        }
        Ok(vec![Certificate::upper_bound("power_series_geometric", worst.0, 0.0, 1e-10)
            .with_witness(scvlab_core::certificate::Witness::new("order", vec![worst.1 as f64]))
            .with_param("radius", cfg.series_radius)
            .with_param("boundary_nodes", cfg.nodes)
            .with_param("max_order", cfg.max_order)])
    });
    out.step("cauchy_inequality", |_| {
        let torus = TorusGrid::new(vec![C64::new(0.0, 0.0)], vec![cfg.exp_radius], cfg.nodes)?;
        let values: Vec<C64> = torus.points().iter().map(|z| z[0].exp()).collect();
        let bound = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let series = power_series(&torus, &values, cfg.max_order)?;
        Ok(vec![cauchy_inequality_check(&series, bound, &[cfg.exp_radius])?
            .with_param("sup_bound", bound)
            .with_param("radius", cfg.exp_radius)])
    });
}

fn lattice_probes(domain: &DomainSpec, per_axis: usize) -> Result<Vec<Vec<C64>>> {
    let g = build_uniform_grid(domain, per_axis)?;
    Ok((0..g.len()).map(|k| g.coords(k)).collect())
}

fn renamed(cert: Certificate, name: &str) -> Certificate {
    Certificate { check: name.to_string(), ..cert }
}

fn psh(c: &ConfigFile, out: &mut SuiteOutput) {
    let cfg = &c.suites.psh;
    let domain = domain_1d_or_disc(c);
    let label = c.weight.clone().unwrap_or_else(|| DEFAULT_WEIGHT.to_string());
    out.step("psh_weight", |_| {
        let probes = lattice_probes(&domain, cfg.probes_per_axis)?;
        let v = psh_test(&weight_expr(c)?, &probes)?;
        Ok(vec![renamed(v.certificate, "psh_weight")
            .with_param("weight", label.as_str())
            .with_param("min_levi_eigenvalue", v.min_eigenvalue)
            .with_param("strict", if v.strict { "yes" } else { "no" })])
    });
    if domain.dim() == 1 {
        out.step("submean_weight", |_| {
            let w = weight_expr(c)?;
            let u = |z: C64| w.eval_complex(&[z]).unwrap_or(f64::NAN);
            let probes: Vec<C64> = lattice_probes(&domain, cfg.probes_per_axis)?.into_iter().map(|p| p[0]).collect();
            Ok(vec![renamed(submean_test(&u, &probes, &cfg.radii, cfg.circle_nodes)?, "submean_weight")
                .with_param("weight", label.as_str())])
        });
        if let Some(psi) = &c.psi {
            out.step("convex_compose_submean", |_| {
                let w = weight_expr(c)?;
                let outer = parse_expr(psi)?;
                let u = |z: C64| w.eval_complex(&[z]).unwrap_or(f64::NAN);
                let probes: Vec<C64> =
                    lattice_probes(&domain, cfg.probes_per_axis)?.into_iter().map(|p| p[0]).collect();
                Ok(vec![convex_compose_check(&outer, &u, &probes, &cfg.radii, cfg.circle_nodes)?
                    .with_param("psi", psi.as_str())])
            });
        }
        out.step("mollify_monotone", |_| {
            let w = weight_expr(c)?;
            let grid = build_uniform_grid(&domain, resolution(cfg.resolution, c, DEFAULT_PSH_RESOLUTION))?;
            let u = ScalarField::try_sample(&grid, |z| Ok(C64::new(w.eval_complex(z)?, 0.0)))?;
            let [small, big] = cfg.deltas;
            Ok(vec![
                mollify_monotone_check(&u, small, 0.0)?,
                mollify_monotone_check(&u, big, small)?,
                mollify_commute_check(&u, small, big)?,
            ])
        });
    }
    // Library of subharmonic functions with known verdicts.
    let a = C64::new(0.3, 0.2);
    let mut probes = halton_disc(24, 0.7);
    probes.push(a);
    type Subharmonic = Box<dyn Fn(C64) -> f64>;
    let library: [(&str, Subharmonic); 3] = [
        ("submean_abs_squared", Box::new(|z: C64| z.norm_sqr())),
        ("submean_log_distance", Box::new(move |z: C64| (z - a).norm().ln())),
        ("submean_exp_modulus", Box::new(|z: C64| z.exp().norm())),
    ];
    for (name, u) in library {
        out.step(name, |_| Ok(vec![renamed(submean_test(&*u, &probes, &cfg.radii, cfg.circle_nodes)?, name)]));
    }
}

fn compact_sample(cfg: &CompactConfig) -> Result<CompactSample> {
    let c = |p: &[f64; 2]| C64::new(p[0], p[1]);
    match cfg {
        CompactConfig::Circle { center, radius, nodes } => CompactSample::circle(c(center), *radius, *nodes),
        CompactConfig::Torus { centers, radii, nodes } => {
            CompactSample::torus(&centers.iter().map(c).collect::<Vec<_>>(), radii, *nodes)
        }
        CompactConfig::Points { points } => CompactSample::new(points.iter().map(|p| p.iter().map(c).collect()).collect()),
    }
}

fn hull(c: &ConfigFile, seed: u64, out: &mut SuiteOutput) {
    let cfg = &c.suites.hull;
    out.step("hull_distance_agreement", |csvs| {
        let compact = compact_sample(&cfg.compact)?;
        let domain = c.domain.clone().unwrap_or_else(|| match compact.dim() {
            1 => DomainSpec::disc(0.0.into(), 1.0),
            n => DomainSpec::unit_polydisc(n),
        });
        if domain.dim() != compact.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: compact.dim() });
        }
        let grid = build_uniform_grid(&domain, resolution(cfg.resolution, c, DEFAULT_HULL_RESOLUTION))?;
        let candidates: Vec<Vec<C64>> = (0..grid.len()).map(|k| grid.coords(k)).collect();
        let result = poly_hull_membership(&compact, &candidates, cfg.degree, cfg.random_polynomials, seed)?;
        let mut buf = Vec::new();
        write_hull_csv(&mut buf, &candidates, &result).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        csvs.push(Csv { file_name: "hull.csv".into(), contents: String::from_utf8(buf).expect("ASCII CSV") });
        let cert = hull_distance_agreement(&compact, &result.retained_points(&candidates), &domain, grid.spacing())?;
        Ok(vec![cert.with_param("degree", cfg.degree).with_param("family_size", result.family_size)])
    });
}

fn operator(c: &ConfigFile, seed: u64, out: &mut SuiteOutput) {
    let cfg = &c.suites.operator;
    out.step("operator_audit", |_| audit_random_instances(seed, cfg.instances, cfg.max_dim, cfg.samples));
    for (i, spec) in cfg.models.iter().enumerate() {
        out.step("graph_perp", |_| Ok(vec![graph_perp_check(&spec.to_model()?)?.with_param("model", i)]));
    }
}

type PointFn = Box<dyn Fn(&[C64]) -> C64>;

fn complex_component(comp: &ComplexExpr) -> Result<PointFn> {
    let eval = |e: &Expr, z: &[C64]| e.eval_complex(z).unwrap_or(f64::NAN);
    Ok(match comp {
        ComplexExpr::Real(s) => {
            let e = parse_expr(s)?;
            Box::new(move |z| C64::new(eval(&e, z), 0.0))
        }
        ComplexExpr::Pair([re, im]) => {
            let (re, im) = (parse_expr(re)?, parse_expr(im)?);
            Box::new(move |z| C64::new(eval(&re, z), eval(&im, z)))
        }
    })
}

fn hormander(c: &ConfigFile, out: &mut SuiteOutput) {
    let cfg = &c.suites.hormander;
    out.step("hormander_estimate", |csvs| {
        let domain = domain_1d_or_disc(c);
        let n = domain.dim();
        if cfg.form.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: cfg.form.len() });
        }
        let default_res = if n == 1 { DEFAULT_RESOLUTION_1D } else { DEFAULT_RESOLUTION_2D };
        let grid = build_uniform_grid(&domain, resolution(cfg.resolution, c, default_res))?;
        let comps = cfg.form.iter().map(complex_component).collect::<Result<Vec<_>>>()?;
        let refs: Vec<_> = comps.iter().map(|b| b.as_ref()).collect();
        let form: FormField = form_from_fn(&grid, &refs)?;
        let options = HormanderOptions { degrees: cfg.degrees.clone(), shrink: cfg.shrink };
        let result = hormander_solve(&weight_expr(c)?, &form, &options)?;
        let mut csv = Csv::new("hormander_degrees.csv", &["degree", "lhs", "rhs"]);
        for (d, lhs) in &result.lhs_by_degree {
            csv.push_row(&[d.to_string(), fmt(*lhs), fmt(result.rhs)]);
        }
        csvs.push(csv);
        Ok(vec![result.certificate, result.monotone])
    });
}

fn fmt(x: f64) -> String {
    scvlab_core::certificate::format_sig17(x)
}

fn ot(c: &ConfigFile, out: &mut SuiteOutput) {
    let cfg = &c.suites.ot;
    let profile = ChiProfile::Smoothstep { lo: cfg.cutoff[0], hi: cfg.cutoff[1] };
    let chen = match chen_constant(&profile, &cfg.scales) {
        Ok(k) => {
            out.certificates.extend(k.certificates.iter().cloned());
            Some(k.value)
        }
        Err(e) => {
            out.certificates.push(Certificate::failed("chen_constant", e.to_string()));
            None
        }
    };
    let r0 = optimize_r0();
    out.certificates.extend(r0.certificates.iter().cloned());
    out.step("ot_extension", |_| {
        let c_chen = chen.ok_or_else(|| Error::Precondition("cutoff constant unavailable".into()))?;
        let n = cfg.domain.dim();
        if cfg.f.dim() + 1 > n {
            return Err(Error::DimensionMismatch { expected: n - 1, got: cfg.f.dim() });
        }
        if let Some(ext) = &cfg.extension {
            if ext.dim() > n {
                return Err(Error::DimensionMismatch { expected: n, got: ext.dim() });
            }
        }
        let phi = parse_expr(&cfg.weight)?;
        let f = |z: &[C64]| cfg.f.evaluate(z);
        let extension = |z: &[C64]| match &cfg.extension {
            Some(ext) => ext.evaluate(z),
            None => cfg.f.evaluate(&z[..n - 1]),
        };
        Ok(vec![ot_extend_check(&cfg.domain, cfg.resolution, &phi, &f, &extension, c_chen, r0.c_prime)?])
    });
}

fn lp(c: &ConfigFile, out: &mut SuiteOutput) {
    let cfg = &c.suites.lp;
    out.step("lp_iteration", |_| lp_iteration_check(cfg.a0_ratio * cfg.c0, cfg.c0, cfg.p, cfg.steps));
    for case in &cfg.breakdown {
        let name = match case.expect {
            Expectation::Holds => "lp_breakdown_exponents",
            Expectation::Fails => "lp_breakdown_refuted",
        };
        out.step(name, |_| {
            Ok(vec![match case.expect {
                Expectation::Holds => lp_breakdown_exponents(case.n, case.p, case.q, &cfg.deltas)?,
                Expectation::Fails => lp_breakdown_refutation(case.n, case.p, case.q, &cfg.deltas)?,
            }])
        });
    }
    for case in &cfg.openness {
        out.step("openness_threshold", |_| {
            Ok(vec![openness_threshold_demo(case.p, case.k, case.alpha, cfg.truncation_levels)?])
        });
    }
}

fn weights(c: &ConfigFile, out: &mut SuiteOutput) {
    let cfg = &c.suites.weights;
    for &s in &cfg.s {
        out.step("weight_identities", |csvs| {
            let points = chen_sample_points(s, cfg.points)?;
            let sweep = weight_identities_check(s, &points, cfg.fd_step)?;
            csvs.push(Csv::from_sweep(format!("weights_s{s:e}.csv"), &["x", "y"], &sweep.rows));
            let mut certs: Vec<Certificate> = sweep.certificates;
            certs.push(order_chain_check(s, &points)?);
            Ok(certs.into_iter().map(|c| c.with_param("s", s).with_param("points", points.len())).collect())
        });
    }
    out.step("weight_sixth_bound", |csvs| {
        let (cert, rows) = sixth_bound_check(cfg.sixth_samples)?;
        csvs.push(Csv::from_sweep("sixth_bound.csv", &["x"], &rows));
        Ok(vec![cert])
    });
}
