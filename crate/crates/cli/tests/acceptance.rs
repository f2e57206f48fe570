//! Acceptance suite: one pass/fail line per criterion.
//!
//! Reference values are recomputed here from closed forms rather than taken
//! from the library. Run with `--nocapture` to see the report.

#![allow(clippy::type_complexity)]

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use scvlab_core::cauchy::{cauchy_inequality_check, interior_region, power_series, solve_dbar_1d, TorusGrid};
use scvlab_core::certificate::ParamValue;
use scvlab_core::expr::parse_expr;
use scvlab_core::grid::{build_uniform_grid, DomainSpec, FormField, ScalarField};
use scvlab_core::hormander::{
    chen_constant, chen_sample_points, form_from_fn, hormander_solve, lp_breakdown_exponents, lp_iteration,
    openness_threshold_demo, optimize_r0, order_chain_check, ot_extend_check, sixth_bound_check,
    weight_identities_check, ChiProfile, HormanderOptions,
};
use scvlab_core::hulls::{poly_hull_membership, CompactSample};
use scvlab_core::operators::audit_random_instances;
use scvlab_core::polydisc::polydisc_refinement_study;
use scvlab_core::psh::{mollify_commute_check, mollify_monotone_check, submean_test};
use scvlab_core::wirtinger::cr_residual_where;
use scvlab_core::{Certificate, C64};

type Outcome = Result<String, String>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn real(cert: &Certificate, key: &str) -> f64 {
    match cert.parameters.get(key) {
        Some(ParamValue::Real(v)) => *v,
        other => panic!("{}: parameter {key} is {other:?}", cert.check),
    }
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed <= Duration::from_secs(limit_secs), format!("runtime {:.1}s over {limit_secs}s", elapsed.as_secs_f64()))
}

fn unit_disc() -> DomainSpec {
    DomainSpec::disc(c(0.0, 0.0), 1.0)
}

fn dbar_one_variable() -> Outcome {
    let start = Instant::now();
    let cases: [(&str, fn(C64) -> C64, fn(C64) -> C64); 3] = [
        ("1", |_| c(1.0, 0.0), |z| z.conj()),
        ("zbar", |z| z.conj(), |z| 0.5 * z.conj() * z.conj()),
        ("e^z", |z| z.exp(), |z| z.conj() * z.exp()),
    ];
    let mut report = Vec::new();
    for (name, phi, particular) in cases {
        let mut defects = Vec::new();
        for n in [32, 64, 128] {
            let g = build_uniform_grid(&unit_disc(), n).map_err(|e| e.to_string())?;
            let sol = solve_dbar_1d(&ScalarField::sample(&g, |z| phi(z[0])).unwrap()).map_err(|e| e.to_string())?;
            let diff = sol.u.sub(&ScalarField::sample(&g, |z| particular(z[0])).unwrap()).unwrap();
            let region = interior_region(&g, 0.1);
            defects.push(cr_residual_where(&diff, |k| region[k]).unwrap());
        }
        ensure(defects[2] <= 1e-3, format!("{name}: defect {:.3e} at 128", defects[2]))?;
        ensure(defects.windows(2).all(|w| w[1] < w[0]), format!("{name}: not decreasing {defects:?}"))?;
        report.push(format!("{name} {:.2e}", defects[2]));
    }
    within(start.elapsed(), 60)?;
    Ok(report.join(", "))
}

fn polydisc_solver() -> Outcome {
    let start = Instant::now();
    let forms: [(&str, fn(&[C64]) -> [C64; 2]); 3] = [
        ("dzbar1", |_| [c(1.0, 0.0), c(0.0, 0.0)]),
        ("d(zbar1 zbar2)", |z| [z[1].conj(), z[0].conj()]),
        ("d(zbar1^2 e^z2 + |z2|^2)", |z| [2.0 * z[0].conj() * z[1].exp(), z[1]]),
    ];
    let domain = DomainSpec::unit_polydisc(2);
    let mut report = Vec::new();
    for (name, f) in forms {
        let study = polydisc_refinement_study(&domain, &[24, 32, 48], 0.5, &|g| {
            let f1 = ScalarField::sample(g, |z| f(z)[0])?;
            let f2 = ScalarField::sample(g, |z| f(z)[1])?;
            FormField::from_01_coefficients(g, vec![f1, f2])
        })
        .map_err(|e| format!("{name}: {e}"))?;
        let h = study.spacings[2];
        let r = study.residuals[2];
        ensure(r <= 20.0 * h, format!("{name}: residual {r:.3e} > 20h"))?;
        ensure(study.residuals.windows(2).all(|w| w[1] < w[0]), format!("{name}: not decreasing"))?;
        report.push(format!("{:.2e}", r));
    }
    within(start.elapsed(), 300)?;
    Ok(format!("residuals at 48 nodes/axis {}", report.join(", ")))
}

fn subharmonicity() -> Outcome {
    let probes: Vec<C64> = (0..25).map(|k| c(-0.6 + 0.3 * (k % 5) as f64, -0.6 + 0.3 * (k / 5) as f64)).collect();
    let radii = [0.05, 0.1, 0.2];
    let a = c(0.3, 0.2);
    let mut probes_log = probes.clone();
    probes_log.push(a);
    let checks: [(&str, Box<dyn Fn(C64) -> f64>, &[C64]); 3] = [
        ("|z|^2", Box::new(|z: C64| z.norm_sqr()), &probes),
        ("log|z-a|", Box::new(move |z: C64| (z - a).norm().ln()), &probes_log),
        ("|e^z|", Box::new(|z: C64| z.exp().norm()), &probes),
    ];
    for (name, u, pts) in &checks {
        let cert = submean_test(u.as_ref(), pts, &radii, 256).map_err(|e| e.to_string())?;
        ensure(cert.pass, format!("submean fails for {name}"))?;
    }
    let neg = submean_test(&|z: C64| -z.norm_sqr(), &probes, &radii, 256).map_err(|e| e.to_string())?;
    ensure(!neg.pass && neg.witness.is_some(), "-|z|^2 not rejected with a witness")?;

    let g = build_uniform_grid(&unit_disc(), 96).unwrap();
    let u = ScalarField::sample(&g, |z| c((z[0].norm_sqr() + 0.01).ln(), 0.0)).unwrap();
    let m1 = mollify_monotone_check(&u, 0.1, 0.0).map_err(|e| e.to_string())?;
    let m2 = mollify_monotone_check(&u, 0.15, 0.1).map_err(|e| e.to_string())?;
    let comm = mollify_commute_check(&u, 0.1, 0.15).map_err(|e| e.to_string())?;
    ensure(m1.pass && m2.pass && m1.tolerance <= 1e-9, "mollification not monotone")?;
    ensure(comm.lhs <= 1e-9, format!("commutation defect {:.3e}", comm.lhs))?;
    let w = neg.witness.unwrap().values;
    Ok(format!("-|z|^2 witness ({:.2}, {:.2}) r={:.2}; commutation {:.1e}", w[0], w[1], w[2], comm.lhs))
}

fn power_series_checks() -> Outcome {
    let torus = TorusGrid::new(vec![c(0.0, 0.0)], vec![0.5], 256).unwrap();
    let vals: Vec<C64> = torus.points().iter().map(|z| 1.0 / (1.0 - z[0])).collect();
    let series = power_series(&torus, &vals, 20).map_err(|e| e.to_string())?;
    ensure(series.coeffs.len() == 21, "expected orders 0..=20")?;
    let worst = series.coeffs.iter().map(|a| (a - 1.0).norm()).fold(0.0, f64::max);
    ensure(worst <= 1e-10, format!("geometric coefficients off by {worst:.3e}"))?;
    let torus = TorusGrid::new(vec![c(0.0, 0.0)], vec![1.0], 256).unwrap();
    let vals: Vec<C64> = torus.points().iter().map(|z| z[0].exp()).collect();
    let series = power_series(&torus, &vals, 20).map_err(|e| e.to_string())?;
    let cert = cauchy_inequality_check(&series, 1f64.exp(), &[1.0]).map_err(|e| e.to_string())?;
    ensure(cert.pass, "Cauchy inequality for e^z fails")?;
    Ok(format!("max |a_k - 1| = {worst:.2e}"))
}

fn hull_diagnostics() -> Outcome {
    let domain = unit_disc();
    let g = build_uniform_grid(&domain, 96).unwrap();
    let h = g.spacing();
    let cands: Vec<Vec<C64>> = (0..g.len()).map(|k| g.coords(k)).collect();
    let k = CompactSample::circle(c(0.0, 0.0), 0.5, 256).unwrap();
    let res = poly_hull_membership(&k, &cands, 8, 200, 0).map_err(|e| e.to_string())?;
    let d_hull = res.retained_points(&cands).iter().map(|p| 1.0 - p[0].norm()).fold(f64::INFINITY, f64::min);
    let d_k = 0.5;
    let gap = (d_k - d_hull).abs();
    ensure(gap <= 2.0 * h, format!("|d(K) - d(hull)| = {gap:.3e} > 2h = {:.3e}", 2.0 * h))?;
    Ok(format!("|d(K) - d(hull)| = {gap:.2e}, 2h = {:.2e}", 2.0 * h))
}

fn operator_models() -> Outcome {
    let certs = audit_random_instances(2024, 100, 8, 1000).map_err(|e| e.to_string())?;
    let get = |name: &str| certs.iter().find(|c| c.check == name).ok_or(format!("missing {name}"));
    let graph = get("operator_graph_perp")?;
    let inv = get("operator_adjoint_involution")?;
    ensure(graph.lhs <= 1e-10, format!("graph-perp residual {:.3e}", graph.lhs))?;
    ensure(inv.lhs <= 1e-12, format!("involution residual {:.3e}", inv.lhs))?;
    ensure(get("operator_solve_bound")?.pass, "solve_with_bound violated")?;
    let basic = get("operator_basic_estimate")?;
    let violations = match basic.parameters.get("violations") {
        Some(ParamValue::Int(v)) => *v,
        other => return Err(format!("violations parameter {other:?}")),
    };
    ensure(basic.pass && violations == 0, format!("{violations} basic-estimate violations"))?;
    ensure(certs.iter().all(|c| c.pass), "an operator certificate fails")?;
    Ok(format!("graph {:.1e}, involution {:.1e}, 0 violations", graph.lhs, inv.lhs))
}

fn weight_suite() -> Outcome {
    for s in [0.1, 0.01, 0.001] {
        let pts = chen_sample_points(s, 10_000).map_err(|e| e.to_string())?;
        ensure(pts.len() >= 10_000, "too few sample points")?;
        let sweep = weight_identities_check(s, &pts, 1e-3).map_err(|e| e.to_string())?;
        ensure(sweep.certificates.len() == 9, "expected nine certificates")?;
        for cert in &sweep.certificates[..6] {
            ensure(cert.pass && cert.tolerance <= 1e-5, format!("s={s}: {} fails", cert.check))?;
        }
        for cert in &sweep.certificates[6..] {
            ensure(cert.margin >= -1e-8, format!("s={s}: {} margin {:.3e}", cert.check, cert.margin))?;
        }
        let chain = order_chain_check(s, &pts).map_err(|e| e.to_string())?;
        ensure(chain.pass, format!("s={s}: order chain fails"))?;
        // Spot-check the chain 1 < -rho < eta < -2 rho directly.
        for z in pts.iter().step_by(97) {
            let t = z.norm_sqr() + s * s;
            let rho = t.ln();
            let eta = -rho + (-rho).ln();
            ensure(1.0 < -rho && -rho < eta && eta < -2.0 * rho, format!("chain broken at {z}"))?;
        }
    }
    let (sixth, _) = sixth_bound_check(10_000).map_err(|e| e.to_string())?;
    ensure(sixth.lhs >= 1.0 / 6.0 - 1e-12, format!("1/6 bound min {:.17}", sixth.lhs))?;
    let argmin = real(&sixth, "argmin_x");
    ensure((argmin - 1.0).abs() < 1e-12, format!("minimum at x = {argmin}"))?;
    Ok(format!("min ratio {:.15} at x = {argmin}", sixth.lhs))
}

fn constants() -> Outcome {
    let k = chen_constant(&ChiProfile::default(), &[0.1, 0.01, 0.001]).map_err(|e| e.to_string())?;
    ensure(((k.value - k.cartesian) / k.value).abs() <= 1e-6, "dual quadrature disagrees")?;
    for (s, v) in &k.rescaled {
        ensure(((v - k.value) / k.value).abs() <= 1e-6, format!("rescaling at s = {s} disagrees"))?;
    }
    let r0 = optimize_r0();
    let root = (-8.0 + (64.0f64 + 16.0 / 6.0).sqrt()) / 8.0;
    ensure((4.0 * root * root + 8.0 * root - 1.0 / 6.0).abs() < 1e-15, "oracle root")?;
    ensure((r0.r0 - root).abs() <= 1e-8, format!("r0 = {} vs {root}", r0.r0))?;
    let g = |r: f64| (1.0 + 1.0 / r) / (1.0 / 6.0 - 4.0 * r);
    let d = 1e-7 * root;
    let slope = (g(r0.r0 + d) - g(r0.r0 - d)) / (2.0 * d);
    ensure((slope * r0.r0 / g(r0.r0)).abs() <= 1e-6, format!("g'(r0) relative {:.3e}", slope * r0.r0 / g(r0.r0)))?;
    ensure(k.certificates.iter().chain(&r0.certificates).all(|c| c.pass), "a constant certificate fails")?;
    Ok(format!("C = {:.6}, r0 = {:.10}, C' = {:.4}", k.value, r0.r0, r0.c_prime))
}

fn hormander_certificate() -> Outcome {
    let start = Instant::now();
    let g = build_uniform_grid(&unit_disc(), 128).unwrap();
    let one = |_: &[C64]| c(1.0, 0.0);
    let f = form_from_fn(&g, &[&one]).map_err(|e| e.to_string())?;
    let phi = parse_expr("x1^2 + y1^2").unwrap();
    let res = hormander_solve(&phi, &f, &HormanderOptions { degrees: vec![4, 8, 12], shrink: 0.8 })
        .map_err(|e| e.to_string())?;
    ensure(res.certificate.margin > 0.0, format!("margin {:.3e}", res.certificate.margin))?;
    let analytic = PI * (1.0 - (-1.0f64).exp());
    ensure(((res.rhs - analytic) / analytic).abs() <= 0.02, format!("rhs {} vs {analytic}", res.rhs))?;
    let lhs: Vec<f64> = res.lhs_by_degree.iter().map(|p| p.1).collect();
    ensure(lhs.windows(2).all(|w| w[1] <= w[0]), format!("lhs not non-increasing {lhs:?}"))?;
    within(start.elapsed(), 120)?;
    Ok(format!("lhs {:.5} <= rhs {:.5} (analytic {analytic:.5})", res.certificate.lhs, res.rhs))
}

fn extension_certificate() -> Outcome {
    let start = Instant::now();
    let domain = DomainSpec::product(&[(c(0.0, 0.0), 0.9), (c(0.0, 0.0), 0.5)]);
    let phi = parse_expr("x1^2 + y1^2 + x2^2 + y2^2").unwrap();
    let k = chen_constant(&ChiProfile::default(), &[0.1]).map_err(|e| e.to_string())?;
    let r0 = optimize_r0();
    let one = |_: &[C64]| c(1.0, 0.0);
    let cert = ot_extend_check(&domain, 48, &phi, &one, &one, k.value, r0.c_prime).map_err(|e| e.to_string())?;
    let rhs_slice = real(&cert, "rhs_slice_integral");
    // Slice integral of e^{-|z1|^2} over disc(0, 0.9).
    let oracle = PI * (1.0 - (-0.81f64).exp());
    ensure(((rhs_slice - oracle) / oracle).abs() < 0.02, format!("slice integral {rhs_slice} vs {oracle}"))?;
    ensure(cert.lhs <= 8.0 * r0.c_prime * k.value * rhs_slice, "extension inequality fails")?;
    ensure(cert.pass, "certificate fails")?;
    let tail = real(&cert, "tail_bound");
    ensure(tail.is_finite() && tail > 0.0, "tail bound missing")?;
    within(start.elapsed(), 300)?;
    Ok(format!("lhs_upper {:.4} (tail {:.3}) <= {:.4e}", cert.lhs, tail, cert.rhs))
}

fn lp_machinery() -> Outcome {
    let (c0, p) = (1.0, 1.0);
    let seq = lp_iteration(10.0 * c0, c0, p, 25).map_err(|e| e.to_string())?;
    for (n, a) in seq.iter().enumerate() {
        let exact = c0 * 10f64.powf(0.5f64.powi(n as i32));
        ensure(((a - exact) / exact).abs() <= 1e-12, format!("A_{n} = {a} vs {exact}"))?;
    }
    ensure((seq[25] - c0).abs() <= 1e-6, format!("|A_25 - C0| = {:.3e}", (seq[25] - c0).abs()))?;
    let eq = lp_breakdown_exponents(1, 2.0, 2.0, &[0.1, 0.01]).map_err(|e| e.to_string())?;
    ensure(eq.pass && (eq.lhs - eq.rhs).abs() < 1e-15, "p=q=2 should be an equality")?;
    let bad = lp_breakdown_exponents(1, 3.0, 3.0, &[0.1, 0.01]).map_err(|e| e.to_string())?;
    ensure(!bad.pass, "p=q=3 should fail")?;
    let cases = [(2.0, 1, 1.0), (2.0, 0, 1.0), (1.0, 0, 0.5), (2.0, 0, 1.5), (1.0, 2, 1.5)];
    for (p, k, alpha) in cases {
        let cert = openness_threshold_demo(p, k, alpha, 20).map_err(|e| e.to_string())?;
        let finite = p * k as f64 - 2.0 * alpha > -2.0;
        let numeric = match cert.parameters.get("numeric") {
            Some(ParamValue::Text(t)) => t == "finite",
            other => return Err(format!("numeric flag {other:?}")),
        };
        ensure(cert.pass && numeric == finite, format!("openness flags disagree for {p}, {k}, {alpha}"))?;
    }
    Ok(format!("|A_25 - C0| = {:.1e}", (seq[25] - c0).abs()))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("all.json");
    std::fs::write(&cfg, "{\"seed\": 11}").unwrap();
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_scvlab"))
            .args(["all", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.code() == Some(0), format!("`all` exited with {:?}", status.status.code()))?;
        std::fs::read(out.join("certificates.json")).map_err(|e| e.to_string())
    };
    let a = run("first")?;
    let b = run("second")?;
    ensure(a == b, "certificates.json differs between runs")?;
    Ok(format!("{} identical bytes", a.len()))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("dbar solver in one variable", dbar_one_variable),
        ("polydisc dbar solver", polydisc_solver),
        ("subharmonicity suite", subharmonicity),
        ("power series and Cauchy inequality", power_series_checks),
        ("hull diagnostics", hull_diagnostics),
        ("operator models", operator_models),
        ("weight identities and inequalities", weight_suite),
        ("cutoff and r0 constants", constants),
        ("weighted L2 estimate certificate", hormander_certificate),
        ("extension certificate", extension_certificate),
        ("Lp machinery", lp_machinery),
        ("determinism of `all`", determinism),
    ];
    let mut failures = Vec::new();
    for (i, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match &outcome {
            Ok(detail) => println!("criterion {:>2} PASS {title}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL {title}: {why} [{secs:.1}s]", i + 1);
                failures.push(i + 1);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
