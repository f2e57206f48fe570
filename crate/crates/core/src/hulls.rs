//! Polynomial and plurisubharmonic hulls of sampled compact sets.
//!
//! A candidate point is retained when no function of the tested family
//! exceeds its supremum over the compact sample there. The polynomial family
//! is every monomial of total degree at most `D` plus seeded random
//! polynomials of degree at most `D` with coefficients in the unit disc.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certificate::{Certificate, ParamValue, Witness};
use crate::error::{Error, Result};
use crate::grid::DomainSpec;
use crate::psh::psh_test_fn;
use crate::C64;

/// Relative slack when comparing against the supremum over the compact set.
pub const HULL_RELATIVE_SLACK: f64 = 1e-9;

/// Finite sample of a compact set in C^n.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSample {
    pub points: Vec<Vec<C64>>,
}

impl CompactSample {
    pub fn new(points: Vec<Vec<C64>>) -> Result<Self> {
        let n = points.first().map(|p| p.len()).ok_or_else(|| Error::InvalidArgument("empty compact sample".into()))?;
        if n == 0 || points.iter().any(|p| p.len() != n) {
            return Err(Error::InvalidArgument("compact sample points must share a positive dimension".into()));
        }
        Ok(CompactSample { points })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// `m` equally spaced points on a circle in C.
    pub fn circle(center: C64, radius: f64, m: usize) -> Result<Self> {
        Self::new((0..m).map(|k| vec![center + C64::from_polar(radius, 2.0 * PI * k as f64 / m as f64)]).collect())
    }

    /// `m^n` points on the distinguished boundary of a polydisc.
    pub fn torus(centers: &[C64], radii: &[f64], m: usize) -> Result<Self> {
        let n = centers.len();
        if radii.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: radii.len() });
        }
        let total = m.pow(n as u32);
        Self::new(
            (0..total)
                .map(|mut idx| {
                    let mut p = vec![C64::new(0.0, 0.0); n];
                    for a in (0..n).rev() {
                        let k = idx % m;
                        idx /= m;
                        p[a] = centers[a] + C64::from_polar(radii[a], 2.0 * PI * k as f64 / m as f64);
                    }
                    p
                })
                .collect(),
        )
    }
}

/// Holomorphic polynomials in `n` variables of total degree at most `D`,
/// stored by coefficient vectors over a fixed monomial ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFamily {
    pub dim: usize,
    pub degree: usize,
    pub exponents: Vec<Vec<usize>>,
    pub members: Vec<Vec<C64>>,
    pub seed: u64,
}

fn exponents_up_to(n: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(n, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, degree, &mut Vec::new(), &mut out);
    out.sort_by_key(|a| (a.iter().sum::<usize>(), a.iter().map(|&e| usize::MAX - e).collect::<Vec<_>>()));
    out
}

impl PolynomialFamily {
    /// Monomials `z^α` with `1 <= |α| <= degree` plus `random_count` seeded
    /// random polynomials.
    pub fn new(dim: usize, degree: usize, random_count: usize, seed: u64) -> Result<Self> {
        if dim == 0 || degree == 0 {
            return Err(Error::InvalidArgument("polynomial family needs dim >= 1 and degree >= 1".into()));
        }
        let exponents = exponents_up_to(dim, degree);
        let m = exponents.len();
        let mut members = Vec::new();
        for (i, alpha) in exponents.iter().enumerate() {
            if alpha.iter().sum::<usize>() > 0 {
                let mut coeffs = vec![C64::new(0.0, 0.0); m];
                coeffs[i] = C64::new(1.0, 0.0);
                members.push(coeffs);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random_count {
            members.push(
                (0..m)
                    .map(|_| {
                        let r: f64 = rng.random::<f64>().sqrt();
                        let theta: f64 = 2.0 * PI * rng.random::<f64>();
                        C64::from_polar(r, theta)
                    })
                    .collect(),
            );
        }
        Ok(PolynomialFamily { dim, degree, exponents, members, seed })
    }

    pub fn monomials_at(&self, z: &[C64]) -> Vec<C64> {
        let powers: Vec<Vec<C64>> = z
            .iter()
            .map(|&w| {
                let mut p = vec![C64::new(1.0, 0.0); self.degree + 1];
                for e in 1..=self.degree {
                    p[e] = p[e - 1] * w;
                }
                p
            })
            .collect();
        self.exponents
            .iter()
            .map(|alpha| alpha.iter().enumerate().map(|(j, &e)| powers[j][e]).product())
            .collect()
    }

    pub fn evaluate(&self, member: usize, monomials: &[C64]) -> C64 {
        self.members[member].iter().zip(monomials).map(|(c, m)| c * m).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullResult {
    pub retained: Vec<bool>,
    pub family_size: usize,
    pub degree: usize,
    pub seed: u64,
}

impl HullResult {
    pub fn retained_points(&self, candidates: &[Vec<C64>]) -> Vec<Vec<C64>> {
        candidates.iter().zip(&self.retained).filter(|(_, &r)| r).map(|(p, _)| p.clone()).collect()
    }
}

/// Approximate polynomial hull membership of candidate points.
pub fn poly_hull_membership(
    compact: &CompactSample,
    candidates: &[Vec<C64>],
    degree: usize,
    random_count: usize,
    seed: u64,
) -> Result<HullResult> {
    let n = compact.dim();
    if let Some(p) = candidates.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    let family = PolynomialFamily::new(n, degree, random_count, seed)?;
    let mut sup = vec![0.0f64; family.members.len()];
    for p in &compact.points {
        let mono = family.monomials_at(p);
        for (i, s) in sup.iter_mut().enumerate() {
            *s = s.max(family.evaluate(i, &mono).norm());
        }
    }
    let retained = candidates
        .iter()
        .map(|z| {
            let mono = family.monomials_at(z);
            (0..family.members.len())
                .all(|i| family.evaluate(i, &mono).norm() <= sup[i] * (1.0 + HULL_RELATIVE_SLACK) + 1e-300)
        })
        .collect();
    Ok(HullResult { retained, family_size: family.members.len(), degree, seed })
}

/// Plurisubharmonic test function with the probes used to certify it.
/// Real-valued function on the ambient space.
pub type RealFn = Box<dyn Fn(&[C64]) -> f64>;

pub struct PshMember {
    pub label: String,
    pub function: RealFn,
    pub probes: Vec<Vec<C64>>,
}

/// `|f|` for every member of a polynomial family.
pub fn modulus_members(family: &PolynomialFamily, probes: &[Vec<C64>]) -> Vec<PshMember> {
    (0..family.members.len())
        .map(|i| {
            let fam = family.clone();
            PshMember {
                label: format!("|p_{i}|"),
                function: Box::new(move |z: &[C64]| fam.evaluate(i, &fam.monomials_at(z)).norm()),
                probes: probes.to_vec(),
            }
        })
        .collect()
}

/// Hull membership for a family of psh functions; each member must pass the
/// Levi-form test at its probes.
pub fn psh_hull_membership(
    compact: &CompactSample,
    candidates: &[Vec<C64>],
    family: &[PshMember],
) -> Result<HullResult> {
    for m in family {
        let f = |z: &[C64]| -> Result<f64> { Ok((m.function)(z)) };
        if !m.probes.is_empty() {
            let v = psh_test_fn(&f, &m.probes)?;
            if !v.certificate.pass {
                return Err(Error::Precondition(format!(
                    "family member {} is not plurisubharmonic (Levi eigenvalue {:.3e})",
                    m.label, v.min_eigenvalue
                )));
            }
        }
    }
    let sup: Vec<f64> = family
        .iter()
        .map(|m| compact.points.iter().map(|p| (m.function)(p)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let retained = candidates
        .iter()
        .map(|z| {
            family
                .iter()
                .zip(&sup)
                .all(|(m, s)| (m.function)(z) <= s + HULL_RELATIVE_SLACK * (1.0 + s.abs()))
        })
        .collect();
    Ok(HullResult { retained, family_size: family.len(), degree: 0, seed: 0 })
}

/// `d(K̂) >= d(K) - 2h` with `d` the distance to the domain boundary.
pub fn hull_distance_check(
    compact: &CompactSample,
    retained: &[Vec<C64>],
    domain: &DomainSpec,
    h: f64,
) -> Result<Certificate> {
    let mut d_k = f64::INFINITY;
    for p in &compact.points {
        d_k = d_k.min(domain.boundary_distance(p)?);
    }
    let mut d_hull = f64::INFINITY;
    let mut witness = None;
    for p in retained {
        let d = domain.boundary_distance(p)?;
        if d < d_hull {
            d_hull = d;
            witness = Some(p.clone());
        }
    }
    let mut cert = Certificate::upper_bound("hull_boundary_distance", d_k - 2.0 * h, d_hull, 0.0)
        .with_param("distance_compact", d_k)
        .with_param("distance_hull", d_hull)
        .with_param("h", h)
        .with_param("retained", retained.len());
    if let Some(p) = witness {
        cert = cert.with_witness(Witness::at_point("retained point closest to the boundary", &p));
    }
    Ok(cert)
}

/// `|d(K) - d(K̂)| <= 2h` with `d` the distance to the domain boundary.
pub fn hull_distance_agreement(
    compact: &CompactSample,
    retained: &[Vec<C64>],
    domain: &DomainSpec,
    h: f64,
) -> Result<Certificate> {
    let lower = hull_distance_check(compact, retained, domain, h)?;
    let d_k = match lower.parameters["distance_compact"] {
        ParamValue::Real(v) => v,
        _ => unreachable!("distance_compact is real"),
    };
    let d_hull = match lower.parameters["distance_hull"] {
        ParamValue::Real(v) => v,
        _ => unreachable!("distance_hull is real"),
    };
    let mut cert = Certificate::upper_bound("hull_distance_agreement", (d_k - d_hull).abs(), 2.0 * h, 0.0);
    cert.witness = lower.witness;
    cert.parameters = lower.parameters;
    Ok(cert)
}

/// CSV with columns `x1,y1,...,retained`.
pub fn write_hull_csv(out: &mut dyn Write, candidates: &[Vec<C64>], result: &HullResult) -> std::io::Result<()> {
    let n = candidates.first().map_or(0, |p| p.len());
    let mut header: Vec<String> = (1..=n).flat_map(|j| [format!("x{j}"), format!("y{j}")]).collect();
    header.push("retained".into());
    writeln!(out, "{}", header.join(","))?;
    for (p, r) in candidates.iter().zip(&result.retained) {
        let mut row: Vec<String> = p
            .iter()
            .flat_map(|z| [crate::certificate::format_sig17(z.re), crate::certificate::format_sig17(z.im)])
            .collect();
        row.push(if *r { "1".into() } else { "0".into() });
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_uniform_grid;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn grid_points(domain: &DomainSpec, n: usize) -> (Vec<Vec<C64>>, f64) {
        let g = build_uniform_grid(domain, n).unwrap();
        ((0..g.len()).map(|k| g.coords(k)).collect(), g.spacing())
    }

    #[test]
    fn exponent_enumeration() {
        let e = exponents_up_to(2, 2);
        assert_eq!(e.len(), 6);
        assert_eq!(e[0], vec![0, 0]);
        assert!(e.iter().all(|a| a.iter().sum::<usize>() <= 2));
    }

    #[test]
    fn circle_hull_is_the_closed_disc() {
        let domain = DomainSpec::disc(c(0.0, 0.0), 1.5);
        let (cands, h) = grid_points(&domain, 64);
        let k = CompactSample::circle(c(0.0, 0.0), 1.0, 256).unwrap();
        let res = poly_hull_membership(&k, &cands, 8, 200, 7).unwrap();
        for (p, r) in cands.iter().zip(&res.retained) {
            let m = p[0].norm();
            if m < 1.0 - h {
                assert!(*r, "{m}");
            }
            if m > 1.0 + h {
                assert!(!*r, "{m}");
            }
        }
        let cert = hull_distance_check(&k, &res.retained_points(&cands), &domain, h).unwrap();
        assert!(cert.pass);
        let cert = hull_distance_agreement(&k, &res.retained_points(&cands), &domain, h).unwrap();
        assert!(cert.pass, "{} {}", cert.lhs, cert.rhs);
    }

    #[test]
    fn two_points_hull_is_the_points() {
        let domain = DomainSpec::disc(c(0.5, 0.0), 1.5);
        let (cands, h) = grid_points(&domain, 48);
        let k = CompactSample::new(vec![vec![c(0.0, 0.0)], vec![c(1.0, 0.0)]]).unwrap();
        let res = poly_hull_membership(&k, &cands, 4, 200, 3).unwrap();
        for (p, r) in cands.iter().zip(&res.retained) {
            if *r {
                assert!(p[0].norm() <= h || (p[0] - 1.0).norm() <= h, "{}", p[0]);
            }
        }
    }

    #[test]
    fn torus_hull_in_bidisc() {
        let domain = DomainSpec::unit_polydisc(2);
        let (cands, h) = grid_points(&domain, 12);
        let k = CompactSample::torus(&[c(0.0, 0.0); 2], &[0.5, 0.5], 16).unwrap();
        let res = poly_hull_membership(&k, &cands, 4, 60, 11).unwrap();
        let kept = res.retained_points(&cands);
        assert!(!kept.is_empty());
        for p in &kept {
            assert!(p.iter().all(|z| z.norm() <= 0.5 + h));
        }
        let cert = hull_distance_check(&k, &kept, &domain, h).unwrap();
        assert!(cert.pass);
        let d_hull = match cert.parameters["distance_hull"] {
            crate::certificate::ParamValue::Real(v) => v,
            _ => unreachable!(),
        };
        assert!((d_hull - 0.5).abs() <= 2.0 * h);
    }

    #[test]
    fn psh_hull_is_inside_polynomial_hull() {
        let domain = DomainSpec::disc(c(0.0, 0.0), 1.5);
        let (cands, _) = grid_points(&domain, 32);
        let k = CompactSample::new(
            (0..64).map(|i| vec![C64::from_polar(1.0, 2.0 * PI * i as f64 / 64.0) * c(1.0, 0.0) + c(0.2 * (i % 3) as f64, 0.0)]).collect(),
        )
        .unwrap();
        let family = PolynomialFamily::new(1, 3, 20, 5).unwrap();
        let poly = poly_hull_membership(&k, &cands, 3, 20, 5).unwrap();
        let probes = vec![vec![c(0.31, 0.17)], vec![c(-0.4, 0.9)]];
        let mut members = modulus_members(&family, &probes);
        members.push(PshMember {
            label: "|z|^2".into(),
            function: Box::new(|z: &[C64]| z[0].norm_sqr()),
            probes: probes.clone(),
        });
        let psh = psh_hull_membership(&k, &cands, &members).unwrap();
        for (a, b) in psh.retained.iter().zip(&poly.retained) {
            assert!(!*a || *b);
        }
    }

    #[test]
    fn non_psh_member_is_rejected() {
        let k = CompactSample::circle(c(0.0, 0.0), 1.0, 16).unwrap();
        let members = vec![PshMember {
            label: "-|z|^2".into(),
            function: Box::new(|z: &[C64]| -z[0].norm_sqr()),
            probes: vec![vec![c(0.1, 0.1)]],
        }];
        assert!(matches!(psh_hull_membership(&k, &[vec![c(0.0, 0.0)]], &members), Err(Error::Precondition(_))));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let cands = vec![vec![c(0.0, 0.5)], vec![c(1.0, 0.0)]];
        let res = HullResult { retained: vec![true, false], family_size: 1, degree: 1, seed: 0 };
        let mut buf = Vec::new();
        write_hull_csv(&mut buf, &cands, &res).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "x1,y1,retained");
        assert!(lines[1].ends_with(",1") && lines[2].ends_with(",0"));
    }
}
