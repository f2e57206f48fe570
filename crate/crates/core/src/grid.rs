//! Product-lattice grids over polydiscs, products of discs and annuli.
//!
//! Every supported domain is a product of planar domains (discs or annuli).
//! Each planar factor gets a square lattice covering its bounding square;
//! lattice points strictly inside the factor are nodes. A grid node of the
//! product is a tuple of per-axis nodes, indexed in mixed radix with the last
//! axis varying fastest.
//!
//! Quadrature weights are exact cell areas: each lattice cell of side `h`
//! contributes its area inside the planar domain. Cell area of lattice points
//! that fall outside the domain is handed to an adjacent node so the weights
//! of a disc sum to its area and smooth integrands converge at O(h^2).

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Minimum lattice side accepted by [`build_grid`].
pub const MIN_NODES_PER_AXIS: usize = 8;

/// Refuse to build grids with more nodes than this.
pub const MAX_GRID_NODES: usize = 60_000_000;

const NO_NODE: u32 = u32::MAX;

/// Serialize a complex number as `[re, im]`.
pub mod complex_pair {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

/// Serialize a list of complex numbers as `[[re, im], ...]`.
pub mod complex_pairs {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(zs: &[C64], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<[f64; 2]> = zs.iter().map(|z| [z.re, z.im]).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let v = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(v.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscParams {
    #[serde(with = "complex_pair")]
    pub center: C64,
    pub radius: f64,
}

/// Domain description, serialized as `{"kind": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum DomainSpec {
    Disc {
        #[serde(with = "complex_pair")]
        center: C64,
        radius: f64,
    },
    Polydisc {
        #[serde(with = "complex_pairs")]
        centers: Vec<C64>,
        radii: Vec<f64>,
    },
    Product {
        discs: Vec<DiscParams>,
    },
    Annulus {
        #[serde(with = "complex_pair")]
        center: C64,
        r_inner: f64,
        r_outer: f64,
    },
}

/// A disc (`r_inner == 0`) or an annulus in one complex variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarDomain {
    pub center: C64,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl PlanarDomain {
    pub fn disc(center: C64, radius: f64) -> Self {
        PlanarDomain { center, r_inner: 0.0, r_outer: radius }
    }

    pub fn contains(&self, z: C64) -> bool {
        let d = (z - self.center).norm();
        d < self.r_outer && (self.r_inner == 0.0 || d > self.r_inner)
    }

    /// Distance to the complement, zero outside.
    pub fn boundary_distance(&self, z: C64) -> f64 {
        let d = (z - self.center).norm();
        let mut dist = self.r_outer - d;
        if self.r_inner > 0.0 {
            dist = dist.min(d - self.r_inner);
        }
        dist.max(0.0)
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * (self.r_outer * self.r_outer - self.r_inner * self.r_inner)
    }

    /// Area of the intersection with the axis-parallel rectangle.
    pub fn rect_area(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let (cx, cy) = (self.center.re, self.center.im);
        let outer = disc_rect_area(self.r_outer, x0 - cx, x1 - cx, y0 - cy, y1 - cy);
        if self.r_inner > 0.0 {
            let inner = disc_rect_area(self.r_inner, x0 - cx, x1 - cx, y0 - cy, y1 - cy);
            (outer - inner).max(0.0)
        } else {
            outer
        }
    }
}

/// Area of `{x^2 + y^2 < r^2} ∩ [a, b] x [c, d]`.
pub fn disc_rect_area(r: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    // Fast paths: rectangle entirely inside or entirely outside the disc.
    let far_x = a.abs().max(b.abs());
    let far_y = c.abs().max(d.abs());
    if far_x * far_x + far_y * far_y <= r * r {
        return (b - a) * (d - c);
    }
    let near_x = if a > 0.0 { a } else if b < 0.0 { -b } else { 0.0 };
    let near_y = if c > 0.0 { c } else if d < 0.0 { -d } else { 0.0 };
    if near_x * near_x + near_y * near_y >= r * r {
        return 0.0;
    }

    let lo = a.max(-r);
    let hi = b.min(r);
    if hi <= lo {
        return 0.0;
    }
    let half_chord = |x: f64| (r * r - x * x).max(0.0).sqrt();
    // Antiderivative of half_chord.
    let prim = |x: f64| {
        let t = (x / r).clamp(-1.0, 1.0);
        0.5 * (x * half_chord(x) + r * r * t.asin())
    };
    let mut cuts = vec![lo, hi];
    for y in [c, d] {
        if y.abs() < r {
            let x = (r * r - y * y).sqrt();
            for xb in [-x, x] {
                if xb > lo && xb < hi {
                    cuts.push(xb);
                }
            }
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());

    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        if x1 <= x0 {
            continue;
        }
        let s = half_chord(0.5 * (x0 + x1));
        let upper_is_chord = s < d;
        let lower_is_chord = -s > c;
        let upper = if upper_is_chord { s } else { d };
        let lower = if lower_is_chord { -s } else { c };
        if upper <= lower {
            continue;
        }
        let chord_integral = prim(x1) - prim(x0);
        let len = x1 - x0;
        let up = if upper_is_chord { chord_integral } else { d * len };
        let down = if lower_is_chord { -chord_integral } else { c * len };
        total += up - down;
    }
    total.max(0.0)
}

impl DomainSpec {
    pub fn disc(center: C64, radius: f64) -> Self {
        DomainSpec::Disc { center, radius }
    }

    pub fn polydisc(centers: Vec<C64>, radii: Vec<f64>) -> Self {
        DomainSpec::Polydisc { centers, radii }
    }

    pub fn unit_polydisc(n: usize) -> Self {
        DomainSpec::Polydisc { centers: vec![C64::new(0.0, 0.0); n], radii: vec![1.0; n] }
    }

    pub fn annulus(center: C64, r_inner: f64, r_outer: f64) -> Self {
        DomainSpec::Annulus { center, r_inner, r_outer }
    }

    pub fn product(discs: &[(C64, f64)]) -> Self {
        DomainSpec::Product {
            discs: discs.iter().map(|&(center, radius)| DiscParams { center, radius }).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_radius = |r: f64, what: &str| -> Result<()> {
            if r.is_finite() && r > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!("{what} must be positive and finite, got {r}")))
            }
        };
        let check_center = |c: C64| -> Result<()> {
            if c.re.is_finite() && c.im.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidDomain("center must be finite".into()))
            }
        };
        match self {
            DomainSpec::Disc { center, radius } => {
                check_center(*center)?;
                check_radius(*radius, "radius")
            }
            DomainSpec::Polydisc { centers, radii } => {
                if centers.len() != radii.len() {
                    return Err(Error::InvalidDomain(format!(
                        "{} centers but {} radii",
                        centers.len(),
                        radii.len()
                    )));
                }
                if radii.is_empty() {
                    return Err(Error::InvalidDomain("polydisc needs at least one axis".into()));
                }
                for (c, r) in centers.iter().zip(radii) {
                    check_center(*c)?;
                    check_radius(*r, "radius")?;
                }
                Ok(())
            }
            DomainSpec::Product { discs } => {
                if discs.is_empty() {
                    return Err(Error::InvalidDomain("product needs at least one disc".into()));
                }
                for d in discs {
                    check_center(d.center)?;
                    check_radius(d.radius, "radius")?;
                }
                Ok(())
            }
            DomainSpec::Annulus { center, r_inner, r_outer } => {
                check_center(*center)?;
                check_radius(*r_inner, "inner radius")?;
                check_radius(*r_outer, "outer radius")?;
                if r_inner >= r_outer {
                    return Err(Error::InvalidDomain(format!(
                        "inner radius {r_inner} must be below outer radius {r_outer}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Number of complex variables.
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Disc { .. } | DomainSpec::Annulus { .. } => 1,
            DomainSpec::Polydisc { radii, .. } => radii.len(),
            DomainSpec::Product { discs } => discs.len(),
        }
    }

    pub fn factors(&self) -> Vec<PlanarDomain> {
        match self {
            DomainSpec::Disc { center, radius } => vec![PlanarDomain::disc(*center, *radius)],
            DomainSpec::Polydisc { centers, radii } => centers
                .iter()
                .zip(radii)
                .map(|(c, r)| PlanarDomain::disc(*c, *r))
                .collect(),
            DomainSpec::Product { discs } => {
                discs.iter().map(|d| PlanarDomain::disc(d.center, d.radius)).collect()
            }
            DomainSpec::Annulus { center, r_inner, r_outer } => {
                vec![PlanarDomain { center: *center, r_inner: *r_inner, r_outer: *r_outer }]
            }
        }
    }

    fn check_dim(&self, point: &[C64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: point.len() });
        }
        Ok(())
    }

    pub fn contains(&self, point: &[C64]) -> Result<bool> {
        self.check_dim(point)?;
        Ok(self.factors().iter().zip(point).all(|(f, z)| f.contains(*z)))
    }

    /// Distance from a point to the complement of the domain (zero outside).
    pub fn boundary_distance(&self, point: &[C64]) -> Result<f64> {
        self.check_dim(point)?;
        Ok(self
            .factors()
            .iter()
            .zip(point)
            .map(|(f, z)| f.boundary_distance(*z))
            .fold(f64::INFINITY, f64::min))
    }

    pub fn volume(&self) -> f64 {
        self.factors().iter().map(|f| f.area()).product()
    }

    /// Concentric copy with every outer radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<DomainSpec> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor {factor} must be positive")));
        }
        let out = match self {
            DomainSpec::Disc { center, radius } => DomainSpec::Disc { center: *center, radius: radius * factor },
            DomainSpec::Polydisc { centers, radii } => DomainSpec::Polydisc {
                centers: centers.clone(),
                radii: radii.iter().map(|r| r * factor).collect(),
            },
            DomainSpec::Product { discs } => DomainSpec::Product {
                discs: discs
                    .iter()
                    .map(|d| DiscParams { center: d.center, radius: d.radius * factor })
                    .collect(),
            },
            DomainSpec::Annulus { center, r_inner, r_outer } => DomainSpec::Annulus {
                center: *center,
                r_inner: *r_inner,
                r_outer: r_outer * factor,
            },
        };
        out.validate()?;
        Ok(out)
    }

    /// The set of points at distance more than `delta` from the complement.
    pub fn shrunk(&self, delta: f64) -> Result<DomainSpec> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("shrink distance {delta} must be non-negative")));
        }
        let out = match self {
            DomainSpec::Disc { center, radius } => DomainSpec::Disc { center: *center, radius: radius - delta },
            DomainSpec::Polydisc { centers, radii } => DomainSpec::Polydisc {
                centers: centers.clone(),
                radii: radii.iter().map(|r| r - delta).collect(),
            },
            DomainSpec::Product { discs } => DomainSpec::Product {
                discs: discs
                    .iter()
                    .map(|d| DiscParams { center: d.center, radius: d.radius - delta })
                    .collect(),
            },
            DomainSpec::Annulus { center, r_inner, r_outer } => DomainSpec::Annulus {
                center: *center,
                r_inner: r_inner + delta,
                r_outer: r_outer - delta,
            },
        };
        out.validate()?;
        Ok(out)
    }
}

/// One-sided or centered first-derivative stencil along a lattice direction,
/// expressed with per-axis local node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stencil {
    Central { minus: u32, plus: u32 },
    Forward2 { step1: u32, step2: u32 },
    Backward2 { step1: u32, step2: u32 },
    Forward1 { step1: u32 },
    Backward1 { step1: u32 },
    Isolated,
}

/// Lattice and nodes of one planar factor.
#[derive(Debug, Clone)]
pub struct AxisGrid {
    pub domain: PlanarDomain,
    pub side: usize,
    pub h: f64,
    pub origin: C64,
    lattice: Vec<u32>,
    cells: Vec<(u32, u32)>,
    coords: Vec<C64>,
    weights: Vec<f64>,
    stencil_x: Vec<Stencil>,
    stencil_y: Vec<Stencil>,
    depth: Vec<u8>,
}

impl AxisGrid {
    /// Square lattice of `side` points covering the bounding square of `domain`.
    pub fn new(domain: PlanarDomain, side: usize) -> Self {
        let r = domain.r_outer;
        let h = 2.0 * r / (side as f64 - 1.0);
        let origin = domain.center - C64::new(r, r);
        Self::with_lattice(domain, origin, h, side)
    }

    /// Nodes of `domain` on a given lattice.
    pub fn with_lattice(domain: PlanarDomain, origin: C64, h: f64, side: usize) -> Self {
        let point = |i: usize, j: usize| origin + C64::new(i as f64 * h, j as f64 * h);
        let mut lattice = vec![NO_NODE; side * side];
        let mut cells = Vec::new();
        let mut coords = Vec::new();
        for i in 0..side {
            for j in 0..side {
                let z = point(i, j);
                if domain.contains(z) {
                    lattice[i * side + j] = cells.len() as u32;
                    cells.push((i as u32, j as u32));
                    coords.push(z);
                }
            }
        }

        let mut weights = vec![0.0; cells.len()];
        let offsets: [(isize, isize); 8] =
            [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        for i in 0..side {
            for j in 0..side {
                let z = point(i, j);
                let a = domain.rect_area(z.re - 0.5 * h, z.re + 0.5 * h, z.im - 0.5 * h, z.im + 0.5 * h);
                if a <= 0.0 {
                    continue;
                }
                let own = lattice[i * side + j];
                if own != NO_NODE {
                    weights[own as usize] += a;
                    continue;
                }
                for (di, dj) in offsets {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if ni < 0 || nj < 0 || ni >= side as isize || nj >= side as isize {
                        continue;
                    }
                    let nb = lattice[ni as usize * side + nj as usize];
                    if nb != NO_NODE {
                        weights[nb as usize] += a;
                        break;
                    }
                }
            }
        }

        let mut grid = AxisGrid {
            domain,
            side,
            h,
            origin,
            lattice,
            cells,
            coords,
            weights,
            stencil_x: Vec::new(),
            stencil_y: Vec::new(),
            depth: Vec::new(),
        };
        grid.stencil_x = (0..grid.len()).map(|l| grid.make_stencil(l, 1, 0)).collect();
        grid.stencil_y = (0..grid.len()).map(|l| grid.make_stencil(l, 0, 1)).collect();
        grid.depth = (0..grid.len()).map(|l| grid.block_depth(l)).collect();
        grid
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Lattice position `(i, j)` of a local node.
    pub fn cell(&self, local: usize) -> (usize, usize) {
        let (i, j) = self.cells[local];
        (i as usize, j as usize)
    }

    /// Local node at lattice position, if it is a node.
    pub fn node_at(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i >= self.side as isize || j >= self.side as isize {
            return None;
        }
        let v = self.lattice[i as usize * self.side + j as usize];
        (v != NO_NODE).then_some(v as usize)
    }

    /// Neighbor of a local node shifted by lattice offsets.
    pub fn neighbor(&self, local: usize, di: isize, dj: isize) -> Option<usize> {
        let (i, j) = self.cell(local);
        self.node_at(i as isize + di, j as isize + dj)
    }

    /// Local node at the lattice point nearest to `z`, if that point is a node.
    pub fn nearest_node(&self, z: C64) -> Option<usize> {
        let u = (z - self.origin) / self.h;
        self.node_at(u.re.round() as isize, u.im.round() as isize)
    }

    fn make_stencil(&self, local: usize, di: isize, dj: isize) -> Stencil {
        let p1 = self.neighbor(local, di, dj);
        let m1 = self.neighbor(local, -di, -dj);
        match (m1, p1) {
            (Some(m), Some(p)) => Stencil::Central { minus: m as u32, plus: p as u32 },
            (None, Some(p)) => match self.neighbor(local, 2 * di, 2 * dj) {
                Some(p2) => Stencil::Forward2 { step1: p as u32, step2: p2 as u32 },
                None => Stencil::Forward1 { step1: p as u32 },
            },
            (Some(m), None) => match self.neighbor(local, -2 * di, -2 * dj) {
                Some(m2) => Stencil::Backward2 { step1: m as u32, step2: m2 as u32 },
                None => Stencil::Backward1 { step1: m as u32 },
            },
            (None, None) => Stencil::Isolated,
        }
    }

    fn block_depth(&self, local: usize) -> u8 {
        let mut depth = 0u8;
        for d in 1..=2isize {
            for di in -d..=d {
                for dj in -d..=d {
                    if self.neighbor(local, di, dj).is_none() {
                        return depth;
                    }
                }
            }
            depth = d as u8;
        }
        depth
    }

    pub fn stencil_x(&self, local: usize) -> Stencil {
        self.stencil_x[local]
    }

    pub fn stencil_y(&self, local: usize) -> Stencil {
        self.stencil_y[local]
    }

    /// Size (0, 1 or 2) of the largest fully-unmasked centered lattice block
    /// of half-width `depth` around the node.
    pub fn depth(&self, local: usize) -> u8 {
        self.depth[local]
    }
}

/// Product grid over a domain.
#[derive(Debug, Clone)]
pub struct Grid {
    domain: DomainSpec,
    axes: Vec<AxisGrid>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    fn from_axes(domain: DomainSpec, axes: Vec<AxisGrid>) -> Result<Grid> {
        let mut len: usize = 1;
        for a in &axes {
            len = len
                .checked_mul(a.len())
                .filter(|&l| l <= MAX_GRID_NODES)
                .ok_or_else(|| Error::InvalidArgument("grid has too many nodes".into()))?;
        }
        if len == 0 {
            return Err(Error::InvalidDomain("grid has no nodes".into()));
        }
        let mut strides = vec![1usize; axes.len()];
        for a in (0..axes.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].len();
        }
        Ok(Grid { domain, axes, strides, len })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, a: usize) -> &AxisGrid {
        &self.axes[a]
    }

    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    pub fn stride(&self, a: usize) -> usize {
        self.strides[a]
    }

    /// Largest lattice spacing over the axes.
    pub fn spacing(&self) -> f64 {
        self.axes.iter().map(|a| a.h).fold(0.0, f64::max)
    }

    pub fn local(&self, node: usize, a: usize) -> usize {
        (node / self.strides[a]) % self.axes[a].len()
    }

    pub fn locals(&self, node: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.local(node, a)).collect()
    }

    pub fn index_of(&self, locals: &[usize]) -> usize {
        locals.iter().zip(&self.strides).map(|(l, s)| l * s).sum()
    }

    pub fn coords(&self, node: usize) -> Vec<C64> {
        (0..self.dim()).map(|a| self.axes[a].coords[self.local(node, a)]).collect()
    }

    pub fn coords_into(&self, node: usize, out: &mut [C64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.axes[a].coords[self.local(node, a)];
        }
    }

    pub fn coord(&self, node: usize, a: usize) -> C64 {
        self.axes[a].coords[self.local(node, a)]
    }

    pub fn weight(&self, node: usize) -> f64 {
        (0..self.dim()).map(|a| self.axes[a].weights[self.local(node, a)]).product()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.weight(k)).collect()
    }

    /// Minimum over axes of the per-axis block depth.
    pub fn depth(&self, node: usize) -> u8 {
        (0..self.dim()).map(|a| self.axes[a].depth(self.local(node, a))).min().unwrap_or(0)
    }

    pub fn boundary_distance(&self, node: usize) -> f64 {
        (0..self.dim())
            .map(|a| self.axes[a].domain.boundary_distance(self.coord(node, a)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Grid of a smaller domain on the same lattice.
    pub fn subgrid(&self, domain: &DomainSpec) -> Result<Arc<Grid>> {
        domain.validate()?;
        if domain.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: domain.dim() });
        }
        let mut axes = Vec::with_capacity(self.dim());
        for (parent, factor) in self.axes.iter().zip(domain.factors()) {
            let sub = AxisGrid::with_lattice(factor, parent.origin, parent.h, parent.side);
            for l in 0..sub.len() {
                let (i, j) = sub.cell(l);
                if parent.node_at(i as isize, j as isize).is_none() {
                    return Err(Error::InvalidDomain("subdomain is not contained in the grid domain".into()));
                }
            }
            axes.push(sub);
        }
        Ok(Arc::new(Grid::from_axes(domain.clone(), axes)?))
    }

    /// For each node of `sub` (same lattice), the matching node of `self`.
    pub fn embedding_of(&self, sub: &Grid) -> Result<Vec<usize>> {
        if sub.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: sub.dim() });
        }
        let mut axis_maps = Vec::with_capacity(self.dim());
        for (pa, sa) in self.axes.iter().zip(&sub.axes) {
            if pa.side != sa.side || pa.h != sa.h || pa.origin != sa.origin {
                return Err(Error::InvalidArgument("grids do not share a lattice".into()));
            }
            let map: Option<Vec<usize>> = (0..sa.len())
                .map(|l| {
                    let (i, j) = sa.cell(l);
                    pa.node_at(i as isize, j as isize)
                })
                .collect();
            axis_maps.push(map.ok_or_else(|| Error::InvalidDomain("grid is not a subgrid".into()))?);
        }
        Ok((0..sub.len())
            .map(|k| {
                let locals: Vec<usize> = (0..sub.dim()).map(|a| axis_maps[a][sub.local(k, a)]).collect();
                self.index_of(&locals)
            })
            .collect())
    }
}

/// Build the grid of a domain with the given lattice side per axis.
pub fn build_grid(domain: &DomainSpec, nodes_per_axis: &[usize]) -> Result<Arc<Grid>> {
    domain.validate()?;
    if nodes_per_axis.len() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: nodes_per_axis.len() });
    }
    if let Some(&bad) = nodes_per_axis.iter().find(|&&n| n < MIN_NODES_PER_AXIS) {
        return Err(Error::ResolutionTooLow { got: bad, min: MIN_NODES_PER_AXIS });
    }
    let axes: Vec<AxisGrid> = domain
        .factors()
        .into_iter()
        .zip(nodes_per_axis)
        .map(|(f, &n)| AxisGrid::new(f, n))
        .collect();
    Ok(Arc::new(Grid::from_axes(domain.clone(), axes)?))
}

/// Build a grid with the same lattice side on every axis.
pub fn build_uniform_grid(domain: &DomainSpec, nodes: usize) -> Result<Arc<Grid>> {
    build_grid(domain, &vec![nodes; domain.dim()])
}

/// Complex values at the nodes of a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<C64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ScalarField { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    /// Sample a function at every node; non-finite values are an error.
    pub fn sample(grid: &Arc<Grid>, f: impl Fn(&[C64]) -> C64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        let mut z = vec![C64::new(0.0, 0.0); grid.dim()];
        for k in 0..grid.len() {
            grid.coords_into(k, &mut z);
            let v = f(&z);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite { node: k });
            }
            values.push(v);
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    /// Like [`ScalarField::sample`] for fallible functions.
    pub fn try_sample(grid: &Arc<Grid>, f: impl Fn(&[C64]) -> Result<C64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        let mut z = vec![C64::new(0.0, 0.0); grid.dim()];
        for k in 0..grid.len() {
            grid.coords_into(k, &mut z);
            let v = f(&z)?;
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite { node: k });
            }
            values.push(v);
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid.len() != other.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), got: other.grid.len() });
        }
        Ok(())
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }

    /// Quadrature of the field over the domain.
    pub fn integrate(&self) -> C64 {
        self.values.iter().enumerate().map(|(k, v)| v * self.grid.weight(k)).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest modulus over nodes where `keep(node)` holds, with its node.
    pub fn sup_norm_where(&self, keep: impl Fn(usize) -> bool) -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for (k, v) in self.values.iter().enumerate() {
            if keep(k) && (best.1.is_none() || v.norm() > best.0) {
                best = (v.norm(), Some(k));
            }
        }
        best
    }

    /// Values at the nodes of a subgrid sharing this field's lattice.
    pub fn restrict(&self, sub: &Arc<Grid>) -> Result<ScalarField> {
        let map = self.grid.embedding_of(sub)?;
        Ok(ScalarField { grid: sub.clone(), values: map.iter().map(|&k| self.values[k]).collect() })
    }
}

/// Strictly increasing multi-indices of length `k` drawn from `0..n`.
pub fn increasing_multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn is_increasing(idx: &[usize], n: usize) -> bool {
    idx.windows(2).all(|w| w[0] < w[1]) && idx.iter().all(|&i| i < n)
}

/// Differential (p,q)-form: coefficients of `dz^I ∧ dzbar^J` for increasing
/// 0-based multi-indices `I`, `J`. Missing coefficients are zero.
#[derive(Debug, Clone)]
pub struct FormField {
    pub grid: Arc<Grid>,
    pub p: usize,
    pub q: usize,
    coeffs: BTreeMap<(Vec<usize>, Vec<usize>), ScalarField>,
}

impl FormField {
    pub fn new(grid: &Arc<Grid>, p: usize, q: usize) -> Result<Self> {
        let n = grid.dim();
        if p > n || q > n {
            return Err(Error::InvalidArgument(format!("degree ({p},{q}) exceeds dimension {n}")));
        }
        Ok(FormField { grid: grid.clone(), p, q, coeffs: BTreeMap::new() })
    }

    /// (0,1)-form `sum_j f_j dzbar_j`.
    pub fn from_01_coefficients(grid: &Arc<Grid>, coeffs: Vec<ScalarField>) -> Result<Self> {
        if coeffs.len() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: coeffs.len() });
        }
        let mut form = FormField::new(grid, 0, 1)?;
        for (j, c) in coeffs.into_iter().enumerate() {
            form.set(vec![], vec![j], c)?;
        }
        Ok(form)
    }

    pub fn set(&mut self, i: Vec<usize>, j: Vec<usize>, field: ScalarField) -> Result<()> {
        let n = self.grid.dim();
        if i.len() != self.p || j.len() != self.q || !is_increasing(&i, n) || !is_increasing(&j, n) {
            return Err(Error::InvalidArgument(format!(
                "multi-indices {i:?}, {j:?} are not increasing of degree ({}, {})",
                self.p, self.q
            )));
        }
        if field.values.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), got: field.values.len() });
        }
        self.coeffs.insert((i, j), field);
        Ok(())
    }

    pub fn get(&self, i: &[usize], j: &[usize]) -> Option<&ScalarField> {
        self.coeffs.get(&(i.to_vec(), j.to_vec()))
    }

    /// Coefficient of `dzbar_j` of a (0,1)-form, zero if absent.
    pub fn component_01(&self, j: usize) -> ScalarField {
        self.get(&[], &[j]).cloned().unwrap_or_else(|| ScalarField::zeros(&self.grid))
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&(Vec<usize>, Vec<usize>), &ScalarField)> {
        self.coeffs.iter()
    }

    /// Pointwise squared Euclidean norm of the coefficient vector.
    pub fn pointwise_norm_sq(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for f in self.coeffs.values() {
            for (o, v) in out.iter_mut().zip(&f.values) {
                *o += v.norm_sqr();
            }
        }
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.pointwise_norm_sq().iter().map(|v| v.sqrt()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn disc_rect_area_matches_known_values() {
        // Whole disc.
        assert!((disc_rect_area(1.0, -2.0, 2.0, -2.0, 2.0) - PI).abs() < 1e-14);
        // Quarter disc.
        assert!((disc_rect_area(1.0, 0.0, 1.0, 0.0, 1.0) - PI / 4.0).abs() < 1e-14);
        // Half disc.
        assert!((disc_rect_area(2.0, -3.0, 3.0, 0.0, 3.0) - 2.0 * PI).abs() < 1e-13);
        // Inside square.
        assert!((disc_rect_area(1.0, -0.1, 0.2, 0.0, 0.3) - 0.09).abs() < 1e-15);
        assert_eq!(disc_rect_area(1.0, 2.0, 3.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn disc_rect_area_against_monte_carlo_free_refinement() {
        // Compare with a fine midpoint count over the rectangle.
        let (r, a, b, cc, d) = (1.0, 0.55, 0.9, -0.3, 0.62);
        let m = 2000;
        let mut inside = 0usize;
        for i in 0..m {
            for j in 0..m {
                let x = a + (i as f64 + 0.5) * (b - a) / m as f64;
                let y = cc + (j as f64 + 0.5) * (d - cc) / m as f64;
                if x * x + y * y < r * r {
                    inside += 1;
                }
            }
        }
        let approx = inside as f64 / (m * m) as f64 * (b - a) * (d - cc);
        assert!((disc_rect_area(r, a, b, cc, d) - approx).abs() < 1e-4);
    }

    #[test]
    fn unit_disc_grid_weights_sum_to_pi() {
        let g = build_uniform_grid(&DomainSpec::disc(c(0.0, 0.0), 1.0), 64).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - PI).abs() < 1e-12, "{total}");
        for k in 0..g.len() {
            assert!(g.boundary_distance(k) > 0.0);
        }
    }

    #[test]
    fn quadrature_of_modulus_squared_converges_quadratically() {
        let mut errs = Vec::new();
        for n in [16usize, 32, 64, 128] {
            let g = build_uniform_grid(&DomainSpec::disc(c(0.3, -0.2), 1.0), n).unwrap();
            let f = ScalarField::sample(&g, |z| c((z[0] - c(0.3, -0.2)).norm_sqr(), 0.0)).unwrap();
            errs.push((f.integrate().re - PI / 2.0).abs());
        }
        for w in errs.windows(2) {
            assert!(w[1] < w[0] / 3.0, "{errs:?}");
        }
    }

    #[test]
    fn annulus_area_and_shape() {
        let d = DomainSpec::annulus(c(0.0, 0.0), 0.5, 1.0);
        let g = build_uniform_grid(&d, 48).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 0.75 * PI).abs() < 1e-12, "{total}");
        assert!(DomainSpec::annulus(c(0.0, 0.0), 1.0, 1.0).validate().is_err());
    }

    #[test]
    fn polydisc_grid_is_product() {
        let d = DomainSpec::unit_polydisc(2);
        let g = build_uniform_grid(&d, 16).unwrap();
        assert_eq!(g.len(), g.axis(0).len() * g.axis(1).len());
        let total: f64 = g.weights().iter().sum();
        assert!((total - PI * PI).abs() < 1e-11);
        let k = g.index_of(&[3, 5]);
        assert_eq!(g.locals(k), vec![3, 5]);
        assert_eq!(g.coords(k), vec![g.axis(0).coords()[3], g.axis(1).coords()[5]]);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(matches!(
            build_uniform_grid(&DomainSpec::disc(c(0.0, 0.0), -1.0), 16),
            Err(Error::InvalidDomain(_))
        ));
        assert!(matches!(
            build_grid(&DomainSpec::unit_polydisc(2), &[16]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            build_uniform_grid(&DomainSpec::unit_polydisc(1), 4),
            Err(Error::ResolutionTooLow { .. })
        ));
    }

    #[test]
    fn boundary_distance_of_polydisc() {
        let d = DomainSpec::polydisc(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![1.0, 0.5]);
        let dist = d.boundary_distance(&[c(0.5, 0.0), c(1.1, 0.0)]).unwrap();
        assert!((dist - 0.4).abs() < 1e-15);
        assert!(d.boundary_distance(&[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn domain_json_round_trip() {
        let d = DomainSpec::product(&[(c(0.0, 0.0), 0.9), (c(0.1, 0.2), 0.5)]);
        let js = serde_json::to_string(&d).unwrap();
        assert!(js.contains("\"kind\":\"product\""));
        let back: DomainSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, d);
        let disc: DomainSpec =
            serde_json::from_str(r#"{"kind":"disc","params":{"center":[0,0],"radius":1}}"#).unwrap();
        assert_eq!(disc, DomainSpec::disc(c(0.0, 0.0), 1.0));
    }

    #[test]
    fn subgrid_shares_lattice() {
        let d = DomainSpec::disc(c(0.0, 0.0), 1.0);
        let g = build_uniform_grid(&d, 32).unwrap();
        let sub = g.subgrid(&d.scaled(0.5).unwrap()).unwrap();
        let map = g.embedding_of(&sub).unwrap();
        for (k, &pk) in map.iter().enumerate() {
            assert_eq!(sub.coords(k), g.coords(pk));
        }
        assert!(g.subgrid(&d.scaled(1.5).unwrap()).is_err());
    }

    #[test]
    fn stencils_fall_back_near_the_edge() {
        let g = build_uniform_grid(&DomainSpec::disc(c(0.0, 0.0), 1.0), 16).unwrap();
        let ax = g.axis(0);
        let mut kinds = std::collections::HashSet::new();
        for l in 0..ax.len() {
            kinds.insert(std::mem::discriminant(&ax.stencil_x(l)));
        }
        assert!(kinds.len() >= 3);
    }

    #[test]
    fn multi_indices_enumeration() {
        assert_eq!(increasing_multi_indices(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(increasing_multi_indices(2, 0), vec![Vec::<usize>::new()]);
    }
}
