//! JSON run configuration.
//!
//! Every key is optional. Unknown keys are rejected so that typos surface as
//! schema errors with a JSON-pointer location instead of being ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use scvlab_core::grid::DomainSpec;
use scvlab_core::hormander::HolomorphicPolynomial;
use scvlab_core::operators::OperatorSpec;

use crate::ConfigError;

/// Top-level config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Domain for the one-domain suites (psh, hull, hormander).
    pub domain: Option<DomainSpec>,
    /// Weight expression for psh and hormander.
    pub weight: Option<String>,
    /// Convex non-decreasing outer function for the psh composition check.
    pub psi: Option<String>,
    /// Nodes per axis of the one-variable grids.
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
    /// Output directory.
    pub output: Option<PathBuf>,
    /// Per-check tolerance overrides, keyed by certificate name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub suites: Suites,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suites {
    #[serde(rename = "solve-dbar", default)]
    pub solve_dbar: SolveDbarSuite,
    #[serde(default)]
    pub cauchy: CauchySuite,
    #[serde(default)]
    pub psh: PshSuite,
    #[serde(default)]
    pub hull: HullSuite,
    #[serde(default)]
    pub operator: OperatorSuite,
    #[serde(default)]
    pub hormander: HormanderSuite,
    #[serde(default)]
    pub ot: OtSuite,
    #[serde(default)]
    pub lp: LpSuite,
    #[serde(default)]
    pub weights: WeightsSuite,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveDbarSuite {
    pub domain_1d: DomainSpec,
    /// Finest one-variable resolution; the study also runs at 1/4 and 1/2 of it.
    pub resolution: Option<usize>,
    pub domain_2d: DomainSpec,
    /// Finest two-variable resolution; the study also runs at 1/2 and 2/3 of it.
    pub resolution_2d: usize,
    /// Radius of the certified polydisc as a fraction of the domain radii.
    pub shrink: f64,
}

impl Default for SolveDbarSuite {
    fn default() -> Self {
        SolveDbarSuite {
            domain_1d: DomainSpec::disc(0.0.into(), 1.0),
            resolution: None,
            domain_2d: DomainSpec::unit_polydisc(2),
            resolution_2d: 48,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CauchySuite {
    /// Boundary nodes per circle.
    pub nodes: usize,
    pub max_order: usize,
    /// Radius of the circle for the geometric series `1/(1-z)`.
    pub series_radius: f64,
    /// Radius of the circle for the Cauchy inequality of `e^z`.
    pub exp_radius: f64,
}

impl Default for CauchySuite {
    fn default() -> Self {
        CauchySuite { nodes: 256, max_order: 20, series_radius: 0.5, exp_radius: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PshSuite {
    /// Probe lattice nodes per axis.
    pub probes_per_axis: usize,
    pub radii: Vec<f64>,
    pub circle_nodes: usize,
    /// Grid resolution of the mollification checks.
    pub resolution: Option<usize>,
    /// Radii of the mollifiers compared.
    pub deltas: [f64; 2],
}

impl Default for PshSuite {
    fn default() -> Self {
        PshSuite { probes_per_axis: 12, radii: vec![0.05, 0.1, 0.2], circle_nodes: 256, resolution: None, deltas: [0.1, 0.15] }
    }
}

/// Sampled compact set.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompactConfig {
    Circle { center: [f64; 2], radius: f64, nodes: usize },
    Torus { centers: Vec<[f64; 2]>, radii: Vec<f64>, nodes: usize },
    Points { points: Vec<Vec<[f64; 2]>> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HullSuite {
    pub compact: CompactConfig,
    pub degree: usize,
    pub random_polynomials: usize,
    pub resolution: Option<usize>,
}

impl Default for HullSuite {
    fn default() -> Self {
        HullSuite {
            compact: CompactConfig::Circle { center: [0.0, 0.0], radius: 0.5, nodes: 256 },
            degree: 8,
            random_polynomials: 200,
            resolution: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorSuite {
    pub instances: usize,
    pub max_dim: usize,
    pub samples: usize,
    /// Explicit models checked in addition to the random instances.
    pub models: Vec<OperatorSpec>,
}

impl Default for OperatorSuite {
    fn default() -> Self {
        OperatorSuite { instances: 100, max_dim: 8, samples: 1000, models: Vec::new() }
    }
}

/// A form coefficient: a real expression or a `[re, im]` pair of expressions.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ComplexExpr {
    Real(String),
    Pair([String; 2]),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HormanderSuite {
    /// Coefficients of the (0,1)-form, one per variable.
    pub form: Vec<ComplexExpr>,
    pub degrees: Vec<usize>,
    pub shrink: f64,
    pub resolution: Option<usize>,
}

impl Default for HormanderSuite {
    fn default() -> Self {
        HormanderSuite { form: vec![ComplexExpr::Real("1".into())], degrees: vec![4, 8, 10, 12], shrink: 0.8, resolution: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OtSuite {
    /// Product of discs; the last factor is centred at 0.
    pub domain: DomainSpec,
    pub weight: String,
    /// Data on the slice `z_n = 0`, a polynomial in the first `n - 1` variables.
    pub f: HolomorphicPolynomial,
    /// Extension to the whole domain; defaults to `f` constant in `z_n`.
    pub extension: Option<HolomorphicPolynomial>,
    pub resolution: usize,
    /// Cutoff profile bridge `[lo, hi]` of the quintic smoothstep.
    pub cutoff: [f64; 2],
    /// Scales `s` of the rescaling check of the cutoff constant.
    pub scales: Vec<f64>,
}

impl Default for OtSuite {
    fn default() -> Self {
        OtSuite {
            domain: DomainSpec::product(&[(0.0.into(), 0.9), (0.0.into(), 0.5)]),
            weight: "x1^2 + y1^2 + x2^2 + y2^2".into(),
            f: HolomorphicPolynomial::constant(1.0.into()),
            extension: None,
            resolution: 48,
            cutoff: [0.5, 1.0],
            scales: vec![0.1, 0.01, 0.001],
        }
    }
}

/// Whether a breakdown case is expected to satisfy the necessary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Holds,
    Fails,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakdownCase {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub expect: Expectation,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpennessCase {
    pub p: f64,
    pub k: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpSuite {
    pub p: f64,
    pub c0: f64,
    /// Starting value `A_0` as a multiple of `C_0`.
    pub a0_ratio: f64,
    pub steps: usize,
    pub deltas: Vec<f64>,
    pub breakdown: Vec<BreakdownCase>,
    pub openness: Vec<OpennessCase>,
    pub truncation_levels: usize,
}

impl Default for LpSuite {
    fn default() -> Self {
        let case = |p, k, alpha| OpennessCase { p, k, alpha };
        LpSuite {
            p: 1.0,
            c0: 1.0,
            a0_ratio: 10.0,
            steps: 25,
            deltas: vec![0.5, 0.1, 0.01],
            breakdown: vec![
                BreakdownCase { n: 1, p: 2.0, q: 2.0, expect: Expectation::Holds },
                BreakdownCase { n: 1, p: 3.0, q: 3.0, expect: Expectation::Fails },
            ],
            openness: vec![case(2.0, 1, 1.0), case(2.0, 0, 1.0), case(1.0, 0, 0.5), case(2.0, 0, 1.5), case(1.0, 2, 1.5)],
            truncation_levels: 20,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSuite {
    pub s: Vec<f64>,
    /// Sample points in the admissible disc; a tenth as many are added in `|z| <= s`.
    pub points: usize,
    pub fd_step: f64,
    /// Points of the log-spaced sweep of the 1/6 bound.
    pub sixth_samples: usize,
}

impl Default for WeightsSuite {
    fn default() -> Self {
        WeightsSuite { s: vec![0.1, 0.01, 0.001], points: 10_000, fd_step: 1e-3, sixth_samples: 10_000 }
    }
}

/// Parse a config from JSON text, reporting the JSON pointer of a schema error.
pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            ConfigError::Json(inner.to_string())
        } else {
            ConfigError::Schema { pointer: json_pointer(&path), message: inner.to_string() }
        }
    })
}

pub fn load_config(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text)
}

/// Convert serde_path_to_error's `a.b[0].c` path into `/a/b/0/c`.
fn json_pointer(path: &str) -> String {
    if path == "." {
        return String::new();
    }
    let mut out = String::new();
    for seg in path.split('.') {
        let mut rest = seg;
        while !rest.is_empty() {
            let (head, tail) = match rest.find('[') {
                Some(0) => {
                    let close = rest.find(']').unwrap_or(rest.len() - 1);
                    (&rest[1..close], &rest[close + 1..])
                }
                Some(i) => (&rest[..i], &rest[i..]),
                None => (rest, ""),
            };
            out.push('/');
            out.push_str(&head.replace('~', "~0").replace('/', "~1"));
            rest = tail;
        }
    }
    out
}
