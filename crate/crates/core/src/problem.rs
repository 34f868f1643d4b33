//! Problem files: JSON documents describing a radial or unit-interval
//! problem together with the certification and solver inputs.
//!
//! Scalars may be JSON numbers or constant expressions such as `"1/3"`.
//! Schema errors carry the JSON pointer of the offending value.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{
    Condition, LadderSlot, NonexistenceComponent, NonexistenceHypothesis, NonexistenceMode,
    RadiiLadder, Scheme, OVERRIDE_NAMES,
};
use crate::expr::{parse, Env, Expr, Profile};
use crate::kernel::{ConeWindow, DirichletGamma, Kernel, KernelParams1, KernelParams2};
use crate::quad::{Direction, FunctionalBound, PointMass, QuadratureConfig};
use crate::radial::{
    self, Component, MultiPointData, RadialBc, RadialProblem, UnitProblem, Weight,
};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("admissibility error: {0}")]
    Admissibility(String),
}

impl ProblemError {
    fn at(pointer: &str, message: impl fmt::Display) -> Self {
        ProblemError::Schema {
            pointer: pointer.to_string(),
            message: message.to_string(),
        }
    }
}

/// Real number given as a JSON number or a constant expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Scalar(pub f64);

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let value = match Raw::deserialize(d)
            .map_err(|_| de::Error::custom("expected a number or an expression string"))?
        {
            Raw::Num(x) => x,
            Raw::Text(s) => {
                let e = parse(&s).map_err(de::Error::custom)?;
                if !e.is_constant() {
                    return Err(de::Error::custom(format!(
                        "`{s}` is not a constant expression"
                    )));
                }
                e.eval(&Env::default()).map_err(de::Error::custom)?
            }
        };
        if !value.is_finite() {
            return Err(de::Error::custom("value is not finite"));
        }
        Ok(Scalar(value))
    }
}

/// Expression source text, parsed on load.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprText {
    pub text: String,
    pub expr: Expr,
}

impl<'de> Deserialize<'de> for ExprText {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let expr = parse(&text).map_err(de::Error::custom)?;
        Ok(ExprText { text, expr })
    }
}

impl Serialize for ExprText {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    #[default]
    Multipoint,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    pub n: u32,
    #[serde(rename = "R1")]
    pub r1: Scalar,
    #[serde(default)]
    pub bc: BcKind,
    #[serde(rename = "R_eta", default)]
    pub r_eta: Option<Scalar>,
    #[serde(rename = "R_xi", default)]
    pub r_xi: Option<Scalar>,
    #[serde(default)]
    pub delta1: Option<Scalar>,
    #[serde(default)]
    pub beta1: Option<Scalar>,
    #[serde(default)]
    pub gamma: Option<[DirichletGamma; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Multipoint1 {
        beta1: Scalar,
        eta: Scalar,
    },
    Multipoint2 {
        beta2: Scalar,
        xi: Scalar,
    },
    Dirichlet {
        #[serde(default)]
        gamma: DirichletGamma,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSection {
    pub kernels: [KernelSpec; 2],
    /// Weights as expressions in `t`; `1` when absent.
    #[serde(default)]
    pub g: Option<[ExprText; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassSpec {
    pub profile: Profile,
    pub node: Scalar,
    pub coeff: Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    #[serde(rename = "A", default = "zero")]
    pub a: Scalar,
    #[serde(default)]
    pub masses: Vec<MassSpec>,
    pub direction: Direction,
}

fn zero() -> Scalar {
    Scalar(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSpec {
    pub label: String,
    pub radii: [Scalar; 2],
    pub condition: Condition,
    #[serde(default)]
    pub which: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    pub scheme: Scheme,
    pub slots: Vec<SlotSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonexistenceComponentSpec {
    #[serde(rename = "A")]
    pub a: Scalar,
    pub lambda: Scalar,
    pub mode: NonexistenceMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonexistenceSpec {
    #[serde(rename = "Z")]
    pub z: Scalar,
    pub components: [NonexistenceComponentSpec; 2],
}

/// Which components an (I⁰)° slot without `which` must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircMode {
    #[default]
    Any,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Use `sup max{∫k⁺g, ∫k⁻g}` in place of `sup ∫|k|g` for (I¹).
    pub split_kernel: bool,
    pub i0circ: CircMode,
}

/// Raw problem document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub space: Option<SpaceSection>,
    #[serde(default)]
    pub unit: Option<UnitSection>,
    pub f: [ExprText; 2],
    #[serde(default)]
    pub h: Option<[ExprText; 2]>,
    #[serde(default)]
    pub decay_mu: Option<[Scalar; 2]>,
    #[serde(rename = "H_exact", default)]
    pub h_exact: Option<[ExprText; 2]>,
    pub cones: [[Scalar; 2]; 2],
    #[serde(default)]
    pub ladder: Option<LadderSpec>,
    #[serde(default)]
    pub bounds: BTreeMap<String, [BoundSpec; 2]>,
    #[serde(default)]
    pub overrides: BTreeMap<String, Scalar>,
    /// Published values logged next to the oracle without being used.
    #[serde(default)]
    pub reference: BTreeMap<String, Scalar>,
    #[serde(default)]
    pub nonexistence: Option<NonexistenceSpec>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub options: Options,
}

/// Geometry needed to map unit-interval profiles back to radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Geometry {
    pub n: u32,
    pub r1: f64,
}

/// Validated problem ready for computation.
#[derive(Debug, Clone)]
pub struct Problem {
    pub file: ProblemFile,
    pub unit: UnitProblem,
    pub geometry: Option<Geometry>,
    pub multipoint: Option<MultiPointData>,
    pub h_exact: Option<[Expr; 2]>,
    pub ladder: Option<RadiiLadder>,
    pub bounds: BTreeMap<String, [FunctionalBound; 2]>,
    pub overrides: BTreeMap<String, f64>,
    pub reference: BTreeMap<String, f64>,
    pub nonexistence: Option<NonexistenceHypothesis>,
}

/// Names accepted in a reference block.
pub const REFERENCE_NAMES: [&str; 8] = [
    "one_over_m1",
    "one_over_m2",
    "one_over_M1",
    "one_over_M2",
    "c1",
    "c2",
    "one_over_m1_split",
    "one_over_m2_split",
];

/// JSON pointer of a serde path.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

pub fn parse_file(text: &str) -> Result<ProblemFile, ProblemError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let file: ProblemFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let p = pointer(e.path());
        ProblemError::at(&p, e.into_inner())
    })?;
    de.end().map_err(|e| ProblemError::at("/", e))?;
    Ok(file)
}

fn window(pair: [Scalar; 2], i: usize) -> Result<ConeWindow, ProblemError> {
    let [a, b] = pair.map(|s| s.0);
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(ProblemError::at(
            &format!("/cones/{i}"),
            format!("window [{a}, {b}] must satisfy 0 <= a < b <= 1"),
        ));
    }
    Ok(ConeWindow::new(a, b))
}

fn require(value: Option<Scalar>, pointer: &str) -> Result<f64, ProblemError> {
    value
        .map(|s| s.0)
        .ok_or_else(|| ProblemError::at(pointer, "required for multi-point boundary conditions"))
}

fn weight_of(g: &ExprText) -> Weight {
    if g.expr.is_constant() {
        if let Ok(c) = g.expr.eval(&Env::default()) {
            return Weight::Constant(c);
        }
    }
    Weight::Unit(g.expr.clone())
}

fn admissibility(e: impl fmt::Display) -> ProblemError {
    ProblemError::Admissibility(e.to_string())
}

impl Problem {
    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        Self::from_file(parse_file(text)?)
    }

    pub fn from_file(file: ProblemFile) -> Result<Self, ProblemError> {
        let windows = [window(file.cones[0], 0)?, window(file.cones[1], 1)?];
        let f = [file.f[0].expr.clone(), file.f[1].expr.clone()];
        let (unit, geometry, multipoint) = match (&file.space, &file.unit) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(ProblemError::at(
                    "/",
                    "exactly one of `space` and `unit` must be present",
                ));
            }
            (Some(sp), None) => {
                let h = file.h.as_ref().ok_or_else(|| {
                    ProblemError::at("/h", "radial weights are required with `space`")
                })?;
                let bc = match sp.bc {
                    BcKind::Multipoint => RadialBc::MultiPoint {
                        r_eta: require(sp.r_eta, "/space/R_eta")?,
                        r_xi: require(sp.r_xi, "/space/R_xi")?,
                        delta1: require(sp.delta1, "/space/delta1")?,
                        beta1: require(sp.beta1, "/space/beta1")?,
                    },
                    BcKind::Dirichlet => RadialBc::Dirichlet {
                        gamma: sp.gamma.unwrap_or_default(),
                    },
                };
                let rp = RadialProblem {
                    n: sp.n,
                    r1: sp.r1.0,
                    bc: bc.clone(),
                    h: [h[0].expr.clone(), h[1].expr.clone()],
                    f,
                    decay_mu: file.decay_mu.map(|m| m.map(|s| s.0)),
                    windows,
                };
                let up = radial::make_unit_problem(&rp).map_err(admissibility)?;
                let mp = match bc {
                    RadialBc::MultiPoint {
                        r_eta,
                        r_xi,
                        delta1,
                        beta1,
                    } => Some(
                        radial::multipoint_data(sp.n, sp.r1.0, r_eta, r_xi, delta1, beta1)
                            .map_err(admissibility)?,
                    ),
                    RadialBc::Dirichlet { .. } => None,
                };
                (
                    up,
                    Some(Geometry {
                        n: sp.n,
                        r1: sp.r1.0,
                    }),
                    mp,
                )
            }
            (None, Some(us)) => {
                if file.h.is_some() {
                    return Err(ProblemError::at(
                        "/h",
                        "radial weights only apply with `space`",
                    ));
                }
                let mut kernels = Vec::new();
                for k in &us.kernels {
                    let kernel = match k {
                        KernelSpec::Multipoint1 { beta1, eta } => Kernel::MultiPoint1(
                            KernelParams1::new(beta1.0, eta.0).map_err(admissibility)?,
                        ),
                        KernelSpec::Multipoint2 { beta2, xi } => Kernel::MultiPoint2(
                            KernelParams2::new(beta2.0, xi.0).map_err(admissibility)?,
                        ),
                        KernelSpec::Dirichlet { gamma } => Kernel::Dirichlet(*gamma),
                    };
                    kernels.push(kernel);
                }
                let weights = match &us.g {
                    Some(g) => [weight_of(&g[0]), weight_of(&g[1])],
                    None => [Weight::Constant(1.0), Weight::Constant(1.0)],
                };
                let comp = |i: usize| Component {
                    kernel: kernels[i],
                    weight: weights[i].clone(),
                    f: f[i].clone(),
                    window: windows[i],
                };
                (
                    UnitProblem {
                        components: [comp(0), comp(1)],
                    },
                    None,
                    None,
                )
            }
        };
        unit.validate(&file.quadrature).map_err(admissibility)?;
        file.solver
            .validate()
            .map_err(|e| ProblemError::at("/solver", e))?;
        if file.quadrature.order == 0
            || file.quadrature.panels == 0
            || file.quadrature.t_scan < 2
            || file.quadrature.scan_resolution < 2
        {
            return Err(ProblemError::at(
                "/quadrature",
                "order and panels must be positive, scan grids at least 2",
            ));
        }

        let mut bounds = BTreeMap::new();
        for (label, pair) in &file.bounds {
            let mut out = Vec::new();
            for (i, b) in pair.iter().enumerate() {
                let fb = FunctionalBound {
                    offset: b.a.0,
                    masses: b
                        .masses
                        .iter()
                        .map(|m| PointMass {
                            profile: m.profile,
                            node: m.node.0,
                            coeff: m.coeff.0,
                        })
                        .collect(),
                    direction: b.direction,
                };
                fb.validate()
                    .map_err(|e| ProblemError::at(&format!("/bounds/{label}/{i}"), e))?;
                out.push(fb);
            }
            bounds.insert(label.clone(), [out[0].clone(), out[1].clone()]);
        }

        let ladder = file.ladder.as_ref().map(|l| RadiiLadder {
            scheme: l.scheme,
            slots: l
                .slots
                .iter()
                .map(|s| LadderSlot {
                    label: s.label.clone(),
                    radii: s.radii.map(|r| r.0),
                    condition: s.condition,
                    which: s.which,
                })
                .collect(),
        });
        if let Some(l) = &ladder {
            for (k, slot) in l.slots.iter().enumerate() {
                if slot.which.is_some() && slot.condition != Condition::I0Circ {
                    return Err(ProblemError::at(
                        &format!("/ladder/slots/{k}/which"),
                        "`which` only applies to I0circ slots",
                    ));
                }
                if slot.which.is_some_and(|w| w != 1 && w != 2) {
                    return Err(ProblemError::at(
                        &format!("/ladder/slots/{k}/which"),
                        "must be 1 or 2",
                    ));
                }
            }
            for label in bounds.keys() {
                if !l.slots.iter().any(|s| &s.label == label) {
                    return Err(ProblemError::at(
                        &format!("/bounds/{label}"),
                        "no ladder slot carries this label",
                    ));
                }
            }
        }

        let named = |map: &BTreeMap<String, Scalar>, allowed: &[&str], section: &str| {
            map.iter()
                .map(|(k, v)| {
                    if allowed.contains(&k.as_str()) {
                        Ok((k.clone(), v.0))
                    } else {
                        Err(ProblemError::at(
                            &format!("/{section}/{k}"),
                            format!("unknown constant; expected one of {}", allowed.join(", ")),
                        ))
                    }
                })
                .collect::<Result<BTreeMap<_, _>, _>>()
        };
        let overrides = named(&file.overrides, &OVERRIDE_NAMES, "overrides")?;
        let reference = named(&file.reference, &REFERENCE_NAMES, "reference")?;
        for (k, v) in &overrides {
            if !(*v > 0.0) {
                return Err(ProblemError::at(
                    &format!("/overrides/{k}"),
                    "override must be positive",
                ));
            }
        }

        let nonexistence = file.nonexistence.as_ref().map(|n| NonexistenceHypothesis {
            z: n.z.0,
            components: n.components.clone().map(|c| NonexistenceComponent {
                a: c.a.0,
                lambda: c.lambda.0,
                mode: c.mode,
            }),
        });

        let h_exact = file
            .h_exact
            .as_ref()
            .map(|h| [h[0].expr.clone(), h[1].expr.clone()]);
        Ok(Problem {
            unit,
            geometry,
            multipoint,
            h_exact,
            ladder,
            bounds,
            overrides,
            reference,
            nonexistence,
            file,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "unit": {"kernels": [{"type": "multipoint1", "beta1": 2, "eta": "1/4"},
                             {"type": "multipoint2", "beta2": "1/3", "xi": "1/2"}]},
        "f": ["u", "v"],
        "cones": [["1/4", "1/2"], ["1/4", "1/2"]]
    }"#;

    #[test]
    fn minimal_unit_problem_loads() {
        let p = Problem::from_json(MINIMAL).unwrap();
        assert!(
            matches!(p.unit.components[1].kernel, Kernel::MultiPoint2(k) if (k.beta2 - 1.0 / 3.0).abs() < 1e-15)
        );
        assert!(p.geometry.is_none());
    }

    #[test]
    fn schema_errors_carry_pointers() {
        let bad = MINIMAL.replace("[\"1/4\", \"1/2\"]]", "[\"1/4\", \"1/\"]]");
        match Problem::from_json(&bad).unwrap_err() {
            ProblemError::Schema { pointer, .. } => assert_eq!(pointer, "/cones/1/1"),
            e => panic!("{e}"),
        }
        // Tagged kernels are buffered, so the pointer stops at the kernel.
        let bad = MINIMAL.replace("\"1/3\"", "\"1/\"");
        match Problem::from_json(&bad).unwrap_err() {
            ProblemError::Schema { pointer, .. } => assert_eq!(pointer, "/unit/kernels/1"),
            e => panic!("{e}"),
        }
        let bad = MINIMAL.replace("\"cones\"", "\"extra\": 1, \"cones\"");
        assert!(Problem::from_json(&bad)
            .unwrap_err()
            .to_string()
            .contains("extra"));
    }

    #[test]
    fn both_sections_are_rejected() {
        let both = MINIMAL.replacen('{', r#"{"space": {"n": 3, "R1": 1},"#, 1);
        assert!(matches!(
            Problem::from_json(&both),
            Err(ProblemError::Schema { .. })
        ));
    }

    #[test]
    fn inadmissible_parameters_are_reported() {
        let bad = MINIMAL.replace("\"beta1\": 2", "\"beta1\": 5");
        assert!(matches!(
            Problem::from_json(&bad),
            Err(ProblemError::Admissibility(_))
        ));
    }
}
