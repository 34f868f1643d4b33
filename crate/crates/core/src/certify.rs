//! Literal assembly of the index conditions (I¹), (I⁰) and (I⁰)°, the
//! multiplicity ladders S₁–S₆ and the three non-existence tests.
//!
//! Box extrema of `f` come from refined grid scans, so a pass is a
//! numerical certificate, not a proof.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Env, Expr, PointValues, Profile};
use crate::kernel::{ConeConstants, KernelError};
use crate::quad::{
    self, box_extremum, BoxExtremum, Extremum, FunctionalBound, KernelNorm, QuadError,
    QuadratureConfig, Range, Rect, ScanResult,
};
use crate::radial::UnitProblem;

/// Equality band of the strict inequalities.
pub const STRICT_TOL: f64 = 1e-12;

/// Points per axis of the nonnegativity audit of `f`.
const AUDIT_RESOLUTION: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("ladder ordering violated: {0}")]
    Ordering(String),
    #[error("invalid ladder: {0}")]
    Ladder(String),
    #[error("invalid hypothesis: {0}")]
    Hypothesis(String),
    #[error("unknown override `{0}`")]
    UnknownOverride(String),
    #[error("{context}: {source}")]
    Quad {
        context: String,
        #[source]
        source: QuadError,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

fn quad_err(context: impl Into<String>) -> impl FnOnce(QuadError) -> CertifyError {
    let context = context.into();
    move |source| CertifyError::Quad { context, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    I1,
    I0,
    #[serde(rename = "I0circ")]
    I0Circ,
}

impl Condition {
    pub fn id(self) -> &'static str {
        match self {
            Condition::I1 => "I1",
            Condition::I0 => "I0",
            Condition::I0Circ => "I0circ",
        }
    }

    /// Index-0 conditions require `lhs > 1`.
    pub fn is_index_zero(self) -> bool {
        !matches!(self, Condition::I1)
    }
}

/// Oracle constants of both components with the resolution that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleConstants {
    pub cones: [ConeConstants; 2],
    pub one_over_m: [ScanResult; 2],
    pub one_over_m_split: [ScanResult; 2],
    #[serde(rename = "one_over_M")]
    pub one_over_big_m: [ScanResult; 2],
}

impl OracleConstants {
    pub fn compute(up: &UnitProblem, cfg: &QuadratureConfig) -> Result<Self, CertifyError> {
        let mut cones = Vec::new();
        let mut abs = Vec::new();
        let mut split = Vec::new();
        let mut big = Vec::new();
        for (i, c) in up.components.iter().enumerate() {
            let ctx = |name: &str| format!("{name}{}", i + 1);
            cones.push(c.kernel.cone_constants(&c.window)?);
            abs.push(
                quad::one_over_m(&c.kernel, &c.weight, KernelNorm::Abs, cfg)
                    .map_err(quad_err(ctx("1/m")))?,
            );
            split.push(
                quad::one_over_m_split(&c.kernel, &c.weight, cfg)
                    .map_err(quad_err(ctx("1/m split ")))?,
            );
            big.push(
                quad::one_over_M(&c.kernel, &c.weight, &c.window, cfg)
                    .map_err(quad_err(ctx("1/M")))?,
            );
        }
        let pair = |v: Vec<ScanResult>| [v[0], v[1]];
        Ok(Self {
            cones: [cones[0], cones[1]],
            one_over_m: pair(abs),
            one_over_m_split: pair(split),
            one_over_big_m: pair(big),
        })
    }
}

/// Names accepted in an overrides block.
pub const OVERRIDE_NAMES: [&str; 6] = [
    "one_over_m1",
    "one_over_m2",
    "one_over_M1",
    "one_over_M2",
    "c1",
    "c2",
];

/// Scalar constants entering the conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    /// Used by (I¹): the split value when the refinement is enabled.
    pub one_over_m: [f64; 2],
    /// Used by the small-mode non-existence test.
    pub one_over_m_abs: [f64; 2],
    pub one_over_big_m: [f64; 2],
    pub c: [f64; 2],
    pub c_gamma: [f64; 2],
    pub norm_gamma: [f64; 2],
}

impl Constants {
    pub fn from_oracle(o: &OracleConstants, split_kernel: bool) -> Self {
        let pick = |f: &dyn Fn(usize) -> f64| [f(0), f(1)];
        Self {
            one_over_m: pick(&|i| {
                if split_kernel {
                    o.one_over_m_split[i].value
                } else {
                    o.one_over_m[i].value
                }
            }),
            one_over_m_abs: pick(&|i| o.one_over_m[i].value),
            one_over_big_m: pick(&|i| o.one_over_big_m[i].value),
            c: pick(&|i| o.cones[i].c),
            c_gamma: pick(&|i| o.cones[i].c_gamma),
            norm_gamma: pick(&|i| o.cones[i].norm_gamma),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "one_over_m1" => self.one_over_m[0],
            "one_over_m2" => self.one_over_m[1],
            "one_over_M1" => self.one_over_big_m[0],
            "one_over_M2" => self.one_over_big_m[1],
            "c1" => self.c[0],
            "c2" => self.c[1],
            _ => return None,
        })
    }

    pub fn with_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<Self, CertifyError> {
        let mut out = *self;
        for (name, &value) in overrides {
            let slot = match name.as_str() {
                "one_over_m1" => {
                    out.one_over_m_abs[0] = value;
                    &mut out.one_over_m[0]
                }
                "one_over_m2" => {
                    out.one_over_m_abs[1] = value;
                    &mut out.one_over_m[1]
                }
                "one_over_M1" => &mut out.one_over_big_m[0],
                "one_over_M2" => &mut out.one_over_big_m[1],
                "c1" => &mut out.c[0],
                "c2" => &mut out.c[1],
                _ => return Err(CertifyError::UnknownOverride(name.clone())),
            };
            *slot = value;
        }
        Ok(out)
    }
}

/// An overridden constant next to its oracle value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub name: String,
    pub oracle: f64,
    pub paper: f64,
    pub delta: f64,
}

impl Deviation {
    pub fn new(name: &str, oracle: f64, paper: f64) -> Self {
        Self {
            name: name.to_string(),
            oracle,
            paper,
            delta: paper - oracle,
        }
    }
}

/// Outcome of checking `H ≤ A + α[u] + α[v]` (or `≥`) on a condition box.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EnvelopeStatus {
    Verified {
        points: usize,
    },
    Violated {
        witness: Vec<(Profile, f64, f64)>,
        h: f64,
        envelope: f64,
    },
    /// No exact functional available; the envelope is trusted input.
    Declared,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub component: usize,
    pub radii: [f64; 2],
    /// `None` when the denominator `1 − α_ii[γ_i]` is not positive.
    pub lhs: Option<f64>,
    pub threshold: f64,
    pub margin: Option<f64>,
    pub pass: bool,
    pub at_tolerance: bool,
    pub reason: Option<String>,
    pub f_extremum: Option<BoxExtremum>,
    pub constants_used: BTreeMap<String, f64>,
    pub envelope: EnvelopeStatus,
    /// Same assembly with oracle constants, present when overrides apply.
    pub oracle_lhs: Option<f64>,
    pub oracle_pass: Option<bool>,
    pub deviations: Vec<Deviation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderSlot {
    pub label: String,
    pub radii: [f64; 2],
    pub condition: Condition,
    /// Component required by (I⁰)°; `None` defers to the certifier mode.
    pub which: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
}

impl Scheme {
    /// Solutions guaranteed when every slot passes.
    pub fn theorem_count(self) -> usize {
        match self {
            Scheme::S1 | Scheme::S2 => 1,
            Scheme::S3 | Scheme::S4 => 2,
            Scheme::S5 | Scheme::S6 => 3,
        }
    }

    /// Whether slot `k` carries an index-0 condition.
    fn index_zero_at(self, k: usize) -> bool {
        let starts_zero = matches!(self, Scheme::S1 | Scheme::S3 | Scheme::S5);
        k.is_multiple_of(2) == starts_zero
    }

    fn slots(self) -> usize {
        self.theorem_count() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiiLadder {
    pub scheme: Scheme,
    pub slots: Vec<LadderSlot>,
}

impl RadiiLadder {
    /// Shape and ordering of the ladder; `c` are the effective cone constants.
    pub fn validate(&self, c: [f64; 2]) -> Result<(), CertifyError> {
        if self.slots.len() != self.scheme.slots() {
            return Err(CertifyError::Ladder(format!(
                "{:?} needs {} slots, got {}",
                self.scheme,
                self.scheme.slots(),
                self.slots.len()
            )));
        }
        for (k, slot) in self.slots.iter().enumerate() {
            if slot.radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
                return Err(CertifyError::Ladder(format!(
                    "radii of `{}` must be positive",
                    slot.label
                )));
            }
            let zero = self.scheme.index_zero_at(k);
            if zero != slot.condition.is_index_zero() {
                return Err(CertifyError::Ladder(format!(
                    "slot `{}` of {:?} must carry an index-{} condition",
                    slot.label,
                    self.scheme,
                    if zero { 0 } else { 1 }
                )));
            }
            if slot.which.is_some_and(|w| w != 1 && w != 2) {
                return Err(CertifyError::Ladder(format!(
                    "`which` of `{}` must be 1 or 2",
                    slot.label
                )));
            }
        }
        for pair in self.slots.windows(2) {
            let (p, q) = (&pair[0], &pair[1]);
            for i in 0..2 {
                let n = i + 1;
                let (lower, text) = if p.condition.is_index_zero() {
                    (p.radii[i] / c[i], format!("{}{n}/c{n}", p.label))
                } else {
                    (p.radii[i], format!("{}{n}", p.label))
                };
                if !(lower < q.radii[i]) {
                    return Err(CertifyError::Ordering(format!(
                        "{text} = {lower} >= {}{n} = {}",
                        q.label, q.radii[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotReport {
    pub label: String,
    pub condition: Condition,
    pub radii: [f64; 2],
    pub which: Option<usize>,
    pub reports: Vec<ConditionReport>,
    pub pass: bool,
    pub oracle_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityVerdict {
    pub scheme: Scheme,
    pub theorem_count: usize,
    pub guaranteed_count: usize,
    /// Count the oracle constants alone would give, when overrides apply.
    pub oracle_guaranteed_count: Option<usize>,
    pub slots: Vec<SlotReport>,
}

fn count(scheme: Scheme, passes: &[bool]) -> usize {
    if passes.iter().all(|&p| p) {
        scheme.theorem_count()
    } else if passes.windows(2).any(|w| w[0] && w[1]) {
        1
    } else {
        0
    }
}

/// Values of point evaluations during an envelope scan.
struct Assignment<'a> {
    vars: &'a [(Profile, f64)],
    values: &'a [f64],
}

impl PointValues for Assignment<'_> {
    fn point_value(&self, profile: Profile, node: f64) -> f64 {
        self.vars
            .iter()
            .position(|&(p, x)| p == profile && (x - node).abs() < 1e-12)
            .map_or(f64::NAN, |k| self.values[k])
    }
}

/// Certification context: problem, constants and optional exact functionals.
pub struct Certifier<'a> {
    pub problem: &'a UnitProblem,
    pub cfg: QuadratureConfig,
    pub oracle: Constants,
    pub effective: Constants,
    pub overrides: BTreeMap<String, f64>,
    pub h_exact: Option<&'a [Expr; 2]>,
    /// (I⁰)° slots without `which` require both components instead of one.
    pub circ_both: bool,
    /// Recompute overridden conditions with oracle constants.
    pub shadow: bool,
}

impl<'a> Certifier<'a> {
    pub fn new(
        problem: &'a UnitProblem,
        oracle: &OracleConstants,
        split_kernel: bool,
        overrides: BTreeMap<String, f64>,
        h_exact: Option<&'a [Expr; 2]>,
        cfg: QuadratureConfig,
    ) -> Result<Self, CertifyError> {
        let base = Constants::from_oracle(oracle, split_kernel);
        let effective = base.with_overrides(&overrides)?;
        Ok(Self {
            problem,
            cfg,
            oracle: base,
            effective,
            overrides,
            h_exact,
            circ_both: false,
            shadow: true,
        })
    }

    fn has_overrides(&self) -> bool {
        !self.overrides.is_empty()
    }

    /// Range of `v` in boxes: cones of nonnegative functions start at 0.
    fn v_floor(&self, hi: f64) -> f64 {
        if self.problem.components[1].kernel.is_nonnegative() {
            0.0
        } else {
            -hi
        }
    }

    fn rect(&self, cond: Condition, i: usize, rho: [f64; 2], c: [f64; 2]) -> Rect {
        let (u1, v1) = (rho[0] / c[0], rho[1] / c[1]);
        match (cond, i) {
            (Condition::I1, _) => Rect::new([0.0, rho[0]], [self.v_floor(rho[1]), rho[1]]),
            (Condition::I0, 0) => Rect::new([rho[0], u1], [self.v_floor(v1), v1]),
            (Condition::I0, _) => Rect::new([0.0, u1], [rho[1], v1]),
            (Condition::I0Circ, 0) => Rect::new([0.0, u1], [self.v_floor(v1), v1]),
            (Condition::I0Circ, _) => Rect::new([0.0, u1], [0.0, v1]),
        }
    }

    /// Checks one condition for component `i` (0-based).
    pub fn check(
        &self,
        cond: Condition,
        i: usize,
        rho: [f64; 2],
        bound: &FunctionalBound,
    ) -> Result<ConditionReport, CertifyError> {
        let ctx = format!("{} component {}", cond.id(), i + 1);
        bound
            .validate()
            .map_err(|e| CertifyError::Hypothesis(format!("{ctx}: bound {e}")))?;
        let comp = &self.problem.components[i];
        let own = Profile::from_index(i);
        let other = Profile::from_index(1 - i);
        let alpha_gamma = bound.alpha(own, |t| comp.kernel.gamma(t));
        let masses: Vec<(f64, f64)> = bound.masses_on(own).map(|m| (m.node, m.coeff)).collect();
        let range = if cond == Condition::I1 {
            Range::Full
        } else {
            Range::Window(comp.window)
        };
        let moment = quad::script_k_integral(&comp.kernel, &comp.weight, &masses, range, &self.cfg)
            .map_err(quad_err(ctx.clone()))?;

        let mut report =
            self.assemble(cond, i, rho, bound, alpha_gamma, moment, &self.effective)?;
        let mut used = BTreeMap::new();
        used.insert(format!("alpha{0}{0}[gamma{0}]", i + 1), alpha_gamma);
        used.insert(format!("norm_gamma{}", i + 1), self.effective.norm_gamma[i]);
        used.insert(format!("A{}", i + 1), bound.offset);
        used.insert(format!("K{}", i + 1), moment);
        let names: Vec<String> = if cond == Condition::I1 {
            used.insert(
                format!("alpha{}{}[1]", i + 1, 2 - i),
                bound.alpha_one(other),
            );
            vec![format!("one_over_m{}", i + 1)]
        } else {
            used.insert(format!("c_gamma{}", i + 1), self.effective.c_gamma[i]);
            vec![format!("one_over_M{}", i + 1), "c1".into(), "c2".into()]
        };
        for name in &names {
            used.insert(
                name.clone(),
                self.effective.get(name).expect("known constant"),
            );
            if let Some(&value) = self.overrides.get(name) {
                report.deviations.push(Deviation::new(
                    name,
                    self.oracle.get(name).expect("known constant"),
                    value,
                ));
            }
        }
        report.constants_used = used;
        if !report.deviations.is_empty() && self.shadow {
            let shadow = self.assemble(cond, i, rho, bound, alpha_gamma, moment, &self.oracle)?;
            report.oracle_lhs = shadow.lhs;
            report.oracle_pass = Some(shadow.pass);
        }
        Ok(report)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        &self,
        cond: Condition,
        i: usize,
        rho: [f64; 2],
        bound: &FunctionalBound,
        alpha_gamma: f64,
        moment: f64,
        k: &Constants,
    ) -> Result<ConditionReport, CertifyError> {
        let comp = &self.problem.components[i];
        let rect = self.rect(cond, i, rho, k.c);
        let mut report = ConditionReport {
            condition: cond,
            component: i + 1,
            radii: rho,
            lhs: None,
            threshold: 1.0,
            margin: None,
            pass: false,
            at_tolerance: false,
            reason: None,
            f_extremum: None,
            constants_used: BTreeMap::new(),
            envelope: EnvelopeStatus::Declared,
            oracle_lhs: None,
            oracle_pass: None,
            deviations: Vec::new(),
        };
        let denom = 1.0 - alpha_gamma;
        if !(denom > 0.0) {
            report.reason = Some("denominator".into());
            return Ok(report);
        }
        let ctx = format!("{} component {} on box {:?}", cond.id(), i + 1, rect);
        let audit = box_extremum(
            |u, v| comp.f.eval(&Env::uv(u, v)),
            rect,
            Extremum::Min,
            AUDIT_RESOLUTION,
            0,
        )
        .map_err(quad_err(ctx.clone()))?;
        let kind = if cond == Condition::I1 {
            Extremum::Max
        } else {
            Extremum::Min
        };
        let ext = box_extremum(
            |u, v| comp.f.eval(&Env::uv(u, v)),
            rect,
            kind,
            self.cfg.scan_resolution,
            self.cfg.box_rounds,
        )
        .map_err(quad_err(ctx))?;
        let norm = k.norm_gamma[i];
        let lhs = if cond == Condition::I1 {
            let j = 1 - i;
            let cross = bound.alpha_one(Profile::from_index(j));
            ext.value / rho[i] * (norm / denom * moment + k.one_over_m[i])
                + norm * (bound.offset + rho[j] * cross) / (rho[i] * denom)
        } else {
            let cg = k.c_gamma[i] * norm;
            ext.value / rho[i] * (cg / denom * moment + k.one_over_big_m[i])
                + cg * bound.offset / (rho[i] * denom)
        };
        report.f_extremum = Some(ext);
        report.lhs = Some(lhs);
        let margin = if cond.is_index_zero() {
            lhs - 1.0
        } else {
            1.0 - lhs
        };
        report.margin = Some(margin);
        report.at_tolerance = margin.abs() <= STRICT_TOL;
        report.pass = margin > STRICT_TOL;
        if audit.value < 0.0 {
            report.pass = false;
            report.reason = Some(format!(
                "f{} is negative ({}) at (u, v) = ({}, {})",
                i + 1,
                audit.value,
                audit.at[0],
                audit.at[1]
            ));
        }
        if let Some(h) = self.h_exact {
            report.envelope = self.check_envelope(&h[i], bound, rect)?;
            if matches!(report.envelope, EnvelopeStatus::Violated { .. }) {
                report.pass = false;
                report.reason.get_or_insert_with(|| "envelope".into());
            }
        }
        if report.at_tolerance && report.reason.is_none() {
            report.reason = Some("at tolerance".into());
        }
        Ok(report)
    }

    /// Grid check of the affine envelope with every point value treated as
    /// an independent variable over the box range of its profile (`v`
    /// starting at 0).
    pub fn check_envelope(
        &self,
        h: &Expr,
        bound: &FunctionalBound,
        rect: Rect,
    ) -> Result<EnvelopeStatus, CertifyError> {
        let mut vars = h.point_nodes();
        for m in &bound.masses {
            if !vars
                .iter()
                .any(|&(p, x)| p == m.profile && (x - m.node).abs() < 1e-12)
            {
                vars.push((m.profile, m.node));
            }
        }
        let ranges: Vec<[f64; 2]> = vars
            .iter()
            .map(|(p, _)| match p {
                Profile::U => [rect.u[0].max(0.0), rect.u[1]],
                Profile::V => [rect.v[0].max(0.0), rect.v[1]],
            })
            .collect();
        let d = vars.len() as u32;
        let budget = (self.cfg.scan_resolution * self.cfg.scan_resolution).max(4) as f64;
        let per_axis = if d == 0 {
            1
        } else {
            (budget.powf(1.0 / d as f64).floor() as usize).max(2)
        };
        let total = per_axis.pow(d);
        let mut values = vec![0.0; vars.len()];
        for index in 0..total {
            let mut rest = index;
            for (k, r) in ranges.iter().enumerate() {
                let j = rest % per_axis;
                rest /= per_axis;
                values[k] = if per_axis == 1 || r[1] <= r[0] {
                    r[0]
                } else if j + 1 == per_axis {
                    r[1]
                } else {
                    r[0] + (r[1] - r[0]) * j as f64 / (per_axis - 1) as f64
                };
            }
            let assignment = Assignment {
                vars: &vars,
                values: &values,
            };
            let hv =
                h.eval(&Env::with_profile(&assignment))
                    .map_err(|source| CertifyError::Quad {
                        context: "exact functional".into(),
                        source: QuadError::Eval {
                            at: format!("{values:?}"),
                            source,
                        },
                    })?;
            let env = bound.offset
                + bound
                    .masses
                    .iter()
                    .map(|m| m.coeff * assignment.point_value(m.profile, m.node))
                    .sum::<f64>();
            let tol = 1e-12 * (1.0 + env.abs());
            let ok = match bound.direction {
                quad::Direction::Upper => hv <= env + tol,
                quad::Direction::Lower => hv >= env - tol,
            };
            if !ok {
                return Ok(EnvelopeStatus::Violated {
                    witness: vars
                        .iter()
                        .zip(&values)
                        .map(|(&(p, x), &v)| (p, x, v))
                        .collect(),
                    h: hv,
                    envelope: env,
                });
            }
        }
        Ok(EnvelopeStatus::Verified { points: total })
    }

    /// Runs one ladder slot. Index-1 and plain index-0 slots need both
    /// components; (I⁰)° needs the selected one or, without selection, either.
    pub fn check_slot(
        &self,
        slot: &LadderSlot,
        bounds: &[FunctionalBound; 2],
    ) -> Result<SlotReport, CertifyError> {
        let comps: Vec<usize> = match (slot.condition, slot.which) {
            (Condition::I0Circ, Some(w)) => vec![w - 1],
            _ => vec![0, 1],
        };
        let reports = comps
            .iter()
            .map(|&i| self.check(slot.condition, i, slot.radii, &bounds[i]))
            .collect::<Result<Vec<_>, _>>()?;
        let combine = |passes: Vec<bool>| {
            if slot.condition == Condition::I0Circ && slot.which.is_none() && !self.circ_both {
                passes.iter().any(|&p| p)
            } else {
                passes.iter().all(|&p| p)
            }
        };
        let pass = combine(reports.iter().map(|r| r.pass).collect());
        let oracle_pass = reports.iter().any(|r| r.oracle_pass.is_some()).then(|| {
            combine(
                reports
                    .iter()
                    .map(|r| r.oracle_pass.unwrap_or(r.pass))
                    .collect(),
            )
        });
        Ok(SlotReport {
            label: slot.label.clone(),
            condition: slot.condition,
            radii: slot.radii,
            which: slot.which,
            reports,
            pass,
            oracle_pass,
        })
    }

    /// Checks the ladder ordering, then every slot.
    pub fn certify_multiplicity(
        &self,
        ladder: &RadiiLadder,
        bounds: &BTreeMap<String, [FunctionalBound; 2]>,
    ) -> Result<MultiplicityVerdict, CertifyError> {
        ladder.validate(self.effective.c)?;
        let zero = [
            FunctionalBound::zero(quad::Direction::Upper),
            FunctionalBound::zero(quad::Direction::Upper),
        ];
        let slots = ladder
            .slots
            .iter()
            .map(|slot| {
                let b = bounds.get(&slot.label).unwrap_or(&zero);
                self.check_slot(slot, b)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let passes: Vec<bool> = slots.iter().map(|s| s.pass).collect();
        let oracle_count = (self.has_overrides() && self.shadow).then(|| {
            let shadow: Vec<bool> = slots
                .iter()
                .map(|s| s.oracle_pass.unwrap_or(s.pass))
                .collect();
            count(ladder.scheme, &shadow)
        });
        Ok(MultiplicityVerdict {
            scheme: ladder.scheme,
            theorem_count: ladder.scheme.theorem_count(),
            guaranteed_count: count(ladder.scheme, &passes),
            oracle_guaranteed_count: oracle_count,
            slots,
        })
    }

    /// Checks the non-existence hypotheses of every component.
    pub fn check_nonexistence(
        &self,
        hyp: &NonexistenceHypothesis,
    ) -> Result<NonexistenceReport, CertifyError> {
        if !(hyp.z > 0.0) {
            return Err(CertifyError::Hypothesis(format!(
                "scan bound Z = {} must be positive",
                hyp.z
            )));
        }
        let n = (self.cfg.scan_resolution * 3).max(2) + 1;
        let axis: Vec<f64> = (0..n)
            .map(|j| {
                if j + 1 == n {
                    hyp.z
                } else {
                    hyp.z * j as f64 / (n - 1) as f64
                }
            })
            .collect();
        let mut components = Vec::new();
        for (i, h) in hyp.components.iter().enumerate() {
            if !(h.a > 0.0 && h.lambda > 0.0) {
                return Err(CertifyError::Hypothesis(format!(
                    "A{0} and lambda{0} must be positive",
                    i + 1
                )));
            }
            let k = &self.effective;
            let f = &self.problem.components[i].f;
            let (scalar, scalar_pass, slope) = match h.mode {
                NonexistenceMode::Small => {
                    let s = k.norm_gamma[i] * h.a + h.lambda;
                    (s, s < 1.0 - STRICT_TOL, h.lambda / k.one_over_m_abs[i])
                }
                NonexistenceMode::Large => {
                    let s = k.c_gamma[i] * k.norm_gamma[i] * h.a + h.lambda;
                    (s, s > 1.0 + STRICT_TOL, h.lambda / k.one_over_big_m[i])
                }
            };
            let mut witness = None;
            'scan: for &z1 in &axis {
                for &z2 in &axis {
                    let value = f
                        .eval(&Env::uv(z1, z2))
                        .map_err(|source| CertifyError::Quad {
                            context: format!("f{} scan", i + 1),
                            source: QuadError::Eval {
                                at: format!("(u, v) = ({z1}, {z2})"),
                                source,
                            },
                        })?;
                    let zi = if i == 0 { z1 } else { z2 };
                    let bound = match h.mode {
                        NonexistenceMode::Small => slope * zi.abs(),
                        NonexistenceMode::Large => slope * zi,
                    };
                    let tol = 1e-12 * (1.0 + bound.abs());
                    let ok = match h.mode {
                        NonexistenceMode::Small => value <= bound + tol,
                        NonexistenceMode::Large => value >= bound - tol,
                    };
                    if !ok {
                        witness = Some(NonexistenceWitness {
                            z: [z1, z2],
                            f: value,
                            bound,
                        });
                        break 'scan;
                    }
                }
            }
            let mut deviations = Vec::new();
            let name = match h.mode {
                NonexistenceMode::Small => format!("one_over_m{}", i + 1),
                NonexistenceMode::Large => format!("one_over_M{}", i + 1),
            };
            if let Some(&value) = self.overrides.get(&name) {
                deviations.push(Deviation::new(
                    &name,
                    self.oracle.get(&name).expect("known constant"),
                    value,
                ));
            }
            components.push(NonexistenceComponentReport {
                component: i + 1,
                mode: h.mode,
                scalar_lhs: scalar,
                scalar_pass,
                slope,
                scan_points: n * n,
                witness,
                pass: scalar_pass && witness.is_none(),
                functional: EnvelopeStatus::Declared,
                deviations,
            });
        }
        let theorem = match (hyp.components[0].mode, hyp.components[1].mode) {
            (NonexistenceMode::Small, NonexistenceMode::Small) => "small",
            (NonexistenceMode::Large, NonexistenceMode::Large) => "large",
            _ => "mixed",
        };
        let pass = components.iter().all(|c| c.pass);
        Ok(NonexistenceReport {
            theorem: theorem.into(),
            z: hyp.z,
            components,
            pass,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonexistenceMode {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonexistenceComponent {
    #[serde(rename = "A")]
    pub a: f64,
    pub lambda: f64,
    pub mode: NonexistenceMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonexistenceHypothesis {
    pub z: f64,
    pub components: [NonexistenceComponent; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonexistenceWitness {
    pub z: [f64; 2],
    pub f: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonexistenceComponentReport {
    pub component: usize,
    pub mode: NonexistenceMode,
    /// `‖γ‖A + λ` (small) or `c_γ‖γ‖A + λ` (large).
    pub scalar_lhs: f64,
    pub scalar_pass: bool,
    /// `λm` (small) or `λM` (large).
    pub slope: f64,
    pub scan_points: usize,
    pub witness: Option<NonexistenceWitness>,
    pub pass: bool,
    /// The bound on `H` is never scanned here.
    pub functional: EnvelopeStatus,
    pub deviations: Vec<Deviation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonexistenceReport {
    pub theorem: String,
    pub z: f64,
    pub components: Vec<NonexistenceComponentReport>,
    pub pass: bool,
}
