//! Subcommand orchestration shared by the CLI and the tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::certify::{Certifier, CertifyError, OracleConstants};
use crate::expr::Env;
use crate::problem::{parse_file, CircMode, Problem, ProblemError};
use crate::radial::{self, TransformError};
use crate::report::{self, to_value};
use crate::solver::{
    localization_check, multi_start_search, shell_seeds, solve_fixed_point, Discretization,
    GridPair, SolveOutcome, SolverError,
};

pub const DEFAULT_GRID: usize = 257;

/// Command-line level settings layered over the problem file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Uniform solver nodes before breakpoints are inserted.
    pub grid: usize,
    pub panels: Option<usize>,
    pub order: Option<usize>,
    pub scan: Option<usize>,
    pub tol: Option<f64>,
    /// Certify with overrides only, skipping the oracle shadow pass.
    pub overrides_only: bool,
    /// Ignore the overrides block.
    pub no_overrides: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            panels: None,
            order: None,
            scan: None,
            tol: None,
            overrides_only: false,
            no_overrides: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NotConverged,
    CertificationFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub report: Value,
    /// Extra files as `(name, contents)`.
    pub files: Vec<(String, String)>,
    pub status: Status,
}

impl CommandOutput {
    pub fn json(&self) -> String {
        report::canonical_json(&self.report)
    }
}

/// Parses a problem file and applies the run flags.
pub fn load(text: &str, run: &RunConfig) -> Result<Problem, CommandError> {
    let mut file = parse_file(text)?;
    if run.no_overrides && run.overrides_only {
        return Err(CommandError::Usage(
            "--overrides-only and --no-overrides are exclusive".into(),
        ));
    }
    if let Some(p) = run.panels {
        file.quadrature.panels = p;
    }
    if let Some(o) = run.order {
        file.quadrature.order = o;
    }
    if let Some(s) = run.scan {
        file.quadrature.scan_resolution = s;
    }
    if let Some(t) = run.tol {
        file.solver.tol = t;
    }
    Ok(Problem::from_file(file)?)
}

fn header(command: &str, input: &[u8], p: &Problem, run: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert(
        "tool".into(),
        json!({"name": report::TOOL, "version": report::VERSION, "report_format": report::REPORT_FORMAT}),
    );
    m.insert("command".into(), json!(command));
    m.insert(
        "input".into(),
        json!({"sha256": report::sha256_hex(input), "description": p.file.description}),
    );
    let mode = if run.no_overrides || p.overrides.is_empty() {
        "oracle"
    } else if run.overrides_only {
        "overrides_only"
    } else {
        "overrides_with_oracle_shadow"
    };
    m.insert(
        "config".into(),
        json!({
            "quadrature": to_value(&p.file.quadrature),
            "solver": to_value(&p.file.solver),
            "grid": run.grid,
            "options": to_value(&p.file.options),
            "constants_mode": mode,
        }),
    );
    m
}

fn effective_overrides(p: &Problem, run: &RunConfig) -> BTreeMap<String, f64> {
    if run.no_overrides {
        Default::default()
    } else {
        p.overrides.clone()
    }
}

/// Oracle value of a constant-table name such as `one_over_M2` or `c_k1`.
fn lookup(o: &OracleConstants, name: &str) -> Option<f64> {
    let (stem, split) = match name.strip_suffix("_split") {
        Some(s) => (s, true),
        None => (name, false),
    };
    let (stem, digit) = stem.split_at(stem.len().checked_sub(1)?);
    let i = match digit {
        "1" => 0,
        "2" => 1,
        _ => return None,
    };
    Some(match (stem, split) {
        ("one_over_m", false) => o.one_over_m[i].value,
        ("one_over_m", true) => o.one_over_m_split[i].value,
        ("one_over_M", false) => o.one_over_big_m[i].value,
        ("c", false) => o.cones[i].c,
        ("c_k", false) => o.cones[i].c_k,
        ("c_gamma", false) => o.cones[i].c_gamma,
        ("norm_gamma", false) => o.cones[i].norm_gamma,
        _ => return None,
    })
}

fn deviates(oracle: f64, published: f64) -> bool {
    (published - oracle).abs() > 1e-9 * (1.0 + oracle.abs())
}

fn constants_table(
    p: &Problem,
    o: &OracleConstants,
    doubled: &OracleConstants,
    overrides: &BTreeMap<String, f64>,
) -> Vec<Value> {
    let mut rows = Vec::new();
    for i in 1..=2 {
        let idx = i - 1;
        let scans = [
            (format!("one_over_m{i}"), Some(o.one_over_m[idx])),
            (
                format!("one_over_m{i}_split"),
                Some(o.one_over_m_split[idx]),
            ),
            (format!("one_over_M{i}"), Some(o.one_over_big_m[idx])),
            (format!("norm_gamma{i}"), None),
            (format!("c_gamma{i}"), None),
            (format!("c_k{i}"), None),
            (format!("c{i}"), None),
        ];
        for (name, scan) in scans {
            let oracle = lookup(o, &name).expect("table names resolve");
            let fine = lookup(doubled, &name).expect("table names resolve");
            let ov = overrides.get(&name).copied();
            let reference = p.reference.get(&name).copied();
            let published = ov.or(reference);
            rows.push(json!({
                "name": name,
                "oracle": oracle,
                "override": ov,
                "reference": reference,
                "delta": published.map(|x| x - oracle),
                "deviates": published.is_some_and(|x| deviates(oracle, x)),
                "resolution": scan.map(|s| json!({"grid": s.grid, "rounds": s.rounds, "at": s.at})),
                "stabilization": fine - oracle,
            }));
        }
    }
    rows
}

fn functionals(p: &Problem) -> Vec<Value> {
    let mut rows = Vec::new();
    for (label, pair) in &p.bounds {
        for (i, b) in pair.iter().enumerate() {
            let kernel = p.unit.components[i].kernel;
            let own = crate::expr::Profile::from_index(i);
            rows.push(json!({
                "label": label,
                "component": i + 1,
                "A": b.offset,
                "direction": to_value(&b.direction),
                "alpha_gamma": b.alpha(own, |t| kernel.gamma(t)),
                "alpha_one": [b.alpha_one(crate::expr::Profile::U), b.alpha_one(crate::expr::Profile::V)],
            }));
        }
    }
    rows
}

fn deviation_rows(
    p: &Problem,
    o: &OracleConstants,
    overrides: &BTreeMap<String, f64>,
) -> Vec<Value> {
    let mut rows = Vec::new();
    for (source, map) in [("override", overrides), ("reference", &p.reference)] {
        for (name, &value) in map {
            let Some(oracle) = lookup(o, name) else {
                continue;
            };
            if source == "reference" && !deviates(oracle, value) {
                continue;
            }
            rows.push(json!({
                "name": name,
                "oracle": oracle,
                "paper": value,
                "delta": value - oracle,
                "source": source,
            }));
        }
    }
    rows
}

fn transform_info(p: &Problem) -> Value {
    let kernels: Vec<Value> = p
        .unit
        .components
        .iter()
        .map(|c| match c.kernel {
            crate::kernel::Kernel::MultiPoint1(k) => {
                json!({"type": "multipoint1", "beta1": k.beta1, "eta": k.eta})
            }
            crate::kernel::Kernel::MultiPoint2(k) => {
                json!({"type": "multipoint2", "beta2": k.beta2, "xi": k.xi})
            }
            crate::kernel::Kernel::Dirichlet(g) => {
                json!({"type": "dirichlet", "gamma": to_value(&g)})
            }
        })
        .collect();
    json!({
        "geometry": p.geometry.map(|g| to_value(&g)),
        "multipoint": p.multipoint.map(|m| to_value(&m)),
        "kernels": kernels,
        "windows": p.unit.components.iter().map(|c| [c.window.a, c.window.b]).collect::<Vec<_>>(),
    })
}

fn oracle_pair(p: &Problem) -> Result<(OracleConstants, OracleConstants), CommandError> {
    let cfg = p.file.quadrature;
    let coarse = OracleConstants::compute(&p.unit, &cfg)?;
    let fine = OracleConstants::compute(&p.unit, &cfg.doubled())?;
    Ok((coarse, fine))
}

pub fn cmd_constants(input: &str, run: &RunConfig) -> Result<CommandOutput, CommandError> {
    let p = load(input, run)?;
    let (o, fine) = oracle_pair(&p)?;
    let overrides = effective_overrides(&p, run);
    let mut m = header("constants", input.as_bytes(), &p, run);
    m.insert(
        "constants".into(),
        Value::Array(constants_table(&p, &o, &fine, &overrides)),
    );
    m.insert("functionals".into(), Value::Array(functionals(&p)));
    m.insert("transform".into(), transform_info(&p));
    m.insert(
        "deviations".into(),
        Value::Array(deviation_rows(&p, &o, &overrides)),
    );
    Ok(CommandOutput {
        report: Value::Object(m),
        files: Vec::new(),
        status: Status::Ok,
    })
}

pub fn cmd_certify(input: &str, run: &RunConfig) -> Result<CommandOutput, CommandError> {
    let p = load(input, run)?;
    if p.ladder.is_none() && p.nonexistence.is_none() {
        return Err(CommandError::Usage(
            "certify needs a `ladder` or a `nonexistence` block".into(),
        ));
    }
    let (o, fine) = oracle_pair(&p)?;
    let overrides = effective_overrides(&p, run);
    let mut c = Certifier::new(
        &p.unit,
        &o,
        p.file.options.split_kernel,
        overrides.clone(),
        p.h_exact.as_ref(),
        p.file.quadrature,
    )?;
    c.circ_both = p.file.options.i0circ == CircMode::Both;
    c.shadow = !run.overrides_only;
    let verdict = p
        .ladder
        .as_ref()
        .map(|l| c.certify_multiplicity(l, &p.bounds))
        .transpose()?;
    let nonexistence = p
        .nonexistence
        .as_ref()
        .map(|h| c.check_nonexistence(h))
        .transpose()?;
    let passed = verdict
        .as_ref()
        .is_none_or(|v| v.guaranteed_count == v.theorem_count)
        && nonexistence.as_ref().is_none_or(|n| n.pass);

    let mut m = header("certify", input.as_bytes(), &p, run);
    m.insert(
        "constants".into(),
        Value::Array(constants_table(&p, &o, &fine, &overrides)),
    );
    m.insert("effective_constants".into(), to_value(&c.effective));
    m.insert("functionals".into(), Value::Array(functionals(&p)));
    m.insert(
        "verdict".into(),
        verdict.as_ref().map_or(Value::Null, to_value),
    );
    m.insert(
        "nonexistence".into(),
        nonexistence.as_ref().map_or(Value::Null, to_value),
    );
    m.insert(
        "deviations".into(),
        Value::Array(deviation_rows(&p, &o, &overrides)),
    );
    m.insert("pass".into(), json!(passed));
    Ok(CommandOutput {
        report: Value::Object(m),
        files: Vec::new(),
        status: if passed {
            Status::Ok
        } else {
            Status::CertificationFailed
        },
    })
}

fn csv_t(x: &GridPair) -> String {
    let mut s = String::from("t,u,v\n");
    for j in 0..x.len() {
        let _ = writeln!(s, "{:.12e},{:.12e},{:.12e}", x.nodes[j], x.u[j], x.v[j]);
    }
    s
}

fn outcome_summary(p: &Problem, out: &SolveOutcome) -> Result<Value, CommandError> {
    let x = &out.solution;
    let functionals = match &p.h_exact {
        Some(h) => {
            let env = Env::with_profile(x);
            let vals: Result<Vec<f64>, _> = h.iter().map(|e| e.eval(&env)).collect();
            vals.ok()
        }
        None => None,
    };
    let windows = [p.unit.components[0].window, p.unit.components[1].window];
    let radial = match p.geometry {
        Some(g) => Some(radial::profile_to_radial(x, g.n, g.r1)?),
        None => None,
    };
    Ok(json!({
        "seed": out.seed,
        "converged": out.converged,
        "residual": out.residual,
        "iterations": out.iterations,
        "stop": to_value(&out.stop),
        "cone": out.cone.as_ref().map(to_value),
        "localization": to_value(&out.localization),
        "sup_norm": [x.sup_norm(0), x.sup_norm(1)],
        "window_min": [x.window_min(0, &windows[0]).0, x.window_min(1, &windows[1]).0],
        "functional_values": functionals,
        "limit_at_infinity": radial.map(|r| r.limit_at_infinity),
    }))
}

pub fn cmd_solve(input: &str, run: &RunConfig) -> Result<CommandOutput, CommandError> {
    let p = load(input, run)?;
    let h = p
        .h_exact
        .as_ref()
        .ok_or_else(|| CommandError::Usage("solve needs an `H_exact` block".into()))?;
    let cfg = p.file.solver;
    let disc = Discretization::new(&p.unit, h, run.grid, &p.file.quadrature)?;
    let windows = disc.windows();
    let ladder: Vec<(String, [f64; 2])> = p
        .ladder
        .as_ref()
        .map(|l| l.slots.iter().map(|s| (s.label.clone(), s.radii)).collect())
        .unwrap_or_default();

    let mut primary = solve_fixed_point(&disc, &disc.zero(), &cfg);
    primary.seed = Some([0.0, 0.0]);
    primary.localization = ladder
        .iter()
        .map(|(label, radii)| localization_check(&primary.solution, label, *radii, &windows))
        .collect();
    let mut outcomes = vec![primary];
    if !ladder.is_empty() {
        let c = [
            p.unit.components[0]
                .kernel
                .cone_constants(&windows[0])
                .map_err(CertifyError::from)?
                .c,
            p.unit.components[1]
                .kernel
                .cone_constants(&windows[1])
                .map_err(CertifyError::from)?
                .c,
        ];
        let radii: Vec<[f64; 2]> = ladder.iter().map(|(_, r)| *r).collect();
        let seeds: Vec<[f64; 2]> = shell_seeds(&radii, c)
            .into_iter()
            .filter(|s| *s != [0.0, 0.0])
            .collect();
        for out in multi_start_search(&disc, &seeds, &ladder, &cfg) {
            let scale = 1.0f64
                .max(out.solution.sup_norm(0))
                .max(out.solution.sup_norm(1));
            let threshold = (10.0 * cfg.tol).max(1e-6 * scale);
            let dup = outcomes
                .iter()
                .any(|k| k.converged && k.solution.distance(&out.solution) <= threshold);
            if !dup {
                outcomes.push(out);
            }
        }
    }
    let distinct = outcomes.iter().filter(|o| o.converged).count();

    let mut files = Vec::new();
    for (k, out) in outcomes.iter().enumerate() {
        let suffix = if k == 0 {
            String::new()
        } else {
            format!("_{}", k + 1)
        };
        files.push((format!("profile_t{suffix}.csv"), csv_t(&out.solution)));
        if let Some(g) = p.geometry {
            let rp = radial::profile_to_radial(&out.solution, g.n, g.r1)?;
            let mut s = String::from("r,u,v\n");
            for smp in &rp.samples {
                let _ = writeln!(s, "{:.12e},{:.12e},{:.12e}", smp.r, smp.u, smp.v);
            }
            files.push((format!("profile_r{suffix}.csv"), s));
        }
    }

    let summaries = outcomes
        .iter()
        .map(|o| outcome_summary(&p, o))
        .collect::<Result<Vec<_>, _>>()?;
    let mut m = header("solve", input.as_bytes(), &p, run);
    m.insert(
        "solver".into(),
        json!({
            "nodes": disc.nodes.len(),
            "quadrature_points": disc.quadrature_points(),
            "outcomes": summaries,
            "distinct_solutions": distinct,
            "files": files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        }),
    );
    m.insert("transform".into(), transform_info(&p));
    Ok(CommandOutput {
        report: Value::Object(m),
        files,
        status: if distinct > 0 {
            Status::Ok
        } else {
            Status::NotConverged
        },
    })
}

/// Samples of the change of variables and the weights it produces.
pub fn cmd_transform(input: &str, run: &RunConfig) -> Result<CommandOutput, CommandError> {
    let p = load(input, run)?;
    let g = p
        .geometry
        .ok_or_else(|| CommandError::Usage("transform needs a `space` section".into()))?;
    let mut samples = Vec::new();
    for j in 1..=16 {
        let t = j as f64 / 16.0;
        let r = radial::r_of_t(g.n, g.r1, t)?;
        let phi = radial::phi_weight(g.n, g.r1, t)?;
        let weights: Vec<Option<f64>> = p
            .unit
            .components
            .iter()
            .map(|c| c.weight.eval(t).ok())
            .collect();
        samples.push(json!({"t": t, "r": r, "phi": phi, "g": weights}));
    }
    let bc = match p.file.space.as_ref().map(|s| s.bc) {
        Some(crate::problem::BcKind::Dirichlet) => "dirichlet",
        _ => "multipoint",
    };
    let mut m = header("transform", input.as_bytes(), &p, run);
    m.insert("transform".into(), transform_info(&p));
    m.insert("bc".into(), json!(bc));
    m.insert("samples".into(), Value::Array(samples));
    Ok(CommandOutput {
        report: Value::Object(m),
        files: Vec::new(),
        status: Status::Ok,
    })
}

/// Plain-text rendering of previously written reports.
pub fn cmd_report(reports: &[(String, String)]) -> Result<String, CommandError> {
    let mut out = String::new();
    for (name, text) in reports {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| CommandError::Usage(format!("{name}: not a report: {e}")))?;
        out.push_str(&report::render_text(name, &v));
        out.push('\n');
    }
    Ok(out)
}
