//! Breakpoint-aware Gauss–Legendre quadrature and the scalar constants
//! entering the index conditions: `1/m`, its split-kernel refinement,
//! `1/M`, windowed kernel moments and box extrema of the nonlinearities.
//!
//! Extrema over `t` and over `(u, v)` boxes are found by refined grid
//! scans. They are not rigorous bounds and every result carries the
//! resolution that produced it.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Env, EvalError, Expr, Profile};
use crate::kernel::{ConeWindow, Kernel};
use crate::radial::Weight;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("evaluation failed at {at}: {source}")]
    Eval {
        at: String,
        #[source]
        source: EvalError,
    },
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
}

fn at_s(s: f64) -> impl FnOnce(EvalError) -> QuadError {
    move |source| QuadError::Eval {
        at: format!("s = {s}"),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Equal sub-panels per breakpoint-delimited segment.
    pub panels: usize,
    /// Gauss–Legendre nodes per panel.
    pub order: usize,
    /// Points of each `t`-scan grid.
    pub t_scan: usize,
    /// Zoom rounds of a `t`-scan around its incumbent.
    pub refinement_rounds: usize,
    /// Points per axis of a box scan.
    pub scan_resolution: usize,
    /// Zoom rounds of a box scan.
    pub box_rounds: usize,
    /// Geometric halvings of the panel touching `t = 0` for non-constant weights.
    pub grading_levels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            panels: 1,
            order: 8,
            t_scan: 1025,
            refinement_rounds: 2,
            scan_resolution: 64,
            box_rounds: 3,
            grading_levels: 30,
        }
    }
}

impl QuadratureConfig {
    /// Twice the panels and scan resolution; used for stabilization checks.
    pub fn doubled(&self) -> Self {
        Self {
            panels: self.panels * 2,
            t_scan: self.t_scan * 2 - 1,
            scan_resolution: self.scan_resolution * 2,
            grading_levels: self.grading_levels + 10,
            ..*self
        }
    }
}

pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Gauss–Legendre rule on `[-1, 1]` by Newton iteration on `P_n`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 1 { x } else { p1 };
                let pm1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn cached(order: usize) -> &'static GaussRule {
        static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussRule>>> = OnceLock::new();
        let mut map = CACHE
            .get_or_init(Default::default)
            .lock()
            .expect("gauss cache");
        map.entry(order)
            .or_insert_with(|| Box::leak(Box::new(GaussRule::new(order))))
    }

    fn apply<F>(&self, f: &mut F, a: f64, b: f64) -> Result<f64, QuadError>
    where
        F: FnMut(f64) -> Result<f64, EvalError>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let s = mid + half * x;
            acc += w * f(s).map_err(at_s(s))?;
        }
        Ok(acc * half)
    }
}

/// Panels covering `[a, b]`: split at interior breakpoints, `panels` equal
/// pieces per segment, and geometric grading of a segment starting at 0.
pub(crate) fn panels(
    a: f64,
    b: f64,
    breakpoints: &[f64],
    graded: bool,
    cfg: &QuadratureConfig,
) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);
    let mut out = Vec::new();
    for (k, pair) in edges.windows(2).enumerate() {
        let (lo, hi) = (pair[0], pair[1]);
        if hi <= lo {
            continue;
        }
        let pieces = cfg.panels.max(1);
        let h = (hi - lo) / pieces as f64;
        for j in 0..pieces {
            let x0 = lo + j as f64 * h;
            let x1 = if j + 1 == pieces {
                hi
            } else {
                lo + (j + 1) as f64 * h
            };
            if k == 0 && j == 0 && graded && lo == 0.0 {
                let mut right = x1;
                for _ in 0..cfg.grading_levels {
                    out.push((0.5 * right, right));
                    right *= 0.5;
                }
                out.push((0.0, right));
            } else {
                out.push((x0, x1));
            }
        }
    }
    out
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate<F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    graded: bool,
    cfg: &QuadratureConfig,
) -> Result<f64, QuadError>
where
    F: FnMut(f64) -> Result<f64, EvalError>,
{
    if b <= a {
        return Ok(0.0);
    }
    let rule = GaussRule::cached(cfg.order);
    let mut acc = 0.0;
    for (lo, hi) in panels(a, b, breakpoints, graded, cfg) {
        acc += rule.apply(&mut f, lo, hi)?;
    }
    Ok(acc)
}

/// Positive and negative parts of `∫ k(t, s) g(s) ds` over a range.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelParts {
    pub pos: f64,
    pub neg: f64,
}

impl KernelParts {
    pub fn signed(&self) -> f64 {
        self.pos - self.neg
    }

    pub fn abs(&self) -> f64 {
        self.pos + self.neg
    }

    pub fn split(&self) -> f64 {
        self.pos.max(self.neg)
    }
}

/// `∫_lo^hi k(t,s)⁺ g(s) ds` and `∫_lo^hi k(t,s)⁻ g(s) ds`.
///
/// Panels are cut at the kernel breakpoints and at `s = t`; inside a panel
/// the kernel is affine in `s`, so its sign change (if any) is located
/// exactly from two interior samples.
pub fn kernel_parts(
    kernel: &Kernel,
    weight: &Weight,
    t: f64,
    lo: f64,
    hi: f64,
    cfg: &QuadratureConfig,
) -> Result<KernelParts, QuadError> {
    let mut parts = KernelParts::default();
    if hi <= lo {
        return Ok(parts);
    }
    let mut cuts = kernel.s_breakpoints();
    cuts.push(t);
    let graded = !weight.is_constant();
    let rule = GaussRule::cached(cfg.order);
    let mut integrand = |s: f64| Ok(kernel.value(t, s) * weight.eval(s)?);
    for (x, y) in panels(lo, hi, &cuts, graded, cfg) {
        let q = 0.25 * (y - x);
        let (ka, kb) = (kernel.value(t, x + q), kernel.value(t, y - q));
        let slope = (kb - ka) / (2.0 * q);
        let (kx, ky) = (ka - slope * q, kb + slope * q);
        let mut add = |lo: f64, hi: f64, parts: &mut KernelParts| -> Result<(), QuadError> {
            let mid = kernel.value(t, 0.5 * (lo + hi));
            let value = rule.apply(&mut integrand, lo, hi)?;
            if mid >= 0.0 {
                parts.pos += value;
            } else {
                parts.neg -= value;
            }
            Ok(())
        };
        if kx * ky < 0.0 {
            let root = (x - kx / slope).clamp(x, y);
            add(x, root, &mut parts)?;
            add(root, y, &mut parts)?;
        } else {
            add(x, y, &mut parts)?;
        }
    }
    Ok(parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

impl Extremum {
    fn better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Extremum::Max => candidate > incumbent,
            Extremum::Min => candidate < incumbent,
        }
    }
}

/// Result of a refined grid scan over `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanResult {
    pub value: f64,
    pub at: f64,
    pub grid: usize,
    pub rounds: usize,
}

/// Grid scan of `f` on `[lo, hi]` followed by zoom rounds around the best
/// node. Ties resolve to the leftmost node, so results are deterministic.
pub fn scan_extremum<F>(
    f: F,
    lo: f64,
    hi: f64,
    points: usize,
    rounds: usize,
    kind: Extremum,
) -> Result<ScanResult, QuadError>
where
    F: Fn(f64) -> Result<f64, QuadError> + Sync,
{
    let points = points.max(3);
    if hi <= lo {
        return Ok(ScanResult {
            value: f(lo)?,
            at: lo,
            grid: 1,
            rounds: 0,
        });
    }
    let (mut a, mut b) = (lo, hi);
    let mut best = (f64::NAN, lo);
    for _ in 0..=rounds {
        let h = (b - a) / (points - 1) as f64;
        let nodes: Vec<f64> = (0..points)
            .map(|j| if j + 1 == points { b } else { a + j as f64 * h })
            .collect();
        let values = nodes
            .par_iter()
            .map(|&t| f(t))
            .collect::<Result<Vec<_>, _>>()?;
        for (&t, &value) in nodes.iter().zip(&values) {
            if best.0.is_nan() || kind.better(value, best.0) {
                best = (value, t);
            }
        }
        a = (best.1 - h).max(lo);
        b = (best.1 + h).min(hi);
    }
    Ok(ScanResult {
        value: best.0,
        at: best.1,
        grid: points,
        rounds,
    })
}

/// Which reduction of the kernel enters `1/m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelNorm {
    /// `sup_t ∫ |k| g`.
    Abs,
    /// `sup_t max{∫ k⁺ g, ∫ k⁻ g}`.
    Split,
    /// `sup_t ∫ k g`.
    Signed,
}

pub fn one_over_m(
    kernel: &Kernel,
    weight: &Weight,
    norm: KernelNorm,
    cfg: &QuadratureConfig,
) -> Result<ScanResult, QuadError> {
    scan_extremum(
        |t| {
            let parts = kernel_parts(kernel, weight, t, 0.0, 1.0, cfg)?;
            Ok(match norm {
                KernelNorm::Abs => parts.abs(),
                KernelNorm::Split => parts.split(),
                KernelNorm::Signed => parts.signed(),
            })
        },
        0.0,
        1.0,
        cfg.t_scan,
        cfg.refinement_rounds,
        Extremum::Max,
    )
}

pub fn one_over_m_split(
    kernel: &Kernel,
    weight: &Weight,
    cfg: &QuadratureConfig,
) -> Result<ScanResult, QuadError> {
    one_over_m(kernel, weight, KernelNorm::Split, cfg)
}

/// `inf_{t ∈ [a,b]} ∫_a^b k(t,s) g(s) ds`.
#[allow(non_snake_case)]
pub fn one_over_M(
    kernel: &Kernel,
    weight: &Weight,
    window: &ConeWindow,
    cfg: &QuadratureConfig,
) -> Result<ScanResult, QuadError> {
    scan_extremum(
        |t| Ok(kernel_parts(kernel, weight, t, window.a, window.b, cfg)?.signed()),
        window.a,
        window.b,
        cfg.t_scan,
        cfg.refinement_rounds,
        Extremum::Min,
    )
}

/// Integration range of the kernel moment `∫ 𝒦(s) g(s) ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Range {
    Full,
    Window(ConeWindow),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointMass {
    /// Profile the mass reads (`u` or `v`).
    pub profile: Profile,
    pub node: f64,
    pub coeff: f64,
}

/// Affine envelope `A + α₁[u] + α₂[v]` of a boundary functional, with
/// `α` a finite sum of nonnegative point masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalBound {
    pub offset: f64,
    pub masses: Vec<PointMass>,
    pub direction: Direction,
}

impl FunctionalBound {
    pub fn zero(direction: Direction) -> Self {
        Self {
            offset: 0.0,
            masses: Vec::new(),
            direction,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.offset >= 0.0) {
            return Err(format!("offset A = {} must be nonnegative", self.offset));
        }
        for m in &self.masses {
            if !(m.coeff >= 0.0) {
                return Err(format!("mass coefficient {} must be nonnegative", m.coeff));
            }
            if !(0.0..=1.0).contains(&m.node) {
                return Err(format!("mass node {} outside [0, 1]", m.node));
            }
        }
        Ok(())
    }

    pub fn masses_on(&self, profile: Profile) -> impl Iterator<Item = &PointMass> {
        self.masses.iter().filter(move |m| m.profile == profile)
    }

    /// `α[w] = Σ c_j w(t_j)` over the masses reading `profile`.
    pub fn alpha<W: Fn(f64) -> f64>(&self, profile: Profile, w: W) -> f64 {
        self.masses_on(profile)
            .fold(0.0, |acc, m| acc + m.coeff * w(m.node))
    }

    pub fn alpha_one(&self, profile: Profile) -> f64 {
        self.alpha(profile, |_| 1.0)
    }

    /// `A + α₁[u] + α₂[v]` for profiles given as closures.
    pub fn envelope<U: Fn(f64) -> f64, V: Fn(f64) -> f64>(&self, u: U, v: V) -> f64 {
        self.offset + self.alpha(Profile::U, u) + self.alpha(Profile::V, v)
    }
}

/// `Σ_j c_j ∫_range k(t_j, s) g(s) ds` for point masses `(t_j, c_j)`.
pub fn script_k_integral(
    kernel: &Kernel,
    weight: &Weight,
    masses: &[(f64, f64)],
    range: Range,
    cfg: &QuadratureConfig,
) -> Result<f64, QuadError> {
    let (lo, hi) = match range {
        Range::Full => (0.0, 1.0),
        Range::Window(w) => (w.a, w.b),
    };
    let mut acc = 0.0;
    for &(node, coeff) in masses {
        acc += coeff * kernel_parts(kernel, weight, node, lo, hi, cfg)?.signed();
    }
    Ok(acc)
}

/// Rejects weights for which `∫ Φ g` does not settle under refinement.
pub fn check_integrable(
    kernel: &Kernel,
    weight: &Weight,
    cfg: &QuadratureConfig,
) -> Result<f64, QuadError> {
    if weight.is_constant() {
        let g = weight.eval(0.5).map_err(at_s(0.5))?;
        return Ok(g * integrate(|s| Ok(kernel.phi(s)), 0.0, 1.0, &[], false, cfg)?);
    }
    let f = |s: f64| Ok(kernel.phi(s) * weight.eval(s)?);
    let coarse = integrate(f, 0.0, 1.0, &[0.5], true, cfg)?;
    let fine = integrate(f, 0.0, 1.0, &[0.25, 0.5, 0.75], true, &cfg.doubled())?;
    if !coarse.is_finite() || (coarse - fine).abs() > 1e-6 * (1.0 + fine.abs()) {
        return Err(QuadError::NonConvergence(format!(
            "∫Φg changed from {coarse} to {fine} under refinement"
        )));
    }
    Ok(fine)
}

/// Rectangle `[u₀,u₁] × [v₀,v₁]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub u: [f64; 2],
    pub v: [f64; 2],
}

impl Rect {
    pub fn new(u: [f64; 2], v: [f64; 2]) -> Self {
        Self { u, v }
    }

    pub fn contains(&self, other: &Rect) -> bool {
        self.u[0] <= other.u[0]
            && other.u[1] <= self.u[1]
            && self.v[0] <= other.v[0]
            && other.v[1] <= self.v[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxExtremum {
    pub value: f64,
    pub at: [f64; 2],
    pub rect: Rect,
    pub resolution: usize,
    pub rounds: usize,
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|j| if j + 1 == n { hi } else { lo + j as f64 * h })
        .collect()
}

/// Refined grid extremum of `f` over a rectangle. Each round scans an
/// `n × n` grid (endpoints included) and zooms to one cell around the
/// incumbent.
pub fn box_extremum<F>(
    f: F,
    rect: Rect,
    kind: Extremum,
    resolution: usize,
    rounds: usize,
) -> Result<BoxExtremum, QuadError>
where
    F: Fn(f64, f64) -> Result<f64, EvalError> + Sync,
{
    let n = resolution.max(2);
    let mut current = rect;
    let mut best: Option<(f64, [f64; 2])> = None;
    for _ in 0..=rounds {
        let us = axis(current.u[0], current.u[1], n);
        let vs = axis(current.v[0], current.v[1], n);
        let rows = us
            .par_iter()
            .map(|&u| {
                vs.iter()
                    .map(|&v| {
                        f(u, v).map_err(|source| QuadError::Eval {
                            at: format!("(u, v) = ({u}, {v})"),
                            source,
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (&u, row) in us.iter().zip(&rows) {
            for (&v, &value) in vs.iter().zip(row) {
                if best.is_none_or(|(b, _)| kind.better(value, b)) {
                    best = Some((value, [u, v]));
                }
            }
        }
        let (_, [bu, bv]) = best.expect("non-empty grid");
        let du = if us.len() > 1 { us[1] - us[0] } else { 0.0 };
        let dv = if vs.len() > 1 { vs[1] - vs[0] } else { 0.0 };
        current = Rect::new(
            [(bu - du).max(rect.u[0]), (bu + du).min(rect.u[1])],
            [(bv - dv).max(rect.v[0]), (bv + dv).min(rect.v[1])],
        );
    }
    let (value, at) = best.expect("non-empty grid");
    Ok(BoxExtremum {
        value,
        at,
        rect,
        resolution: n,
        rounds,
    })
}

fn eval_f(f: &Expr) -> impl Fn(f64, f64) -> Result<f64, EvalError> + Sync + '_ {
    move |u, v| f.eval(&Env::uv(u, v))
}

pub fn sup_f_over_box(
    f: &Expr,
    rect: Rect,
    cfg: &QuadratureConfig,
) -> Result<BoxExtremum, QuadError> {
    box_extremum(
        eval_f(f),
        rect,
        Extremum::Max,
        cfg.scan_resolution,
        cfg.box_rounds,
    )
}

pub fn inf_f_over_box(
    f: &Expr,
    rect: Rect,
    cfg: &QuadratureConfig,
) -> Result<BoxExtremum, QuadError> {
    box_extremum(
        eval_f(f),
        rect,
        Extremum::Min,
        cfg.scan_resolution,
        cfg.box_rounds,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::kernel::{DirichletGamma, KernelParams1, KernelParams2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn k1() -> Kernel {
        Kernel::MultiPoint1(KernelParams1::new(2.0, 0.25).unwrap())
    }

    fn k2() -> Kernel {
        Kernel::MultiPoint2(KernelParams2::new(1.0 / 3.0, 0.5).unwrap())
    }

    fn dirichlet() -> Kernel {
        Kernel::Dirichlet(DirichletGamma::Rising)
    }

    const ONE: Weight = Weight::Constant(1.0);

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        for order in 1..=12 {
            let rule = GaussRule::new(order);
            assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for degree in 0..2 * order {
                let exact = if degree % 2 == 1 {
                    0.0
                } else {
                    2.0 / (degree as f64 + 1.0)
                };
                let approx: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(degree as i32))
                    .sum();
                assert!(
                    (approx - exact).abs() < 1e-13,
                    "order {order} degree {degree}"
                );
            }
        }
    }

    #[test]
    fn integrate_respects_breakpoints() {
        let value = integrate(|s| Ok((s - 0.3).abs()), 0.0, 1.0, &[0.3], false, &cfg()).unwrap();
        assert!((value - (0.045 + 0.245)).abs() < 1e-15);
        let graded = integrate(|s| Ok(s.powf(-0.5)), 0.0, 1.0, &[], true, &cfg()).unwrap();
        assert!((graded - 2.0).abs() < 1e-4);
    }

    #[test]
    fn one_over_m_k1() {
        // ∫ k₁(t,·) = 7t/8 − t²/2, maximal at t = 7/8.
        let r = one_over_m(&k1(), &ONE, KernelNorm::Abs, &cfg()).unwrap();
        assert!((r.value - 49.0 / 128.0).abs() < 1e-9, "{}", r.value);
        assert!((r.at - 0.875).abs() < 1e-6);
    }

    #[test]
    fn one_over_m_k2() {
        // The negative lobe near t = 7/8 makes the absolute value exceed the
        // signed supremum 1/8 attained at t = 1/2.
        let abs = one_over_m(&k2(), &ONE, KernelNorm::Abs, &cfg()).unwrap();
        assert!((abs.value - 17.0 / 128.0).abs() < 1e-9, "{}", abs.value);
        let split = one_over_m_split(&k2(), &ONE, &cfg()).unwrap();
        assert!((split.value - 0.125).abs() < 1e-9, "{}", split.value);
    }

    #[test]
    fn one_over_m_dirichlet() {
        let r = one_over_m(&dirichlet(), &ONE, KernelNorm::Abs, &cfg()).unwrap();
        assert!((r.value - 0.125).abs() < 1e-9);
    }

    #[test]
    fn split_refinement_example() {
        let k = Kernel::MultiPoint2(KernelParams2::new(0.5, 1.0 / 3.0).unwrap());
        let split = one_over_m_split(&k, &ONE, &cfg()).unwrap();
        let abs = one_over_m(&k, &ONE, KernelNorm::Abs, &cfg()).unwrap();
        assert!((split.value - 40.0 / 162.0).abs() < 1e-9, "{}", split.value);
        assert!((abs.value - 46.0 / 162.0).abs() < 1e-9, "{}", abs.value);
        assert!((split.at - 7.0 / 9.0).abs() < 1e-5);
        assert!((abs.at - 8.0 / 9.0).abs() < 1e-5);
    }

    #[test]
    fn split_equals_abs_for_nonnegative_kernels() {
        for k in [k1(), dirichlet()] {
            let split = one_over_m_split(&k, &ONE, &cfg()).unwrap().value;
            let abs = one_over_m(&k, &ONE, KernelNorm::Abs, &cfg()).unwrap().value;
            assert!((split - abs).abs() < 1e-15);
        }
    }

    #[test]
    fn split_never_exceeds_abs_on_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coarse = QuadratureConfig {
            t_scan: 129,
            ..cfg()
        };
        for _ in 0..100 {
            let xi = rng.gen_range(0.05..0.95);
            let beta = rng.gen_range(0.0..(1.0 - xi));
            let k = Kernel::MultiPoint2(KernelParams2::new(beta, xi).unwrap());
            let split = one_over_m_split(&k, &ONE, &coarse).unwrap().value;
            let abs = one_over_m(&k, &ONE, KernelNorm::Abs, &coarse)
                .unwrap()
                .value;
            assert!(split <= abs + 1e-10, "beta={beta} xi={xi}");
        }
    }

    #[test]
    fn one_over_big_m_examples() {
        let w = ConeWindow::new(0.25, 0.75);
        let r = one_over_M(&dirichlet(), &ONE, &w, &cfg()).unwrap();
        assert!((r.value - 1.0 / 16.0).abs() < 1e-9);
        let w = ConeWindow::new(0.25, 0.5);
        // F(t) = 5t/16 − (t − 1/4)²/2 on [1/4, 1/2], increasing.
        let r = one_over_M(&k1(), &ONE, &w, &cfg()).unwrap();
        assert!((r.value - 5.0 / 64.0).abs() < 1e-9, "{}", r.value);
        let r = one_over_M(&k2(), &ONE, &w, &cfg()).unwrap();
        assert!((r.value - 3.0 / 128.0).abs() < 1e-9, "{}", r.value);
        let point = ConeWindow::new(0.3, 0.3);
        assert_eq!(one_over_M(&k1(), &ONE, &point, &cfg()).unwrap().value, 0.0);
    }

    #[test]
    fn kernel_moment_examples() {
        let full = script_k_integral(
            &k1(),
            &ONE,
            &[(1.0 / 3.0, 1.0 / 130.0)],
            Range::Full,
            &cfg(),
        )
        .unwrap();
        assert!((full - 17.0 / 9360.0).abs() < 1e-15);
        assert_eq!(
            script_k_integral(&k1(), &ONE, &[], Range::Full, &cfg()).unwrap(),
            0.0
        );
        let w = Range::Window(ConeWindow::new(0.25, 0.5));
        let win = script_k_integral(&k2(), &ONE, &[(0.4, 0.01)], w, &cfg()).unwrap();
        assert!((win - 3.25e-4).abs() < 1e-8, "{win}");
    }

    #[test]
    fn alpha_functionals() {
        let p = KernelParams1::new(2.0, 0.25).unwrap();
        let fb = FunctionalBound {
            offset: 0.0,
            masses: vec![PointMass {
                profile: Profile::U,
                node: 1.0 / 3.0,
                coeff: 1.0 / 130.0,
            }],
            direction: Direction::Lower,
        };
        let value = fb.alpha(Profile::U, |t| crate::kernel::gamma1(&p, t));
        assert!((value - 1.0 / 78.0).abs() < 1e-15);
        assert_eq!(fb.alpha(Profile::V, |_| 1.0), 0.0);
        let fb = FunctionalBound {
            offset: 0.0,
            masses: vec![PointMass {
                profile: Profile::V,
                node: 2.0 / 7.0,
                coeff: 0.1,
            }],
            direction: Direction::Upper,
        };
        assert_eq!(fb.alpha_one(Profile::V), 0.1);
        let q = KernelParams2::new(1.0 / 3.0, 0.5).unwrap();
        let fb = FunctionalBound {
            offset: 0.0,
            masses: vec![PointMass {
                profile: Profile::V,
                node: 0.4,
                coeff: 0.1,
            }],
            direction: Direction::Upper,
        };
        assert!((fb.alpha(Profile::V, |t| crate::kernel::gamma2(&q, t)) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn functional_bound_validation() {
        let mut fb = FunctionalBound::zero(Direction::Upper);
        assert!(fb.validate().is_ok());
        fb.masses.push(PointMass {
            profile: Profile::U,
            node: 0.5,
            coeff: -1.0,
        });
        assert!(fb.validate().is_err());
    }

    #[test]
    fn box_extrema_examples() {
        let f1 = parse("0.3*(u^3+abs(v)^3)+0.5").unwrap();
        let sup = sup_f_over_box(&f1, Rect::new([0.0, 2.01], [-1.0, 1.0]), &cfg()).unwrap();
        assert!((sup.value - 3.236).abs() < 1e-3);
        let f2 = parse("sqrt(u)+v^2+1").unwrap();
        let inf = inf_f_over_box(&f2, Rect::new([0.0, 160.0], [11.0, 44.0]), &cfg()).unwrap();
        assert_eq!(inf.value, 122.0);
        assert_eq!(inf.at, [0.0, 11.0]);
        let c = parse("2.5").unwrap();
        let r = Rect::new([0.0, 1.0], [-3.0, 3.0]);
        assert_eq!(sup_f_over_box(&c, r, &cfg()).unwrap().value, 2.5);
        assert_eq!(inf_f_over_box(&c, r, &cfg()).unwrap().value, 2.5);
    }

    #[test]
    fn box_errors_carry_location() {
        let f = parse("log(v)").unwrap();
        let err = sup_f_over_box(&f, Rect::new([0.0, 1.0], [-1.0, 1.0]), &cfg()).unwrap_err();
        assert!(matches!(err, QuadError::Eval { .. }));
        assert!(err.to_string().contains("(u, v)"));
    }

    #[test]
    fn box_extrema_are_monotone_under_inclusion() {
        let f = parse("sin(3*u)*cos(v) + u*v").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let small = QuadratureConfig {
            scan_resolution: 16,
            box_rounds: 1,
            ..cfg()
        };
        for _ in 0..20 {
            let u0 = rng.gen_range(0.0..1.0);
            let v0 = rng.gen_range(-1.0..1.0);
            let inner = Rect::new([u0, u0 + 0.5], [v0, v0 + 0.5]);
            let outer = Rect::new([u0 - 0.0, u0 + 1.0], [v0 - 0.5, v0 + 1.0]);
            assert!(outer.contains(&inner));
            let (si, so) = (
                sup_f_over_box(&f, inner, &small).unwrap(),
                sup_f_over_box(&f, outer, &small).unwrap(),
            );
            let (ii, io) = (
                inf_f_over_box(&f, inner, &small).unwrap(),
                inf_f_over_box(&f, outer, &small).unwrap(),
            );
            assert!(si.value >= ii.value);
            // Grids differ between boxes; allow the scan's own resolution error.
            assert!(so.value >= si.value - 1e-3);
            assert!(io.value <= ii.value + 1e-3);
        }
    }

    #[test]
    fn monotone_functions_hit_corners() {
        let f = parse("u^2 + exp(v)").unwrap();
        let r = Rect::new([0.5, 3.0], [-2.0, 1.5]);
        let sup = sup_f_over_box(&f, r, &cfg()).unwrap();
        let inf = inf_f_over_box(&f, r, &cfg()).unwrap();
        assert_eq!(sup.value, f.eval(&Env::uv(3.0, 1.5)).unwrap());
        assert_eq!(inf.value, f.eval(&Env::uv(0.5, -2.0)).unwrap());
    }

    #[test]
    fn stabilization_under_doubling() {
        let k = Kernel::MultiPoint2(KernelParams2::new(0.5, 1.0 / 3.0).unwrap());
        for norm in [KernelNorm::Abs, KernelNorm::Split] {
            let a = one_over_m(&k, &ONE, norm, &cfg()).unwrap().value;
            let b = one_over_m(&k, &ONE, norm, &cfg().doubled()).unwrap().value;
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_weight_is_integrated() {
        let w = Weight::Unit(parse("t^(-0.5)").unwrap());
        let value = check_integrable(&dirichlet(), &w, &cfg()).unwrap();
        // ∫ s^{-1/2} s(1 − s) = 2/3 − 2/5.
        assert!((value - (2.0 / 3.0 - 0.4)).abs() < 1e-7);
        let bad = Weight::Unit(parse("t^(-2.5)").unwrap());
        assert!(check_integrable(&dirichlet(), &bad, &cfg()).is_err());
    }
}
