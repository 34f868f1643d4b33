//! Nodal discretization of the perturbed Hammerstein system
//!
//! ```text
//! u(t) = γ₁(t) H₁[u, v] + ∫ k₁(t, s) g₁(s) f₁(u(s), v(s)) ds
//! v(t) = γ₂(t) H₂[u, v] + ∫ k₂(t, s) g₂(s) f₂(u(s), v(s)) ds
//! ```
//!
//! and its damped Picard / Anderson fixed-point iteration.
//!
//! Profiles live on nodes in `(0, 1]` and are interpolated linearly between
//! nodes (extrapolated on `[0, t₀]`). Nodes always contain the kernel
//! breakpoints, so every quadrature interval sees an affine kernel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Env, EvalError, Expr, PointValues, Profile};
use crate::kernel::{ConeWindow, Kernel, KernelError};
use crate::quad::{self, GaussRule, QuadratureConfig};
use crate::radial::UnitProblem;

pub const MIN_NODES: usize = 33;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("{what}: {source}")]
    Eval {
        what: String,
        #[source]
        source: EvalError,
    },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Discrete pair `(u, v)` on a common node set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPair {
    pub nodes: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Trapezoid weights; the node `t₀` also carries `[0, t₀]`.
    pub weights: Vec<f64>,
}

impl GridPair {
    /// Panics unless the lengths agree and `nodes` is strictly increasing
    /// in `(0, 1]` with at least two entries.
    pub fn new(nodes: Vec<f64>, u: Vec<f64>, v: Vec<f64>) -> Self {
        assert!(nodes.len() >= 2, "a grid needs at least two nodes");
        assert!(
            nodes.len() == u.len() && nodes.len() == v.len(),
            "profile lengths differ from node count"
        );
        assert!(
            nodes[0] > 0.0 && *nodes.last().unwrap() <= 1.0,
            "nodes must lie in (0, 1]"
        );
        assert!(
            nodes.windows(2).all(|w| w[0] < w[1]),
            "nodes must be strictly increasing"
        );
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        weights[0] = nodes[0];
        for j in 0..n - 1 {
            let h = 0.5 * (nodes[j + 1] - nodes[j]);
            weights[j] += h;
            weights[j + 1] += h;
        }
        Self {
            nodes,
            u,
            v,
            weights,
        }
    }

    pub fn constant(nodes: &[f64], u: f64, v: f64) -> Self {
        let n = nodes.len();
        Self::new(nodes.to_vec(), vec![u; n], vec![v; n])
    }

    pub fn from_fn<U: Fn(f64) -> f64, V: Fn(f64) -> f64>(nodes: &[f64], u: U, v: V) -> Self {
        Self::new(
            nodes.to_vec(),
            nodes.iter().map(|&t| u(t)).collect(),
            nodes.iter().map(|&t| v(t)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn component(&self, comp: usize) -> &[f64] {
        if comp == 0 {
            &self.u
        } else {
            &self.v
        }
    }

    /// Locates `t`: `x(t) = (1 − λ)·x[j] + λ·x[j + 1]`.
    fn bracket(&self, t: f64) -> (usize, f64) {
        let n = self.nodes.len();
        let j = match self.nodes.partition_point(|&x| x <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let (a, b) = (self.nodes[j], self.nodes[j + 1]);
        (j, (t - a) / (b - a))
    }

    /// Piecewise-linear interpolant; linear extrapolation below the first
    /// node, constant above the last.
    pub fn interp(&self, comp: usize, t: f64) -> f64 {
        let x = self.component(comp);
        if t >= *self.nodes.last().unwrap() {
            return *x.last().unwrap();
        }
        let (j, lam) = self.bracket(t);
        x[j] + lam * (x[j + 1] - x[j])
    }

    /// `max_j |x_j|`.
    pub fn sup_norm(&self, comp: usize) -> f64 {
        self.component(comp).iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Sup norm with a parabolic correction through the extremal node and
    /// its neighbours; removes the dependence on where the peak falls
    /// relative to the grid.
    pub fn sup_norm_refined(&self, comp: usize) -> f64 {
        let x = self.component(comp);
        let (k, peak) =
            x.iter().enumerate().fold(
                (0, 0.0),
                |(k, m), (j, v)| if v.abs() > m { (j, v.abs()) } else { (k, m) },
            );
        if k == 0 || k + 1 == x.len() {
            return peak;
        }
        let (t0, t1, t2) = (self.nodes[k - 1], self.nodes[k], self.nodes[k + 1]);
        let (y0, y1, y2) = (x[k - 1].abs(), x[k].abs(), x[k + 1].abs());
        let d01 = (y1 - y0) / (t1 - t0);
        let d12 = (y2 - y1) / (t2 - t1);
        let curv = (d12 - d01) / (t2 - t0);
        if curv >= 0.0 {
            return peak;
        }
        // Vertex of the interpolating parabola.
        let slope_mid = d01 + curv * (t1 - t0);
        let tv = t1 - slope_mid / (2.0 * curv);
        let value = y1 + slope_mid * (tv - t1) + curv * (tv - t1) * (tv - t1);
        value.max(peak)
    }

    /// Sup distance over nodes of both components; grids must match.
    pub fn distance(&self, other: &GridPair) -> f64 {
        assert_eq!(self.nodes.len(), other.nodes.len(), "grids differ");
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.v.iter().zip(&other.v))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Minimum of a component over the window: nodes inside plus the
    /// interpolated endpoint values.
    pub fn window_min(&self, comp: usize, w: &ConeWindow) -> (f64, f64) {
        let x = self.component(comp);
        let mut best = (self.interp(comp, w.a), w.a);
        let end = self.interp(comp, w.b);
        if end < best.0 {
            best = (end, w.b);
        }
        for (&t, &value) in self.nodes.iter().zip(x) {
            if w.contains(t) && value < best.0 {
                best = (value, t);
            }
        }
        best
    }

    fn flat(&self) -> Vec<f64> {
        self.u.iter().chain(&self.v).copied().collect()
    }

    fn with_flat(&self, flat: &[f64]) -> GridPair {
        let n = self.nodes.len();
        GridPair {
            nodes: self.nodes.clone(),
            u: flat[..n].to_vec(),
            v: flat[n..].to_vec(),
            weights: self.weights.clone(),
        }
    }
}

impl PointValues for GridPair {
    fn point_value(&self, profile: Profile, node: f64) -> f64 {
        self.interp(profile.index(), node)
    }
}

/// Point values with `u` clamped at 0, the domain of the functionals.
struct Clamped<'a>(&'a GridPair);

impl PointValues for Clamped<'_> {
    fn point_value(&self, profile: Profile, node: f64) -> f64 {
        let x = self.0.interp(profile.index(), node);
        match profile {
            Profile::U => x.max(0.0),
            Profile::V => x,
        }
    }
}

/// Uniform nodes `j/(n − 1)`, `j = 1..n−1`, with every extra point of
/// `(0, 1]` inserted. A uniform node within `h/1000` of an extra point is
/// replaced by it.
pub fn build_nodes(n: usize, extra: &[f64]) -> Result<Vec<f64>, SolverError> {
    if n < MIN_NODES {
        return Err(SolverError::Grid(format!(
            "grid size {n} is below the minimum {MIN_NODES}"
        )));
    }
    let h = 1.0 / (n - 1) as f64;
    let mut nodes: Vec<f64> = (1..n)
        .map(|j| if j + 1 == n { 1.0 } else { j as f64 * h })
        .collect();
    for &x in extra {
        if !(x > 0.0 && x <= 1.0) {
            continue;
        }
        let k = nodes.partition_point(|&y| y < x);
        let near = |j: usize| nodes.get(j).is_some_and(|&y| (y - x).abs() < 1e-3 * h);
        if near(k) {
            nodes[k] = x;
        } else if k > 0 && near(k - 1) {
            nodes[k - 1] = x;
        } else {
            nodes.insert(k, x);
        }
    }
    Ok(nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Damping `θ ∈ (0, 1]` of `x ← (1 − θ)x + θT(x)`.
    pub damping: f64,
    /// Anderson history length; 0 disables mixing.
    pub anderson_depth: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Residual above which the iteration is declared divergent.
    pub divergence: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            anderson_depth: 3,
            tol: 1e-10,
            max_iter: 10_000,
            divergence: 1e6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(format!("damping {} outside (0, 1]", self.damping));
        }
        if !(self.tol > 0.0) {
            return Err(format!("tolerance {} must be positive", self.tol));
        }
        Ok(())
    }
}

/// Precomputed quadrature of `T` on a fixed node set.
pub struct Discretization {
    pub nodes: Vec<f64>,
    points: Vec<f64>,
    /// Interpolation stencil per quadrature point.
    stencil: Vec<(usize, f64)>,
    /// Row-major `nodes × points`: `k(t_m, s_q) g(s_q) w_q`.
    matrices: [Vec<f64>; 2],
    gamma: [Vec<f64>; 2],
    f: [Expr; 2],
    h: [Expr; 2],
    kernels: [Kernel; 2],
    windows: [ConeWindow; 2],
}

impl Discretization {
    /// Nodes: `n` uniform points plus the kernel breakpoints, the cone
    /// windows and the point-evaluation nodes of `h_exact`.
    pub fn new(
        up: &UnitProblem,
        h_exact: &[Expr; 2],
        n: usize,
        cfg: &QuadratureConfig,
    ) -> Result<Self, SolverError> {
        let mut extra = Vec::new();
        for c in &up.components {
            extra.extend(c.kernel.s_breakpoints());
            extra.extend([c.window.a, c.window.b]);
        }
        for h in h_exact {
            extra.extend(h.point_nodes().into_iter().map(|(_, x)| x));
        }
        let nodes = build_nodes(n, &extra)?;
        Self::with_nodes(up, h_exact, nodes, cfg)
    }

    pub fn with_nodes(
        up: &UnitProblem,
        h_exact: &[Expr; 2],
        nodes: Vec<f64>,
        cfg: &QuadratureConfig,
    ) -> Result<Self, SolverError> {
        if nodes.len() < 2 || !nodes.windows(2).all(|w| w[0] < w[1]) || nodes[0] <= 0.0 {
            return Err(SolverError::Grid(
                "nodes must be strictly increasing in (0, 1]".into(),
            ));
        }
        let graded = up.components.iter().any(|c| !c.weight.is_constant());
        let layout = QuadratureConfig { panels: 1, ..*cfg };
        let rule = GaussRule::cached(cfg.order);
        let probe = GridPair::constant(&nodes, 0.0, 0.0);
        let mut points = Vec::new();
        let mut qw = Vec::new();
        for (a, b) in quad::panels(0.0, 1.0, &nodes, graded, &layout) {
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                points.push(mid + half * x);
                qw.push(half * w);
            }
        }
        let stencil: Vec<(usize, f64)> = points.iter().map(|&s| probe.bracket(s)).collect();
        let mut matrices: [Vec<f64>; 2] = Default::default();
        let mut gamma: [Vec<f64>; 2] = Default::default();
        for (i, comp) in up.components.iter().enumerate() {
            let gw = points
                .iter()
                .zip(&qw)
                .map(|(&s, &w)| {
                    comp.weight
                        .eval(s)
                        .map(|g| g * w)
                        .map_err(|source| SolverError::Eval {
                            what: format!("weight g{} at s = {s}", i + 1),
                            source,
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let kernel = comp.kernel;
            matrices[i] = nodes
                .par_iter()
                .flat_map_iter(|&t| {
                    points
                        .iter()
                        .zip(&gw)
                        .map(move |(&s, &w)| kernel.value(t, s) * w)
                        .collect::<Vec<_>>()
                })
                .collect();
            gamma[i] = nodes.iter().map(|&t| kernel.gamma(t)).collect();
        }
        Ok(Self {
            nodes,
            points,
            stencil,
            matrices,
            gamma,
            f: [up.components[0].f.clone(), up.components[1].f.clone()],
            h: h_exact.clone(),
            kernels: [up.components[0].kernel, up.components[1].kernel],
            windows: [up.components[0].window, up.components[1].window],
        })
    }

    pub fn kernels(&self) -> [Kernel; 2] {
        self.kernels
    }

    pub fn windows(&self) -> [ConeWindow; 2] {
        self.windows
    }

    pub fn zero(&self) -> GridPair {
        GridPair::constant(&self.nodes, 0.0, 0.0)
    }

    pub fn quadrature_points(&self) -> usize {
        self.points.len()
    }

    /// `T(u, v)` at the nodes.
    pub fn apply(&self, x: &GridPair) -> Result<GridPair, SolverError> {
        let n = self.nodes.len();
        debug_assert_eq!(x.len(), n);
        let interp = |xs: &[f64], q: usize| {
            let (j, lam) = self.stencil[q];
            (1.0 - lam) * xs[j] + lam * xs[j + 1]
        };
        let source = (0..self.points.len())
            .into_par_iter()
            .map(|q| {
                let env = Env::uv(interp(&x.u, q), interp(&x.v, q));
                let s = self.points[q];
                let eval = |i: usize| {
                    self.f[i].eval(&env).map_err(|source| SolverError::Eval {
                        what: format!("f{} at s = {s}", i + 1),
                        source,
                    })
                };
                Ok((eval(0)?, eval(1)?))
            })
            .collect::<Result<Vec<_>, SolverError>>()?;
        let clamped = Clamped(x);
        let mut out = [vec![0.0; n], vec![0.0; n]];
        for i in 0..2 {
            let hv = self.h[i]
                .eval(&Env::with_profile(&clamped))
                .map_err(|source| SolverError::Eval {
                    what: format!("H{}", i + 1),
                    source,
                })?;
            let fv: Vec<f64> = source
                .iter()
                .map(|p| if i == 0 { p.0 } else { p.1 })
                .collect();
            let m = self.points.len();
            let rows: Vec<f64> = self.matrices[i]
                .par_chunks(m)
                .map(|row| row.iter().zip(&fv).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            for (k, value) in rows.into_iter().enumerate() {
                out[i][k] = self.gamma[i][k] * hv + value;
            }
        }
        let [u, v] = out;
        Ok(GridPair {
            nodes: self.nodes.clone(),
            u,
            v,
            weights: x.weights.clone(),
        })
    }

    /// `max |x − T(x)|` over nodes of both components.
    pub fn residual(&self, x: &GridPair) -> Result<f64, SolverError> {
        Ok(x.distance(&self.apply(x)?))
    }

    /// Linear part `x ↦ ∫ k_i g_i x` as a row-major `nodes × nodes` matrix
    /// (interpolation folded in).
    pub fn node_matrix(&self, comp: usize) -> Vec<f64> {
        let n = self.nodes.len();
        let m = self.points.len();
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            let row = &self.matrices[comp][r * m..(r + 1) * m];
            for (q, &w) in row.iter().enumerate() {
                let (j, lam) = self.stencil[q];
                out[r * n + j] += (1.0 - lam) * w;
                out[r * n + j + 1] += lam * w;
            }
        }
        out
    }

    pub fn cone_check(&self, x: &GridPair) -> Result<[ConeCheck; 2], SolverError> {
        Ok([
            cone_check(x, 0, &self.kernels[0], &self.windows[0])?,
            cone_check(x, 1, &self.kernels[1], &self.windows[1])?,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeCheck {
    pub member: bool,
    /// `min(min_window x − c‖x‖, min x)`; the second term only for cones
    /// of nonnegative functions.
    pub margin: f64,
    /// Node of the worst inequality when `member` is false.
    pub witness: Option<f64>,
    pub norm: f64,
    pub window_min: f64,
    pub c: f64,
    pub nonnegative: bool,
}

pub fn cone_check(
    x: &GridPair,
    comp: usize,
    kernel: &Kernel,
    window: &ConeWindow,
) -> Result<ConeCheck, KernelError> {
    let c = kernel.cone_constants(window)?.c;
    let norm = x.sup_norm(comp);
    let (wmin, wat) = x.window_min(comp, window);
    let mut margin = wmin - c * norm;
    let mut at = wat;
    let nonnegative = kernel.is_nonnegative();
    if nonnegative {
        for (&t, &value) in x.nodes.iter().zip(x.component(comp)) {
            if value < margin {
                margin = value;
                at = t;
            }
        }
    }
    let member = margin >= -1e-12 * (1.0 + norm);
    Ok(ConeCheck {
        member,
        margin,
        witness: (!member).then_some(at),
        norm,
        window_min: wmin,
        c,
        nonnegative,
    })
}

/// Membership of a profile in `K_ρ` (`‖u‖ < ρ₁`, `‖v‖ < ρ₂`) and in `V_ρ`
/// (window minima below `ρ₁`, `ρ₂`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Localization {
    pub label: String,
    pub radii: [f64; 2],
    pub in_k: bool,
    pub in_v: bool,
}

pub fn localization_check(
    x: &GridPair,
    label: &str,
    radii: [f64; 2],
    windows: &[ConeWindow; 2],
) -> Localization {
    let in_k = x.sup_norm(0) < radii[0] && x.sup_norm(1) < radii[1];
    let in_v =
        x.window_min(0, &windows[0]).0 < radii[0] && x.window_min(1, &windows[1]).0 < radii[1];
    Localization {
        label: label.to_string(),
        radii,
        in_k,
        in_v,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIter,
    Diverged,
    EvalFailure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub solution: GridPair,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub cone: Option<[ConeCheck; 2]>,
    pub localization: Vec<Localization>,
    /// Constant initial values `(u₀, v₀)` when started from a seed.
    pub seed: Option<[f64; 2]>,
}

/// Least squares `min ‖f − ΔF γ‖` by regularized normal equations.
fn anderson_coefficients(df: &[Vec<f64>], f: &[f64]) -> Option<Vec<f64>> {
    let m = df.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for i in 0..m {
        for j in 0..m {
            a[i][j] = df[i].iter().zip(&df[j]).map(|(x, y)| x * y).sum();
        }
        a[i][m] = df[i].iter().zip(f).map(|(x, y)| x * y).sum();
    }
    let trace: f64 = (0..m).map(|i| a[i][i]).sum();
    if !(trace > 0.0) {
        return None;
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1e-14 * trace;
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        a.swap(col, pivot);
        if a[col][col].abs() < 1e-300 {
            return None;
        }
        for r in col + 1..m {
            let factor = a[r][col] / a[col][col];
            for c in col..=m {
                a[r][c] -= factor * a[col][c];
            }
        }
    }
    let mut gamma = vec![0.0; m];
    for r in (0..m).rev() {
        let tail: f64 = (r + 1..m).map(|c| a[r][c] * gamma[c]).sum();
        gamma[r] = (a[r][m] - tail) / a[r][r];
    }
    gamma.iter().all(|g| g.is_finite()).then_some(gamma)
}

fn sup(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Damped Picard iteration with optional Anderson mixing. Failures to
/// converge are reported in the outcome, not as errors.
pub fn solve_fixed_point(
    disc: &Discretization,
    init: &GridPair,
    cfg: &SolverConfig,
) -> SolveOutcome {
    let theta = cfg.damping;
    let finish = |x: GridPair, residual: f64, iterations: usize, stop: StopReason| {
        let converged = stop == StopReason::Converged;
        let cone = disc.cone_check(&x).ok();
        SolveOutcome {
            solution: x,
            residual,
            iterations,
            converged,
            stop,
            cone,
            localization: Vec::new(),
            seed: None,
        }
    };
    let residual_of = |x: &[f64]| -> Result<Vec<f64>, SolverError> {
        let tx = disc.apply(&init.with_flat(x))?.flat();
        Ok(tx.iter().zip(x).map(|(a, b)| a - b).collect())
    };
    let mut x = init.flat();
    let mut f = match residual_of(&x) {
        Ok(f) => f,
        Err(e) => {
            return finish(
                init.clone(),
                f64::INFINITY,
                0,
                StopReason::EvalFailure(e.to_string()),
            )
        }
    };
    let mut dx: Vec<Vec<f64>> = Vec::new();
    let mut df: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    loop {
        let res = sup(&f);
        if !res.is_finite() || res > cfg.divergence {
            return finish(init.with_flat(&x), res, iterations, StopReason::Diverged);
        }
        if res < cfg.tol {
            return finish(init.with_flat(&x), res, iterations, StopReason::Converged);
        }
        if iterations >= cfg.max_iter {
            return finish(init.with_flat(&x), res, iterations, StopReason::MaxIter);
        }
        let plain: Vec<f64> = x.iter().zip(&f).map(|(a, b)| a + theta * b).collect();
        let mixed = if cfg.anderson_depth > 0 && !df.is_empty() {
            anderson_coefficients(&df, &f).map(|gamma| {
                let mut next = plain.clone();
                for (k, g) in gamma.iter().enumerate() {
                    for (j, value) in next.iter_mut().enumerate() {
                        *value -= g * (dx[k][j] + theta * df[k][j]);
                    }
                }
                next
            })
        } else {
            None
        };
        let (next, fnext) = match mixed.map(|m| residual_of(&m).map(|r| (m, r))) {
            Some(Ok(pair)) if pair.1.iter().all(|v| v.is_finite()) => pair,
            _ => {
                dx.clear();
                df.clear();
                match residual_of(&plain) {
                    Ok(r) => (plain, r),
                    Err(e) => {
                        return finish(
                            init.with_flat(&x),
                            res,
                            iterations,
                            StopReason::EvalFailure(e.to_string()),
                        )
                    }
                }
            }
        };
        if cfg.anderson_depth > 0 {
            dx.push(next.iter().zip(&x).map(|(a, b)| a - b).collect());
            df.push(fnext.iter().zip(&f).map(|(a, b)| a - b).collect());
            if dx.len() > cfg.anderson_depth {
                dx.remove(0);
                df.remove(0);
            }
        }
        x = next;
        f = fnext;
        iterations += 1;
    }
}

/// Constant starting values: the origin, every ladder radius and the
/// midpoint of each shell `(ρ/c, r)` between consecutive radii.
pub fn shell_seeds(radii: &[[f64; 2]], c: [f64; 2]) -> Vec<[f64; 2]> {
    let mut seeds = vec![[0.0, 0.0]];
    for pair in radii.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        seeds.push([0.5 * (lo[0] / c[0] + hi[0]), 0.5 * (lo[1] / c[1] + hi[1])]);
    }
    seeds.extend_from_slice(radii);
    let mut out: Vec<[f64; 2]> = Vec::new();
    for s in seeds {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Solves from every seed, keeps converged outcomes and drops those within
/// `max(10·tol, 1e−6·scale)` of an earlier one.
pub fn multi_start_search(
    disc: &Discretization,
    seeds: &[[f64; 2]],
    ladder: &[(String, [f64; 2])],
    cfg: &SolverConfig,
) -> Vec<SolveOutcome> {
    let outcomes: Vec<SolveOutcome> = seeds
        .par_iter()
        .map(|&[u0, v0]| {
            let mut out = solve_fixed_point(disc, &GridPair::constant(&disc.nodes, u0, v0), cfg);
            out.seed = Some([u0, v0]);
            out
        })
        .collect();
    let mut kept: Vec<SolveOutcome> = Vec::new();
    for mut out in outcomes.into_iter().filter(|o| o.converged) {
        let scale = 1.0f64
            .max(out.solution.sup_norm(0))
            .max(out.solution.sup_norm(1));
        let threshold = (10.0 * cfg.tol).max(1e-6 * scale);
        if kept
            .iter()
            .any(|k| k.solution.distance(&out.solution) <= threshold)
        {
            continue;
        }
        out.localization = ladder
            .iter()
            .map(|(label, radii)| localization_check(&out.solution, label, *radii, &disc.windows))
            .collect();
        kept.push(out);
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::kernel::{DirichletGamma, KernelParams1, KernelParams2};
    use crate::radial::{Component, Weight};

    fn component(kernel: Kernel, f: &str, window: ConeWindow) -> Component {
        Component {
            kernel,
            weight: Weight::Constant(1.0),
            f: parse(f).unwrap(),
            window,
        }
    }

    fn multipoint(f1: &str, f2: &str) -> UnitProblem {
        let w = ConeWindow::new(0.25, 0.5);
        UnitProblem {
            components: [
                component(
                    Kernel::MultiPoint1(KernelParams1::new(2.0, 0.25).unwrap()),
                    f1,
                    w,
                ),
                component(
                    Kernel::MultiPoint2(KernelParams2::new(1.0 / 3.0, 0.5).unwrap()),
                    f2,
                    w,
                ),
            ],
        }
    }

    fn zero_h() -> [Expr; 2] {
        [parse("0").unwrap(), parse("0").unwrap()]
    }

    #[test]
    fn nodes_contain_breakpoints() {
        let nodes = build_nodes(33, &[0.25, 1.0 / 3.0, 0.5, 2.0 / 7.0]).unwrap();
        for x in [0.25, 1.0 / 3.0, 0.5, 2.0 / 7.0, 1.0] {
            assert!(nodes.contains(&x), "{x}");
        }
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(build_nodes(17, &[]).is_err());
    }

    #[test]
    fn interpolation_and_extrapolation() {
        let g = GridPair::from_fn(&[0.25, 0.5, 1.0], |t| 2.0 * t + 1.0, |t| -t);
        assert_eq!(g.interp(0, 0.0), 1.0);
        assert!((g.interp(0, 0.75) - 2.5).abs() < 1e-15);
        assert_eq!(g.interp(1, 1.0), -1.0);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn refined_norm_recovers_parabola_peak() {
        let nodes: Vec<f64> = (1..=10).map(|j| j as f64 / 10.0).collect();
        let g = GridPair::from_fn(&nodes, |t| 1.0 - (t - 0.537) * (t - 0.537), |_| 0.0);
        assert!((g.sup_norm_refined(0) - 1.0).abs() < 1e-12);
        assert!(g.sup_norm(0) < 1.0);
    }

    #[test]
    fn zero_problem_maps_to_zero() {
        let up = multipoint("0", "0");
        let disc = Discretization::new(&up, &zero_h(), 65, &QuadratureConfig::default()).unwrap();
        let x = GridPair::from_fn(&disc.nodes, |t| t.sin(), |t| t * t);
        let tx = disc.apply(&x).unwrap();
        assert!(tx.u.iter().chain(&tx.v).all(|&v| v == 0.0));
        let out = solve_fixed_point(&disc, &x, &SolverConfig::default());
        assert!(out.converged);
        assert!(out.iterations <= 2, "{}", out.iterations);
    }

    #[test]
    fn constant_forcing_probe() {
        let up = multipoint("1", "0");
        let disc = Discretization::new(&up, &zero_h(), 65, &QuadratureConfig::default()).unwrap();
        let tx = disc.apply(&disc.zero()).unwrap();
        for (&t, &u) in tx.nodes.iter().zip(&tx.u) {
            assert!((u - (0.875 * t - 0.5 * t * t)).abs() < 1e-13);
        }
        assert!((tx.interp(0, 1.0) - 2.0 * tx.interp(0, 0.25)).abs() < 1e-13);
    }

    #[test]
    fn dirichlet_zero_profile_image() {
        let w = ConeWindow::new(0.25, 0.75);
        let k = Kernel::Dirichlet(DirichletGamma::Rising);
        let up = UnitProblem {
            components: [
                component(k, "u^3+v^2+0.5", w),
                component(k, "sqrt(u)/2+v^2", w),
            ],
        };
        let h = [
            parse("1/10 + sqrt(v(1/2))/(2*sqrt(5))").unwrap(),
            parse("1/10 + u(1/3)^2/20").unwrap(),
        ];
        let disc = Discretization::new(&up, &h, 65, &QuadratureConfig::default()).unwrap();
        let tx = disc.apply(&disc.zero()).unwrap();
        for (&t, &u) in tx.nodes.iter().zip(&tx.u) {
            assert!((u - (0.1 * t + 0.25 * t * (1.0 - t))).abs() < 1e-13);
        }
    }

    #[test]
    fn cone_check_examples() {
        let p1 = Kernel::MultiPoint1(KernelParams1::new(2.0, 0.25).unwrap());
        let p2 = Kernel::MultiPoint2(KernelParams2::new(1.0 / 3.0, 0.5).unwrap());
        let w = ConeWindow::new(0.25, 0.5);
        let nodes = build_nodes(65, &[0.25, 0.5]).unwrap();
        let ones = GridPair::constant(&nodes, 1.0, 1.0);
        let c = cone_check(&ones, 0, &p1, &w).unwrap();
        assert!(c.member);
        assert!((c.margin - (1.0 - 1.0 / 16.0)).abs() < 1e-15);
        let g2 = GridPair::from_fn(&nodes, |_| 1.0, |t| p2.gamma(t));
        let c = cone_check(&g2, 1, &p2, &w).unwrap();
        assert!(c.member, "{c:?}");
        let bad = GridPair::from_fn(&nodes, |t| t - 0.5, |_| 1.0);
        let c = cone_check(&bad, 0, &p1, &w).unwrap();
        assert!(!c.member);
        assert!(c.witness.unwrap() < 0.5);
    }

    #[test]
    fn localization_examples() {
        let w = [ConeWindow::new(0.25, 0.5); 2];
        let nodes = build_nodes(33, &[]).unwrap();
        let g = GridPair::constant(&nodes, 0.5, 1.5);
        let loc = localization_check(&g, "rho", [1.0, 3.0], &w);
        assert!(loc.in_k && loc.in_v);
        let loc = localization_check(&g, "rho", [0.4, 3.0], &w);
        assert!(!loc.in_k && !loc.in_v);
    }

    #[test]
    fn seeds_and_deduplication() {
        let seeds = shell_seeds(&[[1.0, 1.0], [5.0, 5.0]], [0.25, 0.25]);
        assert_eq!(seeds[0], [0.0, 0.0]);
        assert_eq!(seeds[1], [4.5, 4.5]);
        let up = multipoint("0", "0");
        let disc = Discretization::new(&up, &zero_h(), 33, &QuadratureConfig::default()).unwrap();
        let found = multi_start_search(&disc, &seeds, &[], &SolverConfig::default());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].solution.sup_norm(0), 0.0);
    }

    #[test]
    fn divergence_is_reported() {
        let up = multipoint("40*u", "0");
        let disc = Discretization::new(&up, &zero_h(), 33, &QuadratureConfig::default()).unwrap();
        let cfg = SolverConfig {
            damping: 1.0,
            anderson_depth: 0,
            ..Default::default()
        };
        let out = solve_fixed_point(&disc, &GridPair::constant(&disc.nodes, 1.0, 0.0), &cfg);
        assert!(!out.converged);
        assert_eq!(out.stop, StopReason::Diverged);
    }

    #[test]
    fn anderson_solves_small_least_squares() {
        let df = vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0]];
        let g = anderson_coefficients(&df, &[3.0, 4.0, 5.0]).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-10 && (g[1] - 2.0).abs() < 1e-10);
    }
}
