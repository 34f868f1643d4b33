//! Green's kernels of the two multi-point problems and of the Dirichlet
//! problem on `[0, 1]`, together with their envelopes `Φ`, the boundary
//! profiles `γ` and the cone constants.
//!
//! Every kernel is affine in `s` between consecutive entries of
//! [`Kernel::s_breakpoints`] (plus `s = t`); the quadrature relies on this.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("{name} = {value} lies outside [0, 1]")]
    Domain { name: &'static str, value: f64 },
    #[error("inadmissible parameters: {0}")]
    Admissibility(String),
    #[error("inadmissible cone window [{a}, {b}]: {reason}")]
    Window { a: f64, b: f64, reason: String },
}

fn unit(name: &'static str, value: f64) -> Result<(), KernelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(KernelError::Domain { name, value })
    }
}

/// `(β₁, η)` of the condition `u(1) = β₁ u(η)`; admissible when `1 ≤ β₁ < 1/η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams1 {
    pub beta1: f64,
    pub eta: f64,
}

impl KernelParams1 {
    pub fn new(beta1: f64, eta: f64) -> Result<Self, KernelError> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(KernelError::Admissibility(format!(
                "eta = {eta} must lie in (0, 1)"
            )));
        }
        if !(beta1 >= 1.0) {
            return Err(KernelError::Admissibility(format!(
                "beta1 = {beta1} violates 1 <= beta1"
            )));
        }
        if !(beta1 * eta < 1.0) {
            return Err(KernelError::Admissibility(format!(
                "beta1 = {beta1} violates beta1 < 1/eta = {}",
                1.0 / eta
            )));
        }
        Ok(Self { beta1, eta })
    }

    fn denom(&self) -> f64 {
        1.0 - self.beta1 * self.eta
    }

    pub fn norm_gamma(&self) -> f64 {
        self.beta1 * (1.0 - self.eta) / self.denom()
    }
}

/// `(β₂, ξ)` of the condition `v(1) = β₂ v'(ξ)`; admissible when `0 ≤ β₂ < 1 − ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams2 {
    pub beta2: f64,
    pub xi: f64,
}

impl KernelParams2 {
    pub fn new(beta2: f64, xi: f64) -> Result<Self, KernelError> {
        if !(xi > 0.0 && xi < 1.0) {
            return Err(KernelError::Admissibility(format!(
                "xi = {xi} must lie in (0, 1)"
            )));
        }
        if !(beta2 >= 0.0) {
            return Err(KernelError::Admissibility(format!(
                "beta2 = {beta2} violates 0 <= beta2"
            )));
        }
        if !(beta2 < 1.0 - xi) {
            return Err(KernelError::Admissibility(format!(
                "beta2 = {beta2} violates beta2 < 1 - xi = {}",
                1.0 - xi
            )));
        }
        Ok(Self { beta2, xi })
    }

    pub fn norm_gamma(&self) -> f64 {
        if self.beta2 >= 0.5 {
            self.beta2 / (1.0 - self.beta2)
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeWindow {
    pub a: f64,
    pub b: f64,
}

impl ConeWindow {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.a && t <= self.b
    }

    fn reject(&self, reason: impl Into<String>) -> KernelError {
        KernelError::Window {
            a: self.a,
            b: self.b,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeConstants {
    pub c_k: f64,
    pub c_gamma: f64,
    pub c: f64,
    pub norm_gamma: f64,
}

impl ConeConstants {
    fn new(c_k: f64, c_gamma: f64, norm_gamma: f64) -> Self {
        Self {
            c_k,
            c_gamma,
            c: c_k.min(c_gamma),
            norm_gamma,
        }
    }
}

pub fn eval_k1(p: &KernelParams1, t: f64, s: f64) -> Result<f64, KernelError> {
    unit("t", t)?;
    unit("s", s)?;
    Ok(k1(p, t, s))
}

pub fn eval_k2(p: &KernelParams2, t: f64, s: f64) -> Result<f64, KernelError> {
    unit("t", t)?;
    unit("s", s)?;
    Ok(k2(p, t, s))
}

pub fn eval_k_dirichlet(t: f64, s: f64) -> Result<f64, KernelError> {
    unit("t", t)?;
    unit("s", s)?;
    Ok(k_dirichlet(t, s))
}

fn k1(p: &KernelParams1, t: f64, s: f64) -> f64 {
    let d = p.denom();
    let mut k = t * (1.0 - s) / d;
    if s <= p.eta {
        k -= p.beta1 * t * (p.eta - s) / d;
    }
    if s <= t {
        k -= t - s;
    }
    k
}

fn k2(p: &KernelParams2, t: f64, s: f64) -> f64 {
    let d = 1.0 - p.beta2;
    let mut k = t * (1.0 - s) / d;
    if s <= p.xi {
        k -= p.beta2 * t / d;
    }
    if s <= t {
        k -= t - s;
    }
    k
}

fn k_dirichlet(t: f64, s: f64) -> f64 {
    if s <= t {
        s * (1.0 - t)
    } else {
        t * (1.0 - s)
    }
}

pub fn phi1(p: &KernelParams1, s: f64) -> f64 {
    p.beta1 * s * (1.0 - s) / p.denom()
}

pub fn phi2(p: &KernelParams2, s: f64) -> f64 {
    (1.0f64).max(p.beta2 / p.xi) * s * (1.0 - s) / (1.0 - p.beta2)
}

pub fn phi_dirichlet(s: f64) -> f64 {
    s * (1.0 - s)
}

pub fn gamma1(p: &KernelParams1, t: f64) -> f64 {
    1.0 + (p.beta1 - 1.0) * t / p.denom()
}

pub fn gamma2(p: &KernelParams2, t: f64) -> f64 {
    1.0 - t / (1.0 - p.beta2)
}

/// Slope of `γ₂`, constant in `t`.
pub fn gamma2_prime(p: &KernelParams2) -> f64 {
    -1.0 / (1.0 - p.beta2)
}

pub fn gamma_dirichlet(side: DirichletGamma, t: f64) -> f64 {
    match side {
        DirichletGamma::Rising => t,
        DirichletGamma::Falling => 1.0 - t,
    }
}

pub fn cone_constants_1(p: &KernelParams1, w: &ConeWindow) -> Result<ConeConstants, KernelError> {
    if !(w.a > 0.0 && w.a <= w.b && w.b <= 1.0) {
        return Err(w.reject("component 1 needs 0 < a <= b <= 1"));
    }
    let (beta, eta, d) = (p.beta1, p.eta, p.denom());
    let c_k = (w.a * eta).min(4.0 * w.a * d * eta).min(eta * d);
    let c_gamma = (beta - 1.0) / (beta * (1.0 - eta)) * w.a + d / (beta * (1.0 - eta));
    Ok(ConeConstants::new(c_k, c_gamma, p.norm_gamma()))
}

pub fn cone_constants_2(p: &KernelParams2, w: &ConeWindow) -> Result<ConeConstants, KernelError> {
    let (beta, xi) = (p.beta2, p.xi);
    if !(w.a > 0.0 && w.a <= w.b && w.b < 1.0 - beta) {
        return Err(w.reject(format!(
            "component 2 needs 0 < a <= b < 1 - beta2 = {}",
            1.0 - beta
        )));
    }
    let spread = (1.0f64).max(beta / xi);
    let c_k = (4.0 * w.a * (1.0 - beta - xi)).min(1.0 - w.b - beta) / spread;
    let c_gamma = if beta >= 0.5 {
        (1.0 - beta) / beta - w.b / beta
    } else {
        1.0 - w.b / (1.0 - beta)
    };
    Ok(ConeConstants::new(c_k, c_gamma, p.norm_gamma()))
}

pub fn cone_constants_dirichlet(
    side: DirichletGamma,
    w: &ConeWindow,
) -> Result<ConeConstants, KernelError> {
    if !(w.a > 0.0 && w.a <= w.b && w.b < 1.0) {
        return Err(w.reject("the Dirichlet window must satisfy 0 < a <= b < 1"));
    }
    let c_gamma = match side {
        DirichletGamma::Rising => w.a,
        DirichletGamma::Falling => 1.0 - w.b,
    };
    Ok(ConeConstants::new(w.a.min(1.0 - w.b), c_gamma, 1.0))
}

/// Boundary profile of a Dirichlet component: `γ(t) = t` when the
/// functional sits at `t = 1`, `γ(t) = 1 − t` when it sits at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DirichletGamma {
    #[default]
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    MultiPoint1(KernelParams1),
    MultiPoint2(KernelParams2),
    Dirichlet(DirichletGamma),
}

impl Kernel {
    /// Unchecked evaluation; callers keep `t, s` in `[0, 1]`.
    #[inline]
    pub fn value(&self, t: f64, s: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s));
        match self {
            Kernel::MultiPoint1(p) => k1(p, t, s),
            Kernel::MultiPoint2(p) => k2(p, t, s),
            Kernel::Dirichlet(_) => k_dirichlet(t, s),
        }
    }

    pub fn eval(&self, t: f64, s: f64) -> Result<f64, KernelError> {
        unit("t", t)?;
        unit("s", s)?;
        Ok(self.value(t, s))
    }

    pub fn phi(&self, s: f64) -> f64 {
        match self {
            Kernel::MultiPoint1(p) => phi1(p, s),
            Kernel::MultiPoint2(p) => phi2(p, s),
            Kernel::Dirichlet(_) => phi_dirichlet(s),
        }
    }

    pub fn gamma(&self, t: f64) -> f64 {
        match self {
            Kernel::MultiPoint1(p) => gamma1(p, t),
            Kernel::MultiPoint2(p) => gamma2(p, t),
            Kernel::Dirichlet(side) => gamma_dirichlet(*side, t),
        }
    }

    pub fn norm_gamma(&self) -> f64 {
        match self {
            Kernel::MultiPoint1(p) => p.norm_gamma(),
            Kernel::MultiPoint2(p) => p.norm_gamma(),
            Kernel::Dirichlet(_) => 1.0,
        }
    }

    pub fn cone_constants(&self, w: &ConeWindow) -> Result<ConeConstants, KernelError> {
        match self {
            Kernel::MultiPoint1(p) => cone_constants_1(p, w),
            Kernel::MultiPoint2(p) => cone_constants_2(p, w),
            Kernel::Dirichlet(side) => cone_constants_dirichlet(*side, w),
        }
    }

    /// Fixed interior breakpoints in `s` (the moving breakpoint `s = t` is
    /// added by callers).
    pub fn s_breakpoints(&self) -> Vec<f64> {
        match self {
            Kernel::MultiPoint1(p) => vec![p.eta],
            Kernel::MultiPoint2(p) => vec![p.xi],
            Kernel::Dirichlet(_) => Vec::new(),
        }
    }

    /// Whether the kernel is nonnegative on the unit square, i.e. whether
    /// the associated cone consists of nonnegative functions.
    pub fn is_nonnegative(&self) -> bool {
        !matches!(self, Kernel::MultiPoint2(p) if p.beta2 > 0.0)
    }
}
