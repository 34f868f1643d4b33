//! Change of variables between the radial problem on `|x| ≥ R₁` in `ℝⁿ`
//! and the two-point problem on `(0, 1]`.
//!
//! With `r(t) = R₁ t^{1/(2−n)}` the point `t = 1` is the sphere `|x| = R₁`
//! and `t → 0` is spatial infinity.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Env, EvalError, Expr};
use crate::kernel::{
    ConeWindow, DirichletGamma, Kernel, KernelError, KernelParams1, KernelParams2,
};
use crate::quad::{self, QuadratureConfig};
use crate::solver::GridPair;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("t = 0 corresponds to spatial infinity")]
    Infinity,
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("weight g{component} at t = {t}: {source}")]
    Weight {
        component: usize,
        t: f64,
        #[source]
        source: EvalError,
    },
    #[error("weight g{component} is negative at t = {t} (value {value})")]
    NegativeWeight {
        component: usize,
        t: f64,
        value: f64,
    },
    #[error("h{component}({rho}) = {value} exceeds the declared decay bound {bound}")]
    Decay {
        component: usize,
        rho: f64,
        value: f64,
        bound: f64,
    },
    #[error("the weighted envelope of component {component} vanishes on its cone window")]
    DegenerateWindow { component: usize },
    #[error("g{component}·Φ{component} is not integrable: {detail}")]
    NotIntegrable { component: usize, detail: String },
}

fn check_dimension(n: u32, r1: f64) -> Result<(), TransformError> {
    if n < 3 {
        return Err(TransformError::Domain(format!(
            "dimension n = {n} must be at least 3"
        )));
    }
    if !(r1 > 0.0) {
        return Err(TransformError::Domain(format!(
            "inner radius R1 = {r1} must be positive"
        )));
    }
    Ok(())
}

fn exponent(n: u32) -> f64 {
    2.0 - n as f64
}

pub fn r_of_t(n: u32, r1: f64, t: f64) -> Result<f64, TransformError> {
    check_dimension(n, r1)?;
    if t == 0.0 {
        return Err(TransformError::Infinity);
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(TransformError::Domain(format!("t = {t} outside (0, 1]")));
    }
    Ok(r1 * t.powf(1.0 / exponent(n)))
}

pub fn t_of_r(n: u32, r1: f64, r: f64) -> Result<f64, TransformError> {
    check_dimension(n, r1)?;
    if !(r >= r1) || !r.is_finite() {
        return Err(TransformError::Domain(format!(
            "r = {r} below the inner radius {r1}"
        )));
    }
    Ok((r / r1).powf(exponent(n)).min(1.0))
}

/// `φ(t) = r(t) R₁ / (n−2)² · t^{(2n−3)/(2−n)}`.
pub fn phi_weight(n: u32, r1: f64, t: f64) -> Result<f64, TransformError> {
    let r = r_of_t(n, r1, t)?;
    let nf = n as f64;
    Ok(r * r1 / (nf - 2.0).powi(2) * t.powf((2.0 * nf - 3.0) / exponent(n)))
}

/// Weight `g(t)` multiplying the nonlinearity on the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Constant(f64),
    /// Expression in `t`.
    Unit(Expr),
    /// `φ(t)·h(r(t))` with `h` an expression in `r`.
    Radial {
        n: u32,
        r1: f64,
        h: Expr,
    },
}

impl Weight {
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        match self {
            Weight::Constant(c) => Ok(*c),
            Weight::Unit(e) => e.eval(&Env::t(t)),
            Weight::Radial { n, r1, h } => {
                let domain = |e: TransformError| EvalError::Domain {
                    expr: format!("phi({t})"),
                    value: if matches!(e, TransformError::Infinity) {
                        f64::INFINITY
                    } else {
                        f64::NAN
                    },
                };
                let r = r_of_t(*n, *r1, t).map_err(domain)?;
                let phi = phi_weight(*n, *r1, t).map_err(domain)?;
                Ok(phi * h.eval(&Env::r(r))?)
            }
        }
    }

    /// Constant weights need no grading of the panel touching `t = 0`.
    pub fn is_constant(&self) -> bool {
        match self {
            Weight::Constant(_) => true,
            Weight::Unit(e) => e.is_constant(),
            Weight::Radial { .. } => false,
        }
    }
}

/// One component of the problem on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Component {
    pub kernel: Kernel,
    pub weight: Weight,
    pub f: Expr,
    pub window: ConeWindow,
}

#[derive(Debug, Clone)]
pub struct UnitProblem {
    pub components: [Component; 2],
}

impl UnitProblem {
    /// Checks the sampled sign of the weights, integrability of `gΦ` and the
    /// positivity of `∫_a^b Φ g`.
    pub fn validate(&self, cfg: &QuadratureConfig) -> Result<(), TransformError> {
        for (idx, comp) in self.components.iter().enumerate() {
            let i = idx + 1;
            comp.kernel.cone_constants(&comp.window)?;
            for j in 1..=1000 {
                let t = j as f64 / 1000.0;
                let value = comp
                    .weight
                    .eval(t)
                    .map_err(|source| TransformError::Weight {
                        component: i,
                        t,
                        source,
                    })?;
                if value < 0.0 {
                    return Err(TransformError::NegativeWeight {
                        component: i,
                        t,
                        value,
                    });
                }
            }
            quad::check_integrable(&comp.kernel, &comp.weight, cfg).map_err(|e| {
                TransformError::NotIntegrable {
                    component: i,
                    detail: e.to_string(),
                }
            })?;
            let w = comp.window;
            let mass = quad::integrate(
                |s| Ok(comp.kernel.phi(s) * comp.weight.eval(s)?),
                w.a,
                w.b,
                &[],
                false,
                cfg,
            )
            .map_err(|e| TransformError::NotIntegrable {
                component: i,
                detail: e.to_string(),
            })?;
            if !(mass > 0.0) && w.a < w.b {
                return Err(TransformError::DegenerateWindow { component: i });
            }
        }
        Ok(())
    }
}

/// Boundary conditions on the sphere `|x| = R₁`.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialBc {
    /// `u(R₁x) = β₁u(R_η x)` and `v(R₁x) = δ₁ ∂v/∂r(R_ξ x)`.
    MultiPoint {
        r_eta: f64,
        r_xi: f64,
        delta1: f64,
        beta1: f64,
    },
    /// Dirichlet data on both ends; the functional sits at the sphere
    /// (`Rising`) or at infinity (`Falling`) per component.
    Dirichlet { gamma: [DirichletGamma; 2] },
}

#[derive(Debug, Clone)]
pub struct RadialProblem {
    pub n: u32,
    pub r1: f64,
    pub bc: RadialBc,
    pub h: [Expr; 2],
    pub f: [Expr; 2],
    pub decay_mu: Option<[f64; 2]>,
    pub windows: [ConeWindow; 2],
}

/// Parameters forced by the change of variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiPointData {
    pub eta: f64,
    pub xi: f64,
    pub beta1: f64,
    pub beta2: f64,
}

pub fn multipoint_data(
    n: u32,
    r1: f64,
    r_eta: f64,
    r_xi: f64,
    delta1: f64,
    beta1: f64,
) -> Result<MultiPointData, TransformError> {
    check_dimension(n, r1)?;
    for (name, r) in [("R_eta", r_eta), ("R_xi", r_xi)] {
        if !(r > r1) {
            return Err(TransformError::Domain(format!(
                "{name} = {r} must exceed R1 = {r1}"
            )));
        }
    }
    let eta = t_of_r(n, r1, r_eta)?;
    let xi = t_of_r(n, r1, r_xi)?;
    let beta2 = exponent(n) * delta1 * xi / r_xi;
    Ok(MultiPointData {
        eta,
        xi,
        beta1,
        beta2,
    })
}

const DECAY_SAMPLES: usize = 32;

pub fn make_unit_problem(rp: &RadialProblem) -> Result<UnitProblem, TransformError> {
    check_dimension(rp.n, rp.r1)?;
    if let Some(mu) = rp.decay_mu {
        check_decay(rp, mu)?;
    }
    let kernels = match &rp.bc {
        RadialBc::MultiPoint {
            r_eta,
            r_xi,
            delta1,
            beta1,
        } => {
            let d = multipoint_data(rp.n, rp.r1, *r_eta, *r_xi, *delta1, *beta1)?;
            [
                Kernel::MultiPoint1(KernelParams1::new(d.beta1, d.eta)?),
                Kernel::MultiPoint2(KernelParams2::new(d.beta2, d.xi)?),
            ]
        }
        RadialBc::Dirichlet { gamma } => [Kernel::Dirichlet(gamma[0]), Kernel::Dirichlet(gamma[1])],
    };
    let build = |i: usize| Component {
        kernel: kernels[i],
        weight: Weight::Radial {
            n: rp.n,
            r1: rp.r1,
            h: rp.h[i].clone(),
        },
        f: rp.f[i].clone(),
        window: rp.windows[i],
    };
    Ok(UnitProblem {
        components: [build(0), build(1)],
    })
}

// Sampled on ρ ∈ [10³R₁, 10⁶R₁]; this is a plausibility check, not a proof.
fn check_decay(rp: &RadialProblem, mu: [f64; 2]) -> Result<(), TransformError> {
    for (i, h) in rp.h.iter().enumerate() {
        for k in 0..DECAY_SAMPLES {
            let rho = rp.r1 * 10f64.powf(3.0 + 3.0 * k as f64 / (DECAY_SAMPLES - 1) as f64);
            let value = h
                .eval(&Env::r(rho))
                .map_err(|source| TransformError::Weight {
                    component: i + 1,
                    t: t_of_r(rp.n, rp.r1, rho).unwrap_or(0.0),
                    source,
                })?;
            let bound = rho.powf(-(rp.n as f64 + mu[i]));
            if value > bound * (1.0 + 1e-12) {
                return Err(TransformError::Decay {
                    component: i + 1,
                    rho,
                    value,
                    bound,
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialSample {
    pub r: f64,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    /// Samples sorted by increasing radius.
    pub samples: Vec<RadialSample>,
    /// `(u, v)` as `r → ∞`, extrapolated linearly to `t = 0`.
    pub limit_at_infinity: [f64; 2],
}

pub fn profile_to_radial(
    grid: &GridPair,
    n: u32,
    r1: f64,
) -> Result<RadialProfile, TransformError> {
    let mut samples = grid
        .nodes
        .iter()
        .zip(grid.u.iter().zip(&grid.v))
        .map(|(&t, (&u, &v))| {
            Ok(RadialSample {
                r: r_of_t(n, r1, t)?,
                u,
                v,
            })
        })
        .collect::<Result<Vec<_>, TransformError>>()?;
    samples.reverse();
    Ok(RadialProfile {
        samples,
        limit_at_infinity: [grid.interp(0, 0.0), grid.interp(1, 0.0)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn change_of_variables_examples() {
        assert_eq!(r_of_t(3, 1.0, 1.0).unwrap(), 1.0);
        assert!((r_of_t(3, 1.0, 0.25).unwrap() - 4.0).abs() < 1e-12);
        let back = t_of_r(3, 1.0, r_of_t(3, 1.0, 0.37).unwrap()).unwrap();
        assert!((back - 0.37).abs() < 1e-12);
        assert_eq!(r_of_t(3, 1.0, 0.0), Err(TransformError::Infinity));
        assert!(t_of_r(3, 2.0, 1.0).is_err());
        assert!(r_of_t(2, 1.0, 0.5).is_err());
    }

    #[test]
    fn inverse_pair_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(3..=8);
            let r1 = rng.gen_range(0.1..10.0);
            let t = rng.gen_range(1e-3..=1.0);
            let r = r_of_t(n, r1, t).unwrap();
            let back = t_of_r(n, r1, r).unwrap();
            assert!(((back - t) / t).abs() < 1e-12, "n={n} r1={r1} t={t}");
        }
    }

    #[test]
    fn r_of_t_is_decreasing() {
        let mut prev = f64::INFINITY;
        for j in 1..=100 {
            let r = r_of_t(4, 2.0, j as f64 / 100.0).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn phi_examples() {
        for t in [0.1, 0.5, 0.9] {
            let phi = phi_weight(3, 1.0, t).unwrap();
            assert!((phi - t.powi(-4)).abs() < 1e-12 * phi);
        }
        assert!((phi_weight(3, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((phi_weight(4, 1.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(phi_weight(3, 1.0, 0.0).is_err());
    }

    fn section_two() -> RadialProblem {
        RadialProblem {
            n: 3,
            r1: 1.0,
            bc: RadialBc::MultiPoint {
                r_eta: 4.0,
                r_xi: 2.0,
                delta1: -4.0 / 3.0,
                beta1: 2.0,
            },
            h: [parse("r^(-4)").unwrap(), parse("r^(-4)").unwrap()],
            f: [parse("0").unwrap(), parse("0").unwrap()],
            decay_mu: Some([0.5, 0.5]),
            windows: [ConeWindow::new(0.25, 0.5), ConeWindow::new(0.25, 0.5)],
        }
    }

    #[test]
    fn section_two_parameters() {
        let up = make_unit_problem(&section_two()).unwrap();
        match (up.components[0].kernel, up.components[1].kernel) {
            (Kernel::MultiPoint1(a), Kernel::MultiPoint2(b)) => {
                assert!((a.eta - 0.25).abs() < 1e-12);
                assert_eq!(a.beta1, 2.0);
                assert!((b.xi - 0.5).abs() < 1e-12);
                assert!((b.beta2 - 1.0 / 3.0).abs() < 1e-12);
            }
            other => panic!("unexpected kernels {other:?}"),
        }
        up.validate(&QuadratureConfig::default()).unwrap();
    }

    #[test]
    fn inverse_square_weight_is_unity() {
        let up = make_unit_problem(&section_two()).unwrap();
        for j in 1..=1000 {
            let t = j as f64 / 1000.0;
            let g = up.components[0].weight.eval(t).unwrap();
            assert!((g - 1.0).abs() < 1e-12, "t={t} g={g}");
        }
    }

    #[test]
    fn deterministic_parameters() {
        let a = multipoint_data(3, 1.0, 4.0, 2.0, -4.0 / 3.0, 2.0).unwrap();
        let b = multipoint_data(3, 1.0, 4.0, 2.0, -4.0 / 3.0, 2.0).unwrap();
        assert_eq!(a.eta.to_bits(), b.eta.to_bits());
        assert_eq!(a.beta2.to_bits(), b.beta2.to_bits());
    }

    #[test]
    fn inadmissible_transform_names_inequality() {
        let mut rp = section_two();
        rp.bc = RadialBc::MultiPoint {
            r_eta: 4.0,
            r_xi: 2.0,
            delta1: -4.0 / 3.0,
            beta1: 5.0,
        };
        let err = make_unit_problem(&rp).unwrap_err();
        assert!(err.to_string().contains("beta1 < 1/eta"), "{err}");
        rp.bc = RadialBc::MultiPoint {
            r_eta: 4.0,
            r_xi: 2.0,
            delta1: 4.0 / 3.0,
            beta1: 2.0,
        };
        assert!(make_unit_problem(&rp)
            .unwrap_err()
            .to_string()
            .contains("0 <= beta2"));
    }

    #[test]
    fn decay_violation_is_detected() {
        let mut rp = section_two();
        rp.h[1] = parse("r^(-3)").unwrap();
        assert!(matches!(
            make_unit_problem(&rp),
            Err(TransformError::Decay { component: 2, .. })
        ));
    }

    #[test]
    fn flat_gamma_when_beta1_is_one() {
        let mut rp = section_two();
        rp.bc = RadialBc::MultiPoint {
            r_eta: 4.0,
            r_xi: 2.0,
            delta1: -4.0 / 3.0,
            beta1: 1.0,
        };
        let up = make_unit_problem(&rp).unwrap();
        assert_eq!(up.components[0].kernel.gamma(0.6), 1.0);
    }

    #[test]
    fn radial_profile_mapping() {
        let grid = GridPair::new(vec![1.0 / 3.0, 0.5, 1.0], vec![2.0; 3], vec![2.0; 3]);
        let prof = profile_to_radial(&grid, 3, 1.0).unwrap();
        assert_eq!(prof.samples.first().unwrap().r, 1.0);
        assert!((prof.samples.last().unwrap().r - 3.0).abs() < 1e-12);
        assert!(prof.samples.windows(2).all(|w| w[0].r < w[1].r));
        assert!(prof.samples.iter().all(|s| s.u == 2.0 && s.v == 2.0));
        assert_eq!(prof.limit_at_infinity, [2.0, 2.0]);
    }
}
