//! Envelope bounds, boundary identities and the ODE residual of the three
//! Green's kernels.

mod common;

use extrad_core::kernel::{
    cone_constants_1, cone_constants_2, cone_constants_dirichlet, eval_k1, eval_k2,
    eval_k_dirichlet, phi1, phi2, phi_dirichlet,
};
use extrad_core::{ConeWindow, DirichletGamma, KernelParams1, KernelParams2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{derivative, green, Poly};

const SAMPLES: usize = 10_000;
const SLACK: f64 = 1e-12;

fn p1() -> KernelParams1 {
    KernelParams1::new(2.0, 0.25).unwrap()
}

fn p2() -> KernelParams2 {
    KernelParams2::new(1.0 / 3.0, 0.5).unwrap()
}

#[test]
fn k1_envelopes_on_random_points() {
    let p = p1();
    let w = ConeWindow::new(0.25, 0.5);
    let ck = cone_constants_1(&p, &w).unwrap().c_k;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..SAMPLES {
        let (t, s): (f64, f64) = (rng.gen(), rng.gen());
        let k = eval_k1(&p, t, s).unwrap();
        assert!(
            k >= -SLACK && k <= phi1(&p, s) + SLACK,
            "k1({t}, {s}) = {k}"
        );
        let tw = w.a + (w.b - w.a) * rng.gen::<f64>();
        assert!(eval_k1(&p, tw, s).unwrap() >= ck * phi1(&p, s) - SLACK);
    }
}

#[test]
fn k2_envelopes_and_sign_region_on_random_points() {
    let p = p2();
    let w = ConeWindow::new(0.25, 0.5);
    let ck = cone_constants_2(&p, &w).unwrap().c_k;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..SAMPLES {
        let (t, s): (f64, f64) = (rng.gen(), rng.gen());
        let k = eval_k2(&p, t, s).unwrap();
        assert!(k.abs() <= phi2(&p, s) + SLACK, "k2({t}, {s}) = {k}");
        let tw = w.a + (w.b - w.a) * rng.gen::<f64>();
        assert!(eval_k2(&p, tw, s).unwrap() >= ck * phi2(&p, s) - SLACK);
        let tn = 1.0 - p.beta2 + p.beta2 * rng.gen::<f64>();
        let sn = p.xi * rng.gen::<f64>();
        assert!(eval_k2(&p, tn, sn).unwrap() <= SLACK, "k2({tn}, {sn}) > 0");
    }
}

#[test]
fn dirichlet_envelopes_on_random_points() {
    let w = ConeWindow::new(0.25, 0.75);
    let ck = cone_constants_dirichlet(DirichletGamma::Rising, &w)
        .unwrap()
        .c_k;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..SAMPLES {
        let (t, s): (f64, f64) = (rng.gen(), rng.gen());
        let k = eval_k_dirichlet(t, s).unwrap();
        assert!(k >= -SLACK && k <= phi_dirichlet(s) + SLACK);
        let tw = w.a + (w.b - w.a) * rng.gen::<f64>();
        assert!(eval_k_dirichlet(tw, s).unwrap() >= ck * phi_dirichlet(s) - SLACK);
    }
}

proptest! {
    #[test]
    fn k1_upper_envelope_for_admissible_parameters(
        eta in 0.05f64..0.95,
        frac in 0.0f64..0.999,
        t in 0.0f64..=1.0,
        s in 0.0f64..=1.0,
    ) {
        let beta1 = 1.0 + frac * (1.0 / eta - 1.0);
        prop_assume!(beta1 * eta < 1.0 - 1e-6);
        let p = KernelParams1::new(beta1, eta).unwrap();
        let k = eval_k1(&p, t, s).unwrap();
        prop_assert!(k >= -1e-12 * (1.0 + phi1(&p, s)));
        prop_assert!(k <= phi1(&p, s) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn k2_upper_envelope_for_admissible_parameters(
        xi in 0.05f64..0.95,
        frac in 0.0f64..0.999,
        t in 0.0f64..=1.0,
        s in 0.0f64..=1.0,
    ) {
        let beta2 = frac * (1.0 - xi);
        let p = KernelParams2::new(beta2, xi).unwrap();
        let k = eval_k2(&p, t, s).unwrap();
        prop_assert!(k.abs() <= phi2(&p, s) * (1.0 + 1e-12) + 1e-12);
    }
}

#[test]
fn boundary_identities_for_polynomial_forcings() {
    let (a, b) = (p1(), p2());
    let k1 = |t, s| eval_k1(&a, t, s).unwrap();
    let k2 = |t, s| eval_k2(&b, t, s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let y = Poly::random(&mut rng);
        let u = |t| green(&k1, &y, t, Some(a.eta));
        assert!(u(0.0).abs() < 1e-12);
        assert!(
            (u(1.0) - a.beta1 * u(a.eta)).abs() < 1e-9,
            "u(1) = {}",
            u(1.0)
        );
        let v = |t| green(&k2, &y, t, Some(b.xi));
        assert!(v(0.0).abs() < 1e-12);
        let dv = derivative(v, b.xi);
        assert!(
            (v(1.0) - b.beta2 * dv).abs() < 1e-9,
            "v(1) = {} vs {}",
            v(1.0),
            b.beta2 * dv
        );
        let d = |t| green(&|t, s| eval_k_dirichlet(t, s).unwrap(), &y, t, None);
        assert!(d(0.0).abs() < 1e-12 && d(1.0).abs() < 1e-12);
    }
}

#[test]
fn second_difference_residual_is_second_order() {
    let a = p1();
    let k1 = |t, s| eval_k1(&a, t, s).unwrap();
    let y = Poly(vec![1.0, -0.5, 2.0, 0.0, 3.0]);
    let t = 0.6;
    let residual = |h: f64| {
        let u = |x| green(&k1, &y, x, Some(a.eta));
        ((u(t + h) - 2.0 * u(t) + u(t - h)) / (h * h) + y.eval(t)).abs()
    };
    let hs = [0.04, 0.02, 0.01];
    let r: Vec<f64> = hs.iter().map(|&h| residual(h)).collect();
    for k in 0..2 {
        let order = (r[k] / r[k + 1]).log2();
        assert!(order >= 1.9, "observed order {order} from {r:?}");
    }
}
