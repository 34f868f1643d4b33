#![allow(dead_code)]

use std::path::PathBuf;

use extrad_core::quad::{integrate, QuadratureConfig};
use extrad_core::{ConeWindow, GridPair, Kernel, Problem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FIXTURES: [&str; 4] = ["ex-sec2", "ex-sec3", "ex-nonexist", "remark-split"];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn load(name: &str) -> Problem {
    Problem::from_json(&fixture_text(name)).unwrap()
}

/// Random member of the cone with constant `c` and radius up to `scale`:
/// a random profile lifted by `c/(1−c)` keeps its window minimum above
/// `c` times its sup norm. Cones that allow sign changes get negative
/// values outside the window.
pub fn cone_member(
    rng: &mut ChaCha8Rng,
    nodes: &[f64],
    windows: &[ConeWindow; 2],
    kernels: &[Kernel; 2],
    c: [f64; 2],
    scale: f64,
) -> GridPair {
    let mut profile = |comp: usize| -> Vec<f64> {
        let lift = c[comp] / (1.0 - c[comp]);
        let amp = scale * rng.gen::<f64>() / (1.0 + lift);
        let signed = !kernels[comp].is_nonnegative();
        nodes
            .iter()
            .map(|&t| {
                let raw: f64 = if signed && !windows[comp].contains(t) {
                    rng.gen_range(-1.0 + lift..=1.0)
                } else {
                    rng.gen()
                };
                amp * (raw + lift)
            })
            .collect()
    };
    let u = profile(0);
    let v = profile(1);
    GridPair::new(nodes.to_vec(), u, v)
}

/// Polynomial forcing `y(s) = Σ c_k s^k`.
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let degree = rng.gen_range(0..=4);
        Poly((0..=degree).map(|_| rng.gen_range(-2.0..2.0)).collect())
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }
}

/// `u(t) = ∫ k(t, s) y(s) ds`, split at `t` and the kernel breakpoint.
pub fn green<K: Fn(f64, f64) -> f64>(k: &K, y: &Poly, t: f64, breakpoint: Option<f64>) -> f64 {
    let mut bps = vec![t];
    bps.extend(breakpoint);
    integrate(
        |s| Ok(k(t, s) * y.eval(s)),
        0.0,
        1.0,
        &bps,
        false,
        &QuadratureConfig::default(),
    )
    .unwrap()
}

/// Fourth-order centered first derivative.
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = 1e-3;
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Spectral radius of a nonnegative square matrix by power iteration.
pub fn spectral_radius(a: &[f64], n: usize) -> f64 {
    let mut x = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let y: Vec<f64> = (0..n)
            .map(|r| (0..n).map(|c| a[r * n + c] * x[c]).sum())
            .collect();
        lambda = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        x = y.iter().map(|v| v / lambda).collect();
    }
    lambda
}
