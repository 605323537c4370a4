//! Seeded generators of valid systems for property tests and benchmarks.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::poly::Poly;
use crate::realization::{validate, TransferFunction};

/// Poles are drawn inside this radius.
pub const POLE_RADIUS: f64 = 0.9;

/// Monic polynomial with the given roots, which must be closed under conjugation.
fn from_roots(roots: &[Complex64]) -> Poly {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        coeffs = next;
    }
    Poly::new(coeffs.iter().map(|c| c.re).collect())
}

/// `count` roots, real or in conjugate pairs, with modulus in `radius`.
fn random_roots(rng: &mut ChaCha8Rng, count: usize, radius: (f64, f64)) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r = rng.random_range(radius.0..radius.1);
        if count - out.len() >= 2 && rng.random_bool(0.5) {
            let z = Complex64::from_polar(r, rng.random_range(0.2..std::f64::consts::PI - 0.2));
            out.push(z);
            out.push(z.conj());
        } else {
            out.push(Complex64::new(if rng.random_bool(0.5) { r } else { -r }, 0.0));
        }
    }
    out
}

/// Valid `G = N/D` of order in `orders`: stable poles, `N = (z - 1) prod (z - w)`
/// with every other zero away from the unit circle, `deg N < deg D`.
pub fn random_system(seed: u64, orders: RangeInclusive<usize>) -> TransferFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(orders.clone());
        let m = rng.random_range(1..=n - 1);
        let den = from_roots(&random_roots(&mut rng, n, (0.05, POLE_RADIUS)));
        let zeros = if rng.random_bool(0.5) {
            random_roots(&mut rng, m - 1, (0.05, 0.85))
        } else {
            random_roots(&mut rng, m - 1, (1.15, 2.5))
        };
        let gain = rng.random_range(0.3..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let num = (&Poly::new(vec![-1.0, 1.0]) * &from_roots(&zeros)).scaled(gain);
        if let Ok(g) = validate(&num, &den) {
            return g;
        }
    }
}
