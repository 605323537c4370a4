//! Real-coefficient polynomials, companion-matrix root finding and the
//! reciprocal bracket used to locate unit-circle root-locus crossings.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// Trailing coefficients at or below this fraction of the largest magnitude are trimmed.
pub const TRIM_RELATIVE: f64 = 1e-12;

/// Roots closer than this (relative to `max(1, |z|)`) are merged into one cluster.
pub const CLUSTER_RELATIVE: f64 = 1e-6;

const NEWTON_POLISH_STEPS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("no roots defined for a polynomial of degree {}", fmt_degree(*.0))]
    NoRoots(Option<usize>),
    #[error("zero polynomial is not allowed here")]
    ZeroPolynomial,
}

fn fmt_degree(d: Option<usize>) -> String {
    d.map_or_else(|| "none".to_string(), |d| d.to_string())
}

/// Polynomial with real coefficients stored in ascending degree order.
///
/// The coefficient vector is always trimmed so that the last entry is the
/// (nonzero) leading coefficient. The zero polynomial has no coefficients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let cutoff = TRIM_RELATIVE * scale;
        while let Some(&last) = coeffs.last() {
            if last == 0.0 || last.abs() <= cutoff {
                coeffs.pop();
            } else {
                break;
            }
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// Monic polynomial with the given real roots.
    pub fn from_real_roots(roots: &[f64]) -> Self {
        roots
            .iter()
            .fold(Poly::constant(1.0), |acc, &r| &acc * &Poly::new(vec![-r, 1.0]))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> Option<f64> {
        self.coeffs.last().copied()
    }

    /// Coefficient of `z^i`, zero beyond the degree.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// Largest coefficient magnitude.
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, s: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Horner evaluation. The zero polynomial evaluates to zero everywhere.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    /// `z^r p(1/z)`; requires `r >= deg p`.
    pub fn reversed(&self, r: usize) -> Poly {
        assert!(
            self.degree().is_none_or(|d| d <= r),
            "reversal order below polynomial degree"
        );
        let mut out = vec![0.0; r + 1];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[r - i] = c;
        }
        Poly::new(out)
    }

    /// All complex roots with multiplicities, via companion-matrix eigenvalues
    /// followed by Newton polishing.
    pub fn roots(&self) -> Result<RootSet, PolyError> {
        let degree = match self.degree() {
            Some(d) if d >= 1 => d,
            other => return Err(PolyError::NoRoots(other)),
        };

        let zeros_at_origin = self.coeffs.iter().take_while(|&&c| c == 0.0).count();
        let deflated = Poly::new(self.coeffs[zeros_at_origin..].to_vec());
        let mut raw: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); zeros_at_origin];

        let reduced_degree = degree - zeros_at_origin;
        if reduced_degree == 1 {
            raw.push(Complex64::new(-deflated.coeffs[0] / deflated.coeffs[1], 0.0));
        } else if reduced_degree > 1 {
            let lead = deflated.coeffs[reduced_degree];
            let mut companion = DMatrix::<f64>::zeros(reduced_degree, reduced_degree);
            for j in 0..reduced_degree {
                companion[(0, j)] = -deflated.coeffs[reduced_degree - 1 - j] / lead;
            }
            for i in 1..reduced_degree {
                companion[(i, i - 1)] = 1.0;
            }
            let derivative = deflated.derivative();
            for z in companion.complex_eigenvalues().iter() {
                raw.push(newton_polish(&deflated, &derivative, *z));
            }
        }

        pair_conjugates(&mut raw);
        let roots = cluster_roots(&raw);
        let residual = roots
            .iter()
            .map(|r| self.eval(r.value).norm())
            .fold(0.0, f64::max);
        Ok(RootSet { roots, residual })
    }

    /// `max{|z| : p(z) = 0}`.
    pub fn spectral_radius(&self) -> Result<f64, PolyError> {
        Ok(self.roots()?.spectral_radius())
    }
}

fn newton_polish(p: &Poly, dp: &Poly, start: Complex64) -> Complex64 {
    let mut z = start;
    let mut best = p.eval(z).norm();
    for _ in 0..NEWTON_POLISH_STEPS {
        let d = dp.eval(z);
        if d.norm() == 0.0 {
            break;
        }
        let candidate = z - p.eval(z) / d;
        let r = p.eval(candidate).norm();
        if !(r < best) {
            break;
        }
        z = candidate;
        best = r;
    }
    z
}

/// Forces exact conjugate symmetry of a root list from a real polynomial.
fn pair_conjugates(roots: &mut [Complex64]) {
    let mut upper: Vec<usize> = Vec::new();
    let mut lower: Vec<usize> = Vec::new();
    for (i, z) in roots.iter().enumerate() {
        if z.im > 0.0 {
            upper.push(i);
        } else if z.im < 0.0 {
            lower.push(i);
        }
    }
    // Unmatched roots with the smallest imaginary parts are snapped to the real axis.
    while upper.len() > lower.len() {
        let (pos, _) = upper
            .iter()
            .enumerate()
            .min_by(|a, b| roots[*a.1].im.abs().total_cmp(&roots[*b.1].im.abs()))
            .unwrap();
        let idx = upper.remove(pos);
        roots[idx].im = 0.0;
    }
    while lower.len() > upper.len() {
        let (pos, _) = lower
            .iter()
            .enumerate()
            .min_by(|a, b| roots[*a.1].im.abs().total_cmp(&roots[*b.1].im.abs()))
            .unwrap();
        let idx = lower.remove(pos);
        roots[idx].im = 0.0;
    }
    let mut available = lower;
    for &u in &upper {
        let target = roots[u].conj();
        let (pos, &l) = available
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (roots[*a.1] - target)
                    .norm()
                    .total_cmp(&(roots[*b.1] - target).norm())
            })
            .unwrap();
        available.remove(pos);
        let avg = (roots[u] + roots[l].conj()) * 0.5;
        roots[u] = avg;
        roots[l] = avg.conj();
    }
}

fn cluster_roots(raw: &[Complex64]) -> Vec<Root> {
    let mut clusters: Vec<(Complex64, Vec<Complex64>)> = Vec::new();
    for &z in raw {
        let hit = clusters.iter_mut().find(|(center, _)| {
            (z - *center).norm() <= CLUSTER_RELATIVE * 1f64.max(z.norm()).max(center.norm())
        });
        match hit {
            Some((center, members)) => {
                members.push(z);
                let n = members.len() as f64;
                *center = members.iter().sum::<Complex64>() / n;
            }
            None => clusters.push((z, vec![z])),
        }
    }
    let mut roots: Vec<Root> = clusters
        .into_iter()
        .map(|(value, members)| Root {
            value,
            multiplicity: members.len(),
        })
        .collect();
    roots.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    roots
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{}", c.abs())?,
                1 => write!(f, "{}q", c.abs())?,
                _ => write!(f, "{}q^{i}", c.abs())?,
            }
        }
        Ok(())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scaled(-1.0)
    }
}

macro_rules! forward_owned_binop {
    ($tr:ident, $method:ident) => {
        impl $tr for Poly {
            type Output = Poly;
            fn $method(self, rhs: Poly) -> Poly {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// Distinct roots with multiplicities, sorted by real then imaginary part.
#[derive(Clone, Debug, Serialize)]
pub struct RootSet {
    pub roots: Vec<Root>,
    /// `max |p(z)|` over the returned (distinct) roots.
    pub residual: f64,
}

impl RootSet {
    /// Sum of multiplicities.
    pub fn degree(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.roots.iter().map(|r| r.value.norm()).fold(0.0, f64::max)
    }

    /// Roots repeated according to multiplicity.
    pub fn expanded(&self) -> Vec<Complex64> {
        self.roots
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.value, r.multiplicity))
            .collect()
    }
}

/// `h(z) = z^r [D(z) N(1/z) - N(z) D(1/z)]` with `r = max(deg N, deg D)`,
/// formed by coefficient convolution.
///
/// Every unit-circle point at which `N(z) D(conj z)` is real is a root of `h`.
pub fn reciprocal_bracket(num: &Poly, den: &Poly) -> Result<Poly, PolyError> {
    let (Some(dn), Some(dd)) = (num.degree(), den.degree()) else {
        return Err(PolyError::ZeroPolynomial);
    };
    let r = dn.max(dd);
    Ok(&(den * &num.reversed(r)) - &(num * &den.reversed(r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn second_order_loop_den() -> Poly {
        Poly::new(vec![0.5, -1.0, 1.0])
    }

    #[test]
    fn trims_trailing_zeros() {
        let p = Poly::new(vec![1.0, 2.0, 0.0, 1e-20]);
        assert_eq!(p.degree(), Some(1));
        assert_eq!(Poly::new(vec![0.0, 0.0]).degree(), None);
        assert!(Poly::new(vec![]).is_zero());
    }

    #[test]
    fn eval_examples() {
        let lin = Poly::new(vec![-1.0, 1.0]);
        assert_eq!(lin.eval(c(1.0, 0.0)), c(0.0, 0.0));
        let d = second_order_loop_den();
        assert!((d.eval(c(-1.0, 0.0)) - c(2.5, 0.0)).norm() < 1e-15);
        let on_circle = Complex64::from_polar(1.0, std::f64::consts::PI);
        assert!((d.eval(on_circle) - c(2.5, 0.0)).norm() < 1e-14);
        assert_eq!(Poly::zero().eval(c(3.0, 1.0)), c(0.0, 0.0));
    }

    #[test]
    fn roots_require_positive_degree() {
        assert_eq!(Poly::zero().roots().unwrap_err(), PolyError::NoRoots(None));
        assert_eq!(
            Poly::constant(2.0).roots().unwrap_err(),
            PolyError::NoRoots(Some(0))
        );
    }

    #[test]
    fn roots_examples() {
        let r = Poly::new(vec![-1.0, 1.0]).roots().unwrap();
        assert_eq!(r.roots.len(), 1);
        assert!((r.roots[0].value - c(1.0, 0.0)).norm() < 1e-15);

        let r = second_order_loop_den().roots().unwrap();
        assert_eq!(r.degree(), 2);
        let mut got = r.expanded();
        got.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((got[0] - c(0.5, -0.5)).norm() < 1e-14);
        assert!((got[1] - c(0.5, 0.5)).norm() < 1e-14);

        let s41 = 41f64.sqrt();
        let r = Poly::new(vec![-2.0, 1.5, 1.0]).roots().unwrap();
        let vals: Vec<f64> = r.roots.iter().map(|z| z.value.re).collect();
        assert!((vals[0] - (-0.75 - 0.25 * s41)).abs() < 1e-14);
        assert!((vals[1] - (-0.75 + 0.25 * s41)).abs() < 1e-14);
        assert!(r.roots.iter().all(|z| z.value.im == 0.0));
    }

    #[test]
    fn spectral_radius_examples() {
        let s = second_order_loop_den().spectral_radius().unwrap();
        assert!((s - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((Poly::new(vec![-1.0, 1.0]).spectral_radius().unwrap() - 1.0).abs() < 1e-15);
        let s = Poly::new(vec![-2.0, 1.5, 1.0]).spectral_radius().unwrap();
        assert!((s - (0.75 + 0.25 * 41f64.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn multiplicities_are_clustered() {
        // (z - 0.5)^2 (z + 0.25) z^2
        let p = &Poly::from_real_roots(&[0.5, 0.5, -0.25]) * &Poly::new(vec![0.0, 0.0, 1.0]);
        let r = p.roots().unwrap();
        assert_eq!(r.degree(), 5);
        let mults: Vec<usize> = r.roots.iter().map(|z| z.multiplicity).collect();
        assert_eq!(mults, vec![1, 2, 2]);
        assert!((r.roots[2].value - c(0.5, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn reciprocal_bracket_antisymmetric() {
        let d = second_order_loop_den();
        assert!(reciprocal_bracket(&d, &d).unwrap().is_zero());
        assert_eq!(
            reciprocal_bracket(&Poly::zero(), &d).unwrap_err(),
            PolyError::ZeroPolynomial
        );
    }

    #[test]
    fn reciprocal_bracket_second_order_loop_matches_hand_expansion() {
        let n = Poly::new(vec![-1.0, 1.0]);
        let h = reciprocal_bracket(&n, &second_order_loop_den()).unwrap();
        // (1 - z)(1 + z)(z^2 - 1.5 z + 1) = 1 - 1.5 z + 1.5 z^3 - z^4
        let expected = &(&Poly::new(vec![1.0, -1.0]) * &Poly::new(vec![1.0, 1.0]))
            * &Poly::new(vec![1.0, -1.5, 1.0]);
        assert_eq!(expected.coeffs(), &[1.0, -1.5, 0.0, 1.5, -1.0]);
        assert_eq!(h.coeffs(), expected.coeffs());

        let unit: Vec<f64> = h
            .roots()
            .unwrap()
            .roots
            .iter()
            .filter(|z| (z.value.norm() - 1.0).abs() < 1e-9)
            .map(|z| z.value.arg().abs())
            .collect();
        assert_eq!(unit.len(), 4);
        assert!(unit.iter().any(|t| (t - 0.75f64.acos()).abs() < 1e-12));
        assert!(unit.iter().any(|t| (t - std::f64::consts::PI).abs() < 1e-12));
    }

    /// Direct evaluation of `z^r [D(z) N(1/z) - N(z) D(1/z)]` in complex arithmetic.
    fn bracket_by_evaluation(n: &Poly, d: &Poly, z: Complex64) -> Complex64 {
        let r = n.degree().unwrap().max(d.degree().unwrap()) as i32;
        let inv = z.inv();
        z.powi(r) * (d.eval(z) * n.eval(inv) - n.eval(z) * d.eval(inv))
    }

    fn coeff_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        (1..max_len).prop_flat_map(|deg| {
            (
                proptest::collection::vec(-1.0f64..1.0, deg),
                prop_oneof![0.5f64..2.0, -2.0f64..-0.5],
            )
                .prop_map(|(mut v, lead)| {
                    v.push(lead);
                    v
                })
        })
    }

    proptest! {
        #[test]
        fn random_roots_have_small_residual(coeffs in coeff_vec(9)) {
            let p = Poly::new(coeffs);
            let r = p.roots().unwrap();
            prop_assert_eq!(r.degree(), p.degree().unwrap());
            prop_assert!(r.residual < 1e-8, "residual {}", r.residual);
        }

        #[test]
        fn roots_come_in_conjugate_pairs(coeffs in coeff_vec(9)) {
            let r = Poly::new(coeffs).roots().unwrap();
            for z in &r.roots {
                let mate = r.roots.iter().find(|w| (w.value - z.value.conj()).norm() == 0.0);
                prop_assert!(mate.is_some());
                prop_assert_eq!(mate.unwrap().multiplicity, z.multiplicity);
            }
        }

        #[test]
        fn spectral_radius_of_product(a in coeff_vec(5), b in coeff_vec(5)) {
            let p = Poly::new(a);
            let q = Poly::new(b);
            let lhs = (&p * &q).spectral_radius().unwrap();
            let rhs = p.spectral_radius().unwrap().max(q.spectral_radius().unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-9, "{} vs {}", lhs, rhs);
        }

        #[test]
        fn bracket_matches_direct_evaluation(a in coeff_vec(6), b in coeff_vec(6), re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let n = Poly::new(a);
            let d = Poly::new(b);
            let z = c(re, im);
            prop_assume!(z.norm() > 0.1);
            let h = reciprocal_bracket(&n, &d).unwrap();
            let direct = bracket_by_evaluation(&n, &d, z);
            prop_assert!((h.eval(z) - direct).norm() < 1e-9 * (1.0 + direct.norm()));
        }

        #[test]
        fn bracket_roots_are_reciprocal_symmetric(a in coeff_vec(5), b in coeff_vec(5)) {
            let n = Poly::new(a);
            let d = Poly::new(b);
            let h = reciprocal_bracket(&n, &d).unwrap();
            prop_assume!(h.degree().is_some_and(|k| k >= 1));
            let scale = h.scale();
            for z in h.roots().unwrap().roots {
                if z.multiplicity > 1 || z.value.norm() < 1e-3 || z.value.norm() > 1e3 {
                    continue;
                }
                let at_inverse = h.eval(z.value.inv());
                let w = z.value.inv().norm().max(1.0).powi(h.degree().unwrap() as i32);
                prop_assert!(at_inverse.norm() < 1e-7 * scale * w, "{} at {}", at_inverse, z.value);
            }
        }
    }
}
